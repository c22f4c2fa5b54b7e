//! Normal-interval bootstrap over per-pair scores and Spearman rank
//! correlation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PRNG used for resampling: ChaCha8 seeded from the run seed, one stream
/// per resample index.
pub const BOOTSTRAP_RNG: &str = "chacha8/seed_from_u64/stream-per-resample";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    pub pair_id: String,
    pub score: f64,
}

impl ScoreSample {
    pub fn new(pair_id: impl Into<String>, score: f64) -> Self {
        Self {
            pair_id: pair_id.into(),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub mean: f64,
    /// Standard deviation of the resample means.
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub half_width: f64,
    pub confidence: f64,
    pub n_resamples: usize,
    pub seed: u64,
    pub rng: String,
}

/// Percent-point function of the standard normal (Wichura's AS 241,
/// about 1e-16 relative accuracy).
#[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability {p} outside (0, 1)");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
                + 67265.770_927_008_700_853)
                * r
                + 45921.953_931_549_871_457)
                * r
                + 13731.693_765_509_461_125)
                * r
                + 1971.590_950_306_551_442_7)
                * r
                + 133.141_667_891_784_377_32)
                * r
                + 3.387_132_872_796_366_608)
            / (((((((5226.495_278_852_545_925 * r + 28729.085_735_721_942_674) * r
                + 39307.895_800_092_710_61)
                * r
                + 21213.794_301_586_595_867)
                * r
                + 5394.196_021_424_751_077_1)
                * r
                + 687.187_007_492_057_908_95)
                * r
                + 42.313_330_701_600_911_252)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = libm::sqrt(-libm::log(r));
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.745_450_142_783_414_076_4e-4 * r + 0.022_723_844_989_269_184_583) * r
            + 0.241_780_725_177_450_611_77)
            * r
            + 1.270_458_252_452_368_382_58)
            * r
            + 3.647_848_324_763_204_605_04)
            * r
            + 5.769_497_221_460_691_405_5)
            * r
            + 4.630_337_846_156_545_295_9)
            * r
            + 1.423_437_110_749_683_577_34)
            / (((((((1.050_750_071_644_416_843_8e-9 * r + 5.475_938_084_995_344_946e-4) * r
                + 0.015_198_666_563_616_457_2)
                * r
                + 0.148_103_976_427_480_074_59)
                * r
                + 0.689_767_334_985_100_004_55)
                * r
                + 1.676_384_830_183_803_849_4)
                * r
                + 2.053_191_626_637_758_821_87)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.010_334_399_292_288_132_65e-7 * r + 2.711_555_568_743_487_578_87e-5) * r
            + 0.001_242_660_947_388_078_438_6)
            * r
            + 0.026_532_189_526_576_123_093)
            * r
            + 0.296_560_571_828_504_891_23)
            * r
            + 1.784_826_539_917_291_335_8)
            * r
            + 5.463_784_911_164_114_369_9)
            * r
            + 6.657_904_643_501_103_777_2)
            / (((((((2.044_263_103_389_939_785_64e-15 * r + 1.421_511_758_316_445_887_5e-7) * r
                + 1.846_318_317_510_054_681_8e-5)
                * r
                + 7.868_691_311_456_132_591e-4)
                * r
                + 0.014_875_361_290_850_615_025)
                * r
                + 0.136_929_880_922_735_805_31)
                * r
                + 0.599_832_206_555_887_937_69)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Bootstrap confidence interval by the normal-interval method: resample
/// pairs with replacement, take the standard deviation of the resample
/// means as the standard error, and report `mean ± z * se`.
///
/// Samples are put in a canonical order first, so the result depends only
/// on the multiset of samples and the seed.
pub fn bootstrap_normal_ci(
    samples: &[ScoreSample],
    n_resamples: usize,
    confidence: f64,
    seed: u64,
) -> Result<BootstrapResult> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            actual: samples.len(),
        });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence {confidence} outside (0, 1)")));
    }
    if n_resamples == 0 {
        return Err(Error::InvalidParameter("n_resamples must be at least 1".into()));
    }
    if let Some(bad) = samples.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::InvalidParameter(format!("pair {} has non-finite score", bad.pair_id)));
    }

    let mut ordered: Vec<&ScoreSample> = samples.iter().collect();
    ordered.sort_by(|a, b| a.pair_id.cmp(&b.pair_id).then(a.score.total_cmp(&b.score)));
    let n = ordered.len();
    let mean = ordered.iter().map(|s| s.score).sum::<f64>() / n as f64;
    // Deviations keep constant inputs at exactly zero spread.
    let deviations: Vec<f64> = ordered.iter().map(|s| s.score - mean).collect();

    let mut resample_offsets = Vec::with_capacity(n_resamples);
    for b in 0..n_resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let total: f64 = (0..n).map(|_| deviations[rng.random_range(0..n)]).sum();
        resample_offsets.push(total / n as f64);
    }
    let se = if n_resamples > 1 {
        let m = resample_offsets.iter().sum::<f64>() / n_resamples as f64;
        let ss: f64 = resample_offsets.iter().map(|x| (x - m) * (x - m)).sum();
        libm::sqrt(ss / (n_resamples - 1) as f64)
    } else {
        0.0
    };
    let z = normal_quantile((1.0 + confidence) / 2.0);
    let half_width = z * se;
    Ok(BootstrapResult {
        mean,
        se,
        ci_low: mean - half_width,
        ci_high: mean + half_width,
        half_width,
        confidence,
        n_resamples,
        seed,
        rng: BOOTSTRAP_RNG.into(),
    })
}

/// Ranks starting at 1; tied values share the average of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            actual: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("NaN in input".into()));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("an input is constant".into()));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}
