//! Acceptance checks, one PASS/FAIL line per criterion. Runs as a plain
//! binary so each line is visible under `cargo test`.

mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use contrast_core::decompose::DecomposedSummary;
use contrast_core::{
    bootstrap_normal_ci, bs_inverse, caspr, caspr_score, ds_pairwise, fuse_labels, indicators, spearman_rho,
    ComparisonLabel, ComparisonMatrix, DatasetName, EchoChat, HashEmbedding, MetricKind, NliLabel, ScoreSample,
    Side, StubNli, Summary,
};
use contrast_eval::cli::cmd_experiment;
use contrast_eval::config::RunConfig;
use contrast_eval::fixtures::load_fixtures;
use contrast_eval::load_corpus;
use contrast_eval::report::{SCORES_CSV, SUMMARY_CSV};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

const LABELS: [NliLabel; 3] = [NliLabel::Entailment, NliLabel::Neutral, NliLabel::Contradiction];

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn summary(side: Side, text: &str) -> Summary {
    Summary::from_text(side, "acceptance", "1", text)
}

fn table1_nli() -> StubNli {
    load_fixtures(&common::fixtures().join("table1")).unwrap().nli.unwrap()
}

fn experiment_config(out_dir: &std::path::Path) -> RunConfig {
    RunConfig {
        fixtures: Some(common::fixtures().join("experiment")),
        out_dir: out_dir.to_path_buf(),
        ..RunConfig::default()
    }
}

fn ds_table_values() -> Check {
    let cases = [
        ("The hotel is sparkly clean.", "The hotel was kept very tidy.", 700.0 / 9.0, 0.005),
        ("The hotel is clean.", "The hotel is not clean", 20.0, 0.0),
    ];
    let mut details = Vec::new();
    for (l, r, want, tol) in cases {
        let (l, r) = (summary(Side::AMinusB, l), summary(Side::BMinusA, r));
        ds_pairwise(&l, &r).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let got = ds_pairwise(&l, &r).map_err(|e| e.to_string())?.score;
        let took = start.elapsed();
        ensure((got - want).abs() <= tol, || format!("DS = {got}, expected {want}"))?;
        ensure(took < Duration::from_millis(1), || format!("DS call took {took:?}"))?;
        details.push(format!("{got:.2} in {took:?}"));
    }
    Ok(details.join(", "))
}

fn caspr_table_values() -> Check {
    let nli = table1_nli();
    let score = |l: &str, r: &str| {
        caspr(&summary(Side::AMinusB, l), &summary(Side::BMinusA, r), &nli, &EchoChat)
            .map(|rep| rep.score)
            .map_err(|e| e.to_string())
    };
    let similar = score("The hotel is sparkly clean.", "The hotel was kept very tidy.")?;
    let opposed = score("The hotel is clean.", "The hotel is not clean")?;
    ensure(similar == 0.0, || format!("mutual entailment gave {similar}"))?;
    ensure(opposed == 100.0, || format!("mutual contradiction gave {opposed}"))?;
    Ok(format!("entailment {similar}, contradiction {opposed}"))
}

/// Brute-force CASPR written straight from the definitions: the fused label
/// comes from a lookup over the indicator truth table, sentence labels from
/// explicit counting.
fn oracle_score(rows: usize, cols: usize, dirs: &[(NliLabel, NliLabel)]) -> f64 {
    let fused = |f: NliLabel, b: NliLabel| -> NliLabel {
        use NliLabel::*;
        match (f, b) {
            (Entailment, Entailment) | (Entailment, Neutral) | (Neutral, Entailment) => Entailment,
            (Contradiction, Contradiction) | (Contradiction, Neutral) | (Neutral, Contradiction) => Contradiction,
            _ => Neutral,
        }
    };
    let label = |labels: Vec<NliLabel>| -> i64 {
        let count = |x: NliLabel| labels.iter().filter(|&&l| l == x).count();
        if count(NliLabel::Neutral) == labels.len() {
            1
        } else if count(NliLabel::Entailment) >= count(NliLabel::Contradiction) {
            -1
        } else {
            1
        }
    };
    let cell = |i: usize, j: usize| {
        let (f, b) = dirs[i * cols + j];
        fused(f, b)
    };
    let mut total = 0i64;
    for i in 0..rows {
        total += label((0..cols).map(|j| cell(i, j)).collect());
    }
    for j in 0..cols {
        total += label((0..rows).map(|i| cell(i, j)).collect());
    }
    let mean = total as f64 / (rows + cols) as f64;
    100.0 * (mean + 1.0) / 2.0
}

fn decomposed(side: Side, n: usize) -> DecomposedSummary {
    let text: Vec<String> = (0..n).map(|k| format!("Claim {k}.")).collect();
    DecomposedSummary::identity(&summary(side, &text.join(" ")))
}

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    for trial in 0..1000 {
        let (rows, cols) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let dirs: Vec<(NliLabel, NliLabel)> = (0..rows * cols)
            .map(|_| (LABELS[rng.random_range(0..3)], LABELS[rng.random_range(0..3)]))
            .collect();
        let cells = dirs.iter().map(|&(f, b)| ComparisonLabel::new(f, b)).collect();
        let matrix = ComparisonMatrix::from_cells(decomposed(Side::AMinusB, rows), decomposed(Side::BMinusA, cols), cells)
            .map_err(|e| e.to_string())?;
        let got = caspr_score(&matrix).score;
        let want = oracle_score(rows, cols, &dirs);
        ensure(got == want, || format!("trial {trial} ({rows}x{cols}): {got} != oracle {want}"))?;
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(5), || format!("took {took:?}"))?;
    Ok(format!("1000 matrices in {took:?}"))
}

fn fusion_totality() -> Check {
    let expected = |f: NliLabel, b: NliLabel| -> NliLabel {
        use NliLabel::*;
        match (f, b) {
            (Neutral, Neutral) | (Entailment, Contradiction) | (Contradiction, Entailment) => Neutral,
            (Contradiction, _) | (_, Contradiction) => Contradiction,
            _ => Entailment,
        }
    };
    for f in LABELS {
        for b in LABELS {
            let ind = indicators(f, b);
            let fired = [ind.cont, ind.ent, ind.neut].iter().filter(|&&x| x).count();
            ensure(fired == 1, || format!("({f}, {b}) fires {fired} indicators"))?;
            let fused = fuse_labels(f, b);
            let from_indicator = if ind.cont {
                NliLabel::Contradiction
            } else if ind.ent {
                NliLabel::Entailment
            } else {
                NliLabel::Neutral
            };
            ensure(fused == expected(f, b) && fused == from_indicator, || {
                format!("({f}, {b}) fused to {fused}")
            })?;
        }
    }
    Ok("9 label pairs".into())
}

fn experiment_ordering() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = experiment_config(dir.path());
    let start = Instant::now();
    let run = cmd_experiment(&common::fixtures().join("experiment/corpus.jsonl"), &config, false, &mut Vec::new())
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let report = &run.outcome.report;
    let mean = |d, m| report.mean(d, m).ok_or_else(|| format!("no mean for {d:?}/{m:?}"));
    let c: Vec<f64> = DatasetName::ORDERED
        .iter()
        .map(|&d| mean(d, MetricKind::Caspr))
        .collect::<Result<_, _>>()?;
    ensure(c.windows(2).all(|w| w[0] < w[1]), || format!("CASPR means not increasing: {c:?}"))?;
    ensure(c[3] >= 95.0 && c[0] <= 10.0, || format!("CASPR extremes {c:?}"))?;
    let ds_high = mean(DatasetName::SyntheticHighContrast, MetricKind::Ds)?;
    let ds_ref = mean(DatasetName::ReferenceContrastive, MetricKind::Ds)?;
    ensure(ds_high < ds_ref, || format!("DS SynHigh {ds_high} >= RefContr {ds_ref}"))?;
    ensure(took < Duration::from_secs(30), || format!("took {took:?}"))?;
    Ok(format!("CASPR {c:.1?}, DS SynHigh {ds_high:.1} < RefContr {ds_ref:.1}, {took:.2?}"))
}

fn bootstrap_width() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    let samples: Vec<ScoreSample> = (0..48)
        .map(|i| ScoreSample::new(format!("p{i}"), rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.score).sum::<f64>() / n;
    let sd = (samples.iter().map(|s| (s.score - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let start = Instant::now();
    let ci = bootstrap_normal_ci(&samples, 10_000, 0.95, 7).map_err(|e| e.to_string())?;
    let expected = 1.96 * sd / n.sqrt();
    let ratio = ci.half_width / expected;
    ensure((ratio - 1.0).abs() <= 0.15, || format!("half-width {} vs {expected}", ci.half_width))?;
    let flat: Vec<ScoreSample> = (0..48).map(|i| ScoreSample::new(format!("p{i}"), 42.0)).collect();
    let flat_ci = bootstrap_normal_ci(&flat, 10_000, 0.95, 7).map_err(|e| e.to_string())?;
    ensure(flat_ci.half_width == 0.0 && flat_ci.ci_low == 42.0 && flat_ci.ci_high == 42.0, || {
        format!("constant input gave {flat_ci:?}")
    })?;
    let took = start.elapsed();
    ensure(took < Duration::from_secs(2), || format!("took {took:?}"))?;
    Ok(format!("half-width ratio {ratio:.3}, {took:.2?}"))
}

fn spearman_values() -> Check {
    let rho = |x: &[f64], y: &[f64]| spearman_rho(x, y).map_err(|e| e.to_string());
    let a = rho(&[3.0, 1.0, 2.0], &[1.0, 2.0, 3.0])?;
    let b = rho(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0])?;
    let c = rho(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0])?;
    ensure((a + 0.5).abs() < 1e-12, || format!("rho = {a}"))?;
    ensure((b - 1.0).abs() < 1e-12 && (c + 1.0).abs() < 1e-12, || format!("{b}, {c}"))?;
    Ok(format!("{a}, {b}, {c}"))
}

fn symmetry() -> Check {
    let records = load_corpus(&common::fixtures().join("experiment/corpus.jsonl")).map_err(|e| e.to_string())?;
    let mut pool: Vec<String> = Vec::new();
    for r in &records {
        for s in r.summaries.iter().chain(&r.paraphrases) {
            pool.extend(s.sentences.iter().map(|x| x.text.clone()));
        }
        pool.extend(r.negated.values().cloned());
    }
    let nli = common::experiment_rules();
    let embed = HashEmbedding::new(64);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pick = |rng: &mut ChaCha8Rng| -> String {
        let n = rng.random_range(1..=4);
        (0..n).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect::<Vec<_>>().join(" ")
    };
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let (a, b) = (pick(&mut rng), pick(&mut rng));
        let (l, r) = (summary(Side::AMinusB, &a), summary(Side::BMinusA, &b));
        let pairs = [
            ("CASPR", caspr(&l, &r, &nli, &EchoChat), caspr(&r, &l, &nli, &EchoChat)),
            ("DS", ds_pairwise(&l, &r), ds_pairwise(&r, &l)),
            ("BS_inv", bs_inverse(&l, &r, &embed), bs_inverse(&r, &l, &embed)),
        ];
        for (name, x, y) in pairs {
            let (x, y) = (x.map_err(|e| e.to_string())?.score, y.map_err(|e| e.to_string())?.score);
            worst = worst.max((x - y).abs());
            ensure((x - y).abs() <= 1e-9, || format!("trial {trial} {name}: {x} vs {y}"))?;
        }
    }
    Ok(format!("100 pairs, largest gap {worst:e}"))
}

fn bs_limits() -> Check {
    let embed = HashEmbedding::new(64);
    let text = "The pool is clean. The staff is friendly.";
    let same = bs_inverse(&summary(Side::AMinusB, text), &summary(Side::BMinusA, text), &embed)
        .map_err(|e| e.to_string())?
        .score;
    ensure(same.abs() <= 1e-6, || format!("identical summaries gave {same}"))?;
    let ortho = load_fixtures(&common::fixtures().join("orthogonal"))
        .map_err(|e| e.to_string())?
        .embed
        .ok_or("orthogonal fixture has no embeddings")?;
    let far = bs_inverse(&summary(Side::AMinusB, "north east"), &summary(Side::BMinusA, "south west"), &ortho)
        .map_err(|e| e.to_string())?
        .score;
    ensure(far == 100.0, || format!("orthogonal fixture gave {far}"))?;
    Ok(format!("identical {same:e}, orthogonal {far}"))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cache = dir.path().join("cache");
    let corpus = common::fixtures().join("experiment/corpus.jsonl");
    let outputs = |server_url: &str, out: &str| -> Result<(Vec<u8>, Vec<u8>), String> {
        let mut config = experiment_config(&dir.path().join(out));
        config.fixtures = None;
        config.cache_dir = Some(cache.clone());
        config.bootstrap_n = 2000;
        config.seed = 17;
        for ep in [&mut config.nli, &mut config.embed, &mut config.chat] {
            ep.endpoint = Some(server_url.to_string());
        }
        cmd_experiment(&corpus, &config, false, &mut Vec::new()).map_err(|e| e.to_string())?;
        let read = |f: &str| fs::read(config.out_dir.join(f)).map_err(|e| e.to_string());
        Ok((read(SCORES_CSV)?, read(SUMMARY_CSV)?))
    };
    let server = common::model_server(common::experiment_rules(), 64);
    let url = server.url();
    let first = outputs(&url, "a")?;
    let calls = server.total();
    // The second run is served from the cache alone.
    drop(server);
    let second = outputs(&url, "b")?;
    ensure(first == second, || "CSV output differs between runs".into())?;
    Ok(format!("{} + {} bytes identical, {calls} upstream calls on the cold run", first.0.len(), first.1.len()))
}

fn main() -> ExitCode {
    let checks: [Criterion; 10] = [
        ("DS reference values", ds_table_values),
        ("CASPR reference values", caspr_table_values),
        ("CASPR matches brute-force oracle", oracle_equivalence),
        ("label fusion is total", fusion_totality),
        ("experiment ordering", experiment_ordering),
        ("bootstrap interval width", bootstrap_width),
        ("Spearman values", spearman_values),
        ("metric symmetry", symmetry),
        ("BS_inv limits", bs_limits),
        ("experiment determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
