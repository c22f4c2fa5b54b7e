//! Report files: per-pair and summary CSV, JSON, a markdown table and an
//! SVG bar chart. Every file is written to a temporary sibling and renamed
//! into place.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use contrast_core::{ComparisonMatrix, DatasetName, MetricKind};

use crate::experiment::{ExperimentOutcome, ExperimentReport};

pub const SCORES_CSV: &str = "scores.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";
pub const FIGURE_SVG: &str = "figure.svg";
pub const ERRORS_JSON: &str = "errors.json";
pub const MATRIX_DIR: &str = "matrices";

/// Rounds half away from zero to an integer, for single-pair scores.
pub fn display_int(score: f64) -> String {
    format!("{:.0}", score.round())
}

/// One decimal, for dataset means.
pub fn display_mean(mean: f64) -> String {
    format!("{:.1}", (mean * 10.0).round() / 10.0)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("writing to memory cannot fail");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is UTF-8")
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

pub fn scores_csv(report: &ExperimentReport) -> String {
    let mut rows = vec![vec!["dataset".into(), "pair_id".into(), "metric".into(), "score".into()]];
    for s in &report.scores {
        rows.push(vec![
            s.dataset.as_str().into(),
            s.pair_id.clone(),
            s.metric.as_str().into(),
            num(s.score),
        ]);
    }
    csv_string(rows)
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let header = [
        "dataset", "metric", "n", "mean", "se", "half_width", "ci_low", "ci_high", "confidence", "n_resamples", "seed",
    ];
    let mut rows = vec![header.iter().map(|h| h.to_string()).collect::<Vec<_>>()];
    for s in &report.summaries {
        let mut row = vec![s.dataset.as_str().to_string(), s.metric.as_str().to_string(), s.n.to_string(), num(s.mean)];
        match &s.bootstrap {
            Some(b) => row.extend([
                num(b.se),
                num(b.half_width),
                num(b.ci_low),
                num(b.ci_high),
                format!("{}", b.confidence),
                b.n_resamples.to_string(),
                b.seed.to_string(),
            ]),
            None => row.extend(std::iter::repeat_n(String::new(), 7)),
        }
        rows.push(row);
    }
    csv_string(rows)
}

/// Fused labels as a grid: one row per left sentence, one column per right
/// sentence.
pub fn matrix_csv(matrix: &ComparisonMatrix) -> String {
    let mut rows = Vec::with_capacity(matrix.rows() + 1);
    let mut header = vec![String::new()];
    header.extend(matrix.right().sentences().iter().map(|s| s.id.clone()));
    rows.push(header);
    for (r, s) in matrix.left().sentences().iter().enumerate() {
        let mut row = vec![s.id.clone()];
        row.extend((0..matrix.cols()).map(|c| matrix.cell(r, c).fused.as_str().to_string()));
        rows.push(row);
    }
    csv_string(rows)
}

fn dataset_order(report: &ExperimentReport) -> Vec<DatasetName> {
    DatasetName::ALL
        .iter()
        .copied()
        .filter(|d| report.datasets.contains(d))
        .collect()
}

pub fn markdown(report: &ExperimentReport) -> String {
    let datasets = dataset_order(report);
    let mut md = String::new();
    let pct = (report.confidence * 100.0).round();
    let _ = writeln!(md, "# Contrast scores\n");
    let _ = writeln!(
        md,
        "Mean score per dataset, ± half-width of the {pct}% normal bootstrap interval ({} resamples, seed {}).\n",
        report.n_resamples, report.seed
    );
    let _ = write!(md, "| Metric |");
    for d in &datasets {
        let _ = write!(md, " {} |", d.title());
    }
    let _ = write!(md, "\n|---|");
    for _ in &datasets {
        let _ = write!(md, "---:|");
    }
    md.push('\n');
    for m in &report.metrics {
        let _ = write!(md, "| {} |", m.display_name());
        for d in &datasets {
            let cell = match report.summary(*d, *m) {
                Some(s) => match &s.bootstrap {
                    Some(b) => format!("{} ± {}", display_mean(s.mean), display_mean(b.half_width)),
                    None => display_mean(s.mean),
                },
                None => "n/a".to_string(),
            };
            let _ = write!(md, " {cell} |");
        }
        md.push('\n');
    }

    let _ = writeln!(md, "\n## Ordering check\n");
    let _ = writeln!(
        md,
        "Expected: {}.\n",
        DatasetName::ORDERED.map(|d| d.title()).join(" < ")
    );
    let _ = writeln!(md, "| Metric | Result | Detail |\n|---|---|---|");
    for o in &report.ordering {
        let _ = writeln!(
            md,
            "| {} | {} | {} |",
            o.metric.display_name(),
            o.status.as_str(),
            o.violation.as_deref().unwrap_or("")
        );
    }

    if !report.correlations.is_empty() {
        let _ = writeln!(md, "\n## Paraphrase robustness\n");
        let _ = writeln!(
            md,
            "| Metric | {} | {} | Spearman rho | n |\n|---|---:|---:|---:|---:|",
            DatasetName::ReferenceContrastive.title(),
            DatasetName::SyntheticContrast.title()
        );
        for c in &report.correlations {
            let opt = |v: Option<f64>| v.map_or("n/a".to_string(), display_mean);
            let rho = match (c.rho, &c.note) {
                (Some(r), _) => format!("{r:.2}"),
                (None, Some(note)) => format!("n/a ({note})"),
                (None, None) => "n/a".to_string(),
            };
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} |",
                c.metric.display_name(),
                opt(c.reference_mean),
                opt(c.paraphrased_mean),
                rho,
                c.n
            );
        }
    }

    if !report.universal_hypotheses.is_empty() {
        let _ = writeln!(
            md,
            "\n{} sentence(s) were entailed by most opposing sentences and may be universal hypotheses; see {REPORT_JSON}.",
            report.universal_hypotheses.len()
        );
    }
    if !report.errors.is_empty() {
        let _ = writeln!(
            md,
            "\n**{} operation(s) failed**; see {ERRORS_JSON}.",
            report.errors.len()
        );
    }
    md
}

const PALETTE: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];

fn metric_color(m: MetricKind) -> &'static str {
    match m {
        MetricKind::Caspr => PALETTE[0],
        MetricKind::Ds => PALETTE[1],
        MetricKind::BsInv => PALETTE[2],
        MetricKind::DsMulti => PALETTE[3],
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grouped bar chart: one group per dataset, one bar per metric, with the
/// bootstrap interval as an error bar.
pub fn svg_chart(report: &ExperimentReport) -> String {
    let datasets = dataset_order(report);
    let metrics = &report.metrics;
    let (bar, gap, left, top, plot_h) = (22.0, 28.0, 50.0, 20.0, 240.0);
    let group_w = bar * metrics.len().max(1) as f64 + gap;
    let width = left + group_w * datasets.len().max(1) as f64 + 20.0;
    let height = top + plot_h + 90.0;
    let y = |v: f64| top + plot_h * (1.0 - v.clamp(0.0, 100.0) / 100.0);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    for tick in (0..=100).step_by(20) {
        let ty = y(tick as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{ty:.1}" x2="{:.1}" y2="{ty:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{tick}</text>"##,
            width - 20.0,
            left - 6.0,
            ty + 4.0
        );
    }
    for (g, d) in datasets.iter().enumerate() {
        let gx = left + g as f64 * group_w + gap / 2.0;
        for (k, m) in metrics.iter().enumerate() {
            let Some(s) = report.summary(*d, *m) else { continue };
            let x = gx + k as f64 * bar;
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"><title>{} {}: {}</title></rect>"#,
                y(s.mean),
                bar - 2.0,
                y(0.0) - y(s.mean),
                metric_color(*m),
                xml_escape(d.title()),
                m.display_name(),
                display_mean(s.mean)
            );
            if let Some(b) = &s.bootstrap {
                let cx = x + (bar - 2.0) / 2.0;
                let _ = writeln!(
                    svg,
                    r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
                    y(b.ci_low),
                    y(b.ci_high)
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            gx + (group_w - gap) / 2.0,
            top + plot_h + 16.0,
            xml_escape(d.title())
        );
    }
    for (k, m) in metrics.iter().enumerate() {
        let lx = left + k as f64 * 90.0;
        let ly = top + plot_h + 50.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{ly:.1}">{}</text>"#,
            ly - 9.0,
            metric_color(*m),
            lx + 14.0,
            m.display_name()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn matrix_file_name(dataset: DatasetName, pair_id: &str) -> String {
    let safe: String = pair_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{}__{safe}.csv", dataset.as_str())
}

/// Writes every report file into `dir` and returns their paths. A stale
/// error manifest is removed when the run had no errors.
pub fn write_reports(outcome: &ExperimentOutcome, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let report = &outcome.report;
    let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    let mut files: Vec<(PathBuf, String)> = vec![
        (dir.join(SCORES_CSV), scores_csv(report)),
        (dir.join(SUMMARY_CSV), summary_csv(report)),
        (dir.join(REPORT_JSON), json),
        (dir.join(REPORT_MD), markdown(report)),
        (dir.join(FIGURE_SVG), svg_chart(report)),
    ];
    let errors_path = dir.join(ERRORS_JSON);
    if report.errors.is_empty() {
        if errors_path.exists() {
            fs::remove_file(&errors_path)?;
        }
    } else {
        files.push((
            errors_path,
            serde_json::to_string_pretty(&report.errors).expect("errors serialize") + "\n",
        ));
    }
    for m in &outcome.matrices {
        files.push((
            dir.join(MATRIX_DIR).join(matrix_file_name(m.dataset, &m.pair_id)),
            matrix_csv(&m.matrix),
        ));
    }
    let mut written = Vec::with_capacity(files.len());
    for (path, text) in files {
        write_atomic(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
