//! Aggregate completed result rows into summary tables (markdown) and
//! static SVG bar charts: mean ± std per method, per evaluation mask.

use super::{read_results, ResultRow};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug)]
pub struct MethodStats {
    pub method: String,
    pub mask: String,
    pub seeds: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub mean_pairing: Option<f64>,
}

#[derive(Debug, Default)]
pub struct ReportSummary {
    pub stats: Vec<MethodStats>,
    pub markdown: String,
    pub files: Vec<PathBuf>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Group rows by (mask, method), preserving first-seen method order.
fn aggregate(rows: &[ResultRow]) -> Vec<MethodStats> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.mask.clone(), r.method.clone());
        if !order.contains(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
            let f1: Vec<f64> = rows.iter().map(|r| r.macro_f1).collect();
            let pairing: Vec<f64> = rows.iter().filter_map(|r| r.pairing_accuracy).collect();
            let (mean_accuracy, std_accuracy) = mean_std(&acc);
            let (mean_f1, std_f1) = mean_std(&f1);
            MethodStats {
                method: key.1,
                mask: key.0,
                seeds: rows.len(),
                mean_accuracy,
                std_accuracy,
                mean_f1,
                std_f1,
                mean_pairing: (!pairing.is_empty()).then(|| mean_std(&pairing).0),
            }
        })
        .collect()
}

fn render_markdown(config_id: &str, stats: &[MethodStats]) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Results: {config_id}\n");
    let masks: Vec<String> = {
        let mut seen = Vec::new();
        for s in stats {
            if !seen.contains(&s.mask) {
                seen.push(s.mask.clone());
            }
        }
        seen
    };
    for mask in &masks {
        let _ = writeln!(md, "## Mask: {mask}\n");
        let _ = writeln!(md, "| method | seeds | accuracy | macro F1 | pairing acc |");
        let _ = writeln!(md, "|---|---|---|---|---|");
        let mut best: Option<&MethodStats> = None;
        for s in stats.iter().filter(|s| &s.mask == mask) {
            let pairing = s
                .mean_pairing
                .map(|p| format!("{p:.3}"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                md,
                "| {} | {} | {:.3} ± {:.3} | {:.3} ± {:.3} | {} |",
                s.method, s.seeds, s.mean_accuracy, s.std_accuracy, s.mean_f1, s.std_f1, pairing
            );
            if best.map_or(true, |b| s.mean_accuracy > b.mean_accuracy) {
                best = Some(s);
            }
        }
        if let Some(best) = best {
            let mmbind = stats
                .iter()
                .find(|s| &s.mask == mask && s.method == "mmbind");
            if let Some(mm) = mmbind {
                let beats_all = stats
                    .iter()
                    .filter(|s| &s.mask == mask && s.method != "mmbind" && s.method != "upper_bound")
                    .all(|s| mm.mean_accuracy >= s.mean_accuracy);
                let _ = writeln!(
                    md,
                    "\nmmbind beats all non-upper-bound baselines: {}\n",
                    if beats_all { "yes" } else { "no" }
                );
            } else {
                let _ = writeln!(md, "\nbest: {} ({:.3})\n", best.method, best.mean_accuracy);
            }
        }
    }
    md
}

/// Minimal hand-rolled SVG bar chart (mean accuracy with ±std whiskers).
fn render_svg(title: &str, stats: &[MethodStats]) -> String {
    let bar_w = 56.0;
    let gap = 24.0;
    let height = 320.0;
    let plot_h = 240.0;
    let base_y = 280.0;
    let width = 60.0 + stats.len() as f64 * (bar_w + gap);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"monospace\" font-size=\"11\">\n"
    );
    let _ = writeln!(svg, "<text x=\"10\" y=\"18\" font-size=\"13\">{title}</text>");
    let _ = writeln!(
        svg,
        "<line x1=\"40\" y1=\"{base_y}\" x2=\"{:.0}\" y2=\"{base_y}\" stroke=\"black\"/>",
        width - 10.0
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = base_y - tick * plot_h;
        let _ = writeln!(
            svg,
            "<line x1=\"36\" y1=\"{y:.1}\" x2=\"40\" y2=\"{y:.1}\" stroke=\"black\"/>\
             <text x=\"4\" y=\"{:.1}\">{tick:.2}</text>",
            y + 4.0
        );
    }
    for (i, s) in stats.iter().enumerate() {
        let x = 50.0 + i as f64 * (bar_w + gap);
        let h = s.mean_accuracy.clamp(0.0, 1.0) * plot_h;
        let y = base_y - h;
        let _ = writeln!(
            svg,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w}\" height=\"{h:.1}\" \
             fill=\"#4878a8\" stroke=\"black\"/>"
        );
        let cx = x + bar_w / 2.0;
        let y_lo = base_y - (s.mean_accuracy - s.std_accuracy).clamp(0.0, 1.0) * plot_h;
        let y_hi = base_y - (s.mean_accuracy + s.std_accuracy).clamp(0.0, 1.0) * plot_h;
        let _ = writeln!(
            svg,
            "<line x1=\"{cx:.1}\" y1=\"{y_lo:.1}\" x2=\"{cx:.1}\" y2=\"{y_hi:.1}\" stroke=\"black\"/>"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.1}\" y=\"{:.1}\" transform=\"rotate(30 {x:.1} {:.1})\">{}</text>",
            base_y + 14.0,
            base_y + 14.0,
            s.method
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.1}\" y=\"{:.1}\">{:.3}</text>",
            y - 4.0,
            s.mean_accuracy
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Summarize a completed results directory. Writes `summary.md` and one
/// SVG per mask next to the results (or under `out_dir` when given).
pub fn report(results_dir: &Path, out_dir: Option<&Path>) -> Result<ReportSummary> {
    let rows = read_results(results_dir)?;
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no result rows in {}",
            results_dir.display()
        )));
    }
    let config_id = rows[0].config_id.clone();
    let stats = aggregate(&rows);
    let markdown = render_markdown(&config_id, &stats);

    let out = out_dir.unwrap_or(results_dir);
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let md_path = out.join("summary.md");
    fs::write(&md_path, &markdown)?;
    files.push(md_path);

    let masks: Vec<String> = {
        let mut seen = Vec::new();
        for s in &stats {
            if !seen.contains(&s.mask) {
                seen.push(s.mask.clone());
            }
        }
        seen
    };
    for mask in masks {
        let subset: Vec<MethodStats> = stats.iter().filter(|s| s.mask == mask).cloned().collect();
        let svg = render_svg(&format!("{config_id} accuracy ({mask})"), &subset);
        let path = out.join(format!("accuracy_{}.svg", mask.replace('+', "_")));
        fs::write(&path, svg)?;
        files.push(path);
    }
    Ok(ReportSummary {
        stats,
        markdown,
        files,
    })
}
