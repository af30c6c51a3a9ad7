use std::fmt::Write as _;

use super::Condition;
use crate::analysis::ConditionRegression;
use crate::runner::{ModelFamily, Strategy, TimingReport};

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct CellEstimate {
    pub experiment: String,
    pub estimate: f64,
    /// 95% interval half-width.
    pub half_width: f64,
}

impl CellEstimate {
    fn overlaps(&self, other: &Self) -> bool {
        self.estimate - self.half_width <= other.estimate + other.half_width
            && other.estimate - other.half_width <= self.estimate + self.half_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub condition: Condition,
    pub best: CellEstimate,
    /// Cells whose interval overlaps the best cell's, by estimate.
    pub ties: Vec<CellEstimate>,
    /// Summed baseline training time of the best cell, when known.
    pub training_seconds: Option<f64>,
}

/// Best cell per headline condition: the lowest point estimate, with every
/// cell whose 95% interval overlaps it listed as indistinguishable.
pub fn summarize(fits: &[ConditionRegression], timings: Option<&[TimingReport]>) -> Vec<SummaryRow> {
    Condition::HEADLINE
        .iter()
        .filter_map(|&condition| {
            let mut cells: Vec<CellEstimate> = fits
                .iter()
                .filter_map(|f| {
                    let c = f.coefficient(condition.term())?;
                    Some(CellEstimate {
                        experiment: f.experiment.clone(),
                        estimate: c.estimate,
                        half_width: Z95 * c.std_error,
                    })
                })
                .collect();
            cells.sort_by(|a, b| a.estimate.total_cmp(&b.estimate).then_with(|| a.experiment.cmp(&b.experiment)));
            let mut iter = cells.into_iter();
            let best = iter.next()?;
            let ties = iter.filter(|c| c.overlaps(&best)).collect();
            let training_seconds = timings
                .and_then(|ts| ts.iter().find(|t| t.experiment == best.experiment))
                .map(|t| t.baseline_seconds);
            Some(SummaryRow {
                condition,
                best,
                ties,
                training_seconds,
            })
        })
        .collect()
}

/// `(output, training, model)` labels for an experiment id.
fn describe(id: &str) -> (String, String, String) {
    let parts: Vec<&str> = id.split('-').collect();
    if let [family, strategy, output] = parts[..] {
        if let (Some(f), Some(s)) = (ModelFamily::parse(family), Strategy::parse(strategy)) {
            let output = match output {
                "multi" => "Multiple",
                "single" => "Single",
                other => other,
            };
            let training = match s {
                Strategy::Online => "Online",
                Strategy::Static => "Static",
            };
            return (output.into(), training.into(), f.as_str().to_uppercase());
        }
    }
    ("-".into(), "-".into(), id.into())
}

fn format_seconds(s: f64) -> String {
    if s >= 10.0 {
        format!("{s:.0} sec")
    } else {
        format!("{s:.2} sec")
    }
}

/// Text table of [`summarize`]. Training times are included only when given.
pub fn render_summary(fits: &[ConditionRegression], timings: Option<&[TimingReport]>) -> String {
    let rows = summarize(fits, timings);
    let mut header = vec!["Condition", "Output", "Training", "Model"];
    if timings.is_some() {
        header.push("Training Running Time");
    }
    header.extend(["MAAPE (C.I)", "Not significantly different"]);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let (output, training, model) = describe(&r.best.experiment);
            let mut line = vec![r.condition.title().to_string(), output, training, model];
            if timings.is_some() {
                line.push(r.training_seconds.map_or("-".into(), format_seconds));
            }
            line.push(format!("{:.2}(±{:.3})", r.best.estimate, r.best.half_width));
            line.push(if r.ties.is_empty() {
                "-".into()
            } else {
                r.ties.iter().map(|t| t.experiment.as_str()).collect::<Vec<_>>().join(", ")
            });
            line
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|j| body.iter().map(|r| r[j].chars().count()).chain([header[j].len()]).max().unwrap_or(0))
        .collect();
    let mut s = String::from("State-of-the-art performance\n");
    let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
    let row = |s: &mut String, cells: &[String]| {
        let padded: Vec<String> =
            cells.iter().zip(&widths).map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
        let _ = writeln!(s, "{}", padded.join("  ").trim_end());
    };
    let _ = writeln!(s, "{rule}");
    row(&mut s, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    let _ = writeln!(s, "{rule}");
    for r in &body {
        row(&mut s, r);
    }
    let _ = writeln!(s, "{rule}");
    s.push_str("MAAPE: intercept for stable conditions, added error for COVID-19 and protest; C.I. is ±1.96·SE.\n");
    s
}

/// One row per listed cell: `condition,role,experiment,estimate,half_width,lower,upper`.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("condition,role,experiment,estimate,half_width,lower,upper\n");
    for r in rows {
        for (role, c) in std::iter::once(("best", &r.best)).chain(r.ties.iter().map(|t| ("tie", t))) {
            let _ = writeln!(
                s,
                "{},{role},{},{},{},{},{}",
                r.condition.as_str(),
                c.experiment,
                c.estimate,
                c.half_width,
                c.estimate - c.half_width,
                c.estimate + c.half_width
            );
        }
    }
    s
}
