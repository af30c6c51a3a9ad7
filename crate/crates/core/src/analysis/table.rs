use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ols::{Coefficient, ConditionRegression};
use super::{AnalysisError, Result};

#[derive(Serialize, Deserialize)]
struct Row {
    experiment: String,
    term: String,
    estimate: f64,
    std_error: f64,
    t_stat: f64,
    p_value: f64,
    stars: String,
    r_squared: f64,
    adj_r_squared: f64,
    n: usize,
}

fn csv_err(e: csv::Error) -> AnalysisError {
    AnalysisError::Csv(e.to_string())
}

/// One row per (experiment, term).
pub fn write_regressions_csv<W: Write>(fits: &[ConditionRegression], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for f in fits {
        for c in &f.coefficients {
            w.serialize(Row {
                experiment: f.experiment.clone(),
                term: c.name.clone(),
                estimate: c.estimate,
                std_error: c.std_error,
                t_stat: c.t_stat,
                p_value: c.p_value,
                stars: c.stars().to_string(),
                r_squared: f.r_squared,
                adj_r_squared: f.adj_r_squared,
                n: f.n,
            })
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| AnalysisError::Csv(e.to_string()))
}

pub fn read_regressions_csv<R: Read>(input: R) -> Result<Vec<ConditionRegression>> {
    let mut out: Vec<ConditionRegression> = Vec::new();
    for row in csv::Reader::from_reader(input).deserialize::<Row>() {
        let row = row.map_err(csv_err)?;
        if out.last().is_none_or(|f| f.experiment != row.experiment) {
            out.push(ConditionRegression {
                experiment: row.experiment.clone(),
                coefficients: Vec::new(),
                r_squared: row.r_squared,
                adj_r_squared: row.adj_r_squared,
                n: row.n,
            });
        }
        out.last_mut().expect("pushed above").coefficients.push(Coefficient {
            name: row.term,
            estimate: row.estimate,
            std_error: row.std_error,
            t_stat: row.t_stat,
            p_value: row.p_value,
        });
    }
    Ok(out)
}

/// Fixed-width table: one column per experiment, estimate with stars and
/// the standard error in parentheses beneath, then fit statistics.
pub fn render_table(title: &str, fits: &[ConditionRegression]) -> String {
    let mut terms: Vec<&str> = Vec::new();
    for f in fits {
        for n in f.names() {
            if !terms.contains(&n) {
                terms.push(n);
            }
        }
    }
    let by_exp: Vec<BTreeMap<&str, &Coefficient>> = fits
        .iter()
        .map(|f| f.coefficients.iter().map(|c| (c.name.as_str(), c)).collect())
        .collect();
    let label_w = terms.iter().map(|t| t.len()).chain([14]).max().unwrap_or(14);
    let col_w = fits.iter().map(|f| f.experiment.len()).chain([10]).max().unwrap_or(10) + 2;
    let rule = "-".repeat(label_w + col_w * fits.len());
    let mut s = String::new();
    let _ = writeln!(s, "{title}");
    let _ = writeln!(s, "{rule}");
    let _ = write!(s, "{:label_w$}", "");
    for f in fits {
        let _ = write!(s, "{:>col_w$}", f.experiment);
    }
    let _ = writeln!(s, "\n{rule}");
    for t in &terms {
        let _ = write!(s, "{t:label_w$}");
        for m in &by_exp {
            let cell = m.get(t).map(|c| format!("{:.3}{}", c.estimate, c.stars())).unwrap_or_default();
            let _ = write!(s, "{cell:>col_w$}");
        }
        let _ = write!(s, "\n{:label_w$}", "");
        for m in &by_exp {
            let cell = m.get(t).map(|c| format!("({:.3})", c.std_error)).unwrap_or_default();
            let _ = write!(s, "{cell:>col_w$}");
        }
        s.push('\n');
    }
    let stats: [(&str, fn(&ConditionRegression) -> String); 3] = [
        ("R-squared", |f| format!("{:.3}", f.r_squared)),
        ("R-squared Adj.", |f| format!("{:.3}", f.adj_r_squared)),
        ("N", |f| f.n.to_string()),
    ];
    for (label, value) in stats {
        let _ = write!(s, "{label:label_w$}");
        for f in fits {
            let _ = write!(s, "{:>col_w$}", value(f));
        }
        s.push('\n');
    }
    let _ = writeln!(s, "{rule}");
    s.push_str("*** p<0.01, ** p<0.05, * p<0.1\n");
    s
}
