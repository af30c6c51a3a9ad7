//! Condition-effect regression of daily MAAPE.
//!
//! Each experiment's daily system-wide MAAPE is regressed by OLS on an
//! intercept, COVID and protest dummies, Saturday and holiday dummies and
//! the COVID × Saturday and COVID × holiday interactions. The intercept is
//! the stable-condition error; the dummy coefficients are the added error
//! under each condition.
//!
//! Standard errors are the classical `σ̂²(XᵀX)⁻¹` ones. p-values and stars
//! use the normal approximation: `***` for |t| above the 1% two-sided
//! critical value, `**` above 5%, `*` above 10%. A |t| exactly at a
//! threshold gets the weaker mark.

mod labels;
mod ols;
mod table;

use thiserror::Error;

pub use labels::{label_conditions, ConditionLabels, ConditionSpec, REGRESSORS};
pub use ols::{compare_cells, fit_conditions, fit_ols, stars, Coefficient, Comparison, ConditionRegression};
pub use table::{read_regressions_csv, render_table, write_regressions_csv};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{n} observations cannot support {k} regressors (need at least k + 2)")]
    TooFewObservations { n: usize, k: usize },
    #[error("design matrix is rank deficient: {} collinear with earlier columns", columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("{what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("no coefficient named {0}")]
    MissingCoefficient(String),
    #[error("regressions were fit on different regressors")]
    RegressorMismatch,
    #[error("non-finite response at observation {0}")]
    NonFinite(usize),
    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;
