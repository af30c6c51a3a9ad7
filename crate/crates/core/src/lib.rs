//! Short-term transit ridership forecasting benchmark.
//!
//! The crate reproduces a complete benchmarking system for daily station-level
//! demand forecasting:
//!
//! - [`data`]: ridership panels, calendars, normalization, supervised windows
//!   and synthetic panels with planted regime shifts.
//! - [`arima`]: univariate ARIMA/SARIMA with KPSS differencing, conditional
//!   sum of squares estimation and stepwise AIC order search.
//! - [`neural`]: a small reverse-mode autodiff engine and the MLP, dilated CNN
//!   and LSTM forecasters.
//! - [`runner`]: the static/online × single/multi-output experiment grid with
//!   rolling-origin evaluation.
//! - [`metrics`]: MAAPE at every aggregation level, plus the closed-station
//!   diagnostic.
//! - [`analysis`]: OLS condition-effect regression of daily MAAPE.
//! - [`report`]: SVG charts with CSV sidecars and summary tables.
//! - [`pipeline`]: the config-file driven `synth → run → analyze → report`
//!   workflow used by the command-line tool.

pub mod analysis;
pub mod arima;
pub mod data;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod report;
pub mod runner;
