//! From a histogram of the figure of merit to quantum error bars and
//! confidence regions.

pub mod bootstrap;
pub mod confidence;
pub mod fit;
pub mod qeb;

pub use bootstrap::{bootstrap_compare, BootstrapResult, DEFAULT_REPS};
pub use confidence::{
    confidence_threshold, ln_poly_n, poly_n, ConfidenceInput, ConfidenceReport, ConfidenceSource,
};
pub use fit::{fit_log_model, fit_points, linear_least_squares, FitParams, FitPoint};
pub use qeb::{quantum_error_bars, LogModel, QuantumErrorBars};
