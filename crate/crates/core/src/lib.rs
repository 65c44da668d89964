//! Quantum error bars for tomography data.
//!
//! The pipeline samples states from the likelihood-weighted Hilbert-Schmidt
//! measure with a Metropolis-Hastings walk ([`sampler`]), histograms a figure
//! of merit ([`figures`], [`histstats`]), fits the skewed-Gaussian log-model
//! and turns the fit into a peak position, width and skew, plus one-sided
//! confidence regions ([`fitqeb`]).
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar for the common cases.
//!
//! ```
//! use qeb_core::{fitqeb::{quantum_error_bars, LogModel}, figures::ModelVars};
//!
//! let model = LogModel::<f64>::new(722.8, 319.6, 14.09, 0.0);
//! let qeb = quantum_error_bars(&model, ModelVars::new(0.0, 1.0).unwrap()).unwrap();
//! assert!((qeb.f0 - 0.0377).abs() < 1e-4);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod figures;
pub mod fitqeb;
pub mod histstats;
pub mod io;
pub mod likelihood;
pub mod mle;
pub mod sampler;
pub mod scalar;
pub mod statespace;
pub mod tomodata;

pub use error::{QebError, Result};
pub use figures::{Extremum, FigureOfMerit, FomClass, ModelVars};
pub use fitqeb::{
    bootstrap_compare, confidence_threshold, fit_log_model, ln_poly_n, poly_n, quantum_error_bars,
    ConfidenceInput, ConfidenceReport, ConfidenceSource, FitParams, LogModel, QuantumErrorBars,
};
pub use histstats::{combine, FomHistogram, HistogramAccumulator, HistogramSpec};
pub use likelihood::{log_likelihood, log_likelihood_ratio};
pub use mle::{mle, MleResult};
pub use sampler::{run_analysis, run_walker, CombinedHistogram, WalkConfig, WalkerReport};
pub use scalar::{CMatrix, Real};
pub use statespace::{
    point_from_rho, random_point, rho_from_point, DensityMatrix, PureState, StatePoint,
};
pub use tomodata::{CalibrationReadout, Povm, PovmEffect, TomographyDataset};

pub type DensityMatrixF64 = DensityMatrix<f64>;
pub type DensityMatrixF32 = DensityMatrix<f32>;
pub type PureStateF64 = PureState<f64>;
pub type PureStateF32 = PureState<f32>;
pub type StatePointF64 = StatePoint<f64>;
pub type StatePointF32 = StatePoint<f32>;
pub type TomographyDatasetF64 = TomographyDataset<f64>;
pub type TomographyDatasetF32 = TomographyDataset<f32>;
pub type FigureOfMeritF64 = FigureOfMerit<f64>;
pub type FigureOfMeritF32 = FigureOfMerit<f32>;
