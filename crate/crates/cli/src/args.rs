use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use qeb_core::figures::spectral_range;
use qeb_core::io::{read_observable, read_reference_state, ReferenceState};
use qeb_core::sampler::{
    DEFAULT_SAMPLES, DEFAULT_STEP_SIZE, DEFAULT_THERM_SWEEPS, DEFAULT_WALKERS,
};
use qeb_core::{DensityMatrix, Extremum, FigureOfMerit, FomClass, ModelVars};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FomArg {
    Fidelity2,
    TraceDist,
    PurifiedDist,
    Observable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionArg {
    Max,
    Min,
}

impl From<DirectionArg> for Extremum {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Max => Extremum::Max,
            DirectionArg::Min => Extremum::Min,
        }
    }
}

/// `auto` or `lo:hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeArg {
    Auto,
    Fixed { lo: f64, hi: f64 },
}

impl FromStr for RangeArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(RangeArg::Auto);
        }
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| format!("expected `auto` or `lo:hi`, got `{s}`"))?;
        let lo: f64 = lo
            .trim()
            .parse()
            .map_err(|e| format!("lower edge `{lo}`: {e}"))?;
        let hi: f64 = hi
            .trim()
            .parse()
            .map_err(|e| format!("upper edge `{hi}`: {e}"))?;
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(format!("range needs lo < hi, got {lo}:{hi}"));
        }
        Ok(RangeArg::Fixed { lo, hi })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfidenceFrom {
    Model,
    Histogram,
}

/// Figure-of-merit selection, as given on the command line.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FomSelection {
    /// Figure of merit.
    #[arg(long, value_enum)]
    pub fom: Option<FomArg>,
    /// Reference state file, or `mle` for the maximum likelihood estimate.
    #[arg(long = "ref", value_name = "FILE|mle")]
    pub reference: Option<String>,
    /// Observable file (Hermitian matrix).
    #[arg(long, value_name = "FILE")]
    pub observable: Option<PathBuf>,
    /// Extremal value of the observable; defaults to its spectral edge.
    #[arg(long)]
    pub extremum: Option<f64>,
    /// Whether the extremum is a maximum or a minimum.
    #[arg(long, value_enum, default_value = "max")]
    pub direction: DirectionArg,
}

/// A resolved figure of merit plus what the report needs about it.
pub struct ResolvedFom {
    pub fom: FigureOfMerit<f64>,
    /// Range width of an observable.
    pub w: Option<f64>,
}

impl FomSelection {
    /// Builds the figure of merit; `mle_state` is only called for `--ref mle`.
    pub fn resolve(
        &self,
        dim: usize,
        mle_state: impl FnOnce() -> Result<DensityMatrix<f64>>,
    ) -> Result<ResolvedFom> {
        let Some(kind) = self.fom else {
            bail!("--fom is required")
        };
        let reference = || -> Result<ReferenceState<f64>> {
            match self.reference.as_deref() {
                None => bail!("--fom {} needs --ref", fom_name(kind)),
                Some("mle") => Ok(ReferenceState::Mixed(mle_state()?)),
                Some(path) => read_reference_state(Path::new(path))
                    .with_context(|| format!("reading reference state {path}")),
            }
        };
        let (fom, w) = match kind {
            FomArg::Fidelity2 => match reference()? {
                ReferenceState::Pure(psi) => (FigureOfMerit::fidelity2_to_pure(psi), None),
                ReferenceState::Mixed(rho) => (FigureOfMerit::fidelity2_to_mixed(rho), None),
            },
            FomArg::TraceDist => (
                FigureOfMerit::trace_distance_to(reference()?.density_matrix()),
                None,
            ),
            FomArg::PurifiedDist => (
                FigureOfMerit::purified_distance_to(reference()?.density_matrix()),
                None,
            ),
            FomArg::Observable => {
                let path = self
                    .observable
                    .as_ref()
                    .context("--fom observable needs --observable")?;
                let op = read_observable::<f64>(path)
                    .with_context(|| format!("reading observable {}", path.display()))?;
                let (lo, hi) = spectral_range(&op);
                let extremum = self.extremum.unwrap_or(match self.direction {
                    DirectionArg::Max => hi,
                    DirectionArg::Min => lo,
                });
                (
                    FigureOfMerit::observable(op, Some(extremum), self.direction.into())?,
                    Some(hi - lo),
                )
            }
        };
        if fom.dim() != dim {
            bail!(qeb_core::QebError::DimensionMismatch {
                expected: dim,
                found: fom.dim()
            });
        }
        Ok(ResolvedFom { fom, w })
    }

    /// Class without reference objects, for post-processing commands.
    pub fn class_only(&self) -> Result<FomClass> {
        let Some(kind) = self.fom else {
            bail!("--fom is required")
        };
        Ok(match kind {
            FomArg::Fidelity2 => FomClass::Fidelity2,
            FomArg::TraceDist => FomClass::TraceDistance,
            FomArg::PurifiedDist => FomClass::PurifiedDistance,
            FomArg::Observable => FomClass::Observable {
                extremum: Some(
                    self.extremum
                        .context("--fom observable needs --extremum here")?,
                ),
                direction: self.direction.into(),
            },
        })
    }
}

fn fom_name(kind: FomArg) -> &'static str {
    match kind {
        FomArg::Fidelity2 => "fidelity2",
        FomArg::TraceDist => "trace-dist",
        FomArg::PurifiedDist => "purified-dist",
        FomArg::Observable => "observable",
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct WalkArgs {
    /// Random-walk step size η.
    #[arg(long, default_value_t = DEFAULT_STEP_SIZE)]
    pub step_size: f64,
    /// Tune the step size towards acceptance 0.3 before sampling.
    #[arg(long)]
    pub tune: bool,
    /// Thermalization sweeps discarded per walker.
    #[arg(long, default_value_t = DEFAULT_THERM_SWEEPS)]
    pub n_therm: u64,
    /// Steps between recorded samples; defaults to ⌈1/η⌉.
    #[arg(long)]
    pub n_sweep: Option<u64>,
    /// Recorded samples per walker.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub n_samples: usize,
    /// Independent walkers.
    #[arg(long, default_value_t = DEFAULT_WALKERS)]
    pub walkers: usize,
    /// Base seed; walker seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct HistogramArgs {
    /// Number of histogram bins.
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    /// Histogram range `lo:hi`, or `auto` for a pilot run.
    #[arg(long, default_value = "auto", value_parser = RangeArg::from_str, allow_hyphen_values = true)]
    pub range: RangeArg,
    /// Samples of the pilot run behind `--range auto`.
    #[arg(long, default_value_t = 4000)]
    pub pilot_samples: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RegionArgs {
    /// Failure probability ε of the confidence region.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Enlargement δ of the region.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Range width w of an observable; defaults to its spectral width.
    #[arg(long)]
    pub w_range: Option<f64>,
    /// Integrate the tail from the fitted model or the raw histogram.
    #[arg(long, value_enum, default_value = "model")]
    pub confidence_from: ConfidenceFrom,
}

/// Everything that determines an `analyze` run; echoed into the report.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Dataset file.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub fom: FomSelection,
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub histogram: HistogramArgs,
    #[command(flatten)]
    pub confidence: RegionArgs,
    /// Skip the model fit.
    #[arg(long)]
    pub no_fit: bool,
    /// Also write every recorded value to samples.csv.
    #[arg(long)]
    pub dump_samples: bool,
    /// Also write a gnuplot script plotting the histogram and fit.
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub config: AnalysisConfig,
    /// Re-run the configuration recorded in an earlier report; other
    /// analysis flags are ignored.
    #[arg(long, value_name = "REPORT")]
    pub replay: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// True state (pure-state or density-matrix file).
    #[arg(long, value_name = "FILE")]
    pub state: PathBuf,
    /// Mix in white noise: ρ → (1 − p)ρ + p·I/d.
    #[arg(long, default_value_t = 0.0)]
    pub white_noise: f64,
    /// Shots per measurement setting.
    #[arg(long)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-qubit readout calibration files (one per qubit, in order); the
    /// default is ideal Pauli measurements.
    #[arg(long, value_name = "FILE")]
    pub calibration: Vec<PathBuf>,
    /// Dataset output file (stdout if absent).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MleArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Stop when λ improves by less than this.
    #[arg(long, default_value_t = qeb_core::mle::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = qeb_core::mle::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Report output file (stdout if absent).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also write the estimate as a density-matrix file usable with `--ref`.
    #[arg(long, value_name = "FILE")]
    pub state_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Histogram table written by `analyze`.
    #[arg(long, value_name = "CSV")]
    pub histogram: PathBuf,
    #[command(flatten)]
    pub fom: FomSelection,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct QebArgs {
    #[arg(long)]
    pub a2: f64,
    #[arg(long)]
    pub a1: f64,
    #[arg(long)]
    pub m: f64,
    /// Offset of the figure of merit (1 for fidelity², 0 for distances).
    #[arg(long)]
    pub h: f64,
    /// Sign (+1 or −1) of the model variable.
    #[arg(long)]
    pub s: f64,
    /// Print the full-precision JSON result instead of rounded values.
    #[arg(long)]
    pub json: bool,
}

impl QebArgs {
    pub fn vars(&self) -> Result<ModelVars> {
        Ok(ModelVars::new(self.h, self.s)?)
    }
}

#[derive(Debug, Args)]
pub struct ConfidenceArgs {
    /// Fit report written by `fit` (model source).
    #[arg(
        long,
        value_name = "FILE",
        conflicts_with = "histogram",
        required_unless_present = "histogram"
    )]
    pub fit: Option<PathBuf>,
    /// Histogram table (histogram source).
    #[arg(long, value_name = "CSV")]
    pub histogram: Option<PathBuf>,
    #[command(flatten)]
    pub fom: FomSelection,
    #[arg(long)]
    pub epsilon: f64,
    /// Total number of measurement outcomes.
    #[arg(long)]
    pub n: u64,
    /// Hilbert-space dimension.
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long)]
    pub w_range: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[command(flatten)]
    pub fom: FomSelection,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = qeb_core::fitqeb::DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}
