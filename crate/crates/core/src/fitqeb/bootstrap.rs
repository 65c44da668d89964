//! Parametric bootstrap: resample the experiment from the MLE, re-estimate,
//! and collect the figure of merit, for comparison with the error bars.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{QebError, Result};
use crate::figures::FigureOfMerit;
use crate::mle::{mle, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::sampler::walker_seed;
use crate::scalar::Real;
use crate::statespace::DensityMatrix;
use crate::tomodata::{simulate_plan, TomographyDataset};

pub const DEFAULT_REPS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    /// Figure of merit of each successful replicate, in replicate order.
    pub values: Vec<f64>,
    /// Replicates whose simulation or MLE failed.
    pub failures: usize,
}

impl BootstrapResult {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn std_dev(&self) -> f64 {
        let n = self.values.len() as f64;
        let m = self.mean();
        (self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt()
    }
}

/// Simulates `reps` datasets from `rho_mle` with the same settings and shot
/// counts as `data`, recomputes the MLE of each and evaluates `fom` on it.
/// Replicate `r` uses the seed [`walker_seed`]`(seed, r)`.
pub fn bootstrap_compare<S: Real>(
    data: &TomographyDataset<S>,
    rho_mle: &DensityMatrix<S>,
    reps: usize,
    fom: &FigureOfMerit<S>,
    seed: u64,
) -> Result<BootstrapResult> {
    let plan = data.measurement_plan().ok_or_else(|| {
        QebError::InvalidDataset(
            "bootstrap needs the dataset's measurement settings and shot counts".into(),
        )
    })?;
    if rho_mle.dim() != data.dim() || fom.dim() != data.dim() {
        return Err(QebError::DimensionMismatch {
            expected: data.dim(),
            found: if rho_mle.dim() != data.dim() {
                rho_mle.dim()
            } else {
                fom.dim()
            },
        });
    }
    let plan_refs: Vec<_> = plan.iter().map(|(p, shots)| (p, *shots)).collect();
    let outcomes: Vec<Option<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(walker_seed(seed, r));
            let sim = simulate_plan(rho_mle, &plan_refs, &mut rng).ok()?;
            let est = mle(&sim, DEFAULT_TOL, DEFAULT_MAX_ITER).ok()?;
            Some(fom.evaluate(&est.state).ok()?.as_f64())
        })
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    if failures > 0 {
        warn!("{failures} of {reps} bootstrap replicates failed");
    }
    Ok(BootstrapResult {
        values: outcomes.into_iter().flatten().collect(),
        failures,
    })
}
