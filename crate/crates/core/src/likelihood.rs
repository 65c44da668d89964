//! Log-likelihood `λ(ρ) = −2 Σ_k n_k ln tr(E_k ρ)` of tomography data.

use crate::error::{QebError, Result};
use crate::scalar::{CMatrix, Real};
use crate::statespace::DensityMatrix;
use crate::tomodata::TomographyDataset;

/// Probabilities at or below this floor count as zero.
pub const ZERO_PROBABILITY: f64 = 1e-300;

fn check_dims<S: Real>(rho: &DensityMatrix<S>, data: &TomographyDataset<S>) -> Result<()> {
    if rho.dim() != data.dim() {
        return Err(QebError::DimensionMismatch {
            expected: data.dim(),
            found: rho.dim(),
        });
    }
    Ok(())
}

/// `λ(ρ)`; `+∞` when an observed outcome has zero probability under `ρ`.
pub fn log_likelihood<S: Real>(rho: &DensityMatrix<S>, data: &TomographyDataset<S>) -> Result<S> {
    check_dims(rho, data)?;
    Ok(log_likelihood_unchecked(rho.matrix(), data))
}

/// `λ(ρ_new) − λ(ρ_old)`. The sampler accepts with probability
/// `min(1, exp(−Δλ/2))`, which needs no normalization of the estimate density.
pub fn log_likelihood_ratio<S: Real>(
    rho_new: &DensityMatrix<S>,
    rho_old: &DensityMatrix<S>,
    data: &TomographyDataset<S>,
) -> Result<S> {
    Ok(log_likelihood(rho_new, data)? - log_likelihood(rho_old, data)?)
}

pub(crate) fn log_likelihood_unchecked<S: Real>(
    rho: &CMatrix<S>,
    data: &TomographyDataset<S>,
) -> S {
    let floor = S::of(ZERO_PROBABILITY);
    let mut acc = S::zero();
    for (e, &n) in data.effects().iter().zip(data.counts()) {
        if n == 0 {
            continue;
        }
        let p = e.probability_unchecked(rho);
        debug_assert!(
            p.im.abs() < S::tol(1e-9),
            "tr(Eρ) has imaginary part {}",
            p.im
        );
        if p.re <= floor {
            return S::infinity();
        }
        acc += S::of(n as f64) * p.re.ln();
    }
    -(acc + acc)
}

/// Gradient-like operator `R = Σ_k (n_k / n) E_k / tr(E_k ρ)` used by the
/// fixed-point MLE iteration; `None` if an observed outcome has zero probability.
pub(crate) fn r_operator<S: Real>(
    rho: &CMatrix<S>,
    data: &TomographyDataset<S>,
) -> Option<CMatrix<S>> {
    let d = data.dim();
    let total = S::of(data.total_count() as f64);
    let floor = S::of(ZERO_PROBABILITY);
    let mut r = CMatrix::zeros(d, d);
    for (e, &n) in data.effects().iter().zip(data.counts()) {
        if n == 0 {
            continue;
        }
        let p = e.probability_unchecked(rho).re;
        if p <= floor {
            return None;
        }
        let w = S::of(n as f64) / (total * p);
        r += e.matrix().map(|z| z.scale(w));
    }
    Some(r)
}
