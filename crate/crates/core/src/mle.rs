//! Maximum-likelihood state estimate by the diluted `RρR` iteration.
//!
//! With `R(ρ) = Σ_k (n_k/n) E_k / tr(E_k ρ)` the update is
//! `ρ' ∝ (I + εR) ρ (I + εR)`, where `ε` is chosen by a backtracking line
//! search so that `λ` never increases. The iteration starts from `I/d`, which
//! leaves directions the data cannot see at the maximally mixed value.

use log::debug;
use serde::Serialize;

use crate::error::{QebError, Result};
use crate::likelihood::{log_likelihood_unchecked, r_operator};
use crate::scalar::{hermitian_eigenvalues, hermitize, CMatrix, Real};
use crate::statespace::DensityMatrix;
use crate::tomodata::TomographyDataset;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Optimality slack on the largest eigenvalue of `R`, which is 1 at the optimum.
const KKT_TOL: f64 = 1e-7;
const MIN_DILUTION: f64 = 1e-14;
const MAX_DILUTION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleResult<S: Real> {
    #[serde(skip)]
    pub state: DensityMatrix<S>,
    pub lambda: S,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes the likelihood of `data` over density matrices.
pub fn mle<S: Real>(
    data: &TomographyDataset<S>,
    tol: f64,
    max_iter: usize,
) -> Result<MleResult<S>> {
    if data.total_count() == 0 {
        return Err(QebError::InvalidDataset(
            "MLE needs at least one recorded count".into(),
        ));
    }
    if !(tol >= 0.0) {
        return Err(QebError::InvalidConfig(format!(
            "tolerance must be ≥ 0, got {tol}"
        )));
    }
    let d = data.dim();
    let mut rho = DensityMatrix::<S>::maximally_mixed(d).into_matrix();
    let mut lambda = log_likelihood_unchecked(&rho, data);
    if !lambda.is_finite_value() {
        return Err(QebError::InvalidDataset(
            "an observed outcome has zero probability for every state".into(),
        ));
    }
    let identity = CMatrix::<S>::identity(d, d);
    let mut eps = 1.0f64;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let r = r_operator(&rho, data).expect("current iterate has finite likelihood");
        let r_max = hermitian_eigenvalues(&r)[d - 1].as_f64();
        // line search: halve ε until λ does not increase
        let mut step = None;
        let mut trial = eps;
        while trial >= MIN_DILUTION {
            let a = &identity + r.map(|z| z.scale(S::of(trial)));
            let mut next = &a * &rho * &a;
            let tr = next.trace().re;
            next.apply(|z| *z = z.unscale(tr));
            hermitize(&mut next);
            let l = log_likelihood_unchecked(&next, data);
            if l.is_finite_value() && l <= lambda {
                step = Some((next, l));
                break;
            }
            trial *= 0.5;
        }
        let Some((next, l)) = step else {
            converged = r_max - 1.0 < KKT_TOL.max(tol);
            debug!("MLE line search stalled after {iterations} iterations, max eig R = {r_max}");
            break;
        };
        let decrease = (lambda - l).as_f64();
        rho = next;
        lambda = l;
        eps = if trial == eps {
            (eps * 2.0).min(MAX_DILUTION)
        } else {
            trial
        };
        if decrease < tol && r_max - 1.0 < KKT_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        debug!("MLE stopped after {iterations} iterations without converging");
    }
    Ok(MleResult {
        state: DensityMatrix::new(rho.clone()).unwrap_or_else(|_| DensityMatrix::from_trusted(rho)),
        lambda,
        iterations,
        converged,
    })
}

/// [`mle`] with the default tolerance and iteration cap.
pub fn mle_default<S: Real>(data: &TomographyDataset<S>) -> Result<MleResult<S>> {
    mle(data, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::figures::fidelity;
    use crate::likelihood::log_likelihood;
    use crate::scalar::cplx;
    use crate::statespace::{random_point, rho_from_point, PureState};
    use crate::tomodata::{simulate_dataset, standard_pauli_settings, Povm, PovmEffect};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pauli_counts(z: (u64, u64), x: (u64, u64), y: (u64, u64)) -> TomographyDataset<f64> {
        let settings = standard_pauli_settings::<f64>(1);
        // order X, Y, Z with the +1 eigenvector first
        let mut effects = Vec::new();
        let mut counts = Vec::new();
        for (povm, (a, b)) in settings.iter().zip([x, y, z]) {
            effects.extend(povm.effects().iter().cloned());
            counts.push(a);
            counts.push(b);
        }
        TomographyDataset::new(2, effects, counts).unwrap()
    }

    fn bloch_rho(r: [f64; 3]) -> DensityMatrix<f64> {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                cplx(0.5 * (1.0 + r[2]), 0.0),
                cplx(0.5 * r[0], -0.5 * r[1]),
                cplx(0.5 * r[0], 0.5 * r[1]),
                cplx(0.5 * (1.0 - r[2]), 0.0),
            ],
        );
        DensityMatrix::new(m).unwrap()
    }

    /// Grid search over the Bloch ball at spacing 1e-3 around the coarse
    /// optimum, then a shrinking coordinate search.
    fn grid_oracle(data: &TomographyDataset<f64>) -> [f64; 3] {
        let lam = |r: [f64; 3]| {
            if r.iter().map(|c| c * c).sum::<f64>() > 1.0 {
                f64::INFINITY
            } else {
                log_likelihood(&bloch_rho(r), data).unwrap()
            }
        };
        let mut best = ([0.0; 3], f64::INFINITY);
        let n = 40;
        for i in -n..=n {
            for j in -n..=n {
                for k in -n..=n {
                    let r = [
                        i as f64 / n as f64,
                        j as f64 / n as f64,
                        k as f64 / n as f64,
                    ];
                    let l = lam(r);
                    if l < best.1 {
                        best = (r, l);
                    }
                }
            }
        }
        let mut h = 1e-3;
        while h > 1e-10 {
            let mut improved = true;
            while improved {
                improved = false;
                for axis in 0..3 {
                    for sign in [-1.0, 1.0] {
                        let mut r = best.0;
                        r[axis] += sign * h;
                        let l = lam(r);
                        if l < best.1 {
                            best = (r, l);
                            improved = true;
                        }
                    }
                }
            }
            h *= 0.5;
        }
        best.0
    }

    #[test]
    fn qubit_grid_agreement() {
        let data = pauli_counts((75, 25), (50, 50), (50, 50));
        let res = mle_default(&data).unwrap();
        assert!(res.converged);
        let oracle = grid_oracle(&data);
        let expected = bloch_rho(oracle);
        assert!((oracle[2] - 0.5).abs() < 1e-6);
        let diff = (res.state.matrix() - expected.matrix()).norm();
        assert!(diff < 1e-6, "{diff}");
        let target = DensityMatrix::diagonal(&[0.75, 0.25]).unwrap();
        assert!((res.state.matrix() - target.matrix()).norm() < 1e-6);
        let exact = log_likelihood(&res.state, &data).unwrap();
        assert!((exact - res.lambda).abs() < 1e-9);
    }

    #[test]
    fn skewed_qubit_grid_agreement() {
        let data = pauli_counts((70, 30), (62, 38), (45, 55));
        let res = mle_default(&data).unwrap();
        let oracle = bloch_rho(grid_oracle(&data));
        assert!((res.state.matrix() - oracle.matrix()).norm() < 1e-6);
    }

    /// Counts equal to `shots · p_k` exactly: every Pauli outcome probability
    /// of these states is a multiple of 1/4.
    fn expected_count_data(truth: &DensityMatrix<f64>, shots: f64) -> TomographyDataset<f64> {
        let settings: Vec<Povm<f64>> = standard_pauli_settings(2);
        let mut effects = Vec::new();
        let mut counts = Vec::new();
        for povm in &settings {
            for e in povm.effects() {
                let c = e.probability_unchecked(truth.matrix()).re * shots;
                assert!((c - c.round()).abs() < 1e-9);
                effects.push(e.clone());
                counts.push(c.round() as u64);
            }
        }
        TomographyDataset::new(4, effects, counts).unwrap()
    }

    #[test]
    fn pure_states_from_expected_counts() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let states = [
            vec![cplx(h, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(h, 0.0)],
            vec![cplx(0.0, 0.0), cplx(h, 0.0), cplx(0.0, -h), cplx(0.0, 0.0)],
            vec![cplx(h, 0.0), cplx(h, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0)],
            vec![
                cplx(0.5, 0.0),
                cplx(0.0, 0.5),
                cplx(0.5, 0.0),
                cplx(0.0, 0.5),
            ],
        ];
        for amps in states {
            let psi = PureState::new(DVector::from_vec(amps)).unwrap();
            let truth = DensityMatrix::from_pure(&psi);
            let data = expected_count_data(&truth, 400.0);
            let res = mle_default(&data).unwrap();
            let f = fidelity(&res.state, &truth);
            assert!(
                f * f > 1.0 - 1e-6,
                "fidelity² {} after {} iterations",
                f * f,
                res.iterations
            );
            let exact = log_likelihood(&res.state, &data).unwrap();
            assert!((exact - res.lambda).abs() < 1e-9 * exact.max(1.0));
        }
    }

    #[test]
    fn flat_likelihood_returns_maximally_mixed() {
        let data = TomographyDataset::new(3, vec![PovmEffect::identity(3)], vec![10]).unwrap();
        let res = mle_default(&data).unwrap();
        assert!(res.converged);
        assert!(
            (res.state.matrix() - DensityMatrix::<f64>::maximally_mixed(3).matrix()).norm() < 1e-15
        );
    }

    #[test]
    fn lambda_monotone_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let settings = standard_pauli_settings::<f64>(1);
        for _ in 0..50 {
            let truth = rho_from_point(&random_point::<f64, _>(2, &mut rng)).unwrap();
            let data = simulate_dataset(&truth, &settings, 30, &mut rng).unwrap();
            let mut last = f64::INFINITY;
            for iters in [1, 2, 5, 20, 100] {
                let r = mle(&data, 0.0, iters).unwrap();
                assert!(r.lambda <= last + 1e-12);
                last = r.lambda;
            }
        }
    }

    #[test]
    fn rejects_empty_data() {
        // the dataset constructor already refuses all-zero counts
        assert!(TomographyDataset::<f64>::new(2, vec![PovmEffect::identity(2)], vec![0]).is_err());
    }
}
