//! Quantum states and the hypersphere coordinates used by the random walk.
//!
//! A state of dimension `d` is written `ρ = T T†` with `T` a complex `d×d`
//! matrix of unit Frobenius norm. Splitting the entries of `T` into real and
//! imaginary parts gives a point on the unit sphere in `R^(2d²)`; uniform
//! points on that sphere induce the Hilbert-Schmidt measure on states.
//!
//! Coordinate layout of a [`StatePoint`]: the first `d²` entries are the real
//! parts of `T` in column-major order, the next `d²` the imaginary parts in the
//! same order, i.e. `Re T[i,j] = coords[j·d + i]`, `Im T[i,j] = coords[d² + j·d + i]`.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;

use crate::error::{QebError, Result};
use crate::scalar::{
    cplx, hermitian_eigenvalues, hermiticity_defect, hermitize, psd_sqrt, CMatrix, Real,
};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_SLACK: f64 = 1e-10;
/// Eigenvalues below this make a matrix "not a state" when taking a root.
pub const PSD_REJECT: f64 = 1e-8;
pub const NORM_TOL: f64 = 1e-12;

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<S: Real> {
    m: CMatrix<S>,
}

impl<S: Real> DensityMatrix<S> {
    /// Validates all density-matrix invariants.
    pub fn new(m: CMatrix<S>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(QebError::InvalidState(format!(
                "matrix is {}×{}, expected square and non-empty",
                m.nrows(),
                m.ncols()
            )));
        }
        let herm = hermiticity_defect(&m);
        if herm > S::tol(HERMITIAN_TOL) {
            return Err(QebError::InvalidState(format!(
                "not Hermitian (defect {herm})"
            )));
        }
        let tr = m.trace().re;
        if (tr - S::one()).abs() > S::tol(TRACE_TOL) {
            return Err(QebError::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let mut m = m;
        hermitize(&mut m);
        let min = hermitian_eigenvalues(&m)[0];
        if min < -S::tol(PSD_SLACK) {
            return Err(QebError::InvalidState(format!(
                "smallest eigenvalue {min} is negative"
            )));
        }
        Ok(DensityMatrix { m })
    }

    /// Trusted construction for matrices that are PSD with unit trace by
    /// construction; only Hermiticity is enforced.
    pub(crate) fn from_trusted(mut m: CMatrix<S>) -> Self {
        hermitize(&mut m);
        DensityMatrix { m }
    }

    /// Builds a diagonal state from a probability vector.
    pub fn diagonal(probs: &[S]) -> Result<Self> {
        let d = probs.len();
        let m = CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                cplx(probs[i], S::zero())
            } else {
                cplx(S::zero(), S::zero())
            }
        });
        Self::new(m)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let v = S::one() / S::of(dim as f64);
        DensityMatrix {
            m: CMatrix::from_diagonal_element(dim, dim, cplx(v, S::zero())),
        }
    }

    pub fn from_pure(psi: &PureState<S>) -> Self {
        let v = &psi.amps;
        DensityMatrix::from_trusted(v * v.adjoint())
    }

    /// `Σ wᵢ ρᵢ` for non-negative weights summing to one.
    pub fn mixture(parts: &[(S, &DensityMatrix<S>)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| QebError::InvalidState("empty mixture".into()))?;
        let d = first.1.dim();
        let mut acc = CMatrix::zeros(d, d);
        for (w, rho) in parts {
            if rho.dim() != d {
                return Err(QebError::DimensionMismatch {
                    expected: d,
                    found: rho.dim(),
                });
            }
            acc += rho.matrix().map(|z| z.scale(*w));
        }
        Self::new(acc)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<S> {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix<S> {
        self.m
    }

    pub fn eigenvalues(&self) -> Vec<S> {
        hermitian_eigenvalues(&self.m)
    }

    pub fn purity(&self) -> S {
        // tr ρ² = Σ |ρ_ij|² for Hermitian ρ
        self.m.iter().fold(S::zero(), |acc, z| acc + z.norm_sqr())
    }

    pub fn trace(&self) -> S {
        self.m.trace().re
    }
}

/// Unit vector in `C^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState<S: Real> {
    amps: DVector<Complex<S>>,
}

impl<S: Real> PureState<S> {
    pub fn new(amps: DVector<Complex<S>>) -> Result<Self> {
        if amps.is_empty() {
            return Err(QebError::InvalidState("empty state vector".into()));
        }
        let n = amps.norm();
        if (n - S::one()).abs() > S::tol(NORM_TOL) {
            return Err(QebError::InvalidState(format!(
                "state vector has norm {n}, expected 1"
            )));
        }
        Ok(PureState { amps })
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn normalized(amps: DVector<Complex<S>>) -> Result<Self> {
        let n = amps.norm();
        if n <= S::zero() || !n.is_finite_value() {
            return Err(QebError::InvalidState(
                "cannot normalize a zero vector".into(),
            ));
        }
        Ok(PureState {
            amps: amps.unscale(n),
        })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = DVector::zeros(dim);
        amps[index] = cplx(S::one(), S::zero());
        PureState { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex<S>> {
        &self.amps
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> CMatrix<S> {
        &self.amps * self.amps.adjoint()
    }
}

/// Point on the unit sphere in `R^(2d²)` encoding a purification matrix `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePoint<S: Real> {
    dim: usize,
    coords: Vec<S>,
}

impl<S: Real> StatePoint<S> {
    /// Validates the length and the unit norm of `coords`.
    pub fn new(dim: usize, coords: Vec<S>) -> Result<Self> {
        let expected = 2 * dim * dim;
        if coords.len() != expected {
            return Err(QebError::BadCoordinates {
                expected,
                found: coords.len(),
            });
        }
        let n = euclidean_norm(&coords);
        if (n - S::one()).abs() > S::tol(NORM_TOL) {
            return Err(QebError::InvalidState(format!(
                "state point has norm {n}, expected 1"
            )));
        }
        Ok(StatePoint { dim, coords })
    }

    /// Normalizes `raw` onto the sphere. `raw` must be non-zero.
    pub(crate) fn from_unnormalized(dim: usize, mut raw: Vec<S>) -> Self {
        let n = euclidean_norm(&raw);
        for c in raw.iter_mut() {
            *c /= n;
        }
        StatePoint { dim, coords: raw }
    }

    /// Builds a point from an arbitrary `T` with `tr TT† = 1`.
    pub fn from_t_matrix(t: &CMatrix<S>) -> Result<Self> {
        let d = t.nrows();
        if t.ncols() != d {
            return Err(QebError::InvalidState("T must be square".into()));
        }
        let mut coords = vec![S::zero(); 2 * d * d];
        for j in 0..d {
            for i in 0..d {
                coords[j * d + i] = t[(i, j)].re;
                coords[d * d + j * d + i] = t[(i, j)].im;
            }
        }
        Self::new(d, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[S] {
        &self.coords
    }

    pub fn t_matrix(&self) -> CMatrix<S> {
        let d = self.dim;
        let dd = d * d;
        DMatrix::from_fn(d, d, |i, j| {
            cplx(self.coords[j * d + i], self.coords[dd + j * d + i])
        })
    }
}

pub(crate) fn euclidean_norm<S: Real>(v: &[S]) -> S {
    v.iter().fold(S::zero(), |acc, &x| acc + x * x).sqrt()
}

/// `ρ = T T†`.
pub fn rho_from_point<S: Real>(p: &StatePoint<S>) -> Result<DensityMatrix<S>> {
    let expected = 2 * p.dim * p.dim;
    if p.coords.len() != expected {
        return Err(QebError::BadCoordinates {
            expected,
            found: p.coords.len(),
        });
    }
    Ok(rho_from_point_unchecked(p))
}

pub(crate) fn rho_from_point_unchecked<S: Real>(p: &StatePoint<S>) -> DensityMatrix<S> {
    let t = p.t_matrix();
    DensityMatrix::from_trusted(&t * t.adjoint())
}

/// Coordinates of the Hermitian square root `T = ρ^{1/2}`.
pub fn point_from_rho<S: Real>(rho: &DensityMatrix<S>) -> Result<StatePoint<S>> {
    let min = rho.eigenvalues()[0];
    if min < -S::tol(PSD_REJECT) {
        return Err(QebError::InvalidState(format!(
            "eigenvalue {min} below −{PSD_REJECT}"
        )));
    }
    let t = psd_sqrt(rho.matrix());
    let d = rho.dim();
    let mut coords = vec![S::zero(); 2 * d * d];
    for j in 0..d {
        for i in 0..d {
            coords[j * d + i] = t[(i, j)].re;
            coords[d * d + j * d + i] = t[(i, j)].im;
        }
    }
    Ok(StatePoint::from_unnormalized(d, coords))
}

/// Uniform point on the sphere, i.e. a Hilbert-Schmidt random state.
pub fn random_point<S: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> StatePoint<S> {
    let n = 2 * dim * dim;
    loop {
        let g: Vec<S> = (0..n).map(|_| S::standard_normal(rng)).collect();
        if euclidean_norm(&g) > S::zero() {
            return StatePoint::from_unnormalized(dim, g);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t_diag(a: f64, b: f64) -> StatePoint<f64> {
        let t = CMatrix::from_diagonal(&DVector::from_vec(vec![cplx(a, 0.0), cplx(b, 0.0)]));
        StatePoint::from_t_matrix(&t).unwrap()
    }

    fn assert_close(a: &CMatrix<f64>, b: &CMatrix<f64>, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < tol, "{a} vs {b}");
        }
    }

    #[test]
    fn rho_from_point_examples() {
        let rho = rho_from_point(&t_diag(1.0, 0.0)).unwrap();
        assert_close(
            rho.matrix(),
            DensityMatrix::diagonal(&[1.0, 0.0]).unwrap().matrix(),
            1e-15,
        );

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let rho = rho_from_point(&t_diag(s, s)).unwrap();
        assert_close(
            rho.matrix(),
            DensityMatrix::<f64>::maximally_mixed(2).matrix(),
            1e-15,
        );

        let rho = rho_from_point(&t_diag(0.8f64.sqrt(), 0.2f64.sqrt())).unwrap();
        assert_close(
            rho.matrix(),
            DensityMatrix::diagonal(&[0.8, 0.2]).unwrap().matrix(),
            1e-15,
        );
    }

    #[test]
    fn rejects_bad_coordinate_length() {
        let err = StatePoint::<f64>::new(2, vec![1.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(
            err,
            QebError::BadCoordinates {
                expected: 8,
                found: 3
            }
        ));
    }

    #[test]
    fn point_from_rho_examples() {
        let p = point_from_rho(&DensityMatrix::diagonal(&[1.0, 0.0]).unwrap()).unwrap();
        assert_close(
            &p.t_matrix(),
            &DensityMatrix::diagonal(&[1.0, 0.0]).unwrap().into_matrix(),
            1e-12,
        );

        let p = point_from_rho(&DensityMatrix::<f64>::maximally_mixed(2)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_close(&p.t_matrix(), &t_diag(s, s).t_matrix(), 1e-12);

        // eigen-decomposition of diag(0.64, 0.36) is trivial: roots 0.8 and 0.6
        let p = point_from_rho(&DensityMatrix::diagonal(&[0.64, 0.36]).unwrap()).unwrap();
        assert_close(&p.t_matrix(), &t_diag(0.8, 0.6).t_matrix(), 1e-12);
    }

    #[test]
    fn point_from_rho_rejects_non_states() {
        let m = CMatrix::from_diagonal(&DVector::from_vec(vec![cplx(1.1, 0.0), cplx(-0.1, 0.0)]));
        let rho = DensityMatrix::from_trusted(m);
        assert!(point_from_rho(&rho).is_err());
    }

    #[test]
    fn random_point_is_unit_and_deterministic() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        let p: StatePoint<f64> = random_point(3, &mut a);
        let q: StatePoint<f64> = random_point(3, &mut b);
        assert_eq!(p, q);
        assert!((euclidean_norm(p.coords()) - 1.0).abs() < 1e-12);
        assert_eq!(p.coords().len(), 18);
    }

    #[test]
    fn random_states_satisfy_invariants_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 2..=4 {
            for _ in 0..50 {
                let p: StatePoint<f64> = random_point(d, &mut rng);
                let rho = rho_from_point(&p).unwrap();
                assert!((rho.trace() - 1.0).abs() < 1e-12);
                assert!(rho.eigenvalues()[0] >= -1e-10);
                let validated = DensityMatrix::new(rho.matrix().clone()).unwrap();
                let back = rho_from_point(&point_from_rho(&validated).unwrap()).unwrap();
                assert_close(back.matrix(), rho.matrix(), 1e-10);
            }
        }
    }

    /// Uniform points of the Bloch ball by rejection from the cube.
    fn bloch_ball_purity_oracle(n: usize, rng: &mut ChaCha8Rng) -> f64 {
        let mut acc = 0.0;
        let mut kept = 0;
        while kept < n {
            let v: [f64; 3] = [
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            ];
            let r2 = v.iter().map(|x| x * x).sum::<f64>();
            if r2 <= 1.0 {
                acc += (1.0 + r2) / 2.0;
                kept += 1;
            }
        }
        acc / n as f64
    }

    #[test]
    fn hilbert_schmidt_purity_moment_qubit() {
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let purities: Vec<f64> = (0..n)
            .map(|_| {
                rho_from_point(&random_point::<f64, _>(2, &mut rng))
                    .unwrap()
                    .purity()
            })
            .collect();
        let mean = purities.iter().sum::<f64>() / n as f64;
        let var = purities.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 0.8).abs() < 3.0 * se, "mean {mean} se {se}");

        let oracle = bloch_ball_purity_oracle(n, &mut rng);
        assert!((oracle - 0.8).abs() < 3.0 * se * 1.5);
        assert!((oracle - mean).abs() < 4.5 * se);
    }

    #[test]
    fn single_precision_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p: StatePoint<f32> = random_point(2, &mut rng);
        let rho = rho_from_point(&p).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-5);
        let back = rho_from_point(&point_from_rho(&rho).unwrap()).unwrap();
        for (x, y) in back.matrix().iter().zip(rho.matrix().iter()) {
            assert!((x - y).norm() < 1e-4);
        }
    }
}
