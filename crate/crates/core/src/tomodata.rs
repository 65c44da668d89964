//! Measurement records: POVM effects with outcome counts, effective POVMs
//! built from readout calibration, and simulated experiments.

use std::collections::HashMap;

use nalgebra::{Complex, ComplexField};
use rand::Rng;

use crate::error::{QebError, Result};
use crate::scalar::{
    cplx, hermitian_eigenvalues, hermiticity_defect, hermitize, trace_product_hermitian, CMatrix,
    Real,
};
use crate::statespace::{DensityMatrix, PSD_SLACK};

pub const EFFECT_HERMITIAN_TOL: f64 = 1e-12;
pub const COMPLETENESS_TOL: f64 = 1e-9;
pub const UNITARITY_TOL: f64 = 1e-10;
/// Effects equal after rounding to this grid are merged.
pub const MERGE_GRID: f64 = 1e-12;
pub const DEFAULT_CALIBRATION_BINS: usize = 20;

/// Hermitian operator with spectrum in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmEffect<S: Real> {
    m: CMatrix<S>,
}

impl<S: Real> PovmEffect<S> {
    pub fn new(m: CMatrix<S>) -> Result<Self> {
        Self::validated(m, 0)
    }

    /// Like [`PovmEffect::new`], with `index` reported in errors.
    pub fn validated(mut m: CMatrix<S>, index: usize) -> Result<Self> {
        let bad = |reason: String| QebError::InvalidEffect { index, reason };
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(bad(format!(
                "shape {}×{} is not square",
                m.nrows(),
                m.ncols()
            )));
        }
        let herm = hermiticity_defect(&m);
        if herm > S::tol(EFFECT_HERMITIAN_TOL) {
            return Err(bad(format!("not Hermitian (defect {herm})")));
        }
        hermitize(&mut m);
        let ev = hermitian_eigenvalues(&m);
        let slack = S::tol(PSD_SLACK);
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        if lo < -slack || hi > S::one() + slack {
            return Err(bad(format!(
                "eigenvalues span [{lo}, {hi}], outside [0, 1]"
            )));
        }
        Ok(PovmEffect { m })
    }

    pub(crate) fn from_trusted(mut m: CMatrix<S>) -> Self {
        hermitize(&mut m);
        PovmEffect { m }
    }

    pub fn identity(dim: usize) -> Self {
        PovmEffect {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<S> {
        &self.m
    }

    /// Outcome probability `tr(E ρ)` without dimension checks.
    #[inline]
    pub fn probability_unchecked(&self, rho: &CMatrix<S>) -> Complex<S> {
        trace_product_hermitian(&self.m, rho)
    }

    fn merge_key(&self) -> Vec<i64> {
        self.m
            .iter()
            .flat_map(|z| [z.re, z.im])
            .map(|x| (x.as_f64() / MERGE_GRID).round() as i64)
            .collect()
    }
}

/// Kronecker product `a ⊗ b`.
pub fn tensor_effects<S: Real>(a: &PovmEffect<S>, b: &PovmEffect<S>) -> PovmEffect<S> {
    PovmEffect::from_trusted(a.m.kronecker(&b.m))
}

/// One measurement setting: effects that sum to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm<S: Real> {
    effects: Vec<PovmEffect<S>>,
}

impl<S: Real> Povm<S> {
    pub fn new(effects: Vec<PovmEffect<S>>) -> Result<Self> {
        let Some(first) = effects.first() else {
            return Err(QebError::InvalidDataset(
                "a POVM needs at least one effect".into(),
            ));
        };
        let d = first.dim();
        if let Some(e) = effects.iter().find(|e| e.dim() != d) {
            return Err(QebError::DimensionMismatch {
                expected: d,
                found: e.dim(),
            });
        }
        Ok(Povm { effects })
    }

    pub fn effects(&self) -> &[PovmEffect<S>] {
        &self.effects
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    /// Largest entry of `|Σ E_k − I|`.
    pub fn completeness_defect(&self) -> S {
        let d = self.dim();
        let mut sum = CMatrix::<S>::zeros(d, d);
        for e in &self.effects {
            sum += &e.m;
        }
        sum -= CMatrix::identity(d, d);
        sum.iter().fold(S::zero(), |w, z| w.max(z.modulus()))
    }

    /// Kronecker product of two settings, outcomes of `self` most significant.
    pub fn tensor(&self, other: &Povm<S>) -> Povm<S> {
        let effects = self
            .effects
            .iter()
            .flat_map(|a| other.effects.iter().map(move |b| tensor_effects(a, b)))
            .collect();
        Povm { effects }
    }
}

/// Which effects (by index into the dataset) one setting produced, and how
/// many shots it was repeated for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SettingRecord {
    pub effects: Vec<usize>,
    pub shots: u64,
}

/// Distinct POVM effects `E_k` with their observed counts `n_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyDataset<S: Real> {
    dim: usize,
    effects: Vec<PovmEffect<S>>,
    counts: Vec<u64>,
    settings: Option<Vec<SettingRecord>>,
}

impl<S: Real> TomographyDataset<S> {
    /// Validates and merges identical effects.
    pub fn new(dim: usize, effects: Vec<PovmEffect<S>>, counts: Vec<u64>) -> Result<Self> {
        Self::build(dim, effects, counts, None, None)
    }

    /// Full constructor: `declared_total` is checked against `Σ n_k`, and
    /// `settings` refer to indices of `effects` before merging.
    pub fn build(
        dim: usize,
        effects: Vec<PovmEffect<S>>,
        counts: Vec<u64>,
        declared_total: Option<u64>,
        settings: Option<Vec<SettingRecord>>,
    ) -> Result<Self> {
        if effects.len() != counts.len() {
            return Err(QebError::InvalidDataset(format!(
                "{} effects but {} counts",
                effects.len(),
                counts.len()
            )));
        }
        if effects.is_empty() {
            return Err(QebError::InvalidDataset("no effects".into()));
        }
        for (k, e) in effects.iter().enumerate() {
            if e.dim() != dim {
                return Err(QebError::InvalidEffect {
                    index: k,
                    reason: format!("dimension {} differs from dataset dimension {dim}", e.dim()),
                });
            }
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(QebError::InvalidDataset("all counts are zero".into()));
        }
        if let Some(t) = declared_total {
            if t != total {
                return Err(QebError::InvalidDataset(format!(
                    "declared total {t} differs from the sum of counts {total}"
                )));
            }
        }

        let mut index_of: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut remap = Vec::with_capacity(effects.len());
        let mut merged_effects: Vec<PovmEffect<S>> = Vec::new();
        let mut merged_counts: Vec<u64> = Vec::new();
        for (e, n) in effects.into_iter().zip(counts) {
            let key = e.merge_key();
            let idx = *index_of.entry(key).or_insert_with(|| {
                merged_effects.push(e);
                merged_counts.push(0);
                merged_effects.len() - 1
            });
            merged_counts[idx] += n;
            remap.push(idx);
        }

        let settings = match settings {
            None => None,
            Some(list) => {
                let mut out = Vec::with_capacity(list.len());
                for (i, s) in list.into_iter().enumerate() {
                    let mut idx = Vec::with_capacity(s.effects.len());
                    for k in s.effects {
                        let mapped = remap.get(k).copied().ok_or_else(|| {
                            QebError::InvalidDataset(format!(
                                "setting {i} refers to effect {k}, which does not exist"
                            ))
                        })?;
                        idx.push(mapped);
                    }
                    out.push(SettingRecord {
                        effects: idx,
                        shots: s.shots,
                    });
                }
                Some(out)
            }
        };

        Ok(TomographyDataset {
            dim,
            effects: merged_effects,
            counts: merged_counts,
            settings,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn effects(&self) -> &[PovmEffect<S>] {
        &self.effects
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn settings(&self) -> Option<&[SettingRecord]> {
        self.settings.as_deref()
    }

    /// Rebuilds the measurement settings (effects as POVMs plus shot counts),
    /// needed to resample the experiment.
    pub fn measurement_plan(&self) -> Option<Vec<(Povm<S>, u64)>> {
        let settings = self.settings.as_ref()?;
        settings
            .iter()
            .map(|s| {
                let effects = s.effects.iter().map(|&k| self.effects[k].clone()).collect();
                Povm::new(effects).ok().map(|p| (p, s.shots))
            })
            .collect()
    }
}

/// Binned readout distributions for trusted |0⟩ and |1⟩ preparations, plus the
/// basis rotations applied before readout.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReadout<S: Real> {
    q0: Vec<S>,
    q1: Vec<S>,
    rotations: Vec<CMatrix<S>>,
}

impl<S: Real> CalibrationReadout<S> {
    pub fn new(q0: Vec<S>, q1: Vec<S>, rotations: Vec<CMatrix<S>>) -> Result<Self> {
        if q0.len() != q1.len() {
            return Err(QebError::InvalidCalibration(format!(
                "q0 has {} bins but q1 has {}",
                q0.len(),
                q1.len()
            )));
        }
        if q0.is_empty() {
            return Err(QebError::InvalidCalibration("no bins".into()));
        }
        for (name, q) in [("q0", &q0), ("q1", &q1)] {
            if q.iter().any(|&x| x < S::zero()) {
                return Err(QebError::InvalidCalibration(format!(
                    "{name} has negative entries"
                )));
            }
            let sum = q.iter().fold(S::zero(), |a, &x| a + x);
            if (sum - S::one()).abs() > S::tol(COMPLETENESS_TOL) {
                return Err(QebError::InvalidCalibration(format!(
                    "{name} sums to {sum}, expected 1"
                )));
            }
        }
        for (i, u) in rotations.iter().enumerate() {
            if u.shape() != (2, 2) {
                return Err(QebError::InvalidCalibration(format!(
                    "rotation {i} is not 2×2"
                )));
            }
            let defect = (u.adjoint() * u - CMatrix::identity(2, 2))
                .iter()
                .fold(S::zero(), |w, z| w.max(z.modulus()));
            if defect > S::tol(UNITARITY_TOL) {
                return Err(QebError::InvalidCalibration(format!(
                    "rotation {i} is not unitary (defect {defect})"
                )));
            }
        }
        Ok(CalibrationReadout { q0, q1, rotations })
    }

    pub fn bins(&self) -> usize {
        self.q0.len()
    }

    pub fn rotations(&self) -> &[CMatrix<S>] {
        &self.rotations
    }

    pub fn q0(&self) -> &[S] {
        &self.q0
    }

    pub fn q1(&self) -> &[S] {
        &self.q1
    }
}

/// Coarse-grains raw readout values into `num_bins` equal bins over `[lo, hi]`
/// and returns the normalized histograms `(q0', q1')`. Values outside the
/// range are clamped into the edge bins.
pub fn coarse_grain_readout(
    values0: &[f64],
    values1: &[f64],
    num_bins: usize,
    lo: f64,
    hi: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if num_bins == 0 || !(hi > lo) {
        return Err(QebError::InvalidCalibration(
            "need num_bins ≥ 1 and hi > lo".into(),
        ));
    }
    let bin = |v: f64| -> usize {
        let k = ((v - lo) / (hi - lo) * num_bins as f64).floor();
        (k.max(0.0) as usize).min(num_bins - 1)
    };
    let hist = |vals: &[f64]| -> Result<Vec<f64>> {
        if vals.is_empty() {
            return Err(QebError::InvalidCalibration(
                "empty calibration sample".into(),
            ));
        }
        let mut h = vec![0.0; num_bins];
        for &v in vals {
            h[bin(v)] += 1.0;
        }
        let n = vals.len() as f64;
        Ok(h.into_iter().map(|c| c / n).collect())
    };
    Ok((hist(values0)?, hist(values1)?))
}

/// Effects `U_i† diag(q0'(k), q1'(k)) U_i` for every bin `k`.
pub fn build_effective_povm<S: Real>(
    cal: &CalibrationReadout<S>,
    setting: usize,
) -> Result<Vec<PovmEffect<S>>> {
    let u = cal.rotations.get(setting).ok_or_else(|| {
        QebError::InvalidCalibration(format!(
            "rotation index {setting} out of range ({} rotations)",
            cal.rotations.len()
        ))
    })?;
    let ud = u.adjoint();
    Ok(cal
        .q0
        .iter()
        .zip(&cal.q1)
        .map(|(&a, &b)| {
            let mut diag = CMatrix::zeros(2, 2);
            diag[(0, 0)] = cplx(a, S::zero());
            diag[(1, 1)] = cplx(b, S::zero());
            PovmEffect::from_trusted(&ud * diag * u)
        })
        .collect())
}

/// Product settings over qubits: for every combination of one rotation per
/// qubit, all tensor products of that qubit's binned effects.
pub fn effective_product_settings<S: Real>(
    per_qubit: &[CalibrationReadout<S>],
) -> Result<Vec<Povm<S>>> {
    let mut settings: Vec<Povm<S>> = vec![Povm {
        effects: vec![PovmEffect::identity(1)],
    }];
    for cal in per_qubit {
        let mut next = Vec::with_capacity(settings.len() * cal.rotations.len());
        for s in &settings {
            for r in 0..cal.rotations.len() {
                let local = Povm::new(build_effective_povm(cal, r)?)?;
                next.push(s.tensor(&local));
            }
        }
        settings = next;
    }
    Ok(settings)
}

/// Pauli matrices `[σX, σY, σZ]`.
pub fn pauli_matrices<S: Real>() -> [CMatrix<S>; 3] {
    let (z, o) = (S::zero(), S::one());
    [
        CMatrix::from_row_slice(2, 2, &[cplx(z, z), cplx(o, z), cplx(o, z), cplx(z, z)]),
        CMatrix::from_row_slice(2, 2, &[cplx(z, z), cplx(z, -o), cplx(z, o), cplx(z, z)]),
        CMatrix::from_row_slice(2, 2, &[cplx(o, z), cplx(z, z), cplx(z, z), cplx(-o, z)]),
    ]
}

/// Rotations bringing the X, Y and Z eigenbases onto the computational basis.
pub fn pauli_rotations<S: Real>() -> Vec<CMatrix<S>> {
    let h = S::of(std::f64::consts::FRAC_1_SQRT_2);
    let z = S::zero();
    let hadamard =
        CMatrix::from_row_slice(2, 2, &[cplx(h, z), cplx(h, z), cplx(h, z), cplx(-h, z)]);
    // H S†: maps (|0⟩ ± i|1⟩)/√2 to |0⟩, |1⟩
    let hs = CMatrix::from_row_slice(2, 2, &[cplx(h, z), cplx(z, -h), cplx(h, z), cplx(z, h)]);
    vec![hadamard, hs, CMatrix::identity(2, 2)]
}

fn single_qubit_pauli_bases<S: Real>() -> Vec<Povm<S>> {
    let h = S::of(std::f64::consts::FRAC_1_SQRT_2);
    let z = S::zero();
    let o = S::one();
    let proj = |a: Complex<S>, b: Complex<S>| {
        let v = nalgebra::DVector::from_vec(vec![a, b]);
        PovmEffect::from_trusted(&v * v.adjoint())
    };
    vec![
        Povm {
            effects: vec![proj(cplx(h, z), cplx(h, z)), proj(cplx(h, z), cplx(-h, z))],
        },
        Povm {
            effects: vec![proj(cplx(h, z), cplx(z, h)), proj(cplx(h, z), cplx(z, -h))],
        },
        Povm {
            effects: vec![proj(cplx(o, z), cplx(z, z)), proj(cplx(z, z), cplx(o, z))],
        },
    ]
}

/// All `3^k` product Pauli settings on `k` qubits, bases ordered X, Y, Z with
/// the first qubit most significant; each setting has `2^k` projectors with
/// the +1 eigenvector first.
pub fn standard_pauli_settings<S: Real>(num_qubits: usize) -> Vec<Povm<S>> {
    let local = single_qubit_pauli_bases::<S>();
    let mut settings: Vec<Povm<S>> = vec![Povm {
        effects: vec![PovmEffect::identity(1)],
    }];
    for _ in 0..num_qubits {
        settings = settings
            .iter()
            .flat_map(|s| local.iter().map(move |l| s.tensor(l)))
            .collect();
    }
    settings
}

/// Draws `shots_per_setting` multinomial outcomes per setting from `rho_true`
/// and aggregates counts per distinct effect.
pub fn simulate_dataset<S: Real, R: Rng + ?Sized>(
    rho_true: &DensityMatrix<S>,
    settings: &[Povm<S>],
    shots_per_setting: u64,
    rng: &mut R,
) -> Result<TomographyDataset<S>> {
    let plan: Vec<(&Povm<S>, u64)> = settings.iter().map(|p| (p, shots_per_setting)).collect();
    simulate_plan(rho_true, &plan, rng)
}

/// Like [`simulate_dataset`] with a shot count per setting.
pub fn simulate_plan<S: Real, R: Rng + ?Sized>(
    rho_true: &DensityMatrix<S>,
    plan: &[(&Povm<S>, u64)],
    rng: &mut R,
) -> Result<TomographyDataset<S>> {
    if plan.is_empty() {
        return Err(QebError::InvalidDataset("no measurement settings".into()));
    }
    let d = rho_true.dim();
    let mut effects = Vec::new();
    let mut counts = Vec::new();
    let mut records = Vec::with_capacity(plan.len());
    for (i, &(setting, shots)) in plan.iter().enumerate() {
        if setting.dim() != d {
            return Err(QebError::DimensionMismatch {
                expected: d,
                found: setting.dim(),
            });
        }
        let defect = setting.completeness_defect();
        if defect > S::tol(COMPLETENESS_TOL) {
            return Err(QebError::NotNormalized {
                index: i,
                reason: format!("effects sum to identity only within {defect}"),
            });
        }
        let mut probs = Vec::with_capacity(setting.effects.len());
        for e in &setting.effects {
            let p = e.probability_unchecked(rho_true.matrix()).re.as_f64();
            if p < -1e-12 {
                return Err(QebError::NotNormalized {
                    index: i,
                    reason: format!("negative outcome probability {p}"),
                });
            }
            probs.push(p.max(0.0));
        }
        let local = sample_multinomial(&probs, shots, rng);
        let start = effects.len();
        effects.extend(setting.effects.iter().cloned());
        counts.extend(local);
        records.push(SettingRecord {
            effects: (start..effects.len()).collect(),
            shots,
        });
    }
    TomographyDataset::build(d, effects, counts, None, Some(records))
}

/// Multinomial counts by inverse-CDF sampling of each shot.
pub(crate) fn sample_multinomial<R: Rng + ?Sized>(
    probs: &[f64],
    shots: u64,
    rng: &mut R,
) -> Vec<u64> {
    let total: f64 = probs.iter().sum();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p / total;
        cdf.push(acc);
    }
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        let u: f64 = rng.random();
        let k = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
        counts[k] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::PureState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(a: f64, b: f64) -> CMatrix<f64> {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = cplx(a, 0.0);
        m[(1, 1)] = cplx(b, 0.0);
        m
    }

    fn assert_close(a: &CMatrix<f64>, b: &CMatrix<f64>, tol: f64) {
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < tol, "{a} vs {b}");
        }
    }

    #[test]
    fn noiseless_readout_gives_projectors() {
        let cal = CalibrationReadout::new(
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![CMatrix::identity(2, 2)],
        )
        .unwrap();
        let eff = build_effective_povm(&cal, 0).unwrap();
        assert_close(eff[0].matrix(), &diag(1.0, 0.0), 1e-15);
        assert_close(eff[1].matrix(), &diag(0.0, 1.0), 1e-15);
    }

    #[test]
    fn noisy_readout_effects() {
        let cal = CalibrationReadout::new(
            vec![0.9, 0.1],
            vec![0.2, 0.8],
            vec![CMatrix::identity(2, 2)],
        )
        .unwrap();
        let eff = build_effective_povm(&cal, 0).unwrap();
        assert_close(eff[0].matrix(), &diag(0.9, 0.2), 1e-15);
        assert_close(eff[1].matrix(), &diag(0.1, 0.8), 1e-15);
    }

    #[test]
    fn effective_povms_are_complete_for_every_rotation() {
        let (q0, q1) = coarse_grain_readout(
            &[0.1, 0.2, 0.25, 0.3, 0.9, 0.15],
            &[0.7, 0.8, 0.85, 0.95, 0.2, 0.99],
            DEFAULT_CALIBRATION_BINS,
            0.0,
            1.0,
        )
        .unwrap();
        let cal = CalibrationReadout::new(q0, q1, pauli_rotations()).unwrap();
        for r in 0..3 {
            let povm = Povm::new(build_effective_povm(&cal, r).unwrap()).unwrap();
            assert_eq!(povm.effects().len(), 20);
            assert!(povm.completeness_defect() < 1e-9);
            for e in povm.effects() {
                PovmEffect::new(e.matrix().clone()).unwrap();
            }
        }
    }

    #[test]
    fn calibration_rejects_mismatched_lengths() {
        let err = CalibrationReadout::<f64>::new(vec![1.0], vec![0.5, 0.5], vec![]).unwrap_err();
        assert!(matches!(err, QebError::InvalidCalibration(_)));
    }

    #[test]
    fn tensor_products() {
        let i2 = PovmEffect::<f64>::identity(2);
        assert_eq!(tensor_effects(&i2, &i2).matrix(), &CMatrix::identity(4, 4));

        let p0 = PovmEffect::new(diag(1.0, 0.0)).unwrap();
        let p1 = PovmEffect::new(diag(0.0, 1.0)).unwrap();
        let t = tensor_effects(&p0, &p1);
        let mut expected = CMatrix::zeros(4, 4);
        expected[(1, 1)] = cplx(1.0, 0.0);
        assert_eq!(t.matrix(), &expected);

        let a = PovmEffect::new(diag(0.9, 0.2)).unwrap();
        let b = PovmEffect::new(diag(0.5, 0.5)).unwrap();
        let t = tensor_effects(&a, &b);
        // Kronecker oracle: entry (2i+k, 2j+l) = a_ij b_kl
        let mut oracle = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        oracle[(2 * i + k, 2 * j + l)] = a.matrix()[(i, j)] * b.matrix()[(k, l)];
                    }
                }
            }
        }
        assert_close(t.matrix(), &oracle, 1e-15);
        let d: Vec<f64> = (0..4).map(|i| t.matrix()[(i, i)].re).collect();
        assert_eq!(d, vec![0.45, 0.45, 0.1, 0.1]);
    }

    #[test]
    fn effect_validation() {
        assert!(PovmEffect::new(diag(1.5, 0.0)).is_err());
        assert!(PovmEffect::new(diag(-0.1, 0.5)).is_err());
        let mut m = diag(0.5, 0.5);
        m[(0, 1)] = cplx(0.1, 0.0);
        assert!(PovmEffect::new(m).is_err());
    }

    #[test]
    fn pauli_settings_shape_and_completeness() {
        let one = standard_pauli_settings::<f64>(1);
        assert_eq!(one.len(), 3);
        assert!(one.iter().all(|s| s.effects().len() == 2));
        let two = standard_pauli_settings::<f64>(2);
        assert_eq!(two.len(), 9);
        for s in &two {
            assert_eq!(s.effects().len(), 4);
            assert!(s.completeness_defect() < 1e-12);
            for e in s.effects() {
                let p = e.matrix();
                assert_close(&(p * p), p, 1e-12);
            }
        }
        let three = standard_pauli_settings::<f64>(3);
        assert_eq!(three.len(), 27);
        assert!(three.iter().all(|s| s.effects().len() == 8));
    }

    #[test]
    fn pauli_rotations_match_eigenbases() {
        let rots = pauli_rotations::<f64>();
        let bases = single_qubit_pauli_bases::<f64>();
        for (u, basis) in rots.iter().zip(&bases) {
            let cal =
                CalibrationReadout::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![u.clone()]).unwrap();
            let eff = build_effective_povm(&cal, 0).unwrap();
            assert_close(eff[0].matrix(), basis.effects()[0].matrix(), 1e-12);
            assert_close(eff[1].matrix(), basis.effects()[1].matrix(), 1e-12);
        }
    }

    #[test]
    fn simulate_pure_z_state() {
        let rho = DensityMatrix::from_pure(&PureState::<f64>::basis(2, 0));
        let z = standard_pauli_settings::<f64>(1).remove(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = simulate_dataset(&rho, &[z], 250, &mut rng).unwrap();
        assert_eq!(data.counts(), &[250, 0]);
    }

    #[test]
    fn simulate_total_and_merging() {
        let rho = DensityMatrix::<f64>::maximally_mixed(4);
        let settings = standard_pauli_settings::<f64>(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = simulate_dataset(&rho, &settings, 500, &mut rng).unwrap();
        assert_eq!(data.total_count(), 4500);
        // all 36 product projectors are distinct
        assert_eq!(data.len(), 36);
        let plan = data.measurement_plan().unwrap();
        assert_eq!(plan.len(), 9);

        // measuring the same setting twice merges its effects
        let z = standard_pauli_settings::<f64>(1).remove(2);
        let data = simulate_dataset(
            &DensityMatrix::maximally_mixed(2),
            &[z.clone(), z],
            10,
            &mut rng,
        )
        .unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.total_count(), 20);
        assert_eq!(data.settings().unwrap()[1].effects, vec![0, 1]);
    }

    #[test]
    fn simulate_is_reproducible_and_consistent() {
        let rho = DensityMatrix::<f64>::maximally_mixed(2);
        let z = standard_pauli_settings::<f64>(1).remove(2);
        let shots = 100_000u64;
        let run = |seed| {
            simulate_dataset(
                &rho,
                std::slice::from_ref(&z),
                shots,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
            .unwrap()
        };
        let a = run(9);
        assert_eq!(a, run(9));
        let se = (0.25 / shots as f64).sqrt();
        for &c in a.counts() {
            let freq = c as f64 / shots as f64;
            assert!((freq - 0.5).abs() < 3.0 * se, "{freq}");
            assert!((freq - 0.5).abs() < 5.0 / (shots as f64).sqrt());
        }
    }

    #[test]
    fn simulate_rejects_incomplete_settings() {
        let rho = DensityMatrix::<f64>::maximally_mixed(2);
        let bad = Povm::new(vec![PovmEffect::new(diag(1.0, 0.0)).unwrap()]).unwrap();
        let err =
            simulate_dataset(&rho, &[bad], 10, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, QebError::NotNormalized { index: 0, .. }));
    }

    #[test]
    fn dataset_invariants() {
        let e = PovmEffect::<f64>::identity(2);
        assert!(TomographyDataset::new(2, vec![e.clone()], vec![0]).is_err());
        assert!(TomographyDataset::new(2, vec![e.clone()], vec![1, 2]).is_err());
        assert!(TomographyDataset::new(3, vec![e.clone()], vec![1]).is_err());
        assert!(TomographyDataset::build(2, vec![e.clone()], vec![4], Some(5), None).is_err());
        let d = TomographyDataset::build(2, vec![e.clone(), e], vec![4, 1], Some(5), None).unwrap();
        assert_eq!(d.counts(), &[5]);
    }
}
