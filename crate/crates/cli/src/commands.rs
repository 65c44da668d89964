use std::fs;

use anyhow::{bail, Context, Result};
use qeb_core::fitqeb::{
    bootstrap_compare, confidence_threshold, ConfidenceInput, ConfidenceSource, FitParams,
};
use qeb_core::io::{
    read_calibration, read_dataset, read_json, read_reference_state, DatasetJson, DensityMatrixJson,
};
use qeb_core::mle::mle as run_mle;
use qeb_core::tomodata::{effective_product_settings, simulate_dataset, standard_pauli_settings};
use qeb_core::{
    fit_log_model, quantum_error_bars, DensityMatrix, FomHistogram, LogModel, MleResult,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{BootstrapArgs, ConfidenceArgs, FitArgs, MleArgs, QebArgs, SimulateArgs};
use crate::output::emit_json;

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let reference = read_reference_state::<f64>(&args.state)
        .with_context(|| format!("reading state {}", args.state.display()))?;
    let mut rho = reference.density_matrix();
    let d = rho.dim();
    if !(0.0..=1.0).contains(&args.white_noise) {
        bail!("--white-noise must lie in [0, 1], got {}", args.white_noise);
    }
    if args.white_noise > 0.0 {
        let mixed = DensityMatrix::maximally_mixed(d);
        rho =
            DensityMatrix::mixture(&[(1.0 - args.white_noise, &rho), (args.white_noise, &mixed)])?;
    }
    let qubits = d.trailing_zeros() as usize;
    if 1usize << qubits != d {
        bail!("Pauli settings need a qubit register; dimension {d} is not a power of 2");
    }
    let settings = if args.calibration.is_empty() {
        standard_pauli_settings(qubits)
    } else {
        if args.calibration.len() != qubits {
            bail!(
                "{} calibration files given for {qubits} qubits",
                args.calibration.len()
            );
        }
        let cals = args
            .calibration
            .iter()
            .map(|p| {
                read_calibration::<f64>(p)
                    .with_context(|| format!("reading calibration {}", p.display()))
            })
            .collect::<Result<Vec<_>>>()?;
        effective_product_settings(&cals)?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let data = simulate_dataset(&rho, &settings, args.shots, &mut rng)?;
    emit_json(&DatasetJson::from_dataset(&data), args.out.as_deref())
}

#[derive(Serialize)]
pub struct MleReport {
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub state: DensityMatrixJson,
}

impl MleReport {
    pub fn new(r: &MleResult<f64>) -> Self {
        MleReport {
            lambda: r.lambda,
            iterations: r.iterations,
            converged: r.converged,
            eigenvalues: r.state.eigenvalues(),
            state: DensityMatrixJson::from_state(&r.state),
        }
    }
}

pub fn mle(args: MleArgs) -> Result<()> {
    let data = read_dataset::<f64>(&args.data)
        .with_context(|| format!("reading dataset {}", args.data.display()))?;
    let result = run_mle(&data, args.tol, args.max_iter)?;
    if !result.converged {
        log::warn!(
            "maximum likelihood iteration did not converge in {} steps",
            result.iterations
        );
    }
    let report = MleReport::new(&result);
    if let Some(path) = &args.state_out {
        emit_json(&report.state, Some(path))?;
    }
    emit_json(&report, args.out.as_deref())
}

fn read_histogram(path: &std::path::Path) -> Result<FomHistogram> {
    let file =
        fs::File::open(path).with_context(|| format!("opening histogram {}", path.display()))?;
    FomHistogram::read_csv(file).with_context(|| format!("reading histogram {}", path.display()))
}

#[derive(Serialize)]
struct FitReport {
    fit: FitParams,
    error_bars: qeb_core::QuantumErrorBars<f64>,
}

pub fn fit(args: FitArgs) -> Result<()> {
    let hist = read_histogram(&args.histogram)?;
    let vars = args.fom.class_only()?.model_variables()?;
    let fit = fit_log_model(&hist, vars)?;
    let error_bars = fit.error_bars()?;
    emit_json(&FitReport { fit, error_bars }, args.out.as_deref())
}

/// Rounds to `digits` significant digits for display.
fn significant(v: f64, digits: i32) -> String {
    if v == 0.0 || !v.is_finite() {
        return v.to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (digits - 1 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn qeb(args: QebArgs) -> Result<()> {
    let model = LogModel::new(args.a2, args.a1, args.m, 0.0);
    let q = quantum_error_bars(&model, args.vars()?)?;
    if args.json {
        return emit_json(&q, None);
    }
    // the value to three significant digits, the error bars to two
    println!("f0 = {}", significant(q.f0, 3));
    println!("delta = {}", significant(q.delta, 2));
    println!("gamma = {}", significant(q.gamma, 2));
    Ok(())
}

pub fn confidence(args: ConfidenceArgs) -> Result<()> {
    let class = args.fom.class_only()?;
    let input = ConfidenceInput {
        epsilon: args.epsilon,
        n: args.n,
        dim: args.dim,
        delta: args.delta,
        w: args.w_range,
        x_max: None,
    };
    let report = match (&args.fit, &args.histogram) {
        (Some(path), _) => {
            let value: serde_json::Value = read_json(path)?;
            // accept both a bare fit and the report written by `fit`
            let fit_value = value.get("fit").cloned().unwrap_or(value);
            let fit: FitParams = serde_json::from_value(fit_value)
                .with_context(|| format!("reading fit parameters {}", path.display()))?;
            confidence_threshold(ConfidenceSource::Model(&fit), class, &input)?
        }
        (None, Some(path)) => {
            let hist = read_histogram(path)?;
            confidence_threshold(ConfidenceSource::Histogram(&hist), class, &input)?
        }
        (None, None) => bail!("give --fit or --histogram"),
    };
    emit_json(&report, args.out.as_deref())
}

#[derive(Serialize)]
struct BootstrapReport {
    mle: MleReport,
    fom_at_mle: f64,
    reps: usize,
    seed: u64,
    failures: usize,
    mean: f64,
    std_dev: f64,
    values: Vec<f64>,
}

pub fn bootstrap(args: BootstrapArgs) -> Result<()> {
    let data = read_dataset::<f64>(&args.data)
        .with_context(|| format!("reading dataset {}", args.data.display()))?;
    let est = qeb_core::mle::mle_default(&data)?;
    let resolved = args.fom.resolve(data.dim(), || Ok(est.state.clone()))?;
    let result = bootstrap_compare(&data, &est.state, args.reps, &resolved.fom, args.seed)?;
    if result.values.is_empty() {
        bail!("every bootstrap replicate failed");
    }
    let report = BootstrapReport {
        fom_at_mle: resolved.fom.evaluate(&est.state)?,
        mle: MleReport::new(&est),
        reps: args.reps,
        seed: args.seed,
        failures: result.failures,
        mean: result.mean(),
        std_dev: result.std_dev(),
        values: result.values,
    };
    emit_json(&report, args.out.as_deref())
}
