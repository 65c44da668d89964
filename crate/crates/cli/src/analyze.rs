use std::fs;

use anyhow::{Context, Result};
use log::{info, warn};
use qeb_core::fitqeb::{confidence_threshold, ConfidenceInput, ConfidenceSource};
use qeb_core::io::{read_dataset, read_json};
use qeb_core::mle::mle_default;
use qeb_core::sampler::{default_sweep, pilot_range, tune_step_size, walker_seed};
use qeb_core::{
    fit_log_model, run_analysis, ConfidenceReport, DensityMatrix, FitParams, FomClass,
    FomHistogram, HistogramSpec, ModelVars, QuantumErrorBars, WalkConfig,
};
use serde::{Deserialize, Serialize};

use crate::args::{AnalysisConfig, AnalyzeArgs, ConfidenceFrom, RangeArg};
use crate::commands::MleReport;
use crate::output::{emit_json, gnuplot_script, write_samples};

const HISTOGRAM_CSV: &str = "histogram.csv";
const REPORT_JSON: &str = "report.json";
const SAMPLES_CSV: &str = "samples.csv";
const GNUPLOT_SCRIPT: &str = "plot.gp";

#[derive(Serialize, Deserialize)]
struct Provenance {
    tool: String,
    version: String,
    config: AnalysisConfig,
    walker_seeds: Vec<u64>,
}

#[derive(Serialize)]
struct DatasetSummary {
    dim: usize,
    effects: usize,
    total_count: u64,
}

#[derive(Serialize)]
struct FomSummary {
    class: FomClass,
    label: &'static str,
    vars: Option<ModelVars>,
    range_width: Option<f64>,
}

#[derive(Serialize)]
struct WalkSummary {
    config: WalkConfig,
    acceptance: Vec<f64>,
    mean_acceptance: f64,
    total_samples: usize,
}

#[derive(Serialize)]
struct Files {
    histogram: &'static str,
    samples: Option<&'static str>,
    gnuplot: Option<&'static str>,
}

#[derive(Serialize)]
struct Report {
    provenance: Provenance,
    dataset: DatasetSummary,
    figure_of_merit: FomSummary,
    mle: Option<MleReport>,
    walk: WalkSummary,
    histogram: FomHistogram,
    cross_walker_error: Vec<f64>,
    fit: Option<FitParams>,
    fit_error: Option<String>,
    error_bars: Option<QuantumErrorBars<f64>>,
    confidence: Option<ConfidenceReport>,
    files: Files,
}

#[derive(Deserialize)]
struct ReplayDoc {
    provenance: Provenance,
}

pub fn run(args: AnalyzeArgs) -> Result<()> {
    let config = match &args.replay {
        Some(path) => {
            let doc: ReplayDoc =
                read_json(path).with_context(|| format!("reading report {}", path.display()))?;
            doc.provenance.config
        }
        None => args.config,
    };
    let data_path = config.data.as_ref().context("--data is required")?;
    let data = read_dataset::<f64>(data_path)
        .with_context(|| format!("reading dataset {}", data_path.display()))?;

    let mut mle_result = None;
    let resolved = config.fom.resolve(data.dim(), || {
        let r = mle_default(&data)?;
        let state: DensityMatrix<f64> = r.state.clone();
        mle_result = Some(r);
        Ok(state)
    })?;
    let fom = &resolved.fom;
    let class = fom.class();

    let w = &config.walk;
    let step_size = if w.tune {
        let eta = tune_step_size(&data, w.step_size, w.seed)?;
        info!("tuned step size {eta:.4e}");
        eta
    } else {
        w.step_size
    };
    let walk = WalkConfig {
        step_size,
        n_therm: w.n_therm,
        n_sweep: w.n_sweep.unwrap_or_else(|| default_sweep(step_size)),
        n_samples: w.n_samples,
        n_walkers: w.walkers,
        base_seed: w.seed,
    };
    walk.validate()?;

    let (lo, hi) = match config.histogram.range {
        RangeArg::Auto => pilot_range(&data, &walk, fom, config.histogram.pilot_samples)?,
        RangeArg::Fixed { lo, hi } => (lo, hi),
    };
    let spec = HistogramSpec::new(lo, hi, config.histogram.bins)?;
    let run = run_analysis(&data, &walk, fom, &spec)?;
    let hist = &run.histogram;
    if hist.off_range_count > 0 {
        warn!(
            "{} of {} samples fell outside the histogram range",
            hist.off_range_count, hist.samples
        );
    }

    let vars = class.model_variables().ok();
    let (fit, fit_error) = match (config.no_fit, vars) {
        (true, _) => (None, None),
        (false, None) => (None, Some(format!("{} has no fit model", class.label()))),
        (false, Some(vars)) => match fit_log_model(hist, vars) {
            Ok(f) => (Some(f), None),
            Err(e) => {
                warn!("{e}");
                (None, Some(e.to_string()))
            }
        },
    };
    let error_bars = fit.as_ref().and_then(|f| f.error_bars().ok());

    let range_width = config.confidence.w_range.or(resolved.w);
    let confidence = match config.confidence.epsilon {
        None => None,
        Some(epsilon) => {
            let input = ConfidenceInput {
                epsilon,
                n: data.total_count(),
                dim: data.dim(),
                delta: config.confidence.delta,
                w: range_width,
                x_max: None,
            };
            let source = match (config.confidence.confidence_from, &fit) {
                (ConfidenceFrom::Model, Some(f)) => ConfidenceSource::Model(f),
                (ConfidenceFrom::Model, None) => {
                    warn!("no fitted model; integrating the histogram instead");
                    ConfidenceSource::Histogram(hist)
                }
                (ConfidenceFrom::Histogram, _) => ConfidenceSource::Histogram(hist),
            };
            Some(confidence_threshold(source, class, &input)?)
        }
    };

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let csv_path = args.out.join(HISTOGRAM_CSV);
    let csv =
        fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    hist.write_csv(csv)?;
    if config.dump_samples {
        write_samples(&args.out.join(SAMPLES_CSV), &run.walkers)?;
    }
    if config.gnuplot {
        let script = gnuplot_script(HISTOGRAM_CSV, class.label(), fit.as_ref());
        fs::write(args.out.join(GNUPLOT_SCRIPT), script)?;
    }

    if let Some(q) = &error_bars {
        println!("f0 = {}  delta = {}  gamma = {}", q.f0, q.delta, q.gamma);
    }
    if let Some(c) = &confidence {
        println!("{}", c.region);
    }

    let report = Report {
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            walker_seeds: (0..walk.n_walkers)
                .map(|k| walker_seed(walk.base_seed, k))
                .collect(),
            config: config.clone(),
        },
        dataset: DatasetSummary {
            dim: data.dim(),
            effects: data.len(),
            total_count: data.total_count(),
        },
        figure_of_merit: FomSummary {
            class,
            label: class.label(),
            vars,
            range_width,
        },
        mle: mle_result.as_ref().map(MleReport::new),
        walk: WalkSummary {
            config: walk,
            acceptance: run.walkers.iter().map(|w| w.acceptance_ratio).collect(),
            mean_acceptance: run.mean_acceptance(),
            total_samples: run.total_samples(),
        },
        histogram: run.histogram.clone(),
        cross_walker_error: run.cross_walker_error.clone(),
        fit,
        fit_error,
        error_bars,
        confidence,
        files: Files {
            histogram: HISTOGRAM_CSV,
            samples: config.dump_samples.then_some(SAMPLES_CSV),
            gnuplot: config.gnuplot.then_some(GNUPLOT_SCRIPT),
        },
    };
    emit_json(&report, Some(&args.out.join(REPORT_JSON)))
}
