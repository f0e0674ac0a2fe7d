use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use bicomm::detectors::{
    analytic_thresholds, AnalyticConstants, AnalyticThresholds, DetectorKind, DetectorTag, ThresholdMode,
    ThresholdSpec, DEFAULT_BUDGET,
};
use bicomm::exec::with_threads;
use bicomm::graph_model::{sample_null, sample_planted_uniform_support};
use bicomm::harness::{
    bisect_delta_star_with, estimate_risk_with, phase_diagram, power_sweep_with, resolve_detector, Bisection,
    ExperimentConfig, ResolvedDetector,
};
use bicomm::lower_bound::{second_moment, tv_exact, TV_MAX_CELLS};
use bicomm::matrix::read_matrix;
use bicomm::rates::{
    delta_star_bounds, density_assumption, phase_closed_form, rate_bundle, Branch, RateBundle, RateConstants,
};
use bicomm::report::{format_float, render, rows_from_estimates, OutputFormat};
use bicomm::{ProblemShape, SignalConfig};
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::CliError;

type Outcome = Result<(), CliError>;

fn shape(a: &ShapeArgs) -> Result<ProblemShape, CliError> {
    Ok(ProblemShape::new(a.n1, a.n2, a.k1, a.k2)?)
}

fn write_bytes(out: Option<&Path>, bytes: &[u8]) -> Outcome {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn print_json(value: &impl Serialize) -> Outcome {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    write_bytes(None, text.as_bytes())
}

fn threshold_spec(mode: Mode, t: &ThresholdArgs, trials: usize, seed: u64) -> ThresholdSpec {
    let mode = match mode {
        Mode::Calibrated => ThresholdMode::Calibrated {
            alpha: t.alpha,
            trials,
            seed,
        },
        Mode::Analytic => ThresholdMode::Analytic {
            alpha: t.alpha,
            c_star: t.c_star,
            c_prime: t.c_prime,
        },
    };
    ThresholdSpec { mode, value: None }
}

fn analytic_constants(spec: &ThresholdSpec) -> AnalyticConstants {
    match spec.mode {
        ThresholdMode::Analytic { c_star, c_prime, .. } => AnalyticConstants {
            c_star,
            c_prime,
            ..AnalyticConstants::default()
        },
        ThresholdMode::Calibrated { .. } => AnalyticConstants::default(),
    }
}

/// An experiment with a single signal strength, for the one-shot subcommands.
#[allow(clippy::too_many_arguments)]
fn single_config(
    shape: ProblemShape,
    p0: f64,
    delta: f64,
    detector: &DetectorArgs,
    spec: ThresholdSpec,
    trials: usize,
    seed: u64,
    constants: RateConstants,
    budget: u64,
) -> Result<ExperimentConfig, CliError> {
    let analytic = analytic_constants(&spec);
    let taus = analytic_thresholds(&shape, p0, spec.mode.alpha(), &analytic)?;
    Ok(ExperimentConfig {
        experiment_id: "experiment".into(),
        shape,
        p0,
        delta_grid: vec![delta],
        detector: DetectorKind::for_shape(detector.detector, detector.tau, &shape, &taus),
        threshold: spec,
        trials,
        seed,
        eta: 0.5,
        constants,
        analytic,
        budget,
    })
}

#[derive(Serialize)]
struct DetectorReport {
    detector: DetectorTag,
    resolved: DetectorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    branch: Option<Branch>,
}

impl DetectorReport {
    fn new(cfg: &ExperimentConfig, det: &ResolvedDetector) -> Self {
        DetectorReport {
            detector: cfg.detector.tag,
            resolved: det.kind,
            branch: det.plan.map(|p| p.branch),
        }
    }
}

pub fn gen(a: GenArgs) -> Outcome {
    // the null model ignores the community size
    let s = ProblemShape::new(a.n1, a.n2, a.k1.unwrap_or(1), a.k2.unwrap_or(1))?;
    let (matrix, support) = if a.null {
        (sample_null(&s, a.p0, a.seed)?, None)
    } else {
        let signal = SignalConfig::new(a.p0, a.delta.expect("clap requires --delta without --null"))?;
        let (m, support) = sample_planted_uniform_support(&s, &signal, a.seed)?;
        (m, Some(support))
    };
    write_bytes(a.out.as_deref(), matrix.to_string().as_bytes())?;
    if let (Some(path), Some(support)) = (a.support.as_deref(), support) {
        let text = serde_json::to_string_pretty(&json!({"left": support.left(), "right": support.right()}))
            .expect("serializable support");
        fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

pub fn stat(a: StatArgs) -> Outcome {
    let matrix = read_matrix(&a.input)?;
    let s = ProblemShape::new(matrix.n1(), matrix.n2(), a.k1, a.k2)?;
    let spec = threshold_spec(a.threshold_mode, &a.threshold, a.trials, a.seed.unwrap_or(0));
    let cfg = single_config(
        s,
        a.p0,
        0.0,
        &a.detector,
        spec,
        100,
        0,
        a.rates.constants(),
        a.exec.budget,
    )?;
    with_threads(a.exec.threads, || -> Outcome {
        let det = resolve_detector(&cfg)?;
        let decision = det.statistic.decide(&matrix, det.threshold)?;
        print_json(&json!({
            "detector": DetectorReport::new(&cfg, &det),
            "threshold_mode": spec.mode.name(),
            "statistic": decision.statistic,
            "threshold": decision.threshold,
            "reject": decision.reject,
        }))
    })?
}

pub fn calibrate(a: CalibrateArgs) -> Outcome {
    let s = shape(&a.shape)?;
    let spec = ThresholdSpec {
        mode: ThresholdMode::Calibrated {
            alpha: a.alpha,
            trials: a.trials,
            seed: a.seed,
        },
        value: None,
    };
    spec.validate()?;
    let cfg = single_config(
        s,
        a.p0,
        0.0,
        &a.detector,
        spec,
        100,
        a.seed,
        a.rates.constants(),
        a.exec.budget,
    )?;
    with_threads(a.exec.threads, || -> Outcome {
        let det = resolve_detector(&cfg)?;
        print_json(&json!({
            "detector": DetectorReport::new(&cfg, &det),
            "alpha": a.alpha,
            "trials": a.trials,
            "seed": a.seed,
            "threshold": det.threshold,
        }))
    })?
}

pub fn risk(a: RiskArgs) -> Outcome {
    let s = shape(&a.shape)?;
    let spec = threshold_spec(a.threshold_mode, &a.threshold, a.trials, a.seed);
    let cfg = single_config(
        s,
        a.p0,
        a.delta,
        &a.detector,
        spec,
        a.trials,
        a.seed,
        a.rates.constants(),
        a.exec.budget,
    )?;
    cfg.validate()?;
    with_threads(a.exec.threads, || -> Outcome {
        let det = resolve_detector(&cfg)?;
        let estimate = estimate_risk_with(&cfg, &det, a.delta)?;
        let rows = rows_from_estimates(&cfg, &det, &[estimate]);
        write_bytes(a.out.out.as_deref(), &render(&rows, a.out.format)?)
    })?
}

pub fn rates(a: RatesArgs) -> Outcome {
    let s = shape(&a.shape)?;
    let consts = a.rates.constants();
    consts.validate()?;
    let bundle = rate_bundle(&s, &consts);
    let mut report = json!({
        "shape": s,
        "rates": bundle,
        "closed_form": phase_closed_form(&s),
    });
    if let Some(p0) = a.p0 {
        let (lower, upper) = delta_star_bounds(&s, p0, &consts)?;
        report["p0"] = json!(p0);
        report["delta_star_bounds"] = json!({"lower": lower, "upper": upper});
        report["density"] = json!(density_assumption(&s, p0, &consts)?);
    }
    print_json(&report)
}

pub fn lb(a: LbArgs) -> Outcome {
    let s = shape(&a.shape)?;
    with_threads(a.threads, || -> Outcome {
        let result = second_moment(&s, a.p0, a.delta)?;
        let mut report = json!({"shape": s, "p0": a.p0, "delta": a.delta});
        let fields = serde_json::to_value(result).expect("serializable result");
        for (k, v) in fields.as_object().expect("struct serializes to an object") {
            report[k] = v.clone();
        }
        if s.n1 * s.n2 <= TV_MAX_CELLS {
            report["tv"] = json!(tv_exact(&s, a.p0, a.delta)?);
        }
        print_json(&report)
    })?
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn missing(flag: &str) -> CliError {
    CliError::Usage(format!("--{flag} is required without --config"))
}

/// Merges `--config` with explicit flags, the flags taking precedence.
fn sweep_config(a: &SweepArgs) -> Result<ExperimentConfig, CliError> {
    let base = a.config.as_deref().map(load_config).transpose()?;
    let shape = match (&base, a.n1, a.n2, a.k1, a.k2) {
        (_, Some(n1), Some(n2), Some(k1), Some(k2)) => ProblemShape::new(n1, n2, k1, k2)?,
        (Some(b), n1, n2, k1, k2) => ProblemShape::new(
            n1.unwrap_or(b.shape.n1),
            n2.unwrap_or(b.shape.n2),
            k1.unwrap_or(b.shape.k1),
            k2.unwrap_or(b.shape.k2),
        )?,
        (None, n1, n2, k1, _) => {
            let flag = [("n1", n1), ("n2", n2), ("k1", k1)]
                .into_iter()
                .find(|(_, v)| v.is_none())
                .map_or("k2", |(f, _)| f);
            return Err(missing(flag));
        }
    };
    let p0 = a.p0.or(base.as_ref().map(|b| b.p0)).ok_or_else(|| missing("p0"))?;
    let delta_grid = a
        .delta
        .clone()
        .or(base.as_ref().map(|b| b.delta_grid.clone()))
        .ok_or_else(|| missing("delta"))?;
    let seed = a
        .seed
        .or(base.as_ref().map(|b| b.seed))
        .ok_or_else(|| missing("seed"))?;
    let trials = a.trials.or(base.as_ref().map(|b| b.trials)).unwrap_or(1000);

    let mut constants = base.as_ref().map_or_else(RateConstants::default, |b| b.constants);
    let overrides = [
        (&mut constants.c_phi, a.c_phi),
        (&mut constants.c1, a.c1),
        (&mut constants.c_delta, a.c_delta),
        (&mut constants.c_delta_upper, a.c_delta_upper),
        (&mut constants.c_eta, a.c_eta),
    ];
    for (field, value) in overrides {
        if let Some(v) = value {
            *field = v;
        }
    }

    let base_spec = base.as_ref().map(|b| b.threshold);
    let base_mode = base_spec.map(|s| s.mode);
    let alpha = a.alpha.or(base_mode.map(|m| m.alpha())).unwrap_or(0.1);
    let mode = a.threshold_mode.unwrap_or(match base_mode {
        Some(ThresholdMode::Analytic { .. }) => Mode::Analytic,
        _ => Mode::Calibrated,
    });
    let mut analytic_consts = base.as_ref().map_or_else(AnalyticConstants::default, |b| b.analytic);
    let threshold_mode = match mode {
        Mode::Analytic => {
            let (c_star, c_prime) = match base_mode {
                Some(ThresholdMode::Analytic { c_star, c_prime, .. }) => (c_star, c_prime),
                _ => (analytic_consts.c_star, analytic_consts.c_prime),
            };
            ThresholdMode::Analytic {
                alpha,
                c_star: a.c_star.unwrap_or(c_star),
                c_prime: a.c_prime.unwrap_or(c_prime),
            }
        }
        Mode::Calibrated => {
            let (base_trials, base_seed) = match base_mode {
                Some(ThresholdMode::Calibrated { trials, seed, .. }) => (Some(trials), Some(seed)),
                _ => (None, None),
            };
            ThresholdMode::Calibrated {
                alpha,
                trials: a.calibration_trials.or(base_trials).unwrap_or(trials),
                seed: if a.seed.is_some() {
                    seed
                } else {
                    base_seed.unwrap_or(seed)
                },
            }
        }
    };
    if let Some(c) = a.c_star {
        analytic_consts.c_star = c;
    }
    if let Some(c) = a.c_prime {
        analytic_consts.c_prime = c;
    }
    let threshold = ThresholdSpec {
        mode: threshold_mode,
        value: base_spec.and_then(|s| s.value),
    };

    let detector = match (a.detector, a.tau, &base) {
        (None, None, Some(b)) => b.detector,
        (tag, tau, _) => {
            let tag = tag
                .or(base.as_ref().map(|b| b.detector.tag))
                .unwrap_or(DetectorTag::DeltaStar);
            let taus = analytic_thresholds(&shape, p0, alpha, &analytic_consts)?;
            DetectorKind::for_shape(tag, tau, &shape, &taus)
        }
    };

    Ok(ExperimentConfig {
        experiment_id: a
            .experiment_id
            .clone()
            .or(base.as_ref().map(|b| b.experiment_id.clone()))
            .unwrap_or_else(|| "experiment".into()),
        shape,
        p0,
        delta_grid,
        detector,
        threshold,
        trials,
        seed,
        eta: a.eta.or(base.as_ref().map(|b| b.eta)).unwrap_or(0.5),
        constants,
        analytic: analytic_consts,
        budget: a.budget.or(base.as_ref().map(|b| b.budget)).unwrap_or(DEFAULT_BUDGET),
    })
}

#[derive(Serialize)]
struct Sidecar {
    config: ExperimentConfig,
    detector: DetectorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    branch: Option<Branch>,
    threshold: f64,
    rates: RateBundle,
    delta_star_bounds: [f64; 2],
    analytic_thresholds: AnalyticThresholds,
    type2_monotone: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    bisection: Option<Bisection>,
}

fn sidecar_path(a: &SweepArgs) -> Option<PathBuf> {
    a.sidecar.clone().or_else(|| {
        a.out.out.as_ref().map(|p| {
            let mut name = p.as_os_str().to_owned();
            name.push(".meta.json");
            PathBuf::from(name)
        })
    })
}

pub fn sweep(a: SweepArgs) -> Outcome {
    let cfg = sweep_config(&a)?;
    cfg.validate()?;
    with_threads(a.threads, || -> Outcome {
        let det = resolve_detector(&cfg)?;
        let result = power_sweep_with(&cfg, &det)?;
        let bisection = a
            .bisect
            .map(|tol| bisect_delta_star_with(&cfg, &det, tol))
            .transpose()?;
        let rows = rows_from_estimates(&cfg, &det, &result.rows);
        write_bytes(a.out.out.as_deref(), &render(&rows, a.out.format)?)?;
        if let Some(path) = sidecar_path(&a) {
            let (lower, upper) = delta_star_bounds(&cfg.shape, cfg.p0, &cfg.constants)?;
            let alpha = cfg.threshold.mode.alpha();
            let sidecar = Sidecar {
                detector: det.kind,
                branch: det.plan.map(|p| p.branch),
                threshold: det.threshold,
                rates: rate_bundle(&cfg.shape, &cfg.constants),
                delta_star_bounds: [lower, upper],
                analytic_thresholds: analytic_thresholds(&cfg.shape, cfg.p0, alpha, &cfg.analytic)?,
                type2_monotone: result.type2_monotone,
                bisection,
                config: cfg.clone(),
            };
            let text = serde_json::to_string_pretty(&sidecar).expect("serializable sidecar") + "\n";
            fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(())
    })?
}

const PHASE_HEADER: &str = "n1,n2,k1,k2,psi12,psi21,beta12,beta21,phi12,phi21,R,R_tilde,branch,closed_form,density_case,density_required,density_satisfied";

pub fn phase(a: PhaseArgs) -> Outcome {
    let mut shapes = Vec::new();
    for &n1 in &a.n1 {
        for &n2 in &a.n2 {
            for &k1 in &a.k1 {
                for &k2 in &a.k2 {
                    shapes.push(ProblemShape::new(n1, n2, k1, k2)?);
                }
            }
        }
    }
    let rows = phase_diagram(&shapes, a.p0, &a.rates.constants())?;
    let bytes = match a.out.format {
        OutputFormat::Json => serde_json::to_string_pretty(&rows).expect("serializable rows") + "\n",
        OutputFormat::Csv => {
            let mut text = format!("{PHASE_HEADER}\n");
            for r in &rows {
                let b = &r.rates;
                let ext = |x: bicomm::rates::ExtReal| format_float(x.to_f64());
                let fields = [
                    r.shape.n1.to_string(),
                    r.shape.n2.to_string(),
                    r.shape.k1.to_string(),
                    r.shape.k2.to_string(),
                    format_float(b.psi12),
                    format_float(b.psi21),
                    format_float(b.beta12),
                    format_float(b.beta21),
                    ext(b.phi12),
                    ext(b.phi21),
                    ext(b.r),
                    ext(b.r_tilde),
                    b.branch.to_string(),
                    format_float(r.closed_form),
                    serde_json::to_value(r.density.case)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_owned))
                        .unwrap_or_default(),
                    format_float(r.density.required),
                    r.density.satisfied.to_string(),
                ];
                text.push_str(&fields.join(","));
                text.push('\n');
            }
            text
        }
    };
    write_bytes(a.out.out.as_deref(), bytes.as_bytes())
}
