//! Monte Carlo risk estimation, power sweeps, bisection for `δ*`, phase
//! diagrams and the empty-subgraph diagnostics.
//!
//! Trial `t` of an experiment with seed `s` draws its null matrix from
//! `derive_seed(s, NULL_TRIAL, t)` and its planted matrix from
//! `derive_seed(s, ALT_TRIAL, t)`. The planted seed does not depend on `δ`, so
//! every `δ` evaluated by a sweep or a bisection sees the same supports and
//! the same uniform variates.

use serde::{Deserialize, Serialize};

use crate::combin::{self, Combinations};
use crate::detectors::{
    analytic_thresholds, calibrate, delta_star_plan, AnalyticConstants, DeltaStarPlan, DetectorKind, DetectorTag,
    Statistic, ThresholdMode, ThresholdSlot, ThresholdSpec, DEFAULT_BUDGET,
};
use crate::error::{Error, Result};
use crate::exec;
use crate::graph_model::{
    check_open_probability, check_probability, sample_null, sample_planted_uniform_support, ProblemShape, SignalConfig,
};
use crate::kernel::log_binom;
use crate::rates::{density_assumption, phase_closed_form, rate_bundle, DensityReport, RateBundle, RateConstants};
use crate::rng::{derive_seed, tag};

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}

fn default_id() -> String {
    "experiment".to_string()
}

/// One experiment: a shape, a detector with its threshold rule, and a grid of signal strengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_id")]
    pub experiment_id: String,
    pub shape: ProblemShape,
    pub p0: f64,
    pub delta_grid: Vec<f64>,
    pub detector: DetectorKind,
    pub threshold: ThresholdSpec,
    pub trials: usize,
    pub seed: u64,
    pub eta: f64,
    #[serde(default)]
    pub constants: RateConstants,
    #[serde(default)]
    pub analytic: AnalyticConstants,
    #[serde(default = "default_budget")]
    pub budget: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_open_probability("p0", self.p0)?;
        if self.delta_grid.is_empty() {
            return Err(Error::Config("delta_grid must not be empty".into()));
        }
        for &d in &self.delta_grid {
            if !(d >= 0.0 && d <= 1.0 - self.p0 + 1e-12) {
                return Err(Error::Config(format!(
                    "delta_grid value {d} lies outside [0, 1 - p0] = [0, {}]",
                    1.0 - self.p0
                )));
            }
        }
        if self.trials < 100 {
            return Err(Error::Config(format!(
                "trials must be at least 100, got {}",
                self.trials
            )));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        self.detector.validate()?;
        self.threshold.validate()?;
        self.constants.validate()?;
        Ok(())
    }
}

/// A detector reduced to one concrete statistic and one threshold.
#[derive(Clone, Debug)]
pub struct ResolvedDetector {
    pub kind: DetectorKind,
    pub statistic: Statistic,
    pub threshold: f64,
    /// Present when the configured detector was the composite test.
    pub plan: Option<DeltaStarPlan>,
}

fn analytic_slot(tag: DetectorTag) -> ThresholdSlot {
    match tag {
        DetectorTag::TotalDegree => ThresholdSlot::H2,
        DetectorTag::TruncDegreeAxis1 => ThresholdSlot::H1,
        DetectorTag::TruncDegreeAxis2 => ThresholdSlot::H1p,
        DetectorTag::MaxTruncAxis1 => ThresholdSlot::H3,
        DetectorTag::MaxTruncAxis2 => ThresholdSlot::H4,
        DetectorTag::DeltaStar => unreachable!("composite test is resolved first"),
    }
}

/// Resolves the composite test to its sub-test and computes the threshold.
pub fn resolve_detector(cfg: &ExperimentConfig) -> Result<ResolvedDetector> {
    cfg.detector.validate()?;
    cfg.threshold.validate()?;
    let alpha = cfg.threshold.mode.alpha();
    let analytic_consts = match cfg.threshold.mode {
        ThresholdMode::Analytic { c_star, c_prime, .. } => AnalyticConstants {
            c_star,
            c_prime,
            ..cfg.analytic
        },
        ThresholdMode::Calibrated { .. } => cfg.analytic,
    };
    let analytic = analytic_thresholds(&cfg.shape, cfg.p0, alpha, &analytic_consts)?;
    let (kind, plan) = if cfg.detector.tag == DetectorTag::DeltaStar {
        let taus = [analytic.tau1, analytic.tau2, analytic.tau3, analytic.tau4];
        let plan = delta_star_plan(&cfg.shape, &cfg.constants, taus, cfg.detector.tau);
        (plan.kind, Some(plan))
    } else {
        (cfg.detector, None)
    };
    let statistic = Statistic::new(&kind, cfg.shape.n1, cfg.shape.n2, cfg.p0, cfg.budget)?;
    let threshold = match (cfg.threshold.value, cfg.threshold.mode) {
        (Some(h), _) => h,
        (None, ThresholdMode::Analytic { .. }) => {
            let slot = plan.map_or_else(|| analytic_slot(kind.tag), |p| p.slot);
            let table = crate::detectors::DeltaStarThresholds::from(analytic);
            table.get(slot).expect("analytic thresholds are complete")
        }
        (None, ThresholdMode::Calibrated { alpha, trials, seed }) => {
            calibrate(&statistic, &cfg.shape, cfg.p0, alpha, trials, seed)?
        }
    };
    Ok(ResolvedDetector {
        kind,
        statistic,
        threshold,
        plan,
    })
}

/// Empirical Type I / Type II errors at one signal strength.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub delta: f64,
    pub type1: f64,
    pub se1: f64,
    pub type2: f64,
    pub se2: f64,
    pub risk: f64,
    pub trials: usize,
}

fn proportion(hits: u64, trials: usize) -> (f64, f64) {
    let p = hits as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

fn null_rejections(cfg: &ExperimentConfig, det: &ResolvedDetector) -> Result<u64> {
    exec::try_count(cfg.trials, |t| {
        let a = sample_null(&cfg.shape, cfg.p0, derive_seed(cfg.seed, tag::NULL_TRIAL, t as u64))?;
        Ok(det.statistic.evaluate(&a)? > det.threshold)
    })
}

fn alt_acceptances(cfg: &ExperimentConfig, det: &ResolvedDetector, delta: f64) -> Result<u64> {
    let signal = SignalConfig::new(cfg.p0, delta)?;
    exec::try_count(cfg.trials, |t| {
        let seed = derive_seed(cfg.seed, tag::ALT_TRIAL, t as u64);
        let (a, _) = sample_planted_uniform_support(&cfg.shape, &signal, seed)?;
        Ok(det.statistic.evaluate(&a)? <= det.threshold)
    })
}

fn combine(delta: f64, rejections: u64, acceptances: u64, trials: usize) -> RiskEstimate {
    let (type1, se1) = proportion(rejections, trials);
    let (type2, se2) = proportion(acceptances, trials);
    RiskEstimate {
        delta,
        type1,
        se1,
        type2,
        se2,
        risk: type1 + type2,
        trials,
    }
}

/// Risk of an already resolved detector at `delta`.
pub fn estimate_risk_with(cfg: &ExperimentConfig, det: &ResolvedDetector, delta: f64) -> Result<RiskEstimate> {
    let rejections = null_rejections(cfg, det)?;
    let acceptances = alt_acceptances(cfg, det, delta)?;
    Ok(combine(delta, rejections, acceptances, cfg.trials))
}

pub fn estimate_risk(cfg: &ExperimentConfig, delta: f64) -> Result<RiskEstimate> {
    let det = resolve_detector(cfg)?;
    estimate_risk_with(cfg, &det, delta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub threshold: f64,
    pub rows: Vec<RiskEstimate>,
    /// Type II error is nonincreasing along increasing `δ`, up to 4 combined standard errors.
    pub type2_monotone: bool,
}

/// Whether type II error is nonincreasing in `δ` up to `4` combined standard errors.
pub fn type2_monotone(rows: &[RiskEstimate]) -> bool {
    let mut sorted: Vec<&RiskEstimate> = rows.iter().collect();
    sorted.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    sorted.windows(2).all(|w| {
        let slack = 4.0 * (w[0].se2.powi(2) + w[1].se2.powi(2)).sqrt();
        w[1].type2 <= w[0].type2 + slack
    })
}

pub fn power_sweep_with(cfg: &ExperimentConfig, det: &ResolvedDetector) -> Result<SweepResult> {
    cfg.validate()?;
    let rejections = null_rejections(cfg, det)?;
    let rows = cfg
        .delta_grid
        .iter()
        .map(|&d| Ok(combine(d, rejections, alt_acceptances(cfg, det, d)?, cfg.trials)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        threshold: det.threshold,
        type2_monotone: type2_monotone(&rows),
        rows,
    })
}

pub fn power_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let det = resolve_detector(cfg)?;
    power_sweep_with(cfg, &det)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bisection {
    pub delta: f64,
    pub lo: f64,
    pub hi: f64,
    pub iterations: u32,
}

/// Bisection on `δ ∈ [0, 1 - p0]` for the crossing `risk(δ) = η`.
pub fn bisect_delta_star_with(cfg: &ExperimentConfig, det: &ResolvedDetector, tolerance: f64) -> Result<Bisection> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::param(format!("tolerance must be positive, got {tolerance}")));
    }
    let rejections = null_rejections(cfg, det)?;
    let risk = |d: f64| -> Result<f64> { Ok(combine(d, rejections, alt_acceptances(cfg, det, d)?, cfg.trials).risk) };
    let (mut lo, mut hi) = (0.0, 1.0 - cfg.p0);
    let (r_lo, r_hi) = (risk(lo)?, risk(hi)?);
    if !(r_lo > cfg.eta && r_hi < cfg.eta) {
        return Err(Error::Bracket(format!(
            "risk(0) = {r_lo} and risk({hi}) = {r_hi} do not straddle eta = {}",
            cfg.eta
        )));
    }
    let mut iterations = 0;
    while hi - lo >= tolerance {
        let mid = 0.5 * (lo + hi);
        if risk(mid)? < cfg.eta {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(Bisection {
        delta: 0.5 * (lo + hi),
        lo,
        hi,
        iterations,
    })
}

pub fn bisect_delta_star(cfg: &ExperimentConfig, tolerance: f64) -> Result<Bisection> {
    cfg.validate()?;
    let det = resolve_detector(cfg)?;
    bisect_delta_star_with(cfg, &det, tolerance)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub shape: ProblemShape,
    pub rates: RateBundle,
    /// `(1/k2) ln(1 + (n1 k2 / k1²) ln n2)`.
    pub closed_form: f64,
    pub density: DensityReport,
}

pub fn phase_diagram(shapes: &[ProblemShape], p0: f64, consts: &RateConstants) -> Result<Vec<PhaseRow>> {
    if shapes.is_empty() {
        return Err(Error::param("shape grid must not be empty"));
    }
    consts.validate()?;
    shapes
        .iter()
        .map(|s| {
            Ok(PhaseRow {
                shape: *s,
                rates: rate_bundle(s, consts),
                closed_form: phase_closed_form(s),
                density: density_assumption(s, p0, consts)?,
            })
        })
        .collect()
}

/// Event scanned by [`empty_subgraph_diagnostic`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyEvent {
    /// Some `k1 × k2` block is all zeros.
    Subgraph,
    /// Some `k1` left vertices have no edges at all.
    RowBlock,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmptyDiagnostic {
    pub event: EmptyEvent,
    pub union_bound: f64,
    pub mc_estimate: f64,
    pub se: f64,
    pub trials: usize,
}

fn has_empty_block(a: &crate::matrix::AdjacencyMatrix, k1: usize, k2: usize) -> bool {
    let words = a.words_per_row();
    let mut rows = Combinations::new(a.n1(), k1);
    let mut union = vec![0u64; words];
    while let Some(subset) = rows.next_subset() {
        union.iter_mut().for_each(|w| *w = 0);
        for &i in subset {
            for (u, &x) in union.iter_mut().zip(a.row_words(i)) {
                *u |= x;
            }
        }
        let covered: u32 = union.iter().map(|w| w.count_ones()).sum();
        if a.n2() - covered as usize >= k2 {
            return true;
        }
    }
    false
}

/// Union bound and Monte Carlo frequency of an empty block under the null.
///
/// The exact scan enumerates `C(n1, k1)` row subsets per trial, which must not exceed `budget`.
pub fn empty_subgraph_diagnostic(
    shape: &ProblemShape,
    p0: f64,
    trials: usize,
    seed: u64,
    event: EmptyEvent,
    budget: u64,
) -> Result<EmptyDiagnostic> {
    check_probability("p0", p0)?;
    if trials < 100 {
        return Err(Error::param(format!("trials must be at least 100, got {trials}")));
    }
    let ProblemShape { n1, n2, k1, k2 } = *shape;
    let log_q = (-p0).ln_1p();
    let log_bound = match event {
        EmptyEvent::Subgraph => {
            log_binom(n1 as u64, k1 as u64)? + log_binom(n2 as u64, k2 as u64)? + (k1 * k2) as f64 * log_q
        }
        EmptyEvent::RowBlock => log_binom(n1 as u64, k1 as u64)? + (k1 * n2) as f64 * log_q,
    };
    let union_bound = log_bound.exp().min(1.0);
    if event == EmptyEvent::Subgraph {
        let subsets = combin::binomial_f64(n1 as u64, k1 as u64);
        if subsets > budget as f64 {
            return Err(Error::Budget {
                what: "empty subgraph row-subset scan",
                required: subsets,
                budget: budget as f64,
            });
        }
    }
    let hits = exec::try_count(trials, |t| {
        let a = sample_null(shape, p0, derive_seed(seed, tag::DIAGNOSTIC, t as u64))?;
        Ok(match event {
            EmptyEvent::Subgraph => has_empty_block(&a, k1, k2),
            EmptyEvent::RowBlock => a.row_sums().iter().filter(|&&d| d == 0).count() >= k1,
        })
    })?;
    let (mc_estimate, se) = proportion(hits, trials);
    Ok(EmptyDiagnostic {
        event,
        union_bound,
        mc_estimate,
        se,
        trials,
    })
}
