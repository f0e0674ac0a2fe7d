//! Total degree, truncated degree and max truncated degree statistics, their
//! thresholds, and the composite test that switches between them.
//!
//! Axis 1 treats each right vertex `j` as a unit and counts its neighbours
//! among the left vertices; axis 2 is the same construction on the transpose.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::combin::{self, advance, unrank};
use crate::error::{Error, Result};
use crate::exec;
use crate::graph_model::{check_open_probability, sample_null, ProblemShape};
use crate::kernel::{log_binom, BennettKernel, TruncationTable};
use crate::matrix::AdjacencyMatrix;
use crate::rates::{rate_bundle, Branch, RateConstants};
use crate::rng::{derive_seed, tag};

/// Default cap on the number of subsets scanned by the max test.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Subsets handled by one work item of the max test scan.
const SCAN_CHUNK: u128 = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Axis {
    One,
    Two,
}

impl TryFrom<u8> for Axis {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Axis::One),
            2 => Ok(Axis::Two),
            _ => Err(Error::param(format!("axis must be 1 or 2, got {v}"))),
        }
    }
}

impl From<Axis> for u8 {
    fn from(a: Axis) -> u8 {
        match a {
            Axis::One => 1,
            Axis::Two => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DetectorTag {
    TotalDegree,
    TruncDegreeAxis1,
    TruncDegreeAxis2,
    MaxTruncAxis1,
    MaxTruncAxis2,
    DeltaStar,
}

impl DetectorTag {
    pub const ALL: [DetectorTag; 6] = [
        DetectorTag::TotalDegree,
        DetectorTag::TruncDegreeAxis1,
        DetectorTag::TruncDegreeAxis2,
        DetectorTag::MaxTruncAxis1,
        DetectorTag::MaxTruncAxis2,
        DetectorTag::DeltaStar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorTag::TotalDegree => "TOTAL_DEGREE",
            DetectorTag::TruncDegreeAxis1 => "TRUNC_DEGREE_AXIS1",
            DetectorTag::TruncDegreeAxis2 => "TRUNC_DEGREE_AXIS2",
            DetectorTag::MaxTruncAxis1 => "MAX_TRUNC_AXIS1",
            DetectorTag::MaxTruncAxis2 => "MAX_TRUNC_AXIS2",
            DetectorTag::DeltaStar => "DELTA_STAR",
        }
    }

    pub fn axis(self) -> Option<Axis> {
        match self {
            DetectorTag::TruncDegreeAxis1 | DetectorTag::MaxTruncAxis1 => Some(Axis::One),
            DetectorTag::TruncDegreeAxis2 | DetectorTag::MaxTruncAxis2 => Some(Axis::Two),
            _ => None,
        }
    }

    pub fn is_max(self) -> bool {
        matches!(self, DetectorTag::MaxTruncAxis1 | DetectorTag::MaxTruncAxis2)
    }

    pub fn is_truncated(self) -> bool {
        self.axis().is_some()
    }
}

impl fmt::Display for DetectorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DetectorTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param(format!("unknown detector {s:?}")))
    }
}

/// A statistic together with its truncation level and scan size.
///
/// `DELTA_STAR` may carry a `tau` that overrides the truncation level of
/// whichever sub-test it selects.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorKind {
    pub tag: DetectorTag,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub k_scan: Option<usize>,
}

impl DetectorKind {
    pub fn total_degree() -> Self {
        DetectorKind {
            tag: DetectorTag::TotalDegree,
            tau: None,
            k_scan: None,
        }
    }

    pub fn truncated(axis: Axis, tau: f64) -> Self {
        DetectorKind {
            tag: match axis {
                Axis::One => DetectorTag::TruncDegreeAxis1,
                Axis::Two => DetectorTag::TruncDegreeAxis2,
            },
            tau: Some(tau),
            k_scan: None,
        }
    }

    pub fn max_truncated(axis: Axis, tau: f64, k_scan: usize) -> Self {
        DetectorKind {
            tag: match axis {
                Axis::One => DetectorTag::MaxTruncAxis1,
                Axis::Two => DetectorTag::MaxTruncAxis2,
            },
            tau: Some(tau),
            k_scan: Some(k_scan),
        }
    }

    pub fn delta_star() -> Self {
        DetectorKind {
            tag: DetectorTag::DeltaStar,
            tau: None,
            k_scan: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tau {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::param(format!("tau must be finite and >= 0, got {t}")));
            }
        }
        let needs_tau = self.tag.is_truncated();
        if needs_tau && self.tau.is_none() {
            return Err(Error::param(format!("{} requires tau", self.tag)));
        }
        if !needs_tau && self.tag != DetectorTag::DeltaStar && self.tau.is_some() {
            return Err(Error::param(format!("{} takes no tau", self.tag)));
        }
        match (self.tag.is_max(), self.k_scan) {
            (true, None) => Err(Error::param(format!("{} requires k_scan", self.tag))),
            (true, Some(0)) => Err(Error::param("k_scan must be positive")),
            (false, Some(_)) => Err(Error::param(format!("{} takes no k_scan", self.tag))),
            _ => Ok(()),
        }
    }
}

impl DetectorKind {
    /// Detector for `tag` on `shape`, taking `τ` from `tau` or the analytic levels and
    /// scanning `k1` (axis 1) or `k2` (axis 2) vertices for the max tests.
    pub fn for_shape(tag: DetectorTag, tau: Option<f64>, shape: &ProblemShape, analytic: &AnalyticThresholds) -> Self {
        match tag {
            DetectorTag::TotalDegree => DetectorKind::total_degree(),
            DetectorTag::TruncDegreeAxis1 => DetectorKind::truncated(Axis::One, tau.unwrap_or(analytic.tau1)),
            DetectorTag::TruncDegreeAxis2 => DetectorKind::truncated(Axis::Two, tau.unwrap_or(analytic.tau2)),
            DetectorTag::MaxTruncAxis1 => {
                DetectorKind::max_truncated(Axis::One, tau.unwrap_or(analytic.tau3), shape.k1)
            }
            DetectorTag::MaxTruncAxis2 => {
                DetectorKind::max_truncated(Axis::Two, tau.unwrap_or(analytic.tau4), shape.k2)
            }
            DetectorTag::DeltaStar => DetectorKind {
                tau,
                ..DetectorKind::delta_star()
            },
        }
    }
}

/// How a threshold is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ThresholdMode {
    Analytic {
        alpha: f64,
        #[serde(rename = "C_star", default = "one")]
        c_star: f64,
        #[serde(default = "one")]
        c_prime: f64,
    },
    Calibrated {
        alpha: f64,
        trials: usize,
        seed: u64,
    },
}

fn one() -> f64 {
    1.0
}

impl ThresholdMode {
    pub fn alpha(&self) -> f64 {
        match *self {
            ThresholdMode::Analytic { alpha, .. } | ThresholdMode::Calibrated { alpha, .. } => alpha,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ThresholdMode::Analytic { .. } => "ANALYTIC",
            ThresholdMode::Calibrated { .. } => "CALIBRATED",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    #[serde(flatten)]
    pub mode: ThresholdMode,
    #[serde(default)]
    pub value: Option<f64>,
}

impl ThresholdSpec {
    pub fn validate(&self) -> Result<()> {
        let alpha = self.mode.alpha();
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        match self.mode {
            ThresholdMode::Calibrated { trials, .. } if trials < 100 => Err(Error::param(format!(
                "calibration needs at least 100 trials, got {trials}"
            ))),
            ThresholdMode::Analytic { c_star, c_prime, .. } if !(c_star > 0.0 && c_prime > 0.0) => {
                Err(Error::param("C_star and c_prime must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestDecision {
    pub statistic: f64,
    pub threshold: f64,
    pub reject: bool,
}

impl TestDecision {
    pub fn new(statistic: f64, threshold: f64) -> Self {
        TestDecision {
            statistic,
            threshold,
            reject: statistic > threshold,
        }
    }
}

/// `Σ_ij (A_ij - p0) / sqrt(n1 n2 p0 (1 - p0))`.
pub fn total_degree(a: &AdjacencyMatrix, p0: f64) -> Result<f64> {
    check_open_probability("p0", p0)?;
    Ok(total_degree_unchecked(a, p0))
}

fn total_degree_unchecked(a: &AdjacencyMatrix, p0: f64) -> f64 {
    let cells = a.n1() as f64 * a.n2() as f64;
    (a.count_ones() as f64 - cells * p0) / (cells * p0 * (1.0 - p0)).sqrt()
}

/// `Σ_j (w(Y_j) - ν_τ) 1{Y_j >= k_min(τ)}` over the units of `axis`.
pub fn truncated_degree(a: &AdjacencyMatrix, p0: f64, tau: f64, axis: Axis) -> Result<f64> {
    let stat = Statistic::new(&DetectorKind::truncated(axis, tau), a.n1(), a.n2(), p0, DEFAULT_BUDGET)?;
    stat.evaluate(a)
}

/// Maximum over `k_scan`-subsets `J` of the scanned side of the truncated
/// degree sum restricted to `J`, with a `Bin(k_scan, p0)` kernel.
pub fn max_truncated_degree(
    a: &AdjacencyMatrix,
    p0: f64,
    tau: f64,
    k_scan: usize,
    axis: Axis,
    budget: u64,
) -> Result<f64> {
    let stat = Statistic::new(
        &DetectorKind::max_truncated(axis, tau, k_scan),
        a.n1(),
        a.n2(),
        p0,
        budget,
    )?;
    stat.evaluate(a)
}

/// A concrete statistic with its kernel tables built once for a fixed `(n1, n2, p0)`.
#[derive(Clone, Debug)]
pub struct Statistic {
    n1: usize,
    n2: usize,
    p0: f64,
    body: Body,
}

#[derive(Clone, Debug)]
enum Body {
    Total,
    Truncated {
        axis: Axis,
        table: TruncationTable,
    },
    Max {
        axis: Axis,
        k_scan: usize,
        subsets: u128,
        table: TruncationTable,
    },
}

impl Statistic {
    pub fn new(kind: &DetectorKind, n1: usize, n2: usize, p0: f64, budget: u64) -> Result<Self> {
        check_open_probability("p0", p0)?;
        kind.validate()?;
        if n1 == 0 || n2 == 0 {
            return Err(Error::param("matrix dimensions must be positive"));
        }
        let body = match kind.tag {
            DetectorTag::TotalDegree => Body::Total,
            DetectorTag::DeltaStar => {
                return Err(Error::Config(
                    "DELTA_STAR must be resolved to a sub-test before evaluation".into(),
                ))
            }
            tag => {
                let axis = tag.axis().expect("truncated tags carry an axis");
                let tau = kind.tau.expect("validated");
                // scanned side and per-unit count size
                let scanned = match axis {
                    Axis::One => n1,
                    Axis::Two => n2,
                };
                match kind.k_scan {
                    None => Body::Truncated {
                        axis,
                        table: BennettKernel::new(scanned as u64, p0)?.truncation_table(tau)?,
                    },
                    Some(k) => {
                        if k > scanned {
                            return Err(Error::param(format!(
                                "k_scan = {k} exceeds the scanned dimension {scanned}"
                            )));
                        }
                        let subsets = combin::binomial(scanned as u64, k as u64);
                        let required = subsets.map_or(f64::INFINITY, |c| c as f64);
                        if required > budget as f64 {
                            return Err(Error::Budget {
                                what: "max truncated degree subset scan",
                                required,
                                budget: budget as f64,
                            });
                        }
                        Body::Max {
                            axis,
                            k_scan: k,
                            subsets: subsets.expect("bounded by budget"),
                            table: BennettKernel::new(k as u64, p0)?.truncation_table(tau)?,
                        }
                    }
                }
            }
        };
        Ok(Statistic { n1, n2, p0, body })
    }

    /// `k_min` and `ν` of the truncation, if any.
    pub fn truncation(&self) -> Option<(u64, f64)> {
        match &self.body {
            Body::Total => None,
            Body::Truncated { table, .. } | Body::Max { table, .. } => Some((table.k_min, table.nu)),
        }
    }

    pub fn evaluate(&self, a: &AdjacencyMatrix) -> Result<f64> {
        if a.n1() != self.n1 || a.n2() != self.n2 {
            return Err(Error::param(format!(
                "matrix is {}x{}, statistic was built for {}x{}",
                a.n1(),
                a.n2(),
                self.n1,
                self.n2
            )));
        }
        Ok(match &self.body {
            Body::Total => total_degree_unchecked(a, self.p0),
            Body::Truncated { axis, table } => {
                let counts = match axis {
                    Axis::One => a.col_sums(),
                    Axis::Two => a.row_sums(),
                };
                counts.iter().map(|&c| table.get(c as usize)).sum()
            }
            Body::Max {
                axis,
                k_scan,
                subsets,
                table,
            } => {
                // units as rows of `units`, scanned positions as bit columns
                let units = match axis {
                    Axis::One => a.transpose(),
                    Axis::Two => a.clone(),
                };
                max_scan(&units, *k_scan, *subsets, table)
            }
        })
    }

    pub fn decide(&self, a: &AdjacencyMatrix, threshold: f64) -> Result<TestDecision> {
        Ok(TestDecision::new(self.evaluate(a)?, threshold))
    }
}

fn max_scan(units: &AdjacencyMatrix, k: usize, subsets: u128, table: &TruncationTable) -> f64 {
    let n = units.n2();
    let words = units.words_per_row();
    let chunks = subsets.div_ceil(SCAN_CHUNK) as usize;
    let best = exec::try_max_over_chunks(chunks, |c| {
        let start = c as u128 * SCAN_CHUNK;
        let end = (start + SCAN_CHUNK).min(subsets);
        let mut subset = unrank(n, k, start);
        let mut mask = vec![0u64; words];
        let mut best = f64::NEG_INFINITY;
        for r in start..end {
            mask.iter_mut().for_each(|m| *m = 0);
            for &i in &subset {
                mask[i / 64] |= 1u64 << (i % 64);
            }
            let mut value = 0.0;
            for u in 0..units.n1() {
                let count: u32 = units
                    .row_words(u)
                    .iter()
                    .zip(&mask)
                    .map(|(x, m)| (x & m).count_ones())
                    .sum();
                value += table.get(count as usize);
            }
            best = best.max(value);
            if r + 1 < end {
                advance(&mut subset, n);
            }
        }
        Ok(best)
    });
    best.expect("scan is infallible")
}

/// Constants of the analytic threshold formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticConstants {
    #[serde(rename = "C_star")]
    pub c_star: f64,
    pub c_prime: f64,
    /// Multiplier inside the truncation levels `τ = sqrt(C_tau ln(...))`.
    #[serde(rename = "C_tau")]
    pub c_tau: f64,
}

impl Default for AnalyticConstants {
    fn default() -> Self {
        AnalyticConstants {
            c_star: 1.0,
            c_prime: 1.0,
            c_tau: 3.0,
        }
    }
}

/// Thresholds and truncation levels of every sub-test of the composite test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticThresholds {
    pub h1: f64,
    pub h1p: f64,
    pub h2: f64,
    pub h2p: f64,
    pub h3: f64,
    pub h4: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub tau4: f64,
}

fn truncated_threshold(n2: f64, log_term: f64, inner: f64, c: &AnalyticConstants) -> f64 {
    let spread = n2 * (-c.c_prime * inner.ln_1p()).exp() * log_term;
    c.c_star * (spread.sqrt() + log_term)
}

pub fn analytic_thresholds(
    shape: &ProblemShape,
    p0: f64,
    alpha: f64,
    consts: &AnalyticConstants,
) -> Result<AnalyticThresholds> {
    check_open_probability("p0", p0)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let ProblemShape { n1, n2, k1, k2 } = *shape;
    let (n1f, n2f, k1f, k2f) = (n1 as f64, n2 as f64, k1 as f64, k2 as f64);
    let l = (2.0 / alpha).ln();
    let lc1 = log_binom(n1 as u64, k1 as u64)?;
    let lc2 = log_binom(n2 as u64, k2 as u64)?;
    let r2 = n2f / (k2f * k2f);
    let r1 = n1f / (k1f * k1f);
    let h2 = (4.0 * l).sqrt();
    Ok(AnalyticThresholds {
        h1: truncated_threshold(n2f, l, r2, consts),
        h1p: truncated_threshold(n1f, l, r1, consts),
        h2,
        h2p: h2,
        h3: truncated_threshold(n2f, l + lc1, r2 * lc1, consts),
        h4: truncated_threshold(n1f, l + lc2, r1 * lc2, consts),
        tau1: (consts.c_tau * r2.ln_1p()).sqrt(),
        tau2: (consts.c_tau * r1.ln_1p()).sqrt(),
        tau3: (consts.c_tau * (r2 * lc1).ln_1p()).sqrt(),
        tau4: (consts.c_tau * (r1 * lc2).ln_1p()).sqrt(),
    })
}

/// Which threshold of the composite test a sub-test uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSlot {
    H1,
    H1p,
    H2,
    H2p,
    H3,
    H4,
}

/// The sub-test the composite test runs on a given shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaStarPlan {
    pub branch: Branch,
    pub kind: DetectorKind,
    pub slot: ThresholdSlot,
}

/// Resolves the composite test to one sub-test.
///
/// Truncation levels come from `taus` (`[τ1, τ2, τ3, τ4]`) unless `tau_override` is set.
pub fn delta_star_plan(
    shape: &ProblemShape,
    consts: &RateConstants,
    taus: [f64; 4],
    tau_override: Option<f64>,
) -> DeltaStarPlan {
    let branch = rate_bundle(shape, consts).branch;
    let tau = |i: usize| tau_override.unwrap_or(taus[i]);
    let (n1f, n2f, k1f, k2f) = (shape.n1 as f64, shape.n2 as f64, shape.k1 as f64, shape.k2 as f64);
    let (kind, slot) = match branch {
        Branch::MaxTrunc1 => (
            DetectorKind::max_truncated(Axis::One, tau(2), shape.k1),
            ThresholdSlot::H3,
        ),
        Branch::MaxTrunc2 => (
            DetectorKind::max_truncated(Axis::Two, tau(3), shape.k2),
            ThresholdSlot::H4,
        ),
        Branch::BranchA if n2f / (k2f * k2f) >= consts.c1 => {
            (DetectorKind::truncated(Axis::One, tau(0)), ThresholdSlot::H1)
        }
        Branch::BranchA => (DetectorKind::total_degree(), ThresholdSlot::H2),
        Branch::BranchB if n1f / (k1f * k1f) >= consts.c1 => {
            (DetectorKind::truncated(Axis::Two, tau(1)), ThresholdSlot::H1p)
        }
        Branch::BranchB => (DetectorKind::total_degree(), ThresholdSlot::H2p),
    };
    DeltaStarPlan { branch, kind, slot }
}

/// Resolved thresholds for the composite test. Unset entries are unreachable
/// or not yet calibrated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaStarThresholds {
    pub h1: Option<f64>,
    pub h1p: Option<f64>,
    pub h2: Option<f64>,
    pub h2p: Option<f64>,
    pub h3: Option<f64>,
    pub h4: Option<f64>,
    /// Truncation levels `[τ1, τ2, τ3, τ4]`.
    pub taus: [f64; 4],
    #[serde(default)]
    pub tau_override: Option<f64>,
    pub budget: u64,
}

impl DeltaStarThresholds {
    pub fn get(&self, slot: ThresholdSlot) -> Option<f64> {
        match slot {
            ThresholdSlot::H1 => self.h1,
            ThresholdSlot::H1p => self.h1p,
            ThresholdSlot::H2 => self.h2,
            ThresholdSlot::H2p => self.h2p,
            ThresholdSlot::H3 => self.h3,
            ThresholdSlot::H4 => self.h4,
        }
    }

    pub fn set(&mut self, slot: ThresholdSlot, value: f64) {
        let target = match slot {
            ThresholdSlot::H1 => &mut self.h1,
            ThresholdSlot::H1p => &mut self.h1p,
            ThresholdSlot::H2 => &mut self.h2,
            ThresholdSlot::H2p => &mut self.h2p,
            ThresholdSlot::H3 => &mut self.h3,
            ThresholdSlot::H4 => &mut self.h4,
        };
        *target = Some(value);
    }
}

impl From<AnalyticThresholds> for DeltaStarThresholds {
    fn from(t: AnalyticThresholds) -> Self {
        DeltaStarThresholds {
            h1: Some(t.h1),
            h1p: Some(t.h1p),
            h2: Some(t.h2),
            h2p: Some(t.h2p),
            h3: Some(t.h3),
            h4: Some(t.h4),
            taus: [t.tau1, t.tau2, t.tau3, t.tau4],
            tau_override: None,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// Runs the sub-test selected by the branch of `R̃`.
pub fn run_delta_star(
    a: &AdjacencyMatrix,
    shape: &ProblemShape,
    p0: f64,
    consts: &RateConstants,
    thresholds: &DeltaStarThresholds,
) -> Result<TestDecision> {
    if a.n1() != shape.n1 || a.n2() != shape.n2 {
        return Err(Error::param("matrix dimensions do not match the shape"));
    }
    let plan = delta_star_plan(shape, consts, thresholds.taus, thresholds.tau_override);
    let h = thresholds.get(plan.slot).ok_or_else(|| {
        Error::Config(format!(
            "threshold {:?} for branch {} is not resolved",
            plan.slot, plan.branch
        ))
    })?;
    Statistic::new(&plan.kind, shape.n1, shape.n2, p0, thresholds.budget)?.decide(a, h)
}

/// Index of the `(1 - alpha)` order statistic: `ceil((1 - alpha) n) - 1`, clamped to `[0, n)`.
pub fn quantile_index(alpha: f64, n: usize) -> usize {
    let x = (1.0 - alpha) * n as f64;
    let nearest = x.round();
    let rank = if (x - nearest).abs() <= 1e-9 * x.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    (rank as usize).clamp(1, n.max(1)) - 1
}

/// Null statistics for trials `0..trials`, in trial order.
pub fn null_statistics(stat: &Statistic, shape: &ProblemShape, p0: f64, trials: usize, seed: u64) -> Result<Vec<f64>> {
    exec::try_map_collect(trials, |t| {
        let a = sample_null(shape, p0, derive_seed(seed, tag::CALIBRATION, t as u64))?;
        stat.evaluate(&a)
    })
}

/// Empirical `(1 - alpha)` quantile of `stat` over `trials` null samples.
pub fn calibrate(stat: &Statistic, shape: &ProblemShape, p0: f64, alpha: f64, trials: usize, seed: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if trials == 0 {
        return Err(Error::param("calibration needs at least one trial"));
    }
    let mut values = null_statistics(stat, shape, p0, trials, seed)?;
    values.sort_by(f64::total_cmp);
    Ok(values[quantile_index(alpha, trials)])
}

/// Calibrated threshold for a concrete detector (not `DELTA_STAR`).
pub fn calibrate_threshold(
    kind: &DetectorKind,
    shape: &ProblemShape,
    p0: f64,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let stat = Statistic::new(kind, shape.n1, shape.n2, p0, DEFAULT_BUDGET)?;
    calibrate(&stat, shape, p0, alpha, trials, seed)
}
