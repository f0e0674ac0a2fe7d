//! Rate functions `ψ`, `β`, `φ`, the combined rates `R` and `R̃`, the branch of
//! the composite test, and the graph-density check.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph_model::{check_open_probability, ProblemShape};
use crate::kernel::log_binom;

/// A nonnegative real or `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// `f64` view, with `+∞` for the sentinel.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(x) => x,
            ExtReal::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::Infinite => None,
        }
    }

    pub fn min(self, other: ExtReal) -> ExtReal {
        if self <= other {
            self
        } else {
            other
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        if x == f64::INFINITY {
            ExtReal::Infinite
        } else {
            ExtReal::Finite(x)
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Infinite, ExtReal::Infinite) => Some(Ordering::Equal),
            (ExtReal::Infinite, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::Finite(_), ExtReal::Infinite) => Some(Ordering::Less),
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => fmt::Display::fmt(x, f),
            ExtReal::Infinite => f.write_str("inf"),
        }
    }
}

/// Serialised as a number, or `null` for `+∞`.
impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(x) => s.serialize_f64(*x),
            ExtReal::Infinite => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.map_or(ExtReal::Infinite, ExtReal::from))
    }
}

/// Constants left unspecified by the theory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConstants {
    /// Cutoff on `n1/k1²` above which `φ` is infinite.
    #[serde(rename = "C_phi")]
    pub c_phi: f64,
    /// Gate between the truncated and total degree tests.
    pub c1: f64,
    /// Lower-bound constant for `δ*`.
    pub c_delta: f64,
    /// Upper-bound constant for `δ*`.
    #[serde(rename = "C_delta")]
    pub c_delta_upper: f64,
    /// Density constant.
    #[serde(rename = "C_eta")]
    pub c_eta: f64,
}

impl Default for RateConstants {
    fn default() -> Self {
        RateConstants {
            c_phi: 8.0,
            c1: 1.0,
            c_delta: 0.01,
            c_delta_upper: 16.0,
            c_eta: 1.0,
        }
    }
}

impl RateConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("C_phi", self.c_phi),
            ("c1", self.c1),
            ("c_delta", self.c_delta),
            ("C_delta", self.c_delta_upper),
            ("C_eta", self.c_eta),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!(
                    "{name} must be a positive finite number, got {v}"
                )));
            }
        }
        if self.c_delta > self.c_delta_upper {
            return Err(Error::param(format!(
                "c_delta = {} exceeds C_delta = {}",
                self.c_delta, self.c_delta_upper
            )));
        }
        Ok(())
    }
}

fn ln_choose(n: usize, k: usize) -> f64 {
    log_binom(n as u64, k as u64).expect("k <= n by shape invariant")
}

/// `ψ = (1/k1) ln(1 + (n2/k2²) ln(e C(n1, k1)))`.
pub fn psi(k1: usize, k2: usize, n1: usize, n2: usize) -> f64 {
    let ratio = n2 as f64 / (k2 as f64 * k2 as f64);
    (ratio * (1.0 + ln_choose(n1, k1))).ln_1p() / k1 as f64
}

/// `β = (1/k1) ln(n2/k2) 1{(n1 k2 / k1²) ln(n2/k2) > 1}`.
pub fn beta(k1: usize, k2: usize, n1: usize, n2: usize) -> f64 {
    let l = (n2 as f64 / k2 as f64).ln();
    let gate = n1 as f64 * k2 as f64 / (k1 as f64 * k1 as f64) * l;
    if gate > 1.0 {
        l / k1 as f64
    } else {
        0.0
    }
}

/// `φ = (n1/k1²) ln(1 + n2/k2²)` when `n1/k1² <= C_phi`, else `+∞`.
pub fn phi(k1: usize, k2: usize, n1: usize, n2: usize, consts: &RateConstants) -> ExtReal {
    let a = n1 as f64 / (k1 as f64 * k1 as f64);
    if a <= consts.c_phi {
        ExtReal::Finite(a * (n2 as f64 / (k2 as f64 * k2 as f64)).ln_1p())
    } else {
        ExtReal::Infinite
    }
}

/// `(1/k1) ln(1 + (n2 k1 / k2²) ln(n1/k1))`, the simplified form of `ψ`.
pub fn psi_appendix_variant(k1: usize, k2: usize, n1: usize, n2: usize) -> f64 {
    if k1 >= n1 {
        return 0.0;
    }
    let inner = n2 as f64 * k1 as f64 / (k2 as f64 * k2 as f64) * (n1 as f64 / k1 as f64).ln();
    inner.ln_1p() / k1 as f64
}

/// Which sub-test the composite test runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "MAX_TRUNC_1")]
    MaxTrunc1,
    #[serde(rename = "MAX_TRUNC_2")]
    MaxTrunc2,
    #[serde(rename = "BRANCH_A")]
    BranchA,
    #[serde(rename = "BRANCH_B")]
    BranchB,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::MaxTrunc1 => "MAX_TRUNC_1",
            Branch::MaxTrunc2 => "MAX_TRUNC_2",
            Branch::BranchA => "BRANCH_A",
            Branch::BranchB => "BRANCH_B",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// All rate components for one shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBundle {
    pub psi12: f64,
    pub psi21: f64,
    pub beta12: f64,
    pub beta21: f64,
    pub phi12: ExtReal,
    pub phi21: ExtReal,
    #[serde(rename = "R")]
    pub r: ExtReal,
    #[serde(rename = "R_tilde")]
    pub r_tilde: ExtReal,
    pub branch: Branch,
}

pub fn rate_bundle(shape: &ProblemShape, consts: &RateConstants) -> RateBundle {
    let ProblemShape { n1, n2, k1, k2 } = *shape;
    let psi12 = psi(k1, k2, n1, n2);
    let psi21 = psi(k2, k1, n2, n1);
    let beta12 = beta(k1, k2, n1, n2);
    let beta21 = beta(k2, k1, n2, n1);
    let phi12 = phi(k1, k2, n1, n2, consts);
    let phi21 = phi(k2, k1, n2, n1, consts);

    let r = ExtReal::Finite(psi12 + psi21).min(phi12).min(phi21);

    // candidates in precedence order; strict comparison keeps the earliest on ties
    let candidates = [
        (Branch::MaxTrunc1, ExtReal::Finite(psi12 + beta21)),
        (Branch::MaxTrunc2, ExtReal::Finite(psi21 + beta12)),
        (Branch::BranchA, phi12),
        (Branch::BranchB, phi21),
    ];
    let (mut branch, mut r_tilde) = candidates[0];
    for &(b, v) in &candidates[1..] {
        if v < r_tilde {
            branch = b;
            r_tilde = v;
        }
    }
    RateBundle {
        psi12,
        psi21,
        beta12,
        beta21,
        phi12,
        phi21,
        r,
        r_tilde,
        branch,
    }
}

/// `(sqrt(c_δ p0(1-p0) R), min(sqrt(C_δ p0(1-p0) R), 1 - p0))`.
pub fn delta_star_bounds(shape: &ProblemShape, p0: f64, consts: &RateConstants) -> Result<(f64, f64)> {
    check_open_probability("p0", p0)?;
    let r = rate_bundle(shape, consts).r;
    Ok(delta_star_bounds_from_rate(r, p0, consts))
}

pub fn delta_star_bounds_from_rate(r: ExtReal, p0: f64, consts: &RateConstants) -> (f64, f64) {
    let v = p0 * (1.0 - p0);
    match r {
        ExtReal::Finite(r) => (
            (consts.c_delta * v * r).sqrt(),
            (consts.c_delta_upper * v * r).sqrt().min(1.0 - p0),
        ),
        ExtReal::Infinite => (1.0 - p0, 1.0 - p0),
    }
}

/// Which lower bound on `p0` applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityCase {
    /// `R̃` attained by a `ψ + β` term.
    Psi,
    /// `R̃ = φ12` with `n2 > k2²`.
    Phi12,
    /// `R̃ = φ21` with `n1 > k1²`.
    Phi21,
    Otherwise,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub case: DensityCase,
    pub branch: Branch,
    pub required: f64,
    pub below_quarter: bool,
    pub satisfied: bool,
}

/// The lower bound on `p0` for a given case.
pub fn density_requirement(case: DensityCase, shape: &ProblemShape, consts: &RateConstants) -> f64 {
    let ProblemShape { n1, n2, k1, k2 } = *shape;
    let (n1f, n2f, k1f, k2f) = (n1 as f64, n2 as f64, k1 as f64, k2 as f64);
    match case {
        DensityCase::Psi => consts.c_eta / (k1f * k2f) * (1.0 + ln_choose(n1, k1) + ln_choose(n2, k2)),
        DensityCase::Phi12 => consts.c_eta / n1f * (n2f / (k2f * k2f)).ln_1p(),
        DensityCase::Phi21 => consts.c_eta / n2f * (n1f / (k1f * k1f)).ln_1p(),
        DensityCase::Otherwise => consts.c_eta / (n1f * n2f),
    }
}

pub fn density_assumption(shape: &ProblemShape, p0: f64, consts: &RateConstants) -> Result<DensityReport> {
    check_open_probability("p0", p0)?;
    let branch = rate_bundle(shape, consts).branch;
    let case = match branch {
        Branch::MaxTrunc1 | Branch::MaxTrunc2 => DensityCase::Psi,
        Branch::BranchA if shape.n2 > shape.k2 * shape.k2 => DensityCase::Phi12,
        Branch::BranchB if shape.n1 > shape.k1 * shape.k1 => DensityCase::Phi21,
        _ => DensityCase::Otherwise,
    };
    let required = density_requirement(case, shape, consts);
    let below_quarter = p0 <= 0.25;
    Ok(DensityReport {
        case,
        branch,
        required,
        below_quarter,
        satisfied: below_quarter && p0 >= required,
    })
}

/// `(1/k2) ln(1 + (n1 k2 / k1²) ln n2)`, the closed-form rate in the sparse-column regime.
pub fn phase_closed_form(shape: &ProblemShape) -> f64 {
    let ProblemShape { n1, n2, k1, k2 } = *shape;
    let (k1f, k2f) = (k1 as f64, k2 as f64);
    (n1 as f64 * k2f / (k1f * k1f) * (n2 as f64).ln()).ln_1p() / k2f
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn consts(c_phi: f64) -> RateConstants {
        RateConstants {
            c_phi,
            ..RateConstants::default()
        }
    }

    fn shape(n1: usize, n2: usize, k1: usize, k2: usize) -> ProblemShape {
        ProblemShape::new(n1, n2, k1, k2).unwrap()
    }

    #[test]
    fn psi_values() {
        assert_relative_eq!(psi(10, 10, 100, 100), 0.348_069_604_482_503_9, max_relative = 1e-12);
        let sum = psi(10, 10, 100, 100) * 2.0;
        assert_relative_eq!(sum, 0.696_139_208_965_007_8, max_relative = 1e-12);
        assert_relative_eq!(psi(7, 9, 7, 9), (1.0 / 9.0f64).ln_1p() / 7.0, max_relative = 1e-12);
    }

    #[test]
    fn psi_limit_bound() {
        let n2 = 1_000_000;
        let bound = (1e-6 * (1.0 + ln_choose(20, 3))).ln_1p() / 3.0;
        assert!(psi(3, n2, 20, n2) <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn beta_values() {
        assert_relative_eq!(beta(10, 10, 100, 100), 10f64.ln() / 10.0, max_relative = 1e-14);
        assert_eq!(beta(10, 1, 10, 2), 0.0);
        assert_eq!(beta(3, 5, 10, 5), 0.0);
    }

    #[test]
    fn phi_values() {
        let c = consts(10.0);
        assert_relative_eq!(phi(10, 10, 100, 100, &c).to_f64(), 2f64.ln(), max_relative = 1e-14);
        assert_eq!(phi(1, 10, 100, 100, &c), ExtReal::Infinite);
        let v = phi(20, 5, 20, 40, &c).finite().unwrap();
        assert_relative_eq!(v, (40.0f64 / 25.0).ln_1p() / 20.0, max_relative = 1e-14);
    }

    #[test]
    fn appendix_variant_values() {
        assert_relative_eq!(
            psi_appendix_variant(10, 10, 100, 100),
            0.317_913_037,
            max_relative = 1e-8
        );
        assert_eq!(psi_appendix_variant(5, 3, 5, 9), 0.0);
    }

    #[test]
    fn bundle_example() {
        let b = rate_bundle(&shape(100, 100, 10, 10), &consts(10.0));
        assert_relative_eq!(b.r.to_f64(), 2f64.ln(), max_relative = 1e-14);
        assert_eq!(b.phi12, b.phi21);
        // ψ12 + β21 = 0.578 is the smallest term of R̃
        assert_relative_eq!(b.r_tilde.to_f64(), b.psi12 + b.beta21, max_relative = 1e-15);
        assert_eq!(b.branch, Branch::MaxTrunc1);
    }

    #[test]
    fn bundle_tie_goes_to_branch_a() {
        // β vanishes and ψ is large, so φ12 = φ21 decides
        let b = rate_bundle(&shape(64, 64, 16, 16), &RateConstants::default());
        assert_eq!(b.phi12, b.phi21);
        assert!(b.r_tilde == b.phi12);
        assert_eq!(b.branch, Branch::BranchA);
    }

    #[test]
    fn bundle_full_support() {
        let b = rate_bundle(&shape(6, 9, 6, 9), &RateConstants::default());
        assert_relative_eq!(b.phi12.to_f64(), (1.0f64 / 9.0).ln_1p() / 6.0, max_relative = 1e-14);
        assert!(b.r <= b.phi12);
    }

    #[test]
    fn delta_bounds_example() {
        let c = RateConstants::default();
        let (lo, hi) = delta_star_bounds_from_rate(ExtReal::Finite(2f64.ln()), 0.25, &c);
        assert_relative_eq!(lo, 0.036_050_672, max_relative = 1e-8);
        assert_eq!(hi, 0.75);
        assert_eq!(delta_star_bounds_from_rate(ExtReal::Finite(0.0), 0.25, &c), (0.0, 0.0));
        assert!(delta_star_bounds(&shape(4, 4, 2, 2), 0.0, &c).is_err());
    }

    #[test]
    fn density_examples() {
        let c = RateConstants::default();
        let r = density_assumption(&shape(64, 64, 8, 8), 0.3, &c).unwrap();
        assert!(!r.below_quarter && !r.satisfied);

        let s = shape(64, 64, 8, 8);
        assert_relative_eq!(
            density_requirement(DensityCase::Psi, &s, &c),
            0.709_712_483,
            max_relative = 1e-8
        );
        let r = density_assumption(&s, 0.25, &c).unwrap();
        assert_eq!(r.case, DensityCase::Psi);
        assert!(!r.satisfied);

        let big = shape(10_000, 10_000, 100, 100);
        assert_relative_eq!(
            density_requirement(DensityCase::Otherwise, &big, &c),
            1e-8,
            max_relative = 1e-12
        );
        let r = density_assumption(&big, 0.25, &c).unwrap();
        assert!(r.satisfied);
    }

    #[test]
    fn constants_validation() {
        assert!(RateConstants::default().validate().is_ok());
        let bad = RateConstants {
            c_delta: 20.0,
            ..RateConstants::default()
        };
        assert!(bad.validate().is_err());
        let neg = RateConstants {
            c1: -1.0,
            ..RateConstants::default()
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn constants_serde_names() {
        let json = serde_json::to_string(&RateConstants::default()).unwrap();
        assert!(json.contains("\"C_phi\"") && json.contains("\"C_delta\"") && json.contains("\"C_eta\""));
        let c: RateConstants = serde_json::from_str(r#"{"C_phi": 3.5}"#).unwrap();
        assert_eq!(c.c_phi, 3.5);
        assert_eq!(c.c1, 1.0);
        assert!(serde_json::from_str::<RateConstants>(r#"{"C_ph": 3.5}"#).is_err());
    }

    #[test]
    fn ext_real_serde() {
        assert_eq!(serde_json::to_string(&ExtReal::Infinite).unwrap(), "null");
        let v: ExtReal = serde_json::from_str("null").unwrap();
        assert_eq!(v, ExtReal::Infinite);
        let v: ExtReal = serde_json::from_str("0.5").unwrap();
        assert_eq!(v, ExtReal::Finite(0.5));
    }

    #[test]
    fn appendix_variant_tracks_psi() {
        let mut n = 16usize;
        while n <= 10_000 {
            let lo = (n as f64).sqrt().ceil() as usize;
            let hi = n / 4;
            for k1 in [lo, (lo + hi) / 2, hi] {
                for k2 in [lo, (lo + hi) / 2, hi] {
                    let r = psi(k1, k2, n, n) / psi_appendix_variant(k1, k2, n, n);
                    assert!((0.25..=4.0).contains(&r), "n={n} k1={k1} k2={k2} ratio={r}");
                }
            }
            n *= 2;
        }
    }

    #[test]
    fn closed_form_tracks_rate_on_sparse_column_slice() {
        let c = RateConstants::default();
        for k1 in [200, 300, 500, 700, 1000, 1500, 2000, 3000, 4000] {
            let s = shape(100_000, 4096, k1, 2);
            let r = rate_bundle(&s, &c).r.to_f64() / phase_closed_form(&s);
            assert!((0.125..=8.0).contains(&r), "k1={k1} ratio={r}");
        }
    }

    proptest! {
        #[test]
        fn swap_symmetry(n1 in 1usize..400, n2 in 1usize..400, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0) {
            let k1 = 1 + ((n1 - 1) as f64 * f1) as usize;
            let k2 = 1 + ((n2 - 1) as f64 * f2) as usize;
            let c = RateConstants::default();
            let a = rate_bundle(&shape(n1, n2, k1, k2), &c);
            let b = rate_bundle(&shape(n2, n1, k2, k1), &c);
            prop_assert_eq!(a.r, b.r);
            prop_assert_eq!(a.psi12, b.psi21);
            prop_assert_eq!(a.beta12, b.beta21);
            prop_assert_eq!(a.phi12, b.phi21);
        }

        #[test]
        fn minima_bound_their_arguments(n1 in 1usize..400, n2 in 1usize..400, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0) {
            let k1 = 1 + ((n1 - 1) as f64 * f1) as usize;
            let k2 = 1 + ((n2 - 1) as f64 * f2) as usize;
            let b = rate_bundle(&shape(n1, n2, k1, k2), &RateConstants::default());
            prop_assert!(b.r <= ExtReal::Finite(b.psi12 + b.psi21));
            prop_assert!(b.r <= b.phi12 && b.r <= b.phi21);
            prop_assert!(b.r_tilde <= ExtReal::Finite(b.psi12 + b.beta21));
            prop_assert!(b.r_tilde <= ExtReal::Finite(b.psi21 + b.beta12));
            prop_assert!(b.r_tilde <= b.phi12 && b.r_tilde <= b.phi21);
            prop_assert!(b.psi12 > 0.0 && b.psi21 > 0.0);
        }

        #[test]
        fn rate_nonincreasing_in_block_size(n1 in 2usize..300, n2 in 2usize..300, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0) {
            let k1 = 1 + ((n1 - 2) as f64 * f1) as usize;
            let k2 = 1 + ((n2 - 2) as f64 * f2) as usize;
            let c = RateConstants::default();
            let r = rate_bundle(&shape(n1, n2, k1, k2), &c).r;
            let r1 = rate_bundle(&shape(n1, n2, k1 + 1, k2), &c).r;
            let r2 = rate_bundle(&shape(n1, n2, k1, k2 + 1), &c).r;
            prop_assert!(r1.to_f64() <= r.to_f64() * (1.0 + 1e-12));
            prop_assert!(r2.to_f64() <= r.to_f64() * (1.0 + 1e-12));
        }

        #[test]
        fn psi_nonincreasing_in_k2(n1 in 1usize..300, n2 in 2usize..300, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0) {
            let k1 = 1 + ((n1 - 1) as f64 * f1) as usize;
            let k2 = 1 + ((n2 - 2) as f64 * f2) as usize;
            prop_assert!(psi(k1, k2 + 1, n1, n2) <= psi(k1, k2, n1, n2));
        }
    }
}
