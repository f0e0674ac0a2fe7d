//! Exact binomial machinery behind the truncated degree statistics.
//!
//! For `Y ~ Bin(n, p0)` with `σ = sqrt(n p0 (1 - p0))` the statistic kernel is
//!
//! ```text
//! w(y) = n(1-p0) h_B(-(y - n p0) / (n(1-p0))) + n p0 h_B((y - n p0) / (n p0))
//!      = (n - y) ln((n - y) / (n(1-p0))) + y ln(y / (n p0))
//! ```
//!
//! with `h_B(x) = (1 + x) ln(1 + x) - x` and the convention `0 ln 0 = 0`.
//! Conditional moments of `w(Y)` given `(Y - n p0)/σ >= a` are realised on
//! the integer lattice through `k_min(a) = ceil(n p0 + a σ)`.
//!
//! Probabilities are computed from log-pmf values and summed from the
//! smallest terms upwards.

use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::graph_model::{check_open_probability, check_probability};

/// `ln C(n, k)`.
pub fn log_binom(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::domain(format!("log_binom requires k <= n, got n={n} k={k}")));
    }
    Ok(ln_binomial(n, k))
}

/// Bennett function `h_B(x) = (1+x) ln(1+x) - x` on `[-1, ∞)`, with `h_B(-1) = 1`.
pub fn bennett_h(x: f64) -> Result<f64> {
    if x.is_nan() || x < -1.0 {
        return Err(Error::domain(format!("bennett_h requires x >= -1, got {x}")));
    }
    if x == -1.0 {
        return Ok(1.0);
    }
    Ok(((1.0 + x) * x.ln_1p() - x).max(0.0))
}

#[inline]
fn ln_pmf_interior(y: u64, n: u64, ln_p: f64, ln_q: f64) -> f64 {
    ln_binomial(n, y) + y as f64 * ln_p + (n - y) as f64 * ln_q
}

/// `P(Bin(n, p) >= k)` for `0 <= k <= n + 1`.
pub fn binomial_tail(k: u64, n: u64, p: f64) -> Result<f64> {
    check_probability("p", p)?;
    if k > n + 1 {
        return Err(Error::domain(format!(
            "binomial_tail requires k <= n + 1, got k={k} n={n}"
        )));
    }
    if k == 0 {
        return Ok(1.0);
    }
    if k == n + 1 || p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    // sum whichever side excludes the mode, so the small side is never lost to cancellation
    if (k as f64) <= n as f64 * p {
        let logs: Vec<f64> = (0..k).map(|y| ln_pmf_interior(y, n, ln_p, ln_q)).collect();
        Ok((1.0 - weighted_sums(&logs, &[]).1).clamp(0.0, 1.0))
    } else {
        let logs: Vec<f64> = (k..=n).map(|y| ln_pmf_interior(y, n, ln_p, ln_q)).collect();
        Ok(weighted_sums(&logs, &[]).1.min(1.0))
    }
}

/// Given log-weights `l_i` and optional values `v_i`, returns
/// `(Σ e^{l_i} v_i, Σ e^{l_i}, Σ e^{l_i} v_i²)`, adding terms in increasing weight.
fn weighted_sums(logs: &[f64], values: &[f64]) -> (f64, f64, f64) {
    match relative_sums(logs, values) {
        Some((first, mass, second, max)) => {
            let scale = max.exp();
            (first * scale, mass * scale, second * scale)
        }
        None => (0.0, 0.0, 0.0),
    }
}

/// As [`weighted_sums`], with every weight divided by `e^{max l_i}`; the maximum is returned last.
fn relative_sums(logs: &[f64], values: &[f64]) -> Option<(f64, f64, f64, f64)> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let mut order: Vec<usize> = (0..logs.len()).collect();
    order.sort_by(|&a, &b| logs[a].total_cmp(&logs[b]));
    let (mut first, mut mass, mut second) = (0.0, 0.0, 0.0);
    for i in order {
        let wgt = (logs[i] - max).exp();
        mass += wgt;
        if let Some(&v) = values.get(i) {
            first += wgt * v;
            second += wgt * v * v;
        }
    }
    Some((first, mass, second, max))
}

/// Per-`(n, p0)` binomial kernel with a cached log-pmf table.
#[derive(Clone, Debug)]
pub struct BennettKernel {
    n: u64,
    p0: f64,
    sigma: f64,
    ln_pmf: Vec<f64>,
}

impl BennettKernel {
    pub fn new(n: u64, p0: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("kernel size n must be positive"));
        }
        check_open_probability("p0", p0)?;
        let (ln_p, ln_q) = (p0.ln(), (-p0).ln_1p());
        let ln_pmf = (0..=n).map(|y| ln_pmf_interior(y, n, ln_p, ln_q)).collect();
        Ok(BennettKernel {
            n,
            p0,
            sigma: (n as f64 * p0 * (1.0 - p0)).sqrt(),
            ln_pmf,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> f64 {
        self.n as f64 * self.p0
    }

    /// Standardised count `(y - n p0) / σ`.
    pub fn z(&self, y: u64) -> f64 {
        (y as f64 - self.mean()) / self.sigma
    }

    pub fn ln_pmf(&self, y: u64) -> f64 {
        self.ln_pmf[y as usize]
    }

    /// Kernel value `w(y)`.
    pub fn w(&self, y: u64) -> Result<f64> {
        if y > self.n {
            return Err(Error::domain(format!("w requires 0 <= y <= n = {}, got {y}", self.n)));
        }
        Ok(self.w_unchecked(y))
    }

    pub(crate) fn w_unchecked(&self, y: u64) -> f64 {
        let n = self.n as f64;
        let y = y as f64;
        let rest = n - y;
        let upper = if y > 0.0 { y * (y / (n * self.p0)).ln() } else { 0.0 };
        let lower = if rest > 0.0 {
            rest * (rest / (n * (1.0 - self.p0))).ln()
        } else {
            0.0
        };
        // the exact value is nonnegative; rounding can dip below zero at the mean
        (upper + lower).max(0.0)
    }

    /// `k_min(a) = ceil(n p0 + a σ)`, the smallest count with standardised value `>= a`.
    ///
    /// A value within rounding distance of an integer is treated as that integer.
    pub fn k_min(&self, a: f64) -> Result<u64> {
        if a.is_nan() || a < 0.0 {
            return Err(Error::domain(format!("threshold a must be >= 0, got {a}")));
        }
        let x = self.mean() + a * self.sigma;
        if !x.is_finite() {
            return Ok(u64::MAX);
        }
        let nearest = x.round();
        let k = if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
            nearest
        } else {
            x.ceil()
        };
        Ok(k.max(0.0) as u64)
    }

    /// `P(Y >= k)`, with `k > n` giving zero.
    pub fn tail(&self, k: u64) -> Result<f64> {
        binomial_tail(k.min(self.n + 1), self.n, self.p0)
    }

    /// `(E[w(Y) | Y >= k], E[w(Y)^2 | Y >= k])`.
    pub fn conditional_moments_from(&self, k: u64) -> Result<(f64, f64)> {
        if k > self.n {
            return Err(Error::EmptyCondition { k_min: k, n: self.n });
        }
        let logs = &self.ln_pmf[k as usize..];
        let w: Vec<f64> = (k..=self.n).map(|y| self.w_unchecked(y)).collect();
        // ratios of relative sums stay finite when the tail itself underflows
        let (first, mass, second, _) = relative_sums(logs, &w).ok_or(Error::EmptyCondition { k_min: k, n: self.n })?;
        Ok((first / mass, second / mass))
    }

    /// `ν_a = E[w(Y) | Z >= a]`.
    pub fn nu(&self, a: f64) -> Result<f64> {
        Ok(self.conditional_moments_from(self.k_min(a)?)?.0)
    }

    /// `γ_a = E[w(Y)^2 | Z >= a]`.
    pub fn gamma(&self, a: f64) -> Result<f64> {
        Ok(self.conditional_moments_from(self.k_min(a)?)?.1)
    }

    /// Per-count contributions `(w(y) - ν_a) 1{y >= k_min(a)}`.
    pub fn truncation_table(&self, a: f64) -> Result<TruncationTable> {
        let k_min = self.k_min(a)?;
        let (nu, _) = self.conditional_moments_from(k_min)?;
        let contrib = (0..=self.n)
            .map(|y| if y >= k_min { self.w_unchecked(y) - nu } else { 0.0 })
            .collect();
        Ok(TruncationTable { k_min, nu, contrib })
    }
}

/// Lookup table of truncated, recentred kernel values indexed by count.
#[derive(Clone, Debug)]
pub struct TruncationTable {
    pub k_min: u64,
    pub nu: f64,
    contrib: Vec<f64>,
}

impl TruncationTable {
    #[inline]
    pub fn get(&self, y: usize) -> f64 {
        self.contrib[y]
    }

    pub fn len(&self) -> usize {
        self.contrib.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contrib.is_empty()
    }
}

pub fn w_stat(y: u64, kernel: &BennettKernel) -> Result<f64> {
    kernel.w(y)
}

pub fn z_threshold_to_count(a: f64, kernel: &BennettKernel) -> Result<u64> {
    kernel.k_min(a)
}

pub fn nu(a: f64, kernel: &BennettKernel) -> Result<f64> {
    kernel.nu(a)
}

pub fn gamma(a: f64, kernel: &BennettKernel) -> Result<f64> {
    kernel.gamma(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn kernel(n: u64, p0: f64) -> BennettKernel {
        BennettKernel::new(n, p0).unwrap()
    }

    #[test]
    fn bennett_values() {
        assert_eq!(bennett_h(0.0).unwrap(), 0.0);
        assert_eq!(bennett_h(-1.0).unwrap(), 1.0);
        assert_relative_eq!(bennett_h(1.0).unwrap(), 0.386_294_361_119_890_6, max_relative = 1e-14);
        assert!(bennett_h(-1.0 - 1e-12).is_err());
        assert!(bennett_h(f64::NAN).is_err());
        assert!((bennett_h(-1.0 + 1e-12).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn log_binom_values() {
        assert_eq!(log_binom(7, 0).unwrap(), 0.0);
        assert_relative_eq!(log_binom(4, 2).unwrap(), 6f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(
            log_binom(100, 10).unwrap(),
            17_310_309_456_440f64.ln(),
            max_relative = 1e-10
        );
        assert!(log_binom(3, 4).is_err());
    }

    #[test]
    fn kernel_construction() {
        let k = kernel(37, 0.19);
        assert_relative_eq!(k.sigma().powi(2), 37.0 * 0.19 * 0.81, max_relative = 1e-12);
        assert!(BennettKernel::new(0, 0.2).is_err());
        assert!(BennettKernel::new(5, 0.0).is_err());
        assert!(BennettKernel::new(5, 1.0).is_err());
    }

    #[test]
    fn w_values() {
        let k = kernel(4, 0.25);
        assert_eq!(k.w(1).unwrap(), 0.0);
        assert_relative_eq!(k.w(4).unwrap(), 5.545_177_444_479_562, max_relative = 1e-14);
        assert_relative_eq!(k.w(2).unwrap(), 0.575_364_144_903_561_9, max_relative = 1e-13);
        assert!(k.w(5).is_err());
    }

    #[test]
    fn w_matches_bennett_form() {
        let k = kernel(30, 0.2);
        let (n, p) = (30.0, 0.2);
        for y in 0..=30u64 {
            let d = y as f64 - n * p;
            let via_h =
                n * (1.0 - p) * bennett_h(-d / (n * (1.0 - p))).unwrap() + n * p * bennett_h(d / (n * p)).unwrap();
            assert!((k.w(y).unwrap() - via_h).abs() < 1e-12 * via_h.max(1.0), "y={y}");
        }
    }

    #[test]
    fn k_min_values() {
        let k = kernel(10, 0.25);
        assert_eq!(k.k_min(0.0).unwrap(), 3);
        assert_eq!(k.k_min(1.0).unwrap(), 4);
        let k4 = kernel(4, 0.25);
        assert_eq!(k4.k_min(1.0 / k4.sigma()).unwrap(), 2);
        assert!(k4.k_min(-0.1).is_err());
    }

    #[test]
    fn nu_small_cases() {
        let k = kernel(2, 0.25);
        let (p1, p2) = (0.375, 0.0625);
        let (w1, w2) = (k.w(1).unwrap(), k.w(2).unwrap());
        assert_relative_eq!(w1, 0.287_682_072_451_780_9, max_relative = 1e-12);
        assert_relative_eq!(w2, 2.772_588_722_239_781, max_relative = 1e-12);
        assert_relative_eq!(
            k.nu(0.0).unwrap(),
            (p1 * w1 + p2 * w2) / (p1 + p2),
            max_relative = 1e-14
        );
        assert_relative_eq!(k.nu(0.0).unwrap(), 0.642_668_736_7, max_relative = 1e-9);

        let k4 = kernel(4, 0.25);
        assert_relative_eq!(k4.nu(1.0).unwrap(), 0.940_022_928, max_relative = 1e-8);
    }

    #[test]
    fn single_atom_conditioning() {
        let k = kernel(6, 0.3);
        let a = (6.0 - k.mean()) / k.sigma();
        assert_eq!(k.k_min(a).unwrap(), 6);
        let wn = 6.0 * (1.0f64 / 0.3).ln();
        assert_relative_eq!(k.nu(a).unwrap(), wn, max_relative = 1e-13);
        assert_relative_eq!(k.gamma(a).unwrap(), wn * wn, max_relative = 1e-13);
        assert!(matches!(k.nu(a + 0.5), Err(Error::EmptyCondition { k_min: 7, n: 6 })));
    }

    #[test]
    fn tail_values() {
        assert_eq!(binomial_tail(1, 2, 0.5).unwrap(), 0.75);
        assert_relative_eq!(
            binomial_tail(4, 10, 0.25).unwrap(),
            0.224_124_908_447_265_6,
            max_relative = 1e-13
        );
        assert_eq!(binomial_tail(0, 9, 0.3).unwrap(), 1.0);
        assert_eq!(binomial_tail(10, 9, 0.3).unwrap(), 0.0);
        assert!(binomial_tail(11, 9, 0.3).is_err());
    }

    #[test]
    fn tail_is_stable_for_large_n() {
        let t = binomial_tail(52_000, 100_000, 0.5).unwrap();
        assert_relative_eq!(t, 5.765_469_333_361_486e-37, max_relative = 1e-9);
        let near_one = binomial_tail(40_000, 100_000, 0.5).unwrap();
        assert!((near_one - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_table_matches_moments() {
        let k = kernel(4, 0.25);
        let t = k.truncation_table(1.0).unwrap();
        assert_eq!(t.k_min, 2);
        assert_eq!(t.get(1), 0.0);
        assert_relative_eq!(t.get(4), 4.605_154_516, max_relative = 1e-9);
    }

    proptest! {
        #[test]
        fn jensen_gamma_ge_nu_squared(n in 1u64..300, p0 in 0.01f64..0.99, a in 0.0f64..3.0) {
            let k = kernel(n, p0);
            if let (Ok(nu), Ok(g)) = (k.nu(a), k.gamma(a)) {
                prop_assert!(g >= nu * nu * (1.0 - 1e-12));
            }
        }

        #[test]
        fn w_nonnegative_and_increasing_above_mean(n in 1u64..400, p0 in 0.01f64..0.99) {
            let k = kernel(n, p0);
            let start = k.mean().ceil() as u64;
            let mut prev = -1.0;
            for y in 0..=n {
                let w = k.w(y).unwrap();
                prop_assert!(w >= 0.0);
                if y >= start {
                    prop_assert!(w >= prev);
                    prev = w;
                }
            }
        }

        #[test]
        fn k_min_is_smallest_count_reaching_a(n in 1u64..500, p0 in 0.01f64..0.99, a in 0.0f64..4.0) {
            let k = kernel(n, p0);
            let km = k.k_min(a).unwrap();
            prop_assert!(km as f64 >= k.mean() + a * k.sigma() - 1e-6);
            if km > 0 {
                prop_assert!(((km - 1) as f64) < k.mean() + a * k.sigma());
            }
        }
    }
}
