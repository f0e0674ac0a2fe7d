//! Exact second moment of the uniform-prior likelihood ratio, its upper
//! bounds, the resulting Bayes-risk lower bound, and exhaustive total
//! variation on tiny instances.
//!
//! With `μ² = δ² / (p0 (1 - p0))` and `U, V` the overlaps of two independent
//! uniform supports on each side, `E0[L²] = E[(1 + μ²)^{U V}]`.

use serde::{Deserialize, Serialize};

use crate::combin::{binomial, Combinations};
use crate::error::{Error, Result};
use crate::exec;
use crate::graph_model::{check_open_probability, ProblemShape, SignalConfig};
use crate::kernel::log_binom;
use crate::rates::ExtReal;

/// Largest number of ordered support pairs enumerated by the brute-force oracle.
pub const BRUTE_FORCE_BUDGET: f64 = 1e8;

/// Largest `n1 n2` for exhaustive total variation.
pub const TV_MAX_CELLS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentResult {
    pub mu2: f64,
    pub exact: f64,
    pub exp_hypergeom: f64,
    pub exp_binomial: ExtReal,
    pub risk_lb: f64,
}

fn mu2(p0: f64, delta: f64) -> Result<f64> {
    check_open_probability("p0", p0)?;
    SignalConfig::new(p0, delta)?;
    Ok(delta * delta / (p0 * (1.0 - p0)))
}

/// `(u, ln P(U = u))` for the overlap of two uniform `k`-subsets of `0..n`.
fn overlap_law(n: usize, k: usize) -> Vec<(u64, f64)> {
    let (n, k) = (n as u64, k as u64);
    let total = log_binom(n, k).expect("k <= n");
    let lo = (2 * k).saturating_sub(n);
    (lo..=k)
        .map(|u| {
            let l = log_binom(k, u).expect("u <= k") + log_binom(n - k, k - u).expect("k - u <= n - k") - total;
            (u, l)
        })
        .collect()
}

/// `(x, ln P(X = x))` for `X ~ Bin(k, k / (n - k))`, or `None` when that law is undefined.
fn dominating_binomial(n: usize, k: usize) -> Option<Vec<(u64, f64)>> {
    if k >= n {
        return None;
    }
    let q = k as f64 / (n - k) as f64;
    if q > 1.0 {
        return None;
    }
    let k = k as u64;
    Some(
        (0..=k)
            .map(|x| {
                let l = if q == 1.0 {
                    if x == k {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    log_binom(k, x).expect("x <= k") + x as f64 * q.ln() + (k - x) as f64 * (-q).ln_1p()
                };
                (x, l)
            })
            .collect(),
    )
}

/// `E[exp(rate · X · Y)]` for independent laws given as `(value, ln pmf)` lists.
fn product_mgf(xs: &[(u64, f64)], ys: &[(u64, f64)], rate: f64) -> f64 {
    if rate == 0.0 {
        return 1.0;
    }
    let terms: Vec<f64> = xs
        .iter()
        .flat_map(|&(x, lx)| ys.iter().map(move |&(y, ly)| lx + ly + rate * (x * y) as f64))
        .filter(|t| *t > f64::NEG_INFINITY)
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let mut sorted = terms;
    sorted.sort_by(f64::total_cmp);
    let s: f64 = sorted.iter().map(|t| (t - max).exp()).sum();
    (max + s.ln()).exp()
}

/// `E[(1 + μ²)^{U V}]`.
pub fn second_moment_exact(shape: &ProblemShape, p0: f64, delta: f64) -> Result<f64> {
    let m = mu2(p0, delta)?;
    let u = overlap_law(shape.n1, shape.k1);
    let v = overlap_law(shape.n2, shape.k2);
    Ok(product_mgf(&u, &v, m.ln_1p()).max(1.0))
}

/// Average of `(1 + μ²)^{|K1 ∩ K1'| |K2 ∩ K2'|}` over all ordered pairs of supports.
pub fn second_moment_bruteforce(shape: &ProblemShape, p0: f64, delta: f64) -> Result<f64> {
    let m = mu2(p0, delta)?;
    let c1 = binomial(shape.n1 as u64, shape.k1 as u64).map_or(f64::INFINITY, |c| c as f64);
    let c2 = binomial(shape.n2 as u64, shape.k2 as u64).map_or(f64::INFINITY, |c| c as f64);
    let pairs = c1 * c1 * c2 * c2;
    if pairs > BRUTE_FORCE_BUDGET {
        return Err(Error::Budget {
            what: "second moment support-pair enumeration",
            required: pairs,
            budget: BRUTE_FORCE_BUDGET,
        });
    }
    let left: Vec<Vec<usize>> = Combinations::new(shape.n1, shape.k1).collect();
    let right: Vec<Vec<usize>> = Combinations::new(shape.n2, shape.k2).collect();
    let overlap = |a: &[usize], b: &[usize]| a.iter().filter(|x| b.binary_search(x).is_ok()).count() as i32;
    let base = 1.0 + m;
    let total = exec::chunked_sum(left.len() as u64, 1, |a| {
        let a = &left[a as usize];
        let mut s = 0.0;
        for b in &left {
            let u = overlap(a, b);
            for c in &right {
                for d in &right {
                    s += base.powi(u * overlap(c, d));
                }
            }
        }
        s
    });
    Ok(total / pairs)
}

/// `(E[exp(μ² U V)], E[exp(μ² X Y)])` with hypergeometric `U, V` and
/// `X ~ Bin(k1, k1/(n1-k1))`, `Y ~ Bin(k2, k2/(n2-k2))`. The binomial value is
/// infinite when either law is undefined.
pub fn second_moment_exp_bounds(shape: &ProblemShape, p0: f64, delta: f64) -> Result<(f64, ExtReal)> {
    let m = mu2(p0, delta)?;
    let hyper = product_mgf(&overlap_law(shape.n1, shape.k1), &overlap_law(shape.n2, shape.k2), m);
    let binom = match (
        dominating_binomial(shape.n1, shape.k1),
        dominating_binomial(shape.n2, shape.k2),
    ) {
        (Some(x), Some(y)) => ExtReal::from(product_mgf(&x, &y, m)),
        _ => ExtReal::Infinite,
    };
    Ok((hyper.max(1.0), binom))
}

/// `1 - sqrt(E0[L²] - 1) / 2`, clamped to `[0, 1]`.
pub fn risk_lower_bound(second_moment: f64) -> Result<f64> {
    if second_moment.is_nan() || second_moment < 1.0 - 1e-12 {
        return Err(Error::domain(format!(
            "second moment must be >= 1, got {second_moment}"
        )));
    }
    let excess = (second_moment - 1.0).max(0.0);
    Ok((1.0 - 0.5 * excess.sqrt()).clamp(0.0, 1.0))
}

pub fn second_moment(shape: &ProblemShape, p0: f64, delta: f64) -> Result<SecondMomentResult> {
    let exact = second_moment_exact(shape, p0, delta)?;
    let (exp_hypergeom, exp_binomial) = second_moment_exp_bounds(shape, p0, delta)?;
    Ok(SecondMomentResult {
        mu2: mu2(p0, delta)?,
        exact,
        exp_hypergeom,
        exp_binomial,
        risk_lb: risk_lower_bound(exact)?,
    })
}

/// `TV(P0, Pπ)` by enumerating all `2^{n1 n2}` matrices.
pub fn tv_exact(shape: &ProblemShape, p0: f64, delta: f64) -> Result<f64> {
    let cfg = SignalConfig::new(p0, delta)?;
    check_open_probability("p0", p0)?;
    let cells = shape.n1 * shape.n2;
    if cells > TV_MAX_CELLS {
        return Err(Error::Budget {
            what: "total variation matrix enumeration",
            required: 2f64.powi(cells as i32),
            budget: 2f64.powi(TV_MAX_CELLS as i32),
        });
    }
    let n2 = shape.n2;
    // supports as cell masks over bit index i * n2 + j
    let masks: Vec<u32> = Combinations::new(shape.n1, shape.k1)
        .flat_map(|rows| {
            Combinations::new(n2, shape.k2)
                .map(|cols| {
                    rows.iter()
                        .flat_map(|&i| cols.iter().map(move |&j| 1u32 << (i * n2 + j)))
                        .fold(0, |m, b| m | b)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let block = shape.k1 * shape.k2;
    let p1 = cfg.p1();
    let (on, off) = (p1 / p0, (1.0 - p1) / (1.0 - p0));
    // ratio[m] = on^m off^(block - m)
    let ratio: Vec<f64> = (0..=block)
        .map(|m| on.powi(m as i32) * off.powi((block - m) as i32))
        .collect();
    let (lp, lq) = (p0.ln(), (-p0).ln_1p());
    let count = masks.len() as f64;
    let half = 0.5
        * exec::chunked_sum(1u64 << cells, 4096, |a| {
            let a = a as u32;
            let ones = a.count_ones() as f64;
            let prob0 = (ones * lp + (cells as f64 - ones) * lq).exp();
            let lr: f64 = masks.iter().map(|&s| ratio[(a & s).count_ones() as usize]).sum::<f64>() / count;
            prob0 * (lr - 1.0).abs()
        });
    Ok(half.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn shape(n1: usize, n2: usize, k1: usize, k2: usize) -> ProblemShape {
        ProblemShape::new(n1, n2, k1, k2).unwrap()
    }

    #[test]
    fn zero_signal() {
        let s = shape(5, 4, 2, 3);
        assert_eq!(second_moment_exact(&s, 0.3, 0.0).unwrap(), 1.0);
        assert_eq!(second_moment_bruteforce(&s, 0.3, 0.0).unwrap(), 1.0);
        let (h, b) = second_moment_exp_bounds(&s, 0.3, 0.0).unwrap();
        assert_eq!(h, 1.0);
        assert_eq!(b, ExtReal::Infinite);
        let (h, b) = second_moment_exp_bounds(&shape(6, 6, 2, 2), 0.3, 0.0).unwrap();
        assert_eq!((h, b.to_f64()), (1.0, 1.0));
        assert_eq!(tv_exact(&shape(2, 2, 1, 1), 0.3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn two_by_two_example() {
        let s = shape(2, 2, 1, 1);
        let exact = second_moment_exact(&s, 0.25, 0.25).unwrap();
        assert_relative_eq!(exact, 13.0 / 12.0, max_relative = 1e-14);
        assert_relative_eq!(
            second_moment_bruteforce(&s, 0.25, 0.25).unwrap(),
            13.0 / 12.0,
            max_relative = 1e-14
        );
        let (h, b) = second_moment_exp_bounds(&s, 0.25, 0.25).unwrap();
        assert_relative_eq!(h, (3.0 + (1.0f64 / 3.0).exp()) / 4.0, max_relative = 1e-14);
        assert_relative_eq!(h, 1.098_903_106_, max_relative = 1e-9);
        assert_relative_eq!(b.to_f64(), 1.395_612_425_086_089_6, max_relative = 1e-14);
        assert!(exact <= h && h <= b.to_f64());
    }

    #[test]
    fn exact_matches_bruteforce() {
        let s = shape(6, 6, 2, 2);
        let a = second_moment_exact(&s, 0.25, 0.1).unwrap();
        let b = second_moment_bruteforce(&s, 0.25, 0.1).unwrap();
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }

    #[test]
    fn bruteforce_budget() {
        let err = second_moment_bruteforce(&shape(40, 40, 3, 3), 0.25, 0.1).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }

    #[test]
    fn risk_bound_values() {
        assert_eq!(risk_lower_bound(1.0).unwrap(), 1.0);
        assert_eq!(risk_lower_bound(2.0).unwrap(), 0.5);
        assert_relative_eq!(
            risk_lower_bound(13.0 / 12.0).unwrap(),
            0.855_662_432_702_593_6,
            max_relative = 1e-12
        );
        assert_eq!(risk_lower_bound(1.0 - 1e-13).unwrap(), 1.0);
        assert!(risk_lower_bound(0.99).is_err());
        assert_eq!(risk_lower_bound(100.0).unwrap(), 0.0);
    }

    #[test]
    fn single_edge_total_variation() {
        for (p0, d) in [(0.25, 0.25), (0.1, 0.7), (0.5, 0.01)] {
            assert_relative_eq!(tv_exact(&shape(1, 1, 1, 1), p0, d).unwrap(), d, max_relative = 1e-12);
        }
    }

    #[test]
    fn tv_budget() {
        assert!(matches!(
            tv_exact(&shape(3, 7, 1, 1), 0.2, 0.1),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn tv_is_thread_count_invariant() {
        let s = shape(4, 4, 2, 2);
        let a = exec::with_threads(1, || tv_exact(&s, 0.2, 0.3)).unwrap().unwrap();
        let b = exec::with_threads(5, || tv_exact(&s, 0.2, 0.3)).unwrap().unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn delta_range_is_checked() {
        assert!(second_moment_exact(&shape(3, 3, 1, 1), 0.8, 0.3).is_err());
        assert!(second_moment_exact(&shape(3, 3, 1, 1), 0.0, 0.3).is_err());
    }

    proptest! {
        #[test]
        fn chain_and_monotonicity(n1 in 1usize..9, n2 in 1usize..9, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0,
                                  p0 in 0.05f64..0.5, t in 0.0f64..1.0) {
            let k1 = 1 + ((n1 - 1) as f64 * f1) as usize;
            let k2 = 1 + ((n2 - 1) as f64 * f2) as usize;
            let s = shape(n1, n2, k1, k2);
            let d = t * (1.0 - p0);
            let e = second_moment_exact(&s, p0, d).unwrap();
            let (h, b) = second_moment_exp_bounds(&s, p0, d).unwrap();
            prop_assert!(1.0 <= e);
            prop_assert!(e <= h * (1.0 + 1e-12));
            prop_assert!(ExtReal::Finite(h * (1.0 - 1e-12)) <= b);
            let e2 = second_moment_exact(&s, p0, (d + 0.05).min(1.0 - p0)).unwrap();
            prop_assert!(e2 >= e * (1.0 - 1e-12));
        }
    }
}
