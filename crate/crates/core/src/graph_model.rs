//! Problem geometry and the null / planted samplers.
//!
//! Every cell `(i, j)` of a sampled matrix is decided by one uniform variate
//! read from a counter-based stream keyed on `(seed, row = i, position = j)`.
//! Two matrices sampled with the same seed but different signal strengths
//! therefore share their variates, and the stronger one dominates entrywise.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::AdjacencyMatrix;
use crate::rng::{self, tag};

/// Dimensions `(n1, n2)` of the observed matrix and `(k1, k2)` of the planted block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawShape")]
pub struct ProblemShape {
    pub n1: usize,
    pub n2: usize,
    pub k1: usize,
    pub k2: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShape {
    n1: usize,
    n2: usize,
    k1: usize,
    k2: usize,
}

impl TryFrom<RawShape> for ProblemShape {
    type Error = Error;

    fn try_from(r: RawShape) -> Result<Self> {
        ProblemShape::new(r.n1, r.n2, r.k1, r.k2)
    }
}

impl ProblemShape {
    pub fn new(n1: usize, n2: usize, k1: usize, k2: usize) -> Result<Self> {
        if k1 == 0 || k2 == 0 || k1 > n1 || k2 > n2 {
            return Err(Error::param(format!(
                "shape requires 1 <= k1 <= n1 and 1 <= k2 <= n2, got n1={n1} n2={n2} k1={k1} k2={k2}"
            )));
        }
        Ok(ProblemShape { n1, n2, k1, k2 })
    }

    /// The same problem with the two vertex sets exchanged.
    pub fn swapped(self) -> Self {
        ProblemShape {
            n1: self.n2,
            n2: self.n1,
            k1: self.k2,
            k2: self.k1,
        }
    }
}

impl std::fmt::Display for ProblemShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n1={} n2={} k1={} k2={}", self.n1, self.n2, self.k1, self.k2)
    }
}

/// Row set `K1` and column set `K2` of the planted block, both sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlantedSupport {
    left: Vec<usize>,
    right: Vec<usize>,
}

impl PlantedSupport {
    pub fn new(shape: &ProblemShape, left: Vec<usize>, right: Vec<usize>) -> Result<Self> {
        check_index_set("K1", &left, shape.k1, shape.n1)?;
        check_index_set("K2", &right, shape.k2, shape.n2)?;
        Ok(PlantedSupport { left, right })
    }

    pub fn left(&self) -> &[usize] {
        &self.left
    }

    pub fn right(&self) -> &[usize] {
        &self.right
    }

    /// Membership mask over the columns, useful for per-cell lookups.
    fn right_mask(&self, n2: usize) -> Vec<bool> {
        let mut mask = vec![false; n2];
        for &j in &self.right {
            mask[j] = true;
        }
        mask
    }
}

fn check_index_set(name: &str, set: &[usize], k: usize, n: usize) -> Result<()> {
    if set.len() != k {
        return Err(Error::param(format!("{name} has {} indices, expected {k}", set.len())));
    }
    if let Some(&bad) = set.iter().find(|&&x| x >= n) {
        return Err(Error::param(format!("{name} index {bad} out of range 0..{n}")));
    }
    if !set.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::param(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

/// Baseline probability `p0` and elevation `delta` on the planted block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalConfig {
    pub p0: f64,
    pub delta: f64,
}

impl SignalConfig {
    /// Accepts `p0 ∈ [0, 1]` and `0 <= delta <= 1 - p0`; the degenerate
    /// endpoints are allowed for sampling.
    pub fn new(p0: f64, delta: f64) -> Result<Self> {
        check_probability("p0", p0)?;
        if !(delta >= 0.0 && p0 + delta <= 1.0 + 1e-12) {
            return Err(Error::param(format!(
                "delta must satisfy 0 <= delta <= 1 - p0, got p0={p0} delta={delta}"
            )));
        }
        Ok(SignalConfig { p0, delta })
    }

    pub fn p1(&self) -> f64 {
        (self.p0 + self.delta).min(1.0)
    }
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must lie in [0, 1], got {p}")))
    }
}

pub(crate) fn check_open_probability(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must lie in (0, 1), got {p}")))
    }
}

/// Fills a matrix from per-cell uniforms: cell `(i, j)` is set when its
/// variate is below `prob(i, j)`.
fn sample_cells(
    n1: usize,
    n2: usize,
    seed: u64,
    mut prob_row: impl FnMut(usize) -> (f64, Option<f64>),
    on_support: impl Fn(usize) -> bool,
) -> AdjacencyMatrix {
    let mut m = AdjacencyMatrix::zeros(n1, n2);
    for i in 0..n1 {
        let (p_off, p_on) = prob_row(i);
        let mut stream = rng::stream(seed, i as u64);
        let words = m.row_words_mut(i);
        for j in 0..n2 {
            let u = rng::unit_f64(stream.next_u64());
            let p = match p_on {
                Some(p) if on_support(j) => p,
                _ => p_off,
            };
            if u < p {
                words[j / 64] |= 1u64 << (j % 64);
            }
        }
    }
    m
}

/// Bipartite Erdős–Rényi(p0) matrix.
pub fn sample_null(shape: &ProblemShape, p0: f64, seed: u64) -> Result<AdjacencyMatrix> {
    check_probability("p0", p0)?;
    Ok(sample_cells(shape.n1, shape.n2, seed, |_| (p0, None), |_| false))
}

/// Planted matrix with `P_ij = p0 + delta` on `K1 × K2` and `p0` elsewhere.
pub fn sample_planted(
    shape: &ProblemShape,
    cfg: &SignalConfig,
    support: &PlantedSupport,
    seed: u64,
) -> Result<AdjacencyMatrix> {
    let support = PlantedSupport::new(shape, support.left.clone(), support.right.clone())?;
    let cfg = SignalConfig::new(cfg.p0, cfg.delta)?;
    let mut left_mask = vec![false; shape.n1];
    for &i in support.left() {
        left_mask[i] = true;
    }
    let right_mask = support.right_mask(shape.n2);
    let p1 = cfg.p1();
    Ok(sample_cells(
        shape.n1,
        shape.n2,
        seed,
        |i| (cfg.p0, left_mask[i].then_some(p1)),
        |j| right_mask[j],
    ))
}

/// A uniformly random `k`-subset of `0..n`, sorted.
fn uniform_subset(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    let (chosen, _) = idx.partial_shuffle(&mut rng, k);
    let mut out = chosen.to_vec();
    out.sort_unstable();
    out
}

/// Independent uniform supports `K1 ∈ P_k1(n1)`, `K2 ∈ P_k2(n2)`.
pub fn sample_uniform_support(shape: &ProblemShape, seed: u64) -> PlantedSupport {
    PlantedSupport {
        left: uniform_subset(shape.n1, shape.k1, rng::derive_seed(seed, tag::SUPPORT_LEFT, 0)),
        right: uniform_subset(shape.n2, shape.k2, rng::derive_seed(seed, tag::SUPPORT_RIGHT, 0)),
    }
}

/// Draws a support uniformly, then a planted matrix on it.
///
/// Support and edge variates come from separate streams derived from `seed`,
/// so for a fixed seed the support does not depend on `cfg`.
pub fn sample_planted_uniform_support(
    shape: &ProblemShape,
    cfg: &SignalConfig,
    seed: u64,
) -> Result<(AdjacencyMatrix, PlantedSupport)> {
    let support = sample_uniform_support(shape, seed);
    let a = sample_planted(shape, cfg, &support, rng::derive_seed(seed, tag::EDGES, 0))?;
    Ok((a, support))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn shape(n1: usize, n2: usize, k1: usize, k2: usize) -> ProblemShape {
        ProblemShape::new(n1, n2, k1, k2).unwrap()
    }

    #[test]
    fn shape_validation() {
        assert!(ProblemShape::new(3, 3, 0, 1).is_err());
        assert!(ProblemShape::new(3, 3, 4, 1).is_err());
        assert!(ProblemShape::new(3, 3, 3, 3).is_ok());
        let s: std::result::Result<ProblemShape, _> = serde_json::from_str(r#"{"n1":2,"n2":2,"k1":3,"k2":1}"#);
        assert!(s.is_err());
    }

    #[test]
    fn support_validation() {
        let s = shape(4, 4, 2, 1);
        assert!(PlantedSupport::new(&s, vec![0, 3], vec![2]).is_ok());
        assert!(PlantedSupport::new(&s, vec![3, 0], vec![2]).is_err());
        assert!(PlantedSupport::new(&s, vec![0, 4], vec![2]).is_err());
        assert!(PlantedSupport::new(&s, vec![0], vec![2]).is_err());
    }

    #[test]
    fn signal_validation() {
        assert!(SignalConfig::new(0.25, 0.75).is_ok());
        assert!(SignalConfig::new(0.25, 0.8).is_err());
        assert!(SignalConfig::new(-0.1, 0.0).is_err());
        assert!(SignalConfig::new(0.5, -0.1).is_err());
    }

    #[test]
    fn degenerate_null_probabilities() {
        let s = shape(3, 3, 1, 1);
        assert_eq!(sample_null(&s, 0.0, 7).unwrap(), AdjacencyMatrix::zeros(3, 3));
        assert_eq!(sample_null(&s, 1.0, 7).unwrap(), AdjacencyMatrix::ones(3, 3));
        assert!(sample_null(&s, 1.5, 7).is_err());
    }

    #[test]
    fn null_edge_frequency() {
        let s = shape(64, 64, 1, 1);
        let a = sample_null(&s, 0.25, 1).unwrap();
        let mean = a.count_ones() as f64 / 4096.0;
        let se = (0.25f64 * 0.75 / 4096.0).sqrt();
        assert!((mean - 0.25).abs() <= 4.0 * se, "mean {mean}");
    }

    #[test]
    fn deterministic_block() {
        let s = shape(2, 2, 1, 1);
        let cfg = SignalConfig::new(0.0, 1.0).unwrap();
        let sup = PlantedSupport::new(&s, vec![0], vec![0]).unwrap();
        let a = sample_planted(&s, &cfg, &sup, 3).unwrap();
        assert_eq!(a, AdjacencyMatrix::from_rows(&[[1u8, 0], [0, 0]]).unwrap());
    }

    #[test]
    fn zero_signal_reproduces_null_draw() {
        let s = shape(10, 12, 3, 4);
        let cfg = SignalConfig::new(0.3, 0.0).unwrap();
        let sup = sample_uniform_support(&s, 5);
        assert_eq!(
            sample_planted(&s, &cfg, &sup, 11).unwrap(),
            sample_null(&s, 0.3, 11).unwrap()
        );
    }

    #[test]
    fn planted_block_frequency() {
        let s = shape(64, 64, 16, 16);
        let cfg = SignalConfig::new(0.25, 0.2).unwrap();
        let sup = sample_uniform_support(&s, 2);
        let a = sample_planted(&s, &cfg, &sup, 9).unwrap();
        let on: u32 = sup
            .left()
            .iter()
            .flat_map(|&i| sup.right().iter().map(move |&j| (i, j)))
            .map(|(i, j)| u32::from(a.get(i, j)))
            .sum();
        let mean = f64::from(on) / 256.0;
        let se = (0.45f64 * 0.55 / 256.0).sqrt();
        assert!((mean - 0.45).abs() <= 4.0 * se, "mean {mean}");
    }

    #[test]
    fn full_support_is_forced() {
        let s = shape(5, 3, 5, 3);
        for seed in 0..20 {
            let sup = sample_uniform_support(&s, seed);
            assert_eq!(sup.left(), &[0, 1, 2, 3, 4]);
            assert_eq!(sup.right(), &[0, 1, 2]);
        }
    }

    #[test]
    fn single_index_support_is_uniform() {
        let s = shape(4, 1, 1, 1);
        let draws = 40_000u64;
        let mut counts = [0u64; 4];
        for seed in 0..draws {
            counts[sample_uniform_support(&s, seed).left()[0]] += 1;
        }
        let se = (0.25f64 * 0.75 / draws as f64).sqrt();
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((f - 0.25).abs() <= 4.0 * se, "freq {f}");
        }
    }

    #[test]
    fn pair_support_is_uniform_over_all_six() {
        let s = shape(4, 1, 2, 1);
        let draws = 60_000u64;
        let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
        for seed in 0..draws {
            *counts
                .entry(sample_uniform_support(&s, seed).left().to_vec())
                .or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let p = 1.0 / 6.0;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for (k, c) in counts {
            let f = c as f64 / draws as f64;
            assert!((f - p).abs() <= 4.0 * se, "{k:?}: {f}");
        }
    }

    #[test]
    fn stronger_signal_dominates_entrywise() {
        let s = shape(20, 30, 6, 9);
        for seed in 0..25 {
            let weak = SignalConfig::new(0.2, 0.1).unwrap();
            let strong = SignalConfig::new(0.2, 0.35).unwrap();
            let (a, sa) = sample_planted_uniform_support(&s, &weak, seed).unwrap();
            let (b, sb) = sample_planted_uniform_support(&s, &strong, seed).unwrap();
            assert_eq!(sa, sb);
            assert!(a.dominated_by(&b));
        }
    }
}
