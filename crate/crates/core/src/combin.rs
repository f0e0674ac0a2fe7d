//! Lexicographic k-subsets of `0..n`.

/// Exact `C(n, k)`, or `None` on overflow of `u128`.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(acc)
}

/// `C(n, k)` as `f64`, saturating to infinity when it does not fit in `u128`.
pub fn binomial_f64(n: u64, k: u64) -> f64 {
    binomial(n, k).map_or(f64::INFINITY, |c| c as f64)
}

/// Streaming iterator over k-subsets in lexicographic order.
///
/// ```
/// use bicomm::combin::Combinations;
/// let mut it = Combinations::new(4, 2);
/// let mut all = Vec::new();
/// while let Some(c) = it.next_subset() {
///     all.push(c.to_vec());
/// }
/// assert_eq!(all.len(), 6);
/// assert_eq!(all[0], vec![0, 1]);
/// assert_eq!(all[5], vec![2, 3]);
/// ```
#[derive(Clone, Debug)]
pub struct Combinations {
    n: usize,
    current: Vec<usize>,
    started: bool,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            current: (0..k).collect(),
            started: false,
            done: k > n,
        }
    }

    /// Starts the iteration at an arbitrary subset (which is yielded first).
    pub fn starting_at(n: usize, subset: Vec<usize>) -> Self {
        debug_assert!(subset.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(subset.last().is_none_or(|&x| x < n));
        Combinations {
            n,
            current: subset,
            started: false,
            done: false,
        }
    }

    /// Advances and returns the next subset, or `None` when exhausted.
    pub fn next_subset(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.current);
        }
        if !advance(&mut self.current, self.n) {
            self.done = true;
            return None;
        }
        Some(&self.current)
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        self.next_subset().map(<[usize]>::to_vec)
    }
}

/// Steps `c` to its lexicographic successor; returns `false` at the last subset.
pub fn advance(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// The subset of lexicographic rank `rank` among all k-subsets of `0..n`.
///
/// Panics if `rank >= C(n, k)`.
pub fn unrank(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0usize;
    for slot in 0..k {
        let remaining = (k - slot - 1) as u64;
        loop {
            assert!(next < n, "rank out of range");
            let with_next = binomial((n - next - 1) as u64, remaining).expect("rank fits u128");
            if rank < with_next {
                break;
            }
            rank -= with_next;
            next += 1;
        }
        out.push(next);
        next += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(4, 2), Some(6));
        assert_eq!(binomial(100, 10), Some(17_310_309_456_440));
        assert_eq!(binomial(64, 8), Some(4_426_165_368));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(7, 0), Some(1));
    }

    #[test]
    fn enumerates_all_subsets_once() {
        let all: Vec<Vec<usize>> = Combinations::new(6, 3).collect();
        assert_eq!(all.len(), 20);
        for w in all.windows(2) {
            assert!(w[0] < w[1], "not lexicographic: {:?}", w);
        }
    }

    #[test]
    fn empty_and_full_subsets() {
        assert_eq!(Combinations::new(3, 0).count(), 1);
        assert_eq!(Combinations::new(3, 3).collect::<Vec<_>>(), vec![vec![0, 1, 2]]);
        assert_eq!(Combinations::new(2, 3).count(), 0);
    }

    proptest! {
        #[test]
        fn unrank_matches_iteration(n in 1usize..10, k_frac in 0.0f64..1.0) {
            let k = ((n as f64) * k_frac) as usize;
            for (rank, subset) in Combinations::new(n, k).enumerate() {
                prop_assert_eq!(unrank(n, k, rank as u128), subset);
            }
        }
    }
}
