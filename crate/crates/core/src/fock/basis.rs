//! Occupation-number basis of the truncated Fock space.
//!
//! A basis state with `d` bosons is a non-decreasing list of `d` mode
//! indices. States are ordered by boson number and, inside a sector, by the
//! colexicographic rank of the strictly increasing sequence `a_i + i`
//! (stars and bars), which makes ranking a short sum of binomials.

use super::FockError;

/// Largest basis accepted.
pub const MAX_DIMENSION: u64 = 5_000_000;

fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncatedFockSpace {
    n_modes: usize,
    n_max: usize,
    /// Index of the first state of each boson-number sector, plus the total.
    offsets: Vec<usize>,
    /// `binomials[i][n] = C(n, i)` for `i ≤ n_max`, `n < n_modes + n_max`.
    binomials: Vec<Vec<u64>>,
}

impl TruncatedFockSpace {
    pub fn new(n_modes: usize, n_max: usize) -> Result<Self, FockError> {
        if n_modes == 0 || n_max == 0 {
            return Err(FockError::Config("need at least one mode and n_max >= 1".into()));
        }
        let mut offsets = vec![0usize];
        let mut total: u128 = 0;
        for d in 0..=n_max as u64 {
            total += binom(n_modes as u64 + d - 1, d);
            if total > MAX_DIMENSION as u128 {
                return Err(FockError::Config(format!(
                    "basis with {n_modes} modes and n_max = {n_max} exceeds {MAX_DIMENSION} states"
                )));
            }
            offsets.push(total as usize);
        }
        let top = n_modes + n_max;
        let binomials = (0..=n_max)
            .map(|i| (0..top).map(|n| binom(n as u64, i as u64) as u64).collect())
            .collect();
        Ok(Self {
            n_modes,
            n_max,
            offsets,
            binomials,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dimension(&self) -> usize {
        self.offsets[self.n_max + 1]
    }

    /// Boson number of the state at `index`.
    pub fn sector_of(&self, index: usize) -> usize {
        self.offsets.partition_point(|&o| o <= index) - 1
    }

    /// Index of the state given by its sorted mode list.
    pub fn rank(&self, modes: &[u32]) -> usize {
        let d = modes.len();
        debug_assert!(d <= self.n_max);
        debug_assert!(modes.windows(2).all(|w| w[0] <= w[1]));
        let inner: u64 = modes
            .iter()
            .enumerate()
            .map(|(i, &a)| self.binomials[i + 1][a as usize + i])
            .sum();
        self.offsets[d] + inner as usize
    }

    /// Sorted mode list of the state at `index`.
    pub fn unrank(&self, index: usize) -> Vec<u32> {
        let d = self.sector_of(index);
        let mut r = (index - self.offsets[d]) as u64;
        let mut out = vec![0u32; d];
        for i in (1..=d).rev() {
            // largest b with C(b, i) <= r
            let row = &self.binomials[i];
            let b = row.partition_point(|&c| c <= r) - 1;
            r -= row[b];
            out[i - 1] = (b - (i - 1)) as u32;
        }
        out
    }
}
