use std::fmt;
use std::sync::{Arc, OnceLock};

use super::transform::FftPlans;
use crate::error::{Error, Result};

/// Grid-point budget used by [`make_basis`]; larger requests are rejected.
pub const DEFAULT_GRID_BUDGET: usize = 1 << 24;

/// A wave vector padded to three components (unused ones are zero).
pub type WaveVector = [i32; 3];

/// Planewave basis on the cell (0, 2π)^d: every wave vector k with |k| ≤ M,
/// together with the collocation grid used for products.
///
/// Cheap to clone; two bases compare equal when they share `d` and `M`.
#[derive(Clone)]
pub struct BasisSpec(Arc<BasisInner>);

struct BasisInner {
    dim: usize,
    cutoff: usize,
    grid: usize,
    modes: Vec<WaveVector>,
    norm2: Vec<f64>,
    grid_index: Vec<usize>,
    plans: OnceLock<FftPlans>,
}

/// Builds the basis for dimension `d` and cutoff `M` with the default grid budget.
///
/// The grid size is the smallest 5-smooth length N ≥ 4M + 2, so that products of
/// three cutoff-M fields project back onto the ball without aliasing.
pub fn make_basis(d: usize, m: usize) -> Result<BasisSpec> {
    BasisSpec::with_budget(d, m, DEFAULT_GRID_BUDGET)
}

impl BasisSpec {
    pub fn with_budget(d: usize, m: usize, budget: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        let grid = efficient_length(4 * m + 2);
        let points = grid
            .checked_pow(d as u32)
            .ok_or(Error::BasisTooLarge { points: usize::MAX, budget })?;
        if points > budget {
            return Err(Error::BasisTooLarge { points, budget });
        }
        let modes = enumerate_ball(d, m);
        let norm2 = modes.iter().map(|k| norm2(k) as f64).collect();
        let grid_index = modes.iter().map(|k| flat_index(k, d, grid)).collect();
        Ok(Self(Arc::new(BasisInner {
            dim: d,
            cutoff: m,
            grid,
            modes,
            norm2,
            grid_index,
            plans: OnceLock::new(),
        })))
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn cutoff(&self) -> usize {
        self.0.cutoff
    }

    /// Collocation points per axis.
    pub fn grid_size(&self) -> usize {
        self.0.grid
    }

    pub fn grid_points(&self) -> usize {
        self.0.grid.pow(self.0.dim as u32)
    }

    pub fn len(&self) -> usize {
        self.0.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.modes.is_empty()
    }

    /// Wave vectors in lexicographic order.
    pub fn modes(&self) -> &[WaveVector] {
        &self.0.modes
    }

    /// |k|² for every mode, in mode order.
    pub fn norm2(&self) -> &[f64] {
        &self.0.norm2
    }

    pub(crate) fn grid_index(&self) -> &[usize] {
        &self.0.grid_index
    }

    /// Position of −k for the mode at position `i`. The ball is symmetric and the
    /// order lexicographic, so negation reverses it.
    pub fn neg_index(&self, i: usize) -> usize {
        self.0.modes.len() - 1 - i
    }

    /// Position of the zero mode.
    pub fn zero_index(&self) -> usize {
        self.0.modes.len() / 2
    }

    pub fn index_of(&self, k: &WaveVector) -> Option<usize> {
        self.0.modes.binary_search(k).ok()
    }

    /// Sobolev weights (1 + |k|²)^s in mode order.
    pub fn weights(&self, s: f64) -> Vec<f64> {
        self.0.norm2.iter().map(|&k2| (1.0 + k2).powf(s)).collect()
    }

    pub(crate) fn plans(&self) -> &FftPlans {
        self.0.plans.get_or_init(|| FftPlans::new(self.0.grid))
    }

    pub fn same_as(&self, other: &BasisSpec) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.dim() == other.dim() && self.cutoff() == other.cutoff())
    }
}

impl PartialEq for BasisSpec {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl fmt::Debug for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasisSpec")
            .field("d", &self.dim())
            .field("M", &self.cutoff())
            .field("N", &self.grid_size())
            .field("modes", &self.len())
            .finish()
    }
}

fn norm2(k: &WaveVector) -> i64 {
    k.iter().map(|&c| (c as i64) * (c as i64)).sum()
}

fn enumerate_ball(d: usize, m: usize) -> Vec<WaveVector> {
    let m = m as i32;
    let r2 = (m as i64) * (m as i64);
    let range = |active: bool| if active { -m..=m } else { 0..=0 };
    let mut out = Vec::new();
    for k0 in -m..=m {
        for k1 in range(d >= 2) {
            for k2 in range(d >= 3) {
                let k = [k0, k1, k2];
                if norm2(&k) <= r2 {
                    out.push(k);
                }
            }
        }
    }
    out
}

fn flat_index(k: &WaveVector, d: usize, n: usize) -> usize {
    let n_i = n as i64;
    k[..d]
        .iter()
        .fold(0usize, |acc, &c| acc * n + (c as i64).rem_euclid(n_i) as usize)
}

/// Smallest integer ≥ `target` whose only prime factors are 2, 3 and 5.
pub fn efficient_length(target: usize) -> usize {
    let mut n = target.max(1);
    loop {
        let mut r = n;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return n;
        }
        n += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_count(d: usize, m: i32) -> usize {
        let mut count = 0;
        let r = if d >= 2 { m } else { 0 };
        let s = if d >= 3 { m } else { 0 };
        for a in -m..=m {
            for b in -r..=r {
                for c in -s..=s {
                    if a * a + b * b + c * c <= m * m {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn origin_only_at_zero_cutoff() {
        let b = make_basis(1, 0).unwrap();
        assert_eq!(b.modes(), &[[0, 0, 0]]);
        assert!(b.grid_size() >= 2);
    }

    #[test]
    fn one_dimensional_modes() {
        let b = make_basis(1, 4).unwrap();
        assert_eq!(b.len(), 9);
        let ks: Vec<i32> = b.modes().iter().map(|k| k[0]).collect();
        assert_eq!(ks, (-4..=4).collect::<Vec<_>>());
    }

    #[test]
    fn lattice_counts_match_enumeration() {
        assert_eq!(make_basis(2, 2).unwrap().len(), 13);
        for (d, m) in [(2, 5), (3, 3), (3, 4), (2, 9)] {
            assert_eq!(make_basis(d, m).unwrap().len(), brute_force_count(d, m as i32));
        }
    }

    #[test]
    fn grid_is_smooth_and_dealiased() {
        for m in 0..40 {
            let b = make_basis(1, m).unwrap();
            assert!(b.grid_size() >= 4 * m + 2);
            assert_eq!(efficient_length(b.grid_size()), b.grid_size());
        }
        assert_eq!(efficient_length(1026), 1080);
    }

    #[test]
    fn negation_reverses_order() {
        let b = make_basis(3, 3).unwrap();
        for (i, k) in b.modes().iter().enumerate() {
            let neg = [-k[0], -k[1], -k[2]];
            assert_eq!(b.modes()[b.neg_index(i)], neg);
        }
        assert_eq!(b.modes()[b.zero_index()], [0, 0, 0]);
    }

    #[test]
    fn rejects_bad_requests() {
        assert_eq!(make_basis(4, 2).unwrap_err(), Error::UnsupportedDimension(4));
        assert!(matches!(make_basis(3, 400), Err(Error::BasisTooLarge { .. })));
    }
}
