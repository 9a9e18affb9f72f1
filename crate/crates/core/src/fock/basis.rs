use std::collections::HashMap;

use crate::error::{Error, Result};

/// Hard cap on the number of basis states unless the caller raises it.
pub const DEFAULT_BASIS_LIMIT: usize = 250_000;

const NO_STATE: u32 = u32::MAX;

/// Truncated bosonic occupation basis over `mode_count` modes.
///
/// States satisfy `Σ n_m ≤ n_max` and `n_m ≤ c_max`, ordered by total
/// occupation and then in descending lexicographic order, so state 0 is the
/// vacuum and `(1,0)` precedes `(0,1)`.
#[derive(Debug, Clone)]
pub struct FockBasis {
    mode_count: usize,
    n_max: usize,
    c_max: usize,
    occ: Vec<u8>,
    index: HashMap<Box<[u8]>, usize>,
    // raise[s * M + m] = index of s + e_m, or NO_STATE when it leaves the basis.
    raise: Vec<u32>,
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.mode_count == other.mode_count
            && self.n_max == other.n_max
            && self.c_max == other.c_max
    }
}

impl FockBasis {
    pub fn new(mode_count: usize, n_max: usize, c_max: usize) -> Result<Self> {
        Self::with_limit(mode_count, n_max, c_max, DEFAULT_BASIS_LIMIT)
    }

    pub fn with_limit(mode_count: usize, n_max: usize, c_max: usize, limit: usize) -> Result<Self> {
        if c_max == 0 {
            return Err(Error::Parameter("c_max must be at least 1".into()));
        }
        if c_max > u8::MAX as usize {
            return Err(Error::Parameter("c_max must fit in a byte".into()));
        }
        let size = count_states(mode_count, n_max, c_max, limit);
        if size > limit {
            return Err(Error::Resource { size, limit });
        }

        let mut occ = Vec::with_capacity(size * mode_count);
        let mut current = vec![0u8; mode_count];
        for total in 0..=n_max {
            fill(&mut occ, &mut current, 0, total, c_max);
        }
        let states = occ.len() / mode_count.max(1);
        let states = if mode_count == 0 { 1 } else { states };

        let mut index = HashMap::with_capacity(states);
        for s in 0..states {
            let key: Box<[u8]> = occ[s * mode_count..(s + 1) * mode_count].into();
            index.insert(key, s);
        }

        let mut raise = vec![NO_STATE; states * mode_count];
        let mut scratch = vec![0u8; mode_count];
        for s in 0..states {
            let n = &occ[s * mode_count..(s + 1) * mode_count];
            let total: usize = n.iter().map(|&v| v as usize).sum();
            if total >= n_max {
                continue;
            }
            scratch.copy_from_slice(n);
            for m in 0..mode_count {
                if (scratch[m] as usize) < c_max {
                    scratch[m] += 1;
                    raise[s * mode_count + m] = index[&scratch[..]] as u32;
                    scratch[m] -= 1;
                }
            }
        }

        Ok(Self {
            mode_count,
            n_max,
            c_max,
            occ,
            index,
            raise,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn c_max(&self) -> usize {
        self.c_max
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn occupation(&self, s: usize) -> &[u8] {
        &self.occ[s * self.mode_count..(s + 1) * self.mode_count]
    }

    pub fn total(&self, s: usize) -> usize {
        self.occupation(s).iter().map(|&v| v as usize).sum()
    }

    pub fn index_of(&self, n: &[u8]) -> Option<usize> {
        self.index.get(n).copied()
    }

    /// Index of `s + e_m`, if that state is in the basis.
    #[inline]
    pub fn raised(&self, s: usize, m: usize) -> Option<usize> {
        let t = self.raise[s * self.mode_count + m];
        (t != NO_STATE).then_some(t as usize)
    }

    /// True when some creation operator maps `s` outside the truncation.
    pub fn at_cap(&self, s: usize, m: usize) -> bool {
        self.raised(s, m).is_none()
    }

    pub fn vacuum(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        v[0] = 1.0;
        v
    }

    /// States with no photons in modes `mode_limit..`.
    pub fn sector(&self, mode_limit: usize) -> Sector {
        let limit = mode_limit.min(self.mode_count);
        let indices: Vec<usize> = (0..self.len())
            .filter(|&s| self.occupation(s)[limit..].iter().all(|&v| v == 0))
            .collect();
        Sector::new(indices, self.len(), limit)
    }
}

fn fill(out: &mut Vec<u8>, current: &mut [u8], pos: usize, remaining: usize, c_max: usize) {
    if pos == current.len() {
        if remaining == 0 {
            out.extend_from_slice(current);
        }
        return;
    }
    let left = current.len() - pos - 1;
    let hi = remaining.min(c_max);
    for v in (0..=hi).rev() {
        if remaining - v > left * c_max {
            break;
        }
        current[pos] = v as u8;
        fill(out, current, pos + 1, remaining - v, c_max);
    }
    current[pos] = 0;
}

/// Number of occupation vectors with the given caps; saturates above `limit`.
pub fn count_states(mode_count: usize, n_max: usize, c_max: usize, limit: usize) -> usize {
    // ways[t] = number of vectors over the modes seen so far with total t.
    let mut ways = vec![0usize; n_max + 1];
    ways[0] = 1;
    for _ in 0..mode_count {
        let mut next = vec![0usize; n_max + 1];
        for (t, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for c in 0..=c_max.min(n_max - t) {
                next[t + c] = next[t + c].saturating_add(w).min(limit.saturating_add(1));
            }
        }
        ways = next;
    }
    ways.iter().fold(0usize, |a, &b| a.saturating_add(b))
}

/// An invariant subspace spanned by a subset of basis states, together with
/// the index maps needed to move vectors and operators in and out of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    indices: Vec<usize>,
    position: Vec<Option<usize>>,
    mode_limit: usize,
}

impl Sector {
    pub(crate) fn new(indices: Vec<usize>, full_dim: usize, mode_limit: usize) -> Self {
        let mut position = vec![None; full_dim];
        for (p, &s) in indices.iter().enumerate() {
            position[s] = Some(p);
        }
        Self {
            indices,
            position,
            mode_limit,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn mode_limit(&self) -> usize {
        self.mode_limit
    }

    pub fn position(&self, full_index: usize) -> Option<usize> {
        self.position[full_index]
    }

    pub fn full_dim(&self) -> usize {
        self.position.len()
    }

    pub fn extract(&self, full: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&s| full[s]).collect()
    }

    pub fn embed(&self, part: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.full_dim()];
        for (&s, &v) in self.indices.iter().zip(part) {
            out[s] = v;
        }
        out
    }

    /// Norm of the part of `full` lying outside the sector.
    pub fn leakage(&self, full: &[f64]) -> f64 {
        full.iter()
            .enumerate()
            .filter(|(s, _)| self.position[*s].is_none())
            .map(|(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_modes_single_photon() {
        let b = FockBasis::new(2, 1, 1).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b.occupation(0), &[0, 0]);
        assert_eq!(b.occupation(1), &[1, 0]);
        assert_eq!(b.occupation(2), &[0, 1]);
    }

    #[test]
    fn two_modes_two_photons() {
        let b = FockBasis::new(2, 2, 2).unwrap();
        assert_eq!(b.len(), 6);
        assert_eq!(b.occupation(3), &[2, 0]);
        assert_eq!(b.occupation(4), &[1, 1]);
        assert_eq!(b.occupation(5), &[0, 2]);
    }

    fn brute_force_count(m: usize, n_max: usize, c_max: usize) -> usize {
        // Odometer over all (c_max+1)^m vectors.
        let mut n = vec![0usize; m];
        let mut count = 0;
        loop {
            if n.iter().sum::<usize>() <= n_max {
                count += 1;
            }
            let mut i = 0;
            loop {
                if i == m {
                    return count;
                }
                n[i] += 1;
                if n[i] <= c_max {
                    break;
                }
                n[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn twelve_modes_matches_brute_force() {
        let b = FockBasis::new(12, 2, 2).unwrap();
        assert_eq!(brute_force_count(12, 2, 2), 91);
        assert_eq!(b.len(), 91);
    }

    #[test]
    fn counts_match_brute_force_with_caps() {
        for &(m, n, c) in &[(3, 3, 1), (4, 3, 2), (5, 4, 3), (2, 5, 2), (0, 3, 1)] {
            let b = FockBasis::new(m, n, c).unwrap();
            assert_eq!(b.len(), brute_force_count(m, n, c), "({m},{n},{c})");
            assert_eq!(count_states(m, n, c, usize::MAX), b.len());
        }
    }

    #[test]
    fn enumeration_is_unique_and_graded() {
        let b = FockBasis::new(5, 3, 2).unwrap();
        let mut last_total = 0;
        for s in 0..b.len() {
            let t = b.total(s);
            assert!(t >= last_total);
            last_total = t;
            assert_eq!(b.index_of(b.occupation(s)), Some(s));
        }
    }

    #[test]
    fn resource_limit_enforced() {
        let err = FockBasis::with_limit(40, 3, 3, 1000).unwrap_err();
        assert!(matches!(err, Error::Resource { limit: 1000, .. }));
    }

    #[test]
    fn raise_table_respects_caps() {
        let b = FockBasis::new(2, 2, 1).unwrap();
        let one = b.index_of(&[1, 0]).unwrap();
        assert_eq!(b.raised(one, 0), None);
        assert_eq!(b.raised(one, 1), b.index_of(&[1, 1]));
        let both = b.index_of(&[1, 1]).unwrap();
        assert_eq!(b.raised(both, 0), None);
    }

    #[test]
    fn sector_round_trip() {
        let b = FockBasis::new(4, 2, 2).unwrap();
        let sec = b.sector(2);
        assert_eq!(sec.len(), 6);
        let v: Vec<f64> = (0..b.len()).map(|i| i as f64).collect();
        let part = sec.extract(&v);
        let back = sec.embed(&part);
        for &s in sec.indices() {
            assert_eq!(back[s], v[s]);
        }
        assert!(sec.leakage(&back) == 0.0);
    }

    #[test]
    fn sector_order_matches_prefix_basis() {
        let full = FockBasis::new(6, 3, 2).unwrap();
        for limit in 0..=6 {
            let sub = FockBasis::new(limit, 3, 2).unwrap();
            let sec = full.sector(limit);
            assert_eq!(sec.len(), sub.len());
            for (p, &s) in sec.indices().iter().enumerate() {
                assert_eq!(&full.occupation(s)[..limit], sub.occupation(p));
            }
        }
    }
}
