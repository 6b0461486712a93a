//! State lumping for process matrices with permutation symmetry.
//!
//! A counting variable placed on one distinguished pair breaks the symmetry
//! between states with the same number of connected pairs. The in-set mixing
//! matrix restores it: mixing after every step keeps the state distribution
//! uniform inside each block, so the chain evolves on block totals alone. For
//! block-uniform distributions one step of `M_mix * M` has the same block
//! totals as `M * M_mix`, which is lumpable by construction; that product is
//! what [`lump_with_mixing`] reduces.

use crate::error::{Error, Result};
use crate::poly::CounterPoly;
use crate::process::CountedMatrix;

/// Coefficient tolerance used when comparing block sums.
pub const LUMP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(blocks: Vec<Vec<usize>>) -> Self {
        Self { blocks }
    }

    /// Every index in its own block.
    pub fn singletons(dim: usize) -> Self {
        Self::new((0..dim).map(|i| vec![i]).collect())
    }

    /// Blocks of the `2^q` parallel-pairs state space grouped by the number of
    /// connected pairs; block `j` holds the states with `j` pairs connected.
    pub fn by_connected_count(q: usize) -> Self {
        let mut blocks = vec![Vec::new(); q + 1];
        for s in 0..(1usize << q) {
            blocks[s.count_ones() as usize].push(s);
        }
        Self::new(blocks)
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Check disjointness, coverage, and that terminals are not mixed with
    /// non-terminals.
    pub fn validate(&self, m: &CountedMatrix) -> Result<()> {
        let mut seen = vec![false; m.dim()];
        for block in &self.blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            let term = m.is_terminal(block[0]);
            for &i in block {
                if i >= m.dim() {
                    return Err(Error::InvalidPartition(format!("index {i} out of range")));
                }
                if seen[i] {
                    return Err(Error::InvalidPartition(format!("index {i} repeated")));
                }
                seen[i] = true;
                if m.is_terminal(i) != term {
                    return Err(Error::InvalidPartition(
                        "block mixes terminal and non-terminal states".into(),
                    ));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("index {i} not covered")));
        }
        Ok(())
    }

    fn block_sums(&self, m: &CountedMatrix) -> Vec<Vec<CounterPoly>> {
        // sums[block][col] = sum over rows in block of m[row, col]
        let mut owner = vec![0; m.dim()];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                owner[i] = b;
            }
        }
        let mut sums = vec![vec![CounterPoly::zero(); m.dim()]; self.blocks.len()];
        for (i, j, p) in m.entries() {
            let slot = &mut sums[owner[i]][j];
            *slot = slot.add(p);
        }
        sums
    }
}

/// True when every column of a block sends the same polynomial mass into each
/// destination block.
pub fn check_lumpable(m: &CountedMatrix, part: &Partition) -> bool {
    if part.validate(m).is_err() {
        return false;
    }
    let sums = part.block_sums(m);
    sums.iter().all(|row| {
        part.blocks.iter().all(|block| {
            let first = &row[block[0]];
            block[1..].iter().all(|&j| row[j].approx_eq(first, LUMP_TOL))
        })
    })
}

/// Block-diagonal matrix with every entry of a size-`n` block equal to `1/n`.
pub fn mixing_matrix(part: &Partition, dim: usize) -> CountedMatrix {
    let mut m = CountedMatrix::new(dim, &[]);
    for block in &part.blocks {
        let w = 1.0 / block.len() as f64;
        for &i in block {
            for &j in block {
                m.set(i, j, CounterPoly::constant(w));
            }
        }
    }
    m
}

/// Reduce a lumpable matrix to one state per block. The block holding the
/// start state becomes the new start.
pub fn lump(m: &CountedMatrix, part: &Partition) -> Result<CountedMatrix> {
    part.validate(m)?;
    if !check_lumpable(m, part) {
        return Err(Error::NotLumpable);
    }
    let start = part
        .blocks
        .iter()
        .position(|b| b.contains(&0))
        .expect("validated partition covers 0");
    let mut order: Vec<usize> = (0..part.len()).collect();
    order.swap(0, start);
    let terminals: Vec<usize> = order
        .iter()
        .enumerate()
        .filter(|(_, &b)| m.is_terminal(part.blocks[b][0]))
        .map(|(k, _)| k)
        .collect();
    let mut out = CountedMatrix::new(part.len(), &terminals);
    for c in m.counters() {
        out.add_counter(c);
    }
    let sums = part.block_sums(m);
    for (new_i, &bi) in order.iter().enumerate() {
        for (new_j, &bj) in order.iter().enumerate() {
            let rep = part.blocks[bj][0];
            out.set(new_i, new_j, sums[bi][rep].clone());
        }
    }
    Ok(out)
}

/// Lump after averaging each column over its block, the reduction that
/// reproduces the block dynamics of mixing after every step.
pub fn lump_with_mixing(m: &CountedMatrix, part: &Partition) -> Result<CountedMatrix> {
    part.validate(m)?;
    let averaged = m.matmul(&mixing_matrix(part, m.dim()));
    lump(&averaged, part)
}

/// One mixed step `M_mix * M` on the full state space.
pub fn mixed_step_matrix(m: &CountedMatrix, part: &Partition) -> CountedMatrix {
    mixing_matrix(part, m.dim()).matmul(m).with_terminals(&m.terminals())
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Closed-form lumped matrix of `q` pairs connecting in parallel, state `j`
/// counting connected pairs, with counter `w` weighting a typical pair's
/// terminal hold. Entry `j -> i` is
/// `C(q-j, q-i) p^(i-j) (1-p)^(q-i) [q + (w-1) j] / q`.
pub fn lumped_section_matrix(q: usize, p: f64, w: &str) -> CountedMatrix {
    assert!(q >= 1, "need at least one pair");
    let mut m = CountedMatrix::new(q + 1, &[q]);
    let var = if q >= 2 { Some(m.add_counter(w)) } else { None };
    for j in 0..q {
        let hold = match var {
            Some(v) if j > 0 => CounterPoly::constant((q - j) as f64 / q as f64)
                .add(&CounterPoly::monomial(v, 1, j as f64 / q as f64)),
            _ => CounterPoly::constant(1.0),
        };
        for i in j..=q {
            let prob = binomial(q - j, q - i) * p.powi((i - j) as i32) * (1.0 - p).powi((q - i) as i32);
            if prob != 0.0 {
                m.set(i, j, hold.scale(prob));
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{compose_and, compose_and_held, pmf_series};

    fn bell(p: f64) -> CountedMatrix {
        CountedMatrix::from_dense(&[vec![1.0 - p, 0.0], vec![p, 0.0]], &[1])
    }

    fn parallel(q: usize, p: f64, counted: bool) -> CountedMatrix {
        let mut m = bell(p);
        for k in 1..q {
            m = if k == 1 && counted {
                compose_and_held(&m, &bell(p), Some("w"), None)
            } else {
                compose_and(&m, &bell(p))
            };
        }
        m
    }

    #[test]
    fn three_pairs_lumpable_without_counter() {
        let m = parallel(3, 0.4, false);
        assert!(check_lumpable(&m, &Partition::by_connected_count(3)));
    }

    #[test]
    fn counter_breaks_lumpability() {
        // Hold counter on the first pair only.
        let held = {
            let ab = compose_and(&bell(0.4), &bell(0.4));
            compose_and_held(&bell(0.4), &ab, Some("w"), None)
        };
        assert!(!check_lumpable(&held, &Partition::by_connected_count(3)));
        assert!(lump(&held, &Partition::by_connected_count(3)).is_err());
    }

    #[test]
    fn singleton_partition() {
        let m = parallel(2, 0.3, true);
        let part = Partition::singletons(m.dim());
        assert!(check_lumpable(&m, &part));
        let l = lump(&m, &part).unwrap();
        assert!(l.entries().eq(m.entries()));
        assert_eq!(l.terminals(), m.terminals());
        let mix = mixing_matrix(&part, m.dim());
        for i in 0..m.dim() {
            assert_eq!(mix.get(i, i).unwrap().constant_term(), 1.0);
        }
        assert_eq!(mix.nnz(), m.dim());
    }

    #[test]
    fn mixing_matrix_for_three_pairs() {
        let part = Partition::by_connected_count(3);
        let mix = mixing_matrix(&part, 8);
        assert_eq!(mix.get(0, 0).unwrap().constant_term(), 1.0);
        assert_eq!(mix.get(7, 7).unwrap().constant_term(), 1.0);
        for &(i, j) in &[(1, 2), (2, 4), (4, 1), (3, 5), (6, 3)] {
            assert!((mix.get(i, j).unwrap().constant_term() - 1.0 / 3.0).abs() < 1e-16);
        }
        assert!(mix.get(1, 3).is_none());
        for s in mix.column_sums() {
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_partitions() {
        let m = parallel(2, 0.3, false);
        let overlapping = Partition::new(vec![vec![0, 1], vec![1, 2], vec![3]]);
        assert!(overlapping.validate(&m).is_err());
        let mixed = Partition::new(vec![vec![0], vec![1, 2, 3]]);
        assert!(matches!(mixed.validate(&m), Err(Error::InvalidPartition(_))));
        let missing = Partition::new(vec![vec![0], vec![3]]);
        assert!(missing.validate(&m).is_err());
    }

    #[test]
    fn closed_form_entries_for_three_pairs() {
        let m = lumped_section_matrix(3, 0.5, "w");
        assert!((m.get(3, 0).unwrap().at_ones() - 0.125).abs() < 1e-15);
        // j = 1 -> i = 3: 0.25 (2 + w) / 3
        let e = m.get(3, 1).unwrap();
        assert!((e.eval_real(&[0.0]) - 0.25 * 2.0 / 3.0).abs() < 1e-15);
        assert!((e.eval_real(&[1.0]) - 0.25).abs() < 1e-15);
        m.validate().unwrap();
    }

    #[test]
    fn single_pair_section_has_no_counter() {
        let m = lumped_section_matrix(1, 0.3, "w");
        assert!(m.counters().is_empty());
        assert_eq!(m, bell(0.3));
    }

    #[test]
    fn mixed_lumping_reproduces_closed_form() {
        for q in 2..=4 {
            let ab = parallel(q - 1, 0.3, false);
            let held = compose_and_held(&bell(0.3), &ab, Some("w"), None);
            let part = Partition::by_connected_count(q);
            let lumped = lump_with_mixing(&held, &part).unwrap();
            let closed = lumped_section_matrix(q, 0.3, "w");
            assert_eq!(lumped.dim(), closed.dim());
            for i in 0..=q {
                for j in 0..=q {
                    let a = lumped.get(i, j).cloned().unwrap_or_default();
                    let b = closed.get(i, j).cloned().unwrap_or_default();
                    assert!(a.approx_eq(&b, 1e-14), "q={q} ({i},{j}): {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn mixed_step_keeps_terminals() {
        let m = parallel(2, 0.3, true);
        let step = mixed_step_matrix(&m, &Partition::by_connected_count(2));
        assert_eq!(step.terminals(), vec![3]);
        step.validate().unwrap();
    }

    #[test]
    fn lumped_pmf_matches_unlumped() {
        let full = parallel(3, 0.35, false);
        let lumped = lump(&full, &Partition::by_connected_count(3)).unwrap();
        let a = pmf_series(&full, 30);
        let b = pmf_series(&lumped, 30);
        for t in 0..=30 {
            assert!((a[t] - b[t]).abs() < 1e-12);
        }
    }
}
