//! Multi-layer networks with multivariate binary edges and cell masks.
//!
//! Every unordered pair `i < j` carries an `m_ij × K` block of binary
//! topic indicators, one row per document. Pairs that never exchanged a
//! document hold a single all-zero row so that they still contribute to the
//! likelihood.
//!
//! Cells `(i, j, l, k)` are laid out pair-major (pairs in row-major `i < j`
//! order, then document `l`, then topic `k`), which gives every cell a
//! stable linear index used by [`ObservationMask`].

use crate::error::{PlsmError, Result};

/// One `(i, j, l, k)` likelihood cell, `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
    pub l: usize,
    pub k: usize,
}

/// Index of the unordered pair `(i, j)`, `i < j < n`, in row-major order.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

#[inline]
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiEdgeNetwork {
    n: usize,
    k: usize,
    /// Row-major `m_ij × K` blocks, one per pair.
    blocks: Vec<Box<[u8]>>,
    /// Cumulative cell counts; `cell_offsets[p]` is the first cell of pair `p`.
    cell_offsets: Vec<usize>,
}

impl MultiEdgeNetwork {
    /// Network in which every pair holds a single all-zero row.
    pub fn empty(n: usize, k: usize) -> Result<Self> {
        NetworkBuilder::new(n, k)?.build()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_topics(&self) -> usize {
        self.k
    }

    pub fn n_pairs(&self) -> usize {
        self.blocks.len()
    }

    pub fn cell_count(&self) -> usize {
        *self.cell_offsets.last().unwrap_or(&0)
    }

    /// Documents stored for pair `(i, j)`; order of `i` and `j` is irrelevant.
    pub fn docs(&self, i: usize, j: usize) -> Result<usize> {
        let p = self.checked_pair(i, j)?;
        Ok(self.blocks[p].len() / self.k)
    }

    /// The `m_ij × K` block for a pair, row-major.
    pub fn block(&self, i: usize, j: usize) -> Result<&[u8]> {
        let p = self.checked_pair(i, j)?;
        Ok(&self.blocks[p])
    }

    pub(crate) fn block_at(&self, p: usize) -> &[u8] {
        &self.blocks[p]
    }

    pub(crate) fn docs_at(&self, p: usize) -> usize {
        self.blocks[p].len() / self.k
    }

    pub fn y(&self, cell: Cell) -> Result<u8> {
        let idx = self.cell_index(cell)?;
        let p = self.pair_index_of(cell.i, cell.j);
        Ok(self.blocks[p][idx - self.cell_offsets[p]])
    }

    /// All pairs `(i, j)` with `i < j` in storage order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
    }

    pub fn cell_index(&self, cell: Cell) -> Result<usize> {
        let Cell { i, j, l, k } = cell;
        let p = self.checked_pair(i, j)?;
        if k >= self.k {
            return Err(PlsmError::Index {
                what: "topic",
                index: k,
                bound: self.k,
            });
        }
        let m = self.docs_at(p);
        if l >= m {
            return Err(PlsmError::Index {
                what: "document",
                index: l,
                bound: m,
            });
        }
        Ok(self.cell_offsets[p] + l * self.k + k)
    }

    /// Inverse of [`cell_index`](Self::cell_index).
    pub fn cell_at(&self, idx: usize) -> Result<Cell> {
        if idx >= self.cell_count() {
            return Err(PlsmError::Index {
                what: "cell",
                index: idx,
                bound: self.cell_count(),
            });
        }
        let p = self.cell_offsets.partition_point(|&o| o <= idx) - 1;
        let (i, j) = self.pair_from_index(p);
        let off = idx - self.cell_offsets[p];
        Ok(Cell {
            i,
            j,
            l: off / self.k,
            k: off % self.k,
        })
    }

    pub fn cells(&self) -> impl Iterator<Item = (Cell, u8)> + '_ {
        self.pairs().enumerate().flat_map(move |(p, (i, j))| {
            let k_count = self.k;
            self.blocks[p].iter().enumerate().map(move |(off, &y)| {
                (
                    Cell {
                        i,
                        j,
                        l: off / k_count,
                        k: off % k_count,
                    },
                    y,
                )
            })
        })
    }

    /// Fraction of ones over all cells.
    pub fn density(&self) -> f64 {
        let total = self.cell_count();
        if total == 0 {
            return 0.0;
        }
        let ones: usize = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|&y| y as usize).sum::<usize>())
            .sum();
        ones as f64 / total as f64
    }

    fn pair_index_of(&self, i: usize, j: usize) -> usize {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        pair_index(self.n, lo, hi)
    }

    fn checked_pair(&self, i: usize, j: usize) -> Result<usize> {
        for v in [i, j] {
            if v >= self.n {
                return Err(PlsmError::Index {
                    what: "node",
                    index: v,
                    bound: self.n,
                });
            }
        }
        if i == j {
            return Err(PlsmError::arg(format!("self-pair ({i}, {i}) is not modeled")));
        }
        Ok(self.pair_index_of(i, j))
    }

    pub(crate) fn pair_from_index(&self, p: usize) -> (usize, usize) {
        // Smallest i whose pair range ends beyond p.
        let n = self.n;
        let mut lo = 0usize;
        let mut hi = n - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let end = pair_index(n, mid, n - 1) + 1;
            if end <= p {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let i = lo;
        let start = pair_index(n, i, i + 1);
        (i, i + 1 + (p - start))
    }
}

/// Incremental construction of a [`MultiEdgeNetwork`].
#[derive(Debug)]
pub struct NetworkBuilder {
    n: usize,
    k: usize,
    blocks: Vec<Option<Box<[u8]>>>,
}

impl NetworkBuilder {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(PlsmError::arg("a network needs at least 2 nodes"));
        }
        if k == 0 {
            return Err(PlsmError::arg("a network needs at least 1 topic"));
        }
        Ok(Self {
            n,
            k,
            blocks: vec![None; pair_count(n)],
        })
    }

    /// Sets the document rows for pair `(i, j)`. `rows` is row-major with a
    /// length that is a positive multiple of `K`.
    pub fn pair(&mut self, i: usize, j: usize, rows: Vec<u8>) -> Result<&mut Self> {
        if i >= self.n || j >= self.n {
            return Err(PlsmError::Index {
                what: "node",
                index: i.max(j),
                bound: self.n,
            });
        }
        if i == j {
            return Err(PlsmError::arg(format!("self-pair ({i}, {i}) is not modeled")));
        }
        if rows.is_empty() || rows.len() % self.k != 0 {
            return Err(PlsmError::Shape(format!(
                "pair ({i}, {j}): {} values is not a positive multiple of K = {}",
                rows.len(),
                self.k
            )));
        }
        if let Some(bad) = rows.iter().find(|&&y| y > 1) {
            return Err(PlsmError::arg(format!(
                "pair ({i}, {j}): edge value {bad} is not binary"
            )));
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.blocks[pair_index(self.n, lo, hi)] = Some(rows.into_boxed_slice());
        Ok(self)
    }

    /// True once `(i, j)` has been set; false for invalid pairs.
    pub fn has_pair(&self, i: usize, j: usize) -> bool {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        lo != hi && hi < self.n && self.blocks[pair_index(self.n, lo, hi)].is_some()
    }

    /// Finalizes the network; pairs never set get one all-zero row.
    pub fn build(self) -> Result<MultiEdgeNetwork> {
        let k = self.k;
        let blocks: Vec<Box<[u8]>> = self
            .blocks
            .into_iter()
            .map(|b| b.unwrap_or_else(|| vec![0u8; k].into_boxed_slice()))
            .collect();
        let mut cell_offsets = Vec::with_capacity(blocks.len() + 1);
        let mut acc = 0usize;
        cell_offsets.push(0);
        for b in &blocks {
            acc += b.len();
            cell_offsets.push(acc);
        }
        Ok(MultiEdgeNetwork {
            n: self.n,
            k,
            blocks,
            cell_offsets,
        })
    }
}

/// Membership indicator over the cells of one network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationMask {
    bits: Vec<bool>,
}

impl ObservationMask {
    pub fn full(net: &MultiEdgeNetwork) -> Self {
        Self {
            bits: vec![true; net.cell_count()],
        }
    }

    pub fn none(net: &MultiEdgeNetwork) -> Self {
        Self {
            bits: vec![false; net.cell_count()],
        }
    }

    /// Mask over linear cell indices; length must equal the network's cell count.
    pub fn from_bits(net: &MultiEdgeNetwork, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != net.cell_count() {
            return Err(PlsmError::Shape(format!(
                "mask covers {} cells, network has {}",
                bits.len(),
                net.cell_count()
            )));
        }
        Ok(Self { bits })
    }

    pub fn from_cells(net: &MultiEdgeNetwork, cells: &[Cell]) -> Result<Self> {
        let mut mask = Self::none(net);
        for &c in cells {
            let idx = net.cell_index(c)?;
            mask.bits[idx] = true;
        }
        Ok(mask)
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    pub fn set(&mut self, idx: usize, on: bool) {
        self.bits[idx] = on;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Linear indices of the included cells, ascending.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.bits.iter().zip(&other.bits).any(|(a, b)| *a && *b)
    }

    pub(crate) fn check_against(&self, net: &MultiEdgeNetwork) -> Result<()> {
        if self.bits.len() != net.cell_count() {
            return Err(PlsmError::Shape(format!(
                "mask covers {} cells, network has {}",
                self.bits.len(),
                net.cell_count()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MultiEdgeNetwork {
        let mut b = NetworkBuilder::new(4, 2).unwrap();
        b.pair(0, 1, vec![1, 0, 0, 1]).unwrap();
        b.pair(3, 2, vec![1, 1]).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn pair_index_enumerates_row_major() {
        let n = 7;
        let mut expect = 0;
        for i in 0..n {
            for j in i + 1..n {
                assert_eq!(pair_index(n, i, j), expect);
                expect += 1;
            }
        }
        assert_eq!(expect, pair_count(n));
    }

    #[test]
    fn pair_from_index_inverts() {
        let net = MultiEdgeNetwork::empty(9, 1).unwrap();
        for (p, (i, j)) in net.pairs().enumerate() {
            assert_eq!(net.pair_from_index(p), (i, j));
        }
    }

    #[test]
    fn missing_pairs_become_single_zero_row() {
        let net = small();
        assert_eq!(net.n_pairs(), 6);
        assert_eq!(net.docs(0, 1).unwrap(), 2);
        assert_eq!(net.docs(0, 2).unwrap(), 1);
        assert_eq!(net.block(1, 3).unwrap(), &[0, 0]);
        assert_eq!(net.block(2, 3).unwrap(), &[1, 1]);
        // 2 docs for (0,1), 1 for the other five pairs.
        assert_eq!(net.cell_count(), 2 * 2 + 5 * 2);
    }

    #[test]
    fn cell_index_round_trips() {
        let net = small();
        for idx in 0..net.cell_count() {
            let c = net.cell_at(idx).unwrap();
            assert_eq!(net.cell_index(c).unwrap(), idx);
        }
        let collected: Vec<_> = net.cells().collect();
        assert_eq!(collected.len(), net.cell_count());
        for (idx, (c, y)) in collected.iter().enumerate() {
            assert_eq!(net.cell_index(*c).unwrap(), idx);
            assert_eq!(net.y(*c).unwrap(), *y);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mut b = NetworkBuilder::new(3, 2).unwrap();
        assert!(b.pair(1, 1, vec![0, 0]).is_err());
        assert!(b.pair(0, 3, vec![0, 0]).is_err());
        assert!(b.pair(0, 1, vec![0, 0, 1]).is_err());
        assert!(b.pair(0, 1, vec![0, 2]).is_err());
        assert!(b.pair(0, 1, vec![]).is_err());
        assert!(NetworkBuilder::new(1, 2).is_err());
        let net = small();
        assert!(net
            .cell_index(Cell {
                i: 0,
                j: 1,
                l: 2,
                k: 0
            })
            .is_err());
        assert!(net
            .cell_index(Cell {
                i: 0,
                j: 1,
                l: 0,
                k: 2
            })
            .is_err());
    }

    #[test]
    fn mask_and_complement_partition() {
        let net = small();
        let cells = [
            Cell {
                i: 0,
                j: 1,
                l: 1,
                k: 1,
            },
            Cell {
                i: 2,
                j: 3,
                l: 0,
                k: 0,
            },
        ];
        let m = ObservationMask::from_cells(&net, &cells).unwrap();
        let c = m.complement();
        assert_eq!(m.count() + c.count(), net.cell_count());
        assert!(!m.intersects(&c));
        assert!(ObservationMask::from_bits(&net, vec![true; 3]).is_err());
    }

    #[test]
    fn density_counts_ones() {
        let net = small();
        assert!((net.density() - 4.0 / 14.0).abs() < 1e-15);
    }
}
