//! Undirected simple graphs stored as symmetric binary adjacency matrices, and the
//! canonical edge ordering shared by every edge-indexed array in the crate.

use serde::{Deserialize, Serialize};

/// Number of unordered pairs among `p` nodes.
pub fn n_pairs(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Position of the pair (i, j), i ≠ j, in the row-major upper-triangle ordering
/// (0,1), (0,2), …, (0,p−1), (1,2), ….
pub fn edge_index(i: usize, j: usize, p: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    debug_assert!(i != j && j < p);
    i * (2 * p - i - 1) / 2 + (j - i - 1)
}

/// Inverse of [`edge_index`].
pub fn edge_pair(index: usize, p: usize) -> (usize, usize) {
    let mut i = 0;
    let mut start = 0;
    loop {
        let row_len = p - i - 1;
        if index < start + row_len {
            return (i, i + 1 + (index - start));
        }
        start += row_len;
        i += 1;
    }
}

/// All pairs in canonical order.
pub fn all_pairs(p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n_pairs(p));
    for i in 0..p {
        for j in (i + 1)..p {
            out.push((i, j));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    p: usize,
    cells: Vec<bool>,
}

impl Adjacency {
    pub fn empty(p: usize) -> Self {
        Self { p, cells: vec![false; p * p] }
    }

    pub fn from_edges(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj = Self::empty(p);
        for (i, j) in edges {
            adj.set(i, j, true);
        }
        adj
    }

    /// Build from a mask over pairs in canonical order.
    pub fn from_edge_mask(p: usize, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), n_pairs(p));
        let mut adj = Self::empty(p);
        for (k, (i, j)) in all_pairs(p).into_iter().enumerate() {
            if mask[k] {
                adj.set(i, j, true);
            }
        }
        adj
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.p + j]
    }

    /// Sets both (i, j) and (j, i). Self-loops are ignored.
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        if i == j {
            return;
        }
        self.cells[i * self.p + j] = value;
        self.cells[j * self.p + i] = value;
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        all_pairs(self.p).into_iter().filter(|&(i, j)| self.get(i, j)).collect()
    }

    pub fn edge_mask(&self) -> Vec<bool> {
        all_pairs(self.p).into_iter().map(|(i, j)| self.get(i, j)).collect()
    }

    pub fn n_edges(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count() / 2
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.p)
            .map(|i| (0..self.p).filter(|&j| self.get(i, j)).count())
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        if self.p == 0 {
            return true;
        }
        let mut seen = vec![false; self.p];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..self.p {
                if self.get(i, j) && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.p).all(|i| !self.get(i, i) && (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}
