use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{all_pairs, n_pairs};

/// A priori grouping of variables into G contiguous groups, and the induced partition
/// of edges into B = G(G+1)/2 blocks.
///
/// Blocks are numbered with the G within-group blocks first (in group order), then the
/// between-group blocks in lexicographic order of group pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStructure {
    group_sizes: Vec<usize>,
    group_of: Vec<usize>,
    /// G×G row-major lookup of block index.
    block_lookup: Vec<usize>,
    block_groups: Vec<(usize, usize)>,
    block_sizes: Vec<usize>,
}

impl BlockStructure {
    pub fn new(group_sizes: &[usize]) -> Result<Self> {
        if group_sizes.is_empty() {
            return invalid("at least one group is required");
        }
        if let Some(&bad) = group_sizes.iter().find(|&&s| s < 2) {
            return invalid(format!("every group needs at least 2 variables, got {bad}"));
        }
        let g = group_sizes.len();
        let group_of: Vec<usize> = group_sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &s)| std::iter::repeat_n(k, s))
            .collect();
        let mut block_groups: Vec<(usize, usize)> = (0..g).map(|k| (k, k)).collect();
        for a in 0..g {
            for b in (a + 1)..g {
                block_groups.push((a, b));
            }
        }
        let mut block_lookup = vec![0; g * g];
        for (idx, &(a, b)) in block_groups.iter().enumerate() {
            block_lookup[a * g + b] = idx;
            block_lookup[b * g + a] = idx;
        }
        let block_sizes = block_groups
            .iter()
            .map(|&(a, b)| {
                if a == b {
                    n_pairs(group_sizes[a])
                } else {
                    group_sizes[a] * group_sizes[b]
                }
            })
            .collect();
        Ok(Self { group_sizes: group_sizes.to_vec(), group_of, block_lookup, block_groups, block_sizes })
    }

    /// A single group of `p` variables.
    pub fn single(p: usize) -> Result<Self> {
        Self::new(&[p])
    }

    pub fn p(&self) -> usize {
        self.group_of.len()
    }

    pub fn n_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.block_groups.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn group_of(&self, node: usize) -> usize {
        self.group_of[node]
    }

    pub fn block_of(&self, i: usize, j: usize) -> usize {
        let g = self.n_groups();
        self.block_lookup[self.group_of[i] * g + self.group_of[j]]
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn block_groups(&self, b: usize) -> (usize, usize) {
        self.block_groups[b]
    }

    pub fn is_within(&self, b: usize) -> bool {
        let (x, y) = self.block_groups[b];
        x == y
    }

    /// Human-readable label, e.g. `within_1` or `between_1_2` (1-based groups).
    pub fn block_label(&self, b: usize) -> String {
        let (x, y) = self.block_groups[b];
        if x == y {
            format!("within_{}", x + 1)
        } else {
            format!("between_{}_{}", x + 1, y + 1)
        }
    }

    /// Canonical edge indices belonging to block `b`.
    pub fn block_edges(&self, b: usize) -> Vec<usize> {
        all_pairs(self.p())
            .into_iter()
            .enumerate()
            .filter(|&(_, (i, j))| self.block_of(i, j) == b)
            .map(|(k, _)| k)
            .collect()
    }

    /// Block index of every edge in canonical order.
    pub fn edge_blocks(&self) -> Vec<usize> {
        all_pairs(self.p()).into_iter().map(|(i, j)| self.block_of(i, j)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_groups_of_fifty() {
        let bs = BlockStructure::new(&[50, 50]).unwrap();
        assert_eq!(bs.n_blocks(), 3);
        assert_eq!(bs.block_sizes(), &[1225, 1225, 2500]);
        assert_eq!(bs.block_label(2), "between_1_2");
        assert_eq!(bs.block_of(0, 99), 2);
        assert_eq!(bs.block_of(60, 99), 1);
    }

    #[test]
    fn small_structures() {
        assert_eq!(BlockStructure::single(7).unwrap().n_blocks(), 1);
        assert_eq!(BlockStructure::new(&[2, 2, 2]).unwrap().n_blocks(), 6);
        assert!(BlockStructure::new(&[3, 1]).is_err());
        assert!(BlockStructure::new(&[]).is_err());
    }

    proptest! {
        #[test]
        fn blocks_partition_edges(sizes in proptest::collection::vec(2usize..7, 1..5)) {
            let bs = BlockStructure::new(&sizes).unwrap();
            let p: usize = sizes.iter().sum();
            prop_assert_eq!(bs.n_blocks(), sizes.len() * (sizes.len() + 1) / 2);
            prop_assert_eq!(bs.block_sizes().iter().sum::<usize>(), n_pairs(p));
            let mut seen = vec![0; n_pairs(p)];
            for b in 0..bs.n_blocks() {
                let edges = bs.block_edges(b);
                prop_assert_eq!(edges.len(), bs.block_sizes()[b]);
                for e in edges { seen[e] += 1; }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            for (i, j) in all_pairs(p) {
                let b = bs.block_of(i, j);
                prop_assert_eq!(bs.is_within(b), bs.group_of(i) == bs.group_of(j));
            }
        }
    }
}
