//! Density-based clustering over an abstract neighbour relation.
//!
//! Points are identified by their index, and the index order is the canonical
//! processing order: clusters are numbered in order of their lowest-index core
//! point, and a border point reachable from several clusters joins the one
//! created first.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

pub trait NeighborSearch {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends every `j != i` in the neighbourhood of `i` to `out`.
    fn neighbors(&self, i: usize, out: &mut Vec<usize>);

    /// Number of neighbours of `i`; implementations may stop counting once
    /// `limit` is reached.
    fn count_neighbors(&self, i: usize, _limit: usize) -> usize {
        let mut buf = Vec::new();
        self.neighbors(i, &mut buf);
        buf.len()
    }
}

/// Cluster id per point, `None` for noise.
pub fn dbscan<S: NeighborSearch>(search: &S, min_pts: usize) -> Vec<Option<u32>> {
    let n = search.len();
    let need = min_pts.saturating_sub(1);
    let core: Vec<bool> = (0..n).map(|i| search.count_neighbors(i, need) >= need).collect();

    let mut labels: Vec<Option<u32>> = vec![None; n];
    let mut next_id = 0u32;
    let mut queue = VecDeque::new();
    let mut buf = Vec::new();
    for start in 0..n {
        if !core[start] || labels[start].is_some() {
            continue;
        }
        let id = next_id;
        next_id += 1;
        labels[start] = Some(id);
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            buf.clear();
            search.neighbors(p, &mut buf);
            for &q in &buf {
                if labels[q].is_none() {
                    labels[q] = Some(id);
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    labels
}

/// Groups point indices by cluster id; clusters in id order, members ascending.
pub fn members(labels: &[Option<u32>]) -> Vec<Vec<usize>> {
    let count = labels.iter().flatten().map(|&c| c as usize + 1).max().unwrap_or(0);
    let mut out = vec![Vec::new(); count];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            out[*c as usize].push(i);
        }
    }
    out
}
