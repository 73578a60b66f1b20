use serde::{Deserialize, Serialize};

use super::{backward_neighbor, check_grid};
use crate::error::Result;
use crate::matkit::MatrixSet;

/// Default cap on enumerated nodes (single cell assignments).
pub const DEFAULT_NODE_LIMIT: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub max_nodes: u64,
    /// Solutions beyond this many are counted but not stored.
    pub max_witnesses: usize,
    /// Absolute tolerance on each divergence entry, scaled by `max(1, max|K|)`.
    pub tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            max_nodes: DEFAULT_NODE_LIMIT,
            max_witnesses: usize::MAX,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Number of solutions found.
    pub count: usize,
    /// Stored solutions, in lexicographic order of the assignment vector.
    pub solutions: Vec<Vec<usize>>,
    /// True iff the whole search tree was explored within the node budget.
    pub exhausted: bool,
    pub nodes: u64,
}

/// All assignments `dims → K` with vanishing backward-difference divergence.
pub fn enumerate_exact(k: &MatrixSet, dims: &[usize], max_nodes: u64) -> Result<SearchResult> {
    enumerate_with(
        k,
        dims,
        &SearchOptions {
            max_nodes,
            ..SearchOptions::default()
        },
    )
}

/// Depth-first search in odometer order. The divergence at a cell involves only the
/// cell and its backward neighbors, so it is checked as soon as the last of them has
/// been assigned.
pub fn enumerate_with(k: &MatrixSet, dims: &[usize], opts: &SearchOptions) -> Result<SearchResult> {
    check_grid(k, dims)?;
    let (m, n) = k.shape();
    let cells: usize = dims.iter().product();
    let values = k.len();
    let scale = k.iter().fold(1.0f64, |a, x| a.max(x.max_abs()));
    let tol = opts.tol * scale;

    let neighbors: Vec<Vec<usize>> = (0..cells)
        .map(|c| (0..n).map(|axis| backward_neighbor(c, dims, axis)).collect())
        .collect();
    let mut checks: Vec<Vec<usize>> = vec![Vec::new(); cells];
    for (c, nb) in neighbors.iter().enumerate() {
        let ready = nb.iter().copied().fold(c, usize::max);
        checks[ready].push(c);
    }

    let entry = |v: usize, r: usize, col: usize| k.mats()[v].as_slice()[r * n + col];
    let satisfied = |assign: &[usize], c: usize| {
        (0..m).all(|r| {
            let d: f64 = (0..n)
                .map(|col| entry(assign[c], r, col) - entry(assign[neighbors[c][col]], r, col))
                .sum();
            d.abs() <= tol
        })
    };

    let mut result = SearchResult {
        count: 0,
        solutions: Vec::new(),
        exhausted: true,
        nodes: 0,
    };
    let mut assign = vec![0usize; cells];
    // next[t] is the next value to try at position t
    let mut next = vec![0usize; cells];
    let mut t = 0usize;
    loop {
        if next[t] == values {
            next[t] = 0;
            if t == 0 {
                break;
            }
            t -= 1;
            continue;
        }
        if result.nodes >= opts.max_nodes {
            result.exhausted = false;
            break;
        }
        assign[t] = next[t];
        next[t] += 1;
        result.nodes += 1;
        if !checks[t].iter().all(|&c| satisfied(&assign, c)) {
            continue;
        }
        if t + 1 == cells {
            result.count += 1;
            if result.solutions.len() < opts.max_witnesses {
                result.solutions.push(assign.clone());
            }
        } else {
            t += 1;
        }
    }
    Ok(result)
}
