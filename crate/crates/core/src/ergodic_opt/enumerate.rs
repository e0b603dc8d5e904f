//! Exhaustive simple-cycle search for the maximum cycle mean, for small graphs.
//!
//! Every simple cycle is reachable as a path rooted at each of its nodes. A
//! cycle whose mean beats the incumbent `lambda` has a rotation whose prefix
//! sums of `w - lambda` are all strictly positive, so a path can be abandoned
//! as soon as its running sum of `w - lambda` stops being positive. Ties with
//! the incumbent are never explored.

use super::graph::Digraph;
use crate::error::{Error, Result};

/// Largest graph the exhaustive search accepts.
pub const EXHAUSTIVE_MAX_NODES: usize = 256;

pub fn exhaustive_max_mean(g: &Digraph) -> Result<Option<(f64, Vec<usize>)>> {
    if g.len() > EXHAUSTIVE_MAX_NODES {
        return Err(Error::InvalidArgument(format!(
            "exhaustive cycle search limited to {EXHAUSTIVE_MAX_NODES} nodes, got {}",
            g.len()
        )));
    }
    let mut search = Search {
        g,
        best: f64::NEG_INFINITY,
        witness: Vec::new(),
        on_path: vec![false; g.len()],
        path: Vec::new(),
    };
    // Seed with loops and 2-cycles so pruning starts tight.
    for v in 0..g.len() {
        for &(u, w) in g.successors(v) {
            if u == v {
                search.offer(w, &[v]);
            } else if let Some(back) = g.weight(u, v) {
                search.offer((w + back) / 2.0, &[v, u]);
            }
        }
    }
    for root in 0..g.len() {
        search.on_path[root] = true;
        search.path.push(root);
        search.extend(root, root, 0.0);
        search.path.pop();
        search.on_path[root] = false;
    }
    Ok((!search.witness.is_empty()).then(|| (search.best, search.witness)))
}

struct Search<'a> {
    g: &'a Digraph,
    best: f64,
    witness: Vec<usize>,
    on_path: Vec<bool>,
    path: Vec<usize>,
}

impl Search<'_> {
    fn offer(&mut self, mean: f64, cycle: &[usize]) {
        if mean > self.best {
            self.best = mean;
            self.witness = cycle.to_vec();
        }
    }

    /// `sum` is the total weight of the current path.
    fn extend(&mut self, root: usize, v: usize, sum: f64) {
        for &(u, w) in self.g.successors(v) {
            let total = sum + w;
            let len = self.path.len() as f64;
            if u == root {
                let path = std::mem::take(&mut self.path);
                self.offer(total / len, &path);
                self.path = path;
                continue;
            }
            if self.on_path[u] || total - self.best * len <= 0.0 {
                continue;
            }
            self.on_path[u] = true;
            self.path.push(u);
            self.extend(root, u, total);
            self.path.pop();
            self.on_path[u] = false;
        }
    }
}
