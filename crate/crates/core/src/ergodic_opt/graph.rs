use crate::error::{Error, Result};
use crate::symbolic::SftGraph;

/// A small weighted digraph with nodes `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Digraph {
    succ: Vec<Vec<(usize, f64)>>,
}

impl Digraph {
    pub fn new(n: usize) -> Self {
        Digraph { succ: vec![Vec::new(); n] }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, weight: f64) {
        self.succ[from].push((to, weight));
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn successors(&self, v: usize) -> &[(usize, f64)] {
        &self.succ[v]
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    /// Allowed edges of the de Bruijn graph with weights indexed by edge word;
    /// edges with non-finite weight are dropped.
    pub fn from_sft(graph: &SftGraph, weights: &[f64]) -> Result<Self> {
        let n = graph.n_states();
        if weights.len() != 2 * n {
            return Err(Error::InvalidArgument(format!(
                "expected {} edge weights, got {}",
                2 * n,
                weights.len()
            )));
        }
        let mut g = Digraph::new(n);
        for s in 0..n as u64 {
            for (e, u) in graph.allowed_edges(s) {
                let w = weights[e as usize];
                if w.is_finite() {
                    g.add_edge(s as usize, u as usize, w);
                }
            }
        }
        Ok(g)
    }

    pub fn negated(&self) -> Digraph {
        Digraph {
            succ: self.succ.iter().map(|es| es.iter().map(|&(u, w)| (u, -w)).collect()).collect(),
        }
    }

    /// Weight of the edge `from -> to` (the largest one if there are parallel edges).
    pub fn weight(&self, from: usize, to: usize) -> Option<f64> {
        self.succ[from].iter().filter(|&&(u, _)| u == to).map(|&(_, w)| w).reduce(f64::max)
    }

    /// Mean weight of a closed walk `cycle[0] -> cycle[1] -> ... -> cycle[0]`.
    pub fn cycle_mean(&self, cycle: &[usize]) -> Option<f64> {
        if cycle.is_empty() {
            return None;
        }
        let mut total = 0.0;
        for i in 0..cycle.len() {
            total += self.weight(cycle[i], cycle[(i + 1) % cycle.len()])?;
        }
        Some(total / cycle.len() as f64)
    }

    /// Strongly connected components that contain a cycle, as node lists.
    pub fn cyclic_components(&self) -> Vec<Vec<usize>> {
        let comp = tarjan(self);
        let k = comp.iter().map(|&c| c + 1).max().unwrap_or(0);
        let mut groups = vec![Vec::new(); k];
        for (v, &c) in comp.iter().enumerate() {
            groups[c].push(v);
        }
        groups
            .into_iter()
            .filter(|g| {
                g.len() > 1 || g.first().map(|&v| self.succ[v].iter().any(|&(u, _)| u == v)).unwrap_or(false)
            })
            .collect()
    }
}

/// Iterative Tarjan; returns the component index of every node.
pub(crate) fn tarjan(g: &Digraph) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let n = g.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let (mut next, mut n_comp) = (0, 0);
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, 0));
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            if let Some(&(w, _)) = g.successors(v).get(*i) {
                *i += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp[w] = n_comp;
                        if w == v {
                            break;
                        }
                    }
                    n_comp += 1;
                }
            }
        }
    }
    comp
}
