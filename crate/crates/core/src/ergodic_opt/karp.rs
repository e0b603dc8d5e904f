//! Karp's dynamic program for the maximum cycle mean, run per strongly
//! connected component.

use super::graph::Digraph;

/// Maximum cycle mean and one optimal cycle, or `None` if `g` is acyclic.
pub fn karp_max_mean(g: &Digraph) -> Option<(f64, Vec<usize>)> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for comp in g.cyclic_components() {
        let (value, cycle) = karp_component(g, &comp);
        if best.as_ref().map_or(true, |(b, _)| value > *b) {
            best = Some((value, cycle));
        }
    }
    best
}

fn karp_component(g: &Digraph, nodes: &[usize]) -> (f64, Vec<usize>) {
    let m = nodes.len();
    let mut local = vec![usize::MAX; g.len()];
    for (i, &v) in nodes.iter().enumerate() {
        local[v] = i;
    }
    let neg = f64::NEG_INFINITY;
    // d[k * m + v]: best weight of a k-edge walk from nodes[0] to v.
    let mut d = vec![neg; (m + 1) * m];
    let mut parent = vec![u32::MAX; (m + 1) * m];
    d[0] = 0.0;
    for k in 1..=m {
        let (prev, cur) = d.split_at_mut(k * m);
        let prev = &prev[(k - 1) * m..];
        let cur = &mut cur[..m];
        for (i, &v) in nodes.iter().enumerate() {
            if prev[i] == neg {
                continue;
            }
            for &(u, w) in g.successors(v) {
                let j = local[u];
                if j == usize::MAX {
                    continue;
                }
                let cand = prev[i] + w;
                if cand > cur[j] {
                    cur[j] = cand;
                    parent[k * m + j] = i as u32;
                }
            }
        }
    }
    let mut best = (neg, usize::MAX);
    for v in 0..m {
        let dm = d[m * m + v];
        if dm == neg {
            continue;
        }
        let mut worst = f64::INFINITY;
        for k in 0..m {
            let dk = d[k * m + v];
            if dk != neg {
                worst = worst.min((dm - dk) / (m - k) as f64);
            }
        }
        if worst > best.0 {
            best = (worst, v);
        }
    }
    let (value, end) = best;
    // Walk of length m ending at `end`; one of its cycles attains the mean.
    let mut walk = Vec::with_capacity(m + 1);
    let mut v = end;
    for k in (1..=m).rev() {
        walk.push(v);
        v = parent[k * m + v] as usize;
    }
    walk.push(v);
    walk.reverse();
    let walk: Vec<usize> = walk.into_iter().map(|i| nodes[i]).collect();
    let cycle = best_cycle_in_walk(g, &walk);
    (value, cycle)
}

/// Splits a walk into simple cycles and returns the one with the largest mean.
pub(crate) fn best_cycle_in_walk(g: &Digraph, walk: &[usize]) -> Vec<usize> {
    let mut stack: Vec<usize> = Vec::new();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for &v in walk {
        if let Some(p) = stack.iter().position(|&x| x == v) {
            let cycle = stack[p..].to_vec();
            let mean = g.cycle_mean(&cycle).expect("walk edges exist");
            if best.as_ref().map_or(true, |(b, _)| mean > *b) {
                best = Some((mean, cycle));
            }
            stack.truncate(p + 1);
        } else {
            stack.push(v);
        }
    }
    best.map(|(_, c)| c).unwrap_or_default()
}
