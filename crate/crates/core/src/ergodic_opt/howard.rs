//! Howard's policy iteration for the maximum cycle mean.
//!
//! Nodes without an infinite forward path are trimmed first so every
//! remaining node has a successor. Ties between successors go to the smaller
//! node index.

use super::graph::Digraph;

const MAX_ROUNDS: usize = 100_000;

pub fn howard_max_mean(g: &Digraph) -> Option<(f64, Vec<usize>)> {
    let n = g.len();
    let alive = live_nodes(g);
    if !alive.iter().any(|&a| a) {
        return None;
    }
    let scale = (0..n)
        .flat_map(|v| g.successors(v).iter().map(|&(_, w)| w.abs()))
        .fold(1.0, f64::max);
    let eps = 1e-12 * scale;

    // Initial policy: heaviest live edge.
    let mut policy = vec![usize::MAX; n];
    let mut weight = vec![0.0; n];
    for v in (0..n).filter(|&v| alive[v]) {
        let mut best: Option<(usize, f64)> = None;
        for &(u, w) in g.successors(v) {
            if alive[u] && best.map_or(true, |(bu, bw)| w > bw || (w == bw && u < bu)) {
                best = Some((u, w));
            }
        }
        let (u, w) = best.expect("live node has a live successor");
        policy[v] = u;
        weight[v] = w;
    }

    let mut eta = vec![0.0; n];
    let mut x = vec![0.0; n];
    for _ in 0..MAX_ROUNDS {
        evaluate(&alive, &policy, &weight, &mut eta, &mut x);
        let mut changed = false;
        for v in (0..n).filter(|&v| alive[v]) {
            let mut best: Option<(f64, usize, f64)> = None;
            for &(u, w) in g.successors(v) {
                if !alive[u] {
                    continue;
                }
                best = match best {
                    None if eta[u] > eta[v] + eps => Some((eta[u], u, w)),
                    Some((be, _, _)) if eta[u] > be + eps => Some((eta[u], u, w)),
                    Some((be, bu, _)) if (eta[u] - be).abs() <= eps && u < bu => Some((eta[u], u, w)),
                    other => other,
                };
            }
            if let Some((_, u, w)) = best {
                policy[v] = u;
                weight[v] = w;
                changed = true;
            }
        }
        if changed {
            continue;
        }
        for v in (0..n).filter(|&v| alive[v]) {
            let mut best = (x[v] + eps, usize::MAX, 0.0);
            for &(u, w) in g.successors(v) {
                if !alive[u] || (eta[u] - eta[v]).abs() > eps {
                    continue;
                }
                let val = w - eta[v] + x[u];
                if val > best.0 {
                    best = (val, u, w);
                }
            }
            if best.1 != usize::MAX && best.1 != policy[v] {
                policy[v] = best.1;
                weight[v] = best.2;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let start = (0..n)
        .filter(|&v| alive[v])
        .fold(None::<usize>, |b, v| match b {
            Some(bv) if eta[bv] >= eta[v] => Some(bv),
            _ => Some(v),
        })
        .expect("some live node");
    // Follow the policy into its cycle.
    let mut seen = vec![false; n];
    let mut v = start;
    while !seen[v] {
        seen[v] = true;
        v = policy[v];
    }
    let mut cycle = vec![v];
    let mut u = policy[v];
    while u != v {
        cycle.push(u);
        u = policy[u];
    }
    let mean = g.cycle_mean(&cycle).expect("policy edges exist");
    Some((mean, cycle))
}

/// Nodes from which an infinite walk exists.
pub(crate) fn live_nodes(g: &Digraph) -> Vec<bool> {
    let n = g.len();
    let mut out_deg: Vec<usize> = (0..n).map(|v| g.successors(v).len()).collect();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        for &(u, _) in g.successors(v) {
            preds[u].push(v);
        }
    }
    let mut alive = vec![true; n];
    let mut queue: Vec<usize> = (0..n).filter(|&v| out_deg[v] == 0).collect();
    while let Some(v) = queue.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &p in &preds[v] {
            out_deg[p] -= 1;
            if out_deg[p] == 0 && alive[p] {
                queue.push(p);
            }
        }
    }
    alive
}

/// Gain `eta` and bias `x` of a policy: every node's walk enters a single cycle.
fn evaluate(alive: &[bool], policy: &[usize], weight: &[f64], eta: &mut [f64], x: &mut [f64]) {
    const NEW: u8 = 0;
    const ACTIVE: u8 = 1;
    const DONE: u8 = 2;
    let n = policy.len();
    let mut state = vec![NEW; n];
    let mut path = Vec::new();
    for root in (0..n).filter(|&v| alive[v]) {
        if state[root] != NEW {
            continue;
        }
        path.clear();
        let mut v = root;
        while state[v] == NEW {
            state[v] = ACTIVE;
            path.push(v);
            v = policy[v];
        }
        let mut tail_end = path.len();
        if state[v] == ACTIVE {
            // New cycle starting at v within the current path.
            let p = path.iter().position(|&u| u == v).expect("active node on path");
            let cyc = &path[p..];
            let total: f64 = cyc.iter().map(|&u| weight[u]).sum();
            let mean = total / cyc.len() as f64;
            let anchor_pos = (0..cyc.len()).min_by_key(|&i| cyc[i]).expect("non-empty cycle");
            let k = cyc.len();
            let anchor = cyc[anchor_pos];
            eta[anchor] = mean;
            x[anchor] = 0.0;
            state[anchor] = DONE;
            // Walk backwards around the cycle from the anchor.
            for step in 1..k {
                let i = (anchor_pos + k - step) % k;
                let u = cyc[i];
                let nxt = policy[u];
                eta[u] = mean;
                x[u] = weight[u] - mean + x[nxt];
                state[u] = DONE;
            }
            tail_end = p;
        }
        for &u in path[..tail_end].iter().rev() {
            let nxt = policy[u];
            eta[u] = eta[nxt];
            x[u] = weight[u] - eta[nxt] + x[nxt];
            state[u] = DONE;
        }
    }
}
