//! Matrix-free power iteration on the weighted de Bruijn graph with
//! Collatz-Wielandt bounds on the spectral radius.
//!
//! Edge weights are given as logs indexed by the depth-(n+1) edge word
//! `(s << 1) | b`; `-inf` removes an edge. On a strongly connected graph the
//! bounds are the smallest and largest ratio `(Av)_i / v_i`. Otherwise each
//! cyclic component is iterated on its own edges and normalized separately,
//! since the spectral radius is the largest over the diagonal blocks; components
//! with nearly equal radii then do not slow each other down.

use crate::symbolic::{SftGraph, NO_COMPONENT};

/// Entries below this (relative to the maximum) switch the iteration to the log domain.
const UNDERFLOW_GUARD: f64 = 1e-280;
/// Relative weight spread beyond which the linear kernel is not attempted.
const MAX_LINEAR_SPREAD: f64 = 600.0;
/// Iterations after which an unconverged run switches to `A + rho I`, which
/// damps the near-unimodular eigenvalues of almost periodic weightings.
const SHIFT_AFTER: usize = 48;
/// Iterations after which a log bracket narrower than the caller's coarse
/// tolerance is accepted. Slowly mixing weightings otherwise run to the cap.
const STALL_AFTER: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct PowerOutcome {
    pub log_lower: f64,
    pub log_upper: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[inline]
fn lse2(a: f64, b: f64) -> f64 {
    let (m, d) = if a >= b { (a, b - a) } else { (b, a - b) };
    if m == f64::NEG_INFINITY {
        m
    } else if d < -37.0 {
        m
    } else {
        m + d.exp().ln_1p()
    }
}

fn is_periodic(graph: &SftGraph) -> bool {
    graph.components().iter().any(|k| k.period > 1)
}

/// Bounds `log rho(A)` for the weighted graph. `vector` is a warm start on
/// input and holds the final (max-normalized, linear) iterate on output.
/// Stops when the relative residual drops below `tol`, or after
/// [`STALL_AFTER`] iterations once the log bracket is narrower than `coarse_tol`.
pub(crate) fn log_spectral_radius(
    graph: &SftGraph,
    logw: &[f64],
    vector: &mut Vec<f64>,
    tol: f64,
    coarse_tol: f64,
    cap: usize,
) -> PowerOutcome {
    let n = graph.n_states();
    debug_assert_eq!(logw.len(), 2 * n);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in logw.iter().filter(|x| x.is_finite()) {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if hi == f64::NEG_INFINITY {
        return PowerOutcome {
            log_lower: f64::NEG_INFINITY,
            log_upper: f64::NEG_INFINITY,
            iterations: 0,
            converged: true,
        };
    }
    let shift = hi;
    prepare_start(graph, vector);
    if lo - shift > -MAX_LINEAR_SPREAD {
        if let Some(out) = linear(graph, logw, shift, vector, tol, coarse_tol, cap) {
            return out;
        }
    }
    log_domain(graph, logw, shift, vector, tol, coarse_tol, cap)
}

fn prepare_start(graph: &SftGraph, v: &mut Vec<f64>) {
    let n = graph.n_states();
    if v.len() != n {
        v.clear();
        v.resize(n, 1.0);
    }
    let max = v.iter().cloned().filter(|x| x.is_finite()).fold(0.0, f64::max);
    let (scale, floor) = if max > 0.0 { (1.0 / max, 1e-12) } else { (1.0, 1.0) };
    for (s, x) in v.iter_mut().enumerate() {
        if !graph.is_allowed(s as u64) {
            *x = 0.0;
        } else if !(x.is_finite() && *x * scale > floor) {
            *x = floor;
        } else {
            *x *= scale;
        }
    }
}

fn finish(lo: f64, hi: f64, sigma: f64, shift: f64, iterations: usize, converged: bool) -> PowerOutcome {
    let log = |r: f64| if r > sigma { (r - sigma).ln() + shift } else { f64::NEG_INFINITY };
    PowerOutcome { log_lower: log(lo), log_upper: log(hi), iterations, converged }
}

fn linear(
    graph: &SftGraph,
    logw: &[f64],
    shift: f64,
    v: &mut Vec<f64>,
    tol: f64,
    coarse_tol: f64,
    cap: usize,
) -> Option<PowerOutcome> {
    let n = graph.n_states();
    let mask = n - 1;
    let w: Vec<f64> = logw.iter().map(|&x| (x - shift).exp()).collect();
    let mut sigma = if is_periodic(graph) { 1.0 } else { 0.0 };
    let sc = graph.is_strongly_connected();
    let comp = graph.component_of();
    let n_comp = graph.components().len();
    let mut comp_lo = vec![f64::INFINITY; n_comp];
    let mut comp_hi = vec![0.0f64; n_comp];
    let mut comp_max = vec![0.0f64; n_comp];
    let mut next = vec![0.0; n];
    let (mut lo, mut hi) = (0.0, f64::INFINITY);

    for it in 1..=cap {
        let mut upper = 0.0f64;
        let mut vmax = 0.0f64;
        let mut cyc_min = f64::INFINITY;
        if sc {
            let mut lower = f64::INFINITY;
            for s in 0..n {
                let b = (s << 1) & mask;
                let vs = v[s];
                let a = w[2 * s] * v[b] + w[2 * s + 1] * v[b | 1] + sigma * vs;
                next[s] = a;
                if vs > 0.0 {
                    let r = a / vs;
                    lower = lower.min(r);
                    upper = upper.max(r);
                    cyc_min = cyc_min.min(vs);
                }
                vmax = vmax.max(a);
            }
            lo = lower;
        } else {
            comp_lo.iter_mut().for_each(|x| *x = f64::INFINITY);
            comp_hi.iter_mut().for_each(|x| *x = 0.0);
            comp_max.iter_mut().for_each(|x| *x = 0.0);
            for s in 0..n {
                let k = comp[s];
                if k == NO_COMPONENT {
                    next[s] = 0.0;
                    continue;
                }
                let b = (s << 1) & mask;
                let vs = v[s];
                let mut a = sigma * vs;
                if comp[b] == k {
                    a += w[2 * s] * v[b];
                }
                if comp[b | 1] == k {
                    a += w[2 * s + 1] * v[b | 1];
                }
                next[s] = a;
                let k = k as usize;
                comp_max[k] = comp_max[k].max(a);
                let r = if vs > 0.0 { a / vs } else { 0.0 };
                comp_lo[k] = comp_lo[k].min(r);
                comp_hi[k] = comp_hi[k].max(r);
                cyc_min = cyc_min.min(vs);
            }
            lo = comp_lo.iter().cloned().fold(0.0, f64::max);
            upper = comp_hi.iter().cloned().fold(0.0, f64::max);
            vmax = comp_max.iter().cloned().fold(f64::INFINITY, f64::min);
        }
        hi = upper;
        if !(vmax > 0.0) || !(cyc_min > UNDERFLOW_GUARD) {
            return None;
        }
        if sc {
            let inv = 1.0 / vmax;
            for (dst, src) in v.iter_mut().zip(next.iter()) {
                *dst = src * inv;
            }
        } else {
            for (s, (dst, src)) in v.iter_mut().zip(next.iter()).enumerate() {
                *dst = match comp[s] {
                    NO_COMPONENT => 0.0,
                    k => src / comp_max[k as usize],
                };
            }
        }
        if lo > sigma && {
            let excess = (hi - sigma) / (lo - sigma) - 1.0;
            excess < tol || (it >= STALL_AFTER && excess.ln_1p() < coarse_tol)
        } {
            return Some(finish(lo, hi, sigma, shift, it, true));
        }
        if it % SHIFT_AFTER == 0 {
            let (l, h) = (lo - sigma, hi - sigma);
            let (a, b) = (l.max(0.0), h.max(0.0));
            if b > 0.0 {
                let next_sigma = 0.5 * (a + b);
                lo += next_sigma - sigma;
                hi += next_sigma - sigma;
                sigma = next_sigma;
            }
        }
    }
    Some(finish(lo, hi, sigma, shift, cap, false))
}

fn log_domain(
    graph: &SftGraph,
    logw: &[f64],
    shift: f64,
    v: &mut Vec<f64>,
    tol: f64,
    coarse_tol: f64,
    cap: usize,
) -> PowerOutcome {
    let n = graph.n_states();
    let mask = n - 1;
    let w: Vec<f64> = logw.iter().map(|&x| x - shift).collect();
    // Log of the diagonal shift; -inf means no shift.
    let mut ls = if is_periodic(graph) { 0.0 } else { f64::NEG_INFINITY };
    let comp = graph.component_of();
    let n_comp = graph.components().len();
    let mut comp_lo = vec![f64::INFINITY; n_comp];
    let mut comp_hi = vec![f64::NEG_INFINITY; n_comp];
    let mut comp_max = vec![f64::NEG_INFINITY; n_comp];
    let mut lv: Vec<f64> = v.iter().map(|&x| x.ln()).collect();
    let mut next = vec![f64::NEG_INFINITY; n];
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut break_out = None;

    for it in 1..=cap {
        comp_lo.iter_mut().for_each(|x| *x = f64::INFINITY);
        comp_hi.iter_mut().for_each(|x| *x = f64::NEG_INFINITY);
        comp_max.iter_mut().for_each(|x| *x = f64::NEG_INFINITY);
        for s in 0..n {
            let k = comp[s];
            if k == NO_COMPONENT {
                next[s] = f64::NEG_INFINITY;
                continue;
            }
            let b = (s << 1) & mask;
            let ls_s = lv[s];
            let mut a = ls + ls_s;
            if comp[b] == k {
                a = lse2(a, w[2 * s] + lv[b]);
            }
            if comp[b | 1] == k {
                a = lse2(a, w[2 * s + 1] + lv[b | 1]);
            }
            next[s] = a;
            let k = k as usize;
            comp_max[k] = comp_max[k].max(a);
            let r = if ls_s > f64::NEG_INFINITY { a - ls_s } else { f64::NEG_INFINITY };
            comp_lo[k] = comp_lo[k].min(r);
            if ls_s > f64::NEG_INFINITY {
                comp_hi[k] = comp_hi[k].max(r);
            }
        }
        lo = comp_lo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi = comp_hi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (s, (dst, src)) in lv.iter_mut().zip(next.iter()).enumerate() {
            *dst = match comp[s] {
                NO_COMPONENT => f64::NEG_INFINITY,
                k => src - comp_max[k as usize],
            };
        }
        let (l, h) = (unshift(lo, ls), unshift(hi, ls));
        if l > f64::NEG_INFINITY && (h - l < tol || (it >= STALL_AFTER && h - l < coarse_tol)) {
            break_out = Some(it);
            break;
        }
        if it % SHIFT_AFTER == 0 && h > f64::NEG_INFINITY {
            let est = 0.5 * (l.max(h - 50.0) + h);
            if est.is_finite() {
                ls = est;
            }
        }
    }
    write_back(&lv, v);
    let (iterations, converged) = match break_out {
        Some(it) => (it, true),
        None => (cap, false),
    };
    PowerOutcome {
        log_lower: unshift(lo, ls) + shift,
        log_upper: unshift(hi, ls) + shift,
        iterations,
        converged,
    }
}

/// `log(exp(x) - exp(ls))`, or `-inf` when that is not positive.
fn unshift(x: f64, ls: f64) -> f64 {
    if ls == f64::NEG_INFINITY {
        x
    } else if x <= ls {
        f64::NEG_INFINITY
    } else {
        ls + (x - ls).exp_m1().ln()
    }
}

fn write_back(lv: &[f64], v: &mut [f64]) {
    for (dst, &src) in v.iter_mut().zip(lv) {
        *dst = src.exp();
    }
}
