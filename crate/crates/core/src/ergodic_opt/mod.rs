//! Endpoints of the Birkhoff spectrum as extreme cycle means of the cut-out
//! de Bruijn graph weighted by `psi_c`.

mod enumerate;
mod graph;
mod howard;
mod karp;

pub use enumerate::{exhaustive_max_mean, EXHAUSTIVE_MAX_NODES};
pub use graph::Digraph;
pub use howard::howard_max_mean;
pub use karp::karp_max_mean;

use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::symbolic::{SftGraph, TorusPoint};
use crate::transfer::DepthContext;

/// Mean-cycle algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Karp up to the given depth, policy iteration above it.
    Auto { karp_max_depth: u32 },
    Karp,
    Howard,
    /// Pruned enumeration of simple cycles; small graphs only.
    Exhaustive,
}

impl Default for Method {
    fn default() -> Self {
        Method::Auto { karp_max_depth: Config::default().karp_max_depth }
    }
}

/// An optimal cycle and its mean weight.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanCycle {
    pub value: f64,
    pub cycle: Vec<u64>,
}

fn run(g: &Digraph, method: Method, depth: u32) -> Result<MeanCycle> {
    let found = match method {
        Method::Auto { karp_max_depth } if depth <= karp_max_depth => karp_max_mean(g),
        Method::Auto { .. } | Method::Howard => howard_max_mean(g),
        Method::Karp => karp_max_mean(g),
        Method::Exhaustive => exhaustive_max_mean(g)?,
    };
    let (_, cycle) = found.ok_or(Error::DegenerateGraph { depth })?;
    let value = g.cycle_mean(&cycle).expect("witness edges exist");
    Ok(MeanCycle { value, cycle: cycle.into_iter().map(|v| v as u64).collect() })
}

/// Maximum mean cycle of a plain digraph.
pub fn digraph_max_mean(g: &Digraph, method: Method) -> Result<MeanCycle> {
    // Depth only picks the algorithm here; log2 of the size plays its role.
    let depth = usize::BITS - g.len().saturating_sub(1).leading_zeros();
    run(g, method, depth)
}

pub fn digraph_min_mean(g: &Digraph, method: Method) -> Result<MeanCycle> {
    let mut out = digraph_max_mean(&g.negated(), method)?;
    out.value = -out.value;
    Ok(out)
}

/// Maximum over cycles of the allowed graph of the mean edge weight.
/// `weights` is indexed by edge word `(s << 1) | b`; non-finite entries drop the edge.
pub fn max_mean_cycle(graph: &SftGraph, weights: &[f64]) -> Result<MeanCycle> {
    max_mean_cycle_with(graph, weights, Method::default())
}

pub fn min_mean_cycle(graph: &SftGraph, weights: &[f64]) -> Result<MeanCycle> {
    min_mean_cycle_with(graph, weights, Method::default())
}

pub fn max_mean_cycle_with(graph: &SftGraph, weights: &[f64], method: Method) -> Result<MeanCycle> {
    run(&Digraph::from_sft(graph, weights)?, method, graph.depth())
}

pub fn min_mean_cycle_with(graph: &SftGraph, weights: &[f64], method: Method) -> Result<MeanCycle> {
    let neg: Vec<f64> = weights.iter().map(|w| -w).collect();
    let mut out = max_mean_cycle_with(graph, &neg, method)?;
    out.value = -out.value;
    Ok(out)
}

/// Brackets for `alpha(c)` and `beta(c)` at one depth.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndpointEstimate {
    pub c: TorusPoint,
    pub depth: u32,
    pub alpha_bracket: (f64, f64),
    pub beta_bracket: (f64, f64),
    pub alpha_divergent: bool,
    /// Optimal cycles for the lower alpha end and the upper beta end.
    pub witness_cycles: (Vec<u64>, Vec<u64>),
}

struct Raw {
    alpha: (MeanCycle, MeanCycle),
    beta: (MeanCycle, MeanCycle),
}

fn raw_endpoints(c: &TorusPoint, n: u32, method: Method) -> Result<Raw> {
    let ctx = DepthContext::cut_out(c, n)?;
    let lo = ctx.log_weights(1.0, false);
    let hi = ctx.log_weights(1.0, true);
    Ok(Raw {
        alpha: (min_mean_cycle_with(&ctx.graph, &lo, method)?, min_mean_cycle_with(&ctx.graph, &hi, method)?),
        beta: (max_mean_cycle_with(&ctx.graph, &lo, method)?, max_mean_cycle_with(&ctx.graph, &hi, method)?),
    })
}

/// Depth-`n` brackets for the endpoints. The edge weights are the extrema of
/// `psi_c` on the edge cylinders, so every invariant measure of the depth-`n`
/// subshift integrates `psi_c` to a value between the two cycle means.
pub fn endpoints(c: &TorusPoint, n: u32, cfg: &Config) -> Result<EndpointEstimate> {
    let method = Method::Auto { karp_max_depth: cfg.karp_max_depth };
    let raw = raw_endpoints(c, n, method)?;
    let alpha_lo = raw.alpha.0.value;
    let mut alpha_divergent = false;
    if alpha_lo < -cfg.alpha_threshold && n >= 3 {
        // Flag only if the lower end kept falling over the last three depths.
        let mut prev = alpha_lo;
        alpha_divergent = true;
        for m in [n - 1, n - 2] {
            match raw_endpoints(c, m, method) {
                Ok(r) if r.alpha.0.value > prev => prev = r.alpha.0.value,
                _ => {
                    alpha_divergent = false;
                    break;
                }
            }
        }
    }
    Ok(EndpointEstimate {
        c: *c,
        depth: n,
        alpha_bracket: (alpha_lo, raw.alpha.1.value),
        beta_bracket: (raw.beta.0.value, raw.beta.1.value),
        alpha_divergent,
        witness_cycles: (raw.alpha.0.cycle, raw.beta.1.cycle),
    })
}
