//! Sum-product belief propagation on the Tanner graph, flooding schedule.

use thiserror::Error;

use crate::code::{BinaryMatrix, LinearCode};

/// Incoming message magnitudes are clamped to this value before the
/// tanh rule.
pub const LLR_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BpError {
    #[error("noise standard deviation must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("expected {expected} channel values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
}

/// Bipartite graph of variable and check nodes. Edges are numbered in
/// check-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TannerGraph {
    n: usize,
    check_vars: Vec<Vec<usize>>,
    var_checks: Vec<Vec<usize>>,
    /// Variable of each edge.
    edge_var: Vec<usize>,
    /// First edge of each check, plus a final end marker.
    check_start: Vec<usize>,
    /// Edges incident to each variable.
    var_edges: Vec<Vec<usize>>,
}

impl TannerGraph {
    pub fn new(h: &BinaryMatrix) -> Self {
        let n = h.cols();
        let check_vars: Vec<Vec<usize>> = (0..h.rows()).map(|r| h.row_support(r)).collect();
        let var_checks: Vec<Vec<usize>> = (0..n).map(|c| h.col_support(c)).collect();
        let mut edge_var = Vec::new();
        let mut check_start = vec![0];
        let mut var_edges = vec![Vec::new(); n];
        for vars in &check_vars {
            for &v in vars {
                var_edges[v].push(edge_var.len());
                edge_var.push(v);
            }
            check_start.push(edge_var.len());
        }
        TannerGraph {
            n,
            check_vars,
            var_checks,
            edge_var,
            check_start,
            var_edges,
        }
    }

    pub fn from_code(code: &LinearCode) -> Self {
        Self::new(code.parity_check())
    }

    pub fn variables(&self) -> usize {
        self.n
    }

    pub fn checks(&self) -> usize {
        self.check_vars.len()
    }

    pub fn edges(&self) -> usize {
        self.edge_var.len()
    }

    pub fn check_neighbors(&self, check: usize) -> &[usize] {
        &self.check_vars[check]
    }

    pub fn var_neighbors(&self, var: usize) -> &[usize] {
        &self.var_checks[var]
    }

    fn syndrome_is_zero(&self, bits: &[u8]) -> bool {
        self.check_vars
            .iter()
            .all(|vars| vars.iter().fold(0u8, |acc, &v| acc ^ bits[v]) == 0)
    }
}

/// `2 y / sigma^2`; positive values favour bit 0.
pub fn channel_llr(y: &[f64], sigma: f64) -> Result<Vec<f64>, BpError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(BpError::BadSigma(sigma));
    }
    let scale = 2.0 / (sigma * sigma);
    Ok(y.iter().map(|v| scale * v).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpOutput {
    pub bits: Vec<u8>,
    /// Posterior LLR of each bit after the last iteration.
    pub posterior: Vec<f64>,
    pub iterations: usize,
    /// Whether `bits` satisfies every check.
    pub converged: bool,
}

fn hard(llr: &[f64]) -> Vec<u8> {
    llr.iter().map(|&l| u8::from(l < 0.0)).collect()
}

/// Runs up to `max_iters` flooding iterations. With `early_stop`, decoding
/// ends as soon as the hard decision satisfies every check, including
/// before the first iteration.
pub fn bp_decode(graph: &TannerGraph, llr: &[f64], max_iters: usize, early_stop: bool) -> Result<BpOutput, BpError> {
    if llr.len() != graph.n {
        return Err(BpError::LengthMismatch {
            expected: graph.n,
            found: llr.len(),
        });
    }
    let mut posterior = llr.to_vec();
    let mut bits = hard(&posterior);
    if max_iters == 0 || (early_stop && graph.syndrome_is_zero(&bits)) {
        let converged = graph.syndrome_is_zero(&bits);
        return Ok(BpOutput {
            bits,
            posterior,
            iterations: 0,
            converged,
        });
    }
    let edges = graph.edges();
    // variable-to-check messages, stored as tanh(q / 2)
    let mut var_msg: Vec<f64> = graph.edge_var.iter().map(|&v| llr[v]).collect();
    let mut check_msg = vec![0.0; edges];
    let mut t = vec![0.0; edges];
    let mut iterations = 0;
    for iter in 1..=max_iters {
        iterations = iter;
        for (e, q) in var_msg.iter().enumerate() {
            t[e] = (q.clamp(-LLR_CLAMP, LLR_CLAMP) * 0.5).tanh();
        }
        for c in 0..graph.checks() {
            let (lo, hi) = (graph.check_start[c], graph.check_start[c + 1]);
            // leave-one-out products from prefix and suffix runs
            let mut prefix = 1.0;
            for e in lo..hi {
                check_msg[e] = prefix;
                prefix *= t[e];
            }
            let mut suffix = 1.0;
            for e in (lo..hi).rev() {
                let p = (check_msg[e] * suffix).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                check_msg[e] = 2.0 * p.atanh();
                suffix *= t[e];
            }
        }
        for v in 0..graph.n {
            posterior[v] = llr[v] + graph.var_edges[v].iter().map(|&e| check_msg[e]).sum::<f64>();
        }
        bits = hard(&posterior);
        if early_stop && graph.syndrome_is_zero(&bits) {
            break;
        }
        for (e, q) in var_msg.iter_mut().enumerate() {
            *q = posterior[graph.edge_var[e]] - check_msg[e];
        }
    }
    let converged = graph.syndrome_is_zero(&bits);
    Ok(BpOutput {
        bits,
        posterior,
        iterations,
        converged,
    })
}
