//! One round of the encoding protocol on both directions of every protection
//! path, and the quantities each end node derives from it.
//!
//! Protection path `k` visits the `2n` end nodes in a fixed order. Its
//! S direction runs from the first node in that order to the last, the T
//! direction runs back. `S_l` adds `alpha_l d_l + beta_l u_hat_l` to each
//! direction and `T_l` adds `alpha_l d_hat_l + beta_l u_l`. A node's `P^(k)` is
//! the sum of what reaches it on the two directions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::CoefficientMatrix;
use crate::galois::{Fe, Field};
use crate::linalg::Matrix;
use crate::model::{ErrorValueVector, NetworkConfig, NodeId, Side};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("expected {want} data units per direction, got {got}")]
    InputLength { want: usize, got: usize },
    #[error("data unit {0} is not a field element")]
    NotInField(Fe),
    #[error("node order for protection path {path} is not a permutation of the end nodes")]
    BadOrder { path: usize },
    #[error("expected one node order per protection path ({want}), got {got}")]
    OrderCount { want: usize, got: usize },
    #[error("link offsets for protection path {path} have the wrong shape")]
    OffsetShape { path: usize },
    #[error("adversary plan: {0}")]
    Plan(String),
    #[error("coefficient matrix is {got_n}x{got_m}, network is {want_n}x{want_m}")]
    Shape {
        want_n: usize,
        want_m: usize,
        got_n: usize,
        got_m: usize,
    },
}

/// The order in which each protection path's S direction visits end nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeOrders(pub Vec<Vec<NodeId>>);

impl NodeOrders {
    /// `S_0, T_0, S_1, T_1, ...` on every path.
    pub fn default_for(n: usize, m: usize) -> NodeOrders {
        let order: Vec<NodeId> = (0..n).flat_map(|i| [NodeId::s(i), NodeId::t(i)]).collect();
        NodeOrders(vec![order; m])
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<(), ProtocolError> {
        if self.0.len() != m {
            return Err(ProtocolError::OrderCount {
                want: m,
                got: self.0.len(),
            });
        }
        for (path, order) in self.0.iter().enumerate() {
            let set: BTreeSet<NodeId> = order.iter().copied().collect();
            if order.len() != 2 * n || set.len() != 2 * n || order.iter().any(|v| v.index >= n) {
                return Err(ProtocolError::BadOrder { path });
            }
        }
        Ok(())
    }

    /// Position of `node` on path `k`.
    pub fn position(&self, k: usize, node: NodeId) -> usize {
        self.0[k]
            .iter()
            .position(|&v| v == node)
            .expect("validated order contains every node")
    }
}

/// What was sent this round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundInputs {
    pub round: u64,
    pub d: Vec<Fe>,
    pub u: Vec<Fe>,
}

/// Channel state after the adversary and failures act.
///
/// `s_offsets[k][t]` is added on the S-direction link entering position `t`
/// of path `k` (index 0 has no incoming link and must be zero);
/// `t_offsets[k][t]` on the T-direction link entering position `t` from
/// position `t + 1` (the last index must be zero).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observables {
    pub d_hat: Vec<Fe>,
    pub u_hat: Vec<Fe>,
    pub s_offsets: Vec<Vec<Fe>>,
    pub t_offsets: Vec<Vec<Fe>>,
    pub failed_primaries: BTreeSet<usize>,
    pub failed_protections: BTreeSet<usize>,
}

impl Observables {
    /// Error- and failure-free delivery of `inputs`.
    pub fn clean(inputs: &RoundInputs, m: usize) -> Observables {
        let len = 2 * inputs.d.len();
        Observables {
            d_hat: inputs.d.clone(),
            u_hat: inputs.u.clone(),
            s_offsets: vec![vec![Fe::ZERO; len]; m],
            t_offsets: vec![vec![Fe::ZERO; len]; m],
            failed_primaries: BTreeSet::new(),
            failed_protections: BTreeSet::new(),
        }
    }

    /// Aggregate corruption of path `k` as seen at order position `t`.
    pub fn seen_offset(&self, k: usize, t: usize) -> Fe {
        let s = &self.s_offsets[k];
        let tt = &self.t_offsets[k];
        let mut acc = Fe::ZERO;
        for &v in &s[1..=t] {
            acc += v;
        }
        for &v in &tt[t..] {
            acc += v;
        }
        acc
    }
}

/// Everything one end node knows after a round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeObservation {
    pub node: NodeId,
    /// `d_hat_i` at `T_i`, `u_hat_i` at `S_i`.
    pub p_m: Fe,
    /// Own data unit: `u_i` at `T_i`, `d_i` at `S_i`.
    pub own: Fe,
    /// `P^(k)` for every protection path (zero for failed paths).
    pub p_k: Vec<Fe>,
    /// `P^(k)'`, the sum with the node's own known term removed.
    pub p_k_prime: Vec<Fe>,
    /// Rows of the syndrome system this node can use.
    pub rows: Vec<usize>,
    /// Syndrome components, one per entry of `rows`.
    pub p_syn: Vec<Fe>,
    pub failed_primaries: BTreeSet<usize>,
    pub failed_protections: BTreeSet<usize>,
}

impl NodeObservation {
    pub fn syndrome_is_zero(&self) -> bool {
        self.p_syn.iter().all(|v| v.is_zero())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundResult {
    pub inputs: RoundInputs,
    pub observables: Observables,
    /// Indexed like [`NetworkConfig::nodes`]: `S_0, T_0, S_1, ...`.
    pub observations: Vec<NodeObservation>,
}

impl RoundResult {
    pub fn observation(&self, node: NodeId) -> &NodeObservation {
        let idx = 2 * node.index + usize::from(node.side == Side::T);
        &self.observations[idx]
    }
}

fn check_inputs(config: &NetworkConfig, coeffs: &CoefficientMatrix, inputs: &RoundInputs) -> Result<(), ProtocolError> {
    let n = config.n();
    if coeffs.n() != n || coeffs.m() != config.m() {
        return Err(ProtocolError::Shape {
            want_n: n,
            want_m: config.m(),
            got_n: coeffs.n(),
            got_m: coeffs.m(),
        });
    }
    for v in [&inputs.d, &inputs.u] {
        if v.len() != n {
            return Err(ProtocolError::InputLength { want: n, got: v.len() });
        }
        if let Some(&bad) = v.iter().find(|&&x| !config.field().contains(x)) {
            return Err(ProtocolError::NotInField(bad));
        }
    }
    Ok(())
}

/// Simulate one round given the post-adversary channel state.
pub fn run_observed(
    config: &NetworkConfig,
    coeffs: &CoefficientMatrix,
    inputs: &RoundInputs,
    obs: &Observables,
    orders: &NodeOrders,
) -> Result<RoundResult, ProtocolError> {
    check_inputs(config, coeffs, inputs)?;
    let (n, m) = (config.n(), config.m());
    orders.validate(n, m)?;
    for k in 0..m {
        let (s, t) = (&obs.s_offsets[k], &obs.t_offsets[k]);
        if s.len() != 2 * n || t.len() != 2 * n || !s[0].is_zero() || !t[2 * n - 1].is_zero() {
            return Err(ProtocolError::OffsetShape { path: k });
        }
    }
    let f = config.field();

    let contribution = |k: usize, node: NodeId| -> Fe {
        let i = node.index;
        let (x, y) = match node.side {
            Side::S => (inputs.d[i], obs.u_hat[i]),
            Side::T => (obs.d_hat[i], inputs.u[i]),
        };
        f.add(f.mul(coeffs.alpha(i, k), x), f.mul(coeffs.beta(i, k), y))
    };

    // received[k][node slot] = incoming S + incoming T on path k
    let slot = |node: NodeId| 2 * node.index + usize::from(node.side == Side::T);
    let mut received = vec![vec![Fe::ZERO; 2 * n]; m];
    for k in 0..m {
        if obs.failed_protections.contains(&k) {
            continue;
        }
        let order = &orders.0[k];
        let mut incoming_s = vec![Fe::ZERO; 2 * n];
        let mut carried = Fe::ZERO;
        for (t, &node) in order.iter().enumerate() {
            carried += obs.s_offsets[k][t];
            incoming_s[t] = carried;
            carried += contribution(k, node);
        }
        let mut carried = Fe::ZERO;
        for t in (0..2 * n).rev() {
            carried += obs.t_offsets[k][t];
            received[k][slot(order[t])] = incoming_s[t] + carried;
            carried += contribution(k, order[t]);
        }
    }

    let rows: Vec<usize> = (0..m).filter(|k| !obs.failed_protections.contains(k)).collect();
    let observations = config
        .nodes()
        .map(|node| {
            let i = node.index;
            let (p_m, own) = match node.side {
                Side::T => (obs.d_hat[i], inputs.u[i]),
                Side::S => (obs.u_hat[i], inputs.d[i]),
            };
            let p_k: Vec<Fe> = (0..m).map(|k| received[k][slot(node)]).collect();
            let p_k_prime: Vec<Fe> = (0..m)
                .map(|k| match node.side {
                    Side::T => f.add(p_k[k], f.mul(coeffs.beta(i, k), own)),
                    Side::S => f.add(p_k[k], f.mul(coeffs.alpha(i, k), own)),
                })
                .collect();
            let p_syn = rows
                .iter()
                .map(|&k| {
                    let coeff = match node.side {
                        Side::T => coeffs.alpha(i, k),
                        Side::S => coeffs.beta(i, k),
                    };
                    f.add(f.mul(coeff, p_m), p_k_prime[k])
                })
                .collect();
            NodeObservation {
                node,
                p_m,
                own,
                p_k,
                p_k_prime,
                rows: rows.clone(),
                p_syn,
                failed_primaries: obs.failed_primaries.clone(),
                failed_protections: obs.failed_protections.clone(),
            }
        })
        .collect();

    Ok(RoundResult {
        inputs: inputs.clone(),
        observables: obs.clone(),
        observations,
    })
}

/// `H_ext * E` restricted to `rows`.
pub fn syndrome_of(coeffs: &CoefficientMatrix, errors: &ErrorValueVector, rows: &[usize]) -> Vec<Fe> {
    let ext = coeffs.h_ext();
    let full = ext.mul_vec(coeffs.field(), &errors.to_vec());
    rows.iter().map(|&r| full[r]).collect()
}

/// The error vector a node effectively experiences: primary error values
/// shared by all nodes, protection values aggregated at the node's position.
/// A failed primary counts as an error of value `(d_i, u_i)`.
pub fn effective_errors(
    inputs: &RoundInputs,
    obs: &Observables,
    orders: &NodeOrders,
    node: NodeId,
    field: &Field,
) -> ErrorValueVector {
    let n = inputs.d.len();
    let m = obs.s_offsets.len();
    let e_p = (0..m)
        .map(|k| {
            if obs.failed_protections.contains(&k) {
                Fe::ZERO
            } else {
                obs.seen_offset(k, orders.position(k, node))
            }
        })
        .collect();
    ErrorValueVector {
        e_d: (0..n).map(|c| field.add(inputs.d[c], obs.d_hat[c])).collect(),
        e_u: (0..n).map(|c| field.add(inputs.u[c], obs.u_hat[c])).collect(),
        e_p,
    }
}

/// Restrict the extended matrix to `rows`, convenient for decoders.
pub fn visible_matrix(coeffs: &CoefficientMatrix, rows: &[usize]) -> Matrix {
    let cols: Vec<usize> = (0..2 * coeffs.n() + coeffs.m()).collect();
    coeffs.ext_select(rows, &cols)
}
