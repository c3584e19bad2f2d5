//! Per-node decoders. Each turns one node's `(P_m, P_syn)` into its
//! estimate of the remote data unit: `d_i` at `T_i`, `u_i` at `S_i`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientMatrix;
use crate::galois::{Fe, Field};
use crate::linalg::Solution;
use crate::model::{patterns_at, ColumnSet, ErrorPattern, NodeId, Side};
use crate::protocol::NodeObservation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecodeStatus {
    /// No consistent pattern touches this connection, or it solved to zero.
    NoLocalError,
    Corrected,
    /// Consistent patterns disagree on this node's error value, or the
    /// system leaves it undetermined.
    Ambiguous,
    /// The algebraic decoder detected more errors than it can handle.
    Failure,
}

impl fmt::Display for DecodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DecodeStatus::NoLocalError => "no-local-error",
            DecodeStatus::Corrected => "corrected",
            DecodeStatus::Ambiguous => "ambiguous",
            DecodeStatus::Failure => "failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decoded {
    pub node: NodeId,
    pub value: Fe,
    pub status: DecodeStatus,
    /// Error values found for this node's connection, `(e_d, e_u)`.
    pub own_error: (Fe, Fe),
    /// The pattern whose system was used, if any.
    pub pattern: Option<ErrorPattern>,
}

impl Decoded {
    fn plain(obs: &NodeObservation, status: DecodeStatus) -> Decoded {
        Decoded {
            node: obs.node,
            value: obs.p_m,
            status,
            own_error: (Fe::ZERO, Fe::ZERO),
            pattern: None,
        }
    }
}

fn target(node: NodeId, e: (Fe, Fe)) -> Fe {
    match node.side {
        Side::T => e.0,
        Side::S => e.1,
    }
}

fn finish(obs: &NodeObservation, e: (Fe, Fe), pattern: Option<ErrorPattern>, status: DecodeStatus) -> Decoded {
    let t = target(obs.node, e);
    let status = if status == DecodeStatus::Corrected && e.0.is_zero() && e.1.is_zero() {
        DecodeStatus::NoLocalError
    } else {
        status
    };
    Decoded {
        node: obs.node,
        value: obs.p_m + t,
        status,
        own_error: e,
        pattern,
    }
}

/// Solve `[v_2i v_2i+1] (e_d, e_u)^T = P_syn`. Consistent: correct by the
/// solved value. Inconsistent: the error is elsewhere, keep `P_m`.
pub fn decode_single(coeffs: &CoefficientMatrix, obs: &NodeObservation) -> Decoded {
    let i = obs.node.index;
    let a = coeffs.ext_select(&obs.rows, &[2 * i, 2 * i + 1]);
    match a.solve(coeffs.field(), &obs.p_syn) {
        Solution::Inconsistent => Decoded::plain(obs, DecodeStatus::NoLocalError),
        Solution::Unique(x) => finish(obs, (x[0], x[1]), Some(ErrorPattern::new([i], [])), DecodeStatus::Corrected),
        Solution::Underdetermined { particular, pinned } => {
            let idx = usize::from(obs.node.side == Side::S);
            let status = if pinned[idx] {
                DecodeStatus::Corrected
            } else {
                DecodeStatus::Ambiguous
            };
            finish(obs, (particular[0], particular[1]), Some(ErrorPattern::new([i], [])), status)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EnumerateMode {
    /// Stop at the first consistent pattern.
    FirstWins,
    /// Solve every pattern and flag disagreement.
    #[default]
    CheckUnique,
}

/// Try every pattern with `n_e` errors that involves this node's connection
/// (plus the observation's known primary failures), in column order.
pub fn decode_enumerate(coeffs: &CoefficientMatrix, obs: &NodeObservation, n_e: usize, mode: EnumerateMode) -> Decoded {
    let n = coeffs.n();
    let i = obs.node.index;
    let field = coeffs.field();
    let side_idx = usize::from(obs.node.side == Side::S);
    let patterns = patterns_at(n, &obs.rows, i, n_e, &obs.failed_primaries);
    let mut found: Option<Decoded> = None;
    for p in patterns {
        let cols = p.columns(n);
        let a = coeffs.ext_select(&obs.rows, &cols);
        let pos = cols.iter().position(|&c| c == 2 * i).expect("pattern covers own connection");
        let (e, determined) = match a.solve(field, &obs.p_syn) {
            Solution::Inconsistent => continue,
            Solution::Unique(x) => ((x[pos], x[pos + 1]), true),
            Solution::Underdetermined { particular, pinned } => {
                ((particular[pos], particular[pos + 1]), pinned[pos + side_idx])
            }
        };
        let status = if determined {
            DecodeStatus::Corrected
        } else {
            DecodeStatus::Ambiguous
        };
        let mut pattern = p.errors.clone();
        pattern.primary.extend(p.failed_primaries.iter().copied());
        let candidate = finish(obs, e, Some(pattern), status);
        match &mut found {
            None => {
                if mode == EnumerateMode::FirstWins {
                    return candidate;
                }
                found = Some(candidate);
            }
            Some(first) => {
                if candidate.value != first.value || candidate.status == DecodeStatus::Ambiguous {
                    first.status = DecodeStatus::Ambiguous;
                }
            }
        }
    }
    found.unwrap_or_else(|| Decoded::plain(obs, DecodeStatus::NoLocalError))
}

/// A polynomial with coefficients in ascending degree.
type Poly = Vec<Fe>;

fn poly_eval(f: &Field, p: &[Fe], x: Fe) -> Fe {
    p.iter().rev().fold(Fe::ZERO, |acc, &c| f.add(f.mul(acc, x), c))
}

fn poly_trim(mut p: Poly) -> Poly {
    while p.len() > 1 && p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

fn poly_degree(p: &[Fe]) -> usize {
    p.iter().rposition(|c| !c.is_zero()).unwrap_or(0)
}

fn poly_mul(f: &Field, a: &[Fe], b: &[Fe]) -> Poly {
    let mut out = vec![Fe::ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += f.mul(x, y);
        }
    }
    poly_trim(out)
}

/// Formal derivative; in characteristic 2 only odd terms survive.
fn poly_derivative(p: &[Fe]) -> Poly {
    let mut out: Poly = (1..p.len()).map(|k| if k % 2 == 1 { p[k] } else { Fe::ZERO }).collect();
    if out.is_empty() {
        out.push(Fe::ZERO);
    }
    out
}

/// Berlekamp-Massey on `s`, seeded with the erasure locator `gamma` of
/// degree `rho`. Returns the errata locator and its length `L`.
fn berlekamp_massey(f: &Field, s: &[Fe], gamma: &[Fe], rho: usize) -> (Poly, usize) {
    let mut lambda: Poly = gamma.to_vec();
    let mut b: Poly = gamma.to_vec();
    let mut l = rho;
    for r in rho + 1..=s.len() {
        let mut delta = Fe::ZERO;
        for (j, &c) in lambda.iter().enumerate() {
            if j < r {
                delta += f.mul(c, s[r - 1 - j]);
            }
        }
        // x * B
        let mut xb = vec![Fe::ZERO];
        xb.extend_from_slice(&b);
        if delta.is_zero() {
            b = xb;
            continue;
        }
        let mut t = lambda.clone();
        if t.len() < xb.len() {
            t.resize(xb.len(), Fe::ZERO);
        }
        for (k, &c) in xb.iter().enumerate() {
            t[k] += f.mul(delta, c);
        }
        if 2 * l < r + rho {
            l = r + rho - l;
            let inv = f.inv(delta).expect("nonzero discrepancy");
            b = lambda.iter().map(|&c| f.mul(c, inv)).collect();
        } else {
            b = xb;
        }
        lambda = poly_trim(t);
    }
    (poly_trim(lambda), l)
}

/// Outcome of algebraic decoding of one syndrome vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RsOutcome {
    /// Column index and error value for every located errata position.
    Located(Vec<(usize, Fe)>),
    Failure,
}

/// Errors-and-erasures decoding of syndromes `s[t] = sum_j e_j X_j^(b + t)`
/// with `X_j = a^j` over the `columns` code positions. `erasures` are known
/// positions; at most `max_errors` further positions may be in error.
pub fn rs_decode_syndromes(
    f: &Field,
    s: &[Fe],
    b: usize,
    columns: usize,
    erasures: &[usize],
    max_errors: usize,
) -> RsOutcome {
    let rho = erasures.len();
    if rho > s.len() {
        return RsOutcome::Failure;
    }
    let mut gamma: Poly = vec![Fe::ONE];
    for &j in erasures {
        gamma = poly_mul(f, &gamma, &[Fe::ONE, f.exp(j as i64)]);
    }
    if s.iter().all(|v| v.is_zero()) {
        return if rho == 0 {
            RsOutcome::Located(Vec::new())
        } else {
            RsOutcome::Located(erasures.iter().map(|&j| (j, Fe::ZERO)).collect())
        };
    }
    let (lambda, l) = berlekamp_massey(f, s, &gamma, rho);
    let deg = poly_degree(&lambda);
    if deg != l || l < rho || l - rho > max_errors || 2 * (l - rho) + rho > s.len() {
        return RsOutcome::Failure;
    }
    // Chien search over the code positions
    let roots: Vec<usize> = (0..columns)
        .filter(|&j| poly_eval(f, &lambda, f.exp(-(j as i64))).is_zero())
        .collect();
    if roots.len() != deg || erasures.iter().any(|e| !roots.contains(e)) {
        return RsOutcome::Failure;
    }
    // Forney: e_j = X_j^(1-b) Omega(X_j^-1) / Lambda'(X_j^-1)
    let mut omega = poly_mul(f, s, &lambda);
    omega.truncate(s.len());
    let dlambda = poly_derivative(&lambda);
    let mut located = Vec::with_capacity(roots.len());
    for &j in &roots {
        let xinv = f.exp(-(j as i64));
        let den = poly_eval(f, &dlambda, xinv);
        if den.is_zero() {
            return RsOutcome::Failure;
        }
        let num = f.mul(poly_eval(f, &omega, xinv), f.exp(j as i64 * (1 - b as i64)));
        located.push((j, f.div(num, den).expect("nonzero denominator")));
    }
    RsOutcome::Located(located)
}

/// Longest run of consecutive rows; RS syndromes must be consecutive powers.
fn longest_run(rows: &[usize]) -> (usize, usize) {
    let (mut best_start, mut best_len) = (0, 0);
    let mut idx = 0;
    while idx < rows.len() {
        let mut end = idx + 1;
        while end < rows.len() && rows[end] == rows[end - 1] + 1 {
            end += 1;
        }
        if end - idx > best_len {
            best_start = idx;
            best_len = end - idx;
        }
        idx = end;
    }
    (best_start, best_len)
}

fn rs_at_node(coeffs: &CoefficientMatrix, obs: &NodeObservation, max_errors: usize) -> Decoded {
    let f = coeffs.field();
    let i = obs.node.index;
    let (start, len) = longest_run(&obs.rows);
    let s = &obs.p_syn[start..start + len];
    let b = obs.rows.get(start).map_or(1, |r| r + 1);
    let erasures: Vec<usize> = obs.failed_primaries.iter().flat_map(|&c| [2 * c, 2 * c + 1]).collect();
    match rs_decode_syndromes(f, s, b, 2 * coeffs.n(), &erasures, max_errors) {
        RsOutcome::Failure => Decoded::plain(obs, DecodeStatus::Failure),
        RsOutcome::Located(v) => {
            let get = |col: usize| v.iter().find(|(j, _)| *j == col).map_or(Fe::ZERO, |&(_, e)| e);
            let e = (get(2 * i), get(2 * i + 1));
            let mut prim: Vec<usize> = v.iter().filter(|(_, e)| !e.is_zero()).map(|&(j, _)| j / 2).collect();
            prim.extend(obs.failed_primaries.iter().copied());
            let pattern = (!prim.is_empty()).then(|| ErrorPattern::new(prim, []));
            finish(obs, e, pattern, DecodeStatus::Corrected)
        }
    }
}

/// Reed-Solomon decoding for coefficients from
/// [`crate::coefficients::assign_rs`]: at most `2 n_e` symbol errors, all on
/// primary paths.
pub fn decode_rs(coeffs: &CoefficientMatrix, obs: &NodeObservation, n_e: usize) -> Decoded {
    let mut clean = obs.clone();
    clean.failed_primaries.clear();
    rs_at_node(coeffs, &clean, 2 * n_e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureDecoder {
    Enumerate,
    /// Errors-and-erasures Berlekamp-Massey; failed primaries are erasures.
    Rs,
}

/// Decoding with known failures taken from the observation. Failed
/// protection rows are already absent; failed primaries are always part of
/// the assumed pattern, so a node whose own primary failed recovers the full
/// data unit.
pub fn decode_with_failures(
    coeffs: &CoefficientMatrix,
    obs: &NodeObservation,
    n_e: usize,
    method: FailureDecoder,
) -> Decoded {
    match method {
        FailureDecoder::Enumerate => decode_enumerate(coeffs, obs, n_e, EnumerateMode::CheckUnique),
        FailureDecoder::Rs => rs_at_node(coeffs, obs, 2 * n_e),
    }
}
