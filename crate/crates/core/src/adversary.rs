//! Seeded adversarial errors and known-location failures.
//!
//! A protection-path corruption is described by what each end node ends up
//! seeing (`e_p` differs by node, depending on where along the path the data
//! was changed) or by a single tampered link. Either form is turned into
//! per-link offsets against the path's node order when applied.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::CoefficientMatrix;
use crate::galois::{Fe, Field};
use crate::model::{combinations, ErrorPattern, ErrorValueVector, FailurePattern, NetworkConfig, NodeId, Side};
use crate::protocol::{NodeOrders, Observables, RoundInputs};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("connection {0} out of range")]
    UnknownConnection(usize),
    #[error("protection path {0} out of range")]
    UnknownPath(usize),
    #[error("node {0} out of range")]
    UnknownNode(NodeId),
    #[error("link position {position} out of range for {direction:?} direction")]
    BadLink { direction: Side, position: usize },
    #[error("error on connection {0} has both values zero")]
    ZeroError(usize),
    #[error("{0} listed twice")]
    Duplicate(String),
    #[error("errors and failures overlap on {0}")]
    Overlap(String),
    #[error("plan has {got} errors, bound is {bound}")]
    TooManyErrors { got: usize, bound: usize },
    #[error("value {0} is not a field element")]
    NotInField(Fe),
    #[error("{errors} errors plus {failures} failures exceed the {paths} available paths")]
    Infeasible {
        errors: usize,
        failures: usize,
        paths: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimaryError {
    pub connection: usize,
    pub e_d: Fe,
    pub e_u: Fe,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Corruption {
    /// Aggregate value each node sees; missing nodes see zero.
    PerNode { values: BTreeMap<NodeId, Fe> },
    /// Every node sees the same value.
    Uniform { value: Fe },
    /// One tampered link: the link entering order position `position` on
    /// the given direction. Positions with no incoming link on that
    /// direction are clamped to the nearest one.
    Link { direction: Side, position: usize, value: Fe },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectionError {
    pub path: usize,
    pub corruption: Corruption,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AdversaryPlan {
    #[serde(default)]
    pub primary: Vec<PrimaryError>,
    #[serde(default)]
    pub protection: Vec<ProtectionError>,
    #[serde(default)]
    pub failures: FailurePattern,
    /// Seed the plan was drawn from, kept for replay.
    #[serde(default)]
    pub seed: u64,
}

impl AdversaryPlan {
    pub fn empty() -> AdversaryPlan {
        AdversaryPlan::default()
    }

    /// Corrupted paths; stacked corruptions of one protection path count once.
    pub fn error_count(&self) -> usize {
        let paths: BTreeSet<usize> = self.protection.iter().map(|e| e.path).collect();
        self.primary.len() + paths.len()
    }

    pub fn pattern(&self) -> ErrorPattern {
        ErrorPattern::new(
            self.primary.iter().map(|e| e.connection),
            self.protection.iter().map(|e| e.path),
        )
    }

    pub fn validate(&self, config: &NetworkConfig, bound: Option<usize>) -> Result<(), AdversaryError> {
        let (n, m) = (config.n(), config.m());
        let field = config.field();
        let in_field = |v: Fe| {
            if field.contains(v) {
                Ok(())
            } else {
                Err(AdversaryError::NotInField(v))
            }
        };
        let mut seen = BTreeSet::new();
        for e in &self.primary {
            if e.connection >= n {
                return Err(AdversaryError::UnknownConnection(e.connection));
            }
            if !seen.insert(e.connection) {
                return Err(AdversaryError::Duplicate(format!("connection {}", e.connection)));
            }
            if e.e_d.is_zero() && e.e_u.is_zero() {
                return Err(AdversaryError::ZeroError(e.connection));
            }
            in_field(e.e_d)?;
            in_field(e.e_u)?;
            if self.failures.primary.contains(&e.connection) {
                return Err(AdversaryError::Overlap(format!("connection {}", e.connection)));
            }
        }
        // several corruptions of one protection path are allowed; they
        // aggregate into a single error per node
        for e in &self.protection {
            if e.path >= m {
                return Err(AdversaryError::UnknownPath(e.path));
            }
            if self.failures.protection.contains(&e.path) {
                return Err(AdversaryError::Overlap(format!("protection path {}", e.path)));
            }
            match &e.corruption {
                Corruption::PerNode { values } => {
                    for (&node, &v) in values {
                        if node.index >= n {
                            return Err(AdversaryError::UnknownNode(node));
                        }
                        in_field(v)?;
                    }
                }
                Corruption::Uniform { value } => in_field(*value)?,
                Corruption::Link {
                    direction,
                    position,
                    value,
                } => {
                    if *position >= 2 * n {
                        return Err(AdversaryError::BadLink {
                            direction: *direction,
                            position: *position,
                        });
                    }
                    in_field(*value)?;
                }
            }
        }
        if let Some(&c) = self.failures.primary.iter().find(|&&c| c >= n) {
            return Err(AdversaryError::UnknownConnection(c));
        }
        if let Some(&p) = self.failures.protection.iter().find(|&&p| p >= m) {
            return Err(AdversaryError::UnknownPath(p));
        }
        if let Some(bound) = bound {
            if self.error_count() > bound {
                return Err(AdversaryError::TooManyErrors {
                    got: self.error_count(),
                    bound,
                });
            }
        }
        Ok(())
    }

    /// Corrupt one round's transmissions.
    pub fn apply(
        &self,
        config: &NetworkConfig,
        inputs: &RoundInputs,
        orders: &NodeOrders,
    ) -> Result<Observables, AdversaryError> {
        self.validate(config, None)?;
        let n = config.n();
        let f = config.field();
        let mut obs = Observables::clean(inputs, config.m());
        for e in &self.primary {
            obs.d_hat[e.connection] = f.add(inputs.d[e.connection], e.e_d);
            obs.u_hat[e.connection] = f.add(inputs.u[e.connection], e.e_u);
        }
        for &c in &self.failures.primary {
            obs.d_hat[c] = Fe::ZERO;
            obs.u_hat[c] = Fe::ZERO;
        }
        obs.failed_primaries = self.failures.primary.clone();
        obs.failed_protections = self.failures.protection.clone();
        for e in &self.protection {
            let k = e.path;
            match &e.corruption {
                Corruption::Link {
                    direction: Side::S,
                    position,
                    value,
                } => {
                    // nothing enters position 0 on the S direction; tampering
                    // with what it emits is the link into position 1
                    let p = (*position).max(1).min(2 * n - 1);
                    obs.s_offsets[k][p] += *value;
                }
                Corruption::Link {
                    direction: Side::T,
                    position,
                    value,
                } => {
                    let p = (*position).min(2 * n - 2);
                    obs.t_offsets[k][p] += *value;
                }
                other => {
                    let targets: Vec<Fe> = orders.0[k]
                        .iter()
                        .map(|node| match other {
                            Corruption::PerNode { values } => values.get(node).copied().unwrap_or(Fe::ZERO),
                            Corruption::Uniform { value } => *value,
                            Corruption::Link { .. } => unreachable!(),
                        })
                        .collect();
                    let (s, t) = offsets_for_targets(&targets);
                    for (acc, v) in obs.s_offsets[k].iter_mut().zip(s) {
                        *acc += v;
                    }
                    for (acc, v) in obs.t_offsets[k].iter_mut().zip(t) {
                        *acc += v;
                    }
                }
            }
        }
        Ok(obs)
    }

    /// Error values attributable to the adversary as seen at `node`.
    /// Failures are not included.
    pub fn error_vector(&self, config: &NetworkConfig, orders: &NodeOrders, node: NodeId) -> ErrorValueVector {
        let mut e = ErrorValueVector::zero(config.n(), config.m());
        for p in &self.primary {
            e.e_d[p.connection] = p.e_d;
            e.e_u[p.connection] = p.e_u;
        }
        let zero = RoundInputs {
            round: 0,
            d: vec![Fe::ZERO; config.n()],
            u: vec![Fe::ZERO; config.n()],
        };
        let protection_only = AdversaryPlan {
            protection: self.protection.clone(),
            ..AdversaryPlan::default()
        };
        let obs = protection_only
            .apply(config, &zero, orders)
            .expect("plan validated by caller");
        for q in &self.protection {
            e.e_p[q.path] = obs.seen_offset(q.path, orders.position(q.path, node));
        }
        e
    }
}

/// Link offsets realizing per-position targets `e_t`: the T link into
/// position 0 carries `e_0`, the S link into position 1 carries `e_1`, and the
/// S link into position `t > 1` carries `e_t - e_(t-1)`.
fn offsets_for_targets(targets: &[Fe]) -> (Vec<Fe>, Vec<Fe>) {
    let len = targets.len();
    let mut s = vec![Fe::ZERO; len];
    let mut t = vec![Fe::ZERO; len];
    t[0] = targets[0];
    s[1] = targets[1];
    for p in 2..len {
        s[p] = targets[p] + targets[p - 1];
    }
    (s, t)
}

fn nonzero(rng: &mut impl Rng, field: &Field) -> Fe {
    Fe(rng.gen_range(1..field.size()) as u16)
}

fn nonzero_pair(rng: &mut impl Rng, field: &Field) -> (Fe, Fe) {
    loop {
        let d = Fe(rng.gen_range(0..field.size()) as u16);
        let u = Fe(rng.gen_range(0..field.size()) as u16);
        if !(d.is_zero() && u.is_zero()) {
            return (d, u);
        }
    }
}

/// Random values for fixed error locations. Protection errors draw an
/// independent nonzero value per node.
pub fn plan_for_pattern(
    config: &NetworkConfig,
    pattern: &ErrorPattern,
    failures: &FailurePattern,
    rng: &mut impl Rng,
) -> AdversaryPlan {
    let f = config.field();
    let primary = pattern
        .primary
        .iter()
        .map(|&c| {
            let (e_d, e_u) = nonzero_pair(rng, f);
            PrimaryError { connection: c, e_d, e_u }
        })
        .collect();
    let protection = pattern
        .protection
        .iter()
        .map(|&p| ProtectionError {
            path: p,
            corruption: Corruption::PerNode {
                values: config.nodes().map(|v| (v, nonzero(rng, f))).collect(),
            },
        })
        .collect();
    AdversaryPlan {
        primary,
        protection,
        failures: failures.clone(),
        seed: 0,
    }
}

/// Uniformly placed errors and failures with random nonzero values.
///
/// With `targeted`, every placement of `n_e` errors and `n_f` failures is
/// tried with random values and the plan with the highest score is
/// returned; the score is typically the number of nodes that decode wrongly.
pub fn random_plan(
    config: &NetworkConfig,
    n_e: usize,
    n_f: usize,
    seed: u64,
    targeted: Option<&dyn Fn(&AdversaryPlan) -> usize>,
) -> Result<AdversaryPlan, AdversaryError> {
    let (n, m) = (config.n(), config.m());
    if n_e + n_f > n + m {
        return Err(AdversaryError::Infeasible {
            errors: n_e,
            failures: n_f,
            paths: n + m,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let split = |ids: &[usize]| -> (Vec<usize>, Vec<usize>) {
        let prim = ids.iter().copied().filter(|&x| x < n).collect();
        let prot = ids.iter().copied().filter(|&x| x >= n).map(|x| x - n).collect();
        (prim, prot)
    };
    let mut plan = match targeted {
        None => {
            let picked = sample(&mut rng, n + m, n_e + n_f).into_vec();
            let (ep, eq) = split(&picked[..n_e]);
            let (fp, fq) = split(&picked[n_e..]);
            plan_for_pattern(
                config,
                &ErrorPattern::new(ep, eq),
                &FailurePattern::new(fp, fq),
                &mut rng,
            )
        }
        Some(score) => {
            let all: Vec<usize> = (0..n + m).collect();
            let mut best: Option<(usize, AdversaryPlan)> = None;
            for errs in combinations(&all, n_e) {
                let rest: Vec<usize> = all.iter().copied().filter(|x| !errs.contains(x)).collect();
                for fails in combinations(&rest, n_f) {
                    let (ep, eq) = split(&errs);
                    let (fp, fq) = split(&fails);
                    let candidate = plan_for_pattern(
                        config,
                        &ErrorPattern::new(ep, eq),
                        &FailurePattern::new(fp, fq),
                        &mut rng,
                    );
                    let s = score(&candidate);
                    if best.as_ref().is_none_or(|(b, _)| s > *b) {
                        best = Some((s, candidate));
                    }
                }
            }
            best.expect("at least one placement").1
        }
    };
    plan.seed = seed;
    Ok(plan)
}

/// How error values are chosen in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueSampling {
    /// Every nonzero pair for primary errors and every nonzero uniform value
    /// for protection errors. Only sensible for single errors in small fields.
    Exhaustive,
    Sampled { per_pattern: usize, seed: u64 },
}

/// All single-location plans: each primary error gets every requested value
/// pair, each protection error gets per-node values (sampled) or uniform
/// values (exhaustive).
pub fn single_error_plans(config: &NetworkConfig, values: ValueSampling, include_protection: bool) -> Vec<AdversaryPlan> {
    let f = config.field();
    let mut plans = Vec::new();
    match values {
        ValueSampling::Exhaustive => {
            for c in 0..config.n() {
                for e_d in f.elements() {
                    for e_u in f.elements() {
                        if e_d.is_zero() && e_u.is_zero() {
                            continue;
                        }
                        plans.push(AdversaryPlan {
                            primary: vec![PrimaryError { connection: c, e_d, e_u }],
                            ..AdversaryPlan::default()
                        });
                    }
                }
            }
            if include_protection {
                for p in 0..config.m() {
                    for value in f.nonzero_elements() {
                        plans.push(AdversaryPlan {
                            protection: vec![ProtectionError {
                                path: p,
                                corruption: Corruption::Uniform { value },
                            }],
                            ..AdversaryPlan::default()
                        });
                    }
                }
            }
        }
        ValueSampling::Sampled { per_pattern, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let none = FailurePattern::none();
            for c in 0..config.n() {
                for _ in 0..per_pattern {
                    plans.push(plan_for_pattern(config, &ErrorPattern::new([c], []), &none, &mut rng));
                }
            }
            if include_protection {
                for p in 0..config.m() {
                    for _ in 0..per_pattern {
                        plans.push(plan_for_pattern(config, &ErrorPattern::new([], [p]), &none, &mut rng));
                    }
                }
            }
        }
    }
    plans
}

/// A plan built from a linear dependency among error columns, together with
/// the node it is expected to mislead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionWitness {
    pub plan: AdversaryPlan,
    pub victim: NodeId,
}

/// Given columns of `[H | I]` that are linearly dependent, inject errors
/// whose syndrome equals that of a different error touching the victim's
/// connection. Returns `None` when the columns are independent or no primary
/// column takes part in the dependency.
pub fn confusion_plan(coeffs: &CoefficientMatrix, columns: &[usize]) -> Option<ConfusionWitness> {
    let n = coeffs.n();
    let rows: Vec<usize> = (0..coeffs.m()).collect();
    let x = coeffs.ext_select(&rows, columns).null_vector(coeffs.field())?;
    let value = |col: usize| {
        columns
            .iter()
            .position(|&c| c == col)
            .map_or(Fe::ZERO, |idx| x[idx])
    };
    let victim_conn = columns
        .iter()
        .rev()
        .filter(|&&c| c < 2 * n)
        .map(|&c| c / 2)
        .find(|&c| !value(2 * c).is_zero() || !value(2 * c + 1).is_zero())?;
    let (vd, vu) = (value(2 * victim_conn), value(2 * victim_conn + 1));
    let victim = if vd.is_zero() {
        NodeId::s(victim_conn)
    } else {
        NodeId::t(victim_conn)
    };

    let mut plan = AdversaryPlan::default();
    let mut conns: Vec<usize> = columns.iter().filter(|&&c| c < 2 * n).map(|&c| c / 2).collect();
    conns.dedup();
    for c in conns {
        if c == victim_conn {
            continue;
        }
        let (e_d, e_u) = (value(2 * c), value(2 * c + 1));
        if !(e_d.is_zero() && e_u.is_zero()) {
            plan.primary.push(PrimaryError { connection: c, e_d, e_u });
        }
    }
    for &col in columns.iter().filter(|&&c| c >= 2 * n) {
        let v = value(col);
        if !v.is_zero() {
            plan.protection.push(ProtectionError {
                path: col - 2 * n,
                corruption: Corruption::Uniform { value: v },
            });
        }
    }
    if plan.error_count() == 0 {
        // the victim's own two columns are dependent: the error cancels in
        // every syndrome
        plan.primary.push(PrimaryError {
            connection: victim_conn,
            e_d: vd,
            e_u: vu,
        });
    }
    Some(ConfusionWitness { plan, victim })
}
