//! Scenario files, the end-to-end pipeline, and Monte Carlo estimation.
//!
//! All randomness derives from the scenario's root seed: case `c` of a sweep
//! and trial `t` of a Monte Carlo run each draw from their own ChaCha stream,
//! so results do not depend on how work is scheduled across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::adversary::{
    confusion_plan, plan_for_pattern, random_plan, single_error_plans, AdversaryError, AdversaryPlan, ValueSampling,
};
use crate::coefficients::{
    assign_general_topology, assign_random, assign_rs, assign_simple, assign_simple_with, assign_vandermonde,
    multi_error_bound, simple_layout, single_error_bound, verify_condition, verify_errors_and_failures,
    CoefficientError, CoefficientMatrix, Condition, VerifyMode, VerifyReport,
};
use crate::decoder::{decode_enumerate, decode_rs, decode_single, decode_with_failures, DecodeStatus, EnumerateMode, FailureDecoder};
use crate::galois::{Fe, Field, GaloisError};
use crate::model::{combinations, ErrorPattern, FailurePattern, ModelError, NetworkConfig, NodeId, Side};
use crate::protocol::{run_observed, NodeOrders, ProtocolError, RoundInputs};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("scenario field `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("unsupported scenario version {0} (expected {SCHEMA_VERSION})")]
    Version(u32),
    #[error("precondition {0} does not hold for the assigned coefficients")]
    Precondition(String),
    #[error("unknown bundled scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Galois(#[from] GaloisError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Coefficients(#[from] CoefficientError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("worker pool: {0}")]
    Pool(String),
}

fn schema(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Schema {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub field: FieldSpec,
    pub network: NetworkSpec,
    pub coefficients: CoefficientSpec,
    #[serde(default)]
    pub verify: Option<VerifySpec>,
    #[serde(default)]
    pub adversary: AdversarySpec,
    #[serde(default)]
    pub decoder: DecoderSpec,
    /// Explicit plans, run after any generated ones.
    #[serde(default)]
    pub plans: Vec<AdversaryPlan>,
    #[serde(default)]
    pub expect: ExpectSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub bits: u32,
    #[serde(default)]
    pub poly: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub n: usize,
    pub m: usize,
    /// Connections protected by each protection path; all of them if absent.
    #[serde(default)]
    pub coverage: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Simple,
    Vandermonde,
    Random,
    Rs,
    /// Random with coverage zeros, redrawn until the verify condition holds.
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub scheme: Scheme,
    #[serde(default)]
    pub gammas: Option<Vec<Fe>>,
    /// Accept repeated gammas in the simple scheme.
    #[serde(default)]
    pub allow_duplicate_gammas: bool,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Redraws for `random` (until the verify condition holds) and `general`.
    #[serde(default = "one")]
    pub attempts: usize,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionName {
    Theorem1,
    Theorem2,
    Theorem3,
    Theorem4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub condition: ConditionName,
    #[serde(default = "one")]
    pub errors: usize,
    #[serde(default)]
    pub failures: usize,
    /// Abort the scenario if the condition does not hold.
    #[serde(default = "yes")]
    pub require: bool,
    #[serde(default)]
    pub samples: Option<usize>,
}

impl VerifySpec {
    fn condition(&self) -> Condition {
        match self.condition {
            ConditionName::Theorem1 => Condition::Theorem1,
            ConditionName::Theorem2 => Condition::Theorem2,
            ConditionName::Theorem3 => Condition::Theorem3 { errors: self.errors },
            ConditionName::Theorem4 => Condition::Theorem4 {
                errors: self.errors,
                failures: self.failures,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversaryMode {
    /// Only the explicit plans, or one clean round if there are none.
    #[default]
    None,
    /// Every single-error location.
    Single,
    /// Every placement of `errors` errors and `failures` failures.
    Patterns,
    /// `count` independently drawn plans.
    Random,
    /// A plan built from a dependency among `columns`.
    Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    #[serde(default)]
    pub mode: AdversaryMode,
    #[serde(default)]
    pub errors: usize,
    #[serde(default)]
    pub failures: usize,
    /// Values per location; exhaustive when absent in `single` mode.
    #[serde(default)]
    pub per_pattern: Option<usize>,
    #[serde(default = "yes")]
    pub include_protection: bool,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default)]
    pub columns: Vec<usize>,
}

impl Default for AdversarySpec {
    fn default() -> Self {
        AdversarySpec {
            mode: AdversaryMode::None,
            errors: 0,
            failures: 0,
            per_pattern: None,
            include_protection: true,
            count: 1,
            columns: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderMethod {
    #[default]
    Single,
    Enumerate,
    Rs,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSpec {
    #[serde(default)]
    pub method: DecoderMethod,
    /// Error budget; defaults to the adversary's error count (at least 1).
    #[serde(default)]
    pub errors: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectSpec {
    /// Minimum fraction of node decodings that must be correct. Defaults to
    /// 1 when no other expectation is given.
    #[serde(default)]
    pub success_rate: Option<f64>,
    #[serde(default)]
    pub zero_syndromes: Option<bool>,
    /// At least this many wrong node decodings (converse checks).
    #[serde(default)]
    pub min_wrong_nodes: Option<u64>,
    #[serde(default)]
    pub verify_holds: Option<bool>,
    /// Monte Carlo only: lower confidence limit at or above the bound.
    #[serde(default)]
    pub meets_bound: Option<bool>,
}

fn parse_error(text: &str, err: toml::de::Error) -> HarnessError {
    let line = err
        .span()
        .map_or(0, |span| text[..span.start.min(text.len())].matches('\n').count() + 1);
    // toml reports nothing when the input stops mid-value
    let message = match err.message().trim() {
        "" => "unexpected end of input".to_string(),
        m => m.replace('\n', "; "),
    };
    HarnessError::Parse { line, message }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, HarnessError> {
        let s: Scenario = toml::from_str(text).map_err(|e| parse_error(text, e))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.version != SCHEMA_VERSION {
            return Err(HarnessError::Version(self.version));
        }
        if self.network.n == 0 {
            return Err(schema("network.n", "must be at least 1"));
        }
        if self.network.m == 0 {
            return Err(schema("network.m", "must be at least 1"));
        }
        if let Some(cov) = &self.network.coverage {
            if cov.len() != self.network.m {
                return Err(schema("network.coverage", format!("need {} entries", self.network.m)));
            }
        }
        if self.coefficients.scheme == Scheme::Simple && self.network.m != 4 {
            return Err(schema("network.m", "the simple scheme uses exactly 4 protection paths"));
        }
        if self.coefficients.attempts == 0 {
            return Err(schema("coefficients.attempts", "must be at least 1"));
        }
        if self.coefficients.scheme == Scheme::General && self.verify.is_none() {
            return Err(schema("verify", "the general scheme needs a condition to redraw against"));
        }
        if self.adversary.mode == AdversaryMode::Confusion && self.adversary.columns.is_empty() {
            return Err(schema("adversary.columns", "confusion mode needs dependent columns"));
        }
        if matches!(self.expect.success_rate, Some(r) if !(0.0..=1.0).contains(&r)) {
            return Err(schema("expect.success_rate", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn field(&self) -> Result<Field, HarnessError> {
        Ok(match self.field.poly {
            Some(p) => Field::with_poly(self.field.bits, p)?,
            None => Field::new(self.field.bits)?,
        })
    }

    pub fn config(&self) -> Result<NetworkConfig, HarnessError> {
        let f = self.field()?;
        let (n, m) = (self.network.n, self.network.m);
        Ok(match &self.network.coverage {
            None => NetworkConfig::full(n, m, f)?,
            Some(cov) => NetworkConfig::with_coverage(n, m, f, cov.iter().map(|c| c.iter().copied().collect()).collect())?,
        })
    }

    fn coefficient_seed(&self) -> u64 {
        self.coefficients.seed.unwrap_or(self.seed)
    }

    fn decoder_errors(&self) -> usize {
        self.decoder.errors.unwrap_or(self.adversary.errors.max(1))
    }
}

/// Names and sources of the scenarios shipped with the library.
pub const BUNDLED: &[(&str, &str)] = &[
    ("clean-round", include_str!("../scenarios/clean-round.toml")),
    ("theorem1-exhaustive-gf8", include_str!("../scenarios/theorem1-exhaustive-gf8.toml")),
    ("theorem2-vandermonde-gf256", include_str!("../scenarios/theorem2-vandermonde-gf256.toml")),
    ("theorem3-random-gf65536", include_str!("../scenarios/theorem3-random-gf65536.toml")),
    ("theorem4-random-gf65536", include_str!("../scenarios/theorem4-random-gf65536.toml")),
    ("rs-gf65536", include_str!("../scenarios/rs-gf65536.toml")),
    ("converse-duplicate-gamma", include_str!("../scenarios/converse-duplicate-gamma.toml")),
    ("monte-carlo-random-gf65536", include_str!("../scenarios/monte-carlo-random-gf65536.toml")),
];

/// Milliseconds since the call. wasm32 has no std clock, so there it reads zero.
#[cfg(not(target_arch = "wasm32"))]
fn timer() -> impl Fn() -> f64 {
    let start = std::time::Instant::now();
    move || start.elapsed().as_secs_f64() * 1e3
}

#[cfg(target_arch = "wasm32")]
fn timer() -> impl Fn() -> f64 {
    || 0.0
}

pub fn bundled(name: &str) -> Result<Scenario, HarnessError> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| HarnessError::UnknownScenario(name.to_string()))?;
    Scenario::parse(text)
}

/// Independent stream `stream` of the generator rooted at `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_inputs(rng: &mut impl Rng, field: &Field, n: usize, round: u64) -> RoundInputs {
    let mut draw = || (0..n).map(|_| Fe(rng.gen_range(0..field.size()) as u16)).collect::<Vec<_>>();
    let d = draw();
    let u = draw();
    RoundInputs { round, d, u }
}

fn coefficients_with_seed(s: &Scenario, config: &NetworkConfig, seed: u64) -> Result<CoefficientMatrix, HarnessError> {
    let f = config.field();
    let (n, m) = (config.n(), config.m());
    let spec = &s.coefficients;
    Ok(match spec.scheme {
        Scheme::Simple => match &spec.gammas {
            Some(g) if spec.allow_duplicate_gammas => simple_layout(f, g),
            Some(g) => assign_simple_with(f, g)?,
            None => assign_simple(n, f)?,
        },
        Scheme::Vandermonde => match &spec.gammas {
            Some(g) => crate::coefficients::assign_vandermonde_with(f, m, g)?,
            None => assign_vandermonde(n, m, f)?,
        },
        Scheme::Rs => assign_rs(n, m, f)?,
        Scheme::Random => {
            let mut c = assign_random(n, m, f, seed);
            if let Some(v) = &s.verify {
                for attempt in 1..spec.attempts {
                    if verify_spec(&c, config, v).iter().all(|r| r.holds) {
                        break;
                    }
                    c = assign_random(n, m, f, seed.wrapping_add(attempt as u64));
                }
            }
            c
        }
        Scheme::General => {
            let cond = s.verify.as_ref().expect("validated").condition();
            assign_general_topology(config, seed, cond, spec.attempts)?.0
        }
    })
}

fn verify_spec(c: &CoefficientMatrix, config: &NetworkConfig, v: &VerifySpec) -> Vec<VerifyReport> {
    let mode = match v.samples {
        Some(samples) => VerifyMode::Sampled { samples, seed: 0 },
        None => VerifyMode::auto(config.n(), config.m()),
    };
    if (v.condition == ConditionName::Theorem4 || v.failures > 0 && v.condition == ConditionName::Theorem3)
        && config.is_full_coverage() && v.samples.is_none() {
            return verify_errors_and_failures(c, config, v.errors, v.failures);
        }
    let views = config.views(&BTreeSet::new());
    vec![verify_condition(c, v.condition(), Some(&views), mode)]
}

/// The coefficients a scenario's sweep runs with.
pub fn scenario_coefficients(s: &Scenario) -> Result<CoefficientMatrix, HarnessError> {
    let config = s.config()?;
    coefficients_with_seed(s, &config, s.coefficient_seed())
}

/// Assign coefficients and run only the `[verify]` step.
pub fn verify_only(s: &Scenario) -> Result<Vec<VerifyReport>, HarnessError> {
    s.validate()?;
    let config = s.config()?;
    let v = s.verify.as_ref().ok_or_else(|| schema("verify", "section missing"))?;
    let coeffs = scenario_coefficients(s)?;
    Ok(verify_spec(&coeffs, &config, v))
}

/// Plans a scenario sweeps over, in case order.
pub fn scenario_plans(s: &Scenario, coeffs: &CoefficientMatrix) -> Result<Vec<AdversaryPlan>, HarnessError> {
    let config = s.config()?;
    let a = &s.adversary;
    let (n, m) = (config.n(), config.m());
    let mut plans = match a.mode {
        AdversaryMode::None => Vec::new(),
        AdversaryMode::Single => {
            let values = match a.per_pattern {
                None => ValueSampling::Exhaustive,
                Some(per_pattern) => ValueSampling::Sampled {
                    per_pattern,
                    seed: s.seed,
                },
            };
            single_error_plans(&config, values, a.include_protection)
        }
        AdversaryMode::Patterns => {
            let per = a.per_pattern.unwrap_or(1);
            let all: Vec<usize> = if a.include_protection {
                (0..n + m).collect()
            } else {
                (0..n).collect()
            };
            let everything: Vec<usize> = (0..n + m).collect();
            let split = |ids: &[usize]| -> (Vec<usize>, Vec<usize>) {
                (
                    ids.iter().copied().filter(|&x| x < n).collect(),
                    ids.iter().copied().filter(|&x| x >= n).map(|x| x - n).collect(),
                )
            };
            let mut out = Vec::new();
            let mut placement = 0u64;
            for errs in combinations(&all, a.errors) {
                let rest: Vec<usize> = everything.iter().copied().filter(|x| !errs.contains(x)).collect();
                for fails in combinations(&rest, a.failures) {
                    let (ep, eq) = split(&errs);
                    let (fp, fq) = split(&fails);
                    let pattern = ErrorPattern::new(ep, eq);
                    let failures = FailurePattern::new(fp, fq);
                    let mut rng = stream_rng(s.seed, placement);
                    for _ in 0..per {
                        let mut plan = plan_for_pattern(&config, &pattern, &failures, &mut rng);
                        plan.seed = s.seed;
                        out.push(plan);
                    }
                    placement += 1;
                }
            }
            out
        }
        AdversaryMode::Random => (0..a.count)
            .map(|i| {
                let seed = stream_rng(s.seed, i as u64).gen();
                random_plan(&config, a.errors, a.failures, seed, None)
            })
            .collect::<Result<_, _>>()?,
        AdversaryMode::Confusion => {
            let w = confusion_plan(coeffs, &a.columns)
                .ok_or_else(|| schema("adversary.columns", "columns are independent; no confusion plan exists"))?;
            vec![w.plan]
        }
    };
    plans.extend(s.plans.iter().cloned());
    if plans.is_empty() {
        plans.push(AdversaryPlan::empty());
    }
    for p in &plans {
        p.validate(&config, None)?;
    }
    Ok(plans)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeResult {
    pub node: NodeId,
    pub value: Fe,
    pub want: Fe,
    pub status: DecodeStatus,
    pub syndrome_zero: bool,
}

impl NodeResult {
    pub fn correct(&self) -> bool {
        self.value == self.want
    }
}

/// Run one round under `plan` and decode at every end node.
pub fn run_case(
    s: &Scenario,
    config: &NetworkConfig,
    coeffs: &CoefficientMatrix,
    plan: &AdversaryPlan,
    inputs: &RoundInputs,
) -> Result<Vec<NodeResult>, HarnessError> {
    let orders = NodeOrders::default_for(config.n(), config.m());
    let obs = plan.apply(config, inputs, &orders)?;
    let round = run_observed(config, coeffs, inputs, &obs, &orders)?;
    let n_e = s.decoder_errors();
    let failures = !obs.failed_primaries.is_empty() || !obs.failed_protections.is_empty();
    Ok(round
        .observations
        .iter()
        .map(|o| {
            let d = match s.decoder.method {
                DecoderMethod::Single if !failures => decode_single(coeffs, o),
                DecoderMethod::Single | DecoderMethod::Enumerate if failures => {
                    decode_with_failures(coeffs, o, n_e, FailureDecoder::Enumerate)
                }
                DecoderMethod::Single | DecoderMethod::Enumerate => {
                    decode_enumerate(coeffs, o, n_e, EnumerateMode::CheckUnique)
                }
                DecoderMethod::Rs if failures => decode_with_failures(coeffs, o, n_e, FailureDecoder::Rs),
                DecoderMethod::Rs => decode_rs(coeffs, o, n_e),
            };
            let want = match o.node.side {
                Side::T => inputs.d[o.node.index],
                Side::S => inputs.u[o.node.index],
            };
            NodeResult {
                node: o.node,
                value: d.value,
                want,
                status: d.status,
                syndrome_zero: o.syndrome_is_zero(),
            }
        })
        .collect())
}

/// Everything needed to reproduce a wrong decoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCase {
    pub case: u64,
    pub coefficient_seed: u64,
    pub plan: AdversaryPlan,
    pub inputs: RoundInputs,
    pub node: NodeId,
    pub got: Fe,
    pub want: Fe,
    pub status: DecodeStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTally {
    pub node: NodeId,
    pub checked: u64,
    pub correct: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub cases: u64,
    pub node_checks: u64,
    pub node_correct: u64,
    pub wrong_cases: u64,
    pub all_syndromes_zero: bool,
    pub per_node: Vec<NodeTally>,
    pub verify: Vec<VerifyReport>,
    pub first_failure: Option<FailureCase>,
    pub elapsed_ms: f64,
    pub assertions: Vec<Assertion>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn success_rate(&self) -> f64 {
        if self.node_checks == 0 {
            1.0
        } else {
            self.node_correct as f64 / self.node_checks as f64
        }
    }

    /// Per-node tallies as CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,checked,correct,rate\n");
        for t in &self.per_node {
            let rate = if t.checked == 0 { 1.0 } else { t.correct as f64 / t.checked as f64 };
            let _ = writeln!(out, "{},{},{},{:.6}", t.node, t.checked, t.correct, rate);
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {}", self.name);
        for v in &self.verify {
            let _ = writeln!(
                out,
                "  verify {}: {} ({} checks{})",
                v.condition,
                if v.holds { "holds" } else { "violated" },
                v.checked,
                if v.sampled { ", sampled" } else { "" }
            );
            if let Some(viol) = &v.first_violation {
                let _ = writeln!(out, "    first violation: {viol}");
            }
        }
        let _ = writeln!(
            out,
            "  {} cases, {}/{} node decodings correct ({:.4}%), {} cases with a wrong node",
            self.cases,
            self.node_correct,
            self.node_checks,
            100.0 * self.success_rate(),
            self.wrong_cases
        );
        if let Some(f) = &self.first_failure {
            let plan = serde_json::to_string(&f.plan).unwrap_or_default();
            let _ = writeln!(
                out,
                "  first failure: case {} node {} got {} want {} ({}) plan {}",
                f.case, f.node, f.got.0, f.want.0, f.status, plan
            );
        }
        for a in &self.assertions {
            let _ = writeln!(out, "  {} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
        }
        let _ = writeln!(out, "  elapsed {:.1} ms", self.elapsed_ms);
        out
    }
}

#[derive(Debug, Default, Clone)]
struct Tally {
    cases: u64,
    checks: u64,
    correct: u64,
    wrong_cases: u64,
    zero: bool,
    per_node: BTreeMap<NodeId, (u64, u64)>,
    first_failure: Option<FailureCase>,
}

impl Tally {
    fn new() -> Tally {
        Tally {
            zero: true,
            ..Tally::default()
        }
    }

    fn add_case(&mut self, case: u64, coefficient_seed: u64, plan: &AdversaryPlan, inputs: &RoundInputs, results: &[NodeResult]) {
        self.cases += 1;
        let mut wrong = None;
        for r in results {
            self.checks += 1;
            let e = self.per_node.entry(r.node).or_default();
            e.0 += 1;
            if r.correct() {
                self.correct += 1;
                e.1 += 1;
            } else if wrong.is_none() {
                wrong = Some(r);
            }
            self.zero &= r.syndrome_zero;
        }
        if let Some(r) = wrong {
            self.wrong_cases += 1;
            if self.first_failure.as_ref().is_none_or(|f| case < f.case) {
                self.first_failure = Some(FailureCase {
                    case,
                    coefficient_seed,
                    plan: plan.clone(),
                    inputs: inputs.clone(),
                    node: r.node,
                    got: r.value,
                    want: r.want,
                    status: r.status,
                });
            }
        }
    }

    /// Associative and, up to `first_failure` choice by case index,
    /// commutative merge.
    fn merge(mut self, other: Tally) -> Tally {
        self.cases += other.cases;
        self.checks += other.checks;
        self.correct += other.correct;
        self.wrong_cases += other.wrong_cases;
        self.zero &= other.zero;
        for (node, (c, k)) in other.per_node {
            let e = self.per_node.entry(node).or_default();
            e.0 += c;
            e.1 += k;
        }
        self.first_failure = match (self.first_failure, other.first_failure) {
            (Some(a), Some(b)) => Some(if a.case <= b.case { a } else { b }),
            (a, b) => a.or(b),
        };
        self
    }
}

fn case_inputs(s: &Scenario, field: &Field, case: u64) -> RoundInputs {
    // streams above 2^32 are reserved for sweep inputs
    let mut rng = stream_rng(s.seed, (1 << 32) + case);
    random_inputs(&mut rng, field, s.network.n, case)
}

/// Assign, verify, sweep, decode and tally as the scenario declares.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport, HarnessError> {
    let elapsed_ms = timer();
    s.validate()?;
    let config = s.config()?;
    let coeffs = scenario_coefficients(s)?;
    let verify = match &s.verify {
        Some(v) => {
            let reports = verify_spec(&coeffs, &config, v);
            if v.require && reports.iter().any(|r| !r.holds) {
                let names: Vec<String> = reports.iter().filter(|r| !r.holds).map(|r| r.condition.to_string()).collect();
                return Err(HarnessError::Precondition(names.join(", ")));
            }
            reports
        }
        None => Vec::new(),
    };
    let plans = scenario_plans(s, &coeffs)?;
    let seed = s.coefficient_seed();
    let tally = plans
        .par_iter()
        .enumerate()
        .map(|(case, plan)| {
            let inputs = case_inputs(s, config.field(), case as u64);
            let results = run_case(s, &config, &coeffs, plan, &inputs)?;
            let mut t = Tally::new();
            t.add_case(case as u64, seed, plan, &inputs, &results);
            Ok::<_, HarnessError>(t)
        })
        .try_reduce(Tally::new, |a, b| Ok(a.merge(b)))?;

    let mut report = ScenarioReport {
        name: s.name.clone(),
        cases: tally.cases,
        node_checks: tally.checks,
        node_correct: tally.correct,
        wrong_cases: tally.wrong_cases,
        all_syndromes_zero: tally.zero,
        per_node: tally
            .per_node
            .iter()
            .map(|(&node, &(checked, correct))| NodeTally { node, checked, correct })
            .collect(),
        verify,
        first_failure: tally.first_failure,
        elapsed_ms: 0.0,
        assertions: Vec::new(),
    };
    report.assertions = scenario_assertions(&s.expect, &report);
    report.elapsed_ms = elapsed_ms();
    Ok(report)
}

fn scenario_assertions(e: &ExpectSpec, r: &ScenarioReport) -> Vec<Assertion> {
    let mut out = Vec::new();
    let nothing = e.success_rate.is_none() && e.zero_syndromes.is_none() && e.min_wrong_nodes.is_none() && e.verify_holds.is_none();
    if let Some(min) = e.success_rate.or(nothing.then_some(1.0)) {
        out.push(Assertion {
            name: "success_rate".into(),
            passed: r.success_rate() >= min,
            detail: format!("{:.6} >= {min}", r.success_rate()),
        });
    }
    if let Some(want) = e.zero_syndromes {
        out.push(Assertion {
            name: "zero_syndromes".into(),
            passed: r.all_syndromes_zero == want,
            detail: format!("all zero: {}", r.all_syndromes_zero),
        });
    }
    if let Some(min) = e.min_wrong_nodes {
        let wrong = r.node_checks - r.node_correct;
        out.push(Assertion {
            name: "min_wrong_nodes".into(),
            passed: wrong >= min,
            detail: format!("{wrong} >= {min}"),
        });
    }
    if let Some(want) = e.verify_holds {
        let holds = r.verify.iter().all(|v| v.holds);
        out.push(Assertion {
            name: "verify_holds".into(),
            passed: holds == want,
            detail: format!("holds: {holds}"),
        });
    }
    out
}

/// Quantile of Beta(a, b) by bisection on the regularized incomplete beta
/// function; the library's own inverse stops near 1e-5.
fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-sided Clopper-Pearson interval for `successes` out of `trials`.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let alpha = 1.0 - confidence;
    let (x, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else if successes == trials {
        (alpha / 2.0).powf(1.0 / n)
    } else {
        beta_quantile(x, n - x + 1.0, alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else if successes == 0 {
        1.0 - (alpha / 2.0).powf(1.0 / n)
    } else {
        beta_quantile(x + 1.0, n - x, 1.0 - alpha / 2.0)
    };
    (lo, hi)
}

pub const CONFIDENCE: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub name: String,
    pub trials: u64,
    pub seed: u64,
    pub successes: u64,
    pub rate: f64,
    pub confidence: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Union lower bound for random coefficients, when one applies.
    pub bound: Option<f64>,
    pub meets_bound: Option<bool>,
    pub first_failure: Option<FailureCase>,
    pub elapsed_ms: f64,
    pub assertions: Vec<Assertion>,
}

impl MonteCarloReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn to_csv(&self) -> String {
        let bound = self.bound.map_or(String::new(), |b| format!("{b:.9}"));
        let meets = self.meets_bound.map_or(String::new(), |m| m.to_string());
        format!(
            "scenario,trials,seed,successes,rate,confidence,ci_low,ci_high,bound,meets_bound\n{},{},{},{},{:.9},{},{:.9},{:.9},{},{}\n",
            self.name, self.trials, self.seed, self.successes, self.rate, self.confidence, self.ci_low, self.ci_high, bound, meets
        )
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "monte carlo {} ({} trials, seed {})", self.name, self.trials, self.seed);
        let _ = writeln!(
            out,
            "  success rate {:.6}, {:.0}% interval [{:.6}, {:.6}]",
            self.rate,
            100.0 * self.confidence,
            self.ci_low,
            self.ci_high
        );
        if let Some(b) = self.bound {
            let _ = writeln!(out, "  union bound {b:.6}");
        }
        if let Some(f) = &self.first_failure {
            let _ = writeln!(
                out,
                "  first failure: trial {} coefficient seed {} node {} plan {}",
                f.case,
                f.coefficient_seed,
                f.node,
                serde_json::to_string(&f.plan).unwrap_or_default()
            );
        }
        for a in &self.assertions {
            let _ = writeln!(out, "  {} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
        }
        let _ = writeln!(out, "  elapsed {:.1} ms", self.elapsed_ms);
        out
    }
}

/// The applicable union bound when coefficients are drawn at random.
pub fn union_bound(s: &Scenario) -> Option<f64> {
    if s.coefficients.scheme != Scheme::Random || s.adversary.failures > 0 {
        return None;
    }
    let q = (1u64 << s.field.bits) as f64;
    let (n, m) = (s.network.n, s.network.m);
    match s.adversary.errors {
        0 => None,
        1 => Some(single_error_bound(q, n, m)),
        n_e => Some(multi_error_bound(q, n, m, n_e)),
    }
}

/// Reproduce trial `trial` of a Monte Carlo run: fresh coefficients (for the
/// random scheme), a random plan, random inputs.
pub fn replay_trial(
    s: &Scenario,
    config: &NetworkConfig,
    fixed: Option<&CoefficientMatrix>,
    seed: u64,
    trial: u64,
) -> Result<(u64, AdversaryPlan, RoundInputs, Vec<NodeResult>), HarnessError> {
    let mut rng = stream_rng(seed, trial);
    let coefficient_seed: u64 = rng.gen();
    let plan_seed: u64 = rng.gen();
    let inputs = random_inputs(&mut rng, config.field(), config.n(), trial);
    let owned;
    let coeffs = match fixed {
        Some(c) => c,
        None => {
            owned = coefficients_with_seed(s, config, coefficient_seed)?;
            &owned
        }
    };
    let plan = random_plan(config, s.adversary.errors, s.adversary.failures, plan_seed, None)?;
    let results = run_case(s, config, coeffs, &plan, &inputs)?;
    Ok((coefficient_seed, plan, inputs, results))
}

/// Seeded independent trials on `workers` threads; a trial succeeds when
/// every end node decodes correctly. Identical for any worker count.
pub fn monte_carlo(s: &Scenario, trials: u64, seed: u64, workers: usize) -> Result<MonteCarloReport, HarnessError> {
    assert!(trials >= 1, "need at least one trial");
    let elapsed_ms = timer();
    s.validate()?;
    let config = s.config()?;
    let fixed = match s.coefficients.scheme {
        Scheme::Random => None,
        _ => Some(scenario_coefficients(s)?),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let tally = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|trial| {
                let (cs, plan, inputs, results) = replay_trial(s, &config, fixed.as_ref(), seed, trial)?;
                let mut t = Tally::new();
                t.add_case(trial, cs, &plan, &inputs, &results);
                Ok::<_, HarnessError>(t)
            })
            .try_reduce(Tally::new, |a, b| Ok(a.merge(b)))
    })?;
    let successes = tally.cases - tally.wrong_cases;
    let (ci_low, ci_high) = clopper_pearson(successes, trials, CONFIDENCE);
    let bound = union_bound(s);
    let meets_bound = bound.map(|b| ci_low >= b);
    let mut assertions = Vec::new();
    if let Some(want) = s.expect.meets_bound {
        assertions.push(Assertion {
            name: "meets_bound".into(),
            passed: meets_bound == Some(want),
            detail: match bound {
                Some(b) => format!("lower limit {ci_low:.6} vs bound {b:.6}"),
                None => "no bound applies".into(),
            },
        });
    }
    if let Some(min) = s.expect.success_rate {
        let rate = successes as f64 / trials as f64;
        assertions.push(Assertion {
            name: "success_rate".into(),
            passed: rate >= min,
            detail: format!("{rate:.6} >= {min}"),
        });
    }
    Ok(MonteCarloReport {
        name: s.name.clone(),
        trials,
        seed,
        successes,
        rate: successes as f64 / trials as f64,
        confidence: CONFIDENCE,
        ci_low,
        ci_high,
        bound,
        meets_bound,
        first_failure: tally.first_failure,
        elapsed_ms: elapsed_ms(),
        assertions,
    })
}
