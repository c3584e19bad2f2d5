//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Tolerances are pinned below and are not tuned per run.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use pathguard::adversary::{
    confusion_plan, random_plan, single_error_plans, AdversaryPlan, Corruption, PrimaryError, ProtectionError,
    ValueSampling,
};
use pathguard::coefficients::{
    assign_random, assign_rs, assign_simple, assign_vandermonde, p1, simple_layout, single_error_bound,
    CoefficientMatrix,
};
use pathguard::decoder::{decode_enumerate, decode_rs, decode_single, rs_decode_syndromes, EnumerateMode, RsOutcome};
use pathguard::galois::{Fe, Field};
use pathguard::harness::{bundled, monte_carlo, run_scenario, stream_rng};
use pathguard::linalg::Matrix;
use pathguard::model::{NetworkConfig, NodeId, Side};
use pathguard::protocol::{run_observed, NodeObservation, NodeOrders, RoundInputs};
use pathguard::provisioning::{
    build_model, check_solution, compare_schemes, dumbbell, solve_exact, upper_bound_from_ilp3, CompareMode,
    ModelKind, ProvisionError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Binomial standard errors allowed between the empirical independence rate and p1.
const CLAIM1_SIGMAS: f64 = 3.0;
const CLAIM1_SAMPLES: u64 = 100_000;
const MONTE_CARLO_TRIALS: u64 = 10_000;
const PROTOCOL_TRIALS: u64 = 10_000;
const SOLVER_BUDGET: u64 = 50_000_000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn random_inputs(rng: &mut impl Rng, f: &Field, n: usize) -> RoundInputs {
    let mut draw = || (0..n).map(|_| Fe(rng.gen_range(0..f.size()) as u16)).collect::<Vec<_>>();
    let d = draw();
    let u = draw();
    RoundInputs { round: 0, d, u }
}

fn truth(inputs: &RoundInputs, node: NodeId) -> Fe {
    match node.side {
        Side::T => inputs.d[node.index],
        Side::S => inputs.u[node.index],
    }
}

fn observe(config: &NetworkConfig, coeffs: &CoefficientMatrix, plan: &AdversaryPlan, inputs: &RoundInputs) -> Vec<NodeObservation> {
    let orders = NodeOrders::default_for(config.n(), config.m());
    let obs = plan.apply(config, inputs, &orders).expect("valid plan");
    run_observed(config, coeffs, inputs, &obs, &orders).expect("round runs").observations
}

/// Wrong decodings over all plans and all nodes with `decode_single`.
fn single_error_sweep(config: &NetworkConfig, coeffs: &CoefficientMatrix, plans: &[AdversaryPlan], seed: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut wrong) = (0, 0);
    for plan in plans {
        let inputs = random_inputs(&mut rng, config.field(), config.n());
        for o in observe(config, coeffs, plan, &inputs) {
            checked += 1;
            if decode_single(coeffs, &o).value != truth(&inputs, o.node) {
                wrong += 1;
            }
        }
    }
    (checked, wrong)
}

fn criterion_1() -> Outcome {
    let f = Field::gf256();
    let mut lines = Vec::new();
    let mut ok = true;
    for n in [3, 4, 5] {
        let config = NetworkConfig::full(n, 4, f.clone()).unwrap();
        let schemes = [
            ("simple", assign_simple(n, &f).unwrap()),
            ("vandermonde", assign_vandermonde(n, 4, &f).unwrap()),
        ];
        let plans = single_error_plans(
            &config,
            ValueSampling::Sampled {
                per_pattern: 200,
                seed: n as u64,
            },
            true,
        );
        for (name, coeffs) in &schemes {
            let (checked, wrong) = single_error_sweep(&config, coeffs, &plans, 100 + n as u64);
            ok &= wrong == 0;
            lines.push(format!("n={n} {name}: {wrong}/{checked} wrong"));
        }
    }
    outcome(ok, lines.join("; "))
}

fn criterion_2() -> Outcome {
    let config = NetworkConfig::full(3, 4, Field::new(3).unwrap()).unwrap();
    let coeffs = assign_simple(3, config.field()).unwrap();
    let plans = single_error_plans(&config, ValueSampling::Exhaustive, true);
    let primary_cases = plans.iter().filter(|p| !p.primary.is_empty()).count();
    let (checked, wrong) = single_error_sweep(&config, &coeffs, &plans, 2);
    outcome(
        wrong == 0 && primary_cases == 3 * 63,
        format!("{} plans ({primary_cases} primary), {wrong}/{checked} wrong", plans.len()),
    )
}

fn scenario_outcome(name: &str, want_cases: u64) -> Outcome {
    let s = bundled(name).unwrap();
    match run_scenario(&s) {
        Ok(r) => {
            let wrong = r.node_checks - r.node_correct;
            let verified = !r.verify.is_empty() && r.verify.iter().all(|v| v.holds);
            outcome(
                verified && wrong == 0 && r.cases == want_cases,
                format!(
                    "verified {verified}, {} cases (want {want_cases}), {wrong}/{} wrong, {:.0} ms",
                    r.cases, r.node_checks, r.elapsed_ms
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_3() -> Outcome {
    // n = 4, M = 8: C(12, 2) location pairs, 50 value draws each
    scenario_outcome("theorem3-random-gf65536", 66 * 50)
}

fn same_decision(a: &pathguard::decoder::Decoded, b: &pathguard::decoder::Decoded) -> bool {
    a.value == b.value && a.own_error == b.own_error
}

fn criterion_4() -> Outcome {
    let f = Field::gf65536();
    let (n, m) = (5, 4);
    let config = NetworkConfig::full(n, m, f.clone()).unwrap();
    let coeffs = assign_rs(n, m, &f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    let mut cases = 0;
    let mut run = |plan: &AdversaryPlan, rng: &mut ChaCha8Rng| {
        let inputs = random_inputs(rng, &f, n);
        for o in observe(&config, &coeffs, plan, &inputs) {
            let rs = decode_rs(&coeffs, &o, 1);
            let en = decode_enumerate(&coeffs, &o, 1, EnumerateMode::CheckUnique);
            if !same_decision(&rs, &en) || rs.value != truth(&inputs, o.node) {
                mismatches += 1;
            }
        }
        cases += 1;
    };
    // every single-primary location, one-sided and two-sided values
    let mut single = 0;
    for c in 0..n {
        for e in [(1, 0), (0, 1), (1, 1)] {
            for _ in 0..20 {
                let nz = |rng: &mut ChaCha8Rng| Fe(rng.gen_range(1..f.size()) as u16);
                let e_d = if e.0 == 1 { nz(&mut rng) } else { Fe::ZERO };
                let e_u = if e.1 == 1 { nz(&mut rng) } else { Fe::ZERO };
                let plan = AdversaryPlan {
                    primary: vec![PrimaryError { connection: c, e_d, e_u }],
                    ..AdversaryPlan::default()
                };
                run(&plan, &mut rng);
                single += 1;
            }
        }
    }
    for _ in 0..1_000 {
        let c = rng.gen_range(0..n);
        let e_d = Fe(rng.gen_range(1..f.size()) as u16);
        let e_u = Fe(rng.gen_range(1..f.size()) as u16);
        let plan = AdversaryPlan {
            primary: vec![PrimaryError { connection: c, e_d, e_u }],
            ..AdversaryPlan::default()
        };
        run(&plan, &mut rng);
    }

    // BMA against syndrome lookup: n = 3 in GF(8), six symbols, four checks
    let f8 = Field::new(3).unwrap();
    let h = assign_rs(3, 4, &f8).unwrap().h().clone();
    let mut table: Vec<(Vec<Fe>, Vec<Fe>)> = Vec::new();
    let mut errors = vec![vec![Fe::ZERO; 6]];
    for j in 0..6 {
        for v in f8.nonzero_elements() {
            let mut e = vec![Fe::ZERO; 6];
            e[j] = v;
            errors.push(e);
        }
    }
    for j in 0..6 {
        for k in j + 1..6 {
            for a in f8.nonzero_elements() {
                for b in f8.nonzero_elements() {
                    let mut e = vec![Fe::ZERO; 6];
                    e[j] = a;
                    e[k] = b;
                    errors.push(e);
                }
            }
        }
    }
    for e in &errors {
        table.push((h.mul_vec(&f8, e), e.clone()));
    }
    let mut bma_bad = 0;
    for (s, e) in &table {
        // lookup: the unique table entry with this syndrome
        let hits: Vec<&Vec<Fe>> = table.iter().filter(|(t, _)| t == s).map(|(_, x)| x).collect();
        let want = if hits.len() == 1 { Some(hits[0].clone()) } else { None };
        let got = match rs_decode_syndromes(&f8, s, 1, 6, &[], 2) {
            RsOutcome::Located(v) => {
                let mut x = vec![Fe::ZERO; 6];
                for (j, val) in v {
                    x[j] = val;
                }
                Some(x)
            }
            RsOutcome::Failure => None,
        };
        if want.as_ref() != Some(e) || got != want {
            bma_bad += 1;
        }
    }
    outcome(
        mismatches == 0 && bma_bad == 0 && table.len() == 778,
        format!(
            "{cases} decoder cases ({single} single-location), {mismatches} node mismatches; BMA {bma_bad}/{} syndromes differ",
            table.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    // n = 4, M = 6: 10 error locations x 9 failure locations, 50 draws each
    let s = bundled("theorem4-random-gf65536").unwrap();
    let mut base = scenario_outcome("theorem4-random-gf65536", 90 * 50);
    // the failed connection's own nodes must recover the full data unit
    let config = s.config().unwrap();
    let coeffs = pathguard::harness::scenario_coefficients(&s).unwrap();
    let plans = pathguard::harness::scenario_plans(&s, &coeffs).unwrap();
    let (mut primary_fail, mut protection_fail, mut rebuilt, mut rebuilt_ok) = (0, 0, 0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for plan in &plans {
        primary_fail += usize::from(!plan.failures.primary.is_empty());
        protection_fail += usize::from(!plan.failures.protection.is_empty());
        if let Some(&c) = plan.failures.primary.iter().next() {
            let inputs = random_inputs(&mut rng, config.field(), config.n());
            for o in observe(&config, &coeffs, plan, &inputs) {
                if o.node.index == c {
                    rebuilt += 1;
                    let d = pathguard::decoder::decode_with_failures(
                        &coeffs,
                        &o,
                        1,
                        pathguard::decoder::FailureDecoder::Enumerate,
                    );
                    rebuilt_ok += usize::from(d.value == truth(&inputs, o.node));
                }
            }
        }
    }
    base.passed &= primary_fail > 0 && protection_fail > 0 && rebuilt == rebuilt_ok;
    base.detail = format!(
        "{}; {primary_fail} primary-failure and {protection_fail} protection-failure plans; {rebuilt_ok}/{rebuilt} failed-connection nodes rebuilt",
        base.detail
    );
    base
}

fn criterion_6() -> Outcome {
    let f = Field::new(3).unwrap();
    let gammas = [Fe(1), Fe(1), Fe(2)];
    let coeffs = simple_layout(&f, &gammas);
    let config = NetworkConfig::full(3, 4, f.clone()).unwrap();
    let Some(w) = confusion_plan(&coeffs, &[0, 1, 2, 3]) else {
        return outcome(false, "no confusion plan for dependent columns");
    };
    let inputs = RoundInputs {
        round: 0,
        d: vec![Fe(3), Fe(5), Fe(6)],
        u: vec![Fe(2), Fe(4), Fe(7)],
    };
    let wrong: Vec<NodeId> = observe(&config, &coeffs, &w.plan, &inputs)
        .iter()
        .filter(|o| decode_single(&coeffs, o).value != truth(&inputs, o.node))
        .map(|o| o.node)
        .collect();
    outcome(
        !wrong.is_empty() && wrong.contains(&w.victim),
        format!("victim {}, wrong nodes {:?}", w.victim, wrong.iter().map(|n| n.to_string()).collect::<Vec<_>>()),
    )
}

fn criterion_7() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for bits in [4u32, 8] {
        let f = Field::new(bits).unwrap();
        let q = f.size() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(700 + bits as u64);
        let mut independent = 0u64;
        for _ in 0..CLAIM1_SAMPLES {
            let rows: Vec<Vec<Fe>> = (0..4)
                .map(|_| (0..4).map(|_| Fe(rng.gen_range(0..f.size()) as u16)).collect())
                .collect();
            if Matrix::from_rows(&rows).rank(&f) == 4 {
                independent += 1;
            }
        }
        let rate = independent as f64 / CLAIM1_SAMPLES as f64;
        let p = p1(q);
        let se = (p * (1.0 - p) / CLAIM1_SAMPLES as f64).sqrt();
        let z = (rate - p) / se;
        ok &= z.abs() <= CLAIM1_SIGMAS;
        lines.push(format!("q={q}: rate {rate:.5} vs p1 {p:.5} ({z:+.2} SE)"));
    }
    outcome(ok, lines.join("; "))
}

fn criterion_8() -> Outcome {
    let s = bundled("monte-carlo-random-gf65536").unwrap();
    let bound = single_error_bound(65536.0, 5, 4);
    match monte_carlo(&s, MONTE_CARLO_TRIALS, 8, 4) {
        Ok(r) => outcome(
            r.ci_low >= bound,
            format!(
                "{}/{} trials succeeded, 99% lower limit {:.6} vs bound {bound:.6}",
                r.successes, r.trials, r.ci_low
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut instances = 0;
    let mut mismatches = Vec::new();
    let mut bound_checks = 0;
    let mut bound_bad = 0;
    for _ in 0..60 {
        let (g, conns) = common::random_instance(&mut rng);
        for kind in [ModelKind::Ilp1, ModelKind::Ilp2, ModelKind::Ilp3] {
            let factor = if kind == ModelKind::Ilp3 { 1 } else { rng.gen_range(1..=4) };
            let model = build_model(kind, &g, &conns, factor).unwrap();
            let want = common::brute_force(kind, &g, &conns, factor);
            let got = match solve_exact(&model, SOLVER_BUDGET) {
                Ok(sol) => {
                    if check_solution(&model, &sol).is_err() {
                        mismatches.push(format!("{kind} infeasible output"));
                    }
                    Some(sol.cost)
                }
                Err(ProvisionError::Infeasible) => None,
                Err(e) => {
                    mismatches.push(e.to_string());
                    continue;
                }
            };
            instances += 1;
            if got != want {
                mismatches.push(format!("{kind} {conns:?}: {got:?} vs {want:?}"));
            }
        }
        // upper bound against exact ILP1 on the duplicated set
        let half = &conns[..1];
        if let Ok(ilp3) = solve_exact(&build_model(ModelKind::Ilp3, &g, half, 1).unwrap(), SOLVER_BUDGET) {
            let full = [half[0], half[0]];
            let ub = upper_bound_from_ilp3(&g, &ilp3, 4).unwrap();
            let exact = solve_exact(&build_model(ModelKind::Ilp1, &g, &full, 4).unwrap(), SOLVER_BUDGET).unwrap();
            bound_checks += 1;
            bound_bad += usize::from(ub.cost < exact.cost);
        }
    }
    let t = dumbbell(5, 1, 100);
    let half_sets = [2, 3, 4].iter().map(|&k| t.connections[..k].to_vec()).collect();
    let (gains, dumbbell_ok) = match compare_schemes(&t.graph, &CompareMode::UpperBound { half_sets }, 4, SOLVER_BUDGET) {
        Ok(r) => {
            let gains: Vec<f64> = r.summary.iter().map(|s| s.gain).collect();
            let cheaper = r.rows.iter().all(|row| row.cost_4n < row.cost_2p1);
            let monotone = gains.windows(2).all(|w| w[0] <= w[1]);
            (gains, cheaper && monotone && r.summary.len() == 3)
        }
        Err(e) => return outcome(false, e.to_string()),
    };
    outcome(
        mismatches.is_empty() && bound_bad == 0 && bound_checks > 0 && dumbbell_ok,
        format!(
            "{instances} tiny instances, {} mismatches; {bound_checks} bound checks, {bound_bad} violations; dumbbell gains n=4,6,8: {}",
            mismatches.len(),
            gains.iter().map(|g| format!("{:.1}%", 100.0 * g)).collect::<Vec<_>>().join(", ")
        ),
    )
}

/// Position of `node` in the default order `S0, T0, S1, T1, ...`.
fn position(node: NodeId) -> usize {
    2 * node.index + usize::from(node.side == Side::T)
}

/// Protection-path error value a node sees, straight from the plan.
fn seen_protection_error(plan: &AdversaryPlan, path: usize, node: NodeId, n: usize) -> Fe {
    let t = position(node);
    plan.protection
        .iter()
        .filter(|p| p.path == path)
        .map(|p| match &p.corruption {
            Corruption::PerNode { values } => values.get(&node).copied().unwrap_or(Fe::ZERO),
            Corruption::Uniform { value } => *value,
            Corruption::Link {
                direction: Side::S,
                position,
                value,
            } => {
                let p = (*position).clamp(1, 2 * n - 1);
                if p <= t {
                    *value
                } else {
                    Fe::ZERO
                }
            }
            Corruption::Link {
                direction: Side::T,
                position,
                value,
            } => {
                let p = (*position).min(2 * n - 2);
                if p >= t {
                    *value
                } else {
                    Fe::ZERO
                }
            }
        })
        .fold(Fe::ZERO, |a, b| a + b)
}

/// `H_ext E` for one node, by explicit sums.
fn oracle_syndrome(coeffs: &CoefficientMatrix, plan: &AdversaryPlan, node: NodeId) -> Vec<Fe> {
    let f = coeffs.field();
    let n = coeffs.n();
    (0..coeffs.m())
        .map(|k| {
            let mut acc = seen_protection_error(plan, k, node, n);
            for e in &plan.primary {
                acc = acc + f.mul(coeffs.alpha(e.connection, k), e.e_d) + f.mul(coeffs.beta(e.connection, k), e.e_u);
            }
            acc
        })
        .collect()
}

fn protocol_mismatches(config: &NetworkConfig, coeffs: &CoefficientMatrix, plan: &AdversaryPlan, rng: &mut impl Rng) -> usize {
    let inputs = random_inputs(rng, config.field(), config.n());
    observe(config, coeffs, plan, &inputs)
        .iter()
        .filter(|o| {
            let rows: Vec<usize> = (0..coeffs.m()).collect();
            o.rows != rows || o.p_syn != oracle_syndrome(coeffs, plan, o.node)
        })
        .count()
}

fn criterion_10() -> Outcome {
    let mut bad = 0;
    for trial in 0..PROTOCOL_TRIALS {
        let mut rng = stream_rng(10, trial);
        let bits = rng.gen_range(2..=16);
        let f = Field::new(bits).unwrap();
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=6);
        let config = NetworkConfig::full(n, m, f.clone()).unwrap();
        let coeffs = assign_random(n, m, &f, rng.gen());
        let n_e = rng.gen_range(0..=(n + m).min(3));
        let mut plan = random_plan(&config, n_e, 0, rng.gen(), None).unwrap();
        // mix in link-level corruption on the protection paths
        for p in plan.protection.iter_mut() {
            if rng.gen_bool(0.5) {
                let direction = if rng.gen_bool(0.5) { Side::S } else { Side::T };
                p.corruption = Corruption::Link {
                    direction,
                    position: rng.gen_range(0..2 * n),
                    value: Fe(rng.gen_range(1..f.size()) as u16),
                };
            }
        }
        bad += protocol_mismatches(&config, &coeffs, &plan, &mut rng);
    }
    let f8 = Field::new(3).unwrap();
    let config = NetworkConfig::full(3, 4, f8.clone()).unwrap();
    let coeffs = assign_random(3, 4, &f8, 10);
    let mut plans = single_error_plans(&config, ValueSampling::Exhaustive, true);
    for k in 0..4 {
        for direction in [Side::S, Side::T] {
            for position in 0..6 {
                for value in f8.nonzero_elements() {
                    plans.push(AdversaryPlan {
                        protection: vec![ProtectionError {
                            path: k,
                            corruption: Corruption::Link {
                                direction,
                                position,
                                value,
                            },
                        }],
                        ..AdversaryPlan::default()
                    });
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let exhaustive_bad: usize = plans.iter().map(|p| protocol_mismatches(&config, &coeffs, p, &mut rng)).sum();
    outcome(
        bad == 0 && exhaustive_bad == 0,
        format!(
            "{PROTOCOL_TRIALS} random triples: {bad} node mismatches; {} exhaustive GF(8) plans: {exhaustive_bad} mismatches",
            plans.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("single-error correctness", criterion_1),
        ("exhaustive single-error values", criterion_2),
        ("multi-error correctness", criterion_3),
        ("RS/BMA equivalence", criterion_4),
        ("errors plus failures", criterion_5),
        ("converse witness", criterion_6),
        ("independence statistics", criterion_7),
        ("Monte Carlo union bound", criterion_8),
        ("provisioning", criterion_9),
        ("protocol oracle", criterion_10),
    ];
    let filter: BTreeSet<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "{verdict} criterion {id} ({name}): {} [{:.2}s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.passed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
