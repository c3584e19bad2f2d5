//! Encoding-coefficient assignments and the rank conditions that make
//! decoding succeed.
//!
//! A [`CoefficientMatrix`] stores `H`, the `M x 2n` block of encoding
//! coefficients: row `k` holds `alpha_i^(k)` in column `2i` and `beta_i^(k)`
//! in column `2i + 1`. The extended matrix `[H | I]` is formed on demand.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::galois::{Fe, Field};
use crate::linalg::Matrix;
use crate::model::{choose, combinations, pattern_family, ColumnSet, ErrorPattern, NetworkConfig, NodeView};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoefficientError {
    #[error("field of size {q} too small: need q > {need}")]
    FieldTooSmall { q: u32, need: usize },
    #[error("expected {want} gamma values, got {got}")]
    GammaCount { want: usize, got: usize },
    #[error("gamma values must be nonzero")]
    ZeroGamma,
    #[error("gamma values must be distinct (repeated {0})")]
    DuplicateGamma(Fe),
    #[error("the simple scheme uses exactly 4 protection paths, got {0}")]
    SimpleNeedsFour(usize),
    #[error("no valid assignment after {attempts} attempts; last violation: {last}")]
    Infeasible { attempts: usize, last: Violation },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientMatrix {
    field: Field,
    n: usize,
    m: usize,
    h: Matrix,
}

impl CoefficientMatrix {
    /// Wrap an `M x 2n` coefficient block. No rank properties are checked.
    pub fn from_matrix(field: Field, h: Matrix) -> CoefficientMatrix {
        assert!(h.cols().is_multiple_of(2), "H must have 2n columns");
        CoefficientMatrix {
            field,
            n: h.cols() / 2,
            m: h.rows(),
            h,
        }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn alpha(&self, i: usize, k: usize) -> Fe {
        self.h.get(k, 2 * i)
    }

    pub fn beta(&self, i: usize, k: usize) -> Fe {
        self.h.get(k, 2 * i + 1)
    }

    /// `[H | I_M]`.
    pub fn h_ext(&self) -> Matrix {
        let mut ext = Matrix::zeros(self.m, 2 * self.n + self.m);
        for r in 0..self.m {
            for c in 0..2 * self.n {
                ext.set(r, c, self.h.get(r, c));
            }
            ext.set(r, 2 * self.n + r, Fe::ONE);
        }
        ext
    }

    /// Entry of the extended matrix without materializing it.
    pub fn ext_entry(&self, row: usize, col: usize) -> Fe {
        if col < 2 * self.n {
            self.h.get(row, col)
        } else if col - 2 * self.n == row {
            Fe::ONE
        } else {
            Fe::ZERO
        }
    }

    /// The extended matrix restricted to `rows` and `cols`.
    pub fn ext_select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                out.set(i, j, self.ext_entry(r, c));
            }
        }
        out
    }

    /// Zero out coefficients of connections a protection path does not cover.
    fn mask_coverage(&mut self, config: &NetworkConfig) {
        for k in 0..self.m {
            for i in 0..self.n {
                if !config.covers(k, i) {
                    self.h.set(k, 2 * i, Fe::ZERO);
                    self.h.set(k, 2 * i + 1, Fe::ZERO);
                }
            }
        }
    }
}

fn check_gammas(field: &Field, gammas: &[Fe], want: usize) -> Result<(), CoefficientError> {
    if gammas.len() != want {
        return Err(CoefficientError::GammaCount {
            want,
            got: gammas.len(),
        });
    }
    let mut seen = BTreeSet::new();
    for &g in gammas {
        if g.is_zero() || !field.contains(g) {
            return Err(CoefficientError::ZeroGamma);
        }
        if !seen.insert(g) {
            return Err(CoefficientError::DuplicateGamma(g));
        }
    }
    Ok(())
}

/// The smallest `count` nonzero elements in value order.
pub fn default_gammas(field: &Field, count: usize) -> Vec<Fe> {
    field.nonzero_elements().take(count).collect()
}

/// Simple-scheme layout for arbitrary gammas:
/// `alpha^(1) = 1, alpha^(2) = g, beta^(3) = 1, beta^(4) = g`, zero elsewhere.
/// Does not check that the gammas are distinct.
pub fn simple_layout(field: &Field, gammas: &[Fe]) -> CoefficientMatrix {
    let n = gammas.len();
    let mut h = Matrix::zeros(4, 2 * n);
    for (i, &g) in gammas.iter().enumerate() {
        h.set(0, 2 * i, Fe::ONE);
        h.set(1, 2 * i, g);
        h.set(2, 2 * i + 1, Fe::ONE);
        h.set(3, 2 * i + 1, g);
    }
    CoefficientMatrix::from_matrix(field.clone(), h)
}

pub fn assign_simple(n: usize, field: &Field) -> Result<CoefficientMatrix, CoefficientError> {
    if field.size() as usize <= n {
        return Err(CoefficientError::FieldTooSmall { q: field.size(), need: n });
    }
    assign_simple_with(field, &default_gammas(field, n))
}

pub fn assign_simple_with(field: &Field, gammas: &[Fe]) -> Result<CoefficientMatrix, CoefficientError> {
    check_gammas(field, gammas, gammas.len())?;
    Ok(simple_layout(field, gammas))
}

/// `alpha_i^(k) = g_{alpha_i}^(k-1)`, `beta_i^(k) = g_{beta_i}^(k-1)` with the
/// first `2n` nonzero elements as `g_{alpha_1}, g_{beta_1}, ...`.
pub fn assign_vandermonde(n: usize, m: usize, field: &Field) -> Result<CoefficientMatrix, CoefficientError> {
    if field.size() as usize <= 2 * n {
        return Err(CoefficientError::FieldTooSmall {
            q: field.size(),
            need: 2 * n,
        });
    }
    assign_vandermonde_with(field, m, &default_gammas(field, 2 * n))
}

/// Gammas are given in column order `g_{alpha_1}, g_{beta_1}, ..., g_{beta_n}`.
pub fn assign_vandermonde_with(
    field: &Field,
    m: usize,
    gammas: &[Fe],
) -> Result<CoefficientMatrix, CoefficientError> {
    if !gammas.len().is_multiple_of(2) {
        return Err(CoefficientError::GammaCount {
            want: gammas.len() + 1,
            got: gammas.len(),
        });
    }
    check_gammas(field, gammas, gammas.len())?;
    let mut h = Matrix::zeros(m, gammas.len());
    for (j, &g) in gammas.iter().enumerate() {
        for k in 0..m {
            h.set(k, j, field.pow(g, k as i64).expect("nonzero gamma"));
        }
    }
    Ok(CoefficientMatrix::from_matrix(field.clone(), h))
}

/// Every coefficient independent and uniform over the field.
pub fn assign_random(n: usize, m: usize, field: &Field, seed: u64) -> CoefficientMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_with(&mut rng, n, m, field)
}

fn random_with(rng: &mut impl Rng, n: usize, m: usize, field: &Field) -> CoefficientMatrix {
    let mut h = Matrix::zeros(m, 2 * n);
    for r in 0..m {
        for c in 0..2 * n {
            h.set(r, c, Fe(rng.gen_range(0..field.size()) as u16));
        }
    }
    CoefficientMatrix::from_matrix(field.clone(), h)
}

/// Parity-check matrix of a `(2n, 2n - M)` Reed-Solomon code:
/// column `j` (zero-based) is `(a^j, a^2j, ..., a^Mj)` with `a` primitive,
/// so its locator is `a^j`.
pub fn assign_rs(n: usize, m: usize, field: &Field) -> Result<CoefficientMatrix, CoefficientError> {
    if field.size() as usize <= 2 * n {
        return Err(CoefficientError::FieldTooSmall {
            q: field.size(),
            need: 2 * n,
        });
    }
    let mut h = Matrix::zeros(m, 2 * n);
    for j in 0..2 * n {
        for i in 0..m {
            h.set(i, j, field.exp(((i + 1) * j) as i64));
        }
    }
    Ok(CoefficientMatrix::from_matrix(field.clone(), h))
}

/// Which linear-independence family to verify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Condition {
    /// Single primary-path error.
    Theorem1,
    /// Single primary- or protection-path error.
    Theorem2,
    /// Up to `errors` errors anywhere.
    Theorem3 { errors: usize },
    /// Up to `errors` errors plus `failures` primary-path failures.
    Theorem4 { errors: usize, failures: usize },
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Theorem1 => write!(f, "theorem1"),
            Condition::Theorem2 => write!(f, "theorem2"),
            Condition::Theorem3 { errors } => write!(f, "theorem3(n_e={errors})"),
            Condition::Theorem4 { errors, failures } => {
                write!(f, "theorem4(n_e={errors},n_fc={failures})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationReason {
    /// More vectors than rows; independence impossible.
    MTooSmall,
    RankDeficient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub pattern: ErrorPattern,
    pub columns: Vec<usize>,
    /// Connection whose view failed, when views differ between nodes.
    pub connection: Option<usize>,
    pub reason: ViolationReason,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols: Vec<String> = self.columns.iter().map(usize::to_string).collect();
        let why = match self.reason {
            ViolationReason::MTooSmall => "M too small",
            ViolationReason::RankDeficient => "linearly dependent",
        };
        write!(f, "columns [{}] ({}, {})", cols.join(","), self.pattern, why)?;
        if let Some(c) = self.connection {
            write!(f, " at connection {c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub condition: Condition,
    pub holds: bool,
    pub checked: u64,
    pub sampled: bool,
    pub first_violation: Option<Violation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    Full,
    Sampled { samples: usize, seed: u64 },
}

impl VerifyMode {
    /// Full enumeration for n <= 8 and M <= 10, otherwise 10^4 samples.
    pub fn auto(n: usize, m: usize) -> VerifyMode {
        if n <= 8 && m <= 10 {
            VerifyMode::Full
        } else {
            VerifyMode::Sampled {
                samples: 10_000,
                seed: 0,
            }
        }
    }
}

/// The `(m1, m2)` types whose every member must be independent.
fn condition_types(cond: Condition, n: usize, m: usize) -> Vec<(usize, usize)> {
    let types: Vec<(usize, usize)> = match cond {
        Condition::Theorem1 => vec![(2, 0)],
        Condition::Theorem2 => vec![(2, 0), (1, 1)],
        Condition::Theorem3 { errors } => (0..=2 * errors).map(|k| (k, 2 * errors - k)).collect(),
        Condition::Theorem4 { errors, failures } => {
            (0..=2 * errors).map(|k| (failures + k, 2 * errors - k)).collect()
        }
    };
    types.into_iter().filter(|&(a, b)| a <= n && b <= m).collect()
}

/// Check a rank condition. `views` gives, per connection, the rows its end
/// nodes observe; pass `None` for the full-coverage case with all rows.
///
/// With identical full views every pattern must be linearly independent.
/// With differing views, each connection `i` in a pattern needs its own two
/// columns independent of each other and of the span of the remaining
/// (visible) columns, which is exactly what lets its end nodes pin down
/// `e_d_i` and `e_u_i`.
pub fn verify_condition(
    coeffs: &CoefficientMatrix,
    cond: Condition,
    views: Option<&[NodeView]>,
    mode: VerifyMode,
) -> VerifyReport {
    let (n, m) = (coeffs.n(), coeffs.m());
    let all_rows: Vec<usize> = (0..m).collect();
    let uniform_full = views.is_none_or(|v| v.iter().all(|view| view.rows == all_rows));
    let types = condition_types(cond, n, m);
    let prims: Vec<usize> = (0..n).collect();
    let prots: Vec<usize> = (0..m).collect();

    let mut report = VerifyReport {
        condition: cond,
        holds: true,
        checked: 0,
        sampled: matches!(mode, VerifyMode::Sampled { .. }),
        first_violation: None,
    };

    if uniform_full {
        if let Some(&(a, b)) = types.iter().find(|&&(a, b)| 2 * a + b > m) {
            let pattern = ErrorPattern::new(0..a, 0..b);
            report.holds = false;
            report.first_violation = Some(Violation {
                columns: pattern.columns(n),
                pattern,
                connection: None,
                reason: ViolationReason::MTooSmall,
            });
            return report;
        }
    }

    let mut check = |pattern: ErrorPattern| -> Option<Violation> {
        report.checked += 1;
        if uniform_full {
            let cols = pattern.columns(n);
            let sub = coeffs.ext_select(&all_rows, &cols);
            (!sub.has_full_column_rank(coeffs.field())).then_some(Violation {
                columns: cols,
                pattern,
                connection: None,
                reason: ViolationReason::RankDeficient,
            })
        } else {
            let views = views.expect("non-uniform views");
            split_rank_violation(coeffs, &pattern, views)
        }
    };

    match mode {
        VerifyMode::Full => {
            for &(a, b) in &types {
                for pattern in pattern_family(&prims, &prots, a, b) {
                    if let Some(v) = check(pattern) {
                        report.holds = false;
                        report.first_violation = Some(v);
                        return report;
                    }
                }
            }
        }
        VerifyMode::Sampled { samples, seed } => {
            let weights: Vec<f64> = types
                .iter()
                .map(|&(a, b)| (choose(n, a) * choose(m, b)) as f64)
                .collect();
            let total: f64 = weights.iter().sum();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..samples {
                let mut pick = rng.gen::<f64>() * total;
                let mut idx = 0;
                while idx + 1 < types.len() && pick >= weights[idx] {
                    pick -= weights[idx];
                    idx += 1;
                }
                let (a, b) = types[idx];
                let prim: Vec<usize> = sample(&mut rng, n, a).into_vec();
                let prot: Vec<usize> = sample(&mut rng, m, b).into_vec();
                if let Some(v) = check(ErrorPattern::new(prim, prot)) {
                    report.holds = false;
                    report.first_violation = Some(v);
                    return report;
                }
            }
        }
    }
    report
}

fn split_rank_violation(coeffs: &CoefficientMatrix, pattern: &ErrorPattern, views: &[NodeView]) -> Option<Violation> {
    let n = coeffs.n();
    let field = coeffs.field();
    for &i in &pattern.primary {
        let rows = &views[i].rows;
        let own = [2 * i, 2 * i + 1];
        let rest: Vec<usize> = pattern
            .primary
            .iter()
            .filter(|&&c| c != i)
            .flat_map(|&c| [2 * c, 2 * c + 1])
            .chain(
                pattern
                    .protection
                    .iter()
                    .filter(|&&p| rows.contains(&p))
                    .map(|&p| 2 * n + p),
            )
            .collect();
        let own_rank = coeffs.ext_select(rows, &own).rank(field);
        let rest_rank = coeffs.ext_select(rows, &rest).rank(field);
        let all: Vec<usize> = own.iter().copied().chain(rest.iter().copied()).collect();
        let all_rank = coeffs.ext_select(rows, &all).rank(field);
        if own_rank < 2 || all_rank < own_rank + rest_rank {
            let reason = if 2 + rest_rank > rows.len() {
                ViolationReason::MTooSmall
            } else {
                ViolationReason::RankDeficient
            };
            return Some(Violation {
                pattern: pattern.clone(),
                columns: pattern.columns(n),
                connection: Some(i),
                reason,
            });
        }
    }
    None
}

/// Conditions for `errors` adversarial errors plus `failures` failures that may
/// land on primary or protection paths: every split into `n_fc` primary and
/// `n_fp` protection failures, and every choice of failed protection rows.
pub fn verify_errors_and_failures(
    coeffs: &CoefficientMatrix,
    config: &NetworkConfig,
    errors: usize,
    failures: usize,
) -> Vec<VerifyReport> {
    let mut out = Vec::new();
    for n_fp in 0..=failures.min(config.m()) {
        let n_fc = failures - n_fp;
        if n_fc > config.n() {
            continue;
        }
        let cond = if n_fc == 0 {
            Condition::Theorem3 { errors }
        } else {
            Condition::Theorem4 { errors, failures: n_fc }
        };
        let rows: Vec<usize> = (0..config.m()).collect();
        let mut worst: Option<VerifyReport> = None;
        for failed in combinations(&rows, n_fp) {
            let failed: BTreeSet<usize> = failed.into_iter().collect();
            let views = config.views(&failed);
            let rep = verify_condition(coeffs, cond, Some(&views), VerifyMode::Full);
            let done = !rep.holds;
            match &mut worst {
                None => worst = Some(rep),
                Some(w) => w.checked += rep.checked,
            }
            if done {
                let checked = worst.as_ref().map_or(0, |w| w.checked);
                let mut rep = verify_condition(coeffs, cond, Some(&views), VerifyMode::Full);
                rep.checked = checked;
                worst = Some(rep);
                break;
            }
        }
        out.extend(worst);
    }
    out
}

/// Random assignment respecting coverage zeros, redrawn until `cond` holds at
/// every node or `cap` attempts are spent.
pub fn assign_general_topology(
    config: &NetworkConfig,
    seed: u64,
    cond: Condition,
    cap: usize,
) -> Result<(CoefficientMatrix, usize), CoefficientError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let views = config.views(&BTreeSet::new());
    let mut last = None;
    for attempt in 1..=cap {
        let mut coeffs = random_with(&mut rng, config.n(), config.m(), config.field());
        coeffs.mask_coverage(config);
        let rep = verify_condition(&coeffs, cond, Some(&views), VerifyMode::auto(config.n(), config.m()));
        if rep.holds {
            return Ok((coeffs, attempt));
        }
        last = rep.first_violation;
    }
    Err(CoefficientError::Infeasible {
        attempts: cap,
        last: last.expect("at least one attempt"),
    })
}

/// Independence probability of four random vectors in GF(q)^4 as
/// `(1 - 1/q^3)(1 - 1/q^2)(1 - 1/q)`.
pub fn p1(q: f64) -> f64 {
    (1.0 - q.powi(-3)) * (1.0 - q.powi(-2)) * (1.0 - 1.0 / q)
}

/// Exact independence probability of four uniform random vectors in
/// GF(q)^4. [`p1`] omits the chance that the first vector is zero.
pub fn p1_exact(q: f64) -> f64 {
    p1(q) * (1.0 - q.powi(-4))
}

/// Probability that two random columns and one unit vector are independent.
pub fn p2(q: f64) -> f64 {
    (1.0 - q.powi(-3)) * (1.0 - q.powi(-2))
}

/// Union lower bound on the single-error success probability with random
/// coefficients and `M = 4`.
pub fn single_error_bound(q: f64, n: usize, m: usize) -> f64 {
    1.0 - (1.0 - p1(q)) * choose(n, 2) as f64 - (1.0 - p2(q)) * (n * m) as f64
}

/// Probability a fixed `(k, 2n_e - k)` pattern is independent for random
/// coefficients with `M` rows.
pub fn p1_multi(q: f64, k: usize, n_e: usize, m: usize) -> f64 {
    (0..2 * k)
        .map(|i| 1.0 - q.powi((2 * n_e - k + i) as i32 - m as i32))
        .product()
}

/// Union lower bound for `n_e` errors with random coefficients.
pub fn multi_error_bound(q: f64, n: usize, m: usize, n_e: usize) -> f64 {
    1.0 - (0..=2 * n_e)
        .filter(|&k| k <= n && 2 * n_e - k <= m)
        .map(|k| (1.0 - p1_multi(q, k, n_e, m)) * (choose(n, k) * choose(m, 2 * n_e - k)) as f64)
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::oracle::{determinant, rank_by_minors};
    use crate::model::full_config;

    #[test]
    fn simple_scheme_columns() {
        let f = Field::new(3).unwrap();
        let c = assign_simple(3, &f).unwrap();
        let ext = c.h_ext();
        assert_eq!(ext.column(0), vec![Fe(1), Fe(1), Fe(0), Fe(0)]);
        assert_eq!(ext.column(1), vec![Fe(0), Fe(0), Fe(1), Fe(1)]);
        assert_eq!(ext.column(2), vec![Fe(1), Fe(2), Fe(0), Fe(0)]);
        assert_eq!(ext.column(5), vec![Fe(0), Fe(0), Fe(1), Fe(3)]);
        for p in 0..4 {
            let col = ext.column(6 + p);
            assert_eq!(col.iter().filter(|x| **x == Fe::ONE).count(), 1);
            assert_eq!(col[p], Fe::ONE);
        }
        // disjoint supports, never parallel
        for i in 0..3 {
            let a = ext.column(2 * i);
            let b = ext.column(2 * i + 1);
            assert!(a.iter().zip(&b).all(|(x, y)| x.is_zero() || y.is_zero()));
        }
        assert!(matches!(assign_simple(8, &f), Err(CoefficientError::FieldTooSmall { .. })));
    }

    #[test]
    fn simple_scheme_gf4_rank() {
        let f = Field::new(2).unwrap();
        let c = assign_simple(2, &f).unwrap();
        let sub = c.ext_select(&[0, 1, 2, 3], &[0, 1, 2, 3]);
        assert_eq!(sub.rank(&f), 4);
        assert!(!determinant(&f, &sub).is_zero());
    }

    #[test]
    fn gamma_validation() {
        let f = Field::new(3).unwrap();
        assert_eq!(
            assign_simple_with(&f, &[Fe(1), Fe(1)]).unwrap_err(),
            CoefficientError::DuplicateGamma(Fe(1))
        );
        assert_eq!(assign_simple_with(&f, &[Fe(0)]).unwrap_err(), CoefficientError::ZeroGamma);
        assert!(matches!(
            assign_vandermonde_with(&f, 4, &[Fe(1), Fe(2), Fe(2), Fe(3)]),
            Err(CoefficientError::DuplicateGamma(_))
        ));
        assert!(assign_vandermonde(4, 4, &f).is_err());
    }

    #[test]
    fn vandermonde_layout_and_rank() {
        let f = Field::new(3).unwrap();
        let c = assign_vandermonde(2, 4, &f).unwrap();
        for j in 0..4 {
            assert_eq!(c.h().get(0, j), Fe::ONE);
        }
        let sub = c.ext_select(&[0, 1, 2, 3], &[0, 1, 2, 3]);
        for (j, g) in [1u16, 2, 3, 4].into_iter().enumerate() {
            for k in 0..4 {
                assert_eq!(sub.get(k, j), f.pow(Fe(g), k as i64).unwrap());
            }
        }
        assert!(!determinant(&f, &sub).is_zero());
    }

    #[test]
    fn random_is_deterministic() {
        let f = Field::gf256();
        assert_eq!(assign_random(4, 4, &f, 9), assign_random(4, 4, &f, 9));
        assert_ne!(assign_random(4, 4, &f, 9), assign_random(4, 4, &f, 10));
        // q = 2: total, failures common
        let f2 = Field::new(1).unwrap();
        let mut failures = 0;
        for seed in 0..50 {
            let c = assign_random(3, 4, &f2, seed);
            if !verify_condition(&c, Condition::Theorem2, None, VerifyMode::Full).holds {
                failures += 1;
            }
        }
        assert!(failures > 25);
    }

    #[test]
    fn rs_columns() {
        let f = Field::new(3).unwrap();
        let c = assign_rs(3, 4, &f).unwrap();
        let a = f.generator();
        for j in 0..6 {
            for i in 0..4 {
                let want = f.pow(f.pow(a, j as i64).unwrap(), (i + 1) as i64).unwrap();
                assert_eq!(c.h().get(i, j), want);
            }
        }
        // any 4 columns independent, checked by minors
        let rows = [0, 1, 2, 3];
        for cols in combinations(&[0usize, 1, 2, 3, 4, 5], 4) {
            let sub = c.ext_select(&rows, &cols);
            assert!(!determinant(&f, &sub).is_zero(), "{cols:?}");
        }
        // square case M = 2n
        let sq = assign_rs(3, 6, &f).unwrap();
        assert_eq!(sq.h().rank(&f), 6);
        assert!(assign_rs(4, 4, &f).is_err());
    }

    #[test]
    fn theorems_hold_for_structured_schemes() {
        let f = Field::new(3).unwrap();
        let s = assign_simple(3, &f).unwrap();
        assert!(verify_condition(&s, Condition::Theorem1, None, VerifyMode::Full).holds);
        assert!(verify_condition(&s, Condition::Theorem2, None, VerifyMode::Full).holds);
        let f = Field::gf256();
        let v = assign_vandermonde(4, 4, &f).unwrap();
        assert!(verify_condition(&v, Condition::Theorem2, None, VerifyMode::Full).holds);
    }

    #[test]
    fn simple_scheme_exhaustive_over_n() {
        for bits in [3, 4] {
            let f = Field::new(bits).unwrap();
            for n in 2..f.size() as usize {
                let s = assign_simple(n, &f).unwrap();
                let rep = verify_condition(&s, Condition::Theorem2, None, VerifyMode::Full);
                assert!(rep.holds, "q={} n={n}: {:?}", f.size(), rep.first_violation);
            }
        }
    }

    #[test]
    fn rs_satisfies_primary_only_theorem3() {
        let f = Field::new(3).unwrap();
        let c = assign_rs(3, 4, &f).unwrap();
        let prims: Vec<usize> = (0..3).collect();
        for p in pattern_family(&prims, &[], 2, 0) {
            let sub = c.ext_select(&[0, 1, 2, 3], &p.columns(3));
            assert_eq!(rank_by_minors(&f, &sub), 4);
        }
    }

    #[test]
    fn m_too_small() {
        let f = Field::gf256();
        let c = assign_random(3, 3, &f, 1);
        let rep = verify_condition(&c, Condition::Theorem1, None, VerifyMode::Full);
        assert!(!rep.holds);
        assert_eq!(rep.first_violation.unwrap().reason, ViolationReason::MTooSmall);
    }

    #[test]
    fn duplicate_gamma_violates_theorem1() {
        let f = Field::new(3).unwrap();
        let c = simple_layout(&f, &[Fe(1), Fe(2), Fe(2)]);
        let rep = verify_condition(&c, Condition::Theorem1, None, VerifyMode::Full);
        assert!(!rep.holds);
        let v = rep.first_violation.unwrap();
        assert_eq!(v.pattern, ErrorPattern::new([1, 2], []));
        assert_eq!(v.columns, vec![2, 3, 4, 5]);
    }

    #[test]
    fn verify_agrees_with_minor_oracle() {
        // random small matrices over GF(4): verify == brute force over sets
        let f = Field::new(2).unwrap();
        for seed in 0..40 {
            let c = assign_random(3, 4, &f, seed);
            let rep = verify_condition(&c, Condition::Theorem2, None, VerifyMode::Full);
            let mut oracle = true;
            let rows = [0, 1, 2, 3];
            for i in 0..3 {
                for j in i + 1..3 {
                    let sub = c.ext_select(&rows, &[2 * i, 2 * i + 1, 2 * j, 2 * j + 1]);
                    oracle &= rank_by_minors(&f, &sub) == 4;
                }
                for p in 0..4 {
                    let sub = c.ext_select(&rows, &[2 * i, 2 * i + 1, 6 + p]);
                    oracle &= rank_by_minors(&f, &sub) == 3;
                }
            }
            assert_eq!(rep.holds, oracle, "seed {seed}");
        }
    }

    #[test]
    fn sampled_mode_finds_planted_violation_and_is_deterministic() {
        let f = Field::gf256();
        let mut c = assign_random(12, 8, &f, 3);
        // make connection 0's two columns parallel
        let mut h = c.h().clone();
        for k in 0..8 {
            h.set(k, 1, h.get(k, 0));
        }
        c = CoefficientMatrix::from_matrix(f.clone(), h);
        let mode = VerifyMode::auto(12, 8);
        assert!(matches!(mode, VerifyMode::Sampled { .. }));
        let a = verify_condition(&c, Condition::Theorem2, None, mode);
        let b = verify_condition(&c, Condition::Theorem2, None, mode);
        assert!(!a.holds && a.sampled);
        assert_eq!(a, b);
    }

    #[test]
    fn general_topology() {
        let f = Field::gf65536();
        // full coverage is plain random assignment
        let cfg = NetworkConfig::full(3, 4, f.clone()).unwrap();
        let (c, attempts) = assign_general_topology(&cfg, 5, Condition::Theorem2, 64).unwrap();
        assert_eq!(attempts, 1);
        assert_eq!(c, assign_random(3, 4, &f, 5));

        // connection 0 covered by only 3 paths, all shared with connection 1
        let cov = vec![
            [0, 1].into(),
            [0, 1].into(),
            [0, 1].into(),
            [1, 2].into(),
            [1, 2].into(),
            [2].into(),
        ];
        let cfg = NetworkConfig::with_coverage(3, 6, f.clone(), cov).unwrap();
        let err = assign_general_topology(&cfg, 1, Condition::Theorem2, 8).unwrap_err();
        assert!(matches!(err, CoefficientError::Infeasible { attempts: 8, .. }));

        // every connection covered by 4 paths
        let cov = vec![
            [0, 1].into(),
            [0, 1].into(),
            [0, 1, 2].into(),
            [0, 1, 2].into(),
            [2].into(),
            [2].into(),
        ];
        let cfg = NetworkConfig::with_coverage(3, 6, f.clone(), cov).unwrap();
        let mut ok = 0;
        for seed in 0..50 {
            if let Ok((c, _)) = assign_general_topology(&cfg, seed, Condition::Theorem2, 64) {
                for k in 0..6 {
                    for i in 0..3 {
                        if !cfg.covers(k, i) {
                            assert!(c.alpha(i, k).is_zero() && c.beta(i, k).is_zero());
                        }
                    }
                }
                ok += 1;
            }
        }
        assert_eq!(ok, 50);
    }

    #[test]
    fn bounds_are_sane() {
        let q = 65536.0;
        assert!(p1(q) < 1.0 && p1(q) > 0.9999);
        assert!(p2(q) > p1(q));
        let b = single_error_bound(q, 5, 4);
        assert!(b > 0.9998 && b < 1.0);
        // p1_multi with n_e = 1, M = 4, k = 2 is the exact four-vector rate
        assert!((p1_multi(q, 2, 1, 4) - p1_exact(q)).abs() < 1e-15);
        assert!((p1_multi(q, 1, 1, 4) - p2(q)).abs() < 1e-15);
        let mb = multi_error_bound(q, 4, 8, 2);
        assert!(mb > 0.99 && mb < 1.0);
        let _ = full_config(2, 4, 3);
    }
}
