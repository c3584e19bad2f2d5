//! Network data model: connections, protection paths and their coverage, and
//! the error/failure pattern combinatorics over the columns of the extended
//! coefficient matrix.
//!
//! Indexing is zero-based throughout. Connection `c` owns columns `2c` (the
//! `d` direction, S to T) and `2c + 1` (the `u` direction, T to S); protection
//! path `p` owns column `2n + p`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::galois::{Fe, Field};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("need at least one connection and one protection path (n={n}, m={m})")]
    Empty { n: usize, m: usize },
    #[error("coverage has {got} entries, expected one per protection path ({want})")]
    CoverageLength { got: usize, want: usize },
    #[error("connection {0} is not covered by any protection path")]
    Uncovered(usize),
    #[error("connection index {index} out of range (n={n})")]
    ConnectionOutOfRange { index: usize, n: usize },
    #[error("protection path index {index} out of range (m={m})")]
    ProtectionOutOfRange { index: usize, m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    S,
    T,
}

/// An end node: `S_i` or `T_i`. Written as `S0`, `T3`, ... (zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId {
    pub side: Side,
    pub index: usize,
}

impl NodeId {
    pub fn s(index: usize) -> NodeId {
        NodeId { side: Side::S, index }
    }

    pub fn t(index: usize) -> NodeId {
        NodeId { side: Side::T, index }
    }

    /// Column of the data unit this node wants to recover: `d_i` at `T_i`,
    /// `u_i` at `S_i`.
    pub fn target_column(self) -> usize {
        match self.side {
            Side::T => 2 * self.index,
            Side::S => 2 * self.index + 1,
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.side {
            Side::S => "S",
            Side::T => "T",
        };
        write!(f, "{s}{}", self.index)
    }
}

impl std::str::FromStr for NodeId {
    type Err = String;

    fn from_str(text: &str) -> Result<NodeId, String> {
        let bad = || format!("bad node id {text:?}, expected S<i> or T<i>");
        let side = match text.get(..1) {
            Some("S") | Some("s") => Side::S,
            Some("T") | Some("t") => Side::T,
            _ => return Err(bad()),
        };
        let index = text[1..].parse().map_err(|_| bad())?;
        Ok(NodeId { side, index })
    }
}

impl TryFrom<String> for NodeId {
    type Error = String;

    fn try_from(text: String) -> Result<NodeId, String> {
        text.parse()
    }
}

impl From<NodeId> for String {
    fn from(node: NodeId) -> String {
        node.to_string()
    }
}

/// Connections, protection paths, the working field, and which connections
/// each protection path protects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    n: usize,
    m: usize,
    field: Field,
    coverage: Vec<BTreeSet<usize>>,
}

impl NetworkConfig {
    /// Every protection path passes through all 2n end nodes.
    pub fn full(n: usize, m: usize, field: Field) -> Result<NetworkConfig, ModelError> {
        let all: BTreeSet<usize> = (0..n).collect();
        NetworkConfig::with_coverage(n, m, field, vec![all; m])
    }

    pub fn with_coverage(
        n: usize,
        m: usize,
        field: Field,
        coverage: Vec<BTreeSet<usize>>,
    ) -> Result<NetworkConfig, ModelError> {
        if n == 0 || m == 0 {
            return Err(ModelError::Empty { n, m });
        }
        if coverage.len() != m {
            return Err(ModelError::CoverageLength {
                got: coverage.len(),
                want: m,
            });
        }
        for set in &coverage {
            if let Some(&bad) = set.iter().find(|&&c| c >= n) {
                return Err(ModelError::ConnectionOutOfRange { index: bad, n });
            }
        }
        if let Some(c) = (0..n).find(|c| coverage.iter().all(|s| !s.contains(c))) {
            return Err(ModelError::Uncovered(c));
        }
        Ok(NetworkConfig { n, m, field, coverage })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn coverage(&self) -> &[BTreeSet<usize>] {
        &self.coverage
    }

    pub fn covers(&self, path: usize, connection: usize) -> bool {
        self.coverage[path].contains(&connection)
    }

    pub fn is_full_coverage(&self) -> bool {
        self.coverage.iter().all(|s| s.len() == self.n)
    }

    /// Number of columns of the extended matrix, 2n + M.
    pub fn columns(&self) -> usize {
        2 * self.n + self.m
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.n).flat_map(|i| [NodeId::s(i), NodeId::t(i)])
    }

    /// The rows (protection paths) a node of connection `i` takes part in,
    /// excluding failed protection paths.
    pub fn view(&self, i: usize, failed_protections: &BTreeSet<usize>) -> NodeView {
        NodeView {
            rows: (0..self.m)
                .filter(|&k| self.covers(k, i) && !failed_protections.contains(&k))
                .collect(),
        }
    }

    /// Views for every connection, indexed by connection.
    pub fn views(&self, failed_protections: &BTreeSet<usize>) -> Vec<NodeView> {
        (0..self.n).map(|i| self.view(i, failed_protections)).collect()
    }
}

/// The rows of the extended matrix one end node sees. Protection column `p`
/// is visible exactly when row `p` is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeView {
    pub rows: Vec<usize>,
}

impl NodeView {
    pub fn all(m: usize) -> NodeView {
        NodeView { rows: (0..m).collect() }
    }

    pub fn sees(&self, protection: usize) -> bool {
        self.rows.contains(&protection)
    }
}

/// Anything that names a subset of the extended matrix's columns.
pub trait ColumnSet {
    fn columns(&self, n: usize) -> Vec<usize>;
}

/// Paths in error: primaries contribute two columns each, protection paths one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct ErrorPattern {
    pub primary: BTreeSet<usize>,
    pub protection: BTreeSet<usize>,
}

impl ErrorPattern {
    pub fn new(
        primary: impl IntoIterator<Item = usize>,
        protection: impl IntoIterator<Item = usize>,
    ) -> ErrorPattern {
        ErrorPattern {
            primary: primary.into_iter().collect(),
            protection: protection.into_iter().collect(),
        }
    }

    pub fn size(&self) -> usize {
        2 * self.primary.len() + self.protection.len()
    }

    pub fn error_count(&self) -> usize {
        self.primary.len() + self.protection.len()
    }
}

impl ColumnSet for ErrorPattern {
    fn columns(&self, n: usize) -> Vec<usize> {
        let mut cols: Vec<usize> = self
            .primary
            .iter()
            .flat_map(|&c| [2 * c, 2 * c + 1])
            .chain(self.protection.iter().map(|&p| 2 * n + p))
            .collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    }
}

impl fmt::Display for ErrorPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prim: Vec<String> = self.primary.iter().map(|c| format!("c{c}")).collect();
        let prot: Vec<String> = self.protection.iter().map(|p| format!("p{p}")).collect();
        write!(f, "{{{}}}", prim.into_iter().chain(prot).collect::<Vec<_>>().join(","))
    }
}

/// Known-location outages.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct FailurePattern {
    #[serde(default)]
    pub primary: BTreeSet<usize>,
    #[serde(default)]
    pub protection: BTreeSet<usize>,
}

impl FailurePattern {
    pub fn none() -> FailurePattern {
        FailurePattern::default()
    }

    pub fn new(
        primary: impl IntoIterator<Item = usize>,
        protection: impl IntoIterator<Item = usize>,
    ) -> FailurePattern {
        FailurePattern {
            primary: primary.into_iter().collect(),
            protection: protection.into_iter().collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.primary.len() + self.protection.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

/// Error pattern plus the primary failures, whose columns are always included.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ErrorFailurePattern {
    pub errors: ErrorPattern,
    pub failed_primaries: BTreeSet<usize>,
}

impl ColumnSet for ErrorFailurePattern {
    fn columns(&self, n: usize) -> Vec<usize> {
        let mut cols = self.errors.columns(n);
        cols.extend(self.failed_primaries.iter().flat_map(|&c| [2 * c, 2 * c + 1]));
        cols.sort_unstable();
        cols.dedup();
        cols
    }
}

impl ErrorFailurePattern {
    pub fn contains_connection(&self, i: usize) -> bool {
        self.errors.primary.contains(&i) || self.failed_primaries.contains(&i)
    }
}

/// Range-checked [`ColumnSet::columns`].
pub fn columns_of(pattern: &ErrorPattern, config: &NetworkConfig) -> Result<Vec<usize>, ModelError> {
    check_pattern(pattern, config.n(), config.m())?;
    Ok(pattern.columns(config.n()))
}

fn check_pattern(pattern: &ErrorPattern, n: usize, m: usize) -> Result<(), ModelError> {
    if let Some(&index) = pattern.primary.iter().find(|&&c| c >= n) {
        return Err(ModelError::ConnectionOutOfRange { index, n });
    }
    if let Some(&index) = pattern.protection.iter().find(|&&p| p >= m) {
        return Err(ModelError::ProtectionOutOfRange { index, m });
    }
    Ok(())
}

/// All k-subsets of `items`, lexicographic.
pub fn combinations<T: Copy>(items: &[T], k: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec<T: Copy>(items: &[T], start: usize, k: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        let need = k - cur.len();
        for i in start..=items.len().saturating_sub(need) {
            if i >= items.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, i + 1, k, cur, out);
            cur.pop();
        }
    }
    if k <= items.len() {
        rec(items, 0, k, &mut cur, &mut out);
    }
    out
}

/// Binomial coefficient.
pub fn choose(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// The family A(m1, m2) over the given primary and protection index sets.
pub fn pattern_family(primaries: &[usize], protections: &[usize], m1: usize, m2: usize) -> Vec<ErrorPattern> {
    let prims = combinations(primaries, m1);
    let prots = combinations(protections, m2);
    let mut out = Vec::with_capacity(prims.len() * prots.len());
    for a in &prims {
        for b in &prots {
            out.push(ErrorPattern::new(a.iter().copied(), b.iter().copied()));
        }
    }
    out
}

/// Error(/failure) patterns a decoder at connection `i` must try, with `n_e`
/// errors in total:
///
/// * no failures: the union over `n_c = 1..=n_e` of `(n_c, n_e - n_c)` type
///   patterns whose primaries include `i`;
/// * with primary failures `F`: error primaries avoid `F`, every pattern also
///   carries `F`'s columns, and it must contain `i` as an error or a failure.
///   When `i` itself failed, `n_c = 0` is admissible.
///
/// Patterns are returned sorted by column set.
pub fn patterns_at(
    n: usize,
    protections: &[usize],
    i: usize,
    n_e: usize,
    failed_primaries: &BTreeSet<usize>,
) -> Vec<ErrorFailurePattern> {
    let i_failed = failed_primaries.contains(&i);
    let others: Vec<usize> = (0..n)
        .filter(|&c| c != i && !failed_primaries.contains(&c))
        .collect();
    let mut out = Vec::new();
    let start = if i_failed { 0 } else { 1 };
    if !i_failed && n_e == 0 {
        return out;
    }
    for n_c in start..=n_e {
        let n_p = n_e - n_c;
        if n_p > protections.len() {
            continue;
        }
        // primaries excluding i that must be chosen
        let extra = if i_failed { n_c } else { n_c - 1 };
        for rest in combinations(&others, extra) {
            let mut prim: BTreeSet<usize> = rest.into_iter().collect();
            if !i_failed {
                prim.insert(i);
            }
            for prot in combinations(protections, n_p) {
                out.push(ErrorFailurePattern {
                    errors: ErrorPattern {
                        primary: prim.clone(),
                        protection: prot.into_iter().collect(),
                    },
                    failed_primaries: failed_primaries.clone(),
                });
            }
        }
    }
    out.sort_by_cached_key(|p| p.columns(n));
    out.dedup_by(|a, b| a.columns(n) == b.columns(n));
    out
}

/// [`patterns_at`] with the configuration's protection set (minus failures).
pub fn enumerate_patterns_at(
    config: &NetworkConfig,
    i: usize,
    n_e: usize,
    failures: Option<&FailurePattern>,
) -> Result<Vec<ErrorFailurePattern>, ModelError> {
    if i >= config.n() {
        return Err(ModelError::ConnectionOutOfRange { index: i, n: config.n() });
    }
    let none = FailurePattern::none();
    let failures = failures.unwrap_or(&none);
    let protections: Vec<usize> = (0..config.m())
        .filter(|p| !failures.protection.contains(p))
        .collect();
    Ok(patterns_at(config.n(), &protections, i, n_e, &failures.primary))
}

/// Per-column error values as seen by one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorValueVector {
    pub e_d: Vec<Fe>,
    pub e_u: Vec<Fe>,
    pub e_p: Vec<Fe>,
}

impl ErrorValueVector {
    pub fn zero(n: usize, m: usize) -> ErrorValueVector {
        ErrorValueVector {
            e_d: vec![Fe::ZERO; n],
            e_u: vec![Fe::ZERO; n],
            e_p: vec![Fe::ZERO; m],
        }
    }

    /// Flattened in column order `[e_d1, e_u1, ..., e_dn, e_un, e_p1, ..., e_pM]`.
    pub fn to_vec(&self) -> Vec<Fe> {
        self.e_d
            .iter()
            .zip(&self.e_u)
            .flat_map(|(&d, &u)| [d, u])
            .chain(self.e_p.iter().copied())
            .collect()
    }

    pub fn from_columns(n: usize, m: usize, values: &[Fe]) -> ErrorValueVector {
        assert_eq!(values.len(), 2 * n + m);
        ErrorValueVector {
            e_d: (0..n).map(|c| values[2 * c]).collect(),
            e_u: (0..n).map(|c| values[2 * c + 1]).collect(),
            e_p: values[2 * n..].to_vec(),
        }
    }

    /// Smallest pattern whose columns cover every nonzero entry.
    pub fn support(&self) -> ErrorPattern {
        ErrorPattern {
            primary: (0..self.e_d.len())
                .filter(|&c| !self.e_d[c].is_zero() || !self.e_u[c].is_zero())
                .collect(),
            protection: (0..self.e_p.len()).filter(|&p| !self.e_p[p].is_zero()).collect(),
        }
    }
}

/// Convenience: a configuration over GF(2^bits) with full coverage.
pub fn full_config(n: usize, m: usize, bits: u32) -> NetworkConfig {
    NetworkConfig::full(n, m, Field::new(bits).expect("valid field")).expect("valid config")
}

#[cfg(test)]
mod tests {
    #[test]
    fn node_id_round_trip() {
        for node in [NodeId::s(0), NodeId::t(7)] {
            assert_eq!(node.to_string().parse::<NodeId>().unwrap(), node);
        }
        assert_eq!("T2".parse::<NodeId>().unwrap(), NodeId::t(2));
        assert!("X1".parse::<NodeId>().is_err());
        assert!("S".parse::<NodeId>().is_err());
        let json = serde_json::to_string(&NodeId::s(3)).unwrap();
        assert_eq!(json, "\"S3\"");
    }

    use super::*;

    #[test]
    fn columns_of_examples() {
        let cfg = full_config(3, 4, 3);
        // connection 2 (one-based) -> columns 3,4 (one-based)
        assert_eq!(columns_of(&ErrorPattern::new([1], []), &cfg).unwrap(), vec![2, 3]);
        assert_eq!(
            columns_of(&ErrorPattern::new([0, 2], [1]), &cfg).unwrap(),
            vec![0, 1, 4, 5, 2 * 3 + 1]
        );
        assert!(columns_of(&ErrorPattern::default(), &cfg).unwrap().is_empty());
        assert!(matches!(
            columns_of(&ErrorPattern::new([3], []), &cfg),
            Err(ModelError::ConnectionOutOfRange { .. })
        ));
        assert!(matches!(
            columns_of(&ErrorPattern::new([], [4]), &cfg),
            Err(ModelError::ProtectionOutOfRange { .. })
        ));
    }

    #[test]
    fn pattern_size_invariant() {
        let p = ErrorPattern::new([0, 2], [1, 3, 0]);
        assert_eq!(p.size(), 7);
        assert_eq!(p.columns(4).len(), p.size());
    }

    #[test]
    fn enumerate_examples() {
        let cfg = full_config(3, 4, 3);
        let fam = enumerate_patterns_at(&cfg, 0, 1, None).unwrap();
        assert_eq!(fam.len(), 1);
        assert_eq!(fam[0].errors, ErrorPattern::new([0], []));

        let cfg = full_config(4, 8, 8);
        let fam = enumerate_patterns_at(&cfg, 1, 2, None).unwrap();
        assert_eq!(fam.len(), 11);

        assert!(enumerate_patterns_at(&cfg, 1, 0, None).unwrap().is_empty());
        assert!(enumerate_patterns_at(&cfg, 4, 1, None).is_err());
    }

    #[test]
    fn family_sizes_match_binomials() {
        for n in 1..=6 {
            for m in 1..=6 {
                let prim: Vec<usize> = (0..n).collect();
                let prot: Vec<usize> = (0..m).collect();
                for m1 in 0..=n {
                    for m2 in 0..=m {
                        let fam = pattern_family(&prim, &prot, m1, m2);
                        assert_eq!(fam.len() as u128, choose(n, m1) * choose(m, m2));
                        let set: BTreeSet<_> = fam.iter().collect();
                        assert_eq!(set.len(), fam.len());
                        for i in 0..n {
                            let at = fam.iter().filter(|p| p.primary.contains(&i)).count();
                            let want = if m1 == 0 { 0 } else { choose(n - 1, m1 - 1) * choose(m, m2) };
                            assert_eq!(at as u128, want);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn patterns_at_contain_own_columns_and_are_unique() {
        for n in 1..=5 {
            for m in 1..=5 {
                let prot: Vec<usize> = (0..m).collect();
                for n_e in 1..=3 {
                    for i in 0..n {
                        let fam = patterns_at(n, &prot, i, n_e, &BTreeSet::new());
                        let want: u128 = (1..=n_e)
                            .map(|n_c| choose(n - 1, n_c - 1) * choose(m, n_e - n_c))
                            .sum();
                        assert_eq!(fam.len() as u128, want);
                        for p in &fam {
                            let cols = p.columns(n);
                            assert!(cols.contains(&(2 * i)) && cols.contains(&(2 * i + 1)));
                            assert_eq!(p.errors.error_count(), n_e);
                        }
                        let keys: Vec<_> = fam.iter().map(|p| p.columns(n)).collect();
                        let mut sorted = keys.clone();
                        sorted.sort();
                        sorted.dedup();
                        assert_eq!(keys, sorted);
                        assert_eq!(fam, patterns_at(n, &prot, i, n_e, &BTreeSet::new()));
                    }
                }
            }
        }
    }

    #[test]
    fn patterns_with_failures() {
        let prot: Vec<usize> = (0..6).collect();
        let failed: BTreeSet<usize> = [2].into();
        // connection 2 failed itself: n_c = 0 admissible
        let fam = patterns_at(4, &prot, 2, 1, &failed);
        // n_c=0: 6 protection choices; n_c=1: 3 other primaries
        assert_eq!(fam.len(), 9);
        assert!(fam.iter().all(|p| p.failed_primaries == failed));
        // failure-only reconstruction
        let fam = patterns_at(4, &prot, 2, 0, &failed);
        assert_eq!(fam.len(), 1);
        assert_eq!(fam[0].columns(4), vec![4, 5]);
        // other connection: errors never land on the failed one
        let fam = patterns_at(4, &prot, 0, 1, &failed);
        assert_eq!(fam.len(), 1);
        assert!(fam.iter().all(|p| !p.errors.primary.contains(&2)));
        assert!(patterns_at(4, &prot, 0, 0, &failed).is_empty());
    }

    #[test]
    fn coverage_validation() {
        let f = Field::new(4).unwrap();
        assert!(matches!(
            NetworkConfig::with_coverage(2, 2, f.clone(), vec![[0].into(), [0].into()]),
            Err(ModelError::Uncovered(1))
        ));
        assert!(NetworkConfig::with_coverage(2, 1, f.clone(), vec![[0, 5].into()]).is_err());
        assert!(NetworkConfig::full(0, 4, f.clone()).is_err());
        let cfg = NetworkConfig::with_coverage(2, 2, f, vec![[0, 1].into(), [1].into()]).unwrap();
        assert_eq!(cfg.view(0, &BTreeSet::new()).rows, vec![0]);
        assert_eq!(cfg.view(1, &BTreeSet::new()).rows, vec![0, 1]);
        assert_eq!(cfg.view(1, &[0].into()).rows, vec![1]);
        assert!(!cfg.is_full_coverage());
    }

    #[test]
    fn error_vector_layout() {
        let mut e = ErrorValueVector::zero(2, 3);
        e.e_d[1] = Fe(5);
        e.e_p[2] = Fe(1);
        let flat = e.to_vec();
        assert_eq!(flat, vec![Fe(0), Fe(0), Fe(5), Fe(0), Fe(0), Fe(0), Fe(1)]);
        assert_eq!(ErrorValueVector::from_columns(2, 3, &flat), e);
        assert_eq!(e.support(), ErrorPattern::new([1], [2]));
    }
}
