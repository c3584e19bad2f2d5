//! Exhaustive provisioning oracle shared by the integration targets.
//!
//! The oracle never builds walks: a primary is any edge set whose degrees
//! and connectivity describe a simple path, a protection route is any
//! connected edge multiset with the right odd-degree vertices (an Euler
//! trail) that touches every end node.
#![allow(dead_code)]

use std::collections::BTreeSet;

use pathguard::provisioning::{Graph, ModelKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn vectors(edges: usize, max: u8) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    for _ in 0..edges {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..=max).map(move |m| {
                    let mut w = v.clone();
                    w.push(m);
                    w
                })
            })
            .collect();
    }
    out
}

fn degrees(g: &Graph, mult: &[u8]) -> Vec<usize> {
    let mut deg = vec![0; g.node_count()];
    for (e, &m) in mult.iter().enumerate() {
        deg[g.edges()[e].a] += m as usize;
        deg[g.edges()[e].b] += m as usize;
    }
    deg
}

/// Nodes touched by the multiset, if they form one component.
fn component(g: &Graph, mult: &[u8]) -> Option<BTreeSet<usize>> {
    let touched: BTreeSet<usize> = mult
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0)
        .flat_map(|(e, _)| [g.edges()[e].a, g.edges()[e].b])
        .collect();
    let &start = touched.iter().next()?;
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for (e, &m) in mult.iter().enumerate() {
            let edge = &g.edges()[e];
            if m > 0 && (edge.a == v || edge.b == v) {
                let w = edge.other(v);
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
    }
    (seen == touched).then_some(seen)
}

fn cost(g: &Graph, mult: &[u8]) -> u64 {
    mult.iter().zip(g.edges()).map(|(&m, e)| m as u64 * e.cost).sum()
}

fn is_path(g: &Graph, mult: &[u8], s: usize, t: usize) -> bool {
    let deg = degrees(g, mult);
    let ends_ok = deg[s] == 1 && deg[t] == 1;
    let inner_ok = (0..g.node_count()).filter(|&v| v != s && v != t).all(|v| deg[v] == 0 || deg[v] == 2);
    ends_ok && inner_ok && component(g, mult).is_some()
}

fn is_protection(g: &Graph, mult: &[u8], conns: &[(usize, usize)]) -> bool {
    let Some(seen) = component(g, mult) else {
        return false;
    };
    let s_set: BTreeSet<usize> = conns.iter().map(|c| c.0).collect();
    let t_set: BTreeSet<usize> = conns.iter().map(|c| c.1).collect();
    if !s_set.iter().chain(&t_set).all(|v| seen.contains(v)) {
        return false;
    }
    let odd: Vec<usize> = degrees(g, mult)
        .iter()
        .enumerate()
        .filter(|(_, &d)| d % 2 == 1)
        .map(|(v, _)| v)
        .collect();
    match odd.as_slice() {
        [] => s_set.intersection(&t_set).next().is_some(),
        [x, y] => (s_set.contains(x) && t_set.contains(y)) || (s_set.contains(y) && t_set.contains(x)),
        _ => false,
    }
}

struct Pool {
    routes: Vec<(u64, Vec<u8>)>,
    group: usize,
    cap: u8,
    weight: u64,
}

fn pool(g: &Graph, mult_max: u8, ok: impl Fn(&[u8]) -> bool) -> Vec<(u64, Vec<u8>)> {
    let mut out: Vec<(u64, Vec<u8>)> = vectors(g.edges().len(), mult_max)
        .into_iter()
        .filter(|v| ok(v))
        .map(|v| (cost(g, &v), v))
        .collect();
    out.sort();
    out
}

fn combine(pools: &[Pool], depth: usize, usage: &mut Vec<Vec<u8>>, partial: u64, best: &mut Option<u64>) {
    if best.is_some_and(|b| partial >= b) {
        return;
    }
    if depth == pools.len() {
        *best = Some(partial);
        return;
    }
    let p = &pools[depth];
    for (c, mult) in &p.routes {
        if best.is_some_and(|b| partial + p.weight * c >= b) {
            break;
        }
        if usage[p.group].iter().zip(mult).any(|(&u, &m)| u + m > p.cap) {
            continue;
        }
        for (u, m) in usage[p.group].iter_mut().zip(mult) {
            *u += m;
        }
        combine(pools, depth + 1, usage, partial + p.weight * c, best);
        for (u, m) in usage[p.group].iter_mut().zip(mult) {
            *u -= m;
        }
    }
}

pub fn brute_force(kind: ModelKind, g: &Graph, conns: &[(usize, usize)], factor: usize) -> Option<u64> {
    let factor = factor as u8;
    let e = g.edges().len();
    let mut pools = Vec::new();
    let primary = |&(s, t): &(usize, usize), group, cap| Pool {
        routes: pool(g, 1, |v| is_path(g, v, s, t)),
        group,
        cap,
        weight: 1,
    };
    match kind {
        ModelKind::Ilp1 => {
            pools.extend(conns.iter().map(|c| primary(c, 0, factor)));
            for _ in 0..4 {
                pools.push(Pool {
                    routes: pool(g, factor.min(2), |v| is_protection(g, v, conns)),
                    group: 0,
                    cap: factor,
                    weight: 1,
                });
            }
        }
        ModelKind::Ilp2 => {
            for (i, c) in conns.iter().enumerate() {
                for _ in 0..3 {
                    pools.push(primary(c, i, factor));
                }
            }
        }
        ModelKind::Ilp3 => {
            pools.extend(conns.iter().map(|c| primary(c, 0, 1)));
            pools.push(Pool {
                routes: pool(g, 1, |v| is_protection(g, v, conns)),
                group: 0,
                cap: 1,
                weight: 4,
            });
        }
    }
    let groups = pools.iter().map(|p| p.group).max().unwrap_or(0) + 1;
    let mut best = None;
    combine(&pools, 0, &mut vec![vec![0; e]; groups], 0, &mut best);
    best
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> (Graph, Vec<(usize, usize)>) {
    let nodes = rng.gen_range(3..=5);
    let mut g = Graph::new();
    for v in 0..nodes {
        g.add_node(&format!("n{v}"));
    }
    // spanning path first so most instances are feasible
    for v in 1..nodes {
        g.add_edge(v - 1, v, rng.gen_range(1..=9)).unwrap();
    }
    let extra = rng.gen_range(0..=(8 - (nodes - 1)).min(4));
    for _ in 0..extra {
        let a = rng.gen_range(0..nodes);
        let mut b = rng.gen_range(0..nodes);
        while b == a {
            b = rng.gen_range(0..nodes);
        }
        g.add_edge(a, b, rng.gen_range(1..=9)).unwrap();
    }
    let k = rng.gen_range(1..=2);
    let conns = (0..k)
        .map(|_| {
            let s = rng.gen_range(0..nodes);
            let mut t = rng.gen_range(0..nodes);
            while t == s {
                t = rng.gen_range(0..nodes);
            }
            (s, t)
        })
        .collect();
    (g, conns)
}
