//! Test-only oracles shared by the integration targets.
#![allow(dead_code)]

use num_traits::{One, Zero};
use tautring::integration::integrate;
use tautring::product::multiply_all;
use tautring::stable_graphs::{stable_graphs_by_edges, StableGraph};
use tautring::{TautClass, Q};

/// Degree-one generator of the tautological ring of M̄_{g,n}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Factor {
    Kappa,
    Psi(u32),
    /// Pushforward of the fundamental class along a one-edge graph.
    Bdry(StableGraph),
}

pub fn degree_one_factors(g: u32, n: u32) -> Vec<Factor> {
    let mut out = vec![Factor::Kappa];
    out.extend((1..=n).map(Factor::Psi));
    let levels = stable_graphs_by_edges(g, n, 1).unwrap();
    out.extend(levels[1].iter().cloned().map(Factor::Bdry));
    out
}

pub fn class_of(g: u32, n: u32, f: &Factor) -> TautClass {
    match f {
        Factor::Kappa => TautClass::kappa(g, n, 1).unwrap(),
        Factor::Psi(i) => TautClass::psi(g, n, *i, 1).unwrap(),
        Factor::Bdry(gr) => TautClass::of_graph(gr).unwrap(),
    }
}

/// Pullback along the map forgetting marking n+1.
fn pullback(g: u32, n: u32, f: &Factor) -> Vec<(Factor, Q)> {
    let one = Q::one();
    match f {
        Factor::Kappa => vec![(Factor::Kappa, one.clone()), (Factor::Psi(n + 1), -one)],
        Factor::Psi(i) => {
            let others: Vec<u32> = (1..=n).filter(|j| j != i).collect();
            let d = StableGraph::new(vec![0, g], vec![vec![*i, n + 1], others], vec![(0, 1)]).unwrap();
            vec![(Factor::Psi(*i), one.clone()), (Factor::Bdry(d), -one)]
        }
        Factor::Bdry(gr) => (0..gr.num_vertices())
            .map(|v| {
                let mut legs = gr.legs().to_vec();
                legs[v].push(n + 1);
                let lifted = StableGraph::new(gr.genera().to_vec(), legs, gr.edges().to_vec()).unwrap();
                (Factor::Bdry(lifted), one.clone())
            })
            .collect(),
    }
}

/// ∫ of a product of degree-one generators. Each κ₁ is removed through
/// κ₁·Y = π_*(ψ_{n+1}² · π^*Y) before anything is multiplied, so the
/// library's product never sees a κ class.
pub fn integral(g: u32, n: u32, factors: &[Factor]) -> Q {
    let Some(pos) = factors.iter().position(|f| *f == Factor::Kappa) else {
        if factors.is_empty() {
            return integrate(&TautClass::one(g, n).unwrap()).unwrap();
        }
        let classes: Vec<TautClass> = factors.iter().map(|f| class_of(g, n, f)).collect();
        return integrate(&multiply_all(&classes).unwrap()).unwrap();
    };
    let rest: Vec<&Factor> = factors.iter().enumerate().filter(|&(i, _)| i != pos).map(|(_, f)| f).collect();
    let mut expansions: Vec<(Vec<Factor>, Q)> = vec![(vec![Factor::Psi(n + 1), Factor::Psi(n + 1)], Q::one())];
    for f in rest {
        let pulled = pullback(g, n, f);
        let mut next = Vec::new();
        for (list, c) in &expansions {
            for (pf, pc) in &pulled {
                let mut l = list.clone();
                l.push(pf.clone());
                next.push((l, c * pc));
            }
        }
        expansions = next;
    }
    expansions
        .iter()
        .fold(Q::zero(), |acc, (list, c)| acc + c * integral(g, n + 1, list))
}

/// Coefficients of t^{2k} in (t/2)/sin(t/2), k = 0..=max.
pub fn hodge_series(max: usize) -> Vec<Q> {
    use num_bigint::BigInt;
    // sin(t/2)/(t/2) = Σ (-1)^k t^{2k} / (4^k (2k+1)!).
    let fact = |m: u64| (1..=m).fold(BigInt::one(), |a, x| a * x);
    let s: Vec<Q> = (0..=max as u64)
        .map(|k| {
            let sign = if k % 2 == 0 { 1 } else { -1 };
            Q::new(BigInt::from(sign), BigInt::from(4).pow(k as u32) * fact(2 * k + 1))
        })
        .collect();
    let mut inv = vec![Q::zero(); max + 1];
    inv[0] = Q::one();
    for k in 1..=max {
        let acc = (1..=k).fold(Q::zero(), |acc, j| acc + &s[j] * &inv[k - j]);
        inv[k] = -acc;
    }
    inv
}
