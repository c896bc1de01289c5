//! Pixton's formula: the classes P_g^{d,r}(A), their interpolation in r, the
//! double ramification cycle and λ_g.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rational::{binomial, factorial, frac, q, q_big, Q};
use crate::stable_graphs::{check_stable, stable_graphs_by_edges, StableGraph};
use crate::taut_classes::{compositions, Decoration, TautClass, Term};

/// Weights on half-edges, residues in `0..r`.
pub type WeightingModR = Vec<u32>;

/// Lazy enumeration of the weightings mod r of a graph: free values on the
/// edges outside a spanning tree, tree edges solved by peeling leaves.
pub struct Weightings {
    r: u32,
    num_half_edges: usize,
    leg_sums: Vec<u32>,
    half_edges_at: Vec<Vec<usize>>,
    free_edges: Vec<usize>,
    /// Non-root vertices, leaves first, with their parent half-edge.
    peel_order: Vec<(usize, usize)>,
    counter: Vec<u32>,
    done: bool,
}

impl Weightings {
    /// Only the incidence structure matters, so the edges need not form a
    /// stable graph; they must connect all `legs.len()` vertices.
    fn from_incidence(legs: &[Vec<u32>], edges: &[(usize, usize)], a: &[i64], r: u32) -> Self {
        let nv = legs.len();
        let ri = r.max(1) as i64;
        let leg_sums: Vec<u32> = legs
            .iter()
            .map(|l| l.iter().map(|&i| a[i as usize - 1].rem_euclid(ri)).sum::<i64>().rem_euclid(ri) as u32)
            .collect();
        let total: i64 = a.iter().sum();
        let mut half_edges_at = vec![Vec::new(); nv];
        for (e, &(x, y)) in edges.iter().enumerate() {
            half_edges_at[x].push(2 * e);
            half_edges_at[y].push(2 * e + 1);
        }
        let vertex_of = |h: usize| if h.is_multiple_of(2) { edges[h / 2].0 } else { edges[h / 2].1 };

        // Breadth-first spanning tree from vertex 0.
        let mut parent_half = vec![usize::MAX; nv];
        let mut seen = vec![false; nv];
        let mut order = vec![0];
        seen[0] = true;
        let mut in_tree = vec![false; edges.len()];
        let mut i = 0;
        while i < order.len() {
            let v = order[i];
            i += 1;
            for &h in &half_edges_at[v] {
                let w = vertex_of(h ^ 1);
                if !seen[w] {
                    seen[w] = true;
                    in_tree[h / 2] = true;
                    parent_half[w] = h ^ 1;
                    order.push(w);
                }
            }
        }
        let free_edges: Vec<usize> = (0..edges.len()).filter(|&e| !in_tree[e]).collect();
        let peel_order = order.iter().rev().filter(|&&v| v != 0).map(|&v| (v, parent_half[v])).collect();
        Weightings {
            r,
            num_half_edges: 2 * edges.len(),
            leg_sums,
            half_edges_at,
            counter: vec![0; free_edges.len()],
            free_edges,
            peel_order,
            done: r == 0 || total.rem_euclid(ri) != 0,
        }
    }

    fn current(&self) -> WeightingModR {
        let r = self.r;
        let mut w = vec![u32::MAX; self.num_half_edges];
        for (&e, &x) in self.free_edges.iter().zip(&self.counter) {
            w[2 * e] = x;
            w[2 * e + 1] = (r - x) % r;
        }
        for &(v, ph) in &self.peel_order {
            let mut s = self.leg_sums[v] as u64;
            for &h in &self.half_edges_at[v] {
                if h != ph {
                    s += w[h] as u64;
                }
            }
            let x = ((r as u64 - s % r as u64) % r as u64) as u32;
            w[ph] = x;
            w[ph ^ 1] = (r - x) % r;
        }
        w
    }
}

impl Iterator for Weightings {
    type Item = WeightingModR;

    fn next(&mut self) -> Option<WeightingModR> {
        if self.done {
            return None;
        }
        let item = self.current();
        let mut i = 0;
        loop {
            if i == self.counter.len() {
                self.done = true;
                break;
            }
            self.counter[i] += 1;
            if self.counter[i] < self.r {
                break;
            }
            self.counter[i] = 0;
            i += 1;
        }
        Some(item)
    }
}

/// All weightings mod r of `graph` for leg weights `a` (one per marking).
pub fn weightings_mod_r(graph: &StableGraph, a: &[i64], r: u32) -> Result<Weightings> {
    if a.len() != graph.num_markings() as usize {
        return Err(Error::WeightCount {
            expected: graph.num_markings(),
            got: a.len(),
        });
    }
    Ok(Weightings::from_incidence(graph.legs(), graph.edges(), a, r))
}

/// Whether a half-edge weighting satisfies the leg, edge and vertex
/// congruences.
pub fn is_weighting(graph: &StableGraph, a: &[i64], r: u32, w: &[u32]) -> bool {
    let ri = r as i64;
    let edges_ok = (0..graph.num_edges()).all(|e| (w[2 * e] + w[2 * e + 1]).is_multiple_of(r));
    let vertices_ok = (0..graph.num_vertices()).all(|v| {
        let legs: i64 = graph.vertex_legs(v).iter().map(|&i| a[i as usize - 1]).sum();
        let hs: i64 = graph.half_edges_at(v).iter().map(|&h| w[h] as i64).sum();
        (legs + hs).rem_euclid(ri) == 0
    });
    w.iter().all(|&x| x < r) && edges_ok && vertices_ok
}

/// Per-graph expansion of Pixton's integrand, independent of r: for each
/// tuple of edge exponents k_e, the decorated terms it produces.
struct GraphExpansion {
    h1: u32,
    aut: u64,
    pieces: Vec<(Vec<u32>, Vec<(Term, Q)>)>,
}

fn expand_graph(graph: &StableGraph, a: &[i64], d: u32) -> Result<GraphExpansion> {
    let ne = graph.num_edges();
    let n = graph.num_markings() as usize;
    let budget = d - ne as u32;
    let mut pieces = Vec::new();
    for edge_total in 0..=budget {
        let leg_total = budget - edge_total;
        let leg_choices: Vec<(Vec<u32>, Q)> = if a.iter().all(|&x| x == 0) {
            if leg_total == 0 {
                vec![(vec![0; n], Q::one())]
            } else {
                Vec::new()
            }
        } else {
            compositions(leg_total, n)
                .into_iter()
                .map(|ls| {
                    let c = ls.iter().zip(a).fold(Q::one(), |acc, (&l, &ai)| {
                        acc * q_big(BigInt::from(ai * ai).pow(l)) / q_big(factorial(l))
                    });
                    (ls, c)
                })
                .filter(|(_, c)| !c.is_zero())
                .collect()
        };
        if leg_choices.is_empty() {
            continue;
        }
        for ks in compositions(edge_total, ne) {
            let edge_coeff = ks.iter().fold(Q::one(), |acc, &k| {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                acc * q(sign) / q_big(factorial(k + 1))
            });
            // Expand ∏ (ψ_h + ψ_h')^{k_e} binomially.
            let mut monos: Vec<(Vec<u32>, BigInt)> = vec![(vec![0; 2 * ne], BigInt::one())];
            for (e, &k) in ks.iter().enumerate() {
                let mut next = Vec::new();
                for (m, c) in &monos {
                    for j in 0..=k {
                        let mut m2 = m.clone();
                        m2[2 * e] = j;
                        m2[2 * e + 1] = k - j;
                        next.push((m2, c * binomial(k, j)));
                    }
                }
                monos = next;
            }
            let mut terms: HashMap<Term, Q> = HashMap::new();
            for (legs, lc) in &leg_choices {
                for (hes, c) in &monos {
                    let dec = Decoration {
                        leg_psi: legs.clone(),
                        half_edge_psi: hes.clone(),
                        kappa: vec![Vec::new(); graph.num_vertices()],
                    };
                    if dec.exceeds_vertex_dimension(graph) {
                        continue;
                    }
                    let t = Term::new(graph, &dec)?;
                    *terms.entry(t).or_insert_with(Q::zero) += &edge_coeff * lc * q_big(c.clone());
                }
            }
            let mut terms: Vec<(Term, Q)> = terms.into_iter().filter(|(_, c)| !c.is_zero()).collect();
            terms.sort();
            if !terms.is_empty() {
                pieces.push((ks, terms));
            }
        }
    }
    Ok(GraphExpansion {
        h1: graph.h1(),
        aut: graph.automorphism_count(),
        pieces,
    })
}

/// `Σ_{w ∈ W_{Γ,r}} ∏_e (w(h) w(h'))^{k_e + 1}` for every needed exponent
/// tuple. Loops are summed in closed form since their weights do not enter
/// any vertex condition.
fn weighting_sums(graph: &StableGraph, a: &[i64], r: u32, tuples: &[&Vec<u32>]) -> Vec<BigInt> {
    let ne = graph.num_edges();
    let loops: Vec<bool> = graph.edges().iter().map(|&(x, y)| x == y).collect();
    let max_k = tuples.iter().flat_map(|t| t.iter()).copied().max().unwrap_or(0);
    let loop_sums: Vec<BigInt> = (0..=max_k)
        .map(|k| {
            (0..r)
                .map(|x| BigInt::from(x as u64 * ((r - x) % r) as u64).pow(k + 1))
                .sum()
        })
        .collect();

    // Loops never enter a vertex condition, so enumerate without them.
    let kept: Vec<usize> = (0..ne).filter(|&e| !loops[e]).collect();
    let kept_edges: Vec<(usize, usize)> = kept.iter().map(|&e| graph.edges()[e]).collect();
    let mut sums = vec![BigInt::zero(); tuples.len()];
    for w in Weightings::from_incidence(graph.legs(), &kept_edges, a, r) {
        let m: Vec<u64> = (0..kept.len()).map(|i| w[2 * i] as u64 * w[2 * i + 1] as u64).collect();
        for (s, t) in sums.iter_mut().zip(tuples) {
            let mut prod = BigInt::one();
            for (i, &e) in kept.iter().enumerate() {
                prod *= BigInt::from(m[i]).pow(t[e] + 1);
                if prod.is_zero() {
                    break;
                }
            }
            *s += prod;
        }
    }
    for (s, t) in sums.iter_mut().zip(tuples) {
        for e in 0..ne {
            if loops[e] {
                *s *= &loop_sums[t[e] as usize];
            }
        }
    }
    sums
}

/// A class whose coefficients are polynomials in r (ascending coefficients).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RPolynomialClass {
    pub g: u32,
    pub n: u32,
    pub degree: u32,
    pub terms: BTreeMap<Term, Vec<Q>>,
}

impl RPolynomialClass {
    pub fn evaluate(&self, r: &Q) -> Result<TautClass> {
        let mut c = TautClass::zero(self.g, self.n, self.degree)?;
        for (t, poly) in &self.terms {
            let v = poly.iter().rev().fold(Q::zero(), |acc, a| acc * r + a);
            c.add_term(t.clone(), v)?;
        }
        Ok(c)
    }

    pub fn constant_term(&self) -> Result<TautClass> {
        self.evaluate(&Q::zero())
    }
}

fn check_weights(g: u32, a: &[i64]) -> Result<u32> {
    let n = a.len() as u32;
    check_stable(g, n)?;
    Ok(n)
}

struct PixtonSetup {
    n: u32,
    graphs: Vec<(StableGraph, GraphExpansion)>,
}

fn setup(g: u32, a: &[i64], d: u32) -> Result<PixtonSetup> {
    let n = check_weights(g, a)?;
    let max = 3 * g + n - 3;
    if d > max {
        return Err(Error::DegreeOutOfRange { degree: d, max });
    }
    let levels = stable_graphs_by_edges(g, n, d as usize)?;
    let graphs: Vec<StableGraph> = levels.iter().take(d as usize + 1).flatten().cloned().collect();
    let graphs = graphs
        .into_par_iter()
        .map(|gr| expand_graph(&gr, a, d).map(|x| (gr, x)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PixtonSetup { n, graphs })
}

fn class_at_r(g: u32, a: &[i64], d: u32, r: u32, s: &PixtonSetup) -> Result<TautClass> {
    let contributions: Vec<Vec<(Term, Q)>> = s
        .graphs
        .par_iter()
        .map(|(gr, ex)| {
            let tuples: Vec<&Vec<u32>> = ex.pieces.iter().map(|(k, _)| k).collect();
            if tuples.is_empty() {
                return Vec::new();
            }
            let sums = weighting_sums(gr, a, r, &tuples);
            let scale = Q::one() / (q_big(BigInt::from(ex.aut)) * q_big(BigInt::from(r).pow(ex.h1)));
            let mut out = Vec::new();
            for ((_, terms), w) in ex.pieces.iter().zip(sums) {
                if w.is_zero() {
                    continue;
                }
                let f = &scale * q_big(w);
                for (t, c) in terms {
                    out.push((t.clone(), c * &f));
                }
            }
            out
        })
        .collect();
    let mut class = TautClass::zero(g, s.n, d)?;
    for (t, c) in contributions.into_iter().flatten() {
        class.add_term(t, c)?;
    }
    Ok(class)
}

/// The degree-d part of Pixton's formula at a fixed r.
pub fn pixton_class_at_r(g: u32, a: &[i64], d: u32, r: u32) -> Result<TautClass> {
    let s = setup(g, a, d)?;
    class_at_r(g, a, d, r, &s)
}

/// Lagrange interpolation of sampled values into ascending coefficients.
fn interpolate(xs: &[Q], ys: &[Q]) -> Vec<Q> {
    let k = xs.len();
    let mut coeffs = vec![Q::zero(); k];
    for j in 0..k {
        // Basis polynomial ∏_{i≠j} (r - x_i) / (x_j - x_i).
        let mut basis = vec![Q::one()];
        let mut denom = Q::one();
        for i in 0..k {
            if i == j {
                continue;
            }
            let mut next = vec![Q::zero(); basis.len() + 1];
            for (p, b) in basis.iter().enumerate() {
                next[p + 1] += b;
                next[p] -= b * &xs[i];
            }
            basis = next;
            denom *= &xs[j] - &xs[i];
        }
        let f = &ys[j] / denom;
        for (c, b) in coeffs.iter_mut().zip(&basis) {
            *c += b * &f;
        }
    }
    while coeffs.len() > 1 && coeffs.last().is_some_and(Zero::is_zero) {
        coeffs.pop();
    }
    coeffs
}

/// Default sample points: 2d+2 consecutive integers from max(d, max|a_i|) + 2.
pub fn default_samples(a: &[i64], d: u32) -> Vec<u32> {
    let start = (d as u64).max(a.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0)) as u32 + 2;
    (start..start + 2 * d + 2).collect()
}

/// Interpolates P_g^{d,r}(A) over the given sample values of r.
pub fn pixton_polynomial(g: u32, a: &[i64], d: u32, samples: &[u32]) -> Result<RPolynomialClass> {
    let s = setup(g, a, d)?;
    polynomial_from_setup(g, a, d, samples, &s)
}

fn polynomial_from_setup(g: u32, a: &[i64], d: u32, samples: &[u32], s: &PixtonSetup) -> Result<RPolynomialClass> {
    let values: Vec<TautClass> = samples
        .par_iter()
        .map(|&r| class_at_r(g, a, d, r, s))
        .collect::<Result<_>>()?;
    let mut all_terms: Vec<Term> = values.iter().flat_map(|c| c.terms().keys().cloned()).collect();
    all_terms.sort();
    all_terms.dedup();
    let xs: Vec<Q> = samples.iter().map(|&r| q(r as i64)).collect();
    let mut terms = BTreeMap::new();
    for t in all_terms {
        let ys: Vec<Q> = values
            .iter()
            .map(|c| c.terms().get(&t).cloned().unwrap_or_else(Q::zero))
            .collect();
        let poly = interpolate(&xs, &ys);
        if !(poly.len() == 1 && poly[0].is_zero()) {
            terms.insert(t, poly);
        }
    }
    Ok(RPolynomialClass {
        g,
        n: s.n,
        degree: d,
        terms,
    })
}

/// P_g^d(A): the constant term of the interpolated polynomial, verified at
/// one extra value of r.
pub fn pixton_class(g: u32, a: &[i64], d: u32) -> Result<TautClass> {
    let s = setup(g, a, d)?;
    let samples = default_samples(a, d);
    let poly = polynomial_from_setup(g, a, d, &samples, &s)?;
    let check_r = samples.last().expect("nonempty samples") + 1;
    let direct = class_at_r(g, a, d, check_r, &s)?;
    let predicted = poly.evaluate(&q(check_r as i64))?;
    if direct != predicted {
        return Err(Error::Interpolation(format!(
            "P_{g}^{d} interpolated from r = {samples:?} does not reproduce r = {check_r}"
        )));
    }
    poly.constant_term()
}

/// `2^{-d} P_g^d(A)`; for d = g this is DR_{g,A}.
pub fn dr_degree(g: u32, a: &[i64], d: u32) -> Result<TautClass> {
    let sum: i64 = a.iter().sum();
    if sum != 0 {
        return Err(Error::WeightSum(sum));
    }
    let p = pixton_class(g, a, d)?;
    Ok(p.scale(&(Q::one() / q_big(BigInt::from(2).pow(d)))))
}

/// DR_{g,A} = 2^{-g} P_g^g(A).
pub fn dr_cycle(g: u32, a: &[i64]) -> Result<TautClass> {
    dr_degree(g, a, g)
}

/// λ_g on M̄_{g,n} as (-1)^g DR_{g,(0,...,0)}.
pub fn lambda_top(g: u32, n: u32) -> Result<TautClass> {
    check_stable(g, n)?;
    if g == 0 {
        return Err(Error::Dimension("λ_g needs g ≥ 1".into()));
    }
    let dr = dr_cycle(g, &vec![0; n as usize])?;
    Ok(if g.is_multiple_of(2) { dr } else { dr.scale(&q(-1)) })
}

/// Published expansions of λ_g for g ≤ 3 (on M̄_{1,1}, M̄₂, M̄₃), each
/// graph standing for the pushforward of its decoration.
pub fn lambda_reference(g: u32) -> Option<TautClass> {
    let term = |genera: &[u32], edges: &[(usize, usize)], psi: &[usize], c: Q| -> TautClass {
        let n = u32::from(g == 1);
        let mut legs = vec![Vec::new(); genera.len()];
        legs[0] = (1..=n).collect();
        let graph = StableGraph::new(genera.to_vec(), legs, edges.to_vec()).expect("stable");
        let mut d = Decoration::trivial(&graph);
        for &h in psi {
            d.half_edge_psi[h] += 1;
        }
        TautClass::from_graph(&graph, &d, c).expect("fits")
    };
    let terms = match g {
        1 => vec![term(&[0], &[(0, 0)], &[], frac(1, 24))],
        2 => vec![
            term(&[1], &[(0, 0)], &[0], frac(1, 240)),
            term(&[0], &[(0, 0), (0, 0)], &[], frac(1, 1152)),
        ],
        3 => vec![
            term(&[2], &[(0, 0)], &[0, 0], frac(1, 2016)),
            term(&[2], &[(0, 0)], &[0, 1], frac(1, 2016)),
            term(&[1, 1], &[(0, 1), (0, 1)], &[0], frac(-1, 672)),
            term(&[1], &[(0, 0), (0, 0)], &[0], frac(1, 5760)),
            term(&[0, 1], &[(0, 1), (0, 1), (0, 1)], &[], frac(-13, 30240)),
            term(&[0, 1], &[(0, 0), (0, 1), (0, 1)], &[], frac(-1, 5760)),
            term(&[0], &[(0, 0), (0, 0), (0, 0)], &[], frac(1, 82944)),
        ],
        _ => return None,
    };
    terms.into_iter().reduce(|a, b| a.add(&b).expect("same ambient"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable_graphs::{enumerate_stable_graphs, named};

    #[test]
    fn lambda_matches_reference_term_by_term() {
        assert_eq!(lambda_top(1, 1).unwrap(), lambda_reference(1).unwrap());
        assert_eq!(lambda_top(2, 0).unwrap(), lambda_reference(2).unwrap());
        assert_eq!(lambda_top(3, 0).unwrap(), lambda_reference(3).unwrap());
        assert!(lambda_reference(4).is_none());
    }

    #[test]
    fn weighting_counts() {
        assert_eq!(weightings_mod_r(&named::theta(), &[], 3).unwrap().count(), 9);
        assert_eq!(weightings_mod_r(&named::irreducible(1, 1), &[0], 5).unwrap().count(), 5);
        let tree = named::separating(2, 0, 1, &[]);
        let ws: Vec<_> = weightings_mod_r(&tree, &[], 4).unwrap().collect();
        assert_eq!(ws, vec![vec![0, 0]]);
        for gr in enumerate_stable_graphs(2, 1).unwrap() {
            for r in 1..5 {
                let ws: Vec<_> = weightings_mod_r(&gr, &[0], r).unwrap().collect();
                assert_eq!(ws.len() as u64, (r as u64).pow(gr.h1()));
                assert!(ws.iter().all(|w| is_weighting(&gr, &[0], r, w)));
            }
        }
    }

    #[test]
    fn brute_force_weighting_enumeration_agrees() {
        // Enumerate all assignments and keep the valid ones.
        for gr in enumerate_stable_graphs(1, 2).unwrap() {
            let a = [3, -3];
            for r in 1..5u32 {
                let nh = gr.num_half_edges() as u32;
                let mut count = 0;
                for code in 0..r.pow(nh) {
                    let w: Vec<u32> = (0..nh).map(|i| code / r.pow(i) % r).collect();
                    if is_weighting(&gr, &a, r, &w) {
                        count += 1;
                    }
                }
                assert_eq!(weightings_mod_r(&gr, &a, r).unwrap().count(), count);
            }
        }
    }

    #[test]
    fn degree_zero_is_fundamental() {
        let p = pixton_class(2, &[1, -1], 0).unwrap();
        assert_eq!(p, TautClass::one(2, 2).unwrap());
    }

    #[test]
    fn genus_one_lambda() {
        let l = lambda_top(1, 1).unwrap();
        let expected = TautClass::from_graph(
            &named::irreducible(1, 1),
            &Decoration::trivial(&named::irreducible(1, 1)),
            frac(1, 24),
        )
        .unwrap();
        assert_eq!(l, expected);
    }

    #[test]
    fn genus_zero_dr_is_fundamental() {
        assert_eq!(dr_cycle(0, &[2, -1, -1]).unwrap(), TautClass::one(0, 3).unwrap());
        assert!(matches!(dr_cycle(0, &[2, -1, 0]), Err(Error::WeightSum(1))));
    }
}
