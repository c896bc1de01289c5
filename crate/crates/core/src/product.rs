//! Products of decorated strata classes by excess intersection over common
//! degenerations.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rational::Q;
use crate::stable_graphs::{common_degenerations_cached, CommonDegeneration, Contraction, StableGraph};
use crate::taut_classes::{Decoration, TautClass, Term};

/// Polynomial in the decoration monomials of a fixed graph.
pub(crate) type Poly = HashMap<Decoration, i128>;

fn vertex_degrees(graph: &StableGraph, d: &Decoration) -> Vec<u32> {
    (0..graph.num_vertices()).map(|v| d.vertex_degree(graph, v)).collect()
}

fn fits(graph: &StableGraph, d: &Decoration) -> bool {
    vertex_degrees(graph, d)
        .iter()
        .enumerate()
        .all(|(v, &k)| k <= graph.vertex_dim(v))
}

fn add_to(poly: &mut Poly, d: Decoration, c: i128) {
    if c == 0 {
        return;
    }
    *poly.entry(d).or_insert(0) += c;
}

/// Pulls a decoration back along a contraction `graph -> target`.
pub(crate) fn pull_back(graph: &StableGraph, along: &Contraction, target: &StableGraph, dec: &Decoration) -> Poly {
    let mut base = Decoration::trivial(graph);
    base.leg_psi = dec.leg_psi.clone();
    let pre = along.preimages(target.num_half_edges());
    for (h, &e) in dec.half_edge_psi.iter().enumerate() {
        if e > 0 {
            base.half_edge_psi[pre[h]] = e;
        }
    }
    let mut poly: Poly = HashMap::new();
    poly.insert(base, 1);
    for (v, kappas) in dec.kappa.iter().enumerate() {
        if kappas.is_empty() {
            continue;
        }
        let fiber: Vec<usize> = (0..graph.num_vertices()).filter(|&w| along.vertex_map[w] == v).collect();
        for &a in kappas {
            let mut next = HashMap::new();
            for (mono, c) in &poly {
                for &w in &fiber {
                    let mut m = mono.clone();
                    m.kappa[w].push(a);
                    m.kappa[w].sort_unstable();
                    if fits(graph, &m) {
                        add_to(&mut next, m, *c);
                    }
                }
            }
            poly = next;
        }
    }
    poly
}

fn multiply_polys(graph: &StableGraph, p: &Poly, q: &Poly) -> Poly {
    let mut out = HashMap::new();
    for (a, ca) in p {
        for (b, cb) in q {
            let m = Decoration {
                leg_psi: a.leg_psi.iter().zip(&b.leg_psi).map(|(x, y)| x + y).collect(),
                half_edge_psi: a.half_edge_psi.iter().zip(&b.half_edge_psi).map(|(x, y)| x + y).collect(),
                kappa: a
                    .kappa
                    .iter()
                    .zip(&b.kappa)
                    .map(|(x, y)| {
                        let mut k: Vec<u32> = x.iter().chain(y).copied().collect();
                        k.sort_unstable();
                        k
                    })
                    .collect(),
            };
            if fits(graph, &m) {
                add_to(&mut out, m, ca * cb);
            }
        }
    }
    out
}

/// Multiplies in the excess factor `∏ (-ψ_h - ψ_h')` over the given edges.
fn apply_excess(graph: &StableGraph, mut poly: Poly, edges: &[usize]) -> Poly {
    for &e in edges {
        let mut next = HashMap::new();
        for (mono, c) in &poly {
            for h in [2 * e, 2 * e + 1] {
                let mut m = mono.clone();
                m.half_edge_psi[h] += 1;
                if fits(graph, &m) {
                    add_to(&mut next, m, -c);
                }
            }
        }
        poly = next;
    }
    poly
}

/// The decorated pieces of `ξ_A*(α) · ξ_B*(β)`, one polynomial per common
/// degeneration.
pub(crate) fn term_product_pieces(a: &Term, b: &Term) -> Result<Vec<(CommonDegeneration, Poly)>> {
    let degs = common_degenerations_cached(a.graph(), b.graph())?;
    let mut out = Vec::with_capacity(degs.len());
    for deg in degs.iter() {
        let gamma = &deg.graph;
        let pa = pull_back(gamma, &deg.to_a, a.graph(), a.decoration());
        if pa.is_empty() {
            continue;
        }
        let pb = pull_back(gamma, &deg.to_b, b.graph(), b.decoration());
        if pb.is_empty() {
            continue;
        }
        let prod = multiply_polys(gamma, &pa, &pb);
        let prod = apply_excess(gamma, prod, &deg.shared_edges());
        let prod: Poly = prod.into_iter().filter(|(_, c)| *c != 0).collect();
        if !prod.is_empty() {
            out.push((deg.clone(), prod));
        }
    }
    Ok(out)
}

fn check_pair(a: &TautClass, b: &TautClass) -> Result<u32> {
    if (a.genus(), a.markings()) != (b.genus(), b.markings()) {
        return Err(Error::AmbientMismatch(a.genus(), a.markings(), b.genus(), b.markings()));
    }
    let max = 3 * a.genus() + a.markings() - 3;
    let degree = a.degree() + b.degree();
    if degree > max {
        return Err(Error::DegreeOutOfRange { degree, max });
    }
    Ok(degree)
}

/// Product of two classes.
pub fn multiply(a: &TautClass, b: &TautClass) -> Result<TautClass> {
    let degree = check_pair(a, b)?;
    let pairs: Vec<(&Term, &Q, &Term, &Q)> = a
        .terms()
        .iter()
        .flat_map(|(ta, ca)| b.terms().iter().map(move |(tb, cb)| (ta, ca, tb, cb)))
        .collect();
    let pieces: Vec<Vec<(Term, Q)>> = pairs
        .par_iter()
        .map(|&(ta, ca, tb, cb)| -> Result<Vec<(Term, Q)>> {
            let coeff = ca * cb;
            let mut out = Vec::new();
            for (deg, poly) in term_product_pieces(ta, tb)? {
                for (mono, c) in poly {
                    out.push((Term::new(&deg.graph, &mono)?, &coeff * Q::from_integer(c.into())));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut result = TautClass::zero(a.genus(), a.markings(), degree)?;
    for (t, c) in pieces.into_iter().flatten() {
        result.add_term(t, c)?;
    }
    Ok(result)
}

/// `a^k` for `k >= 1`.
pub fn power(a: &TautClass, k: u32) -> Result<TautClass> {
    if k == 0 {
        return Err(Error::Parse("power exponent must be positive".into()));
    }
    let mut acc = a.clone();
    for _ in 1..k {
        acc = multiply(&acc, a)?;
    }
    Ok(acc)
}

/// Product of a list of classes, left to right.
pub fn multiply_all(classes: &[TautClass]) -> Result<TautClass> {
    let (first, rest) = classes
        .split_first()
        .ok_or_else(|| Error::Parse("empty product".into()))?;
    rest.iter().try_fold(first.clone(), |acc, c| multiply(&acc, c))
}

#[cfg(test)]
mod tests {
    use num_traits::One;

    use super::*;
    use crate::stable_graphs::named;

    #[test]
    fn unit_is_identity() {
        let one = TautClass::one(2, 0).unwrap();
        let irr = TautClass::of_graph(&named::irreducible(2, 0)).unwrap();
        assert_eq!(multiply(&one, &irr).unwrap(), irr);
        assert_eq!(multiply(&irr, &one).unwrap(), irr);
        assert_eq!(power(&one, 5).unwrap(), one);
        assert_eq!(power(&irr, 1).unwrap(), irr);
    }

    #[test]
    fn commutative_on_divisors() {
        let gens = crate::taut_classes::generators(2, 0, 1).unwrap();
        for a in &gens {
            for b in &gens {
                let ca = TautClass::from_term(a.clone(), Q::one()).unwrap();
                let cb = TautClass::from_term(b.clone(), Q::one()).unwrap();
                assert_eq!(multiply(&ca, &cb).unwrap(), multiply(&cb, &ca).unwrap());
            }
        }
    }

    #[test]
    fn irr_times_sep_is_supported_on_refinements() {
        let irr = TautClass::of_graph(&named::irreducible(2, 0)).unwrap();
        let sep = TautClass::of_graph(&named::separating(2, 0, 1, &[])).unwrap();
        let p = multiply(&irr, &sep).unwrap();
        assert!(!p.is_empty());
        for t in p.terms().keys() {
            assert_eq!(t.graph().num_edges(), 2);
            assert!(t.graph().has_separating_edge());
            assert!(t.graph().edges().iter().any(|&(a, b)| a == b));
        }
    }

    #[test]
    fn degree_overflow_is_an_error() {
        let k = TautClass::kappa(1, 1, 1).unwrap();
        assert!(matches!(multiply(&k, &k), Err(Error::DegreeOutOfRange { .. })));
    }

    fn d(s: &[u32]) -> TautClass {
        TautClass::of_graph(&named::separating(0, 5, 0, s)).unwrap()
    }

    #[test]
    fn genus_zero_five_points() {
        use crate::integration::integrate;
        use crate::rational::q;
        let i = |a: &TautClass, b: &TautClass| integrate(&multiply(a, b).unwrap()).unwrap();
        assert_eq!(i(&d(&[1, 2]), &d(&[1, 2])), q(-1));
        assert_eq!(i(&d(&[1, 2]), &d(&[3, 4])), q(1));
        assert_eq!(i(&d(&[1, 2]), &d(&[1, 3])), q(0));
        assert_eq!(i(&d(&[1, 2]), &d(&[3, 4, 5])), q(-1));
        let psi1 = TautClass::psi(0, 5, 1, 1).unwrap();
        assert_eq!(i(&psi1, &d(&[1, 2])), q(0));
        assert_eq!(i(&psi1, &d(&[2, 3])), q(1));
        let k1 = TautClass::kappa(0, 5, 1).unwrap();
        assert_eq!(i(&k1, &k1), q(5));
        assert_eq!(i(&k1, &d(&[1, 2])), q(1));
    }
}
