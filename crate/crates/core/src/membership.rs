//! Pairing-vector representations, divisor-subalgebra spans, membership
//! tests, and the genus-2 Θ-class linear system.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_linalg::{solve_affine, AffineSolutionSet, Inequality, LinearEquation, QMatrix, RowSpace};
use crate::integration::{pair_terms, pairing_matrix_terms};
use crate::pixton::lambda_top;
use crate::product::multiply;
use crate::rational::{frac, q, Q};
use crate::stable_graphs::{check_stable, named};
use crate::taut_classes::{generators, TautClass, Term};

/// Integrals of `class` against the given complementary-degree terms.
pub fn pairing_vector_against(class: &TautClass, against: &[Term]) -> Result<Vec<Q>> {
    against
        .par_iter()
        .map(|gen| {
            class
                .terms()
                .iter()
                .try_fold(Q::zero(), |acc, (t, c)| Ok(acc + c * pair_terms(t, gen)?))
        })
        .collect()
}

/// Integrals of `class` against `generators(g, n, top - deg)`.
pub fn pairing_vector(class: &TautClass) -> Result<Vec<Q>> {
    let (g, n) = (class.genus(), class.markings());
    let top = 3 * g + n - 3;
    pairing_vector_against(class, &generators(g, n, top - class.degree())?)
}

/// Rank of the pairing between degree-d generators and their complement,
/// the dimension of R^d modulo pairing kernel.
pub fn ambient_rank(g: u32, n: u32, d: u32) -> Result<usize> {
    check_stable(g, n)?;
    let top = 3 * g + n - 3;
    if d > top {
        return Err(Error::DegreeOutOfRange { degree: d, max: top });
    }
    let rows = generators(g, n, d)?;
    let cols = generators(g, n, top - d)?;
    Ok(pairing_matrix_terms(&rows, &cols)?.rank())
}

/// Multisets of generators with degrees in `1..=k` and total degree `target`,
/// as index lists into the concatenated generator list.
fn generator_monomials(degrees: &[u32], target: u32) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn rec(start: usize, left: u32, degrees: &[u32], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..degrees.len() {
            if degrees[i] <= left {
                cur.push(i);
                rec(i, left - degrees[i], degrees, cur, out);
                cur.pop();
            }
        }
    }
    rec(0, target, degrees, &mut Vec::new(), &mut out);
    out
}

/// Pairing vectors of all products of generators of degree at most `k` with
/// total degree `target_d`.
pub fn subalgebra_span(g: u32, n: u32, target_d: u32, k: u32) -> Result<QMatrix> {
    check_stable(g, n)?;
    let top = 3 * g + n - 3;
    if target_d > top {
        return Err(Error::DegreeOutOfRange { degree: target_d, max: top });
    }
    if k == 0 {
        return Err(Error::DegreeOutOfRange { degree: 0, max: top });
    }
    let mut small = Vec::new();
    for d in 1..=k.min(target_d) {
        for t in generators(g, n, d)? {
            small.push(TautClass::from_term(t, Q::one())?);
        }
    }
    let degrees: Vec<u32> = small.iter().map(TautClass::degree).collect();
    let against = generators(g, n, top - target_d)?;
    let monomials = generator_monomials(&degrees, target_d);
    let rows: Vec<Vec<Q>> = monomials
        .par_iter()
        .map(|mono| {
            let mut acc = small[mono[0]].clone();
            for &i in &mono[1..] {
                acc = multiply(&acc, &small[i])?;
            }
            pairing_vector_against(&acc, &against)
        })
        .collect::<Result<_>>()?;
    Ok(QMatrix::from_rows(rows, against.len()))
}

/// Whether pairing-vector membership is known to be faithful.
pub fn is_certified(g: u32) -> bool {
    g <= 3
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MembershipReport {
    pub g: u32,
    pub n: u32,
    pub d: u32,
    pub max_gen_degree: u32,
    pub rank: usize,
    pub ambient_rank: usize,
    pub member: bool,
    /// Set when the pairing is not certified perfect: ranks are then only
    /// lower bounds for the true dimensions.
    pub lower_bound: bool,
}

/// Tests whether `class` lies in the subalgebra generated by classes of
/// degree at most `k`.
pub fn div_membership(class: &TautClass, k: u32, unverified_extended: bool) -> Result<MembershipReport> {
    let (g, n, d) = (class.genus(), class.markings(), class.degree());
    if !is_certified(g) && !unverified_extended {
        return Err(Error::NotCertified { g, n, d });
    }
    let span = subalgebra_span(g, n, d, k)?;
    let mut space = RowSpace::new(span.ncols());
    for row in span.rows() {
        space.insert(row)?;
    }
    let v = pairing_vector(class)?;
    Ok(MembershipReport {
        g,
        n,
        d,
        max_gen_degree: k,
        rank: space.rank(),
        ambient_rank: ambient_rank(g, n, d)?,
        member: space.contains(&v)?,
        lower_bound: !is_certified(g),
    })
}

/// Δ₀ = ½ ξ_irr*(1) on M̄₂.
pub fn delta0_genus2() -> Result<TautClass> {
    Ok(TautClass::of_graph(&named::irreducible(2, 0))?.scale(&frac(1, 2)))
}

/// `[B]` = pushforward from the genus-0 vertex with two loops.
pub fn class_b() -> Result<TautClass> {
    TautClass::of_graph(&named::double_loop())
}

/// `[C]` = pushforward from the genus-0 vertex with a loop joined to a genus-1 vertex.
pub fn class_c() -> Result<TautClass> {
    TautClass::of_graph(&named::loop_and_bridge())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThetaReport {
    /// Solutions (x, y, z) of x·Δ₀² + y·[B] + z·[C] = target, or `None`.
    pub solution: Option<AffineSolutionSet>,
    /// Whether some solution satisfies x ≥ 0 and z ≤ 0.
    pub feasible_with_signs: bool,
}

/// Solves x·Δ₀² + y·[B] + z·[C] = target in pairing coordinates against the
/// given degree-1 terms of M̄₂.
pub fn theta_solve_against(target: &TautClass, against: &[Term]) -> Result<ThetaReport> {
    let d0 = delta0_genus2()?;
    let basis = [multiply(&d0, &d0)?, class_b()?, class_c()?];
    let vecs: Vec<Vec<Q>> = basis
        .iter()
        .map(|c| pairing_vector_against(c, against))
        .collect::<Result<_>>()?;
    let rhs = pairing_vector_against(target, against)?;
    let system: Vec<LinearEquation> = (0..against.len())
        .map(|j| LinearEquation {
            coeffs: vecs.iter().map(|v| v[j].clone()).collect(),
            rhs: rhs[j].clone(),
        })
        .collect();
    let solution = solve_affine(&system, &["x", "y", "z"])?;
    let feasible_with_signs = solution
        .as_ref()
        .is_some_and(|s| s.feasible_with(&[Inequality::nonneg(3, 0), Inequality::nonpos(3, 2)]));
    Ok(ThetaReport {
        solution,
        feasible_with_signs,
    })
}

/// The genus-2 system with target 2λ₂.
pub fn theta_solve() -> Result<ThetaReport> {
    let target = lambda_top(2, 0)?.scale(&q(2));
    theta_solve_against(&target, &generators(2, 0, 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomials_of_degree() {
        assert_eq!(generator_monomials(&[1, 1, 1], 2).len(), 6);
        assert_eq!(generator_monomials(&[1, 2], 3).len(), 2);
    }

    #[test]
    fn fundamental_class_vector() {
        let one = TautClass::one(0, 3).unwrap();
        assert_eq!(pairing_vector(&one).unwrap(), vec![q(1)]);
        let zero = TautClass::zero(2, 0, 1).unwrap();
        assert!(pairing_vector(&zero).unwrap().iter().all(Zero::is_zero));
    }

    #[test]
    fn divisors_are_members() {
        for t in generators(2, 0, 1).unwrap() {
            let c = TautClass::from_term(t, Q::one()).unwrap();
            assert!(div_membership(&c, 1, false).unwrap().member);
        }
    }

    #[test]
    fn uncertified_genus_is_refused() {
        let c = TautClass::kappa(4, 0, 1).unwrap();
        assert!(matches!(div_membership(&c, 1, false), Err(Error::NotCertified { .. })));
    }
}
