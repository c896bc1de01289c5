//! Top-degree integrals: ψ correlators by the DVV recursion, κ-to-ψ
//! conversion, and intersection pairings.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use parking_lot::RwLock;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact_linalg::QMatrix;
use crate::product::term_product_pieces;
use crate::rational::{double_factorial_odd, format_q, frac, parse_q, q, q_big, Q};
use crate::stable_graphs::{check_stable, StableGraph};
use crate::taut_classes::{Decoration, TautClass, Term};

type CorrelatorKey = (u32, Vec<u32>);

fn correlator_memo() -> &'static RwLock<HashMap<CorrelatorKey, Q>> {
    static MEMO: OnceLock<RwLock<HashMap<CorrelatorKey, Q>>> = OnceLock::new();
    MEMO.get_or_init(Default::default)
}

/// `⟨τ_{a_1} ... τ_{a_n}⟩_g`, checked for stability and dimension.
pub fn psi_integral(g: u32, exponents: &[u32]) -> Result<Q> {
    let n = exponents.len() as u32;
    check_stable(g, n)?;
    let sum: u32 = exponents.iter().sum();
    if sum != 3 * g + n - 3 {
        return Err(Error::Dimension(format!(
            "exponents sum to {sum}, but dim M̄_{{{g},{n}}} = {}",
            3 * g + n - 3
        )));
    }
    Ok(correlator(g, exponents))
}

/// Correlator with the convention that unstable or wrong-dimensional
/// brackets vanish.
pub(crate) fn correlator(g: u32, exponents: &[u32]) -> Q {
    let n = exponents.len() as i64;
    if 2 * g as i64 - 2 + n <= 0 {
        return Q::zero();
    }
    let sum: i64 = exponents.iter().map(|&a| a as i64).sum();
    if sum != 3 * g as i64 - 3 + n {
        return Q::zero();
    }
    let mut key = exponents.to_vec();
    key.sort_unstable_by(|a, b| b.cmp(a));
    if let Some(v) = correlator_memo().read().get(&(g, key.clone())) {
        return v.clone();
    }
    let value = dvv(g, &key);
    correlator_memo().write().insert((g, key), value.clone());
    value
}

/// One step of the DVV recursion on the largest exponent (`exps` sorted
/// descending).
fn dvv(g: u32, exps: &[u32]) -> Q {
    if g == 0 && exps == [0, 0, 0] {
        return Q::one();
    }
    if g == 1 && exps == [1] {
        return frac(1, 24);
    }
    let top = exps[0];
    if top == 0 {
        return Q::zero();
    }
    let k = top as i64 - 1;
    let rest = &exps[1..];
    let mut acc = Q::zero();

    for j in 0..rest.len() {
        let dj = rest[j] as i64;
        let coeff = double_factorial_odd(k + dj + 1) / double_factorial_odd(dj);
        let mut next = rest.to_vec();
        next[j] = (dj + k) as u32;
        acc += q_big(coeff) * correlator(g, &next);
    }

    if k >= 1 {
        let mut split = Q::zero();
        for r in 0..k {
            let s = k - 1 - r;
            let c = q_big(double_factorial_odd(r + 1) * double_factorial_odd(s + 1));
            let mut inner = Q::zero();
            if g >= 1 {
                let mut next = vec![r as u32, s as u32];
                next.extend_from_slice(rest);
                inner += correlator(g - 1, &next);
            }
            let m = rest.len();
            for mask in 0u64..(1u64 << m) {
                let mut left = vec![r as u32];
                let mut right = vec![s as u32];
                for (i, &d) in rest.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        left.push(d);
                    } else {
                        right.push(d);
                    }
                }
                for g1 in 0..=g {
                    let a = correlator(g1, &left);
                    if a.is_zero() {
                        continue;
                    }
                    inner += a * correlator(g - g1, &right);
                }
            }
            split += c * inner;
        }
        acc += split / Q::from_integer(BigInt::from(2));
    }
    acc / q_big(double_factorial_odd(k + 2))
}

/// Set partitions of `0..m` as lists of blocks.
fn set_partitions(m: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, m: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == m {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, m, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        rec(i + 1, m, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    rec(0, m, &mut Vec::new(), &mut out);
    out
}

/// Rewrites `∫ ψ^e κ_{b_1} ... κ_{b_m}` on M̄_{g,n} as a combination of ψ
/// integrals on M̄_{g,n+k}; each entry is (extended exponents, coefficient).
///
/// With `κ_a = π_*(ψ_{n+1}^{a+1})`, pushing forward `∏ ψ_{n+i}^{b_i+1}` gives
/// a sum over set partitions weighted by `∏ (|B| - 1)!`. Inverting that sum
/// over the partition lattice gives weight `(-1)^{|B| - 1}` per block.
pub fn kappa_to_psi(psi: &[u32], kappa: &[u32]) -> Vec<(Vec<u32>, Q)> {
    if kappa.is_empty() {
        return vec![(psi.to_vec(), Q::one())];
    }
    let m = kappa.len();
    set_partitions(m)
        .into_iter()
        .map(|blocks| {
            let sign = if (m - blocks.len()).is_multiple_of(2) { 1 } else { -1 };
            let mut exps = psi.to_vec();
            exps.extend(blocks.iter().map(|b| b.iter().map(|&i| kappa[i]).sum::<u32>() + 1));
            (exps, q(sign))
        })
        .collect()
}

type VertexKey = (u32, Vec<u32>, Vec<u32>);

fn vertex_memo() -> &'static RwLock<HashMap<VertexKey, Q>> {
    static MEMO: OnceLock<RwLock<HashMap<VertexKey, Q>>> = OnceLock::new();
    MEMO.get_or_init(Default::default)
}

/// `∫_{M̄_{g,n}} ψ^e κ_b`, zero unless the degree is top.
pub fn vertex_integral(g: u32, psi: &[u32], kappa: &[u32]) -> Q {
    let mut ps = psi.to_vec();
    ps.sort_unstable();
    let mut ks = kappa.to_vec();
    ks.sort_unstable();
    let key = (g, ps, ks);
    if let Some(v) = vertex_memo().read().get(&key) {
        return v.clone();
    }
    let value = kappa_to_psi(&key.1, &key.2)
        .into_iter()
        .fold(Q::zero(), |acc, (e, c)| acc + c * correlator(g, &e));
    vertex_memo().write().insert(key, value.clone());
    value
}

/// Integral of `ξ_Γ*(dec)`: the product of the vertex integrals.
pub fn integrate_monomial(graph: &StableGraph, dec: &Decoration) -> Q {
    let mut acc = Q::one();
    for v in 0..graph.num_vertices() {
        let mut psi: Vec<u32> = graph
            .vertex_legs(v)
            .iter()
            .map(|&i| dec.leg_psi[i as usize - 1])
            .collect();
        psi.extend(graph.half_edges_at(v).iter().map(|&h| dec.half_edge_psi[h]));
        let x = vertex_integral(graph.vertex_genus(v), &psi, &dec.kappa[v]);
        if x.is_zero() {
            return x;
        }
        acc *= x;
    }
    acc
}

pub fn integrate_term(term: &Term) -> Q {
    integrate_monomial(term.graph(), term.decoration())
}

/// Integral of a top-degree class.
pub fn integrate(class: &TautClass) -> Result<Q> {
    let top = 3 * class.genus() + class.markings() - 3;
    if class.degree() != top {
        return Err(Error::DegreeMismatch(class.degree(), top));
    }
    Ok(class
        .terms()
        .iter()
        .fold(Q::zero(), |acc, (t, c)| acc + c * integrate_term(t)))
}

fn pairing_memo() -> &'static RwLock<HashMap<(Term, Term), Q>> {
    static MEMO: OnceLock<RwLock<HashMap<(Term, Term), Q>>> = OnceLock::new();
    MEMO.get_or_init(Default::default)
}

/// `∫ ξ_A*(α) · ξ_B*(β)` for complementary-degree terms.
pub fn pair_terms(a: &Term, b: &Term) -> Result<Q> {
    let (ga, na) = (a.graph().genus(), a.graph().num_markings());
    let (gb, nb) = (b.graph().genus(), b.graph().num_markings());
    if (ga, na) != (gb, nb) {
        return Err(Error::AmbientMismatch(ga, na, gb, nb));
    }
    let top = 3 * ga + na - 3;
    if a.degree() + b.degree() != top {
        return Err(Error::DegreeMismatch(a.degree() + b.degree(), top));
    }
    let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
    if let Some(v) = pairing_memo().read().get(&key) {
        return Ok(v.clone());
    }
    let mut acc = Q::zero();
    for (deg, poly) in term_product_pieces(&key.0, &key.1)? {
        for (mono, c) in poly {
            let x = integrate_monomial(&deg.graph, &mono);
            if !x.is_zero() {
                acc += Q::from_integer(c.into()) * x;
            }
        }
    }
    pairing_memo().write().insert(key, acc.clone());
    Ok(acc)
}

/// `∫ a · b` for complementary-degree classes.
pub fn pair_classes(a: &TautClass, b: &TautClass) -> Result<Q> {
    let mut acc = Q::zero();
    for (ta, ca) in a.terms() {
        for (tb, cb) in b.terms() {
            acc += ca * cb * pair_terms(ta, tb)?;
        }
    }
    if a.is_empty() || b.is_empty() {
        let top = 3 * a.genus() + a.markings() - 3;
        if a.degree() + b.degree() != top {
            return Err(Error::DegreeMismatch(a.degree() + b.degree(), top));
        }
    }
    Ok(acc)
}

/// Pairing matrix between two lists of terms, filled in parallel.
pub fn pairing_matrix_terms(rows: &[Term], cols: &[Term]) -> Result<QMatrix> {
    let data: Vec<Vec<Q>> = rows
        .par_iter()
        .map(|a| cols.iter().map(|b| pair_terms(a, b)).collect::<Result<Vec<Q>>>())
        .collect::<Result<_>>()?;
    Ok(QMatrix::from_rows(data, cols.len()))
}

/// `M[i][j] = ∫ A_i · B_j`.
pub fn pairing_matrix(rows: &[TautClass], cols: &[TautClass]) -> Result<QMatrix> {
    let data: Vec<Vec<Q>> = rows
        .par_iter()
        .map(|a| cols.iter().map(|b| pair_classes(a, b)).collect::<Result<Vec<Q>>>())
        .collect::<Result<_>>()?;
    Ok(QMatrix::from_rows(data, cols.len()))
}

/// Loads correlator records written by [`save_correlator_cache`]. Returns the
/// number of records read.
pub fn load_correlator_cache(path: &Path) -> Result<usize> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
        Err(e) => return Err(Error::Parse(format!("{}: {e}", path.display()))),
    };
    let mut memo = correlator_memo().write();
    let mut count = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let bad = || Error::Parse(format!("bad cache record {line:?}"));
        let mut parts = line.split('\t');
        let g: u32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let exps_text = parts.next().ok_or_else(bad)?;
        let mut exps: Vec<u32> = if exps_text.is_empty() {
            Vec::new()
        } else {
            exps_text
                .split(',')
                .map(|x| x.parse().map_err(|_| bad()))
                .collect::<Result<_>>()?
        };
        let value = parse_q(parts.next().ok_or_else(bad)?)?;
        exps.sort_unstable_by(|a, b| b.cmp(a));
        memo.insert((g, exps), value);
        count += 1;
    }
    Ok(count)
}

/// Writes every memoized correlator as `g<TAB>a1,a2,...<TAB>p/q`, sorted.
pub fn save_correlator_cache(path: &Path) -> Result<usize> {
    let memo = correlator_memo().read();
    let mut records: Vec<(&CorrelatorKey, &Q)> = memo.iter().collect();
    records.sort_by(|a, b| a.0.cmp(b.0));
    let io = |e: std::io::Error| Error::Parse(format!("{}: {e}", path.display()));
    let mut file = fs::File::create(path).map_err(io)?;
    for ((g, exps), v) in &records {
        let exps: Vec<String> = exps.iter().map(u32::to_string).collect();
        writeln!(file, "{g}\t{}\t{}", exps.join(","), format_q(v)).map_err(io)?;
    }
    Ok(records.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::factorial;

    #[test]
    fn known_correlators() {
        assert_eq!(psi_integral(0, &[0, 0, 0]).unwrap(), q(1));
        assert_eq!(psi_integral(1, &[1]).unwrap(), frac(1, 24));
        assert_eq!(psi_integral(2, &[4]).unwrap(), frac(1, 1152));
        assert_eq!(psi_integral(3, &[7]).unwrap(), frac(1, 82944));
        assert_eq!(psi_integral(2, &[2, 2, 2]).unwrap(), frac(7, 240));
        assert_eq!(psi_integral(0, &[1, 0, 0, 0]).unwrap(), q(1));
        assert_eq!(psi_integral(0, &[2, 0, 0, 0, 0]).unwrap(), q(1));
        assert_eq!(psi_integral(1, &[1, 1]).unwrap(), frac(1, 24));
        assert!(matches!(psi_integral(1, &[2]), Err(Error::Dimension(_))));
        assert!(matches!(psi_integral(0, &[0, 0]), Err(Error::Unstable { .. })));
    }

    /// Genus-0 closed form ⟨∏τ_{a_i}⟩_0 = (n-3)! / ∏ a_i!.
    #[test]
    fn genus_zero_multinomial() {
        for n in 3..8u32 {
            for exps in crate::taut_classes::compositions(n - 3, n as usize) {
                let expected = q_big(factorial(n - 3))
                    / q_big(exps.iter().fold(BigInt::one(), |acc, &a| acc * factorial(a)));
                assert_eq!(psi_integral(0, &exps).unwrap(), expected);
            }
        }
    }

    #[test]
    fn string_and_dilaton() {
        for g in 0..4u32 {
            for n in 1..5u32 {
                if 2 * g + n < 3 {
                    continue;
                }
                let dim = 3 * g + n - 3;
                for exps in crate::taut_classes::compositions(dim, n as usize) {
                    // Dilaton: add τ_1.
                    let mut with1 = exps.clone();
                    with1.push(1);
                    assert_eq!(
                        correlator(g, &with1),
                        q(2 * g as i64 - 2 + n as i64) * correlator(g, &exps)
                    );
                }
                // String equation, in the form ⟨τ_0 ∏τ_{a_i}⟩ with Σa_i = dim + 1.
                for exps in crate::taut_classes::compositions(dim + 1, n as usize) {
                    let mut with0 = exps.clone();
                    with0.push(0);
                    let mut rhs = Q::zero();
                    for j in 0..exps.len() {
                        if exps[j] > 0 {
                            let mut e = exps.clone();
                            e[j] -= 1;
                            rhs += correlator(g, &e);
                        }
                    }
                    assert_eq!(correlator(g, &with0), rhs, "g={g} {exps:?}");
                }
            }
        }
    }

    #[test]
    fn kappa_conversion() {
        // ∫_{M̄_{1,1}} κ_1 = ⟨τ_0 τ_2⟩_1 = 1/24.
        assert_eq!(vertex_integral(1, &[0], &[1]), frac(1, 24));
        assert_eq!(correlator(1, &[0, 2]), frac(1, 24));
        // κ_1 on M̄_{0,4} is a point class: ∫ = 1.
        assert_eq!(vertex_integral(0, &[0, 0, 0, 0], &[1]), q(1));
        // ∫_{M̄_{0,5}} κ_1^2 = 5 and ∫ κ_2 = 1.
        assert_eq!(vertex_integral(0, &[0; 5], &[1, 1]), q(5));
        assert_eq!(vertex_integral(0, &[0; 5], &[2]), q(1));
        // ∫_{M̄_2} κ_3 = 1/1152 ... via ⟨τ_4⟩_2 on one extra point.
        assert_eq!(vertex_integral(2, &[], &[3]), frac(1, 1152));
    }

    #[test]
    fn integrate_checks_degree() {
        let psi = TautClass::psi(2, 1, 1, 4).unwrap();
        assert_eq!(integrate(&psi).unwrap(), frac(1, 1152));
        let one = TautClass::one(0, 3).unwrap();
        assert_eq!(integrate(&one).unwrap(), q(1));
        let k = TautClass::kappa(2, 0, 1).unwrap();
        assert!(matches!(integrate(&k), Err(Error::DegreeMismatch(..))));
    }

    #[test]
    fn cache_round_trip() {
        let _ = psi_integral(2, &[3, 2]);
        let dir = std::env::temp_dir().join(format!("tautring-cache-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("correlators.tsv");
        let written = save_correlator_cache(&path).unwrap();
        assert!(written > 0);
        assert_eq!(load_correlator_cache(&path).unwrap(), written);
        assert_eq!(psi_integral(2, &[3, 2]).unwrap(), psi_integral(2, &[2, 3]).unwrap());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
