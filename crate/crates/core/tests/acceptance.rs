//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the verdicts are always printed.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::{degree_one_factors, hodge_series, Factor};
use tautring::cone_complex::{explosion_chern_identity, ConeComplex};
use tautring::integration::integrate;
use tautring::membership::{div_membership, pairing_vector, theta_solve, MembershipReport};
use tautring::pixton::{
    default_samples, is_weighting, lambda_top, pixton_class_at_r, pixton_polynomial, weightings_mod_r,
};
use tautring::product::{multiply, multiply_all};
use tautring::rational::{format_q, frac, multinomial, q};
use tautring::stable_graphs::{named, stable_graphs_by_edges, StableGraph};
use tautring::taut_classes::generators;
use tautring::{Decoration, Error, TautClass, Q};

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|x| x.to_string())
}

fn graph(genera: &[u32], legs: Vec<Vec<u32>>, edges: &[(usize, usize)]) -> StableGraph {
    StableGraph::new(genera.to_vec(), legs, edges.to_vec()).unwrap()
}

/// `coeff · ξ_*(∏ ψ_h^k)` for the listed (half-edge, exponent) pairs.
fn decorated(gr: &StableGraph, psi: &[(usize, u32)], coeff: Q) -> TautClass {
    let mut d = Decoration::trivial(gr);
    for &(h, k) in psi {
        d.half_edge_psi[h] += k;
    }
    TautClass::from_graph(gr, &d, coeff).unwrap()
}

fn sum(classes: Vec<TautClass>) -> TautClass {
    classes.into_iter().reduce(|a, b| a.add(&b).unwrap()).unwrap()
}

fn same_pairing(a: &TautClass, b: &TautClass) -> Result<bool, String> {
    let diff = e(a.sub(b))?;
    Ok(e(pairing_vector(&diff))?.iter().all(Zero::is_zero))
}

fn expected_lambda(g: u32) -> TautClass {
    let none = || vec![vec![]];
    match g {
        1 => decorated(&graph(&[0], vec![vec![1]], &[(0, 0)]), &[], frac(1, 24)),
        2 => sum(vec![
            decorated(&graph(&[1], none(), &[(0, 0)]), &[(0, 1)], frac(1, 240)),
            decorated(&named::double_loop(), &[], frac(1, 1152)),
        ]),
        3 => {
            let two = || vec![vec![], vec![]];
            sum(vec![
                decorated(&graph(&[2], none(), &[(0, 0)]), &[(0, 2)], frac(1, 2016)),
                decorated(&graph(&[2], none(), &[(0, 0)]), &[(0, 1), (1, 1)], frac(1, 2016)),
                decorated(&graph(&[1, 1], two(), &[(0, 1), (0, 1)]), &[(0, 1)], frac(-1, 672)),
                decorated(&graph(&[1], none(), &[(0, 0), (0, 0)]), &[(0, 1)], frac(1, 5760)),
                decorated(&graph(&[0, 1], two(), &[(0, 1), (0, 1), (0, 1)]), &[], frac(-13, 30240)),
                decorated(&graph(&[0, 1], two(), &[(0, 0), (0, 1), (0, 1)]), &[], frac(-1, 5760)),
                decorated(&graph(&[0], none(), &[(0, 0), (0, 0), (0, 0)]), &[], frac(1, 82944)),
            ])
        }
        _ => unreachable!(),
    }
}

fn c1_lambda_expansions() -> Verdict {
    let mut detail = Vec::new();
    for (g, n) in [(1, 1), (2, 0), (3, 0)] {
        let start = Instant::now();
        let computed = e(lambda_top(g, n))?;
        let ok = same_pairing(&computed, &expected_lambda(g))?;
        ensure(ok, format!("λ_{g} differs from the displayed expansion"))?;
        detail.push(format!("λ{g} ok ({} terms, {:.1}s)", computed.len(), start.elapsed().as_secs_f64()));
    }
    Ok(detail.join(", "))
}

fn report_line(r: &MembershipReport) -> String {
    format!("(g,n,d)=({},{},{}) rank {} of {}, member {}", r.g, r.n, r.d, r.rank, r.ambient_rank, r.member)
}

fn c2_divisor_span_ranks() -> Verdict {
    let r30 = e(div_membership(&e(lambda_top(3, 0))?, 1, false))?;
    ensure((r30.rank, r30.ambient_rank, r30.member) == (9, 10, false), report_line(&r30))?;
    let r31 = e(div_membership(&e(lambda_top(3, 1))?, 1, false))?;
    ensure((r31.rank, r31.ambient_rank, r31.member) == (28, 29, true), report_line(&r31))?;
    Ok(format!("{}; {}", report_line(&r30), report_line(&r31)))
}

fn c3_theta() -> Verdict {
    let rep = e(theta_solve())?;
    let sol = rep.solution.ok_or("system inconsistent")?;
    ensure(sol.dimension() == 1, format!("solution set has dimension {}", sol.dimension()))?;
    // Oracle: the line x = z - 1/120, y = -5/24 z + 11/2880.
    for z in [q(0), q(1), frac(-7, 3)] {
        let x = &z - frac(1, 120);
        let y = -frac(5, 24) * &z + frac(11, 2880);
        ensure(sol.contains(&[x, y, z.clone()]), format!("point z={} missing", format_q(&z)))?;
    }
    let off = [q(0), frac(11, 2880), q(0)];
    ensure(!sol.contains(&off), "solution set too large")?;
    ensure(!rep.feasible_with_signs, "x ≥ 0 and z ≤ 0 reported feasible")?;
    Ok("x = z - 1/120, y = -5/24 z + 11/2880; x ≥ 0 ∧ z ≤ 0 infeasible".into())
}

fn c4_vanishing() -> Verdict {
    let l3 = e(lambda_top(3, 0))?;
    let sq = e(integrate(&e(multiply(&l3, &l3))?))?;
    ensure(sq.is_zero(), format!("∫λ₃² = {}", format_q(&sq)))?;
    let delta0 = e(TautClass::of_graph(&named::irreducible(3, 0)))?.scale(&frac(1, 2));
    let l3d0 = e(multiply(&l3, &delta0))?;
    let gens = e(generators(3, 0, 2))?;
    for t in &gens {
        let d = e(TautClass::from_term(t.clone(), Q::one()))?;
        let v = e(integrate(&e(multiply(&l3d0, &d))?))?;
        ensure(v.is_zero(), format!("∫λ₃·Δ₀·({t}) = {}", format_q(&v)))?;
    }
    Ok(format!("∫λ₃² = 0 and ∫λ₃·Δ₀·D = 0 for {} generators D", gens.len()))
}

fn c5_lambda_g_formula() -> Verdict {
    let b2 = hodge_series(2)[2].clone();
    ensure(b2 == frac(7, 5760), format!("series gives {}", format_q(&b2)))?;
    let l21 = e(lambda_top(2, 1))?;
    let base = e(integrate(&e(multiply(&e(TautClass::psi(2, 1, 1, 2))?, &l21))?))?;
    ensure(base == b2, format!("∫_{{2,1}} ψ²λ₂ = {}", format_q(&base)))?;
    let l22 = e(lambda_top(2, 2))?;
    for k1 in 0..=3u32 {
        let k2 = 3 - k1;
        let mut factors = vec![l22.clone()];
        if k1 > 0 {
            factors.push(e(TautClass::psi(2, 2, 1, k1))?);
        }
        if k2 > 0 {
            factors.push(e(TautClass::psi(2, 2, 2, k2))?);
        }
        let v = e(integrate(&e(multiply_all(&factors))?))?;
        let expected = Q::from_integer(multinomial(&[k1, k2])) * &b2;
        ensure(v == expected, format!("k=({k1},{k2}): {} vs {}", format_q(&v), format_q(&expected)))?;
    }
    Ok("∫_{2,2} ψ₁^k₁ψ₂^k₂λ₂ = C(3,k₁)·7/5760 for k₁+k₂=3".into())
}

fn c6_polynomiality() -> Verdict {
    let mut detail = Vec::new();
    for (g, d) in [(2u32, 2u32), (3, 3)] {
        let first = default_samples(&[], d);
        let width = first.len() as u32;
        let second: Vec<u32> = (0..width).map(|i| first[first.len() - 1] + 3 + 2 * i).collect();
        let p1 = e(pixton_polynomial(g, &[], d, &first))?;
        let p2 = e(pixton_polynomial(g, &[], d, &second))?;
        ensure(p1 == p2, format!("(g,d)=({g},{d}): interpolants from {first:?} and {second:?} differ"))?;
        let fresh = second[second.len() - 1] + 5;
        let direct = e(pixton_class_at_r(g, &[], d, fresh))?;
        ensure(
            e(p1.evaluate(&q(fresh as i64)))? == direct,
            format!("(g,d)=({g},{d}): interpolant misses r={fresh}"),
        )?;
        let deg = p1.terms.values().map(Vec::len).max().unwrap_or(1) - 1;
        detail.push(format!("(g,d)=({g},{d}) degree {deg} in r, fresh r={fresh} ok"));
    }
    Ok(detail.join("; "))
}

fn c7_no_separating_edges() -> Verdict {
    let mut count = 0;
    for (g, n) in [(1, 1), (2, 0), (3, 0)] {
        let l = e(lambda_top(g, n))?;
        for t in l.terms().keys() {
            ensure(!t.graph().has_separating_edge(), format!("λ_{g} term {t} has a separating edge"))?;
            let d = t.decoration();
            ensure(d.kappa.iter().all(Vec::is_empty), format!("λ_{g} term {t} carries κ"))?;
            count += 1;
        }
    }
    Ok(format!("{count} terms across λ₁, λ₂, λ₃, none with a separating edge"))
}

/// Brute-force count: free value on the first half of each edge, the second
/// half determined, legs fixed by A, vertex sums checked.
fn brute_weighting_count(gr: &StableGraph, a: &[i64], r: u32) -> u64 {
    let ne = gr.num_edges();
    let mut count = 0;
    let mut w = vec![0i64; 2 * ne];
    let total = (r as u64).pow(ne as u32);
    for code in 0..total {
        let mut c = code;
        for e in 0..ne {
            w[2 * e] = (c % r as u64) as i64;
            w[2 * e + 1] = (r as i64 - w[2 * e]) % r as i64;
            c /= r as u64;
        }
        let ok = (0..gr.num_vertices()).all(|v| {
            let legs: i64 = gr.vertex_legs(v).iter().map(|&i| a[i as usize - 1]).sum();
            let halves: i64 = gr.half_edges_at(v).iter().map(|&h| w[h]).sum();
            (legs + halves).rem_euclid(r as i64) == 0
        });
        if ok {
            count += 1;
        }
    }
    count
}

fn c8_weighting_counts() -> Verdict {
    let cases: &[(u32, &[i64])] = &[
        (0, &[1, -1, 2, -2]),
        (0, &[1, 1, 1, -1, -2]),
        (0, &[0, 1, 2, -1, -1, -1]),
        (1, &[0]),
        (1, &[3, -3]),
        (1, &[1, 1, -2]),
        (2, &[]),
        (2, &[0]),
        (2, &[2, -2]),
        (3, &[]),
    ];
    let mut graphs = 0;
    for &(g, a) in cases {
        let levels = e(stable_graphs_by_edges(g, a.len() as u32, 5))?;
        for gr in levels.iter().take(6).flatten() {
            graphs += 1;
            for r in 1..=7u32 {
                let expected = (r as u64).pow(gr.h1());
                let iter: Vec<Vec<u32>> = e(weightings_mod_r(gr, a, r))?.collect();
                ensure(iter.len() as u64 == expected, format!("{gr:?} r={r}: {} weightings", iter.len()))?;
                ensure(iter.iter().all(|w| is_weighting(gr, a, r, w)), format!("{gr:?} r={r}: invalid weighting"))?;
                let brute = brute_weighting_count(gr, a, r);
                ensure(brute == expected, format!("{gr:?} r={r}: brute force {brute}"))?;
            }
        }
    }
    Ok(format!("|W| = r^h1 for {graphs} graphs and r = 1..7"))
}

fn c9_cone_suite() -> Verdict {
    let fact = |n: usize| (1..=n).product::<usize>();
    for n in 1..=5 {
        let (b, _) = e(e(ConeComplex::simplex(n))?.barycentric())?;
        ensure(b.num_maximal_cones() == fact(n), format!("barycentric(R^{n}) has {} cones", b.num_maximal_cones()))?;
    }
    for s in 1..=4 {
        for k in 1..=s {
            let rep = e(explosion_chern_identity(s, k))?;
            ensure(rep.holds(), format!("explosion identity fails at s={s}, k={k}: {rep:?}"))?;
        }
    }
    let t = e(ConeComplex::fixture("triangle-z3"))?;
    let (b1, _) = e(t.barycentric())?;
    let (b2, _) = e(b1.barycentric())?;
    for d in 2..=3 {
        ensure(b2.generated_by_degree_one(d), format!("double barycentric not generated in degree {d}"))?;
    }
    Ok(format!(
        "n! cones for n ≤ 5; explosion identity for k ≤ s ≤ 4; triangle-Z/3: generated in degree 2 before subdivision {}, after one {}, after two true",
        t.generated_by_degree_one(2),
        b1.generated_by_degree_one(2)
    ))
}

fn c10_declared() -> Verdict {
    // Certified mode refuses genus 4; the extended mode only reports lower bounds.
    let k = e(TautClass::kappa(4, 1, 1))?;
    match div_membership(&k, 1, false) {
        Err(Error::NotCertified { .. }) => {}
        other => return Err(format!("genus 4 not refused: {other:?}")),
    }
    Ok("DECLARED: the M̄_{4,1} and M̄_{5,1} rank computations are beyond desk scale; genus ≥ 4 requires the unverified-extended mode, whose ranks are flagged as lower bounds".into())
}

fn c11_oracle_equivalence() -> Verdict {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut checked = 0;
    for (g, n) in [(2u32, 0u32), (1, 2)] {
        let factors = degree_one_factors(g, n);
        let k = factors.len();
        let top = 3 * g + n - 3;
        // Oracle values on generator monomials, κ eliminated before multiplying.
        let mut memo = std::collections::HashMap::new();
        let mut oracle = |idx: &[usize]| -> Q {
            let mut key = idx.to_vec();
            key.sort_unstable();
            memo.entry(key.clone())
                .or_insert_with(|| {
                    let fs: Vec<Factor> = key.iter().map(|&i| factors[i].clone()).collect();
                    common::integral(g, n, &fs)
                })
                .clone()
        };
        let classes: Vec<TautClass> = factors.iter().map(|f| common::class_of(g, n, f)).collect();
        for _ in 0..20 {
            let ca: Vec<i64> = (0..k).map(|_| rng.gen_range(-3..=3)).collect();
            let cb: Vec<i64> = (0..k).map(|_| rng.gen_range(-3..=3)).collect();
            let combo = |c: &[i64]| {
                let mut acc = TautClass::zero(g, n, 1).unwrap();
                for (x, cls) in c.iter().zip(&classes) {
                    acc = acc.add(&cls.scale(&q(*x))).unwrap();
                }
                acc
            };
            let ab = e(multiply(&combo(&ca), &combo(&cb)))?;
            let thirds: Vec<Option<usize>> = if top == 3 { (0..k).map(Some).collect() } else { vec![None] };
            for third in thirds {
                let lib = match third {
                    Some(c) => e(integrate(&e(multiply(&ab, &classes[c]))?))?,
                    None => e(integrate(&ab))?,
                };
                let mut expected = Q::zero();
                for i in 0..k {
                    for j in 0..k {
                        let coeff = Q::from_integer(BigInt::from(ca[i] * cb[j]));
                        if coeff.is_zero() {
                            continue;
                        }
                        let idx: Vec<usize> = [i, j].into_iter().chain(third).collect();
                        expected += coeff * oracle(&idx);
                    }
                }
                ensure(
                    lib == expected,
                    format!("(g,n)=({g},{n}) a={ca:?} b={cb:?} third={third:?}: {} vs {}", format_q(&lib), format_q(&expected)),
                )?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} triple integrals agree with the κ-eliminating oracle"))
}

fn main() {
    let criteria: Vec<(u32, &str, fn() -> Verdict)> = vec![
        (1, "λ expansions", c1_lambda_expansions),
        (2, "divisor-subalgebra ranks", c2_divisor_span_ranks),
        (3, "genus-2 Θ system", c3_theta),
        (4, "vanishing properties", c4_vanishing),
        (5, "λ_g formula at genus 2", c5_lambda_g_formula),
        (6, "polynomiality in r", c6_polynomiality),
        (7, "no separating edges", c7_no_separating_edges),
        (8, "weighting counts", c8_weighting_counts),
        (9, "cone-complex suite", c9_cone_suite),
        (10, "desk-scale declaration", c10_declared),
        (11, "oracle equivalence", c11_oracle_equivalence),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, name, f) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(msg) => println!("PASS criterion {id:>2} ({name}, {secs:.1}s): {msg}"),
            Err(msg) => {
                failures += 1;
                println!("FAIL criterion {id:>2} ({name}, {secs:.1}s): {msg}");
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
