mod common;

use num_traits::Zero;
use tautring::integration::{integrate, pair_classes};
use tautring::membership::pairing_vector;
use tautring::pixton::{dr_cycle, dr_degree, lambda_top};
use tautring::product::{multiply, power};
use tautring::rational::{frac, q};
use tautring::stable_graphs::named;
use tautring::TautClass;

use common::Factor;

#[test]
fn kappa_cubed_on_genus_two() {
    let k = TautClass::kappa(2, 0, 1).unwrap();
    assert_eq!(integrate(&power(&k, 3).unwrap()).unwrap(), frac(43, 2880));
    // Same number with every κ traded for a forgotten point first.
    assert_eq!(common::integral(2, 0, &[Factor::Kappa, Factor::Kappa, Factor::Kappa]), frac(43, 2880));
}

#[test]
fn mumford_relation_on_genus_two() {
    // κ₁ = δ₀/5 + 7δ₁/5 with δ₀ = ½[irr], δ₁ = ½[sep].
    let k = TautClass::kappa(2, 0, 1).unwrap();
    let d0 = TautClass::of_graph(&named::irreducible(2, 0)).unwrap().scale(&frac(1, 2));
    let d1 = TautClass::of_graph(&named::separating(2, 0, 1, &[])).unwrap().scale(&frac(1, 2));
    let rhs = d0.scale(&frac(1, 5)).add(&d1.scale(&frac(7, 5))).unwrap();
    let diff = k.sub(&rhs).unwrap();
    assert!(pairing_vector(&diff).unwrap().iter().all(Zero::is_zero));
}

#[test]
fn lambda_one_on_genus_one() {
    let l = lambda_top(1, 1).unwrap();
    assert_eq!(integrate(&l).unwrap(), frac(1, 24));
    let dr = dr_cycle(1, &[0]).unwrap();
    let loop_graph = TautClass::of_graph(&named::irreducible(1, 1)).unwrap();
    assert_eq!(dr, loop_graph.scale(&frac(-1, 24)));
}

#[test]
fn dr_in_genus_zero_and_degree_zero() {
    let one = TautClass::one(0, 3).unwrap();
    assert_eq!(dr_cycle(0, &[2, -1, -1]).unwrap(), one);
    assert_eq!(dr_degree(2, &[3, -3], 0).unwrap(), TautClass::one(2, 2).unwrap());
}

#[test]
fn genus_one_dr_is_quadratic_in_the_weights() {
    let f = |a: i64| dr_cycle(1, &[a, -a]).unwrap();
    let (f0, f1, f3) = (f(0), f(1), f(3));
    let predicted = f0.add(&f1.sub(&f0).unwrap().scale(&q(9))).unwrap();
    let diff = f3.sub(&predicted).unwrap();
    assert!(pairing_vector(&diff).unwrap().iter().all(Zero::is_zero));
}

#[test]
fn lambda_top_squares_to_zero_in_genus_two() {
    let l = lambda_top(2, 1).unwrap();
    // Degree 4 on a 4-dimensional space.
    assert!(integrate(&multiply(&l, &l).unwrap()).unwrap().is_zero());
}

#[test]
fn pairing_of_products_matches_the_triple_product() {
    let gens: Vec<TautClass> = common::degree_one_factors(2, 1)
        .iter()
        .map(|f| common::class_of(2, 1, f))
        .collect();
    for a in &gens {
        for b in &gens {
            let ab = multiply(a, b).unwrap();
            for c in &gens {
                let cc = multiply(c, c).unwrap();
                let nested = multiply(a, &multiply(b, &cc).unwrap()).unwrap();
                assert_eq!(pair_classes(&ab, &cc).unwrap(), integrate(&nested).unwrap());
            }
        }
    }
}
