mod common;

use proptest::prelude::*;
use wallcross::linalg::Q;
use wallcross::ring::{Monomial, RingElement};
use wallcross::walls::{assemble_canonical, check_admissible, cross_wall, equivalent, refine, Wall, WallStructure};

fn q(x: i64) -> Q {
    Q::from_integer(x.into())
}

fn cross(a: &[i64], b: &[i64]) -> Vec<i64> {
    vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn gen3() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(0i64..=4, 3).prop_filter("nonzero", |g| g.iter().any(|&x| x != 0))
}

fn scattering_wall(g1: &[i64], g2: &[i64], c: i64) -> Option<(WallStructure, Wall)> {
    if cross(g1, g2).iter().all(|&x| x == 0) {
        return None;
    }
    let s = common::load_walls("scattering");
    let cx = s.complex.clone();
    let m: Vec<i64> = g1.iter().zip(g2).map(|(a, b)| -(a + b)).collect();
    let f = RingElement::from_terms(
        0,
        [(Monomial::new(vec![0, 0], vec![0, 0, 0]), q(1)), (Monomial::new(vec![1, 0], m.clone()), q(c)), (Monomial::new(vec![1, 1], m), q(1))],
        &s.trunc,
    );
    let w = Wall::new(&cx, 0, vec![g1.to_vec(), g2.to_vec()], f, &s.trunc).ok()?;
    Some((s, w))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn crossing_there_and_back(g1 in gen3(), g2 in gen3(), c in 1i64..=3, terms in prop::collection::vec(((0i64..=1, 0i64..=1), [-2i64..=2, -2i64..=2, -2i64..=2], -3i64..=3), 1..4)) {
        let Some((s, w)) = scattering_wall(&g1, &g2, c) else { return Ok(()) };
        let f = RingElement::from_terms(0, terms.iter().map(|&((a, b), e, k)| (Monomial::new(vec![a, b], e.to_vec()), q(k))), &s.trunc);
        let n = w.normal();
        let side: Vec<Q> = n.iter().map(|&x| q(x)).collect();
        let other: Vec<Q> = n.iter().map(|&x| q(-x)).collect();
        let there = cross_wall(&f, &w, &side, &s.trunc).unwrap();
        prop_assert_eq!(cross_wall(&there, &w, &other, &s.trunc).unwrap(), f);
    }

    #[test]
    fn splitting_a_wall_is_equivalent(g1 in gen3(), g2 in gen3(), c in 1i64..=3) {
        let Some((s, w)) = scattering_wall(&g1, &g2, c) else { return Ok(()) };
        let cx = s.complex.clone();
        let mid: Vec<i64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
        let mut one = WallStructure::new(cx.clone(), s.trunc.clone());
        one.walls.push(w.clone());
        let mut two = WallStructure::new(cx.clone(), s.trunc.clone());
        two.walls.push(Wall::new(&cx, 0, vec![g1.clone(), mid.clone()], w.function.clone(), &s.trunc).unwrap());
        two.walls.push(Wall::new(&cx, 0, vec![mid, g2.clone()], w.function.clone(), &s.trunc).unwrap());
        prop_assert!(equivalent(&one, &two).unwrap().0);
        let r = refine(&one).unwrap();
        prop_assert!(equivalent(&one, &r.structure).unwrap().0);
    }
}

#[test]
fn refinement_preserves_example_structure() {
    let cx = common::load_complex("example14");
    let tr = common::load_truncation("example14");
    let s = assemble_canonical(cx, &common::load_counts("example14"), &tr).unwrap();
    let c = s.consolidate().unwrap();
    assert!(equivalent(&s, &c).unwrap().0);
    let r = refine(&c).unwrap();
    assert!(equivalent(&c, &r.structure).unwrap().0);
    for w in &r.structure.walls {
        check_admissible(&r.structure.complex, w).unwrap();
    }
}

#[test]
fn dropping_a_wall_is_detected() {
    let s = common::load_walls("scattering");
    let mut fewer = s.clone();
    fewer.walls.pop();
    let (same, witness) = equivalent(&s, &fewer).unwrap();
    assert!(!same);
    assert!(witness.is_some());
}

#[test]
fn quadrant_wall_serializes_round_trip() {
    let s = common::load_walls("quadrant");
    let back = WallStructure::from_json(s.complex.clone(), &s.to_json(), &s.trunc).unwrap();
    assert_eq!(back.walls, s.walls);
}
