//! The blow-up of (P¹)³ along two curves: complex, walls and grading.

mod common;

use common::*;
use wallcross::linalg::{dot_i, q, Q};
use wallcross::walls::{assemble_canonical, check_admissible, grading_check, GradingData};

#[test]
fn geometry_validates() {
    let cx = load_complex("example14");
    assert_eq!(cx.dim(), 3);
    assert_eq!(cx.maximal_cones().len(), 10);
    assert_eq!(cx.facets().len(), 15);
    assert!(cx.facets().iter().all(|f| f.is_interior()));
}

#[test]
fn intersection_numbers_match_pairings() {
    let g = load_json("example14/grading.json");
    let grading: GradingData = serde_json::from_value(g).unwrap();
    let cx = load_complex("example14");
    for f in cx.facets() {
        for (k, &r) in f.rays.iter().enumerate() {
            assert_eq!(f.numbers[k], dot_i(&grading.pairings[r], &f.kink), "facet {:?}", f.rays);
        }
    }
}

#[test]
fn five_walls_are_admissible_and_homogeneous() {
    let cx = load_complex("example14");
    let tr = load_truncation("example14");
    let counts = load_counts("example14");
    let s = assemble_canonical(cx.clone(), &counts, &tr).unwrap().consolidate().unwrap();
    assert_eq!(s.walls.len(), 5);
    for w in &s.walls {
        check_admissible(&cx, w).unwrap();
        // Each wall function is 1 + t^A z^{−u} for its primitive entry.
        assert_eq!(w.function.len(), 2);
        assert_eq!(w.function.unit_part(), Q::from_integer(1.into()));
    }
    let grading: GradingData = serde_json::from_value(load_json("example14/grading.json")).unwrap();
    assert!(grading_check(&s, &grading).unwrap().is_empty());
}

#[test]
fn wall_on_first_support_closes_up() {
    let cx = load_complex("example14");
    let tr = load_truncation("example14");
    let counts = load_counts("example14");
    let s = assemble_canonical(cx, &counts, &tr).unwrap().consolidate().unwrap();
    let w = s.walls.iter().find(|w| w.cone == 0).unwrap();
    assert_eq!(w.function.coefficient(&[0, 0, 0, 1, 0], &[0, -1, 0]), q(1));
    assert_eq!(w.function.len(), 2);
}
