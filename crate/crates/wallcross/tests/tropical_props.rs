mod common;

use num_bigint::BigInt;
use proptest::prelude::*;
use rand::SeedableRng;
use wallcross::broken::{enumerate, EnumOptions};
use wallcross::geometry::PointInChart;
use wallcross::linalg::Q;
use wallcross::tropical::{
    classify, decorated_to_type, random_bend_config, spine, split_type, splitting_multiplicity, type_to_line, universal_cone,
    Gluing, Kind, Leg, Role, TropicalType, Vertex,
};

fn rat(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

fn gluing() -> impl Strategy<Value = Gluing> {
    (1usize..=3, 1usize..=3, 1usize..=2).prop_flat_map(|(a, b, e)| {
        let cols = a + b;
        let rows = 2 * e;
        prop::collection::vec(prop::collection::vec(-3i64..=3, cols), rows)
            .prop_map(move |eps| Gluing { pieces: vec![a, b], cones: vec![], edges: vec![2; e], eps })
    })
}

fn shear(g: &Gluing, i: usize, j: usize, c: i64) -> Gluing {
    let mut h = g.clone();
    for row in &mut h.eps {
        row[i] += c * row[j];
    }
    h
}

proptest! {
    #[test]
    fn multiplicity_ignores_edge_order(g in gluing(), rot in 0usize..4) {
        let Ok(m) = splitting_multiplicity(&g) else { return Ok(()) };
        let mut h = g.clone();
        let blocks: Vec<Vec<Vec<i64>>> = h.eps.chunks(2).map(|c| c.to_vec()).collect();
        let k = rot % blocks.len();
        h.eps = blocks[k..].iter().chain(&blocks[..k]).flatten().cloned().collect();
        prop_assert_eq!(splitting_multiplicity(&h).unwrap().index, m.index);
    }

    #[test]
    fn multiplicity_ignores_unimodular_change(g in gluing(), c in -3i64..=3, r in -3i64..=3) {
        let Ok(m) = splitting_multiplicity(&g) else { return Ok(()) };
        let cols = g.pieces.iter().sum::<usize>();
        let mut h = if cols > 1 { shear(&g, 0, 1, c) } else { g.clone() };
        let a = h.eps[0].clone();
        for (x, y) in h.eps[1].iter_mut().zip(&a) {
            *x += r * y;
        }
        prop_assert_eq!(splitting_multiplicity(&h).unwrap().index, m.index);
    }

    #[test]
    fn wall_types_have_small_image(ray in 0usize..4, u in prop::collection::vec(-4i64..=4, 3)) {
        let vcone: Vec<usize> = if ray < 3 { vec![ray] } else { vec![] };
        prop_assume!((0..3).all(|i| vcone.contains(&i) || u[i] >= 0) && u.iter().any(|&x| x != 0));
        let mut lcone: Vec<usize> = (0..3).filter(|&i| vcone.contains(&i) || u[i] != 0).collect();
        lcone.dedup();
        let cx = common::load_complex("scattering");
        let t = TropicalType {
            vertices: vec![Vertex { cone: vcone, a: None, label: None }],
            edges: vec![],
            legs: vec![Leg { v: Some(0), cone: lcone, u: u.clone(), role: Role::Out }],
        };
        let Ok(cl) = classify(&t, &cx) else { return Ok(()) };
        let d = cl.dim_out.unwrap();
        prop_assert!(d <= 2);
        let leaves_boundary = (0..3).all(|i| i == ray || u[i] > 0);
        prop_assert_eq!(cl.kind == Kind::Wall, d == 2 && leaves_boundary);
    }

    #[test]
    fn line_types_round_trip(p in (0i64..=2, 0i64..=2), x in (1i64..=30, 1i64..=30)) {
        prop_assume!(p.0 + p.1 > 0 && x.0 * 11 != x.1 * 7);
        let s = common::load_walls("quadrant");
        let opts = EnumOptions { decorated: true, ..EnumOptions::default() };
        let pt = PointInChart::new(0, vec![rat(x.0, 7), rat(x.1, 11)]);
        for line in enumerate(&s, &[p.0, p.1], &pt, &opts).unwrap() {
            let t = decorated_to_type(&s, &line).unwrap();
            let back = type_to_line(&s, &t, &pt, &opts).unwrap();
            prop_assert_eq!(&back, &line);
            let sp = spine(&t);
            let path = sp.path.clone().unwrap_or_default();
            prop_assert!(path.iter().all(|v| sp.vertices.contains(v)));
            if let (Some(inc), Some(first)) = (t.leg(Role::Inc).and_then(|l| l.v), path.first()) {
                prop_assert_eq!(inc, *first);
            }
            if let (Some(out), Some(last)) = (t.leg(Role::Out).and_then(|l| l.v), path.last()) {
                prop_assert_eq!(out, *last);
            }
            let kind = classify(&t, &s.complex).unwrap().kind;
            prop_assert!(matches!(kind, Kind::BrokenLine | Kind::TrivialBrokenLine));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bend_closed_form_matches(seed in 0u64..10_000, n in 2usize..=3, l in 0usize..=3, codim in 0u8..=1) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_bend_config(&mut rng, n, l, codim);
        let m = splitting_multiplicity(&cfg.gluing().unwrap()).unwrap();
        prop_assert_eq!(Q::from_integer(m.index), cfg.closed_form().unwrap());
    }
}

#[test]
fn splitting_keeps_dimension() {
    let cx = common::load_complex("quadrant");
    let t = TropicalType::from_json(&common::load_json("tropical/bent_line.json")).unwrap();
    let dim = universal_cone(&t, &cx).unwrap().dim;
    let g = split_type(&t, &cx, &[0]).unwrap();
    let m = splitting_multiplicity(&g).unwrap();
    assert_eq!(m.dim_tau, dim + 1);
    assert!(m.dimension_formula);
}

#[test]
fn fixture_gluings() {
    let mut v = common::load_json("tropical/gluing_index2.json");
    v.as_object_mut().unwrap().remove("schema");
    let g: Gluing = serde_json::from_value(v).unwrap();
    assert_eq!(splitting_multiplicity(&g).unwrap().index, BigInt::from(2));
}
