mod common;

use proptest::prelude::*;
use wallcross::linalg::Q;
use wallcross::ring::{transport, Monomial, RingElement, Truncation};

fn trunc() -> Truncation {
    Truncation::degree(2, 3)
}

fn element(nilpotent: bool) -> impl Strategy<Value = RingElement> {
    let lo = if nilpotent { 1 } else { 0 };
    prop::collection::vec(((0i64..=2, lo..=2i64), (-2i64..=2, -2i64..=2), -4i64..=4), 0..5).prop_map(|terms| {
        RingElement::from_terms(
            0,
            terms.into_iter().map(|((a, b), (x, y), c)| (Monomial::new(vec![a, b], vec![x, y]), Q::from_integer(c.into()))),
            &trunc(),
        )
    })
}

fn one() -> RingElement {
    RingElement::one(0, 2, 2)
}

proptest! {
    #[test]
    fn commutative_ring(a in element(false), b in element(false), c in element(false)) {
        let t = trunc();
        prop_assert_eq!(a.multiply(&b, &t).unwrap(), b.multiply(&a, &t).unwrap());
        prop_assert_eq!(
            a.multiply(&b, &t).unwrap().multiply(&c, &t).unwrap(),
            a.multiply(&b.multiply(&c, &t).unwrap(), &t).unwrap()
        );
        prop_assert_eq!(a.multiply(&one(), &t).unwrap(), a.clone());
        prop_assert_eq!(
            a.multiply(&b.add(&c, &t).unwrap(), &t).unwrap(),
            a.multiply(&b, &t).unwrap().add(&a.multiply(&c, &t).unwrap(), &t).unwrap()
        );
        prop_assert!(a.sub(&a, &t).unwrap().is_empty());
    }

    #[test]
    fn exp_is_additive(a in element(true), b in element(true)) {
        let t = trunc();
        let lhs = a.add(&b, &t).unwrap().exp_truncated(2, &t).unwrap();
        let rhs = a.exp_truncated(2, &t).unwrap().multiply(&b.exp_truncated(2, &t).unwrap(), &t).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn log_inverts_exp(a in element(true)) {
        let t = trunc();
        prop_assert_eq!(a.exp_truncated(2, &t).unwrap().log_unipotent(2, &t).unwrap(), a);
    }

    #[test]
    fn inverse_is_involutive(a in element(true)) {
        let t = trunc();
        let f = one().add(&a, &t).unwrap();
        let inv = f.invert(2, &t).unwrap();
        prop_assert_eq!(f.multiply(&inv, &t).unwrap(), one());
        prop_assert_eq!(inv.invert(2, &t).unwrap(), f.clone());
        prop_assert_eq!(f.pow(-2, 2, &t).unwrap(), inv.multiply(&inv, &t).unwrap());
    }

    #[test]
    fn truncation_kills_high_classes(a in element(false)) {
        let t = trunc();
        prop_assert!(a.terms().all(|(m, _)| !t.kills(&m.class)));
    }
}

fn element3(cone: usize, terms: &[((i64, i64), [i64; 3], i64)], t: &Truncation) -> RingElement {
    RingElement::from_terms(
        cone,
        terms.iter().map(|&((a, b), e, c)| (Monomial::new(vec![a, b, 0, 0, 0], e.to_vec()), Q::from_integer(c.into()))),
        t,
    )
}

proptest! {
    #[test]
    fn transport_is_a_homomorphism(
        x in prop::collection::vec(((0i64..=1, 0i64..=1), [-2i64..=2, -2i64..=2, -2i64..=2], -3i64..=3), 0..4),
        y in prop::collection::vec(((0i64..=1, 0i64..=1), [-2i64..=2, -2i64..=2, -2i64..=2], -3i64..=3), 0..4),
    ) {
        let cx = common::load_complex("example14");
        let t = common::load_truncation("example14");
        let to = (1..cx.maximal_cones().len()).find(|&j| cx.facet_between(0, j).is_some()).unwrap();
        let (a, b) = (element3(0, &x, &t), element3(0, &y, &t));
        let tr = |f: &RingElement| transport(&cx, f, to, true, &t).unwrap();
        prop_assert_eq!(tr(&a.multiply(&b, &t).unwrap()), tr(&a).multiply(&tr(&b), &t).unwrap());
        prop_assert_eq!(tr(&a.add(&b, &t).unwrap()), tr(&a).add(&tr(&b), &t).unwrap());
        let back = transport(&cx, &tr(&a), 0, true, &t).unwrap();
        prop_assert_eq!(back, a);
    }
}

#[test]
fn transport_across_example_facets() {
    let cx = common::load_complex("example14");
    let t = common::load_truncation("example14");
    let m = cx.maximal_cones().len();
    let mut seen = 0;
    for i in 0..m {
        for j in 0..m {
            if i == j || cx.facet_between(i, j).is_none() {
                continue;
            }
            seen += 1;
            let f = RingElement::monomial(i, vec![0; 5], vec![1, 1, 1], Q::from_integer(1.into()));
            let g = transport(&cx, &f, j, true, &t).unwrap();
            assert_eq!(transport(&cx, &g, i, true, &t).unwrap(), f);
        }
    }
    assert_eq!(seen, 30);
}
