mod common;

use common::*;
use proptest::prelude::*;
use wallcross::geometry::ConeComplex;
use wallcross::linalg::{identity_i, mat_mul_i};
use wallcross::lattice::IntegerMatrix;

fn rank_minus_identity(m: &[Vec<i64>]) -> usize {
    let n = m.len();
    let rows: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| m[i][j] - i64::from(i == j)).collect()).collect();
    IntegerMatrix::from_rows(&rows, n).rank()
}

fn loop_monodromy(cx: &ConeComplex, name: &str) -> Vec<Vec<i64>> {
    let r = cx.divisor_index(name).unwrap();
    let path = cx.loop_around(&[r]).unwrap();
    cx.monodromy(&path).unwrap()
}

#[test]
fn transitions_invert_across_every_facet() {
    for dir in ["example14", "quadrant", "scattering"] {
        let cx = load_complex(dir);
        for f in cx.facets().iter().filter(|f| f.is_interior()) {
            let (a, b) = (f.sides[0], f.sides[1]);
            let (m, _) = cx.chart_transition(a, b).unwrap();
            let (w, _) = cx.chart_transition(b, a).unwrap();
            assert_eq!(mat_mul_i(&w, &m), identity_i(cx.dim()), "{dir} {:?}", f.rays);
        }
    }
}

#[test]
fn discriminant_is_the_two_first_factor_rays() {
    let cx = load_complex("example14");
    for name in ["D1_0", "D1_inf"] {
        let m = loop_monodromy(&cx, name);
        assert_eq!(rank_minus_identity(&m), 1, "{name}: {m:?}");
        let n = m.len();
        let sq: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| (m[i][k] - i64::from(i == k)) * (m[k][j] - i64::from(k == j))).sum()).collect()).collect();
        assert!(sq.iter().flatten().all(|&x| x == 0), "{name}: monodromy is not a transvection");
        // Primitive transvection: conjugate to the elementary matrix with a single 1 off the diagonal.
        let g = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).fold(0i64, |g, (i, j)| num_integer::gcd(g, m[i][j] - i64::from(i == j)));
        assert_eq!(g, 1, "{name}");
    }
    for name in ["D2_0", "D3_0", "D2_inf", "D3_inf", "E2"] {
        assert_eq!(loop_monodromy(&cx, name), identity_i(3), "{name}");
    }
}

proptest! {
    #[test]
    fn chart_round_trip(sigma in 0usize..10, a in 0i64..20, b in 0i64..20, c in 0i64..20) {
        let cx = load_complex("example14");
        let p = wallcross::geometry::PointInChart::new(sigma, [a, b, c].iter().map(|&x| wallcross::linalg::q(x)).collect());
        let g = cx.to_global(&p);
        prop_assert_eq!(cx.in_chart(sigma, &g).unwrap(), p);
    }
}
