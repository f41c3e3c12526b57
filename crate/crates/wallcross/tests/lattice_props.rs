mod common;

use common::{naive_det, naive_invariant_factors};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use wallcross::lattice::{cokernel_order, kernel_basis, smith_normal_form, GroupOrder, IntegerMatrix};

fn matrix() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-9i64..=9, c), r))
}

fn to_matrix(m: &[Vec<i64>]) -> IntegerMatrix {
    IntegerMatrix::from_rows(m, m[0].len())
}

fn is_diagonal(d: &IntegerMatrix) -> bool {
    (0..d.rows()).all(|i| (0..d.cols()).all(|j| i == j || d.get(i, j).is_zero()))
}

fn unimodular(seed: &[i64], n: usize) -> IntegerMatrix {
    let mut u = IntegerMatrix::identity(n);
    for (k, &c) in seed.iter().enumerate() {
        let (i, j) = (k % n, (k / n + k + 1) % n);
        if i == j {
            continue;
        }
        for col in 0..n {
            let v = u.get(i, col) + BigInt::from(c) * u.get(j, col);
            u.set(i, col, v);
        }
    }
    u
}

proptest! {
    #[test]
    fn smith_decomposition_holds(m in matrix()) {
        let a = to_matrix(&m);
        let snf = smith_normal_form(&a);
        prop_assert_eq!(snf.u.mul(&a).mul(&snf.v), snf.d.clone());
        prop_assert!(is_diagonal(&snf.d));
        prop_assert!(snf.u.determinant().abs().is_one());
        prop_assert!(snf.v.determinant().abs().is_one());
        let f = snf.invariant_factors();
        prop_assert!(f.iter().all(|x| x.is_positive()));
        for w in f.windows(2) {
            prop_assert!((&w[1] % &w[0]).is_zero());
        }
    }

    #[test]
    fn factors_match_minor_gcds(m in matrix()) {
        let got: Vec<BigInt> = smith_normal_form(&to_matrix(&m)).invariant_factors();
        let want: Vec<BigInt> = naive_invariant_factors(&m).into_iter().map(BigInt::from).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn rank_matches_factor_count(m in matrix()) {
        let a = to_matrix(&m);
        prop_assert_eq!(a.rank(), smith_normal_form(&a).rank());
    }

    #[test]
    fn invariant_under_unimodular_change(m in matrix(), s1 in prop::collection::vec(-3i64..=3, 6), s2 in prop::collection::vec(-3i64..=3, 6)) {
        let a = to_matrix(&m);
        let b = unimodular(&s1, a.rows()).mul(&a).mul(&unimodular(&s2, a.cols()));
        prop_assert_eq!(smith_normal_form(&a).invariant_factors(), smith_normal_form(&b).invariant_factors());
    }

    #[test]
    fn cokernel_order_is_multiplicative(m1 in matrix(), m2 in matrix()) {
        let (a, b) = (to_matrix(&m1), to_matrix(&m2));
        let ab = a.direct_sum(&b);
        let prod = match (cokernel_order(&a, false), cokernel_order(&b, false)) {
            (GroupOrder::Finite(x), GroupOrder::Finite(y)) => GroupOrder::Finite(x * y),
            _ => GroupOrder::Infinite,
        };
        prop_assert_eq!(cokernel_order(&ab, false), prod);
        let t = cokernel_order(&a, true).finite().unwrap() * cokernel_order(&b, true).finite().unwrap();
        prop_assert_eq!(cokernel_order(&ab, true), GroupOrder::Finite(t));
    }

    #[test]
    fn square_cokernel_is_abs_det(m in (1usize..=4).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(-9i64..=9, n), n))) {
        let a = to_matrix(&m);
        let det = naive_det(&m.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect::<Vec<_>>());
        prop_assert_eq!(a.determinant(), BigInt::from(det));
        let want = if det == 0 { GroupOrder::Infinite } else { GroupOrder::Finite(BigInt::from(det.abs())) };
        prop_assert_eq!(cokernel_order(&a, false), want);
    }

    #[test]
    fn kernel_basis_spans_kernel(m in matrix()) {
        let a = to_matrix(&m);
        let basis = kernel_basis(&a);
        prop_assert_eq!(basis.len(), a.cols() - a.rank());
        for v in &basis {
            for i in 0..a.rows() {
                let s: BigInt = (0..a.cols()).map(|j| a.get(i, j) * &v[j]).sum();
                prop_assert!(s.is_zero());
            }
        }
        if !basis.is_empty() {
            let k = IntegerMatrix::from_rows(&basis, a.cols()).transpose();
            prop_assert_eq!(cokernel_order(&k, true), GroupOrder::Finite(BigInt::one()));
        }
    }
}

#[test]
fn known_forms() {
    let a = IntegerMatrix::from_i64(&[&[2, 4, 4], &[-6, 6, 12], &[10, -4, -16]]);
    let f: Vec<i64> = smith_normal_form(&a).invariant_factors().iter().map(|x| x.try_into().unwrap()).collect();
    assert_eq!(f, vec![2, 6, 12]);
    assert_eq!(cokernel_order(&IntegerMatrix::from_i64(&[&[2, 0], &[0, 0]]), true), GroupOrder::Finite(BigInt::from(2)));
}
