//! Acceptance criteria, one PASS/FAIL line each.

mod common;

use common::{loop_is_identity, naive_invariant_factors, oracle_walls};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::time::{Duration, Instant};
use wallcross::broken::{alpha_trop_at, endpoint_near, default_direction, enumerate, sum_lines, theta, EnumOptions};
use wallcross::consistency::{complete_codim0, CheckOptions, CheckerRegistry};
use wallcross::geometry::PointInChart;
use wallcross::lattice::{cokernel_order, smith_normal_form, GroupOrder, IntegerMatrix};
use wallcross::linalg::Q;
use wallcross::ring::{Monomial, RingElement, Truncation};
use wallcross::tropical::{decorated_to_type, random_bend_config, splitting_multiplicity, type_to_line};
use wallcross::walls::{assemble_canonical, check_admissible, cross_wall, grading_check, refine, CountEntry, GradingData, WallStructure};

const LIMITS: [Duration; 8] = [
    Duration::from_secs(1),
    Duration::from_secs(5),
    Duration::from_secs(5),
    Duration::from_secs(1),
    Duration::from_secs(60),
    Duration::from_secs(5),
    Duration::from_secs(60),
    Duration::from_secs(10),
];

type Check = std::result::Result<String, String>;

fn q(x: i64) -> Q {
    Q::from_integer(x.into())
}

fn rat(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// exp of a power series in one variable, truncated after degree `k`.
fn series_exp(a: &[Q], k: usize) -> Vec<Q> {
    let mut out = vec![Q::zero(); k + 1];
    out[0] = q(1);
    let mut term = out.clone();
    for j in 1..=k {
        let mut next = vec![Q::zero(); k + 1];
        for (i, x) in term.iter().enumerate() {
            for (d, y) in a.iter().enumerate().skip(1) {
                if i + d <= k {
                    next[i + d] += x * y;
                }
            }
        }
        term = next.iter().map(|x| x / q(j as i64)).collect();
        for (o, t) in out.iter_mut().zip(&term) {
            *o += t;
        }
    }
    out
}

fn multiple_cover_counts(cone: usize, support: Vec<Vec<i64>>, u: &[i64], e: usize, rank: usize, k_max: i64) -> Vec<CountEntry> {
    (1..=k_max)
        .map(|k| {
            let mut class = vec![0; rank];
            class[e] = k;
            let sign = if k % 2 == 1 { 1 } else { -1 };
            CountEntry {
                max_cone: cone,
                support: support.clone(),
                u: u.iter().map(|x| k * x).collect(),
                class,
                w: rat(sign, k * k),
                k: Some(k),
                aut: None,
            }
        })
        .collect()
}

fn criterion_1() -> Check {
    const K: i64 = 6;
    let mut coeffs = vec![Q::zero(); K as usize + 1];
    for k in 1..=K {
        coeffs[k as usize] = q(k) * rat(if k % 2 == 1 { 1 } else { -1 }, k * k);
    }
    let want = series_exp(&coeffs, K as usize);
    ensure(want[0] == q(1) && want[1] == q(1) && want[2..].iter().all(Zero::is_zero), || "series oracle".into())?;
    let cx = common::load_complex("quadrant");
    let tr = Truncation::degree(1, K);
    let s = assemble_canonical(cx, &multiple_cover_counts(0, vec![vec![1, 1]], &[1, 1], 0, 1, K), &tr).map_err(|e| e.to_string())?;
    let expect = RingElement::from_terms(0, [(Monomial::new(vec![0], vec![0, 0]), q(1)), (Monomial::new(vec![1], vec![-1, -1]), q(1))], &tr);
    let f = s.consolidate().map_err(|e| e.to_string())?;
    ensure(f.walls.len() == 1 && f.walls[0].function == expect, || format!("quadrant wall {}", f.walls[0].function))?;
    let cx = common::load_complex("example14");
    let tr = common::load_truncation("example14");
    let u = [0, 1, 0];
    let s = assemble_canonical(cx, &multiple_cover_counts(0, vec![vec![1, 0, 0], vec![0, 1, 0]], &u, 3, 5, 4), &tr).map_err(|e| e.to_string())?;
    let s = s.consolidate().map_err(|e| e.to_string())?;
    let expect = RingElement::from_terms(0, [(Monomial::new(vec![0; 5], vec![0, 0, 0]), q(1)), (Monomial::new(vec![0, 0, 0, 1, 0], vec![0, -1, 0]), q(1))], &tr);
    ensure(s.walls.len() == 1 && s.walls[0].function == expect, || format!("example wall {}", s.walls[0].function))?;
    Ok(format!("K = {K} on the quadrant, K = 4 on the example"))
}

fn criterion_2() -> Check {
    let cx = common::load_complex("example14");
    ensure(cx.maximal_cones().len() == 10, || "ten maximal cones".into())?;
    let tr = common::load_truncation("example14");
    let s = assemble_canonical(cx.clone(), &common::load_counts("example14"), &tr).map_err(|e| e.to_string())?;
    let s = s.consolidate().map_err(|e| e.to_string())?;
    ensure(s.walls.len() == 5, || format!("{} walls", s.walls.len()))?;
    for w in &s.walls {
        check_admissible(&cx, w).map_err(|e| e.to_string())?;
    }
    let g: GradingData = serde_json::from_value(common::load_json("example14/grading.json")).map_err(|e| e.to_string())?;
    let bad = grading_check(&s, &g).map_err(|e| e.to_string())?;
    ensure(bad.is_empty(), || format!("inhomogeneous walls {bad:?}"))?;
    Ok("5 admissible homogeneous walls".into())
}

fn criterion_3() -> Check {
    let s = common::load_walls("scattering");
    let kills = |c: &[i64]| c.iter().any(|&x| x >= 2);
    ensure(!loop_is_identity(&oracle_walls(&s), [1, 1, 1], 2, &kills), || "input already consistent".into())?;
    let done = complete_codim0(&s, 0, &[vec![1, 1, 1]], 2).map_err(|e| e.to_string())?;
    let new = &done.walls[s.walls.len()..];
    ensure(new.len() == 1, || format!("{} new walls", new.len()))?;
    let expect = RingElement::from_terms(0, [(Monomial::new(vec![0, 0], vec![0, 0, 0]), q(1)), (Monomial::new(vec![1, 1], vec![2, -1, 0]), q(1))], &s.trunc);
    ensure(new[0].function == expect, || format!("new wall {}", new[0].function))?;
    ensure(loop_is_identity(&oracle_walls(&done), [1, 1, 1], 2, &kills), || "oracle loop not trivial".into())?;
    let r = refine(&done).map_err(|e| e.to_string())?;
    let j = r.joints.iter().position(|j| j.cell.key == vec![vec![1, 1, 1]]).ok_or("joint missing")?;
    let rep = CheckerRegistry::default().check_joint(&r, j, &CheckOptions::default()).map_err(|e| e.to_string())?;
    ensure(rep.pass, || format!("checker: {:?}", rep.witness))?;
    Ok(format!("new wall 1 + t1 t2 z^(2,-1,0) on {:?}", new[0].support))
}

fn poly2(terms: &[(i64, [i64; 2])], tr: &Truncation) -> RingElement {
    RingElement::from_terms(0, terms.iter().map(|&(a, m)| (Monomial::new(vec![a], m.to_vec()), q(1))), tr)
}

fn criterion_4() -> Check {
    let s = common::load_walls("quadrant");
    let o = EnumOptions::default();
    let above = PointInChart::new(0, vec![q(1), q(2)]);
    let below = PointInChart::new(0, vec![q(2), q(1)]);
    let ta = theta(&s, &[1, 0], &above, &o).map_err(|e| e.to_string())?;
    let tb = theta(&s, &[1, 0], &below, &o).map_err(|e| e.to_string())?;
    ensure(ta == poly2(&[(0, [1, 0]), (1, [0, -1])], &s.trunc), || format!("theta(1,2) = {ta}"))?;
    ensure(tb == poly2(&[(0, [1, 0])], &s.trunc), || format!("theta(2,1) = {tb}"))?;
    // (1 + t z^(-1,-1))^<(1,-1),(1,0)> z^(1,0) by hand.
    let by_hand = poly2(&[(0, [1, 0]), (1, [0, -1])], &s.trunc);
    let crossed = cross_wall(&tb, &s.walls[0], &below.coords, &s.trunc).map_err(|e| e.to_string())?;
    ensure(crossed == ta && crossed == by_hand, || format!("crossed {crossed}"))?;
    let back = cross_wall(&ta, &s.walls[0], &above.coords, &s.trunc).map_err(|e| e.to_string())?;
    ensure(back == tb, || format!("crossed back {back}"))?;
    Ok("values and intertwining hold".into())
}

/// α values on the quadrant as polynomials in t: coefficient list by degree.
struct Alpha {
    s: WallStructure,
    cache: HashMap<(Vec<i64>, Vec<i64>, Vec<i64>), Vec<Q>>,
}

impl Alpha {
    fn at(&mut self, p1: &[i64], p2: &[i64], r: &[i64], x: Option<&PointInChart>) -> std::result::Result<Vec<Q>, String> {
        let key = (p1.to_vec(), p2.to_vec(), r.to_vec());
        if x.is_none() {
            if let Some(v) = self.cache.get(&key) {
                return Ok(v.clone());
            }
        }
        let pt = match x {
            Some(x) => x.clone(),
            None => endpoint_near(&self.s, 0, r, &default_direction(r)).map_err(|e| e.to_string())?,
        };
        let a = alpha_trop_at(&self.s, p1, p2, r, &pt, &EnumOptions::default()).map_err(|e| e.to_string())?;
        let mut v = vec![Q::zero(); 2];
        for (m, c) in a.terms() {
            v[m.class[0] as usize] += c;
        }
        if x.is_none() {
            self.cache.insert(key, v.clone());
        }
        Ok(v)
    }
}

fn mul_t(a: &[Q], b: &[Q]) -> Vec<Q> {
    vec![&a[0] * &b[0], &a[0] * &b[1] + &a[1] * &b[0]]
}

fn criterion_5() -> Check {
    let mut al = Alpha { s: common::load_walls("quadrant"), cache: HashMap::new() };
    let ps: Vec<Vec<i64>> = vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]];
    let boxed: Vec<Vec<i64>> = (0..=3).flat_map(|a| (0..=3).map(move |b| vec![a, b])).collect();
    let zero = vec![Q::zero(), Q::zero()];
    ensure(al.at(&[1, 0], &[0, 1], &[0, 0], None)? == vec![Q::zero(), q(1)], || "alpha((1,0),(0,1),0) != t".into())?;
    ensure(al.at(&[1, 0], &[0, 1], &[1, 1], None)? == vec![q(1), Q::zero()], || "alpha((1,0),(0,1),(1,1)) != 1".into())?;
    let mut checked = 0;
    for p1 in &ps {
        for p2 in &ps {
            for r in &boxed {
                let a = al.at(p1, p2, r, None)?;
                ensure(a == al.at(p2, p1, r, None)?, || format!("symmetry at {p1:?} {p2:?} {r:?}"))?;
                checked += 1;
            }
        }
    }
    for p in &boxed {
        for r in &boxed {
            let want = if p == r { vec![q(1), Q::zero()] } else { zero.clone() };
            ensure(al.at(&[0, 0], p, r, None)? == want, || format!("unit at {p:?} {r:?}"))?;
        }
    }
    for p1 in &ps {
        for p2 in &ps {
            for p3 in &ps {
                for r in &boxed {
                    let (mut lhs, mut rhs) = (zero.clone(), zero.clone());
                    for s in &boxed {
                        let l = mul_t(&al.at(p1, p2, s, None)?, &al.at(s, p3, r, None)?);
                        let m = mul_t(&al.at(p2, p3, s, None)?, &al.at(p1, s, r, None)?);
                        for i in 0..2 {
                            lhs[i] += &l[i];
                            rhs[i] += &m[i];
                        }
                    }
                    ensure(lhs == rhs, || format!("associativity at {p1:?} {p2:?} {p3:?} {r:?}"))?;
                    checked += 1;
                }
            }
        }
    }
    for k in 1..=3 {
        let r = [k, k];
        let below = PointInChart::new(0, vec![q(k) + rat(1, 7), q(k)]);
        let above = PointInChart::new(0, vec![q(k), q(k) + rat(1, 5)]);
        for p1 in &ps {
            for p2 in &ps {
                ensure(al.at(p1, p2, &r, Some(&below))? == al.at(p1, p2, &r, Some(&above))?, || format!("chambers at {r:?}"))?;
            }
        }
    }
    Ok(format!("{checked} symmetry/associativity instances"))
}

fn criterion_6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut n_cfg = 0;
    for n in [2, 3] {
        for codim in [0u8, 1] {
            for l in 0..=3 {
                let cfg = random_bend_config(&mut rng, n, l, codim);
                let direct = splitting_multiplicity(&cfg.gluing().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?.index;
                let closed = cfg.closed_form().map_err(|e| e.to_string())?;
                ensure(Q::from_integer(direct.clone()) == closed, || format!("{cfg:?}: direct {direct}, closed {closed}"))?;
                n_cfg += 1;
            }
        }
    }
    Ok(format!("{n_cfg} configurations agree"))
}

fn criterion_7() -> Check {
    let s = common::load_walls("quadrant");
    let dec = EnumOptions { decorated: true, ..EnumOptions::default() };
    let xs = [
        PointInChart::new(0, vec![q(1), q(2)]),
        PointInChart::new(0, vec![q(2), q(1)]),
        PointInChart::new(0, vec![rat(3, 7), rat(29, 11)]),
        PointInChart::new(0, vec![rat(40, 7), rat(5, 11)]),
    ];
    let mut lines_seen = 0;
    for x in &xs {
        for p in [[1, 0], [0, 1], [1, 1], [2, 1], [1, 2], [3, 0]] {
            let lines = enumerate(&s, &p, x, &dec).map_err(|e| e.to_string())?;
            for line in &lines {
                let t = decorated_to_type(&s, line).map_err(|e| e.to_string())?;
                let back = type_to_line(&s, &t, x, &dec).map_err(|e| e.to_string())?;
                ensure(&back == line, || format!("line round trip at p = {p:?}"))?;
                ensure(decorated_to_type(&s, &back).map_err(|e| e.to_string())? == t, || "type round trip".into())?;
                lines_seen += 1;
            }
            let th = theta(&s, &p, x, &EnumOptions::default()).map_err(|e| e.to_string())?;
            ensure(sum_lines(&s, x.cone, &lines) == th, || format!("decorated sum at p = {p:?}"))?;
        }
    }
    Ok(format!("{lines_seen} decorated lines"))
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut square = 0;
    for _ in 0..1000 {
        let (r, c) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let m: Vec<Vec<i64>> = (0..r).map(|_| (0..c).map(|_| rng.gen_range(-9..=9)).collect()).collect();
        let a = IntegerMatrix::from_rows(&m, c);
        let snf = smith_normal_form(&a);
        ensure(snf.u.mul(&a).mul(&snf.v) == snf.d, || format!("U M V != D for {m:?}"))?;
        let want: Vec<BigInt> = naive_invariant_factors(&m).into_iter().map(BigInt::from).collect();
        ensure(snf.invariant_factors() == want, || format!("factors of {m:?}"))?;
        if r == c {
            square += 1;
            let det = common::naive_det(&m.iter().map(|row| row.iter().map(|&x| x as i128).collect()).collect::<Vec<_>>());
            let want = if det == 0 { GroupOrder::Infinite } else { GroupOrder::Finite(BigInt::from(det).abs()) };
            ensure(cokernel_order(&a, false) == want, || format!("cokernel of {m:?}"))?;
        }
    }
    Ok(format!("1000 matrices, {square} square"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("wall identity", criterion_1),
        ("example geometry and walls", criterion_2),
        ("codimension-zero scattering", criterion_3),
        ("quadrant theta functions", criterion_4),
        ("structure constant properties", criterion_5),
        ("multiplicity closed form", criterion_6),
        ("type round trip", criterion_7),
        ("lattice layer", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let limit = LIMITS[i];
        let (verdict, detail) = match result {
            Ok(d) if elapsed <= limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over time")),
            Err(e) => ("FAIL", e),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!("{verdict} criterion {} {name}: {detail} ({:.3}s, limit {}s)", i + 1, elapsed.as_secs_f64(), limit.as_secs());
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
