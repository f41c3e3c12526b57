#![allow(dead_code)]

use serde_json::Value;
use std::path::PathBuf;
use std::sync::Arc;
use wallcross::geometry::{build_complex, ConeComplex, GeometryInput};
use wallcross::ring::Truncation;
use wallcross::walls::WallStructure;

pub fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(path)
}

pub fn load_json(path: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture(path)).unwrap()).unwrap()
}

pub fn load_complex(dir: &str) -> Arc<ConeComplex> {
    let g: GeometryInput = serde_json::from_value(load_json(&format!("{dir}/geometry.json"))).unwrap();
    Arc::new(build_complex(&g).unwrap())
}

pub fn load_truncation(dir: &str) -> Truncation {
    Truncation::from_json(&load_json(&format!("{dir}/truncation.json"))).unwrap()
}

pub fn load_walls(dir: &str) -> WallStructure {
    let cx = load_complex(dir);
    let tr = load_truncation(dir);
    WallStructure::from_json(cx, &load_json(&format!("{dir}/walls.json")), &tr).unwrap()
}

pub fn load_counts(dir: &str) -> Vec<wallcross::walls::CountEntry> {
    serde_json::from_value(load_json(&format!("{dir}/counts.json"))).unwrap()
}

/// Determinant by cofactor expansion.
pub fn naive_det(m: &[Vec<i128>]) -> i128 {
    match m.len() {
        0 => 1,
        1 => m[0][0],
        n => (0..n)
            .map(|j| {
                let minor: Vec<Vec<i128>> = m[1..].iter().map(|r| r.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &x)| x).collect()).collect();
                let s = if j % 2 == 0 { 1 } else { -1 };
                s * m[0][j] * naive_det(&minor)
            })
            .sum(),
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 { a.abs() } else { gcd(b, a % b) }
}

/// Invariant factors as quotients of successive gcds of k×k minors.
pub fn naive_invariant_factors(m: &[Vec<i64>]) -> Vec<i128> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut prev = 1i128;
    let mut out = Vec::new();
    for k in 1..=rows.min(cols) {
        let mut g = 0i128;
        for rs in subsets(rows, k) {
            for cs in subsets(cols, k) {
                let sub: Vec<Vec<i128>> = rs.iter().map(|&i| cs.iter().map(|&j| m[i][j] as i128).collect()).collect();
                g = gcd(g, naive_det(&sub));
            }
        }
        if g == 0 {
            break;
        }
        out.push(g / prev);
        prev = g;
    }
    out
}

pub type Q = wallcross::linalg::Q;
/// Laurent polynomial over Q[t]: (class, exponent) ↦ coefficient.
pub type Poly = std::collections::BTreeMap<(Vec<i64>, Vec<i64>), Q>;

pub struct OracleWall {
    pub gens: Vec<[i64; 3]>,
    pub function: Poly,
}

pub fn oracle_walls(s: &WallStructure) -> Vec<OracleWall> {
    s.walls
        .iter()
        .map(|w| OracleWall {
            gens: w.support.iter().map(|g| [g[0], g[1], g[2]]).collect(),
            function: w.function.terms().map(|(m, c)| ((m.class.clone(), m.exp.clone()), c.clone())).collect(),
        })
        .collect()
}

fn cross3(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn gcd64(a: i64, b: i64) -> i64 {
    if b == 0 { a.abs() } else { gcd64(b, a % b) }
}

fn dot3(a: [i64; 3], b: &[i64]) -> i64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn poly_mul(a: &Poly, b: &Poly, kills: &dyn Fn(&[i64]) -> bool) -> Poly {
    let mut out = Poly::new();
    for ((ca, ea), xa) in a {
        for ((cb, eb), xb) in b {
            let c: Vec<i64> = ca.iter().zip(cb).map(|(x, y)| x + y).collect();
            if kills(&c) {
                continue;
            }
            let e: Vec<i64> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            *out.entry((c, e)).or_insert_with(|| Q::from_integer(0.into())) += xa * xb;
        }
    }
    out.retain(|_, v| *v != Q::from_integer(0.into()));
    out
}

fn poly_one(rank: usize) -> Poly {
    Poly::from([((vec![0; rank], vec![0; 3]), Q::from_integer(1.into()))])
}

fn poly_pow(f: &Poly, k: i64, rank: usize, kills: &dyn Fn(&[i64]) -> bool) -> Poly {
    let base = if k >= 0 {
        f.clone()
    } else {
        let mut g = f.clone();
        *g.entry((vec![0; rank], vec![0; 3])).or_insert_with(|| Q::from_integer(0.into())) -= Q::from_integer(1.into());
        g.retain(|_, v| *v != Q::from_integer(0.into()));
        let neg: Poly = g.iter().map(|(k, v)| (k.clone(), -v.clone())).collect();
        let mut inv = poly_one(rank);
        let mut term = poly_one(rank);
        loop {
            term = poly_mul(&term, &neg, kills);
            if term.is_empty() {
                break;
            }
            for (k, v) in &term {
                *inv.entry(k.clone()).or_insert_with(|| Q::from_integer(0.into())) += v;
            }
        }
        inv.retain(|_, v| *v != Q::from_integer(0.into()));
        inv
    };
    let mut out = poly_one(rank);
    for _ in 0..k.abs() {
        out = poly_mul(&out, &base, kills);
    }
    out
}

/// Composes the wall automorphisms met on a small counterclockwise loop
/// around the ray `j` and returns the images of z^{±e_i}.
pub fn loop_images(walls: &[OracleWall], j: [i64; 3], rank: usize, kills: &dyn Fn(&[i64]) -> bool) -> Vec<(Poly, Poly)> {
    let jf = [j[0] as f64, j[1] as f64, j[2] as f64];
    let jn = (jf[0] * jf[0] + jf[1] * jf[1] + jf[2] * jf[2]).sqrt();
    let pick = if jf[0].abs() < 0.9 * jn { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = (pick[0] * jf[0] + pick[1] * jf[1] + pick[2] * jf[2]) / (jn * jn);
    let e1 = [pick[0] - d * jf[0], pick[1] - d * jf[1], pick[2] - d * jf[2]];
    let e2 = [jf[1] * e1[2] - jf[2] * e1[1], jf[2] * e1[0] - jf[0] * e1[2], jf[0] * e1[1] - jf[1] * e1[0]];
    let mut halves: Vec<(f64, [i64; 3], &Poly)> = Vec::new();
    for w in walls {
        let (g1, g2) = (w.gens[0], w.gens[1]);
        let n = cross3(g1, g2);
        let g = n.iter().fold(0i64, |a, &b| gcd64(a, b));
        let n = [n[0] / g, n[1] / g, n[2] / g];
        if dot3(n, &j) != 0 || dot3(n, &cross3(g1, j)) < 0 || dot3(n, &cross3(j, g2)) < 0 {
            continue;
        }
        for g in [g1, g2] {
            if cross3(g, j) == [0, 0, 0] {
                continue;
            }
            let gf = [g[0] as f64, g[1] as f64, g[2] as f64];
            let a = (gf[0] * e2[0] + gf[1] * e2[1] + gf[2] * e2[2]).atan2(gf[0] * e1[0] + gf[1] * e1[1] + gf[2] * e1[2]);
            let t = cross3(j, g);
            let nn = if dot3(n, &t) < 0 { n } else { [-n[0], -n[1], -n[2]] };
            halves.push((a, nn, &w.function));
        }
    }
    halves.sort_by(|a, b| a.0.total_cmp(&b.0));
    let apply = |p: &Poly| -> Poly {
        let mut cur = p.clone();
        for (_, n, f) in &halves {
            let mut next = Poly::new();
            for ((c, e), x) in &cur {
                let term = Poly::from([((c.clone(), e.clone()), x.clone())]);
                for (k, v) in poly_mul(&term, &poly_pow(f, dot3(*n, e), rank, kills), kills) {
                    *next.entry(k).or_insert_with(|| Q::from_integer(0.into())) += v;
                }
            }
            next.retain(|_, v| *v != Q::from_integer(0.into()));
            cur = next;
        }
        cur
    };
    (0..3)
        .map(|i| {
            let mut e = vec![0; 3];
            e[i] = 1;
            let plus = Poly::from([((vec![0; rank], e.clone()), Q::from_integer(1.into()))]);
            e[i] = -1;
            let minus = Poly::from([((vec![0; rank], e), Q::from_integer(1.into()))]);
            (apply(&plus), apply(&minus))
        })
        .collect()
}

/// Whether the loop around `j` acts as the identity.
pub fn loop_is_identity(walls: &[OracleWall], j: [i64; 3], rank: usize, kills: &dyn Fn(&[i64]) -> bool) -> bool {
    loop_images(walls, j, rank, kills).iter().enumerate().all(|(i, (p, m))| {
        let mut e = vec![0; 3];
        e[i] = 1;
        let one = |e: Vec<i64>| Poly::from([((vec![0; rank], e), Q::from_integer(1.into()))]);
        let ok = *p == one(e.clone());
        e[i] = -1;
        ok && *m == one(e)
    })
}
