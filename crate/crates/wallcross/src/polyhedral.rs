//! Pointed rational cones in ℚ^d with double description (rays and inequalities).

use crate::linalg::{self, Q};
use num_traits::{One, Signed, Zero};

/// A pointed polyhedral cone given by both its extreme rays and inequalities `h·x ≥ 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyCone {
    pub dim: usize,
    pub rays: Vec<Vec<i64>>,
    pub ineqs: Vec<Vec<i64>>,
}

impl PolyCone {
    /// The nonnegative orthant of ℚ^d.
    pub fn orthant(d: usize) -> Self {
        let unit = |i: usize| (0..d).map(|j| i64::from(i == j)).collect::<Vec<i64>>();
        PolyCone { dim: d, rays: (0..d).map(unit).collect(), ineqs: (0..d).map(unit).collect() }
    }

    /// Cuts the cone by the hyperplane `h·x = 0`. Returns `None` if it does not
    /// separate two rays, else the pieces on the `≥ 0` and `≤ 0` sides.
    pub fn split(&self, h: &[i64]) -> Option<(PolyCone, PolyCone)> {
        let vals: Vec<i64> = self.rays.iter().map(|r| linalg::dot_i(h, r)).collect();
        if !vals.iter().any(|&v| v > 0) || !vals.iter().any(|&v| v < 0) {
            return None;
        }
        let mut fresh = Vec::new();
        for (i, r) in self.rays.iter().enumerate() {
            for (j, s) in self.rays.iter().enumerate() {
                if vals[i] > 0 && vals[j] < 0 && self.adjacent(i, j) {
                    let v: Vec<i64> = r.iter().zip(s).map(|(a, b)| vals[i] * b - vals[j] * a).collect();
                    fresh.push(linalg::primitive_i(&v));
                }
            }
        }
        let side = |sign: i64| {
            let mut rays: Vec<Vec<i64>> =
                self.rays.iter().zip(&vals).filter(|(_, &v)| v * sign >= 0).map(|(r, _)| r.clone()).collect();
            rays.extend(fresh.iter().cloned());
            rays.sort();
            rays.dedup();
            let mut ineqs = self.ineqs.clone();
            ineqs.push(h.iter().map(|x| x * sign).collect());
            let mut c = PolyCone { dim: self.dim, rays, ineqs };
            c.prune_inequalities();
            c
        };
        Some((side(1), side(-1)))
    }

    /// Rays i and j span a 2-face.
    fn adjacent(&self, i: usize, j: usize) -> bool {
        let tight: Vec<Vec<Q>> = self
            .ineqs
            .iter()
            .filter(|h| linalg::dot_i(h, &self.rays[i]) == 0 && linalg::dot_i(h, &self.rays[j]) == 0)
            .map(|h| linalg::qv(h))
            .collect();
        if linalg::rank(&tight) + 2 != self.dim {
            return false;
        }
        // No third ray may lie on the same face.
        !self.rays.iter().enumerate().any(|(k, r)| {
            k != i && k != j && tight.iter().all(|h| linalg::dot(h, &linalg::qv(r)).is_zero())
        })
    }

    fn prune_inequalities(&mut self) {
        let mut kept: Vec<Vec<i64>> = Vec::new();
        for h in &self.ineqs {
            let h = linalg::primitive_i(h);
            if kept.contains(&h) {
                continue;
            }
            let tight: Vec<Vec<Q>> =
                self.rays.iter().filter(|r| linalg::dot_i(&h, r) == 0).map(|r| linalg::qv(r)).collect();
            if linalg::rank(&tight) + 1 == self.dim {
                kept.push(h);
            }
        }
        kept.sort();
        self.ineqs = kept;
    }

    /// Facets as ray subsets, paired with their inequality.
    pub fn facets(&self) -> Vec<(Vec<i64>, Vec<Vec<i64>>)> {
        self.ineqs
            .iter()
            .map(|h| (h.clone(), self.rays.iter().filter(|r| linalg::dot_i(h, r) == 0).cloned().collect()))
            .collect()
    }

    /// Codimension-two faces as ray subsets.
    pub fn ridges(&self) -> Vec<Vec<Vec<i64>>> {
        let mut out = Vec::new();
        for (i, a) in self.ineqs.iter().enumerate() {
            for b in &self.ineqs[i + 1..] {
                let rays: Vec<Vec<i64>> = self
                    .rays
                    .iter()
                    .filter(|r| linalg::dot_i(a, r) == 0 && linalg::dot_i(b, r) == 0)
                    .cloned()
                    .collect();
                let qs: Vec<Vec<Q>> = rays.iter().map(|r| linalg::qv(r)).collect();
                if linalg::rank(&qs) + 2 == self.dim && !out.contains(&rays) {
                    out.push(rays);
                }
            }
        }
        out.sort();
        out
    }

    pub fn contains(&self, x: &[Q]) -> bool {
        self.ineqs.iter().all(|h| !linalg::dot(&linalg::qv(h), x).is_negative())
    }

    pub fn interior_point(&self) -> Vec<Q> {
        sum_rays(&self.rays, self.dim)
    }
}

pub fn sum_rays(rays: &[Vec<i64>], dim: usize) -> Vec<Q> {
    let mut s = vec![Q::zero(); dim];
    for r in rays {
        for (a, b) in s.iter_mut().zip(r) {
            *a += linalg::q(*b);
        }
    }
    s
}

/// Coefficients of `x` in the simplicial cone spanned by independent generators.
pub fn simplicial_coords(gens: &[Vec<Q>], x: &[Q]) -> Option<Vec<Q>> {
    linalg::solve_combination(gens, x)
}

/// Position of `x` relative to a simplicial cone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Outside,
    Boundary,
    Interior,
}

pub fn membership(gens: &[Vec<Q>], x: &[Q]) -> Membership {
    match simplicial_coords(gens, x) {
        None => Membership::Outside,
        Some(c) if c.iter().any(Signed::is_negative) => Membership::Outside,
        Some(c) if c.iter().any(Zero::is_zero) => Membership::Boundary,
        Some(_) => Membership::Interior,
    }
}

/// Primitive integer normal of the hyperplane spanned by `d − 1` independent vectors.
pub fn hyperplane_normal(gens: &[Vec<Q>], d: usize) -> Option<Vec<i64>> {
    let ns = linalg::nullspace(gens, d);
    if ns.len() != 1 {
        return None;
    }
    Some(linalg::primitive(&ns[0]))
}

/// Splits a cone of dimension `k` (given by rays spanning a k-space) into simplicial
/// pieces by pulling from its first ray.
pub fn triangulate(rays: &[Vec<i64>], k: usize) -> Vec<Vec<Vec<i64>>> {
    if rays.len() <= k {
        return vec![rays.to_vec()];
    }
    let apex = &rays[0];
    let rest: Vec<Vec<i64>> = rays[1..].to_vec();
    let mut out = Vec::new();
    // Facets of the cone not containing the apex, found as maximal subsets of
    // rank k−1 lying on a supporting hyperplane within the span.
    let span: Vec<Vec<Q>> = rays.iter().map(|r| linalg::qv(r)).collect();
    let d = rays[0].len();
    let complement = linalg::nullspace(&span, d);
    let mut seen: Vec<Vec<Vec<i64>>> = Vec::new();
    for combo in combinations(rest.len(), k - 1) {
        let sub: Vec<Vec<Q>> = combo.iter().map(|&i| linalg::qv(&rest[i])).collect();
        if linalg::rank(&sub) != k - 1 {
            continue;
        }
        let mut eqs = sub.clone();
        eqs.extend(complement.iter().cloned());
        let normals = linalg::nullspace(&eqs, d);
        if normals.len() != 1 {
            continue;
        }
        let h = &normals[0];
        let vals: Vec<Q> = span.iter().map(|r| linalg::dot(h, r)).collect();
        let supporting = vals.iter().all(|v| !v.is_negative()) || vals.iter().all(|v| !v.is_positive());
        if !supporting || vals[0].is_zero() {
            continue;
        }
        let face: Vec<Vec<i64>> =
            rays.iter().zip(&vals).filter(|(_, v)| v.is_zero()).map(|(r, _)| r.clone()).collect();
        if seen.contains(&face) {
            continue;
        }
        seen.push(face.clone());
        for piece in triangulate(&face, k - 1) {
            let mut cell = vec![apex.clone()];
            cell.extend(piece);
            out.push(cell);
        }
    }
    out
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

/// A point of `{x ≥ 0 : A x = b}`, or `None` if it is empty. Exact phase-one
/// simplex with Bland's rule.
pub fn lp_feasible(a: &[Vec<Q>], b: &[Q]) -> Option<Vec<Q>> {
    let rows = a.len();
    let n = a.first().map_or(0, Vec::len);
    // Tableau columns: x (n), artificials (rows), rhs.
    let width = n + rows + 1;
    let mut t: Vec<Vec<Q>> = Vec::with_capacity(rows + 1);
    for (i, row) in a.iter().enumerate() {
        let flip = b[i].is_negative();
        let mut r: Vec<Q> = row.iter().map(|v| if flip { -v } else { v.clone() }).collect();
        r.extend((0..rows).map(|j| if i == j { Q::one() } else { Q::zero() }));
        r.push(if flip { -&b[i] } else { b[i].clone() });
        t.push(r);
    }
    // Objective: minimize the sum of artificials, stored as reduced costs.
    let mut obj = vec![Q::zero(); width];
    for r in &t {
        for j in 0..n {
            obj[j] -= &r[j];
        }
        obj[width - 1] -= &r[width - 1];
    }
    let mut basis: Vec<usize> = (n..n + rows).collect();
    loop {
        let Some(col) = (0..n + rows).find(|&j| obj[j].is_negative()) else { break };
        let mut pick: Option<(usize, Q)> = None;
        for (i, r) in t.iter().enumerate() {
            if r[col].is_positive() {
                let ratio = &r[width - 1] / &r[col];
                let better = match &pick {
                    None => true,
                    Some((k, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*k]),
                };
                if better {
                    pick = Some((i, ratio));
                }
            }
        }
        let Some((row, _)) = pick else { break };
        let piv = t[row][col].clone();
        for v in t[row].iter_mut() {
            *v /= &piv;
        }
        let prow = t[row].clone();
        for (i, r) in t.iter_mut().enumerate() {
            if i != row && !r[col].is_zero() {
                let f = r[col].clone();
                for (v, p) in r.iter_mut().zip(&prow) {
                    *v -= &f * p;
                }
            }
        }
        let f = obj[col].clone();
        for (v, p) in obj.iter_mut().zip(&prow) {
            *v -= &f * p;
        }
        basis[row] = col;
    }
    if !obj[width - 1].is_zero() {
        return None;
    }
    let mut x = vec![Q::zero(); n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = t[i][width - 1].clone();
        }
    }
    Some(x)
}
