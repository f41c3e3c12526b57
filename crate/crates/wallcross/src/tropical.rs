//! Types of tropical maps to Σ(X).
//!
//! A type is a tree whose vertices, edges and legs are assigned cones of the
//! complex and whose edges and legs carry integral contact orders. Every cone
//! of the complex is simplicial, so positions and contact orders are written in
//! global divisor coordinates supported on the rays of the assigned cone.
//!
//! The module also holds the correspondence between decorated broken lines and
//! broken line types, and the lattice combinatorics of split types.

use crate::broken::{self, BrokenLine, Crossing, EnumOptions, Event, MuEntry};
use crate::error::{Error, Result};
use crate::geometry::{ConeComplex, ConeId, PointInChart};
use crate::json::SCHEMA;
use crate::lattice::{cokernel_order, kernel_basis, GroupOrder, IntegerMatrix};
use crate::linalg::{self, fmt_q, q, Q};
use crate::polyhedral::lp_feasible;
use crate::walls::WallStructure;
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vertex {
    pub cone: Vec<usize>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<i64>>,
    /// Wall and log term carried by a wall-type vertex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<[usize; 2]>,
}

/// An edge oriented from `v[0]` to `v[1]`: `h(v[1]) = h(v[0]) + ℓ·u`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub v: [usize; 2],
    pub cone: Vec<usize>,
    pub u: Vec<i64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Out,
    Inc,
    In1,
    In2,
    Other,
}

/// A leg leaving `v` in direction `u`. `v` is absent only for the trivial
/// broken line type.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Leg {
    pub v: Option<usize>,
    pub cone: Vec<usize>,
    pub u: Vec<i64>,
    pub role: Role,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TropicalType {
    #[serde(default)]
    pub vertices: Vec<Vertex>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    pub legs: Vec<Leg>,
}

impl TropicalType {
    pub fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("types serialize");
        v["schema"] = json!(SCHEMA);
        v
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let mut v = v.clone();
        if let Some(obj) = v.as_object_mut() {
            obj.remove("schema");
        }
        serde_json::from_value(v).map_err(|e| Error::InvalidInput(format!("tropical type: {e}")))
    }

    pub fn leg(&self, role: Role) -> Option<&Leg> {
        self.legs.iter().find(|l| l.role == role)
    }

    pub fn is_trivial(&self) -> bool {
        self.vertices.is_empty() && self.legs.len() == 1
    }

    /// Edges and legs at `v` as (contact order pointing away from v, cone).
    pub fn star(&self, v: usize) -> Vec<(Vec<i64>, &[usize])> {
        let mut out = Vec::new();
        for e in &self.edges {
            if e.v[0] == v {
                out.push((e.u.clone(), e.cone.as_slice()));
            }
            if e.v[1] == v {
                out.push((e.u.iter().map(|x| -x).collect(), e.cone.as_slice()));
            }
        }
        for l in &self.legs {
            if l.v == Some(v) {
                out.push((l.u.clone(), l.cone.as_slice()));
            }
        }
        out
    }

    /// Total curve class Σ 𝐀(v); missing decorations count as zero.
    pub fn total_class(&self, rank: usize) -> Vec<i64> {
        let mut a = vec![0; rank];
        for v in &self.vertices {
            if let Some(c) = &v.a {
                for (x, y) in a.iter_mut().zip(c) {
                    *x += y;
                }
            }
        }
        a
    }

    /// Checks shapes, incidences and the tree condition.
    pub fn validate(&self, cx: &ConeComplex) -> Result<()> {
        let s = cx.num_divisors();
        let bad = |m: String| Err(Error::InvalidInput(m));
        let nv = self.vertices.len();
        let cone_ok = |c: &[usize]| c.windows(2).all(|w| w[0] < w[1]) && cx.is_cone(c);
        let supported = |u: &[i64], c: &[usize]| u.iter().enumerate().all(|(r, &x)| x == 0 || c.contains(&r));
        for (i, v) in self.vertices.iter().enumerate() {
            if !cone_ok(&v.cone) {
                return bad(format!("vertex {i}: {:?} is not a cone", v.cone));
            }
            if let Some(a) = &v.a {
                if a.len() != cx.curve_rank() {
                    return bad(format!("vertex {i}: class must have {} entries", cx.curve_rank()));
                }
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.v[0] >= nv || e.v[1] >= nv || e.v[0] == e.v[1] {
                return bad(format!("edge {i}: bad endpoints {:?}", e.v));
            }
            if !cone_ok(&e.cone) || e.u.len() != s || !supported(&e.u, &e.cone) {
                return bad(format!("edge {i}: contact order must lie in the lattice of its cone"));
            }
            for &w in &e.v {
                if !self.vertices[w].cone.iter().all(|r| e.cone.contains(r)) {
                    return bad(format!("edge {i}: cone does not contain the cone of vertex {w}"));
                }
            }
        }
        if nv == 0 && self.legs.len() != 1 {
            return bad("a type without vertices has exactly one leg".into());
        }
        for (i, l) in self.legs.iter().enumerate() {
            if !cone_ok(&l.cone) || l.u.len() != s || !supported(&l.u, &l.cone) {
                return bad(format!("leg {i}: contact order must lie in the lattice of its cone"));
            }
            match l.v {
                Some(v) if v < nv => {
                    if !self.vertices[v].cone.iter().all(|r| l.cone.contains(r)) {
                        return bad(format!("leg {i}: cone does not contain the cone of vertex {v}"));
                    }
                }
                None if nv == 0 => {}
                _ => return bad(format!("leg {i}: bad vertex")),
            }
        }
        if nv > 0 {
            if self.edges.len() + 1 != nv {
                return bad("graph is not a tree".into());
            }
            let mut seen = vec![false; nv];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(v) = queue.pop_front() {
                for e in &self.edges {
                    for (a, b) in [(e.v[0], e.v[1]), (e.v[1], e.v[0])] {
                        if a == v && !seen[b] {
                            seen[b] = true;
                            queue.push_back(b);
                        }
                    }
                }
            }
            if seen.iter().any(|x| !x) {
                return bad("graph is not connected".into());
            }
        }
        Ok(())
    }
}

fn max_cone_id(cx: &ConeComplex, rays: &[usize]) -> Option<ConeId> {
    cx.maximal_cones().iter().position(|c| c == rays)
}

fn chart_of(cx: &ConeComplex, sigma: ConeId, u: &[i64]) -> Vec<i64> {
    cx.rays_of(sigma).iter().map(|&r| u[r]).collect()
}

/// Σ 𝐮(E) over the star of `v`, transported into the chart of the first
/// maximal cone containing 𝛔(v). Only defined over codimension ≤ 1 cells.
pub fn vertex_sum(ty: &TropicalType, cx: &ConeComplex, v: usize) -> Result<(ConeId, Vec<i64>)> {
    let cone = &ty.vertices[v].cone;
    if cone.len() + 1 < cx.dim() {
        return Err(Error::VertexInDelta(v));
    }
    let home = *cx.star(cone).first().ok_or(Error::VertexInDelta(v))?;
    let mut sum = vec![0i64; cx.dim()];
    for (u, ec) in ty.star(v) {
        let sigma = max_cone_id(cx, ec).unwrap_or(home);
        let mut w = chart_of(cx, sigma, &u);
        if sigma != home {
            let (m, _) = cx.chart_transition(sigma, home)?;
            w = linalg::mat_vec_i(&m, &w);
        }
        for (a, b) in sum.iter_mut().zip(&w) {
            *a += b;
        }
    }
    Ok((home, sum))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Balance {
    Balanced,
    Unbalanced { vertex: usize, sum: Vec<i64> },
    /// The pushforward to ℝ≥0 fails to balance (relative case).
    UnbalancedRelative { vertex: usize, sum: i64 },
}

impl Balance {
    pub fn holds(&self) -> bool {
        *self == Balance::Balanced
    }
}

/// Balancing at vertices over codimension 0 and 1 cells, and of the
/// pushforward along g_trop in the relative case.
pub fn balancing_check(ty: &TropicalType, cx: &ConeComplex) -> Result<Balance> {
    ty.validate(cx)?;
    for v in 0..ty.vertices.len() {
        if ty.vertices[v].cone.len() + 1 < cx.dim() {
            continue;
        }
        let (_, sum) = vertex_sum(ty, cx, v)?;
        if sum.iter().any(|&x| x != 0) {
            return Ok(Balance::Unbalanced { vertex: v, sum });
        }
    }
    if cx.is_relative() {
        for v in 0..ty.vertices.len() {
            let mut total = 0i64;
            for (u, ec) in ty.star(v) {
                let sigma = *cx.star(ec).first().ok_or(Error::VertexInDelta(v))?;
                let g = cx.g_trop_chart(sigma)?;
                total += linalg::dot_i(&g, &chart_of(cx, sigma, &u));
            }
            if total != 0 {
                return Ok(Balance::UnbalancedRelative { vertex: v, sum: total });
            }
        }
    }
    Ok(Balance::Balanced)
}

/// The universal family of a type: positions h(v) ∈ 𝛔(v) and lengths ℓ_E ≥ 0
/// subject to h(v₁) = h(v₀) + ℓ_E·𝐮(E).
#[derive(Clone, Debug)]
pub struct UniversalCone {
    /// Offset of each vertex's ray coordinates among the variables.
    pub vertex_offsets: Vec<usize>,
    pub edge_offset: usize,
    pub num_vars: usize,
    /// Linear equations on the variables; all variables are nonnegative.
    pub equations: Vec<Vec<i64>>,
    /// A point with every variable positive.
    pub interior: Vec<Q>,
    /// ℤ-basis of the lattice τ^gp_ℤ.
    pub lattice: Vec<Vec<BigInt>>,
    pub dim: usize,
    cones: Vec<Vec<usize>>,
    s: usize,
}

impl UniversalCone {
    /// h(v) in global coordinates at a point of the variable space.
    pub fn position(&self, v: usize, x: &[Q]) -> Vec<Q> {
        let mut g = vec![Q::zero(); self.s];
        for (k, &r) in self.cones[v].iter().enumerate() {
            g[r] = x[self.vertex_offsets[v] + k].clone();
        }
        g
    }

    fn lattice_q(&self) -> Vec<Vec<Q>> {
        self.lattice.iter().map(|b| b.iter().map(|x| Q::from_integer(x.clone())).collect()).collect()
    }

    /// dim h(τ_v).
    pub fn vertex_image_dim(&self, v: usize) -> usize {
        let imgs: Vec<Vec<Q>> = self.lattice_q().iter().map(|b| self.position(v, b)).collect();
        linalg::rank(&imgs)
    }

    /// dim h(τ_L) for a leg at `v` with direction `u`.
    pub fn leg_image_dim(&self, v: usize, u: &[i64]) -> usize {
        let mut imgs: Vec<Vec<Q>> = self.lattice_q().iter().map(|b| self.position(v, b)).collect();
        imgs.push(linalg::to_q(u));
        linalg::rank(&imgs)
    }

    /// h_*: Λ_{τ_L} → Λ_{𝛔(L)} as an integer matrix on the rays of `target`.
    pub fn leg_lattice_map(&self, v: usize, u: &[i64], target: &[usize]) -> IntegerMatrix {
        let mut cols: Vec<Vec<BigInt>> = Vec::new();
        for b in &self.lattice {
            let mut c = vec![BigInt::zero(); self.s];
            for (k, &r) in self.cones[v].iter().enumerate() {
                c[r] = b[self.vertex_offsets[v] + k].clone();
            }
            cols.push(c);
        }
        cols.push(u.iter().map(|&x| BigInt::from(x)).collect());
        let rows: Vec<Vec<BigInt>> = target.iter().map(|&r| cols.iter().map(|c| c[r].clone()).collect()).collect();
        IntegerMatrix::from_rows(&rows, cols.len())
    }
}

/// Integer kernel basis of an equation system, the identity when there are
/// no equations.
fn int_kernel(eqs: &[Vec<i64>], n: usize) -> Vec<Vec<BigInt>> {
    if eqs.is_empty() {
        return (0..n).map(|i| (0..n).map(|j| BigInt::from(i64::from(i == j))).collect()).collect();
    }
    kernel_basis(&IntegerMatrix::from_rows(eqs, n))
}

pub fn universal_cone(ty: &TropicalType, cx: &ConeComplex) -> Result<UniversalCone> {
    ty.validate(cx)?;
    let s = cx.num_divisors();
    let mut vertex_offsets = Vec::new();
    let mut off = 0;
    for v in &ty.vertices {
        vertex_offsets.push(off);
        off += v.cone.len();
    }
    let edge_offset = off;
    let num_vars = off + ty.edges.len();
    let mut equations = Vec::new();
    for (i, e) in ty.edges.iter().enumerate() {
        let (a, b) = (e.v[0], e.v[1]);
        for &r in &e.cone {
            if !ty.vertices[a].cone.contains(&r) && !ty.vertices[b].cone.contains(&r) {
                return Err(Error::Unrealizable);
            }
            let mut row = vec![0i64; num_vars];
            if let Some(k) = ty.vertices[b].cone.iter().position(|&x| x == r) {
                row[vertex_offsets[b] + k] += 1;
            }
            if let Some(k) = ty.vertices[a].cone.iter().position(|&x| x == r) {
                row[vertex_offsets[a] + k] -= 1;
            }
            row[edge_offset + i] -= e.u[r];
            equations.push(row);
        }
    }
    for l in &ty.legs {
        let Some(v) = l.v else { continue };
        if l.cone.iter().any(|r| !ty.vertices[v].cone.contains(r) && l.u[*r] <= 0) {
            return Err(Error::Unrealizable);
        }
    }
    // Positive point: x = 1 + y with y ≥ 0 and A y = −A·1.
    let a: Vec<Vec<Q>> = equations.iter().map(|r| linalg::to_q(r)).collect();
    let rhs: Vec<Q> = equations.iter().map(|r| -q(r.iter().sum::<i64>())).collect();
    let y = if a.is_empty() { vec![Q::zero(); num_vars] } else { lp_feasible(&a, &rhs).ok_or(Error::Unrealizable)? };
    let interior: Vec<Q> = y.iter().map(|v| v + Q::one()).collect();
    let dim = num_vars - linalg::rank(&a);
    Ok(UniversalCone {
        vertex_offsets,
        edge_offset,
        num_vars,
        equations: equations.clone(),
        interior,
        lattice: int_kernel(&equations, num_vars),
        dim,
        cones: ty.vertices.iter().map(|v| v.cone.clone()).collect(),
        s,
    })
}

fn ser_int<S: serde::Serializer>(k: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&k.to_string())
}

fn ser_opt_int<S: serde::Serializer>(k: &Option<BigInt>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match k {
        Some(k) => s.serialize_str(&k.to_string()),
        None => s.serialize_none(),
    }
}

/// Minimal connected subgraph containing all legs, and for types with an
/// incoming and an outgoing leg the vertex path from L_inc to L_out.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Spine {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub path: Option<Vec<usize>>,
}

pub fn spine(ty: &TropicalType) -> Spine {
    let nv = ty.vertices.len();
    let mut alive = vec![true; nv];
    let mut edge_alive = vec![true; ty.edges.len()];
    let has_leg: Vec<bool> = (0..nv).map(|v| ty.legs.iter().any(|l| l.v == Some(v))).collect();
    loop {
        let mut changed = false;
        for v in 0..nv {
            if !alive[v] || has_leg[v] {
                continue;
            }
            let inc: Vec<usize> = (0..ty.edges.len()).filter(|&i| edge_alive[i] && ty.edges[i].v.contains(&v)).collect();
            if inc.len() <= 1 {
                alive[v] = false;
                for i in inc {
                    edge_alive[i] = false;
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let path = match (ty.leg(Role::Inc).and_then(|l| l.v), ty.leg(Role::Out).and_then(|l| l.v)) {
        (Some(a), Some(b)) => tree_path(ty, a, b),
        _ => None,
    };
    Spine {
        vertices: (0..nv).filter(|&v| alive[v]).collect(),
        edges: (0..ty.edges.len()).filter(|&i| edge_alive[i]).collect(),
        path,
    }
}

fn tree_path(ty: &TropicalType, a: usize, b: usize) -> Option<Vec<usize>> {
    let mut prev: BTreeMap<usize, usize> = BTreeMap::new();
    let mut queue = VecDeque::from([a]);
    let mut seen = BTreeSet::from([a]);
    while let Some(v) = queue.pop_front() {
        if v == b {
            let mut path = vec![b];
            let mut cur = b;
            while cur != a {
                cur = prev[&cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for e in &ty.edges {
            for (x, y) in [(e.v[0], e.v[1]), (e.v[1], e.v[0])] {
                if x == v && seen.insert(y) {
                    prev.insert(y, v);
                    queue.push_back(y);
                }
            }
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Wall,
    BrokenLine,
    TrivialBrokenLine,
    DegenerateBrokenLine,
    Product,
    #[serde(rename = "none")]
    Unclassified,
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub kind: Kind,
    pub dim_tau: usize,
    /// dim h(τ_out), or dim h(τ_{v_out}) for product types.
    pub dim_out: Option<usize>,
    #[serde(serialize_with = "ser_opt_int")]
    pub k_tau: Option<BigInt>,
    pub balance: Balance,
    pub admissible: bool,
    pub violations: Vec<String>,
    /// d at each vertex over an interior codimension-one cell.
    pub d_values: Vec<(usize, i64)>,
    pub spine: Spine,
}

impl Classification {
    pub fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("classification serializes");
        v["schema"] = json!(SCHEMA);
        v
    }
}

/// d = Σ δ(𝐮(E)) over the star edges in the first maximal cone containing ρ.
fn d_value(ty: &TropicalType, cx: &ConeComplex, v: usize) -> Option<i64> {
    let rho = &ty.vertices[v].cone;
    let sigma = *cx.star(rho).first()?;
    let rays = cx.rays_of(sigma);
    let extra = *rays.iter().find(|r| !rho.contains(r))?;
    Some(ty.star(v).iter().filter(|(_, c)| *c == rays).map(|(u, _)| u[extra]).sum())
}

fn admissibility(ty: &TropicalType, cx: &ConeComplex) -> (Vec<String>, Vec<(usize, i64)>) {
    let n = cx.dim();
    let mut violations = Vec::new();
    let mut ds = Vec::new();
    for (i, v) in ty.vertices.iter().enumerate() {
        if v.cone.len() == n {
            if let Some(a) = &v.a {
                if a.iter().any(|&x| x != 0) {
                    violations.push(format!("vertex {i} over a maximal cone has A = {a:?}"));
                }
            }
        } else if v.cone.len() + 1 == n {
            let Some(fi) = cx.facet_index(&v.cone) else { continue };
            let facet = &cx.facets()[fi];
            if !facet.is_interior() {
                continue;
            }
            let Some(d) = d_value(ty, cx, i) else { continue };
            ds.push((i, d));
            if let Some(a) = &v.a {
                let want: Vec<i64> = facet.kink.iter().map(|k| d * k).collect();
                if *a != want {
                    violations.push(format!("vertex {i} has A = {a:?}, expected {want:?}"));
                }
            }
        }
    }
    (violations, ds)
}

pub fn classify(ty: &TropicalType, cx: &ConeComplex) -> Result<Classification> {
    let n = cx.dim();
    let sp = spine(ty);
    if ty.is_trivial() {
        ty.validate(cx)?;
        let l = &ty.legs[0];
        let kind = if l.role == Role::Inc && l.u.iter().any(|&x| x != 0) && l.u.iter().all(|&x| x >= 0) {
            Kind::TrivialBrokenLine
        } else {
            Kind::Unclassified
        };
        return Ok(Classification {
            kind,
            dim_tau: 0,
            dim_out: None,
            k_tau: Some(BigInt::one()),
            balance: Balance::Balanced,
            admissible: true,
            violations: vec![],
            d_values: vec![],
            spine: sp,
        });
    }
    let uc = universal_cone(ty, cx)?;
    let balance = balancing_check(ty, cx)?;
    let (violations, d_values) = admissibility(ty, cx);
    let roles: Vec<Role> = ty.legs.iter().map(|l| l.role).collect();
    let count = |r: Role| roles.iter().filter(|&&x| x == r).count();
    let out = ty.leg(Role::Out).filter(|_| count(Role::Out) == 1);
    let mut kind = Kind::Unclassified;
    let mut dim_out = None;
    let mut k_tau = None;
    if let (Some(out), true) = (out, balance.holds()) {
        let v = out.v.expect("validated");
        let lo = uc.leg_image_dim(v, &out.u);
        dim_out = Some(lo);
        let k = cokernel_order(&uc.leg_lattice_map(v, &out.u, &out.cone), true);
        k_tau = k.finite().cloned();
        let nonzero = out.u.iter().any(|&x| x != 0);
        let p_ok = |l: &Leg| l.u.iter().any(|&x| x != 0) && l.u.iter().all(|&x| x >= 0);
        if roles.len() == 1 && nonzero && uc.dim + 2 == n && lo + 1 == n {
            // h(τ_out) must leave ∂B.
            let h = uc.position(v, &uc.interior);
            let low = h.iter().filter(|x| x.is_positive()).min().cloned().unwrap_or_else(Q::one);
            let reach = out.u.iter().map(|x| x.abs()).max().unwrap_or(0) + 1;
            let step = low / q(2 * reach);
            let pt = linalg::add(&h, &linalg::scale(&linalg::to_q(&out.u), &step));
            if !cx.in_boundary(&pt) {
                kind = Kind::Wall;
            }
        } else if roles.len() == 2 && count(Role::Inc) == 1 && nonzero && p_ok(ty.leg(Role::Inc).unwrap()) {
            if uc.dim + 1 == n && lo == n {
                kind = Kind::BrokenLine;
            } else if uc.dim + 2 == n && lo + 1 == n {
                kind = Kind::DegenerateBrokenLine;
            }
        } else if roles.len() == 3 && count(Role::In1) == 1 && count(Role::In2) == 1 {
            let dv = uc.vertex_image_dim(v);
            dim_out = Some(dv);
            if uc.dim == n && dv == n {
                kind = Kind::Product;
            }
        }
    }
    Ok(Classification {
        kind,
        dim_tau: uc.dim,
        dim_out,
        k_tau,
        balance,
        admissible: violations.is_empty(),
        violations,
        d_values,
        spine: sp,
    })
}

/// Grafts two broken line types at a new vertex with outgoing leg −r; `r`
/// is the sum of their final exponents in global coordinates.
pub fn glue_product_type(t1: &TropicalType, t2: &TropicalType, r: &[i64], cx: &ConeComplex) -> Result<TropicalType> {
    let info = |t: &TropicalType| -> Result<(Vec<usize>, Vec<i64>, Option<usize>)> {
        t.validate(cx)?;
        if t.is_trivial() {
            let l = &t.legs[0];
            let sigma = cx.maximal_cones().iter().find(|c| l.cone.iter().all(|x| c.contains(x))).cloned();
            let sigma = sigma.ok_or(Error::IncompatibleOutputs)?;
            return Ok((sigma, l.u.iter().map(|x| -x).collect(), None));
        }
        let out = t.leg(Role::Out).ok_or_else(|| Error::InvalidInput("broken line type needs an outgoing leg".into()))?;
        Ok((out.cone.clone(), out.u.clone(), out.v))
    };
    let (c1, u1, w1) = info(t1)?;
    let (c2, u2, w2) = info(t2)?;
    let sum: Vec<i64> = u1.iter().zip(&u2).map(|(a, b)| a + b).collect();
    let minus_r: Vec<i64> = r.iter().map(|x| -x).collect();
    if c1 != c2 || c1.len() != cx.dim() || sum != minus_r {
        return Err(Error::IncompatibleOutputs);
    }
    let mut out = TropicalType::default();
    let offset = t1.vertices.len();
    let v_out = offset + t2.vertices.len();
    for (t, shift, w, u, role) in [(t1, 0, w1, &u1, Role::In1), (t2, offset, w2, &u2, Role::In2)] {
        out.vertices.extend(t.vertices.iter().cloned());
        for e in &t.edges {
            out.edges.push(Edge { v: [e.v[0] + shift, e.v[1] + shift], cone: e.cone.clone(), u: e.u.clone() });
        }
        let inc = t.legs.iter().find(|l| l.role == Role::Inc).ok_or_else(|| Error::InvalidInput("missing incoming leg".into()))?;
        match w {
            Some(w) => {
                out.legs.push(Leg { v: inc.v.map(|x| x + shift), cone: inc.cone.clone(), u: inc.u.clone(), role });
                out.edges.push(Edge { v: [w + shift, v_out], cone: c1.clone(), u: u.clone() });
            }
            None => out.legs.push(Leg { v: Some(v_out), cone: inc.cone.clone(), u: inc.u.clone(), role }),
        }
    }
    out.vertices.push(Vertex { cone: c1.clone(), a: Some(vec![0; cx.curve_rank()]), label: None });
    out.legs.push(Leg { v: Some(v_out), cone: c1, u: sum, role: Role::Out });
    match universal_cone(&out, cx) {
        Err(Error::Unrealizable) => Err(Error::IncompatibleOutputs),
        Err(e) => Err(e),
        Ok(_) => Ok(out),
    }
}

/// Cone of the vertex standing for a wall: the face met by following the
/// wall backwards from an interior point along −u.
fn wall_base(s: &WallStructure, wall: usize, u: &[i64], fallback: &[usize]) -> Vec<usize> {
    let cx = &*s.complex;
    let w = &s.walls[wall];
    let n = cx.dim();
    let mut x = vec![Q::zero(); n];
    for g in &w.support {
        x = linalg::add(&x, &linalg::to_q(g));
    }
    let g = cx.to_global(&PointInChart::new(w.cone, x));
    let lambda = (0..g.len()).filter(|&r| u[r] > 0).map(|r| &g[r] / q(u[r])).min();
    let Some(lambda) = lambda else { return fallback.to_vec() };
    let b: Vec<Q> = g.iter().zip(u).map(|(a, &c)| a - &lambda * q(c)).collect();
    let base: Vec<usize> = (0..b.len()).filter(|&r| b[r].is_positive()).collect();
    if cx.is_cone(&base) && base.iter().all(|r| fallback.contains(r)) {
        base
    } else {
        fallback.to_vec()
    }
}

/// Term exponents of a bend in global coordinates.
fn term_exponent(s: &WallStructure, wall: usize, term: usize, chart: ConeId) -> Result<Vec<i64>> {
    let cx = &*s.complex;
    let w = &s.walls[wall];
    let t = w.log_terms.get(term).ok_or_else(|| Error::InvalidInput(format!("wall {wall} has no log term {term}")))?;
    let exp = if w.cone == chart {
        t.exp.clone()
    } else {
        let mono = crate::ring::RingElement::monomial(w.cone, t.class.clone(), t.exp.clone(), Q::one());
        let moved = crate::ring::transport(cx, &mono, chart, true, &s.trunc)?;
        let e = moved.terms().next().map(|(m, _)| m.exp.clone()).unwrap_or_else(|| t.exp.clone());
        e
    };
    Ok(broken::to_global_i(cx, chart, &exp))
}

/// The broken line type of a decorated broken line: one spine vertex per
/// bend, and one wall-type vertex per unit of decoration.
pub fn decorated_to_type(s: &WallStructure, line: &BrokenLine) -> Result<TropicalType> {
    if !line.decorated {
        return Err(Error::InvalidInput("only decorated broken lines have types".into()));
    }
    let cx = &*s.complex;
    let rank = cx.curve_rank();
    let global = |cone: ConeId, m: &[i64]| broken::to_global_i(cx, cone, m);
    let first = &line.segments[0];
    let bends: Vec<(usize, &Event)> = line.events.iter().enumerate().filter(|(_, e)| e.is_bend()).collect();
    let mut ty = TropicalType::default();
    if bends.is_empty() {
        ty.legs.push(Leg { v: None, cone: cx.rays_of(first.cone).to_vec(), u: line.p.clone(), role: Role::Inc });
        return Ok(ty);
    }
    for (_, ev) in &bends {
        let (cone, a) = match &ev.crossing {
            Crossing::Walls(_) => (cx.rays_of(ev.cone).to_vec(), vec![0; rank]),
            Crossing::Facet { facet, .. } => {
                let f = &cx.facets()[*facet];
                (f.rays.clone(), f.kink.iter().map(|k| k * ev.pairing).collect())
            }
        };
        ty.vertices.push(Vertex { cone, a: Some(a), label: None });
    }
    for (j, (i, _)) in bends.iter().enumerate().skip(1) {
        let _ = i;
        let seg = &line.segments[bends[j - 1].0 + 1];
        let u: Vec<i64> = global(seg.cone, &seg.exp).iter().map(|x| -x).collect();
        ty.edges.push(Edge { v: [j - 1, j], cone: cx.rays_of(seg.cone).to_vec(), u });
    }
    for (j, (_, ev)) in bends.iter().enumerate() {
        let (chart, spine_cone) = match &ev.crossing {
            Crossing::Walls(_) => (ev.cone, cx.rays_of(ev.cone).to_vec()),
            Crossing::Facet { facet, from } => (*from, cx.facets()[*facet].rays.clone()),
        };
        for m in &ev.mu {
            let u: Vec<i64> = term_exponent(s, m.wall, m.term, chart)?.iter().map(|x| -x).collect();
            let edge_cone = if u.iter().enumerate().all(|(r, &x)| x == 0 || spine_cone.contains(&r)) {
                spine_cone.clone()
            } else {
                cx.rays_of(chart).to_vec()
            };
            let class = s.walls[m.wall].log_terms[m.term].class.clone();
            let base = wall_base(s, m.wall, &u, &edge_cone);
            for _ in 0..m.count {
                let w = ty.vertices.len();
                ty.vertices.push(Vertex { cone: base.clone(), a: Some(class.clone()), label: Some([m.wall, m.term]) });
                ty.edges.push(Edge { v: [w, j], cone: edge_cone.clone(), u: u.clone() });
            }
        }
    }
    let last = line.last();
    ty.legs.push(Leg { v: Some(0), cone: cx.rays_of(first.cone).to_vec(), u: line.p.clone(), role: Role::Inc });
    ty.legs.push(Leg {
        v: Some(bends.len() - 1),
        cone: cx.rays_of(last.cone).to_vec(),
        u: global(last.cone, &last.exp).iter().map(|x| -x).collect(),
        role: Role::Out,
    });
    Ok(ty)
}

/// Decoration at a spine vertex read off its labelled neighbours.
fn mu_at(ty: &TropicalType, v: usize) -> Vec<MuEntry> {
    let mut counts: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for e in &ty.edges {
        let other = if e.v[1] == v { e.v[0] } else if e.v[0] == v { e.v[1] } else { continue };
        if let Some([w, t]) = ty.vertices[other].label {
            *counts.entry((w, t)).or_default() += 1;
        }
    }
    counts.into_iter().map(|((wall, term), count)| MuEntry { wall, term, count }).collect()
}

/// The decorated broken line of a broken line type through the endpoint
/// `x`, traced back from x and bending exactly at the spine vertices.
pub fn type_to_line(s: &WallStructure, ty: &TropicalType, x: &PointInChart, opts: &EnumOptions) -> Result<BrokenLine> {
    let cx = &*s.complex;
    ty.validate(cx)?;
    let inc = ty.leg(Role::Inc).ok_or_else(|| Error::InvalidInput("type has no incoming leg".into()))?;
    let (out_u, out_cone) = match ty.leg(Role::Out) {
        Some(l) => (l.u.clone(), l.cone.clone()),
        None if ty.is_trivial() => (inc.u.iter().map(|v| -v).collect(), inc.cone.clone()),
        None => return Err(Error::InvalidInput("type has no outgoing leg".into())),
    };
    let rays = cx.rays_of(x.cone);
    if !out_cone.iter().all(|r| rays.contains(r)) || out_u.iter().enumerate().any(|(r, &v)| v != 0 && !rays.contains(&r)) {
        return Err(Error::EndpointOutsideFamily);
    }
    let final_exp: Vec<i64> = chart_of(cx, x.cone, &out_u).iter().map(|v| -v).collect();
    let class = ty.total_class(cx.curve_rank());
    let path = if ty.is_trivial() { vec![] } else { spine(ty).path.ok_or_else(|| Error::InvalidInput("no spine path".into()))? };
    let r = path.len();
    let wanted: Vec<(Vec<usize>, Vec<MuEntry>)> = path.iter().map(|&v| (ty.vertices[v].cone.clone(), mu_at(ty, v))).collect();
    let guide = |done: usize, ev: &Event| -> bool {
        if !ev.is_bend() {
            return true;
        }
        if done >= r {
            return false;
        }
        let (cone, mu) = &wanted[r - 1 - done];
        let here = match &ev.crossing {
            Crossing::Walls(_) => cx.rays_of(ev.cone).to_vec(),
            Crossing::Facet { facet, .. } => cx.facets()[*facet].rays.clone(),
        };
        let mut got = ev.mu.clone();
        got.sort();
        here == *cone && got == *mu
    };
    let mut o = opts.clone();
    o.decorated = true;
    let mut lines = broken::trace_guided(s, &inc.u, x, &class, &final_exp, &o, &guide)?;
    lines.retain(|l| l.bends().count() == r);
    match lines.len() {
        0 => Err(Error::EndpointOutsideFamily),
        1 => Ok(lines.pop().unwrap()),
        k => Err(Error::InvalidInput(format!("type determines {k} broken lines at this endpoint"))),
    }
}

/// A split type for the gluing formula: pieces ω̃_v in lattice coordinates,
/// gluing edges with lattices Λ_E, and the matching map ε^gp.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gluing {
    /// rk (ω̃_v^gp)_ℤ per piece.
    pub pieces: Vec<usize>,
    /// Cone of each piece as inequalities `c·y ≥ 0` on its coordinates.
    #[serde(default)]
    pub cones: Vec<Vec<Vec<i64>>>,
    /// rk Λ_E per gluing edge.
    pub edges: Vec<usize>,
    /// ε^gp with Σ rk Λ_E rows and Σ rk ω̃_v columns.
    pub eps: Vec<Vec<i64>>,
}

impl Gluing {
    fn cols(&self) -> usize {
        self.pieces.iter().sum()
    }

    fn rows(&self) -> usize {
        self.edges.iter().sum()
    }

    fn check(&self) -> Result<()> {
        if self.eps.len() != self.rows() || self.eps.iter().any(|r| r.len() != self.cols()) {
            return Err(Error::InvalidInput("ε has the wrong shape".into()));
        }
        if !self.cones.is_empty() && self.cones.len() != self.pieces.len() {
            return Err(Error::InvalidInput("one cone per piece".into()));
        }
        for (c, &k) in self.cones.iter().zip(&self.pieces) {
            if c.iter().any(|h| h.len() != k) {
                return Err(Error::InvalidInput("cone inequality has the wrong length".into()));
            }
        }
        Ok(())
    }

    /// Inequalities of ∏ ω̃_v on the concatenated coordinates.
    fn inequalities(&self) -> Vec<Vec<Q>> {
        let mut out = Vec::new();
        let mut off = 0;
        for (i, &k) in self.pieces.iter().enumerate() {
            for h in self.cones.get(i).map(Vec::as_slice).unwrap_or(&[]) {
                let mut row = vec![Q::zero(); self.cols()];
                for (j, &c) in h.iter().enumerate() {
                    row[off + j] = q(c);
                }
                out.push(row);
            }
            off += k;
        }
        out
    }

    fn eps_q(&self) -> Vec<Vec<Q>> {
        self.eps.iter().map(|r| linalg::to_q(r)).collect()
    }
}

/// A point of `{y : E y = b, C y ≥ 0}` with free `y`.
fn feasible_free(eq: &[Vec<Q>], rhs: &[Q], ineq: &[Vec<Q>], cols: usize) -> Option<Vec<Q>> {
    // Variables y⁺, y⁻, slacks.
    let m = ineq.len();
    let width = 2 * cols + m;
    let mut rows = Vec::new();
    let mut b = Vec::new();
    for (r, v) in eq.iter().zip(rhs) {
        let mut row = vec![Q::zero(); width];
        for j in 0..cols {
            row[j] = r[j].clone();
            row[cols + j] = -r[j].clone();
        }
        rows.push(row);
        b.push(v.clone());
    }
    for (i, h) in ineq.iter().enumerate() {
        let mut row = vec![Q::zero(); width];
        for j in 0..cols {
            row[j] = h[j].clone();
            row[cols + j] = -h[j].clone();
        }
        row[2 * cols + i] = -Q::one();
        rows.push(row);
        b.push(Q::zero());
    }
    if rows.is_empty() {
        return Some(vec![Q::zero(); cols]);
    }
    let z = lp_feasible(&rows, &b)?;
    Some((0..cols).map(|j| &z[j] - &z[cols + j]).collect())
}

/// Dimension of `{y : E y = 0, C y ≥ 0}`.
fn cone_dim(eq: &[Vec<Q>], ineq: &[Vec<Q>], cols: usize) -> usize {
    let mut tight: Vec<Vec<Q>> = eq.to_vec();
    for h in ineq {
        let mut e = eq.to_vec();
        e.push(h.clone());
        let mut rhs = vec![Q::zero(); eq.len()];
        rhs.push(Q::one());
        if feasible_free(&e, &rhs, ineq, cols).is_none() {
            tight.push(h.clone());
        }
    }
    cols - linalg::rank(&tight)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Multiplicity {
    /// [∏ Λ_E : im ε^gp].
    #[serde(serialize_with = "ser_int")]
    pub index: BigInt,
    /// dim τ̃ = dim (ε^{-1}(0) ∩ ∏ ω̃_v).
    pub dim_tau: usize,
    pub dimension_formula: bool,
}

pub fn splitting_multiplicity(g: &Gluing) -> Result<Multiplicity> {
    g.check()?;
    let e = g.eps_q();
    if linalg::rank(&e) < g.rows() {
        return Err(Error::RankDeficient);
    }
    let index = match cokernel_order(&IntegerMatrix::from_rows(&g.eps, g.cols()), false) {
        GroupOrder::Finite(k) => k,
        GroupOrder::Infinite => return Err(Error::RankDeficient),
    };
    let dim_tau = cone_dim(&e, &g.inequalities(), g.cols());
    Ok(Multiplicity { index, dim_tau, dimension_formula: g.cols() == dim_tau + g.rows() })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TransverseReport {
    pub surjective: bool,
    /// ν ∈ ε(∏ ω̃_v).
    pub in_image: bool,
    /// ν ∈ im ε^gp ⊗ ℚ.
    pub in_span: bool,
    pub dimension_formula: bool,
    pub member: bool,
}

/// Membership of each candidate in Δ(ν), and whether ν is general for the
/// candidate list.
pub fn transverse_check(candidates: &[Gluing], nu: &[Q]) -> Result<(Vec<TransverseReport>, bool)> {
    let mut out = Vec::new();
    let mut general = true;
    for g in candidates {
        g.check()?;
        if nu.len() != g.rows() {
            return Err(Error::InvalidInput("ν has the wrong length".into()));
        }
        let e = g.eps_q();
        let rank = linalg::rank(&e);
        let surjective = rank == g.rows();
        let cols: Vec<Vec<Q>> = (0..g.cols()).map(|j| e.iter().map(|r| r[j].clone()).collect()).collect();
        let in_span = linalg::solve_combination(&cols, nu).is_some();
        let ineq = g.inequalities();
        let in_image = feasible_free(&e, nu, &ineq, g.cols()).is_some();
        let dim_tau = cone_dim(&e, &ineq, g.cols());
        let dimension_formula = g.cols() == dim_tau + g.rows();
        general &= surjective || !in_span;
        out.push(TransverseReport { surjective, in_image, in_span, dimension_formula, member: in_image && dimension_formula });
    }
    Ok((out, general))
}

/// Splits a realizable type at the given edges. Each piece is the universal
/// cone of a component, enlarged by a point on every cut leg.
pub fn split_type(ty: &TropicalType, cx: &ConeComplex, cut: &[usize]) -> Result<Gluing> {
    let uc = universal_cone(ty, cx)?;
    let nv = ty.vertices.len();
    // Components after cutting.
    let mut comp = vec![usize::MAX; nv];
    let mut ncomp = 0;
    for start in 0..nv {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = ncomp;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for (i, e) in ty.edges.iter().enumerate() {
                if cut.contains(&i) {
                    continue;
                }
                for (a, b) in [(e.v[0], e.v[1]), (e.v[1], e.v[0])] {
                    if a == v && comp[b] == usize::MAX {
                        comp[b] = ncomp;
                        queue.push_back(b);
                    }
                }
            }
        }
        ncomp += 1;
    }
    // Ambient variables of each piece: its vertex coordinates, kept edge
    // lengths, then one leg parameter per cut end.
    let mut pieces = Vec::new();
    let mut cones = Vec::new();
    let mut embed: Vec<Vec<Vec<BigInt>>> = Vec::new();
    let mut var_of: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); ncomp];
    let mut leg_var: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for c in 0..ncomp {
        let mut vars: Vec<usize> = Vec::new();
        for v in (0..nv).filter(|&v| comp[v] == c) {
            for k in 0..ty.vertices[v].cone.len() {
                vars.push(uc.vertex_offsets[v] + k);
            }
        }
        for (i, e) in ty.edges.iter().enumerate() {
            if !cut.contains(&i) && comp[e.v[0]] == c {
                vars.push(uc.edge_offset + i);
            }
        }
        let base = vars.len();
        for (j, &i) in cut.iter().enumerate() {
            for side in 0..2 {
                if comp[ty.edges[i].v[side]] == c {
                    leg_var.insert((j, side), (c, vars.len() + leg_var.iter().filter(|(_, (cc, _))| *cc == c).count() - base + base));
                }
            }
        }
        let nlegs = leg_var.values().filter(|(cc, _)| *cc == c).count();
        let total = base + nlegs;
        for (k, &x) in vars.iter().enumerate() {
            var_of[c].insert(x, k);
        }
        // Equations of the piece restricted to its own variables.
        let eqs: Vec<Vec<i64>> = uc
            .equations
            .iter()
            .filter(|row| row.iter().enumerate().all(|(x, &a)| a == 0 || var_of[c].contains_key(&x)))
            .filter(|row| row.iter().any(|&a| a != 0))
            .map(|row| {
                let mut r = vec![0i64; total];
                for (x, &a) in row.iter().enumerate() {
                    if a != 0 {
                        r[var_of[c][&x]] = a;
                    }
                }
                r
            })
            .collect();
        let basis = int_kernel(&eqs, total);
        pieces.push(basis.len());
        cones.push(
            (0..total)
                .map(|x| basis.iter().map(|b| b[x].to_i64().ok_or_else(|| Error::InvalidInput("lattice entry overflow".into()))).collect())
                .collect::<Result<Vec<Vec<i64>>>>()?,
        );
        embed.push(basis);
    }
    let offsets: Vec<usize> = pieces.iter().scan(0, |acc, &k| {
        let o = *acc;
        *acc += k;
        Some(o)
    }).collect();
    let cols: usize = pieces.iter().sum();
    let mut eps: Vec<Vec<i64>> = Vec::new();
    let mut edges = Vec::new();
    for (j, &i) in cut.iter().enumerate() {
        let e = &ty.edges[i];
        edges.push(e.cone.len());
        for &r in &e.cone {
            let mut row = vec![BigInt::zero(); cols];
            // h(v₀) + λ₀u − h(v₁) + λ₁u.
            for side in 0..2 {
                let v = e.v[side];
                let c = comp[v];
                let sign = if side == 0 { 1 } else { -1 };
                let mut amb = vec![0i64; embed[c].first().map_or(0, Vec::len)];
                if let Some(k) = ty.vertices[v].cone.iter().position(|&x| x == r) {
                    amb[var_of[c][&(uc.vertex_offsets[v] + k)]] += sign;
                }
                let (_, lv) = leg_var[&(j, side)];
                amb[lv] += e.u[r];
                for (b, basis) in embed[c].iter().enumerate() {
                    let val: BigInt = amb.iter().zip(basis).map(|(a, x)| BigInt::from(*a) * x).sum();
                    row[offsets[c] + b] += val;
                }
            }
            eps.push(row.iter().map(|x| x.to_i64().expect("small entries")).collect());
        }
    }
    Ok(Gluing { pieces, cones, edges, eps })
}

/// A bend configuration: an incoming broken line type glued to `l` wall
/// types along a wall with primitive normal δ, over a maximal cell
/// (`codim = 0`) or across a codimension-one cell (`codim = 1`). Evaluation
/// maps are integer matrices given by their columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BendConfig {
    pub delta: Vec<i64>,
    pub codim: u8,
    pub u_inc: Vec<i64>,
    pub ev_inc: Vec<Vec<i64>>,
    pub walls: Vec<WallPiece>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallPiece {
    pub u: Vec<i64>,
    pub ev: Vec<Vec<i64>>,
}

fn columns_to_matrix(cols: &[Vec<i64>], n: usize) -> IntegerMatrix {
    let rows: Vec<Vec<i64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    IntegerMatrix::from_rows(&rows, cols.len())
}

fn finite(o: GroupOrder) -> Result<BigInt> {
    match o {
        GroupOrder::Finite(k) => Ok(k),
        GroupOrder::Infinite => Err(Error::RankDeficient),
    }
}

impl BendConfig {
    pub fn n(&self) -> usize {
        self.delta.len()
    }

    pub fn d(&self) -> i64 {
        linalg::dot_i(&self.delta, &self.u_inc).abs()
    }

    fn check(&self) -> Result<()> {
        let n = self.n();
        let bad = |m: &str| Err(Error::InvalidInput(m.into()));
        if n == 0 || self.codim > 1 || self.u_inc.len() != n {
            return bad("bend configuration has inconsistent sizes");
        }
        if self.d() == 0 {
            return bad("incoming direction must cross the wall");
        }
        if self.ev_inc.iter().any(|c| c.len() != n) {
            return bad("ev_inc columns must lie in Λ");
        }
        for w in &self.walls {
            if w.u.len() != n || w.ev.iter().chain([&w.u]).any(|c| c.len() != n || linalg::dot_i(&self.delta, c) != 0) {
                return bad("wall data must lie in Λ_𝔭");
            }
        }
        Ok(())
    }

    /// u'_i = u_inc + u_1 + … + u_i.
    fn partial(&self, i: usize) -> Vec<i64> {
        let mut u = self.u_inc.clone();
        for w in &self.walls[..i] {
            u = u.iter().zip(&w.u).map(|(a, b)| a + b).collect();
        }
        u
    }

    /// ℤ-basis of Λ_𝔭 = ker δ.
    fn wall_lattice(&self) -> Vec<Vec<i64>> {
        kernel_basis(&IntegerMatrix::from_rows(&[self.delta.clone()], self.n()))
            .into_iter()
            .map(|c| c.iter().map(|x| x.to_i64().expect("small entries")).collect())
            .collect()
    }

    /// The gluing map Φ with pieces τ̃_inc, ω̃₀, τ̃_1, …, τ̃_l.
    pub fn gluing(&self) -> Result<Gluing> {
        self.check()?;
        let n = self.n();
        let l = self.walls.len();
        let a = self.ev_inc.len();
        // Codimension-zero coordinates of ω̃₀: m, ℓ_1..ℓ_l, ℓ'_0..ℓ'_{l−1}.
        let w0 = n + 2 * l;
        let mut phi0: Vec<Vec<i64>> = Vec::new();
        let bs: Vec<usize> = self.walls.iter().map(|w| w.ev.len()).collect();
        let cols0 = a + w0 + bs.iter().sum::<usize>();
        let wall_off: Vec<usize> = bs.iter().scan(a + w0, |acc, &b| {
            let o = *acc;
            *acc += b;
            Some(o)
        }).collect();
        for i in 0..n {
            let mut row = vec![0i64; cols0];
            for (j, c) in self.ev_inc.iter().enumerate() {
                row[j] = c[i];
            }
            row[a + i] = -1;
            phi0.push(row);
        }
        for (k, w) in self.walls.iter().enumerate() {
            for i in 0..n {
                let mut row = vec![0i64; cols0];
                for (j, c) in w.ev.iter().enumerate() {
                    row[wall_off[k] + j] = c[i];
                }
                row[a + i] = -1;
                row[a + n + k] = -w.u[i];
                for jj in 0..=k {
                    row[a + n + l + jj] = -self.partial(jj)[i];
                }
                phi0.push(row);
            }
        }
        let (omega_rank, omega_cone, phi) = if self.codim == 0 {
            let mut cone = Vec::new();
            for j in n..w0 {
                cone.push((0..w0).map(|x| i64::from(x == j)).collect::<Vec<i64>>());
            }
            (w0, cone, phi0)
        } else {
            // Ψ: (m_𝔭, ℓ, ℓ'_0..ℓ'_l) ↦ (m_𝔭 − Σ ℓ'_i u'_i, ℓ, ℓ'_0..ℓ'_{l−1}).
            let basis = self.wall_lattice();
            let w1 = (n - 1) + l + (l + 1);
            let mut psi = vec![vec![0i64; w1]; w0];
            for i in 0..n {
                for (j, b) in basis.iter().enumerate() {
                    psi[i][j] = b[i];
                }
                for jj in 0..=l {
                    psi[i][(n - 1) + l + jj] = -self.partial(jj)[i];
                }
            }
            for k in 0..l {
                psi[n + k][(n - 1) + k] = 1;
            }
            for jj in 0..l {
                psi[n + l + jj][(n - 1) + l + jj] = 1;
            }
            let mut phi = Vec::new();
            for row in &phi0 {
                let mut r = Vec::with_capacity(a + w1);
                r.extend_from_slice(&row[..a]);
                for c in 0..w1 {
                    r.push((0..w0).map(|x| row[a + x] * psi[x][c]).sum());
                }
                r.extend_from_slice(&row[a + w0..]);
                phi.push(r);
            }
            let mut cone = Vec::new();
            for j in (n - 1)..w1 {
                cone.push((0..w1).map(|x| i64::from(x == j)).collect::<Vec<i64>>());
            }
            (w1, cone, phi)
        };
        let mut pieces = vec![a, omega_rank];
        pieces.extend(&bs);
        let mut cones = vec![vec![], omega_cone];
        cones.extend(bs.iter().map(|_| vec![]));
        Ok(Gluing { pieces, cones, edges: vec![n; l + 1], eps: phi })
    }

    pub fn k_inc(&self) -> Result<BigInt> {
        finite(cokernel_order(&columns_to_matrix(&self.ev_inc, self.n()), false))
    }

    /// k_{τ_i}: index of ev_i in Λ_𝔭.
    pub fn k_wall(&self, i: usize) -> Result<BigInt> {
        let basis: Vec<Vec<Q>> = self.wall_lattice().iter().map(|b| linalg::to_q(b)).collect();
        let coords: Vec<Vec<i64>> = self.walls[i]
            .ev
            .iter()
            .map(|c| {
                let x = linalg::solve_combination(&basis, &linalg::to_q(c)).ok_or_else(|| Error::InvalidInput("ev not in Λ_𝔭".into()))?;
                x.iter().map(|v| v.to_integer().to_i64().ok_or(Error::RankDeficient)).collect()
            })
            .collect::<Result<_>>()?;
        finite(cokernel_order(&columns_to_matrix(&coords, self.n() - 1), false))
    }

    /// k_τ of the glued type: index of (h, λ) ↦ V(h) + λ·u_out, with τ^gp
    /// read off as the kernel of the gluing map.
    pub fn k_glued(&self) -> Result<BigInt> {
        let g = self.gluing()?;
        let n = self.n();
        let l = self.walls.len();
        let a = self.ev_inc.len();
        let ker = int_kernel(&g.eps, g.cols());
        let mut cols: Vec<Vec<i64>> = Vec::new();
        for k in &ker {
            let k: Vec<i64> = k.iter().map(|x| x.to_i64().expect("small entries")).collect();
            let v = if self.codim == 0 {
                let mut v: Vec<i64> = k[a..a + n].to_vec();
                for j in 0..l {
                    let u = self.partial(j);
                    for i in 0..n {
                        v[i] += k[a + n + l + j] * u[i];
                    }
                }
                v
            } else {
                let basis = self.wall_lattice();
                (0..n).map(|i| basis.iter().enumerate().map(|(j, b)| k[a + j] * b[i]).sum()).collect()
            };
            cols.push(v);
        }
        cols.push(self.partial(l));
        finite(cokernel_order(&columns_to_matrix(&cols, n), false))
    }

    /// k_τ^{-1} k_{τ_inc} ∏ (d k_{τ_i}), times d across a codimension-one cell.
    pub fn closed_form(&self) -> Result<Q> {
        self.check()?;
        let d = BigInt::from(self.d());
        let mut num = self.k_inc()?;
        for i in 0..self.walls.len() {
            num *= &d * self.k_wall(i)?;
        }
        if self.codim == 1 {
            num *= &d;
        }
        Ok(Q::new(num, self.k_glued()?))
    }
}

/// A random bend configuration with `l` walls in dimension `n`.
pub fn random_bend_config<R: rand::Rng>(rng: &mut R, n: usize, l: usize, codim: u8) -> BendConfig {
    let vec_in = |rng: &mut R, lo: i64, hi: i64| -> Vec<i64> { (0..n).map(|_| rng.gen_range(lo..=hi)).collect() };
    loop {
        let delta = vec_in(rng, -2, 2);
        if linalg::primitive_i(&delta) != delta || delta.iter().all(|&x| x == 0) {
            continue;
        }
        let u_inc = vec_in(rng, -3, 3);
        if linalg::dot_i(&delta, &u_inc) == 0 {
            continue;
        }
        let mut ev_inc = vec![u_inc.clone()];
        for _ in 0..n {
            ev_inc.push(vec_in(rng, -2, 2));
        }
        let basis: Vec<Vec<i64>> = kernel_basis(&IntegerMatrix::from_rows(&[delta.clone()], n))
            .into_iter()
            .map(|c| c.iter().map(|x| x.to_i64().unwrap()).collect())
            .collect();
        let in_wall = |rng: &mut R| -> Vec<i64> {
            let c: Vec<i64> = (0..basis.len()).map(|_| rng.gen_range(-2..=2)).collect();
            (0..n).map(|i| basis.iter().zip(&c).map(|(b, k)| b[i] * k).sum()).collect()
        };
        let mut walls = Vec::new();
        for _ in 0..l {
            let u = in_wall(rng);
            let mut ev = vec![u.clone()];
            for _ in 0..n.saturating_sub(2) {
                ev.push(in_wall(rng));
            }
            walls.push(WallPiece { u, ev });
        }
        let cfg = BendConfig { delta, codim, u_inc, ev_inc, walls };
        let usable = cfg.k_inc().is_ok()
            && (0..l).all(|i| cfg.k_wall(i).is_ok())
            && cfg.gluing().ok().and_then(|g| splitting_multiplicity(&g).ok()).is_some()
            && cfg.k_glued().is_ok();
        if usable {
            return cfg;
        }
    }
}

pub fn multiplicity_json(cfg: &BendConfig) -> Result<Value> {
    let g = cfg.gluing()?;
    let m = splitting_multiplicity(&g)?;
    let closed = cfg.closed_form()?;
    Ok(json!({
        "schema": SCHEMA,
        "codim": cfg.codim,
        "l": cfg.walls.len(),
        "d": cfg.d(),
        "k_inc": cfg.k_inc()?.to_string(),
        "k_walls": (0..cfg.walls.len()).map(|i| cfg.k_wall(i).map(|k| k.to_string())).collect::<Result<Vec<_>>>()?,
        "k_tau": cfg.k_glued()?.to_string(),
        "direct": m.index.to_string(),
        "closed_form": fmt_q(&closed),
        "dimension_formula": m.dimension_formula,
        "agree": Q::from_integer(m.index.clone()) == closed,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_complex, Divisor, GeometryInput};
    use crate::ring::{Monomial, RingElement, Truncation};
    use crate::walls::Wall;
    use std::sync::Arc;

    fn orthant(n: usize) -> ConeComplex {
        let divisors = (0..n).map(|i| Divisor { name: format!("D{i}"), a: Q::zero(), b: None }).collect();
        build_complex(&GeometryInput {
            schema: None,
            n,
            curve_rank: 1,
            divisors,
            good_strata: vec![(0..n).collect()],
            intersections: vec![],
            kinks: vec![],
            relative: false,
        })
        .unwrap()
    }

    fn quadrant_walls() -> WallStructure {
        let cx = Arc::new(orthant(2));
        let trunc = Truncation::degree(1, 1);
        let f = RingElement::from_terms(0, [(Monomial::new(vec![0], vec![0, 0]), q(1)), (Monomial::new(vec![1], vec![-1, -1]), q(1))], &trunc);
        let mut s = WallStructure::new(cx.clone(), trunc.clone());
        s.walls.push(Wall::new(&cx, 0, vec![vec![1, 1]], f, &trunc).unwrap());
        s
    }

    fn vtx(cone: &[usize]) -> Vertex {
        Vertex { cone: cone.to_vec(), a: None, label: None }
    }

    fn leg(v: usize, cone: &[usize], u: &[i64], role: Role) -> Leg {
        Leg { v: Some(v), cone: cone.to_vec(), u: u.to_vec(), role }
    }

    fn bent() -> TropicalType {
        TropicalType {
            vertices: vec![Vertex { cone: vec![0, 1], a: Some(vec![0]), label: None }, Vertex { cone: vec![], a: Some(vec![1]), label: Some([0, 0]) }],
            edges: vec![Edge { v: [1, 0], cone: vec![0, 1], u: vec![1, 1] }],
            legs: vec![leg(0, &[0, 1], &[1, 0], Role::Inc), leg(0, &[0, 1], &[0, 1], Role::Out)],
        }
    }

    #[test]
    fn two_legs_balance() {
        let cx = orthant(2);
        let t = TropicalType { vertices: vec![vtx(&[0, 1])], edges: vec![], legs: vec![leg(0, &[0, 1], &[1, 2], Role::Inc), leg(0, &[0, 1], &[-1, -2], Role::Out)] };
        assert!(balancing_check(&t, &cx).unwrap().holds());
    }

    #[test]
    fn three_legs_unbalanced() {
        let cx = orthant(2);
        let t = TropicalType {
            vertices: vec![vtx(&[0, 1])],
            edges: vec![],
            legs: vec![leg(0, &[0, 1], &[1, 0], Role::Other), leg(0, &[0, 1], &[1, 1], Role::Other), leg(0, &[0, 1], &[-1, -1], Role::Other)],
        };
        assert_eq!(balancing_check(&t, &cx).unwrap(), Balance::Unbalanced { vertex: 0, sum: vec![1, 0] });
    }

    #[test]
    fn vertex_in_maximal_cone_has_full_dimension() {
        let cx = orthant(2);
        let t = TropicalType { vertices: vec![vtx(&[0, 1])], edges: vec![], legs: vec![leg(0, &[0, 1], &[1, 1], Role::Out)] };
        let uc = universal_cone(&t, &cx).unwrap();
        assert_eq!(uc.dim, 2);
        assert_eq!(uc.leg_image_dim(0, &[1, 1]), 2);
    }

    #[test]
    fn vertex_on_a_ray() {
        let cx = orthant(2);
        let t = TropicalType { vertices: vec![vtx(&[0])], edges: vec![], legs: vec![leg(0, &[0, 1], &[0, 1], Role::Out)] };
        assert_eq!(universal_cone(&t, &cx).unwrap().dim, 1);
    }

    #[test]
    fn leg_leaving_its_cone_is_unrealizable() {
        let cx = orthant(2);
        let t = TropicalType { vertices: vec![vtx(&[0])], edges: vec![], legs: vec![leg(0, &[0, 1], &[1, -1], Role::Out)] };
        assert_eq!(universal_cone(&t, &cx).unwrap_err(), Error::Unrealizable);
    }

    #[test]
    fn wall_type_index_is_the_multiple() {
        let cx = orthant(2);
        for k in 1..5 {
            let t = TropicalType { vertices: vec![vtx(&[])], edges: vec![], legs: vec![leg(0, &[0, 1], &[k, 2 * k], Role::Out)] };
            let c = classify(&t, &cx).unwrap();
            assert_eq!(c.kind, Kind::Wall);
            assert_eq!(c.k_tau, Some(BigInt::from(k)));
        }
    }

    #[test]
    fn trivial_broken_line() {
        let cx = orthant(2);
        let t = TropicalType { vertices: vec![], edges: vec![], legs: vec![Leg { v: None, cone: vec![0, 1], u: vec![1, 0], role: Role::Inc }] };
        let c = classify(&t, &cx).unwrap();
        assert_eq!(c.kind, Kind::TrivialBrokenLine);
        assert_eq!(c.k_tau, Some(BigInt::one()));
    }

    #[test]
    fn bent_fixture_is_a_broken_line_type() {
        let cx = orthant(2);
        let c = classify(&bent(), &cx).unwrap();
        assert_eq!(c.kind, Kind::BrokenLine);
        assert_eq!((c.dim_tau, c.dim_out), (1, Some(2)));
        assert_eq!(c.k_tau, Some(BigInt::one()));
        assert!(c.admissible);
        assert_eq!(c.spine.vertices, vec![0]);
        assert_eq!(c.spine.path, Some(vec![0]));
    }

    #[test]
    fn pinned_vertex_gives_degenerate_line() {
        // Both legs from the apex.
        let cx = orthant(2);
        let t = TropicalType { vertices: vec![vtx(&[])], edges: vec![], legs: vec![leg(0, &[0], &[1, 0], Role::Inc), leg(0, &[0, 1], &[1, 1], Role::Out)] };
        assert_eq!(classify(&t, &cx).unwrap().kind, Kind::DegenerateBrokenLine);
    }

    #[test]
    fn spine_drops_branches() {
        let t = TropicalType {
            vertices: vec![vtx(&[0, 1]), vtx(&[0, 1]), vtx(&[0, 1]), vtx(&[0, 1])],
            edges: vec![
                Edge { v: [0, 1], cone: vec![0, 1], u: vec![1, 0] },
                Edge { v: [1, 2], cone: vec![0, 1], u: vec![1, 0] },
                Edge { v: [3, 1], cone: vec![0, 1], u: vec![0, 1] },
            ],
            legs: vec![leg(0, &[0, 1], &[1, 0], Role::Inc), leg(2, &[0, 1], &[1, 0], Role::Out)],
        };
        let sp = spine(&t);
        assert_eq!(sp.vertices, vec![0, 1, 2]);
        assert_eq!(sp.edges, vec![0, 1]);
        assert_eq!(sp.path, Some(vec![0, 1, 2]));
    }

    #[test]
    fn product_of_trivial_lines() {
        let cx = orthant(2);
        let triv = |p: &[i64]| TropicalType { vertices: vec![], edges: vec![], legs: vec![Leg { v: None, cone: vec![0, 1], u: p.to_vec(), role: Role::Inc }] };
        let g = glue_product_type(&triv(&[1, 0]), &triv(&[0, 1]), &[1, 1], &cx).unwrap();
        assert_eq!(g.vertices.len(), 1);
        let c = classify(&g, &cx).unwrap();
        assert_eq!(c.kind, Kind::Product);
        assert_eq!(
            glue_product_type(&triv(&[1, 0]), &triv(&[0, 1]), &[2, 1], &cx).unwrap_err(),
            Error::IncompatibleOutputs
        );
    }

    #[test]
    fn product_with_a_bent_line() {
        let cx = orthant(2);
        let triv = TropicalType { vertices: vec![], edges: vec![], legs: vec![Leg { v: None, cone: vec![0, 1], u: vec![1, 0], role: Role::Inc }] };
        let g = glue_product_type(&bent(), &triv, &[1, -1], &cx).unwrap();
        let c = classify(&g, &cx).unwrap();
        assert_eq!(c.kind, Kind::Product);
        assert!(c.spine.vertices.contains(&0));
    }

    #[test]
    fn free_gluing_has_multiplicity_one() {
        let g = Gluing { pieces: vec![2, 2], cones: vec![], edges: vec![2], eps: vec![vec![1, 0, -1, 0], vec![0, 1, 0, -1]] };
        let m = splitting_multiplicity(&g).unwrap();
        assert_eq!(m.index, BigInt::one());
        assert!(m.dimension_formula);
    }

    #[test]
    fn index_two_side() {
        // One side only reaches 2ℤ × ℤ.
        let g = Gluing { pieces: vec![2, 1], cones: vec![], edges: vec![2], eps: vec![vec![2, 0, 0], vec![0, 1, -1]] };
        assert_eq!(splitting_multiplicity(&g).unwrap().index, BigInt::from(2));
        let flat = Gluing { pieces: vec![1], cones: vec![], edges: vec![2], eps: vec![vec![1], vec![0]] };
        assert_eq!(splitting_multiplicity(&flat).unwrap_err(), Error::RankDeficient);
    }

    #[test]
    fn displacement_membership() {
        let g = Gluing { pieces: vec![1], cones: vec![vec![vec![1]]], edges: vec![1], eps: vec![vec![1]] };
        let (r, general) = transverse_check(&[g.clone()], &[q(1)]).unwrap();
        assert!(r[0].member && general);
        let (r, _) = transverse_check(&[g], &[q(-1)]).unwrap();
        assert!(!r[0].in_image);
    }

    #[test]
    fn bend_closed_form_small() {
        let cfg = BendConfig {
            delta: vec![0, 1],
            codim: 0,
            u_inc: vec![1, -2],
            ev_inc: vec![vec![1, -2], vec![1, 0], vec![0, 1]],
            walls: vec![WallPiece { u: vec![3, 0], ev: vec![vec![3, 0]] }],
        };
        let m = splitting_multiplicity(&cfg.gluing().unwrap()).unwrap();
        assert_eq!(Q::from_integer(m.index), cfg.closed_form().unwrap());
    }

    #[test]
    fn bend_closed_form_random() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [2, 3] {
            for codim in [0, 1] {
                for l in 0..=3 {
                    for _ in 0..4 {
                        let cfg = random_bend_config(&mut rng, n, l, codim);
                        let m = splitting_multiplicity(&cfg.gluing().unwrap()).unwrap();
                        assert_eq!(Q::from_integer(m.index.clone()), cfg.closed_form().unwrap(), "{cfg:?}");
                        assert!(m.dimension_formula, "{cfg:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn quadrant_round_trip() {
        let s = quadrant_walls();
        let opts = EnumOptions { decorated: true, ..Default::default() };
        for (a, b) in [(1, 2), (2, 1)] {
            let x = PointInChart::new(0, vec![q(a), q(b)]);
            for line in broken::enumerate(&s, &[1, 0], &x, &opts).unwrap() {
                let t = decorated_to_type(&s, &line).unwrap();
                let back = type_to_line(&s, &t, &x, &opts).unwrap();
                assert_eq!(back, line);
                assert_eq!(decorated_to_type(&s, &back).unwrap(), t);
            }
        }
    }

    #[test]
    fn quadrant_line_type_classifies() {
        let s = quadrant_walls();
        let opts = EnumOptions { decorated: true, ..Default::default() };
        let x = PointInChart::new(0, vec![q(1), q(2)]);
        let lines = broken::enumerate(&s, &[1, 0], &x, &opts).unwrap();
        let bent_line = lines.iter().find(|l| l.bends().count() == 1).unwrap();
        let t = decorated_to_type(&s, bent_line).unwrap();
        assert_eq!(t, bent());
        assert_eq!(classify(&t, &s.complex).unwrap().kind, Kind::BrokenLine);
    }
}
