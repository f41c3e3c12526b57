//! Walls, wall structures and their refinement into chambers, codimension-one
//! cells and joints; wall-crossing automorphisms, slab rings and the relative
//! restrictions.
//!
//! A wall lives in the chart of one maximal cone. Its support is a simplicial
//! cone of dimension n−1 given by integer generators in that chart, and its
//! function is a ring element in the same chart. Walls whose support lies in a
//! facet of 𝒫 are slabs.

use crate::error::{Error, Result};
use crate::geometry::{ConeComplex, ConeId, PointInChart};
use crate::json::SCHEMA;
use crate::lattice::{cokernel_order, kernel_basis, IntegerMatrix};
use crate::linalg::{self, fmt_q, q, qv, Q};
use crate::polyhedral::{self, membership, Membership, PolyCone};
use crate::ring::{self, Location, Monomial, RingElement, Truncation};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// One summand `c t^A z^m` of the logarithm of a wall function.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LogTerm {
    pub class: Vec<i64>,
    pub exp: Vec<i64>,
    pub coeff: Q,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Wall {
    pub cone: ConeId,
    pub support: Vec<Vec<i64>>,
    pub function: RingElement,
    /// The function is `exp(Σ log_terms)`.
    pub log_terms: Vec<LogTerm>,
    normal: Vec<i64>,
}

impl Wall {
    /// A wall from its function; the logarithm is computed.
    pub fn new(cx: &ConeComplex, cone: ConeId, support: Vec<Vec<i64>>, function: RingElement, trunc: &Truncation) -> Result<Wall> {
        let log = function.log_unipotent(cx.dim(), trunc)?;
        let log_terms = log
            .terms()
            .map(|(m, c)| LogTerm { class: m.class.clone(), exp: m.exp.clone(), coeff: c.clone() })
            .collect();
        Self::with_log(cx, cone, support, function.with_cone(cone), log_terms)
    }

    /// A wall `exp(Σ log_terms)`.
    pub fn from_log(cx: &ConeComplex, cone: ConeId, support: Vec<Vec<i64>>, log_terms: Vec<LogTerm>, trunc: &Truncation) -> Result<Wall> {
        let mut g = RingElement::zero(cone);
        for t in &log_terms {
            g.add_term(Monomial::new(t.class.clone(), t.exp.clone()), t.coeff.clone(), trunc);
        }
        let function = g.exp_truncated(cx.dim(), trunc)?;
        Self::with_log(cx, cone, support, function, log_terms)
    }

    fn with_log(cx: &ConeComplex, cone: ConeId, support: Vec<Vec<i64>>, function: RingElement, log_terms: Vec<LogTerm>) -> Result<Wall> {
        let n = cx.dim();
        if cone >= cx.maximal_cones().len() {
            return Err(Error::InvalidInput(format!("no maximal cone {cone}")));
        }
        if support.len() != n - 1 || support.iter().any(|g| g.len() != n) {
            return Err(Error::InvalidInput(format!("wall support needs {} generators of length {n}", n - 1)));
        }
        if support.iter().flatten().any(|&x| x < 0) {
            return Err(Error::InvalidInput("wall support leaves its maximal cone".into()));
        }
        let gens: Vec<Vec<Q>> = support.iter().map(|g| qv(g)).collect();
        let normal = if n == 1 {
            vec![1]
        } else {
            polyhedral::hyperplane_normal(&gens, n)
                .ok_or_else(|| Error::InvalidInput("wall support generators are dependent".into()))?
        };
        let mut support: Vec<Vec<i64>> = support.iter().map(|g| linalg::primitive_i(g)).collect();
        support.sort();
        Ok(Wall { cone, support, function, log_terms, normal })
    }

    /// Primitive covector in the wall's chart vanishing on the support.
    pub fn normal(&self) -> &[i64] {
        &self.normal
    }

    pub fn gens_q(&self) -> Vec<Vec<Q>> {
        self.support.iter().map(|g| qv(g)).collect()
    }

    /// Chart position k such that the support lies in `x_k = 0`.
    pub fn slab_position(&self) -> Option<usize> {
        (0..self.normal.len()).find(|&k| self.support.iter().all(|g| g[k] == 0))
    }

    pub fn is_trivial(&self) -> bool {
        self.function.len() == 1 && self.function.unit_part().is_one()
    }

    pub fn locate(&self, coords: &[Q]) -> Membership {
        if self.support.is_empty() {
            return if coords.iter().all(Zero::is_zero) { Membership::Boundary } else { Membership::Outside };
        }
        membership(&self.gens_q(), coords)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "cone": self.cone,
            "support": self.support,
            "function": self.function.terms_json(),
            "log": self.log_terms.iter().map(|t| json!({"A": t.class, "m": t.exp, "c": fmt_q(&t.coeff)})).collect::<Vec<_>>(),
        })
    }
}

/// A finite set of walls on a complex, modulo a truncation ideal.
#[derive(Clone, Debug)]
pub struct WallStructure {
    pub complex: Arc<ConeComplex>,
    pub trunc: Truncation,
    pub walls: Vec<Wall>,
    /// Entries with W = 0 dropped during assembly.
    pub trivial_dropped: usize,
}

/// One input count for [`assemble_canonical`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountEntry {
    pub max_cone: ConeId,
    pub support: Vec<Vec<i64>>,
    pub u: Vec<i64>,
    #[serde(rename = "A")]
    pub class: Vec<i64>,
    #[serde(rename = "W", with = "crate::json::q_serde")]
    pub w: Q,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aut: Option<i64>,
}

fn gcd_vec(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |a, &b| num_integer::Integer::gcd(&a, &b))
}

/// Builds walls `exp(k·W/|Aut|·t^A z^{−u})` from counts, merging entries that
/// share cone, support, direction, class and k.
pub fn assemble_canonical(cx: Arc<ConeComplex>, counts: &[CountEntry], trunc: &Truncation) -> Result<WallStructure> {
    let n = cx.dim();
    let mut merged: BTreeMap<(ConeId, Vec<Vec<i64>>, Vec<i64>, Vec<i64>, i64), Q> = BTreeMap::new();
    let mut dropped = 0;
    for e in counts {
        if e.u.len() != n || e.u.iter().all(|&x| x == 0) {
            return Err(Error::InadmissibleWallDirection(format!("u = {:?} must be a nonzero vector of length {n}", e.u)));
        }
        if e.class.len() != trunc.rank() || e.class.iter().any(|&x| x < 0) {
            return Err(Error::InvalidInput(format!("class {:?} is not in the curve monoid", e.class)));
        }
        if trunc.kills(&e.class) {
            return Err(Error::ClassInIdeal(e.class.clone()));
        }
        let k = e.k.unwrap_or_else(|| gcd_vec(&e.u));
        let aut = e.aut.unwrap_or(1);
        if aut <= 0 || k <= 0 {
            return Err(Error::InvalidInput("k and aut must be positive".into()));
        }
        if e.w.is_zero() {
            dropped += 1;
            continue;
        }
        let mut support = e.support.clone();
        support.sort();
        *merged.entry((e.max_cone, support, e.u.clone(), e.class.clone(), k)).or_insert_with(Q::zero) +=
            &e.w / q(aut);
    }
    let mut walls = Vec::new();
    for ((cone, support, u, class, k), w) in merged {
        if w.is_zero() {
            dropped += 1;
            continue;
        }
        let exp: Vec<i64> = u.iter().map(|x| -x).collect();
        for piece in simplicial_pieces(&support, n)? {
            let wall = Wall::from_log(&cx, cone, piece, vec![LogTerm { class: class.clone(), exp: exp.clone(), coeff: &w * q(k) }], trunc)?;
            check_admissible(&cx, &wall)?;
            walls.push(wall);
        }
    }
    Ok(WallStructure { complex: cx, trunc: trunc.clone(), walls, trivial_dropped: dropped })
}

/// Splits an (n−1)-dimensional support into simplicial cones.
fn simplicial_pieces(support: &[Vec<i64>], n: usize) -> Result<Vec<Vec<Vec<i64>>>> {
    let gens: Vec<Vec<Q>> = support.iter().map(|g| qv(g)).collect();
    if linalg::rank(&gens) + 1 != n && n > 1 {
        return Err(Error::InvalidInput("wall support must span a hyperplane".into()));
    }
    if support.len() + 1 == n {
        return Ok(vec![support.to_vec()]);
    }
    Ok(polyhedral::triangulate(support, n - 1))
}

fn face_points(wall: &Wall) -> Vec<Vec<Q>> {
    let k = wall.support.len();
    (1u64..(1u64 << k))
        .map(|mask| {
            let chosen: Vec<Vec<i64>> =
                (0..k).filter(|i| mask >> i & 1 == 1).map(|i| wall.support[i].clone()).collect();
            polyhedral::sum_rays(&chosen, wall.normal.len())
        })
        .collect()
}

/// Tangency, ∂B and stalk admissibility along every face of the support.
pub fn check_admissible(cx: &ConeComplex, wall: &Wall) -> Result<()> {
    for (m, _) in wall.function.terms() {
        if linalg::dot_i(&wall.normal, &m.exp) != 0 {
            return Err(Error::InadmissibleWallDirection(format!("exponent {:?} is not tangent to the support", m.exp)));
        }
    }
    let rel = relint(wall);
    let global = cx.to_global(&PointInChart::new(wall.cone, rel));
    if cx.dim() > 1 && cx.in_boundary(&global) {
        return Err(Error::InadmissibleWallDirection("support lies in the boundary".into()));
    }
    for p in face_points(wall) {
        let global = cx.to_global(&PointInChart::new(wall.cone, p));
        let loc = ring::location_of(cx, wall.cone, &global);
        if loc == Location::Delta {
            continue;
        }
        for (m, _) in wall.function.terms() {
            if !ring::admissible_at(cx, m, &loc)? {
                return Err(Error::InadmissibleWallDirection(format!(
                    "monomial t^{:?} z^{:?} is not admissible at {loc:?}",
                    m.class, m.exp
                )));
            }
        }
    }
    Ok(())
}

/// Sum of the support generators.
pub fn relint(wall: &Wall) -> Vec<Q> {
    polyhedral::sum_rays(&wall.support, wall.normal.len())
}

/// Applies θ: z^m ↦ g^{⟨n,m⟩} z^m monomial-wise.
pub fn apply_theta(f: &RingElement, g: &RingElement, normal: &[i64], dim: usize, trunc: &Truncation) -> Result<RingElement> {
    let mut out = RingElement::zero(f.cone);
    let g = g.clone().with_cone(f.cone);
    for (m, c) in f.terms() {
        let k = linalg::dot_i(normal, &m.exp);
        let factor = g.pow(k, dim, trunc)?.shift(&m.class, &m.exp, trunc).scale(c);
        out = out.add(&factor, trunc)?;
    }
    Ok(out)
}

/// Crosses a wall of the same chart, leaving the side containing `source`.
pub fn cross_wall(f: &RingElement, wall: &Wall, source: &[Q], trunc: &Truncation) -> Result<RingElement> {
    let side = linalg::dot(&qv(&wall.normal), source);
    if side.is_zero() {
        return Err(Error::SingularPoint);
    }
    let normal: Vec<i64> = if side.is_positive() { wall.normal.clone() } else { wall.normal.iter().map(|x| -x).collect() };
    apply_theta(f, &wall.function, &normal, wall.normal.len(), trunc)
}

impl WallStructure {
    pub fn new(complex: Arc<ConeComplex>, trunc: Truncation) -> Self {
        WallStructure { complex, trunc, walls: Vec::new(), trivial_dropped: 0 }
    }

    pub fn dim(&self) -> usize {
        self.complex.dim()
    }

    pub fn one(&self, cone: ConeId) -> RingElement {
        RingElement::one(cone, self.dim(), self.trunc.rank())
    }

    /// Merges walls with equal cone and support into one wall each.
    pub fn consolidate(&self) -> Result<WallStructure> {
        let mut groups: BTreeMap<(ConeId, Vec<Vec<i64>>), BTreeMap<(Vec<i64>, Vec<i64>), Q>> = BTreeMap::new();
        for w in &self.walls {
            let g = groups.entry((w.cone, w.support.clone())).or_default();
            for t in &w.log_terms {
                *g.entry((t.class.clone(), t.exp.clone())).or_insert_with(Q::zero) += &t.coeff;
            }
        }
        let mut out = WallStructure::new(self.complex.clone(), self.trunc.clone());
        out.trivial_dropped = self.trivial_dropped;
        for ((cone, support), terms) in groups {
            let log: Vec<LogTerm> = terms
                .into_iter()
                .filter(|(_, c)| !c.is_zero())
                .map(|((class, exp), coeff)| LogTerm { class, exp, coeff })
                .collect();
            let wall = Wall::from_log(&self.complex, cone, support, log, &self.trunc)?;
            if wall.is_trivial() {
                out.trivial_dropped += 1;
            } else {
                out.walls.push(wall);
            }
        }
        Ok(out)
    }

    /// Walls containing a global point, with their membership.
    fn walls_at(&self, global: &[Q]) -> Vec<(usize, Membership)> {
        let cx = &self.complex;
        self.walls
            .iter()
            .enumerate()
            .filter_map(|(i, w)| {
                let p = cx.in_chart(w.cone, global)?;
                match w.locate(&p.coords) {
                    Membership::Outside => None,
                    m => Some((i, m)),
                }
            })
            .collect()
    }

    /// Hyperplane of wall `i` expressed as a covector in the chart of σ, if the
    /// wall is visible there.
    fn normal_in(&self, i: usize, sigma: ConeId) -> Option<Vec<i64>> {
        let w = &self.walls[i];
        if w.cone == sigma {
            return Some(w.normal.clone());
        }
        let k = w.slab_position()?;
        let facet = self.complex.facet_opposite(w.cone, k);
        if !facet.sides.contains(&sigma) {
            return None;
        }
        Some(self.complex.inward_normal(sigma, facet))
    }

    /// Wall `i`'s function in the chart of σ.
    pub fn function_in(&self, i: usize, sigma: ConeId) -> Result<RingElement> {
        let w = &self.walls[i];
        if w.cone == sigma {
            return Ok(w.function.clone());
        }
        ring::transport(&self.complex, &w.function, sigma, true, &self.trunc)
    }

    /// Product of the functions of all walls containing `x`.
    pub fn f_at(&self, x: &PointInChart) -> Result<RingElement> {
        let global = self.complex.to_global(x);
        let hits = self.walls_at(&global);
        let mut f = self.one(x.cone);
        if hits.is_empty() {
            return Ok(f);
        }
        if hits.iter().any(|(_, m)| *m == Membership::Boundary) || self.complex.in_delta(&global) {
            return Err(Error::SingularPoint);
        }
        let mut plane: Option<Vec<i64>> = None;
        for (i, _) in &hits {
            let h = self.normal_in(*i, x.cone).ok_or(Error::SingularPoint)?;
            let neg: Vec<i64> = h.iter().map(|v| -v).collect();
            match &plane {
                None => plane = Some(h),
                Some(p) if *p == h || *p == neg => {}
                Some(_) => return Err(Error::SingularPoint),
            }
            f = f.multiply(&self.function_in(*i, x.cone)?, &self.trunc)?;
        }
        Ok(f)
    }

    /// Product of all walls through a point, without the Sing(𝒮) check.
    fn product_at(&self, sigma: ConeId, global: &[Q]) -> Result<RingElement> {
        let mut f = self.one(sigma);
        for (i, _) in self.walls_at(global) {
            if self.normal_in(i, sigma).is_some() {
                f = f.multiply(&self.function_in(i, sigma)?, &self.trunc)?;
            }
        }
        Ok(f)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema": SCHEMA,
            "truncation": self.trunc.to_json(),
            "trivial_dropped": self.trivial_dropped,
            "walls": self.walls.iter().map(Wall::to_json).collect::<Vec<_>>(),
        })
    }

    /// Loads walls from JSON; functions are taken from `"log"` when present.
    pub fn from_json(cx: Arc<ConeComplex>, v: &Value, trunc: &Truncation) -> Result<WallStructure> {
        let bad = |s: &str| Error::InvalidInput(format!("wall structure JSON: {s}"));
        let walls_v = v.get("walls").unwrap_or(v).as_array().ok_or_else(|| bad("walls must be an array"))?;
        let mut walls = Vec::new();
        for w in walls_v {
            let cone = w.get("cone").and_then(Value::as_u64).ok_or_else(|| bad("cone"))? as usize;
            let support: Vec<Vec<i64>> =
                serde_json::from_value(w.get("support").cloned().ok_or_else(|| bad("support"))?).map_err(|e| bad(&e.to_string()))?;
            let wall = match w.get("log") {
                Some(log) => {
                    let g = RingElement::terms_from_json(cone, log, trunc)?;
                    let terms = g
                        .terms()
                        .map(|(m, c)| LogTerm { class: m.class.clone(), exp: m.exp.clone(), coeff: c.clone() })
                        .collect();
                    Wall::from_log(&cx, cone, support, terms, trunc)?
                }
                None => {
                    let f = RingElement::terms_from_json(cone, w.get("function").ok_or_else(|| bad("function"))?, trunc)?;
                    Wall::new(&cx, cone, support, f, trunc)?
                }
            };
            check_admissible(&cx, &wall)?;
            walls.push(wall);
        }
        let dropped = v.get("trivial_dropped").and_then(Value::as_u64).unwrap_or(0) as usize;
        Ok(WallStructure { complex: cx, trunc: trunc.clone(), walls, trivial_dropped: dropped })
    }
}

/// A polyhedral cell of the refined decomposition.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cell {
    pub cone: ConeId,
    /// Extreme rays in the chart of `cone`.
    pub rays: Vec<Vec<i64>>,
    /// Extreme rays in global divisor coordinates, sorted.
    pub key: Vec<Vec<i64>>,
}

impl Cell {
    fn new(cx: &ConeComplex, cone: ConeId, rays: Vec<Vec<i64>>) -> Cell {
        let mut key: Vec<Vec<i64>> = rays.iter().map(|r| to_global_i(cx, cone, r)).collect();
        key.sort();
        Cell { cone, rays, key }
    }

    /// Sum of the extreme rays, a point of the relative interior.
    pub fn relint(&self) -> Vec<Q> {
        polyhedral::sum_rays(&self.rays, self.rays.first().map_or(0, Vec::len))
    }

    pub fn relint_global(&self) -> Vec<Q> {
        polyhedral::sum_rays(&self.key, self.key.first().map_or(0, Vec::len))
    }
}

fn to_global_i(cx: &ConeComplex, cone: ConeId, v: &[i64]) -> Vec<i64> {
    let mut g = vec![0; cx.num_divisors()];
    for (k, r) in cx.rays_of(cone).iter().enumerate() {
        g[*r] = v[k];
    }
    g
}

/// A codimension-one cell with the chambers on either side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodimOneCell {
    pub cell: Cell,
    pub chambers: Vec<usize>,
    /// The facet of 𝒫 containing the cell, if it is a slab.
    pub facet: Option<usize>,
    pub function: RingElement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Joint {
    pub cell: Cell,
    /// 0, 1 or 2 according to the smallest cone of 𝒫 containing the joint.
    pub codim: usize,
    pub boundary: bool,
}

/// A wall structure together with its polyhedral decomposition 𝒫_𝒮.
#[derive(Clone, Debug)]
pub struct RefinedStructure {
    pub structure: WallStructure,
    pub chambers: Vec<Cell>,
    pub cells: Vec<CodimOneCell>,
    pub joints: Vec<Joint>,
}

const MATCH_PASSES: usize = 64;

fn negated(h: &[i64]) -> Vec<i64> {
    h.iter().map(|x| -x).collect()
}

fn canonical_plane(h: &[i64]) -> Vec<i64> {
    let h = linalg::primitive_i(h);
    match h.iter().find(|&&x| x != 0) {
        Some(&x) if x < 0 => negated(&h),
        _ => h,
    }
}

/// Hyperplanes cutting σ: wall spans and the planes bounding each wall inside its span.
fn wall_planes(s: &WallStructure) -> Vec<BTreeSet<Vec<i64>>> {
    let cx = &s.complex;
    let n = cx.dim();
    let mut planes: Vec<BTreeSet<Vec<i64>>> = vec![BTreeSet::new(); cx.maximal_cones().len()];
    for w in &s.walls {
        let set = &mut planes[w.cone];
        if w.slab_position().is_none() {
            set.insert(canonical_plane(&w.normal));
        }
        if n < 3 {
            continue;
        }
        for skip in 0..w.support.len() {
            let face: Vec<Vec<i64>> =
                w.support.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, g)| g.clone()).collect();
            let on_boundary = (0..n).any(|k| face.iter().all(|g| g[k] == 0) && w.slab_position() != Some(k));
            if on_boundary {
                continue;
            }
            let mut rows: Vec<Vec<Q>> = face.iter().map(|g| qv(g)).collect();
            rows.push(qv(&w.normal));
            if let Some(h) = polyhedral::hyperplane_normal(&rows, n) {
                set.insert(canonical_plane(&h));
            }
        }
    }
    // Propagate cuts of interior facets to the neighboring cone.
    for _ in 0..MATCH_PASSES {
        let mut changed = false;
        for f in cx.facets().iter().filter(|f| f.is_interior()) {
            for (&a, &b) in [(&f.sides[0], &f.sides[1]), (&f.sides[1], &f.sides[0])] {
                let ka = cx.opposite_position(a, f);
                let kb = cx.opposite_position(b, f);
                let incoming: Vec<Vec<i64>> = planes[a]
                    .iter()
                    .filter_map(|h| {
                        let vals: Vec<i64> = (0..n).filter(|&j| j != ka).map(|j| h[j]).collect();
                        if !(vals.iter().any(|&v| v > 0) && vals.iter().any(|&v| v < 0)) {
                            return None;
                        }
                        let mut h2 = vec![0i64; n];
                        for (ja, r) in cx.rays_of(a).iter().enumerate() {
                            if ja == ka {
                                continue;
                            }
                            let jb = cx.rays_of(b).iter().position(|x| x == r).unwrap();
                            h2[jb] = h[ja];
                        }
                        debug_assert_eq!(h2[kb], 0);
                        Some(canonical_plane(&h2))
                    })
                    .collect();
                for h in incoming {
                    changed |= planes[b].insert(h);
                }
            }
        }
        if !changed {
            break;
        }
    }
    planes
}

/// Refines 𝒮 so that its walls are the codimension-one cells of a polyhedral
/// decomposition refining 𝒫.
pub fn refine(s: &WallStructure) -> Result<RefinedStructure> {
    let cx = s.complex.clone();
    let n = cx.dim();
    let planes = wall_planes(s);
    let mut chambers: Vec<Cell> = Vec::new();
    for (sigma, hs) in planes.iter().enumerate() {
        let mut pieces = vec![PolyCone::orthant(n)];
        for h in hs {
            let mut next = Vec::new();
            for p in pieces {
                match p.split(h) {
                    Some((a, b)) => {
                        next.push(a);
                        next.push(b);
                    }
                    None => next.push(p),
                }
            }
            pieces = next;
        }
        for p in pieces {
            chambers.push(Cell::new(&cx, sigma, sorted_rays(p.rays)));
        }
    }
    chambers.sort();

    let mut cells: BTreeMap<Vec<Vec<i64>>, CodimOneCell> = BTreeMap::new();
    let mut joints: BTreeMap<Vec<Vec<i64>>, Joint> = BTreeMap::new();
    for (ci, ch) in chambers.iter().enumerate() {
        let pc = cone_from_rays(&ch.rays, n);
        for (_, rays) in pc.facets() {
            let cell = Cell::new(&cx, ch.cone, sorted_rays(rays));
            let entry = cells.entry(cell.key.clone()).or_insert_with(|| CodimOneCell {
                cell: cell.clone(),
                chambers: Vec::new(),
                facet: None,
                function: RingElement::zero(ch.cone),
            });
            entry.chambers.push(ci);
        }
        if n >= 2 {
            for rays in pc.ridges() {
                let cell = Cell::new(&cx, ch.cone, sorted_rays(rays));
                joints.entry(cell.key.clone()).or_insert_with(|| {
                    let g = cell.relint_global();
                    let supp = cx.support(&g).len();
                    let codim = if supp == n { 0 } else if supp + 1 == n { 1 } else { 2 };
                    Joint { boundary: n > 1 && cx.in_boundary(&g), cell, codim }
                });
            }
        }
    }
    let mut cell_list: Vec<CodimOneCell> = cells.into_values().collect();
    for c in &mut cell_list {
        let g = c.cell.relint_global();
        let supp = cx.support(&g);
        if supp.len() + 1 == n {
            c.facet = cx.facet_index(&supp);
        }
        c.function = s.product_at(c.cell.cone, &g)?;
    }

    let mut refined_walls = Vec::new();
    for c in cell_list.iter().filter(|c| !(c.function.len() == 1 && c.function.unit_part().is_one())) {
        for piece in simplicial_pieces(&c.cell.rays, n)? {
            refined_walls.push(Wall::new(&cx, c.cell.cone, piece, c.function.clone(), &s.trunc)?);
        }
    }
    refined_walls.sort_by(|a, b| (a.cone, &a.support).cmp(&(b.cone, &b.support)));
    let structure = WallStructure { complex: cx, trunc: s.trunc.clone(), walls: refined_walls, trivial_dropped: s.trivial_dropped };
    Ok(RefinedStructure { structure, chambers, cells: cell_list, joints: joints.into_values().collect() })
}

fn sorted_rays(mut rays: Vec<Vec<i64>>) -> Vec<Vec<i64>> {
    rays.sort();
    rays.dedup();
    rays
}

/// Rebuilds the double description of a full-dimensional cone from its rays.
fn cone_from_rays(rays: &[Vec<i64>], n: usize) -> PolyCone {
    let mut ineqs = Vec::new();
    for combo in combinations(rays.len(), n - 1) {
        let rows: Vec<Vec<Q>> = combo.iter().map(|&i| qv(&rays[i])).collect();
        if n > 1 && linalg::rank(&rows) + 1 != n {
            continue;
        }
        let h = if n == 1 { vec![1] } else { polyhedral::hyperplane_normal(&rows, n).unwrap() };
        let vals: Vec<i64> = rays.iter().map(|r| linalg::dot_i(&h, r)).collect();
        if vals.iter().all(|&v| v >= 0) {
            ineqs.push(h);
        } else if vals.iter().all(|&v| v <= 0) {
            ineqs.push(negated(&h));
        }
    }
    ineqs.sort();
    ineqs.dedup();
    PolyCone { dim: n, rays: rays.to_vec(), ineqs }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
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
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

impl RefinedStructure {
    pub fn complex(&self) -> &ConeComplex {
        &self.structure.complex
    }

    /// Chamber containing an interior chart point.
    pub fn chamber_of(&self, x: &PointInChart) -> Option<usize> {
        self.chambers.iter().position(|c| c.cone == x.cone && cone_from_rays(&c.rays, x.coords.len()).contains(&x.coords))
    }

    /// Codimension-one cells bounding a chamber.
    pub fn cells_of(&self, chamber: usize) -> Vec<usize> {
        (0..self.cells.len()).filter(|&i| self.cells[i].chambers.contains(&chamber)).collect()
    }

    /// Codimension-one cells containing a joint.
    pub fn cells_at(&self, joint: usize) -> Vec<usize> {
        let key = &self.joints[joint].cell.key;
        (0..self.cells.len()).filter(|&i| key.iter().all(|r| self.cells[i].cell.key.contains(r))).collect()
    }

    /// Chambers containing a joint.
    pub fn chambers_at(&self, joint: usize) -> Vec<usize> {
        let key = &self.joints[joint].cell.key;
        (0..self.chambers.len()).filter(|&i| key.iter().all(|r| self.chambers[i].key.contains(r))).collect()
    }

    pub fn to_json(&self) -> Value {
        let cell_json = |c: &Cell| json!({"cone": c.cone, "rays": c.rays});
        json!({
            "schema": SCHEMA,
            "walls": self.structure.walls.iter().map(Wall::to_json).collect::<Vec<_>>(),
            "chambers": self.chambers.iter().map(cell_json).collect::<Vec<_>>(),
            "cells": self.cells.iter().map(|c| json!({
                "cone": c.cell.cone,
                "rays": c.cell.rays,
                "chambers": c.chambers,
                "slab": c.facet.is_some(),
                "function": c.function.terms_json(),
            })).collect::<Vec<_>>(),
            "joints": self.joints.iter().map(|j| json!({
                "cone": j.cell.cone,
                "rays": j.cell.rays,
                "codim": j.codim,
                "boundary": j.boundary,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Compares f_x of two structures on a sample point of every cell of their
/// common refinement. Returns the first differing point.
pub fn equivalent(a: &WallStructure, b: &WallStructure) -> Result<(bool, Option<PointInChart>)> {
    let mut union = a.clone();
    union.walls.extend(b.walls.iter().cloned());
    let r = refine(&union)?;
    let trunc = &a.trunc;
    for c in &r.cells {
        let x = PointInChart::new(c.cell.cone, c.cell.relint());
        let g = r.complex().to_global(&x);
        let fa = a.product_at(x.cone, &g)?;
        let fb = b.product_at(x.cone, &g)?;
        if fa.sub(&fb, trunc)? != RingElement::zero(x.cone) {
            return Ok((false, Some(x)));
        }
    }
    Ok((true, None))
}

/// Data of a slab ring R_𝔟 = (k[Q]/I)[Λ_ρ][Z₊,Z₋]/(Z₊Z₋ − f t^κ), read in the
/// chart of σ (the 𝔲 side) and σ′ (the 𝔲′ side).
#[derive(Clone, Debug)]
pub struct SlabRing {
    pub sigma: ConeId,
    pub sigma2: ConeId,
    /// Chart position in σ of the ray opposite the slab.
    pub k: usize,
    /// Chart position in σ′ of the ray opposite the slab.
    pub k2: usize,
    /// Image of ξ = e_k on the σ′ side, `−M_{σσ′} e_k`.
    pub xi2: Vec<i64>,
    pub kink: Vec<i64>,
    pub f: RingElement,
    pub f2: RingElement,
    n: usize,
    transition: Vec<Vec<i64>>,
}

/// Σ c t^A z^m Z^a, with `a > 0` meaning Z₊^a and `a < 0` meaning Z₋^{−a};
/// `m` is tangent to the slab, in σ coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SlabRingElement {
    pub terms: BTreeMap<(Vec<i64>, Vec<i64>, i64), Q>,
}

impl SlabRingElement {
    pub fn add_term(&mut self, class: Vec<i64>, m: Vec<i64>, a: i64, c: Q) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry((class, m, a)).or_insert_with(Q::zero);
        *e += c;
        if e.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn monomial(class: Vec<i64>, m: Vec<i64>, a: i64) -> Self {
        let mut e = SlabRingElement::default();
        e.add_term(class, m, a, Q::one());
        e
    }
}

/// Side of a slab for localization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

impl SlabRing {
    /// Slab ring of the facet between σ and σ′ with slab function `f` (σ chart).
    pub fn new(cx: &ConeComplex, sigma: ConeId, sigma2: ConeId, f: &RingElement, trunc: &Truncation) -> Result<SlabRing> {
        let facet = cx.facet_between(sigma, sigma2).ok_or(Error::BoundarySlab)?;
        let k = cx.opposite_position(sigma, facet);
        let k2 = cx.opposite_position(sigma2, facet);
        let (m, kink) = cx.chart_transition(sigma, sigma2)?;
        let e: Vec<i64> = (0..cx.dim()).map(|i| i64::from(i == k)).collect();
        let xi2 = negated(&linalg::mat_vec_i(&m, &e));
        let f2 = ring::transport(cx, f, sigma2, true, trunc)?;
        Ok(SlabRing { sigma, sigma2, k, k2, xi2, kink, f: f.clone(), f2, n: cx.dim(), transition: m })
    }

    /// Slab ring of a codimension-one cell of a refined structure.
    pub fn of_cell(r: &RefinedStructure, cell: usize) -> Result<SlabRing> {
        let c = &r.cells[cell];
        let facet = c.facet.ok_or(Error::BoundarySlab)?;
        let fct = &r.complex().facets()[facet];
        if !fct.is_interior() {
            return Err(Error::BoundarySlab);
        }
        let sigma = c.cell.cone;
        let sigma2 = fct.sides.iter().copied().find(|&s| s != sigma).unwrap();
        SlabRing::new(r.complex(), sigma, sigma2, &c.function, &r.structure.trunc)
    }

    /// χ_𝔲 (`Side::Plus`, σ chart) or χ_𝔲′ (`Side::Minus`, σ′ chart).
    pub fn localize(&self, e: &SlabRingElement, side: Side, trunc: &Truncation) -> Result<RingElement> {
        let n = self.n;
        let (cone, f) = match side {
            Side::Plus => (self.sigma, &self.f),
            Side::Minus => (self.sigma2, &self.f2),
        };
        let mut out = RingElement::zero(cone);
        for ((class, m, a), c) in &e.terms {
            let (xi, mm): (Vec<i64>, Vec<i64>) = match side {
                Side::Plus => ((0..n).map(|i| i64::from(i == self.k)).collect(), m.clone()),
                Side::Minus => (self.xi2.clone(), linalg::mat_vec_i(&self.transition, m)),
            };
            // Z₊ ↦ z^ξ on 𝔲, Z₋ ↦ z^{ξ′} on 𝔲′; the other variable carries f t^κ.
            let direct = match side {
                Side::Plus => *a,
                Side::Minus => -*a,
            };
            let term = if direct >= 0 {
                let exp: Vec<i64> = mm.iter().zip(&xi).map(|(x, y)| x + direct * y).collect();
                RingElement::monomial(cone, class.clone(), exp, c.clone())
            } else {
                let b = -direct;
                let exp: Vec<i64> = mm.iter().zip(&xi).map(|(x, y)| x - b * y).collect();
                let cls: Vec<i64> = class.iter().zip(&self.kink).map(|(x, y)| x + b * y).collect();
                f.pow(b, n, trunc)?.shift(&cls, &exp, trunc).scale(c)
            };
            out = out.add(&term, trunc)?;
        }
        Ok(out)
    }

    /// The element e with χ_𝔲(e) = F and χ_𝔲′(e) = F′, if it exists.
    pub fn preimage(&self, plus: &RingElement, minus: &RingElement, trunc: &Truncation) -> Result<Option<SlabRingElement>> {
        let inv = linalg::inverse_unimodular(&self.transition).ok_or(Error::NonUnimodularChart(vec![]))?;
        let mut e = SlabRingElement::default();
        for (m, c) in plus.terms() {
            let d = m.exp[self.k];
            if d >= 0 {
                let mut base = m.exp.clone();
                base[self.k] = 0;
                e.add_term(m.class.clone(), base, d, c.clone());
            }
        }
        for (m, c) in minus.terms() {
            let d = m.exp[self.k2];
            if d > 0 {
                let base: Vec<i64> = m.exp.iter().zip(&self.xi2).map(|(x, y)| x - d * y).collect();
                e.add_term(m.class.clone(), linalg::mat_vec_i(&inv, &base), -d, c.clone());
            }
        }
        let ok = self.localize(&e, Side::Plus, trunc)?.sub(plus, trunc)?.is_empty()
            && self.localize(&e, Side::Minus, trunc)?.sub(minus, trunc)?.is_empty();
        Ok(ok.then_some(e))
    }
}

/// Localizes a slab-ring element on one side of a slab cell.
pub fn slab_localize(r: &RefinedStructure, cell: usize, e: &SlabRingElement, side: Side) -> Result<RingElement> {
    SlabRing::of_cell(r, cell)?.localize(e, side, &r.structure.trunc)
}

/// A wall of the asymptotic structure on ∂B.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryWall {
    pub cone: ConeId,
    pub facet: usize,
    pub support: Vec<Vec<i64>>,
    pub function: RingElement,
}

/// A wall of the fiber structure on B′ = g_trop⁻¹(1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberWall {
    pub cone: ConeId,
    /// The cone over 𝔭∩B′.
    pub support: Vec<Vec<i64>>,
    pub index: i64,
    pub function: RingElement,
}

#[derive(Clone, Debug)]
pub struct Restriction {
    pub asymptotic: Vec<BoundaryWall>,
    pub fiber: Vec<FiberWall>,
}

/// ind(𝔭): order of coker(g_trop,*: Λ_𝔭 → ℤ).
pub fn wall_index(cx: &ConeComplex, wall: &Wall) -> Result<Option<i64>> {
    let g = cx.g_trop_chart(wall.cone)?;
    let n = cx.dim();
    let lattice: Vec<Vec<i64>> = if n == 1 {
        vec![]
    } else {
        kernel_basis(&IntegerMatrix::from_rows(&[wall.normal.clone()], n))
            .into_iter()
            .map(|v| v.iter().map(|x| x.to_i64().expect("small lattice basis")).collect())
            .collect()
    };
    let row: Vec<i64> = lattice.iter().map(|v| linalg::dot_i(&g, v)).collect();
    let m = IntegerMatrix::from_rows(&[row.clone()], row.len());
    Ok(cokernel_order(&m, false).finite().and_then(|x| x.to_i64()))
}

/// The asymptotic structure on ∂B and the fiber structure on g_trop⁻¹(1).
pub fn relative_restrict(s: &WallStructure) -> Result<Restriction> {
    let cx = &s.complex;
    if !cx.is_relative() {
        return Err(Error::NotRelative);
    }
    for d in cx.divisors() {
        if d.a.is_zero() && d.b.unwrap_or(0) > 1 {
            return Err(Error::NonReducedFiber(d.name.clone()));
        }
    }
    let n = cx.dim();
    let mut asymptotic = Vec::new();
    let mut fiber = Vec::new();
    for w in &s.walls {
        for k in 0..n {
            let facet = cx.facet_opposite(w.cone, k);
            if facet.is_interior() {
                continue;
            }
            let face: Vec<Vec<i64>> = w.support.iter().filter(|g| g[k] == 0).cloned().collect();
            let rows: Vec<Vec<Q>> = face.iter().map(|g| qv(g)).collect();
            if n >= 2 && linalg::rank(&rows) + 2 == n {
                let idx = cx.facet_index(&facet.rays).unwrap();
                asymptotic.push(BoundaryWall { cone: w.cone, facet: idx, support: face, function: w.function.clone() });
            }
        }
        let g = cx.g_trop_chart(w.cone)?;
        if w.support.iter().all(|v| linalg::dot_i(&g, v) == 0) {
            continue;
        }
        let index = wall_index(cx, w)?.ok_or(Error::InvalidInput("wall lies in a fiber of g_trop".into()))?;
        fiber.push(FiberWall {
            cone: w.cone,
            support: w.support.clone(),
            index,
            function: w.function.pow(index, n, &s.trunc)?,
        });
    }
    Ok(Restriction { asymptotic, fiber })
}

/// Divisor-class pairings D_i·A for each basis curve class: `pairings[i][j] = D_i·β_j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradingData {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub pairings: Vec<Vec<i64>>,
}

/// deg_Γ(t^A z^m) as a vector over divisors: (D_i·A) + m_i.
pub fn degree(cx: &ConeComplex, grading: &GradingData, cone: ConeId, class: &[i64], exp: &[i64]) -> Vec<i64> {
    let mut d: Vec<i64> = grading.pairings.iter().map(|row| linalg::dot_i(row, class)).collect();
    for (k, r) in cx.rays_of(cone).iter().enumerate() {
        d[*r] += exp[k];
    }
    d
}

/// Walls whose monomials are not all of Γ-degree zero.
pub fn grading_check(s: &WallStructure, grading: &GradingData) -> Result<Vec<usize>> {
    let cx = &s.complex;
    if grading.pairings.len() != cx.num_divisors() || grading.pairings.iter().any(|r| r.len() != s.trunc.rank()) {
        return Err(Error::InvalidInput("grading pairings must be a divisors × curve_rank matrix".into()));
    }
    Ok(s
        .walls
        .iter()
        .enumerate()
        .filter(|(_, w)| w.function.terms().any(|(m, _)| degree(cx, grading, w.cone, &m.class, &m.exp).iter().any(|&x| x != 0)))
        .map(|(i, _)| i)
        .collect())
}
