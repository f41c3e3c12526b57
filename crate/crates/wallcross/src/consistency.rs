//! Joint-by-joint consistency checks, theta patching and local scattering
//! completion.

use crate::broken::{self, EnumOptions};
use crate::error::{Error, Result};
use crate::geometry::{build_complex, ConeComplex, ConeId, Divisor, GeometryInput, Intersections, Kink, PointInChart};
use crate::json::SCHEMA;
use crate::linalg::{self, fmt_q, q, qv, Q};
use crate::polyhedral::{self, Membership};
use crate::ring::{Monomial, RingElement, Truncation};
use crate::walls::{apply_theta, refine, LogTerm, RefinedStructure, SlabRing, Wall, WallStructure};
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointReport {
    pub joint: usize,
    pub codim: usize,
    pub boundary: bool,
    pub checker: String,
    pub pass: bool,
    pub witness: Option<String>,
    pub note: Option<String>,
}

impl JointReport {
    fn new(r: &RefinedStructure, joint: usize, checker: &str) -> Self {
        let j = &r.joints[joint];
        JointReport {
            joint,
            codim: j.codim,
            boundary: j.boundary,
            checker: checker.into(),
            pass: true,
            witness: None,
            note: None,
        }
    }

    fn fail(mut self, witness: String) -> Self {
        self.pass = false;
        self.witness = Some(witness);
        self
    }

    pub fn to_json(&self) -> Value {
        json!({
            "joint": self.joint,
            "codim": self.codim,
            "boundary": self.boundary,
            "checker": self.checker,
            "verdict": if self.pass { "pass" } else { "fail" },
            "witness": self.witness,
            "note": self.note,
        })
    }
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub seed: u64,
    pub max_steps: usize,
    /// Asymptotic monomials for patching; defaults to rays and pairwise sums.
    pub pset: Option<Vec<Vec<i64>>>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { seed: 0, max_steps: 200_000, pset: None }
    }
}

impl CheckOptions {
    fn enum_options(&self) -> EnumOptions {
        EnumOptions { decorated: false, seed: self.seed, max_steps: self.max_steps }
    }
}

pub trait JointChecker: Send + Sync {
    fn name(&self) -> &'static str;
    fn check(&self, r: &RefinedStructure, joint: usize, opts: &CheckOptions) -> Result<JointReport>;
}

/// Checkers keyed by name; `check_joint` picks one from the joint's type.
pub struct CheckerRegistry {
    checkers: BTreeMap<&'static str, Box<dyn JointChecker>>,
}

impl Default for CheckerRegistry {
    fn default() -> Self {
        let mut reg = CheckerRegistry { checkers: BTreeMap::new() };
        reg.register(Box::new(CodimZero));
        reg.register(Box::new(CodimOne));
        reg.register(Box::new(CodimTwo));
        reg.register(Box::new(BoundaryJoint));
        reg
    }
}

impl CheckerRegistry {
    pub fn register(&mut self, c: Box<dyn JointChecker>) {
        self.checkers.insert(c.name(), c);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.checkers.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Option<&dyn JointChecker> {
        self.checkers.get(name).map(|b| b.as_ref())
    }

    /// Name of the checker responsible for a joint.
    pub fn select(r: &RefinedStructure, joint: usize) -> &'static str {
        let j = &r.joints[joint];
        if is_apex(r, joint) {
            "2"
        } else if j.boundary {
            "boundary"
        } else {
            match j.codim {
                0 => "0",
                1 => "1",
                _ => "2",
            }
        }
    }

    pub fn check_joint(&self, r: &RefinedStructure, joint: usize, opts: &CheckOptions) -> Result<JointReport> {
        let name = Self::select(r, joint);
        let c = self.get(name).ok_or_else(|| Error::InvalidInput(format!("no checker named {name}")))?;
        c.check(r, joint, opts)
    }

    /// Reports for all joints matching `level` ("0", "1", "2", "boundary" or "all"), sorted by joint id.
    pub fn check_all(&self, r: &RefinedStructure, level: &str, opts: &CheckOptions) -> Result<Vec<JointReport>> {
        let mut out = Vec::new();
        for j in 0..r.joints.len() {
            let name = Self::select(r, j);
            if level == "all" || level == name {
                out.push(self.check_joint(r, j, opts)?);
            }
        }
        Ok(out)
    }
}

fn is_apex(r: &RefinedStructure, joint: usize) -> bool {
    r.joints[joint].cell.key.iter().all(|g| g.iter().all(|&x| x == 0))
}

pub fn check_joint(r: &RefinedStructure, joint: usize, opts: &CheckOptions) -> Result<JointReport> {
    CheckerRegistry::default().check_joint(r, joint, opts)
}

pub fn reports_json(reports: &[JointReport]) -> Value {
    json!({
        "schema": SCHEMA,
        "pass": reports.iter().all(|r| r.pass),
        "reports": reports.iter().map(JointReport::to_json).collect::<Vec<_>>(),
    })
}

/// A half-line of the two-dimensional quotient at a joint.
#[derive(Clone, Debug)]
struct HalfLine {
    dir: [Q; 2],
    normal: Vec<i64>,
    function: RingElement,
}

/// Covectors spanning the annihilator of the joint's span.
fn annihilator(rays: &[Vec<i64>], n: usize) -> Vec<Vec<Q>> {
    let rows: Vec<Vec<Q>> = rays.iter().map(|r| qv(r)).collect();
    linalg::nullspace(&rows, n)
}

fn project(ann: &[Vec<Q>], v: &[Q]) -> [Q; 2] {
    [linalg::dot(&ann[0], v), linalg::dot(&ann[1], v)]
}

fn half(v: &[Q; 2]) -> u8 {
    if v[1].is_positive() || (v[1].is_zero() && v[0].is_positive()) {
        0
    } else {
        1
    }
}

fn cross(a: &[Q; 2], b: &[Q; 2]) -> Q {
    &a[0] * &b[1] - &a[1] * &b[0]
}

/// Counterclockwise angular order from the positive x-axis.
fn angle_cmp(a: &[Q; 2], b: &[Q; 2]) -> Ordering {
    half(a).cmp(&half(b)).then_with(|| {
        let c = cross(a, b);
        if c.is_positive() {
            Ordering::Less
        } else if c.is_negative() {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    })
}

/// Orients `normal` to be positive on the clockwise side of `dir`.
fn orient(ann: &[Vec<Q>], normal: &[i64], dir: &[Q; 2]) -> Result<Vec<i64>> {
    let coeffs = linalg::solve_combination(ann, &qv(normal))
        .ok_or_else(|| Error::InvalidInput("wall does not contain the joint".into()))?;
    let cw = [dir[1].clone(), -dir[0].clone()];
    let v = &coeffs[0] * &cw[0] + &coeffs[1] * &cw[1];
    Ok(if v.is_positive() { normal.to_vec() } else { normal.iter().map(|x| -x).collect() })
}

/// Applies the crossings of `lines` in order to every generator z^{±e_i}
/// and returns the first deviation from the identity.
fn composition_witness(lines: &[HalfLine], ann: &[Vec<Q>], cone: ConeId, n: usize, trunc: &Truncation) -> Result<Option<String>> {
    let mut oriented = Vec::new();
    for h in lines {
        oriented.push((orient(ann, &h.normal, &h.dir)?, h.function.clone().with_cone(cone)));
    }
    for i in 0..n {
        for sgn in [1i64, -1] {
            let mut e = vec![0; n];
            e[i] = sgn;
            let start = RingElement::monomial(cone, vec![0; trunc.rank()], e.clone(), Q::one());
            let mut g = start.clone();
            for (nrm, f) in &oriented {
                g = apply_theta(&g, f, nrm, n, trunc)?;
            }
            let d = g.sub(&start, trunc)?;
            if !d.is_empty() {
                return Ok(Some(format!("z^{e:?} ↦ z^{e:?} + ({d})")));
            }
        }
    }
    Ok(None)
}

/// Half-lines at a joint from the refined cells containing it, in
/// counterclockwise order.
fn cell_half_lines(r: &RefinedStructure, joint: usize, cone: ConeId, ann: &[Vec<Q>]) -> Result<Vec<HalfLine>> {
    let cx = r.complex();
    let n = cx.dim();
    let mut out = Vec::new();
    for ci in r.cells_at(joint) {
        let c = &r.cells[ci];
        if c.facet.is_some() {
            continue;
        }
        let Some(pt) = cx.in_chart(cone, &c.cell.relint_global()) else { continue };
        if c.cell.cone != cone {
            continue;
        }
        let rows: Vec<Vec<Q>> = c.cell.rays.iter().map(|g| qv(g)).collect();
        let normal = polyhedral::hyperplane_normal(&rows, n).ok_or_else(|| Error::InvalidInput("degenerate cell".into()))?;
        out.push(HalfLine { dir: project(ann, &pt.coords), normal, function: c.function.clone() });
    }
    out.sort_by(|a, b| angle_cmp(&a.dir, &b.dir));
    Ok(out)
}

fn joint_rays_in(r: &RefinedStructure, joint: usize, cone: ConeId) -> Option<Vec<Vec<i64>>> {
    let cx = r.complex();
    r.joints[joint]
        .cell
        .key
        .iter()
        .map(|g| cx.in_chart(cone, &qv(g)).map(|p| p.coords.iter().map(|c| i64::try_from(c.to_integer()).unwrap()).collect()))
        .collect()
}

/// θ_𝔭r ∘ … ∘ θ_𝔭1 = id on the generators of R_σ.
pub struct CodimZero;

impl JointChecker for CodimZero {
    fn name(&self) -> &'static str {
        "0"
    }

    fn check(&self, r: &RefinedStructure, joint: usize, _opts: &CheckOptions) -> Result<JointReport> {
        let report = JointReport::new(r, joint, self.name());
        let cone = r.joints[joint].cell.cone;
        let n = r.complex().dim();
        let rays = joint_rays_in(r, joint, cone).expect("joint lies in its cone");
        let ann = annihilator(&rays, n);
        let lines = cell_half_lines(r, joint, cone, &ann)?;
        Ok(match composition_witness(&lines, &ann, cone, n, &r.structure.trunc)? {
            Some(w) => report.fail(w),
            None => report,
        })
    }
}

/// (θ×θ′)(χ,χ′)(R_𝔟₁) = (χ,χ′)(R_𝔟₂), checked on generators in both directions.
pub struct CodimOne;

impl CodimOne {
    /// Wall crossings on one side of the slab, from `from` to the other slab cell.
    fn side_crossings(r: &RefinedStructure, joint: usize, cone: ConeId, from: usize) -> Result<(Vec<Vec<Q>>, Vec<HalfLine>)> {
        let n = r.complex().dim();
        let rays = joint_rays_in(r, joint, cone).expect("joint lies in both cones");
        let ann = annihilator(&rays, n);
        let start_pt = r.complex().in_chart(cone, &r.cells[from].cell.relint_global()).unwrap();
        let d0 = project(&ann, &start_pt.coords);
        let mut lines = cell_half_lines(r, joint, cone, &ann)?;
        if lines.is_empty() {
            return Ok((ann, lines));
        }
        // Angles measured from the start slab; the side is a half-plane.
        let rel = |d: &[Q; 2]| [&d0[0] * &d[0] + &d0[1] * &d[1], cross(&d0, d)];
        let ccw = rel(&lines[0].dir)[1].is_positive();
        lines.sort_by(|a, b| {
            let (ra, rb) = (rel(&a.dir), rel(&b.dir));
            let o = angle_cmp(&ra, &rb);
            if ccw {
                o
            } else {
                o.reverse()
            }
        });
        if !ccw {
            // Clockwise traversal: the source side is counterclockwise.
            for h in &mut lines {
                h.dir = [-h.dir[0].clone(), -h.dir[1].clone()];
            }
        }
        Ok((ann, lines))
    }

    fn transport_side(g: &RingElement, ann: &[Vec<Q>], lines: &[HalfLine], n: usize, trunc: &Truncation) -> Result<RingElement> {
        let mut out = g.clone();
        for h in lines {
            let nrm = orient(ann, &h.normal, &h.dir)?;
            out = apply_theta(&out, &h.function.clone().with_cone(g.cone), &nrm, n, trunc)?;
        }
        Ok(out)
    }

    fn direction(
        r: &RefinedStructure,
        joint: usize,
        from: usize,
        to: usize,
        ring_from: &SlabRing,
        ring_to: &SlabRing,
    ) -> Result<Option<String>> {
        let n = r.complex().dim();
        let trunc = &r.structure.trunc;
        let (ann, plus_lines) = Self::side_crossings(r, joint, ring_from.sigma, from)?;
        let (ann2, minus_lines) = Self::side_crossings(r, joint, ring_from.sigma2, from)?;
        let rank = trunc.rank();
        let mut gens = vec![
            crate::walls::SlabRingElement::monomial(vec![0; rank], vec![0; n], 1),
            crate::walls::SlabRingElement::monomial(vec![0; rank], vec![0; n], -1),
        ];
        for i in (0..n).filter(|&i| i != ring_from.k) {
            for s in [1, -1] {
                let mut e = vec![0; n];
                e[i] = s;
                gens.push(crate::walls::SlabRingElement::monomial(vec![0; rank], e, 0));
            }
        }
        for g in gens {
            let plus = ring_from.localize(&g, crate::walls::Side::Plus, trunc)?;
            let minus = ring_from.localize(&g, crate::walls::Side::Minus, trunc)?;
            let plus = Self::transport_side(&plus, &ann, &plus_lines, n, trunc)?;
            let minus = Self::transport_side(&minus, &ann2, &minus_lines, n, trunc)?;
            if ring_to.preimage(&plus, &minus, trunc)?.is_none() {
                return Ok(Some(format!("generator {:?} from cell {from} has no preimage at cell {to}: ({plus}, {minus})", g.terms.keys().next().unwrap())));
            }
        }
        Ok(None)
    }
}

impl JointChecker for CodimOne {
    fn name(&self) -> &'static str {
        "1"
    }

    fn check(&self, r: &RefinedStructure, joint: usize, _opts: &CheckOptions) -> Result<JointReport> {
        let mut report = JointReport::new(r, joint, self.name());
        let cx = r.complex();
        let slabs: Vec<usize> = r.cells_at(joint).into_iter().filter(|&c| r.cells[c].facet.is_some()).collect();
        if slabs.len() != 2 {
            report.note = Some(format!("{} slab cells at the joint", slabs.len()));
            return Ok(report);
        }
        let facet = &cx.facets()[r.cells[slabs[0]].facet.unwrap()];
        if !facet.is_interior() {
            return Ok(report);
        }
        let (sigma, sigma2) = (facet.sides[0], facet.sides[1]);
        let ring = |c: usize| -> Result<SlabRing> {
            let cell = &r.cells[c];
            let f = if cell.cell.cone == sigma {
                cell.function.clone()
            } else {
                crate::ring::transport(cx, &cell.function, sigma, true, &r.structure.trunc)?
            };
            SlabRing::new(cx, sigma, sigma2, &f, &r.structure.trunc)
        };
        let (r1, r2) = (ring(slabs[0])?, ring(slabs[1])?);
        if let Some(w) = Self::direction(r, joint, slabs[0], slabs[1], &r1, &r2)? {
            return Ok(report.fail(w));
        }
        if let Some(w) = Self::direction(r, joint, slabs[1], slabs[0], &r2, &r1)? {
            return Ok(report.fail(w));
        }
        Ok(report)
    }
}

/// Localizes at the (n−2)-cone containing the joint and runs patching there.
pub struct CodimTwo;

impl JointChecker for CodimTwo {
    fn name(&self) -> &'static str {
        "2"
    }

    fn check(&self, r: &RefinedStructure, joint: usize, opts: &CheckOptions) -> Result<JointReport> {
        let mut report = JointReport::new(r, joint, self.name());
        let (local, note) = if is_apex(r, joint) {
            (r.structure.clone(), "apex: global patching")
        } else {
            (localize_at_joint(r, joint)?, "localized instance")
        };
        report.note = Some(note.into());
        let pset = opts.pset.clone().unwrap_or_else(|| default_pset(&local.complex));
        let lr = refine(&local)?;
        let pr = patching_check(&lr, &pset, opts)?;
        if let Some(f) = pr.items.iter().find(|i| !i.pass) {
            return Ok(report.fail(f.describe()));
        }
        Ok(report)
    }
}

/// Wall exponents at a boundary joint are tangent to ∂B.
pub struct BoundaryJoint;

impl JointChecker for BoundaryJoint {
    fn name(&self) -> &'static str {
        "boundary"
    }

    fn check(&self, r: &RefinedStructure, joint: usize, _opts: &CheckOptions) -> Result<JointReport> {
        let report = JointReport::new(r, joint, self.name());
        let cx = r.complex();
        let g = r.joints[joint].cell.relint_global();
        for ci in r.cells_at(joint) {
            let c = &r.cells[ci];
            let Some(pt) = cx.in_chart(c.cell.cone, &g) else { continue };
            for k in 0..cx.dim() {
                if !pt.coords[k].is_zero() || cx.facet_opposite(c.cell.cone, k).is_interior() {
                    continue;
                }
                for (m, _) in c.function.terms() {
                    if m.exp[k] != 0 {
                        return Ok(report.fail(format!("exponent {:?} of cell {ci} is not tangent to the boundary", m.exp)));
                    }
                }
            }
        }
        Ok(report)
    }
}

/// Ray generators and pairwise sums within a cone, in global coordinates.
pub fn default_pset(cx: &ConeComplex) -> Vec<Vec<i64>> {
    let s = cx.num_divisors();
    let mut out: Vec<Vec<i64>> = Vec::new();
    for i in 0..s {
        if cx.is_cone(&[i]) {
            let mut e = vec![0; s];
            e[i] = 1;
            out.push(e);
        }
    }
    for i in 0..s {
        for j in i + 1..s {
            if cx.is_cone(&[i, j]) {
                let mut e = vec![0; s];
                e[i] = 1;
                e[j] = 1;
                out.push(e);
            }
        }
    }
    out
}

/// The two-dimensional instance at an interior codimension-two joint: link
/// rays of the (n−2)-cone τ containing it become divisors, charts drop the
/// τ-coordinates and walls are the images of the refined cells through it.
pub fn localize_at_joint(r: &RefinedStructure, joint: usize) -> Result<WallStructure> {
    let j = &r.joints[joint];
    if j.boundary {
        return Err(Error::BoundaryJoint);
    }
    let cx = r.complex();
    let n = cx.dim();
    let g = j.cell.relint_global();
    if g.iter().all(Zero::is_zero) {
        return Err(Error::ApexJoint);
    }
    let tau = cx.support(&g);
    if tau.len() + 2 != n {
        return Err(Error::InvalidInput(format!("joint {joint} is not in the interior of an (n-2)-cone")));
    }
    let star = cx.star(&tau);
    let mut link: Vec<usize> = star.iter().flat_map(|&s| cx.rays_of(s).iter().copied()).filter(|r| !tau.contains(r)).collect();
    link.sort_unstable();
    link.dedup();
    let idx = |ray: usize| link.iter().position(|&x| x == ray).unwrap();
    let mut strata = Vec::new();
    for &s in &star {
        let mut st: Vec<usize> = cx.rays_of(s).iter().filter(|r| !tau.contains(r)).map(|&r| idx(r)).collect();
        st.sort_unstable();
        strata.push(st);
    }
    let mut intersections = Vec::new();
    let mut kinks = Vec::new();
    for f in cx.facets().iter().filter(|f| f.is_interior() && tau.iter().all(|t| f.rays.contains(t))) {
        let (pos, &ray) = f.rays.iter().enumerate().find(|(_, r)| !tau.contains(r)).unwrap();
        intersections.push(Intersections { rho: vec![idx(ray)], numbers: vec![f.numbers[pos]] });
        kinks.push(Kink { rho: vec![idx(ray)], class: f.kink.clone() });
    }
    let input = GeometryInput {
        schema: None,
        n: 2,
        curve_rank: cx.curve_rank(),
        divisors: link.iter().map(|&r| Divisor { name: cx.divisors()[r].name.clone(), a: Q::zero(), b: None }).collect(),
        good_strata: strata,
        intersections,
        kinks,
        relative: false,
    };
    let local = Arc::new(build_complex(&input)?);
    let trunc = r.structure.trunc.clone();
    let mut out = WallStructure::new(local.clone(), trunc.clone());
    for ci in r.cells_at(joint) {
        let c = &r.cells[ci];
        if c.function.len() == 1 && c.function.unit_part().is_one() {
            continue;
        }
        let sigma = c.cell.cone;
        let keep: Vec<usize> = (0..n).filter(|&k| !tau.contains(&cx.rays_of(sigma)[k])).collect();
        let mut lrays: Vec<usize> = keep.iter().map(|&k| idx(cx.rays_of(sigma)[k])).collect();
        let order: Vec<usize> = {
            let mut o: Vec<usize> = (0..2).collect();
            o.sort_by_key(|&i| lrays[i]);
            o
        };
        lrays.sort_unstable();
        let lsigma = local.maximal_cones().iter().position(|m| *m == lrays).unwrap();
        let drop = |v: &[i64]| -> Vec<i64> { order.iter().map(|&i| v[keep[i]]).collect() };
        let dir: Vec<i64> = c.cell.rays.iter().map(|ray| drop(ray)).find(|v| v.iter().any(|&x| x != 0)).unwrap();
        let f = RingElement::from_terms(lsigma, c.function.terms().map(|(m, c)| (Monomial::new(m.class.clone(), drop(&m.exp)), c.clone())), &trunc);
        out.walls.push(Wall::new(&local, lsigma, vec![linalg::primitive_i(&dir)], f, &trunc)?);
    }
    Ok(out)
}

/// One patching comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchItem {
    pub p: Vec<i64>,
    /// 1: constant on a chamber, 2: intertwined across a wall, 3: slab lift exists.
    pub kind: u8,
    pub location: usize,
    pub pass: bool,
    pub witness: Option<String>,
}

impl PatchItem {
    pub fn describe(&self) -> String {
        format!("p = {:?}, check {} at {}: {}", self.p, self.kind, self.location, self.witness.clone().unwrap_or_default())
    }
}

#[derive(Clone, Debug, Default)]
pub struct PatchingReport {
    pub items: Vec<PatchItem>,
}

impl PatchingReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema": SCHEMA,
            "pass": self.passed(),
            "items": self.items.iter().map(|i| json!({"p": i.p, "kind": i.kind, "location": i.location, "pass": i.pass, "witness": i.witness})).collect::<Vec<_>>(),
        })
    }
}

/// A generic point inside a chamber, with a theta value computable there.
fn chamber_point(r: &RefinedStructure, chamber: usize, rng: &mut ChaCha8Rng) -> PointInChart {
    let ch = &r.chambers[chamber];
    let n = r.complex().dim();
    let normals: Vec<Vec<Q>> = r.structure.walls.iter().filter(|w| w.cone == ch.cone).map(|w| qv(w.normal())).collect();
    loop {
        let mut x = vec![Q::zero(); n];
        for ray in &ch.rays {
            let w = q(rng.gen_range(1..=997));
            x = linalg::add(&x, &linalg::scale(&qv(ray), &w));
        }
        if x.iter().all(Signed::is_positive) && normals.iter().all(|h| !linalg::dot(h, &x).is_zero()) {
            return PointInChart::new(ch.cone, x);
        }
    }
}

/// Theta patching over the chambers and cells of a refined structure.
pub fn patching_check(r: &RefinedStructure, pset: &[Vec<i64>], opts: &CheckOptions) -> Result<PatchingReport> {
    let s = &r.structure;
    let cx = r.complex();
    let trunc = &s.trunc;
    let eo = opts.enum_options();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let points: Vec<(PointInChart, PointInChart)> =
        (0..r.chambers.len()).map(|c| (chamber_point(r, c, &mut rng), chamber_point(r, c, &mut rng))).collect();
    let mut report = PatchingReport::default();
    for p in pset {
        let thetas: Vec<RingElement> = points.iter().map(|(a, _)| broken::theta(s, p, a, &eo)).collect::<Result<_>>()?;
        for (c, (_, b)) in points.iter().enumerate() {
            let other = broken::theta(s, p, b, &eo)?;
            let d = other.sub(&thetas[c], trunc)?;
            report.items.push(PatchItem { p: p.clone(), kind: 1, location: c, pass: d.is_empty(), witness: (!d.is_empty()).then(|| format!("difference {d}")) });
        }
        for (ci, cell) in r.cells.iter().enumerate() {
            if cell.chambers.len() != 2 {
                continue;
            }
            let (a, b) = (cell.chambers[0], cell.chambers[1]);
            match cell.facet {
                None => {
                    let n = cx.dim();
                    let rows: Vec<Vec<Q>> = cell.cell.rays.iter().map(|g| qv(g)).collect();
                    let h = polyhedral::hyperplane_normal(&rows, n).unwrap();
                    let src = &points[a].0.coords;
                    let nrm = if linalg::dot(&qv(&h), src).is_positive() { h } else { h.iter().map(|x| -x).collect() };
                    let crossed = apply_theta(&thetas[a], &cell.function.clone().with_cone(thetas[a].cone), &nrm, n, trunc)?;
                    let d = crossed.sub(&thetas[b], trunc)?;
                    report.items.push(PatchItem { p: p.clone(), kind: 2, location: ci, pass: d.is_empty(), witness: (!d.is_empty()).then(|| format!("difference {d}")) });
                }
                Some(fi) => {
                    let facet = &cx.facets()[fi];
                    if !facet.is_interior() {
                        continue;
                    }
                    let (pa, pb) = if r.chambers[a].cone == facet.sides[0] { (a, b) } else { (b, a) };
                    let f = if cell.cell.cone == facet.sides[0] {
                        cell.function.clone()
                    } else {
                        crate::ring::transport(cx, &cell.function, facet.sides[0], true, trunc)?
                    };
                    let ring = SlabRing::new(cx, facet.sides[0], facet.sides[1], &f, trunc)?;
                    let lift = ring.preimage(&thetas[pa], &thetas[pb], trunc)?;
                    report.items.push(PatchItem {
                        p: p.clone(),
                        kind: 3,
                        location: ci,
                        pass: lift.is_some(),
                        witness: lift.is_none().then(|| format!("no slab lift of ({}, {})", thetas[pa], thetas[pb])),
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Point of `cone` where the ray `start − s·m` leaves it.
fn exit_point(start: &[Q], m: &[i64]) -> Option<Vec<Q>> {
    let mut best: Option<Q> = None;
    for (x, &mk) in start.iter().zip(m) {
        if mk > 0 {
            let s = x / q(mk);
            if best.as_ref().is_none_or(|b| s < *b) {
                best = Some(s);
            }
        }
    }
    let s = best?;
    Some(start.iter().zip(m).map(|(x, &mk)| x - &s * q(mk)).collect())
}

/// Half-lines of the walls of σ through the point `j0` of the joint.
fn wall_half_lines(s: &WallStructure, sigma: ConeId, j0: &[Q], ann: &[Vec<Q>]) -> Vec<HalfLine> {
    let mut out = Vec::new();
    for w in s.walls.iter().filter(|w| w.cone == sigma && w.slab_position().is_none()) {
        match w.locate(j0) {
            Membership::Outside => {}
            Membership::Boundary => {
                let d = project(ann, &crate::walls::relint(w));
                out.push(HalfLine { dir: d, normal: w.normal().to_vec(), function: w.function.clone() });
            }
            Membership::Interior => {
                let c = linalg::solve_combination(ann, &qv(w.normal())).unwrap_or_else(|| vec![Q::zero(), Q::zero()]);
                let d = [-c[1].clone(), c[0].clone()];
                let e = [c[1].clone(), -c[0].clone()];
                out.push(HalfLine { dir: d, normal: w.normal().to_vec(), function: w.function.clone() });
                out.push(HalfLine { dir: e, normal: w.normal().to_vec(), function: w.function.clone() });
            }
        }
    }
    out.sort_by(|a, b| angle_cmp(&a.dir, &b.dir));
    out
}

/// Inserts walls through a codimension-zero joint (rays in σ's chart) until
/// the path-ordered product around it is the identity up to `max_weight`.
pub fn complete_codim0(s: &WallStructure, sigma: ConeId, joint: &[Vec<i64>], max_weight: i64) -> Result<WallStructure> {
    let cx = s.complex.clone();
    let n = cx.dim();
    let trunc = &s.trunc;
    let ann = annihilator(joint, n);
    if ann.len() != 2 {
        return Err(Error::InvalidInput("joint must have codimension two".into()));
    }
    let j0 = polyhedral::sum_rays(joint, n);
    if !j0.iter().all(Signed::is_positive) {
        return Err(Error::InvalidInput("joint must lie in the interior of its cone".into()));
    }
    let mut added: BTreeMap<Vec<Vec<i64>>, Vec<LogTerm>> = BTreeMap::new();
    let mut last: Option<(i64, Vec<(Vec<i64>, Vec<i64>)>)> = None;
    loop {
        let mut cur = s.clone();
        for (support, logs) in &added {
            cur.walls.push(Wall::from_log(&cx, sigma, support.clone(), logs.clone(), trunc)?);
        }
        let lines = wall_half_lines(&cur, sigma, &j0, &ann);
        let mut oriented = Vec::new();
        for h in &lines {
            oriented.push((orient(&ann, &h.normal, &h.dir)?, h.function.clone()));
        }
        // Lowest-weight discrepancy of z^{e_i}, divided by z^{e_i}.
        let mut disc: BTreeMap<(Vec<i64>, Vec<i64>), Vec<Q>> = BTreeMap::new();
        let mut low: Option<i64> = None;
        for i in 0..n {
            let mut e = vec![0; n];
            e[i] = 1;
            let start = RingElement::monomial(sigma, vec![0; trunc.rank()], e.clone(), Q::one());
            let mut g = start.clone();
            for (nrm, f) in &oriented {
                g = apply_theta(&g, f, nrm, n, trunc)?;
            }
            for (m, c) in g.sub(&start, trunc)?.terms() {
                let w = trunc.weight(&m.class);
                if low.is_none_or(|l| w < l) {
                    low = Some(w);
                    disc.clear();
                }
                if Some(w) == low {
                    let mut ex = m.exp.clone();
                    ex[i] -= 1;
                    disc.entry((m.class.clone(), ex)).or_insert_with(|| vec![Q::zero(); n])[i] = c.clone();
                }
            }
        }
        let Some(w) = low else { break };
        if w > max_weight {
            break;
        }
        if w > trunc.bound() {
            return Err(Error::NonConvergent(w));
        }
        let keys: Vec<(Vec<i64>, Vec<i64>)> = disc.keys().cloned().collect();
        if last.as_ref() == Some(&(w, keys.clone())) {
            return Err(Error::NonConvergent(w));
        }
        last = Some((w, keys));
        for ((class, m), v) in disc {
            let exit = exit_point(&j0, &m).ok_or(Error::NonConvergent(w))?;
            let mut support: Vec<Vec<i64>> = joint.iter().map(|g| linalg::primitive_i(g)).collect();
            support.push(linalg::primitive(&exit));
            support.sort();
            let rows: Vec<Vec<Q>> = support.iter().map(|g| qv(g)).collect();
            let normal = polyhedral::hyperplane_normal(&rows, n).ok_or(Error::NonConvergent(w))?;
            if linalg::dot_i(&normal, &m) != 0 {
                return Err(Error::NonConvergent(w));
            }
            let dir = project(&ann, &exit);
            let nrm = orient(&ann, &normal, &dir)?;
            // v = c·n for θ = exp(c t^A z^m ∂_n); the new wall contributes −v.
            let k = nrm.iter().position(|&x| x != 0).unwrap();
            let lambda = &v[k] / q(nrm[k]);
            if v.iter().zip(&nrm).any(|(a, &b)| *a != &lambda * q(b)) {
                return Err(Error::NonConvergent(w));
            }
            let entry = added.entry(support).or_default();
            match entry.iter_mut().find(|t| t.class == class && t.exp == m) {
                Some(t) => t.coeff -= &lambda,
                None => entry.push(LogTerm { class, exp: m, coeff: -lambda }),
            }
        }
    }
    let mut out = s.clone();
    for (support, logs) in added {
        let logs: Vec<LogTerm> = logs.into_iter().filter(|t| !t.coeff.is_zero()).collect();
        if !logs.is_empty() {
            out.walls.push(Wall::from_log(&cx, sigma, support, logs, trunc)?);
        }
    }
    Ok(out)
}

/// Sequence of θ's around a point, as JSON, for audit output.
pub fn joint_json(s: &WallStructure, sigma: ConeId, joint: &[Vec<i64>]) -> Value {
    let n = s.dim();
    let ann = annihilator(joint, n);
    let j0 = polyhedral::sum_rays(joint, n);
    let lines = wall_half_lines(s, sigma, &j0, &ann);
    json!({
        "schema": SCHEMA,
        "cone": sigma,
        "joint": joint,
        "half_lines": lines.iter().map(|h| json!({"dir": [fmt_q(&h.dir[0]), fmt_q(&h.dir[1])], "normal": h.normal, "function": h.function.terms_json()})).collect::<Vec<_>>(),
    })
}
