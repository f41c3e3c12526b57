//! The cone complex (B,𝒫): cones, charts, transitions, kinks and relative data.
//!
//! Cones are index sets of divisors. A point of B is stored either in global
//! divisor coordinates (one entry per divisor, supported on a cone) or in the
//! ray basis of a maximal cone.

use crate::error::{Error, Result};
use crate::linalg::{self, q, Q};
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Index of a maximal cone in [`ConeComplex::maximal_cones`].
pub type ConeId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Divisor {
    pub name: String,
    /// Discrepancy coefficient, as an exact fraction string or integer.
    #[serde(with = "crate::json::q_serde")]
    pub a: Q,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intersections {
    pub rho: Vec<usize>,
    pub numbers: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kink {
    pub rho: Vec<usize>,
    pub class: Vec<i64>,
}

/// Input description of a complex, mirroring the geometry JSON.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub n: usize,
    pub curve_rank: usize,
    pub divisors: Vec<Divisor>,
    pub good_strata: Vec<Vec<usize>>,
    #[serde(default)]
    pub intersections: Vec<Intersections>,
    #[serde(default)]
    pub kinks: Vec<Kink>,
    #[serde(default)]
    pub relative: bool,
}

/// A codimension-one cone of 𝒫 with its adjacent maximal cones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Facet {
    pub rays: Vec<usize>,
    pub sides: Vec<ConeId>,
    /// `D_j · X_ρ` for the rays of ρ in sorted order (interior facets only).
    pub numbers: Vec<i64>,
    pub kink: Vec<i64>,
}

impl Facet {
    pub fn is_interior(&self) -> bool {
        self.sides.len() == 2
    }
}

/// A point in the ray basis of a maximal cone.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointInChart {
    pub cone: ConeId,
    pub coords: Vec<Q>,
}

impl PointInChart {
    pub fn new(cone: ConeId, coords: Vec<Q>) -> Self {
        PointInChart { cone, coords }
    }

    pub fn in_cone(&self) -> bool {
        self.coords.iter().all(|c| !c.is_negative())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeComplex {
    n: usize,
    curve_rank: usize,
    divisors: Vec<Divisor>,
    relative: bool,
    strata: BTreeSet<Vec<usize>>,
    cones: Vec<Vec<usize>>,
    maximal: Vec<Vec<usize>>,
    facets: Vec<Facet>,
}

/// Classification of a codimension-one cone in the relative case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeKind {
    Boundary,
    Interior,
}

impl ConeComplex {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn curve_rank(&self) -> usize {
        self.curve_rank
    }

    pub fn divisors(&self) -> &[Divisor] {
        &self.divisors
    }

    pub fn num_divisors(&self) -> usize {
        self.divisors.len()
    }

    pub fn is_relative(&self) -> bool {
        self.relative
    }

    /// All cones of 𝒫 (including the apex), sorted by dimension then lexicographically.
    pub fn cones(&self) -> &[Vec<usize>] {
        &self.cones
    }

    pub fn maximal_cones(&self) -> &[Vec<usize>] {
        &self.maximal
    }

    pub fn rays_of(&self, sigma: ConeId) -> &[usize] {
        &self.maximal[sigma]
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn is_cone(&self, rays: &[usize]) -> bool {
        self.cones.binary_search_by(|c| cmp_cone(c, rays)).is_ok()
    }

    pub fn facet_index(&self, rays: &[usize]) -> Option<usize> {
        self.facets.iter().position(|f| f.rays == rays)
    }

    pub fn facet_between(&self, a: ConeId, b: ConeId) -> Option<&Facet> {
        self.facets.iter().find(|f| f.sides.len() == 2 && f.sides.contains(&a) && f.sides.contains(&b))
    }

    /// Facet of σ opposite the ray at chart position `k`.
    pub fn facet_opposite(&self, sigma: ConeId, k: usize) -> &Facet {
        let mut rays = self.maximal[sigma].clone();
        rays.remove(k);
        let idx = self.facet_index(&rays).expect("every face of a maximal cone is a facet");
        &self.facets[idx]
    }

    /// The maximal cone across the facet at chart position `k`, if interior.
    pub fn neighbor(&self, sigma: ConeId, k: usize) -> Option<ConeId> {
        let f = self.facet_opposite(sigma, k);
        f.sides.iter().copied().find(|&s| s != sigma)
    }

    /// Chart position in σ of the ray not contained in `facet`.
    pub fn opposite_position(&self, sigma: ConeId, facet: &Facet) -> usize {
        self.maximal[sigma]
            .iter()
            .position(|r| !facet.rays.contains(r))
            .expect("facet is a face of sigma")
    }

    /// Maximal cones containing the given cone, by id.
    pub fn star(&self, rays: &[usize]) -> Vec<ConeId> {
        (0..self.maximal.len()).filter(|&s| rays.iter().all(|r| self.maximal[s].contains(r))).collect()
    }

    /// Matrix taking σ-coordinates to σ′-coordinates, and the kink of the shared facet.
    pub fn chart_transition(&self, from: ConeId, to: ConeId) -> Result<(Vec<Vec<i64>>, Vec<i64>)> {
        if from == to {
            return Ok((linalg::identity_i(self.n), vec![0; self.curve_rank]));
        }
        let facet = self.facet_between(from, to).ok_or(Error::NotAdjacent(from, to))?;
        Ok((self.transition_matrix(from, to, facet), facet.kink.clone()))
    }

    fn transition_matrix(&self, from: ConeId, to: ConeId, facet: &Facet) -> Vec<Vec<i64>> {
        let src = &self.maximal[from];
        let dst = &self.maximal[to];
        let a = self.opposite_position(from, facet);
        let a2 = self.opposite_position(to, facet);
        let mut m = vec![vec![0i64; self.n]; self.n];
        // e_a = −e_{a′} − Σ c_j e_j, shared rays map to themselves.
        for (col, ray) in src.iter().enumerate() {
            if col == a {
                m[a2][col] = -1;
                for (j, r) in facet.rays.iter().enumerate() {
                    let row = dst.iter().position(|x| x == r).unwrap();
                    m[row][col] = -facet.numbers[j];
                }
            } else {
                let row = dst.iter().position(|x| x == ray).unwrap();
                m[row][col] = 1;
            }
        }
        m
    }

    /// Primitive covector on σ's chart vanishing on `facet` and positive on σ.
    pub fn inward_normal(&self, sigma: ConeId, facet: &Facet) -> Vec<i64> {
        let k = self.opposite_position(sigma, facet);
        (0..self.n).map(|i| i64::from(i == k)).collect()
    }

    /// Product of transitions along a closed sequence of adjacent maximal cones.
    pub fn monodromy(&self, path: &[ConeId]) -> Result<Vec<Vec<i64>>> {
        let mut m = linalg::identity_i(self.n);
        for w in path.windows(2) {
            let (t, _) = self.chart_transition(w[0], w[1])?;
            m = linalg::mat_mul_i(&t, &m);
        }
        Ok(m)
    }

    /// Cyclic sequence of maximal cones around a codimension-two cone, closed
    /// (first = last). `None` if the link is not a cycle (e.g. on the boundary).
    pub fn loop_around(&self, tau: &[usize]) -> Option<Vec<ConeId>> {
        let star = self.star(tau);
        let first = *star.first()?;
        let mut path = vec![first];
        let mut prev: Option<ConeId> = None;
        let mut cur = first;
        loop {
            let next = star.iter().copied().find(|&s| {
                Some(s) != prev && s != cur && self.facet_between(cur, s).is_some_and(|f| tau.iter().all(|r| f.rays.contains(r)))
            })?;
            path.push(next);
            if next == first {
                return Some(path);
            }
            if path.len() > star.len() + 1 {
                return None;
            }
            prev = Some(cur);
            cur = next;
        }
    }

    /// Global divisor coordinates of a chart point.
    pub fn to_global(&self, p: &PointInChart) -> Vec<Q> {
        let mut g = vec![Q::zero(); self.divisors.len()];
        for (k, r) in self.maximal[p.cone].iter().enumerate() {
            g[*r] = p.coords[k].clone();
        }
        g
    }

    /// Expresses a global point in the chart of σ, if supported there.
    pub fn in_chart(&self, sigma: ConeId, global: &[Q]) -> Option<PointInChart> {
        let rays = &self.maximal[sigma];
        if global.iter().enumerate().any(|(i, x)| !x.is_zero() && !rays.contains(&i)) {
            return None;
        }
        Some(PointInChart::new(sigma, rays.iter().map(|r| global.get(*r).cloned().unwrap_or_else(Q::zero)).collect()))
    }

    /// The lowest-id maximal cone containing a global point.
    pub fn locate(&self, global: &[Q]) -> Option<PointInChart> {
        if global.len() != self.divisors.len() || global.iter().any(Signed::is_negative) {
            return None;
        }
        (0..self.maximal.len()).find_map(|s| self.in_chart(s, global))
    }

    /// Support of a global point (the smallest cone containing it).
    pub fn support(&self, global: &[Q]) -> Vec<usize> {
        global.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(i, _)| i).collect()
    }

    /// True if the point lies in Δ, the union of cones of codimension ≥ 2.
    pub fn in_delta(&self, global: &[Q]) -> bool {
        self.support(global).len() + 2 <= self.n
    }

    /// The combinatorial boundary ∂B: facets lying in a single maximal cone.
    pub fn boundary_facets(&self) -> Vec<&Facet> {
        self.facets.iter().filter(|f| !f.is_interior()).collect()
    }

    pub fn in_boundary(&self, global: &[Q]) -> bool {
        let s = self.support(global);
        self.facets.iter().any(|f| !f.is_interior() && s.iter().all(|r| f.rays.contains(r)))
    }

    /// Values b_i of g_trop on the rays of σ.
    pub fn g_trop_chart(&self, sigma: ConeId) -> Result<Vec<i64>> {
        if !self.relative {
            return Err(Error::NotRelative);
        }
        Ok(self.maximal[sigma].iter().map(|&r| self.divisors[r].b.unwrap_or(0)).collect())
    }

    /// Evaluates g_trop on a global point.
    pub fn g_trop(&self, global: &[Q]) -> Result<Q> {
        if !self.relative {
            return Err(Error::NotRelative);
        }
        Ok(global
            .iter()
            .zip(&self.divisors)
            .fold(Q::zero(), |acc, (x, d)| acc + x * q(d.b.unwrap_or(0))))
    }

    /// Boundary iff the cone lies in g_trop⁻¹(0).
    pub fn classify_cone(&self, rays: &[usize]) -> Result<ConeKind> {
        if !self.relative {
            return Err(Error::NotRelative);
        }
        if rays.iter().all(|&r| self.divisors[r].b.unwrap_or(0) == 0) {
            Ok(ConeKind::Boundary)
        } else {
            Ok(ConeKind::Interior)
        }
    }

    pub fn divisor_index(&self, name: &str) -> Option<usize> {
        self.divisors.iter().position(|d| d.name == name)
    }
}

fn cmp_cone(a: &[usize], b: &[usize]) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

fn subsets(set: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << set.len()) {
        out.push(set.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| x).collect());
    }
    out
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.dedup();
    s
}

/// Validates the input data and builds the complex.
pub fn build_complex(input: &GeometryInput) -> Result<ConeComplex> {
    let n = input.n;
    let s = input.divisors.len();
    if n == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    for d in &input.divisors {
        if d.a.is_negative() {
            return Err(Error::InvalidInput(format!("divisor {} has negative a", d.name)));
        }
        if input.relative && d.b.is_none() {
            return Err(Error::InvalidInput(format!("divisor {} lacks fiber multiplicity b", d.name)));
        }
        if d.b.is_some_and(|b| b < 0) {
            return Err(Error::InvalidInput(format!("divisor {} has negative b", d.name)));
        }
    }
    let mut strata: BTreeSet<Vec<usize>> = BTreeSet::new();
    for raw in &input.good_strata {
        let st = sorted(raw);
        if st.len() != raw.len() {
            return Err(Error::InvalidInput(format!("stratum {st:?} repeats an index")));
        }
        if st.iter().any(|&i| i >= s) {
            return Err(Error::InvalidInput(format!("stratum {st:?} references an unknown divisor")));
        }
        if st.len() > n {
            return Err(Error::InvalidInput(format!("stratum {st:?} has more than {n} divisors")));
        }
        if st.len() > 20 {
            return Err(Error::InvalidInput("stratum too large".into()));
        }
        for sub in subsets(&st) {
            strata.insert(sub);
        }
    }
    for i in 0..s {
        strata.insert(vec![i]);
    }
    strata.insert(vec![]);
    let good = |i: usize| input.divisors[i].a.is_zero();

    let mut cones: Vec<Vec<usize>> = strata.iter().filter(|c| c.iter().all(|&i| good(i))).cloned().collect();
    cones.sort_by(|a, b| cmp_cone(a, b));
    let maximal: Vec<Vec<usize>> = cones.iter().filter(|c| c.len() == n).cloned().collect();
    if maximal.is_empty() {
        return Err(Error::MissingNDimCone(n));
    }

    // Pseudomanifold: every cone lies in a maximal cone.
    for c in &cones {
        if !maximal.iter().any(|m| c.iter().all(|r| m.contains(r))) {
            return Err(Error::NotPseudomanifold(c.clone()));
        }
    }

    // Assumption: n-dimensional strata through a codim-one cone of 𝒫 are in 𝒫.
    for c in cones.iter().filter(|c| c.len() == n - 1 && !c.is_empty()) {
        for st in strata.iter().filter(|st| st.len() == n && c.iter().all(|r| st.contains(r))) {
            if st.iter().any(|&i| !good(i)) {
                return Err(Error::BadDivisorMeetsGoodCurve { rho: c.clone(), stratum: st.clone() });
            }
        }
    }

    // Assumption: good boundaries of small strata are connected.
    for c in cones.iter().filter(|c| c.len() + 1 < n) {
        let verts: Vec<usize> = (0..s)
            .filter(|&j| good(j) && !c.contains(&j) && strata.contains(&sorted(&[c.as_slice(), &[j]].concat())))
            .collect();
        if !connected(&verts, |j, k| strata.contains(&sorted(&[c.as_slice(), &[j, k]].concat()))) {
            return Err(Error::DisconnectedGoodBoundary(c.clone()));
        }
    }

    let mut numbers: BTreeMap<Vec<usize>, Vec<i64>> = BTreeMap::new();
    for it in &input.intersections {
        if it.rho.len() != it.numbers.len() {
            return Err(Error::InvalidInput(format!("intersection row for {:?} has wrong length", it.rho)));
        }
        let mut pairs: Vec<(usize, i64)> = it.rho.iter().copied().zip(it.numbers.iter().copied()).collect();
        pairs.sort_unstable();
        let key: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        numbers.insert(key, pairs.iter().map(|p| p.1).collect());
    }
    let mut kinks: BTreeMap<Vec<usize>, Vec<i64>> = BTreeMap::new();
    for k in &input.kinks {
        if k.class.len() != input.curve_rank {
            return Err(Error::InvalidInput(format!("kink for {:?} has wrong rank", k.rho)));
        }
        if k.class.iter().any(|&x| x < 0) {
            return Err(Error::InvalidInput(format!("kink for {:?} is not in the curve monoid", k.rho)));
        }
        kinks.insert(sorted(&k.rho), k.class.clone());
    }

    let mut facets = Vec::new();
    for c in cones.iter().filter(|c| c.len() == n - 1 && !c.is_empty()) {
        let sides: Vec<ConeId> =
            (0..maximal.len()).filter(|&m| c.iter().all(|r| maximal[m].contains(r))).collect();
        if sides.is_empty() || sides.len() > 2 {
            return Err(Error::NotPseudomanifold(c.clone()));
        }
        let (nums, kink) = if sides.len() == 2 {
            let nums = numbers.get(c).cloned().ok_or_else(|| Error::MissingIntersections(c.clone()))?;
            let kink = kinks.get(c).cloned().ok_or_else(|| Error::MissingKink(c.clone()))?;
            (nums, kink)
        } else {
            (Vec::new(), vec![0; input.curve_rank])
        };
        facets.push(Facet { rays: c.clone(), sides, numbers: nums, kink });
    }

    let cx = ConeComplex {
        n,
        curve_rank: input.curve_rank,
        divisors: input.divisors.clone(),
        relative: input.relative,
        strata,
        cones,
        maximal,
        facets,
    };

    for f in cx.facets.iter().filter(|f| f.is_interior()) {
        let m = cx.transition_matrix(f.sides[0], f.sides[1], f);
        let det = crate::lattice::IntegerMatrix::from_rows(&m, n).determinant();
        if det.abs() != One::one() {
            return Err(Error::NonUnimodularChart(f.rays.clone()));
        }
    }

    if cx.relative {
        check_submersion(&cx)?;
    }
    Ok(cx)
}

fn connected(verts: &[usize], adj: impl Fn(usize, usize) -> bool) -> bool {
    let Some(&start) = verts.first() else { return true };
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for &w in verts {
            if !seen.contains(&w) && adj(v.min(w), v.max(w)) {
                seen.insert(w);
                stack.push(w);
            }
        }
    }
    seen.len() == verts.len()
}

/// g_trop must be linear across each interior facet, and its zero set must be ∂B.
fn check_submersion(cx: &ConeComplex) -> Result<()> {
    let b = |i: usize| cx.divisors[i].b.unwrap_or(0);
    for f in cx.facets.iter().filter(|f| f.is_interior()) {
        let a = cx.rays_of(f.sides[0])[cx.opposite_position(f.sides[0], f)];
        let a2 = cx.rays_of(f.sides[1])[cx.opposite_position(f.sides[1], f)];
        let total: i64 = b(a) + b(a2) + f.rays.iter().zip(&f.numbers).map(|(&j, c)| c * b(j)).sum::<i64>();
        if total != 0 {
            return Err(Error::NotSubmersion(f.rays.clone()));
        }
    }
    for f in &cx.facets {
        let zero = f.rays.iter().all(|&r| b(r) == 0);
        if zero == f.is_interior() {
            return Err(Error::NotSubmersion(f.rays.clone()));
        }
    }
    Ok(())
}

/// The two-dimensional fan Σ_ω and the chart ψ_ω of Star(ω) near the boundary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundaryChart {
    /// n_{τ_ℓ} for ℓ = 0..=r.
    pub normals: Vec<[i64; 2]>,
    /// ψ_j(n_{τ_ℓ}), indexed `[ℓ][j]`.
    pub psi: Vec<Vec<i64>>,
    /// ψ_ω(D_{k_ℓ}^*) ∈ ℤ² × ℤ^{n−2}.
    pub images: Vec<Vec<i64>>,
    /// Whether n_{τ_0} + n_{τ_r} = 0 and the supplied boundary intersections match.
    pub closes: Option<bool>,
}

/// Builds the boundary chart from the self-intersections C_ℓ² (ℓ = 1..r−1) and
/// the rows D_{i_j}·C_ℓ (indexed `[ℓ−1][j]`).
pub fn boundary_chart(
    r: usize,
    self_intersections: &[i64],
    rows: &[Vec<i64>],
    boundary_numbers: Option<&[i64]>,
) -> Result<BoundaryChart> {
    if r < 1 {
        return Err(Error::ChainTooShort);
    }
    if self_intersections.len() != r - 1 || rows.len() != r - 1 {
        return Err(Error::InvalidInput("chain data must have r−1 entries".into()));
    }
    let width = rows.first().map_or(boundary_numbers.map_or(0, |b| b.len()), |x| x.len());
    if rows.iter().any(|x| x.len() != width) {
        return Err(Error::InvalidInput("ragged intersection rows".into()));
    }
    let mut normals = vec![[0, 1], [1, 0]];
    let mut psi = vec![vec![0i64; width], vec![0i64; width]];
    for l in 1..r {
        let c2 = self_intersections[l - 1];
        let (p, c) = (normals[l - 1], normals[l]);
        normals.push([-c2 * c[0] - p[0], -c2 * c[1] - p[1]]);
        let next: Vec<i64> =
            (0..width).map(|j| rows[l - 1][j] - c2 * psi[l][j] - psi[l - 1][j]).collect();
        psi.push(next);
    }
    normals.truncate(r + 1);
    psi.truncate(r + 1);
    let images = normals
        .iter()
        .zip(&psi)
        .map(|(nv, ps)| {
            let mut v = vec![nv[0], nv[1]];
            v.extend(ps.iter().map(|x| -x));
            v
        })
        .collect();
    let closes = boundary_numbers.map(|b| {
        let last = normals[r];
        last == [0, -1] && (0..width).all(|j| psi[0][j] + psi[r][j] == b[j])
    });
    Ok(BoundaryChart { normals, psi, images, closes })
}

/// Deterministic sampler of generic rational points.
pub struct GenericSampler {
    rng: ChaCha8Rng,
}

const PRIMES: [i64; 12] = [1009, 1013, 1019, 1021, 1031, 1033, 1039, 1049, 1051, 1061, 1063, 1069];

impl GenericSampler {
    pub fn new(seed: u64) -> Self {
        GenericSampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// A point in the interior of σ's chart avoiding all given covectors' kernels.
    pub fn point_in_cone(&mut self, sigma: ConeId, n: usize, avoid: &[Vec<Q>]) -> PointInChart {
        loop {
            let coords: Vec<Q> = (0..n)
                .map(|i| {
                    let p = PRIMES[i % PRIMES.len()];
                    Q::new((self.rng.gen_range(p..8 * p)).into(), p.into())
                })
                .collect();
            if avoid.iter().all(|h| !linalg::dot(h, &coords).is_zero()) {
                return PointInChart::new(sigma, coords);
            }
        }
    }

    /// A point `center + ε·v` with small generic `v`, inside the cone of `region`.
    pub fn perturb(&mut self, center: &[Q], scale: &Q, avoid: &[Vec<Q>]) -> Vec<Q> {
        loop {
            let v: Vec<Q> = (0..center.len())
                .map(|i| {
                    let p = PRIMES[(i + 5) % PRIMES.len()];
                    Q::new(self.rng.gen_range(-p..p).into(), p.into())
                })
                .collect();
            let x = linalg::add(center, &linalg::scale(&v, scale));
            if avoid.iter().all(|h| !linalg::dot(h, &x).is_zero()) {
                return x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn div(name: &str) -> Divisor {
        Divisor { name: name.into(), a: Q::zero(), b: None }
    }

    fn input(n: usize, divs: usize, strata: Vec<Vec<usize>>) -> GeometryInput {
        GeometryInput {
            schema: None,
            n,
            curve_rank: 1,
            divisors: (0..divs).map(|i| div(&format!("D{i}"))).collect(),
            good_strata: strata,
            intersections: vec![],
            kinks: vec![],
            relative: false,
        }
    }

    #[test]
    fn one_dimensional_two_rays() {
        let cx = build_complex(&input(1, 2, vec![vec![0], vec![1]])).unwrap();
        assert_eq!(cx.maximal_cones().len(), 2);
        assert!(cx.boundary_facets().is_empty());
        assert!(cx.facets().is_empty());
    }

    #[test]
    fn glued_pair_flips_the_opposite_ray() {
        let mut g = input(2, 3, vec![vec![0, 1], vec![0, 2]]);
        g.intersections.push(Intersections { rho: vec![0], numbers: vec![0] });
        g.kinks.push(Kink { rho: vec![0], class: vec![1] });
        let cx = build_complex(&g).unwrap();
        let (m, k) = cx.chart_transition(0, 1).unwrap();
        assert_eq!(m, vec![vec![1, 0], vec![0, -1]]);
        assert_eq!(k, vec![1]);
        let (id, z) = cx.chart_transition(0, 0).unwrap();
        assert_eq!(id, linalg::identity_i(2));
        assert_eq!(z, vec![0]);
    }

    #[test]
    fn negative_self_intersection_shears() {
        let mut g = input(2, 3, vec![vec![0, 1], vec![0, 2]]);
        g.intersections.push(Intersections { rho: vec![0], numbers: vec![-1] });
        g.kinks.push(Kink { rho: vec![0], class: vec![1] });
        let cx = build_complex(&g).unwrap();
        let (m, _) = cx.chart_transition(0, 1).unwrap();
        // e₂ = −e₂′ + e₁ in σ′ coordinates.
        assert_eq!(linalg::mat_vec_i(&m, &[0, 1]), vec![1, -1]);
    }

    #[test]
    fn missing_top_cone() {
        assert_eq!(build_complex(&input(2, 2, vec![vec![0], vec![1]])), Err(Error::MissingNDimCone(2)));
    }

    #[test]
    fn absolute_g_trop_fails() {
        let cx = build_complex(&input(1, 2, vec![vec![0], vec![1]])).unwrap();
        assert_eq!(cx.g_trop(&[q(1), q(0)]), Err(Error::NotRelative));
    }

    #[test]
    fn boundary_chart_recursion() {
        let bc = boundary_chart(2, &[-1], &[vec![]], None).unwrap();
        assert_eq!(bc.normals[2], [1, -1]);
        let bc = boundary_chart(2, &[-2], &[vec![]], None).unwrap();
        assert_eq!(bc.normals[2], [2, -1]);
        let bc = boundary_chart(1, &[], &[], None).unwrap();
        assert_eq!(bc.normals, vec![[0, 1], [1, 0]]);
        assert_eq!(boundary_chart(0, &[], &[], None), Err(Error::ChainTooShort));
    }
}
