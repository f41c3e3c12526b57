//! Truncated monoid rings k[Q]/I ⊗ k[Λ_σ] with exact rational coefficients.

use crate::error::{Error, Result};
use crate::geometry::{ConeComplex, ConeId};
use crate::json::SCHEMA;
use crate::linalg::{self, fmt_q, parse_q, q, Q};
use num_traits::{One, Zero};
use serde_json::{json, Value};
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

/// A monomial ideal I ⊂ Q = ℕ^m with finite complement.
pub trait IdealMode: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    /// Membership of a class of Q in I.
    fn contains(&self, class: &[i64]) -> bool;
    /// Grading used for order-by-order computations.
    fn weight(&self, class: &[i64]) -> i64;
    /// Largest weight of a class outside I.
    fn bound(&self) -> i64;
    fn to_json(&self) -> Value;
}

#[derive(Debug)]
struct DegreeCutoff {
    weights: Vec<i64>,
    bound: i64,
}

impl IdealMode for DegreeCutoff {
    fn name(&self) -> &'static str {
        "degree"
    }

    fn contains(&self, class: &[i64]) -> bool {
        linalg::dot_i(&self.weights, class) > self.bound
    }

    fn weight(&self, class: &[i64]) -> i64 {
        linalg::dot_i(&self.weights, class)
    }

    fn bound(&self) -> i64 {
        self.bound
    }

    fn to_json(&self) -> Value {
        json!({"mode": "degree", "weights": self.weights, "bound": self.bound})
    }
}

#[derive(Debug)]
struct ExplicitIdeal {
    generators: Vec<Vec<i64>>,
    bound: i64,
}

impl IdealMode for ExplicitIdeal {
    fn name(&self) -> &'static str {
        "ideal"
    }

    fn contains(&self, class: &[i64]) -> bool {
        self.generators.iter().any(|g| g.iter().zip(class).all(|(a, b)| a <= b))
    }

    fn weight(&self, class: &[i64]) -> i64 {
        class.iter().sum()
    }

    fn bound(&self) -> i64 {
        self.bound
    }

    fn to_json(&self) -> Value {
        json!({"mode": "ideal", "generators": self.generators})
    }
}

type ModeBuilder = fn(&Value, usize) -> Result<Box<dyn IdealMode>>;

/// Truncation modes by name.
pub struct TruncationRegistry {
    builders: HashMap<&'static str, ModeBuilder>,
}

impl Default for TruncationRegistry {
    fn default() -> Self {
        let mut r = TruncationRegistry { builders: HashMap::new() };
        r.register("degree", build_degree);
        r.register("ideal", build_ideal);
        r
    }
}

impl TruncationRegistry {
    pub fn register(&mut self, name: &'static str, builder: ModeBuilder) {
        self.builders.insert(name, builder);
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v: Vec<_> = self.builders.keys().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn build(&self, spec: &Value) -> Result<Truncation> {
        let rank = spec
            .get("curve_rank")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::InvalidInput("truncation needs curve_rank".into()))? as usize;
        let mode = spec.get("mode").and_then(Value::as_str).unwrap_or("degree");
        let builder =
            self.builders.get(mode).ok_or_else(|| Error::InvalidInput(format!("unknown truncation mode {mode:?}")))?;
        Ok(Truncation { rank, mode: Arc::from(builder(spec, rank)?) })
    }
}

fn int_vec(v: &Value) -> Option<Vec<i64>> {
    v.as_array()?.iter().map(Value::as_i64).collect()
}

fn build_degree(spec: &Value, rank: usize) -> Result<Box<dyn IdealMode>> {
    let weights = match spec.get("weights") {
        Some(w) => int_vec(w).ok_or_else(|| Error::InvalidInput("weights must be integers".into()))?,
        None => vec![1; rank],
    };
    let bound = spec.get("bound").and_then(Value::as_i64).ok_or_else(|| Error::InvalidInput("degree mode needs bound".into()))?;
    if weights.len() != rank || weights.iter().any(|&w| w <= 0) {
        return Err(Error::InvalidInput("weights must be positive, one per curve class".into()));
    }
    if bound < 0 {
        return Err(Error::InvalidInput("bound must be nonnegative".into()));
    }
    Ok(Box::new(DegreeCutoff { weights, bound }))
}

fn build_ideal(spec: &Value, rank: usize) -> Result<Box<dyn IdealMode>> {
    let gens: Vec<Vec<i64>> = spec
        .get("generators")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidInput("ideal mode needs generators".into()))?
        .iter()
        .map(|g| int_vec(g).filter(|g| g.len() == rank && g.iter().all(|&x| x >= 0)))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::InvalidInput("generators must lie in ℕ^m".into()))?;
    let mut bound = 0;
    for i in 0..rank {
        let pure = gens
            .iter()
            .filter(|g| g.iter().enumerate().all(|(j, &x)| j == i || x == 0) && g[i] > 0)
            .map(|g| g[i])
            .min()
            .ok_or_else(|| Error::InvalidInput(format!("complement of the ideal is infinite in direction {i}")))?;
        bound += pure - 1;
    }
    if gens.iter().any(|g| g.iter().all(|&x| x == 0)) {
        return Err(Error::InvalidInput("ideal contains the unit".into()));
    }
    Ok(Box::new(ExplicitIdeal { generators: gens, bound }))
}

/// A truncation ideal I together with the rank of the curve-class lattice.
#[derive(Clone, Debug)]
pub struct Truncation {
    rank: usize,
    mode: Arc<dyn IdealMode>,
}

impl Truncation {
    /// Total-degree cutoff: A ∈ I iff Σ A_i > bound.
    pub fn degree(rank: usize, bound: i64) -> Self {
        Truncation { rank, mode: Arc::new(DegreeCutoff { weights: vec![1; rank], bound }) }
    }

    pub fn weighted(weights: Vec<i64>, bound: i64) -> Result<Self> {
        let rank = weights.len();
        TruncationRegistry::default().build(&json!({"curve_rank": rank, "mode": "degree", "weights": weights, "bound": bound}))
    }

    pub fn ideal(rank: usize, generators: Vec<Vec<i64>>) -> Result<Self> {
        TruncationRegistry::default().build(&json!({"curve_rank": rank, "mode": "ideal", "generators": generators}))
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        TruncationRegistry::default().build(v)
    }

    pub fn to_json(&self) -> Value {
        let mut v = self.mode.to_json();
        v["curve_rank"] = json!(self.rank);
        v["schema"] = json!(SCHEMA);
        v
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn mode_name(&self) -> &'static str {
        self.mode.name()
    }

    /// True for classes of Q lying in I. Group-level classes are never in I.
    pub fn kills(&self, class: &[i64]) -> bool {
        class.iter().all(|&x| x >= 0) && self.mode.contains(class)
    }

    pub fn weight(&self, class: &[i64]) -> i64 {
        self.mode.weight(class)
    }

    pub fn bound(&self) -> i64 {
        self.mode.bound()
    }

    /// All classes of Q∖I, sorted by (weight, lexicographic).
    pub fn standard_classes(&self) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        let mut cur = vec![0i64; self.rank];
        self.walk(0, &mut cur, &mut out);
        out.sort_by(|a, b| self.weight(a).cmp(&self.weight(b)).then_with(|| a.cmp(b)));
        out
    }

    fn walk(&self, i: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if i == self.rank {
            if !self.kills(cur) {
                out.push(cur.clone());
            }
            return;
        }
        loop {
            let probe: Vec<i64> = cur.iter().enumerate().map(|(j, &x)| if j <= i { x } else { 0 }).collect();
            if self.kills(&probe) {
                break;
            }
            self.walk(i + 1, cur, out);
            cur[i] += 1;
        }
        cur[i] = 0;
    }
}

/// t^A z^m, ordered lexicographically on (A, m).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    pub class: Vec<i64>,
    pub exp: Vec<i64>,
}

impl Monomial {
    pub fn new(class: Vec<i64>, exp: Vec<i64>) -> Self {
        Monomial { class, exp }
    }

    pub fn in_maximal_ideal(&self) -> bool {
        self.class.iter().all(|&x| x >= 0) && self.class.iter().any(|&x| x > 0)
    }
}

/// A finite sum of monomials in the chart of one maximal cone, reduced mod I.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RingElement {
    pub cone: ConeId,
    terms: BTreeMap<Monomial, Q>,
}

fn add_vec(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn scale_vec(a: &[i64], s: i64) -> Vec<i64> {
    a.iter().map(|x| x * s).collect()
}

impl RingElement {
    pub fn zero(cone: ConeId) -> Self {
        RingElement { cone, terms: BTreeMap::new() }
    }

    pub fn one(cone: ConeId, n: usize, rank: usize) -> Self {
        Self::monomial(cone, vec![0; rank], vec![0; n], Q::one())
    }

    /// A single term; no reduction applied.
    pub fn monomial(cone: ConeId, class: Vec<i64>, exp: Vec<i64>, c: Q) -> Self {
        let mut e = Self::zero(cone);
        if !c.is_zero() {
            e.terms.insert(Monomial::new(class, exp), c);
        }
        e
    }

    pub fn from_terms(cone: ConeId, terms: impl IntoIterator<Item = (Monomial, Q)>, trunc: &Truncation) -> Self {
        let mut e = Self::zero(cone);
        for (m, c) in terms {
            e.add_term(m, c, trunc);
        }
        e
    }

    pub fn add_term(&mut self, m: Monomial, c: Q, trunc: &Truncation) {
        if c.is_zero() || trunc.kills(&m.class) {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, class: &[i64], exp: &[i64]) -> Q {
        self.terms.get(&Monomial::new(class.to_vec(), exp.to_vec())).cloned().unwrap_or_else(Q::zero)
    }

    pub fn with_cone(mut self, cone: ConeId) -> Self {
        self.cone = cone;
        self
    }

    /// Sum of the terms with class zero and exponent zero.
    pub fn unit_part(&self) -> Q {
        self.terms
            .iter()
            .filter(|(m, _)| m.class.iter().all(|&x| x == 0) && m.exp.iter().all(|&x| x == 0))
            .map(|(_, c)| c.clone())
            .fold(Q::zero(), |a, b| a + b)
    }

    fn check_cone(&self, other: &RingElement) -> Result<()> {
        if self.cone != other.cone {
            return Err(Error::ConeMismatch(self.cone, other.cone));
        }
        Ok(())
    }

    pub fn add(&self, other: &RingElement, trunc: &Truncation) -> Result<RingElement> {
        self.check_cone(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone(), trunc);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &RingElement, trunc: &Truncation) -> Result<RingElement> {
        self.add(&other.scale(&-Q::one()), trunc)
    }

    pub fn scale(&self, s: &Q) -> RingElement {
        if s.is_zero() {
            return Self::zero(self.cone);
        }
        RingElement { cone: self.cone, terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect() }
    }

    /// Multiplies every term by t^A z^m.
    pub fn shift(&self, class: &[i64], exp: &[i64], trunc: &Truncation) -> RingElement {
        Self::from_terms(
            self.cone,
            self.terms.iter().map(|(m, c)| (Monomial::new(add_vec(&m.class, class), add_vec(&m.exp, exp)), c.clone())),
            trunc,
        )
    }

    pub fn multiply(&self, other: &RingElement, trunc: &Truncation) -> Result<RingElement> {
        self.check_cone(other)?;
        let mut acc: BTreeMap<Monomial, Q> = BTreeMap::new();
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                let class = add_vec(&a.class, &b.class);
                if trunc.kills(&class) {
                    continue;
                }
                *acc.entry(Monomial::new(class, add_vec(&a.exp, &b.exp))).or_insert_with(Q::zero) += x * y;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        Ok(RingElement { cone: self.cone, terms: acc })
    }

    fn nilpotent_check(&self) -> Result<()> {
        if self.terms.keys().all(Monomial::in_maximal_ideal) {
            Ok(())
        } else {
            Err(Error::NonNilpotentArgument)
        }
    }

    /// The part of a unipotent element lying in 𝔪, i.e. `self − 1`.
    fn unipotent_tail(&self, n: usize, trunc: &Truncation) -> Result<RingElement> {
        let one = Self::one(self.cone, n, trunc.rank());
        let g = self.sub(&one, trunc)?;
        if g.terms.keys().all(Monomial::in_maximal_ideal) {
            Ok(g)
        } else {
            Err(Error::NotUnipotent)
        }
    }

    pub fn exp_truncated(&self, n: usize, trunc: &Truncation) -> Result<RingElement> {
        self.nilpotent_check()?;
        let mut sum = Self::one(self.cone, n, trunc.rank());
        let mut term = sum.clone();
        let mut k = 1i64;
        loop {
            term = term.multiply(self, trunc)?.scale(&Q::new(1.into(), k.into()));
            if term.is_empty() {
                return Ok(sum);
            }
            sum = sum.add(&term, trunc)?;
            k += 1;
        }
    }

    /// log(1 + g) = Σ (−1)^{k−1} g^k / k for unipotent elements.
    pub fn log_unipotent(&self, n: usize, trunc: &Truncation) -> Result<RingElement> {
        let g = self.unipotent_tail(n, trunc)?;
        let mut sum = Self::zero(self.cone);
        let mut power = g.clone();
        let mut k = 1i64;
        while !power.is_empty() {
            let sign = if k % 2 == 1 { 1 } else { -1 };
            sum = sum.add(&power.scale(&Q::new(sign.into(), k.into())), trunc)?;
            power = power.multiply(&g, trunc)?;
            k += 1;
        }
        Ok(sum)
    }

    pub fn invert(&self, n: usize, trunc: &Truncation) -> Result<RingElement> {
        let g = self.unipotent_tail(n, trunc)?.scale(&-Q::one());
        let mut sum = Self::one(self.cone, n, trunc.rank());
        let mut power = g.clone();
        while !power.is_empty() {
            sum = sum.add(&power, trunc)?;
            power = power.multiply(&g, trunc)?;
        }
        Ok(sum)
    }

    /// Integer power; negative exponents require a unipotent base.
    pub fn pow(&self, k: i64, n: usize, trunc: &Truncation) -> Result<RingElement> {
        let base = if k < 0 { self.invert(n, trunc)? } else { self.clone() };
        let mut result = Self::one(self.cone, n, trunc.rank());
        let mut b = base;
        let mut e = k.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                result = result.multiply(&b, trunc)?;
            }
            e >>= 1;
            if e > 0 {
                b = b.multiply(&b, trunc)?;
            }
        }
        Ok(result)
    }

    /// Applies a linear map to all exponents.
    pub fn map_exponents(&self, cone: ConeId, m: &[Vec<i64>]) -> RingElement {
        let mut out = Self::zero(cone);
        for (mono, c) in &self.terms {
            let e = Monomial::new(mono.class.clone(), linalg::mat_vec_i(m, &mono.exp));
            *out.terms.entry(e).or_insert_with(Q::zero) += c;
        }
        out.terms.retain(|_, c| !c.is_zero());
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema": SCHEMA,
            "cone": self.cone,
            "terms": self.terms_json(),
        })
    }

    pub fn terms_json(&self) -> Value {
        Value::Array(
            self.terms.iter().map(|(m, c)| json!({"A": m.class, "m": m.exp, "c": fmt_q(c)})).collect(),
        )
    }

    pub fn from_json(v: &Value, trunc: &Truncation) -> Result<RingElement> {
        let cone = v.get("cone").and_then(Value::as_u64).unwrap_or(0) as usize;
        let terms = v.get("terms").unwrap_or(v);
        Self::terms_from_json(cone, terms, trunc)
    }

    pub fn terms_from_json(cone: ConeId, terms: &Value, trunc: &Truncation) -> Result<RingElement> {
        let bad = || Error::InvalidInput("malformed ring element".into());
        let mut out = Self::zero(cone);
        for t in terms.as_array().ok_or_else(bad)? {
            let class = t.get("A").and_then(int_vec).ok_or_else(bad)?;
            let exp = t.get("m").and_then(int_vec).ok_or_else(bad)?;
            let c = match t.get("c") {
                Some(Value::String(s)) => parse_q(s).ok_or_else(bad)?,
                Some(Value::Number(n)) => q(n.as_i64().ok_or_else(bad)?),
                _ => return Err(bad()),
            };
            out.add_term(Monomial::new(class, exp), c, trunc);
        }
        Ok(out)
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| format!("{}·t^{:?}z^{:?}", fmt_q(c), m.class, m.exp))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Where a monomial is tested for membership in 𝒫⁺_x.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Location {
    /// Interior of a maximal cone.
    MaxCone(ConeId),
    /// Relative interior of a codimension-one cone, seen from the chart of `chart`.
    Facet { facet: usize, chart: ConeId },
    /// A point of Δ.
    Delta,
}

/// The stalk location of a global point, seen from the chart of σ.
pub fn location_of(cx: &ConeComplex, sigma: ConeId, global: &[Q]) -> Location {
    let support = cx.support(global);
    if support.len() == cx.dim() {
        Location::MaxCone(sigma)
    } else if support.len() + 1 == cx.dim() {
        match cx.facet_index(&support) {
            Some(facet) => Location::Facet { facet, chart: sigma },
            None => Location::Delta,
        }
    } else {
        Location::Delta
    }
}

/// Membership of t^A z^m in the stalk 𝒫⁺_x.
pub fn admissible_at(cx: &ConeComplex, mono: &Monomial, loc: &Location) -> Result<bool> {
    let in_q = |c: &[i64]| c.iter().all(|&x| x >= 0);
    match loc {
        Location::Delta => Err(Error::LocationInDelta),
        Location::MaxCone(_) => Ok(in_q(&mono.class)),
        Location::Facet { facet, chart } => {
            let f = &cx.facets()[*facet];
            let pairing = linalg::dot_i(&cx.inward_normal(*chart, f), &mono.exp);
            if !f.is_interior() {
                return Ok(pairing >= 0 && in_q(&mono.class));
            }
            if pairing >= 0 {
                Ok(in_q(&mono.class))
            } else {
                Ok(in_q(&add_vec(&mono.class, &scale_vec(&f.kink, pairing))))
            }
        }
    }
}

/// Parallel transport from σ to an adjacent σ′ with kink correction.
pub fn transport(
    cx: &ConeComplex,
    f: &RingElement,
    to: ConeId,
    group_level: bool,
    trunc: &Truncation,
) -> Result<RingElement> {
    let from = f.cone;
    if from == to {
        return Ok(f.clone());
    }
    let facet = cx.facet_between(from, to).ok_or(Error::NotAdjacent(from, to))?;
    let normal = cx.inward_normal(from, facet);
    let (m, kink) = cx.chart_transition(from, to)?;
    let mut out = RingElement::zero(to);
    for (mono, c) in f.terms() {
        let p = linalg::dot_i(&normal, &mono.exp);
        if p < 0 && !group_level {
            return Err(Error::InadmissibleExponent(mono.exp.clone()));
        }
        let class = add_vec(&mono.class, &scale_vec(&kink, p));
        out.add_term(Monomial::new(class, linalg::mat_vec_i(&m, &mono.exp)), c.clone(), trunc);
    }
    Ok(out)
}
