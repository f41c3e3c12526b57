//! Broken lines, decorated broken lines, theta functions and tropical
//! structure constants.
//!
//! Lines are traced backwards from the endpoint. Candidate final monomials
//! come from a forward closure over (cone, exponent, class) states; each
//! candidate is then confirmed by following the ray `y + s·m` back to
//! infinity, inverting one wall-crossing choice at every event.

use crate::error::{Error, Result};
use crate::geometry::{ConeComplex, ConeId, GenericSampler, PointInChart};
use crate::json::SCHEMA;
use crate::linalg::{self, fmt_q, q, qv, Q};
use crate::polyhedral::Membership;
use crate::ring::{self, Monomial, RingElement, Truncation};
use crate::walls::{Wall, WallStructure};
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Multiplicity of one logarithm term of one wall at a bend.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MuEntry {
    pub wall: usize,
    pub term: usize,
    pub count: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Crossing {
    /// Walls of one hyperplane inside a maximal cone.
    Walls(Vec<usize>),
    /// An interior facet of 𝒫, entered from `from`.
    Facet { facet: usize, from: ConeId },
}

/// A wall or facet crossing along a broken line.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Event {
    pub crossing: Crossing,
    /// Cone of the segment after the event, and the event point in its chart.
    pub cone: ConeId,
    pub point: Vec<Q>,
    /// ⟨n, m⟩ with n positive on the incoming side.
    pub pairing: i64,
    /// The chosen term of f^{⟨n,m⟩}.
    pub class: Vec<i64>,
    pub exp: Vec<i64>,
    pub coeff: Q,
    /// Decoration; empty for undecorated lines.
    pub mu: Vec<MuEntry>,
}

impl Event {
    /// Whether the monomial changes here beyond re-coordinatization.
    pub fn is_bend(&self) -> bool {
        match self.crossing {
            Crossing::Facet { .. } => true,
            Crossing::Walls(_) => self.class.iter().any(|&x| x != 0) || self.exp.iter().any(|&x| x != 0),
        }
    }
}

/// One segment `a t^A z^m` of a broken line.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Segment {
    pub cone: ConeId,
    pub class: Vec<i64>,
    pub exp: Vec<i64>,
    pub coeff: Q,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BrokenLine {
    pub p: Vec<i64>,
    pub endpoint: PointInChart,
    /// Segments in time order; the first carries z^p with coefficient 1.
    pub segments: Vec<Segment>,
    /// `events[i]` separates `segments[i]` and `segments[i+1]`.
    pub events: Vec<Event>,
    pub decorated: bool,
}

impl BrokenLine {
    pub fn last(&self) -> &Segment {
        self.segments.last().expect("a broken line has a segment")
    }

    pub fn bends(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.is_bend())
    }

    /// Deduplication and ordering key.
    pub fn key(&self) -> Vec<(Crossing, Vec<i64>, Vec<i64>, Vec<MuEntry>)> {
        self.events.iter().map(|e| (e.crossing.clone(), e.class.clone(), e.exp.clone(), e.mu.clone())).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "p": self.p,
            "endpoint": {"cone": self.endpoint.cone, "coords": self.endpoint.coords.iter().map(fmt_q).collect::<Vec<_>>()},
            "final": {"A": self.last().class, "m": self.last().exp, "c": fmt_q(&self.last().coeff)},
            "segments": self.segments.iter().map(|s| json!({"cone": s.cone, "A": s.class, "m": s.exp, "c": fmt_q(&s.coeff)})).collect::<Vec<_>>(),
            "events": self.events.iter().map(|e| json!({
                "kind": match &e.crossing { Crossing::Walls(w) => json!({"walls": w}), Crossing::Facet { facet, from } => json!({"facet": facet, "from": from}) },
                "cone": e.cone,
                "point": e.point.iter().map(fmt_q).collect::<Vec<_>>(),
                "pairing": e.pairing,
                "bend": e.is_bend(),
                "term": {"A": e.class, "m": e.exp, "c": fmt_q(&e.coeff)},
                "mu": e.mu.iter().map(|m| json!([m.wall, m.term, m.count])).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct EnumOptions {
    pub decorated: bool,
    pub seed: u64,
    /// Bound on forward-closure states and on backward tracing steps.
    pub max_steps: usize,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { decorated: false, seed: 0, max_steps: 200_000 }
    }
}

/// Results of transport: all terms of f^{⟨n,m⟩}·a z^m, then transported to `to`.
pub fn transport_results(
    cx: &ConeComplex,
    mono: &Monomial,
    coeff: &Q,
    f: &RingElement,
    normal: &[i64],
    to: ConeId,
    trunc: &Truncation,
) -> Result<Vec<(Monomial, Q)>> {
    let k = linalg::dot_i(normal, &mono.exp);
    if k <= 0 {
        return Err(Error::WrongSideCrossing);
    }
    let g = f.pow(k, cx.dim(), trunc)?;
    let mut out = Vec::new();
    for (t, c) in g.terms() {
        let single = RingElement::monomial(f.cone, vec![0; trunc.rank()], vec![0; cx.dim()], c * coeff)
            .shift(&add(&t.class, &mono.class), &add(&t.exp, &mono.exp), trunc);
        let moved = ring::transport(cx, &single.with_cone(f.cone), to, false, trunc)?;
        out.extend(moved.terms().map(|(m, c)| (m.clone(), c.clone())));
    }
    Ok(out)
}

/// The result of transport with the given term index of f^{⟨n,m⟩}.
pub fn transport_result(
    cx: &ConeComplex,
    mono: &Monomial,
    coeff: &Q,
    f: &RingElement,
    normal: &[i64],
    to: ConeId,
    index: usize,
    trunc: &Truncation,
) -> Result<Option<(Monomial, Q)>> {
    Ok(transport_results(cx, mono, coeff, f, normal, to, trunc)?.into_iter().nth(index))
}

fn add(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn scale(a: &[i64], s: i64) -> Vec<i64> {
    a.iter().map(|x| x * s).collect()
}

fn nonneg(a: &[i64]) -> bool {
    a.iter().all(|&x| x >= 0)
}

pub(crate) fn to_global_i(cx: &ConeComplex, cone: ConeId, v: &[i64]) -> Vec<i64> {
    let mut g = vec![0; cx.num_divisors()];
    for (k, r) in cx.rays_of(cone).iter().enumerate() {
        g[*r] = v[k];
    }
    g
}

/// A choice at an event: the inverse image of one term of the crossing factor.
#[derive(Clone, Debug)]
struct Choice {
    class: Vec<i64>,
    exp: Vec<i64>,
    coeff: Q,
    mu: Vec<MuEntry>,
}

/// Filter on events met by a backward trace. Receives the number of bends
/// already traced (counted from the endpoint) and the candidate event.
pub type Guide<'g> = dyn Fn(usize, &Event) -> bool + 'g;

/// Precomputed wall data for tracing.
struct Tracer<'a> {
    s: &'a WallStructure,
    cx: &'a ConeComplex,
    trunc: &'a Truncation,
    p: Vec<i64>,
    opts: EnumOptions,
    /// Non-slab walls per maximal cone.
    by_cone: Vec<Vec<usize>>,
    /// Slab walls per facet.
    by_facet: BTreeMap<usize, Vec<usize>>,
    steps: usize,
    endpoint: PointInChart,
    found: Vec<BrokenLine>,
    guide: Option<&'a Guide<'a>>,
}

/// State of a backward trace.
#[derive(Clone)]
struct Trace {
    cone: ConeId,
    point: Vec<Q>,
    exp: Vec<i64>,
    class: Vec<i64>,
    coeff: Q,
    events: Vec<(Event, Segment)>,
}

impl<'a> Tracer<'a> {
    fn new(s: &'a WallStructure, p: &[i64], x: &PointInChart, opts: EnumOptions) -> Self {
        let cx = &*s.complex;
        let mut by_cone = vec![Vec::new(); cx.maximal_cones().len()];
        let mut by_facet: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, w) in s.walls.iter().enumerate() {
            match w.slab_position() {
                Some(k) => {
                    let f = cx.facet_opposite(w.cone, k);
                    by_facet.entry(cx.facet_index(&f.rays).unwrap()).or_default().push(i);
                }
                None => by_cone[w.cone].push(i),
            }
        }
        Tracer {
            s,
            cx,
            trunc: &s.trunc,
            p: p.to_vec(),
            opts,
            by_cone,
            by_facet,
            steps: 0,
            endpoint: x.clone(),
            found: Vec::new(),
            guide: None,
        }
    }

    fn wall(&self, i: usize) -> &Wall {
        &self.s.walls[i]
    }

    fn suggestion(&self) -> String {
        let x = &self.endpoint;
        let avoid: Vec<Vec<Q>> = self.by_cone[x.cone].iter().map(|&i| qv(self.wall(i).normal())).collect();
        let mut sampler = GenericSampler::new(self.opts.seed);
        let mut y = sampler.perturb(&x.coords, &Q::new(1.into(), 97.into()), &avoid);
        for c in &mut y {
            if !c.is_positive() {
                *c = Q::new(1.into(), 1009.into());
            }
        }
        format!("x = ({})", y.iter().map(fmt_q).collect::<Vec<_>>().join(", "))
    }

    fn nongeneric(&self, witness: String) -> Error {
        Error::NonGenericEndpoint { witness, suggestion: self.suggestion() }
    }

    fn check_endpoint(&self) -> Result<()> {
        let x = &self.endpoint;
        if x.coords.len() != self.cx.dim() || x.cone >= self.cx.maximal_cones().len() {
            return Err(Error::InvalidInput("endpoint does not match the complex".into()));
        }
        if x.coords.iter().any(|c| !c.is_positive()) {
            return Err(self.nongeneric("endpoint is not in the interior of a maximal cone".into()));
        }
        for &i in &self.by_cone[x.cone] {
            if linalg::dot(&qv(self.wall(i).normal()), &x.coords).is_zero() {
                return Err(self.nongeneric(format!("endpoint lies on the hyperplane of wall {i}")));
            }
        }
        Ok(())
    }

    fn allows(&self, done: &[(Event, Segment)], event: &Event) -> bool {
        match self.guide {
            Some(g) => g(done.iter().filter(|(e, _)| e.is_bend()).count(), event),
            None => true,
        }
    }

    fn tick(&mut self) -> Result<()> {
        self.steps += 1;
        if self.steps > self.opts.max_steps {
            return Err(Error::TraceLimit(self.opts.max_steps));
        }
        Ok(())
    }

    /// Slab walls containing a global point, or an error on a slab boundary.
    fn slabs_at(&self, facet: usize, global: &[Q]) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for &i in self.by_facet.get(&facet).map(Vec::as_slice).unwrap_or(&[]) {
            let w = self.wall(i);
            let Some(pc) = self.cx.in_chart(w.cone, global) else { continue };
            match w.locate(&pc.coords) {
                Membership::Interior => out.push(i),
                Membership::Boundary => return Err(self.nongeneric(format!("a line meets the boundary of slab {i}"))),
                Membership::Outside => {}
            }
        }
        Ok(out)
    }

    /// Function of wall i in the chart of σ.
    fn function_in(&self, i: usize, sigma: ConeId) -> Result<RingElement> {
        self.s.function_in(i, sigma)
    }

    /// Log terms of wall i (as (class, exp, coeff)) in the chart of σ.
    fn log_in(&self, i: usize, sigma: ConeId) -> Result<Vec<(Vec<i64>, Vec<i64>, Q)>> {
        let w = self.wall(i);
        w.log_terms
            .iter()
            .map(|t| {
                let e = if w.cone == sigma {
                    t.exp.clone()
                } else {
                    let mono = RingElement::monomial(w.cone, t.class.clone(), t.exp.clone(), Q::one());
                    let moved = ring::transport(self.cx, &mono, sigma, true, self.trunc)?;
                    let e = moved.terms().next().map(|(m, _)| m.exp.clone()).unwrap_or_else(|| t.exp.clone());
                    e
                };
                Ok((t.class.clone(), e, t.coeff.clone()))
            })
            .collect()
    }

    /// Choices at an event through `walls` with pairing k, bounded by `budget`.
    fn choices(&self, walls: &[usize], sigma: ConeId, k: i64, budget: &[i64]) -> Result<Vec<Choice>> {
        let n = self.cx.dim();
        let rank = self.trunc.rank();
        if !self.opts.decorated {
            let mut g = RingElement::one(sigma, n, rank);
            for &i in walls {
                g = g.multiply(&self.function_in(i, sigma)?.pow(k, n, self.trunc)?, self.trunc)?;
            }
            return Ok(g
                .terms()
                .filter(|(m, _)| nonneg(&sub(budget, &m.class)))
                .map(|(m, c)| Choice { class: m.class.clone(), exp: m.exp.clone(), coeff: c.clone(), mu: vec![] })
                .collect());
        }
        let mut logs: Vec<(usize, usize, Vec<i64>, Vec<i64>, Q)> = Vec::new();
        for &i in walls {
            for (j, (c, e, w)) in self.log_in(i, sigma)?.into_iter().enumerate() {
                logs.push((i, j, c, e, w * q(k)));
            }
        }
        let mut out = Vec::new();
        let start = Choice { class: vec![0; rank], exp: vec![0; n], coeff: Q::one(), mu: vec![] };
        self.mu_walk(&logs, 0, start, budget, &mut out);
        Ok(out)
    }

    fn mu_walk(
        &self,
        logs: &[(usize, usize, Vec<i64>, Vec<i64>, Q)],
        idx: usize,
        cur: Choice,
        budget: &[i64],
        out: &mut Vec<Choice>,
    ) {
        if idx == logs.len() {
            out.push(cur);
            return;
        }
        let (wall, term, class, exp, c) = &logs[idx];
        let mut count = 0u32;
        let mut next = cur;
        let mut power = Q::one();
        let mut fact = Q::one();
        loop {
            let mut branch = next.clone();
            branch.coeff = &branch.coeff * &power / &fact;
            if count > 0 {
                branch.mu.push(MuEntry { wall: *wall, term: *term, count });
            }
            self.mu_walk(logs, idx + 1, branch, budget, out);
            count += 1;
            next.class = add(&next.class, class);
            next.exp = add(&next.exp, exp);
            if !nonneg(&sub(budget, &next.class)) || self.trunc.kills(&next.class) || class.iter().all(|&x| x == 0) {
                return;
            }
            power = &power * c;
            fact = &fact * q(i64::from(count));
        }
    }

    /// Follows the ray `y + s·m` backwards from the state.
    fn trace(&mut self, st: Trace) -> Result<()> {
        self.tick()?;
        let cx = self.cx;
        let n = cx.dim();
        let m = qv(&st.exp);
        let mut best: Option<Q> = None;
        let mut hits: Vec<(usize, Membership)> = Vec::new();
        let mut exits: Vec<usize> = Vec::new();
        let consider = |s: Q, best: &mut Option<Q>| -> i32 {
            match best {
                Some(b) if s > *b => 1,
                Some(b) if s == *b => 0,
                _ => {
                    *best = Some(s);
                    -1
                }
            }
        };
        for &i in &self.by_cone[st.cone] {
            let w = self.wall(i);
            let nq = qv(w.normal());
            let d = linalg::dot(&nq, &m);
            if d.is_zero() {
                continue;
            }
            let s = -linalg::dot(&nq, &st.point) / &d;
            if !s.is_positive() {
                continue;
            }
            let z = linalg::add(&st.point, &linalg::scale(&m, &s));
            let mem = w.locate(&z);
            if mem == Membership::Outside {
                continue;
            }
            match consider(s, &mut best) {
                -1 => {
                    hits = vec![(i, mem)];
                    exits.clear();
                }
                0 => hits.push((i, mem)),
                _ => {}
            }
        }
        for k in 0..n {
            if st.exp[k] >= 0 {
                continue;
            }
            let s = -&st.point[k] / q(st.exp[k]);
            match consider(s, &mut best) {
                -1 => {
                    hits.clear();
                    exits = vec![k];
                }
                0 => exits.push(k),
                _ => {}
            }
        }
        let Some(s) = best else {
            return self.finish(st);
        };
        let z = linalg::add(&st.point, &linalg::scale(&m, &s));
        let witness = || format!("point ({}) in cone {}", z.iter().map(fmt_q).collect::<Vec<_>>().join(", "), st.cone);
        if hits.iter().any(|(_, mem)| *mem == Membership::Boundary) || exits.len() > 1 || (!hits.is_empty() && !exits.is_empty()) {
            return Err(self.nongeneric(witness()));
        }
        if !hits.is_empty() {
            let plane = linalg::primitive_i(self.wall(hits[0].0).normal());
            let neg: Vec<i64> = plane.iter().map(|x| -x).collect();
            if hits.iter().any(|(i, _)| {
                let h = linalg::primitive_i(self.wall(*i).normal());
                h != plane && h != neg
            }) {
                return Err(self.nongeneric(witness()));
            }
            let walls: Vec<usize> = hits.iter().map(|h| h.0).collect();
            let k = linalg::dot_i(&plane, &st.exp).abs();
            for ch in self.choices(&walls, st.cone, k, &st.class)? {
                let class = sub(&st.class, &ch.class);
                let exp = sub(&st.exp, &ch.exp);
                let event = Event {
                    crossing: Crossing::Walls(walls.clone()),
                    cone: st.cone,
                    point: z.clone(),
                    pairing: k,
                    class: ch.class.clone(),
                    exp: ch.exp.clone(),
                    coeff: ch.coeff.clone(),
                    mu: ch.mu.clone(),
                };
                if !self.allows(&st.events, &event) {
                    continue;
                }
                let seg = Segment { cone: st.cone, class: st.class.clone(), exp: st.exp.clone(), coeff: Q::zero() };
                let mut events = st.events.clone();
                events.push((event, seg));
                self.trace(Trace { cone: st.cone, point: z.clone(), exp, class, coeff: &st.coeff * &ch.coeff, events })?;
            }
            return Ok(());
        }
        let k = exits[0];
        let facet = cx.facet_opposite(st.cone, k);
        if !facet.is_interior() {
            return Ok(());
        }
        let global = cx.to_global(&PointInChart::new(st.cone, z.clone()));
        if cx.in_delta(&global) {
            return Err(self.nongeneric(witness()));
        }
        let fidx = cx.facet_index(&facet.rays).unwrap();
        let prev = cx.neighbor(st.cone, k).unwrap();
        let (mt, kink) = cx.chart_transition(st.cone, prev)?;
        let z2 = cx.in_chart(prev, &global).expect("facet point lies in both cones").coords;
        let moved = linalg::mat_vec_i(&mt, &st.exp);
        let k2 = -st.exp[k];
        let slabs = self.slabs_at(fidx, &global)?;
        let budget = sub(&st.class, &scale(&kink, k2));
        if !nonneg(&budget) {
            return Ok(());
        }
        for ch in self.choices(&slabs, prev, k2, &budget)? {
            let class = sub(&budget, &ch.class);
            let exp = sub(&moved, &ch.exp);
            let event = Event {
                crossing: Crossing::Facet { facet: fidx, from: prev },
                cone: st.cone,
                point: z.clone(),
                pairing: k2,
                class: ch.class.clone(),
                exp: ch.exp.clone(),
                coeff: ch.coeff.clone(),
                mu: ch.mu.clone(),
            };
            if !self.allows(&st.events, &event) {
                continue;
            }
            let seg = Segment { cone: st.cone, class: st.class.clone(), exp: st.exp.clone(), coeff: Q::zero() };
            let mut events = st.events.clone();
            events.push((event, seg));
            self.trace(Trace { cone: prev, point: z2.clone(), exp, class, coeff: &st.coeff * &ch.coeff, events })?;
        }
        Ok(())
    }

    /// Records a line if the unbounded end carries z^p with class zero.
    fn finish(&mut self, st: Trace) -> Result<()> {
        if st.class.iter().any(|&x| x != 0) || to_global_i(self.cx, st.cone, &st.exp) != self.p {
            return Ok(());
        }
        let mut segments = vec![Segment { cone: st.cone, class: st.class.clone(), exp: st.exp.clone(), coeff: Q::one() }];
        let mut events = Vec::new();
        let mut coeff = Q::one();
        for (ev, seg) in st.events.iter().rev() {
            coeff = &coeff * &ev.coeff;
            segments.push(Segment { cone: seg.cone, class: seg.class.clone(), exp: seg.exp.clone(), coeff: coeff.clone() });
            events.push(ev.clone());
        }
        self.found.push(BrokenLine {
            p: self.p.clone(),
            endpoint: self.endpoint.clone(),
            segments,
            events,
            decorated: self.opts.decorated,
        });
        Ok(())
    }

    /// Forward closure of reachable (cone, exponent, class) states.
    fn candidates(&mut self) -> Result<BTreeSet<(Vec<i64>, Vec<i64>)>> {
        let cx = self.cx;
        let n = cx.dim();
        let mut seen: BTreeSet<(ConeId, Vec<i64>, Vec<i64>)> = BTreeSet::new();
        let mut queue: VecDeque<(ConeId, Vec<i64>, Vec<i64>)> = VecDeque::new();
        let pg: Vec<Q> = self.p.iter().map(|&x| q(x)).collect();
        for sigma in 0..cx.maximal_cones().len() {
            if let Some(pc) = cx.in_chart(sigma, &pg) {
                let e: Vec<i64> = pc.coords.iter().map(|c| c.to_integer().try_into().unwrap()).collect();
                let st = (sigma, e, vec![0; self.trunc.rank()]);
                if seen.insert(st.clone()) {
                    queue.push_back(st);
                }
            }
        }
        let push = |st: (ConeId, Vec<i64>, Vec<i64>), seen: &mut BTreeSet<_>, queue: &mut VecDeque<_>| -> Result<()> {
            if seen.len() > self.opts.max_steps {
                return Err(Error::TraceLimit(self.opts.max_steps));
            }
            if seen.insert(st.clone()) {
                queue.push_back(st);
            }
            Ok(())
        };
        while let Some((sigma, e, a)) = queue.pop_front() {
            for &i in &self.by_cone[sigma] {
                let k = linalg::dot_i(self.wall(i).normal(), &e).abs();
                if k == 0 {
                    continue;
                }
                let g = self.wall(i).function.pow(k, n, self.trunc)?;
                for (t, _) in g.terms() {
                    let cls = add(&a, &t.class);
                    if t.class.iter().all(|&x| x == 0) || self.trunc.kills(&cls) {
                        continue;
                    }
                    push((sigma, add(&e, &t.exp), cls), &mut seen, &mut queue)?;
                }
            }
            for k in 0..n {
                if e[k] <= 0 {
                    continue;
                }
                let Some(next) = cx.neighbor(sigma, k) else { continue };
                let facet = cx.facet_opposite(sigma, k);
                let fidx = cx.facet_index(&facet.rays).unwrap();
                let (mt, kink) = cx.chart_transition(sigma, next)?;
                let base = add(&a, &scale(&kink, e[k]));
                if self.trunc.kills(&base) {
                    continue;
                }
                let mut g = RingElement::one(sigma, n, self.trunc.rank());
                for &i in self.by_facet.get(&fidx).map(Vec::as_slice).unwrap_or(&[]) {
                    g = g.multiply(&self.function_in(i, sigma)?, self.trunc)?;
                }
                let g = g.pow(e[k], n, self.trunc)?;
                for (t, _) in g.terms() {
                    let cls = add(&base, &t.class);
                    if self.trunc.kills(&cls) {
                        continue;
                    }
                    push((next, linalg::mat_vec_i(&mt, &add(&e, &t.exp)), cls), &mut seen, &mut queue)?;
                }
            }
        }
        Ok(seen.into_iter().filter(|(c, _, _)| *c == self.endpoint.cone).map(|(_, e, a)| (e, a)).collect())
    }
}

/// All (decorated) broken lines with asymptotic monomial `p` (global
/// coordinates) ending at `x`, in canonical key order.
pub fn enumerate(s: &WallStructure, p: &[i64], x: &PointInChart, opts: &EnumOptions) -> Result<Vec<BrokenLine>> {
    let cx = &*s.complex;
    if p.len() != cx.num_divisors() {
        return Err(Error::InvalidInput(format!("p must have {} global coordinates", cx.num_divisors())));
    }
    if p.iter().all(|&x| x == 0) {
        return Err(Error::InvalidInput("p must be nonzero".into()));
    }
    let pg: Vec<Q> = p.iter().map(|&v| q(v)).collect();
    if cx.locate(&pg).is_none() {
        return Err(Error::InvalidInput(format!("p = {p:?} is not a point of B")));
    }
    let mut t = Tracer::new(s, p, x, opts.clone());
    t.check_endpoint()?;
    for (e, a) in t.candidates()? {
        let st = Trace { cone: x.cone, point: x.coords.clone(), exp: e, class: a, coeff: Q::one(), events: vec![] };
        t.trace(st)?;
    }
    let mut lines = t.found;
    lines.sort_by(|a, b| a.key().cmp(&b.key()).then_with(|| a.last().cmp(b.last())));
    Ok(lines)
}

/// Lines with asymptotic monomial `p` ending at `x` with final class and
/// exponent (chart of x) fixed, keeping only events accepted by `guide`.
pub fn trace_guided(
    s: &WallStructure,
    p: &[i64],
    x: &PointInChart,
    final_class: &[i64],
    final_exp: &[i64],
    opts: &EnumOptions,
    guide: &Guide<'_>,
) -> Result<Vec<BrokenLine>> {
    let mut t = Tracer::new(s, p, x, opts.clone());
    t.guide = Some(guide);
    t.check_endpoint()?;
    let st = Trace {
        cone: x.cone,
        point: x.coords.clone(),
        exp: final_exp.to_vec(),
        class: final_class.to_vec(),
        coeff: Q::one(),
        events: vec![],
    };
    t.trace(st)?;
    let mut lines = t.found;
    lines.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(lines)
}

/// ϑ_p(x) = Σ a_β z^{m_β}; ϑ₀ is the unit.
pub fn theta(s: &WallStructure, p: &[i64], x: &PointInChart, opts: &EnumOptions) -> Result<RingElement> {
    if p.iter().all(|&v| v == 0) {
        return Ok(s.one(x.cone));
    }
    let mut undecorated = opts.clone();
    undecorated.decorated = false;
    let lines = enumerate(s, p, x, &undecorated)?;
    Ok(sum_lines(s, x.cone, &lines))
}

pub fn sum_lines(s: &WallStructure, cone: ConeId, lines: &[BrokenLine]) -> RingElement {
    let mut out = RingElement::zero(cone);
    for l in lines {
        let seg = l.last();
        out.add_term(Monomial::new(seg.class.clone(), seg.exp.clone()), seg.coeff.clone(), &s.trunc);
    }
    out
}

/// Lines with asymptotic monomial p, or the single trivial line data for p = 0.
fn finals(s: &WallStructure, p: &[i64], x: &PointInChart, opts: &EnumOptions) -> Result<Vec<(Vec<i64>, Vec<i64>, Q)>> {
    Ok(theta(s, p, x, opts)?.terms().map(|(m, c)| (m.class.clone(), m.exp.clone(), c.clone())).collect())
}

/// α^trop(p₁,p₂,r) at an explicit endpoint, as the coefficient of z^r
/// (`r` in the chart of x).
pub fn alpha_trop_at(s: &WallStructure, p1: &[i64], p2: &[i64], r: &[i64], x: &PointInChart, opts: &EnumOptions) -> Result<RingElement> {
    let a = finals(s, p1, x, opts)?;
    let b = finals(s, p2, x, opts)?;
    let mut out = RingElement::zero(x.cone);
    for (ca, ea, qa) in &a {
        for (cb, eb, qb) in &b {
            if add(ea, eb) == r {
                out.add_term(Monomial::new(add(ca, cb), r.to_vec()), qa * qb, &s.trunc);
            }
        }
    }
    Ok(out)
}

/// An endpoint near `r` in the given cone, displaced along `dir`, lying on
/// no wall hyperplane and on the same side as r of every hyperplane missing r.
pub fn endpoint_near(s: &WallStructure, cone: ConeId, r: &[i64], dir: &[i64]) -> Result<PointInChart> {
    let cx = &*s.complex;
    let rq = qv(r);
    let dq = qv(dir);
    let planes: Vec<Vec<Q>> = s.walls.iter().filter(|w| w.cone == cone && w.slab_position().is_none()).map(|w| qv(w.normal())).collect();
    let mut eps = Q::one();
    for _ in 0..64 {
        let x = linalg::add(&rq, &linalg::scale(&dq, &eps));
        let ok = x.iter().all(Signed::is_positive)
            && planes.iter().all(|h| {
                let vx = linalg::dot(h, &x);
                let vr = linalg::dot(h, &rq);
                !vx.is_zero() && (vr.is_zero() || linalg::sign(&vx) == linalg::sign(&vr))
            })
            && rq.iter().zip(&x).all(|(a, b)| !a.is_positive() || b.is_positive());
        if ok {
            return Ok(PointInChart::new(cone, x));
        }
        eps /= q(3);
    }
    let _ = cx;
    Err(Error::NonGenericEndpoint { witness: format!("no endpoint near r = {r:?} along {dir:?}"), suggestion: "another direction".into() })
}

/// A generic direction with distinct prime-like entries, positive where r vanishes.
pub fn default_direction(r: &[i64]) -> Vec<i64> {
    const STEPS: [i64; 8] = [7, 11, 13, 17, 19, 23, 29, 31];
    r.iter().enumerate().map(|(i, _)| STEPS[i % STEPS.len()] * if i % 2 == 0 { 1 } else { -1 }).map(|v| v.abs()).collect()
}

/// α^trop(p₁,p₂,r) for r given in global coordinates; the endpoint is chosen
/// near r in the first maximal cone containing it. Returns the value (as
/// coefficient of z^r) and the endpoint used.
pub fn alpha_trop(s: &WallStructure, p1: &[i64], p2: &[i64], r: &[i64], opts: &EnumOptions) -> Result<(RingElement, PointInChart)> {
    let cx = &*s.complex;
    let rg: Vec<Q> = r.iter().map(|&v| q(v)).collect();
    let rc = cx.locate(&rg).ok_or_else(|| Error::InvalidInput(format!("r = {r:?} is not a point of B")))?;
    let rchart: Vec<i64> = rc.coords.iter().map(|c| c.to_integer().try_into().unwrap()).collect();
    let x = endpoint_near(s, rc.cone, &rchart, &default_direction(&rchart))?;
    Ok((alpha_trop_at(s, p1, p2, &rchart, &x, opts)?, x))
}

/// Theta values and traces as JSON.
pub fn lines_json(s: &WallStructure, p: &[i64], x: &PointInChart, lines: &[BrokenLine]) -> Value {
    json!({
        "schema": SCHEMA,
        "p": p,
        "x": {"cone": x.cone, "coords": x.coords.iter().map(fmt_q).collect::<Vec<_>>()},
        "theta": sum_lines(s, x.cone, lines).terms_json(),
        "lines": lines.iter().map(BrokenLine::to_json).collect::<Vec<_>>(),
    })
}
