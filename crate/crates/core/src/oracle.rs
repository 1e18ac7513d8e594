//! Lazily grown approximation of the limit structure.
//!
//! The oracle only ever adds points. Each growth step adjoins one point whose
//! distances to a chosen base are given; distances to every other point are
//! shortest paths through the base, and with an empty base the new point
//! sits at a uniform gap from everything.
//!
//! Predicates live in a global registry of slots `(n, g)`, numbered per arity
//! in order of first realization. A slot stores generator tuples with values;
//! its value on any tuple is `max(0, max_gen v - d(gen, tuple))`, so nothing
//! realized earlier ever changes and unrequested values are the canonical
//! extension.
//!
//! Optional layers attach a suitable function (product side) or a dense index
//! of `Z` (Lipschitz side) to every point.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lipschitz::PolishPresentation;
use crate::metric::{one_point_feasible, path_distances, Feasibility, FinMetric, MetricError, OnePointSpec, OnePointViolation};
use crate::product::{CompactPresentation, SuitableFn};
use crate::rat::Rat;
use crate::relational::{tuples, Signature, StructureK};

/// Registry entry for one global predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotInfo {
    pub n: usize,
    pub g: usize,
    /// Growth step (0-based) that created the slot.
    pub born: usize,
    gens: Vec<(Vec<usize>, Rat)>,
}

impl SlotInfo {
    pub fn generators(&self) -> &[(Vec<usize>, Rat)] {
        &self.gens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlotRef {
    /// An already registered slot `(n, g)`.
    Global(usize, usize),
    /// A brand-new slot of arity `n`.
    Fresh(usize),
}

impl SlotRef {
    pub fn arity(&self) -> usize {
        match self {
            SlotRef::Global(n, _) | SlotRef::Fresh(n) => *n,
        }
    }
}

/// Requested values of one slot. Tuples use oracle indices, with the index
/// `oracle.len()` standing for the new point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredRequest {
    pub slot: SlotRef,
    pub values: Vec<(Vec<usize>, Rat)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GrowthRequest {
    pub base: Vec<usize>,
    pub eta: Vec<Rat>,
    pub preds: Vec<PredRequest>,
    pub suitable: Option<SuitableFn>,
    pub dense: Option<usize>,
}

impl GrowthRequest {
    pub fn new(base: Vec<usize>, eta: Vec<Rat>) -> GrowthRequest {
        GrowthRequest {
            base,
            eta,
            ..GrowthRequest::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Growth {
    pub point: usize,
    /// Global slots assigned to the `Fresh` requests, in request order.
    pub fresh: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("base has {0} points but {1} distances")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("requested distances violate the triangle inequality: {0:?}")]
    Infeasible(OnePointViolation),
    #[error("unknown global slot ({0}, {1})")]
    UnknownSlot(usize, usize),
    #[error("tuple {0:?} has the wrong arity or leaves the base")]
    BadTuple(Vec<usize>),
    #[error("tuple {0:?} of an existing slot does not involve the new point")]
    OldTuple(Vec<usize>),
    #[error("tuple {0:?} requested twice")]
    DuplicateTuple(Vec<usize>),
    #[error("slot ({0}, {1}) requested twice")]
    DuplicateSlot(usize, usize),
    #[error("negative predicate value at {0:?}")]
    Negative(Vec<usize>),
    #[error("slot {slot:?}: value {lhs} at {a:?} exceeds {rhs} allowed by {b:?}")]
    Lipschitz {
        slot: SlotRef,
        a: Vec<usize>,
        b: Vec<usize>,
        lhs: Rat,
        rhs: Rat,
    },
    #[error("no compact layer on this oracle")]
    NoCompactLayer,
    #[error("no Lipschitz layer on this oracle")]
    NoPolishLayer,
    #[error("suitable function invalid: {0}")]
    Suitable(String),
    #[error("suitable value condition fails against base point {point} at dense index {index}: {lhs} > {rhs}")]
    SuitableCondition {
        point: usize,
        index: usize,
        lhs: Rat,
        rhs: Rat,
    },
    #[error("Lipschitz layer needs a dense index for the new point")]
    MissingDense,
    #[error("dense index {0} out of range")]
    DenseRange(usize),
    #[error("Lipschitz layer condition fails against base point {point}: {lhs} > {rhs}")]
    DenseCondition { point: usize, lhs: Rat, rhs: Rat },
    #[error("Lipschitz constant must be positive")]
    NonPositiveL,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct CompactLayer {
    k: CompactPresentation,
    fns: Vec<SuitableFn>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PolishLayer {
    z: PolishPresentation,
    l: Rat,
    dense: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LimitOracle {
    seed: u64,
    metric: FinMetric,
    slots: Vec<SlotInfo>,
    by_key: BTreeMap<(usize, usize), usize>,
    log: Vec<GrowthRequest>,
    compact: Option<CompactLayer>,
    polish: Option<PolishLayer>,
}

impl LimitOracle {
    pub fn new(seed: u64) -> LimitOracle {
        LimitOracle {
            seed,
            metric: FinMetric::new(),
            slots: Vec::new(),
            by_key: BTreeMap::new(),
            log: Vec::new(),
            compact: None,
            polish: None,
        }
    }

    pub fn with_compact(mut self, k: CompactPresentation) -> LimitOracle {
        assert!(self.is_empty(), "layers are attached before growth");
        self.compact = Some(CompactLayer { k, fns: Vec::new() });
        self
    }

    pub fn with_polish(mut self, z: PolishPresentation, l: Rat) -> Result<LimitOracle, OracleError> {
        assert!(self.is_empty(), "layers are attached before growth");
        if !l.is_positive() {
            return Err(OracleError::NonPositiveL);
        }
        self.polish = Some(PolishLayer {
            z,
            l,
            dense: Vec::new(),
        });
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.metric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metric.is_empty()
    }

    pub fn metric(&self) -> &FinMetric {
        &self.metric
    }

    pub fn d(&self, i: usize, j: usize) -> Rat {
        self.metric.d(i, j)
    }

    pub fn id(&self, i: usize) -> &str {
        self.metric.id(i)
    }

    pub fn point_id(i: usize) -> String {
        format!("u{}", i + 1)
    }

    pub fn log(&self) -> &[GrowthRequest] {
        &self.log
    }

    pub fn registry(&self) -> &[SlotInfo] {
        &self.slots
    }

    pub fn has_slot(&self, n: usize, g: usize) -> bool {
        self.by_key.contains_key(&(n, g))
    }

    pub fn compact(&self) -> Option<&CompactPresentation> {
        self.compact.as_ref().map(|c| &c.k)
    }

    pub fn polish(&self) -> Option<(&PolishPresentation, Rat)> {
        self.polish.as_ref().map(|p| (&p.z, p.l))
    }

    pub fn suitable(&self, i: usize) -> Option<&SuitableFn> {
        self.compact.as_ref().map(|c| &c.fns[i])
    }

    pub fn dense(&self, i: usize) -> Option<usize> {
        self.polish.as_ref().map(|p| p.dense[i])
    }

    /// Arity list of the registry, nondecreasing.
    pub fn arities(&self) -> Vec<usize> {
        let mut a: Vec<usize> = self.by_key.keys().map(|k| k.0).collect();
        a.sort();
        a
    }

    /// Realized value of slot `(n, g)` on an oracle tuple.
    pub fn value(&self, n: usize, g: usize, t: &[usize]) -> Option<Rat> {
        let s = &self.slots[*self.by_key.get(&(n, g))?];
        Some(self.eval_gens(&s.gens, t))
    }

    fn eval_gens(&self, gens: &[(Vec<usize>, Rat)], t: &[usize]) -> Rat {
        gens.iter()
            .map(|(g, v)| v.sat_sub(self.metric.tuple_distance(g, t)))
            .max()
            .unwrap_or(Rat::ZERO)
    }

    /// Largest scalar in the current state, used to size the gap for a
    /// growth step with an empty base.
    fn gap_scale(&self, req: &GrowthRequest) -> Rat {
        let mut m = self.metric.diam();
        for s in &self.slots {
            for (_, v) in &s.gens {
                m = m.max(*v);
            }
        }
        for p in &req.preds {
            for (_, v) in &p.values {
                m = m.max(*v);
            }
        }
        if let Some(c) = &self.compact {
            for f in c.fns.iter().chain(req.suitable.as_ref()) {
                m = m.max(f.max_value());
            }
        }
        if let Some(p) = &self.polish {
            let used: Vec<usize> = p.dense.iter().copied().chain(req.dense).collect();
            for &i in &used {
                for &j in &used {
                    m = m.max(p.z.d(i, j) / p.l);
                }
            }
        }
        if m.is_zero() {
            Rat::new(1, 2)
        } else {
            m
        }
    }

    /// Adjoins one point. Nothing changes when an error is returned.
    pub fn realize(&mut self, req: GrowthRequest) -> Result<Growth, OracleError> {
        let new = self.len();
        if req.base.len() != req.eta.len() {
            return Err(OracleError::LengthMismatch(req.base.len(), req.eta.len()));
        }
        // distance from the new point to each old point (None: not in base)
        let mut eta_of: Vec<Option<Rat>> = vec![None; new];
        let spec = OnePointSpec::new(req.base.iter().copied().zip(req.eta.iter().copied()));
        if !req.base.is_empty() {
            if let Feasibility::Infeasible(v) = one_point_feasible(&self.metric, &spec)? {
                return Err(OracleError::Infeasible(v));
            }
            for (&b, &e) in req.base.iter().zip(&req.eta) {
                eta_of[b] = Some(e);
            }
        }
        let row = if req.base.is_empty() {
            let gap = self.gap_scale(&req);
            vec![gap + gap; new]
        } else {
            path_distances(&self.metric, &spec)
        };

        let dist = |a: usize, b: usize| -> Rat {
            match (a == new, b == new) {
                (true, true) => Rat::ZERO,
                (true, false) => row[b],
                (false, true) => row[a],
                (false, false) => self.metric.d(a, b),
            }
        };
        let tdist = |a: &[usize], b: &[usize]| -> Rat { a.iter().zip(b).map(|(&x, &y)| dist(x, y)).sum() };
        let allowed = |x: usize| x == new || eta_of.get(x).is_some_and(Option::is_some);

        let mut seen_slots = Vec::new();
        for p in &req.preds {
            let n = p.slot.arity();
            if let SlotRef::Global(n, g) = p.slot {
                if !self.has_slot(n, g) {
                    return Err(OracleError::UnknownSlot(n, g));
                }
                if seen_slots.contains(&(n, g)) {
                    return Err(OracleError::DuplicateSlot(n, g));
                }
                seen_slots.push((n, g));
            }
            let mut seen = Vec::new();
            for (t, v) in &p.values {
                if t.len() != n || !t.iter().all(|&x| allowed(x)) {
                    return Err(OracleError::BadTuple(t.clone()));
                }
                if matches!(p.slot, SlotRef::Global(..)) && !t.contains(&new) {
                    return Err(OracleError::OldTuple(t.clone()));
                }
                if v.is_negative() {
                    return Err(OracleError::Negative(t.clone()));
                }
                if seen.contains(t) {
                    return Err(OracleError::DuplicateTuple(t.clone()));
                }
                seen.push(t.clone());
            }
            // among the requested values
            for (a, va) in &p.values {
                for (b, vb) in &p.values {
                    let rhs = *vb + tdist(a, b);
                    if *va > rhs {
                        return Err(OracleError::Lipschitz {
                            slot: p.slot,
                            a: a.clone(),
                            b: b.clone(),
                            lhs: *va,
                            rhs,
                        });
                    }
                }
            }
            // against realized values: substituting base points for the new
            // point covers every old tuple (see module docs)
            if let SlotRef::Global(n, g) = p.slot {
                if req.base.is_empty() {
                    continue;
                }
                let gens = &self.slots[self.by_key[&(n, g)]].gens;
                for (t, v) in &p.values {
                    let pos: Vec<usize> = (0..n).filter(|&i| t[i] == new).collect();
                    for choice in tuples(req.base.len(), pos.len()) {
                        let mut old = t.clone();
                        let mut shift = Rat::ZERO;
                        for (&i, &c) in pos.iter().zip(&choice) {
                            old[i] = req.base[c];
                            shift += req.eta[c];
                        }
                        let pv = self.eval_gens(gens, &old);
                        if *v > pv + shift {
                            return Err(OracleError::Lipschitz {
                                slot: p.slot,
                                a: t.clone(),
                                b: old,
                                lhs: *v,
                                rhs: pv + shift,
                            });
                        }
                        if pv > *v + shift {
                            return Err(OracleError::Lipschitz {
                                slot: p.slot,
                                a: old,
                                b: t.clone(),
                                lhs: pv,
                                rhs: *v + shift,
                            });
                        }
                    }
                }
            }
        }

        let suitable = match &self.compact {
            None => {
                if req.suitable.is_some() {
                    return Err(OracleError::NoCompactLayer);
                }
                None
            }
            Some(c) => {
                let f = match &req.suitable {
                    Some(f) => f.clone(),
                    None => katetov_suitable(&c.fns, &req.base, &req.eta),
                };
                f.check(&c.k).map_err(|e| OracleError::Suitable(e.to_string()))?;
                for (&b, &e) in req.base.iter().zip(&req.eta) {
                    let g = &c.fns[b];
                    for (&i, &r) in f.support() {
                        let rhs = g.eval(&c.k, i) + e;
                        if r > rhs {
                            return Err(OracleError::SuitableCondition { point: b, index: i, lhs: r, rhs });
                        }
                    }
                    for (&i, &r) in g.support() {
                        let rhs = f.eval(&c.k, i) + e;
                        if r > rhs {
                            return Err(OracleError::SuitableCondition { point: b, index: i, lhs: r, rhs });
                        }
                    }
                }
                Some(f)
            }
        };

        let dense = match &self.polish {
            None => {
                if req.dense.is_some() {
                    return Err(OracleError::NoPolishLayer);
                }
                None
            }
            Some(p) => {
                let q = req.dense.ok_or(OracleError::MissingDense)?;
                p.z.check_index(q).map_err(|_| OracleError::DenseRange(q))?;
                for (&b, &e) in req.base.iter().zip(&req.eta) {
                    let lhs = p.z.d(q, p.dense[b]);
                    let rhs = p.l * e;
                    if lhs > rhs {
                        return Err(OracleError::DenseCondition { point: b, lhs, rhs });
                    }
                }
                Some(q)
            }
        };

        // every check passed: commit
        self.metric.push_point(LimitOracle::point_id(new), &row)?;
        let step = self.log.len();
        let mut fresh = Vec::new();
        for p in &req.preds {
            match p.slot {
                SlotRef::Global(n, g) => {
                    let at = self.by_key[&(n, g)];
                    for (t, v) in &p.values {
                        if self.eval_gens(&self.slots[at].gens, t) != *v {
                            self.slots[at].gens.push((t.clone(), *v));
                        }
                    }
                }
                SlotRef::Fresh(n) => {
                    let g = self.by_key.range((n, 0)..(n + 1, 0)).count() + 1;
                    self.by_key.insert((n, g), self.slots.len());
                    let gens = p.values.iter().filter(|(_, v)| v.is_positive()).cloned().collect();
                    self.slots.push(SlotInfo { n, g, born: step, gens });
                    fresh.push((n, g));
                }
            }
        }
        if let (Some(c), Some(f)) = (&mut self.compact, suitable) {
            c.fns.push(f);
        }
        if let (Some(p), Some(q)) = (&mut self.polish, dense) {
            p.dense.push(q);
        }
        self.log.push(req);
        Ok(Growth { point: new, fresh })
    }

    /// The current finite structure, one predicate per registered slot.
    pub fn snapshot(&self) -> StructureK {
        let mut s = StructureK::new(self.metric.clone(), Signature::Fixed(self.arities()));
        for info in &self.slots {
            for t in tuples(self.len(), info.n) {
                let v = self.eval_gens(&info.gens, &t);
                s.set(info.n, info.g, &t, v).expect("arity matches");
            }
        }
        s
    }

    /// Rebuilds an oracle from its growth log.
    pub fn replay(template: &LimitOracle, log: &[GrowthRequest]) -> Result<LimitOracle, OracleError> {
        let mut o = LimitOracle::new(template.seed);
        o.compact = template.compact.as_ref().map(|c| CompactLayer {
            k: c.k.clone(),
            fns: Vec::new(),
        });
        o.polish = template.polish.as_ref().map(|p| PolishLayer {
            z: p.z.clone(),
            l: p.l,
            dense: Vec::new(),
        });
        for req in log {
            o.realize(req.clone())?;
        }
        Ok(o)
    }
}

/// Smallest suitable function compatible with the base:
/// `r_i = max_z p(z)(i) - eta_z` over the supports of the base functions.
fn katetov_suitable(fns: &[SuitableFn], base: &[usize], eta: &[Rat]) -> SuitableFn {
    let mut r: BTreeMap<usize, Rat> = BTreeMap::new();
    for (&b, &e) in base.iter().zip(eta) {
        for (&i, &v) in fns[b].support() {
            let c = v.sat_sub(e);
            let slot = r.entry(i).or_insert(Rat::ZERO);
            *slot = (*slot).max(c);
        }
    }
    SuitableFn::new(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::validate_k;

    fn r(n: i128) -> Rat {
        Rat::int(n)
    }

    #[test]
    fn first_point_registers_a_slot() {
        let mut o = LimitOracle::new(0);
        assert!(o.snapshot().is_empty());
        let g = o
            .realize(GrowthRequest {
                preds: vec![PredRequest {
                    slot: SlotRef::Fresh(1),
                    values: vec![(vec![0], r(0))],
                }],
                ..GrowthRequest::default()
            })
            .unwrap();
        assert_eq!(g, Growth { point: 0, fresh: vec![(1, 1)] });
        assert_eq!(o.value(1, 1, &[0]), Some(r(0)));
        assert_eq!(o.snapshot().len(), 1);
    }

    #[test]
    fn same_request_twice_gives_two_points() {
        let mut o = LimitOracle::new(0);
        o.realize(GrowthRequest::default()).unwrap();
        let req = GrowthRequest::new(vec![0], vec![r(1)]);
        let a = o.realize(req.clone()).unwrap().point;
        let b = o.realize(req).unwrap().point;
        assert_ne!(a, b);
        assert_eq!(o.d(a, b), r(2));
        assert!(validate_k(&o.snapshot()).is_empty());
    }

    #[test]
    fn lipschitz_violation_is_rejected_without_growth() {
        let mut o = LimitOracle::new(0);
        o.realize(GrowthRequest {
            preds: vec![PredRequest {
                slot: SlotRef::Fresh(1),
                values: vec![(vec![0], r(0))],
            }],
            ..GrowthRequest::default()
        })
        .unwrap();
        let before = o.clone();
        let err = o
            .realize(GrowthRequest {
                base: vec![0],
                eta: vec![r(1)],
                preds: vec![PredRequest {
                    slot: SlotRef::Global(1, 1),
                    values: vec![(vec![1], r(3))],
                }],
                ..GrowthRequest::default()
            })
            .unwrap_err();
        assert!(matches!(err, OracleError::Lipschitz { .. }));
        assert_eq!(o, before);
    }

    #[test]
    fn empty_base_uses_gap_and_snapshots_extend() {
        let mut o = LimitOracle::new(0);
        o.realize(GrowthRequest {
            preds: vec![PredRequest {
                slot: SlotRef::Fresh(2),
                values: vec![(vec![0, 0], r(3))],
            }],
            ..GrowthRequest::default()
        })
        .unwrap();
        let s0 = o.snapshot();
        o.realize(GrowthRequest::default()).unwrap();
        assert_eq!(o.d(0, 1), r(6));
        let s1 = o.snapshot();
        assert!(validate_k(&s1).is_empty());
        assert_eq!(s1.project(&[0], s0.sig.clone(), |s| s), s0);
        // canonical extension on the new tuples
        assert_eq!(o.value(2, 1, &[0, 1]), Some(r(0)));
    }

    #[test]
    fn replay_reproduces_state() {
        let mut o = LimitOracle::new(3);
        o.realize(GrowthRequest::default()).unwrap();
        o.realize(GrowthRequest::new(vec![0], vec![Rat::new(1, 2)])).unwrap();
        o.realize(GrowthRequest::new(vec![0, 1], vec![r(1), Rat::new(3, 4)])).unwrap();
        let again = LimitOracle::replay(&o, o.log()).unwrap();
        assert_eq!(again, o);
    }
}
