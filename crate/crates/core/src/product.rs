//! Closed subsets of the product with a compact space `K`.
//!
//! `K` is presented by finitely many dense points `q_1, ..., q_M` (1-based)
//! with exact rational distances. A point `a` of a structure carries a
//! [`SuitableFn`], a finitely supported function
//! `f(j) = max(0, max_{i in F} r_i - d_K(q_j, q_i))` recording its distance
//! profile to the closed set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::cauchy::{check_in_oracle, depth_schedule, grow_point, CauchyError, CauchyPoint, StepCtx, StepFill, DEFAULT_RULES};
use crate::certificate::{Certificate, Check};
use crate::metric::{jep_gap_metric, path_amalgam_metric, validate_metric, FinMetric, MetricError};
use crate::oracle::{Growth, GrowthRequest, LimitOracle, OracleError};
use crate::rat::Rat;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PresentationError {
    #[error("presentation distances are not a metric: {0}")]
    NotMetric(String),
    #[error("presentation has no points")]
    Empty,
    #[error("dense index {0} out of range 1..={1}")]
    IndexRange(usize, usize),
    #[error("net radius must be positive")]
    NonPositiveRadius,
    #[error("negative value {1} at dense index {0}")]
    Negative(usize, Rat),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactPresentation {
    metric: FinMetric,
}

impl CompactPresentation {
    pub fn new(metric: FinMetric) -> Result<CompactPresentation, PresentationError> {
        if metric.is_empty() {
            return Err(PresentationError::Empty);
        }
        match validate_metric(&metric) {
            Ok(v) if v.is_empty() => Ok(CompactPresentation { metric }),
            Ok(v) => Err(PresentationError::NotMetric(v[0].to_string())),
            Err(e) => Err(PresentationError::NotMetric(e.to_string())),
        }
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

    pub fn check_index(&self, i: usize) -> Result<(), PresentationError> {
        if i == 0 || i > self.len() {
            return Err(PresentationError::IndexRange(i, self.len()));
        }
        Ok(())
    }

    /// `d_K(q_i, q_j)` for 1-based indices.
    pub fn d(&self, i: usize, j: usize) -> Rat {
        self.metric.d(i - 1, j - 1)
    }

    /// Greedy net: every dense point lies at distance `< eps` from a member.
    pub fn net(&self, eps: Rat) -> Result<Vec<usize>, PresentationError> {
        if !eps.is_positive() {
            return Err(PresentationError::NonPositiveRadius);
        }
        let mut out: Vec<usize> = Vec::new();
        for i in 1..=self.len() {
            if !out.iter().any(|&j| self.d(i, j) < eps) {
                out.push(i);
            }
        }
        Ok(out)
    }
}

/// Finitely supported suitable function: support index -> `r_i`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct SuitableFn {
    support: BTreeMap<usize, Rat>,
}

impl SuitableFn {
    pub fn zero() -> SuitableFn {
        SuitableFn::default()
    }

    /// Zero values are dropped from the support; they never affect `eval`.
    pub fn new(entries: impl IntoIterator<Item = (usize, Rat)>) -> SuitableFn {
        SuitableFn {
            support: entries.into_iter().filter(|(_, r)| r.is_positive()).collect(),
        }
    }

    pub fn support(&self) -> &BTreeMap<usize, Rat> {
        &self.support
    }

    pub fn max_value(&self) -> Rat {
        self.support.values().copied().max().unwrap_or(Rat::ZERO)
    }

    /// Structural checks: indices in range, values nonnegative.
    pub fn check(&self, k: &CompactPresentation) -> Result<(), PresentationError> {
        for (&i, &r) in &self.support {
            k.check_index(i)?;
            if r.is_negative() {
                return Err(PresentationError::Negative(i, r));
            }
        }
        Ok(())
    }

    pub fn eval(&self, k: &CompactPresentation, j: usize) -> Rat {
        self.support
            .iter()
            .map(|(&i, &r)| r.sat_sub(k.d(j, i)))
            .max()
            .unwrap_or(Rat::ZERO)
    }

    pub fn try_eval(&self, k: &CompactPresentation, j: usize) -> Result<Rat, PresentationError> {
        k.check_index(j)?;
        Ok(self.eval(k, j))
    }

    /// Values at every dense index, 1-based order.
    pub fn table(&self, k: &CompactPresentation) -> Vec<Rat> {
        (1..=k.len()).map(|j| self.eval(k, j)).collect()
    }
}

impl fmt::Display for SuitableFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.support.iter().map(|(i, r)| format!("{i}={r}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// One step of [`build_suitable_traced`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildStep {
    pub index: usize,
    pub gamma: Rat,
    /// Largest `gamma_i - d_K(q_i, q_index)` over earlier indices, with its witness.
    pub eta: Option<(Rat, usize)>,
    pub value: Rat,
}

/// Suitable function through the values `gamma`, processed in descending
/// order: each index takes the larger of its own value and the best cone of
/// an earlier one.
pub fn build_suitable(gamma: &BTreeMap<usize, Rat>, k: &CompactPresentation) -> SuitableFn {
    build_suitable_traced(gamma, k).0
}

pub fn build_suitable_traced(gamma: &BTreeMap<usize, Rat>, k: &CompactPresentation) -> (SuitableFn, Vec<BuildStep>) {
    let mut order: Vec<(usize, Rat)> = gamma.iter().map(|(&i, &g)| (i, g)).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut trace: Vec<BuildStep> = Vec::with_capacity(order.len());
    for (pos, &(i, g)) in order.iter().enumerate() {
        let eta = order[..pos]
            .iter()
            .map(|&(j, gj)| (gj - k.d(j, i), j))
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let value = match eta {
            Some((e, _)) if e > g => e,
            _ => g,
        };
        trace.push(BuildStep {
            index: i,
            gamma: g,
            eta,
            value,
        });
    }
    (SuitableFn::new(trace.iter().map(|s| (s.index, s.value))), trace)
}

/// Distance profile of `point` to a finite closed set `closed` of
/// (point, dense index) pairs, in the sum metric on `X x K`.
pub fn distance_profile(x: &FinMetric, k: &CompactPresentation, closed: &[(usize, usize)], point: usize) -> SuitableFn {
    SuitableFn::new((1..=k.len()).map(|n| {
        let v = closed
            .iter()
            .map(|&(b, q)| x.d(point, b) + k.d(n, q))
            .min()
            .expect("closed set nonempty");
        (n, v)
    }))
}

/// Finite metric space whose points carry suitable functions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureC {
    pub metric: FinMetric,
    pub p: Vec<SuitableFn>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CViolation {
    Metric(String),
    Arity { points: usize, functions: usize },
    Index { point: String, err: PresentationError },
    /// `p(a)(n) > p(b)(n) + d(a, b)` at a support index `n` of `p(a)`.
    Condition { a: String, b: String, n: usize, lhs: Rat, rhs: Rat },
}

impl fmt::Display for CViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CViolation::Metric(m) => write!(f, "metric: {m}"),
            CViolation::Arity { points, functions } => write!(f, "{points} points but {functions} suitable functions"),
            CViolation::Index { point, err } => write!(f, "suitable function of {point}: {err}"),
            CViolation::Condition { a, b, n, lhs, rhs } => {
                write!(f, "p({a})({n}) = {lhs} exceeds p({b})({n}) + d({a}, {b}) = {rhs}")
            }
        }
    }
}

impl StructureC {
    pub fn new(metric: FinMetric, p: Vec<SuitableFn>) -> StructureC {
        StructureC { metric, p }
    }

    /// Points of `x` with the distance profiles of a finite closed set.
    pub fn from_closed_set(x: FinMetric, k: &CompactPresentation, closed: &[(usize, usize)]) -> StructureC {
        let p = (0..x.len())
            .map(|a| {
                if closed.is_empty() {
                    SuitableFn::zero()
                } else {
                    distance_profile(&x, k, closed, a)
                }
            })
            .collect();
        StructureC { metric: x, p }
    }

    pub fn len(&self) -> usize {
        self.metric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metric.is_empty()
    }

    pub fn max_value(&self) -> Rat {
        self.p.iter().map(SuitableFn::max_value).max().unwrap_or(Rat::ZERO)
    }

    pub fn restrict(&self, idx: &[usize]) -> StructureC {
        StructureC {
            metric: self.metric.restrict(idx),
            p: idx.iter().map(|&i| self.p[i].clone()).collect(),
        }
    }
}

/// Condition (3) checked at support indices only: `r_n(a) <= p(b)(n) + d(a, b)`
/// for `n` in the support of `p(a)`. This is equivalent to the condition over
/// all pairs of dense indices because suitable functions are 1-Lipschitz.
pub fn validate_c(s: &StructureC, k: &CompactPresentation) -> Vec<CViolation> {
    let mut out = structural_c(s, k);
    if !out.is_empty() {
        return out;
    }
    for a in 0..s.len() {
        for b in 0..s.len() {
            if a == b {
                continue;
            }
            let d = s.metric.d(a, b);
            for (&n, &r) in s.p[a].support() {
                let rhs = s.p[b].eval(k, n) + d;
                if r > rhs {
                    out.push(CViolation::Condition {
                        a: s.metric.id(a).into(),
                        b: s.metric.id(b).into(),
                        n,
                        lhs: r,
                        rhs,
                    });
                }
            }
        }
    }
    out
}

fn structural_c(s: &StructureC, k: &CompactPresentation) -> Vec<CViolation> {
    if s.p.len() != s.len() {
        return vec![CViolation::Arity {
            points: s.len(),
            functions: s.p.len(),
        }];
    }
    match validate_metric(&s.metric) {
        Ok(v) if v.is_empty() => {}
        Ok(v) => return v.into_iter().map(|x| CViolation::Metric(x.to_string())).collect(),
        Err(e) => return vec![CViolation::Metric(e.to_string())],
    }
    let mut out = Vec::new();
    for (a, f) in s.p.iter().enumerate() {
        if let Err(err) = f.check(k) {
            out.push(CViolation::Index {
                point: s.metric.id(a).into(),
                err,
            });
        }
    }
    out
}

/// Condition (3) over every pair of points and every pair of dense indices.
pub fn brute_force_c(s: &StructureC, k: &CompactPresentation) -> bool {
    if !structural_c(s, k).is_empty() {
        return false;
    }
    let tables: Vec<Vec<Rat>> = s.p.iter().map(|f| f.table(k)).collect();
    for a in 0..s.len() {
        for b in 0..s.len() {
            let d = s.metric.d(a, b);
            for n in 1..=k.len() {
                for m in 1..=k.len() {
                    if tables[a][n - 1] > tables[b][m - 1] + k.d(n, m) + d {
                        return false;
                    }
                }
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProductError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("invalid structure: {0}")]
    Invalid(String),
    #[error("witness disagrees with the suitable function of {0}")]
    Mismatch(String),
    #[error("oracle has no compact layer")]
    NoCompactLayer,
    #[error("epsilon must be positive")]
    NonPositiveEps,
    #[error("oracle has no point {0}")]
    NotInOracle(usize),
    #[error(transparent)]
    Presentation(#[from] PresentationError),
    #[error(transparent)]
    Cauchy(#[from] CauchyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

fn require_valid(s: &StructureC, k: &CompactPresentation) -> Result<(), ProductError> {
    match validate_c(s, k).first() {
        Some(v) => Err(ProductError::Invalid(v.to_string())),
        None => Ok(()),
    }
}

/// Amalgam with the path metric; suitable functions are carried over.
/// Returns the amalgam and the positions of the points of `b` and `c` in it.
pub fn amalgamate_c(
    b: &StructureC,
    c: &StructureC,
    a: &StructureC,
    wab: &[usize],
    wac: &[usize],
    k: &CompactPresentation,
) -> Result<(StructureC, Vec<usize>, Vec<usize>), ProductError> {
    for s in [a, b, c] {
        require_valid(s, k)?;
    }
    for x in 0..a.len() {
        if b.p[wab[x]] != a.p[x] || c.p[wac[x]] != a.p[x] {
            return Err(ProductError::Mismatch(a.metric.id(x).into()));
        }
    }
    if a.is_empty() {
        return jep_c(b, c, k);
    }
    let am = path_amalgam_metric(&b.metric, &c.metric, &a.metric, wab, wac)?;
    let mut p = vec![SuitableFn::zero(); am.metric.len()];
    for (x, &y) in am.left.iter().enumerate() {
        p[y] = b.p[x].clone();
    }
    for (x, &y) in am.right.iter().enumerate() {
        p[y] = c.p[x].clone();
    }
    Ok((StructureC::new(am.metric, p), am.left, am.right))
}

/// Disjoint union at cross distance `2m`, `m` the largest distance or value
/// (1/2 when all vanish).
pub fn jep_c(a: &StructureC, b: &StructureC, k: &CompactPresentation) -> Result<(StructureC, Vec<usize>, Vec<usize>), ProductError> {
    require_valid(a, k)?;
    require_valid(b, k)?;
    let m = [a.metric.diam(), b.metric.diam(), a.max_value(), b.max_value()]
        .into_iter()
        .max()
        .expect("nonempty");
    let m = if m.is_zero() { Rat::new(1, 2) } else { m };
    let am = jep_gap_metric(&a.metric, &b.metric, m + m)?;
    let mut p = vec![SuitableFn::zero(); am.metric.len()];
    for (x, &y) in am.left.iter().enumerate() {
        p[y] = a.p[x].clone();
    }
    for (x, &y) in am.right.iter().enumerate() {
        p[y] = b.p[x].clone();
    }
    Ok((StructureC::new(am.metric, p), am.left, am.right))
}

/// Deviation of a realized suitable value from its target at one dense index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueDeviation {
    pub l: u32,
    pub index: usize,
    pub value: Rat,
    pub target: Rat,
    pub bound: Rat,
}

impl ValueDeviation {
    pub fn check(&self) -> Check {
        Check::le(
            format!("step{}.suit.q{}", self.l, self.index),
            self.value.abs_diff(self.target),
            self.bound,
        )
    }
}

/// Suitable function of each new approximant: targets on a `2^-(l+2)`-net
/// and the supports around, clamped into the window left by the base, then
/// completed by [`build_suitable`].
#[derive(Debug, Clone)]
pub struct CFill<'a> {
    target: &'a SuitableFn,
    pending: Option<SuitableFn>,
    pub deviations: Vec<ValueDeviation>,
    pub checks: Vec<Check>,
}

impl<'a> CFill<'a> {
    pub fn new(target: &'a SuitableFn) -> CFill<'a> {
        CFill {
            target,
            pending: None,
            deviations: Vec::new(),
            checks: Vec::new(),
        }
    }
}

impl StepFill for CFill<'_> {
    fn fill(&mut self, o: &LimitOracle, ctx: &StepCtx, req: &mut GrowthRequest) -> Result<(), CauchyError> {
        let k = o
            .compact()
            .ok_or_else(|| CauchyError::Input("oracle has no compact layer".into()))?;
        let locals = ctx.locals();
        let mut support: BTreeSet<usize> = k
            .net(Rat::pow2_neg(ctx.l + 2))
            .expect("positive radius")
            .into_iter()
            .collect();
        for &u in &locals {
            support.extend(o.suitable(u).expect("compact layer").support().keys());
        }
        let mut gamma = BTreeMap::new();
        for &i in &support {
            let delta = self.target.eval(k, i);
            let mut g = delta;
            if !locals.is_empty() {
                let pu = |u: usize| o.suitable(u).expect("compact layer").eval(k, i);
                let lo = locals.iter().map(|&u| pu(u) - ctx.dist(o, u, ctx.new)).max().expect("nonempty");
                let hi = locals.iter().map(|&u| pu(u) + ctx.dist(o, u, ctx.new)).min().expect("nonempty");
                g = g.max(lo).min(hi);
            }
            gamma.insert(i, g);
        }
        let (f, trace) = build_suitable_traced(&gamma, k);
        for s in &trace {
            self.checks.push(Check::le(format!("step{}.build.q{}", ctx.l, s.index), s.gamma, s.value));
        }
        req.suitable = Some(f.clone());
        self.pending = Some(f);
        Ok(())
    }

    fn committed(&mut self, o: &LimitOracle, ctx: &StepCtx, _g: &Growth) -> Result<(), CauchyError> {
        let k = o.compact().expect("checked in fill");
        let f = self.pending.take().expect("fill ran");
        for n in 1..=k.len() {
            self.deviations.push(ValueDeviation {
                l: ctx.l,
                index: n,
                value: f.eval(k, n),
                target: self.target.eval(k, n),
                bound: Rat::pow2_neg(ctx.l),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CRun {
    pub point: CauchyPoint,
    pub fallbacks: Vec<u32>,
    pub deviations: Vec<ValueDeviation>,
    pub certificate: Certificate,
}

/// Realizes the last point of `b` next to `anchors`, the images of the
/// other points of `b`.
pub fn extend_one_point_c(
    o: &mut LimitOracle,
    anchors: &[CauchyPoint],
    b: &StructureC,
    depth: u32,
) -> Result<CRun, ProductError> {
    let k = o.compact().ok_or(ProductError::NoCompactLayer)?.clone();
    if b.len() != anchors.len() + 1 {
        return Err(ProductError::Invalid(format!(
            "target has {} points, expected {}",
            b.len(),
            anchors.len() + 1
        )));
    }
    require_valid(b, &k)?;
    check_in_oracle(o, anchors)?;
    let last = b.len() - 1;
    let targets: Vec<Rat> = (0..last).map(|i| b.metric.d(i, last)).collect();
    let mut fill = CFill::new(&b.p[last]);
    let run = grow_point(o, anchors, &targets, depth, DEFAULT_RULES, &mut fill)?;
    let mut certificate = run.certificate.clone();
    certificate.extend(fill.checks.iter().cloned());
    certificate.extend(fill.deviations.iter().map(ValueDeviation::check));
    Ok(CRun {
        fallbacks: run.fallbacks(DEFAULT_RULES[0]),
        point: run.point,
        deviations: fill.deviations,
        certificate,
    })
}

/// Embeds `x` point by point.
pub fn embed_structure_c(x: &StructureC, o: &mut LimitOracle, depth: u32) -> Result<(Vec<CauchyPoint>, Certificate), ProductError> {
    let depths = depth_schedule(x.len(), depth, depth);
    let mut points: Vec<CauchyPoint> = Vec::new();
    let mut cert = Certificate::new();
    for (i, &d) in depths.iter().enumerate() {
        let idx: Vec<usize> = (0..=i).collect();
        let run = extend_one_point_c(o, &points, &x.restrict(&idx), d)?;
        cert.extend(run.certificate.checks.iter().map(|c| crate::cauchy::prefixed(&format!("x{}", i + 1), c)));
        points.push(run.point);
    }
    let lvl = depth as usize;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = o.d(points[i].at(lvl), points[j].at(lvl));
            cert.push(Check::le(
                format!("embed.dist.x{}x{}", i + 1, j + 1),
                d.abs_diff(x.metric.d(i, j)),
                Rat::int(2) * Rat::pow2_neg(depth),
            ));
        }
    }
    Ok((points, cert))
}

/// Point `v` with `p(v)(n) = 0` near `u`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroWitness {
    pub point: usize,
    pub q: Rat,
    pub distance: Rat,
    pub grown: bool,
}

impl ZeroWitness {
    pub fn checks(&self, o: &LimitOracle, u: usize, n: usize, eps: Rat) -> Vec<Check> {
        let k = o.compact().expect("compact layer");
        vec![
            Check::le("zero.distance", o.d(u, self.point), self.q + eps),
            Check::eq("zero.value", o.suitable(self.point).expect("compact layer").eval(k, n), Rat::ZERO),
        ]
    }
}

/// Grows `v` at distance `q = p(u)(n)` from `u` whose suitable function is
/// `p(u)` lowered by `q` on the indices where it exceeds `q`. Then
/// `p(v)(n) = 0` and `d(u, v) = q < q + eps`.
pub fn realize_zero_witness(o: &mut LimitOracle, u: usize, n: usize, eps: Rat) -> Result<ZeroWitness, ProductError> {
    if !eps.is_positive() {
        return Err(ProductError::NonPositiveEps);
    }
    if u >= o.len() {
        return Err(ProductError::NotInOracle(u));
    }
    let k = o.compact().ok_or(ProductError::NoCompactLayer)?;
    k.check_index(n)?;
    let pu = o.suitable(u).expect("compact layer").clone();
    let q = pu.eval(k, n);
    if q.is_zero() {
        return Ok(ZeroWitness {
            point: u,
            q,
            distance: Rat::ZERO,
            grown: false,
        });
    }
    // one gap parameter: d(u, v) = q, no extra slack
    let gap = q;
    let f = SuitableFn::new(pu.support().iter().filter(|(_, &r)| r > gap).map(|(&i, &r)| (i, r - gap)));
    let mut req = GrowthRequest::new(vec![u], vec![gap]);
    req.suitable = Some(f);
    req.dense = o.dense(u);
    let g = o.realize(req)?;
    Ok(ZeroWitness {
        point: g.point,
        q,
        distance: gap,
        grown: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    In,
    Out,
    /// No realized data to read.
    Unknown,
}

/// Reads `p(u^depth)(n)`: OUT above `2^-(depth-1)`, IN otherwise.
pub fn membership_c(o: &LimitOracle, a: &CauchyPoint, n: usize, depth: u32) -> Membership {
    let (Some(k), true) = (o.compact(), depth >= 1 && a.depth() >= depth as usize) else {
        return Membership::Unknown;
    };
    let u = a.at(depth as usize);
    let Some(f) = o.suitable(u) else {
        return Membership::Unknown;
    };
    if k.check_index(n).is_err() {
        return Membership::Unknown;
    }
    if f.eval(k, n) > Rat::pow2_neg(depth - 1) {
        Membership::Out
    } else {
        Membership::In
    }
}
