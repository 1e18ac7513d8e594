//! Points of the completion as certified Cauchy sequences of oracle points,
//! the sandwich metric extension, and the one-point extension drivers.
//!
//! A new limit point `a_k` is grown step by step. Step `l` adjoins `u_k^l`
//! over anchors `u_i^{k+l+2}` (one per earlier point) and the previous
//! approximant `u_k^{l-1}`, at distance exactly `2^-l` from the latter.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::certificate::{Certificate, Check};
use crate::metric::{one_point_feasible, Feasibility, FinMetric, OnePointSpec, OnePointViolation};
use crate::oracle::{Growth, GrowthRequest, LimitOracle, OracleError, PredRequest, SlotRef};
use crate::rat::Rat;
use crate::relational::{tuples, validate_k, Signature, Slot, StructureK};

/// Oracle points `u^1, u^2, ...` with `d(u^j, u^{j+1}) <= 2^-(j+1)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CauchyPoint {
    ids: Vec<usize>,
    gaps: Vec<Rat>,
}

impl CauchyPoint {
    pub fn new() -> CauchyPoint {
        CauchyPoint::default()
    }

    /// Appends the next approximant, recording its distance to the last one.
    pub fn push(&mut self, o: &LimitOracle, id: usize) {
        if let Some(&last) = self.ids.last() {
            self.gaps.push(o.d(last, id));
        }
        self.ids.push(id);
    }

    pub fn depth(&self) -> usize {
        self.ids.len()
    }

    /// `u^j`, 1-based.
    pub fn at(&self, j: usize) -> usize {
        self.ids[j - 1]
    }

    pub fn last(&self) -> usize {
        *self.ids.last().expect("nonempty")
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// `gaps()[j - 1] = d(u^j, u^{j+1})`.
    pub fn gaps(&self) -> &[Rat] {
        &self.gaps
    }

    /// Sum of the recorded gaps from `u^j` on; bounds `d(u^j, u^j')`.
    pub fn tail(&self, j: usize) -> Rat {
        self.gaps[j - 1..].iter().sum()
    }

    /// Recorded gaps agree with the oracle and obey `2^-(j+1)`.
    pub fn checks(&self, o: &LimitOracle, name: &str) -> Vec<Check> {
        let mut out = Vec::new();
        for (j, gap) in self.gaps.iter().enumerate() {
            let j = j + 1;
            out.push(Check::eq(
                format!("{name}.gap{j}.recorded"),
                *gap,
                o.d(self.at(j), self.at(j + 1)),
            ));
            out.push(Check::le(format!("{name}.gap{j}.bound"), *gap, Rat::pow2_neg(j as u32 + 1)));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandRule {
    /// `(2j-1)/(k 2^(l+1)) <= gamma <= 2j/(k 2^(l+1))` at position `j` of the
    /// descending target order.
    Staggered,
    /// `1/(k 2^(l+1)) <= gamma <= 1/(k 2^l)` for every anchor.
    Uniform,
}

pub const DEFAULT_RULES: &[BandRule] = &[BandRule::Staggered, BandRule::Uniform];

/// Data of one sandwich step: targets `t_i = d(b_i, b_k)` for `i < k`, the
/// anchor distances and, past the first step, distances from the previous
/// approximant to the anchors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SandwichProblem {
    pub targets: Vec<Rat>,
    pub anchor_d: Vec<Vec<Rat>>,
    pub prev_d: Option<Vec<Rat>>,
    pub l: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SandwichSolution {
    pub rule: BandRule,
    /// Anchor indices sorted by descending target, ties by index.
    pub order: Vec<usize>,
    pub gamma: Vec<Rat>,
    pub eta: Vec<Rat>,
    pub link: Option<Rat>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SandwichError {
    #[error("no distance to anchor {anchor} fits: least value {lower} exceeds upper bound {upper}")]
    Infeasible { anchor: usize, lower: Rat, upper: Rat },
    #[error("distances fail the triangle inequality: {0:?}")]
    Metric(OnePointViolation),
}

impl SandwichProblem {
    pub fn from_oracle(o: &LimitOracle, targets: &[Rat], anchors: &[usize], prev: Option<usize>, l: u32) -> SandwichProblem {
        SandwichProblem {
            targets: targets.to_vec(),
            anchor_d: anchors.iter().map(|&a| anchors.iter().map(|&b| o.d(a, b)).collect()).collect(),
            prev_d: prev.map(|p| anchors.iter().map(|&a| o.d(p, a)).collect()),
            l,
        }
    }

    pub fn k(&self) -> usize {
        self.targets.len() + 1
    }

    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.targets.len()).collect();
        idx.sort_by(|&a, &b| self.targets[b].cmp(&self.targets[a]).then(a.cmp(&b)));
        idx
    }

    /// `1 / (k 2^(l+1))`.
    pub fn unit(&self) -> Rat {
        Rat::pow2_neg(self.l + 1) / Rat::int(self.k() as i128)
    }

    pub fn link(&self) -> Option<Rat> {
        self.prev_d.as_ref().map(|_| Rat::pow2_neg(self.l))
    }

    /// Band for `d(g, anchor_i)` under `rule`.
    pub fn band(&self, rule: BandRule, i: usize) -> (Rat, Rat) {
        let a = self.unit();
        let t = self.targets[i];
        match rule {
            BandRule::Staggered => {
                let j = self.order().iter().position(|&x| x == i).expect("index in range") as i128 + 1;
                (t + a * Rat::int(2 * j - 1), t + a * Rat::int(2 * j))
            }
            BandRule::Uniform => (t + a, t + a + a),
        }
    }

    fn local_space(&self) -> FinMetric {
        let n = self.targets.len();
        let mut ids: Vec<String> = (0..n).map(|i| format!("v{}", i + 1)).collect();
        if self.prev_d.is_some() {
            ids.push("prev".into());
        }
        let mut m = FinMetric::with_points(ids).expect("distinct ids");
        for i in 0..n {
            for j in 0..i {
                m.set(i, j, self.anchor_d[i][j]);
            }
            if let Some(p) = &self.prev_d {
                m.set(i, n, p[i]);
            }
        }
        m
    }
}

/// Componentwise least distances inside the bands:
/// `eta_i = max_j (L_j - d(v_i, v_j))`, where `L` is the lower end of the band
/// intersected with the link window `[|D_i - 2^-l|, D_i + 2^-l]`. The least
/// point of the lower constraints is feasible iff it respects every upper end,
/// and the result is then re-verified as a one-point metric extension.
pub fn solve_sandwich(p: &SandwichProblem, rule: BandRule) -> Result<SandwichSolution, SandwichError> {
    let n = p.targets.len();
    let link = p.link();
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for i in 0..n {
        let (mut a, mut b) = p.band(rule, i);
        if let (Some(d), Some(lam)) = (&p.prev_d, link) {
            a = a.max(d[i].abs_diff(lam));
            b = b.min(d[i] + lam);
        }
        lo.push(a);
        hi.push(b);
    }
    let eta: Vec<Rat> = (0..n)
        .map(|i| (0..n).map(|j| lo[j] - p.anchor_d[i][j]).max().expect("j = i present"))
        .collect();
    for i in 0..n {
        if eta[i] > hi[i] {
            return Err(SandwichError::Infeasible {
                anchor: i,
                lower: eta[i],
                upper: hi[i],
            });
        }
    }
    let mut all = eta.clone();
    all.extend(link);
    let m = p.local_space();
    let spec = OnePointSpec::new((0..m.len()).zip(all));
    if !spec.is_empty() {
        match one_point_feasible(&m, &spec) {
            Ok(Feasibility::Feasible) => {}
            Ok(Feasibility::Infeasible(v)) => return Err(SandwichError::Metric(v)),
            Err(e) => unreachable!("well-formed local spec: {e}"),
        }
    }
    Ok(SandwichSolution {
        rule,
        order: p.order(),
        gamma: (0..n).map(|i| eta[i] - p.targets[i]).collect(),
        eta,
        link,
    })
}

/// Every inequality the solution is supposed to satisfy, by substitution.
pub fn sandwich_checks(p: &SandwichProblem, s: &SandwichSolution, name: &str) -> Vec<Check> {
    let mut out = Vec::new();
    let n = p.targets.len();
    for i in 0..n {
        let (lo, hi) = p.band(s.rule, i);
        let v = i + 1;
        out.push(Check::le(format!("{name}.band.v{v}.lo"), lo, s.eta[i]));
        out.push(Check::le(format!("{name}.band.v{v}.hi"), s.eta[i], hi));
        out.push(Check::eq(format!("{name}.gamma.v{v}"), s.gamma[i], s.eta[i] - p.targets[i]));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let d = p.anchor_d[i][j];
            let tag = format!("{name}.tri.v{}v{}", i + 1, j + 1);
            out.push(Check::le(format!("{tag}.lower"), s.eta[i].abs_diff(s.eta[j]), d));
            out.push(Check::le(format!("{tag}.upper"), d, s.eta[i] + s.eta[j]));
        }
    }
    if let (Some(pd), Some(lam)) = (&p.prev_d, s.link) {
        out.push(Check::eq(format!("{name}.link"), lam, Rat::pow2_neg(p.l)));
        for i in 0..n {
            let tag = format!("{name}.tri.v{}prev", i + 1);
            out.push(Check::le(format!("{tag}.lower"), s.eta[i].abs_diff(lam), pd[i]));
            out.push(Check::le(format!("{tag}.upper"), pd[i], s.eta[i] + lam));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CauchyError {
    #[error("point {point} has depth {have}, needs {need}")]
    Shallow { point: usize, have: usize, need: usize },
    #[error("oracle has no point {0}")]
    NotInOracle(usize),
    #[error("step {l}: {err}")]
    Sandwich { l: u32, err: SandwichError },
    #[error("step {l}: oracle rejected the extension: {err}")]
    Oracle { l: u32, err: OracleError },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("witness outside tolerance: {0}")]
    Tolerance(String),
}

/// What a single step knows: anchor points, the previous approximant, and
/// the distances chosen for the new point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepCtx {
    pub l: u32,
    pub k: usize,
    pub anchors: Vec<usize>,
    pub prev: Option<usize>,
    pub eta: Vec<Rat>,
    pub link: Option<Rat>,
    /// Oracle index the new point will receive.
    pub new: usize,
}

impl StepCtx {
    /// Anchors followed by the previous approximant.
    pub fn locals(&self) -> Vec<usize> {
        let mut v = self.anchors.clone();
        v.extend(self.prev);
        v
    }

    pub fn dist(&self, o: &LimitOracle, a: usize, b: usize) -> Rat {
        let to_new = |x: usize| -> Rat {
            if Some(x) == self.prev {
                return self.link.expect("link with prev");
            }
            let i = self.anchors.iter().position(|&y| y == x).expect("local point");
            self.eta[i]
        };
        match (a == self.new, b == self.new) {
            (true, true) => Rat::ZERO,
            (true, false) => to_new(b),
            (false, true) => to_new(a),
            (false, false) => o.d(a, b),
        }
    }

    pub fn tuple_dist(&self, o: &LimitOracle, a: &[usize], b: &[usize]) -> Rat {
        a.iter().zip(b).map(|(&x, &y)| self.dist(o, x, y)).sum()
    }

    /// Index in the target structure: anchor `i` is `b_i`, the previous and
    /// the new point are `b_k`.
    pub fn b_index(&self, x: usize) -> usize {
        self.anchors.iter().position(|&y| y == x).unwrap_or(self.k - 1)
    }
}

/// Supplies the non-metric data of each growth step.
pub trait StepFill {
    fn fill(&mut self, o: &LimitOracle, ctx: &StepCtx, req: &mut GrowthRequest) -> Result<(), CauchyError>;

    fn committed(&mut self, _o: &LimitOracle, _ctx: &StepCtx, _g: &Growth) -> Result<(), CauchyError> {
        Ok(())
    }
}

/// Metric-only growth.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoFill;

impl StepFill for NoFill {
    fn fill(&mut self, _: &LimitOracle, _: &StepCtx, _: &mut GrowthRequest) -> Result<(), CauchyError> {
        Ok(())
    }
}

impl<A: StepFill, B: StepFill> StepFill for (A, B) {
    fn fill(&mut self, o: &LimitOracle, ctx: &StepCtx, req: &mut GrowthRequest) -> Result<(), CauchyError> {
        self.0.fill(o, ctx, req)?;
        self.1.fill(o, ctx, req)
    }

    fn committed(&mut self, o: &LimitOracle, ctx: &StepCtx, g: &Growth) -> Result<(), CauchyError> {
        self.0.committed(o, ctx, g)?;
        self.1.committed(o, ctx, g)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub problem: SandwichProblem,
    pub solution: SandwichSolution,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowRun {
    pub point: CauchyPoint,
    pub steps: Vec<StepRecord>,
    pub certificate: Certificate,
}

impl GrowRun {
    /// Steps where the first band rule was infeasible.
    pub fn fallbacks(&self, first: BandRule) -> Vec<u32> {
        self.steps
            .iter()
            .filter(|s| s.solution.rule != first)
            .map(|s| s.problem.l)
            .collect()
    }
}

pub fn check_in_oracle(o: &LimitOracle, points: &[CauchyPoint]) -> Result<(), CauchyError> {
    for p in points {
        if let Some(&bad) = p.ids().iter().find(|&&i| i >= o.len()) {
            return Err(CauchyError::NotInOracle(bad));
        }
    }
    Ok(())
}

/// Grows a new point of the given depth next to `anchors`, with ideal
/// distances `targets[i]` to anchor `i`.
pub fn grow_point(
    o: &mut LimitOracle,
    anchors: &[CauchyPoint],
    targets: &[Rat],
    depth: u32,
    rules: &[BandRule],
    fill: &mut dyn StepFill,
) -> Result<GrowRun, CauchyError> {
    assert_eq!(anchors.len(), targets.len(), "one target per anchor");
    assert!(!rules.is_empty(), "need a band rule");
    check_in_oracle(o, anchors)?;
    let k = anchors.len() + 1;
    let need = k + depth as usize + 2;
    for (i, a) in anchors.iter().enumerate() {
        if a.depth() < need {
            return Err(CauchyError::Shallow {
                point: i,
                have: a.depth(),
                need,
            });
        }
    }
    let mut point = CauchyPoint::new();
    let mut steps = Vec::new();
    let mut cert = Certificate::new();
    for l in 1..=depth {
        let v: Vec<usize> = anchors.iter().map(|a| a.at(k + l as usize + 2)).collect();
        let prev = (l > 1).then(|| point.last());
        let problem = SandwichProblem::from_oracle(o, targets, &v, prev, l);
        let mut solved = Err(SandwichError::Infeasible {
            anchor: 0,
            lower: Rat::ZERO,
            upper: Rat::ZERO,
        });
        for &rule in rules {
            solved = solve_sandwich(&problem, rule);
            if solved.is_ok() {
                break;
            }
        }
        let solution = solved.map_err(|err| CauchyError::Sandwich { l, err })?;
        let ctx = StepCtx {
            l,
            k,
            anchors: v.clone(),
            prev,
            eta: solution.eta.clone(),
            link: solution.link,
            new: o.len(),
        };
        let mut base = v.clone();
        base.extend(prev);
        let mut eta = solution.eta.clone();
        eta.extend(solution.link);
        let mut req = GrowthRequest::new(base, eta);
        fill.fill(o, &ctx, &mut req)?;
        let growth = o.realize(req).map_err(|err| CauchyError::Oracle { l, err })?;
        fill.committed(o, &ctx, &growth)?;
        let g = growth.point;
        cert.extend(sandwich_checks(&problem, &solution, &format!("step{l}")));
        for (i, &vi) in v.iter().enumerate() {
            // the window handed to the next step
            let d = o.d(vi, g);
            cert.push(Check::le(format!("step{l}.window.v{}.lo", i + 1), targets[i], d));
            cert.push(Check::le(format!("step{l}.window.v{}.hi", i + 1), d, targets[i] + Rat::pow2_neg(l)));
        }
        if let Some(p) = prev {
            cert.push(Check::eq(format!("step{l}.gap"), o.d(p, g), Rat::pow2_neg(l)));
        }
        point.push(o, g);
        steps.push(StepRecord { problem, solution });
    }
    cert.extend(point.checks(o, "point"));
    Ok(GrowRun {
        point,
        steps,
        certificate: cert,
    })
}

/// Measured predicate deviation at one tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deviation {
    pub l: u32,
    pub slot: Slot,
    /// Tuple of target-structure indices.
    pub tuple: Vec<usize>,
    pub value: Rat,
    pub target: Rat,
    pub bound: Rat,
}

impl Deviation {
    pub fn error(&self) -> Rat {
        self.value.abs_diff(self.target)
    }

    pub fn check(&self) -> Check {
        let t: Vec<String> = self.tuple.iter().map(|x| (x + 1).to_string()).collect();
        Check::le(
            format!("step{}.pred.n{}m{}.b{}", self.l, self.slot.0, self.slot.1, t.join("-")),
            self.error(),
            self.bound,
        )
    }
}

/// `(2n + 1) 2^-l`.
pub fn step_bound(n: usize, l: u32) -> Rat {
    Rat::int(2 * n as i128 + 1) * Rat::pow2_neg(l)
}

/// Predicate values for the relational one-point extension: each tuple gets
/// its target value clamped into the window left by the values already fixed.
#[derive(Debug, Clone)]
pub struct KFill<'a> {
    b: &'a StructureK,
    pub slot_map: BTreeMap<Slot, usize>,
    pending: Vec<Slot>,
    /// Every approximant of every anchor, by level.
    levels: Vec<Vec<usize>>,
    pub deviations: Vec<Deviation>,
}

impl<'a> KFill<'a> {
    pub fn new(b: &'a StructureK, known: BTreeMap<Slot, usize>) -> KFill<'a> {
        KFill {
            b,
            slot_map: known,
            pending: Vec::new(),
            levels: Vec::new(),
            deviations: Vec::new(),
        }
    }

    /// New slots also receive values on the anchors at every level, so that
    /// later steps find anchor values near their targets instead of the
    /// canonical extension of the first step.
    pub fn with_anchors(mut self, anchors: &[CauchyPoint]) -> KFill<'a> {
        let top = anchors.iter().map(CauchyPoint::depth).min().unwrap_or(0);
        self.levels = (1..=top).map(|j| anchors.iter().map(|a| a.at(j)).collect()).collect();
        self
    }
}

impl StepFill for KFill<'_> {
    fn fill(&mut self, o: &LimitOracle, ctx: &StepCtx, req: &mut GrowthRequest) -> Result<(), CauchyError> {
        let locals = ctx.locals();
        let mut all = locals.clone();
        all.push(ctx.new);
        self.pending.clear();
        let fresh_slots = self.b.sig.slots().iter().any(|s| !self.slot_map.contains_key(s));
        // other approximants of the anchors, with their distance to the new point
        let mut extra: BTreeMap<usize, Rat> = BTreeMap::new();
        if fresh_slots && ctx.prev.is_none() {
            for level in &self.levels {
                for &x in level {
                    if !locals.contains(&x) {
                        let e = (0..ctx.anchors.len())
                            .map(|i| ctx.eta[i] + o.d(ctx.anchors[i], x))
                            .min()
                            .expect("anchors present");
                        extra.insert(x, e);
                    }
                }
            }
        }
        let dist = |a: usize, b: usize| -> Rat {
            if a == ctx.new && extra.contains_key(&b) {
                extra[&b]
            } else if b == ctx.new && extra.contains_key(&a) {
                extra[&a]
            } else {
                ctx.dist(o, a, b)
            }
        };
        let tdist = |a: &[usize], b: &[usize]| -> Rat { a.iter().zip(b).map(|(&x, &y)| dist(x, y)).sum() };
        let clamp = |r: Rat, defined: &[(Vec<usize>, Rat)], t: &[usize]| -> Rat {
            let mut lo: Option<Rat> = None;
            let mut hi: Option<Rat> = None;
            for (x, px) in defined {
                let d = tdist(t, x);
                lo = Some(lo.map_or(*px - d, |c| c.max(*px - d)));
                hi = Some(hi.map_or(*px + d, |c| c.min(*px + d)));
            }
            let v = lo.map_or(r, |lo| r.max(lo));
            hi.map_or(v, |hi| v.min(hi))
        };
        for (n, m) in self.b.sig.slots() {
            let b = self.b;
            let target = |t: &[usize], pos: &dyn Fn(usize) -> usize| -> Rat {
                let bt: Vec<usize> = t.iter().map(|&x| pos(x)).collect();
                b.p(n, m, &bt)
            };
            let at_b = |x: usize| ctx.b_index(x);
            let mut defined: Vec<(Vec<usize>, Rat)> = Vec::new();
            let mut values = Vec::new();
            let global = self.slot_map.get(&(n, m)).copied();
            match global {
                Some(g) => {
                    for t in tuples(locals.len(), n) {
                        let t: Vec<usize> = t.iter().map(|&i| locals[i]).collect();
                        let v = o.value(n, g, &t).expect("registered slot");
                        defined.push((t, v));
                    }
                }
                None => {
                    // deepest level first; only the level in use is reported
                    let mut order: Vec<(Vec<usize>, bool)> = Vec::new();
                    let mut levels: Vec<&[usize]> = self.levels.iter().map(Vec::as_slice).collect();
                    if !levels.contains(&locals.as_slice()) {
                        levels.push(&locals);
                        levels.sort_by_key(|l| l.first().copied());
                    }
                    for level in levels.into_iter().rev() {
                        let local = level == locals.as_slice();
                        if !local && !level.iter().all(|x| extra.contains_key(x)) {
                            continue;
                        }
                        order.extend(tuples(level.len(), n).map(|t| (t.iter().map(|&i| level[i]).collect(), local)));
                    }
                    for (t, local) in order {
                        let eps = if local {
                            target(&t, &at_b)
                        } else {
                            let level = self.levels.iter().find(|l| l.contains(&t[0])).expect("level tuple");
                            target(&t, &|x| level.iter().position(|&y| y == x).expect("same level"))
                        };
                        let v = clamp(eps, &defined, &t);
                        if local {
                            self.deviations.push(Deviation {
                                l: ctx.l,
                                slot: (n, m),
                                tuple: t.iter().map(|&x| ctx.b_index(x)).collect(),
                                value: v,
                                target: eps,
                                bound: step_bound(n, ctx.l),
                            });
                        }
                        defined.push((t.clone(), v));
                        values.push((t, v));
                    }
                }
            }
            for t in tuples(all.len(), n) {
                if !t.contains(&locals.len()) {
                    continue;
                }
                let t: Vec<usize> = t.iter().map(|&i| all[i]).collect();
                let eps = target(&t, &at_b);
                let v = clamp(eps, &defined, &t);
                self.deviations.push(Deviation {
                    l: ctx.l,
                    slot: (n, m),
                    tuple: t.iter().map(|&x| ctx.b_index(x)).collect(),
                    value: v,
                    target: eps,
                    bound: step_bound(n, ctx.l),
                });
                defined.push((t.clone(), v));
                values.push((t, v));
            }
            let slot = match global {
                Some(g) => SlotRef::Global(n, g),
                None => {
                    self.pending.push((n, m));
                    SlotRef::Fresh(n)
                }
            };
            req.preds.push(PredRequest { slot, values });
        }
        for (x, e) in extra {
            req.base.push(x);
            req.eta.push(e);
        }
        Ok(())
    }

    fn committed(&mut self, _o: &LimitOracle, _ctx: &StepCtx, g: &Growth) -> Result<(), CauchyError> {
        for (slot, &(_, gi)) in self.pending.iter().zip(&g.fresh) {
            self.slot_map.insert(*slot, gi);
        }
        self.pending.clear();
        Ok(())
    }
}

/// Outcome of one relational one-point extension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointRun {
    pub point: CauchyPoint,
    /// Global index `g` of every slot `(n, m)` of the target structure.
    pub slot_map: BTreeMap<Slot, usize>,
    /// Steps that needed the uniform band.
    pub fallbacks: Vec<u32>,
    pub deviations: Vec<Deviation>,
    pub certificate: Certificate,
}

/// Index sets of the target structure must have the sizes `n_a + 1 - n`.
pub fn check_bar(b: &StructureK) -> Result<(), CauchyError> {
    match &b.sig {
        Signature::Indexed { .. } => {}
        Signature::IndexSets { n_a, sets } => {
            for n in 1..=*n_a {
                let size = sets.get(&n).map_or(0, |s| s.len());
                if size != n_a + 1 - n {
                    return Err(CauchyError::Input(format!("index set at arity {n} has {size} elements")));
                }
            }
            if sets.keys().any(|&n| n == 0 || n > *n_a) {
                return Err(CauchyError::Input("index set at an arity above nA".into()));
            }
        }
        Signature::Fixed(_) => return Err(CauchyError::Input("fixed-arity targets are not supported".into())),
    }
    if let Some(v) = validate_k(b).first() {
        return Err(CauchyError::Input(v.to_string()));
    }
    Ok(())
}

/// Extends the points `anchors` (images of `b_1, ..., b_{k-1}`) by an image of
/// the last point of `b`. `known` gives the global index of the slots of `b`
/// that are already realized; the others are created.
pub fn extend_one_point(
    o: &mut LimitOracle,
    anchors: &[CauchyPoint],
    b: &StructureK,
    known: &BTreeMap<Slot, usize>,
    depth: u32,
) -> Result<PointRun, CauchyError> {
    if b.len() != anchors.len() + 1 {
        return Err(CauchyError::Input(format!(
            "target has {} points, expected {}",
            b.len(),
            anchors.len() + 1
        )));
    }
    check_bar(b)?;
    check_in_oracle(o, anchors)?;
    let slots: Vec<Slot> = b.sig.slots();
    for (&(n, m), &g) in known {
        if !slots.contains(&(n, m)) {
            return Err(CauchyError::Input(format!("slot ({n}, {m}) is not in the target")));
        }
        if !o.has_slot(n, g) {
            return Err(CauchyError::Input(format!("oracle has no slot ({n}, {g})")));
        }
    }
    let k = b.len();
    let targets: Vec<Rat> = (0..k - 1).map(|i| b.metric.d(i, k - 1)).collect();
    let mut fill = KFill::new(b, known.clone()).with_anchors(anchors);
    let run = grow_point(o, anchors, &targets, depth, DEFAULT_RULES, &mut fill)?;
    let mut certificate = run.certificate.clone();
    certificate.extend(fill.deviations.iter().map(Deviation::check));
    Ok(PointRun {
        fallbacks: run.fallbacks(DEFAULT_RULES[0]),
        point: run.point,
        slot_map: fill.slot_map,
        deviations: fill.deviations,
        certificate,
    })
}

/// The one-point case with nothing below it.
pub fn extend_singleton(o: &mut LimitOracle, b: &StructureK, depth: u32) -> Result<PointRun, CauchyError> {
    if b.len() != 1 {
        return Err(CauchyError::Input("singleton target expected".into()));
    }
    extend_one_point(o, &[], b, &BTreeMap::new(), depth)
}

/// Substructure on `idx` keeping, at each arity `n <= min(n_x, |idx|)`, the
/// first `n_B + 1 - n` indices.
pub fn restriction(x: &StructureK, idx: &[usize]) -> StructureK {
    let n_b = x.n_a().min(idx.len());
    let sets = (1..=n_b)
        .map(|n| (n, x.sig.indices(n).into_iter().take(n_b + 1 - n).collect()))
        .collect();
    x.project(idx, Signature::IndexSets { n_a: n_b, sets }, |s| s)
}

/// Depth needed for each of a sequence of points so that every later point
/// of size `k` and depth `D` finds anchors at level `k + D + 2`.
pub fn depth_schedule(count: usize, depth: u32, floor: u32) -> Vec<u32> {
    let mut d = vec![0u32; count];
    for i in (0..count).rev() {
        let mut need = depth.max(floor);
        for j in (i + 1)..count {
            need = need.max(j as u32 + 1 + d[j] + 2);
        }
        d[i] = need;
    }
    d
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedRun {
    pub points: Vec<CauchyPoint>,
    pub slot_map: BTreeMap<Slot, usize>,
    pub runs: Vec<PointRun>,
    pub certificate: Certificate,
}

/// Embeds `x` point by point; each point has depth at least `depth`.
pub fn embed_structure(x: &StructureK, o: &mut LimitOracle, depth: u32) -> Result<EmbedRun, CauchyError> {
    embed_structure_with_floor(x, o, depth, depth)
}

/// As [`embed_structure`], with every point at least `floor` deep so that it
/// can anchor later extensions.
pub fn embed_structure_with_floor(x: &StructureK, o: &mut LimitOracle, depth: u32, floor: u32) -> Result<EmbedRun, CauchyError> {
    check_bar(x)?;
    let depths = depth_schedule(x.len(), depth, floor);
    let mut points: Vec<CauchyPoint> = Vec::new();
    let mut slot_map: BTreeMap<Slot, usize> = BTreeMap::new();
    let mut runs = Vec::new();
    let mut certificate = Certificate::new();
    for (i, &d) in depths.iter().enumerate() {
        let idx: Vec<usize> = (0..=i).collect();
        let b = restriction(x, &idx);
        let known = b
            .sig
            .slots()
            .into_iter()
            .filter_map(|s| slot_map.get(&s).map(|&g| (s, g)))
            .collect();
        let run = extend_one_point(o, &points, &b, &known, d)?;
        slot_map.extend(run.slot_map.iter().map(|(&s, &g)| (s, g)));
        certificate.extend(run.certificate.checks.iter().map(|c| prefixed(&format!("x{}", i + 1), c)));
        points.push(run.point.clone());
        runs.push(run);
    }
    certificate.extend(embedding_checks(o, x, &points, &slot_map, depth, "embed"));
    Ok(EmbedRun {
        points,
        slot_map,
        runs,
        certificate,
    })
}

pub(crate) fn prefixed(prefix: &str, c: &Check) -> Check {
    Check::new(format!("{prefix}.{}", c.name), c.lhs, c.rel, c.rhs)
}

/// Distances within `2 * 2^-depth` and predicate values within
/// `(2n + 1) 2^-depth` of `x`, read at level `depth`.
pub fn embedding_checks(
    o: &LimitOracle,
    x: &StructureK,
    points: &[CauchyPoint],
    slot_map: &BTreeMap<Slot, usize>,
    depth: u32,
    name: &str,
) -> Vec<Check> {
    let lvl = depth as usize;
    let mut out = Vec::new();
    let two = Rat::int(2) * Rat::pow2_neg(depth);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = o.d(points[i].at(lvl), points[j].at(lvl));
            out.push(Check::le(
                format!("{name}.dist.x{}x{}", i + 1, j + 1),
                d.abs_diff(x.metric.d(i, j)),
                two,
            ));
        }
    }
    for (n, m) in x.sig.slots() {
        let Some(&g) = slot_map.get(&(n, m)) else { continue };
        for t in tuples(points.len(), n) {
            let ot: Vec<usize> = t.iter().map(|&i| points[i].at(lvl)).collect();
            let v = o.value(n, g, &ot).expect("registered slot");
            let tag: Vec<String> = t.iter().map(|i| (i + 1).to_string()).collect();
            out.push(Check::le(
                format!("{name}.pred.n{n}m{m}.x{}", tag.join("-")),
                v.abs_diff(x.p(n, m, &t)),
                step_bound(n, depth),
            ));
        }
    }
    out
}

/// One side of a partial isomorphism: realized points labelled by points of
/// a common ideal structure, and the global slot of every ideal slot in use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Side {
    pub points: Vec<CauchyPoint>,
    pub labels: Vec<usize>,
    pub slot_map: BTreeMap<Slot, usize>,
}

impl Side {
    pub fn position(&self, label: usize) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }
}

/// Distances and predicate values of the labelled points in `only`, compared
/// with the ideal structure at level `depth`.
pub fn side_checks(o: &LimitOracle, ideal: &StructureK, side: &Side, only: &[usize], depth: u32, tol: Rat, name: &str) -> Vec<Check> {
    let lvl = depth as usize;
    let pos: Vec<usize> = only.iter().map(|&l| side.position(l).expect("label on side")).collect();
    let mut out = Vec::new();
    for a in 0..pos.len() {
        for b in (a + 1)..pos.len() {
            let d = o.d(side.points[pos[a]].at(lvl), side.points[pos[b]].at(lvl));
            out.push(Check::le(
                format!("{name}.dist.y{}y{}", only[a] + 1, only[b] + 1),
                d.abs_diff(ideal.metric.d(only[a], only[b])),
                tol,
            ));
        }
    }
    for (n, m) in ideal.sig.slots() {
        let Some(&g) = side.slot_map.get(&(n, m)) else { continue };
        for t in tuples(pos.len(), n) {
            let ot: Vec<usize> = t.iter().map(|&i| side.points[pos[i]].at(lvl)).collect();
            let it: Vec<usize> = t.iter().map(|&i| only[i]).collect();
            let v = o.value(n, g, &ot).expect("registered slot");
            let tag: Vec<String> = it.iter().map(|i| (i + 1).to_string()).collect();
            out.push(Check::le(
                format!("{name}.pred.n{n}m{m}.y{}", tag.join("-")),
                v.abs_diff(ideal.p(n, m, &it)),
                tol,
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackForth {
    pub side1: Side,
    pub side2: Side,
    /// Labels matched on both sides, in order of absorption.
    pub matched: Vec<usize>,
    /// Global slot pairs `(g1, g2)` per ideal slot.
    pub index_map: BTreeMap<Slot, (usize, usize)>,
    pub runs: Vec<PointRun>,
    pub certificate: Certificate,
}

/// Size of the receiving side and depth of the new point for each round.
fn round_depths(sides: &[usize], start: [usize; 2], depth: u32) -> (Vec<usize>, Vec<u32>) {
    let mut sizes = start;
    let mut k_of = Vec::new();
    for &s in sides {
        sizes[s - 1] += 1;
        k_of.push(sizes[s - 1]);
    }
    let mut d_of = vec![0u32; sides.len()];
    for r in (0..sides.len()).rev() {
        let mut need = depth;
        for q in (r + 1)..sides.len() {
            if sides[q] == sides[r] {
                need = need.max(k_of[q] as u32 + d_of[q] + 2);
            }
        }
        d_of[r] = need;
    }
    (k_of, d_of)
}

/// Depth the initial points of both sides need for [`extend_partial_iso`]
/// with sides of the given sizes and wishlists of the given lengths.
pub fn back_forth_floor(start: [usize; 2], wish1: usize, wish2: usize, depth: u32) -> u32 {
    let mut sides = Vec::new();
    for i in 0..wish1.max(wish2) {
        if i < wish1 {
            sides.push(2);
        }
        if i < wish2 {
            sides.push(1);
        }
    }
    let (k_of, d_of) = round_depths(&sides, start, depth);
    k_of.iter()
        .zip(&d_of)
        .map(|(&k, &d)| k as u32 + d + 2)
        .max()
        .unwrap_or(depth)
        .max(depth)
}

/// Extends the partial isomorphism between `side1` and `side2` given by the
/// common labels `matched`. Wishlist labels of one side receive images on the
/// other, alternating forth and back. All points are compared with the ideal
/// structure at level `depth` within `tol`, before and after.
#[allow(clippy::too_many_arguments)]
pub fn extend_partial_iso(
    ideal: &StructureK,
    side1: Side,
    side2: Side,
    matched: &[usize],
    wish1: &[usize],
    wish2: &[usize],
    o: &mut LimitOracle,
    depth: u32,
    tol: Rat,
) -> Result<BackForth, CauchyError> {
    check_bar(ideal)?;
    for (side, wish, tag) in [(&side1, wish1, "1"), (&side2, wish2, "2")] {
        for &l in matched.iter().chain(wish) {
            if side.position(l).is_none() {
                return Err(CauchyError::Input(format!("label {l} missing on side {tag}")));
            }
        }
        if side.labels.len() != side.points.len() {
            return Err(CauchyError::Input(format!("side {tag} labels and points differ in length")));
        }
        check_in_oracle(o, &side.points)?;
    }
    for (side, tag) in [(&side1, "in1"), (&side2, "in2")] {
        if let Some(bad) = side_checks(o, ideal, side, matched, depth, tol, tag)
            .into_iter()
            .find(|c| !c.holds())
        {
            return Err(CauchyError::Tolerance(bad.to_string()));
        }
    }

    // rounds: (side receiving the new point, label)
    let mut rounds: Vec<(usize, usize)> = Vec::new();
    for i in 0..wish1.len().max(wish2.len()) {
        if let Some(&l) = wish1.get(i) {
            rounds.push((2, l));
        }
        if let Some(&l) = wish2.get(i) {
            rounds.push((1, l));
        }
    }
    let sides_of: Vec<usize> = rounds.iter().map(|r| r.0).collect();
    let (k_of, d_of) = round_depths(&sides_of, [side1.points.len(), side2.points.len()], depth);
    for (s, side) in [(1, &side1), (2, &side2)] {
        for q in 0..rounds.len() {
            if rounds[q].0 != s {
                continue;
            }
            let need = k_of[q] + d_of[q] as usize + 2;
            if let Some(i) = side.points.iter().position(|p| p.depth() < need) {
                return Err(CauchyError::Shallow {
                    point: i,
                    have: side.points[i].depth(),
                    need,
                });
            }
        }
    }

    let mut sides = [side1, side2];
    let mut matched: Vec<usize> = matched.to_vec();
    let mut runs = Vec::new();
    let mut certificate = Certificate::new();
    for (r, &(s, label)) in rounds.iter().enumerate() {
        let side = &sides[s - 1];
        let mut labels = side.labels.clone();
        let existing = labels.iter().position(|&l| l == label);
        if existing.is_none() {
            labels.push(label);
            let b = restriction(ideal, &labels);
            let known = b
                .sig
                .slots()
                .into_iter()
                .filter_map(|sl| side.slot_map.get(&sl).map(|&g| (sl, g)))
                .collect();
            let run = extend_one_point(o, &side.points, &b, &known, d_of[r])?;
            certificate.extend(run.certificate.checks.iter().map(|c| prefixed(&format!("round{}", r + 1), c)));
            let side = &mut sides[s - 1];
            side.points.push(run.point.clone());
            side.labels.push(label);
            for (&sl, &g) in &run.slot_map {
                side.slot_map.entry(sl).or_insert(g);
            }
            runs.push(run);
        }
        if !matched.contains(&label) {
            matched.push(label);
        }
    }
    let [side1, side2] = sides;
    certificate.extend(side_checks(o, ideal, &side1, &matched, depth, tol, "out1"));
    certificate.extend(side_checks(o, ideal, &side2, &matched, depth, tol, "out2"));
    let index_map = ideal
        .sig
        .slots()
        .into_iter()
        .filter_map(|sl| Some((sl, (*side1.slot_map.get(&sl)?, *side2.slot_map.get(&sl)?))))
        .collect();
    Ok(BackForth {
        side1,
        side2,
        matched,
        index_map,
        runs,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128) -> Rat {
        Rat::int(n)
    }

    fn two_anchor_problem(l: u32, target: Rat) -> SandwichProblem {
        SandwichProblem {
            targets: vec![target],
            anchor_d: vec![vec![r(0)]],
            prev_d: None,
            l,
        }
    }

    #[test]
    fn sandwich_first_example() {
        let p = two_anchor_problem(1, r(1));
        assert_eq!(p.band(BandRule::Staggered, 0), (Rat::new(9, 8), Rat::new(5, 4)));
        let s = solve_sandwich(&p, BandRule::Staggered).unwrap();
        assert_eq!(s.gamma, vec![Rat::new(1, 8)]);
        assert_eq!(s.eta, vec![Rat::new(9, 8)]);
        assert!(sandwich_checks(&p, &s, "t").iter().all(Check::holds));
    }

    #[test]
    fn sandwich_link() {
        let mut p = two_anchor_problem(2, r(1));
        // previous approximant inside its own window
        p.prev_d = Some(vec![Rat::new(5, 4)]);
        let s = solve_sandwich(&p, BandRule::Staggered).unwrap();
        assert_eq!(s.link, Some(Rat::new(1, 4)));
        assert!(sandwich_checks(&p, &s, "t").iter().all(Check::holds));
    }

    #[test]
    fn sandwich_without_anchors() {
        let p = SandwichProblem {
            targets: vec![],
            anchor_d: vec![],
            prev_d: None,
            l: 1,
        };
        let s = solve_sandwich(&p, BandRule::Staggered).unwrap();
        assert!(s.eta.is_empty() && s.link.is_none());
        let p = SandwichProblem {
            prev_d: Some(vec![]),
            l: 3,
            ..p
        };
        assert_eq!(solve_sandwich(&p, BandRule::Staggered).unwrap().link, Some(Rat::new(1, 8)));
    }

    #[test]
    fn staggered_band_can_be_infeasible() {
        // equal targets, anchors close together
        let p = SandwichProblem {
            targets: vec![r(1), r(1), r(1)],
            anchor_d: vec![
                vec![r(0), Rat::new(1, 8), Rat::new(1, 8)],
                vec![Rat::new(1, 8), r(0), Rat::new(1, 8)],
                vec![Rat::new(1, 8), Rat::new(1, 8), r(0)],
            ],
            prev_d: None,
            l: 1,
        };
        assert!(matches!(
            solve_sandwich(&p, BandRule::Staggered),
            Err(SandwichError::Infeasible { .. })
        ));
        let s = solve_sandwich(&p, BandRule::Uniform).unwrap();
        assert!(sandwich_checks(&p, &s, "t").iter().all(Check::holds));
    }

    fn singleton(v: Rat) -> StructureK {
        let mut b = StructureK::indexed(FinMetric::with_points(["b"]).unwrap(), 1);
        b.set(1, 1, &[0], v).unwrap();
        b
    }

    #[test]
    fn singleton_keeps_rational_target() {
        let mut o = LimitOracle::new(0);
        let run = extend_singleton(&mut o, &singleton(Rat::new(3, 4)), 6).unwrap();
        let g = run.slot_map[&(1, 1)];
        for j in 1..=6 {
            assert_eq!(o.value(1, g, &[run.point.at(j)]), Some(Rat::new(3, 4)));
        }
        for (j, gap) in run.point.gaps().iter().enumerate() {
            assert_eq!(*gap, Rat::pow2_neg(j as u32 + 2));
        }
        assert!(run.certificate.all_hold());

        let run = extend_singleton(&mut o, &singleton(r(0)), 4).unwrap();
        let g = run.slot_map[&(1, 1)];
        assert!(run.point.ids().iter().all(|&u| o.value(1, g, &[u]) == Some(r(0))));
    }

    #[test]
    fn two_point_extension() {
        let mut o = LimitOracle::new(0);
        let mut b = StructureK::indexed(FinMetric::from_pairs(&["b1", "b2"], &[("b1", "b2", r(1))]).unwrap(), 1);
        b.fill(r(0));
        let first = extend_singleton(&mut o, &restriction(&b, &[0]), 2 + 5 + 2).unwrap();
        let known = first.slot_map.clone();
        let run = extend_one_point(&mut o, std::slice::from_ref(&first.point), &b, &known, 5).unwrap();
        assert!(run.certificate.all_hold(), "{:?}", run.certificate.failures().collect::<Vec<_>>());
        let d = o.d(first.point.at(5), run.point.at(5));
        assert!(d.abs_diff(r(1)) <= Rat::pow2_neg(5) + Rat::pow2_neg(5));
    }

    #[test]
    fn anchors_outside_oracle_are_rejected() {
        let mut o = LimitOracle::new(0);
        let mut fake = CauchyPoint::new();
        fake.ids.push(7);
        let mut b = StructureK::indexed(FinMetric::from_pairs(&["b1", "b2"], &[("b1", "b2", r(1))]).unwrap(), 1);
        b.fill(r(0));
        assert_eq!(
            extend_one_point(&mut o, &[fake], &b, &BTreeMap::new(), 1),
            Err(CauchyError::NotInOracle(7))
        );
    }

    #[test]
    fn schedule_for_three_points() {
        assert_eq!(depth_schedule(3, 6, 6), vec![15, 11, 6]);
    }

    #[test]
    fn embed_two_points_with_unary_zero_set() {
        let mut x = StructureK::indexed(FinMetric::from_pairs(&["x1", "x2"], &[("x1", "x2", r(1))]).unwrap(), 1);
        x.set(1, 1, &[0], r(0)).unwrap();
        x.set(1, 1, &[1], r(1)).unwrap();
        let mut o = LimitOracle::new(0);
        let run = embed_structure(&x, &mut o, 6).unwrap();
        assert!(run.certificate.all_hold(), "{:?}", run.certificate.failures().collect::<Vec<_>>());
        let g = run.slot_map[&(1, 1)];
        let v1 = o.value(1, g, &[run.points[0].at(6)]).unwrap();
        let v2 = o.value(1, g, &[run.points[1].at(6)]).unwrap();
        assert!(v1 <= Rat::pow2_neg(4));
        assert!(v2.abs_diff(r(1)) <= Rat::pow2_neg(4));
    }
}
