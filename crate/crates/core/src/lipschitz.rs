//! Universal `L`-Lipschitz maps into a Polish space `Z`.
//!
//! `Z` is presented by dense points `q_1, ..., q_M` (1-based) with exact
//! rational distances. Distinct indices may sit at distance zero only when
//! declared as aliases of one point.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::cauchy::{
    check_in_oracle, depth_schedule, grow_point, prefixed, CauchyError, CauchyPoint, StepCtx, StepFill, DEFAULT_RULES,
};
use crate::certificate::{Certificate, Check};
use crate::metric::{jep_gap_metric, path_amalgam_metric, validate_metric, FinMetric, MetricError, MetricViolation};
use crate::oracle::{GrowthRequest, LimitOracle, OracleError};
use crate::rat::Rat;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolishError {
    #[error("presentation distances are not a pseudometric: {0}")]
    NotMetric(String),
    #[error("presentation has no points")]
    Empty,
    #[error("dense index {0} out of range 1..={1}")]
    IndexRange(usize, usize),
    #[error("Lipschitz constant must be positive")]
    NonPositiveL,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolishPresentation {
    metric: FinMetric,
    aliases: BTreeSet<(usize, usize)>,
}

impl PolishPresentation {
    /// `aliases` holds 1-based index pairs allowed to be at distance zero.
    pub fn new(metric: FinMetric, aliases: BTreeSet<(usize, usize)>) -> Result<PolishPresentation, PolishError> {
        if metric.is_empty() {
            return Err(PolishError::Empty);
        }
        let aliases: BTreeSet<(usize, usize)> = aliases.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        let report = validate_metric(&metric).map_err(|e| PolishError::NotMetric(e.to_string()))?;
        for v in report {
            if let MetricViolation::Identity { x, y } = &v {
                let i = metric.index_of(x).expect("known") + 1;
                let j = metric.index_of(y).expect("known") + 1;
                if aliases.contains(&(i.min(j), i.max(j))) {
                    continue;
                }
            }
            return Err(PolishError::NotMetric(v.to_string()));
        }
        Ok(PolishPresentation { metric, aliases })
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

    pub fn aliases(&self) -> &BTreeSet<(usize, usize)> {
        &self.aliases
    }

    pub fn check_index(&self, i: usize) -> Result<(), PolishError> {
        if i == 0 || i > self.len() {
            return Err(PolishError::IndexRange(i, self.len()));
        }
        Ok(())
    }

    /// `d_Z(q_i, q_j)` for 1-based indices.
    pub fn d(&self, i: usize, j: usize) -> Rat {
        self.metric.d(i - 1, j - 1)
    }
}

/// Finite metric space with an `L`-Lipschitz map into the dense points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureL {
    pub metric: FinMetric,
    /// 1-based dense index of each point.
    pub p: Vec<usize>,
    pub l: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LViolation {
    Metric(String),
    /// `d_Z(q_p(a), q_p(b)) > L d(a, b)`.
    Lipschitz { a: String, b: String, lhs: Rat, rhs: Rat },
}

impl fmt::Display for LViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LViolation::Metric(m) => write!(f, "metric: {m}"),
            LViolation::Lipschitz { a, b, lhs, rhs } => {
                write!(f, "d_Z(F({a}), F({b})) = {lhs} exceeds L d({a}, {b}) = {rhs}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LipschitzError {
    #[error(transparent)]
    Polish(#[from] PolishError),
    #[error("{0} points but {1} dense indices")]
    Arity(usize, usize),
    #[error("Lipschitz constants differ: {0} and {1}")]
    ConstantMismatch(Rat, Rat),
    #[error("invalid structure: {0}")]
    Invalid(String),
    #[error("witness disagrees with the value of {0}")]
    Mismatch(String),
    #[error("target sequence: {0}")]
    Modulus(String),
    #[error("oracle has no Lipschitz layer")]
    NoPolishLayer,
    #[error("point has depth {have}, needs {need}")]
    Missing { have: usize, need: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Cauchy(#[from] CauchyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

impl StructureL {
    pub fn new(metric: FinMetric, p: Vec<usize>, l: Rat) -> StructureL {
        StructureL { metric, p, l }
    }

    pub fn len(&self) -> usize {
        self.metric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metric.is_empty()
    }

    pub fn restrict(&self, idx: &[usize]) -> StructureL {
        StructureL {
            metric: self.metric.restrict(idx),
            p: idx.iter().map(|&i| self.p[i]).collect(),
            l: self.l,
        }
    }
}

/// Violations of the Lipschitz condition; out-of-range indices are errors.
pub fn validate_l(s: &StructureL, z: &PolishPresentation) -> Result<Vec<LViolation>, LipschitzError> {
    if s.p.len() != s.len() {
        return Err(LipschitzError::Arity(s.len(), s.p.len()));
    }
    if !s.l.is_positive() {
        return Err(PolishError::NonPositiveL.into());
    }
    for &q in &s.p {
        z.check_index(q)?;
    }
    match validate_metric(&s.metric) {
        Ok(v) if v.is_empty() => {}
        Ok(v) => return Ok(v.into_iter().map(|x| LViolation::Metric(x.to_string())).collect()),
        Err(e) => return Ok(vec![LViolation::Metric(e.to_string())]),
    }
    let mut out = Vec::new();
    for a in 0..s.len() {
        for b in (a + 1)..s.len() {
            let lhs = z.d(s.p[a], s.p[b]);
            let rhs = s.l * s.metric.d(a, b);
            if lhs > rhs {
                out.push(LViolation::Lipschitz {
                    a: s.metric.id(a).into(),
                    b: s.metric.id(b).into(),
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(out)
}

fn require_valid(s: &StructureL, z: &PolishPresentation) -> Result<(), LipschitzError> {
    match validate_l(s, z)?.first() {
        Some(v) => Err(LipschitzError::Invalid(v.to_string())),
        None => Ok(()),
    }
}

/// Amalgam with the path metric; dense indices carried over.
pub fn amalgamate_l(
    b: &StructureL,
    c: &StructureL,
    a: &StructureL,
    wab: &[usize],
    wac: &[usize],
    z: &PolishPresentation,
) -> Result<(StructureL, Vec<usize>, Vec<usize>), LipschitzError> {
    for s in [b, c] {
        if s.l != a.l {
            return Err(LipschitzError::ConstantMismatch(a.l, s.l));
        }
    }
    for s in [a, b, c] {
        require_valid(s, z)?;
    }
    for x in 0..a.len() {
        if b.p[wab[x]] != a.p[x] || c.p[wac[x]] != a.p[x] {
            return Err(LipschitzError::Mismatch(a.metric.id(x).into()));
        }
    }
    if a.is_empty() {
        return jep_l(b, c, z);
    }
    let am = path_amalgam_metric(&b.metric, &c.metric, &a.metric, wab, wac)?;
    let mut p = vec![0; am.metric.len()];
    for (x, &y) in am.left.iter().enumerate() {
        p[y] = b.p[x];
    }
    for (x, &y) in am.right.iter().enumerate() {
        p[y] = c.p[x];
    }
    Ok((StructureL::new(am.metric, p, a.l), am.left, am.right))
}

/// `max d_Z(q_p(a), q_p(b)) / L` over cross pairs.
pub fn jep_value_scale(a: &StructureL, b: &StructureL, z: &PolishPresentation) -> Rat {
    let mut m = Rat::ZERO;
    for &x in &a.p {
        for &y in &b.p {
            m = m.max(z.d(x, y));
        }
    }
    m / a.l
}

/// Disjoint union at cross distance `2m`, `m` the larger of both diameters
/// and the value scale (1/2 when all vanish).
pub fn jep_l(a: &StructureL, b: &StructureL, z: &PolishPresentation) -> Result<(StructureL, Vec<usize>, Vec<usize>), LipschitzError> {
    if a.l != b.l {
        return Err(LipschitzError::ConstantMismatch(a.l, b.l));
    }
    require_valid(a, z)?;
    require_valid(b, z)?;
    let m = a.metric.diam().max(b.metric.diam()).max(jep_value_scale(a, b, z));
    let m = if m.is_zero() { Rat::new(1, 2) } else { m };
    let am = jep_gap_metric(&a.metric, &b.metric, m + m)?;
    let mut p = vec![0; am.metric.len()];
    for (x, &y) in am.left.iter().enumerate() {
        p[y] = a.p[x];
    }
    for (x, &y) in am.right.iter().enumerate() {
        p[y] = b.p[x];
    }
    Ok((StructureL::new(am.metric, p, a.l), am.left, am.right))
}

/// `L / (k 2^(j+2))`.
pub fn modulus(l: Rat, k: usize, j: usize) -> Rat {
    l * Rat::pow2_neg(j as u32 + 2) / Rat::int(k as i128)
}

/// The dense index sequence has the modulus `L / (k 2^(j+2))` and stays that
/// close to `limit`.
pub fn check_sequence(seq: &[usize], limit: usize, l: Rat, k: usize, z: &PolishPresentation) -> Result<(), LipschitzError> {
    for &q in seq.iter().chain([&limit]) {
        z.check_index(q)?;
    }
    for (j0, &a) in seq.iter().enumerate() {
        let j = j0 + 1;
        let m = modulus(l, k, j);
        for &b in seq[j0 + 1..].iter().chain([&limit]) {
            let d = z.d(a, b);
            if d > m {
                return Err(LipschitzError::Modulus(format!(
                    "d_Z(q{a}, q{b}) = {d} exceeds {m} from step {j}"
                )));
            }
        }
    }
    Ok(())
}

/// Dense index of each approximant from a prescribed sequence.
#[derive(Debug, Clone)]
pub struct LFill {
    seq: Vec<usize>,
}

impl LFill {
    pub fn new(seq: Vec<usize>) -> LFill {
        LFill { seq }
    }
}

impl StepFill for LFill {
    fn fill(&mut self, _o: &LimitOracle, ctx: &StepCtx, req: &mut GrowthRequest) -> Result<(), CauchyError> {
        req.dense = Some(self.seq[ctx.l as usize - 1]);
        Ok(())
    }
}

/// Per-step modulus of the realized dense indices along `a`.
pub fn modulus_checks(o: &LimitOracle, a: &CauchyPoint, k: usize, name: &str) -> Vec<Check> {
    let (z, l) = o.polish().expect("Lipschitz layer");
    let mut out = Vec::new();
    for j in 1..=a.depth() {
        for i in (j + 1)..=a.depth() {
            let d = z.d(o.dense(a.at(j)).unwrap(), o.dense(a.at(i)).unwrap());
            out.push(Check::le(format!("{name}.modulus.u{j}u{i}"), d, modulus(l, k, j)));
            let gaps: Rat = a.gaps()[j - 1..i - 1].iter().sum();
            out.push(Check::le(format!("{name}.tail.u{j}u{i}"), d, l * gaps));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LRun {
    pub point: CauchyPoint,
    pub fallbacks: Vec<u32>,
    pub certificate: Certificate,
}

/// Realizes the last point of `b` next to `anchors`. The value of the new
/// point follows `seq` (the constant sequence at its dense index when absent).
pub fn extend_one_point_l(
    o: &mut LimitOracle,
    anchors: &[CauchyPoint],
    b: &StructureL,
    seq: Option<&[usize]>,
    depth: u32,
) -> Result<LRun, LipschitzError> {
    let (z, l) = o.polish().ok_or(LipschitzError::NoPolishLayer)?;
    let z = z.clone();
    if b.len() != anchors.len() + 1 {
        return Err(LipschitzError::Invalid(format!(
            "target has {} points, expected {}",
            b.len(),
            anchors.len() + 1
        )));
    }
    if b.l != l {
        return Err(LipschitzError::ConstantMismatch(l, b.l));
    }
    require_valid(b, &z)?;
    check_in_oracle(o, anchors)?;
    let k = b.len();
    let last = k - 1;
    let seq: Vec<usize> = match seq {
        Some(s) if s.len() < depth as usize => {
            return Err(LipschitzError::Modulus(format!("{} values for depth {depth}", s.len())))
        }
        Some(s) => s[..depth as usize].to_vec(),
        None => vec![b.p[last]; depth as usize],
    };
    check_sequence(&seq, b.p[last], l, k, &z)?;
    let targets: Vec<Rat> = (0..last).map(|i| b.metric.d(i, last)).collect();
    let mut fill = LFill::new(seq);
    let run = grow_point(o, anchors, &targets, depth, DEFAULT_RULES, &mut fill)?;
    let mut certificate = run.certificate.clone();
    certificate.extend(modulus_checks(o, &run.point, k, "value"));
    Ok(LRun {
        fallbacks: run.fallbacks(DEFAULT_RULES[0]),
        point: run.point,
        certificate,
    })
}

/// Value of the limit map read at level `depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LimitValue {
    pub index: usize,
    /// Certified bound on the distance from `q_index` to the limit value.
    pub bound: Rat,
}

/// `p(u^depth)` with the bound `L 2^-depth`.
pub fn eval_limit_function(o: &LimitOracle, a: &CauchyPoint, depth: u32) -> Result<LimitValue, LipschitzError> {
    let (_, l) = o.polish().ok_or(LipschitzError::NoPolishLayer)?;
    if depth == 0 || a.depth() < depth as usize {
        return Err(LipschitzError::Missing {
            have: a.depth(),
            need: depth.max(1) as usize,
        });
    }
    Ok(LimitValue {
        index: o.dense(a.at(depth as usize)).expect("Lipschitz layer"),
        bound: l * Rat::pow2_neg(depth),
    })
}

/// `d_Z(F(a), F(b)) <= L d + 2 L 2^-depth` for points ideally at distance `d`.
pub fn pair_check(o: &LimitOracle, a: &CauchyPoint, b: &CauchyPoint, d: Rat, depth: u32, name: &str) -> Result<Check, LipschitzError> {
    let (z, l) = o.polish().ok_or(LipschitzError::NoPolishLayer)?;
    let fa = eval_limit_function(o, a, depth)?;
    let fb = eval_limit_function(o, b, depth)?;
    Ok(Check::le(
        name.to_string(),
        z.d(fa.index, fb.index),
        l * d + Rat::int(2) * l * Rat::pow2_neg(depth),
    ))
}

/// Embeds `x` point by point, then checks every value and every pair at
/// level `depth`.
pub fn embed_structure_l(x: &StructureL, o: &mut LimitOracle, depth: u32) -> Result<(Vec<CauchyPoint>, Certificate), LipschitzError> {
    let depths = depth_schedule(x.len(), depth, depth);
    let mut points: Vec<CauchyPoint> = Vec::new();
    let mut cert = Certificate::new();
    for (i, &d) in depths.iter().enumerate() {
        let idx: Vec<usize> = (0..=i).collect();
        let run = extend_one_point_l(o, &points, &x.restrict(&idx), None, d)?;
        cert.extend(run.certificate.checks.iter().map(|c| prefixed(&format!("x{}", i + 1), c)));
        points.push(run.point);
    }
    for i in 0..points.len() {
        let v = eval_limit_function(o, &points[i], depth)?;
        cert.push(Check::eq(
            format!("embed.value.x{}", i + 1),
            Rat::int(v.index as i128),
            Rat::int(x.p[i] as i128),
        ));
        for j in (i + 1)..points.len() {
            let name = format!("embed.pair.x{}x{}", i + 1, j + 1);
            cert.push(pair_check(o, &points[i], &points[j], x.metric.d(i, j), depth, &name)?);
        }
    }
    Ok((points, cert))
}
