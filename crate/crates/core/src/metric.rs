//! Finite rational metric spaces.
//!
//! [`FinMetric`] keeps an ordered list of opaque point ids together with a
//! symmetric distance table. The table may be partial while a space is being
//! assembled (for example by the file parser); [`validate_metric`] reports a
//! missing entry as a structural error, distinct from an axiom violation.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::rat::Rat;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FinMetric {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    // packed strict lower triangle: entry (i, j) with j < i lives at i*(i-1)/2 + j
    lower: Vec<Option<Rat>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("duplicate point id {0:?}")]
    DuplicatePoint(String),
    #[error("unknown point id {0:?}")]
    UnknownPoint(String),
    #[error("point index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("missing distance entry for ({0}, {1})")]
    MissingEntry(String, String),
    #[error("self distance of {0:?} must be zero")]
    SelfDistance(String),
    #[error("witness is not an isometric embedding: d({x},{y}) = {expected} but image distance is {image}")]
    NotIsometric {
        x: String,
        y: String,
        expected: Rat,
        image: Rat,
    },
    #[error("witness is not injective or has the wrong length")]
    BadWitness,
    #[error("common part is empty while both sides add points; use jep_gap_metric")]
    EmptyOverlap,
    #[error("gap must be positive when both sides are nonempty")]
    ZeroGap,
    #[error("gap {gap} infeasible: triangle ({x}, {y}, *) needs d({x},{y}) = {dist} <= 2*gap")]
    InfeasibleGap {
        x: String,
        y: String,
        dist: Rat,
        gap: Rat,
    },
    #[error("proposed distance to the new point from {0:?} must be positive")]
    NonPositiveEta(String),
    #[error("base point {0:?} listed twice")]
    DuplicateBase(String),
}

/// One failed metric axiom, naming the offending points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricViolation {
    Negative { x: String, y: String, value: Rat },
    /// Distinct points at distance zero.
    Identity { x: String, y: String },
    /// `d(x, z) > d(x, via) + d(via, z)`.
    Triangle {
        x: String,
        z: String,
        via: String,
        direct: Rat,
        detour: Rat,
    },
}

impl fmt::Display for MetricViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricViolation::Negative { x, y, value } => {
                write!(f, "negative distance d({x},{y}) = {value}")
            }
            MetricViolation::Identity { x, y } => {
                write!(f, "identity of indiscernibles: d({x},{y}) = 0")
            }
            MetricViolation::Triangle {
                x,
                z,
                via,
                direct,
                detour,
            } => write!(
                f,
                "triangle on ({x},{z},{via}): d({x},{z}) = {direct} > {detour} = d({x},{via}) + d({via},{z})"
            ),
        }
    }
}

fn slot(i: usize, j: usize) -> usize {
    debug_assert!(j < i);
    i * (i - 1) / 2 + j
}

impl FinMetric {
    pub fn new() -> FinMetric {
        FinMetric::default()
    }

    pub fn with_points<I, S>(ids: I) -> Result<FinMetric, MetricError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut m = FinMetric::new();
        for id in ids {
            m.add_point(id)?;
        }
        Ok(m)
    }

    /// Builds a total space from `(x, y, d)` triples.
    pub fn from_pairs<S: AsRef<str>>(
        ids: &[S],
        pairs: &[(&str, &str, Rat)],
    ) -> Result<FinMetric, MetricError> {
        let mut m = FinMetric::with_points(ids.iter().map(|s| s.as_ref().to_string()))?;
        for (x, y, d) in pairs {
            m.set_by_id(x, y, *d)?;
        }
        Ok(m)
    }

    pub fn add_point(&mut self, id: impl Into<String>) -> Result<usize, MetricError> {
        let id = id.into();
        if self.index.contains_key(&id) {
            return Err(MetricError::DuplicatePoint(id));
        }
        let i = self.ids.len();
        self.index.insert(id.clone(), i);
        self.ids.push(id);
        self.lower.extend(std::iter::repeat_n(None, i));
        Ok(i)
    }

    /// Appends a point with its distances to every existing point.
    pub fn push_point(&mut self, id: impl Into<String>, dists: &[Rat]) -> Result<usize, MetricError> {
        assert_eq!(dists.len(), self.len(), "one distance per existing point");
        let i = self.add_point(id)?;
        for (j, d) in dists.iter().enumerate() {
            self.lower[slot(i, j)] = Some(*d);
        }
        Ok(i)
    }

    pub fn set(&mut self, i: usize, j: usize, d: Rat) {
        assert!(i != j, "cannot set a self distance");
        let (hi, lo) = if i > j { (i, j) } else { (j, i) };
        self.lower[slot(hi, lo)] = Some(d);
    }

    pub fn set_by_id(&mut self, x: &str, y: &str, d: Rat) -> Result<(), MetricError> {
        let i = self.index_of(x).ok_or_else(|| MetricError::UnknownPoint(x.to_string()))?;
        let j = self.index_of(y).ok_or_else(|| MetricError::UnknownPoint(y.to_string()))?;
        if i == j {
            if d.is_zero() {
                return Ok(());
            }
            return Err(MetricError::SelfDistance(x.to_string()));
        }
        self.set(i, j, d);
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<Rat> {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => Some(Rat::ZERO),
            std::cmp::Ordering::Greater => self.lower[slot(i, j)],
            std::cmp::Ordering::Less => self.lower[slot(j, i)],
        }
    }

    /// Distance between two points of a total table.
    pub fn d(&self, i: usize, j: usize) -> Rat {
        self.get(i, j)
            .unwrap_or_else(|| panic!("missing distance ({}, {})", self.ids[i], self.ids[j]))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn first_missing(&self) -> Option<(usize, usize)> {
        for i in 0..self.len() {
            for j in 0..i {
                if self.lower[slot(i, j)].is_none() {
                    return Some((j, i));
                }
            }
        }
        None
    }

    pub fn is_total(&self) -> bool {
        self.lower.iter().all(Option::is_some)
    }

    /// Largest distance (0 for spaces with fewer than two points).
    pub fn diam(&self) -> Rat {
        self.lower.iter().flatten().copied().max().unwrap_or(Rat::ZERO)
    }

    /// Subspace on the given indices, in the given order.
    pub fn restrict(&self, idx: &[usize]) -> FinMetric {
        let mut m = FinMetric::new();
        for &i in idx {
            m.add_point(self.ids[i].clone()).expect("distinct indices");
        }
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate().take(a) {
                if let Some(d) = self.get(i, j) {
                    m.set(a, b, d);
                }
            }
        }
        m
    }

    /// Sum metric on tuples: `d(a1,b1) + ... + d(an,bn)`.
    pub fn tuple_distance(&self, a: &[usize], b: &[usize]) -> Rat {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(&x, &y)| self.d(x, y)).sum()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, Rat)> + '_ {
        (0..self.len()).flat_map(move |i| (0..i).filter_map(move |j| self.get(i, j).map(|d| (j, i, d))))
    }
}

/// Checks the four metric axioms. Violations are listed in a deterministic
/// order; an empty list means the table is a metric.
pub fn validate_metric(m: &FinMetric) -> Result<Vec<MetricViolation>, MetricError> {
    if let Some((i, j)) = m.first_missing() {
        return Err(MetricError::MissingEntry(m.id(i).into(), m.id(j).into()));
    }
    let n = m.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = m.d(i, j);
            if d.is_negative() {
                out.push(MetricViolation::Negative {
                    x: m.id(i).into(),
                    y: m.id(j).into(),
                    value: d,
                });
            } else if d.is_zero() {
                out.push(MetricViolation::Identity {
                    x: m.id(i).into(),
                    y: m.id(j).into(),
                });
            }
        }
    }
    for x in 0..n {
        for z in (x + 1)..n {
            let direct = m.d(x, z);
            for y in 0..n {
                if y == x || y == z {
                    continue;
                }
                let detour = m.d(x, y) + m.d(y, z);
                if direct > detour {
                    out.push(MetricViolation::Triangle {
                        x: m.id(x).into(),
                        z: m.id(z).into(),
                        via: m.id(y).into(),
                        direct,
                        detour,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Result of gluing two spaces: the glued table plus where each input point
/// landed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Amalgam {
    pub metric: FinMetric,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Fresh id for `id` that does not clash with `taken`.
pub(crate) fn fresh_id(id: &str, taken: &FinMetric) -> String {
    let mut candidate = id.to_string();
    while taken.contains(&candidate) {
        candidate.push('\'');
    }
    candidate
}

fn check_isometric(source: &FinMetric, target: &FinMetric, w: &[usize]) -> Result<(), MetricError> {
    if w.len() != source.len() || w.iter().any(|&i| i >= target.len()) {
        return Err(MetricError::BadWitness);
    }
    let mut seen = vec![false; target.len()];
    for &i in w {
        if std::mem::replace(&mut seen[i], true) {
            return Err(MetricError::BadWitness);
        }
    }
    for i in 0..source.len() {
        for j in 0..i {
            let (s, t) = (source.d(i, j), target.d(w[i], w[j]));
            if s != t {
                return Err(MetricError::NotIsometric {
                    x: source.id(i).into(),
                    y: source.id(j).into(),
                    expected: s,
                    image: t,
                });
            }
        }
    }
    Ok(())
}

/// Glues `b` and `c` over a common subspace `a`.
///
/// `wab[i]` / `wac[i]` give the position of `a`'s point `i` in `b` / `c`. The
/// output lists `b`'s points first (same order), then the points of `c` not in
/// the image of `a`. A cross distance is the shortest path through `a`:
/// `d(x, y) = min_z d(x, z) + d(z, y)`.
pub fn path_amalgam_metric(
    b: &FinMetric,
    c: &FinMetric,
    a: &FinMetric,
    wab: &[usize],
    wac: &[usize],
) -> Result<Amalgam, MetricError> {
    check_isometric(a, b, wab)?;
    check_isometric(a, c, wac)?;
    let mut c_from_a = vec![None; c.len()];
    for (ai, &ci) in wac.iter().enumerate() {
        c_from_a[ci] = Some(ai);
    }
    let b_new = b.len() > a.len();
    let c_new = c.len() > a.len();
    if a.is_empty() && b_new && c_new {
        return Err(MetricError::EmptyOverlap);
    }

    let mut d = b.clone();
    let mut right = vec![0; c.len()];
    for ci in 0..c.len() {
        if let Some(ai) = c_from_a[ci] {
            right[ci] = wab[ai];
            continue;
        }
        let dists: Vec<Rat> = (0..b.len())
            .map(|bi| {
                (0..a.len())
                    .map(|ai| b.d(bi, wab[ai]) + c.d(wac[ai], ci))
                    .min()
                    .expect("nonempty overlap")
            })
            .collect();
        // distances to earlier new points of c are inherited from c
        let mut row = dists;
        for (cj, &pos) in right.iter().enumerate().take(ci) {
            if c_from_a[cj].is_none() {
                debug_assert_eq!(row.len(), pos);
                row.push(c.d(ci, cj));
            }
        }
        let id = fresh_id(c.id(ci), &d);
        right[ci] = d.push_point(id, &row)?;
    }
    Ok(Amalgam {
        metric: d,
        left: (0..b.len()).collect(),
        right,
    })
}

/// Disjoint union with every cross distance equal to `gap`.
///
/// A constant cross distance `c` gives a metric iff `2c >= diam` on each side.
pub fn jep_gap_metric(a: &FinMetric, b: &FinMetric, gap: Rat) -> Result<Amalgam, MetricError> {
    if a.is_empty() {
        return Ok(Amalgam {
            metric: b.clone(),
            left: vec![],
            right: (0..b.len()).collect(),
        });
    }
    if b.is_empty() {
        return Ok(Amalgam {
            metric: a.clone(),
            left: (0..a.len()).collect(),
            right: vec![],
        });
    }
    if !gap.is_positive() {
        return Err(MetricError::ZeroGap);
    }
    for side in [a, b] {
        for (i, j, d) in side.pairs() {
            if d > gap + gap {
                return Err(MetricError::InfeasibleGap {
                    x: side.id(i).into(),
                    y: side.id(j).into(),
                    dist: d,
                    gap,
                });
            }
        }
    }
    let mut m = a.clone();
    let mut right = Vec::with_capacity(b.len());
    for bi in 0..b.len() {
        let mut row = vec![gap; a.len()];
        row.extend(right.iter().map(|&pos: &usize| b.d(bi, pos - a.len())));
        let id = fresh_id(b.id(bi), &m);
        right.push(m.push_point(id, &row)?);
    }
    Ok(Amalgam {
        metric: m,
        left: (0..a.len()).collect(),
        right,
    })
}

/// Proposed distances from a new point to some points of an existing space.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OnePointSpec {
    pub base: Vec<usize>,
    pub eta: Vec<Rat>,
}

impl OnePointSpec {
    pub fn new(entries: impl IntoIterator<Item = (usize, Rat)>) -> OnePointSpec {
        let (base, eta) = entries.into_iter().unzip();
        OnePointSpec { base, eta }
    }

    pub fn from_ids(m: &FinMetric, entries: &[(&str, Rat)]) -> Result<OnePointSpec, MetricError> {
        let mut spec = OnePointSpec::default();
        for (id, r) in entries {
            let i = m.index_of(id).ok_or_else(|| MetricError::UnknownPoint(id.to_string()))?;
            spec.base.push(i);
            spec.eta.push(*r);
        }
        Ok(spec)
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }
}

/// First triangle inequality that adjoining the new point would break.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OnePointViolation {
    /// `|eta(x) - eta(y)| > d(x, y)`.
    Lower { x: String, y: String, diff: Rat, dist: Rat },
    /// `d(x, y) > eta(x) + eta(y)`.
    Upper { x: String, y: String, dist: Rat, sum: Rat },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    Infeasible(OnePointViolation),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

fn check_spec(m: &FinMetric, spec: &OnePointSpec) -> Result<(), MetricError> {
    assert_eq!(spec.base.len(), spec.eta.len());
    let mut seen = vec![false; m.len()];
    for (&i, eta) in spec.base.iter().zip(&spec.eta) {
        if i >= m.len() {
            return Err(MetricError::IndexOutOfRange(i));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(MetricError::DuplicateBase(m.id(i).into()));
        }
        if !eta.is_positive() {
            return Err(MetricError::NonPositiveEta(m.id(i).into()));
        }
    }
    Ok(())
}

/// Decides whether `base ∪ {new}` with the proposed distances is a metric
/// space (the base itself is assumed metric).
pub fn one_point_feasible(m: &FinMetric, spec: &OnePointSpec) -> Result<Feasibility, MetricError> {
    check_spec(m, spec)?;
    for a in 0..spec.len() {
        for b in (a + 1)..spec.len() {
            let (x, y) = (spec.base[a], spec.base[b]);
            let (ex, ey) = (spec.eta[a], spec.eta[b]);
            let dist = m.d(x, y);
            let diff = ex.abs_diff(ey);
            if diff > dist {
                return Ok(Feasibility::Infeasible(OnePointViolation::Lower {
                    x: m.id(x).into(),
                    y: m.id(y).into(),
                    diff,
                    dist,
                }));
            }
            if dist > ex + ey {
                return Ok(Feasibility::Infeasible(OnePointViolation::Upper {
                    x: m.id(x).into(),
                    y: m.id(y).into(),
                    dist,
                    sum: ex + ey,
                }));
            }
        }
    }
    Ok(Feasibility::Feasible)
}

/// Distances from the new point to every point of `m`, routed through the
/// base: `min_z eta(z) + d(z, x)`. On a feasible spec this agrees with `eta`
/// on the base.
pub fn path_distances(m: &FinMetric, spec: &OnePointSpec) -> Vec<Rat> {
    assert!(!spec.is_empty(), "path distances need a nonempty base");
    (0..m.len())
        .map(|x| {
            spec.base
                .iter()
                .zip(&spec.eta)
                .map(|(&z, &e)| e + m.d(z, x))
                .min()
                .expect("nonempty base")
        })
        .collect()
}
