//! Finite rational metric structures with 1-Lipschitz predicate tables.
//!
//! A [`StructureK`] is a [`FinMetric`] together with predicate tables `p_m^n`
//! indexed by an arity `n` and an index `m`. Which `(n, m)` slots must be
//! present is fixed by the [`Signature`]:
//!
//! * `Indexed { n_a }`: `p_m^n` for `n <= n_a` and `m <= n_a + 1 - n`.
//! * `Fixed(arities)`: one predicate per listed arity, no index permutations.
//! * `IndexSets { n_a, sets }`: arbitrary index sets `I_n` of size `n_a + 1 - n`.
//!
//! Every table satisfies the Lipschitz condition
//! `p(a) <= p(b) + d(a1,b1) + ... + d(an,bn)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::metric::{validate_metric, FinMetric, MetricError, MetricViolation};
use crate::rat::Rat;

/// Predicate slot `(n, m)`: arity and index.
pub type Slot = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Signature {
    Indexed { n_a: usize },
    Fixed(Vec<usize>),
    IndexSets {
        n_a: usize,
        sets: BTreeMap<usize, BTreeSet<usize>>,
    },
}

impl Signature {
    /// Required slots in `(n, m)` order.
    pub fn slots(&self) -> Vec<Slot> {
        match self {
            Signature::Indexed { n_a } => (1..=*n_a)
                .flat_map(|n| (1..=(n_a + 1 - n)).map(move |m| (n, m)))
                .collect(),
            Signature::Fixed(arities) => {
                let mut count: BTreeMap<usize, usize> = BTreeMap::new();
                let mut out = Vec::new();
                for &n in arities {
                    let c = count.entry(n).or_default();
                    *c += 1;
                    out.push((n, *c));
                }
                out.sort();
                out
            }
            Signature::IndexSets { sets, .. } => sets
                .iter()
                .flat_map(|(&n, ms)| ms.iter().map(move |&m| (n, m)))
                .collect(),
        }
    }

    /// Largest arity in use.
    pub fn n_a(&self) -> usize {
        match self {
            Signature::Indexed { n_a } | Signature::IndexSets { n_a, .. } => *n_a,
            Signature::Fixed(a) => a.iter().copied().max().unwrap_or(0),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Signature::Fixed(_))
    }

    /// Index sets with the sizes `n_a + 1 - n` given by the first indices.
    pub fn initial_sets(n_a: usize) -> Signature {
        let sets = (1..=n_a)
            .map(|n| (n, (1..=(n_a + 1 - n)).collect()))
            .collect();
        Signature::IndexSets { n_a, sets }
    }

    /// Indices available at arity `n`, ascending.
    pub fn indices(&self, n: usize) -> Vec<usize> {
        self.slots()
            .into_iter()
            .filter(|s| s.0 == n)
            .map(|s| s.1)
            .collect()
    }
}

/// Lexicographic odometer over `{0..points}^n`.
#[derive(Debug, Clone)]
pub struct Tuples {
    points: usize,
    cur: Option<Vec<usize>>,
}

impl Iterator for Tuples {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.cur.clone()?;
        let mut next = out.clone();
        let mut i = next.len();
        loop {
            if i == 0 {
                self.cur = None;
                break;
            }
            i -= 1;
            next[i] += 1;
            if next[i] < self.points {
                self.cur = Some(next);
                break;
            }
            next[i] = 0;
        }
        Some(out)
    }
}

pub fn tuples(points: usize, n: usize) -> Tuples {
    let cur = if points == 0 && n > 0 {
        None
    } else {
        Some(vec![0; n])
    };
    Tuples { points, cur }
}

/// One predicate table over `points^n` tuples, possibly partial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredTable {
    n: usize,
    points: usize,
    values: Vec<Option<Rat>>,
}

impl PredTable {
    pub fn new(n: usize, points: usize) -> PredTable {
        let len = points.checked_pow(n as u32).expect("table too large");
        PredTable {
            n,
            points,
            values: vec![None; len],
        }
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn index(&self, t: &[usize]) -> usize {
        debug_assert_eq!(t.len(), self.n);
        t.iter().fold(0, |acc, &x| {
            debug_assert!(x < self.points);
            acc * self.points + x
        })
    }

    fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut t = vec![0; self.n];
        for slot in t.iter_mut().rev() {
            *slot = idx % self.points;
            idx /= self.points;
        }
        t
    }

    pub fn get(&self, t: &[usize]) -> Option<Rat> {
        self.values[self.index(t)]
    }

    pub fn set(&mut self, t: &[usize], r: Rat) {
        let i = self.index(t);
        self.values[i] = Some(r);
    }

    pub fn unset(&mut self, t: &[usize]) {
        let i = self.index(t);
        self.values[i] = None;
    }

    pub fn is_total(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn defined(&self) -> impl Iterator<Item = (Vec<usize>, Rat)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|r| (self.decode(i), r)))
    }

    pub fn undefined(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(i, _)| self.decode(i))
    }

    pub fn max_value(&self) -> Rat {
        self.values.iter().flatten().copied().max().unwrap_or(Rat::ZERO)
    }

    pub fn fill(&mut self, r: Rat) {
        for v in &mut self.values {
            v.get_or_insert(r);
        }
    }
}

/// One failed instance of `p(a) <= p(b) + d(a, b)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LipschitzViolation {
    pub n: usize,
    pub m: usize,
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub pa: Rat,
    pub pb: Rat,
    pub dist: Rat,
}

impl fmt::Display for LipschitzViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "p_{}^{}({}) = {} > {} + {} = p_{}^{}({}) + d",
            self.m,
            self.n,
            self.a.join(","),
            self.pa,
            self.pb,
            self.dist,
            self.m,
            self.n,
            self.b.join(",")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KViolation {
    Metric(MetricViolation),
    MetricIncomplete(String, String),
    /// `n_a` exceeds the number of points (or is 0 on a nonempty structure).
    ArityBound { n_a: usize, points: usize },
    MissingSlot(Slot),
    ExtraSlot(Slot),
    MissingValue { slot: Slot, tuple: Vec<String> },
    Negative { slot: Slot, tuple: Vec<String>, value: Rat },
    Lipschitz(LipschitzViolation),
}

impl fmt::Display for KViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KViolation::Metric(v) => write!(f, "metric: {v}"),
            KViolation::MetricIncomplete(x, y) => write!(f, "missing distance d({x},{y})"),
            KViolation::ArityBound { n_a, points } => {
                write!(f, "arity bound nA = {n_a} not in 1..={points}")
            }
            KViolation::MissingSlot((n, m)) => write!(f, "totality: predicate p_{m}^{n} missing"),
            KViolation::ExtraSlot((n, m)) => {
                write!(f, "totality: predicate p_{m}^{n} must be undefined")
            }
            KViolation::MissingValue { slot: (n, m), tuple } => {
                write!(f, "totality: p_{m}^{n}({}) undefined", tuple.join(","))
            }
            KViolation::Negative {
                slot: (n, m),
                tuple,
                value,
            } => write!(f, "negative value p_{m}^{n}({}) = {value}", tuple.join(",")),
            KViolation::Lipschitz(v) => write!(f, "lipschitz: {v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("no predicate slot p_{1}^{0}")]
    UnknownSlot(usize, usize),
    #[error("tuple has arity {got}, slot needs {want}")]
    Arity { got: usize, want: usize },
    #[error("partial table already violates the Lipschitz condition: {0}")]
    Inconsistent(LipschitzViolation),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureK {
    pub metric: FinMetric,
    pub sig: Signature,
    preds: BTreeMap<Slot, PredTable>,
}

impl StructureK {
    /// Structure with empty tables for every required slot.
    pub fn new(metric: FinMetric, sig: Signature) -> StructureK {
        let points = metric.len();
        let preds = sig
            .slots()
            .into_iter()
            .map(|(n, m)| ((n, m), PredTable::new(n, points)))
            .collect();
        StructureK { metric, sig, preds }
    }

    pub fn indexed(metric: FinMetric, n_a: usize) -> StructureK {
        StructureK::new(metric, Signature::Indexed { n_a })
    }

    pub fn empty() -> StructureK {
        StructureK::indexed(FinMetric::new(), 0)
    }

    pub fn len(&self) -> usize {
        self.metric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metric.is_empty()
    }

    pub fn n_a(&self) -> usize {
        self.sig.n_a()
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.preds.keys().copied()
    }

    pub fn table(&self, n: usize, m: usize) -> Option<&PredTable> {
        self.preds.get(&(n, m))
    }

    pub fn table_mut(&mut self, n: usize, m: usize) -> Option<&mut PredTable> {
        self.preds.get_mut(&(n, m))
    }

    /// Replaces (or adds) a whole table.
    pub fn insert_table(&mut self, m: usize, table: PredTable) {
        assert_eq!(table.points(), self.len());
        self.preds.insert((table.arity(), m), table);
    }

    pub fn remove_table(&mut self, n: usize, m: usize) -> Option<PredTable> {
        self.preds.remove(&(n, m))
    }

    pub fn get(&self, n: usize, m: usize, t: &[usize]) -> Option<Rat> {
        self.preds.get(&(n, m)).and_then(|tab| tab.get(t))
    }

    /// Value of a defined entry; panics otherwise.
    pub fn p(&self, n: usize, m: usize, t: &[usize]) -> Rat {
        self.get(n, m, t)
            .unwrap_or_else(|| panic!("p_{m}^{n}{t:?} undefined"))
    }

    /// Sets one value. Slots outside the signature are created on demand so
    /// that parsers can report them as totality violations.
    pub fn set(&mut self, n: usize, m: usize, t: &[usize], r: Rat) -> Result<(), StructureError> {
        if t.len() != n {
            return Err(StructureError::Arity { got: t.len(), want: n });
        }
        let points = self.len();
        self.preds
            .entry((n, m))
            .or_insert_with(|| PredTable::new(n, points))
            .set(t, r);
        Ok(())
    }

    pub fn set_by_ids(&mut self, n: usize, m: usize, ids: &[&str], r: Rat) -> Result<(), StructureError> {
        let t = ids
            .iter()
            .map(|id| {
                self.metric
                    .index_of(id)
                    .ok_or_else(|| MetricError::UnknownPoint(id.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.set(n, m, &t, r)
    }

    /// Fills every undefined entry of every slot with `r`.
    pub fn fill(&mut self, r: Rat) {
        for tab in self.preds.values_mut() {
            tab.fill(r);
        }
    }

    pub fn max_pred_value(&self) -> Rat {
        self.preds
            .values()
            .map(PredTable::max_value)
            .max()
            .unwrap_or(Rat::ZERO)
    }

    pub fn tuple_ids(&self, t: &[usize]) -> Vec<String> {
        t.iter().map(|&i| self.metric.id(i).to_string()).collect()
    }

    /// Substructure on `idx` with a new signature; `source` names the slot of
    /// `self` each new slot is copied from.
    pub fn project(&self, idx: &[usize], sig: Signature, source: impl Fn(Slot) -> Slot) -> StructureK {
        let mut out = StructureK::new(self.metric.restrict(idx), sig);
        let slots: Vec<Slot> = out.slots().collect();
        for (n, m) in slots {
            let Some(src) = self.preds.get(&source((n, m))) else {
                continue;
            };
            let tab = out.preds.get_mut(&(n, m)).expect("slot exists");
            for t in tuples(idx.len(), n) {
                let orig: Vec<usize> = t.iter().map(|&i| idx[i]).collect();
                if let Some(r) = src.get(&orig) {
                    tab.set(&t, r);
                }
            }
        }
        out
    }

    /// Hereditary restriction for the indexed signature: keeps `p_m^n` for
    /// `n <= n_a`, `m <= n_a + 1 - n`.
    pub fn substructure(&self, idx: &[usize], n_a: usize) -> StructureK {
        self.project(idx, Signature::Indexed { n_a }, |s| s)
    }
}

/// Checks `p(a) <= p(b) + d(a, b)` over every pair of defined tuples.
pub fn lipschitz_all_pairs(metric: &FinMetric, m: usize, tab: &PredTable) -> Option<LipschitzViolation> {
    let defined: Vec<(Vec<usize>, Rat)> = tab.defined().collect();
    for (a, pa) in &defined {
        for (b, pb) in &defined {
            let dist = metric.tuple_distance(a, b);
            if *pa > *pb + dist {
                return Some(violation(metric, tab.arity(), m, a, b, *pa, *pb, dist));
            }
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn violation(metric: &FinMetric, n: usize, m: usize, a: &[usize], b: &[usize], pa: Rat, pb: Rat, dist: Rat) -> LipschitzViolation {
    let ids = |t: &[usize]| t.iter().map(|&i| metric.id(i).to_string()).collect();
    LipschitzViolation {
        n,
        m,
        a: ids(a),
        b: ids(b),
        pa,
        pb,
        dist,
    }
}

/// Checks a total table by comparing tuples that differ in one coordinate;
/// a general pair is linked by a chain of such steps whose distances add up.
pub fn lipschitz_total(metric: &FinMetric, m: usize, tab: &PredTable) -> Vec<LipschitzViolation> {
    let mut out = Vec::new();
    let points = metric.len();
    for a in tuples(points, tab.arity()) {
        let pa = tab.get(&a).expect("total table");
        let mut b = a.clone();
        for i in 0..a.len() {
            for x in 0..points {
                if x == a[i] {
                    continue;
                }
                b[i] = x;
                let pb = tab.get(&b).expect("total table");
                let dist = metric.d(a[i], x);
                if pa > pb + dist {
                    out.push(violation(metric, tab.arity(), m, &a, &b, pa, pb, dist));
                }
            }
            b[i] = a[i];
        }
    }
    out
}

/// Full report for the three defining conditions; empty means valid.
pub fn validate_k(s: &StructureK) -> Vec<KViolation> {
    let mut out = Vec::new();
    let metric_ok = match validate_metric(&s.metric) {
        Ok(v) => {
            let ok = v.is_empty();
            out.extend(v.into_iter().map(KViolation::Metric));
            ok
        }
        Err(MetricError::MissingEntry(x, y)) => {
            out.push(KViolation::MetricIncomplete(x, y));
            false
        }
        Err(e) => unreachable!("validate_metric only reports missing entries: {e}"),
    };
    if !s.sig.is_fixed() {
        let n_a = s.n_a();
        let bad = if s.is_empty() { n_a != 0 } else { n_a == 0 || n_a > s.len() };
        if bad {
            out.push(KViolation::ArityBound {
                n_a,
                points: s.len(),
            });
        }
    }
    let required: BTreeSet<Slot> = s.sig.slots().into_iter().collect();
    for slot in &required {
        if !s.preds.contains_key(slot) {
            out.push(KViolation::MissingSlot(*slot));
        }
    }
    for (&slot, tab) in &s.preds {
        if !required.contains(&slot) {
            // an extra slot with no values is harmless bookkeeping
            if tab.defined().next().is_some() {
                out.push(KViolation::ExtraSlot(slot));
            }
            continue;
        }
        for t in tab.undefined() {
            out.push(KViolation::MissingValue {
                slot,
                tuple: s.tuple_ids(&t),
            });
        }
        for (t, r) in tab.defined() {
            if r.is_negative() {
                out.push(KViolation::Negative {
                    slot,
                    tuple: s.tuple_ids(&t),
                    value: r,
                });
            }
        }
        if !metric_ok {
            continue;
        }
        if tab.is_total() {
            out.extend(lipschitz_total(&s.metric, slot.1, tab).into_iter().map(KViolation::Lipschitz));
        } else if let Some(v) = lipschitz_all_pairs(&s.metric, slot.1, tab) {
            out.push(KViolation::Lipschitz(v));
        }
    }
    out
}

/// Completes a partial table by `p(t) = max(0, max_{t' defined} p(t') - d(t', t))`.
pub fn canonical_extend(metric: &FinMetric, m: usize, tab: &PredTable) -> Result<PredTable, StructureError> {
    if let Some(v) = lipschitz_all_pairs(metric, m, tab) {
        return Err(StructureError::Inconsistent(v));
    }
    let defined: Vec<(Vec<usize>, Rat)> = tab.defined().collect();
    let mut out = tab.clone();
    for t in tab.undefined() {
        let v = defined
            .iter()
            .map(|(d, r)| r.sat_sub(metric.tuple_distance(d, &t)))
            .max()
            .unwrap_or(Rat::ZERO);
        out.set(&t, v);
    }
    Ok(out)
}

/// Point map plus slot map `(n, m) -> m'` (the arity is preserved).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EmbeddingK {
    pub phi: Vec<usize>,
    pub pi: BTreeMap<Slot, usize>,
}

impl EmbeddingK {
    pub fn identity(s: &StructureK) -> EmbeddingK {
        EmbeddingK {
            phi: (0..s.len()).collect(),
            pi: s.sig.slots().into_iter().map(|(n, m)| ((n, m), m)).collect(),
        }
    }

    pub fn image(&self, slot: Slot) -> Option<Slot> {
        self.pi.get(&slot).map(|&m| (slot.0, m))
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &EmbeddingK) -> EmbeddingK {
        EmbeddingK {
            phi: first.phi.iter().map(|&i| self.phi[i]).collect(),
            pi: first
                .pi
                .iter()
                .filter_map(|(&(n, m), &m1)| self.pi.get(&(n, m1)).map(|&m2| ((n, m), m2)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbeddingError {
    #[error("point map has length {got}, source has {want} points")]
    PointCount { got: usize, want: usize },
    #[error("point map sends {0} outside the target")]
    PointRange(String),
    #[error("point map is not injective at {0}")]
    PointNotInjective(String),
    #[error("no index assigned to p_{1}^{0}")]
    MissingIndex(usize, usize),
    #[error("index map sends p_{1}^{0} to a slot the target lacks")]
    IndexRange(usize, usize),
    #[error("index map at arity {0} is not injective")]
    IndexNotInjective(usize),
    #[error("fixed-arity signatures admit no index permutation (p_{1}^{0})")]
    PermutationNotAllowed(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbeddingFailure {
    Distance {
        x: String,
        y: String,
        source: Rat,
        image: Rat,
    },
    Predicate {
        slot: Slot,
        target: Slot,
        tuple: Vec<String>,
        source: Rat,
        image: Option<Rat>,
    },
}

impl fmt::Display for EmbeddingFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingFailure::Distance { x, y, source, image } => {
                write!(f, "d({x},{y}) = {source} but image distance is {image}")
            }
            EmbeddingFailure::Predicate {
                slot: (n, m),
                target: (_, m2),
                tuple,
                source,
                image,
            } => {
                let image = image.map_or("undefined".to_string(), |r| r.to_string());
                write!(f, "p_{m}^{n}({}) = {source} but image p_{m2}^{n} = {image}", tuple.join(","))
            }
        }
    }
}

/// `Ok(None)` when `w` is an embedding, `Ok(Some(first failure))` otherwise.
pub fn check_embedding_k(a: &StructureK, b: &StructureK, w: &EmbeddingK) -> Result<Option<EmbeddingFailure>, EmbeddingError> {
    if w.phi.len() != a.len() {
        return Err(EmbeddingError::PointCount {
            got: w.phi.len(),
            want: a.len(),
        });
    }
    let mut seen = vec![false; b.len()];
    for (i, &x) in w.phi.iter().enumerate() {
        if x >= b.len() {
            return Err(EmbeddingError::PointRange(a.metric.id(i).into()));
        }
        if std::mem::replace(&mut seen[x], true) {
            return Err(EmbeddingError::PointNotInjective(a.metric.id(i).into()));
        }
    }
    let both_fixed = a.sig.is_fixed() && b.sig.is_fixed();
    let mut used: BTreeSet<Slot> = BTreeSet::new();
    for (n, m) in a.sig.slots() {
        let m2 = *w.pi.get(&(n, m)).ok_or(EmbeddingError::MissingIndex(n, m))?;
        if b.table(n, m2).is_none() {
            return Err(EmbeddingError::IndexRange(n, m));
        }
        if both_fixed && m2 != m {
            return Err(EmbeddingError::PermutationNotAllowed(n, m));
        }
        if !used.insert((n, m2)) {
            return Err(EmbeddingError::IndexNotInjective(n));
        }
    }
    for i in 0..a.len() {
        for j in 0..i {
            let (s, t) = (a.metric.d(i, j), b.metric.d(w.phi[i], w.phi[j]));
            if s != t {
                return Ok(Some(EmbeddingFailure::Distance {
                    x: a.metric.id(j).into(),
                    y: a.metric.id(i).into(),
                    source: s,
                    image: t,
                }));
            }
        }
    }
    for (n, m) in a.sig.slots() {
        let Some(tab) = a.table(n, m) else { continue };
        let m2 = w.pi[&(n, m)];
        let target = b.table(n, m2).expect("checked above");
        for (t, r) in tab.defined() {
            let image: Vec<usize> = t.iter().map(|&x| w.phi[x]).collect();
            let got = target.get(&image);
            if got != Some(r) {
                return Ok(Some(EmbeddingFailure::Predicate {
                    slot: (n, m),
                    target: (n, m2),
                    tuple: a.tuple_ids(&t),
                    source: r,
                    image: got,
                }));
            }
        }
    }
    Ok(None)
}

/// Permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Lexicographically first isomorphism `a -> b`: point bijections are tried in
/// order and, for the first isometric one that admits them, the first index
/// permutation at each arity.
pub fn find_isomorphism(a: &StructureK, b: &StructureK) -> Option<EmbeddingK> {
    if a.len() != b.len() {
        return None;
    }
    let arities: BTreeSet<usize> = a.sig.slots().iter().map(|s| s.0).collect();
    let b_arities: BTreeSet<usize> = b.sig.slots().iter().map(|s| s.0).collect();
    if arities != b_arities {
        return None;
    }
    let per_arity: Vec<(usize, Vec<usize>, Vec<usize>)> = arities
        .iter()
        .map(|&n| (n, a.sig.indices(n), b.sig.indices(n)))
        .collect();
    if per_arity.iter().any(|(_, x, y)| x.len() != y.len()) {
        return None;
    }
    let fixed = a.sig.is_fixed() && b.sig.is_fixed();
    'phi: for phi in permutations(a.len()) {
        for i in 0..a.len() {
            for j in 0..i {
                if a.metric.d(i, j) != b.metric.d(phi[i], phi[j]) {
                    continue 'phi;
                }
            }
        }
        let mut pi = BTreeMap::new();
        for (n, src, dst) in &per_arity {
            let choices = if fixed {
                vec![(0..src.len()).collect()]
            } else {
                permutations(src.len())
            };
            let found = choices.into_iter().find(|perm| {
                src.iter().zip(perm).all(|(&m, &k)| same_table(a, b, &phi, (*n, m), (*n, dst[k])))
            });
            match found {
                Some(perm) => {
                    for (&m, &k) in src.iter().zip(&perm) {
                        pi.insert((*n, m), dst[k]);
                    }
                }
                None => continue 'phi,
            }
        }
        return Some(EmbeddingK { phi, pi });
    }
    None
}

fn same_table(a: &StructureK, b: &StructureK, phi: &[usize], sa: Slot, sb: Slot) -> bool {
    let (Some(ta), Some(tb)) = (a.table(sa.0, sa.1), b.table(sb.0, sb.1)) else {
        return false;
    };
    tuples(a.len(), sa.0).all(|t| {
        let image: Vec<usize> = t.iter().map(|&x| phi[x]).collect();
        ta.get(&t) == tb.get(&image)
    })
}
