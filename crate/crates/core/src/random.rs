//! Seeded generators for random finite structures.
//!
//! Every value is a multiple of `1/den`, so generated instances stay small and
//! exact. All generators take an explicit RNG; pass a seeded `ChaCha8Rng` for
//! reproducible runs.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::lipschitz::{PolishPresentation, StructureL};
use crate::metric::{one_point_feasible, path_distances, FinMetric, OnePointSpec};
use crate::product::{CompactPresentation, StructureC, SuitableFn};
use crate::rat::Rat;
use crate::relational::{tuples, EmbeddingK, PredTable, Signature, StructureK};

/// Uniform multiple of `1/den` in `[lo, hi]`. Panics if there is none.
pub fn rat_between<R: Rng + ?Sized>(rng: &mut R, lo: Rat, hi: Rat, den: i128) -> Rat {
    let a = (lo.numer() * den + lo.denom() - 1).div_euclid(lo.denom());
    let b = (hi.numer() * den).div_euclid(hi.denom());
    assert!(a <= b, "no multiple of 1/{den} in [{lo}, {hi}]");
    Rat::new(rng.gen_range(a..=b), den)
}

/// Random metric on points `p1..pn`: positive distances up to `max`, closed
/// under shortest paths.
pub fn metric<R: Rng + ?Sized>(rng: &mut R, n: usize, den: i128, max: Rat) -> FinMetric {
    metric_with_prefix(rng, n, den, max, "p")
}

pub fn metric_with_prefix<R: Rng + ?Sized>(rng: &mut R, n: usize, den: i128, max: Rat, prefix: &str) -> FinMetric {
    let unit = Rat::new(1, den);
    let mut d = vec![vec![Rat::ZERO; n]; n];
    for i in 0..n {
        for j in 0..i {
            let r = rat_between(rng, unit, max, den);
            d[i][j] = r;
            d[j][i] = r;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let mut m = FinMetric::with_points((1..=n).map(|i| format!("{prefix}{i}"))).expect("distinct ids");
    for i in 0..n {
        for j in 0..i {
            m.set(i, j, d[i][j]);
        }
    }
    m
}

/// Distances from a random new point to every point of `m`.
pub fn katetov<R: Rng + ?Sized>(rng: &mut R, m: &FinMetric, den: i128, max: Rat) -> Vec<Rat> {
    let unit = Rat::new(1, den);
    let all: Vec<usize> = (0..m.len()).collect();
    for _ in 0..16 {
        let size = rng.gen_range(1..=m.len());
        let base: Vec<usize> = all.choose_multiple(rng, size).copied().collect();
        let eta: Vec<Rat> = base.iter().map(|_| rat_between(rng, unit, max, den)).collect();
        let spec = OnePointSpec { base, eta };
        if one_point_feasible(m, &spec).expect("valid spec").is_feasible() {
            return path_distances(m, &spec);
        }
    }
    let spec = OnePointSpec::new([(rng.gen_range(0..m.len()), rat_between(rng, unit, max, den))]);
    path_distances(m, &spec)
}

/// Adds a random point called `id` to `m`.
pub fn add_point<R: Rng + ?Sized>(rng: &mut R, m: &mut FinMetric, id: &str, den: i128, max: Rat) -> usize {
    let dists = if m.is_empty() { vec![] } else { katetov(rng, m, den, max) };
    m.push_point(id, &dists).expect("fresh id")
}

/// Interval of values at `t` compatible with the defined entries of `tab`.
pub fn admissible(metric: &FinMetric, tab: &PredTable, t: &[usize]) -> (Rat, Option<Rat>) {
    let mut lo = Rat::ZERO;
    let mut hi: Option<Rat> = None;
    for (s, v) in tab.defined() {
        let d = metric.tuple_distance(&s, t);
        lo = lo.max(v - d);
        hi = Some(hi.map_or(v + d, |h| h.min(v + d)));
    }
    (lo, hi)
}

/// Defines every missing entry of `tab` in random order, each uniformly in
/// its admissible range capped at `max`. A consistent table stays consistent.
pub fn complete_table<R: Rng + ?Sized>(rng: &mut R, metric: &FinMetric, tab: &mut PredTable, den: i128, max: Rat) {
    let mut todo: Vec<Vec<usize>> = tab.undefined().collect();
    todo.shuffle(rng);
    for t in todo {
        let (lo, hi) = admissible(metric, tab, &t);
        let hi = hi.map_or(max.max(lo), |h| h.min(max.max(lo)));
        let v = rat_between(rng, lo, hi, den);
        tab.set(&t, v);
    }
}

/// Consistent partial table: each tuple is defined with probability `fill`.
pub fn partial_table<R: Rng + ?Sized>(rng: &mut R, metric: &FinMetric, n: usize, den: i128, max: Rat, fill: f64) -> PredTable {
    let mut full = PredTable::new(n, metric.len());
    complete_table(rng, metric, &mut full, den, max);
    let mut out = PredTable::new(n, metric.len());
    for t in tuples(metric.len(), n) {
        if rng.gen_bool(fill) {
            out.set(&t, full.get(&t).expect("total"));
        }
    }
    out
}

/// Fills every empty slot of `s` with a random consistent table.
pub fn complete_structure<R: Rng + ?Sized>(rng: &mut R, s: &mut StructureK, den: i128, max: Rat) {
    let slots: Vec<_> = s.sig.slots();
    for (n, m) in slots {
        if s.table(n, m).is_none() {
            s.insert_table(m, PredTable::new(n, s.len()));
        }
        let metric = s.metric.clone();
        let tab = s.table_mut(n, m).expect("slot present");
        complete_table(rng, &metric, tab, den, max);
    }
}

/// Random indexed structure on `n` points. `n_a` is capped at `n`.
pub fn structure_k<R: Rng + ?Sized>(rng: &mut R, n: usize, n_a: usize, den: i128, max: Rat) -> StructureK {
    let n_a = n_a.min(n);
    let mut s = StructureK::indexed(metric(rng, n, den, max), n_a);
    complete_structure(rng, &mut s, den, max);
    s
}

/// Random structure with index sets: `n_a + 1 - n` distinct indices from
/// `1..=top` at each arity `n`. `n_a` is capped at `n`.
pub fn bar_structure<R: Rng + ?Sized>(rng: &mut R, n: usize, n_a: usize, top: usize, den: i128, max: Rat) -> StructureK {
    let n_a = n_a.min(n);
    let pool: Vec<usize> = (1..=top).collect();
    let sets: BTreeMap<usize, BTreeSet<usize>> = (1..=n_a)
        .map(|k| (k, pool.choose_multiple(rng, n_a + 1 - k).copied().collect()))
        .collect();
    let mut s = StructureK::new(metric_with_prefix(rng, n, den, max, "x"), Signature::IndexSets { n_a, sets });
    complete_structure(rng, &mut s, den, max);
    s
}

/// An instance of the amalgamation problem.
#[derive(Debug, Clone)]
pub struct Triple {
    pub a: StructureK,
    pub b: StructureK,
    pub c: StructureK,
    pub wab: EmbeddingK,
    pub wac: EmbeddingK,
}

/// `A` is a random substructure of a random `B`; `C` is a random extension
/// of `A` by new points and new predicate indices.
pub fn triple<R: Rng + ?Sized>(rng: &mut R, max_points: usize, max_arity: usize, den: i128, max: Rat) -> Triple {
    let nb = rng.gen_range(1..=max_points);
    let n_b = rng.gen_range(1..=max_arity.min(nb));
    let b = structure_k(rng, nb, n_b, den, max);
    let na = rng.gen_range(0..=nb);
    let n_a = if na == 0 { 0 } else { rng.gen_range(1..=n_b.min(na)) };
    let mut idx: Vec<usize> = (0..nb).collect();
    idx.shuffle(rng);
    idx.truncate(na);
    let a = b.substructure(&idx, n_a);

    let nc = rng.gen_range(na.max(1)..=max_points);
    let n_c = rng.gen_range(n_a.max(1)..=max_arity.min(nc).max(n_a));
    let mut cm = a.metric.clone();
    for i in na..nc {
        add_point(rng, &mut cm, &format!("c{}", i + 1), den, max);
    }
    let mut c = StructureK::indexed(cm, n_c);
    let from_a: Vec<usize> = (0..na).collect();
    for (n, m) in a.slots().collect::<Vec<_>>() {
        let src = a.table(n, m).expect("slot listed");
        let tab = c.table_mut(n, m).expect("A slots are C slots");
        for (t, v) in src.defined() {
            tab.set(&t, v);
        }
    }
    complete_structure(rng, &mut c, den, max);
    let wab = EmbeddingK {
        phi: idx,
        pi: EmbeddingK::identity(&a).pi,
    };
    let wac = EmbeddingK {
        phi: from_a,
        pi: EmbeddingK::identity(&a).pi,
    };
    Triple { a, b, c, wab, wac }
}

/// Random compact presentation `q1..qn`.
pub fn compact<R: Rng + ?Sized>(rng: &mut R, n: usize, den: i128) -> CompactPresentation {
    CompactPresentation::new(metric_with_prefix(rng, n, den, Rat::ONE, "q")).expect("valid presentation")
}

/// Random suitable function with up to `size` support points.
pub fn suitable<R: Rng + ?Sized>(rng: &mut R, k: &CompactPresentation, size: usize, den: i128, max: Rat) -> SuitableFn {
    let count = rng.gen_range(0..=size.min(k.len()));
    let idx: Vec<usize> = (1..=k.len()).collect();
    SuitableFn::new(
        idx.choose_multiple(rng, count)
            .map(|&i| (i, rat_between(rng, Rat::ZERO, max, den))),
    )
}

/// Arbitrary point data: valid or not.
pub fn raw_structure_c<R: Rng + ?Sized>(rng: &mut R, k: &CompactPresentation, n: usize, den: i128) -> StructureC {
    let m = metric_with_prefix(rng, n, den, Rat::ONE, "a");
    let p = (0..n).map(|_| suitable(rng, k, 3, den, Rat::ONE)).collect();
    StructureC::new(m, p)
}

/// Valid structure: distance profiles of a random finite closed set.
pub fn structure_c<R: Rng + ?Sized>(rng: &mut R, k: &CompactPresentation, n: usize, den: i128) -> StructureC {
    let m = metric_with_prefix(rng, n, den, Rat::ONE, "a");
    let mut closed = Vec::new();
    for a in 0..n {
        for q in 1..=k.len() {
            if rng.gen_bool(0.25) {
                closed.push((a, q));
            }
        }
    }
    StructureC::from_closed_set(m, k, &closed)
}

/// Random Polish presentation `z1..zn`; with `alias`, the last two points
/// are identified.
pub fn polish<R: Rng + ?Sized>(rng: &mut R, n: usize, den: i128, alias: bool) -> PolishPresentation {
    let mut m = metric_with_prefix(rng, n, den, Rat::int(2), "z");
    let mut aliases = BTreeSet::new();
    if alias && n >= 2 {
        // move the last point onto its predecessor
        for i in 0..n - 2 {
            m.set(n - 1, i, m.d(n - 2, i));
        }
        m.set(n - 1, n - 2, Rat::ZERO);
        aliases.insert((n - 1, n));
    }
    PolishPresentation::new(m, aliases).expect("valid presentation")
}

/// Random valid `L`-structure: dense indices first, then a metric large
/// enough for the Lipschitz condition.
pub fn structure_l<R: Rng + ?Sized>(rng: &mut R, z: &PolishPresentation, n: usize, l: Rat, den: i128) -> StructureL {
    let p: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=z.len())).collect();
    let mut m = metric_with_prefix(rng, n, den, Rat::ONE, "a");
    for i in 0..n {
        for j in 0..i {
            let need = z.d(p[i], p[j]) / l;
            m.set(i, j, m.d(i, j) + need);
        }
    }
    StructureL::new(m, p, l)
}
