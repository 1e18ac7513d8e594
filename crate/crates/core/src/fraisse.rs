//! Joint embedding and amalgamation for indexed structures.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::metric::{jep_gap_metric, path_amalgam_metric, Amalgam, FinMetric, MetricError};
use crate::rat::Rat;
use crate::relational::{
    canonical_extend, check_embedding_k, EmbeddingError, EmbeddingFailure, EmbeddingK, PredTable, Signature,
    Slot, StructureError, StructureK,
};

/// Amalgam `d` with embeddings of the two inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmalgamResult {
    pub d: StructureK,
    pub wb: EmbeddingK,
    pub wc: EmbeddingK,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FraisseError {
    #[error("only indexed signatures are supported here")]
    Signature,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("witness {which} is malformed: {err}")]
    Witness { which: &'static str, err: EmbeddingError },
    #[error("witness {which} is not an embedding: {failure}")]
    NotEmbedding {
        which: &'static str,
        failure: EmbeddingFailure,
    },
    #[error(transparent)]
    Structure(#[from] StructureError),
}

fn n_a_of(s: &StructureK) -> Result<usize, FraisseError> {
    match s.sig {
        Signature::Indexed { n_a } => Ok(n_a),
        _ => Err(FraisseError::Signature),
    }
}

/// Scale `m` for the gap `2m`: largest distance or predicate value, or 1/2
/// when everything is zero.
pub fn jep_scale(a: &StructureK, b: &StructureK) -> Rat {
    let m = [a.metric.diam(), b.metric.diam(), a.max_pred_value(), b.max_pred_value()]
        .into_iter()
        .max()
        .expect("nonempty");
    if m.is_zero() {
        Rat::new(1, 2)
    } else {
        m
    }
}

fn identity_on(s: &StructureK) -> EmbeddingK {
    EmbeddingK::identity(s)
}

/// Disjoint union at cross distance `2m`; missing values are 0.
pub fn joint_embed_k(a: &StructureK, b: &StructureK) -> Result<AmalgamResult, FraisseError> {
    let (na, nb) = (n_a_of(a)?, n_a_of(b)?);
    if a.is_empty() {
        return Ok(AmalgamResult {
            d: b.clone(),
            wb: identity_on(a),
            wc: identity_on(b),
        });
    }
    if b.is_empty() {
        return Ok(AmalgamResult {
            d: a.clone(),
            wb: identity_on(a),
            wc: identity_on(b),
        });
    }
    let m = jep_scale(a, b);
    let am = jep_gap_metric(&a.metric, &b.metric, m + m)?;
    let mut d = StructureK::indexed(am.metric.clone(), na.max(nb));
    copy_into(&mut d, a, &am.left, |s| s);
    copy_into(&mut d, b, &am.right, |s| s);
    d.fill(Rat::ZERO);
    Ok(AmalgamResult {
        d,
        wb: EmbeddingK {
            phi: am.left,
            pi: identity_on(a).pi,
        },
        wc: EmbeddingK {
            phi: am.right,
            pi: identity_on(b).pi,
        },
    })
}

fn copy_into(d: &mut StructureK, src: &StructureK, phi: &[usize], slot_map: impl Fn(Slot) -> Slot) {
    let slots: Vec<Slot> = src.slots().collect();
    for s in slots {
        let (n, m) = slot_map(s);
        let tab = src.table(s.0, s.1).expect("slot listed");
        for (t, v) in tab.defined() {
            let image: Vec<usize> = t.iter().map(|&x| phi[x]).collect();
            d.set(n, m, &image, v).expect("arity preserved");
        }
    }
}

fn check_witness(a: &StructureK, b: &StructureK, w: &EmbeddingK, which: &'static str) -> Result<(), FraisseError> {
    match check_embedding_k(a, b, w) {
        Err(err) => Err(FraisseError::Witness { which, err }),
        Ok(Some(failure)) => Err(FraisseError::NotEmbedding { which, failure }),
        Ok(None) => Ok(()),
    }
}

/// Index in the amalgam of each slot of `c`.
///
/// Slots of `c` that carry a slot of `a` follow it to its index in `b`. The
/// others, at arity `n`, are listed in ascending order and placed after the
/// `max(n_A + 1 - n, 0) + n_B - n_A` first indices.
pub fn reindex_c(n_a: usize, n_b: usize, c: &StructureK, wab: &EmbeddingK, wac: &EmbeddingK) -> BTreeMap<Slot, usize> {
    let mut from_a: BTreeMap<Slot, usize> = BTreeMap::new();
    for (&(n, ma), &mc) in &wac.pi {
        from_a.insert((n, mc), wab.pi[&(n, ma)]);
    }
    let mut out = BTreeMap::new();
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    for (n, m) in c.sig.slots() {
        if let Some(&mb) = from_a.get(&(n, m)) {
            out.insert((n, m), mb);
            continue;
        }
        let base = (n_a + 1).saturating_sub(n) + n_b - n_a;
        let j = next.entry(n).or_insert(0);
        *j += 1;
        out.insert((n, m), base + *j);
    }
    out
}

/// Adds far-away points until `metric` has `n` points. Needed when `A` uses
/// fewer indices than it has points, so the index count outgrows `B ⊔_A C`.
fn pad_points(metric: &mut FinMetric, n: usize) {
    let mut gap = Rat::ONE;
    for i in 0..metric.len() {
        for j in 0..i {
            gap = gap.max(metric.d(i, j));
        }
    }
    let mut k = 0;
    while metric.len() < n {
        k += 1;
        let id = format!("pad{k}");
        if metric.contains(&id) {
            continue;
        }
        let dists = vec![gap; metric.len()];
        metric.push_point(id, &dists).expect("fresh id");
    }
}

/// Amalgam of `b` and `c` over `a`.
pub fn amalgamate_k(
    b: &StructureK,
    c: &StructureK,
    a: &StructureK,
    wab: &EmbeddingK,
    wac: &EmbeddingK,
) -> Result<AmalgamResult, FraisseError> {
    let (na, nb, nc) = (n_a_of(a)?, n_a_of(b)?, n_a_of(c)?);
    check_witness(a, b, wab, "A->B")?;
    check_witness(a, c, wac, "A->C")?;
    if a.is_empty() {
        return joint_embed_k(b, c);
    }
    let Amalgam { mut metric, left, right } = path_amalgam_metric(&b.metric, &c.metric, &a.metric, &wab.phi, &wac.phi)?;
    let nd = nb + nc - na;
    pad_points(&mut metric, nd);
    let cmap = reindex_c(na, nb, c, wab, wac);
    let mut d = StructureK::indexed(metric.clone(), nd);
    copy_into(&mut d, b, &left, |s| s);
    copy_into(&mut d, c, &right, |(n, m)| (n, cmap[&(n, m)]));
    let slots: Vec<Slot> = d.slots().collect();
    for (n, m) in slots {
        let tab = d.table(n, m).expect("slot listed");
        let full: PredTable = canonical_extend(&metric, m, tab)?;
        d.insert_table(m, full);
    }
    let wc = EmbeddingK {
        phi: right,
        pi: cmap,
    };
    Ok(AmalgamResult {
        d,
        wb: EmbeddingK {
            phi: left,
            pi: identity_on(b).pi,
        },
        wc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::FinMetric;
    use crate::relational::{find_isomorphism, validate_k};

    fn r(n: i128) -> Rat {
        Rat::int(n)
    }

    #[test]
    fn jep_example() {
        let mut a = StructureK::indexed(FinMetric::with_points(["a"]).unwrap(), 1);
        a.set(1, 1, &[0], r(1)).unwrap();
        let mut b = StructureK::indexed(FinMetric::with_points(["b"]).unwrap(), 1);
        b.set(1, 1, &[0], r(2)).unwrap();
        let res = joint_embed_k(&a, &b).unwrap();
        assert_eq!(res.d.metric.d(0, 1), r(4));
        assert!(validate_k(&res.d).is_empty());
        assert_eq!(check_embedding_k(&a, &res.d, &res.wb), Ok(None));
        assert_eq!(check_embedding_k(&b, &res.d, &res.wc), Ok(None));

        let e = StructureK::empty();
        let res = joint_embed_k(&e, &b).unwrap();
        assert_eq!(res.d, b);
    }

    #[test]
    fn jep_fills_missing_with_zero() {
        let mut a = StructureK::indexed(FinMetric::from_pairs(&["x", "y"], &[("x", "y", r(1))]).unwrap(), 2);
        a.fill(r(0));
        let mut b = StructureK::indexed(FinMetric::with_points(["z"]).unwrap(), 1);
        b.fill(r(0));
        let res = joint_embed_k(&a, &b).unwrap();
        assert_eq!(res.d.n_a(), 2);
        assert_eq!(res.d.metric.d(0, 2), r(2));
        assert!(validate_k(&res.d).is_empty());
    }

    fn chain(points: &[(&str, i128)], n_a: usize) -> StructureK {
        // points placed on a line, predicates zero
        let ids: Vec<&str> = points.iter().map(|p| p.0).collect();
        let mut m = FinMetric::with_points(ids.iter().copied()).unwrap();
        for i in 0..points.len() {
            for j in 0..i {
                m.set(i, j, r((points[i].1 - points[j].1).abs()));
            }
        }
        let mut s = StructureK::indexed(m, n_a);
        s.fill(r(0));
        s
    }

    #[test]
    fn reindexing_shifts_c_only_slots() {
        let a = chain(&[("a", 0)], 1);
        let b = chain(&[("a", 0), ("b", 1)], 2);
        let c = chain(&[("a", 0), ("c", 2)], 2);
        let wab = EmbeddingK::identity(&a);
        let wac = EmbeddingK::identity(&a);
        let res = amalgamate_k(&b, &c, &a, &wab, &wac).unwrap();
        assert_eq!(res.d.n_a(), 3);
        assert_eq!(res.wc.pi[&(1, 2)], 3);
        assert_eq!(res.wc.pi[&(1, 1)], 1);
        assert!(validate_k(&res.d).is_empty());
        assert_eq!(check_embedding_k(&c, &res.d, &res.wc), Ok(None));
        assert_eq!(res.wb.compose(&wab), res.wc.compose(&wac));
    }

    #[test]
    fn amalgam_of_equal_structures_is_isomorphic() {
        let a = chain(&[("x", 0), ("y", 2)], 2);
        let w = EmbeddingK::identity(&a);
        let res = amalgamate_k(&a, &a, &a, &w, &w).unwrap();
        assert!(find_isomorphism(&a, &res.d).is_some());
    }

    #[test]
    fn bad_witness_is_reported() {
        let a = chain(&[("x", 0), ("y", 2)], 1);
        let b = chain(&[("x", 0), ("y", 3)], 1);
        let w = EmbeddingK::identity(&a);
        assert!(matches!(
            amalgamate_k(&b, &a, &a, &w, &w),
            Err(FraisseError::NotEmbedding { which: "A->B", .. })
        ));
    }
}
