//! Property tests over seeded random instances.

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use urysohn::cauchy::{embed_structure, sandwich_checks, solve_sandwich, BandRule, SandwichProblem};
use urysohn::certificate::{verify, Certificate, Check};
use urysohn::format::{parse_structure_file, serialize, OracleLog, StructureFile};
use urysohn::fraisse::{amalgamate_k, joint_embed_k};
use urysohn::lipschitz::{amalgamate_l, eval_limit_function, jep_l, validate_l};
use urysohn::metric::{one_point_feasible, path_amalgam_metric, path_distances, validate_metric, OnePointSpec};
use urysohn::oracle::{GrowthRequest, LimitOracle};
use urysohn::product::{amalgamate_c, build_suitable_traced, brute_force_c, jep_c, validate_c};
use urysohn::random;
use urysohn::relational::{
    canonical_extend, check_embedding_k, find_isomorphism, lipschitz_all_pairs, tuples, validate_k, EmbeddingK,
};
use urysohn::Rat;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn two() -> Rat {
    Rat::int(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rat_text_round_trip(n in 0i128..10_000, d in 1i128..10_000) {
        let r = Rat::new(n, d);
        let text = r.to_string();
        prop_assert_eq!(text.parse::<Rat>().unwrap(), r);
        prop_assert_eq!(Rat::parse_signed(&format!("-{text}")).unwrap(), -r);
    }

    #[test]
    fn path_amalgam_is_a_metric_extending_both_sides(seed: u64) {
        let mut r = rng(seed);
        let t = random::triple(&mut r, 4, 1, 8, two());
        // an empty overlap is the joint embedding's job
        prop_assume!(!t.a.is_empty());
        let am = path_amalgam_metric(&t.b.metric, &t.c.metric, &t.a.metric, &t.wab.phi, &t.wac.phi).unwrap();
        prop_assert!(validate_metric(&am.metric).unwrap().is_empty());
        for i in 0..t.b.len() {
            for j in 0..t.b.len() {
                prop_assert_eq!(am.metric.d(am.left[i], am.left[j]), t.b.metric.d(i, j));
            }
        }
        for i in 0..t.c.len() {
            for j in 0..t.c.len() {
                prop_assert_eq!(am.metric.d(am.right[i], am.right[j]), t.c.metric.d(i, j));
            }
        }
    }

    #[test]
    fn feasibility_matches_brute_force(seed: u64) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=4);
        let m = random::metric(&mut r, n, 4, two());
        let size = r.gen_range(1..=n);
        let spec = OnePointSpec::new((0..size).map(|i| (i, random::rat_between(&mut r, Rat::new(1, 4), two(), 4))));
        let fast = one_point_feasible(&m, &spec).unwrap().is_feasible();
        let mut ext = m.clone();
        let mut row = vec![Rat::ZERO; n];
        for (&i, &e) in spec.base.iter().zip(&spec.eta) {
            row[i] = e;
        }
        if size < n {
            // points outside the base are checked against the path distances
            let p = path_distances(&m, &spec);
            row[size..n].copy_from_slice(&p[size..n]);
        }
        ext.push_point("new", &row).unwrap();
        prop_assert_eq!(fast, validate_metric(&ext).unwrap().is_empty());
    }

    #[test]
    fn canonical_extension_is_least_consistent_and_idempotent(seed: u64) {
        let mut r = rng(seed);
        let pts = r.gen_range(1..=4);
        let n = r.gen_range(1..=2);
        let metric = random::metric(&mut r, pts, 8, two());
        let fill = r.gen_range(0.0..0.8);
        let tab = random::partial_table(&mut r, &metric, n, 8, two(), fill);
        let full = canonical_extend(&metric, 1, &tab).unwrap();
        prop_assert!(full.is_total());
        prop_assert!(lipschitz_all_pairs(&metric, 1, &full).is_none());
        prop_assert_eq!(&canonical_extend(&metric, 1, &full).unwrap(), &full);
        for t in tuples(pts, n) {
            let least = tab
                .defined()
                .map(|(s, v)| v - metric.tuple_distance(&s, &t))
                .fold(Rat::ZERO, Rat::max);
            prop_assert_eq!(full.get(&t).unwrap(), least);
        }
    }

    #[test]
    fn identity_embeds_and_isomorphism_is_symmetric(seed: u64) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=3);
        let a = random::structure_k(&mut r, n, 2, 4, Rat::ONE);
        prop_assert_eq!(check_embedding_k(&a, &a, &EmbeddingK::identity(&a)), Ok(None));
        let b = random::structure_k(&mut r, n, 2, 4, Rat::ONE);
        prop_assert_eq!(find_isomorphism(&a, &b).is_some(), find_isomorphism(&b, &a).is_some());
        prop_assert!(find_isomorphism(&a, &a).is_some());
    }

    #[test]
    fn amalgam_commutes_and_validates(seed: u64) {
        let mut r = rng(seed);
        let t = random::triple(&mut r, 4, 2, 8, two());
        let res = amalgamate_k(&t.b, &t.c, &t.a, &t.wab, &t.wac).unwrap();
        prop_assert!(validate_k(&res.d).is_empty());
        prop_assert_eq!(check_embedding_k(&t.b, &res.d, &res.wb), Ok(None));
        prop_assert_eq!(check_embedding_k(&t.c, &res.d, &res.wc), Ok(None));
        prop_assert_eq!(res.wb.compose(&t.wab), res.wc.compose(&t.wac));
    }

    #[test]
    fn joint_embedding_validates(seed: u64) {
        let mut r = rng(seed);
        let (na, nb) = (r.gen_range(0..=3), r.gen_range(0..=3));
        let a = random::structure_k(&mut r, na, 2, 8, two());
        let b = random::structure_k(&mut r, nb, 2, 8, two());
        let res = joint_embed_k(&a, &b).unwrap();
        prop_assert!(validate_k(&res.d).is_empty());
        prop_assert_eq!(check_embedding_k(&a, &res.d, &res.wb), Ok(None));
        prop_assert_eq!(check_embedding_k(&b, &res.d, &res.wc), Ok(None));
    }

    #[test]
    fn compact_amalgam_validates(seed: u64) {
        let mut r = rng(seed);
        let size = r.gen_range(1..=5);
        let k = random::compact(&mut r, size, 8);
        let nb = r.gen_range(1..=3);
        let b = random::structure_c(&mut r, &k, nb, 8);
        let keep = r.gen_range(1..=nb);
        let idx: Vec<usize> = (0..keep).collect();
        let a = b.restrict(&idx);
        let nx = r.gen_range(1..=2);
        let x = random::structure_c(&mut r, &k, nx, 8);
        let (c, left, _) = jep_c(&a, &x, &k).unwrap();
        let (d, wb, wc) = amalgamate_c(&b, &c, &a, &idx, &left, &k).unwrap();
        prop_assert!(validate_c(&d, &k).is_empty());
        prop_assert!(brute_force_c(&d, &k));
        for i in 0..keep {
            prop_assert_eq!(wb[idx[i]], wc[left[i]]);
        }
    }

    #[test]
    fn lipschitz_amalgam_validates(seed: u64) {
        let mut r = rng(seed);
        let size = r.gen_range(2..=4);
        let alias = r.gen_bool(0.5);
        let z = random::polish(&mut r, size, 8, alias);
        let l = [Rat::new(1, 2), Rat::ONE, Rat::int(2)][r.gen_range(0..3)];
        let nb = r.gen_range(1..=3);
        let b = random::structure_l(&mut r, &z, nb, l, 8);
        let keep = r.gen_range(1..=nb);
        let idx: Vec<usize> = (0..keep).collect();
        let a = b.restrict(&idx);
        let nx = r.gen_range(1..=2);
        let x = random::structure_l(&mut r, &z, nx, l, 8);
        let (c, left, _) = jep_l(&a, &x, &z).unwrap();
        prop_assert!(validate_l(&c, &z).unwrap().is_empty());
        let (d, wb, wc) = amalgamate_l(&b, &c, &a, &idx, &left, &z).unwrap();
        prop_assert!(validate_l(&d, &z).unwrap().is_empty());
        for i in 0..keep {
            prop_assert_eq!(wb[idx[i]], wc[left[i]]);
        }
    }

    #[test]
    fn suitable_functions_are_one_lipschitz(seed: u64) {
        let mut r = rng(seed);
        let size = r.gen_range(1..=6);
        let k = random::compact(&mut r, size, 8);
        let f = random::suitable(&mut r, &k, 4, 8, Rat::ONE);
        for i in 1..=k.len() {
            for j in 1..=k.len() {
                prop_assert!(f.eval(&k, i) <= f.eval(&k, j) + k.d(i, j));
            }
        }
    }

    #[test]
    fn built_suitable_values_are_witnessed(seed: u64) {
        let mut r = rng(seed);
        let size = r.gen_range(1..=6);
        let k = random::compact(&mut r, size, 8);
        let mut gamma: BTreeMap<usize, Rat> = BTreeMap::new();
        for i in 1..=k.len() {
            if r.gen_bool(0.6) {
                gamma.insert(i, random::rat_between(&mut r, Rat::ZERO, Rat::ONE, 8));
            }
        }
        let (f, trace) = build_suitable_traced(&gamma, &k);
        for step in &trace {
            prop_assert!(step.value >= step.gamma);
            prop_assert_eq!(step.gamma, gamma[&step.index]);
            if step.value > step.gamma {
                let (eta, w) = step.eta.unwrap();
                prop_assert_eq!(step.value, eta);
                prop_assert_eq!(eta, gamma[&w] - k.d(w, step.index));
            }
            prop_assert!(f.eval(&k, step.index) >= step.gamma);
        }
    }

    #[test]
    fn certificates_round_trip_and_reject_edits(seed: u64, pos in any::<prop::sample::Index>()) {
        let mut r = rng(seed);
        let mut cert = Certificate::new();
        for i in 0..r.gen_range(1..=5) {
            let a = random::rat_between(&mut r, Rat::ZERO, Rat::ONE, 16);
            cert.push(Check::le(format!("c{i}"), a, a + Rat::new(1, 16)));
        }
        let text = cert.emit();
        prop_assert_eq!(verify(&text), Ok(cert.checks.len()));
        let mut bytes = text.into_bytes();
        let at = pos.index(bytes.len());
        bytes[at] = if bytes[at] == b'1' { b'2' } else { b'1' };
        if let Ok(s) = String::from_utf8(bytes) {
            prop_assert!(verify(&s).is_err());
        }
    }

    #[test]
    fn structure_files_round_trip(seed: u64) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=3);
        let s = random::structure_k(&mut r, n, 2, 8, two());
        let size = r.gen_range(1..=4);
        let k = random::compact(&mut r, size, 8);
        let c = random::structure_c(&mut r, &k, n, 8);
        let z = random::polish(&mut r, size, 8, true);
        let l = random::structure_l(&mut r, &z, n, Rat::ONE, 8);
        for file in [
            StructureFile::K(s),
            StructureFile::C(c),
            StructureFile::L(l),
            StructureFile::Compact(k),
            StructureFile::Polish(z),
        ] {
            let text = serialize(&file);
            let back = parse_structure_file(&text).unwrap();
            prop_assert_eq!(&back, &file);
            prop_assert_eq!(serialize(&back), text);
        }
    }

    #[test]
    fn sandwich_solutions_hold_exactly(seed: u64) {
        let mut r = rng(seed);
        let k = r.gen_range(2..=4);
        let l = r.gen_range(1..=6);
        let mut m = random::metric(&mut r, k - 1, 8, two());
        let targets = random::katetov(&mut r, &m, 8, two());
        let anchor_d = (0..k - 1).map(|i| (0..k - 1).map(|j| m.d(i, j)).collect()).collect();
        m.push_point("target", &targets).unwrap();
        let p = SandwichProblem { targets, anchor_d, prev_d: None, l };
        for rule in [BandRule::Staggered, BandRule::Uniform] {
            if let Ok(s) = solve_sandwich(&p, rule) {
                prop_assert!(sandwich_checks(&p, &s, "s").iter().all(|c| c.holds()));
            } else {
                prop_assert_eq!(rule, BandRule::Staggered);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_growth_never_changes_the_past(seed: u64) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=3);
        let x = random::bar_structure(&mut r, n, 2, 3, 8, two());
        let mut o = LimitOracle::new(seed);
        embed_structure(&x, &mut o, 3).unwrap();
        for _ in 0..3 {
            let base = r.gen_range(0..o.len());
            let eta = random::rat_between(&mut r, Rat::new(1, 8), Rat::ONE, 8);
            o.realize(GrowthRequest::new(vec![base], vec![eta])).unwrap();
        }
        let log = o.log().to_vec();
        prop_assert!(validate_k(&o.snapshot()).is_empty());
        let cut = r.gen_range(1..log.len());
        let past = LimitOracle::replay(&LimitOracle::new(seed), &log[..cut]).unwrap();
        for i in 0..past.len() {
            for j in 0..past.len() {
                prop_assert_eq!(past.d(i, j), o.d(i, j));
            }
        }
        for info in past.registry() {
            for t in tuples(past.len(), info.n) {
                prop_assert_eq!(past.value(info.n, info.g, &t), o.value(info.n, info.g, &t));
            }
        }
        let text = serialize(&StructureFile::Oracle(OracleLog::of(&o)));
        let StructureFile::Oracle(back) = parse_structure_file(&text).unwrap() else { panic!("kind") };
        prop_assert_eq!(back.replay().unwrap().snapshot(), o.snapshot());
    }

    #[test]
    fn cauchy_tails_and_limit_bounds(seed: u64) {
        let mut r = rng(seed);
        let size = r.gen_range(2..=4);
        let z = random::polish(&mut r, size, 8, false);
        let l = Rat::ONE;
        let n = r.gen_range(1..=2);
        let x = random::structure_l(&mut r, &z, n, l, 8);
        let mut o = LimitOracle::new(seed).with_polish(z, l).unwrap();
        let depth = 5;
        let (points, cert) = urysohn::lipschitz::embed_structure_l(&x, &mut o, depth).unwrap();
        prop_assert!(cert.all_hold());
        for p in &points {
            for j in 1..p.depth() {
                for j2 in (j + 1)..=p.depth() {
                    let d = o.d(p.at(j), p.at(j2));
                    prop_assert!(d <= p.gaps()[j - 1..j2 - 1].iter().copied().sum::<Rat>());
                    prop_assert!(d < Rat::pow2_neg(j as u32));
                }
            }
            let mut last = None;
            for depth in 1..=depth {
                let v = eval_limit_function(&o, p, depth).unwrap();
                if let Some(b) = last {
                    prop_assert!(v.bound <= b);
                }
                last = Some(v.bound);
            }
        }
    }
}
