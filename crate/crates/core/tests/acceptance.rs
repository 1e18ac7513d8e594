//! Acceptance run. One line per criterion; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use urysohn::cauchy::{
    back_forth_floor, depth_schedule, embed_structure, embed_structure_with_floor, embedding_checks, extend_one_point,
    extend_partial_iso, restriction, sandwich_checks, side_checks, solve_sandwich, step_bound, BandRule, SandwichProblem,
    Side,
};
use urysohn::certificate::{verify, Check};
use urysohn::fraisse::{amalgamate_k, joint_embed_k};
use urysohn::lipschitz::{extend_one_point_l, jep_l, modulus, pair_check, validate_l, PolishPresentation};
use urysohn::metric::{one_point_feasible, validate_metric, FinMetric, OnePointSpec};
use urysohn::oracle::LimitOracle;
use urysohn::product::{
    brute_force_c, embed_structure_c, extend_one_point_c, jep_c, realize_zero_witness, validate_c, StructureC,
    SuitableFn,
};
use urysohn::random;
use urysohn::relational::{canonical_extend, check_embedding_k, lipschitz_all_pairs, tuples, validate_k};
use urysohn::Rat;

/// Result of one criterion: failing cases, total cases, remarks.
struct Tally {
    failed: usize,
    total: usize,
    notes: Vec<String>,
}

impl Tally {
    fn new() -> Tally {
        Tally {
            failed: 0,
            total: 0,
            notes: Vec::new(),
        }
    }

    fn case(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.total += 1;
        if !ok {
            self.failed += 1;
            if self.notes.len() < 3 {
                self.notes.push(what());
            }
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.insert(0, s.into());
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn all_hold(checks: &[Check]) -> Result<(), String> {
    match checks.iter().find(|c| !c.holds()) {
        None => Ok(()),
        Some(c) => Err(c.to_string()),
    }
}

fn amalgamation() -> Tally {
    let mut t = Tally::new();
    let mut r = rng(1);
    for case in 0..500 {
        let tr = random::triple(&mut r, 4, 2, 8, Rat::int(2));
        let res = match amalgamate_k(&tr.b, &tr.c, &tr.a, &tr.wab, &tr.wac) {
            Ok(res) => res,
            Err(e) => {
                t.case(false, || format!("case {case}: {e}"));
                continue;
            }
        };
        let v = validate_k(&res.d);
        let eb = check_embedding_k(&tr.b, &res.d, &res.wb);
        let ec = check_embedding_k(&tr.c, &res.d, &res.wc);
        let square = res.wb.compose(&tr.wab) == res.wc.compose(&tr.wac);
        t.case(v.is_empty() && eb == Ok(None) && ec == Ok(None) && square, || {
            format!("case {case}: {v:?} {eb:?} {ec:?} commutes={square}")
        });
    }
    t
}

fn canonical_extension() -> Tally {
    let mut t = Tally::new();
    let mut r = rng(2);
    for case in 0..500 {
        let pts = r.gen_range(1..=4);
        let n = r.gen_range(1..=2);
        let metric = random::metric(&mut r, pts, 8, Rat::int(2));
        let fill = r.gen_range(0.0..0.7);
        let tab = random::partial_table(&mut r, &metric, n, 8, Rat::int(2), fill);
        let full = match canonical_extend(&metric, 1, &tab) {
            Ok(f) => f,
            Err(e) => {
                t.case(false, || format!("case {case}: {e}"));
                continue;
            }
        };
        let mut ok = full.is_total() && lipschitz_all_pairs(&metric, 1, &full).is_none();
        ok &= canonical_extend(&metric, 1, &full).as_ref() == Ok(&full);
        for x in tuples(pts, n) {
            let want = match tab.get(&x) {
                Some(v) => v,
                None => tab
                    .defined()
                    .map(|(y, v)| v.sat_sub(metric.tuple_distance(&x, &y)))
                    .max()
                    .unwrap_or(Rat::ZERO)
                    .max(Rat::ZERO),
            };
            ok &= full.get(&x) == Some(want);
        }
        t.case(ok, || format!("case {case}: {tab:?} -> {full:?}"));
    }
    t
}

fn jep_all() -> Tally {
    let mut t = Tally::new();
    let mut r = rng(3);
    let two = Rat::int(2);
    for case in 0..200 {
        let (na, nb) = (r.gen_range(0..=3), r.gen_range(0..=3));
        let arity = r.gen_range(1..=2);
        let a = random::structure_k(&mut r, na, arity, 8, two);
        let arity = r.gen_range(1..=2);
        let b = random::structure_k(&mut r, nb, arity, 8, two);
        let ok = match joint_embed_k(&a, &b) {
            Ok(res) => {
                validate_k(&res.d).is_empty()
                    && check_embedding_k(&a, &res.d, &res.wb) == Ok(None)
                    && check_embedding_k(&b, &res.d, &res.wc) == Ok(None)
            }
            Err(_) => false,
        };
        t.case(ok, || format!("K case {case}"));
    }
    for case in 0..200 {
        let size = r.gen_range(1..=6);
        let k = random::compact(&mut r, size, 8);
        let points = r.gen_range(1..=3);
        let a = random::structure_c(&mut r, &k, points, 8);
        let points = r.gen_range(1..=3);
        let b = random::structure_c(&mut r, &k, points, 8);
        let ok = match jep_c(&a, &b, &k) {
            Ok((d, left, right)) => validate_c(&d, &k).is_empty() && copies(&a, &d, &left) && copies(&b, &d, &right),
            Err(_) => false,
        };
        t.case(ok, || format!("C case {case}"));
    }
    for case in 0..200 {
        let size = r.gen_range(1..=5);
        let alias = r.gen_bool(0.5);
        let z = random::polish(&mut r, size, 8, alias);
        let l = *[Rat::new(1, 2), Rat::ONE, Rat::int(2)].choose(&mut r).unwrap();
        let points = r.gen_range(1..=3);
        let a = random::structure_l(&mut r, &z, points, l, 8);
        let points = r.gen_range(1..=3);
        let b = random::structure_l(&mut r, &z, points, l, 8);
        let ok = match jep_l(&a, &b, &z) {
            Ok((d, left, right)) => {
                validate_l(&d, &z).map(|v| v.is_empty()).unwrap_or(false)
                    && left.iter().enumerate().all(|(i, &x)| d.p[x] == a.p[i])
                    && right.iter().enumerate().all(|(i, &x)| d.p[x] == b.p[i])
            }
            Err(_) => false,
        };
        t.case(ok, || format!("L case {case}"));
    }
    t
}

/// `phi` is an isometric copy of `a` inside `d` carrying the same functions.
fn copies(a: &StructureC, d: &StructureC, phi: &[usize]) -> bool {
    (0..a.len()).all(|i| d.p[phi[i]] == a.p[i] && (0..i).all(|j| d.metric.d(phi[i], phi[j]) == a.metric.d(i, j)))
}

/// Random ideal space on `k` points (last one new) and a level `l`; the
/// anchors sit exactly on the ideal points. Steps `1..=l` are solved in turn,
/// each using the previous solution as the previous approximant.
fn sandwich_instance(r: &mut ChaCha8Rng, rule: BandRule) -> (usize, u32, Result<usize, String>) {
    let k = r.gen_range(1..=4);
    let l = r.gen_range(1..=6);
    let m = random::metric(r, k, 8, Rat::int(2));
    let last = k - 1;
    let targets: Vec<Rat> = (0..last).map(|i| m.d(i, last)).collect();
    let anchor_d: Vec<Vec<Rat>> = (0..last).map(|i| (0..last).map(|j| m.d(i, j)).collect()).collect();
    let mut prev: Option<Vec<Rat>> = None;
    let mut checks = 0;
    for step in 1..=l {
        let p = SandwichProblem {
            targets: targets.clone(),
            anchor_d: anchor_d.clone(),
            prev_d: prev.clone(),
            l: step,
        };
        let s = match solve_sandwich(&p, rule) {
            Ok(s) => s,
            Err(e) => return (k, l, Err(format!("k={k} l={step} targets={targets:?} anchors={anchor_d:?}: {e}"))),
        };
        let cs = sandwich_checks(&p, &s, "s");
        if let Err(c) = all_hold(&cs) {
            return (k, l, Err(c));
        }
        if step > 1 && s.link != Some(Rat::pow2_neg(step)) {
            return (k, l, Err(format!("link {:?}", s.link)));
        }
        checks += cs.len();
        prev = Some(s.eta);
    }
    (k, l, Ok(checks))
}

fn sandwich() -> Tally {
    let mut t = Tally::new();
    let mut r = rng(4);
    let mut checks = 0;
    for case in 0..200 {
        let (_, _, res) = sandwich_instance(&mut r, BandRule::Staggered);
        if let Ok(n) = &res {
            checks += n;
        }
        t.case(res.is_ok(), || format!("case {case}: {}", res.unwrap_err()));
    }
    let mut r = rng(4);
    let uniform = (0..200)
        .filter(|_| sandwich_instance(&mut r, BandRule::Uniform).2.is_err())
        .count();
    t.note(format!("{checks} exact checks; uniform band on the same instances: {uniform} failures"));
    t
}

fn convergence() -> Tally {
    let mut t = Tally::new();
    let mut r = rng(5);
    let depth = 8;
    let mut max_ratio = Rat::ZERO;
    let (mut devs, mut moved) = (0, 0);
    for case in 0..50 {
        let na = r.gen_range(0..=3);
        let arity = r.gen_range(1..=2);
        let x = random::structure_k(&mut r, na + 1, arity, 8, Rat::int(2));
        let k = na + 1;
        let mut o = LimitOracle::new(case);
        let a_idx: Vec<usize> = (0..na).collect();
        let all: Vec<usize> = (0..k).collect();
        let base = match embed_structure_with_floor(&restriction(&x, &a_idx), &mut o, depth, k as u32 + depth + 2) {
            Ok(b) => b,
            Err(e) => {
                t.case(false, || format!("case {case}: base {e}"));
                continue;
            }
        };
        let target = restriction(&x, &all);
        let known = target
            .sig
            .slots()
            .into_iter()
            .filter_map(|s| base.slot_map.get(&s).map(|&g| (s, g)))
            .collect();
        let run = match extend_one_point(&mut o, &base.points, &target, &known, depth) {
            Ok(run) => run,
            Err(e) => {
                t.case(false, || format!("case {case}: {e}"));
                continue;
            }
        };
        let mut bad = Vec::new();
        for (j, gap) in run.point.gaps().iter().enumerate() {
            let j = j as u32 + 1;
            if *gap != Rat::pow2_neg(j + 1) {
                bad.push(format!("gap {j} = {gap}"));
            }
        }
        if let Err(c) = all_hold(&run.point.checks(&o, "u")) {
            bad.push(c);
        }
        for dev in &run.deviations {
            if dev.bound != step_bound(dev.slot.0, dev.l) || dev.error() > dev.bound {
                bad.push(dev.check().to_string());
            }
            max_ratio = max_ratio.max(dev.error() / dev.bound);
            devs += 1;
            moved += usize::from(dev.error() > Rat::ZERO);
        }
        if let Err(c) = all_hold(&run.certificate.checks) {
            bad.push(c);
        }
        t.case(bad.is_empty(), || format!("case {case}: {}", bad.join("; ")));
    }
    t.note(format!("{devs} deviations, {moved} nonzero, largest deviation / bound = {max_ratio}"));
    t
}

fn universality() -> Tally {
    let mut t = Tally::new();
    let mut r = rng(6);
    let depth = 6;
    for case in 0..30 {
        let n = r.gen_range(1..=3);
        let x = random::bar_structure(&mut r, n, 2, 6, 8, Rat::int(2));
        let mut o = LimitOracle::new(case);
        let res = embed_structure(&x, &mut o, depth).map_err(|e| e.to_string()).and_then(|run| {
            let checks = embedding_checks(&o, &x, &run.points, &run.slot_map, depth, "embed");
            let tight = checks
                .iter()
                .filter(|c| c.name.contains(".dist."))
                .all(|c| c.rhs == Rat::pow2_neg(depth - 1));
            all_hold(&checks)?;
            all_hold(&run.certificate.checks)?;
            if tight {
                Ok(())
            } else {
                Err("distance tolerance is not 2^-(depth-1)".into())
            }
        });
        t.case(res.is_ok(), || format!("case {case}: {}", res.unwrap_err()));
    }
    t
}

fn back_and_forth() -> Tally {
    let mut t = Tally::new();
    let mut r = rng(7);
    let depth = 6;
    let tol = Rat::pow2_neg(depth - 1);
    for case in 0..30 {
        let y = random::bar_structure(&mut r, 6, 2, 6, 8, Rat::int(2));
        let (matched, w1, w2) = (vec![0, 1], vec![2, 3], vec![4, 5]);
        let floor = back_forth_floor([4, 4], 2, 2, depth);
        let mut o = LimitOracle::new(case);
        let res = (|| -> Result<(), String> {
            let mut side = |own: &[usize]| -> Result<Side, String> {
                let labels: Vec<usize> = matched.iter().chain(own).copied().collect();
                let run = embed_structure_with_floor(&restriction(&y, &labels), &mut o, depth, floor)
                    .map_err(|e| e.to_string())?;
                Ok(Side {
                    points: run.points,
                    labels,
                    slot_map: run.slot_map,
                })
            };
            let s1 = side(&w1)?;
            let s2 = side(&w2)?;
            let bf = extend_partial_iso(&y, s1, s2, &matched, &w1, &w2, &mut o, depth, tol).map_err(|e| e.to_string())?;
            all_hold(&bf.certificate.checks)?;
            let every: Vec<usize> = (0..6).collect();
            for (side, name) in [(&bf.side1, "s1"), (&bf.side2, "s2")] {
                all_hold(&side_checks(&o, &y, side, &every, depth, tol, name))?;
            }
            if bf.matched.len() != 6 {
                return Err(format!("matched {:?}", bf.matched));
            }
            Ok(())
        })();
        t.case(res.is_ok(), || format!("case {case}: {}", res.unwrap_err()));
    }
    t
}

fn zero_witness() -> Tally {
    let mut t = Tally::new();
    let mut r = rng(8);
    let mut grown = 0;
    for case in 0..50 {
        let size = r.gen_range(1..=6);
        let k = random::compact(&mut r, size, 8);
        let points = r.gen_range(1..=3);
        let x = random::structure_c(&mut r, &k, points, 8);
        let mut o = LimitOracle::new(case).with_compact(k.clone());
        let res = (|| -> Result<bool, String> {
            embed_structure_c(&x, &mut o, 3).map_err(|e| e.to_string())?;
            // prefer a point and index with a positive value
            let mut pairs: Vec<(usize, usize)> = (0..o.len()).flat_map(|u| (1..=k.len()).map(move |n| (u, n))).collect();
            pairs.shuffle(&mut r);
            let positive = pairs
                .iter()
                .copied()
                .find(|&(u, n)| o.suitable(u).unwrap().eval(&k, n).is_positive());
            let (u, n) = positive.unwrap_or(pairs[0]);
            let eps = Rat::pow2_neg(r.gen_range(1..=6));
            let w = realize_zero_witness(&mut o, u, n, eps).map_err(|e| e.to_string())?;
            all_hold(&w.checks(&o, u, n, eps))?;
            let snap = o.snapshot();
            if !validate_k(&snap).is_empty() {
                return Err("snapshot invalid".into());
            }
            let back = StructureC::new(o.metric().clone(), (0..o.len()).map(|i| o.suitable(i).unwrap().clone()).collect());
            if !validate_c(&back, &k).is_empty() {
                return Err("suitable layer invalid after growth".into());
            }
            Ok(w.grown)
        })();
        if let Ok(true) = res {
            grown += 1;
        }
        t.case(res.is_ok(), || format!("case {case}: {}", res.unwrap_err()));
    }
    t.note(format!("{grown} cases needed a new point"));
    t
}

fn reduction() -> Tally {
    let mut t = Tally::new();
    let mut r = rng(9);
    let mut valid = 0;
    for case in 0..200 {
        let size = r.gen_range(1..=6);
        let k = random::compact(&mut r, size, 8);
        let n = r.gen_range(1..=3);
        let mut s = if case % 2 == 0 {
            random::raw_structure_c(&mut r, &k, n, 8)
        } else {
            random::structure_c(&mut r, &k, n, 8)
        };
        if case % 4 == 1 {
            // small perturbation of a valid structure
            let a = r.gen_range(0..n);
            let i = r.gen_range(1..=k.len());
            let mut entries: BTreeMap<usize, Rat> = s.p[a].support().clone();
            *entries.entry(i).or_insert(Rat::ZERO) += Rat::new(r.gen_range(1..=4), 8);
            s.p[a] = SuitableFn::new(entries);
        }
        let reduced = validate_c(&s, &k).is_empty();
        let brute = brute_force_c(&s, &k);
        valid += usize::from(brute);
        t.case(reduced == brute, || format!("case {case}: reduced {reduced}, brute force {brute}"));
    }
    t.note(format!("{valid} valid / {} invalid", 200 - valid));
    t
}

fn step_bound_c() -> Tally {
    let mut t = Tally::new();
    let mut r = rng(10);
    let depth = 6;
    let mut devs = 0;
    for case in 0..20 {
        let size = r.gen_range(2..=6);
        let k = random::compact(&mut r, size, 8);
        let points = r.gen_range(1..=3);
        let b = random::structure_c(&mut r, &k, points, 8);
        let mut o = LimitOracle::new(case).with_compact(k.clone());
        let res = (|| -> Result<(), String> {
            let depths = depth_schedule(b.len(), depth, depth);
            let mut points = Vec::new();
            for (i, &d) in depths.iter().enumerate() {
                let idx: Vec<usize> = (0..=i).collect();
                let run = extend_one_point_c(&mut o, &points, &b.restrict(&idx), d).map_err(|e| e.to_string())?;
                let steps = run.deviations.iter().map(|v| v.l).max().unwrap_or(0);
                if steps != d || run.deviations.len() != d as usize * k.len() {
                    return Err(format!("{} deviations over {steps} steps", run.deviations.len()));
                }
                for v in &run.deviations {
                    if v.bound != Rat::pow2_neg(v.l) || v.value.abs_diff(v.target) > v.bound {
                        return Err(v.check().to_string());
                    }
                }
                devs += run.deviations.len();
                all_hold(&run.certificate.checks)?;
                points.push(run.point);
            }
            Ok(())
        })();
        t.case(res.is_ok(), || format!("case {case}: {}", res.unwrap_err()));
    }
    t.note(format!("{devs} step/index deviations checked"));
    t
}

/// Dense indices converging to `limit` with the required modulus.
fn random_sequence(r: &mut ChaCha8Rng, z: &PolishPresentation, limit: usize, l: Rat, k: usize, len: u32) -> Vec<usize> {
    (1..=len as usize)
        .map(|j| {
            let m = modulus(l, k, j) / Rat::int(2);
            let near: Vec<usize> = (1..=z.len()).filter(|&q| z.d(q, limit) <= m).collect();
            *near.choose(r).expect("limit itself qualifies")
        })
        .collect()
}

fn lipschitz_limit() -> Tally {
    let mut t = Tally::new();
    let mut r = rng(11);
    let depth = 6;
    let mut moved = 0;
    for case in 0..30 {
        let size = r.gen_range(2..=5);
        let alias = r.gen_bool(0.7);
        let z = random::polish(&mut r, size, 8, alias);
        let l = *[Rat::new(1, 2), Rat::ONE, Rat::int(2)].choose(&mut r).unwrap();
        let points = r.gen_range(1..=3);
        let b = random::structure_l(&mut r, &z, points, l, 8);
        let mut o = match LimitOracle::new(case).with_polish(z.clone(), l) {
            Ok(o) => o,
            Err(e) => {
                t.case(false, || format!("case {case}: {e}"));
                continue;
            }
        };
        let res = (|| -> Result<(), String> {
            let depths = depth_schedule(b.len(), depth, depth);
            let mut points = Vec::new();
            for (i, &d) in depths.iter().enumerate() {
                let idx: Vec<usize> = (0..=i).collect();
                let kk = i + 1;
                let seq = random_sequence(&mut r, &z, b.p[i], l, kk, d);
                if seq.iter().any(|&q| q != b.p[i]) {
                    moved += 1;
                }
                let run = extend_one_point_l(&mut o, &points, &b.restrict(&idx), Some(&seq), d).map_err(|e| e.to_string())?;
                let p = &run.point;
                for j in 1..=p.depth() {
                    for i2 in (j + 1)..=p.depth() {
                        let dz = z.d(o.dense(p.at(j)).unwrap(), o.dense(p.at(i2)).unwrap());
                        if dz > modulus(l, kk, j) {
                            return Err(format!("modulus at {j},{i2}: {dz}"));
                        }
                    }
                }
                all_hold(&run.certificate.checks)?;
                points.push(run.point);
            }
            for i in 0..points.len() {
                for j in (i + 1)..points.len() {
                    let c = pair_check(&o, &points[i], &points[j], b.metric.d(i, j), depth, "pair").map_err(|e| e.to_string())?;
                    let want = l * b.metric.d(i, j) + Rat::int(2) * l * Rat::pow2_neg(depth);
                    if c.rhs != want || !c.holds() {
                        return Err(c.to_string());
                    }
                }
            }
            Ok(())
        })();
        t.case(res.is_ok(), || format!("case {case}: {}", res.unwrap_err()));
    }
    t.note(format!("{moved} points followed a non-constant sequence"));
    t
}

/// Every metric space on `m` points with distances from `values`.
fn spaces(m: usize, values: &[Rat]) -> Vec<FinMetric> {
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    let mut out = Vec::new();
    let mut choice = vec![0usize; pairs.len()];
    loop {
        let mut s = FinMetric::with_points((0..m).map(|i| format!("b{i}"))).unwrap();
        for (p, &(i, j)) in pairs.iter().enumerate() {
            s.set(i, j, values[choice[p]]);
        }
        if validate_metric(&s).unwrap().is_empty() {
            out.push(s);
        }
        let mut p = 0;
        loop {
            if p == pairs.len() {
                return out;
            }
            choice[p] += 1;
            if choice[p] < values.len() {
                break;
            }
            choice[p] = 0;
            p += 1;
        }
    }
}

fn feasibility() -> Tally {
    let mut t = Tally::new();
    let mut values: Vec<Rat> = (1..=4).flat_map(|d| (1..=d).map(move |n| Rat::new(n, d))).collect();
    values.sort();
    values.dedup();
    let mut results = Vec::new();
    std::thread::scope(|sc| {
        let handles: Vec<_> = (1..=4)
            .map(|m| {
                let values = &values;
                sc.spawn(move || {
                    let mut total = 0usize;
                    let mut bad = Vec::new();
                    let mut feasible = 0usize;
                    let mut disagree = 0usize;
                    for s in spaces(m, values) {
                        let mut eta = vec![0usize; m];
                        let mut ext = s.clone();
                        ext.push_point("new", &vec![Rat::ONE; m]).unwrap();
                        loop {
                            let spec = OnePointSpec::new((0..m).map(|i| (i, values[eta[i]])));
                            let fast = one_point_feasible(&s, &spec).unwrap().is_feasible();
                            for (i, &v) in spec.eta.iter().enumerate() {
                                ext.set(m, i, v);
                            }
                            let slow = validate_metric(&ext).unwrap().is_empty();
                            total += 1;
                            feasible += usize::from(slow);
                            if fast != slow {
                                disagree += 1;
                                if bad.len() < 3 {
                                    bad.push(format!("{s:?} {:?}: {fast} vs {slow}", spec.eta));
                                }
                            }
                            let mut p = 0;
                            while p < m {
                                eta[p] += 1;
                                if eta[p] < values.len() {
                                    break;
                                }
                                eta[p] = 0;
                                p += 1;
                            }
                            if p == m {
                                break;
                            }
                        }
                    }
                    (total, bad, feasible, disagree)
                })
            })
            .collect();
        for h in handles {
            results.push(h.join().unwrap());
        }
    });
    let mut feasible = 0;
    for (total, bad, f, disagree) in results {
        feasible += f;
        t.total += total;
        t.failed += disagree;
        t.notes.extend(bad);
    }
    t.note(format!("{feasible} feasible extensions; distances {{n/d : d <= 4}} in (0, 1]"));
    t
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = urysohn::cli::run(std::iter::once("urysohn").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned() + &String::from_utf8_lossy(&err))
}

fn cli_contract() -> Tally {
    use urysohn::format::{parse_structure_file, serialize};
    let mut t = Tally::new();
    let dir = fixtures();
    let mut names: Vec<PathBuf> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    for p in &names {
        let text = std::fs::read_to_string(p).unwrap();
        let ok = parse_structure_file(&text).map(|f| serialize(&f) == text);
        t.case(ok == Ok(true), || format!("round trip {}: {ok:?}", p.display()));
    }
    let tmp = tempfile::tempdir().unwrap();
    let f = |n: &str| dir.join(n).display().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["embed".into(), f("two_point.k")],
        vec!["embed".into(), f("triple.bark")],
        vec!["embed".into(), f("pair.c"), "--compact".into(), f("line.compact")],
        vec!["embed".into(), f("pair.l"), "--polish".into(), f("path.polish")],
        vec![
            "homog".into(),
            f("triple.bark"),
            "--matched".into(),
            "x".into(),
            "--wish1".into(),
            "y".into(),
            "--wish2".into(),
            "z".into(),
        ],
    ];
    let mut tampered = 0;
    for (i, base) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let cert = tmp.path().join(format!("c{i}_{rep}"));
            let log = tmp.path().join(format!("o{i}_{rep}"));
            let mut args: Vec<String> = base.clone();
            args.extend(["--depth", "6", "--seed", "7", "--out"].map(String::from));
            args.push(cert.display().to_string());
            args.push("--oracle".into());
            args.push(log.display().to_string());
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            let (code, msg) = cli(&refs);
            t.case(code == 0, || format!("{base:?}: exit {code}: {msg}"));
            outputs.push((
                std::fs::read(&cert).unwrap_or_default(),
                std::fs::read(&log).unwrap_or_default(),
            ));
        }
        t.case(outputs[0] == outputs[1], || format!("{base:?}: reruns differ"));
        let text = String::from_utf8(outputs[0].0.clone()).unwrap();
        t.case(verify(&text).is_ok(), || format!("{base:?}: {:?}", verify(&text)));
        let bytes = text.as_bytes();
        let mut escaped = 0;
        for pos in 0..bytes.len() {
            let mut b = bytes.to_vec();
            b[pos] = if b[pos] == b'0' { b'1' } else { b'0' };
            tampered += 1;
            match String::from_utf8(b) {
                Ok(s) if verify(&s).is_ok() => escaped += 1,
                _ => {}
            }
        }
        t.case(escaped == 0, || format!("{base:?}: {escaped} tampered certificates accepted"));
        let log = String::from_utf8(outputs[0].1.clone()).unwrap();
        let ok = parse_structure_file(&log).map(|f| serialize(&f) == log);
        t.case(ok == Ok(true), || format!("{base:?}: oracle log round trip {ok:?}"));
    }
    let grow = |n: &str| {
        let p = tmp.path().join(n);
        let (code, _) = cli(&["grow", "--steps", "12", "--seed", "7", "--out", p.to_str().unwrap()]);
        (code, std::fs::read(p).unwrap_or_default())
    };
    let (g1, g2) = (grow("g1"), grow("g2"));
    t.case(g1.0 == 0 && g1 == g2, || "grow reruns differ".into());
    t.note(format!("{tampered} single-byte tamperings"));
    t
}

type Criterion = (&'static str, Option<Duration>, fn() -> Tally);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("amalgamation property", Some(Duration::from_secs(30)), amalgamation),
        ("canonical extension", None, canonical_extension),
        ("joint embedding (K, C, L)", None, jep_all),
        ("sandwich bands, staggered", None, sandwich),
        ("one-point extension convergence", Some(Duration::from_secs(120)), convergence),
        ("universality at desk scale", None, universality),
        ("back-and-forth", None, back_and_forth),
        ("zero witness", None, zero_witness),
        ("condition reduction soundness", None, reduction),
        ("suitable step bound", None, step_bound_c),
        ("Lipschitz limit", None, lipschitz_limit),
        ("one-point feasibility equivalence", None, feasibility),
        ("CLI contract", None, cli_contract),
    ];
    let mut failed = Vec::new();
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let tally = f();
        let took = start.elapsed();
        let in_time = budget.is_none_or(|b| took < b);
        let ok = tally.failed == 0 && in_time;
        println!(
            "{} {name}: {} cases, {} failed, {:.2}s{}",
            if ok { "PASS" } else { "FAIL" },
            tally.total,
            tally.failed,
            took.as_secs_f64(),
            budget.map_or(String::new(), |b| format!(" (budget {}s)", b.as_secs())),
        );
        for n in &tally.notes {
            println!("    {n}");
        }
        if !ok {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
