//! Points carrying distance profiles to a closed subset of a compact space.
//!
//! Run with `cargo run --example compact_product`.

use urysohn::metric::FinMetric;
use urysohn::oracle::LimitOracle;
use urysohn::product::{
    brute_force_c, embed_structure_c, membership_c, realize_zero_witness, validate_c, CompactPresentation, StructureC,
    SuitableFn,
};
use urysohn::Rat;

fn r(s: &str) -> Rat {
    s.parse().unwrap()
}

fn main() {
    // K: three points on a line
    let mut km = FinMetric::with_points(["q1", "q2", "q3"]).unwrap();
    km.set(0, 1, r("1/4"));
    km.set(1, 2, r("1/4"));
    km.set(0, 2, r("1/2"));
    let k = CompactPresentation::new(km).unwrap();

    // X: two points; the closed set contains (a, q1) only
    let mut xm = FinMetric::with_points(["a", "b"]).unwrap();
    xm.set(0, 1, r("1/2"));
    let x = StructureC::from_closed_set(xm.clone(), &k, &[(0, 1)]);
    for (i, f) in x.p.iter().enumerate() {
        let vals: Vec<String> = f.table(&k).iter().map(Rat::to_string).collect();
        println!("p({}) on K: {}", xm.id(i), vals.join(" "));
    }
    println!("valid: {:?} brute force: {}", validate_c(&x, &k), brute_force_c(&x, &k));

    // a profile that moves faster than the distance allows
    let bad = StructureC::new(xm, vec![SuitableFn::zero(), SuitableFn::new([(1, r("1/1"))])]);
    println!("invalid: {:?}", validate_c(&bad, &k));

    let depth = 5;
    let mut o = LimitOracle::new(2).with_compact(k.clone());
    let (points, cert) = embed_structure_c(&x, &mut o, depth).unwrap();
    println!("embedded with {} checks, all hold: {}", cert.checks.len(), cert.all_hold());
    for (i, p) in points.iter().enumerate() {
        let row: Vec<String> = (1..=k.len()).map(|n| format!("{:?}", membership_c(&o, p, n, depth))).collect();
        println!("x{} membership: {}", i + 1, row.join(" "));
    }

    // a nearby point whose profile vanishes at q3
    let u = points[1].last();
    let w = realize_zero_witness(&mut o, u, 3, r("1/16")).unwrap();
    println!("zero witness: point {} at distance {}, grown {}", w.point, w.distance, w.grown);
    for c in w.checks(&o, u, 3, r("1/16")) {
        println!("  {c}");
    }
}
