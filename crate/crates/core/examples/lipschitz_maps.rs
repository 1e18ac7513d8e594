//! Points carrying values in a Polish space with a Lipschitz bound, and the
//! limit map read off Cauchy sequences.
//!
//! Run with `cargo run --example lipschitz_maps`.

use std::collections::BTreeSet;

use urysohn::lipschitz::{embed_structure_l, eval_limit_function, pair_check, validate_l, PolishPresentation, StructureL};
use urysohn::metric::FinMetric;
use urysohn::oracle::LimitOracle;
use urysohn::Rat;

fn r(s: &str) -> Rat {
    s.parse().unwrap()
}

fn main() {
    // Z: three dense points, z3 an alias of z2
    let mut zm = FinMetric::with_points(["z1", "z2", "z3"]).unwrap();
    zm.set(0, 1, r("1/1"));
    zm.set(0, 2, r("1/1"));
    zm.set(1, 2, Rat::ZERO);
    let z = PolishPresentation::new(zm, BTreeSet::from([(2, 3)])).unwrap();

    let l = r("2/1");
    let mut xm = FinMetric::with_points(["a", "b", "c"]).unwrap();
    xm.set(0, 1, r("1/2"));
    xm.set(1, 2, r("1/4"));
    xm.set(0, 2, r("3/4"));
    let x = StructureL::new(xm.clone(), vec![1, 2, 3], l);
    println!("valid: {:?}", validate_l(&x, &z).unwrap());

    // z1 and z2 are 1 apart but a and b only 1/2: needs L >= 2
    let tight = StructureL::new(xm, vec![1, 2, 3], r("1/1"));
    println!("with L = 1: {:?}", validate_l(&tight, &z).unwrap());

    let depth = 6;
    let mut o = LimitOracle::new(4).with_polish(z, l).unwrap();
    let (points, cert) = embed_structure_l(&x, &mut o, depth).unwrap();
    println!("embedded with {} checks, all hold: {}", cert.checks.len(), cert.all_hold());
    for (i, p) in points.iter().enumerate() {
        let v = eval_limit_function(&o, p, depth).unwrap();
        println!("F(x{}) = z{} within {}", i + 1, v.index, v.bound);
    }
    let c = pair_check(&o, &points[0], &points[1], x.metric.d(0, 1), depth, "pair.x1x2").unwrap();
    println!("{c}");
}
