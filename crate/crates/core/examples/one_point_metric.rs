//! Finite rational metrics and one-point extensions.
//!
//! Run with `cargo run --example one_point_metric`.

use urysohn::metric::{one_point_feasible, path_amalgam_metric, path_distances, validate_metric, FinMetric, OnePointSpec};
use urysohn::Rat;

fn r(s: &str) -> Rat {
    s.parse().unwrap()
}

fn main() {
    // a path a - b - c with unit steps
    let mut m = FinMetric::with_points(["a", "b", "c"]).unwrap();
    m.set(0, 1, r("1/1"));
    m.set(1, 2, r("1/1"));
    m.set(0, 2, r("2/1"));
    assert!(validate_metric(&m).unwrap().is_empty());

    // a new point at distance 1/2 from a and 3/2 from c
    let spec = OnePointSpec::new([(0, r("1/2")), (2, r("3/2"))]);
    println!("feasible: {:?}", one_point_feasible(&m, &spec).unwrap());
    // distances to the points not in the base go through the base
    let row = path_distances(&m, &spec);
    println!("row: {}", row.iter().map(Rat::to_string).collect::<Vec<_>>().join(" "));

    // too far from both ends at once
    let bad = OnePointSpec::new([(0, r("1/4")), (2, r("1/4"))]);
    println!("infeasible: {:?}", one_point_feasible(&m, &bad).unwrap());

    // glue two copies of the path along b
    let shared = FinMetric::with_points(["b"]).unwrap();
    let glued = path_amalgam_metric(&m, &m, &shared, &[1], &[1]).unwrap();
    println!("glued {} points:", glued.metric.len());
    for i in 0..glued.metric.len() {
        let row: Vec<String> = (0..glued.metric.len()).map(|j| glued.metric.d(i, j).to_string()).collect();
        println!("  {:>3} {}", glued.metric.id(i), row.join(" "));
    }
}
