//! One step of the approximation: choose distances from a new point to
//! anchors that are slightly above the targets and still form a metric.
//!
//! Run with `cargo run --example sandwich`.

use urysohn::cauchy::{sandwich_checks, solve_sandwich, BandRule, SandwichProblem};
use urysohn::Rat;

fn r(s: &str) -> Rat {
    s.parse().unwrap()
}

fn main() {
    // two anchors at distance 1, the new point should sit 1 from the first
    // and 1/2 from the second
    let p = SandwichProblem {
        targets: vec![r("1/1"), r("1/2")],
        anchor_d: vec![vec![Rat::ZERO, r("1/1")], vec![r("1/1"), Rat::ZERO]],
        prev_d: None,
        l: 2,
    };
    for rule in [BandRule::Staggered, BandRule::Uniform] {
        let s = solve_sandwich(&p, rule).unwrap();
        println!("{rule:?}: order {:?}", s.order);
        for i in 0..s.eta.len() {
            println!("  anchor {i}: target {} gamma {} eta {}", p.targets[i], s.gamma[i], s.eta[i]);
        }
        let checks = sandwich_checks(&p, &s, "step");
        println!("  {} checks, all hold: {}", checks.len(), checks.iter().all(|c| c.holds()));
    }

    // the next step must also stay within 2^-l of the previous point
    let first = solve_sandwich(&p, BandRule::Staggered).unwrap();
    let next = SandwichProblem {
        prev_d: Some(first.eta.clone()),
        l: 3,
        ..p
    };
    let s = solve_sandwich(&next, BandRule::Staggered).unwrap();
    println!("next step eta {:?} link {:?}", s.eta.iter().map(Rat::to_string).collect::<Vec<_>>(), s.link.map(|x| x.to_string()));
}
