//! Structures with predicate tables, validation and the canonical extension.
//!
//! Run with `cargo run --example predicates`.

use urysohn::metric::FinMetric;
use urysohn::relational::{canonical_extend, validate_k, PredTable, StructureK};
use urysohn::Rat;

fn r(s: &str) -> Rat {
    s.parse().unwrap()
}

fn main() {
    let mut m = FinMetric::with_points(["a", "b", "c"]).unwrap();
    m.set(0, 1, r("1/2"));
    m.set(1, 2, r("1/2"));
    m.set(0, 2, r("1/1"));

    // a unary predicate known only at a and c
    let mut tab = PredTable::new(1, 3);
    tab.set(&[0], r("3/4"));
    tab.set(&[2], r("1/8"));
    let full = canonical_extend(&m, 1, &tab).unwrap();
    for (t, v) in full.defined() {
        println!("p({}) = {v}", m.id(t[0]));
    }

    // a structure with nA = 1 has one unary predicate p_1^1
    let mut s = StructureK::indexed(m.clone(), 1);
    s.insert_table(1, full);
    println!("violations: {:?}", validate_k(&s));

    // values that change faster than the distance are rejected
    s.set_by_ids(1, 1, &["b"], r("2/1")).unwrap();
    for v in validate_k(&s) {
        println!("violation: {v}");
    }
}
