//! Embed a finite structure into the limit as Cauchy sequences of oracle
//! points, and read distances and predicate values back.
//!
//! Run with `cargo run --example embed_in_limit`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use urysohn::cauchy::{embed_structure, step_bound};
use urysohn::oracle::LimitOracle;
use urysohn::random;
use urysohn::Rat;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // three points, unary and binary predicates with index sets drawn from 1..=4
    let x = random::bar_structure(&mut rng, 3, 2, 4, 8, Rat::int(2));
    let depth = 6;
    let mut o = LimitOracle::new(1);
    let run = embed_structure(&x, &mut o, depth).unwrap();
    println!("oracle grew {} points for {} targets", o.len(), x.len());

    let lvl = depth as usize;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let got = o.d(run.points[i].at(lvl), run.points[j].at(lvl));
            println!("d(x{}, x{}): target {} got {got}", i + 1, j + 1, x.metric.d(i, j));
        }
    }
    for (&(n, m), &g) in &run.slot_map {
        let t: Vec<usize> = vec![0; n];
        let ot: Vec<usize> = t.iter().map(|&i| run.points[i].at(lvl)).collect();
        println!(
            "p_{m}^{n} -> global ({n}, {g}): at x1 target {} got {} (bound {})",
            x.p(n, m, &t),
            o.value(n, g, &ot).unwrap(),
            step_bound(n, depth)
        );
    }
    let failing = run.certificate.failures().count();
    println!("certificate: {} checks, {failing} failing", run.certificate.checks.len());
}
