//! Joint embedding and amalgamation of random structures.
//!
//! Run with `cargo run --example amalgamation`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use urysohn::fraisse::{amalgamate_k, joint_embed_k};
use urysohn::random;
use urysohn::relational::{check_embedding_k, validate_k};
use urysohn::Rat;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let two = Rat::int(2);

    let a = random::structure_k(&mut rng, 2, 1, 4, two);
    let b = random::structure_k(&mut rng, 2, 2, 4, two);
    let j = joint_embed_k(&a, &b).unwrap();
    println!("joint embedding: {} points, nA = {}, valid = {}", j.d.len(), j.d.n_a(), validate_k(&j.d).is_empty());

    for seed in 0..5 {
        let t = random::triple(&mut rng, 4, 2, 8, two);
        let res = amalgamate_k(&t.b, &t.c, &t.a, &t.wab, &t.wac).unwrap();
        let square = res.wb.compose(&t.wab) == res.wc.compose(&t.wac);
        println!(
            "triple {seed}: |A|={} |B|={} |C|={} -> |D|={} nD={} valid={} B->D ok={} C->D ok={} commutes={square}",
            t.a.len(),
            t.b.len(),
            t.c.len(),
            res.d.len(),
            res.d.n_a(),
            validate_k(&res.d).is_empty(),
            check_embedding_k(&t.b, &res.d, &res.wb) == Ok(None),
            check_embedding_k(&t.c, &res.d, &res.wc) == Ok(None),
        );
        println!("  C indices in D: {:?}", res.wc.pi);
    }
}
