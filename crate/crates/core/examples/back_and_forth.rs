//! Extend a partial isomorphism between two finite pieces of the limit so
//! that it absorbs points from both sides.
//!
//! Run with `cargo run --release --example back_and_forth`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use urysohn::cauchy::{back_forth_floor, embed_structure_with_floor, extend_partial_iso, restriction, Side};
use urysohn::oracle::LimitOracle;
use urysohn::random;
use urysohn::Rat;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // the common picture both sides are approximations of
    let y = random::bar_structure(&mut rng, 4, 1, 3, 8, Rat::int(2));
    let depth = 5;
    let tol = Rat::pow2_neg(depth - 1);
    let (matched, wish1, wish2) = (vec![0], vec![1, 2], vec![3]);
    let floor = back_forth_floor([3, 2], wish1.len(), wish2.len(), depth);
    let mut o = LimitOracle::new(9);

    let mut side = |own: &[usize]| {
        let labels: Vec<usize> = matched.iter().chain(own).copied().collect();
        let run = embed_structure_with_floor(&restriction(&y, &labels), &mut o, depth, floor).unwrap();
        Side {
            points: run.points,
            labels,
            slot_map: run.slot_map,
        }
    };
    let s1 = side(&wish1);
    let s2 = side(&wish2);
    let bf = extend_partial_iso(&y, s1, s2, &matched, &wish1, &wish2, &mut o, depth, tol).unwrap();
    println!("matched labels: {:?}", bf.matched);
    println!("side 1 labels {:?}, side 2 labels {:?}", bf.side1.labels, bf.side2.labels);
    println!("index map: {:?}", bf.index_map);
    println!(
        "{} rounds, {} checks, all hold: {}",
        bf.runs.len(),
        bf.certificate.checks.len(),
        bf.certificate.all_hold()
    );
}
