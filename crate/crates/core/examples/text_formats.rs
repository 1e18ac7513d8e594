//! Read and write the text formats, and replay an oracle log.
//!
//! Run with `cargo run --example text_formats`.

use urysohn::cauchy::embed_structure;
use urysohn::format::{parse_structure_file, serialize, OracleLog, StructureFile};
use urysohn::oracle::LimitOracle;
use urysohn::relational::validate_k;

const TEXT: &str = "\
K
nA 1
point a
point b   # a comment
d a b 1/2
p 1 1 a 1/4
p 1 1 b 0/1
";

fn main() {
    let file = parse_structure_file(TEXT).unwrap();
    print!("canonical form:\n{}", serialize(&file));
    let StructureFile::K(s) = file else { unreachable!() };
    println!("violations: {:?}", validate_k(&s));

    match parse_structure_file("K\nnA 1\npoint a\np 1 1 z 0/1\n") {
        Ok(_) => unreachable!(),
        Err(e) => println!("parse error: {e}"),
    }

    let mut o = LimitOracle::new(7);
    embed_structure(&s, &mut o, 3).unwrap();
    let log = serialize(&StructureFile::Oracle(OracleLog::of(&o)));
    println!("oracle log: {} lines", log.lines().count());
    let StructureFile::Oracle(back) = parse_structure_file(&log).unwrap() else { unreachable!() };
    let again = back.replay().unwrap();
    println!("replayed {} points, same snapshot: {}", again.len(), again.snapshot() == o.snapshot());
}
