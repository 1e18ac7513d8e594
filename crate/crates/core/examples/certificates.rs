//! Emit a certificate, verify it, and watch a tampered copy get rejected.
//!
//! Run with `cargo run --example certificates`.

use urysohn::certificate::{verify, Certificate, Check};
use urysohn::Rat;

fn main() {
    let mut cert = Certificate::new();
    cert.push(Check::le("gap1", Rat::new(1, 4), Rat::new(1, 4)));
    cert.push(Check::lt("gap2", Rat::new(1, 16), Rat::new(1, 8)));
    cert.push(Check::eq("value", Rat::new(3, 8), Rat::new(6, 16)));
    let text = cert.emit();
    print!("{text}");
    println!("verify: {:?}", verify(&text));

    let tampered = text.replacen("1/16", "3/16", 1);
    println!("tampered: {:?}", verify(&tampered));

    // a failing check is recorded, and the verifier reports it
    cert.push(Check::le("too.far", Rat::new(1, 2), Rat::new(1, 4)));
    println!("with a failing check: {:?}", verify(&cert.emit()));
}
