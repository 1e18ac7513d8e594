#![allow(clippy::result_large_err, clippy::needless_range_loop)]

pub mod cauchy;
pub mod certificate;
pub mod cli;
pub mod format;
pub mod fraisse;
pub mod lipschitz;
pub mod metric;
pub mod oracle;
pub mod product;
pub mod random;
pub mod rat;
pub mod relational;

pub use rat::Rat;
