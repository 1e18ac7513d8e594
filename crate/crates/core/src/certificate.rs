//! Checkable certificates.
//!
//! A certificate is a list of exact inequalities between rationals. The text
//! form is
//!
//! ```text
//! CERTIFICATE v1
//! check <name> <lhs> <rel> <rhs> OK|FAIL
//! ...
//! summary <total> <ok> <fail>
//! digest <sha256 hex of every preceding byte>
//! ```
//!
//! [`verify`] recomputes every verdict from the two printed rationals alone.

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rat::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rel {
    Le,
    Lt,
    Eq,
}

impl Rel {
    pub fn token(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Eq => "=",
        }
    }

    fn parse(s: &str) -> Option<Rel> {
        match s {
            "<=" => Some(Rel::Le),
            "<" => Some(Rel::Lt),
            "=" => Some(Rel::Eq),
            _ => None,
        }
    }

    pub fn holds(self, lhs: Rat, rhs: Rat) -> bool {
        match self {
            Rel::Le => lhs <= rhs,
            Rel::Lt => lhs < rhs,
            Rel::Eq => lhs == rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Check {
    pub name: String,
    pub lhs: Rat,
    pub rel: Rel,
    pub rhs: Rat,
}

impl Check {
    pub fn new(name: impl Into<String>, lhs: Rat, rel: Rel, rhs: Rat) -> Check {
        let name = name.into();
        assert!(
            !name.is_empty() && !name.chars().any(char::is_whitespace),
            "check names are single tokens: {name:?}"
        );
        Check { name, lhs, rel, rhs }
    }

    pub fn le(name: impl Into<String>, lhs: Rat, rhs: Rat) -> Check {
        Check::new(name, lhs, Rel::Le, rhs)
    }

    pub fn lt(name: impl Into<String>, lhs: Rat, rhs: Rat) -> Check {
        Check::new(name, lhs, Rel::Lt, rhs)
    }

    pub fn eq(name: impl Into<String>, lhs: Rat, rhs: Rat) -> Check {
        Check::new(name, lhs, Rel::Eq, rhs)
    }

    pub fn holds(&self) -> bool {
        self.rel.holds(self.lhs, self.rhs)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {}",
            self.name,
            self.lhs,
            self.rel.token(),
            self.rhs,
            if self.holds() { "OK" } else { "FAIL" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Certificate {
    pub checks: Vec<Check>,
}

impl Certificate {
    pub fn new() -> Certificate {
        Certificate::default()
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, cs: impl IntoIterator<Item = Check>) {
        self.checks.extend(cs);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.holds())
    }

    pub fn all_hold(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn emit(&self) -> String {
        let mut body = String::from("CERTIFICATE v1\n");
        for c in &self.checks {
            body.push_str(&format!("check {c}\n"));
        }
        let ok = self.checks.iter().filter(|c| c.holds()).count();
        body.push_str(&format!(
            "summary {} {} {}\n",
            self.checks.len(),
            ok,
            self.checks.len() - ok
        ));
        let digest = hex::encode(Sha256::digest(body.as_bytes()));
        body.push_str(&format!("digest {digest}\n"));
        body
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertError {
    #[error("line {0}: {1}")]
    Syntax(usize, String),
    #[error("digest mismatch")]
    Digest,
    #[error("line {0}: recorded verdict disagrees with the inequality")]
    Verdict(usize),
    #[error("summary disagrees with the checks")]
    Summary,
    #[error("{0} check(s) fail")]
    Failing(usize),
}

/// Re-checks a certificate. Succeeds only if the text is intact and every
/// inequality holds; returns the number of checks.
pub fn verify(text: &str) -> Result<usize, CertError> {
    let Some(body_end) = text.rfind("digest ") else {
        return Err(CertError::Syntax(0, "missing digest line".into()));
    };
    let (body, tail) = text.split_at(body_end);
    if !body.is_empty() && !body.ends_with('\n') {
        return Err(CertError::Syntax(0, "digest must start a line".into()));
    }
    let expected = hex::encode(Sha256::digest(body.as_bytes()));
    if tail != format!("digest {expected}\n") {
        return Err(CertError::Digest);
    }
    let mut lines = body.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, "CERTIFICATE v1")) => {}
        _ => return Err(CertError::Syntax(1, "bad header".into())),
    }
    let mut total = 0usize;
    let mut ok = 0usize;
    let mut summary = None;
    for (no, line) in lines {
        if summary.is_some() {
            return Err(CertError::Syntax(no, "text after summary".into()));
        }
        let parts: Vec<&str> = line.split(' ').collect();
        match parts.as_slice() {
            ["check", _name, lhs, rel, rhs, verdict] => {
                let lhs = strict_rat(lhs).ok_or_else(|| CertError::Syntax(no, format!("bad rational {lhs}")))?;
                let rhs = strict_rat(rhs).ok_or_else(|| CertError::Syntax(no, format!("bad rational {rhs}")))?;
                let rel = Rel::parse(rel).ok_or_else(|| CertError::Syntax(no, format!("bad relation {rel}")))?;
                let holds = rel.holds(lhs, rhs);
                let recorded = match *verdict {
                    "OK" => true,
                    "FAIL" => false,
                    v => return Err(CertError::Syntax(no, format!("bad verdict {v}"))),
                };
                if holds != recorded {
                    return Err(CertError::Verdict(no));
                }
                total += 1;
                ok += usize::from(holds);
            }
            ["summary", t, o, f] => {
                let parse = |s: &str| s.parse::<usize>().map_err(|_| CertError::Syntax(no, "bad count".into()));
                summary = Some((parse(t)?, parse(o)?, parse(f)?));
            }
            _ => return Err(CertError::Syntax(no, "unrecognized record".into())),
        }
    }
    if summary != Some((total, ok, total - ok)) {
        return Err(CertError::Summary);
    }
    if ok != total {
        return Err(CertError::Failing(total - ok));
    }
    Ok(total)
}

/// Only the canonical spelling of a rational is accepted.
fn strict_rat(s: &str) -> Option<Rat> {
    let r = Rat::parse_signed(s).ok()?;
    (r.to_string() == s).then_some(r)
}
