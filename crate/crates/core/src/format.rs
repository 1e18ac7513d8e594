//! Line-oriented text format for structures, presentations and oracle logs.
//!
//! The first record names the kind: `K`, `BARK`, `C`, `L`, `COMPACT`,
//! `POLISH` or `ORACLE`. Records:
//!
//! ```text
//! point <id>
//! d <id> <id> <num/den>
//! nA <k>
//! p <n> <m> <id...> <num/den>
//! suit <id> <i>=<num/den>,...
//! pz <id> <index>
//! L <num/den>
//! ```
//!
//! Everything after `#` is a comment. A zero `d` record between distinct
//! points of a `POLISH` presentation declares them aliases.
//!
//! `ORACLE` files hold a growth log:
//!
//! ```text
//! seed <u64>
//! kpoint <id> / kd <id> <id> <num/den>     compact layer
//! zpoint <id> / zd <id> <id> <num/den>     Lipschitz layer, with `L`
//! step                                      one growth request
//! sd <point> <num/den>                      base point and distance
//! sp <n> new|g<g>                           predicate request
//! sv <i,j,...> <num/den>                    value of the last request
//! ss [<i>=<num/den>,...]                    suitable function
//! sz <index>                                dense index
//! ```
//!
//! [`serialize`] writes the canonical form: points in declaration order,
//! `d` records by point position, `p` records by slot and tuple.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use crate::lipschitz::{PolishPresentation, StructureL};
use crate::metric::FinMetric;
use crate::oracle::{GrowthRequest, LimitOracle, OracleError, PredRequest, SlotRef};
use crate::product::{CompactPresentation, StructureC, SuitableFn};
use crate::rat::Rat;
use crate::relational::{tuples, Signature, StructureK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    K,
    Bark,
    C,
    L,
    Compact,
    Polish,
    Oracle,
}

impl Kind {
    pub fn header(self) -> &'static str {
        match self {
            Kind::K => "K",
            Kind::Bark => "BARK",
            Kind::C => "C",
            Kind::L => "L",
            Kind::Compact => "COMPACT",
            Kind::Polish => "POLISH",
            Kind::Oracle => "ORACLE",
        }
    }

    fn parse(s: &str) -> Option<Kind> {
        Some(match s {
            "K" => Kind::K,
            "BARK" => Kind::Bark,
            "C" => Kind::C,
            "L" => Kind::L,
            "COMPACT" => Kind::Compact,
            "POLISH" => Kind::Polish,
            "ORACLE" => Kind::Oracle,
            _ => return None,
        })
    }
}

/// A growth log with the layers of the oracle it was recorded on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleLog {
    pub seed: u64,
    pub compact: Option<CompactPresentation>,
    pub polish: Option<(PolishPresentation, Rat)>,
    pub log: Vec<GrowthRequest>,
}

impl OracleLog {
    pub fn of(o: &LimitOracle) -> OracleLog {
        OracleLog {
            seed: o.seed(),
            compact: o.compact().cloned(),
            polish: o.polish().map(|(z, l)| (z.clone(), l)),
            log: o.log().to_vec(),
        }
    }

    /// Empty oracle with the recorded layers.
    pub fn template(&self) -> Result<LimitOracle, OracleError> {
        let mut o = LimitOracle::new(self.seed);
        if let Some(k) = &self.compact {
            o = o.with_compact(k.clone());
        }
        if let Some((z, l)) = &self.polish {
            o = o.with_polish(z.clone(), *l)?;
        }
        Ok(o)
    }

    pub fn replay(&self) -> Result<LimitOracle, OracleError> {
        LimitOracle::replay(&self.template()?, &self.log)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureFile {
    K(StructureK),
    Bark(StructureK),
    C(StructureC),
    L(StructureL),
    Compact(CompactPresentation),
    Polish(PolishPresentation),
    Oracle(OracleLog),
}

impl StructureFile {
    pub fn kind(&self) -> Kind {
        match self {
            StructureFile::K(_) => Kind::K,
            StructureFile::Bark(_) => Kind::Bark,
            StructureFile::C(_) => Kind::C,
            StructureFile::L(_) => Kind::L,
            StructureFile::Compact(_) => Kind::Compact,
            StructureFile::Polish(_) => Kind::Polish,
            StructureFile::Oracle(_) => Kind::Oracle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("empty file")]
    Empty,
    #[error("unknown header {0:?}")]
    UnknownHeader(String),
    #[error("malformed rational {0:?}")]
    Rational(String),
    #[error("malformed integer {0:?}")]
    Integer(String),
    #[error("duplicate record: {0}")]
    Duplicate(String),
    #[error("unknown point {0:?}")]
    UnknownPoint(String),
    #[error("record {0:?} not allowed here")]
    Record(String),
    #[error("expected {0}")]
    Shape(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    line: usize,
    col: usize,
}

impl<'a> Tok<'a> {
    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col,
            kind,
        }
    }

    fn rat(&self) -> Result<Rat, ParseError> {
        self.text
            .parse()
            .map_err(|_| self.err(ParseErrorKind::Rational(self.text.into())))
    }

    fn usize(&self) -> Result<usize, ParseError> {
        if !self.text.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.err(ParseErrorKind::Integer(self.text.into())));
        }
        self.text
            .parse()
            .map_err(|_| self.err(ParseErrorKind::Integer(self.text.into())))
    }
}

struct Line<'a> {
    no: usize,
    toks: Vec<Tok<'a>>,
}

impl<'a> Line<'a> {
    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.no,
            col: self.toks.first().map_or(1, |t| t.col),
            kind,
        }
    }

    fn arity(&self, n: usize, shape: &str) -> Result<(), ParseError> {
        if self.toks.len() != n {
            return Err(self.err(ParseErrorKind::Shape(shape.into())));
        }
        Ok(())
    }
}

fn lex(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let mut toks = Vec::new();
        let mut start = None;
        for (pos, ch) in body.char_indices().chain([(body.len(), ' ')]) {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(pos),
                (true, Some(s)) => {
                    toks.push(Tok {
                        text: &body[s..pos],
                        line: i + 1,
                        col: body[..s].chars().count() + 1,
                    });
                    start = None;
                }
                _ => {}
            }
        }
        if !toks.is_empty() {
            out.push(Line { no: i + 1, toks });
        }
    }
    out
}

/// Points and distances shared by every kind.
#[derive(Default)]
struct Space {
    metric: FinMetric,
    seen: HashSet<(usize, usize)>,
}

impl Space {
    fn point(&mut self, id: &Tok) -> Result<(), ParseError> {
        self.metric
            .add_point(id.text)
            .map(|_| ())
            .map_err(|_| id.err(ParseErrorKind::Duplicate(format!("point {}", id.text))))
    }

    fn index(&self, id: &Tok) -> Result<usize, ParseError> {
        self.metric
            .index_of(id.text)
            .ok_or_else(|| id.err(ParseErrorKind::UnknownPoint(id.text.into())))
    }

    fn dist(&mut self, line: &Line) -> Result<(usize, usize, Rat), ParseError> {
        line.arity(4, "d <id> <id> <num/den>")?;
        let a = self.index(&line.toks[1])?;
        let b = self.index(&line.toks[2])?;
        let r = line.toks[3].rat()?;
        if a == b {
            return Err(line.toks[2].err(ParseErrorKind::Invalid("distance from a point to itself".into())));
        }
        if !self.seen.insert((a.min(b), a.max(b))) {
            return Err(line.err(ParseErrorKind::Duplicate(format!(
                "d {} {}",
                line.toks[1].text, line.toks[2].text
            ))));
        }
        self.metric.set(a, b, r);
        Ok((a, b, r))
    }
}

fn parse_suitable(toks: &[Tok]) -> Result<SuitableFn, ParseError> {
    let mut entries = BTreeMap::new();
    for t in toks {
        for part in t.text.split(',').filter(|s| !s.is_empty()) {
            let (i, r) = part
                .split_once('=')
                .ok_or_else(|| t.err(ParseErrorKind::Shape("<i>=<num/den>".into())))?;
            let it = Tok { text: i, ..*t };
            let rt = Tok { text: r, ..*t };
            let i = it.usize()?;
            if entries.insert(i, rt.rat()?).is_some() {
                return Err(t.err(ParseErrorKind::Duplicate(format!("suitable index {i}"))));
            }
        }
    }
    Ok(SuitableFn::new(entries))
}

fn parse_tuple(t: &Tok) -> Result<Vec<usize>, ParseError> {
    t.text
        .split(',')
        .map(|s| Tok { text: s, ..*t }.usize())
        .collect()
}

pub fn parse_structure_file(text: &str) -> Result<StructureFile, ParseError> {
    let lines = lex(text);
    let Some(first) = lines.first() else {
        return Err(ParseError {
            line: 1,
            col: 1,
            kind: ParseErrorKind::Empty,
        });
    };
    first.arity(1, "a header")?;
    let kind = Kind::parse(first.toks[0].text)
        .ok_or_else(|| first.toks[0].err(ParseErrorKind::UnknownHeader(first.toks[0].text.into())))?;
    let body = &lines[1..];
    match kind {
        Kind::Oracle => parse_oracle(first, body).map(StructureFile::Oracle),
        _ => parse_plain(kind, first, body),
    }
}

fn parse_plain(kind: Kind, header: &Line, body: &[Line]) -> Result<StructureFile, ParseError> {
    let mut space = Space::default();
    let mut n_a: Option<usize> = None;
    let mut lconst: Option<Rat> = None;
    let mut preds: Vec<(usize, usize, Vec<usize>, Rat, &Line)> = Vec::new();
    let mut pkeys = HashSet::new();
    let mut suits: BTreeMap<usize, SuitableFn> = BTreeMap::new();
    let mut pz: BTreeMap<usize, usize> = BTreeMap::new();
    let mut zeros: BTreeSet<(usize, usize)> = BTreeSet::new();
    for line in body {
        let rec = line.toks[0].text;
        let allowed = match rec {
            "point" | "d" => true,
            "nA" | "p" => matches!(kind, Kind::K | Kind::Bark),
            "suit" => kind == Kind::C,
            "pz" | "L" => kind == Kind::L,
            _ => false,
        };
        if !allowed {
            return Err(line.err(ParseErrorKind::Record(rec.into())));
        }
        match rec {
            "point" => {
                line.arity(2, "point <id>")?;
                space.point(&line.toks[1])?;
            }
            "d" => {
                let (a, b, r) = space.dist(line)?;
                if r.is_zero() {
                    zeros.insert((a.min(b) + 1, a.max(b) + 1));
                }
            }
            "nA" => {
                line.arity(2, "nA <k>")?;
                if n_a.replace(line.toks[1].usize()?).is_some() {
                    return Err(line.err(ParseErrorKind::Duplicate("nA".into())));
                }
            }
            "L" => {
                line.arity(2, "L <num/den>")?;
                if lconst.replace(line.toks[1].rat()?).is_some() {
                    return Err(line.err(ParseErrorKind::Duplicate("L".into())));
                }
            }
            "p" => {
                if line.toks.len() < 4 {
                    return Err(line.err(ParseErrorKind::Shape("p <n> <m> <id...> <num/den>".into())));
                }
                let n = line.toks[1].usize()?;
                let m = line.toks[2].usize()?;
                if n == 0 || m == 0 {
                    return Err(line.err(ParseErrorKind::Invalid("arity and index start at 1".into())));
                }
                line.arity(n + 4, &format!("{n} point ids"))?;
                let t = line.toks[3..3 + n]
                    .iter()
                    .map(|tok| space.index(tok))
                    .collect::<Result<Vec<_>, _>>()?;
                let r = line.toks[3 + n].rat()?;
                if !pkeys.insert((n, m, t.clone())) {
                    return Err(line.err(ParseErrorKind::Duplicate(format!("p {n} {m} {:?}", t))));
                }
                preds.push((n, m, t, r, line));
            }
            "suit" => {
                if line.toks.len() < 2 {
                    return Err(line.err(ParseErrorKind::Shape("suit <id> <i>=<num/den>,...".into())));
                }
                let a = space.index(&line.toks[1])?;
                let f = parse_suitable(&line.toks[2..])?;
                if suits.insert(a, f).is_some() {
                    return Err(line.err(ParseErrorKind::Duplicate(format!("suit {}", line.toks[1].text))));
                }
            }
            "pz" => {
                line.arity(3, "pz <id> <index>")?;
                let a = space.index(&line.toks[1])?;
                if pz.insert(a, line.toks[2].usize()?).is_some() {
                    return Err(line.err(ParseErrorKind::Duplicate(format!("pz {}", line.toks[1].text))));
                }
            }
            _ => unreachable!("filtered above"),
        }
    }
    let metric = space.metric;
    let invalid = |msg: String| header.err(ParseErrorKind::Invalid(msg));
    Ok(match kind {
        Kind::K | Kind::Bark => {
            let n_a = n_a.ok_or_else(|| invalid("missing nA record".into()))?;
            let sig = if kind == Kind::K {
                Signature::Indexed { n_a }
            } else {
                let mut sets: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
                for (n, m, ..) in &preds {
                    sets.entry(*n).or_default().insert(*m);
                }
                for n in 1..=n_a {
                    let size = sets.get(&n).map_or(0, |s| s.len());
                    if size != n_a + 1 - n {
                        return Err(invalid(format!(
                            "arity {n} has {size} indices, expected {}",
                            n_a + 1 - n
                        )));
                    }
                }
                if let Some(&n) = sets.keys().find(|&&n| n > n_a) {
                    return Err(invalid(format!("arity {n} above nA")));
                }
                Signature::IndexSets { n_a, sets }
            };
            let mut s = StructureK::new(metric, sig);
            for (n, m, t, r, line) in preds {
                s.set(n, m, &t, r)
                    .map_err(|e| line.err(ParseErrorKind::Invalid(e.to_string())))?;
            }
            if kind == Kind::K {
                StructureFile::K(s)
            } else {
                StructureFile::Bark(s)
            }
        }
        Kind::C => {
            let p = (0..metric.len())
                .map(|a| suits.remove(&a).unwrap_or_default())
                .collect();
            StructureFile::C(StructureC::new(metric, p))
        }
        Kind::L => {
            let l = lconst.ok_or_else(|| invalid("missing L record".into()))?;
            let mut p = Vec::with_capacity(metric.len());
            for a in 0..metric.len() {
                p.push(
                    *pz.get(&a)
                        .ok_or_else(|| invalid(format!("missing pz for {}", metric.id(a))))?,
                );
            }
            StructureFile::L(StructureL::new(metric, p, l))
        }
        Kind::Compact => StructureFile::Compact(CompactPresentation::new(metric).map_err(|e| invalid(e.to_string()))?),
        Kind::Polish => StructureFile::Polish(PolishPresentation::new(metric, zeros).map_err(|e| invalid(e.to_string()))?),
        Kind::Oracle => unreachable!("handled by parse_oracle"),
    })
}

fn parse_oracle(header: &Line, body: &[Line]) -> Result<OracleLog, ParseError> {
    let mut seed = None;
    let mut kspace = Space::default();
    let mut zspace = Space::default();
    let mut zeros = BTreeSet::new();
    let mut lconst = None;
    let mut log: Vec<GrowthRequest> = Vec::new();
    for line in body {
        let rec = line.toks[0].text;
        let in_step = || log.last().ok_or_else(|| line.err(ParseErrorKind::Shape("a step record first".into())));
        match rec {
            "seed" => {
                line.arity(2, "seed <u64>")?;
                let t = &line.toks[1];
                let v: u64 = t
                    .text
                    .parse()
                    .map_err(|_| t.err(ParseErrorKind::Integer(t.text.into())))?;
                if seed.replace(v).is_some() {
                    return Err(line.err(ParseErrorKind::Duplicate("seed".into())));
                }
            }
            "kpoint" | "zpoint" => {
                line.arity(2, "point <id>")?;
                let sp = if rec == "kpoint" { &mut kspace } else { &mut zspace };
                sp.point(&line.toks[1])?;
            }
            "kd" => {
                kspace.dist(line)?;
            }
            "zd" => {
                let (a, b, r) = zspace.dist(line)?;
                if r.is_zero() {
                    zeros.insert((a.min(b) + 1, a.max(b) + 1));
                }
            }
            "L" => {
                line.arity(2, "L <num/den>")?;
                if lconst.replace(line.toks[1].rat()?).is_some() {
                    return Err(line.err(ParseErrorKind::Duplicate("L".into())));
                }
            }
            "step" => {
                line.arity(1, "step")?;
                log.push(GrowthRequest::default());
            }
            "sd" => {
                line.arity(3, "sd <point> <num/den>")?;
                in_step()?;
                let b = line.toks[1].usize()?;
                let r = line.toks[2].rat()?;
                let req = log.last_mut().expect("checked");
                if req.base.contains(&b) {
                    return Err(line.err(ParseErrorKind::Duplicate(format!("sd {b}"))));
                }
                req.base.push(b);
                req.eta.push(r);
            }
            "sp" => {
                line.arity(3, "sp <n> new|g<g>")?;
                in_step()?;
                let n = line.toks[1].usize()?;
                let t = &line.toks[2];
                let slot = match t.text {
                    "new" => SlotRef::Fresh(n),
                    s => {
                        let g = s
                            .strip_prefix('g')
                            .ok_or_else(|| t.err(ParseErrorKind::Shape("new or g<index>".into())))?;
                        SlotRef::Global(n, Tok { text: g, ..*t }.usize()?)
                    }
                };
                log.last_mut().expect("checked").preds.push(PredRequest { slot, values: vec![] });
            }
            "sv" => {
                line.arity(3, "sv <i,j,...> <num/den>")?;
                in_step()?;
                let t = parse_tuple(&line.toks[1])?;
                let r = line.toks[2].rat()?;
                let pred = log
                    .last_mut()
                    .expect("checked")
                    .preds
                    .last_mut()
                    .ok_or_else(|| line.err(ParseErrorKind::Shape("an sp record first".into())))?;
                if pred.values.iter().any(|(u, _)| *u == t) {
                    return Err(line.err(ParseErrorKind::Duplicate(format!("sv {}", line.toks[1].text))));
                }
                pred.values.push((t, r));
            }
            "ss" => {
                in_step()?;
                let f = parse_suitable(&line.toks[1..])?;
                if log.last_mut().expect("checked").suitable.replace(f).is_some() {
                    return Err(line.err(ParseErrorKind::Duplicate("ss".into())));
                }
            }
            "sz" => {
                line.arity(2, "sz <index>")?;
                in_step()?;
                let q = line.toks[1].usize()?;
                if log.last_mut().expect("checked").dense.replace(q).is_some() {
                    return Err(line.err(ParseErrorKind::Duplicate("sz".into())));
                }
            }
            _ => return Err(line.err(ParseErrorKind::Record(rec.into()))),
        }
    }
    let invalid = |msg: String| header.err(ParseErrorKind::Invalid(msg));
    let compact = if kspace.metric.is_empty() {
        None
    } else {
        Some(CompactPresentation::new(kspace.metric).map_err(|e| invalid(e.to_string()))?)
    };
    let polish = match (zspace.metric.is_empty(), lconst) {
        (true, None) => None,
        (false, Some(l)) => Some((
            PolishPresentation::new(zspace.metric, zeros).map_err(|e| invalid(e.to_string()))?,
            l,
        )),
        _ => return Err(invalid("Lipschitz layer needs both zpoint records and L".into())),
    };
    Ok(OracleLog {
        seed: seed.ok_or_else(|| invalid("missing seed record".into()))?,
        compact,
        polish,
        log,
    })
}

fn write_space(out: &mut String, m: &FinMetric, point: &str, d: &str) {
    for i in 0..m.len() {
        out.push_str(&format!("{point} {}\n", m.id(i)));
    }
    for i in 0..m.len() {
        for j in (i + 1)..m.len() {
            if let Some(r) = m.get(i, j) {
                out.push_str(&format!("{d} {} {} {r}\n", m.id(i), m.id(j)));
            }
        }
    }
}

fn write_suitable(f: &SuitableFn) -> String {
    let s = f.to_string();
    if s.is_empty() {
        s
    } else {
        format!(" {s}")
    }
}

/// Canonical text of a file.
pub fn serialize(file: &StructureFile) -> String {
    let mut out = format!("{}\n", file.kind().header());
    match file {
        StructureFile::K(s) | StructureFile::Bark(s) => {
            out.push_str(&format!("nA {}\n", s.n_a()));
            write_space(&mut out, &s.metric, "point", "d");
            let slots: Vec<_> = s.slots().collect();
            for (n, m) in slots {
                for t in tuples(s.len(), n) {
                    if let Some(r) = s.get(n, m, &t) {
                        out.push_str(&format!("p {n} {m} {} {r}\n", s.tuple_ids(&t).join(" ")));
                    }
                }
            }
        }
        StructureFile::C(s) => {
            write_space(&mut out, &s.metric, "point", "d");
            for (a, f) in s.p.iter().enumerate() {
                out.push_str(&format!("suit {}{}\n", s.metric.id(a), write_suitable(f)));
            }
        }
        StructureFile::L(s) => {
            out.push_str(&format!("L {}\n", s.l));
            write_space(&mut out, &s.metric, "point", "d");
            for (a, q) in s.p.iter().enumerate() {
                out.push_str(&format!("pz {} {q}\n", s.metric.id(a)));
            }
        }
        StructureFile::Compact(k) => write_space(&mut out, k.metric(), "point", "d"),
        StructureFile::Polish(z) => write_space(&mut out, z.metric(), "point", "d"),
        StructureFile::Oracle(o) => {
            out.push_str(&format!("seed {}\n", o.seed));
            if let Some(k) = &o.compact {
                write_space(&mut out, k.metric(), "kpoint", "kd");
            }
            if let Some((z, l)) = &o.polish {
                out.push_str(&format!("L {l}\n"));
                write_space(&mut out, z.metric(), "zpoint", "zd");
            }
            for req in &o.log {
                out.push_str("step\n");
                for (b, e) in req.base.iter().zip(&req.eta) {
                    out.push_str(&format!("sd {b} {e}\n"));
                }
                for p in &req.preds {
                    match p.slot {
                        SlotRef::Global(n, g) => out.push_str(&format!("sp {n} g{g}\n")),
                        SlotRef::Fresh(n) => out.push_str(&format!("sp {n} new\n")),
                    }
                    for (t, v) in &p.values {
                        let t: Vec<String> = t.iter().map(usize::to_string).collect();
                        out.push_str(&format!("sv {} {v}\n", t.join(",")));
                    }
                }
                if let Some(f) = &req.suitable {
                    out.push_str(&format!("ss{}\n", write_suitable(f)));
                }
                if let Some(q) = req.dense {
                    out.push_str(&format!("sz {q}\n"));
                }
            }
        }
    }
    out
}

impl fmt::Display for StructureFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}
