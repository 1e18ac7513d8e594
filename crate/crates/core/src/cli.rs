//! The `urysohn` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cauchy::{back_forth_floor, check_bar, embed_structure_with_floor, extend_partial_iso, restriction, Side};
use crate::certificate::{verify, Certificate};
use crate::format::{parse_structure_file, serialize, OracleLog, ParseError, StructureFile};
use crate::fraisse::{amalgamate_k, joint_embed_k};
use crate::lipschitz::{
    amalgamate_l, embed_structure_l, jep_l, validate_l, PolishPresentation,
};
use crate::metric::FinMetric;
use crate::oracle::{GrowthRequest, LimitOracle, PredRequest, SlotRef};
use crate::product::{amalgamate_c, embed_structure_c, jep_c, validate_c, CompactPresentation};
use crate::rat::Rat;
use crate::relational::{validate_k, EmbeddingK, StructureK};

#[derive(Debug, Parser)]
#[command(name = "urysohn", version, about = "Finite approximations of universal metric structures")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Args)]
struct Layers {
    /// COMPACT presentation for C files and suitable-function layers
    #[arg(long)]
    compact: Option<PathBuf>,
    /// POLISH presentation for L files and Lipschitz layers
    #[arg(long)]
    polish: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check a structure, presentation or oracle log
    Validate {
        file: PathBuf,
        #[command(flatten)]
        layers: Layers,
    },
    /// Amalgamate B and C over A (points of A matched by id)
    Amalgamate {
        b: PathBuf,
        c: PathBuf,
        a: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        layers: Layers,
    },
    /// Disjoint union far apart
    JointEmbed {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        layers: Layers,
    },
    /// Random one-point extensions of an oracle
    Grow {
        /// Existing growth log to continue
        log: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        layers: Layers,
    },
    /// Embed a structure as Cauchy points and certify it
    Embed {
        file: PathBuf,
        #[arg(long, default_value_t = 6)]
        depth: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Certificate path
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the growth log
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[command(flatten)]
        layers: Layers,
    },
    /// Extend a partial isomorphism back and forth
    Homog {
        /// BARK structure holding every labelled point
        file: PathBuf,
        /// Comma-separated ids matched on both sides
        #[arg(long, value_delimiter = ',')]
        matched: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        wish1: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        wish2: Vec<String>,
        #[arg(long, default_value_t = 6)]
        depth: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        oracle: Option<PathBuf>,
    },
    /// Re-check a certificate
    Certify { file: PathBuf },
    /// Print what an oracle knows about one of its points
    Eval {
        log: PathBuf,
        /// Point id such as u3
        point: String,
        /// Dense index to evaluate the suitable function at
        #[arg(long)]
        index: Option<usize>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {err}")]
    Io { path: String, err: std::io::Error },
    #[error("{path}: {err}")]
    Parse { path: String, err: ParseError },
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Parse { .. } | CliError::Failure(_) => 1,
        }
    }
}

/// Runs the command line, writing reports to `out` and diagnostics to `err`.
/// Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli.cmd, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code()
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|err| CliError::Io {
        path: path.display().to_string(),
        err,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|err| CliError::Io {
        path: path.display().to_string(),
        err,
    })
}

fn load(path: &Path) -> Result<StructureFile, CliError> {
    parse_structure_file(&read(path)?).map_err(|err| CliError::Parse {
        path: path.display().to_string(),
        err,
    })
}

fn load_compact(path: &Option<PathBuf>) -> Result<Option<CompactPresentation>, CliError> {
    let Some(p) = path else { return Ok(None) };
    match load(p)? {
        StructureFile::Compact(k) => Ok(Some(k)),
        _ => Err(CliError::Usage(format!("{}: expected a COMPACT file", p.display()))),
    }
}

fn load_polish(path: &Option<PathBuf>) -> Result<Option<PolishPresentation>, CliError> {
    let Some(p) = path else { return Ok(None) };
    match load(p)? {
        StructureFile::Polish(z) => Ok(Some(z)),
        _ => Err(CliError::Usage(format!("{}: expected a POLISH file", p.display()))),
    }
}

fn need<T>(x: Option<T>, flag: &str) -> Result<T, CliError> {
    x.ok_or_else(|| CliError::Usage(format!("this file kind needs --{flag}")))
}

fn emit(out: &mut dyn Write, path: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => out
            .write_all(text.as_bytes())
            .map_err(|err| CliError::Io {
                path: "<stdout>".into(),
                err,
            }),
    }
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) {
    let _ = writeln!(out, "{}", line.as_ref());
}

fn report(out: &mut dyn Write, violations: Vec<String>) -> Result<i32, CliError> {
    if violations.is_empty() {
        say(out, "valid");
        return Ok(0);
    }
    for v in &violations {
        say(out, format!("violation: {v}"));
    }
    Err(CliError::Failure(format!("{} violation(s)", violations.len())))
}

fn dispatch(cmd: Cmd, out: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Cmd::Validate { file, layers } => validate(&file, &layers, out),
        Cmd::Amalgamate { b, c, a, out: dest, layers } => {
            let (b, c, a) = (load(&b)?, load(&c)?, load(&a)?);
            let text = amalgamate(b, c, a, &layers)?;
            emit(out, &dest, &text)?;
            Ok(0)
        }
        Cmd::JointEmbed { a, b, out: dest, layers } => {
            let text = joint_embed(load(&a)?, load(&b)?, &layers)?;
            emit(out, &dest, &text)?;
            Ok(0)
        }
        Cmd::Grow {
            log,
            steps,
            seed,
            out: dest,
            layers,
        } => {
            let o = grow(log.as_deref(), steps, seed, &layers)?;
            emit(out, &dest, &serialize(&StructureFile::Oracle(OracleLog::of(&o))))?;
            Ok(0)
        }
        Cmd::Embed {
            file,
            depth,
            seed,
            out: dest,
            oracle,
            layers,
        } => embed(&file, depth, seed, &dest, &oracle, &layers, out),
        Cmd::Homog {
            file,
            matched,
            wish1,
            wish2,
            depth,
            seed,
            out: dest,
            oracle,
        } => homog(&file, &matched, &wish1, &wish2, depth, seed, &dest, &oracle, out),
        Cmd::Certify { file } => match verify(&read(&file)?) {
            Ok(n) => {
                say(out, format!("certificate OK: {n} checks"));
                Ok(0)
            }
            Err(e) => Err(CliError::Failure(format!("certificate rejected: {e}"))),
        },
        Cmd::Eval { log, point, index } => eval(&log, &point, index, out),
    }
}

fn validate(file: &Path, layers: &Layers, out: &mut dyn Write) -> Result<i32, CliError> {
    let strs = |v: Vec<_>| v.into_iter().map(|x: crate::relational::KViolation| x.to_string()).collect();
    match load(file)? {
        StructureFile::K(s) => report(out, strs(validate_k(&s))),
        StructureFile::Bark(s) => match check_bar(&s) {
            Ok(()) => report(out, vec![]),
            Err(e) => report(out, vec![e.to_string()]),
        },
        StructureFile::C(s) => {
            let k = need(load_compact(&layers.compact)?, "compact")?;
            report(out, validate_c(&s, &k).iter().map(ToString::to_string).collect())
        }
        StructureFile::L(s) => {
            let z = need(load_polish(&layers.polish)?, "polish")?;
            match validate_l(&s, &z) {
                Ok(v) => report(out, v.iter().map(ToString::to_string).collect()),
                Err(e) => report(out, vec![e.to_string()]),
            }
        }
        StructureFile::Compact(_) | StructureFile::Polish(_) => report(out, vec![]),
        StructureFile::Oracle(log) => match log.replay() {
            Ok(o) => {
                let v = strs(validate_k(&o.snapshot()));
                say(out, format!("{} points, {} slots", o.len(), o.registry().len()));
                report(out, v)
            }
            Err(e) => report(out, vec![format!("replay: {e}")]),
        },
    }
}

fn match_ids(a: &FinMetric, b: &FinMetric, which: &str) -> Result<Vec<usize>, CliError> {
    (0..a.len())
        .map(|i| {
            b.index_of(a.id(i))
                .ok_or_else(|| CliError::Failure(format!("point {} of A missing from {which}", a.id(i))))
        })
        .collect()
}

fn amalgamate(b: StructureFile, c: StructureFile, a: StructureFile, layers: &Layers) -> Result<String, CliError> {
    let fail = |e: &dyn std::fmt::Display| CliError::Failure(e.to_string());
    Ok(match (b, c, a) {
        (StructureFile::K(b), StructureFile::K(c), StructureFile::K(a)) => {
            let w = |x: &StructureK, which| -> Result<EmbeddingK, CliError> {
                Ok(EmbeddingK {
                    phi: match_ids(&a.metric, &x.metric, which)?,
                    pi: EmbeddingK::identity(&a).pi,
                })
            };
            let (wab, wac) = (w(&b, "B")?, w(&c, "C")?);
            let res = amalgamate_k(&b, &c, &a, &wab, &wac).map_err(|e| fail(&e))?;
            serialize(&StructureFile::K(res.d))
        }
        (StructureFile::C(b), StructureFile::C(c), StructureFile::C(a)) => {
            let k = need(load_compact(&layers.compact)?, "compact")?;
            let wab = match_ids(&a.metric, &b.metric, "B")?;
            let wac = match_ids(&a.metric, &c.metric, "C")?;
            let (d, ..) = amalgamate_c(&b, &c, &a, &wab, &wac, &k).map_err(|e| fail(&e))?;
            serialize(&StructureFile::C(d))
        }
        (StructureFile::L(b), StructureFile::L(c), StructureFile::L(a)) => {
            let z = need(load_polish(&layers.polish)?, "polish")?;
            let wab = match_ids(&a.metric, &b.metric, "B")?;
            let wac = match_ids(&a.metric, &c.metric, "C")?;
            let (d, ..) = amalgamate_l(&b, &c, &a, &wab, &wac, &z).map_err(|e| fail(&e))?;
            serialize(&StructureFile::L(d))
        }
        _ => return Err(CliError::Usage("amalgamate needs three K, C or L files".into())),
    })
}

fn joint_embed(a: StructureFile, b: StructureFile, layers: &Layers) -> Result<String, CliError> {
    let fail = |e: &dyn std::fmt::Display| CliError::Failure(e.to_string());
    Ok(match (a, b) {
        (StructureFile::K(a), StructureFile::K(b)) => {
            serialize(&StructureFile::K(joint_embed_k(&a, &b).map_err(|e| fail(&e))?.d))
        }
        (StructureFile::C(a), StructureFile::C(b)) => {
            let k = need(load_compact(&layers.compact)?, "compact")?;
            serialize(&StructureFile::C(jep_c(&a, &b, &k).map_err(|e| fail(&e))?.0))
        }
        (StructureFile::L(a), StructureFile::L(b)) => {
            let z = need(load_polish(&layers.polish)?, "polish")?;
            serialize(&StructureFile::L(jep_l(&a, &b, &z).map_err(|e| fail(&e))?.0))
        }
        _ => return Err(CliError::Usage("joint-embed needs two K, C or L files".into())),
    })
}

fn fresh_oracle(seed: u64, layers: &Layers, l: Option<Rat>) -> Result<LimitOracle, CliError> {
    let mut o = LimitOracle::new(seed);
    if let Some(k) = load_compact(&layers.compact)? {
        o = o.with_compact(k);
    }
    if let Some(z) = load_polish(&layers.polish)? {
        let l = l.unwrap_or(Rat::ONE);
        o = o.with_polish(z, l).map_err(|e| CliError::Failure(e.to_string()))?;
    }
    Ok(o)
}

/// Each step picks a random existing point and a random distance to it; the
/// new point copies its dense index and takes the least suitable function.
fn grow(log: Option<&Path>, steps: usize, seed: u64, layers: &Layers) -> Result<LimitOracle, CliError> {
    let mut o = match log {
        Some(p) => match load(p)? {
            StructureFile::Oracle(l) => l.replay().map_err(|e| CliError::Failure(format!("replay: {e}")))?,
            _ => return Err(CliError::Usage(format!("{}: expected an ORACLE file", p.display()))),
        },
        None => fresh_oracle(seed, layers, None)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dense_count = o.polish().map(|(z, _)| z.len());
    for _ in 0..steps {
        let mut req = if o.is_empty() {
            GrowthRequest::default()
        } else {
            let b = rng.gen_range(0..o.len());
            let eta = Rat::new(rng.gen_range(1..=16), 8);
            let mut r = GrowthRequest::new(vec![b], vec![eta]);
            r.dense = o.dense(b);
            r
        };
        if req.dense.is_none() {
            req.dense = dense_count.map(|m| rng.gen_range(1..=m));
        }
        let new = o.len();
        let mut attempt = req.clone();
        if rng.gen_bool(0.5) {
            let unary: Vec<usize> = o.registry().iter().filter(|s| s.n == 1).map(|s| s.g).collect();
            let slot = match unary.len() {
                0 => SlotRef::Fresh(1),
                _ if rng.gen_bool(0.3) => SlotRef::Fresh(1),
                k => SlotRef::Global(1, unary[rng.gen_range(0..k)]),
            };
            let mut v = Rat::new(rng.gen_range(0..=8), 4);
            if let (SlotRef::Global(_, g), [b]) = (&slot, attempt.base.as_slice()) {
                // stay close to the base point's value
                let pb = o.value(1, *g, &[*b]).expect("registered");
                v = pb + Rat::new(rng.gen_range(0..=2), 8);
            }
            attempt.preds.push(PredRequest {
                slot,
                values: vec![(vec![new], v)],
            });
        }
        // a guessed value may clash with the existing ones; grow without it then
        if o.realize(attempt).is_err() {
            o.realize(req).map_err(|e| CliError::Failure(e.to_string()))?;
        }
    }
    Ok(o)
}

fn finish(
    cert: &Certificate,
    o: &LimitOracle,
    dest: &Option<PathBuf>,
    oracle: &Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    if let Some(p) = oracle {
        write_file(p, &serialize(&StructureFile::Oracle(OracleLog::of(o))))?;
    }
    let text = cert.emit();
    match dest {
        Some(p) => {
            write_file(p, &text)?;
            let failed = cert.failures().count();
            say(
                out,
                format!("{} checks, {} failed, {} oracle points", cert.checks.len(), failed, o.len()),
            );
        }
        None => emit(out, &None, &text)?,
    }
    if cert.all_hold() {
        Ok(0)
    } else {
        Err(CliError::Failure(format!("{} check(s) failed", cert.failures().count())))
    }
}

#[allow(clippy::too_many_arguments)]
fn embed(
    file: &Path,
    depth: u32,
    seed: u64,
    dest: &Option<PathBuf>,
    oracle: &Option<PathBuf>,
    layers: &Layers,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    if depth == 0 {
        return Err(CliError::Usage("--depth must be at least 1".into()));
    }
    let fail = |e: &dyn std::fmt::Display| CliError::Failure(e.to_string());
    match load(file)? {
        StructureFile::K(x) | StructureFile::Bark(x) => {
            let mut o = fresh_oracle(seed, &Layers { compact: None, polish: None }, None)?;
            let run = embed_structure_with_floor(&x, &mut o, depth, depth).map_err(|e| fail(&e))?;
            finish(&run.certificate, &o, dest, oracle, out)
        }
        StructureFile::C(x) => {
            need(layers.compact.as_ref(), "compact")?;
            let mut o = fresh_oracle(seed, &Layers { compact: layers.compact.clone(), polish: None }, None)?;
            let (_, cert) = embed_structure_c(&x, &mut o, depth).map_err(|e| fail(&e))?;
            finish(&cert, &o, dest, oracle, out)
        }
        StructureFile::L(x) => {
            need(layers.polish.as_ref(), "polish")?;
            let mut o = fresh_oracle(seed, &Layers { compact: None, polish: layers.polish.clone() }, Some(x.l))?;
            let (_, cert) = embed_structure_l(&x, &mut o, depth).map_err(|e| fail(&e))?;
            finish(&cert, &o, dest, oracle, out)
        }
        _ => Err(CliError::Usage("embed needs a K, BARK, C or L file".into())),
    }
}

fn labels(y: &StructureK, ids: &[String]) -> Result<Vec<usize>, CliError> {
    ids.iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            y.metric
                .index_of(s)
                .ok_or_else(|| CliError::Usage(format!("unknown point {s}")))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn homog(
    file: &Path,
    matched: &[String],
    wish1: &[String],
    wish2: &[String],
    depth: u32,
    seed: u64,
    dest: &Option<PathBuf>,
    oracle: &Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let y = match load(file)? {
        StructureFile::K(y) | StructureFile::Bark(y) => y,
        _ => return Err(CliError::Usage("homog needs a K or BARK file".into())),
    };
    let (m, w1, w2) = (labels(&y, matched)?, labels(&y, wish1)?, labels(&y, wish2)?);
    let mut o = LimitOracle::new(seed);
    let fail = |e: &dyn std::fmt::Display| CliError::Failure(e.to_string());
    // the two sides share the matched labels; each holds its own wishlist
    let floor = back_forth_floor([m.len() + w1.len(), m.len() + w2.len()], w1.len(), w2.len(), depth);
    let mut side = |own: &[usize]| -> Result<Side, CliError> {
        let lab: Vec<usize> = m.iter().chain(own).copied().collect();
        let run = embed_structure_with_floor(&restriction(&y, &lab), &mut o, depth, floor).map_err(|e| fail(&e))?;
        Ok(Side {
            points: run.points,
            labels: lab,
            slot_map: run.slot_map,
        })
    };
    let s1 = side(&w1)?;
    let s2 = side(&w2)?;
    let tol = Rat::pow2_neg(depth.saturating_sub(1));
    let run = extend_partial_iso(&y, s1, s2, &m, &w1, &w2, &mut o, depth, tol).map_err(|e| fail(&e))?;
    finish(&run.certificate, &o, dest, oracle, out)
}

fn eval(log: &Path, point: &str, index: Option<usize>, out: &mut dyn Write) -> Result<i32, CliError> {
    let o = match load(log)? {
        StructureFile::Oracle(l) => l.replay().map_err(|e| CliError::Failure(format!("replay: {e}")))?,
        _ => return Err(CliError::Usage("eval needs an ORACLE file".into())),
    };
    let u = o
        .metric()
        .index_of(point)
        .ok_or_else(|| CliError::Usage(format!("unknown point {point}")))?;
    say(out, format!("point {point}"));
    for info in o.registry() {
        if info.n == 1 {
            let v = o.value(1, info.g, &[u]).expect("registered");
            say(out, format!("p 1 {} {v}", info.g));
        }
    }
    if let (Some(k), Some(f)) = (o.compact(), o.suitable(u)) {
        say(out, format!("suit {f}"));
        if let Some(n) = index {
            let v = f.try_eval(k, n).map_err(|e| CliError::Usage(e.to_string()))?;
            say(out, format!("value {n} {v}"));
        }
    }
    if let Some(q) = o.dense(u) {
        say(out, format!("pz {q}"));
    }
    Ok(0)
}
