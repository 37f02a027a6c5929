//! Line-oriented text format for CTMC and CTMDP models.
//!
//! ```text
//! ctmc 3            # or: ctmdp <n> <num_decisions>
//! good 2
//! bad 1             # optional
//! target 0          # optional; defaults to every transient state
//! rate 0 2 1.5      # ctmdp: rate <d> <i> <j> <v>
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::markov::model::{Ctmc, Ctmdp, RateMatrix};

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Ctmc(Ctmc),
    Ctmdp(Ctmdp),
}

enum Header {
    Ctmc(usize),
    Ctmdp(usize, usize),
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from {tok:?}")))
}

pub fn parse_model(text: &str) -> Result<Model> {
    let mut header: Option<Header> = None;
    let mut good = None;
    let mut bad = None;
    let mut targets: Vec<usize> = Vec::new();
    let mut rates: Vec<Vec<(usize, usize, f64)>> = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        let Some(&kw) = toks.first() else { continue };
        let args = &toks[1..];
        if header.is_none() {
            header = Some(match (kw, args.len()) {
                ("ctmc", 1) => Header::Ctmc(num(args[0], line, "state count")?),
                ("ctmdp", 2) => {
                    let d: usize = num(args[1], line, "decision count")?;
                    if d == 0 {
                        return Err(parse_err(line, "ctmdp needs at least one decision"));
                    }
                    Header::Ctmdp(num(args[0], line, "state count")?, d)
                }
                _ => return Err(parse_err(line, "expected header `ctmc <n>` or `ctmdp <n> <d>`")),
            });
            let nd = match header {
                Some(Header::Ctmdp(_, d)) => d,
                _ => 1,
            };
            rates = vec![Vec::new(); nd];
            continue;
        }
        let (n, is_mdp) = match header {
            Some(Header::Ctmc(n)) => (n, false),
            Some(Header::Ctmdp(n, _)) => (n, true),
            None => unreachable!(),
        };
        let state = |tok: &str| -> Result<usize> {
            let s: usize = num(tok, line, "state index")?;
            if s >= n {
                return Err(parse_err(line, format!("state {s} out of range 0..{n}")));
            }
            Ok(s)
        };
        match kw {
            "good" | "bad" => {
                if args.len() != 1 {
                    return Err(parse_err(line, format!("`{kw}` takes one state index")));
                }
                let slot = if kw == "good" { &mut good } else { &mut bad };
                if slot.is_some() {
                    return Err(parse_err(line, format!("`{kw}` given twice")));
                }
                *slot = Some(state(args[0])?);
            }
            "target" => {
                if args.is_empty() {
                    return Err(parse_err(line, "`target` needs at least one state"));
                }
                for a in args {
                    targets.push(state(a)?);
                }
            }
            "rate" => {
                let want = if is_mdp { 4 } else { 3 };
                if args.len() != want {
                    return Err(parse_err(line, format!("`rate` takes {want} arguments")));
                }
                let (d, rest) = if is_mdp {
                    let d: usize = num(args[0], line, "decision index")?;
                    if d >= rates.len() {
                        return Err(parse_err(line, format!("decision {d} out of range")));
                    }
                    (d, &args[1..])
                } else {
                    (0, args)
                };
                let i = state(rest[0])?;
                let j = state(rest[1])?;
                let v: f64 = num(rest[2], line, "rate")?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(parse_err(line, format!("rate must be positive, got {v}")));
                }
                if i == j {
                    return Err(parse_err(line, "self-loop rates are not allowed"));
                }
                rates[d].push((i, j, v));
            }
            other => return Err(parse_err(line, format!("unknown keyword `{other}`"))),
        }
    }

    let last = text.lines().count().max(1);
    let header = header.ok_or_else(|| parse_err(last, "missing header"))?;
    let good = good.ok_or_else(|| parse_err(last, "missing `good` line"))?;
    let n = match header {
        Header::Ctmc(n) | Header::Ctmdp(n, _) => n,
    };
    let mats = rates
        .into_iter()
        .map(|t| RateMatrix::from_triplets(n, t))
        .collect::<Result<Vec<_>>>()?;
    match header {
        Header::Ctmc(_) => Ok(Model::Ctmc(Ctmc::new(
            mats.into_iter().next().expect("one matrix"),
            good,
            bad,
            targets,
        )?)),
        Header::Ctmdp(..) => Ok(Model::Ctmdp(Ctmdp::new(mats, good, bad, targets)?)),
    }
}

fn write_roles(out: &mut String, good: usize, bad: Option<usize>, targets: &[usize]) {
    writeln!(out, "good {good}").unwrap();
    if let Some(b) = bad {
        writeln!(out, "bad {b}").unwrap();
    }
    let t: Vec<String> = targets.iter().map(|s| s.to_string()).collect();
    writeln!(out, "target {}", t.join(" ")).unwrap();
}

/// Floats are written with Rust's shortest round-trip representation, so
/// `parse_model(&write_ctmc(m))` reproduces `m` exactly.
pub fn write_ctmc(model: &Ctmc) -> String {
    let mut out = String::new();
    writeln!(out, "ctmc {}", model.n_states()).unwrap();
    write_roles(&mut out, model.good(), model.bad(), model.targets());
    for &(i, j, v) in model.rates().entries() {
        writeln!(out, "rate {i} {j} {v:?}").unwrap();
    }
    out
}

pub fn write_ctmdp(model: &Ctmdp) -> String {
    let mut out = String::new();
    writeln!(out, "ctmdp {} {}", model.n_states(), model.n_decisions()).unwrap();
    write_roles(&mut out, model.good(), model.bad(), model.targets());
    for d in 0..model.n_decisions() {
        for &(i, j, v) in model.rates(d).entries() {
            writeln!(out, "rate {d} {i} {j} {v:?}").unwrap();
        }
    }
    out
}

pub fn write_model(model: &Model) -> String {
    match model {
        Model::Ctmc(m) => write_ctmc(m),
        Model::Ctmdp(m) => write_ctmdp(m),
    }
}
