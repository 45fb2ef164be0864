//! Line-oriented circuit files.
//!
//! ```text
//! # Bell pair
//! qubits 2
//! observable ZZ
//! noise depolarizing p=0.05 qubits=0 placement=end
//! cce epsilon=0.1
//! H 0
//! CNOT 0,1
//! RY(pi/4) q1
//! ```
//!
//! `qubits` must come before anything else. `observable` takes `default`
//! (`Z` on every qubit), a Pauli string of length `n`, or any other token,
//! which is handed to the caller's resolver (typically a matrix file path).

use crate::gates::GateLabel;
use crate::measure::Observable;
use crate::noise::{ChannelKind, NoiseSpec, Placement, QubitSet};
use crate::{Error, Result};

use super::Circuit;

/// Maps an `observable` argument that is neither `default` nor a Pauli
/// string to an observable.
pub type ObservableResolver<'a> = dyn Fn(&str) -> std::result::Result<Observable, String> + 'a;

struct Token<'a> {
    text: &'a str,
    column: usize,
}

/// Splits on whitespace outside parentheses, keeping 1-based columns.
fn tokens(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start: Option<usize> = None;
    for (i, ch) in line.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            _ => {}
        }
        if ch.is_whitespace() && depth == 0 {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &line[s..i],
                    column: line[..s].chars().count() + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &line[s..],
            column: line[..s].chars().count() + 1,
        });
    }
    out
}

fn parse_qubit(text: &str) -> Option<usize> {
    let digits = text.strip_prefix(['q', 'Q']).unwrap_or(text);
    digits.parse().ok()
}

fn parse_qubit_list(text: &str, line: usize, column: usize) -> Result<Vec<usize>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            parse_qubit(s.trim())
                .ok_or_else(|| Error::parse(line, column, format!("bad qubit index `{s}`")))
        })
        .collect()
}

fn key_values<'a>(
    toks: &'a [Token<'a>],
    line: usize,
) -> Result<Vec<(&'a str, &'a str, usize)>> {
    toks.iter()
        .map(|t| {
            t.text
                .split_once('=')
                .map(|(k, v)| (k, v, t.column))
                .ok_or_else(|| Error::parse(line, t.column, format!("expected key=value, got `{}`", t.text)))
        })
        .collect()
}

fn parse_number(text: &str, line: usize, column: usize) -> Result<f64> {
    crate::gates::parse_angle(text)
        .ok_or_else(|| Error::parse(line, column, format!("bad number `{text}`")))
}

pub(super) fn parse(text: &str, resolver: Option<&ObservableResolver<'_>>) -> Result<Circuit> {
    let mut circuit: Option<Circuit> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("");
        let toks = tokens(line);
        let Some(head) = toks.first() else { continue };
        let keyword = head.text.to_ascii_lowercase();

        if keyword == "qubits" {
            if circuit.is_some() {
                return Err(Error::parse(line_no, head.column, "duplicate `qubits` header"));
            }
            let arg = toks
                .get(1)
                .ok_or_else(|| Error::parse(line_no, head.column, "`qubits` needs a count"))?;
            let n: usize = arg
                .text
                .parse()
                .map_err(|_| Error::parse(line_no, arg.column, format!("bad qubit count `{}`", arg.text)))?;
            if let Some(extra) = toks.get(2) {
                return Err(Error::parse(line_no, extra.column, "unexpected token"));
            }
            circuit = Some(
                Circuit::new(n).map_err(|e| Error::parse(line_no, arg.column, e.to_string()))?,
            );
            continue;
        }

        let c = circuit.as_mut().ok_or_else(|| {
            Error::parse(line_no, head.column, "the `qubits N` header must come first")
        })?;

        match keyword.as_str() {
            "observable" => {
                let arg = toks.get(1).ok_or_else(|| {
                    Error::parse(line_no, head.column, "`observable` needs an argument")
                })?;
                if let Some(extra) = toks.get(2) {
                    return Err(Error::parse(line_no, extra.column, "unexpected token"));
                }
                let fail = |msg: String| Error::parse(line_no, arg.column, msg);
                let obs = if arg.text.eq_ignore_ascii_case("default") {
                    Observable::z_all(c.n_qubits()).map_err(|e| fail(e.to_string()))?
                } else if arg.text.len() == c.n_qubits()
                    && arg.text.chars().all(|ch| "IXYZixyz".contains(ch))
                {
                    Observable::pauli_string(&arg.text.to_ascii_uppercase())
                        .map_err(|e| fail(e.to_string()))?
                } else if let Some(resolve) = resolver {
                    resolve(arg.text)
                        .map_err(fail)?
                        .named(arg.text)
                } else {
                    return Err(fail(format!(
                        "`{}` is not a Pauli string on {} qubits",
                        arg.text,
                        c.n_qubits()
                    )));
                };
                if arg.text.eq_ignore_ascii_case("default") {
                    c.observable = None;
                } else {
                    c.set_observable(obs).map_err(|e| fail(e.to_string()))?;
                }
            }
            "noise" => {
                let kind_tok = toks
                    .get(1)
                    .ok_or_else(|| Error::parse(line_no, head.column, "`noise` needs a channel"))?;
                let kind: ChannelKind = kind_tok
                    .text
                    .parse()
                    .map_err(|e: Error| Error::parse(line_no, kind_tok.column, e.to_string()))?;
                let mut p = None;
                let mut qubits = QubitSet::All;
                let mut placement = Placement::Each;
                for (key, value, column) in key_values(&toks[2..], line_no)? {
                    match key {
                        "p" => p = Some(parse_number(value, line_no, column)?),
                        "qubits" => {
                            qubits = if value.eq_ignore_ascii_case("all") {
                                QubitSet::All
                            } else {
                                let qs = parse_qubit_list(value, line_no, column)?;
                                crate::linalg::validate_targets(&qs, c.n_qubits())
                                    .map_err(|e| Error::parse(line_no, column, e.to_string()))?;
                                QubitSet::List(qs)
                            }
                        }
                        "placement" | "at" => {
                            placement = match value {
                                "each" => Placement::Each,
                                "end" => Placement::End,
                                _ => {
                                    return Err(Error::parse(
                                        line_no,
                                        column,
                                        format!("placement must be `each` or `end`, got `{value}`"),
                                    ))
                                }
                            }
                        }
                        _ => {
                            return Err(Error::parse(line_no, column, format!("unknown key `{key}`")))
                        }
                    }
                }
                let p = p.ok_or_else(|| Error::parse(line_no, head.column, "`noise` needs p=..."))?;
                let spec = NoiseSpec::new(kind, p)
                    .map_err(|e| Error::parse(line_no, head.column, e.to_string()))?
                    .on(qubits)
                    .at(placement);
                c.noise.channels.push(spec);
            }
            "cce" => {
                let kv = key_values(&toks[1..], line_no)?;
                match kv.as_slice() {
                    [("epsilon", value, column)] => {
                        let eps = parse_number(value, line_no, *column)?;
                        c.noise.cce_epsilon = eps;
                    }
                    _ => {
                        return Err(Error::parse(line_no, head.column, "expected `cce epsilon=<value>`"))
                    }
                }
            }
            _ => {
                let label: GateLabel = head
                    .text
                    .parse()
                    .map_err(|e: Error| Error::parse(line_no, head.column, e.to_string()))?;
                let rest = &toks[1..];
                if rest.is_empty() {
                    return Err(Error::parse(line_no, head.column, "gate has no targets"));
                }
                let mut targets = Vec::new();
                for t in rest {
                    targets.extend(parse_qubit_list(t.text, line_no, t.column)?);
                }
                let column = rest[0].column;
                c.push_label(&label, &targets)
                    .map_err(|e| Error::parse(line_no, column, e.to_string()))?;
            }
        }
    }
    circuit.ok_or_else(|| Error::parse(1, 1, "missing `qubits N` header"))
}

pub(super) fn write(c: &Circuit) -> String {
    let mut out = format!("qubits {}\n", c.n_qubits());
    if let Some(obs) = &c.observable {
        match obs.name() {
            Some(name) => out.push_str(&format!("observable {name}\n")),
            None => out.push_str("# observable: unnamed matrix, not serialized\n"),
        }
    }
    for spec in &c.noise.channels {
        let qubits = match &spec.qubits {
            QubitSet::All => "all".to_string(),
            QubitSet::List(qs) => join(qs),
        };
        let placement = match spec.placement {
            Placement::Each => "each",
            Placement::End => "end",
        };
        out.push_str(&format!(
            "noise {} p={} qubits={qubits} placement={placement}\n",
            spec.kind, spec.p
        ));
    }
    if c.noise.cce_epsilon != 0.0 {
        out.push_str(&format!("cce epsilon={}\n", c.noise.cce_epsilon));
    }
    for op in &c.ops {
        out.push_str(&format!("{} {}\n", op.gate.label(), join(&op.targets)));
    }
    out
}

fn join(qs: &[usize]) -> String {
    qs.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}
