//! Line-oriented summary file format for external functions.
//!
//! One function per line:
//!
//! ```text
//! name [ret=<spec>] [p<i>=<Y|N|M>[,opt]...] [...=<Y|N|M>[,opt]...] [terminal]
//! ```
//!
//! where `<spec>` is `-` or `p<i>` (the return value carries that
//! parameter's data), and `opt` is one of `transfer=p<j>`, `transfer=ret`,
//! `source=<file|network|argv|stdin|env>`, or
//! `sink=<buffer_length|format_string|alloc_size|outbound_leak>`.
//! The `...` entry describes every variadic argument past the declared list.
//! `#` starts a comment; duplicate names: last wins, with a warning.

use super::{
    ArgSlot, FunctionSummary, ParamMod, SourceKind, SummaryOrigin, TransferFrom, VariadicSpec,
    VulnClass,
};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("summary parse error at line {line}: {message}")]
pub struct SummaryParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug)]
pub struct LoadedSummaries {
    pub map: BTreeMap<String, FunctionSummary>,
    pub warnings: Vec<String>,
}

pub fn parse_summaries(text: &str) -> Result<LoadedSummaries, SummaryParseError> {
    let mut map: BTreeMap<String, FunctionSummary> = BTreeMap::new();
    let mut warnings = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let name = parts.next().unwrap().to_string();
        let mut summary = FunctionSummary::external(&name);
        let mut params: BTreeMap<usize, ParamMod> = BTreeMap::new();

        for tok in parts {
            if tok == "terminal" {
                summary.terminal = true;
                continue;
            }
            let (head, opts) = split_opts(tok);
            let (slot, flag) = parse_head(head, lineno)?;
            match slot {
                Slot::Ret => {
                    match flag.as_str() {
                        "-" => {}
                        f if f.starts_with('p') => {
                            let i = parse_param_index(f, lineno)?;
                            summary.returns_param_data.insert(i);
                        }
                        other => {
                            return Err(SummaryParseError {
                                line: lineno,
                                message: format!("bad ret spec `{}`", other),
                            })
                        }
                    }
                    apply_opts(&mut summary, Slot::Ret, &opts, lineno)?;
                }
                Slot::Param(i) => {
                    params.insert(i, parse_mod(&flag, lineno)?);
                    apply_opts(&mut summary, Slot::Param(i), &opts, lineno)?;
                }
                Slot::Variadic => {
                    let spec = summary.variadic.get_or_insert_with(VariadicSpec::default);
                    spec.modified = parse_mod(&flag, lineno)?;
                    apply_opts(&mut summary, Slot::Variadic, &opts, lineno)?;
                }
            }
        }

        if let Some((&max, _)) = params.iter().next_back() {
            let mut v = vec![ParamMod::No; max + 1];
            for (i, m) in params {
                v[i] = m;
            }
            summary.param_modified = v;
        }

        if map.insert(name.clone(), summary).is_some() {
            warnings.push(format!("duplicate summary for `{}` (line {}): last wins", name, lineno));
        }
    }
    Ok(LoadedSummaries { map, warnings })
}

#[derive(Clone, Copy, PartialEq)]
enum Slot {
    Ret,
    Param(usize),
    Variadic,
}

fn split_opts(tok: &str) -> (&str, Vec<&str>) {
    let mut it = tok.split(',');
    let head = it.next().unwrap_or("");
    (head, it.collect())
}

fn parse_head(head: &str, line: usize) -> Result<(Slot, String), SummaryParseError> {
    let Some((lhs, rhs)) = head.split_once('=') else {
        return Err(SummaryParseError {
            line,
            message: format!("expected `<slot>=<flag>`, found `{}`", head),
        });
    };
    let slot = match lhs {
        "ret" => Slot::Ret,
        "..." => Slot::Variadic,
        p if p.starts_with('p') => Slot::Param(parse_param_index(p, line)?),
        other => {
            return Err(SummaryParseError { line, message: format!("unknown slot `{}`", other) })
        }
    };
    Ok((slot, rhs.to_string()))
}

fn parse_param_index(p: &str, line: usize) -> Result<usize, SummaryParseError> {
    p[1..].parse().map_err(|_| SummaryParseError {
        line,
        message: format!("bad parameter index `{}`", p),
    })
}

fn parse_mod(flag: &str, line: usize) -> Result<ParamMod, SummaryParseError> {
    match flag {
        "Y" => Ok(ParamMod::Yes),
        "N" => Ok(ParamMod::No),
        "M" => Ok(ParamMod::Maybe),
        other => Err(SummaryParseError {
            line,
            message: format!("bad modification flag `{}` (expected Y, N, or M)", other),
        }),
    }
}

fn parse_source_kind(s: &str, line: usize) -> Result<SourceKind, SummaryParseError> {
    match s {
        "file" => Ok(SourceKind::File),
        "network" => Ok(SourceKind::Network),
        "argv" => Ok(SourceKind::Argv),
        "stdin" => Ok(SourceKind::Stdin),
        "env" => Ok(SourceKind::Env),
        other => {
            Err(SummaryParseError { line, message: format!("unknown source kind `{}`", other) })
        }
    }
}

fn parse_vuln_class(s: &str, line: usize) -> Result<VulnClass, SummaryParseError> {
    match s {
        "buffer_length" => Ok(VulnClass::BufferLength),
        "format_string" => Ok(VulnClass::FormatString),
        "alloc_size" => Ok(VulnClass::AllocSize),
        "outbound_leak" => Ok(VulnClass::OutboundLeak),
        other => {
            Err(SummaryParseError { line, message: format!("unknown sink class `{}`", other) })
        }
    }
}

fn apply_opts(
    summary: &mut FunctionSummary,
    slot: Slot,
    opts: &[&str],
    line: usize,
) -> Result<(), SummaryParseError> {
    for opt in opts {
        let Some((key, value)) = opt.split_once('=') else {
            return Err(SummaryParseError {
                line,
                message: format!("expected `key=value` option, found `{}`", opt),
            });
        };
        match (key, slot) {
            ("source", Slot::Ret) => {
                let kind = parse_source_kind(value, line)?;
                summary.sources.push((ArgSlot::ReturnValue, kind));
            }
            ("source", Slot::Param(i)) => {
                let kind = parse_source_kind(value, line)?;
                summary.sources.push((ArgSlot::Param(i), kind));
            }
            ("source", Slot::Variadic) => {
                let kind = parse_source_kind(value, line)?;
                summary.variadic.get_or_insert_with(VariadicSpec::default).source = Some(kind);
            }
            ("sink", Slot::Param(i)) => {
                let class = parse_vuln_class(value, line)?;
                summary.sink_specs.push((i, class));
            }
            ("sink", Slot::Variadic) => {
                let class = parse_vuln_class(value, line)?;
                summary.variadic.get_or_insert_with(VariadicSpec::default).sink = Some(class);
            }
            ("transfer", Slot::Param(i)) => match value {
                "ret" => {
                    summary.returns_param_data.insert(i);
                }
                p if p.starts_with('p') => {
                    let to = parse_param_index(p, line)?;
                    summary.param_transfers.push((TransferFrom::Param(i), to));
                }
                other => {
                    return Err(SummaryParseError {
                        line,
                        message: format!("bad transfer target `{}`", other),
                    })
                }
            },
            ("transfer", Slot::Ret) => {
                let to = parse_param_index(value, line)?;
                summary.param_transfers.push((TransferFrom::ReturnValue, to));
            }
            ("transfer", Slot::Variadic) => match value {
                p if p.starts_with('p') => {
                    let to = parse_param_index(p, line)?;
                    summary
                        .variadic
                        .get_or_insert_with(VariadicSpec::default)
                        .transfer_to
                        .push(to);
                }
                other => {
                    return Err(SummaryParseError {
                        line,
                        message: format!("bad variadic transfer target `{}`", other),
                    })
                }
            },
            (k, _) => {
                return Err(SummaryParseError {
                    line,
                    message: format!("option `{}` not valid here", k),
                })
            }
        }
    }
    let _ = SummaryOrigin::External;
    Ok(())
}
