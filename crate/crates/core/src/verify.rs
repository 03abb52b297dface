//! Desk-scale differential verification of an instrumented variant.
//!
//! Both the original and the variant corpus are built with a small runtime
//! probe spliced in front of every documented sink statement. Each input is
//! fed to both binaries; identical filtered output and identical probe
//! observations mean the input is benign, probe values seen only by the
//! variant mean the disabled check let the input through to the sink.

use crate::frontend::{self, ExprKind};
use crate::report::GroundTruthFile;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};
use thiserror::Error;

const PROBE_PREFIX: &str = "__BUGFORGE_SINK__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Same behavior and same sink observations on this input.
    BenignIdentical,
    /// Behavior differs but the sink saw nothing new.
    DivergenceDetected,
    /// The variant's sink consumed data the original never let through.
    SinkViolation,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputVerdict {
    pub input: PathBuf,
    pub verdict: Verdict,
    pub original_status: i32,
    pub variant_status: i32,
    pub original_probes: Vec<String>,
    pub variant_probes: Vec<String>,
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("build failure:\n{output}")]
    BuildFailure { output: String },
    #[error("no C compiler found (tried cc, gcc, clang)")]
    NoCompiler,
    #[error("missing or invalid ground truth: {0}")]
    GroundTruth(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> VerifyError + '_ {
    move |e| VerifyError::Io { path: path.to_path_buf(), source: e }
}

/// Compare an instrumented variant against the original corpus on every
/// file in `inputs_dir` (passed as argv[1] and on stdin).
pub fn verify_variant(
    variant_dir: &Path,
    original_dir: &Path,
    inputs_dir: &Path,
) -> Result<Vec<InputVerdict>, VerifyError> {
    let gt_path = variant_dir.join("ground_truth.json");
    let gt_text = std::fs::read_to_string(&gt_path).map_err(io_err(&gt_path))?;
    let gt: GroundTruthFile =
        serde_json::from_str(&gt_text).map_err(|e| VerifyError::GroundTruth(e.to_string()))?;

    let cc = find_compiler().ok_or(VerifyError::NoCompiler)?;
    let work = tempfile::tempdir().map_err(io_err(variant_dir))?;
    let original_bin = build_with_probes(&cc, original_dir, &gt, work.path(), "original")?;
    let variant_bin = build_with_probes(&cc, variant_dir, &gt, work.path(), "variant")?;

    let mut inputs: Vec<PathBuf> = std::fs::read_dir(inputs_dir)
        .map_err(io_err(inputs_dir))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    inputs.sort();

    let mut out = Vec::new();
    for input in inputs {
        let orig = run_once(&original_bin, &input)?;
        let vari = run_once(&variant_bin, &input)?;

        let new_probes: Vec<&String> =
            vari.probes.iter().filter(|p| !orig.probes.contains(p)).collect();
        let verdict = if !new_probes.is_empty() {
            Verdict::SinkViolation
        } else if orig.stdout != vari.stdout
            || orig.status != vari.status
            || orig.probes != vari.probes
        {
            Verdict::DivergenceDetected
        } else {
            Verdict::BenignIdentical
        };
        out.push(InputVerdict {
            input,
            verdict,
            original_status: orig.status,
            variant_status: vari.status,
            original_probes: orig.probes,
            variant_probes: vari.probes,
        });
    }
    Ok(out)
}

fn find_compiler() -> Option<String> {
    for cand in ["cc", "gcc", "clang"] {
        if Command::new(cand)
            .arg("--version")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map(|s| s.success())
            .unwrap_or(false)
        {
            return Some(cand.to_string());
        }
    }
    None
}

/// Copy a corpus into the work dir with a probe call spliced ahead of each
/// documented sink statement, then compile everything into one binary.
fn build_with_probes(
    cc: &str,
    corpus_dir: &Path,
    gt: &GroundTruthFile,
    work: &Path,
    tag: &str,
) -> Result<PathBuf, VerifyError> {
    let src_dir = work.join(tag);
    std::fs::create_dir_all(&src_dir).map_err(io_err(&src_dir))?;

    let mut files = Vec::new();
    collect_c(corpus_dir, &mut files)?;
    files.sort();
    if files.is_empty() {
        return Err(VerifyError::BuildFailure {
            output: format!("no C sources under {}", corpus_dir.display()),
        });
    }

    let mut compiled = Vec::new();
    for (i, f) in files.iter().enumerate() {
        let text = frontend::read_source(f).map_err(io_err(f))?;
        let name = f
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| format!("unit{}.c", i));
        let instrumented = splice_probes(&text, &name, gt);
        let dest = src_dir.join(format!("{:03}_{}", i, name));
        std::fs::write(&dest, instrumented).map_err(io_err(&dest))?;
        compiled.push(dest);
    }

    let bin = work.join(format!("{}.bin", tag));
    let output = Command::new(cc)
        .arg("-std=gnu89")
        .arg("-w")
        .arg("-O0")
        .arg("-o")
        .arg(&bin)
        .args(&compiled)
        .output()
        .map_err(|e| VerifyError::BuildFailure { output: e.to_string() })?;
    if !output.status.success() {
        return Err(VerifyError::BuildFailure {
            output: format!(
                "{}\n{}",
                String::from_utf8_lossy(&output.stdout),
                String::from_utf8_lossy(&output.stderr)
            ),
        });
    }
    Ok(bin)
}

fn collect_c(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), VerifyError> {
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path();
        if path.is_dir() {
            collect_c(&path, out)?;
        } else if matches!(path.extension().and_then(|e| e.to_str()), Some("c") | Some("i")) {
            out.push(path);
        }
    }
    Ok(())
}

/// Wrap each documented sink statement in a block that first reports the
/// sensitive argument's value. The sink is located structurally (the n-th
/// call to the callee in the file), so byte shifts between original and
/// variant do not matter.
fn splice_probes(text: &str, file_name: &str, gt: &GroundTruthFile) -> String {
    let unit = frontend::parse_unit(text, Path::new(file_name));
    // (callee, occurrence ordinal, argument text, numeric) per sink.
    let mut wanted: Vec<(String, usize, String, bool)> = Vec::new();
    for rec in &gt.records {
        let rec_file = Path::new(&rec.sink_ref.file)
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_default();
        if rec_file == file_name {
            // Length-like arguments are probed by value; pointer-valued
            // ones only record that the sink was reached, since addresses
            // differ from process to process.
            let numeric = matches!(rec.vuln_class.as_str(), "buffer_length" | "alloc_size");
            wanted.push((
                rec.sink_ref.callee.clone(),
                rec.sink_ref.occurrence,
                rec.sink_ref.arg_text.clone(),
                numeric,
            ));
        }
    }
    if wanted.is_empty() {
        return text.to_string();
    }

    // Find the byte span of each call statement, counting occurrences per
    // callee across the whole file in source order.
    let mut call_stmts: Vec<(usize, usize, String)> = Vec::new(); // (start, end, callee)
    for f in &unit.functions {
        frontend::visit_stmts(&f.body, &mut |s| {
            let exprs: Vec<&frontend::Expr> = match &s.kind {
                frontend::StmtKind::Expr(e) => vec![e],
                frontend::StmtKind::Decl(ds) => ds.iter().filter_map(|d| d.init.as_ref()).collect(),
                frontend::StmtKind::Return(Some(e)) => vec![e],
                _ => Vec::new(),
            };
            for e in exprs {
                let mut calls = Vec::new();
                frontend::collect_calls(e, &mut calls);
                for c in calls {
                    if let ExprKind::Call { callee, .. } = &c.kind {
                        if let ExprKind::Ident(name) = &callee.kind {
                            call_stmts.push((s.span.byte_start, s.span.byte_end, name.clone()));
                        }
                    }
                }
            }
        });
    }
    call_stmts.sort();
    call_stmts.dedup();

    let mut insertions: Vec<(usize, usize, String)> = Vec::new();
    for (callee, occurrence, arg_text, numeric) in &wanted {
        let mut idx = 0usize;
        for (start, end, name) in &call_stmts {
            if name != callee {
                continue;
            }
            if idx == *occurrence {
                let stmt = &text[*start..*end];
                // The flush keeps the observation even when the sink then
                // crashes the process.
                let probe = if *numeric {
                    format!(
                        "{{ printf(\"{} %ld\\n\", (long)({})); fflush(0); {} }}",
                        PROBE_PREFIX, arg_text, stmt
                    )
                } else {
                    format!("{{ printf(\"{} 1\\n\"); fflush(0); {} }}", PROBE_PREFIX, stmt)
                };
                insertions.push((*start, *end, probe));
                break;
            }
            idx += 1;
        }
    }
    insertions.sort();
    insertions.dedup();

    let mut out = String::with_capacity(text.len() + 128);
    let mut pos = 0usize;
    for (start, end, replacement) in insertions {
        if start < pos {
            continue;
        }
        out.push_str(&text[pos..start]);
        out.push_str(&replacement);
        pos = end;
    }
    out.push_str(&text[pos..]);
    out
}

struct RunResult {
    status: i32,
    stdout: Vec<String>,
    probes: Vec<String>,
}

fn run_once(bin: &Path, input: &Path) -> Result<RunResult, VerifyError> {
    let stdin_file = std::fs::File::open(input).map_err(io_err(input))?;
    let mut child = Command::new(bin)
        .arg(input)
        .stdin(Stdio::from(stdin_file))
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(io_err(bin))?;

    let deadline = Instant::now() + Duration::from_secs(10);
    let status = loop {
        match child.try_wait().map_err(io_err(bin))? {
            Some(status) => break status,
            None if Instant::now() > deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(RunResult { status: -99, stdout: Vec::new(), probes: Vec::new() });
            }
            None => std::thread::sleep(Duration::from_millis(5)),
        }
    };
    let mut raw = String::new();
    use std::io::Read;
    if let Some(mut s) = child.stdout.take() {
        let _ = s.read_to_string(&mut raw);
    }

    let mut stdout = Vec::new();
    let mut probes = Vec::new();
    for line in raw.lines() {
        if let Some(rest) = line.strip_prefix(PROBE_PREFIX) {
            probes.push(rest.trim().to_string());
        } else {
            stdout.push(line.to_string());
        }
    }
    let code = status.code().unwrap_or_else(|| {
        // Killed by a signal: encode as negative for comparison purposes.
        #[cfg(unix)]
        {
            use std::os::unix::process::ExitStatusExt;
            -(status.signal().unwrap_or(98))
        }
        #[cfg(not(unix))]
        {
            -98
        }
    });
    Ok(RunResult { status: code, stdout, probes })
}
