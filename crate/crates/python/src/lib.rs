//! Python bindings: the analysis pipeline, bug insertion, and differential
//! verification, with results returned as JSON strings.

use bugforge_core::frontend;
use bugforge_core::instrument::InstrClass;
use bugforge_core::interproc::VulnClass;
use bugforge_core::pipeline::{analyze_corpus, insert_bugs, PipelineConfig};
use bugforge_core::report;
use bugforge_core::verify::verify_variant;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

fn config_from(
    summaries: Vec<String>,
    max_depth: Option<usize>,
    max_paths: Option<usize>,
    sink_classes: Option<Vec<String>>,
    classes: Option<Vec<String>>,
) -> PyResult<PipelineConfig> {
    let mut cfg = PipelineConfig {
        summary_files: summaries.into_iter().map(PathBuf::from).collect(),
        ..PipelineConfig::default()
    };
    if let Some(d) = max_depth {
        cfg.max_depth = d;
    }
    if let Some(p) = max_paths {
        cfg.max_paths = p;
    }
    if let Some(list) = sink_classes {
        let mut set = BTreeSet::new();
        for item in list {
            let class = VulnClass::parse(&item)
                .ok_or_else(|| PyValueError::new_err(format!("unknown sink class `{item}`")))?;
            set.insert(class);
        }
        cfg.sink_classes = Some(set);
    }
    if let Some(list) = classes {
        let mut set = BTreeSet::new();
        for item in list {
            let class = InstrClass::parse(&item).ok_or_else(|| {
                PyValueError::new_err(format!("unknown instrumentation class `{item}`"))
            })?;
            set.insert(class);
        }
        cfg.instr_classes = Some(set);
    }
    Ok(cfg)
}

/// Parse one preprocessed C translation unit; returns a JSON summary with
/// the functions found and every skipped or opaque construct.
#[pyfunction]
#[pyo3(signature = (source, path="unit.c"))]
fn parse_unit(source: &str, path: &str) -> PyResult<String> {
    let unit = frontend::parse_unit(source, Path::new(path));
    let report = frontend::supported_subset_report(&unit);
    let value = serde_json::json!({
        "path": path,
        "functions": unit.functions.iter().map(|f| {
            serde_json::json!({
                "name": f.name,
                "parameters": f.parameters.iter().map(|p| {
                    serde_json::json!({"name": p.name, "ctype": p.ctype})
                }).collect::<Vec<_>>(),
                "start_line": f.span.start_line,
                "end_line": f.span.end_line,
            })
        }).collect::<Vec<_>>(),
        "skipped": report.iter().map(|(span, reason)| {
            serde_json::json!({"line": span.start_line, "reason": reason})
        }).collect::<Vec<_>>(),
    });
    Ok(value.to_string())
}

/// Run the full analysis over a corpus directory; returns the report JSON.
#[pyfunction]
#[pyo3(signature = (corpus_dir, summaries=vec![], max_depth=None, max_paths=None, sink_classes=None))]
fn analyze(
    corpus_dir: &str,
    summaries: Vec<String>,
    max_depth: Option<usize>,
    max_paths: Option<usize>,
    sink_classes: Option<Vec<String>>,
) -> PyResult<String> {
    let cfg = config_from(summaries, max_depth, max_paths, sink_classes, None)?;
    let analysis = analyze_corpus(Path::new(corpus_dir), &cfg)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    serde_json::to_string_pretty(&analysis.report)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Generate instrumented corpus variants (one inserted bug each) under
/// `out_dir`; returns the variant directories.
#[pyfunction]
#[pyo3(signature = (corpus_dir, out_dir, seed=1, count=1, summaries=vec![], classes=None))]
fn insert(
    corpus_dir: &str,
    out_dir: &str,
    seed: u64,
    count: usize,
    summaries: Vec<String>,
    classes: Option<Vec<String>>,
) -> PyResult<Vec<String>> {
    let cfg = config_from(summaries, None, None, None, classes)?;
    let variants = insert_bugs(Path::new(corpus_dir), Path::new(out_dir), &cfg, seed, count)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(variants.iter().map(|v| v.dir.display().to_string()).collect())
}

/// Build original and variant, run each input through both, and return the
/// per-input verdicts as JSON.
#[pyfunction]
#[pyo3(signature = (variant_dir, inputs_dir, original=None))]
fn verify(variant_dir: &str, inputs_dir: &str, original: Option<String>) -> PyResult<String> {
    let original_dir = match original {
        Some(dir) => PathBuf::from(dir),
        None => {
            let gt_path = Path::new(variant_dir).join("ground_truth.json");
            let text = std::fs::read_to_string(&gt_path)
                .map_err(|e| PyRuntimeError::new_err(format!("{}: {e}", gt_path.display())))?;
            let gt: report::GroundTruthFile = serde_json::from_str(&text)
                .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
            PathBuf::from(gt.corpus_root)
        }
    };
    let verdicts = verify_variant(Path::new(variant_dir), &original_dir, Path::new(inputs_dir))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    serde_json::to_string_pretty(&verdicts).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn bugforge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(parse_unit, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(insert, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
