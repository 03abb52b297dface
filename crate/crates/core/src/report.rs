//! Corpus metrics and machine-readable persistence.
//!
//! `report.json` summarizes one analysis run; `ground_truth.json` documents
//! every inserted bug with its full source-to-sink provenance. Both are
//! emitted with stable field and element ordering so identical inputs
//! produce identical bytes. Wall-clock timings are kept out of the files
//! unless explicitly requested, for the same reason.

use crate::cpg::CodePropertyGraph;
use crate::guards::GuardSite;
use crate::instrument::{GroundTruthRecord, InstrumentationPlan};
use crate::interproc::ArgSlot;
use crate::taint::{DataFlowPath, SinkSite, SourceSinkPair, SourceSite};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteDigest {
    pub file: String,
    pub line: u32,
    pub function: String,
    pub callee: String,
    /// Parameter index or "return".
    pub slot: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardDigest {
    pub file: String,
    pub line: u32,
    pub condition: String,
    pub guarded_var: String,
    pub classification: String,
    pub polarity: String,
    pub evidence: Vec<String>,
    pub bugdoorable: bool,
    pub skip_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopDigest {
    pub file: String,
    pub line: u32,
    pub function: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDigest {
    pub hops: Vec<HopDigest>,
    pub hop_vars: Vec<String>,
    pub crossed_functions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDigest {
    pub source: SiteDigest,
    pub sink: SiteDigest,
    pub vuln_class: String,
    pub path_count: usize,
    /// Lowered confidence when any path leans on a maybe-modified write.
    pub confidence: String,
    pub guards: Vec<GuardDigest>,
    pub sanitizations: Vec<GuardDigest>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub import_ms: u64,
    pub intraprocedural_ms: u64,
    pub augment_interprocedural_ms: u64,
    pub find_paths_ms: u64,
    pub guards_ms: u64,
    pub total_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub schema_version: u32,
    pub lines_of_code: usize,
    pub sources_found: usize,
    pub sinks_found: usize,
    pub unique_pairs: usize,
    pub dataflow_paths: usize,
    /// Path counts over-approximate runtime flows and unique pairs
    /// under-approximate them; the real number sits in between.
    pub path_count_caveat: String,
    pub truncation_flags: Vec<String>,
    pub per_pair: Vec<PairDigest>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<PhaseTimings>,
}

/// Non-blank, non-comment source lines after preprocessing; line markers
/// and directive residue do not count.
pub fn count_loc(source: &str) -> usize {
    let mut count = 0usize;
    let mut in_block_comment = false;
    for line in source.lines() {
        let mut t = line.trim();
        if in_block_comment {
            match t.find("*/") {
                Some(i) => {
                    t = t[i + 2..].trim();
                    in_block_comment = false;
                }
                None => continue,
            }
        }
        // Strip block comments opening on this line.
        let mut stripped = String::new();
        let mut rest = t;
        loop {
            match rest.find("/*") {
                Some(i) => {
                    stripped.push_str(&rest[..i]);
                    match rest[i + 2..].find("*/") {
                        Some(j) => rest = &rest[i + 2 + j + 2..],
                        None => {
                            in_block_comment = true;
                            rest = "";
                        }
                    }
                }
                None => {
                    stripped.push_str(rest);
                    break;
                }
            }
        }
        let t = stripped.split("//").next().unwrap_or("").trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        count += 1;
    }
    count
}

fn slot_string(slot: &ArgSlot) -> String {
    match slot {
        ArgSlot::Param(i) => i.to_string(),
        ArgSlot::ReturnValue => "return".to_string(),
    }
}

pub fn source_digest(graph: &CodePropertyGraph, s: &SourceSite) -> SiteDigest {
    let n = graph.node(s.call_node);
    SiteDigest {
        file: n.span.file.display().to_string(),
        line: n.span.start_line,
        function: n.function.clone(),
        callee: s.callee.clone(),
        slot: slot_string(&s.controlled_arg),
        detail: s.source_kind.as_str().to_string(),
    }
}

pub fn sink_digest(graph: &CodePropertyGraph, s: &SinkSite) -> SiteDigest {
    let n = graph.node(s.call_node);
    SiteDigest {
        file: n.span.file.display().to_string(),
        line: n.span.start_line,
        function: n.function.clone(),
        callee: s.callee.clone(),
        slot: s.sensitive_arg_index.to_string(),
        detail: s.vuln_class.as_str().to_string(),
    }
}

pub fn guard_digest(
    graph: &CodePropertyGraph,
    g: &GuardSite,
    bugdoorable: bool,
    skip_reason: Option<String>,
) -> GuardDigest {
    let n = graph.node(g.condition_node);
    GuardDigest {
        file: n.span.file.display().to_string(),
        line: n.span.start_line,
        condition: graph.span_text(g.condition_node).to_string(),
        guarded_var: g.guarded_var.to_string(),
        classification: format!("{:?}", g.classification),
        polarity: format!("{:?}", g.polarity),
        evidence: g.abort_evidence.iter().map(|e| format!("{:?}", e)).collect(),
        bugdoorable,
        skip_reason,
    }
}

pub fn path_digest(graph: &CodePropertyGraph, p: &DataFlowPath) -> PathDigest {
    PathDigest {
        hops: p
            .hops
            .iter()
            .map(|&n| {
                let node = graph.node(n);
                HopDigest {
                    file: node.span.file.display().to_string(),
                    line: node.span.start_line,
                    function: node.function.clone(),
                    text: graph.span_text(n).chars().take(60).collect(),
                }
            })
            .collect(),
        hop_vars: p.hop_vars.iter().map(|v| v.to_string()).collect(),
        crossed_functions: p.crossed_functions.clone(),
    }
}

/// Inputs per pair needed for the report: the classified guards and
/// sanitizations discovered on its corridors.
pub struct PairAnalysis {
    pub pair: SourceSinkPair,
    pub guards: Vec<(GuardSite, bool, Option<String>)>,
    pub sanitizations: Vec<GuardSite>,
    pub maybe_based: bool,
}

/// Assemble the corpus report. `unique_pairs` counts distinct connected
/// sources summed per sink; `dataflow_paths` counts every traced path.
pub fn compute_metrics(
    graph: &CodePropertyGraph,
    lines_of_code: usize,
    sources_found: usize,
    sinks_found: usize,
    pairs: &[PairAnalysis],
    truncation_flags: Vec<String>,
    warnings: Vec<String>,
    timings: Option<PhaseTimings>,
) -> CorpusReport {
    let dataflow_paths = pairs.iter().map(|p| p.pair.paths.len()).sum();
    CorpusReport {
        schema_version: SCHEMA_VERSION,
        lines_of_code,
        sources_found,
        sinks_found,
        unique_pairs: pairs.len(),
        dataflow_paths,
        path_count_caveat: "path counts are an upper bound on runtime data flows; \
                            unique source-sink pairs are a lower bound"
            .to_string(),
        truncation_flags,
        per_pair: pairs
            .iter()
            .map(|pa| PairDigest {
                source: source_digest(graph, &pa.pair.source),
                sink: sink_digest(graph, &pa.pair.sink),
                vuln_class: pa.pair.sink.vuln_class.as_str().to_string(),
                path_count: pa.pair.paths.len(),
                confidence: if pa.maybe_based { "maybe".into() } else { "definite".into() },
                guards: pa
                    .guards
                    .iter()
                    .map(|(g, b, r)| guard_digest(graph, g, *b, r.clone()))
                    .collect(),
                sanitizations: pa
                    .sanitizations
                    .iter()
                    .map(|g| guard_digest(graph, g, false, Some("sanitization_not_covered".into())))
                    .collect(),
            })
            .collect(),
        warnings,
        timings,
    }
}

// ---------------------------------------------------------------------
// Ground truth serialization
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteDigest {
    pub file: String,
    pub byte_start: usize,
    pub byte_end: usize,
    pub original: String,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDigest {
    pub class: String,
    pub variant_id: usize,
    pub rng_seed: u64,
    pub rewrites: Vec<RewriteDigest>,
}

/// Locator for the sink statement that survives byte shifts: the
/// `occurrence`-th call to `callee` in `file`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkRef {
    pub file: String,
    pub line: u32,
    pub callee: String,
    pub arg_index: usize,
    pub arg_text: String,
    pub occurrence: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthJson {
    pub vuln_class: String,
    pub source: SiteDigest,
    pub sink: SiteDigest,
    pub sink_ref: SinkRef,
    pub chosen_path: PathDigest,
    pub guard: Option<GuardDigest>,
    pub instrumentation: PlanDigest,
    pub original_snippet: String,
    pub rewritten_snippet: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub schema_version: u32,
    pub seed: u64,
    pub corpus_root: String,
    pub records: Vec<GroundTruthJson>,
}

fn plan_digest(plan: &InstrumentationPlan) -> PlanDigest {
    PlanDigest {
        class: plan.class.as_str().to_string(),
        variant_id: plan.variant_id,
        rng_seed: plan.rng_seed,
        rewrites: plan
            .rewrites
            .iter()
            .map(|r| RewriteDigest {
                file: r.file.display().to_string(),
                byte_start: r.byte_start,
                byte_end: r.byte_end,
                original: r.original.clone(),
                replacement: r.replacement.clone(),
            })
            .collect(),
    }
}

/// The occurrence index of this sink's call among calls to the same callee
/// in the same file, in node order. Stable under byte shifts.
pub fn sink_occurrence(graph: &CodePropertyGraph, sink: &SinkSite) -> usize {
    let target = graph.node(sink.call_node);
    let mut idx = 0usize;
    for n in &graph.nodes {
        if n.span.file != target.span.file {
            continue;
        }
        if !n.calls.iter().any(|c| c.callee.as_deref() == Some(sink.callee.as_str())) {
            continue;
        }
        if n.id == sink.call_node {
            return idx;
        }
        idx += 1;
    }
    idx
}

pub fn ground_truth_json(graph: &CodePropertyGraph, rec: &GroundTruthRecord) -> GroundTruthJson {
    let sink = &rec.pair.sink;
    let sink_node = graph.node(sink.call_node);
    let arg_text = sink_arg_text(graph, sink).unwrap_or_default();
    GroundTruthJson {
        vuln_class: rec.vuln_class.as_str().to_string(),
        source: source_digest(graph, &rec.pair.source),
        sink: sink_digest(graph, sink),
        sink_ref: SinkRef {
            file: sink_node.span.file.display().to_string(),
            line: sink_node.span.start_line,
            callee: sink.callee.clone(),
            arg_index: sink.sensitive_arg_index,
            arg_text,
            occurrence: sink_occurrence(graph, sink),
        },
        chosen_path: path_digest(graph, &rec.chosen_path),
        guard: rec.guard.as_ref().map(|g| guard_digest(graph, g, true, None)),
        instrumentation: plan_digest(&rec.plan),
        original_snippet: rec.original_snippet.clone(),
        rewritten_snippet: rec.rewritten_snippet.clone(),
    }
}

/// Text of the sensitive argument expression at the sink call.
pub fn sink_arg_text(graph: &CodePropertyGraph, sink: &SinkSite) -> Option<String> {
    let node = graph.node(sink.call_node);
    let src = graph.source_of(&node.function)?;
    for call in &node.calls {
        if call.callee.as_deref() != Some(sink.callee.as_str()) {
            continue;
        }
        if let Some(arg) = call.args.get(sink.sensitive_arg_index) {
            return Some(arg.span.slice(src).to_string());
        }
    }
    None
}

/// Write pretty JSON atomically (temp file plus rename).
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), ReportError> {
    let text = serde_json::to_string_pretty(value).expect("serializable report types");
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text.as_bytes())
        .map_err(|e| ReportError::Io { path: tmp.clone(), source: e })?;
    std::fs::rename(&tmp, path).map_err(|e| ReportError::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

/// Persist `report.json` and `ground_truth.json` under `dir`.
pub fn emit_json(
    report: &CorpusReport,
    ground_truths: &GroundTruthFile,
    dir: &Path,
) -> Result<(), ReportError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| ReportError::Io { path: dir.to_path_buf(), source: e })?;
    write_json(report, &dir.join("report.json"))?;
    write_json(ground_truths, &dir.join("ground_truth.json"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loc_counting_rules() {
        let src = "# 1 \"x.c\"\nint a;\n\n/* comment\nstill comment */\nint b; // trailing\n";
        assert_eq!(count_loc(src), 2);
    }

    #[test]
    fn report_json_roundtrip() {
        let report = CorpusReport {
            schema_version: SCHEMA_VERSION,
            lines_of_code: 10,
            sources_found: 1,
            sinks_found: 2,
            unique_pairs: 1,
            dataflow_paths: 4,
            path_count_caveat: "x".into(),
            truncation_flags: vec![],
            per_pair: vec![],
            warnings: vec![],
            timings: None,
        };
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: CorpusReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn emission_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let report = CorpusReport {
            schema_version: SCHEMA_VERSION,
            lines_of_code: 1,
            sources_found: 0,
            sinks_found: 0,
            unique_pairs: 0,
            dataflow_paths: 0,
            path_count_caveat: "c".into(),
            truncation_flags: vec![],
            per_pair: vec![],
            warnings: vec![],
            timings: None,
        };
        let gt = GroundTruthFile {
            schema_version: SCHEMA_VERSION,
            seed: 42,
            corpus_root: "corpus".into(),
            records: vec![],
        };
        emit_json(&report, &gt, dir.path()).unwrap();
        let a = std::fs::read(dir.path().join("report.json")).unwrap();
        emit_json(&report, &gt, dir.path()).unwrap();
        let b = std::fs::read(dir.path().join("report.json")).unwrap();
        assert_eq!(a, b);
    }

}
