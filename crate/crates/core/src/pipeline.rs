//! End-to-end driver: corpus loading, the analysis stages in order, bug
//! insertion into mirrored output trees, and the data the CLI prints.

use crate::cpg::{build_cpg, CodePropertyGraph};
use crate::frontend::{parse_unit, read_source, TranslationUnit};
use crate::guards::{
    classify_guard, detect_sanitizations, enumerate_corridor, find_security_mechanisms,
    ControlFlowCorridor, GuardSite,
};
use crate::instrument::{
    applicable_instrumentations, apply_plan, choose_and_apply, format_string_antipattern,
    is_bugdoorable, ApplicableSet, GroundTruthRecord, InstrClass, InstrumentError, SkipReason,
};
use crate::interproc::{
    build_call_graph, default_summaries, load_external_summaries, summarize_parameters,
    topological_order, CallGraph, Summaries, SummaryParseError, VulnClass,
};
use crate::report::{
    self, compute_metrics, count_loc, CorpusReport, GroundTruthFile, PairAnalysis, PhaseTimings,
};
use crate::taint::{
    find_sensitive_sinks, find_user_controlled_sources, group_pairs, trace_to_sources,
    DataFlowPath, SinkSite, SourceSinkPair, SourceSite, TraceConfig,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no C translation units found under {0}")]
    EmptyCorpus(PathBuf),
    #[error("summary file {path}: {source}")]
    SummaryFile {
        path: PathBuf,
        #[source]
        source: SummaryParseError,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no bugdoorable site exists; skip reasons: {reasons:?}")]
    NoBugdoorableSite { reasons: Vec<String> },
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Additional summary files; later files override earlier ones and the
    /// bundled defaults.
    pub summary_files: Vec<PathBuf>,
    pub max_depth: usize,
    pub max_paths: usize,
    pub corridor_limit: usize,
    /// Restrict sink discovery to these classes.
    pub sink_classes: Option<BTreeSet<VulnClass>>,
    /// Restrict instrumentation to these classes.
    pub instr_classes: Option<BTreeSet<InstrClass>>,
    pub include_timings: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            summary_files: Vec::new(),
            max_depth: 64,
            max_paths: 256,
            corridor_limit: 1000,
            sink_classes: None,
            instr_classes: None,
            include_timings: false,
        }
    }
}

impl PipelineConfig {
    fn trace_config(&self) -> TraceConfig {
        TraceConfig {
            max_depth: self.max_depth,
            max_paths: self.max_paths,
            use_memoization: true,
        }
    }
}

/// One instrumentable location: a bugdoorable guard on a traced path, or a
/// format-string rewrite opportunity at a sink.
#[derive(Debug, Clone)]
pub enum BugSite {
    Guard {
        pair_index: usize,
        path_index: usize,
        guard: GuardSite,
        candidates: ApplicableSet,
    },
    FormatString {
        pair_index: usize,
        sink: SinkSite,
    },
}

#[derive(Debug)]
pub struct Analysis {
    pub graph: CodePropertyGraph,
    pub call_graph: CallGraph,
    pub summaries: Summaries,
    pub sources: Vec<SourceSite>,
    pub sinks: Vec<SinkSite>,
    pub pairs: Vec<SourceSinkPair>,
    /// Corridors per pair, one per path, in path order.
    pub corridors: Vec<Vec<ControlFlowCorridor>>,
    pub sites: Vec<BugSite>,
    /// Guards that were found but cannot be instrumented, with reasons.
    pub skipped: Vec<(GuardSite, SkipReason)>,
    pub report: CorpusReport,
}

/// Read and parse every `.c`/`.i` file under `dir` (sorted, recursive).
pub fn load_corpus(dir: &Path) -> Result<Vec<TranslationUnit>, PipelineError> {
    let mut files = Vec::new();
    collect_c_files(dir, &mut files)?;
    files.sort();
    if files.is_empty() {
        return Err(PipelineError::EmptyCorpus(dir.to_path_buf()));
    }
    let mut units = Vec::new();
    for f in files {
        let text = read_source(&f).map_err(|e| PipelineError::Io { path: f.clone(), source: e })?;
        units.push(parse_unit(&text, &f));
    }
    Ok(units)
}

fn collect_c_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), PipelineError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| PipelineError::Io { path: dir.to_path_buf(), source: e })?;
    for entry in entries {
        let entry = entry.map_err(|e| PipelineError::Io { path: dir.to_path_buf(), source: e })?;
        let path = entry.path();
        if path.is_dir() {
            collect_c_files(&path, out)?;
        } else if matches!(path.extension().and_then(|e| e.to_str()), Some("c") | Some("i")) {
            out.push(path);
        }
    }
    Ok(())
}

/// Load summaries: bundled defaults first, then user files in order.
pub fn load_summaries(
    files: &[PathBuf],
) -> Result<std::collections::BTreeMap<String, crate::interproc::FunctionSummary>, PipelineError> {
    let mut map = default_summaries();
    for f in files {
        let loaded = load_external_summaries(f)
            .map_err(|e| PipelineError::SummaryFile { path: f.clone(), source: e })?;
        for (k, v) in loaded.map {
            map.insert(k, v);
        }
    }
    Ok(map)
}

/// Run every analysis stage on a corpus directory.
pub fn analyze_corpus(dir: &Path, cfg: &PipelineConfig) -> Result<Analysis, PipelineError> {
    let t_total = Instant::now();

    let t = Instant::now();
    let units = load_corpus(dir)?;
    let lines_of_code: usize = units.iter().map(|u| count_loc(&u.source)).sum();
    let import_ms = t.elapsed().as_millis() as u64;

    let t = Instant::now();
    let mut graph = build_cpg(units);
    let intraprocedural_ms = t.elapsed().as_millis() as u64;

    let t = Instant::now();
    let externals = load_summaries(&cfg.summary_files)?;
    let call_graph = build_call_graph(&graph);
    let order = topological_order(&call_graph);
    let summaries = summarize_parameters(&mut graph, &call_graph, &order, &externals);
    let augment_interprocedural_ms = t.elapsed().as_millis() as u64;

    let t = Instant::now();
    let sources = find_user_controlled_sources(&graph, &summaries);
    let mut sinks = find_sensitive_sinks(&graph, &summaries);
    if let Some(allowed) = &cfg.sink_classes {
        sinks.retain(|s| allowed.contains(&s.vuln_class));
    }
    let trace_cfg = cfg.trace_config();
    let mut all_paths: Vec<DataFlowPath> = Vec::new();
    let mut truncation_flags: Vec<String> = Vec::new();
    for sink in &sinks {
        let outcome = trace_to_sources(&graph, &summaries, &call_graph, sink, &trace_cfg);
        if outcome.budget_exhausted {
            let d = report::sink_digest(&graph, sink);
            truncation_flags.push(format!(
                "trace budget exhausted at sink {}:{} ({})",
                d.file, d.line, d.callee
            ));
        }
        all_paths.extend(outcome.paths);
    }
    let pairs = group_pairs(&all_paths);
    let find_paths_ms = t.elapsed().as_millis() as u64;

    // Corridors and guards.
    let t = Instant::now();
    let mut corridors: Vec<Vec<ControlFlowCorridor>> = Vec::new();
    let mut pair_analyses: Vec<PairAnalysis> = Vec::new();
    let mut sites: Vec<BugSite> = Vec::new();
    let mut skipped: Vec<(GuardSite, SkipReason)> = Vec::new();

    for (pair_index, pair) in pairs.iter().enumerate() {
        let mut pair_corridors = Vec::new();
        let mut guard_entries: Vec<(GuardSite, bool, Option<String>)> = Vec::new();
        let mut sanitizations: Vec<GuardSite> = Vec::new();
        let mut seen_guards: BTreeSet<(crate::cpg::NodeId, String)> = BTreeSet::new();
        let mut seen_san: BTreeSet<crate::cpg::NodeId> = BTreeSet::new();

        for (path_index, path) in pair.paths.iter().enumerate() {
            let corridor = enumerate_corridor(&graph, &call_graph, path, cfg.corridor_limit);
            if corridor.truncated {
                truncation_flags.push(format!(
                    "corridor enumeration truncated for pair {}",
                    pair_index
                ));
            }
            for found in find_security_mechanisms(&graph, &corridor) {
                let site = classify_guard(&graph, &found);
                let key = (site.condition_node, site.guarded_var.to_string());
                if !seen_guards.insert(key) {
                    continue;
                }
                match is_bugdoorable(&graph, &site) {
                    Ok(()) => {
                        let candidates = {
                            let mut set =
                                applicable_instrumentations(&graph, &site, &corridor);
                            if let Some(allowed) = &cfg.instr_classes {
                                set.retain_classes(allowed);
                            }
                            set
                        };
                        guard_entries.push((site.clone(), true, None));
                        if !candidates.is_empty() {
                            sites.push(BugSite::Guard {
                                pair_index,
                                path_index,
                                guard: site,
                                candidates,
                            });
                        }
                    }
                    Err(reason) => {
                        guard_entries.push((site.clone(), false, Some(reason.to_string())));
                        skipped.push((site, reason));
                    }
                }
            }
            for san in detect_sanitizations(&graph, &corridor) {
                if seen_san.insert(san.condition_node) {
                    sanitizations.push(san);
                }
            }
            pair_corridors.push(corridor);
        }

        let maybe_based = pair_is_maybe_based(&graph, pair);
        pair_analyses.push(PairAnalysis {
            pair: pair.clone(),
            guards: guard_entries,
            sanitizations,
            maybe_based,
        });
        corridors.push(pair_corridors);
    }

    // Format-string rewrite opportunities: pass-through prints whose data
    // argument is connected to a source.
    let fmt_allowed = cfg
        .instr_classes
        .as_ref()
        .map(|s| s.contains(&InstrClass::FormatStringAntiPattern))
        .unwrap_or(true);
    if fmt_allowed {
        for cand in format_string_candidates(&graph) {
            let outcome = trace_to_sources(&graph, &summaries, &call_graph, &cand, &trace_cfg);
            if outcome.paths.is_empty() {
                continue;
            }
            let cand_pairs = group_pairs(&outcome.paths);
            let pair_index = pairs.len() + sites.len();
            let _ = pair_index;
            // Reuse the traced pair as provenance for the record.
            for p in cand_pairs {
                pair_analyses.push(PairAnalysis {
                    pair: p,
                    guards: Vec::new(),
                    sanitizations: Vec::new(),
                    maybe_based: false,
                });
                sites.push(BugSite::FormatString {
                    pair_index: pair_analyses.len() - 1,
                    sink: cand.clone(),
                });
            }
        }
    }
    let guards_ms = t.elapsed().as_millis() as u64;

    let mut warnings: Vec<String> = graph.warnings.iter().map(|w| w.to_string()).collect();
    warnings.extend(summaries.warnings.clone());

    let timings = cfg.include_timings.then(|| PhaseTimings {
        import_ms,
        intraprocedural_ms,
        augment_interprocedural_ms,
        find_paths_ms,
        guards_ms,
        total_ms: t_total.elapsed().as_millis() as u64,
    });

    // Pure-sink pairs only for the headline metrics; format-string
    // pseudo-pairs are appended after the real ones, so truncate the view.
    let metric_pairs = &pair_analyses[..pairs.len()];
    let report = compute_metrics(
        &graph,
        lines_of_code,
        sources.len(),
        sinks.len(),
        metric_pairs,
        truncation_flags,
        warnings,
        timings,
    );

    Ok(Analysis {
        graph,
        call_graph,
        summaries,
        sources,
        sinks,
        pairs,
        corridors,
        sites,
        skipped,
        report,
    })
}

/// Does any path of the pair lean on a maybe-modified definition?
fn pair_is_maybe_based(graph: &CodePropertyGraph, pair: &SourceSinkPair) -> bool {
    for p in &pair.paths {
        for (i, &hop) in p.hops.iter().enumerate() {
            let Some(var) = p.hop_vars.get(i) else { continue };
            let node = graph.node(hop);
            let definite = node
                .defs
                .iter()
                .chain(node.weak_defs.iter())
                .chain(node.aug_defs.iter())
                .chain(node.aug_weak_defs.iter())
                .any(|k| k.flows_to(var));
            let maybe = node
                .maybe_defs
                .iter()
                .filter(|k| !node.resolved_maybe.contains(*k))
                .chain(node.aug_maybe_defs.iter())
                .any(|k| k.flows_to(var));
            if maybe && !definite {
                return true;
            }
        }
    }
    false
}

/// Pass-through print calls eligible for the format-string anti-pattern:
/// `printf("%s", x)` / `fprintf(f, "%s", x)` with a non-literal argument.
fn format_string_candidates(graph: &CodePropertyGraph) -> Vec<SinkSite> {
    use crate::frontend::ExprKind;
    let mut out = Vec::new();
    for node in &graph.nodes {
        for call in &node.calls {
            let Some(callee) = call.callee.as_deref() else { continue };
            let fmt_idx = match callee {
                "printf" => 0,
                "fprintf" => 1,
                _ => continue,
            };
            let Some(fmt) = call.args.get(fmt_idx) else { continue };
            if !matches!(&fmt.kind, ExprKind::StrLit(s) if s == "%s") {
                continue;
            }
            let Some(data) = call.args.get(fmt_idx + 1) else { continue };
            if call.args.len() != fmt_idx + 2 || data.is_constant() {
                continue;
            }
            // Trace the data argument as if it were the sensitive slot.
            out.push(SinkSite {
                call_node: node.id,
                callee: callee.to_string(),
                sensitive_arg_index: fmt_idx + 1,
                vuln_class: VulnClass::FormatString,
            });
        }
    }
    out.sort();
    out
}

#[derive(Debug, Clone)]
pub struct VariantOutput {
    pub dir: PathBuf,
    pub seed: u64,
    pub records: usize,
}

/// Generate `count` instrumented corpus variants under `out_root`, one
/// inserted bug per variant, fully determined by `(corpus, config, seed)`.
pub fn insert_bugs(
    corpus_dir: &Path,
    out_root: &Path,
    cfg: &PipelineConfig,
    seed: u64,
    count: usize,
) -> Result<Vec<VariantOutput>, PipelineError> {
    let analysis = analyze_corpus(corpus_dir, cfg)?;
    if count == 0 {
        return Ok(Vec::new());
    }
    if analysis.sites.is_empty() {
        let reasons: Vec<String> = if analysis.skipped.is_empty() {
            vec!["no guarded source-to-sink flow was found".to_string()]
        } else {
            analysis
                .skipped
                .iter()
                .map(|(g, r)| {
                    let d = report::guard_digest(&analysis.graph, g, false, None);
                    format!("{}:{} `{}`: {}", d.file, d.line, d.condition, r)
                })
                .collect()
        };
        return Err(PipelineError::NoBugdoorableSite { reasons });
    }

    let mut outputs = Vec::new();
    for k in 0..count {
        let vseed = seed.wrapping_add(k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(vseed);
        let site = &analysis.sites[rng.random_range(0..analysis.sites.len())];

        let (record, file, rewritten) = realize_site(&analysis, site, vseed)?;
        // A rewrite must never target an ineligible site.
        if let Some(g) = &record.guard {
            assert!(
                is_bugdoorable(&analysis.graph, g).is_ok(),
                "conservativeness violated: rewrite for non-bugdoorable site"
            );
        }

        let out_dir = out_root.join(vseed.to_string());
        write_variant(&analysis, corpus_dir, &out_dir, &file, &rewritten, vseed, &record)?;
        outputs.push(VariantOutput { dir: out_dir, seed: vseed, records: 1 });
    }
    Ok(outputs)
}

/// Build the concrete rewrite for a chosen site.
fn realize_site(
    analysis: &Analysis,
    site: &BugSite,
    seed: u64,
) -> Result<(GroundTruthRecord, PathBuf, String), PipelineError> {
    match site {
        BugSite::Guard { pair_index, path_index, guard, candidates } => {
            let pair = &analysis.pairs[*pair_index];
            let path = &pair.paths[*path_index];
            Ok(choose_and_apply(&analysis.graph, guard, candidates, seed, pair, path)?)
        }
        BugSite::FormatString { pair_index, sink } => {
            let plan = format_string_antipattern(&analysis.graph, sink)?;
            let file = plan.rewrites[0].file.clone();
            let text = analysis
                .graph
                .sources
                .get(&file)
                .cloned()
                .ok_or_else(|| InstrumentError::NotApplicable("source text missing".into()))?;
            let rewritten = apply_plan(&plan, &text)?;
            // Locate provenance in the appended pseudo-pair list when
            // available; otherwise synthesize from the traced sink.
            let pair = pseudo_pair(analysis, *pair_index, sink);
            let record = GroundTruthRecord {
                chosen_path: pair.paths[0].clone(),
                original_snippet: plan
                    .rewrites
                    .iter()
                    .map(|r| r.original.as_str())
                    .collect::<Vec<_>>()
                    .join("\n"),
                rewritten_snippet: plan
                    .rewrites
                    .iter()
                    .map(|r| r.replacement.as_str())
                    .collect::<Vec<_>>()
                    .join("\n"),
                vuln_class: VulnClass::FormatString,
                guard: None,
                plan,
                pair,
            };
            Ok((record, file, rewritten))
        }
    }
}

fn pseudo_pair(analysis: &Analysis, _pair_index: usize, sink: &SinkSite) -> SourceSinkPair {
    // Re-trace deterministically; the candidate was only recorded if this
    // trace found at least one path.
    let outcome = trace_to_sources(
        &analysis.graph,
        &analysis.summaries,
        &analysis.call_graph,
        sink,
        &TraceConfig::default(),
    );
    group_pairs(&outcome.paths).into_iter().next().expect("candidate traced before")
}

fn write_variant(
    analysis: &Analysis,
    corpus_dir: &Path,
    out_dir: &Path,
    rewritten_file: &Path,
    rewritten_text: &str,
    seed: u64,
    record: &GroundTruthRecord,
) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| PipelineError::Io { path: out_dir.to_path_buf(), source: e })?;

    // Mirror the corpus tree, substituting the rewritten unit.
    let mut files = Vec::new();
    collect_c_files(corpus_dir, &mut files)?;
    files.sort();
    for f in &files {
        let rel = f.strip_prefix(corpus_dir).unwrap_or(f);
        let dest = out_dir.join(rel);
        if let Some(parent) = dest.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| PipelineError::Io { path: parent.to_path_buf(), source: e })?;
        }
        let content = if f == rewritten_file {
            rewritten_text.as_bytes().to_vec()
        } else {
            std::fs::read(f).map_err(|e| PipelineError::Io { path: f.clone(), source: e })?
        };
        let tmp = dest.with_extension("tmp");
        std::fs::write(&tmp, &content)
            .map_err(|e| PipelineError::Io { path: tmp.clone(), source: e })?;
        std::fs::rename(&tmp, &dest)
            .map_err(|e| PipelineError::Io { path: dest.clone(), source: e })?;
    }

    let gt = GroundTruthFile {
        schema_version: report::SCHEMA_VERSION,
        seed,
        corpus_root: corpus_dir.display().to_string(),
        records: vec![report::ground_truth_json(&analysis.graph, record)],
    };
    report::write_json(&gt, &out_dir.join("ground_truth.json"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_corpus(dir: &Path, files: &[(&str, &str)]) {
        for (name, content) in files {
            fs::write(dir.join(name), content).unwrap();
        }
    }

    const GUARDED: &str = r#"void f(FILE *fp, char *d, char *s) {
  int len;
  fread((char *)&len, 4, 1, fp);
  if (len > 256) { exit(1); }
  memcpy(d, s, len);
}
"#;

    #[test]
    fn analyze_reports_running_numbers() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &[("running.c", crate::fixtures::RUNNING_EXAMPLE)]);
        let a = analyze_corpus(dir.path(), &PipelineConfig::default()).unwrap();
        assert_eq!(a.report.unique_pairs, 1);
        assert_eq!(a.report.dataflow_paths, 4);
        assert_eq!(a.report.sources_found, 1);
        assert_eq!(a.report.sinks_found, 1);
        assert_eq!(a.sites.len(), 1);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            analyze_corpus(dir.path(), &PipelineConfig::default()),
            Err(PipelineError::EmptyCorpus(_))
        ));
    }

    #[test]
    fn custom_summary_file_adds_sources() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(
            dir.path(),
            &[(
                "app.c",
                "void f(char *d, char *s, int fd) { int n; fake_read(fd, &n); memcpy(d, s, n); }\n",
            )],
        );
        let summ = dir.path().join("custom.summ");
        fs::write(&summ, "fake_read ret=- p0=N p1=Y,source=network\n").unwrap();

        let plain = analyze_corpus(dir.path(), &PipelineConfig::default()).unwrap();
        assert_eq!(plain.report.sources_found, 0);

        let cfg =
            PipelineConfig { summary_files: vec![summ], ..PipelineConfig::default() };
        let with = analyze_corpus(dir.path(), &cfg).unwrap();
        assert_eq!(with.report.sources_found, 1);
        assert_eq!(with.report.unique_pairs, 1);
    }

    #[test]
    fn insert_zero_count_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &[("g.c", GUARDED)]);
        let out = tempfile::tempdir().unwrap();
        let v = insert_bugs(dir.path(), out.path(), &PipelineConfig::default(), 1, 0).unwrap();
        assert!(v.is_empty());
        assert_eq!(fs::read_dir(out.path()).unwrap().count(), 0);
    }

    #[test]
    fn insert_without_bugdoorable_site_fails_with_reasons() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(
            dir.path(),
            &[(
                "clamp.c",
                "void f(FILE *fp, char *d, char *s) { int n; fread((char *)&n, 4, 1, fp); if (n > 9) { n = 9; } memcpy(d, s, n); }\n",
            )],
        );
        let out = tempfile::tempdir().unwrap();
        let err =
            insert_bugs(dir.path(), out.path(), &PipelineConfig::default(), 1, 1).unwrap_err();
        match err {
            PipelineError::NoBugdoorableSite { reasons } => {
                assert!(reasons.iter().any(|r| r.contains("not_security_critical")), "{:?}", reasons);
            }
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn insert_produces_variant_with_ground_truth() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &[("g.c", GUARDED)]);
        let out = tempfile::tempdir().unwrap();
        let v = insert_bugs(dir.path(), out.path(), &PipelineConfig::default(), 1, 1).unwrap();
        assert_eq!(v.len(), 1);
        let gt_path = v[0].dir.join("ground_truth.json");
        let gt: GroundTruthFile =
            serde_json::from_str(&fs::read_to_string(&gt_path).unwrap()).unwrap();
        assert_eq!(gt.records.len(), 1);
        let rec = &gt.records[0];
        assert_eq!(rec.vuln_class, "buffer_length");
        assert_eq!(rec.sink_ref.callee, "memcpy");
        // The variant differs from the corpus in exactly the rewrite spans.
        let variant_src = fs::read_to_string(v[0].dir.join("g.c")).unwrap();
        assert_ne!(variant_src, GUARDED);
        for rw in &rec.instrumentation.rewrites {
            assert_eq!(&GUARDED[rw.byte_start..rw.byte_end], rw.original);
        }
    }

    #[test]
    fn different_seeds_differ_in_bytes_same_pair() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &[("g.c", GUARDED)]);
        let out = tempfile::tempdir().unwrap();
        let v = insert_bugs(dir.path(), out.path(), &PipelineConfig::default(), 1, 2).unwrap();
        assert_eq!(v.len(), 2);
        let a = fs::read(v[0].dir.join("g.c")).unwrap();
        let b = fs::read(v[1].dir.join("g.c")).unwrap();
        assert_ne!(a, b);
        let ga: GroundTruthFile =
            serde_json::from_str(&fs::read_to_string(v[0].dir.join("ground_truth.json")).unwrap())
                .unwrap();
        let gb: GroundTruthFile =
            serde_json::from_str(&fs::read_to_string(v[1].dir.join("ground_truth.json")).unwrap())
                .unwrap();
        assert_eq!(ga.records[0].source, gb.records[0].source);
        assert_eq!(ga.records[0].sink, gb.records[0].sink);
        assert_eq!(ga.records[0].chosen_path.hops.len(), gb.records[0].chosen_path.hops.len());
    }

    #[test]
    fn same_seed_byte_identical_outputs() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &[("g.c", GUARDED)]);
        let out1 = tempfile::tempdir().unwrap();
        let out2 = tempfile::tempdir().unwrap();
        insert_bugs(dir.path(), out1.path(), &PipelineConfig::default(), 42, 2).unwrap();
        insert_bugs(dir.path(), out2.path(), &PipelineConfig::default(), 42, 2).unwrap();
        for seed in [42u64, 43] {
            let a = fs::read(out1.path().join(seed.to_string()).join("g.c")).unwrap();
            let b = fs::read(out2.path().join(seed.to_string()).join("g.c")).unwrap();
            assert_eq!(a, b);
            let ja =
                fs::read(out1.path().join(seed.to_string()).join("ground_truth.json")).unwrap();
            let jb =
                fs::read(out2.path().join(seed.to_string()).join("ground_truth.json")).unwrap();
            assert_eq!(ja, jb);
        }
    }

    #[test]
    fn two_sinks_two_sources_all_to_all_is_four_pairs() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(
            dir.path(),
            &[(
                "web.c",
                r#"void serve(FILE *fp, int sock, char *d, char *s) {
  int a;
  int b;
  int mix1;
  int mix2;
  fread((char *)&a, 4, 1, fp);
  recv(sock, (char *)&b, 4, 0);
  mix1 = a + b;
  mix2 = a - b;
  memcpy(d, s, mix1);
  memcpy(s, d, mix2);
}
"#,
            )],
        );
        let a = analyze_corpus(dir.path(), &PipelineConfig::default()).unwrap();
        assert_eq!(a.report.unique_pairs, 4, "{:#?}", a.report.per_pair);
    }
}
