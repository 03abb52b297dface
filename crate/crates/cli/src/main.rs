//! Command-line driver: analyze a corpus, list what was found, insert bugs
//! into mirrored variants, and verify a variant against the original.
//!
//! Exit codes are stable API: 0 success, 2 empty corpus, 3 summary-file
//! parse failure, 4 no bugdoorable site, 1 any other failure.

use anyhow::Context;
use bugforge_core::instrument::InstrClass;
use bugforge_core::interproc::VulnClass;
use bugforge_core::pipeline::{self, Analysis, PipelineConfig, PipelineError};
use bugforge_core::report;
use bugforge_core::verify::{verify_variant, Verdict, VerifyError};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::Command;

#[derive(Parser)]
#[command(
    name = "bugforge",
    version,
    about = "Find guarded source-to-sink data flows in C corpora and rewrite the guards into ground-truth documented bugs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct AnalysisFlags {
    /// Extra summary files; later files override earlier ones.
    #[arg(long = "summaries", value_name = "FILE")]
    summaries: Vec<PathBuf>,
    /// Interprocedural hop budget per traced value.
    #[arg(long, value_name = "N")]
    max_depth: Option<usize>,
    /// Data-flow paths per sink before truncating.
    #[arg(long, value_name = "N")]
    max_paths: Option<usize>,
    /// Control-flow sequences per hop pair before truncating.
    #[arg(long, value_name = "N")]
    corridor_limit: Option<usize>,
    /// Comma-separated sink classes to keep
    /// (buffer_length,format_string,alloc_size,outbound_leak).
    #[arg(long, value_name = "CSV")]
    sink_classes: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full analysis and write report.json.
    Analyze {
        corpus: PathBuf,
        #[command(flatten)]
        flags: AnalysisFlags,
        /// Where to write the report.
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        /// Print the report JSON to stdout and nothing else.
        #[arg(long)]
        json_only: bool,
        /// Embed wall-clock phase timings (makes the file nondeterministic).
        #[arg(long)]
        timings: bool,
        /// Write the line-oriented graph export for debugging.
        #[arg(long, value_name = "FILE")]
        dump_cpg: Option<PathBuf>,
    },
    /// List sources, sinks, connected pairs, and guards.
    List {
        corpus: PathBuf,
        #[command(flatten)]
        flags: AnalysisFlags,
    },
    /// Generate instrumented corpus variants, one inserted bug each.
    Insert {
        corpus: PathBuf,
        #[command(flatten)]
        flags: AnalysisFlags,
        /// Base seed; variant k uses seed+k. Falls back to BUGFORGE_SEED.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of variants to generate.
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Output root; variants land under out/<seed>/.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated instrumentation classes to allow.
        #[arg(long, value_name = "CSV")]
        classes: Option<String>,
    },
    /// Build original and variant, run each input through both, and report
    /// benign-identical / divergence / sink-violation per input.
    Verify {
        variant: PathBuf,
        inputs: PathBuf,
        /// Original corpus; defaults to the ground truth's corpus_root.
        #[arg(long)]
        original: Option<PathBuf>,
        /// Print verdicts as JSON.
        #[arg(long)]
        json_only: bool,
    },
    /// Convenience: run a compiler's preprocessor over sources.
    Preprocess {
        /// Compiler to invoke with -E.
        #[arg(long, default_value = "cc")]
        compiler: String,
        /// Output directory for the expanded units.
        #[arg(long, default_value = "preprocessed")]
        out: PathBuf,
        files: Vec<PathBuf>,
    },
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Analyze { corpus, flags, out, json_only, timings, dump_cpg } => {
            cmd_analyze(corpus, flags, out, json_only, timings, dump_cpg)
        }
        Cmd::List { corpus, flags } => cmd_list(corpus, flags),
        Cmd::Insert { corpus, flags, seed, count, out, classes } => {
            cmd_insert(corpus, flags, seed, count, out, classes)
        }
        Cmd::Verify { variant, inputs, original, json_only } => {
            cmd_verify(variant, inputs, original, json_only)
        }
        Cmd::Preprocess { compiler, out, files } => cmd_preprocess(compiler, out, files),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {:#}", e);
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> i32 {
    if let Some(pe) = e.downcast_ref::<PipelineError>() {
        return match pe {
            PipelineError::EmptyCorpus(_) => 2,
            PipelineError::SummaryFile { .. } => 3,
            PipelineError::NoBugdoorableSite { .. } => 4,
            _ => 1,
        };
    }
    1
}

fn build_config(flags: &AnalysisFlags) -> anyhow::Result<PipelineConfig> {
    let mut cfg = PipelineConfig {
        summary_files: flags.summaries.clone(),
        ..PipelineConfig::default()
    };
    if let Some(d) = flags.max_depth {
        cfg.max_depth = d;
    }
    if let Some(p) = flags.max_paths {
        cfg.max_paths = p;
    }
    if let Some(c) = flags.corridor_limit {
        cfg.corridor_limit = c;
    }
    if let Some(csv) = &flags.sink_classes {
        let mut set = BTreeSet::new();
        for item in csv.split(',').filter(|s| !s.is_empty()) {
            let class =
                VulnClass::parse(item).with_context(|| format!("unknown sink class `{}`", item))?;
            set.insert(class);
        }
        cfg.sink_classes = Some(set);
    }
    Ok(cfg)
}

fn cmd_analyze(
    corpus: PathBuf,
    flags: AnalysisFlags,
    out: PathBuf,
    json_only: bool,
    timings: bool,
    dump_cpg: Option<PathBuf>,
) -> anyhow::Result<()> {
    let mut cfg = build_config(&flags)?;
    cfg.include_timings = timings;
    let analysis = pipeline::analyze_corpus(&corpus, &cfg)?;
    report::write_json(&analysis.report, &out)?;
    if let Some(path) = &dump_cpg {
        std::fs::write(path, analysis.graph.dump())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if json_only {
        println!("{}", serde_json::to_string_pretty(&analysis.report)?);
        return Ok(());
    }
    let r = &analysis.report;
    println!(
        "{} lines, {} sources, {} sinks, {} unique pairs, {} data-flow paths",
        r.lines_of_code, r.sources_found, r.sinks_found, r.unique_pairs, r.dataflow_paths
    );
    let bugdoorable = analysis
        .sites
        .iter()
        .filter(|s| matches!(s, pipeline::BugSite::Guard { .. }))
        .count();
    println!(
        "{} bugdoorable guard site(s), {} rewrite opportunity(ies) total",
        bugdoorable,
        analysis.sites.len()
    );
    for f in &r.truncation_flags {
        println!("note: {}", f);
    }
    println!("report written to {}", out.display());
    Ok(())
}

fn cmd_list(corpus: PathBuf, flags: AnalysisFlags) -> anyhow::Result<()> {
    let cfg = build_config(&flags)?;
    let analysis = pipeline::analyze_corpus(&corpus, &cfg)?;
    print_listing(&analysis);
    Ok(())
}

fn print_listing(analysis: &Analysis) {
    let g = &analysis.graph;
    println!("sources:");
    for s in &analysis.sources {
        let d = report::source_digest(g, s);
        println!("  {}:{} {} via {} (arg {})", d.file, d.line, d.detail, d.callee, d.slot);
    }
    println!("sinks:");
    for s in &analysis.sinks {
        let d = report::sink_digest(g, s);
        println!("  {}:{} {} arg {} ({})", d.file, d.line, d.callee, d.slot, d.detail);
    }
    println!("pairs:");
    for p in &analysis.report.per_pair {
        println!(
            "  {}:{} {} -> {}:{} {} [{} path(s), {}]",
            p.source.file,
            p.source.line,
            p.source.callee,
            p.sink.file,
            p.sink.line,
            p.sink.callee,
            p.path_count,
            p.vuln_class
        );
        for gd in &p.guards {
            let status = if gd.bugdoorable {
                "bugdoorable".to_string()
            } else {
                format!("skipped: {}", gd.skip_reason.clone().unwrap_or_default())
            };
            println!(
                "    guard {}:{} `{}` {} {} ({})",
                gd.file, gd.line, gd.condition, gd.classification, gd.polarity, status
            );
        }
        for sd in &p.sanitizations {
            println!("    sanitization {}:{} `{}` (recorded only)", sd.file, sd.line, sd.condition);
        }
    }
}

fn cmd_insert(
    corpus: PathBuf,
    flags: AnalysisFlags,
    seed: Option<u64>,
    count: usize,
    out: PathBuf,
    classes: Option<String>,
) -> anyhow::Result<()> {
    let mut cfg = build_config(&flags)?;
    if let Some(csv) = &classes {
        let mut set = BTreeSet::new();
        for item in csv.split(',').filter(|s| !s.is_empty()) {
            let class = InstrClass::parse(item)
                .with_context(|| format!("unknown instrumentation class `{}`", item))?;
            set.insert(class);
        }
        cfg.instr_classes = Some(set);
    }
    let seed = match seed {
        Some(s) => s,
        None => std::env::var("BUGFORGE_SEED").ok().and_then(|v| v.parse().ok()).unwrap_or(1),
    };
    let variants = pipeline::insert_bugs(&corpus, &out, &cfg, seed, count)?;
    for v in &variants {
        println!("variant seed {} -> {}", v.seed, v.dir.display());
    }
    println!("{} variant(s) generated", variants.len());
    Ok(())
}

fn cmd_verify(
    variant: PathBuf,
    inputs: PathBuf,
    original: Option<PathBuf>,
    json_only: bool,
) -> anyhow::Result<()> {
    let original = match original {
        Some(dir) => dir,
        None => {
            let gt_path = variant.join("ground_truth.json");
            let text = std::fs::read_to_string(&gt_path)
                .with_context(|| format!("reading {}", gt_path.display()))?;
            let gt: report::GroundTruthFile = serde_json::from_str(&text)?;
            PathBuf::from(gt.corpus_root)
        }
    };
    let verdicts = match verify_variant(&variant, &original, &inputs) {
        Ok(v) => v,
        Err(VerifyError::BuildFailure { output }) => {
            anyhow::bail!("build failure:\n{}", output);
        }
        Err(e) => return Err(e.into()),
    };
    if json_only {
        println!("{}", serde_json::to_string_pretty(&verdicts)?);
        return Ok(());
    }
    for v in &verdicts {
        let tag = match v.verdict {
            Verdict::BenignIdentical => "benign_identical",
            Verdict::DivergenceDetected => "divergence_detected",
            Verdict::SinkViolation => "sink_violation",
        };
        println!(
            "{}: {} (original status {}, variant status {})",
            v.input.display(),
            tag,
            v.original_status,
            v.variant_status
        );
    }
    Ok(())
}

fn cmd_preprocess(compiler: String, out: PathBuf, files: Vec<PathBuf>) -> anyhow::Result<()> {
    std::fs::create_dir_all(&out)?;
    for f in &files {
        let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or("unit");
        let dest = out.join(format!("{}.i", stem));
        let status = Command::new(&compiler)
            .arg("-E")
            .arg(f)
            .arg("-o")
            .arg(&dest)
            .status()
            .with_context(|| format!("running {}", compiler))?;
        if !status.success() {
            anyhow::bail!("{} -E failed on {}", compiler, f.display());
        }
        println!("{} -> {}", f.display(), dest.display());
    }
    Ok(())
}
