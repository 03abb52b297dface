//! End-to-end tests of the binary: exit codes, flags, and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_bugforge")
}

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(bin()).args(args).current_dir(cwd).output().expect("spawn bugforge")
}

#[test]
fn analyze_running_corpus_reports_one_pair() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = repo_path("corpora/running");
    let out = run(
        &["analyze", corpus.to_str().unwrap(), "--out", "r.json", "--json-only"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("json-only output parses");
    assert_eq!(report["unique_pairs"], 1);
    assert_eq!(report["dataflow_paths"], 4);
    // The written file parses too and has a schema version.
    let on_disk: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(on_disk["schema_version"], 1);
}

#[test]
fn empty_corpus_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = tempfile::tempdir().unwrap();
    let out = run(&["analyze", empty.path().to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn broken_summary_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.c"), "int f(void) { return 1; }\n").unwrap();
    std::fs::write(dir.path().join("bad.summ"), "foo p0=X\n").unwrap();
    let out = run(
        &["analyze", ".", "--summaries", "bad.summ"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn insert_without_sites_exits_4_with_reasons() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("clamp.c"),
        "typedef struct _IO_FILE FILE;\nextern unsigned long fread(void *p, unsigned long s, unsigned long n, FILE *f);\nextern void *memcpy(void *d, const void *s, unsigned long n);\nvoid run(FILE *f, char *d, char *s) {\n  int n;\n  fread((char *)&n, 4, 1, f);\n  if (n > 32) { n = 32; }\n  memcpy(d, s, n);\n}\n",
    )
    .unwrap();
    let out = run(&["insert", ".", "--seed", "1", "--count", "1"], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not_security_critical"));
}

#[test]
fn insert_count_zero_exits_0_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = repo_path("corpora/running");
    let out = run(
        &["insert", corpus.to_str().unwrap(), "--seed", "7", "--count", "0", "--out", "vout"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(!dir.path().join("vout").exists() || dir.path().join("vout").read_dir().unwrap().count() == 0);
}

#[test]
fn custom_summary_file_adds_tagged_source() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("app.c"),
        "extern void *memcpy(void *d, const void *s, unsigned long n);\nvoid f(char *d, char *s, int fd) {\n  int n;\n  fake_read(fd, &n);\n  memcpy(d, s, n);\n}\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("custom.summ"), "fake_read ret=- p0=N p1=Y,source=network\n")
        .unwrap();
    let plain = run(&["analyze", ".", "--json-only"], dir.path());
    let report: serde_json::Value = serde_json::from_slice(&plain.stdout).unwrap();
    assert_eq!(report["sources_found"], 0);

    let with = run(&["analyze", ".", "--summaries", "custom.summ", "--json-only"], dir.path());
    let report: serde_json::Value = serde_json::from_slice(&with.stdout).unwrap();
    assert_eq!(report["sources_found"], 1);
    assert_eq!(report["unique_pairs"], 1);
}

#[test]
fn seeded_insert_is_byte_identical_across_runs() {
    let corpus = repo_path("corpora/running");
    let run1 = tempfile::tempdir().unwrap();
    let run2 = tempfile::tempdir().unwrap();
    for dir in [&run1, &run2] {
        let out = run(
            &[
                "insert",
                corpus.to_str().unwrap(),
                "--seed",
                "42",
                "--count",
                "2",
                "--out",
                "v",
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for seed in ["42", "43"] {
        for name in ["running.c", "ground_truth.json"] {
            let a = std::fs::read(run1.path().join("v").join(seed).join(name)).unwrap();
            let b = std::fs::read(run2.path().join("v").join(seed).join(name)).unwrap();
            assert_eq!(a, b, "{}/{} differs", seed, name);
        }
    }
}

#[test]
fn env_seed_fallback_is_used() {
    let corpus = repo_path("corpora/running");
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(bin())
        .args(["insert", corpus.to_str().unwrap(), "--count", "1", "--out", "v"])
        .env("BUGFORGE_SEED", "99")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("v/99").exists());
}

#[test]
fn verify_reports_per_input_verdicts() {
    let corpus = repo_path("corpora/running");
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["insert", corpus.to_str().unwrap(), "--seed", "42", "--count", "1", "--out", "v"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let inputs = dir.path().join("inputs");
    std::fs::create_dir(&inputs).unwrap();
    let mut benign = 16i32.to_le_bytes().to_vec();
    benign.extend([b'P'; 16]);
    std::fs::write(inputs.join("a_benign.bin"), benign).unwrap();
    let mut crafted = 300i32.to_le_bytes().to_vec();
    crafted.extend([b'P'; 16]);
    std::fs::write(inputs.join("b_crafted.bin"), crafted).unwrap();

    let variant = dir.path().join("v/42");
    let out = run(
        &[
            "verify",
            variant.to_str().unwrap(),
            inputs.to_str().unwrap(),
            "--original",
            corpus.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("a_benign.bin: benign_identical"), "{}", text);
    assert!(text.contains("b_crafted.bin: sink_violation"), "{}", text);
}

#[test]
fn verify_without_compiler_reports_build_failure() {
    let corpus = repo_path("corpora/running");
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["insert", corpus.to_str().unwrap(), "--seed", "5", "--count", "1", "--out", "v"],
        dir.path(),
    );
    assert!(out.status.success());
    let inputs = dir.path().join("inputs");
    std::fs::create_dir(&inputs).unwrap();
    std::fs::write(inputs.join("x.bin"), [0u8; 8]).unwrap();

    let out = Command::new(bin())
        .args([
            "verify",
            dir.path().join("v/5").to_str().unwrap(),
            inputs.to_str().unwrap(),
            "--original",
            corpus.to_str().unwrap(),
        ])
        .env("PATH", "")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).to_lowercase();
    assert!(err.contains("compiler") || err.contains("build"), "{}", err);
}

#[test]
fn list_prints_guards_with_skip_reasons() {
    let corpus = repo_path("corpora/running");
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["list", corpus.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("fread"), "{}", text);
    assert!(text.contains("memcpy"), "{}", text);
    assert!(text.contains("len > 256"), "{}", text);
    assert!(text.contains("bugdoorable"), "{}", text);
}

#[test]
fn dump_cpg_writes_graph_export() {
    let corpus = repo_path("corpora/running");
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["analyze", corpus.to_str().unwrap(), "--dump-cpg", "graph.txt", "--out", "r.json"],
        dir.path(),
    );
    assert!(out.status.success());
    let dump = std::fs::read_to_string(dir.path().join("graph.txt")).unwrap();
    assert!(dump.lines().any(|l| l.starts_with("node ")));
    assert!(dump.lines().any(|l| l.starts_with("edge dfg ")));
    assert!(dump.lines().any(|l| l.starts_with("edge cfg ")));
}
