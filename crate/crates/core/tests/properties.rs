//! Property tests over the frontend's robustness contract: arbitrary input
//! never panics the parser, all spans index real bytes, and skipped regions
//! never overlap a parsed function body.

use bugforge_core::frontend::{self, VarKey};
use proptest::prelude::*;
use std::path::Path;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parse_never_panics(src in ".{0,400}") {
        let _ = frontend::parse_unit(&src, Path::new("fuzz.c"));
    }

    #[test]
    fn parse_never_panics_on_c_like_soup(
        src in proptest::collection::vec(
            prop_oneof![
                Just("int "), Just("x"), Just("y"), Just("("), Just(")"),
                Just("{"), Just("}"), Just(";"), Just("="), Just("+"),
                Just("if"), Just("while"), Just("return "), Just("*"),
                Just("&"), Just("1"), Just("\"s\""), Just(","), Just("goto "),
                Just("struct "), Just("[asm]"), Just("\n"), Just("# 1 \"f\"\n"),
            ],
            0..120,
        )
    ) {
        let text: String = src.concat();
        let unit = frontend::parse_unit(&text, Path::new("fuzz.c"));
        // Every recorded span indexes real bytes of the input.
        for f in &unit.functions {
            prop_assert!(f.span.byte_end <= text.len());
            prop_assert!(f.span.byte_start < f.span.byte_end);
        }
        for s in &unit.skipped_regions {
            prop_assert!(s.span.byte_end <= text.len());
        }
    }

    #[test]
    fn skipped_regions_never_overlap_function_bodies(
        garbage in "[a-z#@$ ]{0,40}",
        name in "[a-z]{1,8}",
    ) {
        let text = format!("{}\nint {}(int a) {{ return a; }}\n", garbage, name);
        let unit = frontend::parse_unit(&text, Path::new("mix.c"));
        for f in &unit.functions {
            for s in &unit.skipped_regions {
                prop_assert!(
                    !f.body_span.overlaps(&s.span),
                    "skip {:?} overlaps body of {}",
                    s.reason,
                    f.name
                );
            }
        }
    }

    #[test]
    fn varkey_prefix_flow_is_symmetric_and_reflexive(
        base in "[a-z]{1,6}",
        chain_a in proptest::collection::vec("[a-z]{1,4}", 0..3),
        chain_b in proptest::collection::vec("[a-z]{1,4}", 0..3),
    ) {
        let a = VarKey::with_chain(base.clone(), chain_a);
        let b = VarKey::with_chain(base, chain_b);
        prop_assert!(a.flows_to(&a));
        prop_assert_eq!(a.flows_to(&b), b.flows_to(&a));
    }
}

#[test]
fn latin1_fallback_reads_non_utf8_sources() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("legacy.c");
    // 0xE9 is not valid UTF-8 on its own; the Latin-1 fallback maps it
    // to one char so the rest of the file still parses.
    let mut bytes = b"/* caf".to_vec();
    bytes.push(0xE9);
    bytes.extend_from_slice(b" */\nint f(void) { return 1; }\n");
    std::fs::write(&path, &bytes).unwrap();
    let text = frontend::read_source(&path).unwrap();
    let unit = frontend::parse_unit(&text, &path);
    assert_eq!(unit.functions.len(), 1);
    assert_eq!(unit.functions[0].name, "f");
}
