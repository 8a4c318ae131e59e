mod common;

use common::{fixture_path, read_fixture};
use intentcov::requirements::{format_reqs, parse_reqs};

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Out {
    let mut argv = vec!["intentcov".to_string()];
    for a in args {
        // Fixture-relative paths are resolved; flags and names pass through.
        let p = fixture_path(a);
        argv.push(if a.contains('/') && p.exists() { p.display().to_string() } else { a.to_string() });
    }
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = intentcov::cli::run(&argv, &mut out, &mut err);
    Out { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

#[test]
fn check_exit_codes() {
    assert_eq!(cli(&["check", "terminate/p2.mls", "terminate/tr_bug.ucr", "terminate/t2.ut"]).code, 0);
    let uncovered = cli(&["check", "terminate/p3.mls", "terminate/tr_bug.ucr", "terminate/t2.ut"]);
    assert_eq!(uncovered.code, 2);
    assert!(uncovered.stdout.contains("UNCOVERED tr_bug"), "{}", uncovered.stdout);
    let failing = cli(&["check", "terminate/p4.mls", "terminate/tr_bug.ucr", "terminate/t_bug_prime.ut"]);
    assert_eq!(failing.code, 1);
    assert!(failing.stdout.contains("FAIL t_bug_prime: expected false, actual true"), "{}", failing.stdout);
    // A failing test wins over an uncovered requirement.
    assert_eq!(cli(&["check", "isprime/p1.mls", "isprime/fix.ucr", "isprime/t1.ut"]).code, 1);
}

#[test]
fn check_reports_str_progress_for_uncovered_requirement() {
    let out = cli(&["check", "terminate/p3.mls", "terminate/tr_bug.ucr", "terminate/t2.ut"]);
    assert!(out.stdout.contains("str progress 0/2"), "{}", out.stdout);
}

#[test]
fn json_and_text_verdicts_agree() {
    for (p, r, t) in common::FIXTURE_TRIPLES {
        let text = cli(&["check", p, r, t]);
        let json = cli(&["check", p, r, t, "--format", "json"]);
        assert_eq!(text.code, json.code);
        let v: serde_json::Value = serde_json::from_str(&json.stdout).unwrap();
        for test in v["tests"].as_array().unwrap() {
            let name = test["name"].as_str().unwrap();
            let verdict = match test["outcome"].as_str().unwrap() {
                "pass" => "PASS",
                "fail" => "FAIL",
                "errored" => "ERROR",
                "ran" => "RAN",
                o => panic!("outcome {o}"),
            };
            assert!(text.stdout.contains(&format!("{verdict} {name}")), "{p}: {verdict} {name}\n{}", text.stdout);
        }
        for req in v["requirements"].as_array().unwrap() {
            let name = req["name"].as_str().unwrap();
            let by: Vec<&str> = req["satisfiedBy"].as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect();
            let line = if by.is_empty() { format!("UNCOVERED {name}") } else { format!("COVERED {name} by {}", by.join(", ")) };
            assert!(text.stdout.lines().any(|l| l == line), "{p}: `{line}`\n{}", text.stdout);
        }
    }
}

#[test]
fn report_matrix_lists_requirements() {
    let out = cli(&["report", "bst/bst.mls", "bst/cases.ucr", "bst/suite.ut", "--elements", "tree_delete"]);
    assert_eq!(out.code, 2, "Case4 is uncovered");
    for case in ["Case1", "Case2", "Case3", "Case4"] {
        assert!(out.stdout.contains(case), "{}", out.stdout);
    }
    assert!(out.stdout.contains("stmt tree_delete@s1"));
    assert!(out.stdout.contains("branch tree_delete@s1"));
}

#[test]
fn map_deleted_statement_is_unmapped() {
    let out = cli(&["map", "crossref/deleted_old.mls", "crossref/deleted_new.mls", "crossref/deleted.ucr"]);
    assert_eq!(out.code, 2);
    assert!(out.stdout.contains("issue\treset_to_seven\tstmt clamp@s3\tunmapped"), "{}", out.stdout);
    assert!(!out.stdout.contains("req reset_to_seven"));
    assert!(out.stdout.contains("req returns = ctr(btr(stmt clamp@s4), local clamp.m > 0);"));
}

#[test]
fn map_identical_versions_is_byte_identical() {
    for (p, r, _) in common::FIXTURE_TRIPLES {
        let out = cli(&["map", p, p, r]);
        assert_eq!(out.code, 0, "{p}: {}", out.stdout);
        let canonical = format_reqs(&parse_reqs(&read_fixture(r)).unwrap());
        assert_eq!(out.stdout, canonical, "{p}");
    }
}

#[test]
fn map_foo_renames_variable() {
    let out = cli(&["map", "foo/foo.mls", "foo/foo2.mls", "foo/foo.ucr"]);
    assert_eq!(out.code, 0);
    assert_eq!(out.stdout, "req take_y = ctr(btr(stmt foo@s3), local foo.min > 0);\n");
}

#[test]
fn map_writes_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("migrated.ucr");
    let out = cli(&["map", "foo/foo.mls", "foo/foo2.mls", "foo/foo.ucr", "-o", dest.to_str().unwrap()]);
    assert_eq!(out.code, 0);
    assert!(std::fs::read_to_string(dest).unwrap().contains("local foo.min"));
}

#[test]
fn malformed_source_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("bad.mls");
    std::fs::write(&src, "fn f(: int {\n").unwrap();
    let dest = dir.path().join("bad.ubc");
    let out = cli(&["compile", src.to_str().unwrap(), "-o", dest.to_str().unwrap()]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.starts_with("error: "), "{}", out.stderr);
    assert!(out.stderr.contains("syntax error"), "{}", out.stderr);
    assert!(!dest.exists());
}

#[test]
fn compile_then_disassemble_and_reassemble() {
    let dir = tempfile::tempdir().unwrap();
    let ubc = dir.path().join("bst.ubc");
    assert_eq!(cli(&["compile", "bst/bst.mls", "-o", ubc.to_str().unwrap()]).code, 0);
    let asm = cli(&["disasm", ubc.to_str().unwrap()]);
    assert_eq!(asm.code, 0);
    let uasm = dir.path().join("bst.uasm");
    std::fs::write(&uasm, &asm.stdout).unwrap();
    let again = dir.path().join("again.ubc");
    assert_eq!(cli(&["asm", uasm.to_str().unwrap(), "-o", again.to_str().unwrap()]).code, 0);
    assert_eq!(std::fs::read(&ubc).unwrap(), std::fs::read(&again).unwrap());
    // The compiled module checks the same as the source.
    let a = cli(&["check", ubc.to_str().unwrap(), "bst/cases.ucr", "bst/suite.ut"]);
    let b = cli(&["check", "bst/bst.mls", "bst/cases.ucr", "bst/suite.ut"]);
    assert_eq!((a.code, a.stdout), (b.code, b.stdout));
}

#[test]
fn bdt_of_foo_matches_golden_dump() {
    let out = cli(&["bdt", "foo/foo.mls", "--function", "foo"]);
    assert_eq!(out.code, 0);
    assert_eq!(out.stdout, read_fixture("foo/foo.bdt"));
}

#[test]
fn bdt_of_straight_line_function_is_one_chain() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("line.mls");
    std::fs::write(&src, "fn g(a: int): int {\n  return a + 1;\n}\n").unwrap();
    let out = cli(&["bdt", src.to_str().unwrap(), "--function", "g"]);
    let lines: Vec<&str> = out.stdout.lines().collect();
    assert_eq!(lines[0], "start");
    assert_eq!(lines.iter().filter(|l| l.starts_with("  ") && !l.starts_with("    ")).count(), 1);
    assert!(lines[1].contains("ret"));
}

#[test]
fn bdt_unknown_function_exits_1() {
    let out = cli(&["bdt", "foo/foo.mls", "--function", "bar"]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("unknown function `bar`"));
}

#[test]
fn trace_of_reset_reaches_every_anchor() {
    let out = cli(&["trace", "reset/reset.mls", "reset/pair.ut", "--test", "tf"]);
    assert_eq!(out.code, 0);
    for s in ["s1", "s2", "s3", "s4"] {
        assert!(out.stdout.lines().any(|l| l.contains(" stmt reset ") && l.ends_with(&format!("@{s}"))), "{s}");
    }
    assert!(out.stdout.contains("local reset.result = false"));
    assert_eq!(cli(&["trace", "reset/reset.mls", "reset/pair.ut", "--test", "nope"]).code, 1);
}

#[test]
fn help_and_bad_usage() {
    let help = cli(&["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("check"));
    assert_eq!(cli(&["frobnicate"]).code, 1);
    assert_eq!(cli(&["check", "missing.mls", "x.ucr", "y.ut"]).code, 1);
}
