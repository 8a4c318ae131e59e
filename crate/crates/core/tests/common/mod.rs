#![allow(dead_code)]

pub mod corpus;
pub mod gen;
pub mod oracles;

use std::path::PathBuf;

use intentcov::lang::{compile_source, ProgramModule};
use intentcov::requirements::{parse_reqs, validate, ReqSet};
use intentcov::suite::{parse_tests, run_suite, TestRun, TestSpec};

pub fn fixture_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture_path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn program(rel: &str) -> ProgramModule {
    compile_source(&read_fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn reqs(rel: &str, m: &ProgramModule) -> ReqSet {
    validate(&parse_reqs(&read_fixture(rel)).unwrap(), m).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn tests(rel: &str) -> Vec<TestSpec> {
    parse_tests(&read_fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn run(prog: &str, req: &str, suite: &str, trace: bool) -> (ProgramModule, Vec<TestRun>) {
    let m = program(prog);
    let r = reqs(req, &m);
    let runs = run_suite(&m, &r, &tests(suite), trace).unwrap();
    (m, runs)
}

/// Every `(program, requirements, tests)` triple shipped as a fixture.
pub const FIXTURE_TRIPLES: &[(&str, &str, &str)] = &[
    ("terminate/p1.mls", "terminate/tr_bug.ucr", "terminate/t2.ut"),
    ("terminate/p2.mls", "terminate/tr_bug.ucr", "terminate/t2.ut"),
    ("terminate/p3.mls", "terminate/tr_bug.ucr", "terminate/t2.ut"),
    ("terminate/p3.mls", "terminate/tr_bug.ucr", "terminate/t_bug_prime.ut"),
    ("terminate/p4.mls", "terminate/tr_bug.ucr", "terminate/t_prime.ut"),
    ("terminate/p4.mls", "terminate/tr_bug.ucr", "terminate/t_bug_prime.ut"),
    ("bst/bst.mls", "bst/cases.ucr", "bst/suite.ut"),
    ("reset/reset.mls", "reset/inactive.ucr", "reset/pair.ut"),
    ("reset/reset.mls", "reset/inactive.ucr", "reset/branch.ut"),
    ("isprime/p1.mls", "isprime/fix.ucr", "isprime/t1.ut"),
    ("isprime/p2.mls", "isprime/fix.ucr", "isprime/t1.ut"),
    ("isprime/p3.mls", "isprime/fix.ucr", "isprime/t1.ut"),
    ("isprime/p3.mls", "isprime/fix.ucr", "isprime/t2.ut"),
    ("infotbl/infotbl.mls", "infotbl/scenario.ucr", "infotbl/suite.ut"),
    ("infotbl/infotbl.mls", "infotbl/scenario.ucr", "infotbl/errors.ut"),
    ("attrs/attrs_if.mls", "attrs/loop.ucr", "attrs/suite.ut"),
    ("attrs/attrs_while.mls", "attrs/loop.ucr", "attrs/suite.ut"),
    ("attrs/attrs_upstream.mls", "attrs/loop.ucr", "attrs/suite.ut"),
    ("attrs/attrs_upstream.mls", "attrs/coupled.ucr", "attrs/coupled.ut"),
    ("foo/foo.mls", "foo/foo.ucr", "foo/foo.ut"),
];

/// Every MiniLang fixture program.
pub fn fixture_programs() -> Vec<(String, ProgramModule)> {
    let mut out = Vec::new();
    for dir in std::fs::read_dir(fixture_path("")).unwrap() {
        let dir = dir.unwrap().path();
        if !dir.is_dir() {
            continue;
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        for f in files {
            if f.extension().is_some_and(|e| e == "mls") {
                let text = std::fs::read_to_string(&f).unwrap();
                let m = compile_source(&text).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
                out.push((f.display().to_string(), m));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}
