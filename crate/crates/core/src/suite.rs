//! Test suites: the `.ut` format, running every test under the matcher, and
//! the coverage matrix behind `check` and `report`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

use crate::bdt::{build_cfg, Cfg};
use crate::lang::{Function, ProgramModule, Value};
use crate::matcher::{plan, Diagnostics, MatchSession, RequirementReport};
use crate::par;
use crate::requirements::ReqSet;
use crate::vm::{ArrayInit, Event, EventKind, InstrumentationPlan, Outcome, RunOptions, Vm, VmError};

#[derive(Debug, Clone, PartialEq)]
pub enum Expected {
    Value(Value),
    Error,
}

impl std::fmt::Display for Expected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Expected::Value(v) => write!(f, "{v}"),
            Expected::Error => f.write_str("!error"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSpec {
    pub name: String,
    pub entry: String,
    pub args: Vec<Value>,
    pub expected: Option<Expected>,
    /// Array contents installed before the run.
    pub inits: Vec<ArrayInit>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SuiteError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("duplicate test name `{0}`")]
    DuplicateName(String),
    #[error("test `{test}`: {source}")]
    Run { test: String, source: VmError },
}

/// Parses a typed literal: `12`, `-3`, `2.5f`, `2.5`, `true`.
pub fn parse_literal(s: &str) -> Option<Value> {
    let s = s.trim();
    match s {
        "true" => return Some(Value::Bool(true)),
        "false" => return Some(Value::Bool(false)),
        _ => {}
    }
    if let Some(f) = s.strip_suffix('f') {
        return f.parse::<f64>().ok().map(Value::Float);
    }
    if let Ok(i) = s.parse::<i64>() {
        return Some(Value::Int(i));
    }
    if s.contains(['.', 'e', 'E']) && !s.contains("inf") && !s.contains("nan") {
        return s.parse::<f64>().ok().map(Value::Float);
    }
    None
}

/// Parses a `.ut` file. `set arr[i] = v` lines accumulate and attach to the
/// next test line.
pub fn parse_tests(text: &str) -> Result<Vec<TestSpec>, SuiteError> {
    let mut out: Vec<TestSpec> = Vec::new();
    let mut pending = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |msg: &str| SuiteError::Syntax { line, msg: msg.to_string() };
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        if let Some(rest) = l.strip_prefix("set ") {
            let (lhs, rhs) = rest.split_once('=').ok_or_else(|| err("expected `set arr[i] = v`"))?;
            let (arr, idx) = lhs.trim().split_once('[').ok_or_else(|| err("expected `arr[i]`"))?;
            let idx = idx.trim().strip_suffix(']').ok_or_else(|| err("missing `]`"))?;
            let index = idx.trim().parse::<usize>().map_err(|_| err("bad array index"))?;
            let value = parse_literal(rhs).ok_or_else(|| err("bad literal"))?;
            pending.push(ArrayInit { array: arr.trim().to_string(), index, value });
            continue;
        }
        let (name, call) = l.split_once(':').ok_or_else(|| err("expected `name: fn(args)`"))?;
        let name = name.trim();
        if !crate::lang::is_identifier(name) {
            return Err(err("bad test name"));
        }
        let (call, expected) = match call.split_once("->") {
            Some((c, e)) => {
                let e = e.trim();
                let exp = if e == "!error" {
                    Expected::Error
                } else {
                    Expected::Value(parse_literal(e).ok_or_else(|| err("bad expected value"))?)
                };
                (c.trim(), Some(exp))
            }
            None => (call.trim(), None),
        };
        let (entry, args) = call.split_once('(').ok_or_else(|| err("expected `(`"))?;
        let args = args.trim().strip_suffix(')').ok_or_else(|| err("expected `)`"))?;
        let args = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',').map(|a| parse_literal(a).ok_or_else(|| err("bad argument"))).collect::<Result<_, _>>()?
        };
        if out.iter().any(|t| t.name == name) {
            return Err(SuiteError::DuplicateName(name.to_string()));
        }
        out.push(TestSpec {
            name: name.to_string(),
            entry: entry.trim().to_string(),
            args,
            expected,
            inits: std::mem::take(&mut pending),
            line,
        });
    }
    if !pending.is_empty() {
        return Err(SuiteError::Syntax { line: text.lines().count(), msg: "`set` lines without a test".into() });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TestOutcome {
    Pass,
    Fail,
    Errored,
    /// Ran without an expectation.
    Ran,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRun {
    pub name: String,
    pub outcome: TestOutcome,
    pub expected: Option<Expected>,
    pub result: Outcome,
    pub reports: Vec<RequirementReport>,
    pub trace: Option<Vec<Event>>,
}

impl TestRun {
    pub fn actual_text(&self) -> String {
        match &self.result {
            Outcome::Returned(Some(v)) => v.to_string(),
            Outcome::Returned(None) => "void".into(),
            Outcome::Errored { kind, func, offset } => format!("!error ({kind} at {func}@+{offset})"),
        }
    }
}

fn judge(expected: &Option<Expected>, result: &Outcome) -> TestOutcome {
    match (expected, result) {
        (None, Outcome::Errored { .. }) => TestOutcome::Errored,
        (None, _) => TestOutcome::Ran,
        (Some(Expected::Error), Outcome::Errored { .. }) => TestOutcome::Pass,
        (Some(Expected::Value(_)), Outcome::Errored { .. }) => TestOutcome::Errored,
        (Some(Expected::Value(v)), Outcome::Returned(Some(a))) if v == a => TestOutcome::Pass,
        _ => TestOutcome::Fail,
    }
}

/// Runs one test with a fresh session.
pub fn run_test(
    vm: &Vm<'_>,
    reqs: &ReqSet,
    plan: &InstrumentationPlan,
    test: &TestSpec,
    record_trace: bool,
) -> Result<TestRun, SuiteError> {
    let mut session = MatchSession::new(vm.module(), reqs);
    let opts = RunOptions { record_trace, array_inits: test.inits.clone(), ..RunOptions::default() };
    let res = vm
        .run(&test.entry, &test.args, plan, &mut session, &opts)
        .map_err(|source| SuiteError::Run { test: test.name.clone(), source })?;
    let reports = session.finalize().expect("the VM delivers events in order");
    Ok(TestRun {
        name: test.name.clone(),
        outcome: judge(&test.expected, &res.outcome),
        expected: test.expected.clone(),
        result: res.outcome,
        reports,
        trace: res.trace,
    })
}

/// Runs every test, in parallel when enabled; results follow declaration
/// order.
pub fn run_suite(
    module: &ProgramModule,
    reqs: &ReqSet,
    tests: &[TestSpec],
    record_trace: bool,
) -> Result<Vec<TestRun>, SuiteError> {
    let vm = Vm::new(module);
    let plan = plan(module, reqs);
    par::map(tests, |t| run_test(&vm, reqs, &plan, t, record_trace)).into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Statement,
    Branch,
    Requirement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Row {
    pub kind: RowKind,
    pub name: String,
    pub cells: Vec<bool>,
    pub cumulative: bool,
}

impl Row {
    fn new(kind: RowKind, name: String, cells: Vec<bool>) -> Row {
        let cumulative = cells.iter().any(|&c| c);
        Row { kind, name, cells, cumulative }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSummary {
    pub name: String,
    pub outcome: TestOutcome,
    pub expected: Option<String>,
    pub actual: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequirementSummary {
    pub name: String,
    #[serde(rename = "satisfiedBy")]
    pub satisfied_by: Vec<String>,
    /// Per-test diagnostics keyed by test name.
    pub diagnostics: BTreeMap<String, Diagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub tests: Vec<TestSummary>,
    pub requirements: Vec<RequirementSummary>,
    /// Coverage matrix: element rows first, then requirement rows.
    #[serde(skip)]
    pub rows: Vec<Row>,
}

fn anchor_text(f: &Function, off: usize) -> String {
    match &f.code[off].label {
        Some(l) => format!("@{l}"),
        None => format!("@+{off}"),
    }
}

/// Statement and branch rows of `func`, from the compiler's statement and
/// decision tables. Needs recorded traces.
pub fn element_rows(module: &ProgramModule, func: &str, runs: &[TestRun]) -> Option<Vec<Row>> {
    let fi = module.function_index(func)?;
    let f = &module.functions[fi];
    let traces: Vec<&[Event]> = runs.iter().map(|r| r.trace.as_deref().unwrap_or(&[])).collect();
    let cfg = build_cfg(f);
    let mut rows = Vec::new();
    for &s in &f.stmts {
        let cells = traces
            .iter()
            .map(|t| {
                t.iter().any(|e| matches!(e.kind, EventKind::StatementReached { func, offset, .. } if func == fi && offset == s))
            })
            .collect();
        rows.push(Row::new(RowKind::Statement, format!("stmt {func}{}", anchor_text(f, s)), cells));
    }
    for d in &f.decisions {
        for tgt in [d.on_true, d.on_false] {
            let cells = traces.iter().map(|t| decision_taken(t, &cfg, fi, d.cond_start..d.cond_end, tgt)).collect();
            let name = format!("branch {func}{} -> {}", anchor_text(f, d.cond_start), anchor_text(f, tgt));
            rows.push(Row::new(RowKind::Branch, name, cells));
        }
    }
    Some(rows)
}

/// Whether control entered `tgt` straight from a block that leaves through
/// the condition code `cond`.
fn decision_taken(trace: &[Event], cfg: &Cfg, func: usize, cond: Range<usize>, tgt: usize) -> bool {
    let mut last: HashMap<u64, usize> = HashMap::new();
    for e in trace {
        if let EventKind::BlockEnter { func: f, frame, leader } = e.kind {
            if f != func {
                continue;
            }
            let prev = last.insert(frame, leader);
            if leader == tgt && matches!(prev, Some(p) if cond.contains(&cfg.blocks[cfg.block_of[p]].last())) {
                return true;
            }
        }
    }
    false
}

/// Assembles the suite report. `elements` lists functions whose statement
/// and branch rows are wanted; their runs must carry traces.
pub fn build_report(module: &ProgramModule, runs: &[TestRun], elements: &[String]) -> Result<SuiteReport, String> {
    let mut rows = Vec::new();
    for f in elements {
        rows.extend(element_rows(module, f, runs).ok_or_else(|| format!("unknown function `{f}`"))?);
    }
    let names: Vec<String> = runs.first().map(|r| r.reports.iter().map(|x| x.name.clone()).collect()).unwrap_or_default();
    let mut requirements = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let cells: Vec<bool> = runs.iter().map(|r| r.reports[i].satisfied).collect();
        requirements.push(RequirementSummary {
            name: name.clone(),
            satisfied_by: runs.iter().filter(|r| r.reports[i].satisfied).map(|r| r.name.clone()).collect(),
            diagnostics: runs.iter().map(|r| (r.name.clone(), r.reports[i].diagnostics.clone())).collect(),
        });
        rows.push(Row::new(RowKind::Requirement, name.clone(), cells));
    }
    let tests = runs
        .iter()
        .map(|r| TestSummary {
            name: r.name.clone(),
            outcome: r.outcome,
            expected: r.expected.as_ref().map(|e| e.to_string()),
            actual: r.actual_text(),
        })
        .collect();
    Ok(SuiteReport { tests, requirements, rows })
}

impl SuiteReport {
    /// 0 when every test passes and every requirement is satisfied by some
    /// test; 1 on a failing or erroring test; 2 on an uncovered requirement.
    pub fn exit_code(&self) -> i32 {
        if self.tests.iter().any(|t| matches!(t.outcome, TestOutcome::Fail | TestOutcome::Errored)) {
            1
        } else if self.requirements.iter().any(|r| r.satisfied_by.is_empty()) {
            2
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Coverage matrix with one column per test and a cumulative column.
    pub fn render_matrix(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.chars().count()).max().unwrap_or(0).max(4);
        let cols: Vec<String> = self.tests.iter().map(|t| t.name.clone()).chain(["all".to_string()]).collect();
        let mut out = String::new();
        let _ = write!(out, "{:width$}", "");
        for c in &cols {
            let _ = write!(out, "  {c}");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:width$}", r.name);
            for (c, v) in cols.iter().zip(r.cells.iter().chain([&r.cumulative])) {
                let mark = if *v { "✓" } else { "✗" };
                let _ = write!(out, "  {mark:<w$}", w = c.chars().count());
            }
            out.push('\n');
        }
        out
    }

    /// Per-test outcomes and per-requirement verdicts with diagnostics.
    pub fn render_check(&self) -> String {
        let mut out = String::new();
        for t in &self.tests {
            let tag = match t.outcome {
                TestOutcome::Pass => "PASS",
                TestOutcome::Fail => "FAIL",
                TestOutcome::Errored => "ERROR",
                TestOutcome::Ran => "RAN",
            };
            match &t.expected {
                Some(e) => {
                    let _ = writeln!(out, "{tag} {}: expected {e}, actual {}", t.name, t.actual);
                }
                None => {
                    let _ = writeln!(out, "{tag} {}: actual {}", t.name, t.actual);
                }
            }
        }
        for r in &self.requirements {
            if r.satisfied_by.is_empty() {
                let _ = writeln!(out, "UNCOVERED {}", r.name);
                for (test, d) in &r.diagnostics {
                    let _ = writeln!(out, "  {test}: {}", diag_text(d));
                }
            } else {
                let _ = writeln!(out, "COVERED {} by {}", r.name, r.satisfied_by.join(", "));
            }
        }
        out
    }
}

fn diag_text(d: &Diagnostics) -> String {
    let mut parts = Vec::new();
    if let Some(p) = &d.str_progress {
        parts.push(format!("str progress {}/{}", p.completed, p.total));
    }
    if let Some(c) = &d.rtr_count {
        let hi = c.hi.map_or("_".to_string(), |h| h.to_string());
        parts.push(format!("rtr count {} (bounds {}..{hi})", c.count, c.lo));
    }
    if let Some(f) = &d.predicate_failure {
        parts.push(format!("predicate {f}"));
    }
    parts.extend(d.notes.iter().cloned());
    let counts: Vec<String> = d.elements.iter().map(|e| format!("{} x{}", e.element, e.count)).collect();
    parts.push(counts.join(", "));
    parts.join("; ")
}
