//! The `intentcov` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::bdt::build_bdt;
use crate::crossref::{migrate, Resolutions};
use crate::lang::{assemble, compile_source, disassemble, load_module, save_module, ProgramModule};
use crate::requirements::{format_reqs, parse_reqs, validate, ReqSet};
use crate::suite::{build_report, parse_tests, run_suite, TestSpec};
use crate::vm::{InstrumentationPlan, NullSink, RunOptions, Vm};

#[derive(Parser, Debug)]
#[command(name = "intentcov", version, about = "User-defined test requirements over StackIR programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compile MiniLang source to a `.ubc` module.
    Compile {
        src: PathBuf,
        #[arg(short)]
        o: PathBuf,
    },
    /// Assemble StackIR text to a `.ubc` module.
    Asm {
        src: PathBuf,
        #[arg(short)]
        o: PathBuf,
    },
    /// Print a module as StackIR assembly.
    Disasm {
        prog: PathBuf,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Dump the dependence tree of one function.
    Bdt {
        prog: PathBuf,
        #[arg(long)]
        function: String,
    },
    /// Print the full event trace of tests.
    Trace {
        prog: PathBuf,
        tests: PathBuf,
        #[arg(long)]
        test: Option<String>,
    },
    /// Run tests and check requirement coverage.
    Check {
        prog: PathBuf,
        reqs: PathBuf,
        tests: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        record_trace: bool,
    },
    /// Coverage matrix of requirements (and optionally statements and branches).
    Report {
        prog: PathBuf,
        reqs: PathBuf,
        tests: PathBuf,
        #[arg(long, num_args = 1..)]
        elements: Vec<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Migrate requirements from one program version to the next.
    Map {
        old: PathBuf,
        new: PathBuf,
        reqs: PathBuf,
        #[arg(long)]
        resolve: Option<PathBuf>,
        #[arg(short)]
        o: Option<PathBuf>,
    },
}

type CmdResult = Result<i32, String>;

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Loads a program from `.ubc`, `.uasm` or `.mls` by extension.
pub fn load_program(path: &Path) -> Result<ProgramModule, String> {
    let at = |e: crate::lang::LangError| format!("{}: {e}", path.display());
    match path.extension().and_then(|e| e.to_str()) {
        Some("mls") => compile_source(&read(path)?).map_err(at),
        Some("uasm") => assemble(&read(path)?).map_err(at),
        _ => load_module(path).map_err(at),
    }
}

fn load_reqs(path: &Path, module: &ProgramModule) -> Result<ReqSet, String> {
    let at = |e: crate::requirements::ReqError| format!("{}: {e}", path.display());
    validate(&parse_reqs(&read(path)?).map_err(at)?, module).map_err(at)
}

fn load_tests(path: &Path) -> Result<Vec<TestSpec>, String> {
    parse_tests(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn save(m: &ProgramModule, path: &Path) -> Result<(), String> {
    save_module(m, path).map_err(|e| format!("{}: {e}", path.display()))
}

fn exec(cmd: Command, out: &mut dyn Write) -> CmdResult {
    let w = |out: &mut dyn Write, s: &str| out.write_all(s.as_bytes()).map_err(|e| e.to_string());
    match cmd {
        Command::Compile { src, o } => {
            let m = compile_source(&read(&src)?).map_err(|e| format!("{}: {e}", src.display()))?;
            save(&m, &o)?;
            Ok(0)
        }
        Command::Asm { src, o } => {
            let m = assemble(&read(&src)?).map_err(|e| format!("{}: {e}", src.display()))?;
            save(&m, &o)?;
            Ok(0)
        }
        Command::Disasm { prog, o } => {
            let text = disassemble(&load_program(&prog)?);
            match o {
                Some(p) => write_file(&p, &text)?,
                None => w(out, &text)?,
            }
            Ok(0)
        }
        Command::Bdt { prog, function } => {
            let m = load_program(&prog)?;
            let f = m.function(&function).ok_or_else(|| format!("unknown function `{function}`"))?;
            w(out, &build_bdt(&m, f).dump(f))?;
            Ok(0)
        }
        Command::Trace { prog, tests, test } => {
            let m = load_program(&prog)?;
            let specs = load_tests(&tests)?;
            let vm = Vm::new(&m);
            let plan = InstrumentationPlan::empty(&m);
            let mut found = false;
            for t in specs.iter().filter(|t| test.as_ref().map_or(true, |n| *n == t.name)) {
                found = true;
                let opts = RunOptions { record_trace: true, array_inits: t.inits.clone(), ..RunOptions::default() };
                let r = vm.run(&t.entry, &t.args, &plan, &mut NullSink, &opts).map_err(|e| format!("{}: {e}", t.name))?;
                w(out, &format!("# {}\n", t.name))?;
                for ev in r.trace.unwrap_or_default() {
                    w(out, &format!("{}\n", ev.render(&m)))?;
                }
            }
            if !found {
                return Err(format!("no test named `{}`", test.unwrap_or_default()));
            }
            Ok(0)
        }
        Command::Check { prog, reqs, tests, format, record_trace } => {
            let m = load_program(&prog)?;
            let r = load_reqs(&reqs, &m)?;
            let runs = run_suite(&m, &r, &load_tests(&tests)?, record_trace).map_err(|e| e.to_string())?;
            let report = build_report(&m, &runs, &[])?;
            match format {
                Format::Text => w(out, &report.render_check())?,
                Format::Json => w(out, &format!("{}\n", report.to_json()))?,
            }
            Ok(report.exit_code())
        }
        Command::Report { prog, reqs, tests, elements, format } => {
            let m = load_program(&prog)?;
            let r = load_reqs(&reqs, &m)?;
            let runs = run_suite(&m, &r, &load_tests(&tests)?, !elements.is_empty()).map_err(|e| e.to_string())?;
            let report = build_report(&m, &runs, &elements)?;
            match format {
                Format::Text => w(out, &report.render_matrix())?,
                Format::Json => w(out, &format!("{}\n", report.to_json()))?,
            }
            Ok(report.exit_code())
        }
        Command::Map { old, new, reqs, resolve, o } => {
            let a = load_program(&old)?;
            let b = load_program(&new)?;
            let r = load_reqs(&reqs, &a)?;
            let res = match resolve {
                Some(p) => Resolutions::parse(&read(&p)?).map_err(|e| format!("{}: {e}", p.display()))?,
                None => Resolutions::default(),
            };
            let (migrated, issues) = migrate(&r, &a, &b, &res);
            let text = format_reqs(&migrated);
            match o {
                Some(p) => write_file(&p, &text)?,
                None => w(out, &text)?,
            }
            for i in &issues {
                w(out, &format!("issue\t{i}\n"))?;
            }
            Ok(if issues.is_empty() { 0 } else { 2 })
        }
    }
}

/// Runs the command line; returns the process exit code.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 1;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match exec(cli.command, out) {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}
