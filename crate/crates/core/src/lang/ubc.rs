//! `.ubc` module files: line-oriented text with numbered instructions.
//!
//! ```text
//! UBC 1
//! global limit int 10
//! array tbl int 9
//! fn f x:int -> int
//! locals y:int
//! stmts 0 3
//! decision 0 2 2 5
//! 0: load x @s1
//! ...
//! end
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::asm::{parse_offsets, parse_param, parse_ret, parse_value, ret_text, split_instruction};
use super::check::verify_module;
use super::ir::*;
use super::LangError;

const HEADER: &str = "UBC 1";

fn ferr(line: usize, msg: impl Into<String>) -> LangError {
    LangError::Format { line, msg: msg.into() }
}

pub fn write_module(module: &ProgramModule) -> String {
    let mut out = format!("{HEADER}\n");
    for g in &module.globals {
        let _ = writeln!(out, "global {} {} {}", g.name, g.ty, g.init);
    }
    for a in &module.arrays {
        let _ = writeln!(out, "array {} {} {}", a.name, a.elem, a.len);
    }
    for f in &module.functions {
        out.push_str("fn ");
        out.push_str(&f.name);
        for p in &f.params {
            let _ = write!(out, " {}:{}", p.name, p.ty);
        }
        let _ = writeln!(out, " -> {}", ret_text(f.ret));
        out.push_str("locals");
        for p in &f.locals {
            let _ = write!(out, " {}:{}", p.name, p.ty);
        }
        out.push('\n');
        out.push_str("stmts");
        for s in &f.stmts {
            let _ = write!(out, " {s}");
        }
        out.push('\n');
        for d in &f.decisions {
            let _ = writeln!(out, "decision {} {} {} {}", d.cond_start, d.cond_end, d.on_true, d.on_false);
        }
        for ins in &f.code {
            let _ = write!(out, "{}: {}", ins.offset, ins.opcode);
            if let Some(l) = &ins.label {
                let _ = write!(out, " @{l}");
            }
            out.push('\n');
        }
        out.push_str("end\n");
    }
    out
}

pub fn read_module(text: &str) -> Result<ProgramModule, LangError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0usize;
    let next = |i: &mut usize| -> Option<(usize, &str)> {
        let l = lines.get(*i).copied();
        *i += 1;
        l.map(|l| (*i, l))
    };
    match next(&mut i) {
        Some((_, h)) if h == HEADER => {}
        Some((n, _)) => return Err(ferr(n, "missing `UBC 1` header")),
        None => return Err(ferr(1, "empty file")),
    }
    let mut module = ProgramModule::default();
    while let Some((n, line)) = next(&mut i) {
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words[0] {
            "global" => {
                let bad = || ferr(n, "bad global line");
                if words.len() != 4 {
                    return Err(bad());
                }
                let ty = ScalarType::parse(words[2]).ok_or_else(bad)?;
                let init = parse_value(ty, words[3]).ok_or_else(bad)?;
                module.globals.push(GlobalScalar { name: words[1].to_string(), ty, init });
            }
            "array" => {
                let bad = || ferr(n, "bad array line");
                if words.len() != 4 {
                    return Err(bad());
                }
                let elem = ScalarType::parse(words[2]).ok_or_else(bad)?;
                let len = words[3].parse().map_err(|_| bad())?;
                module.arrays.push(GlobalArray { name: words[1].to_string(), elem, len });
            }
            "fn" => {
                let bad = |n: usize| ferr(n, "bad function signature");
                let arrow = words.iter().position(|w| *w == "->").ok_or_else(|| bad(n))?;
                if arrow + 2 != words.len() || words.len() < 3 {
                    return Err(bad(n));
                }
                let params =
                    words[2..arrow].iter().map(|w| parse_param(w)).collect::<Option<Vec<_>>>().ok_or_else(|| bad(n))?;
                let ret = parse_ret(words[arrow + 1]).ok_or_else(|| bad(n))?;
                let mut func = Function::new(words[1], params, ret);
                let (ln, locals) = next(&mut i).ok_or_else(|| ferr(n + 1, "truncated file: expected `locals`"))?;
                let lw: Vec<&str> = locals.split_whitespace().collect();
                if lw.first() != Some(&"locals") {
                    return Err(ferr(ln, "expected `locals` line"));
                }
                func.locals = lw[1..].iter().map(|w| parse_param(w)).collect::<Option<_>>().ok_or_else(|| ferr(ln, "bad local"))?;
                let (sn, stmts) = next(&mut i).ok_or_else(|| ferr(ln + 1, "truncated file: expected `stmts`"))?;
                let sw: Vec<&str> = stmts.split_whitespace().collect();
                if sw.first() != Some(&"stmts") {
                    return Err(ferr(sn, "expected `stmts` line"));
                }
                func.stmts = parse_offsets(&sw[1..]).ok_or_else(|| ferr(sn, "bad statement table"))?;
                let mut last = sn;
                let mut ended = false;
                while let Some((m, l)) = next(&mut i) {
                    last = m;
                    if l == "end" {
                        ended = true;
                        break;
                    }
                    if let Some(rest) = l.strip_prefix("decision ") {
                        let w: Vec<&str> = rest.split_whitespace().collect();
                        let v = parse_offsets(&w).filter(|v| v.len() == 4).ok_or_else(|| ferr(m, "bad decision"))?;
                        func.decisions.push(Decision { cond_start: v[0], cond_end: v[1], on_true: v[2], on_false: v[3] });
                        continue;
                    }
                    let (off, body) = l.split_once(':').ok_or_else(|| ferr(m, "expected `offset: instruction`"))?;
                    let off: usize = off.trim().parse().map_err(|_| ferr(m, "bad offset"))?;
                    if off != func.code.len() {
                        return Err(ferr(m, format!("expected offset {}, found {off}", func.code.len())));
                    }
                    let (words, label) = split_instruction(body);
                    if words.is_empty() {
                        return Err(ferr(m, "missing opcode"));
                    }
                    let opcode = parse_opcode(words[0], &words[1..], &|s| s.parse().ok()).map_err(|e| ferr(m, e))?;
                    func.code.push(Instruction { offset: off, opcode, label: label.map(str::to_string) });
                }
                if !ended {
                    return Err(ferr(last + 1, format!("truncated file: function `{}` has no `end`", func.name)));
                }
                module.functions.push(func);
            }
            other => return Err(ferr(n, format!("unexpected `{other}`"))),
        }
    }
    verify_module(&module)?;
    Ok(module)
}

pub fn save_module(module: &ProgramModule, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, write_module(module))
}

/// Reads and verifies a module. I/O failures are reported as line 0.
pub fn load_module(path: &Path) -> Result<ProgramModule, LangError> {
    let text = std::fs::read_to_string(path).map_err(|e| ferr(0, format!("{}: {e}", path.display())))?;
    read_module(&text)
}
