//! Textual StackIR assembly (`.uasm`).
//!
//! ```text
//! # comment
//! global limit:int = 10
//! array tbl:int[9]
//! fn f(x:int):int
//!   .locals y:int
//!   load x @s1
//!   brf done
//!   ...
//! end
//! ```
//!
//! Jump operands are offsets or labels; offsets follow listing order.

use std::fmt::Write as _;

use super::check::verify_module;
use super::ir::*;
use super::LangError;

fn asm_err(line: usize, msg: impl Into<String>) -> LangError {
    LangError::Asm { line, msg: msg.into() }
}

pub(crate) fn parse_value(ty: ScalarType, s: &str) -> Option<Value> {
    match ty {
        ScalarType::Int => s.parse().ok().map(Value::Int),
        ScalarType::Float => s.parse().ok().map(Value::Float),
        ScalarType::Bool => match s {
            "true" => Some(Value::Bool(true)),
            "false" => Some(Value::Bool(false)),
            _ => None,
        },
    }
}

pub(crate) fn parse_param(s: &str) -> Option<Param> {
    let (n, t) = s.trim().split_once(':')?;
    let name = n.trim();
    if !is_identifier(name) {
        return None;
    }
    Some(Param { name: name.to_string(), ty: ScalarType::parse(t.trim())? })
}

pub(crate) fn parse_ret(s: &str) -> Option<Option<ScalarType>> {
    match s.trim() {
        "void" => Some(None),
        t => ScalarType::parse(t).map(Some),
    }
}

pub(crate) fn parse_offsets(words: &[&str]) -> Option<Vec<usize>> {
    words.iter().map(|w| w.parse().ok()).collect()
}

/// Splits an instruction body into mnemonic, operands and optional label.
pub(crate) fn split_instruction(text: &str) -> (Vec<&str>, Option<&str>) {
    let mut words: Vec<&str> = text.split_whitespace().collect();
    let label = match words.last() {
        Some(w) if w.starts_with('@') => {
            let l = &w[1..];
            words.pop();
            Some(l)
        }
        _ => None,
    };
    (words, label)
}

struct PendingFn {
    func: Function,
    header_line: usize,
    lines: Vec<(usize, Vec<String>, Option<String>)>,
}

pub fn assemble(text: &str) -> Result<ProgramModule, LangError> {
    let mut module = ProgramModule::default();
    let mut pending: Vec<PendingFn> = Vec::new();
    let mut current: Option<PendingFn> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(cur) = current.as_mut() {
            if body == "end" {
                pending.push(current.take().expect("open function"));
                continue;
            }
            let words: Vec<&str> = body.split_whitespace().collect();
            match words[0] {
                ".locals" => {
                    for w in &words[1..] {
                        let p = parse_param(w).ok_or_else(|| asm_err(line, format!("bad local `{w}`")))?;
                        cur.func.locals.push(p);
                    }
                }
                ".stmts" => {
                    cur.func.stmts =
                        parse_offsets(&words[1..]).ok_or_else(|| asm_err(line, "bad statement table"))?;
                }
                ".decision" => {
                    let v = parse_offsets(&words[1..])
                        .filter(|v| v.len() == 4)
                        .ok_or_else(|| asm_err(line, "`.decision` takes four offsets"))?;
                    cur.func.decisions.push(Decision { cond_start: v[0], cond_end: v[1], on_true: v[2], on_false: v[3] });
                }
                _ => {
                    let (words, label) = split_instruction(body);
                    if let Some(l) = label {
                        if !is_identifier(l) {
                            return Err(asm_err(line, format!("bad label `@{l}`")));
                        }
                    }
                    cur.lines.push((line, words.iter().map(|s| s.to_string()).collect(), label.map(str::to_string)));
                }
            }
            continue;
        }
        if let Some(rest) = body.strip_prefix("global ") {
            let (decl, init) = match rest.split_once('=') {
                Some((d, i)) => (d, Some(i.trim())),
                None => (rest, None),
            };
            let p = parse_param(decl).ok_or_else(|| asm_err(line, "bad global declaration"))?;
            let init = match init {
                None => Value::zero(p.ty),
                Some(i) => parse_value(p.ty, i).ok_or_else(|| asm_err(line, format!("bad initializer `{i}`")))?,
            };
            module.globals.push(GlobalScalar { name: p.name, ty: p.ty, init });
        } else if let Some(rest) = body.strip_prefix("array ") {
            let bad = || asm_err(line, "bad array declaration");
            let (name, ty) = rest.split_once(':').ok_or_else(bad)?;
            let (elem, len) = ty.trim().trim_end_matches(']').split_once('[').ok_or_else(bad)?;
            let elem = ScalarType::parse(elem.trim()).ok_or_else(bad)?;
            let len: usize = len.trim().parse().map_err(|_| bad())?;
            if !is_identifier(name.trim()) || len == 0 {
                return Err(bad());
            }
            module.arrays.push(GlobalArray { name: name.trim().to_string(), elem, len });
        } else if let Some(rest) = body.strip_prefix("fn ") {
            let bad = || asm_err(line, "bad function header");
            let (name, rest) = rest.split_once('(').ok_or_else(bad)?;
            let (params, ret) = rest.split_once(')').ok_or_else(bad)?;
            let ret = parse_ret(ret.trim().strip_prefix(':').ok_or_else(bad)?).ok_or_else(bad)?;
            let params = if params.trim().is_empty() {
                Vec::new()
            } else {
                params.split(',').map(parse_param).collect::<Option<Vec<_>>>().ok_or_else(bad)?
            };
            if !is_identifier(name.trim()) {
                return Err(bad());
            }
            current = Some(PendingFn { func: Function::new(name.trim(), params, ret), header_line: line, lines: Vec::new() });
        } else {
            return Err(asm_err(line, format!("unexpected `{body}` outside a function")));
        }
    }
    if let Some(cur) = current {
        return Err(asm_err(cur.header_line, format!("function `{}` is missing `end`", cur.func.name)));
    }
    for p in pending {
        let mut func = p.func;
        let labels: Vec<(String, usize)> =
            p.lines.iter().enumerate().filter_map(|(i, (_, _, l))| l.clone().map(|l| (l, i))).collect();
        let resolve = |s: &str| -> Option<usize> {
            s.parse().ok().or_else(|| labels.iter().find(|(l, _)| l == s).map(|(_, o)| *o))
        };
        for (offset, (line, words, label)) in p.lines.iter().enumerate() {
            let ops: Vec<&str> = words[1..].iter().map(String::as_str).collect();
            let opcode = parse_opcode(&words[0], &ops, &resolve).map_err(|m| asm_err(*line, m))?;
            func.code.push(Instruction { offset, opcode, label: label.clone() });
        }
        module.functions.push(func);
    }
    verify_module(&module)?;
    Ok(module)
}

fn params_text(ps: &[Param], sep: &str) -> String {
    ps.iter().map(|p| format!("{}:{}", p.name, p.ty)).collect::<Vec<_>>().join(sep)
}

pub(crate) fn ret_text(r: Option<ScalarType>) -> &'static str {
    r.map_or("void", |t| t.name())
}

pub fn disassemble(module: &ProgramModule) -> String {
    let mut out = String::from("# StackIR assembly\n");
    for g in &module.globals {
        let _ = writeln!(out, "global {}:{} = {}", g.name, g.ty, g.init);
    }
    for a in &module.arrays {
        let _ = writeln!(out, "array {}:{}[{}]", a.name, a.elem, a.len);
    }
    for f in &module.functions {
        let _ = writeln!(out, "fn {}({}):{}", f.name, params_text(&f.params, ", "), ret_text(f.ret));
        if !f.locals.is_empty() {
            let _ = writeln!(out, "  .locals {}", params_text(&f.locals, " "));
        }
        if !f.stmts.is_empty() {
            let s: Vec<String> = f.stmts.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "  .stmts {}", s.join(" "));
        }
        for d in &f.decisions {
            let _ = writeln!(out, "  .decision {} {} {} {}", d.cond_start, d.cond_end, d.on_true, d.on_false);
        }
        for ins in &f.code {
            match &ins.label {
                Some(l) => {
                    let _ = writeln!(out, "  {} @{}", ins.opcode, l);
                }
                None => {
                    let _ = writeln!(out, "  {}", ins.opcode);
                }
            }
        }
        out.push_str("end\n");
    }
    out
}
