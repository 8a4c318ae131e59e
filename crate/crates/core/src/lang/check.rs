//! Module verifier: name resolution, jump targets, typed stack discipline and
//! termination. Every module produced by the compiler, the assembler or the
//! `.ubc` loader goes through [`verify_module`].

use std::collections::{BTreeSet, HashSet};

use super::ir::{Function, Intrinsic, Opcode, ProgramModule, ScalarType};
use super::LangError;

/// Basic-block leaders of a function: offset 0, every jump target and every
/// instruction following a jump or `ret`.
pub fn leaders(func: &Function) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    if func.code.is_empty() {
        return out;
    }
    out.insert(0);
    for ins in &func.code {
        if let Some(t) = ins.opcode.target() {
            out.insert(t);
        }
        if ins.opcode.is_terminator() && ins.offset + 1 < func.code.len() {
            out.insert(ins.offset + 1);
        }
    }
    out
}

fn err(func: &Function, offset: usize, msg: impl Into<String>) -> LangError {
    LangError::StackDiscipline { func: func.name.clone(), offset, msg: msg.into() }
}

fn invalid(func: &str, msg: impl Into<String>) -> LangError {
    LangError::Invalid { func: func.to_string(), msg: msg.into() }
}

pub fn verify_module(module: &ProgramModule) -> Result<(), LangError> {
    let mut names = HashSet::new();
    for n in module
        .globals
        .iter()
        .map(|g| &g.name)
        .chain(module.arrays.iter().map(|a| &a.name))
        .chain(module.functions.iter().map(|f| &f.name))
    {
        if !names.insert(n.as_str()) {
            return Err(invalid(n, "duplicate top-level name"));
        }
    }
    for g in &module.globals {
        if g.init.ty() != g.ty {
            return Err(invalid(&g.name, "global initializer type mismatch"));
        }
    }
    for f in &module.functions {
        verify_function(module, f)?;
    }
    Ok(())
}

fn verify_function(module: &ProgramModule, func: &Function) -> Result<(), LangError> {
    let mut locals = HashSet::new();
    for p in func.all_locals() {
        if !locals.insert(p.name.as_str()) {
            return Err(invalid(&func.name, format!("duplicate local `{}`", p.name)));
        }
    }
    let mut labels = HashSet::new();
    for (i, ins) in func.code.iter().enumerate() {
        if ins.offset != i {
            return Err(err(func, i, "offset does not match position"));
        }
        if let Some(l) = &ins.label {
            if !labels.insert(l.as_str()) {
                return Err(invalid(&func.name, format!("duplicate label `{l}`")));
            }
        }
        if let Some(t) = ins.opcode.target() {
            if t >= func.code.len() {
                return Err(err(func, i, format!("jump target {t} out of range")));
            }
        }
        match &ins.opcode {
            Opcode::Call(callee) if module.function(callee).is_none() => {
                return Err(err(func, i, format!("call to undeclared function `{callee}`")));
            }
            _ => {}
        }
    }
    if func.code.is_empty() {
        return Err(invalid(&func.name, "function has no instructions"));
    }
    let last = &func.code[func.code.len() - 1].opcode;
    if !matches!(last, Opcode::Ret | Opcode::Jmp(_)) {
        return Err(err(func, func.code.len() - 1, "control falls off the end of the function"));
    }
    for s in &func.stmts {
        if *s >= func.code.len() {
            return Err(invalid(&func.name, "statement table offset out of range"));
        }
    }
    for d in &func.decisions {
        let n = func.code.len();
        if d.cond_start >= d.cond_end || d.cond_end > n || d.on_true >= n || d.on_false >= n {
            return Err(invalid(&func.name, "decision table entry out of range"));
        }
    }
    check_blocks(module, func)?;
    check_reachability(func)
}

fn var_type(module: &ProgramModule, func: &Function, ins: usize, op: &Opcode) -> Result<ScalarType, LangError> {
    let missing = |kind: &str, n: &str| err(func, ins, format!("undeclared {kind} `{n}`"));
    match op {
        Opcode::Load(n) | Opcode::Store(n) => func.local_type(n).ok_or_else(|| missing("local", n)),
        Opcode::GLoad(n) | Opcode::GStore(n) => module.global(n).map(|g| g.ty).ok_or_else(|| missing("global", n)),
        Opcode::ALoad(n) | Opcode::AStore(n) => module.array(n).map(|a| a.elem).ok_or_else(|| missing("array", n)),
        _ => unreachable!("not a variable access"),
    }
}

/// Typed stack simulation. The stack must be empty at every block boundary,
/// so a pushed value is always consumed inside its own block.
fn check_blocks(module: &ProgramModule, func: &Function) -> Result<(), LangError> {
    use ScalarType::*;
    let leaders = leaders(func);
    let mut stack: Vec<ScalarType> = Vec::new();
    for ins in &func.code {
        let o = ins.offset;
        if leaders.contains(&o) && !stack.is_empty() {
            return Err(err(func, o - 1, "value left on the stack at end of block"));
        }
        let pop = |want: Option<ScalarType>, stack: &mut Vec<ScalarType>| -> Result<ScalarType, LangError> {
            let got = stack.pop().ok_or_else(|| err(func, o, "stack underflow"))?;
            match want {
                Some(w) if w != got => Err(err(func, o, format!("expected {w} operand, found {got}"))),
                _ => Ok(got),
            }
        };
        match &ins.opcode {
            Opcode::ConstI(_) => stack.push(Int),
            Opcode::ConstF(_) => stack.push(Float),
            Opcode::ConstB(_) => stack.push(Bool),
            op @ (Opcode::Load(_) | Opcode::GLoad(_)) => stack.push(var_type(module, func, o, op)?),
            op @ (Opcode::Store(_) | Opcode::GStore(_)) => {
                let t = var_type(module, func, o, op)?;
                pop(Some(t), &mut stack)?;
            }
            op @ Opcode::ALoad(_) => {
                let t = var_type(module, func, o, op)?;
                pop(Some(Int), &mut stack)?;
                stack.push(t);
            }
            op @ Opcode::AStore(_) => {
                let t = var_type(module, func, o, op)?;
                pop(Some(t), &mut stack)?;
                pop(Some(Int), &mut stack)?;
            }
            Opcode::Bin(b) => {
                let t = b.operand_type();
                pop(Some(t), &mut stack)?;
                pop(Some(t), &mut stack)?;
                stack.push(t);
            }
            Opcode::NegI => {
                pop(Some(Int), &mut stack)?;
                stack.push(Int);
            }
            Opcode::NegF => {
                pop(Some(Float), &mut stack)?;
                stack.push(Float);
            }
            Opcode::Cmp(_, t) => {
                pop(Some(*t), &mut stack)?;
                pop(Some(*t), &mut stack)?;
                stack.push(Bool);
            }
            Opcode::Not => {
                pop(Some(Bool), &mut stack)?;
                stack.push(Bool);
            }
            Opcode::I2F => {
                pop(Some(Int), &mut stack)?;
                stack.push(Float);
            }
            Opcode::F2I => {
                pop(Some(Float), &mut stack)?;
                stack.push(Int);
            }
            Opcode::Brt(_) | Opcode::Brf(_) => {
                pop(Some(Bool), &mut stack)?;
            }
            Opcode::Jmp(_) => {}
            Opcode::Call(name) => {
                let callee = module.function(name).expect("checked above");
                for p in callee.params.iter().rev() {
                    pop(Some(p.ty), &mut stack)?;
                }
                if let Some(r) = callee.ret {
                    stack.push(r);
                }
            }
            Opcode::Intr(Intrinsic::Print) => {
                pop(None, &mut stack)?;
            }
            Opcode::Intr(_) => {
                pop(Some(Float), &mut stack)?;
                stack.push(Float);
            }
            Opcode::Ret => {
                if let Some(r) = func.ret {
                    pop(Some(r), &mut stack)?;
                }
            }
        }
        if ins.opcode.is_terminator() && !stack.is_empty() {
            return Err(err(func, o, "value left on the stack at end of block"));
        }
    }
    Ok(())
}

/// Successor offsets of an instruction (`None` stands for the function exit).
pub fn successors(func: &Function, offset: usize) -> Vec<Option<usize>> {
    let n = func.code.len();
    let next = if offset + 1 < n { Some(offset + 1) } else { None };
    match &func.code[offset].opcode {
        Opcode::Ret => vec![None],
        Opcode::Jmp(t) => vec![Some(*t)],
        Opcode::Brt(t) | Opcode::Brf(t) => vec![next, Some(*t)],
        _ => vec![next],
    }
}

/// Every instruction must be reachable from entry and must be able to reach a `ret`.
fn check_reachability(func: &Function) -> Result<(), LangError> {
    let n = func.code.len();
    let mut seen = vec![false; n];
    let mut work = vec![0usize];
    seen[0] = true;
    while let Some(o) = work.pop() {
        for s in successors(func, o).into_iter().flatten() {
            if !seen[s] {
                seen[s] = true;
                work.push(s);
            }
        }
    }
    if let Some(o) = seen.iter().position(|s| !s) {
        return Err(err(func, o, "unreachable instruction"));
    }
    // Backward reachability from `ret` instructions.
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut reaches = vec![false; n];
    let mut work = Vec::new();
    for o in 0..n {
        for s in successors(func, o) {
            match s {
                Some(s) => preds[s].push(o),
                None => {
                    reaches[o] = true;
                    work.push(o);
                }
            }
        }
    }
    while let Some(o) = work.pop() {
        for &p in &preds[o] {
            if !reaches[p] {
                reaches[p] = true;
                work.push(p);
            }
        }
    }
    if let Some(o) = reaches.iter().position(|r| !r) {
        return Err(err(func, o, "instruction cannot reach a return"));
    }
    Ok(())
}

/// For every instruction, the offset of the instruction consuming the value
/// it pushes (`None` for non-producers). Requires a verified function.
pub fn consumers(module: &ProgramModule, func: &Function) -> Vec<Option<usize>> {
    let mut out = vec![None; func.code.len()];
    let mut stack: Vec<usize> = Vec::new();
    for ins in &func.code {
        let (pops, pushes) = module.stack_effect(func, &ins.opcode);
        for _ in 0..pops {
            let producer = stack.pop().expect("verified stack discipline");
            out[producer] = Some(ins.offset);
        }
        if pushes == 1 {
            stack.push(ins.offset);
        }
    }
    out
}
