//! MiniLang to StackIR code generation.
//!
//! Scheme: expressions evaluate left to right onto the operand stack;
//! conditions of `if`/`while` compile to short-circuit branch chains
//! (`brt`/`brf`); a statement label names the first instruction generated for
//! the statement. `&&`/`||` used as values go through a hidden local so that
//! the stack stays empty at every block boundary.

use std::collections::HashSet;

use super::check::verify_module;
use super::ir::*;
use super::source::*;
use super::LangError;

pub fn compile(unit: &SourceUnit) -> Result<ProgramModule, LangError> {
    let mut module = ProgramModule::default();
    let mut seen = HashSet::new();
    let mut decls = Vec::new();
    for item in &unit.items {
        let (name, pos) = match item {
            Item::Global { name, pos, .. } | Item::Array { name, pos, .. } => (name, pos),
            Item::Func(f) => (&f.name, &f.pos),
        };
        if !seen.insert(name.clone()) || Intrinsic::parse(name).is_some() {
            return Err(type_err(*pos, format!("duplicate or reserved name `{name}`")));
        }
        match item {
            Item::Global { name, ty, init, pos } => {
                let init = match init {
                    None => Value::zero(*ty),
                    Some(lit) => {
                        let v = lit_value(*lit);
                        if v.ty() != *ty {
                            return Err(type_err(*pos, format!("initializer of `{name}` is not {ty}")));
                        }
                        v
                    }
                };
                module.globals.push(GlobalScalar { name: name.clone(), ty: *ty, init });
            }
            Item::Array { name, elem, len, .. } => {
                module.arrays.push(GlobalArray { name: name.clone(), elem: *elem, len: *len });
            }
            Item::Func(f) => {
                let params = f.params.iter().map(|(n, t)| Param { name: n.clone(), ty: *t }).collect();
                module.functions.push(Function::new(f.name.clone(), params, f.ret));
                decls.push(f);
            }
        }
    }
    for (i, decl) in decls.into_iter().enumerate() {
        let func = FnGen::new(&module, decl)?.run(decl)?;
        module.functions[i] = func;
    }
    verify_module(&module)?;
    Ok(module)
}

fn lit_value(l: Literal) -> Value {
    match l {
        Literal::Int(v) => Value::Int(v),
        Literal::Float(v) => Value::Float(v),
        Literal::Bool(v) => Value::Bool(v),
    }
}

fn type_err(pos: Pos, msg: impl Into<String>) -> LangError {
    LangError::Type { line: pos.line, col: pos.col, msg: msg.into() }
}

fn undeclared(pos: Pos, name: &str) -> LangError {
    LangError::Undeclared { line: pos.line, col: pos.col, name: name.to_string() }
}

#[derive(Clone, Copy, PartialEq, Eq)]
struct LabelId(usize);

struct PendingDecision {
    cond_start: usize,
    cond_end: usize,
    on_false: LabelId,
}

struct FnGen<'m> {
    module: &'m ProgramModule,
    func: Function,
    /// Internal jump labels: resolved offset per id.
    labels: Vec<Option<usize>>,
    fixups: Vec<(usize, LabelId)>,
    decisions: Vec<PendingDecision>,
    source_labels: HashSet<String>,
    depth: usize,
    temp_counter: usize,
    reserved: HashSet<String>,
}

fn collect_names(stmts: &[Stmt], out: &mut HashSet<String>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Let { name, .. } => {
                out.insert(name.clone());
            }
            StmtKind::If { then, els, .. } => {
                collect_names(then, out);
                if let Some(e) = els {
                    collect_names(e, out);
                }
            }
            StmtKind::While { body, .. } => collect_names(body, out),
            _ => {}
        }
    }
}

fn block_returns(stmts: &[Stmt]) -> bool {
    stmts.iter().any(stmt_returns)
}

fn stmt_returns(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::If { then, els: Some(els), .. } => block_returns(then) && block_returns(els),
        _ => false,
    }
}

impl<'m> FnGen<'m> {
    fn new(module: &'m ProgramModule, decl: &FnDecl) -> Result<Self, LangError> {
        let func = module.function(&decl.name).expect("declared").clone();
        let mut names = HashSet::new();
        for p in &func.params {
            if !names.insert(p.name.clone()) {
                return Err(type_err(decl.pos, format!("duplicate parameter `{}`", p.name)));
            }
        }
        collect_names(&decl.body, &mut names);
        Ok(FnGen {
            module,
            func,
            labels: Vec::new(),
            fixups: Vec::new(),
            decisions: Vec::new(),
            source_labels: HashSet::new(),
            depth: 0,
            temp_counter: 0,
            reserved: names,
        })
    }

    fn run(mut self, decl: &FnDecl) -> Result<Function, LangError> {
        self.block(&decl.body)?;
        if !block_returns(&decl.body) {
            if self.func.ret.is_some() {
                return Err(type_err(decl.pos, format!("function `{}` may end without returning a value", decl.name)));
            }
            self.emit(Opcode::Ret);
        }
        for (at, id) in std::mem::take(&mut self.fixups) {
            let target = self.labels[id.0].expect("placed label");
            self.func.code[at].opcode = match &self.func.code[at].opcode {
                Opcode::Brt(_) => Opcode::Brt(target),
                Opcode::Brf(_) => Opcode::Brf(target),
                Opcode::Jmp(_) => Opcode::Jmp(target),
                other => unreachable!("fixup on {other}"),
            };
        }
        for d in std::mem::take(&mut self.decisions) {
            self.func.decisions.push(Decision {
                cond_start: d.cond_start,
                cond_end: d.cond_end,
                on_true: d.cond_end,
                on_false: self.labels[d.on_false.0].expect("placed label"),
            });
        }
        Ok(self.func)
    }

    fn here(&self) -> usize {
        self.func.code.len()
    }

    fn emit(&mut self, op: Opcode) {
        let (pops, pushes) = self.module.stack_effect(&self.func, &op);
        self.depth = self.depth + pushes - pops;
        let offset = self.here();
        self.func.code.push(Instruction { offset, opcode: op, label: None });
    }

    fn new_label(&mut self) -> LabelId {
        self.labels.push(None);
        LabelId(self.labels.len() - 1)
    }

    fn place(&mut self, l: LabelId) {
        self.labels[l.0] = Some(self.here());
    }

    fn emit_jump(&mut self, op: Opcode, l: LabelId) {
        self.fixups.push((self.here(), l));
        self.emit(op);
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), LangError> {
        let mut returned = false;
        for s in stmts {
            if returned {
                return Err(type_err(s.pos, "unreachable statement"));
            }
            self.stmt(s)?;
            returned = stmt_returns(s);
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), LangError> {
        let start = self.here();
        self.func.stmts.push(start);
        match &s.kind {
            StmtKind::Let { name, ty, init } => {
                if self.func.local_type(name).is_some() {
                    return Err(type_err(s.pos, format!("`{name}` is already declared")));
                }
                let t = self.expr(init)?;
                if t != *ty {
                    return Err(type_err(init.pos, format!("expected {ty}, found {t}")));
                }
                self.func.locals.push(Param { name: name.clone(), ty: *ty });
                self.emit(Opcode::Store(name.clone()));
            }
            StmtKind::Assign { name, index: None, value } => {
                let (op, ty) = if let Some(t) = self.func.local_type(name) {
                    (Opcode::Store(name.clone()), t)
                } else if let Some(g) = self.module.global(name) {
                    (Opcode::GStore(name.clone()), g.ty)
                } else {
                    return Err(undeclared(s.pos, name));
                };
                let t = self.expr(value)?;
                if t != ty {
                    return Err(type_err(value.pos, format!("cannot assign {t} to {ty} `{name}`")));
                }
                self.emit(op);
            }
            StmtKind::Assign { name, index: Some(idx), value } => {
                let elem = self.module.array(name).ok_or_else(|| undeclared(s.pos, name))?.elem;
                let it = self.expr(idx)?;
                if it != ScalarType::Int {
                    return Err(type_err(idx.pos, "array index must be int"));
                }
                let t = self.expr(value)?;
                if t != elem {
                    return Err(type_err(value.pos, format!("cannot store {t} into {elem} array `{name}`")));
                }
                self.emit(Opcode::AStore(name.clone()));
            }
            StmtKind::If { cond, then, els } => {
                let else_l = self.new_label();
                self.branch(cond, false, else_l)?;
                let cond_end = self.here();
                self.decisions.push(PendingDecision { cond_start: start, cond_end, on_false: else_l });
                self.block(then)?;
                match els {
                    None => self.place(else_l),
                    Some(els) => {
                        let end = self.new_label();
                        if !block_returns(then) {
                            self.emit_jump(Opcode::Jmp(0), end);
                        }
                        self.place(else_l);
                        self.block(els)?;
                        self.place(end);
                    }
                }
            }
            StmtKind::While { cond, body } => {
                let end = self.new_label();
                self.branch(cond, false, end)?;
                let cond_end = self.here();
                self.decisions.push(PendingDecision { cond_start: start, cond_end, on_false: end });
                self.block(body)?;
                if !block_returns(body) {
                    let head = self.new_label();
                    self.labels[head.0] = Some(start);
                    self.emit_jump(Opcode::Jmp(0), head);
                }
                self.place(end);
            }
            StmtKind::Return(value) => {
                match (value, self.func.ret) {
                    (Some(e), Some(rt)) => {
                        let t = self.expr(e)?;
                        if t != rt {
                            return Err(type_err(e.pos, format!("expected {rt} return value, found {t}")));
                        }
                    }
                    (None, None) => {}
                    (Some(e), None) => return Err(type_err(e.pos, "void function cannot return a value")),
                    (None, Some(rt)) => return Err(type_err(s.pos, format!("missing {rt} return value"))),
                }
                self.emit(Opcode::Ret);
            }
            StmtKind::Expr(e) => {
                let ExprKind::Call(name, args) = &e.kind else {
                    return Err(type_err(e.pos, "only calls may be used as statements"));
                };
                if name == "print" {
                    if args.len() != 1 {
                        return Err(type_err(e.pos, "print takes one argument"));
                    }
                    self.expr(&args[0])?;
                    self.emit(Opcode::Intr(Intrinsic::Print));
                } else {
                    let ret = self.call(e.pos, name, args)?;
                    if ret.is_some() {
                        return Err(type_err(e.pos, format!("result of `{name}` is discarded")));
                    }
                }
            }
        }
        if self.here() == start {
            return Err(type_err(s.pos, "statement generates no code"));
        }
        if let Some(l) = &s.label {
            if !self.source_labels.insert(l.clone()) {
                return Err(type_err(s.pos, format!("duplicate label `{l}`")));
            }
            self.func.code[start].label = Some(l.clone());
        }
        Ok(())
    }

    /// Emits code that jumps to `target` when `cond` evaluates to `jump_if`
    /// and falls through otherwise.
    fn branch(&mut self, cond: &Expr, jump_if: bool, target: LabelId) -> Result<(), LangError> {
        match &cond.kind {
            ExprKind::Binary(BinaryOp::And, a, b) => {
                if jump_if {
                    let skip = self.new_label();
                    self.branch(a, false, skip)?;
                    self.branch(b, true, target)?;
                    self.place(skip);
                } else {
                    self.branch(a, false, target)?;
                    self.branch(b, false, target)?;
                }
                Ok(())
            }
            ExprKind::Binary(BinaryOp::Or, a, b) => {
                if jump_if {
                    self.branch(a, true, target)?;
                    self.branch(b, true, target)?;
                } else {
                    let skip = self.new_label();
                    self.branch(a, true, skip)?;
                    self.branch(b, false, target)?;
                    self.place(skip);
                }
                Ok(())
            }
            ExprKind::Unary(UnaryOp::Not, a) => self.branch(a, !jump_if, target),
            _ => {
                let t = self.expr(cond)?;
                if t != ScalarType::Bool {
                    return Err(type_err(cond.pos, format!("condition must be bool, found {t}")));
                }
                self.emit_jump(if jump_if { Opcode::Brt(0) } else { Opcode::Brf(0) }, target);
                Ok(())
            }
        }
    }

    fn fresh_temp(&mut self) -> String {
        loop {
            let name = format!("__t{}", self.temp_counter);
            self.temp_counter += 1;
            if !self.reserved.contains(&name) && self.func.local_type(&name).is_none() {
                return name;
            }
        }
    }

    fn call(&mut self, pos: Pos, name: &str, args: &[Expr]) -> Result<Option<ScalarType>, LangError> {
        if let Some(intr) = Intrinsic::parse(name) {
            if intr == Intrinsic::Print {
                return Err(type_err(pos, "print is a statement"));
            }
            if args.len() != 1 {
                return Err(type_err(pos, format!("{name} takes one argument")));
            }
            let t = self.expr(&args[0])?;
            if t != ScalarType::Float {
                return Err(type_err(args[0].pos, format!("{name} expects float, found {t}")));
            }
            self.emit(Opcode::Intr(intr));
            return Ok(Some(ScalarType::Float));
        }
        let callee = self.module.function(name).ok_or_else(|| undeclared(pos, name))?;
        if callee.params.len() != args.len() {
            return Err(type_err(
                pos,
                format!("`{name}` expects {} argument(s), found {}", callee.params.len(), args.len()),
            ));
        }
        let (ptypes, ret): (Vec<ScalarType>, _) = (callee.params.iter().map(|p| p.ty).collect(), callee.ret);
        for (a, want) in args.iter().zip(ptypes) {
            let t = self.expr(a)?;
            if t != want {
                return Err(type_err(a.pos, format!("expected {want} argument, found {t}")));
            }
        }
        self.emit(Opcode::Call(name.to_string()));
        Ok(ret)
    }

    fn expr(&mut self, e: &Expr) -> Result<ScalarType, LangError> {
        use ScalarType::*;
        match &e.kind {
            ExprKind::Lit(l) => {
                let v = lit_value(*l);
                self.emit(match v {
                    Value::Int(x) => Opcode::ConstI(x),
                    Value::Float(x) => Opcode::ConstF(x),
                    Value::Bool(x) => Opcode::ConstB(x),
                });
                Ok(v.ty())
            }
            ExprKind::Var(name) => {
                if let Some(t) = self.func.local_type(name) {
                    self.emit(Opcode::Load(name.clone()));
                    Ok(t)
                } else if let Some(g) = self.module.global(name) {
                    let t = g.ty;
                    self.emit(Opcode::GLoad(name.clone()));
                    Ok(t)
                } else {
                    Err(undeclared(e.pos, name))
                }
            }
            ExprKind::Index(name, idx) => {
                let elem = self.module.array(name).ok_or_else(|| undeclared(e.pos, name))?.elem;
                if self.expr(idx)? != Int {
                    return Err(type_err(idx.pos, "array index must be int"));
                }
                self.emit(Opcode::ALoad(name.clone()));
                Ok(elem)
            }
            ExprKind::Call(name, args) => {
                self.call(e.pos, name, args)?.ok_or_else(|| type_err(e.pos, format!("`{name}` returns no value")))
            }
            ExprKind::Cast(to, inner) => {
                let from = self.expr(inner)?;
                match (from, to) {
                    (a, b) if a == *b => {}
                    (Int, Float) => self.emit(Opcode::I2F),
                    (Float, Int) => self.emit(Opcode::F2I),
                    _ => return Err(type_err(e.pos, format!("cannot convert {from} to {to}"))),
                }
                Ok(*to)
            }
            ExprKind::Unary(UnaryOp::Neg, inner) => {
                let t = self.expr(inner)?;
                match t {
                    Int => self.emit(Opcode::NegI),
                    Float => self.emit(Opcode::NegF),
                    Bool => return Err(type_err(e.pos, "cannot negate bool")),
                }
                Ok(t)
            }
            ExprKind::Unary(UnaryOp::Not, inner) => {
                if self.expr(inner)? != Bool {
                    return Err(type_err(e.pos, "`!` expects bool"));
                }
                self.emit(Opcode::Not);
                Ok(Bool)
            }
            ExprKind::Binary(BinaryOp::And | BinaryOp::Or, _, _) => {
                if self.depth != 0 {
                    return Err(type_err(
                        e.pos,
                        "`&&`/`||` may only be used as a condition or as a whole expression",
                    ));
                }
                let tmp = self.fresh_temp();
                self.func.locals.push(Param { name: tmp.clone(), ty: Bool });
                let f = self.new_label();
                let end = self.new_label();
                self.branch(e, false, f)?;
                self.emit(Opcode::ConstB(true));
                self.emit(Opcode::Store(tmp.clone()));
                self.emit_jump(Opcode::Jmp(0), end);
                self.place(f);
                self.emit(Opcode::ConstB(false));
                self.emit(Opcode::Store(tmp.clone()));
                self.place(end);
                self.emit(Opcode::Load(tmp));
                Ok(Bool)
            }
            ExprKind::Binary(op, a, b) => {
                let ta = self.expr(a)?;
                let tb = self.expr(b)?;
                if ta != tb {
                    return Err(type_err(e.pos, format!("operand types differ: {ta} and {tb}")));
                }
                let cmp = match op {
                    BinaryOp::Eq => Some(CmpOp::Eq),
                    BinaryOp::Ne => Some(CmpOp::Ne),
                    BinaryOp::Lt => Some(CmpOp::Lt),
                    BinaryOp::Le => Some(CmpOp::Le),
                    BinaryOp::Gt => Some(CmpOp::Gt),
                    BinaryOp::Ge => Some(CmpOp::Ge),
                    _ => None,
                };
                if let Some(c) = cmp {
                    if ta == Bool && !c.is_equality() {
                        return Err(type_err(e.pos, "bool supports only == and !="));
                    }
                    self.emit(Opcode::Cmp(c, ta));
                    return Ok(Bool);
                }
                let bin = match (op, ta) {
                    (BinaryOp::Add, Int) => BinOp::AddI,
                    (BinaryOp::Sub, Int) => BinOp::SubI,
                    (BinaryOp::Mul, Int) => BinOp::MulI,
                    (BinaryOp::Div, Int) => BinOp::DivI,
                    (BinaryOp::Mod, Int) => BinOp::ModI,
                    (BinaryOp::Add, Float) => BinOp::AddF,
                    (BinaryOp::Sub, Float) => BinOp::SubF,
                    (BinaryOp::Mul, Float) => BinOp::MulF,
                    (BinaryOp::Div, Float) => BinOp::DivF,
                    _ => return Err(type_err(e.pos, format!("operator not defined on {ta}"))),
                };
                self.emit(Opcode::Bin(bin));
                Ok(ta)
            }
        }
    }
}

/// Parses and compiles MiniLang source in one step.
pub fn compile_source(text: &str) -> Result<ProgramModule, LangError> {
    compile(&parse_source(text)?)
}
