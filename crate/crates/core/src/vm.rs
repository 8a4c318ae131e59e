//! StackIR interpreter with plan-filtered event emission.
//!
//! Every run numbers all events of the full (unfiltered) stream from 1; the
//! sink sees the subset selected by the [`InstrumentationPlan`], with the
//! original sequence numbers.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::lang::{leaders, BinOp, CmpOp, Function, Intrinsic, Opcode, ProgramModule, ScalarType, Value};

pub const DEFAULT_FUEL: u64 = 1_000_000;
pub const MAX_DEPTH: usize = 10_000;

/// A variable, by index into the module tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarId {
    Local { func: usize, slot: usize },
    Global(usize),
    Array(usize),
}

impl VarId {
    pub fn describe(&self, module: &ProgramModule) -> String {
        match *self {
            VarId::Local { func, slot } => {
                let f = &module.functions[func];
                let name = f.all_locals().nth(slot).map_or("?", |p| p.name.as_str());
                format!("local {}.{}", f.name, name)
            }
            VarId::Global(g) => format!("global {}", module.globals[g].name),
            VarId::Array(a) => format!("array {}", module.arrays[a].name),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    MethodEnter { func: usize, frame: u64 },
    MethodExit { func: usize, frame: u64 },
    /// `leader` is the offset of the block's first instruction.
    BlockEnter { func: usize, frame: u64, leader: usize },
    StatementReached { func: usize, frame: u64, offset: usize },
    /// `func`/`offset` are `None` for global initialization and parameter
    /// binding; `frame` is 0 for global initialization.
    VariableDefined { var: VarId, value: Value, func: Option<usize>, offset: Option<usize>, frame: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub seq: u64,
    pub kind: EventKind,
}

impl Event {
    /// One line: `seq kind fn frame detail`.
    pub fn render(&self, module: &ProgramModule) -> String {
        let fname = |f: usize| module.functions[f].name.as_str();
        match &self.kind {
            EventKind::MethodEnter { func, frame } => format!("{} enter {} {}", self.seq, fname(*func), frame),
            EventKind::MethodExit { func, frame } => format!("{} exit {} {}", self.seq, fname(*func), frame),
            EventKind::BlockEnter { func, frame, leader } => {
                format!("{} block {} {} @+{}", self.seq, fname(*func), frame, leader)
            }
            EventKind::StatementReached { func, frame, offset } => {
                let f = &module.functions[*func];
                match &f.code[*offset].label {
                    Some(l) => format!("{} stmt {} {} @+{} @{}", self.seq, f.name, frame, offset, l),
                    None => format!("{} stmt {} {} @+{}", self.seq, f.name, frame, offset),
                }
            }
            EventKind::VariableDefined { var, value, func, offset, frame } => {
                let site = offset.map_or_else(|| "-".to_string(), |o| format!("@+{o}"));
                format!(
                    "{} def {} {} {} = {} {}",
                    self.seq,
                    func.map_or("-", fname),
                    frame,
                    var.describe(module),
                    value,
                    site
                )
            }
        }
    }
}

pub trait EventSink {
    fn on_event(&mut self, event: &Event);
}

impl EventSink for Vec<Event> {
    fn on_event(&mut self, event: &Event) {
        self.push(event.clone());
    }
}

pub struct NullSink;

impl EventSink for NullSink {
    fn on_event(&mut self, _: &Event) {}
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FnPlan {
    pub statements: BTreeSet<usize>,
    pub track_leaders: bool,
    pub report_entry: bool,
}

/// Which events a run reports. `functions` is indexed like the module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstrumentationPlan {
    pub functions: Vec<FnPlan>,
    pub variables: BTreeSet<VarId>,
}

impl InstrumentationPlan {
    pub fn empty(module: &ProgramModule) -> Self {
        InstrumentationPlan { functions: vec![FnPlan::default(); module.functions.len()], variables: BTreeSet::new() }
    }

    /// Selects every event.
    pub fn everything(module: &ProgramModule) -> Self {
        let functions = module
            .functions
            .iter()
            .map(|f| FnPlan { statements: (0..f.code.len()).collect(), track_leaders: true, report_entry: true })
            .collect();
        let mut variables = BTreeSet::new();
        for (fi, f) in module.functions.iter().enumerate() {
            variables.extend((0..f.params.len() + f.locals.len()).map(|slot| VarId::Local { func: fi, slot }));
        }
        variables.extend((0..module.globals.len()).map(VarId::Global));
        variables.extend((0..module.arrays.len()).map(VarId::Array));
        InstrumentationPlan { functions, variables }
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty() && self.functions.iter().all(|f| *f == FnPlan::default())
    }

    pub fn selects(&self, event: &Event) -> bool {
        match &event.kind {
            EventKind::MethodEnter { func, .. } | EventKind::MethodExit { func, .. } => {
                self.functions[*func].report_entry
            }
            EventKind::BlockEnter { func, .. } => self.functions[*func].track_leaders,
            EventKind::StatementReached { func, offset, .. } => self.functions[*func].statements.contains(offset),
            EventKind::VariableDefined { var, .. } => self.variables.contains(var),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuntimeErrorKind {
    DivisionByZero,
    Overflow,
    IndexOutOfBounds,
    InvalidConversion,
    StackOverflow,
    FuelExhausted,
}

impl fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuntimeErrorKind::DivisionByZero => "division by zero",
            RuntimeErrorKind::Overflow => "integer overflow",
            RuntimeErrorKind::IndexOutOfBounds => "index out of bounds",
            RuntimeErrorKind::InvalidConversion => "invalid float-to-int conversion",
            RuntimeErrorKind::StackOverflow => "call depth exceeded",
            RuntimeErrorKind::FuelExhausted => "step limit exceeded",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Returned(Option<Value>),
    Errored { kind: RuntimeErrorKind, func: String, offset: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub outcome: Outcome,
    /// Events delivered to the sink.
    pub emitted: u64,
    /// Events in the full stream.
    pub total_events: u64,
    pub trace: Option<Vec<Event>>,
    /// Lines written by `print`.
    pub output: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VmError {
    #[error("unknown entry function `{0}`")]
    UnknownEntry(String),
    #[error("`{func}` expects {expected} argument(s), got {got}")]
    Arity { func: String, expected: usize, got: usize },
    #[error("argument `{param}` of `{func}` expects {expected}, got {got}")]
    ArgType { func: String, param: String, expected: ScalarType, got: ScalarType },
    #[error("unknown array `{0}`")]
    UnknownArray(String),
    #[error("array `{array}` has no element {index}")]
    BadArrayInit { array: String, index: usize },
    #[error("array `{array}` holds {expected}, got {got}")]
    ArrayInitType { array: String, expected: ScalarType, got: ScalarType },
}

/// Initial value of one global array element.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayInit {
    pub array: String,
    pub index: usize,
    pub value: Value,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub record_trace: bool,
    pub fuel: u64,
    pub array_inits: Vec<ArrayInit>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { record_trace: false, fuel: DEFAULT_FUEL, array_inits: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(Value),
    Load(usize),
    GLoad(usize),
    Store(usize),
    GStore(usize),
    ALoad(usize),
    AStore(usize),
    Bin(BinOp),
    NegI,
    NegF,
    Cmp(CmpOp),
    Not,
    I2F,
    F2I,
    Brt(usize),
    Brf(usize),
    Jmp(usize),
    Call(usize),
    Intr(Intrinsic),
    Ret,
}

struct Prepared {
    code: Vec<Op>,
    is_leader: Vec<bool>,
    zero_locals: Vec<Value>,
    returns: bool,
}

/// A module prepared for execution: names resolved to table indices.
pub struct Vm<'m> {
    module: &'m ProgramModule,
    fns: Vec<Prepared>,
}

struct Frame {
    func: usize,
    id: u64,
    locals: Vec<Value>,
    stack: Vec<Value>,
    pc: usize,
}

struct Emitter<'a> {
    seq: u64,
    emitted: u64,
    plan: &'a InstrumentationPlan,
    sink: &'a mut dyn EventSink,
    trace: Option<Vec<Event>>,
}

impl Emitter<'_> {
    fn emit(&mut self, kind: EventKind) {
        self.seq += 1;
        let ev = Event { seq: self.seq, kind };
        if self.plan.selects(&ev) {
            self.emitted += 1;
            self.sink.on_event(&ev);
        }
        if let Some(t) = self.trace.as_mut() {
            t.push(ev);
        }
    }
}

fn prepare(module: &ProgramModule, f: &Function) -> Prepared {
    let slot = |n: &str| f.local_slot(n).expect("verified module");
    let code = f
        .code
        .iter()
        .map(|ins| match &ins.opcode {
            Opcode::ConstI(v) => Op::Const(Value::Int(*v)),
            Opcode::ConstF(v) => Op::Const(Value::Float(*v)),
            Opcode::ConstB(v) => Op::Const(Value::Bool(*v)),
            Opcode::Load(n) => Op::Load(slot(n)),
            Opcode::Store(n) => Op::Store(slot(n)),
            Opcode::GLoad(n) => Op::GLoad(module.globals.iter().position(|g| &g.name == n).expect("verified")),
            Opcode::GStore(n) => Op::GStore(module.globals.iter().position(|g| &g.name == n).expect("verified")),
            Opcode::ALoad(n) => Op::ALoad(module.arrays.iter().position(|a| &a.name == n).expect("verified")),
            Opcode::AStore(n) => Op::AStore(module.arrays.iter().position(|a| &a.name == n).expect("verified")),
            Opcode::Bin(b) => Op::Bin(*b),
            Opcode::NegI => Op::NegI,
            Opcode::NegF => Op::NegF,
            Opcode::Cmp(c, _) => Op::Cmp(*c),
            Opcode::Not => Op::Not,
            Opcode::I2F => Op::I2F,
            Opcode::F2I => Op::F2I,
            Opcode::Brt(t) => Op::Brt(*t),
            Opcode::Brf(t) => Op::Brf(*t),
            Opcode::Jmp(t) => Op::Jmp(*t),
            Opcode::Call(n) => Op::Call(module.function_index(n).expect("verified")),
            Opcode::Intr(i) => Op::Intr(*i),
            Opcode::Ret => Op::Ret,
        })
        .collect();
    let lead = leaders(f);
    Prepared {
        code,
        is_leader: (0..f.code.len()).map(|o| lead.contains(&o)).collect(),
        zero_locals: f.all_locals().map(|p| Value::zero(p.ty)).collect(),
        returns: f.ret.is_some(),
    }
}

fn int(v: Value) -> i64 {
    match v {
        Value::Int(i) => i,
        other => unreachable!("verified stack typing: expected int, found {other:?}"),
    }
}

fn float(v: Value) -> f64 {
    match v {
        Value::Float(x) => x,
        other => unreachable!("verified stack typing: expected float, found {other:?}"),
    }
}

fn boolean(v: Value) -> bool {
    match v {
        Value::Bool(b) => b,
        other => unreachable!("verified stack typing: expected bool, found {other:?}"),
    }
}

fn binary(op: BinOp, a: Value, b: Value) -> Result<Value, RuntimeErrorKind> {
    use RuntimeErrorKind::*;
    let ovf = |r: Option<i64>| r.map(Value::Int).ok_or(Overflow);
    match op {
        BinOp::AddI => ovf(int(a).checked_add(int(b))),
        BinOp::SubI => ovf(int(a).checked_sub(int(b))),
        BinOp::MulI => ovf(int(a).checked_mul(int(b))),
        BinOp::DivI | BinOp::ModI => {
            let (x, y) = (int(a), int(b));
            if y == 0 {
                return Err(DivisionByZero);
            }
            ovf(if op == BinOp::DivI { x.checked_div(y) } else { x.checked_rem(y) })
        }
        BinOp::AddF => Ok(Value::Float(float(a) + float(b))),
        BinOp::SubF => Ok(Value::Float(float(a) - float(b))),
        BinOp::MulF => Ok(Value::Float(float(a) * float(b))),
        BinOp::DivF => {
            if float(b) == 0.0 {
                return Err(DivisionByZero);
            }
            Ok(Value::Float(float(a) / float(b)))
        }
    }
}

impl<'m> Vm<'m> {
    /// `module` must have passed verification.
    pub fn new(module: &'m ProgramModule) -> Self {
        Vm { module, fns: module.functions.iter().map(|f| prepare(module, f)).collect() }
    }

    pub fn module(&self) -> &'m ProgramModule {
        self.module
    }

    pub fn run(
        &self,
        entry: &str,
        args: &[Value],
        plan: &InstrumentationPlan,
        sink: &mut dyn EventSink,
        opts: &RunOptions,
    ) -> Result<RunResult, VmError> {
        let module = self.module;
        let fi = module.function_index(entry).ok_or_else(|| VmError::UnknownEntry(entry.to_string()))?;
        let f = &module.functions[fi];
        if f.params.len() != args.len() {
            return Err(VmError::Arity { func: f.name.clone(), expected: f.params.len(), got: args.len() });
        }
        for (p, a) in f.params.iter().zip(args) {
            if p.ty != a.ty() {
                return Err(VmError::ArgType {
                    func: f.name.clone(),
                    param: p.name.clone(),
                    expected: p.ty,
                    got: a.ty(),
                });
            }
        }
        let mut arrays: Vec<Vec<Value>> = module.arrays.iter().map(|a| vec![Value::zero(a.elem); a.len]).collect();
        for init in &opts.array_inits {
            let ai = module
                .arrays
                .iter()
                .position(|a| a.name == init.array)
                .ok_or_else(|| VmError::UnknownArray(init.array.clone()))?;
            let decl = &module.arrays[ai];
            if init.value.ty() != decl.elem {
                return Err(VmError::ArrayInitType {
                    array: decl.name.clone(),
                    expected: decl.elem,
                    got: init.value.ty(),
                });
            }
            let slot = arrays[ai]
                .get_mut(init.index)
                .ok_or_else(|| VmError::BadArrayInit { array: decl.name.clone(), index: init.index })?;
            *slot = init.value;
        }
        let mut em = Emitter {
            seq: 0,
            emitted: 0,
            plan,
            sink,
            trace: opts.record_trace.then(Vec::new),
        };
        let mut globals: Vec<Value> = module.globals.iter().map(|g| g.init).collect();
        for (g, v) in globals.iter().enumerate() {
            em.emit(EventKind::VariableDefined { var: VarId::Global(g), value: *v, func: None, offset: None, frame: 0 });
        }
        let mut output = Vec::new();
        let outcome = self.exec(fi, args, &mut globals, &mut arrays, &mut em, opts.fuel, &mut output);
        Ok(RunResult { outcome, emitted: em.emitted, total_events: em.seq, trace: em.trace, output })
    }

    fn enter(&self, func: usize, id: u64, args: &[Value], em: &mut Emitter<'_>) -> Frame {
        let mut locals = self.fns[func].zero_locals.clone();
        locals[..args.len()].copy_from_slice(args);
        em.emit(EventKind::MethodEnter { func, frame: id });
        for (slot, v) in args.iter().enumerate() {
            em.emit(EventKind::VariableDefined {
                var: VarId::Local { func, slot },
                value: *v,
                func: Some(func),
                offset: None,
                frame: id,
            });
        }
        Frame { func, id, locals, stack: Vec::with_capacity(8), pc: 0 }
    }

    #[allow(clippy::too_many_arguments)]
    fn exec(
        &self,
        entry: usize,
        args: &[Value],
        globals: &mut [Value],
        arrays: &mut [Vec<Value>],
        em: &mut Emitter<'_>,
        mut fuel: u64,
        output: &mut Vec<String>,
    ) -> Outcome {
        let mut next_id = 1u64;
        let mut frames = vec![self.enter(entry, next_id, args, em)];
        loop {
            let depth = frames.len();
            let fr = frames.last_mut().expect("live frame");
            let (func, id, pc) = (fr.func, fr.id, fr.pc);
            let p = &self.fns[func];
            let fail = |kind| Outcome::Errored { kind, func: self.module.functions[func].name.clone(), offset: pc };
            if fuel == 0 {
                return fail(RuntimeErrorKind::FuelExhausted);
            }
            fuel -= 1;
            if p.is_leader[pc] {
                em.emit(EventKind::BlockEnter { func, frame: id, leader: pc });
            }
            em.emit(EventKind::StatementReached { func, frame: id, offset: pc });
            fr.pc += 1;
            let defined = |var, value, em: &mut Emitter<'_>| {
                em.emit(EventKind::VariableDefined { var, value, func: Some(func), offset: Some(pc), frame: id });
            };
            match p.code[pc] {
                Op::Const(v) => fr.stack.push(v),
                Op::Load(s) => fr.stack.push(fr.locals[s]),
                Op::GLoad(g) => fr.stack.push(globals[g]),
                Op::Store(slot) => {
                    let v = fr.stack.pop().expect("verified");
                    fr.locals[slot] = v;
                    defined(VarId::Local { func, slot }, v, em);
                }
                Op::GStore(g) => {
                    let v = fr.stack.pop().expect("verified");
                    globals[g] = v;
                    defined(VarId::Global(g), v, em);
                }
                Op::ALoad(a) => {
                    let i = int(fr.stack.pop().expect("verified"));
                    match usize::try_from(i).ok().and_then(|i| arrays[a].get(i)) {
                        Some(v) => fr.stack.push(*v),
                        None => return fail(RuntimeErrorKind::IndexOutOfBounds),
                    }
                }
                Op::AStore(a) => {
                    let v = fr.stack.pop().expect("verified");
                    let i = int(fr.stack.pop().expect("verified"));
                    match usize::try_from(i).ok().and_then(|i| arrays[a].get_mut(i)) {
                        Some(slot) => *slot = v,
                        None => return fail(RuntimeErrorKind::IndexOutOfBounds),
                    }
                    defined(VarId::Array(a), v, em);
                }
                Op::Bin(b) => {
                    let rhs = fr.stack.pop().expect("verified");
                    let lhs = fr.stack.pop().expect("verified");
                    match binary(b, lhs, rhs) {
                        Ok(v) => fr.stack.push(v),
                        Err(k) => return fail(k),
                    }
                }
                Op::NegI => {
                    let v = int(fr.stack.pop().expect("verified"));
                    match v.checked_neg() {
                        Some(n) => fr.stack.push(Value::Int(n)),
                        None => return fail(RuntimeErrorKind::Overflow),
                    }
                }
                Op::NegF => {
                    let v = float(fr.stack.pop().expect("verified"));
                    fr.stack.push(Value::Float(-v));
                }
                Op::Cmp(c) => {
                    let rhs = fr.stack.pop().expect("verified");
                    let lhs = fr.stack.pop().expect("verified");
                    fr.stack.push(Value::Bool(c.eval(lhs, rhs).expect("verified operand types")));
                }
                Op::Not => {
                    let b = boolean(fr.stack.pop().expect("verified"));
                    fr.stack.push(Value::Bool(!b));
                }
                Op::I2F => {
                    let v = int(fr.stack.pop().expect("verified"));
                    fr.stack.push(Value::Float(v as f64));
                }
                Op::F2I => {
                    let x = float(fr.stack.pop().expect("verified"));
                    // i64::MAX as f64 rounds up to 2^63, so the upper bound is exclusive.
                    if x.is_nan() || x < i64::MIN as f64 || x >= i64::MAX as f64 {
                        return fail(RuntimeErrorKind::InvalidConversion);
                    }
                    fr.stack.push(Value::Int(x.trunc() as i64));
                }
                Op::Brt(t) => {
                    if boolean(fr.stack.pop().expect("verified")) {
                        fr.pc = t;
                    }
                }
                Op::Brf(t) => {
                    if !boolean(fr.stack.pop().expect("verified")) {
                        fr.pc = t;
                    }
                }
                Op::Jmp(t) => fr.pc = t,
                Op::Intr(Intrinsic::Print) => {
                    let v = fr.stack.pop().expect("verified");
                    output.push(v.to_string());
                }
                Op::Intr(i) => {
                    let x = float(fr.stack.pop().expect("verified"));
                    let r = if i == Intrinsic::Log { x.ln() } else { x.sqrt() };
                    fr.stack.push(Value::Float(r));
                }
                Op::Call(callee) => {
                    if depth >= MAX_DEPTH {
                        return fail(RuntimeErrorKind::StackOverflow);
                    }
                    let n = self.module.functions[callee].params.len();
                    let at = fr.stack.len() - n;
                    let call_args: Vec<Value> = fr.stack.split_off(at);
                    next_id += 1;
                    let frame = self.enter(callee, next_id, &call_args, em);
                    frames.push(frame);
                }
                Op::Ret => {
                    let v = if p.returns { fr.stack.pop() } else { None };
                    em.emit(EventKind::MethodExit { func, frame: id });
                    frames.pop();
                    match frames.last_mut() {
                        Some(caller) => {
                            if let Some(v) = v {
                                caller.stack.push(v);
                            }
                        }
                        None => return Outcome::Returned(v),
                    }
                }
            }
        }
    }
}

/// Prepares `module` and runs it once.
pub fn run(
    module: &ProgramModule,
    entry: &str,
    args: &[Value],
    plan: &InstrumentationPlan,
    sink: &mut dyn EventSink,
    opts: &RunOptions,
) -> Result<RunResult, VmError> {
    Vm::new(module).run(entry, args, plan, sink, opts)
}
