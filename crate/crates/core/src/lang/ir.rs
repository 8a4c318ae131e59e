//! StackIR: the instruction set, functions and modules produced by the
//! compiler and consumed by the VM and the analyses.

use std::collections::BTreeMap;
use std::fmt;

/// Scalar types of the language. Arrays are globals with a scalar element type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarType {
    Int,
    Float,
    Bool,
}

impl ScalarType {
    pub fn name(self) -> &'static str {
        match self {
            ScalarType::Int => "int",
            ScalarType::Float => "float",
            ScalarType::Bool => "bool",
        }
    }

    pub fn parse(s: &str) -> Option<ScalarType> {
        match s {
            "int" => Some(ScalarType::Int),
            "float" => Some(ScalarType::Float),
            "bool" => Some(ScalarType::Bool),
            _ => None,
        }
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A runtime scalar value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl Value {
    pub fn ty(&self) -> ScalarType {
        match self {
            Value::Int(_) => ScalarType::Int,
            Value::Float(_) => ScalarType::Float,
            Value::Bool(_) => ScalarType::Bool,
        }
    }

    pub fn zero(ty: ScalarType) -> Value {
        match ty {
            ScalarType::Int => Value::Int(0),
            ScalarType::Float => Value::Float(0.0),
            ScalarType::Bool => Value::Bool(false),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v:?}"),
            Value::Bool(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    AddI,
    SubI,
    MulI,
    DivI,
    ModI,
    AddF,
    SubF,
    MulF,
    DivF,
}

impl BinOp {
    pub const ALL: [BinOp; 9] = [
        BinOp::AddI,
        BinOp::SubI,
        BinOp::MulI,
        BinOp::DivI,
        BinOp::ModI,
        BinOp::AddF,
        BinOp::SubF,
        BinOp::MulF,
        BinOp::DivF,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            BinOp::AddI => "add.i",
            BinOp::SubI => "sub.i",
            BinOp::MulI => "mul.i",
            BinOp::DivI => "div.i",
            BinOp::ModI => "mod.i",
            BinOp::AddF => "add.f",
            BinOp::SubF => "sub.f",
            BinOp::MulF => "mul.f",
            BinOp::DivF => "div.f",
        }
    }

    pub fn operand_type(self) -> ScalarType {
        match self {
            BinOp::AddI | BinOp::SubI | BinOp::MulI | BinOp::DivI | BinOp::ModI => ScalarType::Int,
            _ => ScalarType::Float,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn name(self) -> &'static str {
        match self {
            CmpOp::Eq => "eq",
            CmpOp::Ne => "ne",
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Gt => "gt",
            CmpOp::Ge => "ge",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CmpOp> {
        CmpOp::ALL.into_iter().find(|op| op.symbol() == s)
    }

    pub fn is_equality(self) -> bool {
        matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }

    /// Compares two values of the same type. Float comparisons involving NaN
    /// are false except for `!=`.
    pub fn eval(self, lhs: Value, rhs: Value) -> Option<bool> {
        match (lhs, rhs) {
            (Value::Int(a), Value::Int(b)) => Some(self.holds(a.cmp(&b))),
            (Value::Float(a), Value::Float(b)) => Some(match a.partial_cmp(&b) {
                Some(ord) => self.holds(ord),
                None => self == CmpOp::Ne,
            }),
            (Value::Bool(a), Value::Bool(b)) if self.is_equality() => Some(self.holds(a.cmp(&b))),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Intrinsic {
    Log,
    Sqrt,
    Print,
}

impl Intrinsic {
    pub fn name(self) -> &'static str {
        match self {
            Intrinsic::Log => "log",
            Intrinsic::Sqrt => "sqrt",
            Intrinsic::Print => "print",
        }
    }

    pub fn parse(s: &str) -> Option<Intrinsic> {
        match s {
            "log" => Some(Intrinsic::Log),
            "sqrt" => Some(Intrinsic::Sqrt),
            "print" => Some(Intrinsic::Print),
            _ => None,
        }
    }
}

/// One StackIR opcode with its operands. Jump targets are instruction offsets
/// within the enclosing function.
#[derive(Debug, Clone, PartialEq)]
pub enum Opcode {
    ConstI(i64),
    ConstF(f64),
    ConstB(bool),
    Load(String),
    GLoad(String),
    Store(String),
    GStore(String),
    ALoad(String),
    AStore(String),
    Bin(BinOp),
    NegI,
    NegF,
    Cmp(CmpOp, ScalarType),
    Not,
    I2F,
    F2I,
    Brt(usize),
    Brf(usize),
    Jmp(usize),
    Call(String),
    Intr(Intrinsic),
    Ret,
}

impl Opcode {
    pub fn mnemonic(&self) -> String {
        match self {
            Opcode::ConstI(_) => "const.i".into(),
            Opcode::ConstF(_) => "const.f".into(),
            Opcode::ConstB(_) => "const.b".into(),
            Opcode::Load(_) => "load".into(),
            Opcode::GLoad(_) => "gload".into(),
            Opcode::Store(_) => "store".into(),
            Opcode::GStore(_) => "gstore".into(),
            Opcode::ALoad(_) => "aload".into(),
            Opcode::AStore(_) => "astore".into(),
            Opcode::Bin(op) => op.mnemonic().into(),
            Opcode::NegI => "neg.i".into(),
            Opcode::NegF => "neg.f".into(),
            Opcode::Cmp(op, ty) => {
                let suffix = match ty {
                    ScalarType::Int => "i",
                    ScalarType::Float => "f",
                    ScalarType::Bool => "b",
                };
                format!("cmp.{}.{}", op.name(), suffix)
            }
            Opcode::Not => "not".into(),
            Opcode::I2F => "i2f".into(),
            Opcode::F2I => "f2i".into(),
            Opcode::Brt(_) => "brt".into(),
            Opcode::Brf(_) => "brf".into(),
            Opcode::Jmp(_) => "jmp".into(),
            Opcode::Call(_) => "call".into(),
            Opcode::Intr(_) => "intr".into(),
            Opcode::Ret => "ret".into(),
        }
    }

    /// Jump target, if this is a jump.
    pub fn target(&self) -> Option<usize> {
        match self {
            Opcode::Brt(t) | Opcode::Brf(t) | Opcode::Jmp(t) => Some(*t),
            _ => None,
        }
    }

    pub fn is_conditional(&self) -> bool {
        matches!(self, Opcode::Brt(_) | Opcode::Brf(_))
    }

    /// True for instructions that end a basic block.
    pub fn is_terminator(&self) -> bool {
        matches!(self, Opcode::Brt(_) | Opcode::Brf(_) | Opcode::Jmp(_) | Opcode::Ret)
    }

    /// Variable written by this instruction (definition site).
    pub fn defined_var(&self) -> Option<VarKey<'_>> {
        match self {
            Opcode::Store(n) => Some(VarKey::Local(n)),
            Opcode::GStore(n) => Some(VarKey::Global(n)),
            Opcode::AStore(n) => Some(VarKey::Array(n)),
            _ => None,
        }
    }

    /// Variable read by this instruction (use site).
    pub fn used_var(&self) -> Option<VarKey<'_>> {
        match self {
            Opcode::Load(n) => Some(VarKey::Local(n)),
            Opcode::GLoad(n) => Some(VarKey::Global(n)),
            Opcode::ALoad(n) => Some(VarKey::Array(n)),
            _ => None,
        }
    }

    /// Variable referenced (read or written) by this instruction.
    pub fn referenced_var(&self) -> Option<VarKey<'_>> {
        self.defined_var().or_else(|| self.used_var())
    }
}

/// Borrowed view of the variable an instruction touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey<'a> {
    Local(&'a str),
    Global(&'a str),
    Array(&'a str),
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.mnemonic();
        match self {
            Opcode::ConstI(v) => write!(f, "{m} {v}"),
            Opcode::ConstF(v) => write!(f, "{m} {v:?}"),
            Opcode::ConstB(v) => write!(f, "{m} {v}"),
            Opcode::Load(n)
            | Opcode::GLoad(n)
            | Opcode::Store(n)
            | Opcode::GStore(n)
            | Opcode::ALoad(n)
            | Opcode::AStore(n)
            | Opcode::Call(n) => write!(f, "{m} {n}"),
            Opcode::Brt(t) | Opcode::Brf(t) | Opcode::Jmp(t) => write!(f, "{m} {t}"),
            Opcode::Intr(i) => write!(f, "{m} {}", i.name()),
            _ => f.write_str(&m),
        }
    }
}

/// Parses the mnemonic and operand tokens of one instruction. Jump operands
/// are resolved through `resolve_target`, which lets the assembler accept
/// labels as well as numeric offsets.
pub fn parse_opcode(
    mnemonic: &str,
    operands: &[&str],
    resolve_target: &dyn Fn(&str) -> Option<usize>,
) -> Result<Opcode, String> {
    let arity = |n: usize| -> Result<(), String> {
        if operands.len() == n {
            Ok(())
        } else {
            Err(format!("`{mnemonic}` takes {n} operand(s), found {}", operands.len()))
        }
    };
    let name = || -> Result<String, String> {
        arity(1)?;
        let n = operands[0];
        if is_identifier(n) {
            Ok(n.to_string())
        } else {
            Err(format!("invalid name `{n}`"))
        }
    };
    let target = || -> Result<usize, String> {
        arity(1)?;
        resolve_target(operands[0]).ok_or_else(|| format!("unknown jump target `{}`", operands[0]))
    };
    let op = match mnemonic {
        "const.i" => {
            arity(1)?;
            Opcode::ConstI(operands[0].parse().map_err(|_| format!("bad int `{}`", operands[0]))?)
        }
        "const.f" => {
            arity(1)?;
            Opcode::ConstF(operands[0].parse().map_err(|_| format!("bad float `{}`", operands[0]))?)
        }
        "const.b" => {
            arity(1)?;
            Opcode::ConstB(match operands[0] {
                "true" => true,
                "false" => false,
                other => return Err(format!("bad bool `{other}`")),
            })
        }
        "load" => Opcode::Load(name()?),
        "gload" => Opcode::GLoad(name()?),
        "store" => Opcode::Store(name()?),
        "gstore" => Opcode::GStore(name()?),
        "aload" => Opcode::ALoad(name()?),
        "astore" => Opcode::AStore(name()?),
        "call" => Opcode::Call(name()?),
        "brt" => Opcode::Brt(target()?),
        "brf" => Opcode::Brf(target()?),
        "jmp" => Opcode::Jmp(target()?),
        "intr" => {
            arity(1)?;
            Opcode::Intr(
                Intrinsic::parse(operands[0]).ok_or_else(|| format!("unknown intrinsic `{}`", operands[0]))?,
            )
        }
        _ => {
            let op = if let Some(op) = BinOp::ALL.into_iter().find(|b| b.mnemonic() == mnemonic) {
                Opcode::Bin(op)
            } else if let Some(rest) = mnemonic.strip_prefix("cmp.") {
                let (op, ty) = rest.split_once('.').ok_or_else(|| format!("unknown opcode `{mnemonic}`"))?;
                let op = CmpOp::ALL
                    .into_iter()
                    .find(|c| c.name() == op)
                    .ok_or_else(|| format!("unknown opcode `{mnemonic}`"))?;
                let ty = match ty {
                    "i" => ScalarType::Int,
                    "f" => ScalarType::Float,
                    "b" if op.is_equality() => ScalarType::Bool,
                    _ => return Err(format!("unknown opcode `{mnemonic}`")),
                };
                Opcode::Cmp(op, ty)
            } else {
                match mnemonic {
                    "neg.i" => Opcode::NegI,
                    "neg.f" => Opcode::NegF,
                    "not" => Opcode::Not,
                    "i2f" => Opcode::I2F,
                    "f2i" => Opcode::F2I,
                    "ret" => Opcode::Ret,
                    _ => return Err(format!("unknown opcode `{mnemonic}`")),
                }
            };
            arity(0)?;
            op
        }
    };
    Ok(op)
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub offset: usize,
    pub opcode: Opcode,
    /// Source-statement label attached to the first instruction of a labeled statement.
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: ScalarType,
}

/// Source-level two-way decision of an `if` or `while`: the condition code
/// occupies `cond_start..cond_end`; control leaves it to `on_true` or `on_false`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decision {
    pub cond_start: usize,
    pub cond_end: usize,
    pub on_true: usize,
    pub on_false: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    /// Non-parameter locals, in declaration order.
    pub locals: Vec<Param>,
    pub ret: Option<ScalarType>,
    pub code: Vec<Instruction>,
    /// Start offsets of source statements (debug info; empty for hand-written assembly).
    pub stmts: Vec<usize>,
    /// Source decisions (debug info; empty for hand-written assembly).
    pub decisions: Vec<Decision>,
}

impl Function {
    pub fn new(name: impl Into<String>, params: Vec<Param>, ret: Option<ScalarType>) -> Function {
        Function {
            name: name.into(),
            params,
            locals: Vec::new(),
            ret,
            code: Vec::new(),
            stmts: Vec::new(),
            decisions: Vec::new(),
        }
    }

    pub fn label_map(&self) -> BTreeMap<String, usize> {
        self.code
            .iter()
            .filter_map(|i| i.label.as_ref().map(|l| (l.clone(), i.offset)))
            .collect()
    }

    pub fn label_offset(&self, label: &str) -> Option<usize> {
        self.code.iter().find(|i| i.label.as_deref() == Some(label)).map(|i| i.offset)
    }

    /// Type of a parameter or local.
    pub fn local_type(&self, name: &str) -> Option<ScalarType> {
        self.all_locals().find(|p| p.name == name).map(|p| p.ty)
    }

    /// Parameters followed by locals; the position is the VM slot.
    pub fn all_locals(&self) -> impl Iterator<Item = &Param> {
        self.params.iter().chain(self.locals.iter())
    }

    pub fn local_slot(&self, name: &str) -> Option<usize> {
        self.all_locals().position(|p| p.name == name)
    }

    /// Instruction list with labels dropped: the basis for change detection.
    pub fn normalized(&self) -> Vec<&Opcode> {
        self.code.iter().map(|i| &i.opcode).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalScalar {
    pub name: String,
    pub ty: ScalarType,
    pub init: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalArray {
    pub name: String,
    pub elem: ScalarType,
    pub len: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProgramModule {
    pub globals: Vec<GlobalScalar>,
    pub arrays: Vec<GlobalArray>,
    pub functions: Vec<Function>,
}

impl ProgramModule {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalScalar> {
        self.globals.iter().find(|g| g.name == name)
    }

    pub fn array(&self, name: &str) -> Option<&GlobalArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    /// Number of values an instruction pops and pushes.
    pub fn stack_effect(&self, func: &Function, op: &Opcode) -> (usize, usize) {
        match op {
            Opcode::ConstI(_)
            | Opcode::ConstF(_)
            | Opcode::ConstB(_)
            | Opcode::Load(_)
            | Opcode::GLoad(_) => (0, 1),
            Opcode::Store(_) | Opcode::GStore(_) => (1, 0),
            Opcode::ALoad(_) => (1, 1),
            Opcode::AStore(_) => (2, 0),
            Opcode::Bin(_) | Opcode::Cmp(..) => (2, 1),
            Opcode::NegI | Opcode::NegF | Opcode::Not | Opcode::I2F | Opcode::F2I => (1, 1),
            Opcode::Brt(_) | Opcode::Brf(_) => (1, 0),
            Opcode::Jmp(_) => (0, 0),
            Opcode::Call(name) => match self.function(name) {
                Some(callee) => (callee.params.len(), usize::from(callee.ret.is_some())),
                None => (0, 0),
            },
            Opcode::Intr(Intrinsic::Print) => (1, 0),
            Opcode::Intr(_) => (1, 1),
            Opcode::Ret => (usize::from(func.ret.is_some()), 0),
        }
    }
}
