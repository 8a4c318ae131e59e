//! Test requirements: basic (btr), conditional (ctr), sequential (str) and
//! repeated (rtr), their `.ucr` text form and validation against a module.

mod format;
mod parse;
mod validate;

use thiserror::Error;

use crate::lang::{CmpOp, ProgramModule, Value};
use crate::vm::VarId;

pub use format::format_reqs;
pub use parse::parse_reqs;
pub use validate::{definition_sites, resolve_var, trigger_functions, validate};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Anchor {
    Label(String),
    Offset(usize),
}

/// A code location: function, anchor, and the offset the anchor resolved to.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Site {
    pub func: String,
    pub anchor: Anchor,
    pub resolved: Option<usize>,
}

impl Site {
    pub fn new(func: impl Into<String>, anchor: Anchor) -> Site {
        Site { func: func.into(), anchor, resolved: None }
    }

    /// Resolved offset. Panics on an unvalidated site.
    pub fn offset(&self) -> usize {
        self.resolved.expect("site used before validation")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    Local { func: String, name: String },
    Global(String),
    Array(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ElementRef {
    Stmt(Site),
    /// `tgt.func` always equals `src.func`.
    Branch { src: Site, tgt: Site },
    DefUse { def: Site, use_site: Site, var: VarRef },
}

impl ElementRef {
    pub fn sites(&self) -> Vec<&Site> {
        match self {
            ElementRef::Stmt(s) => vec![s],
            ElementRef::Branch { src, tgt } => vec![src, tgt],
            ElementRef::DefUse { def, use_site, .. } => vec![def, use_site],
        }
    }

    pub fn sites_mut(&mut self) -> Vec<&mut Site> {
        match self {
            ElementRef::Stmt(s) => vec![s],
            ElementRef::Branch { src, tgt } => vec![src, tgt],
            ElementRef::DefUse { def, use_site, .. } => vec![def, use_site],
        }
    }

    /// Function whose events make the element fire.
    pub fn trigger_function(&self) -> &str {
        match self {
            ElementRef::Stmt(s) => &s.func,
            ElementRef::Branch { src, .. } => &src.func,
            ElementRef::DefUse { use_site, .. } => &use_site.func,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Const(Value),
    Var(VarRef),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub lhs: VarRef,
    pub op: CmpOp,
    pub rhs: Operand,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pred {
    Clause(Clause),
    Not(Box<Pred>),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
}

impl Pred {
    pub fn clauses(&self) -> Vec<&Clause> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a Clause>) {
        match self {
            Pred::Clause(c) => out.push(c),
            Pred::Not(p) => p.collect(out),
            Pred::And(a, b) | Pred::Or(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    pub fn vars(&self) -> Vec<&VarRef> {
        let mut out = Vec::new();
        for c in self.clauses() {
            out.push(&c.lhs);
            if let Operand::Var(v) = &c.rhs {
                out.push(v);
            }
        }
        out
    }

    pub fn vars_mut(&mut self) -> Vec<&mut VarRef> {
        match self {
            Pred::Clause(c) => {
                let mut v = vec![&mut c.lhs];
                if let Operand::Var(r) = &mut c.rhs {
                    v.push(r);
                }
                v
            }
            Pred::Not(p) => p.vars_mut(),
            Pred::And(a, b) | Pred::Or(a, b) => {
                let mut v = a.vars_mut();
                v.extend(b.vars_mut());
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BtrExpr {
    Atom(ElementRef),
    Not(Box<BtrExpr>),
    And(Box<BtrExpr>, Box<BtrExpr>),
    Or(Box<BtrExpr>, Box<BtrExpr>),
}

impl BtrExpr {
    /// Atoms in left-to-right order, duplicates included.
    pub fn atoms(&self) -> Vec<&ElementRef> {
        match self {
            BtrExpr::Atom(e) => vec![e],
            BtrExpr::Not(x) => x.atoms(),
            BtrExpr::And(a, b) | BtrExpr::Or(a, b) => {
                let mut v = a.atoms();
                v.extend(b.atoms());
                v
            }
        }
    }

    pub fn atoms_mut(&mut self) -> Vec<&mut ElementRef> {
        match self {
            BtrExpr::Atom(e) => vec![e],
            BtrExpr::Not(x) => x.atoms_mut(),
            BtrExpr::And(a, b) | BtrExpr::Or(a, b) => {
                let mut v = a.atoms_mut();
                v.extend(b.atoms_mut());
                v
            }
        }
    }

    /// True when some atom sits under an even number of negations.
    pub fn has_positive_atom(&self) -> bool {
        fn walk(e: &BtrExpr, positive: bool) -> bool {
            match e {
                BtrExpr::Atom(_) => positive,
                BtrExpr::Not(x) => walk(x, !positive),
                BtrExpr::And(a, b) | BtrExpr::Or(a, b) => walk(a, positive) || walk(b, positive),
            }
        }
        walk(self, true)
    }

    /// Evaluates the expression given a truth value per atom (in `atoms()` order).
    pub fn eval_with(&self, value: &mut dyn FnMut(&ElementRef) -> bool) -> bool {
        match self {
            BtrExpr::Atom(e) => value(e),
            BtrExpr::Not(x) => !x.eval_with(value),
            BtrExpr::And(a, b) => {
                let l = a.eval_with(value);
                let r = b.eval_with(value);
                l && r
            }
            BtrExpr::Or(a, b) => {
                let l = a.eval_with(value);
                let r = b.eval_with(value);
                l || r
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bound {
    Any,
    N(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestRequirement {
    Btr(BtrExpr),
    Ctr(Box<TestRequirement>, Pred),
    Str(Vec<TestRequirement>),
    Rtr(Box<TestRequirement>, Bound, Bound),
}

impl TestRequirement {
    /// Every element referenced anywhere in the tree.
    pub fn elements(&self) -> Vec<&ElementRef> {
        match self {
            TestRequirement::Btr(e) => e.atoms(),
            TestRequirement::Ctr(inner, _) | TestRequirement::Rtr(inner, ..) => inner.elements(),
            TestRequirement::Str(items) => items.iter().flat_map(|i| i.elements()).collect(),
        }
    }

    pub fn elements_mut(&mut self) -> Vec<&mut ElementRef> {
        match self {
            TestRequirement::Btr(e) => e.atoms_mut(),
            TestRequirement::Ctr(inner, _) | TestRequirement::Rtr(inner, ..) => inner.elements_mut(),
            TestRequirement::Str(items) => items.iter_mut().flat_map(|i| i.elements_mut()).collect(),
        }
    }

    pub fn predicates(&self) -> Vec<&Pred> {
        match self {
            TestRequirement::Btr(_) => Vec::new(),
            TestRequirement::Ctr(inner, p) => {
                let mut v = inner.predicates();
                v.push(p);
                v
            }
            TestRequirement::Rtr(inner, ..) => inner.predicates(),
            TestRequirement::Str(items) => items.iter().flat_map(|i| i.predicates()).collect(),
        }
    }

    pub fn predicates_mut(&mut self) -> Vec<&mut Pred> {
        match self {
            TestRequirement::Btr(_) => Vec::new(),
            TestRequirement::Ctr(inner, p) => {
                let mut v = inner.predicates_mut();
                v.push(p);
                v
            }
            TestRequirement::Rtr(inner, ..) => inner.predicates_mut(),
            TestRequirement::Str(items) => items.iter_mut().flat_map(|i| i.predicates_mut()).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TestRequirement::Btr(_) => 1,
            TestRequirement::Ctr(inner, _) | TestRequirement::Rtr(inner, ..) => 1 + inner.depth(),
            TestRequirement::Str(items) => 1 + items.iter().map(|i| i.depth()).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedReq {
    pub name: String,
    pub req: TestRequirement,
    /// Source line of the `req` keyword (0 when built in code).
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReqSet {
    pub reqs: Vec<NamedReq>,
}

impl ReqSet {
    pub fn get(&self, name: &str) -> Option<&NamedReq> {
        self.reqs.iter().find(|r| r.name == name)
    }

    /// Structural equality ignoring source lines and resolved offsets.
    pub fn same_structure(&self, other: &ReqSet) -> bool {
        strip(self) == strip(other)
    }
}

fn strip(set: &ReqSet) -> ReqSet {
    let mut s = set.clone();
    for r in &mut s.reqs {
        r.line = 0;
        for e in r.req.elements_mut() {
            for site in e.sites_mut() {
                site.resolved = None;
            }
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReqError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("requirement `{req}`: {msg}")]
    Structure { req: String, msg: String },
    #[error("requirement `{0}` is defined twice")]
    DuplicateName(String),
    #[error("requirement `{req}`: unknown function `{func}`")]
    UnknownFunction { req: String, func: String },
    #[error("requirement `{req}`: unknown label `@{label}` in `{func}`")]
    UnknownLabel { req: String, func: String, label: String },
    #[error("requirement `{req}`: offset @+{offset} is outside `{func}`")]
    BadOffset { req: String, func: String, offset: usize },
    #[error("requirement `{req}`: branch target @+{offset} in `{func}` is not a block leader")]
    NotALeader { req: String, func: String, offset: usize },
    #[error("requirement `{req}`: no control-flow edge from @+{src} to @+{tgt} in `{func}`")]
    NotAnEdge { req: String, func: String, src: usize, tgt: usize },
    #[error("requirement `{req}`: @+{offset} in `{func}` does not define {var}")]
    NotADefSite { req: String, func: String, offset: usize, var: String },
    #[error("requirement `{req}`: @+{offset} in `{func}` does not use {var}")]
    NotAUseSite { req: String, func: String, offset: usize, var: String },
    #[error("requirement `{req}`: unknown variable {var}")]
    UnknownVariable { req: String, var: String },
    #[error("requirement `{req}`: {msg}")]
    Scope { req: String, msg: String },
    #[error("requirement `{req}`: {msg}")]
    Type { req: String, msg: String },
}

/// Structural rules checked both at parse time and at validation.
pub fn check_structure(name: &str, req: &TestRequirement) -> Result<(), ReqError> {
    check_node(name, req, false)
}

fn check_node(name: &str, req: &TestRequirement, in_str: bool) -> Result<(), ReqError> {
    let bad = |msg: &str| Err(ReqError::Structure { req: name.to_string(), msg: msg.to_string() });
    match req {
        TestRequirement::Btr(e) => {
            if !e.has_positive_atom() {
                return bad("btr needs at least one non-negated element");
            }
            Ok(())
        }
        TestRequirement::Ctr(inner, _) => check_node(name, inner, false),
        TestRequirement::Str(items) => {
            if items.len() < 2 {
                return bad("str needs at least two elements");
            }
            items.iter().try_for_each(|i| check_node(name, i, true))
        }
        TestRequirement::Rtr(inner, lo, hi) => {
            match (lo, hi) {
                (Bound::Any, Bound::Any) => return bad("rtr needs at least one bound"),
                (Bound::N(0), Bound::Any) => return bad("rtr with lower bound 0 and no upper bound is vacuous"),
                (Bound::N(l), Bound::N(h)) if l > h => return bad("rtr lower bound exceeds upper bound"),
                _ => {}
            }
            if in_str && *hi != Bound::Any {
                return bad("rtr inside str cannot have an upper bound");
            }
            check_node(name, inner, false)
        }
    }
}

/// Resolves every variable of a set; `None` entries are impossible after validation.
pub fn var_id(module: &ProgramModule, var: &VarRef) -> VarId {
    resolve_var(module, var).expect("variable used before validation")
}
