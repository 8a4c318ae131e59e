//! Instrumentation plans, the online matcher and the offline oracle.
//!
//! Semantics in brief. An element fires on an event: a statement when it is
//! reached, a branch when the target leader is entered from the source block
//! in the same frame, a def-use pair when its use is reached while the
//! variable's latest definition is the pair's definition site. A btr at the
//! root of a requirement is judged on end-of-run atom values. Nested btrs,
//! ctrs, strs and rtrs complete at instants: a nested btr completes at a
//! firing of one of its atoms when its expression holds over the window opened
//! by its parent; a ctr at an inner completion whose predicate holds on the
//! state just before the event; a str when its last element completes after
//! the earlier ones completed in order; an rtr each time the inner count,
//! advanced greedily with the inner window reset after every completion, lies
//! within bounds.

mod oracle;
mod plan;
mod session;

use serde::Serialize;

use crate::bdt::build_cfg;
use crate::lang::{CmpOp, ProgramModule, Value};
use crate::requirements::{var_id, Bound, BtrExpr, ElementRef, Operand, Pred, ReqSet, TestRequirement};
use crate::vm::VarId;

pub use oracle::{firing_instants, oracle_evaluate, Verdict};
pub use plan::plan;
pub use session::{MatchError, MatchSession};

/// An element resolved to module indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElemKey {
    Stmt { func: usize, offset: usize },
    /// `src` is the leader of the source block.
    Branch { func: usize, src: usize, tgt: usize },
    DefUse { def_func: usize, def: usize, use_func: usize, use_at: usize, var: VarId },
}

impl ElemKey {
    pub fn resolve(module: &ProgramModule, e: &ElementRef) -> ElemKey {
        let fidx = |name: &str| module.function_index(name).expect("validated function");
        match e {
            ElementRef::Stmt(s) => ElemKey::Stmt { func: fidx(&s.func), offset: s.offset() },
            ElementRef::Branch { src, tgt } => {
                let func = fidx(&src.func);
                let cfg = build_cfg(&module.functions[func]);
                let src_leader = cfg.blocks[cfg.block_of[src.offset()]].leader;
                ElemKey::Branch { func, src: src_leader, tgt: tgt.offset() }
            }
            ElementRef::DefUse { def, use_site, var } => ElemKey::DefUse {
                def_func: fidx(&def.func),
                def: def.offset(),
                use_func: fidx(&use_site.func),
                use_at: use_site.offset(),
                var: var_id(module, var),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum CExpr {
    /// Index into the owning btr's atom list.
    Atom(usize),
    Not(Box<CExpr>),
    And(Box<CExpr>, Box<CExpr>),
    Or(Box<CExpr>, Box<CExpr>),
}

impl CExpr {
    pub(crate) fn eval(&self, v: &dyn Fn(usize) -> bool) -> bool {
        match self {
            CExpr::Atom(i) => v(*i),
            CExpr::Not(x) => !x.eval(v),
            CExpr::And(a, b) => a.eval(v) && b.eval(v),
            CExpr::Or(a, b) => a.eval(v) || b.eval(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum COperand {
    Const(Value),
    Var(VarId),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CClause {
    pub lhs: VarId,
    pub op: CmpOp,
    pub rhs: COperand,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum CPred {
    Clause(CClause),
    Not(Box<CPred>),
    And(Box<CPred>, Box<CPred>),
    Or(Box<CPred>, Box<CPred>),
}

impl CPred {
    /// Evaluates with a lookup for current values; an undefined variable
    /// makes its clause false and is reported through `undefined`.
    pub(crate) fn eval(&self, value: &dyn Fn(VarId) -> Option<Value>, undefined: &mut Vec<VarId>) -> bool {
        match self {
            CPred::Clause(c) => {
                let l = value(c.lhs);
                let r = match &c.rhs {
                    COperand::Const(v) => Some(*v),
                    COperand::Var(v) => value(*v),
                };
                match (l, r) {
                    (Some(l), Some(r)) => c.op.eval(l, r).unwrap_or(false),
                    _ => {
                        if l.is_none() {
                            undefined.push(c.lhs);
                        }
                        if let (None, COperand::Var(v)) = (r, &c.rhs) {
                            undefined.push(*v);
                        }
                        false
                    }
                }
            }
            CPred::Not(p) => !p.eval(value, undefined),
            CPred::And(a, b) => {
                let l = a.eval(value, undefined);
                let r = b.eval(value, undefined);
                l && r
            }
            CPred::Or(a, b) => {
                let l = a.eval(value, undefined);
                let r = b.eval(value, undefined);
                l || r
            }
        }
    }

    pub(crate) fn clauses(&self) -> Vec<&CClause> {
        match self {
            CPred::Clause(c) => vec![c],
            CPred::Not(p) => p.clauses(),
            CPred::And(a, b) | CPred::Or(a, b) => {
                let mut v = a.clauses();
                v.extend(b.clauses());
                v
            }
        }
    }
}

/// A requirement with element references replaced by indices into the
/// session-wide element table.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum CNode {
    Btr { expr: CExpr, atoms: Vec<usize> },
    Ctr(Box<CNode>, CPred),
    Str(Vec<CNode>),
    /// `lo` has don't-care mapped to 0; `hi` is `None` when unbounded.
    Rtr(Box<CNode>, u64, Option<u64>),
}

pub(crate) struct Compiled {
    pub elements: Vec<ElemKey>,
    pub element_text: Vec<String>,
    pub roots: Vec<CNode>,
    pub names: Vec<String>,
}

fn intern(elements: &mut Vec<ElemKey>, text: &mut Vec<String>, key: ElemKey, t: String) -> usize {
    match elements.iter().position(|k| *k == key) {
        Some(i) => i,
        None => {
            elements.push(key);
            text.push(t);
            elements.len() - 1
        }
    }
}

fn compile_pred(module: &ProgramModule, p: &Pred) -> CPred {
    match p {
        Pred::Clause(c) => CPred::Clause(CClause {
            lhs: var_id(module, &c.lhs),
            op: c.op,
            rhs: match &c.rhs {
                Operand::Const(v) => COperand::Const(*v),
                Operand::Var(v) => COperand::Var(var_id(module, v)),
            },
            text: c.to_string(),
        }),
        Pred::Not(x) => CPred::Not(Box::new(compile_pred(module, x))),
        Pred::And(a, b) => CPred::And(Box::new(compile_pred(module, a)), Box::new(compile_pred(module, b))),
        Pred::Or(a, b) => CPred::Or(Box::new(compile_pred(module, a)), Box::new(compile_pred(module, b))),
    }
}

impl Compiled {
    pub(crate) fn new(module: &ProgramModule, reqs: &ReqSet) -> Compiled {
        let mut c = Compiled { elements: Vec::new(), element_text: Vec::new(), roots: Vec::new(), names: Vec::new() };
        for r in &reqs.reqs {
            let root = c.node(module, &r.req);
            c.roots.push(root);
            c.names.push(r.name.clone());
        }
        c
    }

    fn node(&mut self, module: &ProgramModule, r: &TestRequirement) -> CNode {
        match r {
            TestRequirement::Btr(e) => {
                let mut atoms = Vec::new();
                let expr = self.expr(module, e, &mut atoms);
                CNode::Btr { expr, atoms }
            }
            TestRequirement::Ctr(inner, p) => CNode::Ctr(Box::new(self.node(module, inner)), compile_pred(module, p)),
            TestRequirement::Str(items) => CNode::Str(items.iter().map(|i| self.node(module, i)).collect()),
            TestRequirement::Rtr(inner, lo, hi) => {
                let lo = match lo {
                    Bound::Any => 0,
                    Bound::N(n) => *n,
                };
                let hi = match hi {
                    Bound::Any => None,
                    Bound::N(n) => Some(*n),
                };
                CNode::Rtr(Box::new(self.node(module, inner)), lo, hi)
            }
        }
    }

    fn expr(&mut self, module: &ProgramModule, e: &BtrExpr, atoms: &mut Vec<usize>) -> CExpr {
        match e {
            BtrExpr::Atom(a) => {
                let id = intern(&mut self.elements, &mut self.element_text, ElemKey::resolve(module, a), a.to_string());
                let slot = match atoms.iter().position(|&x| x == id) {
                    Some(s) => s,
                    None => {
                        atoms.push(id);
                        atoms.len() - 1
                    }
                };
                CExpr::Atom(slot)
            }
            BtrExpr::Not(x) => CExpr::Not(Box::new(self.expr(module, x, atoms))),
            BtrExpr::And(a, b) => {
                let l = self.expr(module, a, atoms);
                CExpr::And(Box::new(l), Box::new(self.expr(module, b, atoms)))
            }
            BtrExpr::Or(a, b) => {
                let l = self.expr(module, a, atoms);
                CExpr::Or(Box::new(l), Box::new(self.expr(module, b, atoms)))
            }
        }
    }

    /// Element ids referenced by a node, deduplicated, in first-use order.
    pub(crate) fn node_elements(node: &CNode, out: &mut Vec<usize>) {
        match node {
            CNode::Btr { atoms, .. } => {
                for a in atoms {
                    if !out.contains(a) {
                        out.push(*a);
                    }
                }
            }
            CNode::Ctr(inner, _) | CNode::Rtr(inner, ..) => Self::node_elements(inner, out),
            CNode::Str(items) => items.iter().for_each(|i| Self::node_elements(i, out)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ElementStat {
    pub element: String,
    pub count: u64,
    #[serde(rename = "lastSeq")]
    pub last_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StrProgress {
    pub completed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RtrCount {
    pub count: u64,
    pub lo: u64,
    pub hi: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    #[serde(rename = "strProgress", skip_serializing_if = "Option::is_none")]
    pub str_progress: Option<StrProgress>,
    #[serde(rename = "rtrCount", skip_serializing_if = "Option::is_none")]
    pub rtr_count: Option<RtrCount>,
    #[serde(rename = "predicateFailure", skip_serializing_if = "Option::is_none")]
    pub predicate_failure: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub elements: Vec<ElementStat>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequirementReport {
    pub name: String,
    pub satisfied: bool,
    pub diagnostics: Diagnostics,
}

/// Describes a variable for diagnostics.
pub(crate) fn var_text(module: &ProgramModule, v: VarId) -> String {
    v.describe(module)
}
