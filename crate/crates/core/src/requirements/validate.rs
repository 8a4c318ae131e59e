use std::collections::{BTreeSet, HashSet};

use super::*;
use crate::bdt::build_cfg;
use crate::lang::{leaders, Opcode, ScalarType, VarKey};

pub fn resolve_var(module: &ProgramModule, var: &VarRef) -> Option<VarId> {
    match var {
        VarRef::Local { func, name } => {
            let fi = module.function_index(func)?;
            let slot = module.functions[fi].local_slot(name)?;
            Some(VarId::Local { func: fi, slot })
        }
        VarRef::Global(n) => module.globals.iter().position(|g| &g.name == n).map(VarId::Global),
        VarRef::Array(n) => module.arrays.iter().position(|a| &a.name == n).map(VarId::Array),
    }
}

fn var_type(module: &ProgramModule, var: &VarRef) -> Option<ScalarType> {
    match var {
        VarRef::Local { func, name } => module.function(func)?.local_type(name),
        VarRef::Global(n) => module.global(n).map(|g| g.ty),
        VarRef::Array(n) => module.array(n).map(|a| a.elem),
    }
}

/// Functions whose events can complete `req`.
pub fn trigger_functions(req: &TestRequirement) -> BTreeSet<String> {
    match req {
        TestRequirement::Btr(e) => e.atoms().iter().map(|a| a.trigger_function().to_string()).collect(),
        TestRequirement::Ctr(inner, _) | TestRequirement::Rtr(inner, ..) => trigger_functions(inner),
        TestRequirement::Str(items) => trigger_functions(items.last().expect("str has elements")),
    }
}

struct Ctx<'a> {
    module: &'a ProgramModule,
    req: &'a str,
}

impl Ctx<'_> {
    fn resolve_site(&self, site: &mut Site) -> Result<usize, ReqError> {
        let f = self
            .module
            .function(&site.func)
            .ok_or_else(|| ReqError::UnknownFunction { req: self.req.into(), func: site.func.clone() })?;
        let off = match &site.anchor {
            Anchor::Label(l) => f.label_offset(l).ok_or_else(|| ReqError::UnknownLabel {
                req: self.req.into(),
                func: f.name.clone(),
                label: l.clone(),
            })?,
            Anchor::Offset(o) if *o < f.code.len() => *o,
            Anchor::Offset(o) => {
                return Err(ReqError::BadOffset { req: self.req.into(), func: f.name.clone(), offset: *o })
            }
        };
        site.resolved = Some(off);
        Ok(off)
    }

    fn check_var(&self, var: &VarRef) -> Result<(), ReqError> {
        match resolve_var(self.module, var) {
            Some(_) => Ok(()),
            None => Err(ReqError::UnknownVariable { req: self.req.into(), var: var.to_string() }),
        }
    }

    fn element(&self, e: &mut ElementRef) -> Result<(), ReqError> {
        match e {
            ElementRef::Stmt(s) => self.resolve_site(s).map(|_| ()),
            ElementRef::Branch { src, tgt } => {
                let so = self.resolve_site(src)?;
                let to = self.resolve_site(tgt)?;
                let f = self.module.function(&src.func).expect("resolved");
                if !leaders(f).contains(&to) {
                    return Err(ReqError::NotALeader { req: self.req.into(), func: f.name.clone(), offset: to });
                }
                let cfg = build_cfg(f);
                let (sb, tb) = (cfg.block_of[so], cfg.block_of[to]);
                if !cfg.succs[sb].iter().any(|&(s, _)| s == tb) {
                    return Err(ReqError::NotAnEdge { req: self.req.into(), func: f.name.clone(), src: so, tgt: to });
                }
                Ok(())
            }
            ElementRef::DefUse { def, use_site, var } => {
                self.check_var(var)?;
                let d = self.resolve_site(def)?;
                let u = self.resolve_site(use_site)?;
                if let VarRef::Local { func, .. } = var {
                    for s in [&*def, &*use_site] {
                        if &s.func != func {
                            return Err(ReqError::Scope {
                                req: self.req.into(),
                                msg: format!("{var} is not visible in `{}`", s.func),
                            });
                        }
                    }
                }
                let key = match var {
                    VarRef::Local { name, .. } => VarKey::Local(name),
                    VarRef::Global(n) => VarKey::Global(n),
                    VarRef::Array(n) => VarKey::Array(n),
                };
                let df = self.module.function(&def.func).expect("resolved");
                if df.code[d].opcode.defined_var() != Some(key) {
                    return Err(ReqError::NotADefSite {
                        req: self.req.into(),
                        func: df.name.clone(),
                        offset: d,
                        var: var.to_string(),
                    });
                }
                let uf = self.module.function(&use_site.func).expect("resolved");
                if uf.code[u].opcode.used_var() != Some(key) {
                    return Err(ReqError::NotAUseSite {
                        req: self.req.into(),
                        func: uf.name.clone(),
                        offset: u,
                        var: var.to_string(),
                    });
                }
                Ok(())
            }
        }
    }

    fn pred(&self, p: &Pred) -> Result<(), ReqError> {
        for c in p.clauses() {
            for v in std::iter::once(&c.lhs).chain(match &c.rhs {
                Operand::Var(v) => Some(v),
                Operand::Const(_) => None,
            }) {
                if matches!(v, VarRef::Array(_)) {
                    return Err(ReqError::Type { req: self.req.into(), msg: format!("{v} cannot appear in a predicate") });
                }
                self.check_var(v)?;
            }
            let lt = var_type(self.module, &c.lhs).expect("checked");
            let rt = match &c.rhs {
                Operand::Const(v) => v.ty(),
                Operand::Var(v) => var_type(self.module, v).expect("checked"),
            };
            if lt != rt {
                return Err(ReqError::Type { req: self.req.into(), msg: format!("`{c}` compares {lt} with {rt}") });
            }
            if lt == ScalarType::Bool && !c.op.is_equality() {
                return Err(ReqError::Type { req: self.req.into(), msg: format!("`{c}` orders bool values") });
            }
        }
        Ok(())
    }

    fn node(&self, r: &mut TestRequirement) -> Result<(), ReqError> {
        match r {
            TestRequirement::Btr(e) => e.atoms_mut().into_iter().try_for_each(|a| self.element(a)),
            TestRequirement::Ctr(inner, p) => {
                self.node(inner)?;
                self.pred(p)?;
                let triggers = trigger_functions(inner);
                for v in p.vars() {
                    if let VarRef::Local { func, .. } = v {
                        if triggers.len() != 1 || !triggers.contains(func) {
                            return Err(ReqError::Scope {
                                req: self.req.into(),
                                msg: format!(
                                    "{v} is not local to the triggering function ({})",
                                    triggers.into_iter().collect::<Vec<_>>().join(", ")
                                ),
                            });
                        }
                    }
                }
                Ok(())
            }
            TestRequirement::Str(items) => items.iter_mut().try_for_each(|i| self.node(i)),
            TestRequirement::Rtr(inner, ..) => self.node(inner),
        }
    }
}

/// Resolves every anchor against `module` and checks well-formedness.
pub fn validate(set: &ReqSet, module: &ProgramModule) -> Result<ReqSet, ReqError> {
    let mut out = set.clone();
    let mut names = HashSet::new();
    for r in &mut out.reqs {
        if !names.insert(r.name.clone()) {
            return Err(ReqError::DuplicateName(r.name.clone()));
        }
        check_structure(&r.name, &r.req)?;
        let ctx = Ctx { module, req: &r.name };
        ctx.node(&mut r.req)?;
    }
    Ok(out)
}

/// Definition sites of a variable: `(function index, offset)` pairs.
pub fn definition_sites(module: &ProgramModule, var: &VarRef) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (fi, f) in module.functions.iter().enumerate() {
        for ins in &f.code {
            let hit = match (var, &ins.opcode) {
                (VarRef::Local { func, name }, Opcode::Store(n)) => func == &f.name && n == name,
                (VarRef::Global(g), Opcode::GStore(n)) => g == n,
                (VarRef::Array(a), Opcode::AStore(n)) => a == n,
                _ => false,
            };
            if hit {
                out.push((fi, ins.offset));
            }
        }
    }
    out
}
