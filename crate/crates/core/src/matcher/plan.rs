use crate::lang::ProgramModule;
use crate::requirements::{definition_sites, var_id, ElementRef, ReqSet, VarRef};
use crate::vm::{FnPlan, InstrumentationPlan};

/// Observation points for a validated requirement set: every requirement
/// statement, the entry of every named function, all block leaders of
/// functions holding a branch element, and every definition site of def-use
/// and predicate variables.
pub fn plan(module: &ProgramModule, reqs: &ReqSet) -> InstrumentationPlan {
    let mut p = InstrumentationPlan::empty(module);
    let fidx = |name: &str| module.function_index(name).expect("validated function");
    let track_var = |p: &mut InstrumentationPlan, var| {
        p.variables.insert(var_id(module, var));
        for (f, o) in definition_sites(module, var) {
            p.functions[f].statements.insert(o);
        }
    };
    for r in &reqs.reqs {
        for e in r.req.elements() {
            for s in e.sites() {
                let f: &mut FnPlan = &mut p.functions[fidx(&s.func)];
                f.report_entry = true;
                f.statements.insert(s.offset());
            }
            match e {
                ElementRef::Stmt(_) => {}
                ElementRef::Branch { src, .. } => p.functions[fidx(&src.func)].track_leaders = true,
                ElementRef::DefUse { var, .. } => track_var(&mut p, var),
            }
        }
        for pred in r.req.predicates() {
            for v in pred.vars() {
                if let VarRef::Local { func, .. } = v {
                    p.functions[fidx(func)].report_entry = true;
                }
                track_var(&mut p, v);
            }
        }
    }
    p
}
