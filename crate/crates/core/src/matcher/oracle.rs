//! Reference evaluation over a recorded full trace. Nothing here is
//! incremental: firings are found by scanning, and the completion instants of
//! a requirement in a window are recomputed from scratch on every query.

use std::collections::HashMap;

use super::*;
use crate::vm::{Event, EventKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub name: String,
    pub satisfied: bool,
}

fn frame_of(ev: &Event) -> Option<u64> {
    match ev.kind {
        EventKind::BlockEnter { frame, .. } | EventKind::StatementReached { frame, .. } => Some(frame),
        _ => None,
    }
}

/// Latest definition of `var` strictly before index `i`, restricted to
/// `frame` for locals.
fn latest_def(trace: &[Event], i: usize, var: VarId, frame: u64) -> Option<&Event> {
    trace[..i].iter().rev().find(|e| match &e.kind {
        EventKind::VariableDefined { var: v, frame: f, .. } => {
            *v == var && (!matches!(var, VarId::Local { .. }) || *f == frame)
        }
        _ => false,
    })
}

/// Seqs at which `key` fires in `trace`.
pub fn firing_instants(trace: &[Event], key: &ElemKey) -> Vec<u64> {
    let mut out = Vec::new();
    for (i, ev) in trace.iter().enumerate() {
        let fires = match (key, &ev.kind) {
            (ElemKey::Stmt { func, offset }, EventKind::StatementReached { func: f, offset: o, .. }) => {
                func == f && offset == o
            }
            (ElemKey::Branch { func, src, tgt }, EventKind::BlockEnter { func: f, frame, leader }) => {
                func == f
                    && tgt == leader
                    && trace[..i].iter().rev().find_map(|p| match p.kind {
                        EventKind::BlockEnter { frame: pf, leader: pl, .. } if pf == *frame => Some(pl),
                        _ => None,
                    }) == Some(*src)
            }
            (
                ElemKey::DefUse { def_func, def, use_func, use_at, var },
                EventKind::StatementReached { func: f, offset: o, frame },
            ) => {
                use_func == f
                    && use_at == o
                    && matches!(
                        latest_def(trace, i, *var, *frame).map(|d| &d.kind),
                        Some(EventKind::VariableDefined { func: Some(df), offset: Some(dof), .. })
                            if df == def_func && dof == def
                    )
            }
            _ => false,
        };
        if fires {
            out.push(ev.seq);
        }
    }
    out
}

struct Oracle<'a> {
    trace: &'a [Event],
    index: HashMap<u64, usize>,
    firings: Vec<Vec<u64>>,
}

impl Oracle<'_> {
    fn value_before(&self, seq: u64, var: VarId) -> Option<Value> {
        let i = self.index[&seq];
        let frame = frame_of(&self.trace[i]).unwrap_or(0);
        match latest_def(self.trace, i, var, frame).map(|e| &e.kind) {
            Some(EventKind::VariableDefined { value, .. }) => Some(*value),
            _ => None,
        }
    }

    /// Completion instants of `node` in the window opened after `w`.
    fn comp(&self, node: &CNode, w: u64) -> Vec<u64> {
        match node {
            CNode::Btr { expr, atoms } => {
                let mut instants: Vec<u64> =
                    atoms.iter().flat_map(|a| self.firings[*a].iter().copied().filter(|&t| t > w)).collect();
                instants.sort_unstable();
                instants.dedup();
                instants
                    .into_iter()
                    .filter(|&t| expr.eval(&|s| self.firings[atoms[s]].iter().any(|&x| x > w && x <= t)))
                    .collect()
            }
            CNode::Ctr(inner, pred) => self
                .comp(inner, w)
                .into_iter()
                .filter(|&t| pred.eval(&|v| self.value_before(t, v), &mut Vec::new()))
                .collect(),
            CNode::Str(items) => {
                let mut cur = w;
                for item in &items[..items.len() - 1] {
                    match self.comp(item, cur).first() {
                        Some(&t) => cur = t,
                        None => return Vec::new(),
                    }
                }
                self.comp(items.last().expect("str has elements"), cur)
            }
            CNode::Rtr(inner, lo, hi) => {
                self.chain(inner, w)
                    .into_iter()
                    .enumerate()
                    .filter(|(k, _)| {
                        let k = *k as u64 + 1;
                        k >= (*lo).max(1) && hi.map_or(true, |h| k <= h)
                    })
                    .map(|(_, t)| t)
                    .collect()
            }
        }
    }

    /// Greedy earliest-completion chain: each completion reopens the window.
    fn chain(&self, inner: &CNode, w: u64) -> Vec<u64> {
        let mut out = Vec::new();
        let mut cur = w;
        while let Some(&t) = self.comp(inner, cur).first() {
            out.push(t);
            cur = t;
        }
        out
    }
}

/// Verdicts for a validated requirement set over a full trace recorded from
/// `module`.
pub fn oracle_evaluate(module: &ProgramModule, trace: &[Event], reqs: &ReqSet) -> Vec<Verdict> {
    let compiled = Compiled::new(module, reqs);
    let o = Oracle {
        trace,
        index: trace.iter().enumerate().map(|(i, e)| (e.seq, i)).collect(),
        firings: compiled.elements.iter().map(|k| firing_instants(trace, k)).collect(),
    };
    compiled
        .roots
        .iter()
        .zip(&compiled.names)
        .map(|(root, name)| {
            let satisfied = match root {
                CNode::Btr { expr, atoms } => expr.eval(&|s| !o.firings[atoms[s]].is_empty()),
                CNode::Rtr(inner, lo, hi) => {
                    let n = o.chain(inner, 0).len() as u64;
                    n >= *lo && hi.map_or(true, |h| n <= h)
                }
                _ => !o.comp(root, 0).is_empty(),
            };
            Verdict { name: name.clone(), satisfied }
        })
        .collect()
}
