use std::collections::HashMap;

use thiserror::Error;

use super::*;
use crate::vm::{Event, EventKind, EventSink};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("event seq {got} does not follow seq {previous}")]
    OutOfOrderEvent { previous: u64, got: u64 },
}

/// Definition site recorded for a variable; `None` for parameter binding or
/// global initialization.
type DefSite = Option<(usize, usize)>;

#[derive(Default)]
struct FrameState {
    last_block: Option<usize>,
    defs: HashMap<VarId, DefSite>,
    values: HashMap<VarId, Value>,
}

enum NState {
    Btr { seen: Vec<bool> },
    Ctr(Box<NState>),
    Str { cursor: usize, best: usize, items: Vec<NState> },
    Rtr { count: u64, inner: Box<NState> },
}

fn init(node: &CNode) -> NState {
    match node {
        CNode::Btr { atoms, .. } => NState::Btr { seen: vec![false; atoms.len()] },
        CNode::Ctr(inner, _) => NState::Ctr(Box::new(init(inner))),
        CNode::Str(items) => NState::Str { cursor: 0, best: 0, items: items.iter().map(init).collect() },
        CNode::Rtr(inner, ..) => NState::Rtr { count: 0, inner: Box::new(init(inner)) },
    }
}

/// Opens a fresh window: everything forgotten, progress kept for diagnostics.
fn reset(st: &mut NState) {
    match st {
        NState::Btr { seen } => seen.iter_mut().for_each(|s| *s = false),
        NState::Ctr(inner) => reset(inner),
        NState::Str { cursor, items, .. } => {
            *cursor = 0;
            items.iter_mut().for_each(reset);
        }
        NState::Rtr { count, inner } => {
            *count = 0;
            reset(inner);
        }
    }
}

#[derive(Default)]
struct ReqDiag {
    predicate_failure: Option<String>,
    notes: Vec<String>,
}

struct StepCtx<'a> {
    module: &'a ProgramModule,
    fired: &'a [usize],
    seq: u64,
    frame: Option<&'a FrameState>,
    globals: &'a FrameState,
}

impl StepCtx<'_> {
    fn value(&self, v: VarId) -> Option<Value> {
        match v {
            VarId::Local { .. } => self.frame.and_then(|f| f.values.get(&v).copied()),
            _ => self.globals.values.get(&v).copied(),
        }
    }
}

fn step(node: &CNode, st: &mut NState, ctx: &StepCtx<'_>, diag: &mut ReqDiag) -> bool {
    match (node, st) {
        (CNode::Btr { expr, atoms }, NState::Btr { seen }) => {
            let mut any = false;
            for (slot, a) in atoms.iter().enumerate() {
                if ctx.fired.contains(a) {
                    seen[slot] = true;
                    any = true;
                }
            }
            any && expr.eval(&|s| seen[s])
        }
        (CNode::Ctr(inner, pred), NState::Ctr(ist)) => {
            if !step(inner, ist, ctx, diag) {
                return false;
            }
            let mut undefined = Vec::new();
            let holds = pred.eval(&|v| ctx.value(v), &mut undefined);
            for v in undefined {
                let note = format!("{} undefined", var_text(ctx.module, v));
                if !diag.notes.contains(&note) {
                    diag.notes.push(note);
                }
            }
            if !holds && diag.predicate_failure.is_none() {
                diag.predicate_failure = Some(describe_failure(pred, ctx));
            }
            holds
        }
        (CNode::Str(items), NState::Str { cursor, best, items: states }) => {
            if !step(&items[*cursor], &mut states[*cursor], ctx, diag) {
                return false;
            }
            if *cursor + 1 == items.len() {
                *best = items.len();
                return true;
            }
            *cursor += 1;
            *best = (*best).max(*cursor);
            reset(&mut states[*cursor]);
            false
        }
        (CNode::Rtr(inner, lo, hi), NState::Rtr { count, inner: ist }) => {
            if !step(inner, ist, ctx, diag) {
                return false;
            }
            *count += 1;
            reset(ist);
            *count >= (*lo).max(1) && hi.map_or(true, |h| *count <= h)
        }
        _ => unreachable!("state mirrors node"),
    }
}

fn describe_failure(pred: &CPred, ctx: &StepCtx<'_>) -> String {
    let show = |v: VarId| match ctx.value(v) {
        Some(x) => format!("{} = {x}", var_text(ctx.module, v)),
        None => format!("{} undefined", var_text(ctx.module, v)),
    };
    let clauses = pred.clauses();
    let failing = clauses.iter().find(|c| {
        let l = ctx.value(c.lhs);
        let r = match &c.rhs {
            COperand::Const(v) => Some(*v),
            COperand::Var(v) => ctx.value(*v),
        };
        !matches!((l, r), (Some(l), Some(r)) if c.op.eval(l, r) == Some(true))
    });
    let c = failing.copied().unwrap_or(clauses[0]);
    let mut seen = vec![show(c.lhs)];
    if let COperand::Var(v) = &c.rhs {
        seen.push(show(*v));
    }
    format!("`{}` false at seq {} ({})", c.text, ctx.seq, seen.join(", "))
}

/// Online matcher for one run. Feed events in sequence order, then call
/// [`MatchSession::finalize`].
pub struct MatchSession<'m> {
    module: &'m ProgramModule,
    compiled: Compiled,
    stats: Vec<(u64, Option<u64>)>,
    by_stmt: HashMap<(usize, usize), Vec<usize>>,
    by_use: HashMap<(usize, usize), Vec<usize>>,
    by_branch: HashMap<(usize, usize), Vec<usize>>,
    frames: HashMap<u64, FrameState>,
    globals: FrameState,
    states: Vec<NState>,
    completed: Vec<bool>,
    diags: Vec<ReqDiag>,
    last_seq: u64,
    error: Option<MatchError>,
    fired: Vec<usize>,
}

impl<'m> MatchSession<'m> {
    /// `reqs` must be validated against `module`.
    pub fn new(module: &'m ProgramModule, reqs: &ReqSet) -> Self {
        let compiled = Compiled::new(module, reqs);
        let mut by_stmt: HashMap<_, Vec<usize>> = HashMap::new();
        let mut by_use: HashMap<_, Vec<usize>> = HashMap::new();
        let mut by_branch: HashMap<_, Vec<usize>> = HashMap::new();
        for (i, e) in compiled.elements.iter().enumerate() {
            match *e {
                ElemKey::Stmt { func, offset } => by_stmt.entry((func, offset)).or_default().push(i),
                ElemKey::DefUse { use_func, use_at, .. } => by_use.entry((use_func, use_at)).or_default().push(i),
                ElemKey::Branch { func, tgt, .. } => by_branch.entry((func, tgt)).or_default().push(i),
            }
        }
        let states = compiled.roots.iter().map(init).collect();
        let n = compiled.roots.len();
        MatchSession {
            module,
            stats: vec![(0, None); compiled.elements.len()],
            compiled,
            by_stmt,
            by_use,
            by_branch,
            frames: HashMap::new(),
            globals: FrameState::default(),
            states,
            completed: vec![false; n],
            diags: (0..n).map(|_| ReqDiag::default()).collect(),
            last_seq: 0,
            error: None,
            fired: Vec::new(),
        }
    }

    pub fn on_event(&mut self, ev: &Event) {
        if self.error.is_some() {
            return;
        }
        if ev.seq <= self.last_seq {
            self.error = Some(MatchError::OutOfOrderEvent { previous: self.last_seq, got: ev.seq });
            return;
        }
        self.last_seq = ev.seq;
        self.fired.clear();
        let frame_id = match &ev.kind {
            EventKind::MethodEnter { frame, .. } => {
                self.frames.insert(*frame, FrameState::default());
                return;
            }
            EventKind::MethodExit { frame, .. } => {
                self.frames.remove(frame);
                return;
            }
            EventKind::VariableDefined { var, value, func, offset, frame } => {
                let site = func.zip(*offset);
                let st = match var {
                    VarId::Local { .. } => self.frames.entry(*frame).or_default(),
                    _ => &mut self.globals,
                };
                st.defs.insert(*var, site);
                st.values.insert(*var, *value);
                return;
            }
            EventKind::BlockEnter { func, frame, leader } => {
                let fs = self.frames.entry(*frame).or_default();
                let prev = fs.last_block.replace(*leader);
                if let Some(ids) = self.by_branch.get(&(*func, *leader)) {
                    for &i in ids {
                        if let ElemKey::Branch { src, .. } = self.compiled.elements[i] {
                            if prev == Some(src) {
                                self.fired.push(i);
                            }
                        }
                    }
                }
                *frame
            }
            EventKind::StatementReached { func, frame, offset } => {
                if let Some(ids) = self.by_stmt.get(&(*func, *offset)) {
                    self.fired.extend(ids);
                }
                if let Some(ids) = self.by_use.get(&(*func, *offset)) {
                    for &i in ids {
                        let ElemKey::DefUse { def_func, def, var, .. } = self.compiled.elements[i] else {
                            continue;
                        };
                        let last = match var {
                            VarId::Local { .. } => self.frames.get(frame).and_then(|f| f.defs.get(&var)),
                            _ => self.globals.defs.get(&var),
                        };
                        if last == Some(&Some((def_func, def))) {
                            self.fired.push(i);
                        }
                    }
                }
                *frame
            }
        };
        if self.fired.is_empty() {
            return;
        }
        for &i in &self.fired {
            self.stats[i].0 += 1;
            self.stats[i].1 = Some(ev.seq);
        }
        let ctx = StepCtx {
            module: self.module,
            fired: &self.fired,
            seq: ev.seq,
            frame: self.frames.get(&frame_id),
            globals: &self.globals,
        };
        for (i, root) in self.compiled.roots.iter().enumerate() {
            if matches!(root, CNode::Btr { .. }) {
                continue;
            }
            if step(root, &mut self.states[i], &ctx, &mut self.diags[i]) {
                self.completed[i] = true;
            }
        }
    }

    /// Execution count and last firing seq of every element, by element text.
    pub fn element_stats(&self) -> Vec<ElementStat> {
        self.compiled
            .element_text
            .iter()
            .zip(&self.stats)
            .map(|(t, (count, last))| ElementStat { element: t.clone(), count: *count, last_seq: *last })
            .collect()
    }

    pub fn finalize(self) -> Result<Vec<RequirementReport>, MatchError> {
        if let Some(e) = self.error {
            return Err(e);
        }
        let mut out = Vec::with_capacity(self.compiled.roots.len());
        for (i, root) in self.compiled.roots.iter().enumerate() {
            let mut diagnostics = Diagnostics::default();
            let satisfied = match (root, &self.states[i]) {
                (CNode::Btr { expr, atoms }, _) => expr.eval(&|s| self.stats[atoms[s]].0 > 0),
                (CNode::Rtr(_, lo, hi), NState::Rtr { count, .. }) => {
                    diagnostics.rtr_count = Some(RtrCount { count: *count, lo: *lo, hi: *hi });
                    *count >= *lo && hi.map_or(true, |h| *count <= h)
                }
                (CNode::Str(items), NState::Str { best, .. }) => {
                    diagnostics.str_progress = Some(StrProgress { completed: *best, total: items.len() });
                    self.completed[i]
                }
                _ => self.completed[i],
            };
            let mut ids = Vec::new();
            Compiled::node_elements(root, &mut ids);
            diagnostics.elements = ids
                .into_iter()
                .map(|e| ElementStat {
                    element: self.compiled.element_text[e].clone(),
                    count: self.stats[e].0,
                    last_seq: self.stats[e].1,
                })
                .collect();
            let d = &self.diags[i];
            diagnostics.predicate_failure = if satisfied { None } else { d.predicate_failure.clone() };
            diagnostics.notes = d.notes.clone();
            out.push(RequirementReport { name: self.compiled.names[i].clone(), satisfied, diagnostics });
        }
        Ok(out)
    }
}

impl EventSink for MatchSession<'_> {
    fn on_event(&mut self, event: &Event) {
        MatchSession::on_event(self, event);
    }
}
