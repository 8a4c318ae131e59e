//! Cross-version mapping of statements and variables by BDT similarity, and
//! migration of requirement sets to a new program version.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::bdt::{build_bdt, node_of, Bdt};
use crate::lang::{Function, ProgramModule, VarKey};
use crate::requirements::{validate, Anchor, ElementRef, NamedReq, ReqSet, Site, VarRef};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeSet {
    pub changed: BTreeSet<String>,
    pub added: BTreeSet<String>,
    pub removed: BTreeSet<String>,
}

/// Functions whose instruction lists differ once labels are dropped, plus
/// functions present on one side only.
pub fn functions_changed(old: &ProgramModule, new: &ProgramModule) -> ChangeSet {
    let mut cs = ChangeSet::default();
    for f in &old.functions {
        match new.function(&f.name) {
            None => {
                cs.removed.insert(f.name.clone());
            }
            Some(g) if f.normalized() != g.normalized() => {
                cs.changed.insert(f.name.clone());
            }
            Some(_) => {}
        }
    }
    for g in &new.functions {
        if old.function(&g.name).is_none() {
            cs.added.insert(g.name.clone());
        }
    }
    cs
}

/// Filter stage at which mapping stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Descendants(usize),
    Ancestors(usize),
    Siblings,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Descendants(k) => write!(f, "level-{k} descendants"),
            Stage::Ancestors(k) => write!(f, "level-{k} ancestors"),
            Stage::Siblings => f.write_str("siblings"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapResult {
    Mapped(usize),
    /// Surviving candidate offsets, ascending.
    Ambiguous { candidates: Vec<usize>, stage: Stage },
    Unmapped(String),
}

impl fmt::Display for MapResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapResult::Mapped(o) => write!(f, "mapped @+{o}"),
            MapResult::Ambiguous { candidates, stage } => {
                let c: Vec<String> = candidates.iter().map(|o| format!("@+{o}")).collect();
                write!(f, "ambiguous {} at {stage}", c.join(","))
            }
            MapResult::Unmapped(r) => write!(f, "unmapped ({r})"),
        }
    }
}

/// BDTs of one function in two versions.
pub struct FnPair<'a> {
    old_fn: &'a Function,
    new_fn: &'a Function,
    old: Bdt,
    new: Bdt,
    identical: bool,
}

impl<'a> FnPair<'a> {
    pub fn new(old_m: &ProgramModule, old_fn: &'a Function, new_m: &ProgramModule, new_fn: &'a Function) -> Self {
        FnPair {
            old_fn,
            new_fn,
            old: build_bdt(old_m, old_fn),
            new: build_bdt(new_m, new_fn),
            identical: old_fn.normalized() == new_fn.normalized(),
        }
    }

    /// Counterpart of the old instruction at `offset`.
    pub fn map(&self, offset: usize) -> MapResult {
        if self.identical {
            return MapResult::Mapped(offset);
        }
        let (b, b2) = (&self.old, &self.new);
        let n = node_of(offset);
        let sig = &b.nodes[n].signature;
        let mut cands: Vec<usize> = (1..b2.nodes.len()).filter(|&c| b2.nodes[c].signature == *sig).collect();
        let done = |c: &[usize]| MapResult::Mapped(c[0] - 1);
        let ambiguous = |c: &[usize], stage| MapResult::Ambiguous { candidates: c.iter().map(|x| x - 1).collect(), stage };
        match cands.len() {
            0 => return MapResult::Unmapped("no opcode-compatible node".into()),
            1 => return done(&cands),
            _ => {}
        }
        let sig_at = |t: &Bdt, x: usize, k: usize| t.ancestor(x, k).map(|a| t.nodes[a].signature.clone());
        let height = b.height().max(b2.height());
        for k in 1..=height {
            for stage in [Stage::Descendants(k), Stage::Ancestors(k)] {
                let kept: Vec<usize> = match stage {
                    Stage::Descendants(_) => {
                        let want = b.descendants_at(n, k);
                        cands.iter().copied().filter(|&c| b2.descendants_at(c, k) == want).collect()
                    }
                    _ => {
                        let want = sig_at(b, n, k);
                        cands.iter().copied().filter(|&c| sig_at(b2, c, k) == want).collect()
                    }
                };
                match kept.len() {
                    0 => return ambiguous(&cands, stage),
                    1 => return done(&kept),
                    _ => cands = kept,
                }
            }
        }
        let want = b.sibling_context(n);
        let kept: Vec<usize> = cands.iter().copied().filter(|&c| b2.sibling_context(c) == want).collect();
        match kept.len() {
            0 => ambiguous(&cands, Stage::Siblings),
            1 => done(&kept),
            _ => ambiguous(&kept, Stage::Siblings),
        }
    }

    pub fn old_fn(&self) -> &Function {
        self.old_fn
    }

    pub fn new_fn(&self) -> &Function {
        self.new_fn
    }
}

/// Maps one statement of `old_fn` into `new_fn`.
pub fn map_statement(
    old_m: &ProgramModule,
    old_fn: &Function,
    new_m: &ProgramModule,
    new_fn: &Function,
    offset: usize,
) -> MapResult {
    FnPair::new(old_m, old_fn, new_m, new_fn).map(offset)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarMapResult {
    Mapped(VarRef),
    /// Per old site: function, old offset, new offset, variable referenced there.
    Conflict(Vec<(String, usize, usize, VarRef)>),
    Unmapped(String),
}

fn key_matches(k: VarKey<'_>, var: &VarRef) -> bool {
    match (k, var) {
        (VarKey::Local(n), VarRef::Local { name, .. }) => n == name,
        (VarKey::Global(n), VarRef::Global(g)) => n == g,
        (VarKey::Array(n), VarRef::Array(a)) => n == a,
        _ => false,
    }
}

fn key_to_ref(k: VarKey<'_>, func: &str) -> VarRef {
    match k {
        VarKey::Local(n) => VarRef::Local { func: func.to_string(), name: n.to_string() },
        VarKey::Global(n) => VarRef::Global(n.to_string()),
        VarKey::Array(n) => VarRef::Array(n.to_string()),
    }
}

fn var_exists(m: &ProgramModule, var: &VarRef) -> bool {
    match var {
        VarRef::Local { func, name } => m.function(func).is_some_and(|f| f.local_type(name).is_some()),
        VarRef::Global(g) => m.global(g).is_some(),
        VarRef::Array(a) => m.array(a).is_some(),
    }
}

/// Maps a variable through the statements that reference it. Locals are
/// searched within their function, globals and arrays module-wide.
pub fn map_variable(old: &ProgramModule, new: &ProgramModule, var: &VarRef) -> VarMapResult {
    let funcs: Vec<&Function> = match var {
        VarRef::Local { func, .. } => old.function(func).into_iter().collect(),
        _ => old.functions.iter().collect(),
    };
    let mut evidence = Vec::new();
    let mut any_site = false;
    for f in funcs {
        let sites: Vec<usize> = f
            .code
            .iter()
            .filter(|i| i.opcode.referenced_var().is_some_and(|k| key_matches(k, var)))
            .map(|i| i.offset)
            .collect();
        if sites.is_empty() {
            continue;
        }
        any_site = true;
        let Some(g) = new.function(&f.name) else { continue };
        let pair = FnPair::new(old, f, new, g);
        for s in sites {
            if let MapResult::Mapped(o) = pair.map(s) {
                let k = g.code[o].opcode.referenced_var().expect("signature match keeps the opcode kind");
                evidence.push((f.name.clone(), s, o, key_to_ref(k, &g.name)));
            }
        }
    }
    if !any_site {
        return if var_exists(new, var) {
            VarMapResult::Mapped(var.clone())
        } else {
            VarMapResult::Unmapped("no reference sites".into())
        };
    }
    let distinct: BTreeSet<&VarRef> = evidence.iter().map(|e| &e.3).collect();
    match distinct.len() {
        0 => VarMapResult::Unmapped("no reference site could be mapped".into()),
        1 => VarMapResult::Mapped(evidence[0].3.clone()),
        _ => VarMapResult::Conflict(evidence),
    }
}

/// User choices for mappings the algorithm could not settle.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Resolutions {
    pub stmts: BTreeMap<(String, usize), usize>,
    /// Keyed by scope (function name, `global` or `array`) and old name.
    pub vars: BTreeMap<(String, String), String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct ResolutionsError {
    pub line: usize,
    pub msg: String,
}

fn parse_plus_offset(s: &str) -> Option<usize> {
    s.strip_prefix("@+")?.parse().ok()
}

impl Resolutions {
    /// Parses `stmt fn @+old -> @+new` and `var scope old -> new` lines.
    pub fn parse(text: &str) -> Result<Resolutions, ResolutionsError> {
        let mut r = Resolutions::default();
        for (i, raw) in text.lines().enumerate() {
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let err = |msg: &str| ResolutionsError { line: i + 1, msg: msg.into() };
            let w: Vec<&str> = l.split_whitespace().collect();
            match w.as_slice() {
                ["stmt", f, old, "->", new] => {
                    let o = parse_plus_offset(old).ok_or_else(|| err("expected `@+offset`"))?;
                    let n = parse_plus_offset(new).ok_or_else(|| err("expected `@+offset`"))?;
                    r.stmts.insert((f.to_string(), o), n);
                }
                ["var", scope, old, "->", new] => {
                    r.vars.insert((scope.to_string(), old.to_string()), new.to_string());
                }
                _ => return Err(err("expected `stmt fn @+old -> @+new` or `var scope old -> new`")),
            }
        }
        Ok(r)
    }

    fn var(&self, var: &VarRef) -> Option<VarRef> {
        let (scope, name) = match var {
            VarRef::Local { func, name } => (func.as_str(), name),
            VarRef::Global(n) => ("global", n),
            VarRef::Array(n) => ("array", n),
        };
        let new = self.vars.get(&(scope.to_string(), name.clone()))?.clone();
        Some(match var {
            VarRef::Local { func, .. } => VarRef::Local { func: func.clone(), name: new },
            VarRef::Global(_) => VarRef::Global(new),
            VarRef::Array(_) => VarRef::Array(new),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IssueDetail {
    Statement(MapResult),
    Variable(VarMapResult),
    FunctionRemoved(String),
    /// The migrated requirement does not validate against the new module.
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MigrationIssue {
    pub requirement: String,
    /// The element or variable concerned, in requirement syntax.
    pub element: String,
    pub detail: IssueDetail,
}

impl fmt::Display for MigrationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t", self.requirement, self.element)?;
        match &self.detail {
            IssueDetail::Statement(m) => write!(f, "{m}"),
            IssueDetail::Variable(VarMapResult::Conflict(ev)) => {
                let parts: Vec<String> = ev.iter().map(|(_, o, n, v)| format!("@+{o}->@+{n}:{v}")).collect();
                write!(f, "conflict {}", parts.join(","))
            }
            IssueDetail::Variable(VarMapResult::Unmapped(r)) => write!(f, "unmapped ({r})"),
            IssueDetail::Variable(VarMapResult::Mapped(v)) => write!(f, "mapped {v}"),
            IssueDetail::FunctionRemoved(n) => write!(f, "unmapped (function `{n}` removed)"),
            IssueDetail::Invalid(e) => write!(f, "invalid ({e})"),
        }
    }
}

struct Migrator<'a> {
    old: &'a ProgramModule,
    new: &'a ProgramModule,
    res: &'a Resolutions,
    pairs: BTreeMap<String, FnPair<'a>>,
}

impl<'a> Migrator<'a> {
    fn site(&self, s: &Site) -> Result<Site, IssueDetail> {
        let Some(pair) = self.pairs.get(&s.func) else {
            return Err(IssueDetail::FunctionRemoved(s.func.clone()));
        };
        let old_off = s.offset();
        let new_off = match pair.map(old_off) {
            MapResult::Mapped(o) => o,
            other => match self.res.stmts.get(&(s.func.clone(), old_off)) {
                Some(&o) if o < pair.new_fn.code.len() => o,
                _ => return Err(IssueDetail::Statement(other)),
            },
        };
        let anchor = match (&s.anchor, &pair.new_fn.code[new_off].label) {
            (Anchor::Label(_), Some(l)) => Anchor::Label(l.clone()),
            (Anchor::Offset(_), _) if pair.identical => s.anchor.clone(),
            _ => Anchor::Offset(new_off),
        };
        Ok(Site { func: s.func.clone(), anchor, resolved: Some(new_off) })
    }

    fn var(&self, v: &VarRef) -> Result<VarRef, IssueDetail> {
        match map_variable(self.old, self.new, v) {
            VarMapResult::Mapped(n) => Ok(n),
            other => self.res.var(v).ok_or(IssueDetail::Variable(other)),
        }
    }

    fn req(&self, r: &NamedReq, issues: &mut Vec<MigrationIssue>) -> Option<NamedReq> {
        let mut out = r.clone();
        let before = issues.len();
        let issue = |element: String, detail| MigrationIssue { requirement: r.name.clone(), element, detail };
        for e in out.req.elements_mut() {
            let text = e.to_string();
            for s in e.sites_mut() {
                match self.site(s) {
                    Ok(n) => *s = n,
                    Err(d) => issues.push(issue(text.clone(), d)),
                }
            }
            if let ElementRef::DefUse { var, .. } = e {
                match self.var(var) {
                    Ok(n) => *var = n,
                    Err(d) => issues.push(issue(var.to_string(), d)),
                }
            }
        }
        for p in out.req.predicates_mut() {
            for v in p.vars_mut() {
                match self.var(v) {
                    Ok(n) => *v = n,
                    Err(d) => issues.push(issue(v.to_string(), d)),
                }
            }
        }
        if issues.len() > before {
            return None;
        }
        let single = ReqSet { reqs: vec![out] };
        match validate(&single, self.new) {
            Ok(mut v) => v.reqs.pop(),
            Err(e) => {
                issues.push(issue(r.name.clone(), IssueDetail::Invalid(e.to_string())));
                None
            }
        }
    }
}

/// Migrates a requirement set validated against `old` to `new`.
/// Requirements with unresolved issues are left out of the result.
pub fn migrate(
    reqs: &ReqSet,
    old: &ProgramModule,
    new: &ProgramModule,
    res: &Resolutions,
) -> (ReqSet, Vec<MigrationIssue>) {
    let mut pairs = BTreeMap::new();
    for f in &old.functions {
        if let Some(g) = new.function(&f.name) {
            pairs.insert(f.name.clone(), FnPair::new(old, f, new, g));
        }
    }
    let m = Migrator { old, new, res, pairs };
    let mut issues = Vec::new();
    let migrated = reqs.reqs.iter().filter_map(|r| m.req(r, &mut issues)).collect();
    (ReqSet { reqs: migrated }, issues)
}
