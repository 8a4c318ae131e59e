//! Control-flow graphs, postdominators, direct control dependence and the
//! bytecode dependence tree (BDT) of a function.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::lang::{consumers, leaders, Function, Opcode, ProgramModule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Fallthrough,
    Taken,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub leader: usize,
    pub members: Vec<usize>,
}

impl Block {
    pub fn last(&self) -> usize {
        *self.members.last().expect("blocks are non-empty")
    }
}

/// Blocks are indexed by position; index `blocks.len()` is the virtual exit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub blocks: Vec<Block>,
    pub block_of: Vec<usize>,
    pub succs: Vec<Vec<(usize, EdgeKind)>>,
}

impl Cfg {
    pub fn exit(&self) -> usize {
        self.blocks.len()
    }

    pub fn node_count(&self) -> usize {
        self.blocks.len() + 1
    }

    pub fn preds(&self) -> Vec<Vec<usize>> {
        let mut p = vec![Vec::new(); self.node_count()];
        for (b, ss) in self.succs.iter().enumerate() {
            for &(s, _) in ss {
                p[s].push(b);
            }
        }
        p
    }

    /// Offset of the conditional ending block `b`, if it ends in one.
    pub fn branch_of(&self, func: &Function, b: usize) -> Option<usize> {
        let last = self.blocks[b].last();
        func.code[last].opcode.is_conditional().then_some(last)
    }
}

pub fn build_cfg(func: &Function) -> Cfg {
    let lead: Vec<usize> = leaders(func).into_iter().collect();
    let n = func.code.len();
    let mut blocks = Vec::with_capacity(lead.len());
    let mut block_of = vec![0; n];
    for (i, &l) in lead.iter().enumerate() {
        let end = lead.get(i + 1).copied().unwrap_or(n);
        for o in l..end {
            block_of[o] = i;
        }
        blocks.push(Block { leader: l, members: (l..end).collect() });
    }
    let exit = blocks.len();
    let succs = blocks
        .iter()
        .map(|b| {
            let last = b.last();
            let next = if last + 1 < n { block_of[last + 1] } else { exit };
            match &func.code[last].opcode {
                Opcode::Ret => vec![(exit, EdgeKind::Fallthrough)],
                Opcode::Jmp(t) => vec![(block_of[*t], EdgeKind::Taken)],
                Opcode::Brt(t) | Opcode::Brf(t) => {
                    vec![(next, EdgeKind::Fallthrough), (block_of[*t], EdgeKind::Taken)]
                }
                _ => vec![(next, EdgeKind::Fallthrough)],
            }
        })
        .collect();
    Cfg { blocks, block_of, succs }
}

/// Postdominator sets (reflexive) of every node, including the exit.
pub fn postdominator_sets(cfg: &Cfg) -> Vec<BTreeSet<usize>> {
    let n = cfg.node_count();
    let exit = cfg.exit();
    let all: BTreeSet<usize> = (0..n).collect();
    let mut pdom: Vec<BTreeSet<usize>> = (0..n).map(|b| if b == exit { [exit].into() } else { all.clone() }).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for b in (0..cfg.blocks.len()).rev() {
            let mut meet: Option<BTreeSet<usize>> = None;
            for &(s, _) in &cfg.succs[b] {
                meet = Some(match meet {
                    None => pdom[s].clone(),
                    Some(m) => m.intersection(&pdom[s]).copied().collect(),
                });
            }
            let mut new = meet.unwrap_or_default();
            new.insert(b);
            if new != pdom[b] {
                pdom[b] = new;
                changed = true;
            }
        }
    }
    pdom
}

/// Immediate postdominator of every node; the exit maps to itself.
pub fn postdominators(cfg: &Cfg) -> Vec<usize> {
    let sets = postdominator_sets(cfg);
    (0..cfg.node_count())
        .map(|b| {
            if b == cfg.exit() {
                return b;
            }
            // The nearest strict postdominator has the largest postdominator set.
            sets[b]
                .iter()
                .copied()
                .filter(|&d| d != b)
                .max_by_key(|&d| sets[d].len())
                .expect("every block reaches the exit")
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControlParent {
    Start,
    Cond(usize),
}

/// Conditional offsets each block is directly control dependent on.
pub fn block_control_deps(func: &Function, cfg: &Cfg) -> Vec<BTreeSet<usize>> {
    let ipdom = postdominators(cfg);
    let mut deps = vec![BTreeSet::new(); cfg.blocks.len()];
    for x in 0..cfg.blocks.len() {
        let Some(cond) = cfg.branch_of(func, x) else { continue };
        for &(s, _) in &cfg.succs[x] {
            let mut y = s;
            while y != ipdom[x] && y != cfg.exit() {
                deps[y].insert(cond);
                y = ipdom[y];
            }
        }
    }
    deps
}

/// Controlling conditional of every instruction. Among several, the nearest
/// one preceding the instruction wins; otherwise the parent is `Start`.
pub fn control_deps(func: &Function, cfg: &Cfg) -> Vec<ControlParent> {
    let deps = block_control_deps(func, cfg);
    (0..func.code.len())
        .map(|o| match deps[cfg.block_of[o]].range(..o).next_back() {
            Some(&c) => ControlParent::Cond(c),
            None => ControlParent::Start,
        })
        .collect()
}

/// Abstract operand signature: variable names and jump targets are dropped,
/// constants and callee names kept.
pub fn signature(op: &Opcode) -> String {
    match op {
        Opcode::ConstI(_) | Opcode::ConstF(_) | Opcode::ConstB(_) | Opcode::Call(_) | Opcode::Intr(_) => op.to_string(),
        _ => op.mnemonic(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BdtNode {
    /// `None` for the root.
    pub offset: Option<usize>,
    pub signature: String,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Node 0 is `start`; node `i + 1` is instruction `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bdt {
    pub nodes: Vec<BdtNode>,
}

pub const ROOT: usize = 0;

pub fn node_of(offset: usize) -> usize {
    offset + 1
}

pub fn build_bdt(module: &ProgramModule, func: &Function) -> Bdt {
    let cfg = build_cfg(func);
    let cd = control_deps(func, &cfg);
    let cons = consumers(module, func);
    let mut nodes = vec![BdtNode { offset: None, signature: "start".into(), parent: None, children: Vec::new() }];
    for ins in &func.code {
        let parent = match (cons[ins.offset], cd[ins.offset]) {
            (Some(c), _) => node_of(c),
            (None, ControlParent::Cond(c)) => node_of(c),
            (None, ControlParent::Start) => ROOT,
        };
        nodes.push(BdtNode {
            offset: Some(ins.offset),
            signature: signature(&ins.opcode),
            parent: Some(parent),
            children: Vec::new(),
        });
    }
    // Offsets ascend, so pushing in order keeps siblings sorted.
    for i in 1..nodes.len() {
        let p = nodes[i].parent.expect("non-root");
        nodes[p].children.push(i);
    }
    Bdt { nodes }
}

impl Bdt {
    pub fn depth(&self, mut n: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.nodes[n].parent {
            n = p;
            d += 1;
        }
        d
    }

    /// Length of the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        (0..self.nodes.len()).map(|n| self.depth(n)).max().unwrap_or(0)
    }

    /// k-th ancestor (k = 1 is the parent).
    pub fn ancestor(&self, n: usize, k: usize) -> Option<usize> {
        let mut cur = n;
        for _ in 0..k {
            cur = self.nodes[cur].parent?;
        }
        Some(cur)
    }

    /// Signatures of the descendants exactly `k` levels below `n`, in preorder.
    pub fn descendants_at(&self, n: usize, k: usize) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_level(n, k, &mut out);
        out
    }

    fn collect_level<'a>(&'a self, n: usize, k: usize, out: &mut Vec<&'a str>) {
        if k == 0 {
            out.push(&self.nodes[n].signature);
            return;
        }
        for &c in &self.nodes[n].children {
            self.collect_level(c, k - 1, out);
        }
    }

    /// Sibling signatures (including `n`) in order, and `n`'s index among them.
    pub fn sibling_context(&self, n: usize) -> (Vec<&str>, usize) {
        match self.nodes[n].parent {
            None => (vec![self.nodes[n].signature.as_str()], 0),
            Some(p) => {
                let ch = &self.nodes[p].children;
                let idx = ch.iter().position(|&c| c == n).expect("child of parent");
                (ch.iter().map(|&c| self.nodes[c].signature.as_str()).collect(), idx)
            }
        }
    }

    /// Indented dump, one node per line in preorder.
    pub fn dump(&self, func: &Function) -> String {
        let mut out = String::new();
        let mut stack = vec![(ROOT, 0usize)];
        while let Some((n, d)) = stack.pop() {
            let node = &self.nodes[n];
            let indent = "  ".repeat(d);
            match node.offset {
                None => {
                    let _ = writeln!(out, "{indent}start");
                }
                Some(o) => {
                    let parent = match node.parent.and_then(|p| self.nodes[p].offset) {
                        Some(p) => p.to_string(),
                        None => "start".into(),
                    };
                    let _ = writeln!(out, "{indent}{o} {} [{}] (parent={parent})", func.code[o].opcode, node.signature);
                }
            }
            for &c in node.children.iter().rev() {
                stack.push((c, d + 1));
            }
        }
        out
    }
}
