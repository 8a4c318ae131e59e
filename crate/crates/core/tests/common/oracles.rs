//! Slow reference computations used to cross-check the analyses.

use std::collections::BTreeSet;

use intentcov::bdt::{Cfg, ControlParent};
use intentcov::lang::{Function, ProgramModule};

/// Whether some path from `from` reaches the exit without visiting `avoid`.
fn reaches_exit_avoiding(cfg: &Cfg, from: usize, avoid: usize) -> bool {
    let mut seen = vec![false; cfg.node_count()];
    let mut stack = vec![from];
    while let Some(b) = stack.pop() {
        if b == avoid || seen[b] {
            continue;
        }
        if b == cfg.exit() {
            return true;
        }
        seen[b] = true;
        stack.extend(cfg.succs[b].iter().map(|&(s, _)| s));
    }
    false
}

/// `d` postdominates `b` (reflexively): every path from `b` to the exit
/// passes through `d`.
pub fn postdominates(cfg: &Cfg, d: usize, b: usize) -> bool {
    d == b || !reaches_exit_avoiding(cfg, b, d)
}

/// Controlling conditional of every instruction from the textbook
/// definition: block `y` depends on branch block `x` when `y` postdominates
/// a successor of `x` but does not strictly postdominate `x`.
pub fn control_deps(func: &Function, cfg: &Cfg) -> Vec<ControlParent> {
    let nb = cfg.blocks.len();
    let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nb];
    for x in 0..nb {
        let last = cfg.blocks[x].last();
        if !func.code[last].opcode.is_conditional() {
            continue;
        }
        for (y, d) in deps.iter_mut().enumerate() {
            let strict = y != x && postdominates(cfg, y, x);
            if !strict && cfg.succs[x].iter().any(|&(s, _)| postdominates(cfg, y, s)) {
                d.insert(last);
            }
        }
    }
    (0..func.code.len())
        .map(|o| match deps[cfg.block_of[o]].iter().filter(|&&c| c < o).max() {
            Some(&c) => ControlParent::Cond(c),
            None => ControlParent::Start,
        })
        .collect()
}

/// Consumer of every instruction's pushed value, by simulating the operand
/// stack block by block.
pub fn consumers(module: &ProgramModule, func: &Function, cfg: &Cfg) -> Vec<Option<usize>> {
    let mut out = vec![None; func.code.len()];
    for b in &cfg.blocks {
        let mut stack: Vec<usize> = Vec::new();
        for &o in &b.members {
            let (pops, pushes) = module.stack_effect(func, &func.code[o].opcode);
            for _ in 0..pops {
                let p = stack.pop().expect("stack underflow in verified code");
                out[p] = Some(o);
            }
            for _ in 0..pushes {
                stack.push(o);
            }
        }
        assert!(stack.is_empty(), "{}: stack not empty at end of block {}", func.name, b.leader);
    }
    out
}
