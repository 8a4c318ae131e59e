//! Seeded random MiniLang programs, requirements and inputs.

use intentcov::bdt::build_cfg;
use intentcov::lang::{compile_source, Opcode, ProgramModule, Value, VarKey};
use intentcov::requirements::{definition_sites, parse_reqs, validate, ReqSet, VarRef};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub type GenRng = ChaCha8Rng;

pub fn rng(seed: u64) -> GenRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const ENTRY: &str = "f";
const LOCALS: [&str; 2] = ["x", "y"];
const PARAMS: [&str; 2] = ["a", "b"];
pub const MAX_INSTRUCTIONS: usize = 40;

struct ProgGen<'r> {
    rng: &'r mut GenRng,
    labels: usize,
    global: bool,
    array: bool,
    helper: bool,
}

impl ProgGen<'_> {
    fn label(&mut self) -> String {
        if self.rng.gen_bool(0.5) {
            self.labels += 1;
            format!("l{}: ", self.labels)
        } else {
            String::new()
        }
    }

    fn var(&mut self) -> &'static str {
        *[LOCALS[0], LOCALS[1], PARAMS[0], PARAMS[1]].choose(self.rng).unwrap()
    }

    fn atom(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => self.rng.gen_range(-3..6).to_string(),
            1 if self.global => "g".into(),
            _ => self.var().into(),
        }
    }

    fn expr(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => format!("{} + {}", self.atom(), self.atom()),
            1 => format!("{} - {}", self.atom(), self.rng.gen_range(0..4)),
            2 if self.helper => format!("h({})", self.atom()),
            _ => self.atom(),
        }
    }

    fn cmp(&mut self) -> String {
        let op = *["<", "<=", ">", ">=", "==", "!="].choose(self.rng).unwrap();
        format!("{} {op} {}", self.var(), self.atom())
    }

    fn cond(&mut self) -> String {
        match self.rng.gen_range(0..6) {
            0 => format!("{} && {}", self.cmp(), self.cmp()),
            1 => format!("{} || {}", self.cmp(), self.cmp()),
            2 => format!("!({})", self.cmp()),
            _ => self.cmp(),
        }
    }

    fn stmt(&mut self, depth: usize, out: &mut String, indent: usize) {
        let pad = "  ".repeat(indent);
        let choice = if depth >= 2 { self.rng.gen_range(0..4) } else { self.rng.gen_range(0..7) };
        match choice {
            0 | 1 => {
                let l = self.label();
                let v = *LOCALS.choose(self.rng).unwrap();
                let e = self.expr();
                out.push_str(&format!("{pad}{l}{v} = {e};\n"));
            }
            2 if self.global => {
                let l = self.label();
                let e = self.expr();
                out.push_str(&format!("{pad}{l}g = {e};\n"));
            }
            2 | 3 if self.array => {
                let l = self.label();
                let i = self.rng.gen_range(0..4);
                if self.rng.gen_bool(0.5) {
                    let v = *LOCALS.choose(self.rng).unwrap();
                    out.push_str(&format!("{pad}{l}{v} = arr[{i}];\n"));
                } else {
                    let e = self.atom();
                    out.push_str(&format!("{pad}{l}arr[{i}] = {e};\n"));
                }
            }
            4 | 5 => {
                let l = self.label();
                let c = self.cond();
                out.push_str(&format!("{pad}{l}if ({c}) {{\n"));
                self.block(depth + 1, out, indent + 1);
                if self.rng.gen_bool(0.5) {
                    out.push_str(&format!("{pad}}} else {{\n"));
                    self.block(depth + 1, out, indent + 1);
                }
                out.push_str(&format!("{pad}}}\n"));
            }
            6 => {
                let c = format!("i{depth}");
                let bound = self.rng.gen_range(1..4);
                out.push_str(&format!("{pad}{c} = 0;\n"));
                let l = self.label();
                let extra = if self.rng.gen_bool(0.3) { format!(" && {}", self.cmp()) } else { String::new() };
                out.push_str(&format!("{pad}{l}while ({c} < {bound}{extra}) {{\n"));
                self.block(depth + 1, out, indent + 1);
                out.push_str(&format!("{pad}  {c} = {c} + 1;\n{pad}}}\n"));
            }
            _ => {
                let l = self.label();
                let v = *LOCALS.choose(self.rng).unwrap();
                out.push_str(&format!("{pad}{l}{v} = {v} + 1;\n"));
            }
        }
    }

    fn block(&mut self, depth: usize, out: &mut String, indent: usize) {
        let n = self.rng.gen_range(1..=2);
        for _ in 0..n {
            self.stmt(depth, out, indent);
        }
    }
}

/// MiniLang source for one random program.
pub fn program_source(rng: &mut GenRng) -> String {
    let mut g = ProgGen {
        global: rng.gen_bool(0.5),
        array: rng.gen_bool(0.5),
        helper: rng.gen_bool(0.4),
        labels: 0,
        rng,
    };
    let mut src = String::new();
    if g.global {
        src.push_str("global g: int = 1;\n");
    }
    if g.array {
        src.push_str("global arr: int[4];\n");
    }
    if g.helper {
        src.push_str("fn h(v: int): int {\n  if (v > 2) {\n    return v - 1;\n  }\n  return v + 1;\n}\n");
    }
    src.push_str("fn f(a: int, b: int): int {\n  let x: int = a;\n  let y: int = b;\n");
    src.push_str("  let i0: int = 0;\n  let i1: int = 0;\n");
    let n = g.rng.gen_range(1..=4);
    for _ in 0..n {
        g.stmt(0, &mut src, 1);
    }
    src.push_str("  return x + y;\n}\n");
    src
}

/// A random module whose entry function `f` has at most
/// [`MAX_INSTRUCTIONS`] instructions.
pub fn program(rng: &mut GenRng) -> (String, ProgramModule) {
    loop {
        let src = program_source(rng);
        let m = compile_source(&src).unwrap_or_else(|e| panic!("generator produced bad source: {e}\n{src}"));
        if m.function(ENTRY).unwrap().code.len() <= MAX_INSTRUCTIONS {
            return (src, m);
        }
    }
}

pub fn args(rng: &mut GenRng) -> Vec<Value> {
    vec![Value::Int(rng.gen_range(-4..8)), Value::Int(rng.gen_range(-4..8))]
}

fn element(rng: &mut GenRng, m: &ProgramModule) -> String {
    let fname = if m.function("h").is_some() && rng.gen_bool(0.15) { "h" } else { ENTRY };
    let f = m.function(fname).unwrap();
    match rng.gen_range(0..5) {
        0 | 1 => {
            let labels: Vec<_> = f.code.iter().filter_map(|i| i.label.clone()).collect();
            if !labels.is_empty() && rng.gen_bool(0.4) {
                format!("stmt {fname}@{}", labels.choose(rng).unwrap())
            } else {
                format!("stmt {fname}@+{}", rng.gen_range(0..f.code.len()))
            }
        }
        2 | 3 => {
            let cfg = build_cfg(f);
            let edges: Vec<(usize, usize)> = cfg
                .succs
                .iter()
                .enumerate()
                .flat_map(|(b, ss)| {
                    ss.iter().filter(|(s, _)| *s < cfg.blocks.len()).map(move |(s, _)| (b, *s)).collect::<Vec<_>>()
                })
                .collect();
            match edges.choose(rng) {
                Some(&(b, s)) => {
                    let src = *cfg.blocks[b].members.choose(rng).unwrap();
                    format!("branch {fname}@+{src} -> @+{}", cfg.blocks[s].leader)
                }
                None => format!("stmt {fname}@+0"),
            }
        }
        _ => {
            let candidates: Vec<VarRef> = LOCALS
                .iter()
                .chain(PARAMS.iter())
                .map(|n| VarRef::Local { func: ENTRY.into(), name: (*n).into() })
                .chain(m.global("g").map(|_| VarRef::Global("g".into())))
                .collect();
            let var = candidates.choose(rng).unwrap().clone();
            let defs = definition_sites(m, &var);
            let mut uses: Vec<(usize, usize)> = Vec::new();
            for (fi, func) in m.functions.iter().enumerate() {
                for i in &func.code {
                    let hit = match (&var, &i.opcode) {
                        (VarRef::Local { func: vf, name }, Opcode::Load(n)) => *vf == func.name && n == name,
                        (VarRef::Global(g), Opcode::GLoad(n)) => n == g,
                        _ => false,
                    };
                    if hit {
                        uses.push((fi, i.offset));
                    }
                }
            }
            match (defs.choose(rng), uses.choose(rng)) {
                (Some(&(df, d)), Some(&(uf, u))) => format!(
                    "defuse {}@+{d} -> {}@+{u} of {var}",
                    m.functions[df].name, m.functions[uf].name
                ),
                _ => format!("stmt {ENTRY}@+0"),
            }
        }
    }
}

fn btr_expr(rng: &mut GenRng, m: &ProgramModule, allow_neg: bool, size: usize) -> String {
    if size <= 1 {
        return element(rng, m);
    }
    let l = btr_expr(rng, m, allow_neg, size / 2);
    let r = btr_expr(rng, m, allow_neg, size - size / 2);
    let r = if allow_neg && rng.gen_bool(0.3) { format!("!({r})") } else { r };
    if rng.gen_bool(0.5) {
        format!("({l} && {r})")
    } else {
        format!("({l} || {r})")
    }
}

fn predicate(rng: &mut GenRng, m: &ProgramModule) -> String {
    let clause = |rng: &mut GenRng| {
        let var = if m.global("g").is_some() && rng.gen_bool(0.25) {
            "global g".to_string()
        } else {
            let n = LOCALS.iter().chain(PARAMS.iter()).copied().collect::<Vec<_>>();
            format!("local {ENTRY}.{}", n.choose(rng).unwrap())
        };
        let op = *["<", "<=", ">", ">=", "==", "!="].choose(rng).unwrap();
        format!("{var} {op} {}", rng.gen_range(-2..5))
    };
    match rng.gen_range(0..4) {
        0 => format!("{} && {}", clause(rng), clause(rng)),
        1 => format!("{} || {}", clause(rng), clause(rng)),
        _ => clause(rng),
    }
}

fn tr(rng: &mut GenRng, m: &ProgramModule, depth: usize, allow_neg: bool, in_str: bool) -> String {
    let kind = if depth <= 1 { 0 } else { rng.gen_range(0..4) };
    match kind {
        1 => format!("ctr({}, {})", tr(rng, m, depth - 1, allow_neg, false), predicate(rng, m)),
        2 => {
            let n = rng.gen_range(2..=3);
            let items: Vec<String> = (0..n).map(|_| tr(rng, m, depth - 1, allow_neg, true)).collect();
            format!("str({})", items.join(", "))
        }
        3 => {
            let lo = rng.gen_range(0..3);
            let hi = if in_str || rng.gen_bool(0.4) { "_".to_string() } else { (lo + rng.gen_range(0..3)).to_string() };
            let lo = if hi == "_" { lo.max(1) } else { lo };
            format!("rtr({}, {lo}, {hi})", tr(rng, m, depth - 1, allow_neg, false))
        }
        _ => {
            let size = rng.gen_range(1..=3);
            format!("btr({})", btr_expr(rng, m, allow_neg, size))
        }
    }
}

/// DSL text of one requirement of depth at most 3 that validates against `m`.
pub fn requirement_text(rng: &mut GenRng, m: &ProgramModule, allow_neg: bool) -> String {
    loop {
        let text = format!("req r = {};", tr(rng, m, 3, allow_neg, false));
        let Ok(set) = parse_reqs(&text) else { continue };
        if validate(&set, m).is_ok() {
            return text;
        }
    }
}

/// A validated set of `n` requirements named `r0..`.
pub fn requirements(rng: &mut GenRng, m: &ProgramModule, n: usize, allow_neg: bool) -> ReqSet {
    let text: String = (0..n)
        .map(|i| requirement_text(rng, m, allow_neg).replacen("req r ", &format!("req r{i} "), 1) + "\n")
        .collect();
    validate(&parse_reqs(&text).unwrap(), m).unwrap()
}

/// True when a function loads or stores `name` as a local.
pub fn touches_local(m: &ProgramModule, func: &str, name: &str) -> bool {
    m.function(func)
        .is_some_and(|f| f.code.iter().any(|i| i.opcode.referenced_var() == Some(VarKey::Local(name))))
}

/// A `btr` expression over up to `size` atoms, as DSL text.
pub fn btr_text(rng: &mut GenRng, m: &ProgramModule, allow_neg: bool, size: usize) -> String {
    format!("btr({})", btr_expr(rng, m, allow_neg, size))
}
