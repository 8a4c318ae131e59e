use std::fmt;

use super::*;

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anchor::Label(l) => write!(f, "@{l}"),
            Anchor::Offset(o) => write!(f, "@+{o}"),
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.func, self.anchor)
    }
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarRef::Local { func, name } => write!(f, "local {func}.{name}"),
            VarRef::Global(n) => write!(f, "global {n}"),
            VarRef::Array(n) => write!(f, "array {n}"),
        }
    }
}

impl fmt::Display for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementRef::Stmt(s) => write!(f, "stmt {s}"),
            ElementRef::Branch { src, tgt } => write!(f, "branch {src} -> {}", tgt.anchor),
            ElementRef::DefUse { def, use_site, var } => write!(f, "defuse {def} -> {use_site} of {var}"),
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Const(v) => write!(f, "{v}"),
            Operand::Var(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

// Precedence levels: `||` = 1, `&&` = 2, `!` and atoms = 3. Operators are
// left-associative, so a right operand at the same level gets parentheses.

fn pred(p: &Pred, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let (level, body): (u8, &dyn Fn(&mut fmt::Formatter<'_>) -> fmt::Result) = match p {
        Pred::Clause(c) => (3, &move |f| write!(f, "{c}")),
        Pred::Not(x) => (3, &move |f| {
            f.write_str("!")?;
            pred(x, 3, f)
        }),
        Pred::And(a, b) => (2, &move |f| {
            pred(a, 2, f)?;
            f.write_str(" && ")?;
            pred(b, 3, f)
        }),
        Pred::Or(a, b) => (1, &move |f| {
            pred(a, 1, f)?;
            f.write_str(" || ")?;
            pred(b, 2, f)
        }),
    };
    if level < min {
        f.write_str("(")?;
        body(f)?;
        f.write_str(")")
    } else {
        body(f)
    }
}

fn expr(e: &BtrExpr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let (level, body): (u8, &dyn Fn(&mut fmt::Formatter<'_>) -> fmt::Result) = match e {
        BtrExpr::Atom(a) => (3, &move |f| write!(f, "{a}")),
        BtrExpr::Not(x) => (3, &move |f| {
            f.write_str("!")?;
            expr(x, 3, f)
        }),
        BtrExpr::And(a, b) => (2, &move |f| {
            expr(a, 2, f)?;
            f.write_str(" && ")?;
            expr(b, 3, f)
        }),
        BtrExpr::Or(a, b) => (1, &move |f| {
            expr(a, 1, f)?;
            f.write_str(" || ")?;
            expr(b, 2, f)
        }),
    };
    if level < min {
        f.write_str("(")?;
        body(f)?;
        f.write_str(")")
    } else {
        body(f)
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        pred(self, 1, f)
    }
}

impl fmt::Display for BtrExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        expr(self, 1, f)
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Any => f.write_str("_"),
            Bound::N(n) => write!(f, "{n}"),
        }
    }
}

impl fmt::Display for TestRequirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestRequirement::Btr(e) => write!(f, "btr({e})"),
            TestRequirement::Ctr(inner, p) => write!(f, "ctr({inner}, {p})"),
            TestRequirement::Str(items) => {
                f.write_str("str(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
            TestRequirement::Rtr(inner, lo, hi) => write!(f, "rtr({inner}, {lo}, {hi})"),
        }
    }
}

impl fmt::Display for NamedReq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "req {} = {};", self.name, self.req)
    }
}

/// One `req` per line; an empty set formats to the empty string.
pub fn format_reqs(set: &ReqSet) -> String {
    set.reqs.iter().map(|r| format!("{r}\n")).collect()
}
