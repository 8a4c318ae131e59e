use std::collections::HashSet;

use super::*;
use crate::lang::is_identifier;
use crate::lex::{tokenize, Cursor, Tok};

type PResult<T> = Result<T, ReqError>;

struct Parser {
    cur: Cursor,
}

impl Parser {
    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (line, col) = self.cur.position();
        Err(ReqError::Syntax { line, col, msg: msg.into() })
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.cur.eat_punct(p) {
            Ok(())
        } else {
            let found = self.cur.peek().tok.clone();
            self.err(format!("expected `{p}`, found {found}"))
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<()> {
        if self.cur.eat_word(w) {
            Ok(())
        } else {
            let found = self.cur.peek().tok.clone();
            self.err(format!("expected `{w}`, found {found}"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match &self.cur.peek().tok {
            Tok::Ident(s) if is_identifier(s) => {
                let s = s.clone();
                self.cur.next();
                Ok(s)
            }
            other => {
                let other = other.clone();
                self.err(format!("expected identifier, found {other}"))
            }
        }
    }

    fn nat(&mut self) -> PResult<u64> {
        match self.cur.peek().tok {
            Tok::Int(v) if v >= 0 => {
                self.cur.next();
                Ok(v as u64)
            }
            ref other => {
                let other = other.clone();
                self.err(format!("expected a natural number, found {other}"))
            }
        }
    }

    fn anchor(&mut self) -> PResult<Anchor> {
        self.expect("@")?;
        if self.cur.eat_punct("+") {
            Ok(Anchor::Offset(self.nat()? as usize))
        } else {
            Ok(Anchor::Label(self.ident()?))
        }
    }

    fn site(&mut self) -> PResult<Site> {
        let func = self.ident()?;
        let anchor = self.anchor()?;
        Ok(Site::new(func, anchor))
    }

    fn var(&mut self) -> PResult<VarRef> {
        if self.cur.eat_word("local") {
            let func = self.ident()?;
            self.expect(".")?;
            let name = self.ident()?;
            Ok(VarRef::Local { func, name })
        } else if self.cur.eat_word("global") {
            Ok(VarRef::Global(self.ident()?))
        } else if self.cur.eat_word("array") {
            Ok(VarRef::Array(self.ident()?))
        } else {
            let found = self.cur.peek().tok.clone();
            self.err(format!("expected `local`, `global` or `array`, found {found}"))
        }
    }

    fn element(&mut self) -> PResult<ElementRef> {
        if self.cur.eat_word("stmt") {
            Ok(ElementRef::Stmt(self.site()?))
        } else if self.cur.eat_word("branch") {
            let src = self.site()?;
            self.expect("->")?;
            let tgt = Site::new(src.func.clone(), self.anchor()?);
            Ok(ElementRef::Branch { src, tgt })
        } else if self.cur.eat_word("defuse") {
            let def = self.site()?;
            self.expect("->")?;
            let use_site = self.site()?;
            self.expect_word("of")?;
            let var = self.var()?;
            Ok(ElementRef::DefUse { def, use_site, var })
        } else {
            let found = self.cur.peek().tok.clone();
            self.err(format!("expected `stmt`, `branch` or `defuse`, found {found}"))
        }
    }

    fn expr_or(&mut self) -> PResult<BtrExpr> {
        let mut lhs = self.expr_and()?;
        while self.cur.eat_punct("||") {
            lhs = BtrExpr::Or(Box::new(lhs), Box::new(self.expr_and()?));
        }
        Ok(lhs)
    }

    fn expr_and(&mut self) -> PResult<BtrExpr> {
        let mut lhs = self.expr_unary()?;
        while self.cur.eat_punct("&&") {
            lhs = BtrExpr::And(Box::new(lhs), Box::new(self.expr_unary()?));
        }
        Ok(lhs)
    }

    fn expr_unary(&mut self) -> PResult<BtrExpr> {
        if self.cur.eat_punct("!") {
            return Ok(BtrExpr::Not(Box::new(self.expr_unary()?)));
        }
        if self.cur.eat_punct("(") {
            let e = self.expr_or()?;
            self.expect(")")?;
            return Ok(e);
        }
        Ok(BtrExpr::Atom(self.element()?))
    }

    fn pred_or(&mut self) -> PResult<Pred> {
        let mut lhs = self.pred_and()?;
        while self.cur.eat_punct("||") {
            lhs = Pred::Or(Box::new(lhs), Box::new(self.pred_and()?));
        }
        Ok(lhs)
    }

    fn pred_and(&mut self) -> PResult<Pred> {
        let mut lhs = self.pred_unary()?;
        while self.cur.eat_punct("&&") {
            lhs = Pred::And(Box::new(lhs), Box::new(self.pred_unary()?));
        }
        Ok(lhs)
    }

    fn pred_unary(&mut self) -> PResult<Pred> {
        if self.cur.eat_punct("!") {
            return Ok(Pred::Not(Box::new(self.pred_unary()?)));
        }
        if self.cur.eat_punct("(") {
            let p = self.pred_or()?;
            self.expect(")")?;
            return Ok(p);
        }
        let lhs = self.var()?;
        let op = match &self.cur.peek().tok {
            Tok::Punct(p) => CmpOp::from_symbol(p),
            _ => None,
        };
        let Some(op) = op else {
            let found = self.cur.peek().tok.clone();
            return self.err(format!("expected a comparison operator, found {found}"));
        };
        self.cur.next();
        let rhs = self.operand()?;
        Ok(Pred::Clause(Clause { lhs, op, rhs }))
    }

    fn operand(&mut self) -> PResult<Operand> {
        let neg = self.cur.eat_punct("-");
        match self.cur.peek().tok.clone() {
            Tok::Int(v) => {
                self.cur.next();
                Ok(Operand::Const(Value::Int(if neg { -v } else { v })))
            }
            Tok::Float(v) => {
                self.cur.next();
                Ok(Operand::Const(Value::Float(if neg { -v } else { v })))
            }
            Tok::Ident(w) if !neg && (w == "true" || w == "false") => {
                self.cur.next();
                Ok(Operand::Const(Value::Bool(w == "true")))
            }
            Tok::Ident(_) if !neg => Ok(Operand::Var(self.var()?)),
            other => self.err(format!("expected a constant or variable, found {other}")),
        }
    }

    fn bound(&mut self) -> PResult<Bound> {
        if let Tok::Ident(w) = &self.cur.peek().tok {
            if w == "_" {
                self.cur.next();
                return Ok(Bound::Any);
            }
        }
        Ok(Bound::N(self.nat()?))
    }

    fn tr(&mut self) -> PResult<TestRequirement> {
        let kind = self.ident()?;
        self.expect("(")?;
        let r = match kind.as_str() {
            "btr" => TestRequirement::Btr(self.expr_or()?),
            "ctr" => {
                let inner = self.tr()?;
                self.expect(",")?;
                TestRequirement::Ctr(Box::new(inner), self.pred_or()?)
            }
            "str" => {
                let mut items = vec![self.tr()?];
                while self.cur.eat_punct(",") {
                    items.push(self.tr()?);
                }
                TestRequirement::Str(items)
            }
            "rtr" => {
                let inner = self.tr()?;
                self.expect(",")?;
                let lo = self.bound()?;
                self.expect(",")?;
                let hi = self.bound()?;
                TestRequirement::Rtr(Box::new(inner), lo, hi)
            }
            other => return self.err(format!("unknown requirement kind `{other}`")),
        };
        self.expect(")")?;
        Ok(r)
    }
}

pub fn parse_reqs(text: &str) -> Result<ReqSet, ReqError> {
    let toks = tokenize(text, true).map_err(|e| ReqError::Syntax { line: e.line, col: e.col, msg: e.msg })?;
    let mut p = Parser { cur: Cursor::new(toks) };
    let mut set = ReqSet::default();
    let mut names = HashSet::new();
    while !p.cur.at_eof() {
        let line = p.cur.peek().line;
        p.expect_word("req")?;
        let name = p.ident()?;
        p.expect("=")?;
        let req = p.tr()?;
        p.expect(";")?;
        check_structure(&name, &req)?;
        if !names.insert(name.clone()) {
            return Err(ReqError::DuplicateName(name));
        }
        set.reqs.push(NamedReq { name, req, line });
    }
    Ok(set)
}
