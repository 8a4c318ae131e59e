//! MiniLang abstract syntax and its recursive-descent parser.

use super::ir::ScalarType;
use super::LangError;
use crate::lex::{tokenize, Cursor, Tok};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceUnit {
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Global { name: String, ty: ScalarType, init: Option<Literal>, pos: Pos },
    Array { name: String, elem: ScalarType, len: usize, pos: Pos },
    Func(FnDecl),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnDecl {
    pub name: String,
    pub params: Vec<(String, ScalarType)>,
    pub ret: Option<ScalarType>,
    pub body: Vec<Stmt>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub label: Option<String>,
    pub kind: StmtKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Let { name: String, ty: ScalarType, init: Expr },
    Assign { name: String, index: Option<Expr>, value: Expr },
    If { cond: Expr, then: Vec<Stmt>, els: Option<Vec<Stmt>> },
    While { cond: Expr, body: Vec<Stmt> },
    Return(Option<Expr>),
    Expr(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Lit(Literal),
    Var(String),
    Index(String, Box<Expr>),
    Call(String, Vec<Expr>),
    Cast(ScalarType, Box<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

const KEYWORDS: [&str; 11] = ["fn", "global", "let", "if", "else", "while", "return", "true", "false", "int", "float"];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s) || s == "bool"
}

pub fn parse_source(text: &str) -> Result<SourceUnit, LangError> {
    let toks = tokenize(text, false)
        .map_err(|e| LangError::Syntax { line: e.line, col: e.col, msg: e.msg })?;
    let mut p = Parser { cur: Cursor::new(toks) };
    let mut items = Vec::new();
    while !p.cur.at_eof() {
        items.push(p.item()?);
    }
    Ok(SourceUnit { items })
}

struct Parser {
    cur: Cursor,
}

type PResult<T> = Result<T, LangError>;

impl Parser {
    fn pos(&self) -> Pos {
        let (line, col) = self.cur.position();
        Pos { line, col }
    }

    fn fail<T>(&self, expected: &str) -> PResult<T> {
        let t = self.cur.peek();
        Err(LangError::Syntax { line: t.line, col: t.col, msg: format!("expected {expected}, found {}", t.tok) })
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.cur.eat_punct(p) {
            Ok(())
        } else {
            self.fail(&format!("`{p}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match &self.cur.peek().tok {
            Tok::Ident(s) if !is_keyword(s) => {
                let s = s.clone();
                self.cur.next();
                Ok(s)
            }
            _ => self.fail("identifier"),
        }
    }

    fn scalar_type(&mut self) -> PResult<ScalarType> {
        if let Tok::Ident(s) = &self.cur.peek().tok {
            if let Some(t) = ScalarType::parse(s) {
                self.cur.next();
                return Ok(t);
            }
        }
        self.fail("type")
    }

    fn literal(&mut self) -> PResult<Literal> {
        let neg = self.cur.eat_punct("-");
        let lit = match self.cur.peek().tok.clone() {
            Tok::Int(v) => Literal::Int(if neg { -v } else { v }),
            Tok::Float(v) => Literal::Float(if neg { -v } else { v }),
            Tok::Ident(w) if !neg && w == "true" => Literal::Bool(true),
            Tok::Ident(w) if !neg && w == "false" => Literal::Bool(false),
            _ => return self.fail("literal"),
        };
        self.cur.next();
        Ok(lit)
    }

    fn item(&mut self) -> PResult<Item> {
        let pos = self.pos();
        if self.cur.eat_word("global") {
            let name = self.ident()?;
            self.expect(":")?;
            let ty = self.scalar_type()?;
            if self.cur.eat_punct("[") {
                let len = match self.cur.peek().tok {
                    Tok::Int(n) if n > 0 => n as usize,
                    _ => return self.fail("positive array length"),
                };
                self.cur.next();
                self.expect("]")?;
                self.expect(";")?;
                return Ok(Item::Array { name, elem: ty, len, pos });
            }
            let init = if self.cur.eat_punct("=") { Some(self.literal()?) } else { None };
            self.expect(";")?;
            return Ok(Item::Global { name, ty, init, pos });
        }
        if self.cur.eat_word("fn") {
            let name = self.ident()?;
            self.expect("(")?;
            let mut params = Vec::new();
            if !self.cur.at_punct(")") {
                loop {
                    let pname = self.ident()?;
                    self.expect(":")?;
                    params.push((pname, self.scalar_type()?));
                    if !self.cur.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect(")")?;
            let ret = if self.cur.eat_punct(":") {
                if self.cur.eat_word("void") {
                    None
                } else {
                    Some(self.scalar_type()?)
                }
            } else {
                None
            };
            let body = self.block()?;
            return Ok(Item::Func(FnDecl { name, params, ret, body, pos }));
        }
        self.fail("`fn` or `global`")
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect("{")?;
        let mut out = Vec::new();
        while !self.cur.at_punct("}") {
            if self.cur.at_eof() {
                return self.fail("`}`");
            }
            out.push(self.stmt()?);
        }
        self.cur.next();
        Ok(out)
    }

    /// A braced block or a single statement.
    fn body(&mut self) -> PResult<Vec<Stmt>> {
        if self.cur.at_punct("{") {
            self.block()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        let mut label = None;
        if let (Tok::Ident(w), Tok::Punct(":")) = (self.cur.peek_at(0).clone(), self.cur.peek_at(1).clone()) {
            if !is_keyword(&w) {
                label = Some(w);
                self.cur.next();
                self.cur.next();
            }
        }
        let kind = self.stmt_kind()?;
        Ok(Stmt { label, kind, pos })
    }

    fn stmt_kind(&mut self) -> PResult<StmtKind> {
        if self.cur.eat_word("let") {
            let name = self.ident()?;
            self.expect(":")?;
            let ty = self.scalar_type()?;
            self.expect("=")?;
            let init = self.expr()?;
            self.expect(";")?;
            return Ok(StmtKind::Let { name, ty, init });
        }
        if self.cur.eat_word("if") {
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            let then = self.body()?;
            let els = if self.cur.eat_word("else") {
                if self.cur.at_word("if") {
                    let pos = self.pos();
                    let kind = self.stmt_kind()?;
                    Some(vec![Stmt { label: None, kind, pos }])
                } else {
                    Some(self.body()?)
                }
            } else {
                None
            };
            return Ok(StmtKind::If { cond, then, els });
        }
        if self.cur.eat_word("while") {
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            let body = self.body()?;
            return Ok(StmtKind::While { cond, body });
        }
        if self.cur.eat_word("return") {
            if self.cur.eat_punct(";") {
                return Ok(StmtKind::Return(None));
            }
            let e = self.expr()?;
            self.expect(";")?;
            return Ok(StmtKind::Return(Some(e)));
        }
        // Assignment or expression statement.
        if let (Tok::Ident(w), next) = (self.cur.peek_at(0).clone(), self.cur.peek_at(1).clone()) {
            if !is_keyword(&w) && (next == Tok::Punct("=") || next == Tok::Punct("[")) {
                let name = self.ident()?;
                let index = if self.cur.eat_punct("[") {
                    let e = self.expr()?;
                    self.expect("]")?;
                    Some(e)
                } else {
                    None
                };
                self.expect("=")?;
                let value = self.expr()?;
                self.expect(";")?;
                return Ok(StmtKind::Assign { name, index, value });
            }
        }
        let e = self.expr()?;
        if !matches!(e.kind, ExprKind::Call(..)) {
            return Err(LangError::Syntax {
                line: e.pos.line,
                col: e.pos.col,
                msg: "only calls may be used as statements".into(),
            });
        }
        self.expect(";")?;
        Ok(StmtKind::Expr(e))
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn binary(&mut self, op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        let pos = lhs.pos;
        Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos }
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.cur.eat_punct("||") {
            let rhs = self.and_expr()?;
            lhs = self.binary(BinaryOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.cmp_expr()?;
        while self.cur.eat_punct("&&") {
            let rhs = self.cmp_expr()?;
            lhs = self.binary(BinaryOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let lhs = self.add_expr()?;
        let op = match &self.cur.peek().tok {
            Tok::Punct("==") => BinaryOp::Eq,
            Tok::Punct("!=") => BinaryOp::Ne,
            Tok::Punct("<") => BinaryOp::Lt,
            Tok::Punct("<=") => BinaryOp::Le,
            Tok::Punct(">") => BinaryOp::Gt,
            Tok::Punct(">=") => BinaryOp::Ge,
            _ => return Ok(lhs),
        };
        self.cur.next();
        let rhs = self.add_expr()?;
        Ok(self.binary(op, lhs, rhs))
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match &self.cur.peek().tok {
                Tok::Punct("+") => BinaryOp::Add,
                Tok::Punct("-") => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.cur.next();
            let rhs = self.mul_expr()?;
            lhs = self.binary(op, lhs, rhs);
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match &self.cur.peek().tok {
                Tok::Punct("*") => BinaryOp::Mul,
                Tok::Punct("/") => BinaryOp::Div,
                Tok::Punct("%") => BinaryOp::Mod,
                _ => return Ok(lhs),
            };
            self.cur.next();
            let rhs = self.unary()?;
            lhs = self.binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        if self.cur.eat_punct("-") {
            // Fold negative numeric literals so `-5` is a constant.
            match self.cur.peek().tok.clone() {
                Tok::Int(v) => {
                    self.cur.next();
                    return Ok(Expr { kind: ExprKind::Lit(Literal::Int(-v)), pos });
                }
                Tok::Float(v) => {
                    self.cur.next();
                    return Ok(Expr { kind: ExprKind::Lit(Literal::Float(-v)), pos });
                }
                _ => {}
            }
            let e = self.unary()?;
            return Ok(Expr { kind: ExprKind::Unary(UnaryOp::Neg, Box::new(e)), pos });
        }
        if self.cur.eat_punct("!") {
            let e = self.unary()?;
            return Ok(Expr { kind: ExprKind::Unary(UnaryOp::Not, Box::new(e)), pos });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let tok = self.cur.peek().tok.clone();
        let kind = match tok {
            Tok::Int(v) => {
                self.cur.next();
                ExprKind::Lit(Literal::Int(v))
            }
            Tok::Float(v) => {
                self.cur.next();
                ExprKind::Lit(Literal::Float(v))
            }
            Tok::Punct("(") => {
                self.cur.next();
                let e = self.expr()?;
                self.expect(")")?;
                return Ok(e);
            }
            Tok::Ident(w) if w == "true" || w == "false" => {
                self.cur.next();
                ExprKind::Lit(Literal::Bool(w == "true"))
            }
            Tok::Ident(w) if w == "int" || w == "float" => {
                self.cur.next();
                let ty = ScalarType::parse(&w).expect("type keyword");
                self.expect("(")?;
                let e = self.expr()?;
                self.expect(")")?;
                ExprKind::Cast(ty, Box::new(e))
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.cur.eat_punct("(") {
                    let mut args = Vec::new();
                    if !self.cur.at_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.cur.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect(")")?;
                    ExprKind::Call(name, args)
                } else if self.cur.eat_punct("[") {
                    let idx = self.expr()?;
                    self.expect("]")?;
                    ExprKind::Index(name, Box::new(idx))
                } else {
                    ExprKind::Var(name)
                }
            }
            _ => return self.fail("expression"),
        };
        Ok(Expr { kind, pos })
    }
}
