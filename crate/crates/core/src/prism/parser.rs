//! Recursive-descent parser for the single-module MDP subset.
//!
//! Parsing happens in two phases. The syntax phase builds a raw tree with
//! unresolved identifiers and stops at the first syntax error. The resolution
//! phase binds names, folds constants, type-checks and validates
//! probabilities, collecting every semantic error it finds.

use std::collections::{BTreeMap, HashMap};

use crate::expr::{BinaryOp, Expr, UnaryOp};
use crate::model::{ActionId, Command, Constant, Mdp, RewardBlock, Update, Variable};
use crate::prob::{rational_to_decimal, Prob, Rational};

use super::lexer::{tokenize, Tok, Token};
use super::{ModelSource, ParseDiagnostic, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
enum RawKind {
    Int(String),
    Negated(String),
    Bool(bool),
    Ident(String),
    Unary(UnaryOp, Box<RawExpr>),
    Binary(BinaryOp, Box<RawExpr>, Box<RawExpr>),
}

#[derive(Debug, Clone)]
struct RawExpr {
    kind: RawKind,
    pos: Pos,
}

#[derive(Debug)]
enum RawProb {
    Implicit,
    Literal {
        numer: Token,
        denom: Option<Token>,
    },
}

#[derive(Debug)]
struct RawUpdate {
    prob: RawProb,
    pos: Pos,
    assignments: Vec<(String, Pos, RawExpr)>,
}

#[derive(Debug)]
struct RawCommand {
    action: String,
    pos: Pos,
    guard: RawExpr,
    updates: Vec<RawUpdate>,
}

#[derive(Debug)]
struct RawVar {
    name: String,
    pos: Pos,
    lower: RawExpr,
    upper: RawExpr,
    init: Option<RawExpr>,
}

#[derive(Debug, Default)]
struct RawModel {
    constants: Vec<(String, Pos, RawExpr)>,
    module: Option<(String, Pos)>,
    variables: Vec<RawVar>,
    commands: Vec<RawCommand>,
    labels: Vec<(String, Pos, RawExpr)>,
    rewards: Vec<RewardBlock>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseDiagnostic>;

fn diag(pos: Pos, msg: impl Into<String>) -> ParseDiagnostic {
    ParseDiagnostic {
        severity: Severity::Error,
        line: pos.line,
        column: pos.col,
        message: msg.into(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> Pos {
        let t = &self.toks[self.pos];
        Pos {
            line: t.line,
            col: t.col,
        }
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseDiagnostic {
        diag(
            self.here(),
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> PResult<Pos> {
        if *self.peek() == tok {
            let p = self.here();
            self.advance();
            Ok(p)
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Pos> {
        if self.is_keyword(kw) {
            let p = self.here();
            self.advance();
            Ok(p)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self, wanted: &str) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                let p = self.here();
                self.advance();
                Ok((s, p))
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn model(&mut self) -> PResult<RawModel> {
        let mut m = RawModel::default();
        if !self.is_keyword("mdp") {
            return Err(self.unexpected("model type `mdp`"));
        }
        self.advance();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) if kw == "const" => {
                    self.advance();
                    if self.is_keyword("int") {
                        self.advance();
                    }
                    let (name, pos) = self.ident("constant name")?;
                    self.expect(Tok::Eq, "`=`")?;
                    let value = self.expr()?;
                    self.expect(Tok::Semi, "`;`")?;
                    m.constants.push((name, pos, value));
                }
                Tok::Ident(kw) if kw == "module" => {
                    let kw_pos = self.here();
                    if m.module.is_some() {
                        return Err(diag(
                            kw_pos,
                            "only a single module is supported",
                        ));
                    }
                    self.advance();
                    let (name, pos) = self.ident("module name")?;
                    m.module = Some((name, pos));
                    self.module_body(&mut m)?;
                }
                Tok::Ident(kw) if kw == "label" => {
                    self.advance();
                    let pos = self.here();
                    let name = match self.advance().tok {
                        Tok::Str(s) => s,
                        _ => return Err(diag(pos, "expected quoted label name")),
                    };
                    self.expect(Tok::Eq, "`=`")?;
                    let e = self.expr()?;
                    self.expect(Tok::Semi, "`;`")?;
                    m.labels.push((name, pos, e));
                }
                Tok::Rewards { name, lines } => {
                    self.advance();
                    m.rewards.push(RewardBlock { name, lines });
                }
                _ => {
                    return Err(self.unexpected("`const`, `module`, `label` or `rewards`"));
                }
            }
        }
        Ok(m)
    }

    fn module_body(&mut self, m: &mut RawModel) -> PResult<()> {
        // variable declarations come first
        while let Tok::Ident(name) = self.peek().clone() {
            if is_reserved(&name) {
                break;
            }
            let pos = self.here();
            self.advance();
            self.expect(Tok::Colon, "`:`")?;
            self.expect(Tok::LBracket, "`[`")?;
            let lower = self.expr()?;
            self.expect(Tok::DotDot, "`..`")?;
            let upper = self.expr()?;
            self.expect(Tok::RBracket, "`]`")?;
            let init = if self.is_keyword("init") {
                self.advance();
                Some(self.expr()?)
            } else {
                None
            };
            self.expect(Tok::Semi, "`;`")?;
            m.variables.push(RawVar {
                name,
                pos,
                lower,
                upper,
                init,
            });
        }
        while *self.peek() == Tok::LBracket {
            let cmd = self.command()?;
            m.commands.push(cmd);
        }
        self.expect_keyword("endmodule")?;
        Ok(())
    }

    fn command(&mut self) -> PResult<RawCommand> {
        self.expect(Tok::LBracket, "`[`")?;
        let pos = self.here();
        if *self.peek() == Tok::RBracket {
            return Err(diag(pos, "commands must carry an action label"));
        }
        let (action, pos) = self.ident("action name")?;
        self.expect(Tok::RBracket, "`]`")?;
        let guard = self.expr()?;
        self.expect(Tok::Arrow, "`->`")?;
        let mut updates = vec![self.update()?];
        while *self.peek() == Tok::Plus {
            self.advance();
            updates.push(self.update()?);
        }
        self.expect(Tok::Semi, "`;`")?;
        Ok(RawCommand {
            action,
            pos,
            guard,
            updates,
        })
    }

    fn update(&mut self) -> PResult<RawUpdate> {
        let pos = self.here();
        let prob = match self.peek() {
            Tok::Int(_) | Tok::Number(_) => {
                let numer = self.advance();
                let denom = if *self.peek() == Tok::Slash {
                    self.advance();
                    match self.peek() {
                        Tok::Int(_) => Some(self.advance()),
                        _ => return Err(self.unexpected("integer denominator")),
                    }
                } else {
                    None
                };
                self.expect(Tok::Colon, "`:` after probability")?;
                RawProb::Literal { numer, denom }
            }
            _ => RawProb::Implicit,
        };
        let mut assignments = Vec::new();
        if self.is_keyword("true") {
            self.advance();
        } else {
            loop {
                self.expect(Tok::LParen, "`(` starting an assignment")?;
                let (var, vpos) = self.ident("variable name")?;
                self.expect(Tok::Prime, "`'`")?;
                self.expect(Tok::Eq, "`=`")?;
                let rhs = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                assignments.push((var, vpos, rhs));
                if *self.peek() == Tok::And {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        Ok(RawUpdate {
            prob,
            pos,
            assignments,
        })
    }

    fn expr(&mut self) -> PResult<RawExpr> {
        self.or_expr()
    }

    fn binary_chain(
        &mut self,
        next: fn(&mut Self) -> PResult<RawExpr>,
        ops: &[(Tok, BinaryOp)],
    ) -> PResult<RawExpr> {
        let mut lhs = next(self)?;
        'outer: loop {
            for (tok, op) in ops {
                if self.peek() == tok {
                    let pos = self.here();
                    self.advance();
                    let rhs = next(self)?;
                    lhs = RawExpr {
                        kind: RawKind::Binary(*op, Box::new(lhs), Box::new(rhs)),
                        pos,
                    };
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn or_expr(&mut self) -> PResult<RawExpr> {
        self.binary_chain(Self::and_expr, &[(Tok::Or, BinaryOp::Or)])
    }

    fn and_expr(&mut self) -> PResult<RawExpr> {
        self.binary_chain(Self::not_expr, &[(Tok::And, BinaryOp::And)])
    }

    fn not_expr(&mut self) -> PResult<RawExpr> {
        if *self.peek() == Tok::Not {
            let pos = self.here();
            self.advance();
            let inner = self.not_expr()?;
            return Ok(RawExpr {
                kind: RawKind::Unary(UnaryOp::Not, Box::new(inner)),
                pos,
            });
        }
        self.rel_expr()
    }

    fn rel_expr(&mut self) -> PResult<RawExpr> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::Eq => BinaryOp::Eq,
            Tok::Ne => BinaryOp::Ne,
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Gt => BinaryOp::Gt,
            Tok::Ge => BinaryOp::Ge,
            _ => return Ok(lhs),
        };
        let pos = self.here();
        self.advance();
        let rhs = self.add_expr()?;
        if matches!(
            self.peek(),
            Tok::Eq | Tok::Ne | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge
        ) {
            return Err(diag(self.here(), "comparisons cannot be chained"));
        }
        Ok(RawExpr {
            kind: RawKind::Binary(op, Box::new(lhs), Box::new(rhs)),
            pos,
        })
    }

    fn add_expr(&mut self) -> PResult<RawExpr> {
        self.binary_chain(
            Self::mul_expr,
            &[(Tok::Plus, BinaryOp::Add), (Tok::Minus, BinaryOp::Sub)],
        )
    }

    fn mul_expr(&mut self) -> PResult<RawExpr> {
        self.binary_chain(Self::unary_expr, &[(Tok::Star, BinaryOp::Mul)])
    }

    fn unary_expr(&mut self) -> PResult<RawExpr> {
        if *self.peek() == Tok::Minus {
            let pos = self.here();
            self.advance();
            // a literal directly after `-` folds into a negative literal
            if let Tok::Int(text) = self.peek().clone() {
                self.advance();
                return Ok(RawExpr {
                    kind: RawKind::Negated(text),
                    pos,
                });
            }
            let inner = self.unary_expr()?;
            return Ok(RawExpr {
                kind: RawKind::Unary(UnaryOp::Neg, Box::new(inner)),
                pos,
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<RawExpr> {
        let pos = self.here();
        match self.peek().clone() {
            Tok::Int(text) => {
                self.advance();
                Ok(RawExpr {
                    kind: RawKind::Int(text),
                    pos,
                })
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.advance();
                Ok(RawExpr {
                    kind: RawKind::Bool(s == "true"),
                    pos,
                })
            }
            Tok::Ident(s) if !is_reserved(&s) => {
                self.advance();
                Ok(RawExpr {
                    kind: RawKind::Ident(s),
                    pos,
                })
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Number(text) => Err(diag(
                pos,
                format!("non-integer literal `{text}` is only allowed as a probability"),
            )),
            _ => Err(self.unexpected("expression")),
        }
    }
}

fn is_reserved(s: &str) -> bool {
    matches!(
        s,
        "mdp"
            | "const"
            | "int"
            | "module"
            | "endmodule"
            | "init"
            | "label"
            | "true"
            | "false"
            | "rewards"
            | "endrewards"
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Int,
    Bool,
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::Int => "int",
            Ty::Bool => "bool",
        }
    }
}

struct Resolver {
    diags: Vec<ParseDiagnostic>,
    constants: HashMap<String, i64>,
    variables: HashMap<String, usize>,
}

impl Resolver {
    fn error(&mut self, pos: Pos, msg: impl Into<String>) {
        self.diags.push(diag(pos, msg));
    }

    fn int_literal(&mut self, text: &str, negate: bool, pos: Pos) -> Option<i64> {
        let parsed = if negate {
            format!("-{text}").parse::<i64>()
        } else {
            text.parse::<i64>()
        };
        match parsed {
            Ok(v) => Some(v),
            Err(_) => {
                self.error(pos, format!("integer literal `{text}` is out of range"));
                None
            }
        }
    }

    /// Bind names and type-check; `None` means an error was already recorded.
    fn resolve(&mut self, e: &RawExpr, allow_vars: bool) -> Option<(Expr, Ty)> {
        match &e.kind {
            RawKind::Int(t) => Some((Expr::Int(self.int_literal(t, false, e.pos)?), Ty::Int)),
            RawKind::Negated(t) => Some((Expr::Int(self.int_literal(t, true, e.pos)?), Ty::Int)),
            RawKind::Bool(b) => Some((Expr::Bool(*b), Ty::Bool)),
            RawKind::Ident(name) => {
                if let Some(&value) = self.constants.get(name) {
                    return Some((
                        Expr::Const {
                            name: name.clone(),
                            value,
                        },
                        Ty::Int,
                    ));
                }
                match self.variables.get(name) {
                    Some(&index) if allow_vars => Some((Expr::var(index, name.clone()), Ty::Int)),
                    Some(_) => {
                        self.error(
                            e.pos,
                            format!("variable `{name}` cannot be used in a constant expression"),
                        );
                        None
                    }
                    None => {
                        self.error(e.pos, format!("unbound identifier `{name}`"));
                        None
                    }
                }
            }
            RawKind::Unary(op, inner) => {
                let (inner_e, ty) = self.resolve(inner, allow_vars)?;
                let want = match op {
                    UnaryOp::Not => Ty::Bool,
                    UnaryOp::Neg => Ty::Int,
                };
                if ty != want {
                    self.error(
                        e.pos,
                        format!("operand must be {}, found {}", want.name(), ty.name()),
                    );
                    return None;
                }
                Some((Expr::Unary(*op, Box::new(inner_e)), want))
            }
            RawKind::Binary(op, l, r) => {
                let lhs = self.resolve(l, allow_vars);
                let rhs = self.resolve(r, allow_vars);
                let ((le, lt), (re, rt)) = (lhs?, rhs?);
                let (operand, result) = if op.is_logical() {
                    (Ty::Bool, Ty::Bool)
                } else if op.is_relational() {
                    (Ty::Int, Ty::Bool)
                } else {
                    (Ty::Int, Ty::Int)
                };
                if lt != operand || rt != operand {
                    self.error(
                        e.pos,
                        format!(
                            "operator `{}` needs {} operands, found {} and {}",
                            op.symbol(),
                            operand.name(),
                            lt.name(),
                            rt.name()
                        ),
                    );
                    return None;
                }
                Some((Expr::binary(*op, le, re), result))
            }
        }
    }

    fn typed(&mut self, e: &RawExpr, want: Ty, what: &str) -> Option<Expr> {
        let (expr, ty) = self.resolve(e, true)?;
        if ty != want {
            self.error(e.pos, format!("{what} must be {}, found {}", want.name(), ty.name()));
            return None;
        }
        Some(expr)
    }

    fn const_value(&mut self, e: &RawExpr) -> Option<i64> {
        let (expr, ty) = self.resolve(e, false)?;
        if ty != Ty::Int {
            self.error(e.pos, "constant expression must be an integer");
            return None;
        }
        match expr.eval(&[]) {
            Ok(v) => Some(v),
            Err(err) => {
                self.error(e.pos, err.to_string());
                None
            }
        }
    }

    fn probability(&mut self, numer: &Token, denom: Option<&Token>) -> Option<Prob> {
        let pos = Pos {
            line: numer.line,
            col: numer.col,
        };
        let value = match (&numer.tok, denom) {
            (Tok::Int(n), None) => Prob::Exact(Rational::from_integer(self.int_literal(n, false, pos)?)),
            (Tok::Int(n), Some(d)) => {
                let dpos = Pos {
                    line: d.line,
                    col: d.col,
                };
                let Tok::Int(dt) = &d.tok else { return None };
                let nv = self.int_literal(n, false, pos)?;
                let dv = self.int_literal(dt, false, dpos)?;
                if dv == 0 {
                    self.error(dpos, "probability denominator is zero");
                    return None;
                }
                Prob::Exact(Rational::new(nv, dv))
            }
            (Tok::Number(text), None) => parse_decimal(text)?,
            (Tok::Number(text), Some(_)) => {
                self.error(pos, format!("fraction numerator `{text}` must be an integer"));
                return None;
            }
            _ => return None,
        };
        let f = value.to_f64();
        if f.is_nan() || f <= 0.0 {
            self.error(pos, format!("probability {value} must be positive"));
            return None;
        }
        if value.cmp_value(&Prob::one()) == std::cmp::Ordering::Greater {
            self.error(pos, format!("probability {value} exceeds 1"));
            return None;
        }
        Some(value)
    }
}

/// `0.25` → 1/4 exactly; scientific notation and decimals too long for an
/// i64 rational become doubles.
fn parse_decimal(text: &str) -> Option<Prob> {
    if text.contains(['e', 'E']) {
        return text.parse::<f64>().ok().map(Prob::Float);
    }
    let (int_part, frac) = text.split_once('.').unwrap_or((text, ""));
    let exact = (|| {
        let scale = 10i64.checked_pow(u32::try_from(frac.len()).ok()?)?;
        let whole: i64 = format!("{int_part}{frac}").parse().ok()?;
        Some(Prob::Exact(Rational::new(whole, scale)))
    })();
    exact.or_else(|| text.parse::<f64>().ok().map(Prob::Float))
}

pub fn parse_model(src: &ModelSource) -> Result<Mdp, Vec<ParseDiagnostic>> {
    if src.text.trim().is_empty() {
        return Err(vec![diag(Pos { line: 1, col: 1 }, "model source is empty")]);
    }
    let toks = tokenize(&src.text).map_err(|d| vec![d])?;
    let mut parser = Parser { toks, pos: 0 };
    let raw = parser.model().map_err(|d| vec![d])?;
    resolve_model(raw, parser.here())
}

fn resolve_model(raw: RawModel, end: Pos) -> Result<Mdp, Vec<ParseDiagnostic>> {
    let mut r = Resolver {
        diags: Vec::new(),
        constants: HashMap::new(),
        variables: HashMap::new(),
    };

    let mut constants = Vec::new();
    for (name, pos, e) in &raw.constants {
        if r.constants.contains_key(name) {
            r.error(*pos, format!("duplicate constant `{name}`"));
            continue;
        }
        if let Some(value) = r.const_value(e) {
            r.constants.insert(name.clone(), value);
            constants.push(Constant {
                name: name.clone(),
                value,
            });
        }
    }

    let Some((module_name, _)) = raw.module.clone() else {
        r.error(end, "model has no module");
        return Err(r.diags);
    };

    let mut variables = Vec::new();
    for v in &raw.variables {
        if r.variables.contains_key(&v.name) || r.constants.contains_key(&v.name) {
            r.error(v.pos, format!("duplicate variable `{}`", v.name));
            continue;
        }
        let lower = r.const_value(&v.lower);
        let upper = r.const_value(&v.upper);
        let init = match &v.init {
            Some(e) => r.const_value(e),
            None => {
                r.error(v.pos, format!("variable `{}` has no init value", v.name));
                None
            }
        };
        r.variables.insert(v.name.clone(), variables.len());
        let (Some(lower), Some(upper), Some(init)) = (lower, upper, init) else {
            // keep indices aligned with declaration order
            variables.push(Variable {
                name: v.name.clone(),
                lower: 0,
                upper: 0,
                init: 0,
            });
            continue;
        };
        if lower > upper {
            r.error(v.pos, format!("empty range [{lower}..{upper}] for `{}`", v.name));
        } else if init < lower || init > upper {
            r.error(
                v.pos,
                format!("init {init} of `{}` is outside [{lower}..{upper}]", v.name),
            );
        }
        variables.push(Variable {
            name: v.name.clone(),
            lower,
            upper,
            init,
        });
    }
    if variables.is_empty() && raw.variables.is_empty() {
        r.error(end, "module declares no variables");
    }

    let mut actions: Vec<String> = Vec::new();
    let mut commands = Vec::new();
    for c in &raw.commands {
        let action = match actions.iter().position(|a| *a == c.action) {
            Some(i) => ActionId(i),
            None => {
                actions.push(c.action.clone());
                ActionId(actions.len() - 1)
            }
        };
        let guard = r.typed(&c.guard, Ty::Bool, "guard");
        let mut updates = Vec::new();
        let mut ok = guard.is_some();
        let implicit = c
            .updates
            .iter()
            .filter(|u| matches!(u.prob, RawProb::Implicit))
            .count();
        if implicit > 0 && c.updates.len() > 1 {
            r.error(c.pos, "every branch of a multi-branch command needs a probability");
            ok = false;
        }
        for u in &c.updates {
            let prob = match &u.prob {
                RawProb::Implicit => Some(Prob::one()),
                RawProb::Literal { numer, denom } => r.probability(numer, denom.as_ref()),
            };
            let mut assignments: Vec<(usize, Expr)> = Vec::new();
            for (var, vpos, rhs) in &u.assignments {
                let Some(&index) = r.variables.get(var) else {
                    r.error(*vpos, format!("assignment to unknown variable `{var}`"));
                    ok = false;
                    continue;
                };
                if assignments.iter().any(|(i, _)| *i == index) {
                    r.error(*vpos, format!("`{var}` is assigned twice in one update"));
                    ok = false;
                    continue;
                }
                match r.typed(rhs, Ty::Int, "assigned value") {
                    Some(e) => assignments.push((index, e)),
                    None => ok = false,
                }
            }
            match prob {
                Some(prob) => updates.push(Update { prob, assignments }),
                None => ok = false,
            }
        }
        if ok {
            let sum = updates.iter().fold(Prob::zero(), |acc, u| acc.plus(u.prob));
            let is_one = match sum {
                Prob::Exact(q) => q == Rational::from_integer(1),
                Prob::Float(f) => (f - 1.0).abs() <= 1e-9,
            };
            if !is_one {
                let shown = match sum {
                    Prob::Exact(q) => rational_to_decimal(&q),
                    Prob::Float(f) => format!("{f}"),
                };
                r.error(u_pos(c), format!("probabilities sum to {shown}"));
                continue;
            }
        }
        if let (true, Some(guard)) = (ok, guard) {
            commands.push(Command {
                action,
                guard,
                updates,
            });
        }
    }

    let mut labels = BTreeMap::new();
    for (name, pos, e) in &raw.labels {
        if labels.contains_key(name) {
            r.error(*pos, format!("duplicate label \"{name}\""));
            continue;
        }
        if let Some(expr) = r.typed(e, Ty::Bool, "label") {
            labels.insert(name.clone(), expr);
        }
    }

    if !r.diags.is_empty() {
        return Err(r.diags);
    }
    Ok(Mdp {
        module_name,
        constants,
        variables,
        actions,
        commands,
        labels,
        rewards: raw.rewards,
    })
}

fn u_pos(c: &RawCommand) -> Pos {
    c.updates.first().map(|u| u.pos).unwrap_or(c.pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FeatureState;

    pub(crate) const CHAIN: &str = "mdp
module chain
  x : [0..2] init 0;
  [a] x=0 -> 0.5:(x'=1) + 0.5:(x'=2);
  [b] x=0 -> 1:(x'=2);
  [a] x=1 -> 1:(x'=1);
  [a] x=2 -> 1:(x'=2);
endmodule
label \"bad\" = x=1;
";

    fn parse(text: &str) -> Result<Mdp, Vec<ParseDiagnostic>> {
        parse_model(&ModelSource::inline(text))
    }

    fn first_error(text: &str) -> ParseDiagnostic {
        parse(text).unwrap_err().remove(0)
    }

    #[test]
    fn chain_fixture_counts() {
        let m = parse(CHAIN).unwrap();
        assert_eq!(m.variables.len(), 1);
        assert_eq!(m.commands.len(), 4);
        assert_eq!(m.labels.len(), 1);
        assert_eq!(m.actions, vec!["a", "b"]);
        assert_eq!(m.commands[0].updates[0].prob, Prob::ratio(1, 2));
    }

    #[test]
    fn identity_model_has_single_state() {
        let m = parse("mdp module m x:[0..0] init 0; [a] true -> 1:(x'=x); endmodule").unwrap();
        let s = m.initial_state();
        let d = m.successor_distribution(&s, ActionId(0)).unwrap();
        assert_eq!(d.support(), &[(s, Prob::one())]);
    }

    #[test]
    fn probability_sum_is_checked() {
        let e = first_error(
            "mdp module m x:[0..2] init 0; [a] x=0 -> 0.6:(x'=1) + 0.5:(x'=2); endmodule",
        );
        assert_eq!(e.message, "probabilities sum to 1.1");
        assert_eq!((e.line, e.column), (1, 42));
    }

    #[test]
    fn rational_and_scientific_literals() {
        let m = parse(
            "mdp module m x:[0..2] init 0; [a] true -> 1/3:(x'=1) + 2/3:(x'=2); [b] true -> 5e-1:(x'=0) + 5e-1:(x'=1); endmodule",
        )
        .unwrap();
        assert_eq!(m.commands[0].updates[0].prob, Prob::ratio(1, 3));
        assert_eq!(m.commands[1].updates[0].prob, Prob::Float(0.5));
    }

    #[test]
    fn constants_fold_into_bounds_and_guards() {
        let m = parse(
            "mdp const int N = 3; const int M = N-1; module m x:[0..N] init M; [a] x<N -> (x'=x+1); endmodule",
        )
        .unwrap();
        assert_eq!(m.variables[0].upper, 3);
        assert_eq!(m.variables[0].init, 2);
        assert_eq!(m.commands[0].updates[0].prob, Prob::one());
    }

    #[test]
    fn unbound_variable_is_positioned() {
        let e = first_error("mdp module m x:[0..1] init 0;\n[a] y=0 -> (x'=1); endmodule");
        assert_eq!(e.message, "unbound identifier `y`");
        assert_eq!((e.line, e.column), (2, 5));
    }

    #[test]
    fn semantic_errors_are_collected() {
        let errs = parse(
            "mdp module m x:[0..1] init 0; x:[0..1] init 0; y:[0..1]; [a] x=0 -> (z'=1); endmodule label \"l\" = x=0; label \"l\" = x=1;",
        )
        .unwrap_err();
        let msgs: Vec<_> = errs.iter().map(|d| d.message.as_str()).collect();
        assert!(msgs.contains(&"duplicate variable `x`"));
        assert!(msgs.contains(&"variable `y` has no init value"));
        assert!(msgs.contains(&"assignment to unknown variable `z`"));
        assert!(msgs.contains(&"duplicate label \"l\""));
    }

    #[test]
    fn reward_blocks_are_retained() {
        let m = parse(&format!("{CHAIN}rewards \"r\"\n  [a] true : 1;\nendrewards\n")).unwrap();
        assert_eq!(m.rewards.len(), 1);
        assert_eq!(m.rewards[0].lines, vec!["[a] true : 1;"]);
    }

    #[test]
    fn type_errors() {
        let e = first_error("mdp module m x:[0..1] init 0; [a] x+1 -> (x'=1); endmodule");
        assert_eq!(e.message, "guard must be bool, found int");
        let e = first_error("mdp module m x:[0..1] init 0; [a] true -> (x'=x=1); endmodule");
        assert_eq!(e.message, "assigned value must be int, found bool");
    }

    #[test]
    fn negative_literals() {
        let m = parse("mdp module m x:[-1..1] init -1; [a] x=-1 -> (x'=x--1); endmodule").unwrap();
        assert_eq!(m.variables[0].lower, -1);
        let d = m
            .successor_distribution(&FeatureState::from(vec![-1]), ActionId(0))
            .unwrap();
        assert_eq!(d.support()[0].0, FeatureState::from(vec![0]));
    }
}
