//! Tokenizer for the PRISM subset.

use super::{ParseDiagnostic, Severity};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    /// Integer literal, kept as text so overflow gets a positioned diagnostic.
    Int(String),
    /// Decimal or scientific literal (`0.25`, `1e-3`).
    Number(String),
    Str(String),
    Rewards { name: Option<String>, lines: Vec<String> },
    LBracket,
    RBracket,
    LParen,
    RParen,
    Colon,
    Semi,
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Not,
    Prime,
    DotDot,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(s) | Tok::Number(s) => format!("number `{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Rewards { .. } => "rewards block".into(),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Colon => ":",
            Tok::Semi => ";",
            Tok::Arrow => "->",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Eq => "=",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::And => "&",
            Tok::Or => "|",
            Tok::Not => "!",
            Tok::Prime => "'",
            Tok::DotDot => "..",
            _ => "?",
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek_at(1) == Some('/') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn error(&self, line: usize, col: usize, msg: impl Into<String>) -> ParseDiagnostic {
        ParseDiagnostic {
            severity: Severity::Error,
            line,
            column: col,
            message: msg.into(),
        }
    }

    fn string(&mut self, line: usize, col: usize) -> Result<String, ParseDiagnostic> {
        self.bump(); // opening quote
        let mut s = String::new();
        loop {
            match self.bump() {
                Some('"') => return Ok(s),
                Some('\n') | None => return Err(self.error(line, col, "unterminated string")),
                Some(c) => s.push(c),
            }
        }
    }

    fn number(&mut self) -> Tok {
        let mut text = String::new();
        let mut float = false;
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            text.push(c);
            self.bump();
        }
        // `0..2` is a range, not a decimal point
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            float = true;
            text.push('.');
            self.bump();
            while let Some(c) = self.peek().filter(char::is_ascii_digit) {
                text.push(c);
                self.bump();
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let signed = matches!(self.peek_at(1), Some('+' | '-'));
            let digit_at = if signed { 2 } else { 1 };
            if self.peek_at(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                float = true;
                for _ in 0..digit_at {
                    text.push(self.bump().unwrap_or('e'));
                }
                while let Some(c) = self.peek().filter(char::is_ascii_digit) {
                    text.push(c);
                    self.bump();
                }
            }
        }
        if float {
            Tok::Number(text)
        } else {
            Tok::Int(text)
        }
    }

    /// Everything between `rewards` and `endrewards` is retained verbatim.
    fn rewards_block(&mut self, line: usize, col: usize) -> Result<Tok, ParseDiagnostic> {
        self.skip_trivia();
        let name = if self.peek() == Some('"') {
            let (l, c) = (self.line, self.col);
            Some(self.string(l, c)?)
        } else {
            None
        };
        let start = self.pos;
        loop {
            if self.pos >= self.chars.len() {
                return Err(self.error(line, col, "rewards block is missing `endrewards`"));
            }
            let at_boundary = self.pos == 0 || !is_ident_char(self.chars[self.pos - 1]);
            if at_boundary && self.chars[self.pos..].starts_with(&['e', 'n', 'd', 'r', 'e', 'w', 'a', 'r', 'd', 's']) {
                let after = self.pos + "endrewards".len();
                if self.chars.get(after).is_none_or(|&c| !is_ident_char(c)) {
                    break;
                }
            }
            self.bump();
        }
        let body: String = self.chars[start..self.pos].iter().collect();
        for _ in 0.."endrewards".len() {
            self.bump();
        }
        let lines = body
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        Ok(Tok::Rewards { name, lines })
    }

    fn next_token(&mut self) -> Result<Token, ParseDiagnostic> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        let Some(c) = self.peek() else {
            return Ok(Token { tok: Tok::Eof, line, col });
        };
        let two = |lx: &mut Self, t: Tok| {
            lx.bump();
            lx.bump();
            t
        };
        let one = |lx: &mut Self, t: Tok| {
            lx.bump();
            t
        };
        let tok = match c {
            c if is_ident_start(c) => {
                let mut s = String::new();
                while let Some(c) = self.peek().filter(|&c| is_ident_char(c)) {
                    s.push(c);
                    self.bump();
                }
                if s == "rewards" {
                    self.rewards_block(line, col)?
                } else {
                    Tok::Ident(s)
                }
            }
            c if c.is_ascii_digit() => self.number(),
            '"' => Tok::Str(self.string(line, col)?),
            '[' => one(self, Tok::LBracket),
            ']' => one(self, Tok::RBracket),
            '(' => one(self, Tok::LParen),
            ')' => one(self, Tok::RParen),
            ':' => one(self, Tok::Colon),
            ';' => one(self, Tok::Semi),
            '+' => one(self, Tok::Plus),
            '*' => one(self, Tok::Star),
            '/' => one(self, Tok::Slash),
            '=' => one(self, Tok::Eq),
            '&' => one(self, Tok::And),
            '|' => one(self, Tok::Or),
            '\'' => one(self, Tok::Prime),
            '-' if self.peek_at(1) == Some('>') => two(self, Tok::Arrow),
            '-' => one(self, Tok::Minus),
            '!' if self.peek_at(1) == Some('=') => two(self, Tok::Ne),
            '!' => one(self, Tok::Not),
            '<' if self.peek_at(1) == Some('=') => two(self, Tok::Le),
            '<' => one(self, Tok::Lt),
            '>' if self.peek_at(1) == Some('=') => two(self, Tok::Ge),
            '>' => one(self, Tok::Gt),
            '.' if self.peek_at(1) == Some('.') => two(self, Tok::DotDot),
            other => return Err(self.error(line, col, format!("unknown token `{other}`"))),
        };
        Ok(Token { tok, line, col })
    }
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseDiagnostic> {
    let mut lx = Lexer {
        chars: src.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        let t = lx.next_token()?;
        let eof = t.tok == Tok::Eof;
        out.push(t);
        if eof {
            return Ok(out);
        }
    }
}
