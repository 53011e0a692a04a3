//! Tokenizer shared by the category, scenario and query languages.

use std::fmt;

/// 1-based line and column of a token in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl Default for Span {
    fn default() -> Self {
        Span { line: 1, col: 1 }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    /// Identifier, keyword or number.
    Word(String),
    /// `word:` optionally followed by `seg/seg`. Also used for `label:` in
    /// sequence steps.
    Path(String),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Path(p) => write!(f, "`{p}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Semi => f.write_str("`;`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub span: Span,
    pub message: String,
}

pub(crate) fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')
}

fn is_segment_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '/')
}

struct Scanner {
    chars: Vec<char>,
    i: usize,
    line: usize,
    col: usize,
}

impl Scanner {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.i).copied()
    }

    fn span(&self) -> Span {
        Span {
            line: self.line,
            col: self.col,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool, out: &mut String) {
        while let Some(c) = self.peek().filter(|&c| pred(c)) {
            out.push(c);
            self.bump();
        }
    }

    fn string(&mut self, start: Span) -> Result<String, LexError> {
        let mut text = String::new();
        loop {
            match self.bump() {
                None => {
                    return Err(LexError {
                        span: start,
                        message: "unterminated string".into(),
                    })
                }
                Some('"') => return Ok(text),
                Some('\n') => {
                    return Err(LexError {
                        span: start,
                        message: "newline in string (use \\n)".into(),
                    })
                }
                Some('\\') => {
                    let at = self.span();
                    let mapped = match self.bump() {
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some('"') => '"',
                        Some('\\') => '\\',
                        Some(e) => {
                            return Err(LexError {
                                span: at,
                                message: format!("unknown escape `\\{e}`"),
                            })
                        }
                        None => continue,
                    };
                    text.push(mapped);
                }
                Some(c) => text.push(c),
            }
        }
    }
}

/// Splits `source` into tokens. `#` comments run to end of line when
/// `comments` is set.
pub fn tokenize(source: &str, comments: bool) -> Result<Vec<Token>, LexError> {
    let mut sc = Scanner {
        chars: source.chars().collect(),
        i: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    while let Some(c) = sc.peek() {
        let span = sc.span();
        if c.is_whitespace() {
            sc.bump();
            continue;
        }
        if c == '#' && comments {
            sc.take_while(|c| c != '\n', &mut String::new());
            continue;
        }
        let tok = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ';' => Tok::Semi,
            '"' => {
                sc.bump();
                out.push(Token {
                    tok: Tok::Str(sc.string(span)?),
                    span,
                });
                continue;
            }
            c if is_word_char(c) => {
                let mut text = String::new();
                sc.take_while(is_word_char, &mut text);
                let tok = if sc.peek() == Some(':') {
                    sc.bump();
                    text.push(':');
                    sc.take_while(is_segment_char, &mut text);
                    Tok::Path(text)
                } else {
                    Tok::Word(text)
                };
                out.push(Token { tok, span });
                continue;
            }
            _ => {
                return Err(LexError {
                    span,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        sc.bump();
        out.push(Token { tok, span });
    }
    Ok(out)
}

/// Quotes `text` so that `tokenize` reads it back as one string token.
pub fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Cursor over a token list with helpers used by the recursive-descent parsers.
pub(crate) struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
    end: Span,
}

impl Cursor {
    pub(crate) fn new(tokens: Vec<Token>, source: &str) -> Cursor {
        let line = source.lines().count().max(1);
        let col = source.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
        Cursor {
            tokens,
            pos: 0,
            end: Span { line, col },
        }
    }

    pub(crate) fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    pub(crate) fn peek_tok(&self) -> Option<&Tok> {
        self.peek().map(|t| &t.tok)
    }

    pub(crate) fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    /// Span of the next token, or the end of input.
    pub(crate) fn span(&self) -> Span {
        self.peek().map(|t| t.span).unwrap_or(self.end)
    }

    pub(crate) fn describe_next(&self) -> String {
        match self.peek() {
            Some(t) => t.tok.to_string(),
            None => "end of input".to_string(),
        }
    }

    pub(crate) fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek_tok() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn eat_word(&mut self, word: &str) -> bool {
        if matches!(self.peek_tok(), Some(Tok::Word(w)) if w == word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }
}
