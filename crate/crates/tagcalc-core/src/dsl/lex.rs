//! Tokenizer for the ASCII Dirac-notation syntax.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Pipe,
    Lt,
    Gt,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Comma,
    Tilde,
    /// Identifier; may carry trailing apostrophes (`q'`, `psi''`).
    Ident(String),
    /// Unsigned integer literal.
    Number(String),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Pipe => write!(f, "|"),
            Tok::Lt => write!(f, "<"),
            Tok::Gt => write!(f, ">"),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::LBracket => write!(f, "["),
            Tok::RBracket => write!(f, "]"),
            Tok::Plus => write!(f, "+"),
            Tok::Minus => write!(f, "-"),
            Tok::Star => write!(f, "*"),
            Tok::Slash => write!(f, "/"),
            Tok::Caret => write!(f, "^"),
            Tok::Comma => write!(f, ","),
            Tok::Tilde => write!(f, "~"),
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Number(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone)]
pub struct Lexed {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub message: String,
    pub span: Span,
}

pub fn lex(src: &str) -> Result<Vec<Lexed>, LexError> {
    let mut out = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        let span = Span { line, col };
        let advance = |chars: &mut std::iter::Peekable<std::str::Chars>,
                           line: &mut u32,
                           col: &mut u32| {
            let c = chars.next().unwrap();
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            c
        };
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                advance(&mut chars, &mut line, &mut col);
            }
            '#' => {
                // comment to end of line
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    advance(&mut chars, &mut line, &mut col);
                }
            }
            '|' => {
                advance(&mut chars, &mut line, &mut col);
                out.push(Lexed { tok: Tok::Pipe, span });
            }
            '<' => {
                advance(&mut chars, &mut line, &mut col);
                out.push(Lexed { tok: Tok::Lt, span });
            }
            '>' => {
                advance(&mut chars, &mut line, &mut col);
                out.push(Lexed { tok: Tok::Gt, span });
            }
            '(' => {
                advance(&mut chars, &mut line, &mut col);
                out.push(Lexed { tok: Tok::LParen, span });
            }
            ')' => {
                advance(&mut chars, &mut line, &mut col);
                out.push(Lexed { tok: Tok::RParen, span });
            }
            '[' => {
                advance(&mut chars, &mut line, &mut col);
                out.push(Lexed { tok: Tok::LBracket, span });
            }
            ']' => {
                advance(&mut chars, &mut line, &mut col);
                out.push(Lexed { tok: Tok::RBracket, span });
            }
            '+' => {
                advance(&mut chars, &mut line, &mut col);
                out.push(Lexed { tok: Tok::Plus, span });
            }
            '-' => {
                advance(&mut chars, &mut line, &mut col);
                out.push(Lexed { tok: Tok::Minus, span });
            }
            '*' => {
                advance(&mut chars, &mut line, &mut col);
                out.push(Lexed { tok: Tok::Star, span });
            }
            '/' => {
                advance(&mut chars, &mut line, &mut col);
                out.push(Lexed { tok: Tok::Slash, span });
            }
            '^' => {
                advance(&mut chars, &mut line, &mut col);
                out.push(Lexed { tok: Tok::Caret, span });
            }
            ',' => {
                advance(&mut chars, &mut line, &mut col);
                out.push(Lexed { tok: Tok::Comma, span });
            }
            '~' => {
                advance(&mut chars, &mut line, &mut col);
                out.push(Lexed { tok: Tok::Tilde, span });
            }
            '0'..='9' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(advance(&mut chars, &mut line, &mut col));
                    } else {
                        break;
                    }
                }
                out.push(Lexed { tok: Tok::Number(s), span });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(advance(&mut chars, &mut line, &mut col));
                    } else {
                        break;
                    }
                }
                // trailing apostrophes belong to the identifier (q', psi'')
                while let Some(&'\'') = chars.peek() {
                    s.push(advance(&mut chars, &mut line, &mut col));
                }
                out.push(Lexed { tok: Tok::Ident(s), span });
            }
            other => {
                return Err(LexError {
                    message: format!("unexpected character `{other}`"),
                    span,
                })
            }
        }
    }
    Ok(out)
}

/// Leading alphabetic stem of a label; this names the basis of an index
/// variable (`q'` and `q1` both live in basis `q`).
pub fn stem(label: &str) -> String {
    let end = label
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_alphabetic() || *c == '_'))
        .map(|(i, _)| i)
        .unwrap_or(label.len());
    label[..end].to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_dirac_tokens() {
        let toks = lex("int |q> q <q'| dq").unwrap();
        let kinds: Vec<String> = toks.iter().map(|l| l.tok.to_string()).collect();
        assert_eq!(kinds, vec!["int", "|", "q", ">", "q", "<", "q'", "|", "dq"]);
    }

    #[test]
    fn stems() {
        assert_eq!(stem("q'"), "q");
        assert_eq!(stem("q12"), "q");
        assert_eq!(stem("nu0"), "nu");
        assert_eq!(stem("eta'"), "eta");
    }

    #[test]
    fn spans_track_position() {
        let toks = lex("a\n  b").unwrap();
        assert_eq!(toks[1].span, Span { line: 2, col: 3 });
    }
}
