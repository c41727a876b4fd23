//! ASCII Dirac-notation front end: tokenizer, parser, canonical printer.
//!
//! The grammar is documented in `docs/grammar.ebnf`. Round trip contract:
//! `parse(print(e))` structurally equals the alpha-normalized `e`.

pub mod lex;
pub mod parse;
pub mod print;

pub use lex::stem;
pub use parse::{parse, ParseError};
pub use print::print_expr;
