use std::fmt;

use crate::error::{Error, Position, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Add,
    And,
    As,
    Begin,
    Connect,
    Create,
    Delete,
    Each,
    End,
    For,
    From,
    Function,
    Hull,
    Import,
    In,
    Insert,
    Instance,
    Into,
    Learn,
    Many,
    Null,
    Repeat,
    Select,
    Set,
    Subtype,
    Type,
    Where,
}

impl Keyword {
    fn lookup(word: &str) -> Option<Keyword> {
        use Keyword::*;
        Some(match word.to_ascii_lowercase().as_str() {
            "add" => Add,
            "and" => And,
            "as" => As,
            "begin" => Begin,
            "connect" => Connect,
            "create" => Create,
            "delete" => Delete,
            "each" => Each,
            "end" => End,
            "for" => For,
            "from" => From,
            "function" => Function,
            "hull" => Hull,
            "import" => Import,
            "in" => In,
            "insert" => Insert,
            "instance" => Instance,
            "into" => Into,
            "learn" => Learn,
            "many" => Many,
            "null" => Null,
            "repeat" => Repeat,
            "select" => Select,
            "set" => Set,
            "subtype" => Subtype,
            "type" => Type,
            "where" => Where,
            _ => return None,
        })
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = format!("{self:?}").to_ascii_lowercase();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Token {
    Ident(String),
    Keyword(Keyword),
    Integer(i64),
    Real(f64),
    Str(String),
    LParen,
    RParen,
    Comma,
    Semi,
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
    Arrow,
    Eof,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "identifier `{s}`"),
            Token::Keyword(k) => write!(f, "`{k}`"),
            Token::Integer(i) => write!(f, "`{i}`"),
            Token::Real(x) => write!(f, "`{x:?}`"),
            Token::Str(s) => write!(f, "string \"{s}\""),
            Token::Eof => f.write_str("end of input"),
            other => {
                let sym = match other {
                    Token::LParen => "(",
                    Token::RParen => ")",
                    Token::Comma => ",",
                    Token::Semi => ";",
                    Token::Plus => "+",
                    Token::Minus => "-",
                    Token::Star => "*",
                    Token::Slash => "/",
                    Token::Eq => "=",
                    Token::Ne => "<>",
                    Token::Lt => "<",
                    Token::Le => "<=",
                    Token::Gt => ">",
                    Token::Ge => ">=",
                    Token::Arrow => "->",
                    _ => unreachable!(),
                };
                write!(f, "`{sym}`")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spanned {
    pub token: Token,
    pub pos: Position,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits source text into tokens. A `-` between two identifier characters
/// with no whitespace belongs to the identifier (`XOR-Net`).
pub fn tokenize(src: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |pos: Position, found: String, expected: &str| Error::Syntax {
        position: pos,
        expected: vec![expected.to_string()],
        found,
        at_eof: false,
    };

    while i < chars.len() {
        let c = chars[i];
        let pos = Position { line, column: col };
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i, &mut col);
            }
            continue;
        }
        if is_ident_start(c) {
            let start = i;
            while i < chars.len()
                && (is_ident_char(chars[i]) || (chars[i] == '-' && chars.get(i + 1).is_some_and(|n| is_ident_char(*n))))
            {
                advance(1, &mut i, &mut col);
            }
            let word: String = chars[start..i].iter().collect();
            let token = match Keyword::lookup(&word) {
                Some(k) => Token::Keyword(k),
                None => Token::Ident(word),
            };
            out.push(Spanned { token, pos });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let mut real = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(1, &mut i, &mut col);
            }
            if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                real = true;
                advance(1, &mut i, &mut col);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(1, &mut i, &mut col);
                }
            }
            if matches!(chars.get(i), Some('e' | 'E')) {
                let mut j = i + 1;
                if matches!(chars.get(j), Some('+' | '-')) {
                    j += 1;
                }
                if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                    real = true;
                    advance(j - i, &mut i, &mut col);
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance(1, &mut i, &mut col);
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let token = if real {
                Token::Real(text.parse().map_err(|_| err(pos, text.clone(), "number"))?)
            } else {
                match text.parse() {
                    Ok(n) => Token::Integer(n),
                    Err(_) => Token::Real(text.parse().map_err(|_| err(pos, text.clone(), "number"))?),
                }
            };
            out.push(Spanned { token, pos });
            continue;
        }
        if c == '"' || c == '\'' {
            let quote = c;
            advance(1, &mut i, &mut col);
            let mut text = String::new();
            loop {
                match chars.get(i) {
                    None => {
                        return Err(Error::Syntax {
                            position: pos,
                            expected: vec![format!("closing {quote}")],
                            found: "end of input".into(),
                            at_eof: true,
                        })
                    }
                    Some('\\') if i + 1 < chars.len() => {
                        text.push(chars[i + 1]);
                        advance(2, &mut i, &mut col);
                    }
                    Some(&ch) if ch == quote => {
                        advance(1, &mut i, &mut col);
                        break;
                    }
                    Some('\n') => {
                        text.push('\n');
                        i += 1;
                        line += 1;
                        col = 1;
                    }
                    Some(&ch) => {
                        text.push(ch);
                        advance(1, &mut i, &mut col);
                    }
                }
            }
            out.push(Spanned { token: Token::Str(text), pos });
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (token, len) = match (c, next) {
            ('-', Some('>')) => (Token::Arrow, 2),
            ('<', Some('>')) => (Token::Ne, 2),
            ('!', Some('=')) => (Token::Ne, 2),
            ('<', Some('=')) => (Token::Le, 2),
            ('>', Some('=')) => (Token::Ge, 2),
            ('(', _) => (Token::LParen, 1),
            (')', _) => (Token::RParen, 1),
            (',', _) => (Token::Comma, 1),
            (';', _) => (Token::Semi, 1),
            ('+', _) => (Token::Plus, 1),
            ('-', _) => (Token::Minus, 1),
            ('*', _) => (Token::Star, 1),
            ('/', _) => (Token::Slash, 1),
            ('=', _) => (Token::Eq, 1),
            ('<', _) => (Token::Lt, 1),
            ('>', _) => (Token::Gt, 1),
            _ => return Err(err(pos, format!("`{c}`"), "a token")),
        };
        advance(len, &mut i, &mut col);
        out.push(Spanned { token, pos });
    }
    out.push(Spanned { token: Token::Eof, pos: Position { line, column: col } });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Token> {
        tokenize(src).unwrap().into_iter().map(|s| s.token).collect()
    }

    #[test]
    fn dashed_identifiers_and_subtraction() {
        assert_eq!(
            kinds("XOR-Net a - b 1-x"),
            vec![
                Token::Ident("XOR-Net".into()),
                Token::Ident("a".into()),
                Token::Minus,
                Token::Ident("b".into()),
                Token::Integer(1),
                Token::Minus,
                Token::Ident("x".into()),
                Token::Eof
            ]
        );
        assert_eq!(kinds("exp(-Activation(U))")[2], Token::Minus);
    }

    #[test]
    fn keywords_ignore_case_and_comments_are_skipped() {
        assert_eq!(
            kinds("CREATE Type -- trailing\nselect"),
            vec![
                Token::Keyword(Keyword::Create),
                Token::Keyword(Keyword::Type),
                Token::Keyword(Keyword::Select),
                Token::Eof
            ]
        );
    }

    #[test]
    fn numbers_strings_and_positions() {
        let toks = tokenize("4.00 3000 1e-5\n  'xor.csv' -> <>").unwrap();
        assert_eq!(toks[0].token, Token::Real(4.0));
        assert_eq!(toks[1].token, Token::Integer(3000));
        assert_eq!(toks[2].token, Token::Real(1e-5));
        assert_eq!(toks[3].token, Token::Str("xor.csv".into()));
        assert_eq!(toks[3].pos, Position { line: 2, column: 3 });
        assert_eq!(toks[4].token, Token::Arrow);
        assert_eq!(toks[5].token, Token::Ne);
        assert!(tokenize("\"open").unwrap_err().is_incomplete_input());
        assert!(tokenize("a # b").is_err());
    }
}
