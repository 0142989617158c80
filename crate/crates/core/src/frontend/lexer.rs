use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    Float(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Float(x) => write!(f, "`{x}`"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of file"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
    /// Exact source text of numeric literals (distinguishes `3` from `3.0`).
    pub text: String,
}

const PUNCT: &[&str] = &[
    "->", "==", "!=", "<=", ">=", "&&", "||", "++", "+=", "-=", "**", ";", ",", "[", "]", "(", ")", "{", "}", "@", ":",
    "=", "+", "-", "*", "/", "!", "<", ">", "%", "^", "&", "|", "~", ".", "$",
];

/// Splits source text into tokens. Comments are skipped.
pub fn lex(src: &str) -> Result<Vec<Token>, (String, u32, u32)> {
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let mut out = Vec::new();
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if ch == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if ch == '/' && chars.get(i + 1) == Some(&'*') {
            let (l0, c0) = (line, col);
            advance(&mut i, &mut line, &mut col, 2);
            loop {
                if i + 1 >= chars.len() {
                    return Err(("unterminated block comment".into(), l0, c0));
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    advance(&mut i, &mut line, &mut col, 2);
                    break;
                }
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if ch.is_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Token {
                tok: Tok::Ident(s),
                line: l0,
                col: c0,
                text: String::new(),
            });
            continue;
        }
        if ch.is_ascii_digit() || (ch == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let start = i;
            let mut is_float = false;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            if i < chars.len() && chars[i] == '.' {
                is_float = true;
                advance(&mut i, &mut line, &mut col, 1);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_float = true;
                    let n = j - i;
                    advance(&mut i, &mut line, &mut col, n);
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance(&mut i, &mut line, &mut col, 1);
                    }
                }
            }
            let text: String = chars[start..i].iter().filter(|c| **c != '_').collect();
            let tok = if is_float {
                Tok::Float(
                    text.parse()
                        .map_err(|_| (format!("malformed number `{text}`"), l0, c0))?,
                )
            } else {
                Tok::Int(
                    text.parse()
                        .map_err(|_| (format!("integer literal `{text}` is too large"), l0, c0))?,
                )
            };
            out.push(Token {
                tok,
                line: l0,
                col: c0,
                text,
            });
            continue;
        }
        if ch == '"' {
            advance(&mut i, &mut line, &mut col, 1);
            let start = i;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(("unterminated string literal".into(), l0, c0));
            }
            let s: String = chars[start..i].iter().collect();
            advance(&mut i, &mut line, &mut col, 1);
            out.push(Token {
                tok: Tok::Str(s),
                line: l0,
                col: c0,
                text: String::new(),
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCT.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                advance(&mut i, &mut line, &mut col, p.len());
                out.push(Token {
                    tok: Tok::Punct(p),
                    line: l0,
                    col: c0,
                    text: String::new(),
                });
            }
            None => return Err((format!("unexpected character `{ch}`"), l0, c0)),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
        text: String::new(),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_and_punctuation() {
        assert_eq!(
            toks("rz(-1.5e-3) q[0]; // c\n"),
            vec![
                Tok::Ident("rz".into()),
                Tok::Punct("("),
                Tok::Punct("-"),
                Tok::Float(1.5e-3),
                Tok::Punct(")"),
                Tok::Ident("q".into()),
                Tok::Punct("["),
                Tok::Int(0),
                Tok::Punct("]"),
                Tok::Punct(";"),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_and_comments() {
        let t = lex("/* a\n b */ x ->\n  y").unwrap();
        assert_eq!((t[0].line, t[0].col), (2, 7));
        assert_eq!(t[1].tok, Tok::Punct("->"));
        assert_eq!((t[2].line, t[2].col), (3, 3));
    }

    #[test]
    fn float_text_round_trips() {
        let x = 0.1 + 0.2;
        let src = format!("{x:?}");
        assert_eq!(toks(&src)[0], Tok::Float(x));
    }

    #[test]
    fn errors_carry_position() {
        assert_eq!(lex("x\n  #").unwrap_err().1, 2);
    }
}
