use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Int(u128),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Colon,
    Semi,
    Pipe,
    Eq,
    Neq,
    Arrow,
    FatArrow,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Int(n) => n.to_string(),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Neq => "`!=`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::FatArrow => "`=>`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut push = |tok: Tok, len: usize, i: &mut usize, col: &mut usize| {
            out.push(Token {
                tok,
                line: tl,
                col: tc,
            });
            *i += len;
            *col += len;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let n = text.parse::<u128>().map_err(|_| ParseError::Syntax {
                    line: tl,
                    col: tc,
                    expected: vec!["integer literal below 2^127".into()],
                    found: text.clone(),
                })?;
                if n > i128::MAX as u128 {
                    return Err(ParseError::Syntax {
                        line: tl,
                        col: tc,
                        expected: vec!["integer literal below 2^127".into()],
                        found: text,
                    });
                }
                col += i - start;
                out.push(Token {
                    tok: Tok::Int(n),
                    line: tl,
                    col: tc,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                col += i - start;
                out.push(Token {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    line: tl,
                    col: tc,
                });
            }
            _ => {
                let next = chars.get(i + 1).copied();
                match (c, next) {
                    ('-', Some('>')) => push(Tok::Arrow, 2, &mut i, &mut col),
                    ('=', Some('>')) => push(Tok::FatArrow, 2, &mut i, &mut col),
                    ('!', Some('=')) => push(Tok::Neq, 2, &mut i, &mut col),
                    ('+', _) => push(Tok::Plus, 1, &mut i, &mut col),
                    ('-', _) => push(Tok::Minus, 1, &mut i, &mut col),
                    ('*', _) => push(Tok::Star, 1, &mut i, &mut col),
                    ('/', _) => push(Tok::Slash, 1, &mut i, &mut col),
                    ('^', _) => push(Tok::Caret, 1, &mut i, &mut col),
                    ('(', _) => push(Tok::LParen, 1, &mut i, &mut col),
                    (')', _) => push(Tok::RParen, 1, &mut i, &mut col),
                    (',', _) => push(Tok::Comma, 1, &mut i, &mut col),
                    (':', _) => push(Tok::Colon, 1, &mut i, &mut col),
                    (';', _) => push(Tok::Semi, 1, &mut i, &mut col),
                    ('|', _) => push(Tok::Pipe, 1, &mut i, &mut col),
                    ('=', _) => push(Tok::Eq, 1, &mut i, &mut col),
                    _ => {
                        return Err(ParseError::Syntax {
                            line: tl,
                            col: tc,
                            expected: vec!["a token".into()],
                            found: format!("`{c}`"),
                        })
                    }
                }
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}
