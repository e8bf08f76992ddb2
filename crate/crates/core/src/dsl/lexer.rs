use super::{DslError, Pos};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Open,
    Close,
    Symbol(String),
    /// `:name`, stored without the colon.
    Keyword(String),
    Str(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Open => "`(`".into(),
            TokenKind::Close => "`)`".into(),
            TokenKind::Symbol(s) => format!("`{s}`"),
            TokenKind::Keyword(k) => format!("`:{k}`"),
            TokenKind::Str(s) => format!("{s:?}"),
        }
    }
}

fn is_symbol_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '?' | '!' | '*' | '+' | '/' | '<' | '>' | '=')
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, DslError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1u32, 1u32);
    let advance = |c: char, line: &mut u32, col: &mut u32| {
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    advance(c, &mut line, &mut col);
                }
            }
            c if c.is_whitespace() => {
                chars.next();
                advance(c, &mut line, &mut col);
            }
            '(' | ')' => {
                chars.next();
                advance(c, &mut line, &mut col);
                out.push(Token { kind: if c == '(' { TokenKind::Open } else { TokenKind::Close }, pos });
            }
            '"' => {
                chars.next();
                advance(c, &mut line, &mut col);
                let mut s = String::new();
                loop {
                    let Some(c) = chars.next() else {
                        return Err(DslError::Parse {
                            pos: Pos { line, col },
                            expected: vec!["`\"`".into()],
                            found: "end of input".into(),
                        });
                    };
                    let here = Pos { line, col };
                    advance(c, &mut line, &mut col);
                    match c {
                        '"' => break,
                        '\\' => {
                            let e = chars.next();
                            if let Some(e) = e {
                                advance(e, &mut line, &mut col);
                            }
                            match e {
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                other => {
                                    return Err(DslError::Parse {
                                        pos: here,
                                        expected: vec!["escape `\\\"`, `\\\\`, `\\n` or `\\t`".into()],
                                        found: other.map_or("end of input".into(), |e| format!("`\\{e}`")),
                                    })
                                }
                            }
                        }
                        c => s.push(c),
                    }
                }
                out.push(Token { kind: TokenKind::Str(s), pos });
            }
            ':' => {
                chars.next();
                advance(c, &mut line, &mut col);
                let mut s = String::new();
                while let Some(&c) = chars.peek().filter(|c| is_symbol_char(**c)) {
                    s.push(c);
                    chars.next();
                    advance(c, &mut line, &mut col);
                }
                if s.is_empty() {
                    return Err(DslError::Parse {
                        pos: Pos { line, col },
                        expected: vec!["keyword name".into()],
                        found: chars.peek().map_or("end of input".into(), |c| format!("`{c}`")),
                    });
                }
                out.push(Token { kind: TokenKind::Keyword(s), pos });
            }
            c if is_symbol_char(c) => {
                let mut s = String::new();
                while let Some(&c) = chars.peek().filter(|c| is_symbol_char(**c)) {
                    s.push(c);
                    chars.next();
                    advance(c, &mut line, &mut col);
                }
                out.push(Token { kind: TokenKind::Symbol(s), pos });
            }
            other => {
                return Err(DslError::Parse {
                    pos,
                    expected: vec!["`(`".into(), "`)`".into(), "symbol".into(), "string".into()],
                    found: format!("`{other}`"),
                })
            }
        }
    }
    Ok(out)
}
