use std::ops::Range;

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Command,
    OpenBrace,
    CloseBrace,
    Symbol,
    Letter,
    DigitRun,
    Sub,
    Sup,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// Byte range in the source string.
    pub span: Range<usize>,
}

impl Token {
    pub fn is_command(&self) -> bool {
        self.kind == TokenKind::Command
    }
}

/// Splits a LaTeX math string into commands, braces, scripts, digit runs and
/// single characters. Whitespace is dropped.
pub fn tokenize(input: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut open_braces: Vec<usize> = Vec::new();
    let mut chars = input.char_indices().peekable();

    while let Some((start, ch)) = chars.next() {
        if ch.is_whitespace() {
            continue;
        }
        let (kind, end) = match ch {
            '\\' => match chars.peek().copied() {
                Some((_, c)) if c.is_ascii_alphabetic() => {
                    let mut end = start + 1;
                    while let Some(&(i, c)) = chars.peek() {
                        if !c.is_ascii_alphabetic() {
                            break;
                        }
                        end = i + c.len_utf8();
                        chars.next();
                    }
                    (TokenKind::Command, end)
                }
                Some((i, c)) => {
                    chars.next();
                    (TokenKind::Command, i + c.len_utf8())
                }
                None => return Err(ParseError::DanglingBackslash(start)),
            },
            '{' => {
                open_braces.push(start);
                (TokenKind::OpenBrace, start + 1)
            }
            '}' => {
                if open_braces.pop().is_none() {
                    return Err(ParseError::UnbalancedBraces(start));
                }
                (TokenKind::CloseBrace, start + 1)
            }
            '_' => (TokenKind::Sub, start + 1),
            '^' => (TokenKind::Sup, start + 1),
            c if c.is_ascii_digit() => {
                let mut end = start + 1;
                while let Some(&(i, c)) = chars.peek() {
                    if !c.is_ascii_digit() {
                        break;
                    }
                    end = i + 1;
                    chars.next();
                }
                (TokenKind::DigitRun, end)
            }
            c if c.is_alphabetic() => (TokenKind::Letter, start + c.len_utf8()),
            c => (TokenKind::Symbol, start + c.len_utf8()),
        };
        tokens.push(Token {
            text: input[start..end].to_string(),
            kind,
            span: start..end,
        });
    }

    if let Some(pos) = open_braces.pop() {
        return Err(ParseError::UnbalancedBraces(pos));
    }
    if tokens.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    Ok(tokens)
}
