use super::tokenize::{Token, TokenKind};
use super::ParseError;
use crate::tree::{NaryTree, NodeKind};

/// How many argument groups a command consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Fixed(usize),
    /// Takes the immediately following brace group, if there is one.
    Unknown,
}

const TWO_ARGS: &[&str] = &[
    r"\frac", r"\tfrac", r"\dfrac", r"\cfrac", r"\binom", r"\tbinom", r"\dbinom",
];

const ONE_ARG: &[&str] = &[
    r"\sqrt",
    r"\bar",
    r"\hat",
    r"\tilde",
    r"\vec",
    r"\dot",
    r"\ddot",
    r"\check",
    r"\breve",
    r"\overline",
    r"\underline",
    r"\widehat",
    r"\widetilde",
    r"\mathrm",
    r"\mathbf",
    r"\mathit",
    r"\mathcal",
    r"\mathbb",
    r"\mathsf",
    r"\mathfrak",
    r"\operatorname",
    r"\text",
    r"\textrm",
    r"\boldsymbol",
];

const NO_ARGS: &[&str] = &[
    r"\alpha",
    r"\beta",
    r"\gamma",
    r"\delta",
    r"\epsilon",
    r"\varepsilon",
    r"\zeta",
    r"\eta",
    r"\theta",
    r"\vartheta",
    r"\iota",
    r"\kappa",
    r"\lambda",
    r"\mu",
    r"\nu",
    r"\xi",
    r"\pi",
    r"\varpi",
    r"\rho",
    r"\varrho",
    r"\sigma",
    r"\varsigma",
    r"\tau",
    r"\upsilon",
    r"\phi",
    r"\varphi",
    r"\chi",
    r"\psi",
    r"\omega",
    r"\Gamma",
    r"\Delta",
    r"\Theta",
    r"\Lambda",
    r"\Xi",
    r"\Pi",
    r"\Sigma",
    r"\Upsilon",
    r"\Phi",
    r"\Psi",
    r"\Omega",
    r"\sin",
    r"\cos",
    r"\tan",
    r"\cot",
    r"\sec",
    r"\csc",
    r"\sinh",
    r"\cosh",
    r"\tanh",
    r"\arcsin",
    r"\arccos",
    r"\arctan",
    r"\ln",
    r"\log",
    r"\exp",
    r"\lim",
    r"\sum",
    r"\prod",
    r"\int",
    r"\oint",
    r"\infty",
    r"\partial",
    r"\nabla",
    r"\cdot",
    r"\times",
    r"\pm",
    r"\mp",
    r"\leq",
    r"\geq",
    r"\le",
    r"\ge",
    r"\lt",
    r"\gt",
    r"\neq",
    r"\ne",
    r"\equiv",
    r"\sim",
    r"\simeq",
    r"\approx",
    r"\asympeq",
    r"\to",
    r"\rightarrow",
    r"\Rightarrow",
    r"\leftarrow",
    r"\Leftarrow",
    r"\ldots",
    r"\cdots",
    r"\dots",
    r"\left",
    r"\right",
    r"\quad",
    r"\qquad",
    r"\in",
    r"\notin",
    r"\subset",
    r"\cup",
    r"\cap",
    r"\Re",
    r"\Im",
    r"\ell",
    r"\prime",
];

/// Argument count for a command token.
pub fn command_arity(cmd: &str) -> Arity {
    if TWO_ARGS.contains(&cmd) {
        Arity::Fixed(2)
    } else if ONE_ARG.contains(&cmd) {
        Arity::Fixed(1)
    } else if NO_ARGS.contains(&cmd) || !cmd[1..].starts_with(|c: char| c.is_ascii_alphabetic()) {
        // Control symbols such as `\,` or `\{` never take arguments.
        Arity::Fixed(0)
    } else {
        Arity::Unknown
    }
}

/// `_`, `^` and the semantic-LaTeX argument separator `@` attach the next
/// argument to the preceding item.
pub fn is_script_operator(label: &str) -> bool {
    matches!(label, "_" | "^" | "@")
}

fn is_script_token(tok: &Token) -> bool {
    matches!(tok.kind, TokenKind::Sub | TokenKind::Sup)
        || (tok.kind == TokenKind::Symbol && tok.text == "@")
}

/// Output of the n-ary parser, with positions of commands whose arguments
/// were missing (those commands were kept as bare leaves).
#[derive(Debug, Clone)]
pub struct NaryParse {
    pub tree: NaryTree,
    pub dangling: Vec<usize>,
}

/// Builds the n-ary tree of a brace-balanced token stream. Structure-only
/// braces are dropped: a group with one item collapses to that item.
pub fn parse_nary(tokens: &[Token]) -> Result<NaryTree, ParseError> {
    parse_nary_with_diagnostics(tokens).map(|p| {
        for pos in &p.dangling {
            log::warn!("{}", ParseError::DanglingArgument(*pos));
        }
        p.tree
    })
}

pub fn parse_nary_with_diagnostics(tokens: &[Token]) -> Result<NaryParse, ParseError> {
    let mut parser = Parser {
        tokens,
        pos: 0,
        dangling: Vec::new(),
    };
    let items = parser.items(false)?;
    let tree = match items.len() {
        0 => return Err(ParseError::EmptyInput),
        1 => items.into_iter().next().unwrap(),
        _ => NaryTree::node(NodeKind::Sequence, items),
    };
    Ok(NaryParse {
        tree,
        dangling: parser.dangling,
    })
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    dangling: Vec<usize>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn items(&mut self, inside_group: bool) -> Result<Vec<NaryTree>, ParseError> {
        let mut items = Vec::new();
        loop {
            let Some(tok) = self.peek() else {
                if inside_group {
                    return Err(ParseError::UnbalancedBraces(self.pos));
                }
                return Ok(items);
            };
            match tok.kind {
                TokenKind::CloseBrace => {
                    if inside_group {
                        self.pos += 1;
                        return Ok(items);
                    }
                    return Err(ParseError::UnexpectedToken(self.pos));
                }
                TokenKind::OpenBrace => {
                    self.pos += 1;
                    let inner = self.items(true)?;
                    if let Some(g) = group(inner) {
                        items.push(g);
                    }
                }
                _ if is_script_token(tok) => {
                    let op = tok.text.clone();
                    let at = self.pos;
                    self.pos += 1;
                    let arg = self.argument()?;
                    let mut children = Vec::with_capacity(3);
                    if let Some(base) = items.pop() {
                        children.push(base);
                    }
                    children.push(NaryTree::Leaf(op));
                    match arg {
                        Some(a) => children.push(a),
                        None => self.dangling.push(at),
                    }
                    items.push(if children.len() == 1 {
                        children.pop().unwrap()
                    } else {
                        NaryTree::node(NodeKind::Script, children)
                    });
                }
                TokenKind::Command => {
                    let node = self.command()?;
                    items.push(node);
                }
                _ => {
                    let label = tok.text.clone();
                    self.pos += 1;
                    items.push(NaryTree::Leaf(label));
                }
            }
        }
    }

    /// One argument: a brace group or a single (possibly command) token.
    /// `None` when the stream ends, a group closes, or the group is empty.
    fn argument(&mut self) -> Result<Option<NaryTree>, ParseError> {
        let Some(tok) = self.peek() else {
            return Ok(None);
        };
        match tok.kind {
            TokenKind::CloseBrace => Ok(None),
            TokenKind::OpenBrace => {
                self.pos += 1;
                let inner = self.items(true)?;
                Ok(group(inner))
            }
            TokenKind::Command => self.command().map(Some),
            _ if is_script_token(tok) => Ok(None),
            _ => {
                let label = tok.text.clone();
                self.pos += 1;
                Ok(Some(NaryTree::Leaf(label)))
            }
        }
    }

    fn command(&mut self) -> Result<NaryTree, ParseError> {
        let at = self.pos;
        let cmd = self.next().expect("caller peeked a command").text.clone();
        let args = match command_arity(&cmd) {
            Arity::Fixed(0) => Vec::new(),
            Arity::Fixed(k) => {
                let mut args = Vec::with_capacity(k);
                for _ in 0..k {
                    match self.argument()? {
                        Some(a) => args.push(a),
                        None => {
                            self.dangling.push(at);
                            break;
                        }
                    }
                }
                args
            }
            Arity::Unknown => {
                if self.peek().is_some_and(|t| t.kind == TokenKind::OpenBrace) {
                    self.argument()?.into_iter().collect()
                } else {
                    Vec::new()
                }
            }
        };
        let head = NaryTree::Leaf(cmd);
        Ok(match args.len() {
            0 => head,
            1 => NaryTree::node(
                NodeKind::Command,
                vec![head, args.into_iter().next().unwrap()],
            ),
            _ => NaryTree::node(
                NodeKind::Command,
                vec![head, NaryTree::node(NodeKind::Arguments, args)],
            ),
        })
    }
}

fn group(mut items: Vec<NaryTree>) -> Option<NaryTree> {
    match items.len() {
        0 => None,
        1 => items.pop(),
        _ => Some(NaryTree::node(NodeKind::Group, items)),
    }
}
