use std::collections::HashSet;
use std::fmt;

use super::{AtomicRelation, Entity, Group, Relation, RelationChain};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnknownRelation(String),
    /// Offset points at the unmatched parenthesis.
    UnbalancedParen,
    EmptyEntity,
    UnterminatedQuote,
    UnexpectedToken { found: String, expected: &'static str },
    UnexpectedEnd { expected: &'static str },
}

/// Parse failure with a byte offset into the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::UnknownRelation(k) => write!(f, "unknown relation `{k}`")?,
            ParseErrorKind::UnbalancedParen => f.write_str("unbalanced parenthesis")?,
            ParseErrorKind::EmptyEntity => f.write_str("empty entity")?,
            ParseErrorKind::UnterminatedQuote => f.write_str("unterminated quoted entity")?,
            ParseErrorKind::UnexpectedToken { found, expected } => write!(f, "expected {expected}, found `{found}`")?,
            ParseErrorKind::UnexpectedEnd { expected } => write!(f, "expected {expected}, found end of input")?,
        }
        write!(f, " at byte {}", self.offset)
    }
}

impl std::error::Error for ParseError {}

/// A chain whose atom `index` does not link to the atoms before it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainError {
    pub index: usize,
    pub reason: String,
}

impl fmt::Display for ChainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "atom {}: {}", self.index, self.reason)
    }
}

impl std::error::Error for ChainError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Plus,
    Rel(Relation),
    Word(String),
    Quoted(String),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Open => "(".into(),
            Tok::Close => ")".into(),
            Tok::Plus => "+".into(),
            Tok::Rel(r) => r.keyword().into(),
            Tok::Word(w) => w.clone(),
            Tok::Quoted(q) => format!("\"{q}\""),
        }
    }
}

fn is_keyword_shaped(word: &str) -> bool {
    word.len() >= 3 && word.bytes().all(|b| b.is_ascii_uppercase())
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '+' | '"')
}

fn lex(input: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = input.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' | ')' | '+' => {
                chars.next();
                let tok = match c {
                    '(' => Tok::Open,
                    ')' => Tok::Close,
                    _ => Tok::Plus,
                };
                out.push((tok, pos));
            }
            '"' => {
                chars.next();
                let mut text = String::new();
                let mut closed = false;
                while let Some((_, c)) = chars.next() {
                    match c {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\\' => match chars.next() {
                            Some((_, e)) => text.push(e),
                            None => break,
                        },
                        c => text.push(c),
                    }
                }
                if !closed {
                    return Err(ParseError {
                        kind: ParseErrorKind::UnterminatedQuote,
                        offset: pos,
                    });
                }
                out.push((Tok::Quoted(text), pos));
            }
            _ => {
                let mut end = input.len();
                while let Some(&(i, c)) = chars.peek() {
                    if is_delimiter(c) {
                        end = i;
                        break;
                    }
                    chars.next();
                }
                let word = &input[pos..end];
                if is_keyword_shaped(word) {
                    match Relation::from_keyword(word) {
                        Some(r) => out.push((Tok::Rel(r), pos)),
                        None => {
                            return Err(ParseError {
                                kind: ParseErrorKind::UnknownRelation(word.to_string()),
                                offset: pos,
                            })
                        }
                    }
                } else {
                    out.push((Tok::Word(word.to_string()), pos));
                }
            }
        }
    }
    Ok(out)
}

enum Node {
    Group(Group),
    Expr(Box<Node>, Vec<(Relation, Node)>),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        match self.peek() {
            None => ParseError {
                kind: ParseErrorKind::UnexpectedEnd { expected },
                offset: self.end,
            },
            Some(Tok::Close) if expected == "relation or end of input" => ParseError {
                kind: ParseErrorKind::UnbalancedParen,
                offset: self.offset(),
            },
            Some(t) => ParseError {
                kind: ParseErrorKind::UnexpectedToken {
                    found: t.describe(),
                    expected,
                },
                offset: self.offset(),
            },
        }
    }

    fn entity(&mut self) -> Result<Entity, ParseError> {
        let start = self.offset();
        match self.peek() {
            Some(Tok::Quoted(q)) => {
                let e = Entity::new(q).ok_or(ParseError {
                    kind: ParseErrorKind::EmptyEntity,
                    offset: start,
                })?;
                self.pos += 1;
                Ok(e)
            }
            Some(Tok::Word(_)) => {
                let mut words = Vec::new();
                while let Some(Tok::Word(w)) = self.peek() {
                    words.push(w.clone());
                    self.pos += 1;
                }
                Ok(Entity::new(&words.join(" ")).expect("words are non-empty"))
            }
            Some(Tok::Close | Tok::Plus | Tok::Rel(_)) => Err(ParseError {
                kind: ParseErrorKind::EmptyEntity,
                offset: start,
            }),
            _ => Err(self.unexpected("entity")),
        }
    }

    fn operand(&mut self) -> Result<Node, ParseError> {
        if self.peek() != Some(&Tok::Open) {
            return Ok(Node::Group(Group::single(self.entity()?)));
        }
        let open_at = self.offset();
        self.pos += 1;
        let starts_with_entity = matches!(self.peek(), Some(Tok::Word(_) | Tok::Quoted(_)));
        let node = if starts_with_entity && self.lookahead_plus() {
            let mut members = vec![self.entity()?];
            while self.peek() == Some(&Tok::Plus) {
                self.pos += 1;
                members.push(self.entity()?);
            }
            Node::Group(Group(members))
        } else {
            self.expr()?
        };
        match self.peek() {
            Some(Tok::Close) => {
                self.pos += 1;
                Ok(node)
            }
            None => Err(ParseError {
                kind: ParseErrorKind::UnbalancedParen,
                offset: open_at,
            }),
            Some(_) => Err(self.unexpected("`)`")),
        }
    }

    /// True when the entity starting at the cursor is followed by `+`.
    fn lookahead_plus(&self) -> bool {
        let mut i = self.pos;
        match self.toks.get(i) {
            Some((Tok::Quoted(_), _)) => i += 1,
            _ => {
                while matches!(self.toks.get(i), Some((Tok::Word(_), _))) {
                    i += 1;
                }
            }
        }
        matches!(self.toks.get(i), Some((Tok::Plus, _)))
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let first = self.operand()?;
        let mut rest = Vec::new();
        while let Some(Tok::Rel(r)) = self.peek() {
            let r = *r;
            self.pos += 1;
            rest.push((r, self.operand()?));
        }
        Ok(Node::Expr(Box::new(first), rest))
    }
}

/// Returns (head group, atoms, tail group).
fn lower(node: Node, atoms: &mut Vec<AtomicRelation>) -> (Group, Group) {
    match node {
        Node::Group(g) => (g.clone(), g),
        Node::Expr(first, rest) => {
            let (head, mut tail) = lower(*first, atoms);
            for (relation, operand) in rest {
                let mut inner = Vec::new();
                let (h, t) = lower(operand, &mut inner);
                atoms.push(AtomicRelation {
                    subject: tail,
                    relation,
                    object: h,
                });
                atoms.extend(inner);
                tail = t;
            }
            (head, tail)
        }
    }
}

/// Parses a relation expression. Each relation keyword yields one atom; a
/// parenthesized sub-expression on the left contributes its last object as
/// the subject of the next atom.
pub fn parse_relation_expr(input: &str) -> Result<RelationChain, ParseError> {
    let toks = lex(input)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: input.len(),
    };
    if p.peek().is_none() {
        return Err(p.unexpected("entity"));
    }
    let node = p.expr()?;
    if p.peek().is_some() {
        return Err(p.unexpected("relation or end of input"));
    }
    let mut atoms = Vec::new();
    let (head, _) = lower(node, &mut atoms);
    Ok(RelationChain {
        source_text: input.to_string(),
        head,
        atoms,
    })
}

/// Checks that every atom after the first starts from the previous object or
/// from a group introduced earlier in the chain, and returns the atoms.
pub fn decompose_chain(chain: &RelationChain) -> Result<Vec<AtomicRelation>, ChainError> {
    let mut seen: HashSet<&Group> = HashSet::new();
    for (k, atom) in chain.atoms.iter().enumerate() {
        if k > 0 {
            let prev = &chain.atoms[k - 1].object;
            if atom.subject != *prev && !seen.contains(&atom.subject) {
                return Err(ChainError {
                    index: k,
                    reason: format!(
                        "subject `{}` is neither the previous object `{}` nor an earlier group",
                        atom.subject, prev
                    ),
                });
            }
        }
        seen.insert(&atom.subject);
        seen.insert(&atom.object);
    }
    Ok(chain.atoms.clone())
}

fn bare_safe(text: &str) -> bool {
    text.split(' ')
        .all(|w| !w.is_empty() && !w.chars().any(is_delimiter) && !is_keyword_shaped(w))
}

fn render_entity(e: &Entity, out: &mut String) {
    if bare_safe(e.text()) {
        out.push_str(e.text());
    } else {
        out.push('"');
        for c in e.text().chars() {
            if matches!(c, '"' | '\\') {
                out.push('\\');
            }
            out.push(c);
        }
        out.push('"');
    }
}

fn render_group(g: &Group, out: &mut String) {
    match g.entities() {
        [one] => render_entity(one, out),
        many => {
            out.push('(');
            for (i, e) in many.iter().enumerate() {
                if i > 0 {
                    out.push_str(" + ");
                }
                render_entity(e, out);
            }
            out.push(')');
        }
    }
}

/// Canonical text for a chain: `S0 R0 O0`, then `(prefix) Rk Ok`. Parsing the
/// result gives back the same atoms. Errors when the chain is not linear.
pub fn render_chain(chain: &RelationChain) -> Result<String, ChainError> {
    let mut out = String::new();
    let Some(first) = chain.atoms.first() else {
        render_group(&chain.head, &mut out);
        return Ok(out);
    };
    render_group(&first.subject, &mut out);
    for (k, atom) in chain.atoms.iter().enumerate() {
        if k > 0 {
            if atom.subject != chain.atoms[k - 1].object {
                return Err(ChainError {
                    index: k,
                    reason: "only linear chains have a canonical rendering".into(),
                });
            }
            out = format!("({out})");
        }
        out.push(' ');
        out.push_str(atom.relation.keyword());
        out.push(' ');
        render_group(&atom.object, &mut out);
    }
    Ok(out)
}
