//! Penn-Treebank style bracketed constituency trees.

use std::fmt;

use crate::error::{Error, Result};

/// Ordered labeled tree. Leaves carry tokens, internal nodes carry
/// category symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConstituencyTree {
    pub label: String,
    pub children: Vec<ConstituencyTree>,
}

impl ConstituencyTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<ConstituencyTree>) -> Self {
        Self {
            label: label.into(),
            children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Self::size).sum::<usize>()
    }

    /// Left-to-right leaf labels.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        if self.is_leaf() {
            out.push(&self.label);
        } else {
            for c in &self.children {
                c.collect_leaves(out);
            }
        }
    }

    /// Flat fallback tree `(S (X w1) (X w2) ...)` for token sequences that
    /// have no parse.
    pub fn flat(tokens: &[String]) -> Self {
        Self::node(
            "S",
            tokens
                .iter()
                .map(|t| Self::node("X", vec![Self::leaf(t.clone())]))
                .collect(),
        )
    }
}

/// A tree that is a single leaf prints as `(label)` so that it parses back.
impl fmt::Display for ConstituencyTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn write(t: &ConstituencyTree, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            if t.is_leaf() {
                return f.write_str(&t.label);
            }
            write!(f, "({}", t.label)?;
            for c in &t.children {
                f.write_str(" ")?;
                write(c, f)?;
            }
            f.write_str(")")
        }
        if self.is_leaf() {
            return write!(f, "({})", self.label);
        }
        write(self, f)
    }
}

#[derive(Debug, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(text: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        let boundary = c == '(' || c == ')' || c.is_whitespace();
        if boundary {
            if let Some(s) = start.take() {
                out.push(Tok::Atom(&text[s..i]));
            }
            match c {
                '(' => out.push(Tok::Open),
                ')' => out.push(Tok::Close),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok::Atom(&text[s..]));
    }
    out
}

/// Parses one bracketed tree such as `(S (NP the cat) (VP sat))`.
///
/// An unlabeled outer bracket, as in `( (S ...) )`, becomes a `ROOT` node.
/// A lone `(label)` is a single-leaf tree.
pub fn parse_ptb_tree(text: &str) -> Result<ConstituencyTree> {
    let toks = lex(text);
    let mut pos = 0;
    if toks.first() != Some(&Tok::Open) {
        return Err(Error::Tree(format!("expected '(' at start of `{text}`")));
    }
    if let [Tok::Open, Tok::Atom(a), Tok::Close] = toks.as_slice() {
        return Ok(ConstituencyTree::leaf(*a));
    }
    let tree = parse_node(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(Error::Tree("unbalanced parentheses: trailing input".into()));
    }
    Ok(tree)
}

fn parse_node(toks: &[Tok<'_>], pos: &mut usize) -> Result<ConstituencyTree> {
    // toks[*pos] is Open
    *pos += 1;
    let label = match toks.get(*pos) {
        Some(Tok::Atom(a)) => {
            *pos += 1;
            a.to_string()
        }
        Some(Tok::Open) => "ROOT".to_string(),
        Some(Tok::Close) => return Err(Error::Tree("empty node `()`".into())),
        None => return Err(Error::Tree("unbalanced parentheses".into())),
    };
    let mut children = Vec::new();
    loop {
        match toks.get(*pos) {
            Some(Tok::Close) => {
                *pos += 1;
                break;
            }
            Some(Tok::Open) => children.push(parse_node(toks, pos)?),
            Some(Tok::Atom(a)) => {
                children.push(ConstituencyTree::leaf(*a));
                *pos += 1;
            }
            None => return Err(Error::Tree("unbalanced parentheses".into())),
        }
    }
    if children.is_empty() {
        return Err(Error::Tree(format!("empty node `({label})`")));
    }
    Ok(ConstituencyTree { label, children })
}

/// Parses one tree per non-blank line.
pub fn parse_ptb_lines(text: &str) -> Result<Vec<ConstituencyTree>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_ptb_tree(l).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}
