use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use super::ptb::ConstituencyTree;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_LEN: usize = 64;

/// Style label. Only two styles are supported.
pub type Style = usize;

pub fn opposite(style: Style) -> Style {
    1 - style
}

/// Lowercased whitespace tokenization.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub style: Style,
    /// Head index per token, `None` for the root.
    pub dep_heads: Option<Vec<Option<usize>>>,
    pub ctree: Option<ConstituencyTree>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>, style: Style) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        if style > 1 {
            return Err(Error::Label {
                label: style,
                classes: 2,
            });
        }
        Ok(Self {
            tokens,
            style,
            dep_heads: None,
            ctree: None,
        })
    }

    pub fn from_text(text: &str, style: Style) -> Result<Self> {
        Self::new(tokenize(text), style)
    }

    pub fn with_heads(mut self, heads: Vec<Option<usize>>) -> Result<Self> {
        validate_heads(&heads)?;
        if heads.len() != self.tokens.len() {
            return Err(Error::DepHeads(format!(
                "{} heads for {} tokens",
                heads.len(),
                self.tokens.len()
            )));
        }
        self.dep_heads = Some(heads);
        Ok(self)
    }

    pub fn with_tree(mut self, tree: ConstituencyTree) -> Self {
        self.ctree = Some(tree);
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Checks the length bound and, when present, the head structure.
    pub fn validate(&self, max_len: usize) -> Result<()> {
        if self.tokens.is_empty() || self.tokens.len() > max_len {
            return Err(Error::InvalidArgument(format!(
                "sentence length {} outside [1, {max_len}]",
                self.tokens.len()
            )));
        }
        if let Some(h) = &self.dep_heads {
            if h.len() != self.tokens.len() {
                return Err(Error::DepHeads(format!(
                    "{} heads for {} tokens",
                    h.len(),
                    self.tokens.len()
                )));
            }
            validate_heads(h)?;
        }
        Ok(())
    }
}

/// A head list is valid when it has exactly one root, every other entry
/// points at a different in-range token, and following heads from any
/// token reaches the root.
pub fn validate_heads(heads: &[Option<usize>]) -> Result<()> {
    let n = heads.len();
    if n == 0 {
        return Err(Error::DepHeads("empty head list".into()));
    }
    let roots = heads.iter().filter(|h| h.is_none()).count();
    if roots != 1 {
        return Err(Error::DepHeads(format!("expected one root, found {roots}")));
    }
    for (i, h) in heads.iter().enumerate() {
        if let Some(h) = *h {
            if h >= n {
                return Err(Error::DepHeads(format!(
                    "head {h} of token {i} out of range for {n} tokens"
                )));
            }
            if h == i {
                return Err(Error::DepHeads(format!("token {i} heads itself")));
            }
        }
    }
    for start in 0..n {
        let mut cur = start;
        let mut steps = 0;
        while let Some(h) = heads[cur] {
            cur = h;
            steps += 1;
            if steps > n {
                return Err(Error::DepHeads(format!("cycle through token {start}")));
            }
        }
    }
    Ok(())
}

/// Shuffles the tokens with a non-identity permutation, dropping any
/// structure annotations.
pub fn permute_tokens(s: &Sentence, seed: u64) -> Result<Sentence> {
    let n = s.tokens.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "cannot permute a single-token sentence".into(),
        ));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    loop {
        order.shuffle(&mut rng);
        if order.iter().enumerate().any(|(i, &o)| i != o) {
            break;
        }
    }
    Ok(Sentence {
        tokens: order.iter().map(|&i| s.tokens[i].clone()).collect(),
        style: s.style,
        dep_heads: None,
        ctree: None,
    })
}
