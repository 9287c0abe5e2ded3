//! Sentences, dependency structure, constituency trees, and the synthetic
//! two-style grammar.

mod adjacency;
mod conllu;
pub mod corpus;
mod grammar;
mod ptb;
mod sentence;

pub use adjacency::{build_adjacency, AdjacencyMatrix, Orientation};
pub use conllu::parse_conllu;
pub use grammar::{generate_synthetic, marker_styles, Instance, SyntheticGrammar, SyntheticItem};
pub use ptb::{parse_ptb_lines, parse_ptb_tree, ConstituencyTree};
pub use sentence::{
    opposite, permute_tokens, tokenize, validate_heads, Sentence, Style, DEFAULT_MAX_LEN,
};

/// Adjacency for a token sequence: gold heads when present, otherwise the
/// grammar parse, otherwise self-loops only.
pub fn adjacency_for(
    tokens: &[String],
    heads: Option<&[Option<usize>]>,
    grammar: &SyntheticGrammar,
    orientation: Orientation,
) -> AdjacencyMatrix {
    let parsed;
    let heads = match heads {
        Some(h) => Some(h),
        None => {
            parsed = grammar.toy_parse(tokens).ok().map(|(h, _)| h);
            parsed.as_deref()
        }
    };
    heads
        .and_then(|h| AdjacencyMatrix::from_heads(h, orientation).ok())
        .filter(|a| a.n() == tokens.len())
        .unwrap_or_else(|| AdjacencyMatrix::identity(tokens.len()))
}

/// Constituency tree from the grammar, or a flat tree when unparseable.
pub fn tree_for(tokens: &[String], grammar: &SyntheticGrammar) -> ConstituencyTree {
    grammar
        .toy_parse(tokens)
        .map(|(_, t)| t)
        .unwrap_or_else(|_| ConstituencyTree::flat(tokens))
}
