//! JSON Lines corpus files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ptb::{parse_ptb_tree, ConstituencyTree};
use super::sentence::{tokenize, Sentence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub text: String,
    pub style: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dep_heads: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ctree: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceRecord {
    pub refs: Vec<String>,
}

impl CorpusRecord {
    pub fn from_sentence(s: &Sentence) -> Self {
        Self {
            text: s.text(),
            style: s.style,
            dep_heads: s.dep_heads.as_ref().map(|h| {
                h.iter()
                    .map(|h| h.map_or(-1, |x| x as i64))
                    .collect()
            }),
            ctree: s.ctree.as_ref().map(ToString::to_string),
        }
    }

    pub fn into_sentence(self) -> Result<Sentence> {
        let mut s = Sentence::new(tokenize(&self.text), self.style)?;
        if let Some(h) = self.dep_heads {
            let heads = h
                .into_iter()
                .map(|x| match x {
                    -1 => Ok(None),
                    x if x >= 0 => Ok(Some(x as usize)),
                    x => Err(Error::DepHeads(format!("negative head {x}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            s = s.with_heads(heads)?;
        }
        if let Some(t) = self.ctree {
            s = s.with_tree(parse_ptb_tree(&t)?);
        }
        Ok(s)
    }
}

fn parse_lines<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn parse_corpus(text: &str) -> Result<Vec<Sentence>> {
    parse_lines::<CorpusRecord>(text)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.into_sentence().map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn corpus_to_jsonl(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str(&serde_json::to_string(&CorpusRecord::from_sentence(s)).expect("plain record"));
        out.push('\n');
    }
    out
}

pub fn parse_references(text: &str) -> Result<Vec<Vec<Vec<String>>>> {
    Ok(parse_lines::<ReferenceRecord>(text)?
        .into_iter()
        .map(|r| r.refs.iter().map(|t| tokenize(t)).collect())
        .collect())
}

pub fn references_to_jsonl(refs: &[Vec<String>]) -> String {
    let mut out = String::new();
    for r in refs {
        out.push_str(&serde_json::to_string(&ReferenceRecord { refs: r.clone() }).expect("plain record"));
        out.push('\n');
    }
    out
}

pub fn trees_to_lines(trees: &[ConstituencyTree]) -> String {
    trees.iter().map(|t| format!("{t}\n")).collect()
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_corpus(path: &Path) -> Result<Vec<Sentence>> {
    parse_corpus(&read_text(path)?)
}
