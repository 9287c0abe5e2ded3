//! Two-style synthetic grammar with a deterministic parser.
//!
//! Style 0 places a formal adjective before the subject and a formal
//! adverb at the end of the clause:
//!
//! ```text
//! the <adj0> <noun> <verb> the <obj> in the <place> <adv0> .
//! ```
//!
//! Style 1 fronts an informal adverb followed by a comma:
//!
//! ```text
//! <adv1> , the <adj1> <noun> <verb> the <obj> in the <place> .
//! ```
//!
//! The two styles differ both lexically (disjoint marker lexicons) and
//! structurally (adverb position), while the content slots are shared.

use std::collections::HashMap;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use super::ptb::ConstituencyTree;
use super::sentence::{Sentence, Style};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    Word(&'static str),
    Adj,
    Adv,
    Noun,
    Verb,
    Obj,
    Place,
}

use Slot::*;

const TEMPLATE_0: [Slot; 11] = [
    Word("the"),
    Adj,
    Noun,
    Verb,
    Word("the"),
    Obj,
    Word("in"),
    Word("the"),
    Place,
    Adv,
    Word("."),
];

const HEADS_0: [Option<usize>; 11] = [
    Some(2),
    Some(2),
    Some(3),
    None,
    Some(5),
    Some(3),
    Some(8),
    Some(8),
    Some(3),
    Some(3),
    Some(3),
];

const TEMPLATE_1: [Slot; 12] = [
    Adv,
    Word(","),
    Word("the"),
    Adj,
    Noun,
    Verb,
    Word("the"),
    Obj,
    Word("in"),
    Word("the"),
    Place,
    Word("."),
];

const HEADS_1: [Option<usize>; 12] = [
    Some(5),
    Some(5),
    Some(4),
    Some(4),
    Some(5),
    None,
    Some(7),
    Some(5),
    Some(10),
    Some(10),
    Some(5),
    Some(5),
];

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|w| w.to_string()).collect()
}

/// Slot fillers of one generated sentence, as lexicon indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instance {
    pub style: Style,
    pub adj: usize,
    pub adv: usize,
    pub noun: usize,
    pub verb: usize,
    pub obj: usize,
    pub place: usize,
}

impl Instance {
    /// Ground-truth style transfer: markers swap lexicons index-for-index
    /// and the skeleton switches template. Content slots are untouched.
    pub fn flip(self) -> Self {
        Self {
            style: 1 - self.style,
            ..self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGrammar {
    pub adjectives: [Vec<String>; 2],
    pub adverbs: [Vec<String>; 2],
    pub nouns: Vec<String>,
    pub verbs: Vec<String>,
    pub places: Vec<String>,
}

impl Default for SyntheticGrammar {
    fn default() -> Self {
        Self {
            adjectives: [
                words(&[
                    "exquisite", "remarkable", "distinguished", "admirable", "splendid",
                    "magnificent", "elegant", "respectable", "courteous", "diligent",
                    "esteemed", "venerable",
                ]),
                words(&[
                    "cool", "awesome", "crazy", "cute", "weird", "chill", "sweet", "goofy",
                    "funky", "nifty", "dope", "comfy",
                ]),
            ],
            adverbs: [
                words(&[
                    "gracefully", "diligently", "courteously", "promptly", "respectfully",
                    "thoroughly", "carefully", "properly", "precisely", "sincerely",
                    "formally", "politely",
                ]),
                words(&[
                    "honestly", "basically", "literally", "totally", "seriously", "actually",
                    "lowkey", "super", "anyway", "whatever", "like", "yeah",
                ]),
            ],
            nouns: words(&[
                "cat", "dog", "teacher", "doctor", "farmer", "pilot", "artist", "student",
                "chef", "baker", "writer", "singer", "lawyer", "nurse", "driver", "painter",
            ]),
            verbs: words(&[
                "saw", "found", "painted", "visited", "cleaned", "carried", "opened",
                "watched", "fixed", "bought", "sold", "moved", "checked", "drew", "built",
                "washed",
            ]),
            places: words(&[
                "garden", "kitchen", "market", "library", "station", "village", "museum",
                "harbor",
            ]),
        }
    }
}

/// One labeled corpus item with its ground-truth transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticItem {
    pub sentence: Sentence,
    pub reference: Sentence,
}

impl SyntheticGrammar {
    fn template(style: Style) -> &'static [Slot] {
        if style == 0 {
            &TEMPLATE_0
        } else {
            &TEMPLATE_1
        }
    }

    fn heads(style: Style) -> Vec<Option<usize>> {
        if style == 0 {
            HEADS_0.to_vec()
        } else {
            HEADS_1.to_vec()
        }
    }

    fn lexicon(&self, slot: Slot, style: Style) -> &[String] {
        match slot {
            Adj => &self.adjectives[style],
            Adv => &self.adverbs[style],
            Noun | Obj => &self.nouns,
            Verb => &self.verbs,
            Place => &self.places,
            Word(_) => &[],
        }
    }

    fn fill(&self, inst: &Instance, slot: Slot) -> String {
        let idx = match slot {
            Word(w) => return w.to_string(),
            Adj => inst.adj,
            Adv => inst.adv,
            Noun => inst.noun,
            Verb => inst.verb,
            Obj => inst.obj,
            Place => inst.place,
        };
        self.lexicon(slot, inst.style)[idx].clone()
    }

    pub fn realize(&self, inst: &Instance) -> Vec<String> {
        Self::template(inst.style)
            .iter()
            .map(|&s| self.fill(inst, s))
            .collect()
    }

    fn tree(&self, inst: &Instance) -> ConstituencyTree {
        let pre = |tag: &str, w: String| ConstituencyTree::node(tag, vec![ConstituencyTree::leaf(w)]);
        let f = |slot| self.fill(inst, slot);
        let np_subj = ConstituencyTree::node(
            "NP",
            vec![pre("DT", "the".into()), pre("JJ", f(Adj)), pre("NN", f(Noun))],
        );
        let np_obj = ConstituencyTree::node("NP", vec![pre("DT", "the".into()), pre("NN", f(Obj))]);
        let pp = ConstituencyTree::node(
            "PP",
            vec![
                pre("IN", "in".into()),
                ConstituencyTree::node("NP", vec![pre("DT", "the".into()), pre("NN", f(Place))]),
            ],
        );
        let advp = ConstituencyTree::node("ADVP", vec![pre("RB", f(Adv))]);
        let period = pre(".", ".".into());
        if inst.style == 0 {
            let vp = ConstituencyTree::node("VP", vec![pre("VBD", f(Verb)), np_obj, pp, advp]);
            ConstituencyTree::node("S", vec![np_subj, vp, period])
        } else {
            let vp = ConstituencyTree::node("VP", vec![pre("VBD", f(Verb)), np_obj, pp]);
            ConstituencyTree::node("S", vec![advp, pre(",", ",".into()), np_subj, vp, period])
        }
    }

    /// Builds the fully annotated sentence for an instance.
    pub fn sentence(&self, inst: &Instance) -> Sentence {
        Sentence::new(self.realize(inst), inst.style)
            .and_then(|s| s.with_heads(Self::heads(inst.style)))
            .expect("templates carry valid heads")
            .with_tree(self.tree(inst))
    }

    /// Recovers the instance behind a token sequence.
    pub fn recognize(&self, tokens: &[String]) -> Result<Instance> {
        let unparseable = || Error::Unparseable(tokens.join(" "));
        'style: for style in 0..2 {
            let template = Self::template(style);
            if template.len() != tokens.len() {
                continue;
            }
            let mut inst = Instance {
                style,
                adj: 0,
                adv: 0,
                noun: 0,
                verb: 0,
                obj: 0,
                place: 0,
            };
            for (&slot, tok) in template.iter().zip(tokens) {
                if let Word(w) = slot {
                    if w != tok {
                        continue 'style;
                    }
                    continue;
                }
                let Some(idx) = self.lexicon(slot, style).iter().position(|w| w == tok) else {
                    continue 'style;
                };
                match slot {
                    Adj => inst.adj = idx,
                    Adv => inst.adv = idx,
                    Noun => inst.noun = idx,
                    Verb => inst.verb = idx,
                    Obj => inst.obj = idx,
                    Place => inst.place = idx,
                    Word(_) => unreachable!(),
                }
            }
            return Ok(inst);
        }
        Err(unparseable())
    }

    /// Rule-based parse of an in-grammar token sequence.
    pub fn toy_parse(&self, tokens: &[String]) -> Result<(Vec<Option<usize>>, ConstituencyTree)> {
        let inst = self.recognize(tokens)?;
        Ok((Self::heads(inst.style), self.tree(&inst)))
    }

    /// The style-flipped counterpart of an in-grammar sentence.
    pub fn flip(&self, tokens: &[String]) -> Result<Vec<String>> {
        Ok(self.realize(&self.recognize(tokens)?.flip()))
    }

    fn sample<R: Rng>(&self, style: Style, rng: &mut R) -> Instance {
        Instance {
            style,
            adj: rng.gen_range(0..self.adjectives[style].len()),
            adv: rng.gen_range(0..self.adverbs[style].len()),
            noun: rng.gen_range(0..self.nouns.len()),
            verb: rng.gen_range(0..self.verbs.len()),
            obj: rng.gen_range(0..self.nouns.len()),
            place: rng.gen_range(0..self.places.len()),
        }
    }

    /// Every word the grammar can produce, sorted.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .adjectives
            .iter()
            .chain(&self.adverbs)
            .flatten()
            .chain(&self.nouns)
            .chain(&self.verbs)
            .chain(&self.places)
            .cloned()
            .chain(["the", "in", ".", ","].map(String::from))
            .collect();
        v.sort();
        v.dedup();
        v
    }
}

/// Generates a style-balanced corpus; style 0 receives the extra item when
/// `count` is odd.
pub fn generate_synthetic(grammar: &SyntheticGrammar, count: usize, seed: u64) -> Result<Vec<SyntheticItem>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut styles: Vec<Style> = (0..count).map(|i| i % 2).collect();
    styles.shuffle(&mut rng);
    Ok(styles
        .into_iter()
        .map(|style| {
            let inst = grammar.sample(style, &mut rng);
            SyntheticItem {
                sentence: grammar.sentence(&inst),
                reference: grammar.sentence(&inst.flip()),
            }
        })
        .collect())
}

/// Per-word lexicon membership, used by tests and diagnostics.
pub fn marker_styles(grammar: &SyntheticGrammar) -> HashMap<String, Style> {
    let mut m = HashMap::new();
    for style in 0..2 {
        for w in grammar.adjectives[style].iter().chain(&grammar.adverbs[style]) {
            m.insert(w.clone(), style);
        }
    }
    m
}
