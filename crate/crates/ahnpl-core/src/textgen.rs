//! Textual hard-negative generation: POS tagging, noun swaps, and same-POS
//! substitutions.
//!
//! Tagging and substitution run off a plain lexicon so the pipeline has no
//! model dependencies; the operations only assume "a word has one tag" and
//! "each open tag has a candidate pool", so a model-backed tagger or filler
//! can be swapped in behind the same functions.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Det,
    Adp,
    Other,
}

impl PosTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Adj => "ADJ",
            PosTag::Det => "DET",
            PosTag::Adp => "ADP",
            PosTag::Other => "OTHER",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "NOUN" => Ok(PosTag::Noun),
            "VERB" => Ok(PosTag::Verb),
            "ADJ" => Ok(PosTag::Adj),
            "DET" => Ok(PosTag::Det),
            "ADP" => Ok(PosTag::Adp),
            "OTHER" => Ok(PosTag::Other),
            other => Err(Error::Config(format!("unknown POS tag {other:?}"))),
        }
    }

    /// Tags eligible for masking and substitution.
    pub fn is_maskable(self) -> bool {
        matches!(self, PosTag::Noun | PosTag::Verb | PosTag::Adj)
    }
}

/// A tokenized caption with parallel POS tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Caption {
    pub id: String,
    pub tokens: Vec<String>,
    pub tags: Vec<PosTag>,
}

impl Caption {
    pub fn new(id: impl Into<String>, tokens: Vec<String>, tags: Vec<PosTag>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("caption tokens"));
        }
        if tokens.len() != tags.len() {
            return Err(Error::DimMismatch {
                left: tokens.len(),
                right: tags.len(),
            });
        }
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::EmptyInput("caption token"));
        }
        Ok(Self {
            id: id.into(),
            tokens,
            tags,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn positions_with(&self, pred: impl Fn(PosTag) -> bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| pred(self.tags[i])).collect()
    }
}

/// Word → tag map plus per-tag candidate pools.
#[derive(Debug, Clone)]
pub struct PosLexicon {
    word_to_tag: BTreeMap<String, PosTag>,
    tag_to_words: BTreeMap<PosTag, Vec<String>>,
}

impl PosLexicon {
    /// Builds a lexicon from `(word, tag)` entries. Every word must map to
    /// exactly one tag, and NOUN/VERB/ADJ pools must be nonempty.
    pub fn from_entries(entries: impl IntoIterator<Item = (String, PosTag)>) -> Result<Self> {
        let mut word_to_tag = BTreeMap::new();
        let mut tag_to_words: BTreeMap<PosTag, Vec<String>> = BTreeMap::new();
        for (word, tag) in entries {
            if word.is_empty() {
                return Err(Error::EmptyInput("lexicon word"));
            }
            match word_to_tag.insert(word.clone(), tag) {
                None => tag_to_words.entry(tag).or_default().push(word),
                Some(prev) if prev == tag => {}
                Some(prev) => {
                    return Err(Error::Config(format!(
                        "word {word:?} tagged both {} and {}",
                        prev.as_str(),
                        tag.as_str()
                    )))
                }
            }
        }
        for tag in [PosTag::Noun, PosTag::Verb, PosTag::Adj] {
            if tag_to_words.get(&tag).is_none_or(Vec::is_empty) {
                return Err(Error::Config(format!(
                    "lexicon has no {} entries",
                    tag.as_str()
                )));
            }
        }
        // Candidate pools stay sorted so draws are reproducible.
        for words in tag_to_words.values_mut() {
            words.sort();
        }
        Ok(Self {
            word_to_tag,
            tag_to_words,
        })
    }

    pub fn tag_of(&self, word: &str) -> Option<PosTag> {
        self.word_to_tag.get(word).copied()
    }

    pub fn candidates(&self, tag: PosTag) -> &[String] {
        self.tag_to_words.get(&tag).map_or(&[], Vec::as_slice)
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, PosTag)> {
        self.word_to_tag.iter().map(|(w, t)| (w.as_str(), *t))
    }

    pub fn len(&self) -> usize {
        self.word_to_tag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_to_tag.is_empty()
    }
}

/// The two textual hard-negative kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NegativeKind {
    NounSwap,
    Substitution,
}

impl NegativeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NegativeKind::NounSwap => "NOUN_SWAP",
            NegativeKind::Substitution => "SUBSTITUTION",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "NOUN_SWAP" => Ok(NegativeKind::NounSwap),
            "SUBSTITUTION" => Ok(NegativeKind::Substitution),
            other => Err(Error::Config(format!("unknown negative kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TextualNegative {
    pub caption: Caption,
    pub kind: NegativeKind,
    pub slot: usize,
}

/// All textual hard negatives generated for one source caption, slot-indexed
/// in generation order.
#[derive(Debug, Clone)]
pub struct TextualNegativeSet {
    pub source_id: String,
    pub negatives: Vec<TextualNegative>,
}

impl TextualNegativeSet {
    pub fn len(&self) -> usize {
        self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.negatives.is_empty()
    }
}

/// Tags each token by lexicon lookup; unknown words become OTHER.
pub fn pos_tag(id: &str, tokens: &[String], lexicon: &PosLexicon) -> Result<Caption> {
    if tokens.is_empty() {
        return Err(Error::EmptyInput("caption tokens"));
    }
    let tags = tokens
        .iter()
        .map(|t| lexicon.tag_of(t).unwrap_or(PosTag::Other))
        .collect();
    Caption::new(id, tokens.to_vec(), tags)
}

/// Exchanges two noun positions holding distinct words; everything else is
/// untouched (both positions stay NOUN).
pub fn swap_nouns(caption: &Caption, rng: &mut impl Rng) -> Result<Caption> {
    let nouns = caption.positions_with(|t| t == PosTag::Noun);
    let mut pairs = Vec::new();
    for (idx, &i) in nouns.iter().enumerate() {
        for &j in &nouns[idx + 1..] {
            if caption.tokens[i] != caption.tokens[j] {
                pairs.push((i, j));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::NotApplicable("fewer than two distinct nouns"));
    }
    let (i, j) = pairs[rng.random_range(0..pairs.len())];
    let mut out = caption.clone();
    out.tokens.swap(i, j);
    Ok(out)
}

/// Replaces one NOUN/VERB/ADJ token with a different lexicon word of the
/// same POS; length and every other token are preserved.
pub fn substitute_masked(
    caption: &Caption,
    lexicon: &PosLexicon,
    rng: &mut impl Rng,
) -> Result<Caption> {
    let viable: Vec<usize> = caption
        .positions_with(PosTag::is_maskable)
        .into_iter()
        .filter(|&i| {
            lexicon
                .candidates(caption.tags[i])
                .iter()
                .any(|w| *w != caption.tokens[i])
        })
        .collect();
    if viable.is_empty() {
        return Err(Error::NotApplicable("no substitutable token"));
    }
    let pos = viable[rng.random_range(0..viable.len())];
    let options: Vec<&String> = lexicon
        .candidates(caption.tags[pos])
        .iter()
        .filter(|w| **w != caption.tokens[pos])
        .collect();
    let replacement = options[rng.random_range(0..options.len())].clone();
    let mut out = caption.clone();
    out.tokens[pos] = replacement;
    Ok(out)
}

/// Generates up to `k_per_kind` negatives per kind, deduplicated by token
/// sequence, with slot indices assigned in generation order. Returns an
/// empty set (not an error) when neither kind applies.
pub fn generate_negative_set(
    caption: &Caption,
    k_per_kind: usize,
    lexicon: &PosLexicon,
    rng: &mut impl Rng,
) -> Result<TextualNegativeSet> {
    if k_per_kind == 0 {
        return Err(Error::Config("k_per_kind must be ≥ 1".into()));
    }
    let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
    seen.insert(caption.tokens.clone());
    let mut negatives = Vec::new();
    for kind in [NegativeKind::NounSwap, NegativeKind::Substitution] {
        collect_kind(caption, kind, k_per_kind, lexicon, &mut seen, &mut negatives, rng)?;
    }
    Ok(TextualNegativeSet {
        source_id: caption.id.clone(),
        negatives,
    })
}

fn collect_kind<R: Rng>(
    caption: &Caption,
    kind: NegativeKind,
    k_per_kind: usize,
    lexicon: &PosLexicon,
    seen: &mut BTreeSet<Vec<String>>,
    negatives: &mut Vec<TextualNegative>,
    rng: &mut R,
) -> Result<()> {
    let mut produced = 0;
    // A bounded attempt budget; duplicate draws are common when the caption
    // admits few distinct edits.
    for _ in 0..4 * k_per_kind {
        if produced == k_per_kind {
            break;
        }
        let result = match kind {
            NegativeKind::NounSwap => swap_nouns(caption, rng),
            NegativeKind::Substitution => substitute_masked(caption, lexicon, rng),
        };
        match result {
            Ok(neg) => {
                if seen.insert(neg.tokens.clone()) {
                    negatives.push(TextualNegative {
                        caption: neg,
                        kind,
                        slot: negatives.len(),
                    });
                    produced += 1;
                }
            }
            Err(Error::NotApplicable(_)) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn lexicon() -> PosLexicon {
        PosLexicon::from_entries(
            [
                ("boy", PosTag::Noun),
                ("hat", PosTag::Noun),
                ("beach", PosTag::Noun),
                ("cat", PosTag::Noun),
                ("dog", PosTag::Noun),
                ("runs", PosTag::Verb),
                ("playing", PosTag::Verb),
                ("wearing", PosTag::Verb),
                ("red", PosTag::Adj),
                ("blue", PosTag::Adj),
                ("a", PosTag::Det),
                ("on", PosTag::Adp),
                ("the", PosTag::Det),
                ("is", PosTag::Other),
            ]
            .map(|(w, t)| (w.to_string(), t)),
        )
        .unwrap()
    }

    fn caption(id: &str, text: &str, lex: &PosLexicon) -> Caption {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        pos_tag(id, &tokens, lex).unwrap()
    }

    #[test]
    fn tagging_uses_lexicon_and_defaults_to_other() {
        let lex = lexicon();
        let c = caption("t", "a boy runs", &lex);
        assert_eq!(c.tags, vec![PosTag::Det, PosTag::Noun, PosTag::Verb]);
        let unknown = pos_tag("u", &["xyzzy".to_string()], &lex).unwrap();
        assert_eq!(unknown.tags, vec![PosTag::Other]);
        assert!(pos_tag("e", &[], &lex).is_err());
    }

    #[test]
    fn lexicon_rejects_conflicting_tags() {
        let err = PosLexicon::from_entries(
            [
                ("run", PosTag::Noun),
                ("run", PosTag::Verb),
                ("red", PosTag::Adj),
            ]
            .map(|(w, t)| (w.to_string(), t)),
        );
        assert!(err.is_err());
    }

    #[test]
    fn noun_swap_exchanges_exactly_two_positions() {
        let lex = lexicon();
        let c = caption("s", "a boy wearing a red hat is playing on the beach", &lex);
        let mut rng = substream(11, "test");
        let swapped = swap_nouns(&c, &mut rng).unwrap();
        let diff: Vec<usize> = (0..c.len())
            .filter(|&i| c.tokens[i] != swapped.tokens[i])
            .collect();
        assert_eq!(diff.len(), 2);
        let mut orig = c.tokens.clone();
        let mut new = swapped.tokens.clone();
        orig.sort();
        new.sort();
        assert_eq!(orig, new, "token multiset must be unchanged");
        for &i in &diff {
            assert_eq!(swapped.tags[i], PosTag::Noun);
        }
    }

    #[test]
    fn noun_swap_can_produce_the_reference_swap() {
        // With nouns {boy, hat, beach} one of the three pairs is (boy, hat).
        let lex = lexicon();
        let c = caption("s", "a boy wearing a red hat is playing on the beach", &lex);
        let expected = "a hat wearing a red boy is playing on the beach";
        let mut found = false;
        for seed in 0..32 {
            let mut rng = substream(seed, "swap");
            let got = swap_nouns(&c, &mut rng).unwrap().tokens.join(" ");
            if got == expected {
                found = true;
                break;
            }
        }
        assert!(found, "the (boy, hat) swap must be reachable");
    }

    #[test]
    fn noun_swap_requires_two_distinct_nouns() {
        let lex = lexicon();
        let one = caption("o", "a boy runs", &lex);
        let mut rng = substream(1, "test");
        assert!(matches!(
            swap_nouns(&one, &mut rng),
            Err(Error::NotApplicable(_))
        ));
        // Two nouns but identical words.
        let dup = caption("d", "a boy wearing a boy", &lex);
        assert!(matches!(
            swap_nouns(&dup, &mut rng),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn substitution_changes_one_position_same_pos() {
        let lex = lexicon();
        let c = caption("s", "red hat", &lex);
        let mut rng = substream(3, "test");
        let sub = substitute_masked(&c, &lex, &mut rng).unwrap();
        assert_eq!(sub.len(), c.len());
        let diff: Vec<usize> = (0..c.len())
            .filter(|&i| c.tokens[i] != sub.tokens[i])
            .collect();
        assert_eq!(diff.len(), 1);
        let i = diff[0];
        assert_eq!(lex.tag_of(&sub.tokens[i]), Some(c.tags[i]));
    }

    #[test]
    fn substitution_with_forced_single_alternative() {
        // ADJ pool is {red, blue}; masking "red" can only produce "blue".
        let lex = PosLexicon::from_entries(
            [
                ("red", PosTag::Adj),
                ("blue", PosTag::Adj),
                ("hat", PosTag::Noun),
                ("runs", PosTag::Verb),
            ]
            .map(|(w, t)| (w.to_string(), t)),
        )
        .unwrap();
        let c = Caption::new(
            "s",
            vec!["red".into(), "xyzzy".into()],
            vec![PosTag::Adj, PosTag::Other],
        )
        .unwrap();
        let mut rng = substream(5, "test");
        let sub = substitute_masked(&c, &lex, &mut rng).unwrap();
        assert_eq!(sub.tokens, vec!["blue".to_string(), "xyzzy".to_string()]);
    }

    #[test]
    fn substitution_not_applicable_when_no_alternative() {
        // Every maskable token's pool contains only the token itself.
        let lex = PosLexicon::from_entries(
            [
                ("hat", PosTag::Noun),
                ("runs", PosTag::Verb),
                ("red", PosTag::Adj),
            ]
            .map(|(w, t)| (w.to_string(), t)),
        )
        .unwrap();
        let c = caption("s", "a hat runs", &lex);
        let mut rng = substream(7, "test");
        assert!(matches!(
            substitute_masked(&c, &lex, &mut rng),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn negative_set_covers_both_kinds() {
        let lex = lexicon();
        let c = caption("s", "a red boy on the beach", &lex);
        let mut rng = substream(13, "negatives");
        let set = generate_negative_set(&c, 1, &lex, &mut rng).unwrap();
        assert_eq!(set.len(), 2);
        let kinds: Vec<NegativeKind> = set.negatives.iter().map(|n| n.kind).collect();
        assert_eq!(kinds, vec![NegativeKind::NounSwap, NegativeKind::Substitution]);
        let slots: Vec<usize> = set.negatives.iter().map(|n| n.slot).collect();
        assert_eq!(slots, vec![0, 1]);
    }

    #[test]
    fn negative_set_is_deterministic_under_seed() {
        let lex = lexicon();
        let c = caption("s", "a boy wearing a red hat is playing on the beach", &lex);
        let run = |seed| {
            let mut rng = substream(seed, "negatives");
            generate_negative_set(&c, 2, &lex, &mut rng)
                .unwrap()
                .negatives
                .iter()
                .map(|n| (n.caption.tokens.clone(), n.kind, n.slot))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(42), run(42));
    }

    #[test]
    fn all_other_caption_yields_empty_set() {
        let lex = lexicon();
        let c = pos_tag(
            "s",
            &["a".to_string(), "a".to_string(), "a".to_string()],
            &lex,
        )
        .unwrap();
        // "a" is DET: no nouns to swap, nothing maskable.
        let mut rng = substream(17, "negatives");
        let set = generate_negative_set(&c, 2, &lex, &mut rng).unwrap();
        assert!(set.is_empty());
    }
}
