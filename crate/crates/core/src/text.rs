//! Token pre-processing: lowercasing, stopword removal, and stemming.
//!
//! Every component of the crate consumes already-processed tokens, so the
//! pipeline lives in one place. The default configuration lowercases,
//! removes words from the embedded stopword list, and applies the Porter
//! (1980) stemmer. An identity pipeline is available for data that was
//! already processed (e.g. files written by [`crate::corpus::save_corpus`]).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Stopwords removed by [`Preprocessor::standard`], one word per line.
const DEFAULT_STOPWORDS: &str = include_str!("stopwords.txt");

/// Stemming algorithm applied after stopword removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stemmer {
    /// Leave tokens untouched.
    None,
    /// Porter (1980) suffix-stripping stemmer.
    #[default]
    Porter,
}

/// Configurable token pipeline.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    lowercase: bool,
    stopwords: BTreeSet<String>,
    stemmer: Stemmer,
}

impl Preprocessor {
    /// Lowercase, default stopword list, Porter stemming.
    pub fn standard() -> Self {
        Preprocessor {
            lowercase: true,
            stopwords: DEFAULT_STOPWORDS
                .lines()
                .map(str::trim)
                .filter(|w| !w.is_empty())
                .map(str::to_string)
                .collect(),
            stemmer: Stemmer::Porter,
        }
    }

    /// Tokenize only; no case folding, stopword removal, or stemming.
    ///
    /// Use for corpora whose tokens were processed ahead of time.
    pub fn identity() -> Self {
        Preprocessor {
            lowercase: false,
            stopwords: BTreeSet::new(),
            stemmer: Stemmer::None,
        }
    }

    /// Replace the stopword list.
    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.stopwords = words.into_iter().map(Into::into).collect();
        self
    }

    /// Replace the stemmer.
    pub fn with_stemmer(mut self, stemmer: Stemmer) -> Self {
        self.stemmer = stemmer;
        self
    }

    /// Run the full pipeline over raw text.
    pub fn process(&self, text: &str) -> Vec<String> {
        tokenize(text)
            .into_iter()
            .map(|tok| {
                if self.lowercase {
                    tok.to_lowercase()
                } else {
                    tok
                }
            })
            .filter(|tok| !self.stopwords.contains(tok.as_str()))
            .map(|tok| match self.stemmer {
                Stemmer::None => tok,
                Stemmer::Porter => porter_stem(&tok),
            })
            .collect()
    }
}

/// Split text into maximal alphanumeric runs.
fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

// ---------------------------------------------------------------------------
// Porter stemmer
// ---------------------------------------------------------------------------

/// Stem a single lowercase word with the Porter (1980) algorithm.
///
/// Words shorter than three letters and words containing non-ASCII bytes are
/// returned unchanged.
pub fn porter_stem(word: &str) -> String {
    if word.len() < 3 || !word.is_ascii() {
        return word.to_string();
    }
    let mut w: Vec<u8> = word.bytes().collect();
    step_1a(&mut w);
    step_1b(&mut w);
    step_1c(&mut w);
    step_2(&mut w);
    step_3(&mut w);
    step_4(&mut w);
    step_5a(&mut w);
    step_5b(&mut w);
    String::from_utf8(w).expect("ascii input stays ascii")
}

fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

/// Porter's measure m: the number of vowel-consonant alternations in the stem.
fn measure(w: &[u8]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..w.len() {
        if is_consonant(w, i) {
            if prev_vowel {
                m += 1;
            }
            prev_vowel = false;
        } else {
            prev_vowel = true;
        }
    }
    m
}

fn has_vowel(w: &[u8]) -> bool {
    (0..w.len()).any(|i| !is_consonant(w, i))
}

fn ends_double_consonant(w: &[u8]) -> bool {
    w.len() >= 2 && w[w.len() - 1] == w[w.len() - 2] && is_consonant(w, w.len() - 1)
}

/// *o condition: stem ends consonant-vowel-consonant where the final
/// consonant is not w, x or y.
fn ends_cvc(w: &[u8]) -> bool {
    if w.len() < 3 {
        return false;
    }
    let n = w.len();
    is_consonant(w, n - 3)
        && !is_consonant(w, n - 2)
        && is_consonant(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

fn ends_with(w: &[u8], suffix: &str) -> bool {
    w.len() >= suffix.len() && &w[w.len() - suffix.len()..] == suffix.as_bytes()
}

fn replace_suffix(w: &mut Vec<u8>, suffix: &str, replacement: &str) {
    w.truncate(w.len() - suffix.len());
    w.extend_from_slice(replacement.as_bytes());
}

/// Find the longest matching suffix in `rules`; if `condition` holds on the
/// remaining stem, apply the replacement. No fallthrough to shorter suffixes.
fn apply_rules(w: &mut Vec<u8>, rules: &[(&str, &str)], condition: impl Fn(&[u8]) -> bool) -> bool {
    let best = rules
        .iter()
        .filter(|(suf, _)| ends_with(w, suf))
        .max_by_key(|(suf, _)| suf.len());
    if let Some(&(suf, rep)) = best {
        if condition(&w[..w.len() - suf.len()]) {
            replace_suffix(w, suf, rep);
            return true;
        }
    }
    false
}

fn step_1a(w: &mut Vec<u8>) {
    apply_rules(
        w,
        &[("sses", "ss"), ("ies", "i"), ("ss", "ss"), ("s", "")],
        |_| true,
    );
}

fn step_1b(w: &mut Vec<u8>) {
    if ends_with(w, "eed") {
        if measure(&w[..w.len() - 3]) > 0 {
            replace_suffix(w, "eed", "ee");
        }
        return;
    }
    let stripped = apply_rules(w, &[("ed", ""), ("ing", "")], has_vowel);
    if !stripped {
        return;
    }
    if ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz") {
        w.push(b'e');
    } else if ends_double_consonant(w) && !matches!(w[w.len() - 1], b'l' | b's' | b'z') {
        w.pop();
    } else if measure(w) == 1 && ends_cvc(w) {
        w.push(b'e');
    }
}

fn step_1c(w: &mut [u8]) {
    if ends_with(w, "y") && has_vowel(&w[..w.len() - 1]) {
        let n = w.len();
        w[n - 1] = b'i';
    }
}

fn step_2(w: &mut Vec<u8>) {
    apply_rules(
        w,
        &[
            ("ational", "ate"),
            ("tional", "tion"),
            ("enci", "ence"),
            ("anci", "ance"),
            ("izer", "ize"),
            ("abli", "able"),
            ("alli", "al"),
            ("entli", "ent"),
            ("eli", "e"),
            ("ousli", "ous"),
            ("ization", "ize"),
            ("ation", "ate"),
            ("ator", "ate"),
            ("alism", "al"),
            ("iveness", "ive"),
            ("fulness", "ful"),
            ("ousness", "ous"),
            ("aliti", "al"),
            ("iviti", "ive"),
            ("biliti", "ble"),
        ],
        |stem| measure(stem) > 0,
    );
}

fn step_3(w: &mut Vec<u8>) {
    apply_rules(
        w,
        &[
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ful", ""),
            ("ness", ""),
        ],
        |stem| measure(stem) > 0,
    );
}

fn step_4(w: &mut Vec<u8>) {
    const SUFFIXES: &[&str] = &[
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion",
        "ou", "ism", "ate", "iti", "ous", "ive", "ize",
    ];
    let best = SUFFIXES
        .iter()
        .filter(|suf| ends_with(w, suf))
        .max_by_key(|suf| suf.len());
    if let Some(&suf) = best {
        let stem = &w[..w.len() - suf.len()];
        let ion_ok = suf != "ion" || matches!(stem.last(), Some(b's') | Some(b't'));
        if measure(stem) > 1 && ion_ok {
            replace_suffix(w, suf, "");
        }
    }
}

fn step_5a(w: &mut Vec<u8>) {
    if !ends_with(w, "e") {
        return;
    }
    let stem = &w[..w.len() - 1];
    let m = measure(stem);
    if m > 1 || (m == 1 && !ends_cvc(stem)) {
        w.pop();
    }
}

fn step_5b(w: &mut Vec<u8>) {
    if measure(w) > 1 && ends_double_consonant(w) && w[w.len() - 1] == b'l' {
        w.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_classic_pairs() {
        let pairs = [
            ("caresses", "caress"),
            ("ponies", "poni"),
            ("ties", "ti"),
            ("caress", "caress"),
            ("cats", "cat"),
            ("feed", "feed"),
            ("agreed", "agre"),
            ("plastered", "plaster"),
            ("bled", "bled"),
            ("motoring", "motor"),
            ("sing", "sing"),
            ("hopping", "hop"),
            ("falling", "fall"),
            ("filing", "file"),
            ("happy", "happi"),
            ("sky", "sky"),
            ("relational", "relat"),
            ("conditional", "condit"),
            ("generalizations", "gener"),
            ("oscillators", "oscil"),
            ("sized", "size"),
            ("troubled", "troubl"),
            ("probate", "probat"),
            ("controlling", "control"),
        ];
        for (input, expected) in pairs {
            assert_eq!(porter_stem(input), expected, "stem of {input:?}");
        }
    }

    #[test]
    fn short_words_untouched() {
        assert_eq!(porter_stem("as"), "as");
        assert_eq!(porter_stem("is"), "is");
    }

    #[test]
    fn standard_pipeline_drops_stopwords_and_stems() {
        let pre = Preprocessor::standard();
        let toks = pre.process("The cats are HOPPING over the, lazy walls!");
        assert_eq!(toks, vec!["cat", "hop", "lazi", "wall"]);
    }

    #[test]
    fn identity_pipeline_only_tokenizes() {
        let pre = Preprocessor::identity();
        assert_eq!(pre.process("Cats hopping"), vec!["Cats", "hopping"]);
    }
}
