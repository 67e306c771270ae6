//! Orthographic words as grapheme-token sequences.
//!
//! A [`Word`] is a non-empty sequence of grapheme tokens drawn from a
//! [`GraphemeInventory`]. Digraphs (`ng`, `wh`) and macron vowels are single
//! tokens, so boundary sites always fall between phonemes. Site `i` (1-based)
//! sits between token `i` and token `i + 1`.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Class of a grapheme within an inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphemeClass {
    Consonant,
    ShortVowel,
    LongVowel,
}

/// Consonants, short vowels and long vowels of an orthography.
///
/// Tokenization is greedy longest-match. That is only unambiguous when no
/// multi-character grapheme can also be read as a valid sequence of shorter
/// graphemes followed by a valid continuation; the Māori inventory satisfies
/// this because `g` alone is not a grapheme and `w` is never followed by `h`
/// in a well-formed (C)V string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphemeInventory {
    consonants: Vec<String>,
    short_vowels: Vec<String>,
    long_vowels: Vec<String>,
    #[serde(skip)]
    max_len: usize,
}

impl Default for GraphemeInventory {
    fn default() -> Self {
        Self::maori()
    }
}

impl GraphemeInventory {
    /// Ten consonants, five short and five long vowels.
    pub fn maori() -> Self {
        let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        Self::new(
            s(&["p", "t", "k", "m", "n", "ng", "w", "r", "wh", "h"]),
            s(&["a", "e", "i", "o", "u"]),
            s(&["ā", "ē", "ī", "ō", "ū"]),
        )
        .expect("built-in inventory is valid")
    }

    /// Builds an inventory. `long_vowels[i]` is the long counterpart of
    /// `short_vowels[i]`, so the two lists must have equal length.
    pub fn new(
        consonants: Vec<String>,
        short_vowels: Vec<String>,
        long_vowels: Vec<String>,
    ) -> Result<Self> {
        if long_vowels.len() != short_vowels.len() {
            return Err(Error::InvalidInventory(format!(
                "{} long vowels for {} short vowels",
                long_vowels.len(),
                short_vowels.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for g in consonants.iter().chain(&short_vowels).chain(&long_vowels) {
            let g = normalize(g);
            if g.is_empty() {
                return Err(Error::InvalidInventory("empty grapheme".into()));
            }
            if !seen.insert(g.clone()) {
                return Err(Error::InvalidInventory(format!("duplicate grapheme {g:?}")));
            }
        }
        let norm = |v: Vec<String>| v.iter().map(|g| normalize(g)).collect::<Vec<_>>();
        let mut inv = Self {
            consonants: norm(consonants),
            short_vowels: norm(short_vowels),
            long_vowels: norm(long_vowels),
            max_len: 0,
        };
        inv.max_len = inv.all().map(|g| g.chars().count()).max().unwrap_or(0);
        Ok(inv)
    }

    pub fn consonants(&self) -> &[String] {
        &self.consonants
    }

    pub fn short_vowels(&self) -> &[String] {
        &self.short_vowels
    }

    pub fn long_vowels(&self) -> &[String] {
        &self.long_vowels
    }

    /// Short vowels followed by long vowels.
    pub fn vowels(&self) -> impl Iterator<Item = &String> {
        self.short_vowels.iter().chain(&self.long_vowels)
    }

    /// Every grapheme: consonants, short vowels, long vowels.
    pub fn all(&self) -> impl Iterator<Item = &String> {
        self.consonants.iter().chain(self.vowels())
    }

    pub fn len(&self) -> usize {
        self.consonants.len() + self.short_vowels.len() + self.long_vowels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_of(&self, grapheme: &str) -> Option<GraphemeClass> {
        if self.consonants.iter().any(|g| g == grapheme) {
            Some(GraphemeClass::Consonant)
        } else if self.short_vowels.iter().any(|g| g == grapheme) {
            Some(GraphemeClass::ShortVowel)
        } else if self.long_vowels.iter().any(|g| g == grapheme) {
            Some(GraphemeClass::LongVowel)
        } else {
            None
        }
    }

    pub fn is_vowel(&self, grapheme: &str) -> bool {
        matches!(
            self.class_of(grapheme),
            Some(GraphemeClass::ShortVowel | GraphemeClass::LongVowel)
        )
    }

    fn max_grapheme_chars(&self) -> usize {
        if self.max_len == 0 {
            self.all().map(|g| g.chars().count()).max().unwrap_or(0)
        } else {
            self.max_len
        }
    }

    /// Splits `surface` into grapheme tokens by greedy longest match.
    ///
    /// The surface is NFC-normalized and lowercased first. `position` in
    /// [`Error::UnknownGrapheme`] is a character offset into the normalized
    /// surface.
    pub fn tokenize(&self, surface: &str) -> Result<Word> {
        let surface = normalize(surface);
        if surface.is_empty() {
            return Err(Error::EmptyWord);
        }
        let chars: Vec<char> = surface.chars().collect();
        let longest = self.max_grapheme_chars();
        let mut tokens = Vec::new();
        let mut pos = 0;
        while pos < chars.len() {
            let upper = longest.min(chars.len() - pos);
            let hit = (1..=upper).rev().find_map(|len| {
                let cand: String = chars[pos..pos + len].iter().collect();
                self.all().find(|g| **g == cand).map(|g| (g.clone(), len))
            });
            match hit {
                Some((g, len)) => {
                    tokens.push(g);
                    pos += len;
                }
                None => {
                    return Err(Error::UnknownGrapheme {
                        word: surface.clone(),
                        position: pos,
                    })
                }
            }
        }
        Ok(Word {
            surface: surface.into(),
            tokens: tokens.into(),
        })
    }

    /// Moras of a token sequence: short vowels count one, long vowels two.
    pub fn mora_count(&self, tokens: &[String]) -> usize {
        tokens
            .iter()
            .map(|t| match self.class_of(t) {
                Some(GraphemeClass::ShortVowel) => 1,
                Some(GraphemeClass::LongVowel) => 2,
                _ => 0,
            })
            .sum()
    }

    /// Splits a token sequence into (C)V syllables, or `None` when some
    /// consonant is not immediately followed by a vowel.
    pub fn syllabify<'a>(&self, tokens: &'a [String]) -> Option<Vec<&'a [String]>> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, t) in tokens.iter().enumerate() {
            if self.is_vowel(t) {
                out.push(&tokens[start..=i]);
                start = i + 1;
            } else if i > start {
                // two consonants in a row
                return None;
            }
        }
        (start == tokens.len()).then_some(out)
    }
}

/// NFC normalization plus lowercasing. Combining macrons fold into the
/// precomposed vowels.
pub fn normalize(s: &str) -> String {
    let lowered: String = s.nfc().collect::<String>().to_lowercase();
    lowered.nfc().collect()
}

/// A tokenized word. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    surface: Arc<str>,
    tokens: Arc<[String]>,
}

impl Word {
    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false; words have at least one token.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of boundary sites, `len() - 1`.
    pub fn site_count(&self) -> usize {
        self.tokens.len() - 1
    }

    /// Builds a word from tokens that are already known to be inventory
    /// members.
    pub(crate) fn from_tokens(tokens: Vec<String>) -> Self {
        let surface: String = tokens.concat();
        Self {
            surface: surface.into(),
            tokens: tokens.into(),
        }
    }

    pub fn mora_count(&self, inventory: &GraphemeInventory) -> usize {
        inventory.mora_count(&self.tokens)
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({:?})", self.tokens)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

/// Tokenizes with the default inventory.
pub fn tokenize(surface: &str) -> Result<Word> {
    GraphemeInventory::maori().tokenize(surface)
}

/// A set of boundary sites over one word.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Segmentation {
    word: Word,
    boundaries: BTreeSet<usize>,
}

impl Segmentation {
    /// Fails with [`Error::InvalidBoundary`] for a site outside
    /// `1..=word.site_count()`.
    pub fn new(word: Word, boundaries: impl IntoIterator<Item = usize>) -> Result<Self> {
        let boundaries: BTreeSet<usize> = boundaries.into_iter().collect();
        if let Some(&b) = boundaries
            .iter()
            .find(|&&b| b == 0 || b > word.site_count())
        {
            return Err(Error::InvalidBoundary {
                word: word.surface().to_string(),
                site: b,
            });
        }
        Ok(Self { word, boundaries })
    }

    /// The unsegmented word.
    pub fn whole(word: Word) -> Self {
        Self {
            word,
            boundaries: BTreeSet::new(),
        }
    }

    /// Builds a segmentation from consecutive morph lengths in tokens.
    pub fn from_morph_lengths(word: Word, lengths: &[usize]) -> Result<Self> {
        let total: usize = lengths.iter().sum();
        if total != word.len() || lengths.iter().any(|&l| l == 0) {
            return Err(Error::MorphMismatch(word.surface().to_string()));
        }
        let mut acc = 0;
        let sites: Vec<usize> = lengths[..lengths.len() - 1]
            .iter()
            .map(|l| {
                acc += l;
                acc
            })
            .collect();
        Self::new(word, sites)
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn boundaries(&self) -> &BTreeSet<usize> {
        &self.boundaries
    }

    pub fn morph_count(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Pieces of the token sequence cut at each boundary.
    pub fn morphs(&self) -> Vec<&[String]> {
        let tokens = self.word.tokens();
        let mut out = Vec::with_capacity(self.boundaries.len() + 1);
        let mut start = 0;
        for &b in &self.boundaries {
            out.push(&tokens[start..b]);
            start = b;
        }
        out.push(&tokens[start..]);
        out
    }

    /// Morph surfaces joined by `+`, e.g. `whaka+papa`.
    pub fn to_plus_string(&self) -> String {
        self.morphs()
            .iter()
            .map(|m| m.concat())
            .collect::<Vec<_>>()
            .join("+")
    }
}

/// Free-function form of [`Segmentation::morphs`].
pub fn segmentation_to_morphs(seg: &Segmentation) -> Vec<Vec<String>> {
    seg.morphs().into_iter().map(|m| m.to_vec()).collect()
}

/// Free-function form of [`Word::mora_count`] over the default inventory.
pub fn mora_count(word: &Word) -> usize {
    GraphemeInventory::maori().mora_count(word.tokens())
}
