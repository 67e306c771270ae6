//! Lexicons, gold-standard segmentations, rater responses and affix groups,
//! with their file formats.
//!
//! * lexicon: one surface per line; blank lines and `#` comments ignored
//! * segmentation TSV: `surface<TAB>morph+morph[<TAB>category[<TAB>subcategory]]`
//! * rater TSV: `surface<TAB>rater<TAB>morph+morph`
//! * affix groups: JSON array of group objects

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textmodel::{normalize, GraphemeInventory, Segmentation, Word};

const DEFAULT_AFFIX_GROUPS: &str = include_str!("../data/affix_groups.json");
const DEFAULT_CATEGORIES: &str = include_str!("../data/categories.txt");

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// An ordered list of unique words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pub name: String,
    words: Vec<Word>,
}

impl Lexicon {
    pub fn new(name: impl Into<String>, words: Vec<Word>) -> Result<Self> {
        let mut seen = HashSet::new();
        for w in &words {
            if !seen.insert(w.surface()) {
                return Err(Error::DuplicateWord(w.surface().to_string()));
            }
        }
        Ok(Self {
            name: name.into(),
            words,
        })
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.words.iter().any(|w| w.surface() == surface)
    }

    pub fn parse(name: &str, text: &str, inventory: &GraphemeInventory) -> Result<Self> {
        let path = Path::new(name);
        let mut seen = HashSet::new();
        let mut words = Vec::new();
        for (line, raw) in content_lines(text) {
            let word = inventory
                .tokenize(raw.trim())
                .map_err(|e| e.at(path, line))?;
            if !seen.insert(word.surface().to_string()) {
                return Err(Error::DuplicateWord(word.surface().to_string()).at(path, line));
            }
            words.push(word);
        }
        Ok(Self {
            name: name.to_string(),
            words,
        })
    }

    pub fn to_text(&self) -> String {
        self.words.iter().fold(String::new(), |mut s, w| {
            s.push_str(w.surface());
            s.push('\n');
            s
        })
    }
}

pub fn load_lexicon(path: &Path, inventory: &GraphemeInventory) -> Result<Lexicon> {
    let text = read_text(path)?;
    let mut lex = Lexicon::parse(&path.display().to_string(), &text, inventory)?;
    lex.name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(lex)
}

pub fn write_lexicon(path: &Path, lexicon: &Lexicon) -> Result<()> {
    write_text(path, &lexicon.to_text())
}

/// Closed set of category labels. Loaded as data so that other taxonomies
/// can be swapped in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    labels: Vec<String>,
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self::parse(DEFAULT_CATEGORIES)
    }
}

impl Taxonomy {
    pub fn parse(text: &str) -> Self {
        Self {
            labels: content_lines(text)
                .map(|(_, l)| l.trim().to_string())
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::parse(&read_text(path)?))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }
}

/// A word with its reference segmentation and optional category labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldEntry {
    pub gold: Segmentation,
    pub category: Option<String>,
    pub subcategory: Option<String>,
}

impl GoldEntry {
    pub fn new(gold: Segmentation) -> Self {
        Self {
            gold,
            category: None,
            subcategory: None,
        }
    }

    pub fn word(&self) -> &Word {
        self.gold.word()
    }

    /// True when the subcategory field lists `tag` (comma- or
    /// whitespace-separated).
    pub fn has_subcategory(&self, tag: &str) -> bool {
        self.subcategory
            .as_deref()
            .is_some_and(|s| s.split([',', ' ']).any(|t| t.trim() == tag))
    }
}

/// Converts `+`-joined morphs into a segmentation of `surface`.
///
/// Junctions are located by character offset in the surface. A junction
/// that falls inside a multi-character grapheme moves to the site after that
/// grapheme (with a warning); one that would land at the end of the word is
/// dropped.
pub fn parse_morphs(
    surface: &str,
    morphs: &str,
    inventory: &GraphemeInventory,
) -> Result<Segmentation> {
    let word = inventory.tokenize(surface)?;
    let pieces: Vec<String> = morphs.split('+').map(normalize).collect();
    if pieces.iter().any(String::is_empty) || pieces.concat() != word.surface() {
        return Err(Error::MorphMismatch(word.surface().to_string()));
    }
    // character offset at the end of each token
    let mut token_ends = Vec::with_capacity(word.len());
    let mut acc = 0;
    for t in word.tokens() {
        acc += t.chars().count();
        token_ends.push(acc);
    }
    let mut sites = BTreeSet::new();
    let mut offset = 0;
    for piece in &pieces[..pieces.len() - 1] {
        offset += piece.chars().count();
        // first token ending at or after this offset
        let idx = token_ends.partition_point(|&end| end < offset);
        if token_ends[idx] != offset {
            warn!(
                "{}: boundary inside grapheme {:?}, moved after it",
                word.surface(),
                word.tokens()[idx]
            );
        }
        let site = idx + 1;
        if site <= word.site_count() {
            sites.insert(site);
        }
    }
    Segmentation::new(word, sites)
}

/// Parses segmentation TSV text. `name` is used in error locations.
pub fn parse_segmentations(
    name: &str,
    text: &str,
    inventory: &GraphemeInventory,
) -> Result<Vec<GoldEntry>> {
    let path = Path::new(name);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, raw) in content_lines(text) {
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() < 2 || cols.len() > 4 {
            return Err(Error::parse(
                path,
                Some(line),
                format!("expected 2 to 4 tab-separated columns, got {}", cols.len()),
            ));
        }
        let gold = parse_morphs(cols[0].trim(), cols[1].trim(), inventory)
            .map_err(|e| e.at(path, line))?;
        if !seen.insert(gold.word().surface().to_string()) {
            return Err(Error::DuplicateWord(gold.word().surface().to_string()).at(path, line));
        }
        let opt = |i: usize| {
            cols.get(i)
                .map(|c| c.trim())
                .filter(|c| !c.is_empty())
                .map(str::to_string)
        };
        out.push(GoldEntry {
            gold,
            category: opt(2),
            subcategory: opt(3),
        });
    }
    Ok(out)
}

pub fn load_segmentations(path: &Path, inventory: &GraphemeInventory) -> Result<Vec<GoldEntry>> {
    parse_segmentations(&path.display().to_string(), &read_text(path)?, inventory)
}

/// Checks every labelled entry against a taxonomy.
pub fn check_categories(entries: &[GoldEntry], taxonomy: &Taxonomy) -> Result<()> {
    for e in entries {
        if let Some(c) = &e.category {
            if !taxonomy.contains(c) {
                return Err(Error::Invalid(format!(
                    "category {c:?} of {:?} is not in the taxonomy",
                    e.word().surface()
                )));
            }
        }
    }
    Ok(())
}

pub fn segmentations_to_text(entries: &[GoldEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        s.push_str(e.word().surface());
        s.push('\t');
        s.push_str(&e.gold.to_plus_string());
        match (&e.category, &e.subcategory) {
            (None, None) => {}
            (c, None) => {
                let _ = write!(s, "\t{}", c.as_deref().unwrap_or(""));
            }
            (c, Some(sub)) => {
                let _ = write!(s, "\t{}\t{sub}", c.as_deref().unwrap_or(""));
            }
        }
        s.push('\n');
    }
    s
}

pub fn write_segmentations(path: &Path, entries: &[GoldEntry]) -> Result<()> {
    write_text(path, &segmentations_to_text(entries))
}

/// All rater responses for one word, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaterData {
    pub word: Word,
    pub raters: Vec<String>,
    pub responses: Vec<Segmentation>,
}

pub fn parse_raters(
    name: &str,
    text: &str,
    inventory: &GraphemeInventory,
) -> Result<Vec<RaterData>> {
    let path = Path::new(name);
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut out: Vec<RaterData> = Vec::new();
    for (line, raw) in content_lines(text) {
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(
                path,
                Some(line),
                format!("expected 3 tab-separated columns, got {}", cols.len()),
            ));
        }
        let seg = parse_morphs(cols[0].trim(), cols[2].trim(), inventory)
            .map_err(|e| e.at(path, line))?;
        let key = seg.word().surface().to_string();
        let slot = *index.entry(key).or_insert_with(|| {
            out.push(RaterData {
                word: seg.word().clone(),
                raters: Vec::new(),
                responses: Vec::new(),
            });
            out.len() - 1
        });
        out[slot].raters.push(cols[1].trim().to_string());
        out[slot].responses.push(seg);
    }
    Ok(out)
}

pub fn load_raters(path: &Path, inventory: &GraphemeInventory) -> Result<Vec<RaterData>> {
    parse_raters(&path.display().to_string(), &read_text(path)?, inventory)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Prefix,
    Suffix,
}

/// One surface form of an affix. `subcategory` restricts the form to gold
/// entries whose subcategory names it; this separates homophonous affixes
/// such as nominalizing and passive `-nga`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffixForm {
    pub tokens: Vec<String>,
    pub subcategory: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffixGroup {
    pub name: String,
    pub edge: Edge,
    pub forms: Vec<AffixForm>,
    pub is_default: bool,
    pub template_consistent: bool,
    pub thematic_consonant_note: Option<String>,
}

/// Where a group's affix sits in a gold analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AffixSpan {
    /// Site between affix and stem.
    pub junction: usize,
    /// Sites strictly inside the affix.
    pub inner: (usize, usize),
}

impl AffixSpan {
    pub fn contains_inner(&self, site: usize) -> bool {
        site >= self.inner.0 && site < self.inner.1
    }
}

impl AffixGroup {
    /// Locates a form of this group separated off at the group's edge in
    /// the entry's gold analysis.
    pub fn match_entry(&self, entry: &GoldEntry) -> Option<AffixSpan> {
        let morphs = entry.gold.morphs();
        if morphs.len() < 2 {
            return None;
        }
        let n = entry.word().len();
        let piece = match self.edge {
            Edge::Prefix => morphs[0],
            Edge::Suffix => morphs[morphs.len() - 1],
        };
        let hit = self.forms.iter().any(|f| {
            f.tokens == piece
                && f.subcategory
                    .as_deref()
                    .map_or(true, |tag| entry.has_subcategory(tag))
        });
        hit.then(|| match self.edge {
            Edge::Prefix => AffixSpan {
                junction: piece.len(),
                inner: (1, piece.len()),
            },
            Edge::Suffix => AffixSpan {
                junction: n - piece.len(),
                inner: (n - piece.len() + 1, n),
            },
        })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawForm {
    Plain(String),
    Tagged {
        form: String,
        #[serde(default)]
        subcategory: Option<String>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroup {
    name: String,
    edge: Edge,
    forms: Vec<RawForm>,
    is_default: bool,
    template_consistent: bool,
    #[serde(default)]
    thematic_consonant_note: Option<String>,
    /// Expansions of the template slot `C` in forms such as `Cia`.
    #[serde(default)]
    thematic_consonants: Vec<String>,
}

/// Parses an affix-group JSON array. Forms may carry a leading or trailing
/// `-`. An uppercase `C` in a form is a thematic-consonant slot and expands
/// to each entry of the group's `thematic_consonants`.
pub fn parse_affix_groups(
    name: &str,
    text: &str,
    inventory: &GraphemeInventory,
) -> Result<Vec<AffixGroup>> {
    let path = Path::new(name);
    let raw: Vec<RawGroup> = serde_json::from_str(text)
        .map_err(|e| Error::parse(path, Some(e.line()), format!("column {}: {e}", e.column())))?;
    let mut groups = Vec::with_capacity(raw.len());
    for (i, g) in raw.into_iter().enumerate() {
        let err =
            |msg: String| Error::parse(path, None, format!("group {i} ({:?}): {msg}", g.name));
        if g.forms.is_empty() {
            return Err(err("forms list is empty".into()));
        }
        let mut forms = Vec::new();
        for f in &g.forms {
            let (text, subcategory) = match f {
                RawForm::Plain(s) => (s.as_str(), None),
                RawForm::Tagged { form, subcategory } => (form.as_str(), subcategory.clone()),
            };
            let text = text.trim().trim_matches('-');
            let expansions: Vec<String> = if text.contains('C') {
                if g.thematic_consonants.is_empty() {
                    return Err(err(format!(
                        "form {text:?} uses C but no thematic_consonants given"
                    )));
                }
                g.thematic_consonants
                    .iter()
                    .map(|c| text.replace('C', c))
                    .collect()
            } else {
                vec![text.to_string()]
            };
            for form in expansions {
                let word = inventory
                    .tokenize(&form)
                    .map_err(|e| err(format!("form {form:?}: {e}")))?;
                forms.push(AffixForm {
                    tokens: word.tokens().to_vec(),
                    subcategory: subcategory.clone(),
                });
            }
        }
        groups.push(AffixGroup {
            name: g.name.clone(),
            edge: g.edge,
            forms,
            is_default: g.is_default,
            template_consistent: g.template_consistent,
            thematic_consonant_note: g.thematic_consonant_note.clone(),
        });
    }
    Ok(groups)
}

pub fn load_affix_groups(path: &Path, inventory: &GraphemeInventory) -> Result<Vec<AffixGroup>> {
    parse_affix_groups(&path.display().to_string(), &read_text(path)?, inventory)
}

/// The six bundled groups for Māori causative, passive and nominalizing
/// affixes.
pub fn default_affix_groups() -> Vec<AffixGroup> {
    parse_affix_groups(
        "affix_groups.json",
        DEFAULT_AFFIX_GROUPS,
        &GraphemeInventory::maori(),
    )
    .expect("bundled affix groups are valid")
}
