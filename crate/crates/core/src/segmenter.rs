//! Unsupervised morph induction by minimum description length.
//!
//! The model codes a lexicon of word types in two parts:
//!
//! ```text
//! L(lexicon)          = Σ_m [ Σ_{g ∈ m} −log2 p(g)  −  log2 p_end ]  +  log2 C(N−1, M−1)
//! L(corpus | lexicon) = −Σ_words Σ_{m ∈ analysis} log2(count(m) / N)
//! ```
//!
//! where `N` is the total number of morph tokens over all analyses, `M` the
//! number of distinct morphs, `p(g)` the add-one smoothed frequency of
//! grapheme `g` in the training words, and `p_end = 1 / (L̄ + 1)` with `L̄`
//! the mean training-word length in tokens. Each word type counts once.
//!
//! Training keeps every word as the root of a binary tree of substrings, with
//! nodes shared across words. It starts with every word unsplit and visits
//! words in a seeded random order; at each node it chooses between keeping
//! the substring whole and the best binary split, then recurses into the
//! halves. Because nodes are shared, splitting `kaka` splits it in every
//! word that contains that node. A word's re-optimization is kept only if it
//! lowers the total cost.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{read_text, write_text, Lexicon};
use crate::error::{Error, Result};
use crate::textmodel::{GraphemeInventory, Segmentation, Word};

/// Version written to and expected in model files.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Costs below this are treated as ties.
const COST_EPS: f64 = 1e-9;

type Sym = u16;

/// How [`MorphModel::segment`] prices substrings that are not in the
/// morph inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownMorphPolicy {
    /// Grapheme spelling cost plus end marker plus `log2(N + 1)`, the price
    /// of adding the substring to the lexicon with a count of one.
    #[default]
    ExtendLexiconCost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub max_epochs: usize,
    /// Minimum cost improvement per epoch, in bits. `None` means
    /// `0.005 × number of training words`.
    pub convergence_threshold: Option<f64>,
    pub unknown_morph_policy: UnknownMorphPolicy,
    /// Extra training runs from random initial splits; the cheapest run
    /// wins.
    pub random_restarts: usize,
}

pub const DEFAULT_RANDOM_RESTARTS: usize = 4;

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_epochs: 50,
            convergence_threshold: None,
            unknown_morph_policy: UnknownMorphPolicy::ExtendLexiconCost,
            random_restarts: DEFAULT_RANDOM_RESTARTS,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::Invalid("max_epochs must be at least 1".into()));
        }
        if let Some(t) = self.convergence_threshold {
            if !(t > 0.0) {
                return Err(Error::Invalid(format!(
                    "convergence threshold {t} must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn threshold_bits(&self, words: usize) -> f64 {
        self.convergence_threshold.unwrap_or(0.005 * words as f64)
    }
}

/// Spelling cost of morphs in the lexicon part of the code.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphemeCoder {
    graphemes: Vec<String>,
    /// Training frequencies, before add-one smoothing. Empty for a uniform
    /// coder.
    counts: Vec<u64>,
    costs: Vec<f64>,
    end_cost: f64,
    unseen_cost: f64,
    /// Training words and tokens, from which `p_end` was derived.
    words: u64,
    tokens: u64,
}

impl GraphemeCoder {
    /// Add-one smoothed grapheme frequencies over `inventory`, with
    /// `p_end = 1 / (mean word length + 1)`.
    pub fn from_words(words: &[Word], inventory: &GraphemeInventory) -> Self {
        let graphemes: Vec<String> = inventory.all().cloned().collect();
        let index: HashMap<&str, usize> = graphemes
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i))
            .collect();
        let mut counts = vec![0u64; graphemes.len()];
        let mut tokens = 0u64;
        for w in words {
            for t in w.tokens() {
                if let Some(&i) = index.get(t.as_str()) {
                    counts[i] += 1;
                }
                tokens += 1;
            }
        }
        Self::from_counts(graphemes, counts, words.len() as u64, tokens)
    }

    fn from_counts(graphemes: Vec<String>, counts: Vec<u64>, words: u64, tokens: u64) -> Self {
        let denom = counts.iter().sum::<u64>() as f64 + graphemes.len() as f64;
        let costs = counts
            .iter()
            .map(|&c| -((c as f64 + 1.0) / denom).log2())
            .collect();
        let mean_len = if words == 0 {
            1.0
        } else {
            tokens as f64 / words as f64
        };
        Self {
            graphemes,
            counts,
            costs,
            end_cost: (mean_len + 1.0).log2(),
            unseen_cost: denom.log2(),
            words,
            tokens,
        }
    }

    /// Every grapheme equiprobable; `p_end` given explicitly.
    pub fn uniform(inventory: &GraphemeInventory, p_end: f64) -> Self {
        let graphemes: Vec<String> = inventory.all().cloned().collect();
        let c = (graphemes.len() as f64).log2();
        Self {
            costs: vec![c; graphemes.len()],
            counts: Vec::new(),
            graphemes,
            end_cost: -p_end.log2(),
            unseen_cost: c,
            words: 0,
            tokens: 0,
        }
    }

    pub fn grapheme_cost(&self, grapheme: &str) -> f64 {
        self.graphemes
            .iter()
            .position(|g| g == grapheme)
            .map_or(self.unseen_cost, |i| self.costs[i])
    }

    pub fn end_cost(&self) -> f64 {
        self.end_cost
    }

    /// Bits to spell a morph in the lexicon, end marker included.
    pub fn morph_cost(&self, tokens: &[String]) -> f64 {
        tokens.iter().map(|t| self.grapheme_cost(t)).sum::<f64>() + self.end_cost
    }
}

/// Interned grapheme table shared by a model's morphs.
#[derive(Debug, Clone, Default)]
struct Symbols {
    names: Vec<String>,
    index: HashMap<String, Sym>,
    costs: Vec<f64>,
}

impl Symbols {
    fn new(coder: &GraphemeCoder) -> Self {
        let mut s = Self::default();
        for g in &coder.graphemes {
            s.intern(g, coder);
        }
        s
    }

    fn intern(&mut self, g: &str, coder: &GraphemeCoder) -> Sym {
        if let Some(&i) = self.index.get(g) {
            return i;
        }
        let id = self.names.len() as Sym;
        self.names.push(g.to_string());
        self.index.insert(g.to_string(), id);
        self.costs.push(coder.grapheme_cost(g));
        id
    }

    fn encode(&mut self, tokens: &[String], coder: &GraphemeCoder) -> Vec<Sym> {
        tokens.iter().map(|t| self.intern(t, coder)).collect()
    }

    /// Read-only encoding; `None` for a grapheme never interned.
    fn lookup(&self, tokens: &[String]) -> Option<Vec<Sym>> {
        tokens
            .iter()
            .map(|t| self.index.get(t.as_str()).copied())
            .collect()
    }

    fn decode(&self, syms: &[Sym]) -> String {
        syms.iter()
            .map(|&s| self.names[s as usize].as_str())
            .collect()
    }
}

/// log2 of factorials, grown on demand.
#[derive(Debug, Clone)]
struct LogFactorials(Vec<f64>);

impl LogFactorials {
    fn new() -> Self {
        Self(vec![0.0])
    }

    fn get(&mut self, n: u64) -> f64 {
        let n = n as usize;
        while self.0.len() <= n {
            let k = self.0.len();
            let prev = self.0[k - 1];
            self.0.push(prev + (k as f64).log2());
        }
        self.0[n]
    }

    fn log2_binomial(&mut self, n: u64, k: u64) -> f64 {
        if k > n {
            return 0.0;
        }
        self.get(n) - self.get(k) - self.get(n - k)
    }
}

fn xlog2x(c: u64) -> f64 {
    if c == 0 {
        0.0
    } else {
        let c = c as f64;
        c * c.log2()
    }
}

/// Running sums from which the description length follows in O(1).
#[derive(Debug, Clone)]
struct CostState {
    total_tokens: u64,
    types: u64,
    sum_xlogx: f64,
    lexicon_bits: f64,
}

impl CostState {
    fn new() -> Self {
        Self {
            total_tokens: 0,
            types: 0,
            sum_xlogx: 0.0,
            lexicon_bits: 0.0,
        }
    }

    /// Records a morph count change from `old` to `new`.
    fn update(&mut self, spell: f64, old: u64, new: u64) {
        self.sum_xlogx += xlog2x(new) - xlog2x(old);
        self.total_tokens = self.total_tokens + new - old;
        if old == 0 && new > 0 {
            self.lexicon_bits += spell;
            self.types += 1;
        } else if old > 0 && new == 0 {
            self.lexicon_bits -= spell;
            self.types -= 1;
        }
    }

    fn total(&self, log_fact: &mut LogFactorials) -> f64 {
        let (n, m) = (self.total_tokens, self.types);
        if m == 0 {
            return 0.0;
        }
        let corpus = xlog2x(n) - self.sum_xlogx;
        self.lexicon_bits + log_fact.log2_binomial(n - 1, m - 1) + corpus
    }
}

/// Trained morph inventory, per-word analyses and cached description
/// length. Immutable once built.
#[derive(Debug, Clone)]
pub struct MorphModel {
    coder: GraphemeCoder,
    config: TrainConfig,
    symbols: Symbols,
    counts: HashMap<Vec<Sym>, u64>,
    words: Vec<Word>,
    analyses: Vec<Vec<usize>>,
    word_index: HashMap<String, usize>,
    total_tokens: u64,
    cost_cache: f64,
    epochs: usize,
    history: Vec<f64>,
}

impl MorphModel {
    /// Builds a model holding exactly the given analyses, without training.
    pub fn from_analyses(
        segs: &[Segmentation],
        coder: GraphemeCoder,
        config: TrainConfig,
    ) -> Result<Self> {
        let mut symbols = Symbols::new(&coder);
        let mut counts: HashMap<Vec<Sym>, u64> = HashMap::new();
        let mut word_index = HashMap::new();
        let mut words = Vec::with_capacity(segs.len());
        let mut analyses = Vec::with_capacity(segs.len());
        let mut state = CostState::new();
        for seg in segs {
            let word = seg.word();
            if word_index
                .insert(word.surface().to_string(), words.len())
                .is_some()
            {
                return Err(Error::DuplicateWord(word.surface().to_string()));
            }
            let enc = symbols.encode(word.tokens(), &coder);
            let b: Vec<usize> = seg.boundaries().iter().copied().collect();
            for (s, e) in spans(enc.len(), &b) {
                let m = &enc[s..e];
                let c = counts.entry(m.to_vec()).or_default();
                let spell =
                    m.iter().map(|&x| symbols.costs[x as usize]).sum::<f64>() + coder.end_cost;
                state.update(spell, *c, *c + 1);
                *c += 1;
            }
            words.push(word.clone());
            analyses.push(b);
        }
        let cost_cache = state.total(&mut LogFactorials::new());
        Ok(Self {
            coder,
            config,
            symbols,
            counts,
            words,
            analyses,
            word_index,
            total_tokens: state.total_tokens,
            cost_cache,
            epochs: 0,
            history: vec![cost_cache],
        })
    }

    fn spell_cost(&self, m: &[Sym]) -> f64 {
        m.iter()
            .map(|&s| self.symbols.costs[s as usize])
            .sum::<f64>()
            + self.coder.end_cost
    }

    /// Cached total description length in bits.
    pub fn cost(&self) -> f64 {
        self.cost_cache
    }

    /// Description length recomputed from the stored morph counts.
    pub fn recompute_cost(&self) -> f64 {
        let mut state = CostState::new();
        let mut sorted: Vec<(&Vec<Sym>, &u64)> = self.counts.iter().collect();
        sorted.sort();
        for (m, &c) in sorted {
            state.update(self.spell_cost(m), 0, c);
        }
        state.total(&mut LogFactorials::new())
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn morph_type_count(&self) -> usize {
        self.counts.len()
    }

    pub fn coder(&self) -> &GraphemeCoder {
        &self.coder
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn epochs_run(&self) -> usize {
        self.epochs
    }

    /// Cost after initialization and after each epoch.
    pub fn cost_history(&self) -> &[f64] {
        &self.history
    }

    pub fn count_of(&self, morph: &[String]) -> u64 {
        self.symbols
            .lookup(morph)
            .and_then(|m| self.counts.get(&m).copied())
            .unwrap_or(0)
    }

    /// Morph surfaces with counts, sorted by surface.
    pub fn morphs(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .map(|(m, &c)| (self.symbols.decode(m), c))
            .collect()
    }

    pub fn training_words(&self) -> &[Word] {
        &self.words
    }

    /// The stored analysis of a training word.
    pub fn analysis(&self, word: &Word) -> Option<Segmentation> {
        self.word_index.get(word.surface()).map(|&i| {
            Segmentation::new(word.clone(), self.analyses[i].iter().copied())
                .expect("stored analyses are valid")
        })
    }

    pub fn analyses(&self) -> Vec<Segmentation> {
        self.words
            .iter()
            .zip(&self.analyses)
            .map(|(w, b)| Segmentation::new(w.clone(), b.iter().copied()).expect("valid"))
            .collect()
    }

    /// Training words get their stored analysis; other words are decoded
    /// with [`MorphModel::viterbi`].
    pub fn segment(&self, word: &Word) -> Segmentation {
        self.analysis(word).unwrap_or_else(|| self.viterbi(word))
    }

    /// Decoding cost of a piece: `−log2(count / N)` for known morphs,
    /// otherwise spelling cost plus `log2(N + 1)`.
    pub fn piece_cost(&self, tokens: &[String]) -> f64 {
        let n = self.total_tokens.max(1) as f64;
        match self.count_of(tokens) {
            0 => match self.config.unknown_morph_policy {
                UnknownMorphPolicy::ExtendLexiconCost => {
                    self.coder.morph_cost(tokens) + (n + 1.0).log2()
                }
            },
            c => -(c as f64 / n).log2(),
        }
    }

    /// Sum of [`MorphModel::piece_cost`] over the pieces of `seg`.
    pub fn decode_cost(&self, seg: &Segmentation) -> f64 {
        seg.morphs().iter().map(|m| self.piece_cost(m)).sum()
    }

    /// Minimum-cost segmentation by dynamic programming. Ties go to fewer
    /// boundaries, then to the longest first morph (recursively).
    pub fn viterbi(&self, word: &Word) -> Segmentation {
        let tokens = word.tokens();
        let len = tokens.len();
        // best[i]: (cost, boundaries, next cut) for the suffix starting at i
        let mut best: Vec<(f64, usize, usize)> = vec![(0.0, 0, len); len + 1];
        for i in (0..len).rev() {
            let mut cur: Option<(f64, usize, usize)> = None;
            for j in (i + 1..=len).rev() {
                let c = self.piece_cost(&tokens[i..j]) + best[j].0;
                let b = best[j].1 + usize::from(j < len);
                let better = match cur {
                    None => true,
                    Some((cc, cb, _)) => c < cc - COST_EPS || (c <= cc + COST_EPS && b < cb),
                };
                if better {
                    cur = Some((c, b, j));
                }
            }
            best[i] = cur.expect("at least one piece");
        }
        let mut sites = Vec::new();
        let mut i = 0;
        while best[i].2 < len {
            i = best[i].2;
            sites.push(i);
        }
        Segmentation::new(word.clone(), sites).expect("cuts are interior")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }

    pub fn load(path: &Path, inventory: &GraphemeInventory) -> Result<Self> {
        Self::from_text(&path.display().to_string(), &read_text(path)?, inventory)
    }

    /// Versioned TSV dump. Integers only apart from the configured
    /// threshold, which is written in shortest round-trip form, so the dump
    /// is byte-stable and reloads exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# morphlab morph model");
        let _ = writeln!(s, "format\t{MODEL_FORMAT_VERSION}");
        let _ = writeln!(s, "seed\t{}", self.config.seed);
        let _ = writeln!(s, "max_epochs\t{}", self.config.max_epochs);
        match self.config.convergence_threshold {
            Some(t) => {
                let _ = writeln!(s, "convergence_threshold\t{t:?}");
            }
            None => {
                let _ = writeln!(s, "convergence_threshold\tdefault");
            }
        }
        let _ = writeln!(s, "unknown_morph_policy\textend_lexicon_cost");
        let _ = writeln!(s, "random_restarts\t{}", self.config.random_restarts);
        let _ = writeln!(s, "coder_words\t{}", self.coder.words);
        let _ = writeln!(s, "coder_tokens\t{}", self.coder.tokens);
        let _ = writeln!(s, "total_tokens\t{}", self.total_tokens);
        let _ = writeln!(s, "epochs\t{}", self.epochs);
        for (g, c) in self.coder.graphemes.iter().zip(&self.coder.counts) {
            let _ = writeln!(s, "grapheme\t{g}\t{c}");
        }
        for (m, c) in self.morphs() {
            let _ = writeln!(s, "morph\t{m}\t{c}");
        }
        for seg in self.analyses() {
            let _ = writeln!(
                s,
                "analysis\t{}\t{}",
                seg.word().surface(),
                seg.to_plus_string()
            );
        }
        s
    }

    pub fn from_text(name: &str, text: &str, inventory: &GraphemeInventory) -> Result<Self> {
        let path = Path::new(name);
        let mut config = TrainConfig::default();
        let (mut words, mut tokens, mut n_declared, mut epochs) = (0u64, 0u64, None, 0usize);
        let mut graphemes = Vec::new();
        let mut counts = Vec::new();
        let mut morph_lines: Vec<(usize, String, u64)> = Vec::new();
        let mut segs = Vec::new();
        let mut version = None;
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |msg: &str| Error::parse(path, Some(ln), msg.to_string());
            let num = |s: &str| s.parse::<u64>().map_err(|_| bad("expected an integer"));
            let arg = |k: usize| cols.get(k).copied().ok_or_else(|| bad("missing column"));
            match cols[0] {
                "format" => {
                    let v = num(arg(1)?)?;
                    if v != MODEL_FORMAT_VERSION as u64 {
                        return Err(bad(&format!("unsupported model format {v}")));
                    }
                    version = Some(v);
                }
                "seed" => config.seed = num(arg(1)?)?,
                "max_epochs" => config.max_epochs = num(arg(1)?)? as usize,
                "convergence_threshold" => {
                    config.convergence_threshold = match arg(1)? {
                        "default" => None,
                        t => Some(t.parse().map_err(|_| bad("expected a number"))?),
                    }
                }
                "unknown_morph_policy" => {
                    if arg(1)? != "extend_lexicon_cost" {
                        return Err(bad("unknown morph policy"));
                    }
                }
                "random_restarts" => config.random_restarts = num(arg(1)?)? as usize,
                "coder_words" => words = num(arg(1)?)?,
                "coder_tokens" => tokens = num(arg(1)?)?,
                "total_tokens" => n_declared = Some(num(arg(1)?)?),
                "epochs" => epochs = num(arg(1)?)? as usize,
                "grapheme" => {
                    graphemes.push(arg(1)?.to_string());
                    counts.push(num(arg(2)?)?);
                }
                "morph" => morph_lines.push((ln, arg(1)?.to_string(), num(arg(2)?)?)),
                "analysis" => {
                    let seg = crate::corpus::parse_morphs(arg(1)?, arg(2)?, inventory)
                        .map_err(|e| e.at(path, ln))?;
                    segs.push(seg);
                }
                other => return Err(bad(&format!("unknown record {other:?}"))),
            }
        }
        if version.is_none() {
            return Err(Error::parse(path, None, "missing format line"));
        }
        config.validate()?;
        let coder = GraphemeCoder::from_counts(graphemes, counts, words, tokens);
        let mut model = Self::from_analyses(&segs, coder, config)?;
        model.epochs = epochs;
        for (ln, m, c) in morph_lines {
            let w = inventory.tokenize(&m).map_err(|e| e.at(path, ln))?;
            if model.count_of(w.tokens()) != c {
                return Err(Error::parse(
                    path,
                    Some(ln),
                    format!("count of morph {m:?} disagrees with analyses"),
                ));
            }
        }
        if n_declared.is_some_and(|n| n != model.total_tokens) {
            return Err(Error::parse(
                path,
                None,
                "total_tokens disagrees with analyses",
            ));
        }
        let c = model.cost();
        model.history = vec![c];
        Ok(model)
    }
}

/// A substring in the training tree: either a leaf morph or split into two
/// child substrings at `split`. `count` includes uses inside larger nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    count: u64,
    split: usize,
}

/// Training state. Every word is the root of a binary tree of substrings;
/// nodes are shared between words, so re-splitting a node changes every
/// analysis that passes through it.
struct Trainer<'a> {
    symbols: &'a Symbols,
    end_cost: f64,
    nodes: HashMap<Vec<Sym>, Node>,
    state: CostState,
    log_fact: LogFactorials,
    /// Previous values of every node touched since the last checkpoint.
    journal: Vec<(Vec<Sym>, Option<Node>)>,
}

impl<'a> Trainer<'a> {
    fn spell(&self, m: &[Sym]) -> f64 {
        m.iter()
            .map(|&s| self.symbols.costs[s as usize])
            .sum::<f64>()
            + self.end_cost
    }

    fn set_node(&mut self, key: &[Sym], node: Option<Node>) {
        let old = match node {
            Some(n) => self.nodes.insert(key.to_vec(), n),
            None => self.nodes.remove(key),
        };
        self.journal.push((key.to_vec(), old));
    }

    /// Changes the count of `key` by `delta`, propagating through its split.
    fn modify(&mut self, key: &[Sym], delta: i64) {
        let node = self
            .nodes
            .get(key)
            .copied()
            .unwrap_or(Node { count: 0, split: 0 });
        let new = (node.count as i64 + delta) as u64;
        if new == 0 {
            self.set_node(key, None);
        } else {
            self.set_node(key, Some(Node { count: new, ..node }));
        }
        if node.split > 0 {
            let (l, r) = key.split_at(node.split);
            self.modify(l, delta);
            self.modify(r, delta);
        } else {
            let spell = self.spell(key);
            self.state.update(spell, node.count, new);
        }
    }

    /// Chooses between keeping `key` whole and its best binary split, then
    /// recurses into the halves.
    fn resplit(&mut self, key: &[Sym]) {
        let count = match self.nodes.get(key) {
            Some(n) => n.count,
            None => return,
        };
        self.modify(key, -(count as i64));
        if key.len() == 1 {
            self.set_node(key, Some(Node { count: 0, split: 0 }));
            self.modify(key, count as i64);
            return;
        }
        self.modify(key, count as i64);
        let mut best_cost = self.state.total(&mut self.log_fact);
        let mut best_split = 0;
        self.modify(key, -(count as i64));
        // longest first piece first; only strict improvements replace it
        for cut in (1..key.len()).rev() {
            let (l, r) = key.split_at(cut);
            self.modify(l, count as i64);
            self.modify(r, count as i64);
            let c = self.state.total(&mut self.log_fact);
            if c < best_cost - COST_EPS {
                best_cost = c;
                best_split = cut;
            }
            self.modify(l, -(count as i64));
            self.modify(r, -(count as i64));
        }
        if best_split == 0 {
            self.set_node(key, Some(Node { count: 0, split: 0 }));
            self.modify(key, count as i64);
        } else {
            let (l, r) = key.split_at(best_split);
            self.set_node(
                key,
                Some(Node {
                    count,
                    split: best_split,
                }),
            );
            self.modify(l, count as i64);
            self.modify(r, count as i64);
            self.resplit(l);
            if l != r {
                self.resplit(r);
            }
        }
    }

    /// Re-optimizes one word; keeps the result only if the total cost
    /// drops, otherwise restores the previous tree.
    fn optimize_word(&mut self, key: &[Sym]) {
        let saved = self.state.clone();
        let before = saved.total(&mut self.log_fact);
        self.journal.clear();
        self.resplit(key);
        if self.state.total(&mut self.log_fact) >= before - COST_EPS {
            while let Some((k, old)) = self.journal.pop() {
                match old {
                    Some(n) => self.nodes.insert(k, n),
                    None => self.nodes.remove(&k),
                };
            }
            self.state = saved;
        }
        self.journal.clear();
    }

    /// Creates split nodes so that `key` starts out cut at `cuts` (sorted,
    /// relative to `key`). Existing nodes keep their splits.
    fn seed_tree(&mut self, key: &[Sym], cuts: &[usize]) {
        if cuts.is_empty() || self.nodes.contains_key(key) {
            return;
        }
        let first = cuts[0];
        self.nodes.insert(
            key.to_vec(),
            Node {
                count: 0,
                split: first,
            },
        );
        let rest: Vec<usize> = cuts[1..].iter().map(|c| c - first).collect();
        self.seed_tree(&key[first..], &rest);
    }

    /// Cost from the leaf nodes alone, ignoring the running sums.
    fn recompute(&self) -> f64 {
        let mut leaves: Vec<(&Vec<Sym>, u64)> = self
            .nodes
            .iter()
            .filter(|(_, n)| n.split == 0 && n.count > 0)
            .map(|(k, n)| (k, n.count))
            .collect();
        leaves.sort();
        let mut state = CostState::new();
        for (k, c) in leaves {
            state.update(self.spell(k), 0, c);
        }
        state.total(&mut LogFactorials::new())
    }

    fn leaves(&self, key: &[Sym], offset: usize, out: &mut Vec<usize>) {
        let split = self.nodes.get(key).map_or(0, |n| n.split);
        if split > 0 {
            let (l, r) = key.split_at(split);
            self.leaves(l, offset, out);
            out.push(offset + split);
            self.leaves(r, offset + split, out);
        }
    }
}

/// Half-open token spans delimited by sorted boundary sites.
fn spans(len: usize, boundaries: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(boundaries.len() + 1);
    let mut start = 0;
    for &b in boundaries {
        out.push((start, b));
        start = b;
    }
    out.push((start, len));
    out
}

/// Total description length of a model, recomputed from scratch.
pub fn model_cost(model: &MorphModel) -> f64 {
    model.recompute_cost()
}

/// Learns a morph model from the word types of `lexicon`.
pub fn train(lexicon: &Lexicon, config: &TrainConfig) -> Result<MorphModel> {
    train_words(lexicon.words(), config, &GraphemeInventory::maori())
}

/// [`train`] over an explicit word list and inventory.
pub fn train_words(
    words: &[Word],
    config: &TrainConfig,
    inventory: &GraphemeInventory,
) -> Result<MorphModel> {
    if words.is_empty() {
        return Err(Error::Invalid("cannot train on an empty lexicon".into()));
    }
    config.validate()?;
    let coder = GraphemeCoder::from_words(words, inventory);
    let mut symbols = Symbols::new(&coder);
    let mut keys = Vec::with_capacity(words.len());
    let mut seen = std::collections::HashSet::new();
    for w in words {
        if !seen.insert(w.surface()) {
            return Err(Error::DuplicateWord(w.surface().to_string()));
        }
        keys.push(symbols.encode(w.tokens(), &coder));
    }
    // Two starting points: whole words, and every word split into single
    // graphemes. The cheaper end state wins; ties keep the whole-word run.
    let mut best = run_epochs(words, &keys, &symbols, coder.end_cost, config, Start::Whole);
    for k in 1..=config.random_restarts {
        let r = run_epochs(
            words,
            &keys,
            &symbols,
            coder.end_cost,
            config,
            Start::Random(k as u64),
        );
        if r.cost < best.cost - COST_EPS {
            best = r;
        }
    }
    let Run {
        segs,
        cost,
        epochs,
        history,
    } = best;
    let mut model = MorphModel::from_analyses(&segs, coder, config.clone())?;
    debug_assert!(
        (model.cost() - cost).abs() < 1e-6,
        "incremental cost {cost} differs from recomputed {}",
        model.cost()
    );
    model.epochs = epochs;
    model.history = history;
    Ok(model)
}

#[derive(Debug, Clone, Copy)]
enum Start {
    Whole,
    /// Each site cut with probability 1/2, drawn from the given RNG stream.
    Random(u64),
}

struct Run {
    segs: Vec<Segmentation>,
    cost: f64,
    epochs: usize,
    history: Vec<f64>,
}

fn run_epochs(
    words: &[Word],
    keys: &[Vec<Sym>],
    symbols: &Symbols,
    end_cost: f64,
    config: &TrainConfig,
    start: Start,
) -> Run {
    let mut trainer = Trainer {
        symbols,
        end_cost,
        nodes: HashMap::new(),
        state: CostState::new(),
        log_fact: LogFactorials::new(),
        journal: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    if let Start::Random(stream) = start {
        rng.set_stream(stream);
    }
    for k in keys {
        let cuts: Vec<usize> = match start {
            Start::Whole => Vec::new(),
            Start::Random(_) => (1..k.len()).filter(|_| rng.gen_bool(0.5)).collect(),
        };
        trainer.seed_tree(k, &cuts);
        trainer.modify(k, 1);
    }
    let threshold = config.threshold_bits(words.len());
    let mut order: Vec<usize> = (0..words.len()).collect();
    let mut cost = trainer.state.total(&mut trainer.log_fact);
    let mut history = vec![cost];
    let mut epochs = 0;
    for _ in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let epoch_start = cost;
        for &w in &order {
            trainer.optimize_word(&keys[w]);
            let c = trainer.state.total(&mut trainer.log_fact);
            debug_assert!(c <= cost + COST_EPS, "cost rose from {cost} to {c}");
            cost = c;
        }
        epochs += 1;
        history.push(cost);
        debug_assert!(
            (trainer.recompute() - cost).abs() < 1e-6,
            "cached cost drifted from recomputed cost"
        );
        if epoch_start - cost < threshold {
            break;
        }
    }
    let segs = words
        .iter()
        .zip(keys)
        .map(|(w, k)| {
            let mut b = Vec::new();
            trainer.leaves(k, 0, &mut b);
            Segmentation::new(w.clone(), b).expect("tree splits are interior")
        })
        .collect();
    Run {
        segs,
        cost,
        epochs,
        history,
    }
}

/// Decodes `word` with a trained model.
pub fn segment(model: &MorphModel, word: &Word) -> Segmentation {
    model.segment(word)
}
