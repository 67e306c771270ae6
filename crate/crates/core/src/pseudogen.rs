//! Pseudo-lexicon generation by hierarchical Zipfian concatenation.
//!
//! Phonemes build syllables, syllables build morphs and morphs build words.
//! At each level the rank-frequency curve of the source data is summarised
//! by `f(x) = a·b^(−x)`, and generated types are drawn from that curve
//! after a random assignment of ranks. Duplicate types are rejected and
//! redrawn, up to a fixed budget per type.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_segmentations, write_text, GoldEntry};
use crate::error::{Error, Level, Result};
use crate::textmodel::{GraphemeClass, GraphemeInventory, Segmentation, Word};

pub const DEFAULT_RETRY_BUDGET: u32 = 10_000;
const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-10;

/// `f(x) = a·b^(−x)` with the sum of squared errors of the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub residual: f64,
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        power_law(self.a, self.b, x)
    }
}

pub fn power_law(a: f64, b: f64, x: f64) -> f64 {
    a * b.powf(-x)
}

/// Partial derivatives of `a·b^(−x)` with respect to `a` and `b`.
pub fn power_law_jacobian(a: f64, b: f64, x: f64) -> [f64; 2] {
    [b.powf(-x), -x * a * b.powf(-x - 1.0)]
}

fn sse(points: &[(f64, f64)], a: f64, b: f64) -> f64 {
    points
        .iter()
        .map(|&(x, y)| (y - power_law(a, b, x)).powi(2))
        .sum()
}

/// Nonlinear least-squares fit of `a·b^(−x)` to `(rank, count)` points.
///
/// Starts from a straight-line fit of `ln count` against rank and refines
/// with Levenberg–Marquardt on the raw counts.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    let distinct: HashSet<(u64, u64)> = points
        .iter()
        .map(|&(x, y)| (x.to_bits(), y.to_bits()))
        .collect();
    if distinct.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: distinct.len(),
        });
    }
    if points
        .iter()
        .any(|&(x, y)| !x.is_finite() || !(y.is_finite() && y > 0.0))
    {
        return Err(Error::Invalid(
            "power-law counts must be positive and finite".into(),
        ));
    }

    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    if sxx == 0.0 {
        // every point at one rank
        return Err(Error::DegenerateFit(f64::NAN));
    }
    let slope = sxy / sxx;
    let (mut a, mut b) = ((my - slope * mx).exp(), (-slope).exp());
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::FitDivergence);
    }

    let mut cost = sse(points, a, b);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for &(x, y) in points {
            let j = power_law_jacobian(a, b, x);
            let r = y - power_law(a, b, x);
            for i in 0..2 {
                jtr[i] += j[i] * r;
                for k in 0..2 {
                    jtj[i][k] += j[i] * j[k];
                }
            }
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let m00 = jtj[0][0] + lambda * jtj[0][0].max(1e-300);
            let m11 = jtj[1][1] + lambda * jtj[1][1].max(1e-300);
            let m01 = jtj[0][1];
            let det = m00 * m11 - m01 * m01;
            let da = (jtr[0] * m11 - m01 * jtr[1]) / det;
            let db = (m00 * jtr[1] - m01 * jtr[0]) / det;
            let (na, nb) = (a + da, b + db);
            let ncost = if det.is_finite() && det != 0.0 && nb > 0.0 {
                sse(points, na, nb)
            } else {
                f64::INFINITY
            };
            if ncost.is_finite() && ncost <= cost {
                let small =
                    da.abs() <= STEP_TOLERANCE * a.abs() && db.abs() <= STEP_TOLERANCE * b.abs();
                a = na;
                b = nb;
                cost = ncost;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = !small;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    if !(a.is_finite() && b.is_finite() && cost.is_finite()) {
        return Err(Error::FitDivergence);
    }
    if b <= 1.0 {
        return Err(Error::DegenerateFit(b));
    }
    Ok(PowerLawFit {
        a,
        b,
        residual: cost,
    })
}

/// Rank-sorted type counts at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: Level,
    /// `(type, count)` in rank order; rank `i + 1` for index `i`.
    pub ranked_counts: Vec<(String, u64)>,
    pub fit: PowerLawFit,
}

impl LevelStats {
    /// Sorts by count, keeping first-occurrence order among ties, and fits.
    pub fn from_counts(level: Level, counts: Vec<(String, u64)>) -> Result<Self> {
        let mut ranked_counts = counts;
        ranked_counts.sort_by(|x, y| y.1.cmp(&x.1));
        let points: Vec<(f64, f64)> = ranked_counts
            .iter()
            .enumerate()
            .map(|(i, (_, c))| ((i + 1) as f64, *c as f64))
            .collect();
        let fit = fit_power_law(&points)?;
        Ok(Self {
            level,
            ranked_counts,
            fit,
        })
    }

    pub fn type_count(&self) -> usize {
        self.ranked_counts.len()
    }
}

/// Phoneme, syllable and morph statistics of one source lexicon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceStats {
    pub phoneme: LevelStats,
    pub syllable: LevelStats,
    pub morph: LevelStats,
}

/// Counts in first-occurrence order.
#[derive(Default)]
struct OrderedCounts {
    index: HashMap<String, usize>,
    counts: Vec<(String, u64)>,
}

impl OrderedCounts {
    fn add(&mut self, key: &str) -> bool {
        match self.index.get(key) {
            Some(&i) => {
                self.counts[i].1 += 1;
                false
            }
            None => {
                self.index.insert(key.to_string(), self.counts.len());
                self.counts.push((key.to_string(), 1));
                true
            }
        }
    }

    fn ranked(mut self) -> Vec<(String, u64)> {
        self.counts.sort_by(|x, y| y.1.cmp(&x.1));
        self.counts
    }
}

fn syllables_of<'a>(
    tokens: &'a [String],
    inventory: &GraphemeInventory,
) -> Result<Vec<&'a [String]>> {
    inventory
        .syllabify(tokens)
        .ok_or_else(|| Error::SyllabificationFailure(tokens.concat()))
}

/// Rank-sorted type counts per level, before fitting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelCounts {
    pub phoneme: Vec<(String, u64)>,
    pub syllable: Vec<(String, u64)>,
    pub morph: Vec<(String, u64)>,
}

/// Type-level counts: phonemes by the unique syllables containing them,
/// syllables by unique morphs, morphs by unique words. Each list is sorted
/// by count with ties in first-occurrence order.
pub fn count_level_frequencies(
    gold: &[GoldEntry],
    inventory: &GraphemeInventory,
) -> Result<LevelCounts> {
    if gold.is_empty() {
        return Err(Error::Invalid("no gold analyses to count".into()));
    }
    let mut morphs = OrderedCounts::default();
    let mut morph_types: Vec<Vec<String>> = Vec::new();
    let mut seen_words = HashSet::new();
    for entry in gold {
        if !seen_words.insert(entry.word().clone()) {
            continue;
        }
        let mut in_word = HashSet::new();
        for m in entry.gold.morphs() {
            let key = m.concat();
            if in_word.insert(key.clone()) && morphs.add(&key) {
                morph_types.push(m.to_vec());
            }
        }
    }

    let mut syllables = OrderedCounts::default();
    let mut syllable_types: Vec<Vec<String>> = Vec::new();
    for m in &morph_types {
        let mut in_morph = HashSet::new();
        for s in syllables_of(m, inventory)? {
            let key = s.concat();
            if in_morph.insert(key.clone()) && syllables.add(&key) {
                syllable_types.push(s.to_vec());
            }
        }
    }

    let mut phonemes = OrderedCounts::default();
    for s in &syllable_types {
        let mut in_syllable = HashSet::new();
        for g in s {
            if in_syllable.insert(g.as_str()) {
                phonemes.add(g);
            }
        }
    }

    Ok(LevelCounts {
        phoneme: phonemes.ranked(),
        syllable: syllables.ranked(),
        morph: morphs.ranked(),
    })
}

impl SourceStats {
    /// Fits all three levels.
    pub fn fit(counts: LevelCounts) -> Result<Self> {
        Ok(Self {
            phoneme: LevelStats::from_counts(Level::Phoneme, counts.phoneme)?,
            syllable: LevelStats::from_counts(Level::Syllable, counts.syllable)?,
            morph: LevelStats::from_counts(Level::Morph, counts.morph)?,
        })
    }

    pub fn from_gold(gold: &[GoldEntry], inventory: &GraphemeInventory) -> Result<Self> {
        Self::fit(count_level_frequencies(gold, inventory)?)
    }
}

/// Syllable counts of a word's morphs, in order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordTemplate {
    morph_syllable_counts: Vec<usize>,
}

impl WordTemplate {
    pub fn new(morph_syllable_counts: Vec<usize>) -> Result<Self> {
        if morph_syllable_counts.is_empty()
            || morph_syllable_counts.iter().any(|&c| !(1..=3).contains(&c))
        {
            return Err(Error::Invalid(format!(
                "template {morph_syllable_counts:?} needs 1 to 3 syllables per morph"
            )));
        }
        Ok(Self {
            morph_syllable_counts,
        })
    }

    pub fn from_segmentation(seg: &Segmentation, inventory: &GraphemeInventory) -> Result<Self> {
        let counts = seg
            .morphs()
            .iter()
            .map(|m| syllables_of(m, inventory).map(|s| s.len()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(counts)
    }

    pub fn morph_syllable_counts(&self) -> &[usize] {
        &self.morph_syllable_counts
    }
}

/// Numbers of distinct mono-, di- and trisyllabic morphs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphTypeCounts {
    pub mono: usize,
    pub di: usize,
    pub tri: usize,
}

impl MorphTypeCounts {
    pub fn get(&self, syllables: usize) -> usize {
        match syllables {
            1 => self.mono,
            2 => self.di,
            3 => self.tri,
            _ => 0,
        }
    }

    /// Distinct morphs in `gold` by syllable count. Morphs longer than three
    /// syllables are an error.
    pub fn from_gold(gold: &[GoldEntry], inventory: &GraphemeInventory) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Self::default();
        for e in gold {
            for m in e.gold.morphs() {
                if !seen.insert(m.to_vec()) {
                    continue;
                }
                match syllables_of(m, inventory)?.len() {
                    1 => out.mono += 1,
                    2 => out.di += 1,
                    3 => out.tri += 1,
                    n => {
                        return Err(Error::Invalid(format!(
                            "morph {:?} has {n} syllables; at most 3 are supported",
                            m.concat()
                        )))
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A distribution over types whose ranks come from a random permutation.
#[derive(Debug, Clone)]
pub struct RankSampler<T> {
    items: Vec<T>,
    log_weights: Vec<f64>,
    dist: WeightedIndex<f64>,
}

impl<T: Clone> RankSampler<T> {
    fn from_log_weights(items: Vec<T>, log_weights: Vec<f64>) -> Result<Self> {
        let max = log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let dist = WeightedIndex::new(log_weights.iter().map(|w| (w - max).exp()))
            .map_err(|e| Error::Invalid(format!("cannot build sampler: {e}")))?;
        Ok(Self {
            items,
            log_weights,
            dist,
        })
    }

    /// Items in rank order.
    pub fn items(&self) -> &[T] {
        &self.items
    }

    /// Normalized probabilities in rank order.
    pub fn probabilities(&self) -> Vec<f64> {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_weights.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &T {
        &self.items[self.dist.sample(rng)]
    }

    /// The same weights restricted to items satisfying `keep`, renormalized.
    pub fn restrict(&self, keep: impl Fn(&T) -> bool) -> Result<Self> {
        let (items, weights): (Vec<T>, Vec<f64>) = self
            .items
            .iter()
            .zip(&self.log_weights)
            .filter(|(t, _)| keep(t))
            .map(|(t, w)| (t.clone(), *w))
            .unzip();
        if items.is_empty() {
            return Err(Error::Invalid("no types left to sample from".into()));
        }
        Self::from_log_weights(items, weights)
    }
}

/// Shuffles `inventory` to assign ranks and weights rank `x` by `a·b^(−x)`.
pub fn make_sampler<T: Clone, R: Rng + ?Sized>(
    fit: &PowerLawFit,
    inventory: &[T],
    rng: &mut R,
) -> Result<RankSampler<T>> {
    if inventory.is_empty() {
        return Err(Error::Invalid(
            "cannot sample from an empty inventory".into(),
        ));
    }
    let mut items = inventory.to_vec();
    items.shuffle(rng);
    let (ln_a, ln_b) = (fit.a.ln(), fit.b.ln());
    let log_weights = (1..=items.len()).map(|x| ln_a - x as f64 * ln_b).collect();
    RankSampler::from_log_weights(items, log_weights)
}

/// Knobs of the generator that the source data does not fix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub retry_budget: u32,
    /// Probability of a consonant onset. Defaults to the CV share of the
    /// source syllables.
    pub cv_probability: Option<f64>,
    /// Whether long vowels may appear. Defaults to whether any source
    /// syllable contains one.
    pub long_vowels: Option<bool>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            retry_budget: DEFAULT_RETRY_BUDGET,
            cv_probability: None,
            long_vowels: None,
        }
    }
}

/// A generated word set with its ground-truth segmentations.
#[derive(Debug, Clone)]
pub struct PseudoLexicon {
    pub seed: u64,
    pub source_stats: SourceStats,
    pub morph_type_counts: MorphTypeCounts,
    pub syllables: Vec<Vec<String>>,
    /// Generated morphs with their syllable counts.
    pub morphs: Vec<(Vec<String>, usize)>,
    ground_truth: Vec<Segmentation>,
}

#[derive(Serialize)]
struct Metadata {
    seed: u64,
    words: usize,
    morph_type_counts: MorphTypeCounts,
    syllable_types: usize,
    fits: Fits,
    source_type_counts: TypeCounts,
}

#[derive(Serialize)]
struct Fits {
    phoneme: PowerLawFit,
    syllable: PowerLawFit,
    morph: PowerLawFit,
}

#[derive(Serialize)]
struct TypeCounts {
    phoneme: usize,
    syllable: usize,
    morph: usize,
}

impl PseudoLexicon {
    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.ground_truth.iter().map(Segmentation::word)
    }

    pub fn len(&self) -> usize {
        self.ground_truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ground_truth.is_empty()
    }

    /// Ground truth in template order.
    pub fn ground_truth(&self) -> &[Segmentation] {
        &self.ground_truth
    }

    pub fn gold_entries(&self) -> Vec<GoldEntry> {
        self.ground_truth
            .iter()
            .cloned()
            .map(GoldEntry::new)
            .collect()
    }

    pub fn metadata_json(&self) -> String {
        let s = &self.source_stats;
        let meta = Metadata {
            seed: self.seed,
            words: self.len(),
            morph_type_counts: self.morph_type_counts,
            syllable_types: self.syllables.len(),
            fits: Fits {
                phoneme: s.phoneme.fit,
                syllable: s.syllable.fit,
                morph: s.morph.fit,
            },
            source_type_counts: TypeCounts {
                phoneme: s.phoneme.type_count(),
                syllable: s.syllable.type_count(),
                morph: s.morph.type_count(),
            },
        };
        let mut out = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        out.push('\n');
        out
    }

    /// Writes the segmentation TSV to `path` and metadata JSON next to it
    /// (same name with a `.json` extension).
    pub fn write(&self, path: &Path) -> Result<()> {
        write_segmentations(path, &self.gold_entries())?;
        write_text(&path.with_extension("json"), &self.metadata_json())
    }
}

/// Generates one pseudo-lexicon with a word per template.
pub fn generate_pseudo_lexicon(
    stats: &SourceStats,
    templates: &[WordTemplate],
    morph_type_counts: MorphTypeCounts,
    inventory: &GraphemeInventory,
    seed: u64,
    config: &GenConfig,
) -> Result<PseudoLexicon> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = config.retry_budget.max(1);

    // phonemes
    let source_syllables: Vec<&str> = stats
        .syllable
        .ranked_counts
        .iter()
        .map(|(s, _)| s.as_str())
        .collect();
    let source_tokens: Vec<Word> = source_syllables
        .iter()
        .map(|s| inventory.tokenize(s))
        .collect::<Result<_>>()?;
    let cv_probability = match config.cv_probability {
        Some(p) if (0.0..=1.0).contains(&p) => p,
        Some(p) => return Err(Error::Invalid(format!("CV probability {p} outside [0, 1]"))),
        None => {
            let cv = source_tokens.iter().filter(|w| w.len() > 1).count();
            cv as f64 / source_tokens.len() as f64
        }
    };
    let long_vowels = config.long_vowels.unwrap_or_else(|| {
        source_tokens
            .iter()
            .flat_map(|w| w.tokens())
            .any(|g| inventory.class_of(g) == Some(GraphemeClass::LongVowel))
    });
    let consonants = make_sampler(&stats.phoneme.fit, inventory.consonants(), &mut rng)?;
    let vowel_inventory: Vec<String> = if long_vowels {
        inventory.vowels().cloned().collect()
    } else {
        inventory.short_vowels().to_vec()
    };
    let vowels = make_sampler(&stats.phoneme.fit, &vowel_inventory, &mut rng)?;

    // syllables
    let mut syllables: Vec<Vec<String>> = Vec::new();
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    for _ in 0..stats.syllable.type_count() {
        let syllable = draw_unique(&mut seen, budget, Level::Syllable, || {
            let mut s = Vec::with_capacity(2);
            if rng.gen_bool(cv_probability) {
                s.push(consonants.sample(&mut rng).clone());
            }
            s.push(vowels.sample(&mut rng).clone());
            s
        })?;
        syllables.push(syllable);
    }
    let syllable_sampler = make_sampler(&stats.syllable.fit, &syllables, &mut rng)?;

    // morphs
    let mut morphs: Vec<(Vec<String>, usize)> = Vec::new();
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    for n in 1..=3 {
        for _ in 0..morph_type_counts.get(n) {
            let morph = draw_unique(&mut seen, budget, Level::Morph, || {
                (0..n)
                    .flat_map(|_| syllable_sampler.sample(&mut rng).clone())
                    .collect()
            })?;
            morphs.push((morph, n));
        }
    }
    let morph_sampler = make_sampler(&stats.morph.fit, &morphs, &mut rng)?;
    let mut by_size = Vec::new();
    for n in 1..=3 {
        by_size.push(if morph_type_counts.get(n) > 0 {
            Some(morph_sampler.restrict(|m| m.1 == n)?)
        } else {
            None
        });
    }

    // words
    let mut ground_truth = Vec::with_capacity(templates.len());
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    for t in templates {
        let samplers = t
            .morph_syllable_counts()
            .iter()
            .map(|&n| {
                by_size[n - 1].as_ref().ok_or_else(|| {
                    Error::Invalid(format!(
                        "template {t:?} needs {n}-syllable morphs but none exist"
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut lengths = Vec::new();
        let tokens = draw_unique(&mut seen, budget, Level::Word, || {
            lengths.clear();
            let mut tokens = Vec::new();
            for s in &samplers {
                let m = &s.sample(&mut rng).0;
                lengths.push(m.len());
                tokens.extend(m.iter().cloned());
            }
            tokens
        })?;
        ground_truth.push(Segmentation::from_morph_lengths(
            Word::from_tokens(tokens),
            &lengths,
        )?);
    }

    Ok(PseudoLexicon {
        seed,
        source_stats: stats.clone(),
        morph_type_counts,
        syllables,
        morphs,
        ground_truth,
    })
}

fn draw_unique(
    seen: &mut HashSet<Vec<String>>,
    budget: u32,
    level: Level,
    mut draw: impl FnMut() -> Vec<String>,
) -> Result<Vec<String>> {
    for _ in 0..budget {
        let candidate = draw();
        if !seen.contains(&candidate) {
            seen.insert(candidate.clone());
            return Ok(candidate);
        }
    }
    Err(Error::RetryExhausted(level))
}
