//! Type and token frequencies of affix groups, with Simple Good-Turing
//! smoothing of corpus counts.
//!
//! Smoothing follows Gale & Sampson's Simple Good-Turing estimator:
//!
//! 1. Group words by count `r` and let `N_r` be the number of words seen
//!    exactly `r` times. The unseen mass is `P0 = N_1 / N`.
//! 2. Average `N_r` over the gap to its neighbours,
//!    `Z_r = 2 N_r / (t − q)`, where `q` is the previous observed count (0
//!    for the first) and `t` the next (`2r − q` for the last).
//! 3. Fit `log Z_r = a + b log r` by ordinary least squares and define the
//!    smoothed `S(r) = exp(a + b log r)`.
//! 4. For increasing `r`, use the Turing estimate
//!    `x = (r+1) N_{r+1} / N_r` while `N_{r+1}` is observed and
//!    `|x − y| > 1.96 √((r+1)² (N_{r+1} / N_r²) (1 + N_{r+1} / N_r))`, where
//!    `y = (r+1) S(r+1) / S(r)`. From the first `r` that fails, use `y` for
//!    all larger counts.
//! 5. Each word seen `r` times gets `(1 − P0) r* / Σ N_r r*`.
//!
//! `P0` is split evenly over dictionary words with no count. When every
//! dictionary word was seen, the seen probabilities are renormalized to 1.
//!
//! Tables without singletons, or with a single distinct count, cannot be
//! smoothed this way; they fall back to add-one smoothing over counts
//! divided by their greatest common divisor, which depends only on count
//! ratios.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;

use crate::corpus::{read_text, AffixGroup, GoldEntry, Lexicon};
use crate::error::{Error, Result};

/// Two-sided 95% critical value for switching from Turing to smoothed
/// estimates.
const CONFIDENCE: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CountTable {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl CountTable {
    pub fn new(counts: impl IntoIterator<Item = (String, u64)>) -> Self {
        let mut t = Self::default();
        for (w, c) in counts {
            *t.counts.entry(w).or_default() += c;
            t.total += c;
        }
        t
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    /// Parses `surface<TAB>count` lines. Repeated surfaces add up.
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let path = Path::new(name);
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(w), Some(c), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::parse(
                    path,
                    Some(i + 1),
                    "expected surface<TAB>count",
                ));
            };
            let c: u64 = c
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, Some(i + 1), format!("bad count {c:?}")))?;
            rows.push((crate::textmodel::normalize(w.trim()), c));
        }
        Ok(Self::new(rows))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&path.display().to_string(), &read_text(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothingMethod {
    SimpleGoodTuring,
    /// Degenerate table: add-one over gcd-reduced counts.
    AddOneFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedTable {
    probs: BTreeMap<String, f64>,
    pub p_unseen_each: f64,
    pub unseen_count: usize,
    pub method: SmoothingMethod,
}

impl SmoothedTable {
    /// Probability of a word; unseen dictionary words included.
    pub fn prob(&self, word: &str) -> Option<f64> {
        self.probs.get(word).copied()
    }

    pub fn probs(&self) -> &BTreeMap<String, f64> {
        &self.probs
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.values().sum()
    }
}

/// Per-count Simple Good-Turing estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SgtEstimate {
    /// Observed counts in increasing order.
    pub counts: Vec<u64>,
    /// Probability of one word with the matching count.
    pub probs: Vec<f64>,
    /// Total unseen mass `N_1 / N`.
    pub p_zero: f64,
    pub slope: f64,
    pub intercept: f64,
}

/// Simple Good-Turing over a frequency-of-frequencies table given as
/// `(r, N_r)` pairs in any order. `None` when the table has no singletons
/// or fewer than two distinct counts.
pub fn simple_good_turing(freq_of_freq: &[(u64, u64)]) -> Option<SgtEstimate> {
    let mut rows: Vec<(u64, u64)> = freq_of_freq
        .iter()
        .copied()
        .filter(|&(r, n)| r > 0 && n > 0)
        .collect();
    rows.sort_unstable();
    if rows.len() < 2 || rows[0].0 != 1 {
        return None;
    }
    let big_n: f64 = rows.iter().map(|&(r, n)| (r * n) as f64).sum();
    let p_zero = rows[0].1 as f64 / big_n;

    let k = rows.len();
    let mut log_r = Vec::with_capacity(k);
    let mut log_z = Vec::with_capacity(k);
    for j in 0..k {
        let r = rows[j].0 as f64;
        let q = if j == 0 { 0.0 } else { rows[j - 1].0 as f64 };
        let t = if j + 1 == k {
            2.0 * r - q
        } else {
            rows[j + 1].0 as f64
        };
        log_r.push(r.ln());
        log_z.push((2.0 * rows[j].1 as f64 / (t - q)).ln());
    }
    let mean_x = log_r.iter().sum::<f64>() / k as f64;
    let mean_y = log_z.iter().sum::<f64>() / k as f64;
    let sxy: f64 = log_r
        .iter()
        .zip(&log_z)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let sxx: f64 = log_r.iter().map(|x| (x - mean_x).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    if slope >= -1.0 {
        warn!("Good-Turing log-log slope {slope} is not below -1; estimates may be unreliable");
    }
    let smoothed = |r: f64| (intercept + slope * r.ln()).exp();

    let n_of = |r: u64| {
        rows.binary_search_by_key(&r, |&(rr, _)| rr)
            .ok()
            .map(|i| rows[i].1 as f64)
    };
    let mut use_smoothed = false;
    let mut r_star = Vec::with_capacity(k);
    for &(r, n_r) in &rows {
        let rf = r as f64;
        let y = (rf + 1.0) * smoothed(rf + 1.0) / smoothed(rf);
        if !use_smoothed {
            match n_of(r + 1) {
                None => use_smoothed = true,
                Some(n_next) => {
                    let n_r = n_r as f64;
                    let x = (rf + 1.0) * n_next / n_r;
                    let spread = CONFIDENCE
                        * ((rf + 1.0).powi(2) * (n_next / (n_r * n_r)) * (1.0 + n_next / n_r))
                            .sqrt();
                    if (x - y).abs() > spread {
                        r_star.push(x);
                        continue;
                    }
                    use_smoothed = true;
                }
            }
        }
        r_star.push(y);
    }
    let n_prime: f64 = rows
        .iter()
        .zip(&r_star)
        .map(|(&(_, n), rs)| n as f64 * rs)
        .sum();
    let probs = r_star
        .iter()
        .map(|rs| (1.0 - p_zero) * rs / n_prime)
        .collect();
    Some(SgtEstimate {
        counts: rows.iter().map(|&(r, _)| r).collect(),
        probs,
        p_zero,
        slope,
        intercept,
    })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Smooths corpus counts over a dictionary so that every dictionary word
/// gets positive probability.
pub fn sgt_smooth(table: &CountTable, dictionary: &Lexicon) -> Result<SmoothedTable> {
    if table.total() == 0 {
        return Err(Error::Invalid("count table is empty".into()));
    }
    let mut vocab: BTreeMap<String, u64> = table
        .counts()
        .iter()
        .map(|(w, &c)| (w.clone(), c))
        .collect();
    for w in dictionary.words() {
        vocab.entry(w.surface().to_string()).or_insert(0);
    }
    let unseen_count = vocab.values().filter(|&&c| c == 0).count();

    let mut fof: BTreeMap<u64, u64> = BTreeMap::new();
    for &c in vocab.values().filter(|&&c| c > 0) {
        *fof.entry(c).or_default() += 1;
    }
    let rows: Vec<(u64, u64)> = fof.into_iter().collect();

    let Some(est) = simple_good_turing(&rows) else {
        warn!(
            "degenerate count table (no singletons or one distinct count); using add-one fallback"
        );
        let g = vocab
            .values()
            .copied()
            .filter(|&c| c > 0)
            .fold(0, gcd)
            .max(1);
        let denom = (table.total() / g) as f64 + vocab.len() as f64;
        let probs: BTreeMap<String, f64> = vocab
            .iter()
            .map(|(w, &c)| (w.clone(), ((c / g) as f64 + 1.0) / denom))
            .collect();
        return Ok(SmoothedTable {
            probs,
            p_unseen_each: 1.0 / denom,
            unseen_count,
            method: SmoothingMethod::AddOneFallback,
        });
    };

    let per_count: BTreeMap<u64, f64> = est
        .counts
        .iter()
        .copied()
        .zip(est.probs.iter().copied())
        .collect();
    let (p_unseen_each, scale) = if unseen_count > 0 {
        (est.p_zero / unseen_count as f64, 1.0)
    } else {
        (0.0, 1.0 / (1.0 - est.p_zero))
    };
    let probs = vocab
        .iter()
        .map(|(w, &c)| {
            let p = if c == 0 {
                p_unseen_each
            } else {
                per_count[&c] * scale
            };
            (w.clone(), p)
        })
        .collect();
    Ok(SmoothedTable {
        probs,
        p_unseen_each,
        unseen_count,
        method: SmoothingMethod::SimpleGoodTuring,
    })
}

/// Share of the `lexicon_size` dictionary words whose gold analysis
/// separates off a form of `group` at its edge.
pub fn type_frequency(group: &AffixGroup, gold: &[GoldEntry], lexicon_size: usize) -> Result<f64> {
    if lexicon_size == 0 {
        return Err(Error::Invalid("lexicon size must be at least 1".into()));
    }
    let hits = gold
        .iter()
        .filter(|e| group.match_entry(e).is_some())
        .count();
    Ok(hits as f64 / lexicon_size as f64)
}

/// Smoothed corpus probability mass of words whose gold analysis contains
/// a form of `group`.
pub fn token_frequency(
    group: &AffixGroup,
    gold: &[GoldEntry],
    smoothed: &SmoothedTable,
) -> Result<f64> {
    let mut mass = 0.0;
    for e in gold.iter().filter(|e| group.match_entry(e).is_some()) {
        let s = e.word().surface();
        mass += smoothed
            .prob(s)
            .ok_or_else(|| Error::MissingWord(s.to_string()))?;
    }
    Ok(mass)
}
