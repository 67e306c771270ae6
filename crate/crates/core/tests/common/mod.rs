//! Test-only oracles, written directly from the cost definitions and kept
//! independent of the library's incremental bookkeeping.
#![allow(dead_code)]

pub mod sgt;

use std::collections::HashMap;

use morphlab::textmodel::{tokenize, GraphemeInventory, Segmentation, Word};

pub fn words(xs: &[&str]) -> Vec<Word> {
    xs.iter().map(|s| tokenize(s).unwrap()).collect()
}

/// Per-grapheme spelling costs and end-marker cost, derived from scratch.
pub struct Spelling {
    costs: HashMap<String, f64>,
    end: f64,
}

impl Spelling {
    pub fn from_words(ws: &[Word]) -> Self {
        let inv = GraphemeInventory::maori();
        let mut counts: HashMap<String, f64> = inv.all().map(|g| (g.clone(), 1.0)).collect();
        let mut tokens = 0.0;
        for w in ws {
            for t in w.tokens() {
                *counts.get_mut(t).unwrap() += 1.0;
                tokens += 1.0;
            }
        }
        let total: f64 = counts.values().sum();
        let costs = counts
            .into_iter()
            .map(|(g, c)| (g, -(c / total).log2()))
            .collect();
        let mean = tokens / ws.len() as f64;
        Self {
            costs,
            end: (mean + 1.0).log2(),
        }
    }

    pub fn spell(&self, morph: &[String]) -> f64 {
        morph.iter().map(|g| self.costs[g]).sum::<f64>() + self.end
    }
}

fn log2_fact(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).log2()).sum()
}

/// Two-part description length of a multiset of morph tokens.
pub fn description_length(counts: &HashMap<Vec<String>, u64>, spelling: &Spelling) -> f64 {
    let n: u64 = counts.values().sum();
    let m = counts.len() as u64;
    if m == 0 {
        return 0.0;
    }
    let lexicon: f64 = counts.keys().map(|k| spelling.spell(k)).sum();
    let binom = log2_fact(n - 1) - log2_fact(m - 1) - log2_fact(n - m);
    let corpus: f64 = counts
        .values()
        .map(|&c| -(c as f64) * (c as f64 / n as f64).log2())
        .sum();
    lexicon + binom + corpus
}

pub fn description_length_of(segs: &[Segmentation], spelling: &Spelling) -> f64 {
    let mut counts: HashMap<Vec<String>, u64> = HashMap::new();
    for s in segs {
        for m in s.morphs() {
            *counts.entry(m.to_vec()).or_default() += 1;
        }
    }
    description_length(&counts, spelling)
}

/// All boundary subsets of a word.
pub fn all_segmentations(w: &Word) -> Vec<Segmentation> {
    let sites = w.site_count();
    (0u32..(1 << sites))
        .map(|mask| {
            let b = (1..=sites).filter(move |i| mask & (1 << (i - 1)) != 0);
            Segmentation::new(w.clone(), b).unwrap()
        })
        .collect()
}

/// Exhaustive search over all joint segmentations of `ws`. Returns the
/// minimum description length and one minimizing analysis.
pub fn global_optimum(ws: &[Word]) -> (f64, Vec<Segmentation>) {
    let spelling = Spelling::from_words(ws);
    let options: Vec<Vec<Segmentation>> = ws.iter().map(all_segmentations).collect();
    let mut counts: HashMap<Vec<String>, u64> = HashMap::new();
    let mut chosen = Vec::new();
    let mut best = (f64::INFINITY, Vec::new());
    fn rec(
        i: usize,
        options: &[Vec<Segmentation>],
        counts: &mut HashMap<Vec<String>, u64>,
        chosen: &mut Vec<Segmentation>,
        spelling: &Spelling,
        best: &mut (f64, Vec<Segmentation>),
    ) {
        if i == options.len() {
            let c = description_length(counts, spelling);
            if c < best.0 - 1e-9 {
                *best = (c, chosen.clone());
            }
            return;
        }
        for s in &options[i] {
            for m in s.morphs() {
                *counts.entry(m.to_vec()).or_default() += 1;
            }
            chosen.push(s.clone());
            rec(i + 1, options, counts, chosen, spelling, best);
            chosen.pop();
            for m in s.morphs() {
                let e = counts.get_mut(m).unwrap();
                *e -= 1;
                if *e == 0 {
                    counts.remove(m);
                }
            }
        }
    }
    rec(0, &options, &mut counts, &mut chosen, &spelling, &mut best);
    best
}
