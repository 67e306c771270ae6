//! Report assembly for the command-line tool: evaluation tables, affix
//! reports, rater voting and the pseudo-lexicon comparison experiment.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use log::info;
use rayon::prelude::*;

use crate::corpus::{write_text, AffixGroup, GoldEntry, RaterData};
use crate::error::{Error, Result};
use crate::frequency::{token_frequency, type_frequency, SmoothedTable};
use crate::metrics::{
    category_reports, group_members, macro_pr, majority_vote, recovery_rate, PRResult,
};
use crate::pseudogen::{
    generate_pseudo_lexicon, GenConfig, MorphTypeCounts, PseudoLexicon, SourceStats, WordTemplate,
};
use crate::segmenter::{train_words, MorphModel, TrainConfig};
use crate::textmodel::{GraphemeInventory, Segmentation, Word};

pub type Predictions = BTreeMap<Word, Segmentation>;

const HIST_BINS: usize = 30;

/// Model segmentations of every gold word.
pub fn model_predictions(model: &MorphModel, gold: &[GoldEntry]) -> Predictions {
    gold.iter()
        .map(|e| (e.word().clone(), model.segment(e.word())))
        .collect()
}

pub fn entry_predictions(entries: &[GoldEntry]) -> Predictions {
    entries
        .iter()
        .map(|e| (e.word().clone(), e.gold.clone()))
        .collect()
}

/// Majority-vote segmentation for each rated word, in file order.
pub fn vote(raters: &[RaterData]) -> Result<Vec<GoldEntry>> {
    raters
        .iter()
        .map(|r| majority_vote(&r.responses).map(GoldEntry::new))
        .collect()
}

/// `word, raters, agreeing` per rated word, where `agreeing` counts the
/// responses identical to the voted segmentation. Lets analysts drop words
/// with too few raters.
pub fn rater_count_table(raters: &[RaterData]) -> Result<String> {
    let mut out = String::from("word\traters\tagreeing\n");
    for r in raters {
        let winner = majority_vote(&r.responses)?;
        let agreeing = r.responses.iter().filter(|s| **s == winner).count();
        let _ = writeln!(
            out,
            "{}\t{}\t{agreeing}",
            r.word.surface(),
            r.responses.len()
        );
    }
    Ok(out)
}

/// `category, n, precision, recall`, one row per category.
pub fn category_table(gold: &[GoldEntry], preds: &Predictions) -> Result<String> {
    let mut out = String::from("category\tn\tprecision\trecall\n");
    for r in category_reports(gold, preds)? {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.category, r.n, r.macro_precision, r.macro_recall
        );
    }
    Ok(out)
}

/// A named set of predictions, possibly covering only part of the gold set.
pub struct PredictionSource {
    pub name: String,
    pub predictions: Predictions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceRecovery {
    /// Members that the source has a prediction for.
    pub n: usize,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffixRow {
    pub group: String,
    pub n: usize,
    pub type_frequency: f64,
    pub token_frequency: Option<f64>,
    pub recovery: Vec<SourceRecovery>,
}

/// Frequencies and recovery rates for each affix group.
///
/// `lexicon_size` is the dictionary size used for type frequency. Recovery
/// for a source is computed over the members it has predictions for.
pub fn affix_rows(
    groups: &[AffixGroup],
    gold: &[GoldEntry],
    lexicon_size: usize,
    smoothed: Option<&SmoothedTable>,
    sources: &[PredictionSource],
) -> Result<Vec<AffixRow>> {
    groups
        .iter()
        .map(|g| {
            let members = group_members(gold, g);
            let recovery = sources
                .iter()
                .map(|s| {
                    let covered: Vec<&GoldEntry> = members
                        .iter()
                        .copied()
                        .filter(|e| s.predictions.contains_key(e.word()))
                        .collect();
                    let rate = if covered.is_empty() {
                        None
                    } else {
                        Some(recovery_rate(&covered, g, &s.predictions)?)
                    };
                    Ok(SourceRecovery {
                        n: covered.len(),
                        rate,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AffixRow {
                group: g.name.clone(),
                n: members.len(),
                type_frequency: type_frequency(g, gold, lexicon_size)?,
                token_frequency: smoothed.map(|s| token_frequency(g, gold, s)).transpose()?,
                recovery,
            })
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// TSV rendering of [`affix_rows`]. Groups without members carry the note
/// `n=0` and empty rates.
pub fn affix_table(groups: &[AffixGroup], rows: &[AffixRow], source_names: &[&str]) -> String {
    let mut out =
        String::from("group\tedge\tdefault\ttemplate_consistent\tn\ttype_freq\ttoken_freq");
    for s in source_names {
        let _ = write!(out, "\trecovery_{s}\tn_{s}");
    }
    out.push_str("\tnote\n");
    for (g, r) in groups.iter().zip(rows) {
        let edge = match g.edge {
            crate::corpus::Edge::Prefix => "prefix",
            crate::corpus::Edge::Suffix => "suffix",
        };
        let _ = write!(
            out,
            "{}\t{edge}\t{}\t{}\t{}\t{}\t{}",
            r.group,
            g.is_default,
            g.template_consistent,
            r.n,
            r.type_frequency,
            opt(r.token_frequency)
        );
        for s in &r.recovery {
            let _ = write!(out, "\t{}\t{}", opt(s.rate), s.n);
        }
        out.push_str(if r.n == 0 { "\tn=0\n" } else { "\t\n" });
    }
    out
}

/// Drops words containing a morph longer than three syllables. Returns the
/// kept entries and the number dropped.
pub fn restrict_to_short_morphs(
    gold: &[GoldEntry],
    inventory: &GraphemeInventory,
) -> Result<(Vec<GoldEntry>, usize)> {
    let mut kept = Vec::with_capacity(gold.len());
    for e in gold {
        let mut short = true;
        for m in e.gold.morphs() {
            let syllables = inventory
                .syllabify(m)
                .ok_or_else(|| Error::SyllabificationFailure(m.concat()))?;
            short &= syllables.len() <= 3;
        }
        if short {
            kept.push(e.clone());
        }
    }
    let dropped = gold.len() - kept.len();
    Ok((kept, dropped))
}

/// Everything the generator needs from a gold set.
#[derive(Debug, Clone)]
pub struct GenerationPlan {
    pub stats: SourceStats,
    pub templates: Vec<WordTemplate>,
    pub morph_type_counts: MorphTypeCounts,
}

impl GenerationPlan {
    /// Expects entries already restricted to morphs of at most three
    /// syllables.
    pub fn from_gold(gold: &[GoldEntry], inventory: &GraphemeInventory) -> Result<Self> {
        Ok(Self {
            stats: SourceStats::from_gold(gold, inventory)?,
            templates: gold
                .iter()
                .map(|e| WordTemplate::from_segmentation(&e.gold, inventory))
                .collect::<Result<_>>()?,
            morph_type_counts: MorphTypeCounts::from_gold(gold, inventory)?,
        })
    }

    pub fn generate(
        &self,
        inventory: &GraphemeInventory,
        seed: u64,
        config: &GenConfig,
    ) -> Result<PseudoLexicon> {
        generate_pseudo_lexicon(
            &self.stats,
            &self.templates,
            self.morph_type_counts,
            inventory,
            seed,
            config,
        )
    }
}

/// Runs `f(k)` for `k in 0..n` on a pool of `threads` workers (all cores
/// when `None`). Results come back in index order; the first failing index
/// decides the error.
pub fn run_indexed<T: Send>(
    n: usize,
    threads: Option<usize>,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start thread pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| (0..n).into_par_iter().map(&f).collect());
    results.into_iter().collect()
}

/// Generates `sets` pseudo-lexicons; set `k` uses seed `seed + k`.
pub fn generate_sets(
    plan: &GenerationPlan,
    inventory: &GraphemeInventory,
    seed: u64,
    sets: usize,
    config: &GenConfig,
    threads: Option<usize>,
) -> Result<Vec<PseudoLexicon>> {
    run_indexed(sets, threads, |k| {
        plan.generate(inventory, seed.wrapping_add(k as u64), config)
    })
}

#[derive(Debug, Clone)]
pub struct Analysis2Config {
    pub seed: u64,
    pub sets: usize,
    pub threads: Option<usize>,
    pub generation: GenConfig,
    pub max_epochs: usize,
}

impl Default for Analysis2Config {
    fn default() -> Self {
        Self {
            seed: 0,
            sets: 1000,
            threads: None,
            generation: GenConfig::default(),
            max_epochs: TrainConfig::default().max_epochs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetResult {
    pub set: usize,
    pub seed: u64,
    pub scores: PRResult,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub p2_5: f64,
    pub p97_5: f64,
}

#[derive(Debug, Clone)]
pub struct Analysis2Report {
    pub real: PRResult,
    pub words: usize,
    pub excluded: usize,
    pub sets: Vec<SetResult>,
}

/// Nearest-rank percentile of ascending `sorted`, with the percentile given
/// in tenths of a percent: the value at rank `⌈p·n / 1000⌉`.
pub fn nearest_rank(sorted: &[f64], per_mille: u32) -> Option<f64> {
    if sorted.is_empty() || per_mille > 1000 {
        return None;
    }
    let n = sorted.len();
    let rank = (per_mille as usize * n).div_ceil(1000).max(1);
    Some(sorted[rank - 1])
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Summary {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        p2_5: nearest_rank(&sorted, 25)?,
        p97_5: nearest_rank(&sorted, 975)?,
    })
}

fn train_and_score(
    gold: &[Segmentation],
    config: &TrainConfig,
    inventory: &GraphemeInventory,
) -> Result<PRResult> {
    let words: Vec<Word> = gold.iter().map(|s| s.word().clone()).collect();
    let model = train_words(&words, config, inventory)?;
    let preds: Vec<Segmentation> = words.iter().map(|w| model.segment(w)).collect();
    let r = macro_pr("all", preds.iter().zip(gold))?;
    Ok(PRResult {
        precision: r.macro_precision,
        recall: r.macro_recall,
    })
}

/// Scores a model trained on the real words, then a fresh model on each of
/// `config.sets` matched pseudo-lexicons.
pub fn run_analysis2(
    gold: &[GoldEntry],
    inventory: &GraphemeInventory,
    config: &Analysis2Config,
) -> Result<Analysis2Report> {
    if config.sets == 0 {
        return Err(Error::Invalid("set count must be at least 1".into()));
    }
    let (kept, excluded) = restrict_to_short_morphs(gold, inventory)?;
    if kept.is_empty() {
        return Err(Error::Invalid(
            "no gold words left after excluding long morphs".into(),
        ));
    }
    info!("{} gold words kept, {excluded} excluded", kept.len());
    let train_config = |seed| TrainConfig {
        max_epochs: config.max_epochs,
        ..TrainConfig::with_seed(seed)
    };
    let real_gold: Vec<Segmentation> = kept.iter().map(|e| e.gold.clone()).collect();
    let real = train_and_score(&real_gold, &train_config(config.seed), inventory)?;
    let plan = GenerationPlan::from_gold(&kept, inventory)?;
    let sets = run_indexed(config.sets, config.threads, |k| {
        let seed = config.seed.wrapping_add(k as u64);
        let pseudo = plan.generate(inventory, seed, &config.generation)?;
        let scores = train_and_score(pseudo.ground_truth(), &train_config(seed), inventory)?;
        Ok(SetResult {
            set: k,
            seed,
            scores,
        })
    })?;
    Ok(Analysis2Report {
        real,
        words: kept.len(),
        excluded,
        sets,
    })
}

impl Analysis2Report {
    pub fn precision(&self) -> Summary {
        let v: Vec<f64> = self.sets.iter().map(|s| s.scores.precision).collect();
        summarize(&v).expect("report has at least one set")
    }

    pub fn recall(&self) -> Summary {
        let v: Vec<f64> = self.sets.iter().map(|s| s.scores.recall).collect();
        summarize(&v).expect("report has at least one set")
    }

    /// `set, seed, precision, recall`.
    pub fn sets_tsv(&self) -> String {
        let mut out = String::from("set\tseed\tprecision\trecall\n");
        for s in &self.sets {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                s.set, s.seed, s.scores.precision, s.scores.recall
            );
        }
        out
    }

    /// `metric, real, mean, p2_5, p97_5, sets`.
    pub fn summary_tsv(&self) -> String {
        let mut out = String::from("metric\treal\tmean\tp2_5\tp97_5\tsets\n");
        for (name, real, s) in [
            ("precision", self.real.precision, self.precision()),
            ("recall", self.real.recall, self.recall()),
        ] {
            let _ = writeln!(
                out,
                "{name}\t{real}\t{}\t{}\t{}\t{}",
                s.mean,
                s.p2_5,
                s.p97_5,
                self.sets.len()
            );
        }
        out
    }

    /// Two histogram panels over [0, 1] with a line at the real-data value.
    pub fn svg(&self) -> String {
        let panels = [
            (
                "precision",
                self.real.precision,
                self.sets
                    .iter()
                    .map(|s| s.scores.precision)
                    .collect::<Vec<_>>(),
            ),
            (
                "recall",
                self.real.recall,
                self.sets.iter().map(|s| s.scores.recall).collect(),
            ),
        ];
        let (pw, ph, margin) = (360.0, 220.0, 40.0);
        let width = 2.0 * (pw + margin) + margin;
        let height = ph + 2.0 * margin + 20.0;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            out,
            r#"<rect width="{width}" height="{height}" fill="white"/>"#
        );
        for (i, (name, real, values)) in panels.iter().enumerate() {
            let x0 = margin + i as f64 * (pw + margin);
            let y0 = margin + ph;
            let counts = histogram(values);
            let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
            let bw = pw / HIST_BINS as f64;
            let _ = writeln!(out, r#"<g class="{name}">"#);
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{name} (n = {})</text>"#,
                x0 + pw / 2.0,
                margin - 15.0,
                values.len()
            );
            for (b, &c) in counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let h = ph * c as f64 / max;
                let _ = writeln!(
                    out,
                    r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#7a9cc6" stroke="#2f4b6e"/>"##,
                    x0 + b as f64 * bw,
                    y0 - h,
                    bw,
                    h
                );
            }
            let _ = writeln!(
                out,
                r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="black"/>"#,
                x0 + pw
            );
            for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let x = x0 + t * pw;
                let _ = writeln!(
                    out,
                    r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#,
                    y0 + 5.0,
                    y0 + 18.0
                );
            }
            let rx = x0 + real.clamp(0.0, 1.0) * pw;
            let _ = writeln!(
                out,
                r##"<line x1="{rx:.2}" y1="{:.2}" x2="{rx:.2}" y2="{y0:.2}" stroke="#c0392b" stroke-width="2" stroke-dasharray="6,3"/>"##,
                margin
            );
            let _ = writeln!(
                out,
                r##"<text x="{rx:.2}" y="{:.2}" text-anchor="middle" fill="#c0392b">real {real:.3}</text>"##,
                margin - 2.0
            );
            out.push_str("</g>\n");
        }
        out.push_str("</svg>\n");
        out
    }

    /// Writes `analysis2_sets.tsv`, `analysis2_summary.tsv` and
    /// `analysis2.svg` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join("analysis2_sets.tsv"), &self.sets_tsv())?;
        write_text(&dir.join("analysis2_summary.tsv"), &self.summary_tsv())?;
        write_text(&dir.join("analysis2.svg"), &self.svg())
    }
}

/// Bin counts over [0, 1]; 1.0 falls in the last bin.
pub fn histogram(values: &[f64]) -> [usize; HIST_BINS] {
    let mut counts = [0; HIST_BINS];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
        counts[b] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{default_affix_groups, parse_raters, parse_segmentations};

    fn inv() -> GraphemeInventory {
        GraphemeInventory::maori()
    }

    fn gold(text: &str) -> Vec<GoldEntry> {
        parse_segmentations("test", text, &inv()).unwrap()
    }

    #[test]
    fn nearest_rank_percentiles() {
        let v = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(nearest_rank(&v, 25), Some(0.1));
        assert_eq!(nearest_rank(&v, 975), Some(0.4));
        assert_eq!(nearest_rank(&v, 500), Some(0.2));
        assert_eq!(nearest_rank(&v, 0), Some(0.1));
        assert_eq!(nearest_rank(&[], 500), None);
        let two = summarize(&[0.9, 0.5]).unwrap();
        assert_eq!((two.p2_5, two.p97_5), (0.5, 0.9));
        assert!((two.mean - 0.7).abs() < 1e-15);
        // 40 values: rank ⌈1⌉ = 1 and ⌈39⌉ = 39
        let forty: Vec<f64> = (0..40).map(|i| i as f64).collect();
        assert_eq!(nearest_rank(&forty, 25), Some(0.0));
        assert_eq!(nearest_rank(&forty, 975), Some(38.0));
    }

    #[test]
    fn histogram_edges() {
        let h = histogram(&[0.0, 1.0, 0.5, 1.0 / 30.0 - 1e-12]);
        assert_eq!(h[0], 2);
        assert_eq!(h[15], 1);
        assert_eq!(h[29], 1);
    }

    #[test]
    fn perfect_predictions_score_one_everywhere() {
        let g = gold("whare\twhare\tmonomorphemic\nkaiwhare\tkai+whare\tcompounding\nwharenui\twhare+nui\tcompounding\n");
        let t = category_table(&g, &entry_predictions(&g)).unwrap();
        assert_eq!(
            t,
            "category\tn\tprecision\trecall\nmonomorphemic\t1\t1\t1\ncompounding\t2\t1\t1\n"
        );
    }

    #[test]
    fn affix_rows_for_perfect_and_empty_groups() {
        let g =
            gold("kitea\tkite+a\taffixation\nwhakakite\twhaka+kite\taffixation\nwhare\twhare\n");
        let groups = default_affix_groups();
        let src = PredictionSource {
            name: "gold".into(),
            predictions: entry_predictions(&g),
        };
        let rows = affix_rows(&groups, &g, g.len(), None, std::slice::from_ref(&src)).unwrap();
        for r in &rows {
            if r.n == 0 {
                assert_eq!(r.recovery[0].rate, None);
            } else {
                assert_eq!(r.recovery[0].rate, Some(1.0));
            }
        }
        let table = affix_table(&groups, &rows, &["gold"]);
        assert!(table
            .lines()
            .any(|l| l.starts_with("whaka-\tprefix\ttrue") && l.contains("\t1\t1\t")));
        assert!(table.lines().filter(|l| l.ends_with("\tn=0")).count() >= 3);
    }

    #[test]
    fn voted_raters_act_as_a_source() {
        let g = gold("kitea\tkite+a\naroha\taroha\n");
        let raters = parse_raters(
            "r",
            "kitea\tr1\tkite+a\nkitea\tr2\tkitea\nkitea\tr3\tkite+a\n",
            &inv(),
        )
        .unwrap();
        let voted = vote(&raters).unwrap();
        assert_eq!(voted[0].gold.to_plus_string(), "kite+a");
        assert_eq!(
            rater_count_table(&raters).unwrap(),
            "word\traters\tagreeing\nkitea\t3\t2\n"
        );
        let src = PredictionSource {
            name: "raters".into(),
            predictions: entry_predictions(&voted),
        };
        let rows = affix_rows(&default_affix_groups(), &g, 2, None, &[src]).unwrap();
        let a = rows.iter().find(|r| r.group == "-a,-nga").unwrap();
        assert_eq!(
            a.recovery[0],
            SourceRecovery {
                n: 1,
                rate: Some(1.0)
            }
        );
    }

    #[test]
    fn long_morph_words_are_excluded() {
        let g = gold("kakakaka\tkakakaka\nkaka\tkaka\nwhakarongoa\twhaka+rongo+a\n");
        let (kept, dropped) = restrict_to_short_morphs(&g, &inv()).unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(kept.len(), 2);
    }

    fn tiny_gold() -> Vec<GoldEntry> {
        gold(
            "kakarara\tkaka+rara\nkaka\tkaka\nmaru\tmaru\nrama\tra+ma\nmama\tma+ma\n\
             taku\ttaku\ntakuta\ttaku+ta\nhine\thine\nhinemaru\thine+maru\nkitea\tkite+a\n",
        )
    }

    #[test]
    fn two_sets_give_min_and_max() {
        let cfg = Analysis2Config {
            seed: 3,
            sets: 2,
            threads: Some(1),
            ..Default::default()
        };
        let r = run_analysis2(&tiny_gold(), &inv(), &cfg).unwrap();
        assert_eq!(r.sets.len(), 2);
        let p = r.precision();
        let (a, b) = (r.sets[0].scores.precision, r.sets[1].scores.precision);
        assert_eq!((p.p2_5, p.p97_5), (a.min(b), a.max(b)));
        assert_eq!(r.sets_tsv().lines().count(), 3);
    }

    #[test]
    fn analysis2_is_deterministic_across_threads() {
        let run = |threads| {
            let cfg = Analysis2Config {
                seed: 9,
                sets: 4,
                threads: Some(threads),
                ..Default::default()
            };
            let r = run_analysis2(&tiny_gold(), &inv(), &cfg).unwrap();
            (r.sets_tsv(), r.summary_tsv(), r.svg())
        };
        let one = run(1);
        assert_eq!(one, run(1));
        assert_eq!(one, run(3));
    }

    #[test]
    fn first_error_wins() {
        let r: Result<Vec<usize>> = run_indexed(8, Some(4), |k| {
            if k >= 5 {
                Err(Error::Invalid(k.to_string()))
            } else {
                Ok(k)
            }
        });
        assert!(matches!(r, Err(Error::Invalid(s)) if s == "5"));
    }
}
