use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use morphlab::corpus::{
    default_affix_groups, load_affix_groups, load_lexicon, load_raters, load_segmentations,
    write_segmentations, GoldEntry, Lexicon,
};
use morphlab::frequency::{sgt_smooth, CountTable};
use morphlab::pipeline::{
    affix_rows, affix_table, category_table, entry_predictions, generate_sets, model_predictions,
    rater_count_table, restrict_to_short_morphs, run_analysis2, vote, Analysis2Config,
    GenerationPlan, PredictionSource,
};
use morphlab::pseudogen::{GenConfig, DEFAULT_RETRY_BUDGET};
#[cfg(test)]
use morphlab::segmenter::MODEL_FORMAT_VERSION;
use morphlab::segmenter::{train, MorphModel, TrainConfig, DEFAULT_RANDOM_RESTARTS};
use morphlab::textmodel::GraphemeInventory;
use morphlab::{Error, Result};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (model format 1)");

#[derive(Parser)]
#[command(name = "morphlab", version = VERSION, about = "MDL morphological segmentation and pseudo-lexicon experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a segmentation model on a word list.
    Train {
        /// One word per line.
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        max_epochs: usize,
        /// Stop when an epoch gains fewer bits than this (default: 0.005 per word).
        #[arg(long)]
        threshold: Option<f64>,
        /// Extra runs from random initial splits; the cheapest run wins.
        #[arg(long, default_value_t = DEFAULT_RANDOM_RESTARTS)]
        restarts: usize,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment a word list with a trained model.
    Segment {
        #[arg(long)]
        model: PathBuf,
        /// One word per line.
        #[arg(long)]
        input: PathBuf,
        /// Segmentation TSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against gold by category and by affix group.
    Eval {
        #[command(flatten)]
        gold: GoldArgs,
        /// Predicted segmentation TSV.
        #[arg(long, conflicts_with = "model", required_unless_present = "model")]
        pred: Option<PathBuf>,
        /// Model to segment the gold words with.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        freq: FrequencyArgs,
        /// Directory for categories.tsv and affixes.tsv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Majority-vote rater responses into one segmentation per word.
    Vote {
        /// Rater TSV: word, rater, morphs.
        #[arg(long)]
        raters: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-word rater counts here.
        #[arg(long)]
        counts: Option<PathBuf>,
    },
    /// Affix frequencies and recovery rates per prediction source.
    AffixReport {
        #[command(flatten)]
        gold: GoldArgs,
        /// Predictions as NAME=PATH to a segmentation TSV; repeatable.
        #[arg(long = "pred", value_parser = parse_named)]
        preds: Vec<(String, PathBuf)>,
        /// Model to segment the gold words with (source "model").
        #[arg(long)]
        model: Option<PathBuf>,
        /// Rater TSV, majority-voted (source "raters").
        #[arg(long)]
        raters: Option<PathBuf>,
        #[command(flatten)]
        freq: FrequencyArgs,
        /// Report TSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate pseudo-lexicons matched to a gold set.
    GenPseudo {
        #[command(flatten)]
        gold: GoldArgs,
        #[command(flatten)]
        sets: SetArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare segmentation quality on real words against matched pseudo-lexicons.
    Analysis2 {
        #[command(flatten)]
        gold: GoldArgs,
        #[command(flatten)]
        sets: SetArgs,
        #[arg(long, default_value_t = 50)]
        max_epochs: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GoldArgs {
    /// Gold segmentation TSV: word, morphs, [category, [subcategory]].
    #[arg(long)]
    gold: PathBuf,
}

#[derive(Args)]
struct FrequencyArgs {
    /// Affix group JSON (default: the bundled groups).
    #[arg(long)]
    groups: Option<PathBuf>,
    /// Dictionary word list for type frequencies (default: the gold words).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Corpus counts TSV for token frequencies.
    #[arg(long)]
    counts: Option<PathBuf>,
}

#[derive(Args)]
struct SetArgs {
    #[arg(long, default_value_t = 1000)]
    sets: usize,
    /// Set k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_RETRY_BUDGET)]
    retry_budget: u32,
}

impl SetArgs {
    fn generation(&self) -> GenConfig {
        GenConfig {
            retry_budget: self.retry_budget,
            ..GenConfig::default()
        }
    }
}

fn parse_named(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

fn load_gold(args: &GoldArgs, inv: &GraphemeInventory) -> Result<Vec<GoldEntry>> {
    let gold = load_segmentations(&args.gold, inv)?;
    if gold.is_empty() {
        return Err(Error::Invalid(format!(
            "{}: no gold entries",
            args.gold.display()
        )));
    }
    Ok(gold)
}

/// Predictions from a segmentation TSV, restricted to gold words.
fn load_predictions(
    path: &Path,
    gold: &[GoldEntry],
    inv: &GraphemeInventory,
) -> Result<PredictionSource> {
    let entries = load_segmentations(path, inv)?;
    let predictions = entry_predictions(&entries);
    Ok(PredictionSource {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        predictions: gold
            .iter()
            .filter_map(|e| predictions.get_key_value(e.word()))
            .map(|(w, s)| (w.clone(), s.clone()))
            .collect(),
    })
}

fn affix_report(
    gold: &[GoldEntry],
    freq: &FrequencyArgs,
    sources: &[PredictionSource],
    inv: &GraphemeInventory,
) -> Result<String> {
    let groups = match &freq.groups {
        Some(p) => load_affix_groups(p, inv)?,
        None => default_affix_groups(),
    };
    let dictionary = match &freq.lexicon {
        Some(p) => load_lexicon(p, inv)?,
        None => Lexicon::new("gold", gold.iter().map(|e| e.word().clone()).collect())?,
    };
    let smoothed = match &freq.counts {
        Some(p) => Some(sgt_smooth(&CountTable::load(p)?, &dictionary)?),
        None => None,
    };
    let rows = affix_rows(&groups, gold, dictionary.len(), smoothed.as_ref(), sources)?;
    let names: Vec<&str> = sources.iter().map(|s| s.name.as_str()).collect();
    Ok(affix_table(&groups, &rows, &names))
}

fn run(cli: Cli) -> Result<()> {
    let inv = GraphemeInventory::maori();
    match cli.command {
        Command::Train {
            lexicon,
            seed,
            max_epochs,
            threshold,
            restarts,
            out,
        } => {
            let lexicon = load_lexicon(&lexicon, &inv)?;
            let config = TrainConfig {
                max_epochs,
                convergence_threshold: threshold,
                random_restarts: restarts,
                ..TrainConfig::with_seed(seed)
            };
            let model = train(&lexicon, &config)?;
            info!(
                "{} words, {} morph types, {:.3} bits after {} epochs",
                lexicon.len(),
                model.morph_type_count(),
                model.cost(),
                model.epochs_run()
            );
            model.save(&out)
        }
        Command::Segment { model, input, out } => {
            let model = MorphModel::load(&model, &inv)?;
            let words = load_lexicon(&input, &inv)?;
            let entries: Vec<GoldEntry> = words
                .words()
                .iter()
                .map(|w| GoldEntry::new(model.segment(w)))
                .collect();
            write_segmentations(&out, &entries)
        }
        Command::Eval {
            gold,
            pred,
            model,
            freq,
            out,
        } => {
            let gold = load_gold(&gold, &inv)?;
            let source = match (pred, model) {
                (Some(p), _) => load_predictions(&p, &gold, &inv)?,
                (None, Some(m)) => PredictionSource {
                    name: "model".into(),
                    predictions: model_predictions(&MorphModel::load(&m, &inv)?, &gold),
                },
                (None, None) => unreachable!("clap requires one of --pred and --model"),
            };
            let categories = category_table(&gold, &source.predictions)?;
            let affixes = affix_report(&gold, &freq, std::slice::from_ref(&source), &inv)?;
            morphlab::corpus::write_text(&out.join("categories.tsv"), &categories)?;
            morphlab::corpus::write_text(&out.join("affixes.tsv"), &affixes)
        }
        Command::Vote {
            raters,
            out,
            counts,
        } => {
            let data = load_raters(&raters, &inv)?;
            if let Some(path) = counts {
                morphlab::corpus::write_text(&path, &rater_count_table(&data)?)?;
            }
            write_segmentations(&out, &vote(&data)?)
        }
        Command::AffixReport {
            gold,
            preds,
            model,
            raters,
            freq,
            out,
        } => {
            let gold = load_gold(&gold, &inv)?;
            let mut sources = Vec::new();
            if let Some(m) = model {
                sources.push(PredictionSource {
                    name: "model".into(),
                    predictions: model_predictions(&MorphModel::load(&m, &inv)?, &gold),
                });
            }
            for (name, path) in preds {
                let mut s = load_predictions(&path, &gold, &inv)?;
                s.name = name;
                sources.push(s);
            }
            if let Some(r) = raters {
                sources.push(PredictionSource {
                    name: "raters".into(),
                    predictions: entry_predictions(&vote(&load_raters(&r, &inv)?)?),
                });
            }
            morphlab::corpus::write_text(&out, &affix_report(&gold, &freq, &sources, &inv)?)
        }
        Command::GenPseudo { gold, sets, out } => {
            let gold = load_gold(&gold, &inv)?;
            let (kept, excluded) = restrict_to_short_morphs(&gold, &inv)?;
            info!("{} gold words kept, {excluded} excluded", kept.len());
            let plan = GenerationPlan::from_gold(&kept, &inv)?;
            let lexicons = generate_sets(
                &plan,
                &inv,
                sets.seed,
                sets.sets,
                &sets.generation(),
                sets.threads,
            )?;
            for (k, p) in lexicons.iter().enumerate() {
                p.write(&out.join(format!("pseudo_{k:04}.tsv")))?;
            }
            Ok(())
        }
        Command::Analysis2 {
            gold,
            sets,
            max_epochs,
            out,
        } => {
            let gold = load_gold(&gold, &inv)?;
            let config = Analysis2Config {
                seed: sets.seed,
                sets: sets.sets,
                threads: sets.threads,
                generation: sets.generation(),
                max_epochs,
            };
            let report = run_analysis2(&gold, &inv, &config)?;
            let (p, r) = (report.precision(), report.recall());
            info!(
                "real P/R {:.3}/{:.3}; pseudo mean P/R {:.3}/{:.3}",
                report.real.precision, report.real.recall, p.mean, r.mean
            );
            report.write(&out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("morphlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn version_names_the_model_format() {
        assert!(VERSION.ends_with(&format!("(model format {MODEL_FORMAT_VERSION})")));
    }

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }
}
