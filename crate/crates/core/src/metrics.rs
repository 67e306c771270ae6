//! Boundary precision/recall, majority voting and affix recovery.

use std::collections::BTreeMap;

use crate::corpus::{AffixGroup, GoldEntry};
use crate::error::{Error, Result};
use crate::textmodel::{Segmentation, Word};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PRResult {
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryReport {
    pub category: String,
    pub n: usize,
    pub macro_precision: f64,
    pub macro_recall: f64,
}

fn same_word(a: &Segmentation, b: &Segmentation) -> Result<()> {
    if a.word() != b.word() {
        return Err(Error::WordMismatch(
            a.word().surface().to_string(),
            b.word().surface().to_string(),
        ));
    }
    Ok(())
}

/// Boundary precision and recall of one word.
///
/// If neither segmentation has a boundary both are 1. If only one
/// denominator is zero, that metric is 0.
pub fn word_pr(pred: &Segmentation, gold: &Segmentation) -> Result<PRResult> {
    same_word(pred, gold)?;
    let (p, g) = (pred.boundaries(), gold.boundaries());
    if p.is_empty() && g.is_empty() {
        return Ok(PRResult {
            precision: 1.0,
            recall: 1.0,
        });
    }
    let hits = p.intersection(g).count() as f64;
    let ratio = |d: usize| if d == 0 { 0.0 } else { hits / d as f64 };
    Ok(PRResult {
        precision: ratio(p.len()),
        recall: ratio(g.len()),
    })
}

/// Mean of per-word precision and recall.
pub fn macro_pr<'a>(
    category: &str,
    pairs: impl IntoIterator<Item = (&'a Segmentation, &'a Segmentation)>,
) -> Result<CategoryReport> {
    let (mut n, mut p, mut r) = (0usize, 0.0, 0.0);
    for (pred, gold) in pairs {
        let pr = word_pr(pred, gold)?;
        n += 1;
        p += pr.precision;
        r += pr.recall;
    }
    if n == 0 {
        return Err(Error::EmptyCategory);
    }
    Ok(CategoryReport {
        category: category.to_string(),
        n,
        macro_precision: p / n as f64,
        macro_recall: r / n as f64,
    })
}

/// Macro P/R per category, in order of first appearance. Entries without a
/// category fall under `uncategorized`.
pub fn category_reports(
    entries: &[GoldEntry],
    preds: &BTreeMap<Word, Segmentation>,
) -> Result<Vec<CategoryReport>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<(&Segmentation, &Segmentation)>> = BTreeMap::new();
    for e in entries {
        let cat = e.category.clone().unwrap_or_else(|| "uncategorized".into());
        let pred = preds
            .get(e.word())
            .ok_or_else(|| Error::MissingWord(e.word().surface().to_string()))?;
        if !groups.contains_key(&cat) {
            order.push(cat.clone());
        }
        groups.entry(cat).or_default().push((pred, &e.gold));
    }
    order
        .iter()
        .map(|c| macro_pr(c, groups[c].iter().copied()))
        .collect()
}

/// A site gets a boundary iff strictly more than half of the responses
/// place one there.
pub fn majority_vote(responses: &[Segmentation]) -> Result<Segmentation> {
    let first = responses.first().ok_or(Error::EmptyCategory)?;
    let mut votes = vec![0usize; first.word().len()];
    for r in responses {
        same_word(first, r)?;
        for &b in r.boundaries() {
            votes[b] += 1;
        }
    }
    let n = responses.len();
    Segmentation::new(
        first.word().clone(),
        votes
            .iter()
            .enumerate()
            .filter(|&(_, &v)| 2 * v > n)
            .map(|(site, _)| site),
    )
}

/// Whether `pred` separates the group's affix: a boundary at the
/// affix/stem junction and none strictly inside the affix. Boundaries in
/// the stem are ignored.
pub fn affix_recovered(entry: &GoldEntry, group: &AffixGroup, pred: &Segmentation) -> Result<bool> {
    same_word(pred, &entry.gold)?;
    let span = group.match_entry(entry).ok_or_else(|| {
        Error::GroupMismatch(entry.word().surface().to_string(), group.name.clone())
    })?;
    let b = pred.boundaries();
    Ok(b.contains(&span.junction) && !b.iter().any(|&s| span.contains_inner(s)))
}

/// Share of `entries` whose affix from `group` is recovered in `preds`.
pub fn recovery_rate(
    entries: &[&GoldEntry],
    group: &AffixGroup,
    preds: &BTreeMap<Word, Segmentation>,
) -> Result<f64> {
    if entries.is_empty() {
        return Err(Error::EmptyCategory);
    }
    let mut hits = 0usize;
    for e in entries {
        let pred = preds
            .get(e.word())
            .ok_or_else(|| Error::MissingWord(e.word().surface().to_string()))?;
        hits += usize::from(affix_recovered(e, group, pred)?);
    }
    Ok(hits as f64 / entries.len() as f64)
}

/// Gold entries in which `group` separates off one of its forms.
pub fn group_members<'a>(entries: &'a [GoldEntry], group: &AffixGroup) -> Vec<&'a GoldEntry> {
    entries
        .iter()
        .filter(|e| group.match_entry(e).is_some())
        .collect()
}
