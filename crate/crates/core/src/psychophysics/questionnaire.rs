use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::wilcoxon::{wilcoxon_signed_rank, Alternative, WilcoxonResult};
use crate::error::{Error, Result};

/// One 0-6 rating.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionnaireRecord {
    pub subject: u32,
    pub session: String,
    pub item: String,
    pub rating: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemTest {
    pub item: String,
    pub n_pairs: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub test: Result<WilcoxonResult>,
}

fn check(records: &[QuestionnaireRecord]) -> Result<()> {
    for r in records {
        if r.rating > 6 {
            return Err(Error::Domain { what: "questionnaire rating", value: r.rating as f64 });
        }
    }
    Ok(())
}

/// Per item, pairs each subject's rating in `session_a` with the one in
/// `session_b` and runs a two-tailed signed-rank test on a - b.
pub fn analyze_symptoms(records: &[QuestionnaireRecord], session_a: &str, session_b: &str) -> Result<Vec<ItemTest>> {
    check(records)?;
    let mut by_item: BTreeMap<&str, BTreeMap<u32, (Option<f64>, Option<f64>)>> = BTreeMap::new();
    for r in records {
        let slot = by_item.entry(&r.item).or_default().entry(r.subject).or_default();
        if r.session == session_a {
            slot.0 = Some(r.rating as f64);
        } else if r.session == session_b {
            slot.1 = Some(r.rating as f64);
        }
    }
    Ok(by_item
        .into_iter()
        .map(|(item, subjects)| {
            let pairs: Vec<(f64, f64)> = subjects.values().filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect();
            let n = pairs.len().max(1) as f64;
            ItemTest {
                item: item.into(),
                n_pairs: pairs.len(),
                mean_a: pairs.iter().map(|p| p.0).sum::<f64>() / n,
                mean_b: pairs.iter().map(|p| p.1).sum::<f64>() / n,
                test: wilcoxon_signed_rank(&pairs, Alternative::TwoSided),
            }
        })
        .collect())
}

/// Preference ratings tested against the scale midpoint `neutral`
/// (two-tailed). `mean_a` is the mean rating, `mean_b` the midpoint.
pub fn analyze_preferences(records: &[QuestionnaireRecord], neutral: f64) -> Result<Vec<ItemTest>> {
    check(records)?;
    let mut by_item: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_item.entry(&r.item).or_default().push(r.rating as f64);
    }
    Ok(by_item
        .into_iter()
        .map(|(item, v)| {
            let pairs: Vec<(f64, f64)> = v.iter().map(|&x| (x, neutral)).collect();
            ItemTest {
                item: item.into(),
                n_pairs: pairs.len(),
                mean_a: v.iter().sum::<f64>() / v.len() as f64,
                mean_b: neutral,
                test: wilcoxon_signed_rank(&pairs, Alternative::TwoSided),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(subject: u32, session: &str, item: &str, rating: u8) -> QuestionnaireRecord {
        QuestionnaireRecord { subject, session: session.into(), item: item.into(), rating }
    }

    #[test]
    fn paired_by_subject() {
        let mut r = Vec::new();
        for s in 0..8 {
            r.push(rec(s, "fixed", "eye strain", 4));
            r.push(rec(s, "dynamic", "eye strain", (s % 3) as u8));
        }
        let out = analyze_symptoms(&r, "fixed", "dynamic").unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].n_pairs, 8);
        assert!(out[0].test.as_ref().unwrap().p < 0.05);
        assert!(analyze_symptoms(&[rec(0, "a", "x", 9)], "a", "b").is_err());
    }
}
