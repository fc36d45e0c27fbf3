use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::corpus::ImageFeatureStore;
use crate::error::{Error, Result};
use crate::numerics::DenseVector;

/// One retrieval query: scored candidates (higher is better) and the ids
/// that count as correct.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingQuery {
    pub scores: Vec<(usize, f64)>,
    pub relevant: BTreeSet<usize>,
}

impl RankingQuery {
    /// Candidates are the positions of `scores`.
    pub fn from_dense(scores: &[f64], relevant: impl IntoIterator<Item = usize>) -> Self {
        Self {
            scores: scores.iter().copied().enumerate().collect(),
            relevant: relevant.into_iter().collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.relevant.is_empty() {
            return Err(Error::EmptyInput("groundtruth for a query"));
        }
        let mut seen = BTreeSet::new();
        for &(id, s) in &self.scores {
            if !seen.insert(id) {
                return Err(Error::Duplicate(format!("candidate {id}")));
            }
            if s.is_nan() {
                return Err(Error::NonFinite(format!("score of candidate {id}")));
            }
        }
        if let Some(missing) = self.relevant.iter().find(|r| !seen.contains(r)) {
            return Err(Error::InvalidConfig(format!(
                "groundtruth candidate {missing} has no score"
            )));
        }
        Ok(())
    }

    /// Candidate ids best-first: descending score, then non-groundtruth
    /// before groundtruth, then ascending id. Groundtruth never wins a tie.
    pub fn ranked(&self) -> Vec<usize> {
        let mut order: Vec<(usize, f64, bool)> = self
            .scores
            .iter()
            .map(|&(id, s)| (id, s, self.relevant.contains(&id)))
            .collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.2.cmp(&b.2)).then(a.0.cmp(&b.0)));
        order.into_iter().map(|(id, _, _)| id).collect()
    }

    /// 1-based rank of the first groundtruth candidate.
    pub fn first_relevant_rank(&self) -> Result<usize> {
        self.validate()?;
        let best = self
            .scores
            .iter()
            .filter(|(id, _)| self.relevant.contains(id))
            .map(|&(_, s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        let ahead = self
            .scores
            .iter()
            .filter(|(id, s)| !self.relevant.contains(id) && *s >= best)
            .count();
        Ok(ahead + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalMetrics {
    /// K → percentage of queries whose first groundtruth rank is ≤ K.
    pub recall_at: BTreeMap<usize, f64>,
    /// Lower median of the first-groundtruth ranks.
    pub median_rank: usize,
    /// First-groundtruth rank of every query, in query order.
    pub ranks: Vec<usize>,
}

impl RetrievalMetrics {
    pub fn r_at(&self, k: usize) -> Option<f64> {
        self.recall_at.get(&k).copied()
    }
}

pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

pub fn retrieval_eval(queries: &[RankingQuery], ks: &[usize]) -> Result<RetrievalMetrics> {
    if queries.is_empty() {
        return Err(Error::EmptyInput("queries"));
    }
    let ranks: Vec<usize> = queries
        .par_iter()
        .map(RankingQuery::first_relevant_rank)
        .collect::<Result<_>>()?;
    let n = ranks.len() as f64;
    let recall_at = ks
        .iter()
        .map(|&k| (k, 100.0 * ranks.iter().filter(|&&r| r <= k).count() as f64 / n))
        .collect();
    let mut sorted = ranks.clone();
    sorted.sort_unstable();
    Ok(RetrievalMetrics {
        recall_at,
        median_rank: sorted[(sorted.len() - 1) / 2],
        ranks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecallCurve {
    /// (fraction retrieved, mean groundtruth matches), ascending fraction.
    pub points: Vec<(f64, f64)>,
}

/// Number of candidates retrieved at `fraction` of `total`: `⌈f·C⌉`,
/// guarded against products like `0.1 · 10` rounding just above an integer.
pub fn retrieved_count(fraction: f64, total: usize) -> usize {
    let x = fraction * total as f64;
    let nearest = x.round();
    let c = if (x - nearest).abs() <= 1e-9 * x.max(1.0) { nearest } else { x.ceil() };
    (c as usize).clamp(1, total)
}

/// Mean number of groundtruth items within the top `⌈f·C⌉` candidates, for
/// each fraction `f` in (0, 1].
pub fn recall_curve(queries: &[RankingQuery], fractions: &[f64]) -> Result<RecallCurve> {
    if queries.is_empty() {
        return Err(Error::EmptyInput("queries"));
    }
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::InvalidConfig(format!("fraction {f} outside (0, 1]")));
    }
    let mut fractions = fractions.to_vec();
    fractions.sort_by(f64::total_cmp);
    let per_query: Vec<Vec<usize>> = queries
        .par_iter()
        .map(|q| {
            q.validate()?;
            let ranked = q.ranked();
            Ok(fractions
                .iter()
                .map(|&f| {
                    let top = retrieved_count(f, ranked.len());
                    ranked[..top].iter().filter(|id| q.relevant.contains(id)).count()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let n = queries.len() as f64;
    let points = fractions
        .iter()
        .enumerate()
        .map(|(i, &f)| (f, per_query.iter().map(|m| m[i]).sum::<usize>() as f64 / n))
        .collect();
    Ok(RecallCurve { points })
}

/// Evenly spaced fractions `1/steps, 2/steps, …, 1`.
pub fn default_fractions(steps: usize) -> Vec<f64> {
    (1..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// For each query feature, the ids of the `size` nearest images in `store`
/// by Euclidean distance (ties by id), nearest first.
pub fn shortlist(queries: &[&DenseVector], store: &ImageFeatureStore, size: usize) -> Result<Vec<Vec<String>>> {
    if store.len() < size {
        return Err(Error::InvalidConfig(format!(
            "shortlist of {size} requested from a store of {} images",
            store.len()
        )));
    }
    let entries: Vec<(&str, &DenseVector)> = store.iter().collect();
    queries
        .par_iter()
        .map(|q| {
            crate::error::check_dim("shortlist query", store.dim(), q.dim())?;
            let mut dists: Vec<(f64, &str)> = entries
                .iter()
                .map(|(id, v)| {
                    let d: f64 = v.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d, *id)
                })
                .collect();
            dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
            Ok(dists.into_iter().take(size).map(|(_, id)| id.to_string()).collect())
        })
        .collect()
}
