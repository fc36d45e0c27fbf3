use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{check_dim, Error, Result};

/// How B-n combines the per-order precisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BleuMode {
    /// Geometric mean of orders 1..=n.
    #[default]
    Cumulative,
    /// Order-n precision alone.
    OrderOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    /// `scores[n-1]` is B-n, brevity penalty included.
    pub scores: Vec<f64>,
    /// Clipped precision of each order.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl BleuScore {
    pub fn b(&self, n: usize) -> f64 {
        self.scores[n - 1]
    }

    pub fn b1(&self) -> f64 {
        self.b(1)
    }

    pub fn b2(&self) -> f64 {
        self.b(2)
    }

    pub fn b3(&self) -> f64 {
        self.b(3)
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    for g in tokens.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Corpus-level BLEU with clipped n-gram counts, no smoothing. Each
/// candidate's effective reference length is the closest reference length
/// (the shorter on ties).
pub fn bleu<T: Eq + Hash>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>], n_max: usize, mode: BleuMode) -> Result<BleuScore> {
    check_dim("reference sets", candidates.len(), references.len())?;
    if candidates.is_empty() {
        return Err(Error::EmptyInput("candidates"));
    }
    if n_max == 0 {
        return Err(Error::InvalidConfig("BLEU order must be at least 1".into()));
    }
    let mut matched = vec![0usize; n_max];
    let mut total = vec![0usize; n_max];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);

    for (cand, refs) in candidates.iter().zip(references) {
        if refs.is_empty() {
            return Err(Error::EmptyInput("reference set"));
        }
        cand_len += cand.len();
        ref_len += refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| (l.abs_diff(cand.len()), l))
            .unwrap_or(0);
        for n in 1..=n_max {
            let mut max_ref: HashMap<&[T], usize> = HashMap::new();
            for r in refs {
                for (g, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            for (g, c) in ngram_counts(cand, n) {
                matched[n - 1] += c.min(max_ref.get(g).copied().unwrap_or(0));
                total[n - 1] += c;
            }
        }
    }

    let precisions: Vec<f64> = matched
        .iter()
        .zip(&total)
        .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
        .collect();
    let brevity_penalty = if cand_len == 0 {
        0.0
    } else if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    let scores = (1..=n_max)
        .map(|n| match mode {
            BleuMode::OrderOnly => brevity_penalty * precisions[n - 1],
            BleuMode::Cumulative => {
                let ps = &precisions[..n];
                if ps.contains(&0.0) {
                    0.0
                } else {
                    brevity_penalty * (ps.iter().map(|p| p.ln()).sum::<f64>() / n as f64).exp()
                }
            }
        })
        .collect();
    Ok(BleuScore {
        scores,
        precisions,
        brevity_penalty,
        candidate_len: cand_len,
        reference_len: ref_len,
    })
}
