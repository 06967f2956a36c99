//! Accuracy, negative log-likelihood, expected calibration error and AUROC.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub nll: f64,
    pub ece: f64,
    /// `None` when every prediction is correct (or every one wrong).
    pub auroc: Option<f64>,
    pub n_examples: usize,
}

impl MetricsReport {
    pub fn compute(probs: &DMatrix<f64>, labels: &[usize]) -> Result<Self> {
        let acc = accuracy(probs, labels)?;
        let (conf, correct) = confidences(probs, labels)?;
        let auroc = if correct.iter().all(|&c| c) || correct.iter().all(|&c| !c) {
            None
        } else {
            Some(auroc(&correct, &conf)?)
        };
        Ok(Self {
            accuracy: acc,
            nll: nll(probs, labels)?,
            ece: ece(probs, labels, 20)?,
            auroc,
            n_examples: labels.len(),
        })
    }
}

fn check(probs: &DMatrix<f64>, labels: &[usize]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::Config("metrics need at least one example".into()));
    }
    check_len("labels", probs.nrows(), labels.len())?;
    if let Some(&y) = labels.iter().find(|&&y| y >= probs.ncols()) {
        return Err(Error::Domain(format!("label {y} out of range")));
    }
    Ok(())
}

fn argmax(row: impl Iterator<Item = f64>) -> (usize, f64) {
    row.enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

/// Max-probability confidence and correctness of each prediction (ties go to the lowest class).
pub fn confidences(probs: &DMatrix<f64>, labels: &[usize]) -> Result<(Vec<f64>, Vec<bool>)> {
    check(probs, labels)?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(r, &y)| {
            let (k, p) = argmax(probs.row(r).iter().copied());
            (p, k == y)
        })
        .unzip())
}

pub fn accuracy(probs: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    let (_, correct) = confidences(probs, labels)?;
    Ok(correct.iter().filter(|&&c| c).count() as f64 / labels.len() as f64)
}

/// Mean `-log p(label)` with probabilities clamped at 1e-12.
pub fn nll(probs: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    check(probs, labels)?;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &y)| -probs[(r, y)].max(PROB_FLOOR).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

/// Expected calibration error with equal-width bins `[k/n, (k+1)/n)`, the last closed at 1.
pub fn ece(probs: &DMatrix<f64>, labels: &[usize], bins: usize) -> Result<f64> {
    if bins == 0 {
        return Err(Error::Config("ece needs at least one bin".into()));
    }
    let (conf, correct) = confidences(probs, labels)?;
    Ok(ece_from(&conf, &correct, bins))
}

pub fn ece_from(conf: &[f64], correct: &[bool], bins: usize) -> f64 {
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    let mut hits = vec![0usize; bins];
    for (&c, &ok) in conf.iter().zip(correct) {
        let b = ((c * bins as f64).floor() as usize).min(bins - 1);
        count[b] += 1;
        conf_sum[b] += c;
        hits[b] += ok as usize;
    }
    let n = conf.len() as f64;
    (0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let nb = count[b] as f64;
            nb / n * (hits[b] as f64 / nb - conf_sum[b] / nb).abs()
        })
        .sum()
}

/// Mann-Whitney AUROC with midranks; `positive[i]` marks the positive class.
pub fn auroc(positive: &[bool], scores: &[f64]) -> Result<f64> {
    check_len("scores", positive.len(), scores.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Domain("NaN score".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Domain("AUROC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based: i+1 ..= j+1
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += order[i..=j].iter().filter(|&&k| positive[k]).count() as f64 * mid;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}
