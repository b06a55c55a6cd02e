//! Recovery metrics against known ground truth.
//!
//! Blind separation fixes sources only up to permutation, sign and scale, so
//! estimated rows are first matched to true rows by absolute Pearson
//! correlation, then scored.

use serde::{Deserialize, Serialize};

use crate::amuse::UnmixingModel;
use crate::linalg::pinv_full_column_rank;
use crate::spectra_model::MixingMatrix;
use crate::{Error, Matrix, Result};

/// Largest component count solved by exhaustive search over permutations.
pub const EXHAUSTIVE_MATCH_LIMIT: usize = 6;

/// Pearson correlation of two equal-length series; `None` if either is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "pearson needs equal-length inputs");
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa.sqrt() * sbb.sqrt()))
}

/// Cosine of the angle between two vectors; 0 if either is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Assignment of estimated components to true components.
///
/// All vectors are indexed by estimated component `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `permutation[i]` is the true component matched to estimate `i`.
    pub permutation: Vec<usize>,
    pub signs: Vec<f64>,
    /// Least-squares factor taking the sign-adjusted, mean-removed estimate
    /// onto the mean-removed true row.
    pub scales: Vec<f64>,
    /// Signed Pearson correlation of each matched pair.
    pub correlations: Vec<f64>,
    /// False when the greedy fallback (more than [`EXHAUSTIVE_MATCH_LIMIT`]
    /// components) was used.
    pub exact: bool,
}

impl MatchResult {
    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    /// Correlations reordered by true component.
    pub fn correlations_by_truth(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, &j) in self.permutation.iter().enumerate() {
            out[j] = self.correlations[i];
        }
        out
    }

    /// Estimate rows reordered into the truth order and multiplied by their sign and scale.
    pub fn align(&self, estimate: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(estimate.nrows(), estimate.ncols());
        for (i, &j) in self.permutation.iter().enumerate() {
            out.set_row(j, &(estimate.row(i) * (self.signs[i] * self.scales[i])));
        }
        out
    }
}

fn centered_rows(m: &Matrix, which: &'static str) -> Result<Vec<Vec<f64>>> {
    m.row_iter()
        .enumerate()
        .map(|(i, r)| {
            let mean = r.mean();
            let row: Vec<f64> = r.iter().map(|v| v - mean).collect();
            if row.iter().all(|&v| v == 0.0) {
                Err(Error::UndefinedCorrelation { which, row: i })
            } else {
                Ok(row)
            }
        })
        .collect()
}

/// Matches estimated rows to true rows, maximizing the summed |r|.
pub fn match_sources(truth: &Matrix, estimate: &Matrix) -> Result<MatchResult> {
    if truth.shape() != estimate.shape() {
        return Err(Error::dim(format!(
            "truth is {:?} but estimate is {:?}",
            truth.shape(),
            estimate.shape()
        )));
    }
    let n = truth.nrows();
    if n == 0 {
        return Err(Error::dim("no components to match"));
    }
    let t = centered_rows(truth, "truth")?;
    let e = centered_rows(estimate, "estimate")?;
    let corr: Vec<Vec<f64>> = e
        .iter()
        .map(|ei| {
            t.iter()
                .map(|tj| pearson(ei, tj).expect("rows have variance"))
                .collect()
        })
        .collect();
    let abs: Vec<Vec<f64>> = corr
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).collect())
        .collect();

    let exact = n <= EXHAUSTIVE_MATCH_LIMIT;
    let permutation = if exact {
        best_assignment(&abs)
    } else {
        greedy_assignment(&abs)
    };

    let mut signs = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    let mut correlations = Vec::with_capacity(n);
    for (i, &j) in permutation.iter().enumerate() {
        let r = corr[i][j];
        let sign = if r < 0.0 { -1.0 } else { 1.0 };
        let num: f64 = e[i].iter().zip(&t[j]).map(|(a, b)| sign * a * b).sum();
        let den: f64 = e[i].iter().map(|a| a * a).sum();
        signs.push(sign);
        scales.push(num / den);
        correlations.push(r);
    }
    Ok(MatchResult {
        permutation,
        signs,
        scales,
        correlations,
        exact,
    })
}

/// Exhaustive search; among equal scores the lexicographically first permutation wins.
fn best_assignment(score: &[Vec<f64>]) -> Vec<usize> {
    fn recurse(
        score: &[Vec<f64>],
        row: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<usize>,
        acc: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        if row == score.len() {
            if acc > best.0 {
                *best = (acc, current.clone());
            }
            return;
        }
        for j in 0..score.len() {
            if !used[j] {
                used[j] = true;
                current.push(j);
                recurse(score, row + 1, used, current, acc + score[row][j], best);
                current.pop();
                used[j] = false;
            }
        }
    }
    let n = score.len();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    recurse(
        score,
        0,
        &mut vec![false; n],
        &mut Vec::with_capacity(n),
        0.0,
        &mut best,
    );
    best.1
}

/// Repeatedly takes the largest remaining score. Not guaranteed optimal.
fn greedy_assignment(score: &[Vec<f64>]) -> Vec<usize> {
    let n = score.len();
    let mut perm = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for _ in 0..n {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for (i, row) in score.iter().enumerate() {
            if perm[i] != usize::MAX {
                continue;
            }
            for (j, &s) in row.iter().enumerate() {
                if !taken[j] && s > best.0 {
                    best = (s, i, j);
                }
            }
        }
        perm[best.1] = best.2;
        taken[best.2] = true;
    }
    perm
}

/// Amari performance index of `G = pinv(A_est) A_true`.
///
/// Both matrices have their columns scaled to unit length first, so the
/// index ignores the scale and sign of every column and the order of the
/// columns of either argument. Zero exactly when `G` is a scaled
/// permutation. A single component is always perfectly recovered and
/// scores 0.
pub fn amari_index(a_true: &Matrix, a_est: &Matrix) -> Result<f64> {
    if a_true.shape() != a_est.shape() {
        return Err(Error::dim(format!(
            "true mixing is {:?} but estimate is {:?}",
            a_true.shape(),
            a_est.shape()
        )));
    }
    let n = a_est.ncols();
    let g =
        pinv_full_column_rank(&unit_columns(a_est, "estimated")?)? * unit_columns(a_true, "true")?;
    if n == 1 {
        return Ok(0.0);
    }
    let g = g.abs();
    let mut total = 0.0;
    for row in g.row_iter() {
        let max = row.max();
        if max == 0.0 {
            return Err(Error::Singular("gain matrix has an all-zero row".into()));
        }
        total += row.sum() / max - 1.0;
    }
    for col in g.column_iter() {
        let max = col.max();
        if max == 0.0 {
            return Err(Error::Singular("gain matrix has an all-zero column".into()));
        }
        total += col.sum() / max - 1.0;
    }
    Ok(total / (2.0 * n as f64 * (n as f64 - 1.0)))
}

fn unit_columns(a: &Matrix, which: &str) -> Result<Matrix> {
    let mut out = a.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Singular(format!(
                "{which} mixing column {j} has no finite nonzero length"
            )));
        }
        col /= norm;
    }
    Ok(out)
}

/// One mixing-matrix column read as a per-pixel abundance curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationProfile {
    pub component: usize,
    pub weights: Vec<f64>,
}

pub fn concentration_profiles(a: &Matrix) -> Vec<ConcentrationProfile> {
    a.column_iter()
        .enumerate()
        .map(|(component, col)| ConcentrationProfile {
            component,
            weights: col.iter().copied().collect(),
        })
        .collect()
}

pub fn mixing_profiles(a: &MixingMatrix) -> Vec<ConcentrationProfile> {
    concentration_profiles(a.entries())
}

/// Fraction of matched components whose signed correlation is positive.
pub fn sign_accuracy(truth: &Matrix, corrected: &Matrix) -> Result<f64> {
    let m = match_sources(truth, corrected)?;
    let positive = m.correlations.iter().filter(|&&r| r > 0.0).count();
    Ok(positive as f64 / m.len() as f64)
}

/// Signed cosine between each true mixing column and its matched estimated
/// column, indexed by true component.
pub fn column_cosines(a_true: &Matrix, a_est: &Matrix, matching: &MatchResult) -> Result<Vec<f64>> {
    if a_true.shape() != a_est.shape() || a_est.ncols() != matching.len() {
        return Err(Error::dim(format!(
            "true mixing {:?}, estimate {:?} and a {}-component matching disagree",
            a_true.shape(),
            a_est.shape(),
            matching.len()
        )));
    }
    let mut out = vec![0.0; matching.len()];
    for (i, &j) in matching.permutation.iter().enumerate() {
        let t: Vec<f64> = a_true.column(j).iter().copied().collect();
        let e: Vec<f64> = a_est.column(i).iter().copied().collect();
        out[j] = cosine(&t, &e);
    }
    Ok(out)
}

/// Metrics document written by the `evaluate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_sources: usize,
    pub matching: MatchResult,
    /// Signed correlations indexed by true component.
    pub correlations: Vec<f64>,
    pub min_abs_correlation: f64,
    pub amari_index: f64,
    pub sign_accuracy: f64,
    /// Signed mixing-column cosines indexed by true component.
    pub mixing_column_cosines: Vec<f64>,
    pub sign_corrected: bool,
}

pub fn evaluate(
    truth_sources: &Matrix,
    truth_mixing: &Matrix,
    model: &UnmixingModel,
) -> Result<MetricsReport> {
    if truth_sources.nrows() != model.n_sources || truth_mixing.ncols() != model.n_sources {
        return Err(Error::dim(format!(
            "model has {} sources but the truth has {} spectra and {} mixing columns",
            model.n_sources,
            truth_sources.nrows(),
            truth_mixing.ncols()
        )));
    }
    if truth_mixing.nrows() != model.pixels() {
        return Err(Error::dim(format!(
            "model has {} pixels but the true mixing matrix has {}",
            model.pixels(),
            truth_mixing.nrows()
        )));
    }
    let matching = match_sources(truth_sources, &model.sources)?;
    let correlations = matching.correlations_by_truth();
    let min_abs_correlation = correlations
        .iter()
        .fold(f64::INFINITY, |a, r| a.min(r.abs()));
    let positive = matching.correlations.iter().filter(|&&r| r > 0.0).count();
    Ok(MetricsReport {
        n_sources: model.n_sources,
        amari_index: amari_index(truth_mixing, &model.mixing_estimate)?,
        mixing_column_cosines: column_cosines(truth_mixing, &model.mixing_estimate, &matching)?,
        sign_accuracy: positive as f64 / matching.len() as f64,
        correlations,
        min_abs_correlation,
        matching,
        sign_corrected: model.sign_correction.is_some(),
    })
}
