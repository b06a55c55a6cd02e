//! Peak-direction canonicalization of estimated spectra.
//!
//! A second-order separation returns every source up to an arbitrary sign.
//! Absorption-like spectra are mostly a long flat stretch with peaks rising
//! above it, so the sign is fixed by:
//!
//! 1. taking the baseline `b` as the centre of the most populated bin of the
//!    spectrum's intensity histogram;
//! 2. locating local extrema from sign changes of the first difference and
//!    taking the largest (`p_max`) and smallest (`p_min`) extremum values;
//! 3. keeping the spectrum when its extrema sit predominantly above `b` and
//!    flipping it when they sit predominantly below (see [`judge_direction`]).
//!
//! Flipping source `i` also negates column `i` of the mixing estimate so
//! that the product `A S` is unchanged.

use serde::{Deserialize, Serialize};

use crate::amuse::UnmixingModel;
use crate::spectra_model::Spectrum;
use crate::{Error, Result};

pub const DEFAULT_BINS: usize = 10;

/// Equal-width intensity histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    bin_centers: Vec<f64>,
    counts: Vec<usize>,
    bin_width: f64,
}

impl Histogram {
    pub fn bin_centers(&self) -> &[f64] {
        &self.bin_centers
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    /// Zero for the single-bin histogram of a constant spectrum.
    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Histogram of a spectrum's intensities over `[min, max]` in `bins` equal bins.
///
/// Sample `v` falls in bin `ceil((v - min) / w)` (1-based), clamped to
/// `1..=bins`, so the minimum lands in the first bin and the maximum in the
/// last. A constant spectrum yields a single bin holding every sample.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::invalid("cannot histogram an empty spectrum"));
    }
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("spectrum contains non-finite values"));
    }
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if max == min {
        return Ok(Histogram {
            bin_centers: vec![min],
            counts: vec![values.len()],
            bin_width: 0.0,
        });
    }
    let width = (max - min) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = ((v - min) / width).ceil() as usize;
        counts[k.clamp(1, bins) - 1] += 1;
    }
    let bin_centers = (0..bins).map(|j| min + (j as f64 + 0.5) * width).collect();
    Ok(Histogram {
        bin_centers,
        counts,
        bin_width: width,
    })
}

pub fn spectrum_histogram(s: &Spectrum, bins: usize) -> Result<Histogram> {
    histogram(s.values(), bins)
}

/// Centre of the most populated bin; ties go to the lowest centre.
pub fn baseline(h: &Histogram) -> f64 {
    let mut best = 0;
    for (j, &c) in h.counts.iter().enumerate() {
        if c > h.counts[best] {
            best = j;
        }
    }
    h.bin_centers[best]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    /// 0-based sample index.
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremaSet {
    pub maxima: Vec<Extremum>,
    pub minima: Vec<Extremum>,
    pub p_max: f64,
    pub p_min: f64,
}

impl ExtremaSet {
    /// True when neither maxima nor minima were found and `p_max`/`p_min`
    /// fell back to the spectrum's overall range.
    pub fn is_endpoint_fallback(&self) -> bool {
        self.maxima.is_empty() && self.minima.is_empty()
    }
}

/// Local extrema from sign changes of the first difference.
///
/// Zero differences are skipped: a plateau between a rise and a fall is one
/// maximum reported at the plateau's first sample (likewise for minima).
/// Without interior extrema, `p_max`/`p_min` are the spectrum's max/min.
pub fn find_extrema(values: &[f64]) -> Result<ExtremaSet> {
    if values.len() < 3 {
        return Err(Error::invalid(format!(
            "extrema search needs at least 3 samples, got {}",
            values.len()
        )));
    }
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    let mut last_sign = 0.0f64;
    // sample at which the most recent non-zero difference ended
    let mut run_start = 0usize;
    for k in 0..values.len() - 1 {
        let d = values[k + 1] - values[k];
        if d == 0.0 {
            continue;
        }
        let sign = d.signum();
        if last_sign > 0.0 && sign < 0.0 {
            maxima.push(Extremum {
                index: run_start,
                value: values[run_start],
            });
        } else if last_sign < 0.0 && sign > 0.0 {
            minima.push(Extremum {
                index: run_start,
                value: values[run_start],
            });
        }
        last_sign = sign;
        run_start = k + 1;
    }
    let (p_max, p_min) = if maxima.is_empty() && minima.is_empty() {
        values
            .iter()
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &v| {
                (hi.max(v), lo.min(v))
            })
    } else {
        maxima
            .iter()
            .chain(&minima)
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), e| {
                (hi.max(e.value), lo.min(e.value))
            })
    };
    Ok(ExtremaSet {
        maxima,
        minima,
        p_max,
        p_min,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Keep,
    Flip,
}

/// Which branch of the decision table produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// `p_max - b > 0` and `p_min - b > 0`.
    BothAbove,
    /// `p_max - b > 0 > p_min - b` and `|p_max - b| > |p_min - b|`.
    AboveDominates,
    /// `p_max - b < 0` and `p_min - b < 0`.
    BothBelow,
    /// `p_max - b > 0 > p_min - b` and `|p_max - b| < |p_min - b|`.
    BelowDominates,
    /// A compared quantity is exactly zero or the magnitudes tie; kept.
    Boundary,
    /// The spectrum and its negation got the same decision; the sign with
    /// positive third central moment (peaks pointing up) wins.
    SkewnessTieBreak,
    /// As above with zero skewness; the orientation whose global maximum
    /// precedes its global minimum wins.
    OrderTieBreak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignVerdict {
    pub decision: Decision,
    pub baseline: f64,
    pub p_max: f64,
    pub p_min: f64,
    pub rule: Rule,
}

/// Keep/flip decision from the baseline and the extreme peak values.
pub fn judge_direction(b: f64, p_max: f64, p_min: f64) -> Result<SignVerdict> {
    if !(b.is_finite() && p_max.is_finite() && p_min.is_finite()) {
        return Err(Error::invalid("baseline and peak values must be finite"));
    }
    if p_max < p_min {
        return Err(Error::invalid(format!(
            "p_max ({p_max}) is below p_min ({p_min})"
        )));
    }
    let up = p_max - b;
    let down = p_min - b;
    let (decision, rule) = if up > 0.0 && down > 0.0 {
        (Decision::Keep, Rule::BothAbove)
    } else if up < 0.0 && down < 0.0 {
        (Decision::Flip, Rule::BothBelow)
    } else if up > 0.0 && down < 0.0 && up.abs() > down.abs() {
        (Decision::Keep, Rule::AboveDominates)
    } else if up > 0.0 && down < 0.0 && up.abs() < down.abs() {
        (Decision::Flip, Rule::BelowDominates)
    } else {
        (Decision::Keep, Rule::Boundary)
    };
    Ok(SignVerdict {
        decision,
        baseline: b,
        p_max,
        p_min,
        rule,
    })
}

/// Histogram baseline, extrema and verdict for one spectrum.
pub fn judge_spectrum(values: &[f64], bins: usize) -> Result<SignVerdict> {
    let b = baseline(&histogram(values, bins)?);
    let ext = find_extrema(values)?;
    judge_direction(b, ext.p_max, ext.p_min)
}

/// Verdict for a spectrum whose overall sign is unknown.
///
/// The table is applied to both `s` and `-s`. They normally disagree and
/// the verdict for `s` stands. When they agree (boundary ties, or a histogram
/// whose top bin is not mirrored under negation) a sign-odd tie-break
/// decides, so `s` and `-s` always end up in the same orientation.
pub fn canonical_verdict(values: &[f64], bins: usize) -> Result<SignVerdict> {
    let direct = judge_spectrum(values, bins)?;
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    let mirrored = judge_spectrum(&negated, bins)?;
    if direct.decision != mirrored.decision {
        return Ok(direct);
    }
    let skew = third_central_moment(values);
    let (decision, rule) = if skew != 0.0 {
        (
            if skew > 0.0 {
                Decision::Keep
            } else {
                Decision::Flip
            },
            Rule::SkewnessTieBreak,
        )
    } else {
        let argmax = first_index_of(values, |a, b| a > b);
        let argmin = first_index_of(values, |a, b| a < b);
        (
            if argmax <= argmin {
                Decision::Keep
            } else {
                Decision::Flip
            },
            Rule::OrderTieBreak,
        )
    };
    Ok(SignVerdict {
        decision,
        rule,
        ..direct
    })
}

fn third_central_moment(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n
}

fn first_index_of(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if better(v, values[best]) {
            best = k;
        }
    }
    best
}

/// Applies the peak-direction verdict to every source of `model`.
///
/// Flipped sources have row `i` of `sources` and column `i` of
/// `mixing_estimate` negated; the verdicts are stored in
/// `model.sign_correction`.
pub fn correct_signs(model: &UnmixingModel, bins: usize) -> Result<UnmixingModel> {
    let n = model.sources.nrows();
    if model.mixing_estimate.ncols() != n {
        return Err(Error::dim(format!(
            "model has {n} sources but {} mixing columns",
            model.mixing_estimate.ncols()
        )));
    }
    let mut out = model.clone();
    let mut verdicts = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = model.sources.row(i).iter().copied().collect();
        let verdict = canonical_verdict(&row, bins)?;
        if verdict.decision == Decision::Flip {
            out.sources.row_mut(i).neg_mut();
            out.mixing_estimate.column_mut(i).neg_mut();
        }
        verdicts.push(verdict);
    }
    out.sign_correction = Some(verdicts);
    Ok(out)
}
