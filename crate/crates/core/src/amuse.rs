//! AMUSE: blind separation from the zero-lag and one lagged covariance.
//!
//! 1. remove each pixel's mean;
//! 2. eigendecompose the zero-lag covariance and keep the `n` dominant pairs;
//! 3. whiten with `Q = L^{-1/2} V^T`;
//! 4. take the lag-`tau` covariance of the whitened data and rotate it to
//!    diagonal form with an orthogonal `U`;
//! 5. estimate `A = Q+ U` and `S = U^T Q x`.
//!
//! Recovered sources are unit-variance and defined only up to permutation
//! and sign; [`crate::sign_correction`] fixes the sign.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{left_singular_sorted, symmetric_eigen_sorted};
use crate::sign_correction::SignVerdict;
use crate::spectra_model::{HyperspectralCube, WavelengthGrid};
use crate::{Error, Matrix, Result};

/// Default relative eigenvalue threshold for automatic source counting.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

const SUBSPACE_GAP_TOL: f64 = 1e-12;
const SINGULAR_SIGNAL_TOL: f64 = 1e-14;
/// Centered data this small relative to the raw data counts as constant.
const CONSTANT_DATA_TOL: f64 = 1e-12;
const SPECTRUM_TIE_TOL: f64 = 1e-10;

/// Non-fatal conditions found while unmixing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Warning {
    /// The n-th and (n+1)-th zero-lag eigenvalues coincide, so the signal
    /// subspace is not uniquely defined.
    IllSeparatedSubspace { n: usize, gap: f64 },
    /// Two lagged-covariance spectrum entries coincide; the matching
    /// sources cannot be separated at this delay.
    NonIdentifiableDelay {
        first: usize,
        second: usize,
        gap: f64,
    },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::IllSeparatedSubspace { n, gap } => write!(
                f,
                "ill-separated signal subspace: eigenvalues {n} and {} differ by only {gap:e}",
                n + 1
            ),
            Warning::NonIdentifiableDelay { first, second, gap } => write!(
                f,
                "non-identifiable delay: lagged spectrum entries {first} and {second} differ by only {gap:e}; \
                 try another delay"
            ),
        }
    }
}

/// Mean-removed cube.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredCube {
    data: Matrix,
    means: Vec<f64>,
}

impl CenteredCube {
    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }
}

pub fn center(cube: &HyperspectralCube) -> Result<CenteredCube> {
    center_rows(cube.data())
}

fn center_rows(data: &Matrix) -> Result<CenteredCube> {
    if data.nrows() == 0 || data.ncols() < 2 {
        return Err(Error::dim(format!(
            "centering needs at least one pixel and two samples, got {}x{}",
            data.nrows(),
            data.ncols()
        )));
    }
    let means: Vec<f64> = data.row_iter().map(|r| r.mean()).collect();
    let mut centered = data.clone();
    for (mut row, &mean) in centered.row_iter_mut().zip(&means) {
        row.add_scalar_mut(-mean);
    }
    Ok(CenteredCube {
        data: centered,
        means,
    })
}

/// `R(0) = (1/T) X X^T` of the centered data.
pub fn covariance_zero_lag(c: &CenteredCube) -> Matrix {
    lag0_covariance(&c.data)
}

fn lag0_covariance(data: &Matrix) -> Matrix {
    let r = data * data.transpose() / data.ncols() as f64;
    // exact symmetry
    (&r + r.transpose()) * 0.5
}

/// How many sources to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceCount {
    /// Count eigenvalues above `rel_tol * largest`.
    Auto {
        rel_tol: f64,
    },
    Fixed(usize),
}

impl Default for SourceCount {
    fn default() -> Self {
        SourceCount::Auto {
            rel_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// Signal/noise split of the zero-lag covariance, dominant eigenvalues first.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceSplit {
    pub signal_vectors: Matrix,
    pub signal_values: Vec<f64>,
    pub noise_vectors: Matrix,
    pub noise_values: Vec<f64>,
    pub warnings: Vec<Warning>,
}

impl SubspaceSplit {
    pub fn n_sources(&self) -> usize {
        self.signal_values.len()
    }
}

pub fn signal_subspace(r: &Matrix, n: SourceCount) -> Result<SubspaceSplit> {
    let m = r.nrows();
    if m == 0 || r.ncols() != m {
        return Err(Error::dim(format!(
            "covariance must be square, got {}x{}",
            m,
            r.ncols()
        )));
    }
    let (values, vectors) = symmetric_eigen_sorted(r, |v| v);
    let n = match n {
        SourceCount::Fixed(n) if n == 0 || n > m => {
            return Err(Error::invalid(format!(
                "source count must be in 1..={m}, got {n}"
            )));
        }
        SourceCount::Fixed(n) => n,
        SourceCount::Auto { rel_tol } => {
            if !(rel_tol.is_finite() && rel_tol >= 0.0) {
                return Err(Error::invalid(format!(
                    "rank tolerance must be finite and >= 0, got {rel_tol}"
                )));
            }
            let thresh = rel_tol * values[0];
            let n = values.iter().take_while(|&&v| v > thresh).count();
            if n == 0 {
                return Err(Error::SingularSubspace(
                    "zero-lag covariance has no positive eigenvalue".into(),
                ));
            }
            n
        }
    };
    let mut warnings = Vec::new();
    if n < m {
        let gap = values[n - 1] - values[n];
        if gap <= SUBSPACE_GAP_TOL * values[0].abs().max(1.0) {
            warnings.push(Warning::IllSeparatedSubspace { n, gap });
        }
    }
    Ok(SubspaceSplit {
        signal_vectors: vectors.columns(0, n).into_owned(),
        signal_values: values[..n].to_vec(),
        noise_vectors: vectors.columns(n, m - n).into_owned(),
        noise_values: values[n..].to_vec(),
        warnings,
    })
}

/// Whitening operator `Q = L^{-1/2} V^T` and its pseudo-inverse `Q+ = V L^{1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Whitener {
    #[serde(with = "crate::serde_rows")]
    pub q: Matrix,
    #[serde(with = "crate::serde_rows")]
    pub q_pinv: Matrix,
}

impl Whitener {
    pub fn from_split(split: &SubspaceSplit) -> Result<Self> {
        let largest = split.signal_values.first().copied().unwrap_or(0.0);
        let floor = SINGULAR_SIGNAL_TOL * largest.max(0.0);
        if let Some((i, &v)) = split
            .signal_values
            .iter()
            .enumerate()
            .find(|(_, &v)| v <= floor || !v.is_finite())
        {
            return Err(Error::SingularSubspace(format!(
                "signal eigenvalue {i} is {v:e}; reduce the source count"
            )));
        }
        let v = &split.signal_vectors;
        let inv_sqrt = nalgebra::DVector::from_iterator(
            split.signal_values.len(),
            split.signal_values.iter().map(|l| 1.0 / l.sqrt()),
        );
        let sqrt = inv_sqrt.map(|x| 1.0 / x);
        let q = Matrix::from_diagonal(&inv_sqrt) * v.transpose();
        let q_pinv = v * Matrix::from_diagonal(&sqrt);
        Ok(Self { q, q_pinv })
    }
}

/// Returns the `n x T` whitened data `Q x` and the operator used.
pub fn whiten(c: &CenteredCube, split: &SubspaceSplit) -> Result<(Matrix, Whitener)> {
    if split.signal_vectors.nrows() != c.data.nrows() {
        return Err(Error::dim(format!(
            "subspace has dimension {} but the cube has {} pixels",
            split.signal_vectors.nrows(),
            c.data.nrows()
        )));
    }
    let w = Whitener::from_split(split)?;
    Ok((&w.q * &c.data, w))
}

/// `R(tau) = 1/(T - tau) * sum_{k >= tau} x(k) x(k - tau)^T`.
pub fn delayed_covariance(whitened: &Matrix, delay: usize) -> Result<Matrix> {
    let t = whitened.ncols();
    if delay == 0 {
        return Err(Error::invalid("delay must be non-zero"));
    }
    if delay >= t {
        return Err(Error::invalid(format!(
            "delay {delay} must be smaller than the sample count {t}"
        )));
    }
    let len = t - delay;
    let lead = whitened.columns(delay, len);
    let lag = whitened.columns(0, len);
    Ok(lead * lag.transpose() / len as f64)
}

/// How the orthogonal rotation is extracted from the lagged covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RotationMode {
    /// Eigenvectors of `(R + R^T)/2`, ordered by decreasing |eigenvalue|.
    #[default]
    #[serde(rename = "sym-evd")]
    SymmetrizedEvd,
    /// Left singular vectors of `R` as is.
    #[serde(rename = "plain-svd")]
    PlainSvd,
}

impl RotationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RotationMode::SymmetrizedEvd => "sym-evd",
            RotationMode::PlainSvd => "plain-svd",
        }
    }
}

impl std::str::FromStr for RotationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sym-evd" => Ok(RotationMode::SymmetrizedEvd),
            "plain-svd" => Ok(RotationMode::PlainSvd),
            other => Err(Error::invalid(format!(
                "unknown rotation mode `{other}` (sym-evd or plain-svd)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    pub matrix: Matrix,
    pub spectrum: Vec<f64>,
    pub warnings: Vec<Warning>,
}

pub fn rotation_from_delayed(delayed: &Matrix, mode: RotationMode) -> Result<Rotation> {
    let n = delayed.nrows();
    if n == 0 || delayed.ncols() != n {
        return Err(Error::dim(format!(
            "lagged covariance must be square, got {}x{}",
            n,
            delayed.ncols()
        )));
    }
    if delayed.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("lagged covariance has non-finite entries"));
    }
    let (spectrum, matrix) = match mode {
        RotationMode::SymmetrizedEvd => symmetric_eigen_sorted(delayed, f64::abs),
        RotationMode::PlainSvd => left_singular_sorted(delayed),
    };
    let scale = spectrum.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut warnings = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let gap = (spectrum[i] - spectrum[j]).abs();
            if gap <= SPECTRUM_TIE_TOL * scale {
                warnings.push(Warning::NonIdentifiableDelay {
                    first: i,
                    second: j,
                    gap,
                });
            }
        }
    }
    Ok(Rotation {
        matrix,
        spectrum,
        warnings,
    })
}

/// `A = Q+ U`.
pub fn estimate_mixing(w: &Whitener, rotation: &Matrix) -> Result<Matrix> {
    if w.q_pinv.ncols() != rotation.nrows() {
        return Err(Error::dim(format!(
            "whitener has {} components but the rotation is {}x{}",
            w.q_pinv.ncols(),
            rotation.nrows(),
            rotation.ncols()
        )));
    }
    Ok(&w.q_pinv * rotation)
}

/// `S = U^T x_white`.
pub fn estimate_sources(rotation: &Matrix, whitened: &Matrix) -> Result<Matrix> {
    if rotation.nrows() != whitened.nrows() {
        return Err(Error::dim(format!(
            "rotation is {}x{} but the whitened data has {} rows",
            rotation.nrows(),
            rotation.ncols(),
            whitened.nrows()
        )));
    }
    Ok(rotation.transpose() * whitened)
}

/// Parameters of a full AMUSE run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmuseConfig {
    pub sources: SourceCount,
    pub delay: usize,
    pub mode: RotationMode,
}

impl Default for AmuseConfig {
    fn default() -> Self {
        Self {
            sources: SourceCount::default(),
            delay: 1,
            mode: RotationMode::default(),
        }
    }
}

/// Result of unmixing one cube.
///
/// Serialized field names form the model JSON document described in
/// `docs/model.schema.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmixingModel {
    pub grid: WavelengthGrid,
    pub n_sources: usize,
    pub delay: usize,
    pub mode: RotationMode,
    /// `m x n` estimated mixing matrix.
    #[serde(with = "crate::serde_rows")]
    pub mixing_estimate: Matrix,
    /// `n x T`; row `i` is the `i`-th estimated pure spectrum.
    #[serde(with = "crate::serde_rows")]
    pub sources: Matrix,
    #[serde(with = "crate::serde_rows")]
    pub rotation: Matrix,
    /// Eigenvalues (sym-evd) or singular values (plain-svd) of the lagged covariance.
    pub delayed_spectrum: Vec<f64>,
    pub signal_values: Vec<f64>,
    pub noise_values: Vec<f64>,
    pub whitener: Whitener,
    /// Per-pixel means removed before unmixing.
    pub means: Vec<f64>,
    pub warnings: Vec<Warning>,
    /// Present once [`crate::sign_correction::correct_signs`] has run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign_correction: Option<Vec<SignVerdict>>,
}

impl UnmixingModel {
    pub fn pixels(&self) -> usize {
        self.mixing_estimate.nrows()
    }

    /// `A S`, the model's reconstruction of the centered cube.
    pub fn reconstruction(&self) -> Matrix {
        &self.mixing_estimate * &self.sources
    }
}

pub fn amuse(cube: &HyperspectralCube, config: &AmuseConfig) -> Result<UnmixingModel> {
    if config.delay >= cube.samples() {
        return Err(Error::invalid(format!(
            "delay {} must be smaller than the sample count {}",
            config.delay,
            cube.samples()
        )));
    }
    let centered = center(cube)?;
    let spread = centered.data.amax();
    if spread <= CONSTANT_DATA_TOL * cube.data().amax() || spread == 0.0 {
        return Err(Error::SingularSubspace(
            "every pixel spectrum is constant; nothing to unmix".into(),
        ));
    }
    let r0 = covariance_zero_lag(&centered);
    let split = signal_subspace(&r0, config.sources)?;
    let (whitened, whitener) = whiten(&centered, &split)?;
    let delayed = delayed_covariance(&whitened, config.delay)?;
    let rotation = rotation_from_delayed(&delayed, config.mode)?;
    let mixing_estimate = estimate_mixing(&whitener, &rotation.matrix)?;
    let sources = estimate_sources(&rotation.matrix, &whitened)?;

    let mut warnings = split.warnings.clone();
    warnings.extend(rotation.warnings.iter().cloned());
    Ok(UnmixingModel {
        grid: *cube.grid(),
        n_sources: split.n_sources(),
        delay: config.delay,
        mode: config.mode,
        mixing_estimate,
        sources,
        rotation: rotation.matrix,
        delayed_spectrum: rotation.spectrum,
        signal_values: split.signal_values,
        noise_values: split.noise_values,
        whitener,
        means: centered.means,
        warnings,
        sign_correction: None,
    })
}
