//! Spectra, mixing matrices and the forward mixing model
//! `x(t) = A s(t) + N(t)`.
//!
//! Pixels are an ordered 1-D list; a cube is stored as an `m x T` matrix
//! whose row `i` is the spectrum measured at pixel `i`.

mod fixtures;

pub use fixtures::{ComponentModel, Fixture};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// Uniform wavelength sampling, in nanometres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct WavelengthGrid {
    start: f64,
    step: f64,
    count: usize,
}

#[derive(Deserialize)]
struct RawGrid {
    start: f64,
    step: f64,
    count: usize,
}

impl TryFrom<RawGrid> for WavelengthGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        WavelengthGrid::new(raw.start, raw.step, raw.count)
    }
}

impl WavelengthGrid {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self> {
        if !start.is_finite() {
            return Err(Error::invalid(format!(
                "grid start must be finite, got {start}"
            )));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::invalid(format!(
                "grid step must be finite and > 0, got {step}"
            )));
        }
        if count < 2 {
            return Err(Error::invalid(format!(
                "grid needs at least 2 samples, got {count}"
            )));
        }
        Ok(Self { start, step, count })
    }

    /// 400 to 1000 nm in 2 nm steps (301 samples), the visible/short-wave range.
    pub fn visible() -> Self {
        Self {
            start: 400.0,
            step: 2.0,
            count: 301,
        }
    }

    /// Rebuilds a grid from explicit sample positions, which must be uniformly spaced.
    pub fn from_samples(wavelengths: &[f64]) -> Result<Self> {
        let count = wavelengths.len();
        if count < 2 {
            return Err(Error::invalid(format!(
                "grid needs at least 2 samples, got {count}"
            )));
        }
        let start = wavelengths[0];
        let step = (wavelengths[count - 1] - start) / (count - 1) as f64;
        let grid = Self::new(start, step, count)?;
        let tol = 1e-9 * step.abs().max(start.abs());
        for (k, &w) in wavelengths.iter().enumerate() {
            if (w - grid.at(k)).abs() > tol {
                return Err(Error::invalid(format!(
                    "wavelength samples are not uniformly spaced (sample {k} = {w}, expected {})",
                    grid.at(k)
                )));
            }
        }
        Ok(grid)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn end(&self) -> f64 {
        self.at(self.count - 1)
    }

    /// Wavelength of sample `k`.
    pub fn at(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn wavelengths(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|k| self.at(k))
    }
}

impl Default for WavelengthGrid {
    fn default() -> Self {
        Self::visible()
    }
}

/// Intensity sampled on a wavelength grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: WavelengthGrid,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: WavelengthGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::dim(format!(
                "spectrum has {} values but its grid has {} samples",
                values.len(),
                grid.count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("spectrum value {k} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// One Gaussian absorption band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPeak")]
pub struct PeakModel {
    center: f64,
    width: f64,
    height: f64,
}

#[derive(Deserialize)]
struct RawPeak {
    center: f64,
    width: f64,
    height: f64,
}

impl TryFrom<RawPeak> for PeakModel {
    type Error = Error;

    fn try_from(raw: RawPeak) -> Result<Self> {
        PeakModel::new(raw.center, raw.width, raw.height)
    }
}

impl PeakModel {
    /// `width` is the Gaussian standard deviation in nm.
    pub fn new(center: f64, width: f64, height: f64) -> Result<Self> {
        if !(center.is_finite() && width.is_finite() && height.is_finite()) {
            return Err(Error::invalid(format!(
                "peak parameters must be finite (center {center}, width {width}, height {height})"
            )));
        }
        if width <= 0.0 {
            return Err(Error::invalid(format!(
                "peak width must be > 0, got {width}"
            )));
        }
        if height == 0.0 {
            return Err(Error::invalid("peak height must be non-zero"));
        }
        Ok(Self {
            center,
            width,
            height,
        })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn value_at(&self, wavelength: f64) -> f64 {
        let z = (wavelength - self.center) / self.width;
        self.height * (-0.5 * z * z).exp()
    }
}

/// Pixel-by-component concentration weights (`m x n`, `m >= n >= 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixing", into = "RawMixing")]
pub struct MixingMatrix(Matrix);

#[derive(Serialize, Deserialize)]
struct RawMixing(#[serde(with = "crate::serde_rows")] Matrix);

impl TryFrom<RawMixing> for MixingMatrix {
    type Error = Error;

    fn try_from(raw: RawMixing) -> Result<Self> {
        MixingMatrix::new(raw.0)
    }
}

impl From<MixingMatrix> for RawMixing {
    fn from(m: MixingMatrix) -> Self {
        RawMixing(m.0)
    }
}

impl MixingMatrix {
    pub fn new(entries: Matrix) -> Result<Self> {
        let (m, n) = entries.shape();
        if n == 0 || m < n {
            return Err(Error::dim(format!(
                "mixing matrix must satisfy pixels >= components >= 1, got {m}x{n}"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mixing matrix entries must be finite"));
        }
        Ok(Self(entries))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = crate::serde_rows::from_rows(rows).map_err(Error::Dimension)?;
        Self::new(m)
    }

    pub fn pixels(&self) -> usize {
        self.0.nrows()
    }

    pub fn components(&self) -> usize {
        self.0.ncols()
    }

    pub fn entries(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    /// Physical concentrations are never negative; estimated matrices may be.
    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&v| v >= 0.0)
    }
}

/// Measured mixture spectra: one row per pixel on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperspectralCube {
    grid: WavelengthGrid,
    data: Matrix,
}

impl HyperspectralCube {
    pub fn new(grid: WavelengthGrid, data: Matrix) -> Result<Self> {
        if data.ncols() != grid.count() {
            return Err(Error::dim(format!(
                "cube has {} samples per pixel but its grid has {}",
                data.ncols(),
                grid.count()
            )));
        }
        if data.nrows() == 0 {
            return Err(Error::dim("cube has no pixels"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("cube entries must be finite"));
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn pixels(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn pixel_spectrum(&self, pixel: usize) -> Spectrum {
        Spectrum {
            grid: self.grid,
            values: self.data.row(pixel).iter().copied().collect(),
        }
    }

    /// Same cube with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.grid, &self.data * factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    None,
    Gaussian,
}

/// Additive measurement noise. `sigma == 0` exactly when the kind is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNoise")]
pub struct NoiseSpec {
    kind: NoiseKind,
    sigma: f64,
    seed: u64,
}

#[derive(Deserialize)]
struct RawNoise {
    kind: NoiseKind,
    #[serde(default)]
    sigma: f64,
    #[serde(default)]
    seed: u64,
}

impl TryFrom<RawNoise> for NoiseSpec {
    type Error = Error;

    fn try_from(raw: RawNoise) -> Result<Self> {
        match raw.kind {
            NoiseKind::None if raw.sigma == 0.0 => Ok(NoiseSpec {
                seed: raw.seed,
                ..NoiseSpec::none()
            }),
            NoiseKind::None => Err(Error::invalid("noise sigma must be 0 when kind is none")),
            NoiseKind::Gaussian => NoiseSpec::gaussian(raw.sigma, raw.seed),
        }
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma: 0.0,
            seed: 0,
        }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!(
                "gaussian noise needs a finite sigma > 0, got {sigma}"
            )));
        }
        Ok(Self {
            kind: NoiseKind::Gaussian,
            sigma,
            seed,
        })
    }

    /// Gaussian noise whose variance sits `snr_db` decibels below the
    /// variance of the mean-removed clean cube.
    pub fn at_snr_db(clean: &HyperspectralCube, snr_db: f64, seed: u64) -> Result<Self> {
        let data = clean.data();
        let mut power = 0.0;
        for row in data.row_iter() {
            let mean = row.mean();
            power += row.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        }
        power /= data.len() as f64;
        Self::gaussian((power / 10f64.powf(snr_db / 10.0)).sqrt(), seed)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// `rows x cols` noise matrix, drawn row by row from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, rows: usize, cols: usize) -> Matrix {
        match self.kind {
            NoiseKind::None => Matrix::zeros(rows, cols),
            NoiseKind::Gaussian => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let normal = Normal::new(0.0, self.sigma).expect("sigma validated at construction");
                let draws: Vec<f64> = (0..rows * cols).map(|_| normal.sample(&mut rng)).collect();
                Matrix::from_row_slice(rows, cols, &draws)
            }
        }
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::none()
    }
}

/// Sum of Gaussian bands on a flat baseline, sampled on `grid`.
pub fn synth_spectrum(
    peaks: &[PeakModel],
    baseline: f64,
    grid: &WavelengthGrid,
) -> Result<Spectrum> {
    if !baseline.is_finite() {
        return Err(Error::invalid(format!(
            "baseline must be finite, got {baseline}"
        )));
    }
    let values = grid
        .wavelengths()
        .map(|w| baseline + peaks.iter().map(|p| p.value_at(w)).sum::<f64>())
        .collect();
    Spectrum::new(*grid, values)
}

/// Stacks spectra sharing one grid into an `n x T` matrix.
pub fn stack_spectra(spectra: &[Spectrum]) -> Result<(WavelengthGrid, Matrix)> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::dim("no spectra given"))?;
    let grid = *first.grid();
    if let Some(i) = spectra.iter().position(|s| *s.grid() != grid) {
        return Err(Error::dim(format!(
            "spectrum {i} is sampled on a different grid than spectrum 0"
        )));
    }
    Ok((
        grid,
        Matrix::from_fn(spectra.len(), grid.count(), |i, k| spectra[i].values()[k]),
    ))
}

/// Forward model: `data = A S + N`, with row `i` of `S` being `sources[i]`.
pub fn mix(a: &MixingMatrix, sources: &[Spectrum], noise: &NoiseSpec) -> Result<HyperspectralCube> {
    if sources.len() != a.components() {
        return Err(Error::dim(format!(
            "mixing matrix has {} columns but {} sources were given",
            a.components(),
            sources.len()
        )));
    }
    let (grid, s) = stack_spectra(sources)?;
    let mut data = a.entries() * s;
    if noise.kind() != NoiseKind::None {
        data += noise.sample(data.nrows(), data.ncols());
    }
    HyperspectralCube::new(grid, data)
}

/// The 7-pixel, 2-component concentration matrix of the two-solute experiment.
pub fn two_component_matrix() -> MixingMatrix {
    #[rustfmt::skip]
    let entries = Matrix::from_row_slice(7, 2, &[
        0.2, 0.8,
        0.8, 0.2,
        0.4, 0.6,
        0.3, 0.7,
        0.9, 0.1,
        0.0, 1.0,
        1.0, 0.0,
    ]);
    MixingMatrix(entries)
}

/// The 9-pixel, 3-component concentration matrix of the three-solute
/// experiment. It is published as 3 rows of 9 entries (one row per
/// component); this returns its transpose so that pixels index rows.
pub fn three_component_matrix() -> MixingMatrix {
    #[rustfmt::skip]
    let printed = Matrix::from_row_slice(3, 9, &[
        0.2, 0.7, 0.1, 0.6, 0.1, 0.3, 0.2, 0.4, 0.4,
        0.1, 0.5, 0.4, 0.7, 0.1, 0.2, 0.0, 0.7, 0.3,
        0.7, 0.1, 0.2, 0.0, 0.7, 0.3, 0.7, 0.2, 0.1,
    ]);
    MixingMatrix(printed.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> WavelengthGrid {
        WavelengthGrid::visible()
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(WavelengthGrid::new(400.0, 0.0, 10).is_err());
        assert!(WavelengthGrid::new(400.0, -1.0, 10).is_err());
        assert!(WavelengthGrid::new(400.0, 2.0, 1).is_err());
        assert!(WavelengthGrid::new(f64::NAN, 2.0, 10).is_err());
    }

    #[test]
    fn visible_grid_spans_400_to_1000() {
        let g = WavelengthGrid::default();
        assert_eq!(g.start(), 400.0);
        assert_eq!(g.end(), 1000.0);
        assert_eq!(g.count(), 301);
    }

    #[test]
    fn grid_from_samples_round_trips() {
        let g = grid();
        let w: Vec<f64> = g.wavelengths().collect();
        assert_eq!(WavelengthGrid::from_samples(&w).unwrap(), g);
        let mut bent = w.clone();
        bent[5] += 0.5;
        assert!(WavelengthGrid::from_samples(&bent).is_err());
    }

    #[test]
    fn empty_peak_list_gives_flat_spectrum() {
        let s = synth_spectrum(&[], 0.5, &grid()).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn single_peak_matches_gaussian_at_center_and_one_sigma() {
        let p = PeakModel::new(525.0, 30.0, 1.0).unwrap();
        let s = synth_spectrum(&[p], 0.0, &grid()).unwrap();
        // 525 nm is sample 62.5 on a 2 nm grid; evaluate on a grid that hits it
        let g = WavelengthGrid::new(401.0, 2.0, 300).unwrap();
        let s_odd = synth_spectrum(&[p], 0.0, &g).unwrap();
        assert_eq!(s_odd.values()[62], 1.0);
        assert!((s_odd.values()[77] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((s_odd.values()[77] - 0.6065).abs() < 1e-4);
        assert_eq!(s.len(), 301);
    }

    #[test]
    fn synth_is_additive() {
        let g = grid();
        let a = PeakModel::new(500.0, 20.0, 1.0).unwrap();
        let b = PeakModel::new(700.0, 35.0, 0.5).unwrap();
        let both = synth_spectrum(&[a, b], 0.1, &g).unwrap();
        let sa = synth_spectrum(&[a], 0.0, &g).unwrap();
        let sb = synth_spectrum(&[b], 0.0, &g).unwrap();
        for k in 0..g.count() {
            let expect = sa.values()[k] + sb.values()[k] + 0.1;
            assert!((both.values()[k] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_inputs_rejected() {
        assert!(PeakModel::new(f64::NAN, 1.0, 1.0).is_err());
        assert!(PeakModel::new(500.0, 0.0, 1.0).is_err());
        assert!(PeakModel::new(500.0, 1.0, 0.0).is_err());
        assert!(synth_spectrum(&[], f64::INFINITY, &grid()).is_err());
    }

    #[test]
    fn identity_mixing_reproduces_sources() {
        let g = grid();
        let s1 = synth_spectrum(&[PeakModel::new(500.0, 10.0, 1.0).unwrap()], 0.0, &g).unwrap();
        let s2 = synth_spectrum(&[PeakModel::new(800.0, 30.0, 2.0).unwrap()], 0.3, &g).unwrap();
        let a = MixingMatrix::new(Matrix::identity(2, 2)).unwrap();
        let cube = mix(&a, &[s1.clone(), s2.clone()], &NoiseSpec::none()).unwrap();
        assert_eq!(cube.pixel_spectrum(0), s1);
        assert_eq!(cube.pixel_spectrum(1), s2);
    }

    #[test]
    fn unit_source_exposes_first_column() {
        let g = grid();
        let one = synth_spectrum(&[], 1.0, &g).unwrap();
        let zero = synth_spectrum(&[], 0.0, &g).unwrap();
        let cube = mix(&two_component_matrix(), &[one, zero], &NoiseSpec::none()).unwrap();
        let expect = [0.2, 0.8, 0.4, 0.3, 0.9, 0.0, 1.0];
        for (i, e) in expect.iter().enumerate() {
            assert!(cube.data().row(i).iter().all(|v| v == e));
        }
    }

    #[test]
    fn mix_rejects_mismatched_inputs() {
        let g = grid();
        let s = synth_spectrum(&[], 1.0, &g).unwrap();
        let other =
            synth_spectrum(&[], 1.0, &WavelengthGrid::new(400.0, 1.0, 301).unwrap()).unwrap();
        let a = two_component_matrix();
        assert!(matches!(
            mix(&a, std::slice::from_ref(&s), &NoiseSpec::none()),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            mix(&a, &[s, other], &NoiseSpec::none()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn two_component_matrix_literal() {
        let a = two_component_matrix();
        assert_eq!(a.entries().shape(), (7, 2));
        assert_eq!((a.entries()[(4, 0)], a.entries()[(4, 1)]), (0.9, 0.1));
        assert_eq!((a.entries()[(5, 0)], a.entries()[(5, 1)]), (0.0, 1.0));
        assert_eq!((a.entries()[(6, 0)], a.entries()[(6, 1)]), (1.0, 0.0));
        for row in a.entries().row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn three_component_matrix_is_stored_pixel_major() {
        let a = three_component_matrix();
        assert_eq!(a.entries().shape(), (9, 3));
        let col0: Vec<f64> = a.entries().column(0).iter().copied().collect();
        assert_eq!(col0, vec![0.2, 0.7, 0.1, 0.6, 0.1, 0.3, 0.2, 0.4, 0.4]);
        assert_eq!(a.entries()[(0, 2)], 0.7);
        assert!(a.is_nonnegative());
    }

    #[test]
    fn mixing_matrix_shape_rules() {
        assert!(MixingMatrix::new(Matrix::zeros(2, 3)).is_err());
        assert!(MixingMatrix::new(Matrix::zeros(2, 0)).is_err());
        assert!(MixingMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn noise_spec_rules() {
        assert!(NoiseSpec::gaussian(0.0, 1).is_err());
        assert!(NoiseSpec::gaussian(-1.0, 1).is_err());
        let parsed: std::result::Result<NoiseSpec, _> =
            serde_json::from_str(r#"{"kind":"none","sigma":0.1}"#);
        assert!(parsed.is_err());
        let parsed: NoiseSpec =
            serde_json::from_str(r#"{"kind":"gaussian","sigma":0.1,"seed":3}"#).unwrap();
        assert_eq!(parsed, NoiseSpec::gaussian(0.1, 3).unwrap());
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let n = NoiseSpec::gaussian(0.05, 42).unwrap();
        assert_eq!(n.sample(3, 20), n.sample(3, 20));
        assert_ne!(n.sample(3, 20), n.with_seed(43).sample(3, 20));
    }

    #[test]
    fn snr_sets_noise_power() {
        let g = grid();
        let s1 = synth_spectrum(&[PeakModel::new(500.0, 10.0, 1.0).unwrap()], 0.0, &g).unwrap();
        let cube = mix(
            &MixingMatrix::new(Matrix::identity(1, 1)).unwrap(),
            &[s1],
            &NoiseSpec::none(),
        )
        .unwrap();
        let n = NoiseSpec::at_snr_db(&cube, 20.0, 0).unwrap();
        let row = cube.data().row(0);
        let mean = row.mean();
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / row.len() as f64;
        assert!((n.sigma().powi(2) * 100.0 - var).abs() < 1e-12 * var.max(1.0));
    }
}
