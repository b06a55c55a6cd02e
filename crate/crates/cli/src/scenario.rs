//! Scenario configuration files for `simulate` and `demo`.
//!
//! A scenario describes the forward model (grid, pure components, mixing
//! matrix, noise) plus the unmixing settings used by `demo`. Every field is
//! checked after parsing and errors name the offending field.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sosunmix::amuse::{AmuseConfig, RotationMode, SourceCount};
use sosunmix::io::read_mixing;
use sosunmix::sign_correction::DEFAULT_BINS;
use sosunmix::spectra_model::{
    mix, ComponentModel, Fixture, HyperspectralCube, MixingMatrix, NoiseKind, NoiseSpec, PeakModel,
    Spectrum, WavelengthGrid,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakConfig {
    pub center: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub name: String,
    #[serde(default)]
    pub baseline: f64,
    pub peaks: Vec<PeakConfig>,
}

/// Where the mixing matrix comes from. Exactly one key is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum MixingConfig {
    /// Name of a built-in fixture matrix.
    Fixture(String),
    /// Rows of the `pixels x components` matrix.
    Inline(Vec<Vec<f64>>),
    /// CSV file, relative paths resolved against the scenario file.
    Csv {
        path: PathBuf,
        #[serde(default = "yes")]
        header: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma: 0.0,
            seed: 0,
        }
    }
}

/// `"auto"` or a positive integer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CountConfig {
    Fixed(usize),
    Named(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl Default for CountConfig {
    fn default() -> Self {
        CountConfig::Named(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub grid: GridConfig,
    pub components: Vec<ComponentConfig>,
    pub mixing: MixingConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default = "default_tau")]
    pub tau: usize,
    #[serde(default)]
    pub n: CountConfig,
    #[serde(default)]
    pub mode: RotationMode,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_tau() -> usize {
    1
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

/// A validated scenario with every reference resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub grid: WavelengthGrid,
    pub components: Vec<ComponentModel>,
    pub mixing: MixingMatrix,
    pub noise: NoiseSpec,
    pub amuse: AmuseConfig,
    pub bins: usize,
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    /// The built-in scenario for a fixture.
    pub fn builtin(f: Fixture) -> Self {
        let grid = f.grid();
        Self {
            name: f.name().to_owned(),
            grid: GridConfig {
                start: grid.start(),
                step: grid.step(),
                count: grid.count(),
            },
            components: f
                .components()
                .into_iter()
                .map(|c| ComponentConfig {
                    name: c.name,
                    baseline: c.baseline,
                    peaks: c
                        .peaks
                        .iter()
                        .map(|p| PeakConfig {
                            center: p.center(),
                            width: p.width(),
                            height: p.height(),
                        })
                        .collect(),
                })
                .collect(),
            mixing: MixingConfig::Fixture(f.name().to_owned()),
            noise: NoiseConfig::default(),
            tau: 1,
            n: CountConfig::default(),
            mode: RotationMode::default(),
            bins: DEFAULT_BINS,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("invalid scenario")
    }

    /// Checks every field and resolves file references against `base`.
    pub fn resolve(&self, base: &Path) -> Result<Scenario> {
        if self.name.trim().is_empty() {
            bail!("field `name`: must not be empty");
        }
        let grid = WavelengthGrid::new(self.grid.start, self.grid.step, self.grid.count)
            .map_err(|e| anyhow::anyhow!("field `grid`: {e}"))?;
        if self.components.is_empty() {
            bail!("field `components`: at least one component is required");
        }
        let mut components = Vec::with_capacity(self.components.len());
        for (i, c) in self.components.iter().enumerate() {
            if !c.baseline.is_finite() {
                bail!("field `components[{i}].baseline`: must be finite");
            }
            let peaks = c
                .peaks
                .iter()
                .enumerate()
                .map(|(j, p)| {
                    PeakModel::new(p.center, p.width, p.height)
                        .map_err(|e| anyhow::anyhow!("field `components[{i}].peaks[{j}]`: {e}"))
                })
                .collect::<Result<Vec<_>>>()?;
            components.push(ComponentModel {
                name: c.name.clone(),
                baseline: c.baseline,
                peaks,
            });
        }
        let mixing = self.resolve_mixing(base)?;
        if mixing.components() != components.len() {
            bail!(
                "field `mixing`: matrix has {} columns but {} components are listed",
                mixing.components(),
                components.len()
            );
        }
        let noise = match self.noise.kind {
            NoiseKind::None if self.noise.sigma != 0.0 => {
                bail!("field `noise.sigma`: must be 0 when `noise.kind` is none")
            }
            NoiseKind::None => NoiseSpec::none(),
            NoiseKind::Gaussian => NoiseSpec::gaussian(self.noise.sigma, self.noise.seed)
                .map_err(|e| anyhow::anyhow!("field `noise.sigma`: {e}"))?,
        };
        if self.tau == 0 {
            bail!("field `tau`: must be at least 1");
        }
        if self.tau >= grid.count() {
            bail!(
                "field `tau`: must be smaller than the {} grid samples",
                grid.count()
            );
        }
        let sources = match self.n {
            CountConfig::Named(AutoTag::Auto) => SourceCount::default(),
            CountConfig::Fixed(0) => bail!("field `n`: must be \"auto\" or at least 1"),
            CountConfig::Fixed(n) if n > mixing.pixels() => {
                bail!(
                    "field `n`: {n} sources exceed the {} pixels",
                    mixing.pixels()
                )
            }
            CountConfig::Fixed(n) => SourceCount::Fixed(n),
        };
        if self.bins < 2 {
            bail!("field `bins`: must be at least 2");
        }
        Ok(Scenario {
            name: self.name.clone(),
            grid,
            components,
            mixing,
            noise,
            amuse: AmuseConfig {
                sources,
                delay: self.tau,
                mode: self.mode,
            },
            bins: self.bins,
            output_dir: self.output_dir.as_ref().map(|d| base.join(d)),
        })
    }

    fn resolve_mixing(&self, base: &Path) -> Result<MixingMatrix> {
        match &self.mixing {
            MixingConfig::Fixture(name) => Ok(Fixture::from_name(name)
                .map_err(|e| anyhow::anyhow!("field `mixing.fixture`: {e}"))?
                .mixing()),
            MixingConfig::Inline(rows) => MixingMatrix::from_rows(rows)
                .map_err(|e| anyhow::anyhow!("field `mixing.inline`: {e}")),
            MixingConfig::Csv { path, header } => {
                let full = base.join(path);
                let file = fs::File::open(&full).with_context(|| {
                    format!("field `mixing.csv.path`: cannot open {}", full.display())
                })?;
                read_mixing(file, *header).map_err(|e| {
                    anyhow::anyhow!("field `mixing.csv.path`: {}: {e}", full.display())
                })
            }
        }
    }
}

/// Loads a scenario from a built-in fixture name or a JSON file path.
///
/// A path that exists wins over a fixture of the same name.
pub fn load(spec: &str) -> Result<Scenario> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Ok(f) = Fixture::from_name(spec) {
            return ScenarioConfig::builtin(f).resolve(Path::new("."));
        }
    }
    let text = fs::read_to_string(path).with_context(|| format!("cannot read scenario {spec}"))?;
    let config = ScenarioConfig::from_json(&text).with_context(|| format!("in {spec}"))?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    config.resolve(base).with_context(|| format!("in {spec}"))
}

/// Ground truth and cube produced by a scenario.
pub struct Simulation {
    pub sources: Vec<Spectrum>,
    pub cube: HyperspectralCube,
}

impl Scenario {
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(seed) = seed {
            self.noise = self.noise.with_seed(seed);
        }
        self
    }

    pub fn component_names(&self) -> Vec<String> {
        self.components.iter().map(|c| c.name.clone()).collect()
    }

    pub fn simulate(&self) -> Result<Simulation> {
        let sources = self
            .components
            .iter()
            .map(|c| c.spectrum(&self.grid))
            .collect::<sosunmix::Result<Vec<_>>>()?;
        let cube = mix(&self.mixing, &sources, &self.noise)?;
        Ok(Simulation { sources, cube })
    }
}
