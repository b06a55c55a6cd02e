//! Pure-component spectra for the two- and three-solute mixture experiments.
//!
//! The reference spectra only exist as plots, so each component is modelled
//! as Gaussian bands over a flat 0.05 a.u. baseline on the 400-1000 nm grid.
//! Band parameters were chosen so the mean-removed components are
//! (near-)uncorrelated at lag 0 and lag 1, which is the separability
//! condition for a single-lag second-order method.

use serde::{Deserialize, Serialize};

use super::{
    mix, synth_spectrum, three_component_matrix, two_component_matrix, HyperspectralCube,
    MixingMatrix, NoiseSpec, PeakModel, Spectrum, WavelengthGrid,
};
use crate::{Error, Result};

/// A named pure component: flat baseline plus Gaussian bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentModel {
    pub name: String,
    pub baseline: f64,
    pub peaks: Vec<PeakModel>,
}

impl ComponentModel {
    pub fn new(name: &str, baseline: f64, peaks: &[(f64, f64, f64)]) -> Self {
        let peaks = peaks
            .iter()
            .map(|&(c, w, h)| PeakModel::new(c, w, h).expect("fixture peaks are valid"))
            .collect();
        Self {
            name: name.to_owned(),
            baseline,
            peaks,
        }
    }

    pub fn spectrum(&self, grid: &WavelengthGrid) -> Result<Spectrum> {
        synth_spectrum(&self.peaks, self.baseline, grid)
    }
}

/// Built-in experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fixture {
    /// Two solutes on the 7-pixel matrix, noiseless.
    Paper2,
    /// Three solutes on the 9-pixel matrix, noiseless.
    Paper3,
}

impl Fixture {
    pub const ALL: [Fixture; 2] = [Fixture::Paper2, Fixture::Paper3];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::Paper2 => "paper2",
            Fixture::Paper3 => "paper3",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown fixture `{name}` (expected paper2 or paper3)"
                ))
            })
    }

    pub fn grid(self) -> WavelengthGrid {
        WavelengthGrid::visible()
    }

    pub fn components(self) -> Vec<ComponentModel> {
        // permanganate-like four-band cluster around 526-546 nm
        let p1 = ComponentModel::new(
            "P1",
            0.05,
            &[
                (506.0, 9.0, 0.45),
                (526.0, 10.0, 1.0),
                (546.0, 10.0, 0.95),
                (566.0, 9.0, 0.5),
            ],
        );
        // dichromate-like blue band with a broad red shoulder
        let p2 = ComponentModel::new("P2", 0.05, &[(474.0, 25.0, 0.8), (651.0, 63.0, 0.365)]);
        match self {
            Fixture::Paper2 => vec![p1, p2],
            Fixture::Paper3 => {
                let p3 = ComponentModel::new(
                    "P3",
                    0.05,
                    &[
                        (604.0, 45.0, 0.452),
                        (794.0, 16.4, 0.69),
                        (419.0, 20.0, 0.4),
                    ],
                );
                vec![p1, p2, p3]
            }
        }
    }

    pub fn mixing(self) -> MixingMatrix {
        match self {
            Fixture::Paper2 => two_component_matrix(),
            Fixture::Paper3 => three_component_matrix(),
        }
    }

    pub fn noise(self) -> NoiseSpec {
        NoiseSpec::none()
    }

    pub fn sources(self) -> Vec<Spectrum> {
        let grid = self.grid();
        self.components()
            .iter()
            .map(|c| c.spectrum(&grid).expect("fixture spectra are finite"))
            .collect()
    }

    pub fn cube(self) -> HyperspectralCube {
        mix(&self.mixing(), &self.sources(), &self.noise()).expect("fixture shapes agree")
    }
}
