//! Classical noise model, sampling, classicization of quantum carbons, and the
//! deterministic optimization grid.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CarbonSpin;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// Static (quasi-DC) noise strength, kHz.
    pub sigma_static: f64,
    /// In-phase strength at the carbon Larmor frequency, kHz.
    pub sigma_x: f64,
    /// Quadrature strength; always equal to `sigma_x`.
    pub sigma_y: f64,
    /// Signed carbon Larmor frequency, kHz.
    pub omega_c: f64,
    pub carbons: Vec<CarbonSpin>,
}

/// Five proximal carbons. Their squared couplings sum to 9806.24 kHz² (`a_zz`)
/// and 9289.28 kHz² (`a_perp`).
pub fn default_carbons() -> Vec<CarbonSpin> {
    [
        (-24.6, 17.9, 0.0),
        (64.9, 69.0, 1.0),
        (17.9, 37.7, 2.0),
        (-28.5, 21.3, 3.0),
        (62.1, 48.3, 4.0),
    ]
    .into_iter()
    .map(|(a_zz, a_perp, phi)| CarbonSpin { a_zz, a_perp, phi })
    .collect()
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_static: 20.0,
            sigma_x: 30.0,
            sigma_y: 30.0,
            omega_c: -546.67,
            carbons: default_carbons(),
        }
    }
}

impl NoiseModel {
    pub fn new(
        sigma_static: f64,
        sigma_x: f64,
        sigma_y: f64,
        omega_c: f64,
        carbons: Vec<CarbonSpin>,
    ) -> Result<Self> {
        let model = Self {
            sigma_static,
            sigma_x,
            sigma_y,
            omega_c,
            carbons,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_static", self.sigma_static),
            ("sigma_x", self.sigma_x),
            ("sigma_y", self.sigma_y),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.sigma_x != self.sigma_y {
            return Err(Error::InvalidArgument(format!(
                "sigma_x ({}) and sigma_y ({}) must be equal",
                self.sigma_x, self.sigma_y
            )));
        }
        if !self.omega_c.is_finite() {
            return Err(Error::InvalidArgument("omega_c must be finite".into()));
        }
        for c in &self.carbons {
            c.validate()?;
        }
        Ok(())
    }

    /// Purely classical model carrying the classicized strengths.
    pub fn classicized(&self) -> NoiseModel {
        let (sx, sy, sz) = classicize(self);
        NoiseModel {
            sigma_static: sz,
            sigma_x: sx,
            sigma_y: sy,
            omega_c: self.omega_c,
            carbons: Vec::new(),
        }
    }
}

/// One realization of the classical noise amplitudes, kHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSample {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl NoiseSample {
    pub const ZERO: NoiseSample = NoiseSample {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };
}

/// Generator for sample `index` of the run seeded by `seed`.
///
/// ChaCha20 with the seed expanded by `seed_from_u64` and the sample index as
/// the stream id, so each sample is independent of evaluation order.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `count` independent Gaussian samples with the model's static and
/// quadrature strengths (carbons are ignored; see [`NoiseModel::classicized`]).
pub fn sample_noise(model: &NoiseModel, rng_seed: u64, count: usize) -> Result<Vec<NoiseSample>> {
    model.validate()?;
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    Ok((0..count as u64)
        .map(|i| {
            let mut rng = sample_rng(rng_seed, i);
            NoiseSample {
                x: model.sigma_x * std.sample(&mut rng),
                y: model.sigma_y * std.sample(&mut rng),
                z: model.sigma_static * std.sample(&mut rng),
            }
        })
        .collect())
}

/// Classical strengths `(σ_x, σ_y, σ_z)` after folding every carbon into the
/// Gaussian model: `a_zz/2` adds to the static part, and `a_perp/2` is split
/// equally between the two quadratures.
pub fn classicize(model: &NoiseModel) -> (f64, f64, f64) {
    let zz: f64 = model.carbons.iter().map(|c| (c.a_zz / 2.0).powi(2)).sum();
    let perp: f64 = model.carbons.iter().map(|c| (c.a_perp / 2.0).powi(2)).sum();
    let sz = (model.sigma_static.powi(2) + zz).sqrt();
    let sx = (model.sigma_x.powi(2) + perp / 2.0).sqrt();
    let sy = (model.sigma_y.powi(2) + perp / 2.0).sqrt();
    (sx, sy, sz)
}

pub const DEFAULT_STATIC_POINTS: [f64; 3] = [-88.0, 0.0, 88.0];
pub const DEFAULT_TV_POINTS: [f64; 3] = [-76.0, 0.0, 76.0];

/// Cartesian product `tv × tv × static` ordered with `x` slowest and `z`
/// fastest.
pub fn optimization_grid(static_points: &[f64], tv_points: &[f64]) -> Result<Vec<NoiseSample>> {
    if static_points.is_empty() || tv_points.is_empty() {
        return Err(Error::InvalidArgument("grid point lists must be nonempty".into()));
    }
    let mut out = Vec::with_capacity(tv_points.len().pow(2) * static_points.len());
    for &x in tv_points {
        for &y in tv_points {
            for &z in static_points {
                out.push(NoiseSample { x, y, z });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPeak {
    /// kHz.
    pub frequency: f64,
    /// kHz².
    pub area: f64,
}

/// Line spectrum: one peak per carbon, one for the classical bath at `|ω_C|`,
/// and a zero-frequency entry collecting all static contributions.
pub fn spectrum(model: &NoiseModel) -> Vec<SpectrumPeak> {
    let mut peaks: Vec<SpectrumPeak> = model
        .carbons
        .iter()
        .map(|c| SpectrumPeak {
            frequency: (model.omega_c - c.a_zz / 2.0).abs(),
            area: (c.a_perp / 2.0).powi(2),
        })
        .collect();
    peaks.push(SpectrumPeak {
        frequency: model.omega_c.abs(),
        area: model.sigma_x.powi(2) + model.sigma_y.powi(2),
    });
    let zz: f64 = model.carbons.iter().map(|c| (c.a_zz / 2.0).powi(2)).sum();
    peaks.push(SpectrumPeak {
        frequency: 0.0,
        area: model.sigma_static.powi(2) + zz,
    });
    peaks
}
