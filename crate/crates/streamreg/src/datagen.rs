//! Seeded synthetic streams: growth functions, discontinuity, abrupt drift and
//! Gaussian noise, plus the 576-dataset suite and its naming scheme.
//!
//! Randomness comes from ChaCha8 with one stream per purpose (inputs,
//! pre-drift coefficients, post-drift coefficients, noise), so every dataset
//! is reproducible on any platform.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::ObservedPair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataGenError {
    #[error("log-linear growth needs xᵀb > 0, got {0}")]
    DomainError(f64),
    #[error("malformed dataset name {name:?}: {reason}")]
    ParseError { name: String, reason: String },
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GrowthKind {
    Linear = 1,
    LogLinear = 2,
    QuadV1 = 3,
    QuadV2 = 4,
}

impl GrowthKind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Self::Linear),
            2 => Some(Self::LogLinear),
            3 => Some(Self::QuadV1),
            4 => Some(Self::QuadV2),
            _ => None,
        }
    }
}

pub fn growth_eval(kind: GrowthKind, x: &[f64], b: &[f64]) -> Result<f64, DataGenError> {
    let s: f64 = x.iter().zip(b).map(|(xi, bi)| xi * bi).sum();
    match kind {
        GrowthKind::Linear => Ok(s),
        GrowthKind::LogLinear if s > 0.0 => Ok(s * s.ln()),
        GrowthKind::LogLinear => Err(DataGenError::DomainError(s)),
        GrowthKind::QuadV1 => Ok(x.iter().zip(b).map(|(xi, bi)| bi * xi * xi).sum()),
        GrowthKind::QuadV2 => Ok(s * s),
    }
}

pub const SUITE_SIZE: usize = 2000;
pub const SUITE_DIMS: [usize; 3] = [1, 2, 4];
pub const SUITE_SCALES: [f64; 3] = [10.0, 50.0, 100.0];
pub const SUITE_NOISE: [f64; 4] = [0.0, 1.0, 3.0, 5.0];
pub const COEFF_MAX: f64 = 10.0;

/// Ordered growth pairs allowed for a discontinuous stream.
pub const DISCONTINUOUS_COMBOS: [(u8, u8); 5] = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4)];

/// Growth choices per (discontinuity, dimensionality). In one dimension the two
/// quadratic variants coincide, so pairs that differ only in the variant collapse.
pub fn growth_choices(discontinuous: bool, dims: usize) -> Vec<(GrowthKind, GrowthKind)> {
    let codes: Vec<(u8, u8)> = match (discontinuous, dims) {
        (false, 1) => vec![(1, 1), (2, 2), (3, 3)],
        (false, _) => vec![(1, 1), (2, 2), (3, 3), (4, 4)],
        (true, 1) => vec![(1, 2), (1, 3), (2, 3)],
        (true, _) => DISCONTINUOUS_COMBOS.to_vec(),
    };
    codes
        .into_iter()
        .map(|(a, b)| (GrowthKind::from_code(a).unwrap(), GrowthKind::from_code(b).unwrap()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub discontinuous: bool,
    pub drifting: bool,
    pub size: usize,
    pub dims: usize,
    pub input_scale: f64,
    pub noise_var: f64,
    pub growth1: GrowthKind,
    pub growth2: GrowthKind,
    pub seed: u64,
}

const STREAM_INPUTS: u64 = 0;
const STREAM_COEFF_PRE: u64 = 1;
const STREAM_COEFF_POST: u64 = 2;
const STREAM_NOISE: u64 = 3;

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), DataGenError> {
        let bad = |m: &str| Err(DataGenError::InvalidSpec(m.to_string()));
        if self.size == 0 || self.dims == 0 {
            return bad("size and dims must be positive");
        }
        if !(self.input_scale > 0.0) || !(self.noise_var >= 0.0) {
            return bad("scale must be positive and noise variance non-negative");
        }
        let pair = (self.growth1.code(), self.growth2.code());
        if self.discontinuous && !DISCONTINUOUS_COMBOS.contains(&pair) {
            return bad("discontinuous streams need an allowed ordered growth pair");
        }
        if !self.discontinuous && pair.0 != pair.1 {
            return bad("continuous streams use a single growth kind");
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Item index at which drifting streams switch coefficients.
    pub fn drift_index(&self) -> Option<usize> {
        self.drifting.then_some(self.size / 2)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    fn draw_coeffs(&self, stream: u64) -> Vec<f64> {
        let mut r = self.rng(stream);
        (0..self.dims).map(|_| r.random_range(0.0..COEFF_MAX)).collect()
    }

    /// Coefficients before and, for drifting streams, after the drift point.
    pub fn coefficients(&self) -> (Vec<f64>, Option<Vec<f64>>) {
        let pre = self.draw_coeffs(STREAM_COEFF_PRE);
        let post = self.drifting.then(|| self.draw_coeffs(STREAM_COEFF_POST));
        (pre, post)
    }

    /// Region-selected growth kind for an input.
    pub fn growth_for(&self, x: &[f64]) -> GrowthKind {
        let sum: f64 = x.iter().sum();
        if sum < self.dims as f64 * self.input_scale / 2.0 {
            self.growth1
        } else {
            self.growth2
        }
    }

    pub fn noise_free_target(&self, x: &[f64], coeffs: &[f64]) -> Result<f64, DataGenError> {
        growth_eval(self.growth_for(x), x, coeffs)
    }

    pub fn generate(&self) -> Result<Vec<ObservedPair>, DataGenError> {
        self.validate()?;
        let (pre, post) = self.coefficients();
        let drift_at = self.drift_index();
        let mut inputs = self.rng(STREAM_INPUTS);
        let mut noise_rng = self.rng(STREAM_NOISE);
        let noise = Normal::new(0.0, self.noise_var.sqrt()).expect("finite non-negative std dev");
        let mut out = Vec::with_capacity(self.size);
        for i in 0..self.size {
            // 1 − U[0,1) lies in (0,1], keeping inputs strictly positive.
            let x: Vec<f64> = (0..self.dims).map(|_| (1.0 - inputs.random::<f64>()) * self.input_scale).collect();
            let coeffs = match (&post, drift_at) {
                (Some(b), Some(k)) if i >= k => b,
                _ => &pre,
            };
            let mut y = self.noise_free_target(&x, coeffs)?;
            if self.noise_var > 0.0 {
                y += noise.sample(&mut noise_rng);
            }
            out.push(ObservedPair::new(x, y));
        }
        Ok(out)
    }
}

impl fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SYNTH_{}_{}_{}_{}_{}_{}_{}{}",
            if self.discontinuous { "D" } else { "ND" },
            if self.drifting { "CD" } else { "NCD" },
            self.size,
            self.dims,
            self.input_scale,
            self.noise_var,
            self.growth1.code(),
            self.growth2.code()
        )
    }
}

impl FromStr for DatasetSpec {
    type Err = DataGenError;

    /// Parses a dataset name; the seed is not part of the name and starts at 0.
    fn from_str(name: &str) -> Result<Self, DataGenError> {
        let err = |reason: &str| DataGenError::ParseError { name: name.to_string(), reason: reason.to_string() };
        let parts: Vec<&str> = name.split('_').collect();
        if parts.len() != 8 || parts[0] != "SYNTH" {
            return Err(err("expected SYNTH_(D|ND)_(CD|NCD)_SIZE_DIM_SCALE_NOISE_G1G2"));
        }
        let discontinuous = match parts[1] {
            "D" => true,
            "ND" => false,
            _ => return Err(err("discontinuity flag must be D or ND")),
        };
        let drifting = match parts[2] {
            "CD" => true,
            "NCD" => false,
            _ => return Err(err("drift flag must be CD or NCD")),
        };
        let size = parts[3].parse().map_err(|_| err("size is not an integer"))?;
        let dims = parts[4].parse().map_err(|_| err("dimension is not an integer"))?;
        let input_scale = parts[5].parse().map_err(|_| err("scale is not a number"))?;
        let noise_var = parts[6].parse().map_err(|_| err("noise variance is not a number"))?;
        let g = parts[7].as_bytes();
        if g.len() != 2 {
            return Err(err("growth suffix must have two digits"));
        }
        let kind = |c: u8| {
            c.checked_sub(b'0').and_then(GrowthKind::from_code).ok_or_else(|| err("unknown growth code"))
        };
        let spec = DatasetSpec {
            discontinuous,
            drifting,
            size,
            dims,
            input_scale,
            noise_var,
            growth1: kind(g[0])?,
            growth2: kind(g[1])?,
            seed: 0,
        };
        spec.validate().map_err(|e| err(&e.to_string()))?;
        if spec.to_string() != name {
            return Err(err("name is not in canonical form"));
        }
        Ok(spec)
    }
}

/// The full suite in bucket order: per dimension, ND_NCD, D_NCD, ND_CD, D_CD.
pub fn enumerate_suite(master_seed: u64) -> Vec<DatasetSpec> {
    let mut seeds = ChaCha8Rng::seed_from_u64(master_seed);
    let mut out = Vec::with_capacity(576);
    for dims in SUITE_DIMS {
        for drifting in [false, true] {
            for discontinuous in [false, true] {
                for input_scale in SUITE_SCALES {
                    for noise_var in SUITE_NOISE {
                        for (growth1, growth2) in growth_choices(discontinuous, dims) {
                            out.push(DatasetSpec {
                                discontinuous,
                                drifting,
                                size: SUITE_SIZE,
                                dims,
                                input_scale,
                                noise_var,
                                growth1,
                                growth2,
                                seed: seeds.next_u64(),
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Writes `x1,…,xd,y` rows with 17 significant digits.
pub fn write_csv<W: Write>(mut w: W, pairs: &[ObservedPair]) -> io::Result<()> {
    let d = pairs.first().map_or(0, |p| p.point.dim());
    let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).chain(std::iter::once("y".to_string())).collect();
    writeln!(w, "{}", header.join(","))?;
    for p in pairs {
        let row: Vec<String> = p.x().iter().chain(std::iter::once(&p.target)).map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}
