//! Image transforms: bit-depth squeezing and the black-box attacks used to
//! build evaluation sets.
//!
//! Gaussian noise is drawn from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! the 64-bit attack seed, sampling one value per channel in row-major,
//! channel-interleaved order. The generator and the order are part of the
//! output contract: the same image, sigma and seed always give the same bytes.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ImageBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqueezeSpec {
    bits: u8,
}

impl SqueezeSpec {
    pub fn bit_depth(bits: u8) -> Result<Self> {
        if !(1..=7).contains(&bits) {
            return Err(Error::BitsOutOfRange(bits));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn apply(&self, img: &ImageBuffer) -> ImageBuffer {
        squeeze_with_table(img, &squeeze_table(self.bits))
    }
}

impl FromStr for SqueezeSpec {
    type Err = Error;

    /// Parses `bitN`.
    fn from_str(s: &str) -> Result<Self> {
        let n = s
            .strip_prefix("bit")
            .and_then(|n| n.parse::<u8>().ok())
            .ok_or_else(|| Error::Malformed(format!("expected squeeze `bitN`, got `{s}`")))?;
        Self::bit_depth(n)
    }
}

impl fmt::Display for SqueezeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bit{}", self.bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackSpec {
    GaussianNoise { sigma: f64, seed: u64 },
    Brightness { delta: f64 },
}

impl AttackSpec {
    pub fn apply(&self, img: &ImageBuffer) -> Result<ImageBuffer> {
        match *self {
            AttackSpec::GaussianNoise { sigma, seed } => gaussian_attack(img, sigma, seed),
            AttackSpec::Brightness { delta } => Ok(brightness_attack(img, delta)),
        }
    }
}

impl FromStr for AttackSpec {
    type Err = Error;

    /// Parses `gaussian:SIGMA:SEED` or `brightness:DELTA`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Malformed(format!("expected `gaussian:SIGMA:SEED` or `brightness:DELTA`, got `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["gaussian", sigma, seed] => {
                let sigma: f64 = sigma.parse().map_err(|_| bad())?;
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(bad());
                }
                Ok(AttackSpec::GaussianNoise {
                    sigma,
                    seed: seed.parse().map_err(|_| bad())?,
                })
            }
            ["brightness", delta] => {
                let delta: f64 = delta.parse().map_err(|_| bad())?;
                if !delta.is_finite() {
                    return Err(bad());
                }
                Ok(AttackSpec::Brightness { delta })
            }
            _ => Err(bad()),
        }
    }
}

fn to_u8(v: f64) -> u8 {
    // f64::round is half away from zero
    v.round().clamp(0.0, 255.0) as u8
}

fn squeeze_value(v: u8, bits: u8) -> u8 {
    let levels = f64::from((1u32 << bits) - 1);
    let q = (f64::from(v) / 255.0 * levels).round();
    to_u8(q / levels * 255.0)
}

fn squeeze_table(bits: u8) -> [u8; 256] {
    let mut t = [0u8; 256];
    for (v, out) in t.iter_mut().enumerate() {
        *out = squeeze_value(v as u8, bits);
    }
    t
}

fn squeeze_with_table(img: &ImageBuffer, table: &[u8; 256]) -> ImageBuffer {
    img.map_values(|v| table[v as usize])
}

/// Quantizes every channel to `2^bits` levels and maps back to 8 bits.
pub fn bit_squeeze(img: &ImageBuffer, bits: u8) -> Result<ImageBuffer> {
    Ok(SqueezeSpec::bit_depth(bits)?.apply(img))
}

pub fn gaussian_attack(img: &ImageBuffer, sigma: f64, seed: u64) -> Result<ImageBuffer> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(img.map_values(|v| to_u8(f64::from(v) + normal.sample(&mut rng))))
}

pub fn brightness_attack(img: &ImageBuffer, delta: f64) -> ImageBuffer {
    img.map_values(|v| to_u8(f64::from(v) + delta))
}
