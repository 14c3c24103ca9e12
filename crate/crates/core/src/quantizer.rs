//! Finite-bit uniform quantizer with saturation.
//!
//! A `B`-bit quantizer with saturation level `G` has `2^B` levels
//! `-G + Δ/2, -G + 3Δ/2, ..., G - Δ/2` spaced by `Δ = G · 2^(1-B)`.
//! Values outside `[-G + Δ/2, G - Δ/2]` clamp to the extreme levels and are
//! flagged as saturated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported bit depth; keeps `2^B` levels addressable and exact.
pub const MAX_BITS: u32 = 52;

/// Bit depth and saturation level of the quantizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuantizer", into = "RawQuantizer")]
pub struct QuantizerConfig {
    bits: u32,
    saturation_level: f64,
    interval: f64,
}

#[derive(Serialize, Deserialize)]
struct RawQuantizer {
    bits: u32,
    saturation_level: f64,
}

impl TryFrom<RawQuantizer> for QuantizerConfig {
    type Error = Error;

    fn try_from(raw: RawQuantizer) -> Result<Self> {
        QuantizerConfig::new(raw.bits, raw.saturation_level)
    }
}

impl From<QuantizerConfig> for RawQuantizer {
    fn from(cfg: QuantizerConfig) -> Self {
        RawQuantizer { bits: cfg.bits, saturation_level: cfg.saturation_level }
    }
}

impl QuantizerConfig {
    pub fn new(bits: u32, saturation_level: f64) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::InvalidConfig(format!("bit depth must be in 1..={MAX_BITS}, got {bits}")));
        }
        if !(saturation_level.is_finite() && saturation_level > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "saturation level must be positive and finite, got {saturation_level}"
            )));
        }
        // Scaling by a power of two is exact.
        let interval = saturation_level * 2f64.powi(1 - bits as i32);
        Ok(Self { bits, saturation_level, interval })
    }

    /// Builds the config from the interval instead of the saturation level,
    /// `G = 2^(B-1) · Δ`.
    pub fn from_interval(bits: u32, interval: f64) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::InvalidConfig(format!("bit depth must be in 1..={MAX_BITS}, got {bits}")));
        }
        Self::new(bits, interval * 2f64.powi(bits as i32 - 1))
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Saturation level `G`.
    pub fn saturation_level(&self) -> f64 {
        self.saturation_level
    }

    /// Quantization interval `Δ`.
    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn level_count(&self) -> u64 {
        1u64 << self.bits
    }

    /// Level with index `k` in `0..2^B`.
    pub fn level(&self, k: u64) -> f64 {
        // (k + 1/2 - 2^(B-1)) is exact, so the levels are exactly symmetric
        (k as f64 + 0.5 - (1u64 << (self.bits - 1)) as f64) * self.interval
    }

    /// The extreme representable value `G - Δ/2`.
    pub fn top_level(&self) -> f64 {
        self.level(self.level_count() - 1)
    }

    /// Threshold `G - Δ` that a saturated measurement is known to exceed.
    pub fn saturation_threshold(&self) -> f64 {
        self.saturation_level - self.interval
    }
}

/// Which side, if any, a recorded value saturated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Saturation {
    None,
    Positive,
    Negative,
}

/// A value as recorded by the quantizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordedMeasurement {
    pub level: f64,
    pub saturation: Saturation,
}

impl RecordedMeasurement {
    pub fn is_saturated(&self) -> bool {
        self.saturation != Saturation::None
    }
}

/// All representable values in increasing order.
pub fn representable_levels(cfg: &QuantizerConfig) -> Vec<f64> {
    (0..cfg.level_count()).map(|k| cfg.level(k)).collect()
}

/// Rounds `t` to the nearest representable level.
///
/// Midpoints between two levels round away from zero, so `0` records as
/// `+Δ/2`. A measurement is saturated iff its level is an extreme one.
pub fn quantize(cfg: &QuantizerConfig, t: f64) -> Result<RecordedMeasurement> {
    if !t.is_finite() {
        return Err(Error::NonFinite(format!("cannot quantize {t}")));
    }
    let top = cfg.level_count() - 1;
    let guess = ((t + cfg.saturation_level) / cfg.interval).floor();
    let guess = if guess <= 0.0 {
        0
    } else if guess >= top as f64 {
        top
    } else {
        guess as u64
    };

    let mut best = guess;
    let mut best_dist = (t - cfg.level(guess)).abs();
    for k in [guess.wrapping_sub(1), guess + 1] {
        if k > top {
            continue;
        }
        let level = cfg.level(k);
        let dist = (t - level).abs();
        if dist < best_dist || (dist == best_dist && level.abs() > cfg.level(best).abs()) {
            best = k;
            best_dist = dist;
        }
    }

    let saturation = if best == top {
        Saturation::Positive
    } else if best == 0 {
        Saturation::Negative
    } else {
        Saturation::None
    };
    Ok(RecordedMeasurement { level: cfg.level(best), saturation })
}
