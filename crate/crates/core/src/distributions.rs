//! Delay distributions for transmission and processing times.
//!
//! All three supported families expose exact analytic means and tail
//! conditional means `E[X | X > l]`, and sample through a counter-keyed
//! stream so that a given `(seed, index, kind)` triple always yields the
//! same draw regardless of evaluation order. That keying is what lets
//! parameter sweeps reuse identical draws per packet (common random
//! numbers) and lets grid points run concurrently without a shared RNG.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

/// Errors from distribution queries and spec parsing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    /// The conditioning event `X > l` has probability zero, so the tail
    /// conditional mean is undefined.
    #[error("tail query at l = {l} is at or beyond the support supremum {support_sup}")]
    QueryBeyondSupport { l: f64, support_sup: f64 },

    /// A textual spec could not be parsed or had invalid parameters.
    #[error("invalid distribution spec: {0}")]
    InvalidSpec(String),
}

/// A nonnegative delay distribution.
///
/// Text syntax (CLI and config files): `exp:<mean>`, `uniform:<a>,<b>`,
/// `det:<v>`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// Exponential with the given mean.
    Exponential { mean: f64 },
    /// Uniform on `[a, b)` with `0 <= a < b`.
    Uniform { a: f64, b: f64 },
    /// Point mass at `v >= 0`.
    Deterministic { v: f64 },
}

impl DistributionSpec {
    pub fn exponential(mean: f64) -> Result<Self, DistError> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(DistError::InvalidSpec(format!(
                "exponential mean must be positive and finite, got {mean}"
            )));
        }
        Ok(Self::Exponential { mean })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self, DistError> {
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b > a) {
            return Err(DistError::InvalidSpec(format!(
                "uniform bounds must satisfy 0 <= a < b, got a = {a}, b = {b}"
            )));
        }
        Ok(Self::Uniform { a, b })
    }

    pub fn deterministic(v: f64) -> Result<Self, DistError> {
        if !(v.is_finite() && v >= 0.0) {
            return Err(DistError::InvalidSpec(format!(
                "deterministic value must be nonnegative and finite, got {v}"
            )));
        }
        Ok(Self::Deterministic { v })
    }

    /// Exact analytic mean.
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { mean } => mean,
            Self::Uniform { a, b } => 0.5 * (a + b),
            Self::Deterministic { v } => v,
        }
    }

    /// Essential supremum of the support (`f64::INFINITY` for exponential).
    pub fn support_sup(&self) -> f64 {
        match *self {
            Self::Exponential { .. } => f64::INFINITY,
            Self::Uniform { b, .. } => b,
            Self::Deterministic { v } => v,
        }
    }

    /// Tail conditional mean `E[X | X > l]`.
    ///
    /// Non-decreasing in `l`; equals the unconditional mean for `l` at or
    /// below the lower edge of the support. Fails with
    /// [`DistError::QueryBeyondSupport`] when `l` reaches the essential
    /// supremum, where the conditioning event has probability zero.
    pub fn tail_conditional_mean(&self, l: f64) -> Result<f64, DistError> {
        match *self {
            Self::Exponential { mean } => Ok(mean + l.max(0.0)),
            Self::Uniform { a, b } => {
                if l >= b {
                    Err(DistError::QueryBeyondSupport { l, support_sup: b })
                } else if l <= a {
                    Ok(0.5 * (a + b))
                } else {
                    Ok(0.5 * (l + b))
                }
            }
            Self::Deterministic { v } => {
                if l >= v {
                    Err(DistError::QueryBeyondSupport { l, support_sup: v })
                } else {
                    Ok(v)
                }
            }
        }
    }

    /// Draws one value, advancing the stream.
    ///
    /// Inverse-CDF sampling: every draw consumes exactly one uniform, so a
    /// keyed stream maps to exactly one value per `(seed, index, kind)`.
    pub fn sample(&self, stream: &mut DrawStream) -> f64 {
        match *self {
            Self::Exponential { mean } => {
                let u = stream.uniform01();
                -mean * (1.0 - u).ln()
            }
            Self::Uniform { a, b } => {
                let u = stream.uniform01();
                a + (b - a) * u
            }
            // Point mass: no randomness consumed.
            Self::Deterministic { v } => v,
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Exponential { mean } => write!(f, "exp:{mean}"),
            Self::Uniform { a, b } => write!(f, "uniform:{a},{b}"),
            Self::Deterministic { v } => write!(f, "det:{v}"),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = DistError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (family, params) = s
            .split_once(':')
            .ok_or_else(|| DistError::InvalidSpec(format!("missing ':' in `{s}`")))?;
        let parse_num = |t: &str| -> Result<f64, DistError> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| DistError::InvalidSpec(format!("bad number `{t}` in `{s}`")))
        };
        match family {
            "exp" => Self::exponential(parse_num(params)?),
            "det" => Self::deterministic(parse_num(params)?),
            "uniform" => {
                let (a, b) = params.split_once(',').ok_or_else(|| {
                    DistError::InvalidSpec(format!("uniform needs `a,b` in `{s}`"))
                })?;
                Self::uniform(parse_num(a)?, parse_num(b)?)
            }
            other => Err(DistError::InvalidSpec(format!(
                "unknown family `{other}` (expected exp, uniform, or det)"
            ))),
        }
    }
}

/// Which delay of a packet a draw realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawKind {
    /// Channel transmission time `T_k`.
    Transmission,
    /// Server processing time `C_k`.
    Processing,
}

impl DrawKind {
    fn tag(self) -> u8 {
        match self {
            DrawKind::Transmission => 0,
            DrawKind::Processing => 1,
        }
    }
}

/// A deterministic random stream.
///
/// `keyed(seed, index, kind)` derives an independent stream from the triple
/// itself, so the value drawn for packet `index` does not depend on how many
/// draws happened before it or on which thread performs it.
#[derive(Debug, Clone)]
pub struct DrawStream {
    rng: ChaCha8Rng,
}

impl DrawStream {
    /// Stream keyed by `(seed, index, kind)`; the mapping is injective in
    /// the triple.
    pub fn keyed(seed: u64, index: u64, kind: DrawKind) -> Self {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&index.to_le_bytes());
        key[16] = kind.tag();
        key[17] = 0x5d; // domain separator vs. plain seeded streams
        Self {
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// Plain sequential stream for bulk sampling.
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw on the open interval (0, 1).
    ///
    /// The open interval keeps exponential samples strictly positive and
    /// uniform samples strictly inside `(a, b)`.
    pub fn uniform01(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}
