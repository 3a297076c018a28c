//! Bounded-error compressors and the scaled-difference tracking codec.
//!
//! A sender holding `z` and the shared replica `z_hat` transmits
//! `C((z - z_hat) / s)`; every holder of the replica then advances it by
//! `s * C(...)`. With a quantizer of squared error at most `C` the replica
//! stays within `sqrt(C) * s` of `z`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};

/// Bits used to ship one uncompressed coordinate.
pub const FULL_WIDTH_BITS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompressorKind {
    Identity,
    /// `delta * floor(x / delta + 1/2)` per coordinate.
    Uniform,
    /// Unbiased randomized rounding to the `delta` lattice.
    Stochastic,
}

/// What happens to lattice coordinates outside the signed `q`-bit range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OverflowPolicy {
    /// Keep the exact coordinate and count the overflow.
    #[default]
    Count,
    /// Clamp to the representable range and count the overflow.
    Saturate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressorSpec {
    pub kind: CompressorKind,
    /// Lattice pitch; ignored by the identity.
    pub delta: f64,
    pub dim: usize,
    /// Integer width `q` per lattice coordinate.
    pub bits: u32,
    pub overflow: OverflowPolicy,
}

impl CompressorSpec {
    pub fn identity(dim: usize) -> Self {
        CompressorSpec {
            kind: CompressorKind::Identity,
            delta: 0.0,
            dim,
            bits: FULL_WIDTH_BITS,
            overflow: OverflowPolicy::Count,
        }
    }

    pub fn uniform(dim: usize, delta: f64) -> Self {
        CompressorSpec {
            kind: CompressorKind::Uniform,
            delta,
            dim,
            bits: 8,
            overflow: OverflowPolicy::Count,
        }
    }

    pub fn stochastic(dim: usize, delta: f64) -> Self {
        CompressorSpec {
            kind: CompressorKind::Stochastic,
            ..Self::uniform(dim, delta)
        }
    }

    pub fn with_bits(mut self, bits: u32) -> Self {
        self.bits = bits;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        if self.kind != CompressorKind::Identity {
            if !(self.delta.is_finite() && self.delta > 0.0) {
                return Err(invalid("delta", format!("{} must be positive", self.delta)));
            }
            if !(1..=63).contains(&self.bits) {
                return Err(invalid("bits", format!("{} is not in 1..=63", self.bits)));
            }
        }
        Ok(())
    }

    /// Constant `C` with `E||C(x) - x||^2 <= C` for every `x`.
    pub fn error_bound(&self) -> f64 {
        match self.kind {
            CompressorKind::Identity => 0.0,
            CompressorKind::Uniform | CompressorKind::Stochastic => {
                self.dim as f64 * self.delta * self.delta / 4.0
            }
        }
    }

    /// Size of one message in bits: `p * q` for quantizers, full width for
    /// the identity.
    pub fn message_bits(&self) -> u64 {
        let per_coord = match self.kind {
            CompressorKind::Identity => FULL_WIDTH_BITS,
            _ => self.bits,
        };
        self.dim as u64 * per_coord as u64
    }

    /// Short label used in CSV output.
    pub fn label(&self) -> String {
        match self.kind {
            CompressorKind::Identity => "identity".to_string(),
            CompressorKind::Uniform => format!("uniform:{}", self.delta),
            CompressorKind::Stochastic => format!("stochastic:{}", self.delta),
        }
    }

    fn lattice_range(&self) -> (i64, i64) {
        let half = 1i64 << (self.bits - 1);
        (-half, half - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Exact {
        values: Vec<f64>,
        /// Sender state for lossless tracking messages; lets receivers
        /// reconstruct the telescoped replica without rounding drift.
        state: Option<Vec<f64>>,
    },
    Lattice {
        pitch: f64,
        coords: Vec<i64>,
    },
}

/// One compressed message.
#[derive(Debug, Clone, PartialEq)]
pub struct Payload {
    body: Body,
    pub bits: u64,
    /// Coordinates that fell outside the `q`-bit range.
    pub overflowed: usize,
}

impl Payload {
    pub fn dim(&self) -> usize {
        match &self.body {
            Body::Exact { values, .. } => values.len(),
            Body::Lattice { coords, .. } => coords.len(),
        }
    }

    /// Decoded real values.
    pub fn values(&self) -> Vec<f64> {
        match &self.body {
            Body::Exact { values, .. } => values.clone(),
            Body::Lattice { pitch, coords } => coords.iter().map(|&k| pitch * k as f64).collect(),
        }
    }

    /// Integer lattice coordinates, if the payload came from a quantizer.
    pub fn lattice(&self) -> Option<&[i64]> {
        match &self.body {
            Body::Lattice { coords, .. } => Some(coords),
            Body::Exact { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.body {
            Body::Exact { values, .. } => values.iter().all(|v| *v == 0.0),
            Body::Lattice { coords, .. } => coords.iter().all(|k| *k == 0),
        }
    }
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("compressor input"))
    }
}

/// Applies the compressor to `x`.
pub fn compress<R: Rng + ?Sized>(spec: &CompressorSpec, x: &[f64], rng: &mut R) -> Result<Payload> {
    spec.validate()?;
    check_dim(spec.dim, x.len())?;
    check_finite(x)?;
    let bits = spec.message_bits();
    if spec.kind == CompressorKind::Identity {
        return Ok(Payload {
            body: Body::Exact {
                values: x.to_vec(),
                state: None,
            },
            bits,
            overflowed: 0,
        });
    }
    let (lo, hi) = spec.lattice_range();
    let mut overflowed = 0;
    let coords = x
        .iter()
        .map(|&xk| {
            let y = xk / spec.delta;
            let base = y.floor();
            // `y - floor(y)` is exact in binary floating point.
            let frac = y - base;
            let up = match spec.kind {
                CompressorKind::Uniform => frac >= 0.5,
                _ => rng.random::<f64>() < frac,
            };
            let k = (if up { base + 1.0 } else { base }) as i64;
            if k < lo || k > hi {
                overflowed += 1;
                if spec.overflow == OverflowPolicy::Saturate {
                    return k.clamp(lo, hi);
                }
            }
            k
        })
        .collect();
    Ok(Payload {
        body: Body::Lattice {
            pitch: spec.delta,
            coords,
        },
        bits,
        overflowed,
    })
}

/// Message `C((z - z_hat_prev) / scale)`.
pub fn encode_tracking<R: Rng + ?Sized>(
    spec: &CompressorSpec,
    z: &[f64],
    z_hat_prev: &[f64],
    scale: f64,
    rng: &mut R,
) -> Result<Payload> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(invalid("scale", format!("{scale} must be positive")));
    }
    check_dim(z.len(), z_hat_prev.len())?;
    let arg: Vec<f64> = z
        .iter()
        .zip(z_hat_prev)
        .map(|(a, b)| (a - b) / scale)
        .collect();
    let mut payload = compress(spec, &arg, rng)?;
    if let Body::Exact { state, .. } = &mut payload.body {
        *state = Some(z.to_vec());
    }
    Ok(payload)
}

/// Replica update `z_hat_prev + scale * payload`.
pub fn apply_tracking(z_hat_prev: &[f64], payload: &Payload, scale: f64) -> Result<Vec<f64>> {
    check_dim(z_hat_prev.len(), payload.dim())?;
    if let Body::Exact {
        state: Some(state), ..
    } = &payload.body
    {
        return Ok(state.clone());
    }
    Ok(z_hat_prev
        .iter()
        .zip(payload.values())
        .map(|(h, c)| h + scale * c)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::{stream, Purpose};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rng() -> crate::streams::StreamRng {
        stream(3, Purpose::Test, 0, 0)
    }

    fn sq_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    #[test]
    fn uniform_rounds_half_up() {
        let spec = CompressorSpec::uniform(2, 1.0);
        let out = compress(&spec, &[0.3, 1.7], &mut rng()).unwrap();
        assert_eq!(out.values(), vec![0.0, 2.0]);
        assert_eq!(out.lattice(), Some(&[0i64, 2][..]));
        assert_relative_eq!(sq_err(&out.values(), &[0.3, 1.7]), 0.18, epsilon = 1e-12);
        assert!(0.18 <= spec.error_bound());

        let spec1 = CompressorSpec::uniform(1, 1.0);
        assert_eq!(compress(&spec1, &[-0.5], &mut rng()).unwrap().values(), vec![0.0]);
        assert_eq!(compress(&spec1, &[0.5], &mut rng()).unwrap().values(), vec![1.0]);
        assert_eq!(compress(&spec1, &[-1.5], &mut rng()).unwrap().values(), vec![-1.0]);
    }

    #[test]
    fn identity_passes_through() {
        let spec = CompressorSpec::identity(3);
        let x = [0.123, -4.5, 1e-9];
        let out = compress(&spec, &x, &mut rng()).unwrap();
        assert_eq!(out.values(), x.to_vec());
        assert_eq!(out.bits, 3 * 64);
        assert_eq!(spec.error_bound(), 0.0);
    }

    #[test]
    fn error_bounds() {
        assert_eq!(CompressorSpec::uniform(2, 1.0).error_bound(), 0.5);
        assert_eq!(CompressorSpec::identity(5).error_bound(), 0.0);
        assert_eq!(CompressorSpec::stochastic(4, 2.0).error_bound(), 4.0);
    }

    #[test]
    fn bits_are_p_times_q() {
        let spec = CompressorSpec::uniform(2, 1.0);
        let out = compress(&spec, &[0.0, 0.0], &mut rng()).unwrap();
        assert_eq!(out.bits, 16);
        assert_eq!(spec.with_bits(4).message_bits(), 8);
    }

    #[test]
    fn rejects_bad_input() {
        let spec = CompressorSpec::uniform(2, 1.0);
        assert!(matches!(
            compress(&spec, &[1.0], &mut rng()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(compress(&CompressorSpec::uniform(1, 0.0), &[1.0], &mut rng()).is_err());
        assert!(compress(&CompressorSpec::uniform(1, -1.0), &[1.0], &mut rng()).is_err());
        assert!(compress(&spec, &[f64::NAN, 0.0], &mut rng()).is_err());
        assert!(encode_tracking(&spec, &[1.0, 1.0], &[0.0, 0.0], 0.0, &mut rng()).is_err());
        assert!(encode_tracking(&spec, &[1.0, 1.0], &[0.0, 0.0], -1.0, &mut rng()).is_err());
    }

    #[test]
    fn overflow_is_counted_or_saturated() {
        let spec = CompressorSpec::uniform(2, 1.0);
        let out = compress(&spec, &[200.0, -3.0], &mut rng()).unwrap();
        assert_eq!(out.overflowed, 1);
        assert_eq!(out.values(), vec![200.0, -3.0]);

        let sat = CompressorSpec {
            overflow: OverflowPolicy::Saturate,
            ..spec
        };
        let out = compress(&sat, &[200.0, -300.0], &mut rng()).unwrap();
        assert_eq!(out.overflowed, 2);
        assert_eq!(out.lattice(), Some(&[127i64, -128][..]));
    }

    #[test]
    fn tracking_examples() {
        let id = CompressorSpec::identity(2);
        let msg = encode_tracking(&id, &[2.0, 4.0], &[0.5, 1.0], 0.7, &mut rng()).unwrap();
        assert_eq!(msg.values(), vec![(2.0 - 0.5) / 0.7, (4.0 - 1.0) / 0.7]);
        let msg = encode_tracking(&id, &[2.0, 4.0], &[0.0, 0.0], 0.7, &mut rng()).unwrap();
        assert_eq!(apply_tracking(&[0.0, 0.0], &msg, 0.7).unwrap(), vec![2.0, 4.0]);

        let q = CompressorSpec::uniform(1, 1.0);
        let msg = encode_tracking(&q, &[1.2], &[0.0], 0.5, &mut rng()).unwrap();
        assert_eq!(msg.values(), vec![2.0]);
        assert_eq!(apply_tracking(&[0.0], &msg, 0.5).unwrap(), vec![1.0]);

        let same = encode_tracking(&q, &[3.3], &[3.3], 0.25, &mut rng()).unwrap();
        assert!(same.is_zero());
        assert_eq!(apply_tracking(&[3.3], &same, 0.25).unwrap(), vec![3.3]);
    }

    #[test]
    fn stochastic_is_unbiased() {
        let spec = CompressorSpec::stochastic(2, 1.0);
        let x = [0.3, -1.75];
        let draws = 100_000;
        let mut r = rng();
        let mut mean = [0.0; 2];
        let mut mse = 0.0;
        for _ in 0..draws {
            let v = compress(&spec, &x, &mut r).unwrap().values();
            mean[0] += v[0];
            mean[1] += v[1];
            mse += sq_err(&v, &x);
            assert!(sq_err(&v, &x) <= 2.0 * 1.0 + 1e-12);
        }
        let budget = 4.0 * 0.5 / (draws as f64).sqrt();
        for k in 0..2 {
            assert!((mean[k] / draws as f64 - x[k]).abs() <= budget);
        }
        assert!(mse / draws as f64 <= spec.error_bound() * 1.05);
    }

    proptest! {
        #[test]
        fn uniform_error_within_bound(
            xs in proptest::collection::vec(-10.0f64..10.0, 1..8),
            delta in prop_oneof![Just(0.5), Just(1.0), Just(2.0), 0.01f64..3.0],
        ) {
            let spec = CompressorSpec::uniform(xs.len(), delta).with_bits(32);
            let out = compress(&spec, &xs, &mut rng()).unwrap();
            prop_assert!(sq_err(&out.values(), &xs) <= spec.error_bound() * (1.0 + 1e-12));
        }

        #[test]
        fn tracking_error_scales_with_s(
            z in proptest::collection::vec(-5.0f64..5.0, 2),
            prev in proptest::collection::vec(-5.0f64..5.0, 2),
            s in 1e-3f64..2.0,
        ) {
            let spec = CompressorSpec::uniform(2, 1.0).with_bits(32);
            let msg = encode_tracking(&spec, &z, &prev, s, &mut rng()).unwrap();
            let next = apply_tracking(&prev, &msg, s).unwrap();
            let err = sq_err(&next, &z).sqrt();
            prop_assert!(err <= spec.error_bound().sqrt() * s * (1.0 + 1e-9));
        }
    }
}
