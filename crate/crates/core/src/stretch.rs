//! Mapping from interaction values and force vectors to QuadStretcher frames.
//!
//! 3-DoF rendering is built from three additive layers, summed per side and
//! then clamped to the comfort limit `L`:
//!
//! * x (non-directional): `-|x|·L` on every side, i.e. All Contract.
//! * y (horizontal): contract the side the force points to, expand the other.
//! * z (vertical): a downward force contracts Ventral and expands Dorsal.
//!
//! [`RenderScheme3D::ContractAwayFromForce`] flips the y and z layers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ForceVector, QuadDeviceParams, Side, StretchFrame};

/// Slack allowed on the unit-norm precondition for accumulated rounding.
const NORM_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("force vector component is not finite: ({x}, {y}, {z})")]
    NonFinite { x: f64, y: f64, z: f64 },
    #[error("force vector norm {0} exceeds 1")]
    NormTooLarge(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RenderScheme1D {
    AllContract,
    AllExpand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RenderScheme3D {
    ContractTowardsForce,
    ContractAwayFromForce,
}

impl RenderScheme1D {
    fn sign(self) -> f64 {
        match self {
            RenderScheme1D::AllContract => -1.0,
            RenderScheme1D::AllExpand => 1.0,
        }
    }
}

impl RenderScheme3D {
    fn directional_sign(self) -> f64 {
        match self {
            RenderScheme3D::ContractTowardsForce => 1.0,
            RenderScheme3D::ContractAwayFromForce => -1.0,
        }
    }
}

impl fmt::Display for RenderScheme1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RenderScheme1D::AllContract => "all-contract",
            RenderScheme1D::AllExpand => "all-expand",
        })
    }
}

impl fmt::Display for RenderScheme3D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RenderScheme3D::ContractTowardsForce => "contract-towards-force",
            RenderScheme3D::ContractAwayFromForce => "contract-away-from-force",
        })
    }
}

impl FromStr for RenderScheme1D {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "all-contract" | "allcontract" => Ok(RenderScheme1D::AllContract),
            "all-expand" | "allexpand" => Ok(RenderScheme1D::AllExpand),
            _ => Err(format!("unknown 1-DoF scheme `{s}`")),
        }
    }
}

impl FromStr for RenderScheme3D {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "contract-towards-force" | "towards" => Ok(RenderScheme3D::ContractTowardsForce),
            "contract-away-from-force" | "away" => Ok(RenderScheme3D::ContractAwayFromForce),
            _ => Err(format!("unknown 3-DoF scheme `{s}`")),
        }
    }
}

/// Renders a 1-DoF interaction value: every unit gets `±value·L`.
pub fn render_1dof(
    value: f64,
    scheme: RenderScheme1D,
    params: &QuadDeviceParams,
) -> Result<StretchFrame, RenderError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(RenderError::OutOfRange {
            name: "1-DoF value",
            value,
        });
    }
    let signal = scheme.sign() * value * params.comfort_limit;
    Ok(StretchFrame::uniform(signal, 0.0))
}

/// Per-side layer sum for a force vector, before clamping.
pub fn layer_sum(
    force: ForceVector,
    scheme: RenderScheme3D,
    params: &QuadDeviceParams,
) -> Result<[f64; 4], RenderError> {
    let ForceVector { x, y, z } = force;
    if !force.is_finite() {
        return Err(RenderError::NonFinite { x, y, z });
    }
    let norm = force.norm();
    if norm > 1.0 + NORM_SLACK {
        return Err(RenderError::NormTooLarge(norm));
    }
    let limit = params.comfort_limit;
    let dir = scheme.directional_sign();
    let mut out = [0.0; 4];

    for s in out.iter_mut() {
        *s -= x.abs() * limit;
    }
    // A force pointing left (y < 0) contracts Left and expands Right.
    out[Side::Left.index()] += dir * y * limit;
    out[Side::Right.index()] -= dir * y * limit;
    // A force pointing down (z < 0) contracts Ventral and expands Dorsal.
    out[Side::Ventral.index()] += dir * z * limit;
    out[Side::Dorsal.index()] -= dir * z * limit;
    Ok(out)
}

/// Renders a 3-DoF force vector into a clamped frame.
pub fn render_3dof(
    force: ForceVector,
    scheme: RenderScheme3D,
    params: &QuadDeviceParams,
) -> Result<StretchFrame, RenderError> {
    let signals = layer_sum(force, scheme, params)?;
    Ok(clamp_frame(StretchFrame::new(signals, 0.0), params))
}

/// Limits every signal to `[-comfort_limit, comfort_limit]`.
pub fn clamp_frame(frame: StretchFrame, params: &QuadDeviceParams) -> StretchFrame {
    let limit = params.comfort_limit;
    StretchFrame {
        signals: frame.signals.map(|s| s.clamp(-limit, limit)),
        timestamp: frame.timestamp,
    }
}
