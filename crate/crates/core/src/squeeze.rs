//! Squeezer rendering: per-user calibration, value-to-contraction mapping and
//! the string tension model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ForceVector, SqueezerParams};

#[derive(Debug, Error, PartialEq)]
pub enum SqueezeError {
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("calibration maximum {max} mm is not above minimum {min} mm")]
    EmptyRange { min: f64, max: f64 },
    #[error("calibration maximum {max} mm exceeds mechanical travel {limit} mm")]
    BeyondTravel { max: f64, limit: f64 },
    #[error("calibration sequence is missing its {0} confirmation")]
    MissingConfirm(&'static str),
    #[error("maximum confirmed before minimum")]
    ConfirmOrder,
    #[error("step size must be positive, got {0}")]
    BadStep(f64),
    #[error("contraction {value} mm outside tension table domain [{lo}, {hi}]")]
    Extrapolation { value: f64, lo: f64, hi: f64 },
}

/// User-specific contraction range. `min_contraction` is the minimal-tension
/// reference; calibration re-references it to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeCalibration {
    pub min_contraction: f64,
    pub max_contraction: f64,
}

impl SqueezeCalibration {
    pub fn new(min_contraction: f64, max_contraction: f64) -> Result<Self, SqueezeError> {
        if !(min_contraction >= 0.0 && max_contraction > min_contraction) {
            return Err(SqueezeError::EmptyRange {
                min: min_contraction,
                max: max_contraction,
            });
        }
        Ok(SqueezeCalibration {
            min_contraction,
            max_contraction,
        })
    }

    pub fn span(&self) -> f64 {
        self.max_contraction - self.min_contraction
    }

    pub fn check_travel(&self, limit: f64) -> Result<(), SqueezeError> {
        if self.max_contraction > limit {
            return Err(SqueezeError::BeyondTravel {
                max: self.max_contraction,
                limit,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeCommand {
    /// String contraction setpoint, mm.
    pub contraction: f64,
    pub timestamp: f64,
}

/// Button events of the calibration procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationEvent {
    Contract,
    Release,
    ConfirmMin,
    ConfirmMax,
}

/// Replays a calibration button sequence. Position is tracked in whole steps
/// from the starting string length and cannot go below it; the confirmed
/// minimum becomes contraction zero.
pub fn calibrate(
    events: &[CalibrationEvent],
    step_size: f64,
    travel_limit: f64,
) -> Result<SqueezeCalibration, SqueezeError> {
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(SqueezeError::BadStep(step_size));
    }
    let max_steps = (travel_limit / step_size).floor() as i64;
    let mut steps: i64 = 0;
    let mut min_steps = None;
    let mut max_steps_confirmed = None;
    for event in events {
        match event {
            CalibrationEvent::Contract => steps = (steps + 1).min(max_steps),
            CalibrationEvent::Release => steps = (steps - 1).max(0),
            CalibrationEvent::ConfirmMin => min_steps = Some(steps),
            CalibrationEvent::ConfirmMax => {
                if min_steps.is_none() {
                    return Err(SqueezeError::ConfirmOrder);
                }
                max_steps_confirmed = Some(steps);
            }
        }
    }
    let lo = min_steps.ok_or(SqueezeError::MissingConfirm("minimum"))?;
    let hi = max_steps_confirmed.ok_or(SqueezeError::MissingConfirm("maximum"))?;
    let max = (hi - lo) as f64 * step_size;
    if hi <= lo {
        return Err(SqueezeError::EmptyRange { min: 0.0, max });
    }
    let cal = SqueezeCalibration::new(0.0, max)?;
    cal.check_travel(travel_limit)?;
    Ok(cal)
}

/// Linear map of a 1-DoF value onto the calibrated contraction range.
pub fn render_value(value: f64, cal: &SqueezeCalibration) -> Result<SqueezeCommand, SqueezeError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(SqueezeError::OutOfRange {
            name: "1-DoF value",
            value,
        });
    }
    Ok(SqueezeCommand {
        contraction: cal.min_contraction + value * cal.span(),
        timestamp: 0.0,
    })
}

/// Squeeze is 1-DoF: only the force magnitude matters.
pub fn render_force(
    force: ForceVector,
    cal: &SqueezeCalibration,
) -> Result<SqueezeCommand, SqueezeError> {
    let n = force.norm();
    if !n.is_finite() {
        return Err(SqueezeError::OutOfRange {
            name: "force norm",
            value: n,
        });
    }
    // Tolerate rounding just above one from upstream normalization.
    let n = if n > 1.0 && n <= 1.0 + 1e-9 { 1.0 } else { n };
    render_value(n, cal).map_err(|_| SqueezeError::OutOfRange {
        name: "force norm",
        value: n,
    })
}

/// Piecewise-linear interpolation of the tension table; exact at knots and
/// an error outside the tabulated range.
pub fn tension_from_contraction(
    contraction: f64,
    params: &SqueezerParams,
) -> Result<f64, SqueezeError> {
    let knots = params.tension_curve.knots();
    let (lo, hi) = params.tension_curve.domain();
    if !(contraction >= lo && contraction <= hi) {
        return Err(SqueezeError::Extrapolation {
            value: contraction,
            lo,
            hi,
        });
    }
    let i = knots.partition_point(|&(x, _)| x <= contraction);
    if i == 0 {
        return Ok(knots[0].1);
    }
    let (x0, t0) = knots[i - 1];
    if x0 == contraction || i == knots.len() {
        return Ok(t0);
    }
    let (x1, t1) = knots[i];
    let u = (contraction - x0) / (x1 - x0);
    Ok(t0 + u * (t1 - t0))
}

/// Normal force each tactor presses into the forearm for a string tension.
pub fn tactor_normal_force(tension: f64, params: &SqueezerParams) -> f64 {
    debug_assert!(tension >= 0.0, "negative tension {tension}");
    params.tactor_force_factor * tension
}

/// Inward force per contact, as a fraction of string tension, for a string
/// wrapped over `contacts` equally spaced points on a circle.
pub fn circular_wrap_force_factor(contacts: u32) -> f64 {
    2.0 * (std::f64::consts::PI / contacts as f64).sin()
}
