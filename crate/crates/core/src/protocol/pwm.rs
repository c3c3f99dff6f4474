//! Servo angle and PCA9685-style PWM mapping for the stretch units.

use serde::{Deserialize, Serialize};

use super::frame::{cmm_to_mm, CommandFrame, Payload, ProtocolError};

pub const PWM_RESOLUTION: f64 = 4096.0;
pub const MAX_SERVO_ANGLE: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServoConfig {
    /// Rack-and-pinion radius, mm.
    pub pinion_radius: f64,
    /// PWM carrier frequency, Hz.
    pub pwm_freq: f64,
    /// Pulse width at 0°, µs.
    pub center_pulse_us: f64,
    /// Pulse width change for ±90°, µs.
    pub half_span_us: f64,
}

impl Default for ServoConfig {
    fn default() -> Self {
        ServoConfig {
            pinion_radius: 7.1,
            pwm_freq: 50.0,
            center_pulse_us: 1500.0,
            half_span_us: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PwmSetting {
    pub channel: u8,
    /// Off-tick within the 12-bit period; on-tick is always 0.
    pub counts: u16,
}

/// Servo angle in degrees for a rack displacement. Each unit's second servo
/// takes the negated angle.
pub fn signal_to_servo_angle(signal: f64, pinion_radius: f64) -> Result<f64, ProtocolError> {
    if !(pinion_radius > 0.0 && pinion_radius.is_finite()) {
        return Err(ProtocolError::BadRadius(pinion_radius));
    }
    let angle = (signal / pinion_radius).to_degrees();
    if !(angle.abs() <= MAX_SERVO_ANGLE) {
        return Err(ProtocolError::MechanicalRange(angle));
    }
    Ok(angle)
}

/// Angles for the two counteracting servos of one unit.
pub fn counteracting_angles(signal: f64, pinion_radius: f64) -> Result<(f64, f64), ProtocolError> {
    let a = signal_to_servo_angle(signal, pinion_radius)?;
    Ok((a, -a))
}

fn pulse_to_counts(pulse_us: f64, pwm_freq: f64) -> f64 {
    pulse_us * pwm_freq * PWM_RESOLUTION / 1e6
}

/// PWM off-count for a servo angle, using the default pulse endpoints.
pub fn angle_to_pwm(angle: f64, pwm_freq: f64) -> Result<PwmSetting, ProtocolError> {
    let cfg = ServoConfig {
        pwm_freq,
        ..ServoConfig::default()
    };
    angle_to_pwm_with(angle, &cfg)
}

pub fn angle_to_pwm_with(angle: f64, cfg: &ServoConfig) -> Result<PwmSetting, ProtocolError> {
    if !(angle.abs() <= MAX_SERVO_ANGLE) {
        return Err(ProtocolError::MechanicalRange(angle));
    }
    let pulse = cfg.center_pulse_us + angle / MAX_SERVO_ANGLE * cfg.half_span_us;
    // Small epsilon so exact tick boundaries are not lost to rounding.
    let counts = (pulse_to_counts(pulse, cfg.pwm_freq) + 1e-9).floor();
    if !(0.0..PWM_RESOLUTION).contains(&counts) {
        return Err(ProtocolError::PwmRange(counts as i64));
    }
    Ok(PwmSetting {
        channel: 0,
        counts: counts as u16,
    })
}

/// Displacement implied by a PWM count, the inverse of the forward chain.
pub fn pwm_to_signal(counts: u16, cfg: &ServoConfig) -> f64 {
    let pulse = counts as f64 * 1e6 / (cfg.pwm_freq * PWM_RESOLUTION);
    let angle = (pulse - cfg.center_pulse_us) / cfg.half_span_us * MAX_SERVO_ANGLE;
    angle.to_radians() * cfg.pinion_radius
}

/// Worst-case displacement error from PWM quantization plus wire rounding.
pub fn quantization_bound(cfg: &ServoConfig) -> f64 {
    let count_us = 1e6 / (cfg.pwm_freq * PWM_RESOLUTION);
    let per_count = (count_us / cfg.half_span_us * MAX_SERVO_ANGLE).to_radians() * cfg.pinion_radius;
    per_count + 0.005
}

/// Channel settings for all eight servos; unit `i` drives channels `2i` and
/// `2i + 1`.
pub fn frame_to_pwm(frame: &CommandFrame, cfg: &ServoConfig) -> Result<Vec<PwmSetting>, ProtocolError> {
    let Payload::Quad(signals) = frame.payload else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(8);
    for (i, &s) in signals.iter().enumerate() {
        let (a, b) = counteracting_angles(cmm_to_mm(s), cfg.pinion_radius)?;
        for (k, angle) in [a, b].into_iter().enumerate() {
            let mut p = angle_to_pwm_with(angle, cfg)?;
            p.channel = (2 * i + k) as u8;
            out.push(p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoint_counts() {
        assert_eq!(angle_to_pwm(0.0, 50.0).unwrap().counts, 307);
        assert_eq!(angle_to_pwm(90.0, 50.0).unwrap().counts, 512);
        assert_eq!(angle_to_pwm(-90.0, 50.0).unwrap().counts, 102);
        assert!(angle_to_pwm(90.5, 50.0).is_err());
        assert!(angle_to_pwm(f64::NAN, 50.0).is_err());
    }

    #[test]
    fn angle_of_comfort_limit() {
        let a = signal_to_servo_angle(8.6, 7.1).unwrap();
        assert!((a - 69.4012).abs() < 1e-3);
        assert_eq!(counteracting_angles(-2.0, 7.1).unwrap().1, signal_to_servo_angle(2.0, 7.1).unwrap());
        // 90° is π/2 · 7.1 ≈ 11.15 mm of rack travel.
        assert!(signal_to_servo_angle(11.2, 7.1).is_err());
        assert!(signal_to_servo_angle(1.0, 0.0).is_err());
    }

    #[test]
    fn channel_layout() {
        let frame = CommandFrame {
            seq: 0,
            payload: Payload::Quad([0, 500, -500, 1100]),
        };
        let pwm = frame_to_pwm(&frame, &ServoConfig::default()).unwrap();
        let channels: Vec<u8> = pwm.iter().map(|p| p.channel).collect();
        assert_eq!(channels, (0..8).collect::<Vec<u8>>());
        assert_eq!(pwm[0].counts, 307);
        assert_eq!(pwm[1].counts, 307);
        assert_eq!(pwm[2].counts, pwm[5].counts);
        assert_eq!(pwm[3].counts, pwm[4].counts);
        assert!(pwm[2].counts > 307 && pwm[3].counts < 307);
    }

    #[test]
    fn bound_is_under_six_hundredths() {
        let b = quantization_bound(&ServoConfig::default());
        assert!(b < 0.06, "{b}");
    }

    proptest! {
        #[test]
        fn inverse_within_quantization(cmm in -1100i16..=1100) {
            let cfg = ServoConfig::default();
            let frame = CommandFrame { seq: 0, payload: Payload::Quad([cmm; 4]) };
            let pwm = frame_to_pwm(&frame, &cfg).unwrap();
            let back = pwm_to_signal(pwm[0].counts, &cfg);
            prop_assert!((back - cmm_to_mm(cmm)).abs() <= quantization_bound(&cfg));
        }

        #[test]
        fn counts_monotone_in_angle(a in -90.0f64..90.0, d in 0.0f64..10.0) {
            let b = (a + d).min(90.0);
            prop_assert!(angle_to_pwm(a, 50.0).unwrap().counts <= angle_to_pwm(b, 50.0).unwrap().counts);
        }
    }
}
