//! Fixed-timestep virtual hardware.
//!
//! The QuadStretcher servos are reduced to slew-rate-limited position
//! tracking, with skin displacement a sign-dependent linear function of the
//! tactor position. The Squeezer is a velocity-commanded pulley closed by a
//! position PID on the quantized encoder reading.

use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    PerTactor, QuadDeviceParams, Side, StretchFrame, StretchType, SqueezerParams, TactorId,
};
use crate::squeeze::{tension_from_contraction, SqueezeCommand};

/// Tolerance when comparing a step size against the fixed control period.
const DT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("stream error: timestamp {current} follows {previous}")]
    NonMonotone { previous: f64, current: f64 },
    #[error("invalid rate {0} Hz")]
    BadRate(f64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Skin displacement under a tactor for a given control signal (mm).
pub fn skin_displacement(signal: f64, tactor: TactorId, params: &QuadDeviceParams) -> f64 {
    match StretchType::of_signal(signal) {
        Some(kind) => params.skin_slope(tactor, kind) * signal,
        None => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadDeviceState {
    /// Tactor position per stretch unit, in control-signal space.
    pub positions: [f64; 4],
    pub skin: PerTactor<f64>,
    pub sim_time: f64,
}

impl QuadDeviceState {
    pub fn at_rest() -> Self {
        QuadDeviceState {
            positions: [0.0; 4],
            skin: PerTactor::splat(0.0),
            sim_time: 0.0,
        }
    }

    pub fn position(&self, side: Side) -> f64 {
        self.positions[side.index()]
    }
}

impl Default for QuadDeviceState {
    fn default() -> Self {
        QuadDeviceState::at_rest()
    }
}

/// Advances the servos by `dt`, moving each tactor toward its target by at
/// most `max_speed * dt`.
pub fn quad_step(
    state: &QuadDeviceState,
    target: &StretchFrame,
    dt: f64,
    params: &QuadDeviceParams,
) -> Result<QuadDeviceState, DeviceError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DeviceError::Contract(format!("dt must be positive, got {dt}")));
    }
    for (side, signal) in target.iter() {
        if !(signal.abs() <= params.max_travel) {
            return Err(DeviceError::Contract(format!(
                "target {signal} mm on {side} exceeds travel ±{} mm",
                params.max_travel
            )));
        }
    }
    let max_move = params.max_speed * dt;
    let mut positions = state.positions;
    for (pos, goal) in positions.iter_mut().zip(target.signals) {
        let gap = goal - *pos;
        if gap.abs() <= max_move {
            *pos = goal;
        } else {
            *pos += max_move.copysign(gap);
        }
    }
    let mut skin = PerTactor::splat(0.0);
    for t in TactorId::ALL {
        skin[t] = skin_displacement(positions[t.side.index()], t, params);
    }
    Ok(QuadDeviceState {
        positions,
        skin,
        sim_time: state.sim_time + dt,
    })
}

/// Drives every unit through `steps` equal increments from 0 to
/// `±max_travel`, letting the servos settle at each level, and returns the
/// `(signal, skin displacement)` pairs observed under `tactor`.
pub fn skin_sweep(
    params: &QuadDeviceParams,
    tactor: TactorId,
    kind: StretchType,
    steps: usize,
) -> Result<Vec<(f64, f64)>, DeviceError> {
    let dt = 1e-3;
    let mut state = QuadDeviceState::at_rest();
    let mut out = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let signal = kind.sign() * params.max_travel * i as f64 / steps as f64;
        let target = StretchFrame::uniform(signal, 0.0);
        while state.position(tactor.side) != signal {
            state = quad_step(&state, &target, dt, params)?;
        }
        out.push((signal, state.skin[tactor]));
    }
    Ok(out)
}

/// Ordinary least-squares line `y = slope * x + intercept`.
pub fn fit_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Squeezer position-loop gains. Error is in mm of contraction, output is
/// pulley angular velocity in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    /// Reference gains for the default pulley. Tuned by stepping 0.5 to
    /// 20 mm setpoints from rest at 1 kHz and requiring settling to 2% within
    /// 300 ms with under 20% overshoot; see the device tests.
    pub const REFERENCE: PidGains = PidGains {
        kp: 30.0,
        ki: 5.0,
        kd: 0.05,
    };

    pub fn check(&self) -> Result<(), DeviceError> {
        if !(self.kp > 0.0) || ![self.kp, self.ki, self.kd].iter().all(|g| g.is_finite()) {
            return Err(DeviceError::Contract(format!("invalid PID gains {self:?}")));
        }
        Ok(())
    }
}

impl Default for PidGains {
    fn default() -> Self {
        PidGains::REFERENCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqueezerState {
    /// Pulley angle from the calibration reference, rad.
    pub pulley_angle: f64,
    /// Raw single-turn encoder reading.
    pub encoder_reading: u32,
    /// Multi-turn count unwrapped from successive readings.
    pub encoder_unwrapped: i64,
    pub string_contraction: f64,
    pub sensed_tension: f64,
    pub pid_integrator: f64,
    pub pid_prev_error: f64,
    pub sim_time: f64,
}

impl SqueezerState {
    pub fn at_rest() -> Self {
        SqueezerState {
            pulley_angle: 0.0,
            encoder_reading: 0,
            encoder_unwrapped: 0,
            string_contraction: 0.0,
            sensed_tension: 0.0,
            pid_integrator: 0.0,
            pid_prev_error: 0.0,
            sim_time: 0.0,
        }
    }

    /// Contraction as the controller sees it through the encoder.
    pub fn measured_contraction(&self, params: &SqueezerParams) -> f64 {
        self.encoder_unwrapped as f64 * params.contraction_per_count()
    }
}

impl Default for SqueezerState {
    fn default() -> Self {
        SqueezerState::at_rest()
    }
}

/// Single-turn encoder reading for a pulley angle.
pub fn encoder_reading(angle: f64, bits: u32) -> u32 {
    let counts = 1u32 << bits;
    let frac = angle.rem_euclid(TAU) / TAU;
    ((frac * counts as f64).floor() as u32).min(counts - 1)
}

/// One control period of the Squeezer loop. `dt` must equal `1 / pid_rate`.
pub fn squeezer_step(
    state: &SqueezerState,
    setpoint: &SqueezeCommand,
    gains: &PidGains,
    dt: f64,
    params: &SqueezerParams,
) -> Result<SqueezerState, DeviceError> {
    let period = params.control_period();
    if !((dt - period).abs() <= DT_TOLERANCE) {
        return Err(DeviceError::Contract(format!(
            "squeezer must step at exactly {period} s, got {dt}"
        )));
    }
    gains.check()?;
    let target = setpoint.contraction;
    if !(target >= 0.0 && target <= params.max_contraction) {
        return Err(DeviceError::Contract(format!(
            "setpoint {target} mm outside [0, {}]",
            params.max_contraction
        )));
    }

    let error = target - state.measured_contraction(params);
    let derivative = (error - state.pid_prev_error) / dt;
    let candidate = state.pid_integrator + error * dt;
    let unsaturated = gains.kp * error + gains.ki * candidate + gains.kd * derivative;
    let limit = params.max_angular_velocity;
    let command = unsaturated.clamp(-limit, limit);
    // Conditional integration: hold the integrator while saturated in the
    // direction of the error.
    let integrator = if command != unsaturated && command.signum() == error.signum() {
        state.pid_integrator
    } else {
        candidate
    };

    let max_angle = params.max_contraction / params.pulley_radius;
    let pulley_angle = (state.pulley_angle + command * dt).clamp(0.0, max_angle);
    let reading = encoder_reading(pulley_angle, params.encoder_bits);
    let counts = params.encoder_counts() as i64;
    let mut delta = reading as i64 - state.encoder_reading as i64;
    if delta > counts / 2 {
        delta -= counts;
    } else if delta < -counts / 2 {
        delta += counts;
    }
    let string_contraction = pulley_angle * params.pulley_radius;
    let sensed_tension = tension_from_contraction(string_contraction.min(params.max_contraction), params)
        .map_err(|e| DeviceError::Contract(e.to_string()))?;

    Ok(SqueezerState {
        pulley_angle,
        encoder_reading: reading,
        encoder_unwrapped: state.encoder_unwrapped + delta,
        string_contraction,
        sensed_tension,
        pid_integrator: integrator,
        pid_prev_error: error,
        sim_time: state.sim_time + dt,
    })
}

/// A command that carries its own timestamp.
pub trait Timestamped {
    fn timestamp(&self) -> f64;
}

impl Timestamped for StretchFrame {
    fn timestamp(&self) -> f64 {
        self.timestamp
    }
}

impl Timestamped for SqueezeCommand {
    fn timestamp(&self) -> f64 {
        self.timestamp
    }
}

/// A device that can be advanced by the realtime driver.
pub trait SimDevice {
    type Command: Timestamped;
    type Row;

    fn set_time(&mut self, t: f64);
    fn step(&mut self, command: &Self::Command, dt: f64) -> Result<Self::Row, DeviceError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRow {
    pub time: f64,
    pub target: [f64; 4],
    pub position: [f64; 4],
    pub skin: PerTactor<f64>,
}

#[derive(Debug, Clone)]
pub struct QuadSim {
    pub state: QuadDeviceState,
    pub params: QuadDeviceParams,
}

impl QuadSim {
    pub fn new(params: QuadDeviceParams) -> Self {
        QuadSim {
            state: QuadDeviceState::at_rest(),
            params,
        }
    }
}

impl SimDevice for QuadSim {
    type Command = StretchFrame;
    type Row = QuadRow;

    fn set_time(&mut self, t: f64) {
        self.state.sim_time = t;
    }

    fn step(&mut self, command: &StretchFrame, dt: f64) -> Result<QuadRow, DeviceError> {
        self.state = quad_step(&self.state, command, dt, &self.params)?;
        Ok(QuadRow {
            time: self.state.sim_time,
            target: command.signals,
            position: self.state.positions,
            skin: self.state.skin,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqueezerRow {
    pub time: f64,
    pub setpoint: f64,
    pub contraction: f64,
    pub encoder_counts: u32,
    pub tension: f64,
}

#[derive(Debug, Clone)]
pub struct SqueezerSim {
    pub state: SqueezerState,
    pub params: SqueezerParams,
    pub gains: PidGains,
}

impl SqueezerSim {
    pub fn new(params: SqueezerParams, gains: PidGains) -> Self {
        SqueezerSim {
            state: SqueezerState::at_rest(),
            params,
            gains,
        }
    }
}

impl SimDevice for SqueezerSim {
    type Command = SqueezeCommand;
    type Row = SqueezerRow;

    fn set_time(&mut self, t: f64) {
        self.state.sim_time = t;
    }

    fn step(&mut self, command: &SqueezeCommand, dt: f64) -> Result<SqueezerRow, DeviceError> {
        self.state = squeezer_step(&self.state, command, &self.gains, dt, &self.params)?;
        Ok(SqueezerRow {
            time: self.state.sim_time,
            setpoint: command.contraction,
            contraction: self.state.string_contraction,
            encoder_counts: self.state.encoder_reading,
            tension: self.state.sensed_tension,
        })
    }
}

/// Steps `device` at `rate` Hz from the first command's timestamp through the
/// last one, holding the most recent command between updates. Produces one
/// row per step; identical inputs give identical traces.
pub fn run_realtime<D: SimDevice>(
    commands: &[D::Command],
    device: &mut D,
    rate: f64,
) -> Result<Vec<D::Row>, DeviceError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(DeviceError::BadRate(rate));
    }
    for w in commands.windows(2) {
        let (previous, current) = (w[0].timestamp(), w[1].timestamp());
        if !(current >= previous) {
            return Err(DeviceError::NonMonotone { previous, current });
        }
    }
    let (Some(first), Some(last)) = (commands.first(), commands.last()) else {
        return Ok(Vec::new());
    };
    let t0 = first.timestamp();
    let dt = 1.0 / rate;
    let n_steps = ((last.timestamp() - t0) * rate + 1e-9).floor() as usize + 1;
    device.set_time(t0);
    let mut rows = Vec::with_capacity(n_steps);
    let mut active = 0;
    for k in 0..n_steps {
        let t = t0 + k as f64 * dt;
        while active + 1 < commands.len() && commands[active + 1].timestamp() <= t + 1e-12 {
            active += 1;
        }
        rows.push(device.step(&commands[active], dt)?);
    }
    Ok(rows)
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

/// Column names of the QuadStretcher trace CSV.
pub fn quad_trace_header() -> Vec<String> {
    let mut cols = vec!["time".to_string()];
    cols.extend(Side::ALL.iter().map(|s| format!("target_{}", s.letter())));
    cols.extend(Side::ALL.iter().map(|s| format!("position_{}", s.letter())));
    cols.extend(TactorId::ALL.iter().map(|t| format!("skin_{t}")));
    cols
}

pub const SQUEEZER_TRACE_HEADER: [&str; 5] =
    ["time", "setpoint", "contraction", "encoder_counts", "tension"];

/// Writes a QuadStretcher trace as CSV with six decimal places.
pub fn write_quad_trace<W: Write>(out: W, rows: &[QuadRow]) -> Result<(), DeviceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(quad_trace_header())?;
    for r in rows {
        let mut rec = vec![fmt6(r.time)];
        rec.extend(r.target.iter().map(|&v| fmt6(v)));
        rec.extend(r.position.iter().map(|&v| fmt6(v)));
        rec.extend(r.skin.0.iter().map(|&v| fmt6(v)));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a Squeezer trace as CSV with six decimal places.
pub fn write_squeezer_trace<W: Write>(out: W, rows: &[SqueezerRow]) -> Result<(), DeviceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SQUEEZER_TRACE_HEADER)?;
    for r in rows {
        w.write_record([
            fmt6(r.time),
            fmt6(r.setpoint),
            fmt6(r.contraction),
            r.encoder_counts.to_string(),
            fmt6(r.tension),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Settling metrics of a step response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResponse {
    /// Time after which the output stays within the band, s.
    pub settling_time: f64,
    /// Peak excursion past the setpoint as a fraction of the step.
    pub overshoot: f64,
}

/// Steps the Squeezer from rest toward `setpoint` for `horizon` seconds and
/// measures 2%-band settling and overshoot.
pub fn squeezer_step_response(
    setpoint: f64,
    gains: &PidGains,
    params: &SqueezerParams,
    horizon: f64,
) -> Result<StepResponse, DeviceError> {
    let dt = params.control_period();
    let cmd = SqueezeCommand {
        contraction: setpoint,
        timestamp: 0.0,
    };
    let band = 0.02 * setpoint.abs();
    let mut state = SqueezerState::at_rest();
    let mut last_outside = 0.0;
    let mut peak: f64 = 0.0;
    let steps = (horizon / dt).round() as usize;
    for _ in 0..steps {
        state = squeezer_step(&state, &cmd, gains, dt, params)?;
        let c = state.string_contraction;
        peak = peak.max(c);
        if (c - setpoint).abs() > band {
            last_outside = state.sim_time;
        }
    }
    Ok(StepResponse {
        settling_time: last_outside,
        overshoot: ((peak - setpoint) / setpoint).max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_quad_params, TactorEnd};
    use proptest::prelude::*;

    #[test]
    fn slew_limited_first_step() {
        let p = default_quad_params();
        let s = quad_step(
            &QuadDeviceState::at_rest(),
            &StretchFrame::uniform(-8.6, 0.0),
            0.01,
            &p,
        )
        .unwrap();
        for pos in s.positions {
            assert!((pos + 2.06).abs() < 1e-12);
        }
        assert!((s.sim_time - 0.01).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_only_advances_time() {
        let p = default_quad_params();
        let mut s = QuadDeviceState::at_rest();
        let target = StretchFrame::uniform(-8.6, 0.0);
        for _ in 0..10 {
            s = quad_step(&s, &target, 0.01, &p).unwrap();
        }
        let next = quad_step(&s, &target, 0.01, &p).unwrap();
        assert_eq!(next.positions, s.positions);
        assert_eq!(next.skin, s.skin);
        assert!(next.sim_time > s.sim_time);
    }

    #[test]
    fn settled_skin_displacement_uses_contraction_slope() {
        let p = default_quad_params();
        let mut s = QuadDeviceState::at_rest();
        let target = StretchFrame::uniform(-8.6, 0.0);
        for _ in 0..10 {
            s = quad_step(&s, &target, 0.01, &p).unwrap();
        }
        for (_, d) in s.skin.iter() {
            assert!((d + 7.224).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_targets_beyond_travel_and_bad_dt() {
        let p = default_quad_params();
        let s = QuadDeviceState::at_rest();
        let far = StretchFrame::new([0.0, 11.5, 0.0, 0.0], 0.0);
        assert!(matches!(quad_step(&s, &far, 0.01, &p), Err(DeviceError::Contract(_))));
        let ok = StretchFrame::neutral(0.0);
        assert!(quad_step(&s, &ok, 0.0, &p).is_err());
        assert!(quad_step(&s, &ok, -1.0, &p).is_err());
    }

    #[test]
    fn skin_displacement_examples() {
        let p = default_quad_params().with_published_extremes();
        let dd = TactorId::new(Side::Dorsal, TactorEnd::Distal);
        assert!((skin_displacement(-10.0, dd, &p) + 9.5).abs() < 1e-12);
        assert!((skin_displacement(10.0, dd, &p) - 5.5).abs() < 1e-12);
        assert_eq!(skin_displacement(0.0, dd, &p), 0.0);
    }

    #[test]
    fn encoder_resolution() {
        let p = SqueezerParams::default();
        let expected = 2.0 * std::f64::consts::PI / 4096.0 * 5.0;
        assert!((p.contraction_per_count() - expected).abs() < 1e-15);
        assert_eq!(encoder_reading(0.0, 12), 0);
        assert_eq!(encoder_reading(TAU - 1e-12, 12), 4095);
        assert_eq!(encoder_reading(TAU + 1e-9, 12), 0);
        assert_eq!(encoder_reading(std::f64::consts::PI, 12), 2048);
    }

    #[test]
    fn encoder_unwraps_across_revolutions() {
        let params = SqueezerParams {
            pulley_radius: 1.0,
            max_angular_velocity: 200.0,
            ..SqueezerParams::default()
        };
        // 15 mm on a 1 mm pulley is more than two turns.
        let cmd = SqueezeCommand {
            contraction: 15.0,
            timestamp: 0.0,
        };
        let mut s = SqueezerState::at_rest();
        for _ in 0..2000 {
            s = squeezer_step(&s, &cmd, &PidGains::REFERENCE, 1e-3, &params).unwrap();
        }
        assert!(s.pulley_angle > 2.0 * TAU);
        assert!((s.measured_contraction(&params) - 15.0).abs() < 0.3);
        assert!((s.string_contraction - 15.0).abs() < 0.3);
    }

    #[test]
    fn squeezer_settles_five_mm_step() {
        let p = SqueezerParams::default();
        let r = squeezer_step_response(5.0, &PidGains::REFERENCE, &p, 1.0).unwrap();
        assert!(r.settling_time <= 0.3, "{r:?}");
        assert!(r.overshoot < 0.2, "{r:?}");
    }

    #[test]
    fn reference_gains_stable_across_range() {
        let p = SqueezerParams::default();
        for i in 1..=40 {
            let sp = 0.5 * i as f64;
            let r = squeezer_step_response(sp, &PidGains::REFERENCE, &p, 1.0).unwrap();
            assert!(r.overshoot < 0.2, "setpoint {sp}: {r:?}");
            assert!(r.settling_time <= 0.3, "setpoint {sp}: {r:?}");
        }
    }

    #[test]
    fn squeezer_at_setpoint_does_not_move() {
        let p = SqueezerParams::default();
        let s = SqueezerState::at_rest();
        let cmd = SqueezeCommand {
            contraction: 0.0,
            timestamp: 0.0,
        };
        let next = squeezer_step(&s, &cmd, &PidGains::REFERENCE, 1e-3, &p).unwrap();
        assert_eq!(next.pulley_angle, 0.0);
        assert_eq!(next.string_contraction, 0.0);
        assert_eq!(next.pid_integrator, 0.0);
    }

    #[test]
    fn squeezer_rejects_off_rate_steps_and_bad_setpoints() {
        let p = SqueezerParams::default();
        let s = SqueezerState::at_rest();
        let cmd = SqueezeCommand {
            contraction: 1.0,
            timestamp: 0.0,
        };
        assert!(squeezer_step(&s, &cmd, &PidGains::REFERENCE, 2e-3, &p).is_err());
        let bad = SqueezeCommand {
            contraction: 25.0,
            timestamp: 0.0,
        };
        assert!(squeezer_step(&s, &bad, &PidGains::REFERENCE, 1e-3, &p).is_err());
        let zero_kp = PidGains { kp: 0.0, ..PidGains::REFERENCE };
        assert!(squeezer_step(&s, &cmd, &zero_kp, 1e-3, &p).is_err());
    }

    #[test]
    fn realtime_empty_and_non_monotone() {
        let mut sim = QuadSim::new(default_quad_params());
        assert!(run_realtime(&[], &mut sim, 100.0).unwrap().is_empty());
        let frames = [StretchFrame::neutral(0.5), StretchFrame::neutral(0.2)];
        assert!(matches!(
            run_realtime(&frames, &mut sim, 100.0),
            Err(DeviceError::NonMonotone { .. })
        ));
        assert!(run_realtime(&frames[..1], &mut sim, 0.0).is_err());
    }

    #[test]
    fn realtime_converges_and_is_deterministic() {
        let frames: Vec<StretchFrame> = (0..=100)
            .map(|i| StretchFrame::new([-8.6, 4.0, 0.0, 8.6], i as f64 * 0.01))
            .collect();
        let run = || {
            let mut sim = QuadSim::new(default_quad_params());
            run_realtime(&frames, &mut sim, 1000.0).unwrap()
        };
        let a = run();
        assert_eq!(a.len(), 1001);
        let last = a.last().unwrap();
        assert_eq!(last.position, [-8.6, 4.0, 0.0, 8.6]);
        let settled = a.iter().position(|r| r.position == last.position).unwrap();
        assert!(a[settled..].iter().all(|r| r.position == last.position));
        let b = run();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        write_quad_trace(&mut ba, &a).unwrap();
        write_quad_trace(&mut bb, &b).unwrap();
        assert_eq!(ba, bb);
    }

    #[test]
    fn realtime_squeezer_trace() {
        let cmds: Vec<SqueezeCommand> = (0..=5)
            .map(|i| SqueezeCommand {
                contraction: 5.0,
                timestamp: i as f64 * 0.1,
            })
            .collect();
        let mut sim = SqueezerSim::new(SqueezerParams::default(), PidGains::REFERENCE);
        let rows = run_realtime(&cmds, &mut sim, 1000.0).unwrap();
        assert_eq!(rows.len(), 501);
        assert!((rows.last().unwrap().contraction - 5.0).abs() < 0.1);
        let mut buf = Vec::new();
        write_squeezer_trace(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,setpoint,contraction,encoder_counts,tension\n"));
        assert_eq!(text.lines().count(), 502);
    }

    #[test]
    fn quad_trace_columns() {
        let header = quad_trace_header().join(",");
        assert_eq!(
            header,
            "time,target_D,target_R,target_V,target_L,position_D,position_R,position_V,position_L,\
             skin_Dd,skin_Dp,skin_Rd,skin_Rp,skin_Vd,skin_Vp,skin_Ld,skin_Lp"
        );
    }

    #[test]
    fn sweep_regression_recovers_slopes() {
        let p = default_quad_params().with_published_extremes();
        for t in TactorId::ALL {
            for kind in StretchType::ALL {
                let pts = skin_sweep(&p, t, kind, 10).unwrap();
                assert_eq!(pts.len(), 11);
                let (slope, intercept) = fit_line(&pts);
                assert!((slope - p.skin_slope(t, kind)).abs() < 1e-9);
                assert!(intercept.abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn contraction_displaces_more_than_expansion(s in 0.01..11.0f64, idx in 0usize..8) {
            let p = default_quad_params().with_published_extremes();
            let t = TactorId::ALL[idx];
            prop_assert!(skin_displacement(-s, t, &p).abs() > skin_displacement(s, t, &p).abs());
        }

        #[test]
        fn slew_never_exceeded(
            targets in proptest::collection::vec(proptest::array::uniform4(-11.0..=11.0f64), 1..40),
            dt in 1e-4..0.05f64,
        ) {
            let p = default_quad_params();
            let mut s = QuadDeviceState::at_rest();
            for t in targets {
                let next = quad_step(&s, &StretchFrame::new(t, 0.0), dt, &p).unwrap();
                for i in 0..4 {
                    prop_assert!((next.positions[i] - s.positions[i]).abs() <= p.max_speed * dt + 1e-12);
                    prop_assert!(next.positions[i].abs() <= p.max_travel);
                }
                s = next;
            }
        }
    }
}
