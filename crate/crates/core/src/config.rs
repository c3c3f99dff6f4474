//! TOML parameter files. Every key is optional; missing keys keep their
//! defaults. Sections: `quad`, `squeezer`, `calibration`, `pid`, `servo`,
//! `scenario`, `observer`, `sim`. See `docs/config.md` for the schema.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::PidGains;
use crate::model::{
    default_quad_params, validate_params, QuadDeviceParams, SqueezerParams, TactorOverrides,
    TensionCurve,
};
use crate::protocol::ServoConfig;
use crate::psychophysics::{
    RunLimits, DISCRIMINATION_AMPLITUDE, REFERENCE_CHANNEL_SIGMA, REFERENCE_NOISE_SIGMA,
};
use crate::scenario::{FishingMagnitude, ScenarioConfig, ScenarioKind};
use crate::squeeze::SqueezeCalibration;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct QuadSection {
    max_travel: Option<f64>,
    comfort_limit: Option<f64>,
    max_speed: Option<f64>,
    max_force: Option<f64>,
    /// Fill value for every tactor before overrides.
    contraction_slope: Option<f64>,
    expansion_slope: Option<f64>,
    /// Apply the individually reported tactor ratios first.
    published_extremes: bool,
    skin_ratio_contraction: TactorOverrides,
    skin_ratio_expansion: TactorOverrides,
    /// Reserved; mirroring for the left arm is not implemented.
    left_arm: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SqueezerSection {
    tactor_count: Option<u32>,
    max_string_tension: Option<f64>,
    /// `[[contraction_mm, tension_n], ...]`
    tension_curve: Option<Vec<[f64; 2]>>,
    tactor_force_factor: Option<f64>,
    pid_rate: Option<f64>,
    encoder_bits: Option<u32>,
    pulley_radius: Option<f64>,
    max_contraction: Option<f64>,
    max_angular_velocity: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScenarioSection {
    aux_full_range: Option<f64>,
    neutral_position: Option<[f64; 3]>,
    rod_tip: Option<[f64; 3]>,
    fish_position: Option<[f64; 3]>,
    max_pull_length: Option<f64>,
    max_speed_scale: Option<f64>,
    racket_lever_length: Option<f64>,
    racket_axis: Option<[f64; 3]>,
    /// `"full-speed"` or `"vertical"`.
    fishing_magnitude: Option<String>,
}

/// Simulated-observer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverSettings {
    /// Perceptual noise for threshold runs, mm.
    pub noise_sigma: f64,
    /// Per-unit channel noise for identification runs, mm.
    pub channel_sigma: f64,
    /// Identification stimulus magnitude, mm.
    pub amplitude: f64,
    pub max_trials: usize,
    pub ceiling_fraction: f64,
    pub min_proportion_correct: f64,
}

impl Default for ObserverSettings {
    fn default() -> Self {
        let limits = RunLimits::default();
        ObserverSettings {
            noise_sigma: REFERENCE_NOISE_SIGMA,
            channel_sigma: REFERENCE_CHANNEL_SIGMA,
            amplitude: DISCRIMINATION_AMPLITUDE,
            max_trials: limits.max_trials,
            ceiling_fraction: limits.ceiling_fraction,
            min_proportion_correct: limits.min_proportion_correct,
        }
    }
}

impl ObserverSettings {
    pub fn limits(&self) -> RunLimits {
        RunLimits {
            max_trials: self.max_trials,
            ceiling_fraction: self.ceiling_fraction,
            min_proportion_correct: self.min_proportion_correct,
        }
    }
}

/// Simulation rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    /// QuadStretcher simulation rate, Hz.
    pub quad_rate: f64,
    /// Command frame rate on the wire, Hz.
    pub frame_rate: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            quad_rate: 1000.0,
            frame_rate: 100.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    quad: QuadSection,
    squeezer: SqueezerSection,
    calibration: Option<SqueezeCalibration>,
    pid: Option<PidGains>,
    servo: ServoConfig,
    scenario: ScenarioSection,
    observer: ObserverSettings,
    sim: SimSettings,
}

/// Fully resolved parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub quad: QuadDeviceParams,
    pub squeezer: SqueezerParams,
    pub calibration: SqueezeCalibration,
    pub pid: PidGains,
    pub servo: ServoConfig,
    pub observer: ObserverSettings,
    pub sim: SimSettings,
    scenario: ScenarioSectionResolved,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct ScenarioSectionResolved {
    aux_full_range: Option<f64>,
    neutral_position: Option<Vector3<f64>>,
    rod_tip: Option<Vector3<f64>>,
    fish_position: Option<Vector3<f64>>,
    max_pull_length: Option<f64>,
    max_speed_scale: Option<f64>,
    racket_lever_length: Option<f64>,
    racket_axis: Option<Vector3<f64>>,
    fishing_magnitude: Option<FishingMagnitude>,
}

impl Default for Config {
    fn default() -> Self {
        let squeezer = SqueezerParams::default();
        Config {
            quad: default_quad_params(),
            calibration: SqueezeCalibration::new(0.0, squeezer.max_contraction)
                .expect("default range is valid"),
            squeezer,
            pid: PidGains::REFERENCE,
            servo: ServoConfig::default(),
            observer: ObserverSettings::default(),
            sim: SimSettings::default(),
            scenario: ScenarioSectionResolved::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text)?;
        let mut cfg = Config::default();

        let q = &file.quad;
        if q.left_arm {
            return Err(invalid("quad.left_arm is reserved and not implemented"));
        }
        let quad = &mut cfg.quad;
        set(&mut quad.max_travel, q.max_travel);
        set(&mut quad.comfort_limit, q.comfort_limit);
        set(&mut quad.max_speed, q.max_speed);
        set(&mut quad.max_force, q.max_force);
        if let Some(v) = q.contraction_slope {
            quad.skin_ratio_contraction = crate::model::PerTactor::splat(v);
        }
        if let Some(v) = q.expansion_slope {
            quad.skin_ratio_expansion = crate::model::PerTactor::splat(v);
        }
        if q.published_extremes {
            *quad = quad.clone().with_published_extremes();
        }
        q.skin_ratio_contraction.apply(&mut quad.skin_ratio_contraction);
        q.skin_ratio_expansion.apply(&mut quad.skin_ratio_expansion);
        let report = validate_params(&cfg.quad);
        if !report.is_valid() {
            return Err(invalid(format!("quad: {report}")));
        }

        let s = &file.squeezer;
        let sq = &mut cfg.squeezer;
        set(&mut sq.tactor_count, s.tactor_count);
        set(&mut sq.max_string_tension, s.max_string_tension);
        set(&mut sq.tactor_force_factor, s.tactor_force_factor);
        set(&mut sq.pid_rate, s.pid_rate);
        set(&mut sq.encoder_bits, s.encoder_bits);
        set(&mut sq.pulley_radius, s.pulley_radius);
        set(&mut sq.max_contraction, s.max_contraction);
        set(&mut sq.max_angular_velocity, s.max_angular_velocity);
        if let Some(knots) = &s.tension_curve {
            sq.tension_curve = TensionCurve::new(knots.iter().map(|k| (k[0], k[1])).collect())
                .map_err(|e| invalid(format!("squeezer.tension_curve: {e}")))?;
        }
        let report = validate_params(&cfg.squeezer);
        if !report.is_valid() {
            return Err(invalid(format!("squeezer: {report}")));
        }

        cfg.calibration = match file.calibration {
            Some(c) => SqueezeCalibration::new(c.min_contraction, c.max_contraction)
                .map_err(|e| invalid(format!("calibration: {e}")))?,
            None => SqueezeCalibration::new(0.0, cfg.squeezer.max_contraction)
                .map_err(|e| invalid(format!("calibration: {e}")))?,
        };
        if cfg.calibration.max_contraction > cfg.squeezer.max_contraction {
            return Err(invalid(format!(
                "calibration.max_contraction {} exceeds squeezer.max_contraction {}",
                cfg.calibration.max_contraction, cfg.squeezer.max_contraction
            )));
        }

        if let Some(g) = file.pid {
            g.check().map_err(|e| invalid(format!("pid: {e}")))?;
            cfg.pid = g;
        }

        cfg.servo = file.servo;
        for (name, v) in [
            ("servo.pinion_radius", cfg.servo.pinion_radius),
            ("servo.pwm_freq", cfg.servo.pwm_freq),
            ("servo.center_pulse_us", cfg.servo.center_pulse_us),
            ("servo.half_span_us", cfg.servo.half_span_us),
        ] {
            positive(name, v)?;
        }

        cfg.observer = file.observer;
        positive("observer.noise_sigma", cfg.observer.noise_sigma)?;
        positive("observer.channel_sigma", cfg.observer.channel_sigma)?;
        positive("observer.amplitude", cfg.observer.amplitude)?;
        positive("observer.ceiling_fraction", cfg.observer.ceiling_fraction)?;
        if cfg.observer.max_trials == 0 {
            return Err(invalid("observer.max_trials must be > 0"));
        }
        if !(0.0..=1.0).contains(&cfg.observer.min_proportion_correct) {
            return Err(invalid("observer.min_proportion_correct must be in [0, 1]"));
        }

        cfg.sim = file.sim;
        positive("sim.quad_rate", cfg.sim.quad_rate)?;
        positive("sim.frame_rate", cfg.sim.frame_rate)?;

        let sc = file.scenario;
        let vec3 = |v: Option<[f64; 3]>| v.map(Vector3::from);
        cfg.scenario = ScenarioSectionResolved {
            aux_full_range: sc.aux_full_range,
            neutral_position: vec3(sc.neutral_position),
            rod_tip: vec3(sc.rod_tip),
            fish_position: vec3(sc.fish_position),
            max_pull_length: sc.max_pull_length,
            max_speed_scale: sc.max_speed_scale,
            racket_lever_length: sc.racket_lever_length,
            racket_axis: vec3(sc.racket_axis),
            fishing_magnitude: match sc.fishing_magnitude.as_deref() {
                None => None,
                Some("full-speed") => Some(FishingMagnitude::FullSpeed),
                Some("vertical") => Some(FishingMagnitude::Vertical),
                Some(other) => {
                    return Err(invalid(format!(
                        "scenario.fishing_magnitude `{other}` (expected full-speed or vertical)"
                    )))
                }
            },
        };
        for kind in ScenarioKind::ALL {
            cfg.scenario(kind)
                .check()
                .map_err(|e| invalid(format!("scenario: {e}")))?;
        }
        Ok(cfg)
    }

    /// Scenario defaults for `kind` with any configured overrides applied.
    pub fn scenario(&self, kind: ScenarioKind) -> ScenarioConfig {
        let mut c = ScenarioConfig::default_for(kind);
        let s = &self.scenario;
        set(&mut c.aux_full_range, s.aux_full_range);
        set(&mut c.neutral_position, s.neutral_position);
        set(&mut c.rod_tip, s.rod_tip);
        set(&mut c.fish_position, s.fish_position);
        set(&mut c.max_pull_length, s.max_pull_length);
        set(&mut c.max_speed_scale, s.max_speed_scale);
        set(&mut c.racket_lever_length, s.racket_lever_length);
        set(&mut c.racket_axis, s.racket_axis);
        set(&mut c.fishing_magnitude, s.fishing_magnitude);
        c
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be > 0, got {v}")))
    }
}

#[derive(Serialize)]
struct CalibrationFile {
    calibration: SqueezeCalibration,
}

/// Serializes a calibration as a `[calibration]` section that [`Config`]
/// reads back.
pub fn calibration_to_toml(cal: &SqueezeCalibration) -> String {
    toml::to_string(&CalibrationFile { calibration: *cal }).expect("plain numeric table")
}
