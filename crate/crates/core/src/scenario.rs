//! Interaction scenarios: hand trajectories in, 1-DoF values or normalized
//! 3-DoF force vectors out.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use thiserror::Error;

use crate::model::{ForceVector, ModelError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario {0} needs an aux value (button depth, knob angle or trigger bend)")]
    MissingAux(ScenarioKind),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("stream error at line {line}: time {current} does not follow {previous}")]
    NonMonotone {
        line: u64,
        previous: f64,
        current: f64,
    },
    #[error("supplied velocities disagree with positions (relative RMS error {0:.3})")]
    InconsistentVelocity(f64),
    #[error("invalid scenario config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    PushButton,
    RotateKnob,
    TriggerSprayer,
    RubberBand,
    FishingRod,
    TennisRacket,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::PushButton,
        ScenarioKind::RotateKnob,
        ScenarioKind::TriggerSprayer,
        ScenarioKind::RubberBand,
        ScenarioKind::FishingRod,
        ScenarioKind::TennisRacket,
    ];

    pub fn is_three_dof(self) -> bool {
        matches!(
            self,
            ScenarioKind::RubberBand | ScenarioKind::FishingRod | ScenarioKind::TennisRacket
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::PushButton => "push-button",
            ScenarioKind::RotateKnob => "rotate-knob",
            ScenarioKind::TriggerSprayer => "trigger-sprayer",
            ScenarioKind::RubberBand => "rubber-band",
            ScenarioKind::FishingRod => "fishing-rod",
            ScenarioKind::TennisRacket => "tennis-racket",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                let names: Vec<_> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown scenario `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Which speed drives the fishing-line force magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FishingMagnitude {
    /// Full hand speed.
    FullSpeed,
    /// Vertical hand speed only.
    Vertical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Aux value corresponding to a full 1-DoF response (fraction or rad).
    pub aux_full_range: f64,
    /// Rubber band rest position, m.
    pub neutral_position: Vector3<f64>,
    pub rod_tip: Vector3<f64>,
    pub fish_position: Vector3<f64>,
    /// Band extension giving full force, m.
    pub max_pull_length: f64,
    /// Hand speed giving full force, m/s.
    pub max_speed_scale: f64,
    /// Distance from the hand to the racket's momentum center, m.
    pub racket_lever_length: f64,
    /// Racket axis in the user frame (unit vector).
    pub racket_axis: Vector3<f64>,
    pub fishing_magnitude: FishingMagnitude,
}

impl ScenarioConfig {
    /// Defaults for a scenario. Geometry values are placeholders for a
    /// seated user, not measured data.
    pub fn default_for(kind: ScenarioKind) -> Self {
        let aux_full_range = match kind {
            ScenarioKind::RotateKnob => std::f64::consts::FRAC_PI_2,
            _ => 1.0,
        };
        ScenarioConfig {
            kind,
            aux_full_range,
            neutral_position: Vector3::new(0.4, 0.0, 0.0),
            rod_tip: Vector3::new(1.5, 0.0, 0.8),
            fish_position: Vector3::new(2.5, 0.0, -0.5),
            max_pull_length: 0.4,
            max_speed_scale: 2.0,
            racket_lever_length: 0.5,
            racket_axis: Vector3::new(1.0, 0.0, 0.0),
            fishing_magnitude: FishingMagnitude::FullSpeed,
        }
    }

    pub fn check(&self) -> Result<(), ScenarioError> {
        let positive = [
            ("aux_full_range", self.aux_full_range),
            ("max_pull_length", self.max_pull_length),
            ("max_speed_scale", self.max_speed_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScenarioError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// One tracked hand pose. Positions in m, velocity in m/s, user frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HandSample {
    pub t: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub aux: Option<f64>,
}

impl HandSample {
    pub fn at(t: f64, position: [f64; 3]) -> Self {
        HandSample {
            t,
            position: Vector3::from(position),
            velocity: Vector3::zeros(),
            aux: None,
        }
    }

    pub fn with_velocity(mut self, v: [f64; 3]) -> Self {
        self.velocity = Vector3::from(v);
        self
    }

    pub fn with_aux(mut self, aux: f64) -> Self {
        self.aux = Some(aux);
        self
    }
}

/// Output of a scenario for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interaction {
    OneDof(f64),
    ThreeDof(ForceVector),
}

fn to_force(v: Vector3<f64>) -> Result<ForceVector, ScenarioError> {
    Ok(ForceVector::new(v.x, v.y, v.z)?.normalize())
}

/// `unit(direction) * magnitude`, or zero for a degenerate direction.
fn directed(direction: Vector3<f64>, magnitude: f64) -> Result<ForceVector, ScenarioError> {
    let len = direction.norm();
    if len == 0.0 || magnitude == 0.0 {
        return Ok(ForceVector::ZERO);
    }
    to_force(direction * (magnitude / len))
}

/// Normalized button depth, knob angle or trigger bend, clamped to [0, 1].
pub fn value_1dof(sample: &HandSample, scenario: &ScenarioConfig) -> Result<f64, ScenarioError> {
    let aux = sample.aux.ok_or(ScenarioError::MissingAux(scenario.kind))?;
    if !aux.is_finite() {
        return Err(ScenarioError::Config(format!("aux value {aux} is not finite")));
    }
    Ok((aux / scenario.aux_full_range).clamp(0.0, 1.0))
}

/// Position-dependent restoring force toward the band's rest position.
pub fn rubber_band_force(
    sample: &HandSample,
    cfg: &ScenarioConfig,
) -> Result<ForceVector, ScenarioError> {
    let offset = cfg.neutral_position - sample.position;
    let magnitude = (offset.norm() / cfg.max_pull_length).min(1.0);
    directed(offset, magnitude)
}

/// Velocity-dependent line pull, always from the rod tip toward the fish.
pub fn fishing_force(
    sample: &HandSample,
    cfg: &ScenarioConfig,
) -> Result<ForceVector, ScenarioError> {
    let speed = match cfg.fishing_magnitude {
        FishingMagnitude::FullSpeed => sample.velocity.norm(),
        FishingMagnitude::Vertical => sample.velocity.z.abs(),
    };
    let magnitude = (speed / cfg.max_speed_scale).min(1.0);
    directed(cfg.fish_position - cfg.rod_tip, magnitude)
}

/// Racket momentum center: a rigid offset from the hand along the racket axis.
pub fn momentum_center(sample: &HandSample, cfg: &ScenarioConfig) -> Vector3<f64> {
    sample.position + cfg.racket_axis.normalize() * cfg.racket_lever_length
}

/// Drag-like force opposing the momentum center's velocity. With a rigid
/// offset and no orientation data the center moves with the hand.
pub fn tennis_force(
    sample: &HandSample,
    cfg: &ScenarioConfig,
) -> Result<ForceVector, ScenarioError> {
    let v = sample.velocity;
    let magnitude = (v.norm() / cfg.max_speed_scale).min(1.0);
    directed(-v, magnitude)
}

/// Evaluates the configured scenario for one sample.
pub fn interaction(sample: &HandSample, cfg: &ScenarioConfig) -> Result<Interaction, ScenarioError> {
    match cfg.kind {
        ScenarioKind::PushButton | ScenarioKind::RotateKnob | ScenarioKind::TriggerSprayer => {
            value_1dof(sample, cfg).map(Interaction::OneDof)
        }
        ScenarioKind::RubberBand => rubber_band_force(sample, cfg).map(Interaction::ThreeDof),
        ScenarioKind::FishingRod => fishing_force(sample, cfg).map(Interaction::ThreeDof),
        ScenarioKind::TennisRacket => tennis_force(sample, cfg).map(Interaction::ThreeDof),
    }
}

/// Central-difference velocities (one-sided at the ends).
pub fn finite_difference_velocities(samples: &[HandSample]) -> Vec<Vector3<f64>> {
    let n = samples.len();
    (0..n)
        .map(|i| {
            if n < 2 {
                return Vector3::zeros();
            }
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (samples[b].position - samples[a].position) / (samples[b].t - samples[a].t)
        })
        .collect()
}

/// Centered 3-sample moving average of the velocities.
pub fn smooth_velocities(samples: &[HandSample]) -> Vec<HandSample> {
    let n = samples.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            let sum: Vector3<f64> = samples[lo..=hi].iter().map(|s| s.velocity).sum();
            HandSample {
                velocity: sum / (hi - lo + 1) as f64,
                ..samples[i].clone()
            }
        })
        .collect()
}

/// Relative tolerance for supplied velocities against position differences.
pub const VELOCITY_TOLERANCE: f64 = 0.10;

/// Relative RMS disagreement between supplied and finite-difference velocities.
pub fn velocity_inconsistency(samples: &[HandSample]) -> f64 {
    let fd = finite_difference_velocities(samples);
    let err: f64 = samples
        .iter()
        .zip(&fd)
        .map(|(s, f)| (s.velocity - f).norm_squared())
        .sum();
    let scale: f64 = samples.iter().map(|s| s.velocity.norm_squared()).sum();
    if scale == 0.0 {
        return if err == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (err / scale).sqrt()
}

/// Reads a trajectory from a CSV file; see [`parse_trajectory`].
pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Vec<HandSample>, ScenarioError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_trajectory(file)
}

/// Parses `t,px,py,pz[,vx,vy,vz][,aux]` CSV. Velocity columns are optional
/// as a group; when absent they are derived by central differences, when
/// present they must agree with the positions to within 10% RMS.
pub fn parse_trajectory<R: Read>(input: R) -> Result<Vec<HandSample>, ScenarioError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| ScenarioError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut required = [0usize; 4];
    for (slot, name) in required.iter_mut().zip(["t", "px", "py", "pz"]) {
        *slot = col(name).ok_or_else(|| ScenarioError::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })?;
    }
    let vel = [col("vx"), col("vy"), col("vz")];
    let vel = match vel {
        [Some(x), Some(y), Some(z)] => Some([x, y, z]),
        [None, None, None] => None,
        _ => {
            return Err(ScenarioError::Parse {
                line: 1,
                message: "velocity columns vx, vy, vz must appear together".into(),
            })
        }
    };
    let aux_col = col("aux");

    let mut samples: Vec<HandSample> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ScenarioError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |idx: usize, name: &str| -> Result<f64, ScenarioError> {
            let raw = record.get(idx).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| ScenarioError::Parse {
                line,
                message: format!("column `{name}`: cannot parse `{raw}` as a number"),
            })?;
            if !v.is_finite() {
                return Err(ScenarioError::Parse {
                    line,
                    message: format!("column `{name}` is not finite"),
                });
            }
            Ok(v)
        };
        let t = field(required[0], "t")?;
        let position = Vector3::new(
            field(required[1], "px")?,
            field(required[2], "py")?,
            field(required[3], "pz")?,
        );
        let velocity = match vel {
            Some([x, y, z]) => Vector3::new(field(x, "vx")?, field(y, "vy")?, field(z, "vz")?),
            None => Vector3::zeros(),
        };
        let aux = match aux_col {
            Some(i) if !record.get(i).unwrap_or("").is_empty() => Some(field(i, "aux")?),
            _ => None,
        };
        if let Some(prev) = samples.last() {
            if !(t > prev.t) {
                return Err(ScenarioError::NonMonotone {
                    line,
                    previous: prev.t,
                    current: t,
                });
            }
        }
        samples.push(HandSample {
            t,
            position,
            velocity,
            aux,
        });
    }

    if vel.is_none() {
        let fd = finite_difference_velocities(&samples);
        for (s, v) in samples.iter_mut().zip(fd) {
            s.velocity = v;
        }
    } else if samples.len() >= 3 {
        let rel = velocity_inconsistency(&samples);
        if rel > VELOCITY_TOLERANCE {
            return Err(ScenarioError::InconsistentVelocity(rel));
        }
    }
    Ok(samples)
}
