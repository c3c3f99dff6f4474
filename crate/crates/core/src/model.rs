//! Shared domain types and device parameter sets.
//!
//! Units are fixed across the crate: displacements in millimeters, forces in
//! newtons, time in seconds. The user frame is +x away from the chest, +y to
//! the user's right and +z up, with the device worn on the right forearm.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Standard gravity, used to convert kilogram-force ratings to newtons.
pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("force component {axis} is not finite ({value})")]
    NonFiniteForce { axis: char, value: f64 },
    #[error("unknown side `{0}` (expected one of D, R, V, L)")]
    UnknownSide(String),
    #[error("unknown tactor `{0}` (expected side letter followed by d or p, e.g. `Dd`)")]
    UnknownTactor(String),
    #[error("tension curve needs at least two knots")]
    TooFewKnots,
}

/// Side of the forearm carrying a stretch unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Dorsal,
    Right,
    Ventral,
    Left,
}

impl Side {
    /// Canonical D, R, V, L ordering used by every serialized form.
    pub const ALL: [Side; 4] = [Side::Dorsal, Side::Right, Side::Ventral, Side::Left];

    pub fn index(self) -> usize {
        match self {
            Side::Dorsal => 0,
            Side::Right => 1,
            Side::Ventral => 2,
            Side::Left => 3,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Side::Dorsal => 'D',
            Side::Right => 'R',
            Side::Ventral => 'V',
            Side::Left => 'L',
        }
    }

    pub fn from_letter(c: char) -> Option<Side> {
        match c.to_ascii_uppercase() {
            'D' => Some(Side::Dorsal),
            'R' => Some(Side::Right),
            'V' => Some(Side::Ventral),
            'L' => Some(Side::Left),
            _ => None,
        }
    }

    /// The unit on the other side of the forearm.
    pub fn opposite(self) -> Side {
        match self {
            Side::Dorsal => Side::Ventral,
            Side::Right => Side::Left,
            Side::Ventral => Side::Dorsal,
            Side::Left => Side::Right,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Side::Dorsal => "dorsal",
            Side::Right => "right",
            Side::Ventral => "ventral",
            Side::Left => "left",
        };
        f.write_str(name)
    }
}

impl FromStr for Side {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "d" | "dorsal" => Ok(Side::Dorsal),
            "r" | "right" => Ok(Side::Right),
            "v" | "ventral" => Ok(Side::Ventral),
            "l" | "left" => Ok(Side::Left),
            _ => Err(ModelError::UnknownSide(s.to_string())),
        }
    }
}

/// Which of the two counteracting tactors of a stretch unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TactorEnd {
    Distal,
    Proximal,
}

/// One of the eight tactors, named like `Dd` (dorsal, distal) or `Vp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TactorId {
    pub side: Side,
    pub end: TactorEnd,
}

impl TactorId {
    pub const ALL: [TactorId; 8] = [
        TactorId::new(Side::Dorsal, TactorEnd::Distal),
        TactorId::new(Side::Dorsal, TactorEnd::Proximal),
        TactorId::new(Side::Right, TactorEnd::Distal),
        TactorId::new(Side::Right, TactorEnd::Proximal),
        TactorId::new(Side::Ventral, TactorEnd::Distal),
        TactorId::new(Side::Ventral, TactorEnd::Proximal),
        TactorId::new(Side::Left, TactorEnd::Distal),
        TactorId::new(Side::Left, TactorEnd::Proximal),
    ];

    pub const fn new(side: Side, end: TactorEnd) -> Self {
        TactorId { side, end }
    }

    pub fn index(self) -> usize {
        self.side.index() * 2
            + match self.end {
                TactorEnd::Distal => 0,
                TactorEnd::Proximal => 1,
            }
    }
}

impl fmt::Display for TactorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let end = match self.end {
            TactorEnd::Distal => 'd',
            TactorEnd::Proximal => 'p',
        };
        write!(f, "{}{}", self.side.letter(), end)
    }
}

impl FromStr for TactorId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::UnknownTactor(s.to_string());
        let mut chars = s.chars();
        let side = chars.next().and_then(Side::from_letter).ok_or_else(bad)?;
        let end = match chars.next() {
            Some('d') => TactorEnd::Distal,
            Some('p') => TactorEnd::Proximal,
            _ => return Err(bad()),
        };
        if chars.next().is_some() {
            return Err(bad());
        }
        Ok(TactorId { side, end })
    }
}

/// Direction of a stretch stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StretchType {
    Contraction,
    Expansion,
}

impl StretchType {
    pub const ALL: [StretchType; 2] = [StretchType::Contraction, StretchType::Expansion];

    /// Contraction is driven by negative control signals, expansion by positive.
    pub fn sign(self) -> f64 {
        match self {
            StretchType::Contraction => -1.0,
            StretchType::Expansion => 1.0,
        }
    }

    /// Stretch type of a signed control signal; `None` at neutral.
    pub fn of_signal(signal: f64) -> Option<StretchType> {
        if signal < 0.0 {
            Some(StretchType::Contraction)
        } else if signal > 0.0 {
            Some(StretchType::Expansion)
        } else {
            None
        }
    }

    pub fn letter(self) -> char {
        match self {
            StretchType::Contraction => 'c',
            StretchType::Expansion => 'e',
        }
    }
}

impl fmt::Display for StretchType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StretchType::Contraction => "contraction",
            StretchType::Expansion => "expansion",
        })
    }
}

impl FromStr for StretchType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "c" | "contraction" | "contract" => Ok(StretchType::Contraction),
            "e" | "expansion" | "expand" => Ok(StretchType::Expansion),
            _ => Err(format!("unknown stretch type `{s}`")),
        }
    }
}

/// Four signed control signals (mm of tactor displacement under no load),
/// one per stretch unit, stored in D, R, V, L order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StretchFrame {
    pub signals: [f64; 4],
    pub timestamp: f64,
}

impl StretchFrame {
    pub fn new(signals: [f64; 4], timestamp: f64) -> Self {
        StretchFrame { signals, timestamp }
    }

    pub fn neutral(timestamp: f64) -> Self {
        StretchFrame {
            signals: [0.0; 4],
            timestamp,
        }
    }

    pub fn uniform(signal: f64, timestamp: f64) -> Self {
        StretchFrame {
            signals: [signal; 4],
            timestamp,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Side, f64)> + '_ {
        Side::ALL.iter().map(move |&s| (s, self.signals[s.index()]))
    }

    /// Largest absolute signal in the frame.
    pub fn peak(&self) -> f64 {
        self.signals.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Index<Side> for StretchFrame {
    type Output = f64;

    fn index(&self, side: Side) -> &f64 {
        &self.signals[side.index()]
    }
}

impl IndexMut<Side> for StretchFrame {
    fn index_mut(&mut self, side: Side) -> &mut f64 {
        &mut self.signals[side.index()]
    }
}

/// Normalized 3-DoF force in the user frame. Components are dimensionless;
/// the rendering pipeline expects a Euclidean norm of at most one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ForceVector {
    pub const ZERO: ForceVector = ForceVector {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, ModelError> {
        for (axis, value) in [('x', x), ('y', y), ('z', z)] {
            if !value.is_finite() {
                return Err(ModelError::NonFiniteForce { axis, value });
            }
        }
        Ok(ForceVector { x, y, z })
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self, ModelError> {
        ForceVector::new(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rescales the vector onto the unit ball. Vectors already inside are
    /// returned unchanged, so the operation is idempotent.
    pub fn normalize(self) -> ForceVector {
        let n = self.norm();
        if n <= 1.0 {
            self
        } else {
            ForceVector {
                x: self.x / n,
                y: self.y / n,
                z: self.z / n,
            }
        }
    }

    pub fn scaled(self, k: f64) -> ForceVector {
        ForceVector {
            x: self.x * k,
            y: self.y * k,
            z: self.z * k,
        }
    }
}

/// A value per tactor, indexed by [`TactorId`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerTactor<T>(pub [T; 8]);

impl<T: Copy> PerTactor<T> {
    pub fn splat(value: T) -> Self {
        PerTactor([value; 8])
    }

    pub fn iter(&self) -> impl Iterator<Item = (TactorId, T)> + '_ {
        TactorId::ALL.iter().map(move |&t| (t, self.0[t.index()]))
    }
}

impl<T> Index<TactorId> for PerTactor<T> {
    type Output = T;

    fn index(&self, t: TactorId) -> &T {
        &self.0[t.index()]
    }
}

impl<T> IndexMut<TactorId> for PerTactor<T> {
    fn index_mut(&mut self, t: TactorId) -> &mut T {
        &mut self.0[t.index()]
    }
}

impl Serialize for PerTactor<f64> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(8))?;
        for (t, v) in self.iter() {
            map.serialize_entry(&t.to_string(), &v)?;
        }
        map.end()
    }
}

/// Partial per-tactor overrides as read from a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TactorOverrides(pub Vec<(TactorId, f64)>);

impl TactorOverrides {
    pub fn apply(&self, target: &mut PerTactor<f64>) {
        for &(t, v) in &self.0 {
            target[t] = v;
        }
    }
}

impl<'de> Deserialize<'de> for TactorOverrides {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = std::collections::BTreeMap::<String, f64>::deserialize(deserializer)?;
        raw.into_iter()
            .map(|(k, v)| {
                k.parse::<TactorId>()
                    .map(|t| (t, v))
                    .map_err(serde::de::Error::custom)
            })
            .collect::<Result<Vec<_>, _>>()
            .map(TactorOverrides)
    }
}

/// Mean skin-displacement ratio under contraction across all tactors.
pub const MEAN_CONTRACTION_SLOPE: f64 = 0.84;
/// Mean skin-displacement ratio under expansion across all tactors.
pub const MEAN_EXPANSION_SLOPE: f64 = 0.62;

/// QuadStretcher hardware and comfort parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadDeviceParams {
    /// Tactor travel under no load, mm.
    pub max_travel: f64,
    /// Largest signal magnitude the renderers may emit, mm.
    pub comfort_limit: f64,
    /// Tactor slew rate, mm/s.
    pub max_speed: f64,
    /// Tactor force rating, N.
    pub max_force: f64,
    /// Skin displacement per mm of control signal under contraction.
    pub skin_ratio_contraction: PerTactor<f64>,
    /// Skin displacement per mm of control signal under expansion.
    pub skin_ratio_expansion: PerTactor<f64>,
}

impl Default for QuadDeviceParams {
    fn default() -> Self {
        default_quad_params()
    }
}

/// Published QuadStretcher constants. Every tactor starts at the mean skin
/// ratios; see [`QuadDeviceParams::with_published_extremes`] for the measured
/// per-tactor extremes.
pub fn default_quad_params() -> QuadDeviceParams {
    QuadDeviceParams {
        max_travel: 11.0,
        comfort_limit: 8.6,
        max_speed: 206.0,
        max_force: 6.8,
        skin_ratio_contraction: PerTactor::splat(MEAN_CONTRACTION_SLOPE),
        skin_ratio_expansion: PerTactor::splat(MEAN_EXPANSION_SLOPE),
    }
}

impl QuadDeviceParams {
    /// Overrides the tactors whose ratios were reported individually:
    /// contraction 0.78 (Vp) and 0.95 (Dd), expansion 0.55 (Dd) and 0.70 (Rp).
    pub fn with_published_extremes(mut self) -> Self {
        let dd = TactorId::new(Side::Dorsal, TactorEnd::Distal);
        let vp = TactorId::new(Side::Ventral, TactorEnd::Proximal);
        let rp = TactorId::new(Side::Right, TactorEnd::Proximal);
        self.skin_ratio_contraction[vp] = 0.78;
        self.skin_ratio_contraction[dd] = 0.95;
        self.skin_ratio_expansion[dd] = 0.55;
        self.skin_ratio_expansion[rp] = 0.70;
        self
    }

    pub fn skin_slope(&self, tactor: TactorId, kind: StretchType) -> f64 {
        match kind {
            StretchType::Contraction => self.skin_ratio_contraction[tactor],
            StretchType::Expansion => self.skin_ratio_expansion[tactor],
        }
    }

    pub fn mean_slope(&self, kind: StretchType) -> f64 {
        let table = match kind {
            StretchType::Contraction => &self.skin_ratio_contraction,
            StretchType::Expansion => &self.skin_ratio_expansion,
        };
        table.0.iter().sum::<f64>() / 8.0
    }
}

/// Monotone lookup table from string contraction (mm) to tension (N).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensionCurve {
    knots: Vec<(f64, f64)>,
}

impl TensionCurve {
    /// Builds a curve from `(contraction_mm, tension_n)` knots. Ordering and
    /// monotonicity are checked by [`Validate`], not here.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        if knots.len() < 2 {
            return Err(ModelError::TooFewKnots);
        }
        Ok(TensionCurve { knots })
    }

    /// Synthetic stiffening curve: 0 N at the reference rising quadratically
    /// to 40 N at 20 mm, sampled every 2 mm. Not measured data.
    pub fn synthetic_default() -> Self {
        let knots = (0..=10)
            .map(|i| {
                let c = 2.0 * i as f64;
                (c, 40.0 * (c / 20.0).powi(2))
            })
            .collect();
        TensionCurve { knots }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    fn violations(&self, out: &mut Vec<Violation>) {
        let (x0, t0) = self.knots[0];
        if x0 != 0.0 || t0 != 0.0 {
            out.push(Violation::new(
                "tension_curve passes through (0, 0)",
                format!("first knot is ({x0}, {t0})"),
            ));
        }
        for w in self.knots.windows(2) {
            let ((xa, ta), (xb, tb)) = (w[0], w[1]);
            if !(xb > xa) {
                out.push(Violation::new(
                    "tension_curve contraction strictly increasing",
                    format!("knot {xb} follows {xa}"),
                ));
            }
            if !(tb >= ta) {
                out.push(Violation::new(
                    "tension_curve non-decreasing",
                    format!("tension {tb} at {xb} mm after {ta} at {xa} mm"),
                ));
            }
        }
        if self.knots.iter().any(|(x, t)| !x.is_finite() || !t.is_finite()) {
            out.push(Violation::new("tension_curve finite", "non-finite knot"));
        }
    }
}

/// Squeezer (tension-band) hardware parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqueezerParams {
    pub tactor_count: u32,
    /// Rated maximum string tension, N.
    pub max_string_tension: f64,
    pub tension_curve: TensionCurve,
    /// Normal force on each tactor per newton of string tension.
    pub tactor_force_factor: f64,
    /// Control loop rate, Hz.
    pub pid_rate: f64,
    pub encoder_bits: u32,
    /// Pulley radius, mm.
    pub pulley_radius: f64,
    /// Mechanical limit on string contraction, mm.
    pub max_contraction: f64,
    /// Motor angular velocity limit, rad/s.
    pub max_angular_velocity: f64,
}

impl Default for SqueezerParams {
    fn default() -> Self {
        SqueezerParams {
            tactor_count: 6,
            max_string_tension: 9.0 * STANDARD_GRAVITY,
            tension_curve: TensionCurve::synthetic_default(),
            tactor_force_factor: 0.87,
            pid_rate: 1000.0,
            encoder_bits: 12,
            pulley_radius: 5.0,
            max_contraction: 20.0,
            max_angular_velocity: 20.0,
        }
    }
}

impl SqueezerParams {
    pub fn encoder_counts(&self) -> u32 {
        1 << self.encoder_bits
    }

    /// String contraction represented by one encoder count, mm.
    pub fn contraction_per_count(&self) -> f64 {
        std::f64::consts::TAU / self.encoder_counts() as f64 * self.pulley_radius
    }

    pub fn control_period(&self) -> f64 {
        1.0 / self.pid_rate
    }
}

/// A single broken invariant, named after the invariant it violates.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub invariant: String,
    pub detail: String,
}

impl Violation {
    pub fn new(invariant: impl Into<String>, detail: impl Into<String>) -> Self {
        Violation {
            invariant: invariant.into(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

/// Outcome of [`validate_params`]: every violated invariant, possibly none.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, invariant: &str) -> bool {
        self.violations.iter().any(|v| v.invariant == invariant)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub trait Validate {
    fn violations(&self) -> Vec<Violation>;
}

/// Checks every type invariant of a parameter set and reports all failures.
pub fn validate_params<P: Validate + ?Sized>(params: &P) -> ValidationReport {
    ValidationReport {
        violations: params.violations(),
    }
}

fn positive(out: &mut Vec<Violation>, name: &str, value: f64) {
    if !(value > 0.0 && value.is_finite()) {
        out.push(Violation::new(format!("{name} > 0"), format!("{name} = {value}")));
    }
}

impl Validate for QuadDeviceParams {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        positive(&mut out, "max_travel", self.max_travel);
        positive(&mut out, "comfort_limit", self.comfort_limit);
        positive(&mut out, "max_speed", self.max_speed);
        positive(&mut out, "max_force", self.max_force);
        if !(self.comfort_limit <= self.max_travel) {
            out.push(Violation::new(
                "comfort_limit ≤ max_travel",
                format!(
                    "comfort_limit {} exceeds max_travel {}",
                    self.comfort_limit, self.max_travel
                ),
            ));
        }
        for (table, name) in [
            (&self.skin_ratio_contraction, "contraction"),
            (&self.skin_ratio_expansion, "expansion"),
        ] {
            for (t, slope) in table.iter() {
                if !(slope > 0.0 && slope <= 1.0) {
                    out.push(Violation::new(
                        "slope in (0, 1]",
                        format!("{name} slope {slope} at {t}"),
                    ));
                }
            }
        }
        for t in TactorId::ALL {
            let (c, e) = (self.skin_ratio_contraction[t], self.skin_ratio_expansion[t]);
            if !(e < c) {
                out.push(Violation::new(
                    "expansion < contraction",
                    format!("{t}: expansion slope {e} is not below contraction slope {c}"),
                ));
            }
        }
        out
    }
}

impl Validate for SqueezerParams {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.tactor_count == 0 {
            out.push(Violation::new("tactor_count > 0", "tactor_count = 0"));
        }
        positive(&mut out, "max_string_tension", self.max_string_tension);
        positive(&mut out, "pid_rate", self.pid_rate);
        positive(&mut out, "pulley_radius", self.pulley_radius);
        positive(&mut out, "max_contraction", self.max_contraction);
        positive(&mut out, "max_angular_velocity", self.max_angular_velocity);
        if !(self.tactor_force_factor > 0.0 && self.tactor_force_factor < 1.0) {
            out.push(Violation::new(
                "tactor_force_factor in (0, 1)",
                format!("tactor_force_factor = {}", self.tactor_force_factor),
            ));
        }
        if !(1..=16).contains(&self.encoder_bits) {
            out.push(Violation::new(
                "encoder_bits in [1, 16]",
                format!("encoder_bits = {}", self.encoder_bits),
            ));
        }
        self.tension_curve.violations(&mut out);
        let (lo, hi) = self.tension_curve.domain();
        if !(lo <= 0.0 && hi >= self.max_contraction) {
            out.push(Violation::new(
                "tension_curve covers [0, max_contraction]",
                format!(
                    "curve domain [{lo}, {hi}] vs max_contraction {}",
                    self.max_contraction
                ),
            ));
        }
        out
    }
}
