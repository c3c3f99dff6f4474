//! Stimulus identification sessions and their confusion matrices.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use super::observer::SimulatedObserver;
use crate::model::{Side, StretchType};

#[derive(Debug, Error, PartialEq)]
pub enum ConfusionError {
    #[error("stimulus set is empty")]
    EmptySet,
    #[error("repetitions must be positive")]
    NoRepetitions,
    #[error("unknown session {0} (expected 1 to 4)")]
    UnknownSession(u8),
}

/// A stimulus pattern across the four stretch units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stimulus {
    pub label: String,
    pub signals: [f64; 4],
}

impl Stimulus {
    /// A single unit driven at `amplitude` in the given direction.
    pub fn single(side: Side, kind: StretchType, amplitude: f64) -> Self {
        let mut signals = [0.0; 4];
        signals[side.index()] = kind.sign() * amplitude;
        Stimulus {
            label: format!("{}{}", side.letter(), kind.letter()),
            signals,
        }
    }

    /// All four units driven together.
    pub fn all(kind: StretchType, amplitude: f64) -> Self {
        Stimulus {
            label: format!("All{}", kind.letter()),
            signals: [kind.sign() * amplitude; 4],
        }
    }
}

/// The four identification sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Session {
    /// 4 sides × 2 stretch types.
    SidesAndTypes = 1,
    /// 4 sides, contraction only.
    SidesContraction = 2,
    /// 4 sides, expansion only.
    SidesExpansion = 3,
    /// Contraction vs expansion on all units.
    StretchTypes = 4,
}

impl Session {
    pub const ALL: [Session; 4] = [
        Session::SidesAndTypes,
        Session::SidesContraction,
        Session::SidesExpansion,
        Session::StretchTypes,
    ];

    pub fn from_number(n: u8) -> Result<Self, ConfusionError> {
        match n {
            1 => Ok(Session::SidesAndTypes),
            2 => Ok(Session::SidesContraction),
            3 => Ok(Session::SidesExpansion),
            4 => Ok(Session::StretchTypes),
            _ => Err(ConfusionError::UnknownSession(n)),
        }
    }

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn stimuli(self, amplitude: f64) -> Vec<Stimulus> {
        let sides = |kind| Side::ALL.map(|s| Stimulus::single(s, kind, amplitude)).to_vec();
        match self {
            Session::SidesAndTypes => Side::ALL
                .iter()
                .flat_map(|&s| StretchType::ALL.map(|k| Stimulus::single(s, k, amplitude)))
                .collect(),
            Session::SidesContraction => sides(StretchType::Contraction),
            Session::SidesExpansion => sides(StretchType::Expansion),
            Session::StretchTypes => StretchType::ALL
                .iter()
                .map(|&k| Stimulus::all(k, amplitude))
                .collect(),
        }
    }
}

/// Stimulus-by-response counts. Rows are presented stimuli.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u32>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u32 {
        (0..self.size()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u32> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.trace() as f64 / total as f64
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>6}", "")?;
        for l in &self.labels {
            write!(f, "{l:>6}")?;
        }
        writeln!(f)?;
        for (l, row) in self.labels.iter().zip(&self.counts) {
            write!(f, "{l:>6}")?;
            for c in row {
                write!(f, "{c:>6}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Index of the template nearest to `percept` (first on ties).
fn nearest(percept: &[f64; 4], stimuli: &[Stimulus]) -> usize {
    let dist = |s: &Stimulus| -> f64 {
        s.signals
            .iter()
            .zip(percept)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let mut best = 0;
    let mut best_d = dist(&stimuli[0]);
    for (i, s) in stimuli.iter().enumerate().skip(1) {
        let d = dist(s);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Presents every stimulus exactly `reps` times in shuffled order. The
/// observer senses each unit through an independent Gaussian channel and
/// answers with the nearest stimulus of the set.
pub fn confusion_experiment(
    stimuli: &[Stimulus],
    reps: u32,
    observer: &mut SimulatedObserver,
) -> Result<ConfusionMatrix, ConfusionError> {
    if stimuli.is_empty() {
        return Err(ConfusionError::EmptySet);
    }
    if reps == 0 {
        return Err(ConfusionError::NoRepetitions);
    }
    let mut order: Vec<usize> = (0..stimuli.len())
        .flat_map(|i| std::iter::repeat_n(i, reps as usize))
        .collect();
    order.shuffle(observer.rng());

    let mut matrix = ConfusionMatrix::new(stimuli.iter().map(|s| s.label.clone()).collect());
    for presented in order {
        let response = if observer.is_guessing() {
            observer.rng().random_range(0..stimuli.len())
        } else {
            let mut percept = stimuli[presented].signals;
            for p in percept.iter_mut() {
                *p += observer.noise();
            }
            nearest(&percept, stimuli)
        };
        matrix.counts[presented][response] += 1;
    }
    Ok(matrix)
}

/// Channel noise giving the target identification accuracy on `session`,
/// found by bisection with common random numbers (accuracy is monotone in
/// sigma for a fixed seed).
pub fn calibrate_channel_sigma(
    target_accuracy: f64,
    session: Session,
    amplitude: f64,
    reps: u32,
    seed: u64,
) -> Result<f64, ConfusionError> {
    let stimuli = session.stimuli(amplitude);
    let (mut lo, mut hi) = (1e-3_f64.ln(), (10.0 * amplitude).ln());
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let mut obs = SimulatedObserver::new(f64::NAN, mid.exp(), seed).expect("positive sigma");
        let acc = confusion_experiment(&stimuli, reps, &mut obs)?.accuracy();
        if acc < target_accuracy {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn session_sizes() {
        let sizes: Vec<usize> = Session::ALL.iter().map(|s| s.stimuli(8.6).len()).collect();
        assert_eq!(sizes, vec![8, 4, 4, 2]);
        let labels: Vec<String> = Session::SidesAndTypes
            .stimuli(8.6)
            .into_iter()
            .map(|s| s.label)
            .collect();
        assert_eq!(labels, ["Dc", "De", "Rc", "Re", "Vc", "Ve", "Lc", "Le"]);
        assert_eq!(Session::from_number(5), Err(ConfusionError::UnknownSession(5)));
    }

    #[test]
    fn ideal_observer_is_perfect() {
        for session in Session::ALL {
            let mut obs = SimulatedObserver::new(0.0, 1e-9, 1).unwrap();
            let m = confusion_experiment(&session.stimuli(8.6), 10, &mut obs).unwrap();
            assert_eq!(m.accuracy(), 1.0);
            for (i, row) in m.counts.iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    assert_eq!(c, if i == j { 10 } else { 0 });
                }
            }
        }
    }

    #[test]
    fn guessing_observer_is_at_chance() {
        let mut obs = SimulatedObserver::guessing(17);
        let m = confusion_experiment(&Session::SidesAndTypes.stimuli(8.6), 1000, &mut obs).unwrap();
        assert!((m.accuracy() - 0.125).abs() <= 0.03);
        assert!(m.row_sums().iter().all(|&r| r == 1000));
    }

    #[test]
    fn accounting_identities() {
        let mut obs = SimulatedObserver::new(0.0, 4.0, 2).unwrap();
        let m = confusion_experiment(&Session::SidesAndTypes.stimuli(8.6), 10, &mut obs).unwrap();
        assert_eq!(m.row_sums(), vec![10; 8]);
        assert_eq!(m.total(), 80);
        let diag: u32 = (0..8).map(|i| m.counts[i][i]).sum();
        assert_eq!(m.accuracy(), diag as f64 / 80.0);
    }

    #[test]
    fn accuracy_falls_with_noise() {
        let stimuli = Session::SidesAndTypes.stimuli(8.6);
        let mut last = 1.0;
        for sigma in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let mut obs = SimulatedObserver::new(0.0, sigma, 23).unwrap();
            let acc = confusion_experiment(&stimuli, 100, &mut obs).unwrap().accuracy();
            assert!(acc <= last, "accuracy rose to {acc} at sigma {sigma}");
            last = acc;
        }
    }

    #[test]
    fn input_errors() {
        let mut obs = SimulatedObserver::new(0.0, 1.0, 2).unwrap();
        assert_eq!(
            confusion_experiment(&[], 10, &mut obs),
            Err(ConfusionError::EmptySet)
        );
        assert_eq!(
            confusion_experiment(&Session::StretchTypes.stimuli(8.6), 0, &mut obs),
            Err(ConfusionError::NoRepetitions)
        );
    }
}
