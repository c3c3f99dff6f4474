//! 2-down-1-up adaptive staircase on the stimulus increment ΔS.
//!
//! ΔS starts at 40% of the reference magnitude. Two consecutive correct
//! answers shrink it, any miss grows it. Steps are 20% while fewer than three
//! reversals have occurred and 4% afterwards. The run ends at the eighth
//! reversal and the JND is the mean ΔS over the last four.

use serde::Serialize;
use thiserror::Error;

pub const INITIAL_FRACTION: f64 = 0.4;
pub const COARSE_STEP: f64 = 0.20;
pub const FINE_STEP: f64 = 0.04;
pub const COARSE_REVERSALS: usize = 3;
pub const TOTAL_REVERSALS: usize = 8;
pub const AVERAGED_REVERSALS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum StaircaseError {
    #[error("reference level must be non-zero and finite, got {0}")]
    BadReference(f64),
    #[error("staircase already terminated after {0} reversals")]
    Terminated(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

/// One answered trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    /// ΔS presented on this trial, mm.
    pub delta: f64,
    pub correct: bool,
    /// Whether this trial's adjustment reversed the staircase direction.
    pub reversal: bool,
    /// Fractional step applied after this trial, if ΔS moved.
    pub step: Option<f64>,
    pub direction: Option<Direction>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaircaseState {
    /// Signed reference level, mm.
    pub reference: f64,
    /// Current ΔS, mm. Always positive.
    pub delta: f64,
    pub consecutive_correct: u32,
    pub reversal_count: usize,
    pub reversal_deltas: Vec<f64>,
    pub direction: Option<Direction>,
    pub history: Vec<TrialRecord>,
}

/// Fresh staircase for a signed reference level.
pub fn staircase_init(reference: f64) -> Result<StaircaseState, StaircaseError> {
    if reference == 0.0 || !reference.is_finite() {
        return Err(StaircaseError::BadReference(reference));
    }
    Ok(StaircaseState {
        reference,
        delta: INITIAL_FRACTION * reference.abs(),
        consecutive_correct: 0,
        reversal_count: 0,
        reversal_deltas: Vec::with_capacity(TOTAL_REVERSALS),
        direction: None,
        history: Vec::new(),
    })
}

/// Records one response and adjusts ΔS.
pub fn staircase_update(
    state: &StaircaseState,
    correct: bool,
) -> Result<StaircaseState, StaircaseError> {
    let mut next = state.clone();
    next.apply(correct)?;
    Ok(next)
}

impl StaircaseState {
    pub fn is_terminated(&self) -> bool {
        self.reversal_count >= TOTAL_REVERSALS
    }

    /// Step fraction that the next adjustment will use.
    pub fn active_step(&self) -> f64 {
        if self.reversal_count < COARSE_REVERSALS {
            COARSE_STEP
        } else {
            FINE_STEP
        }
    }

    /// In-place form of [`staircase_update`].
    pub fn apply(&mut self, correct: bool) -> Result<(), StaircaseError> {
        if self.is_terminated() {
            return Err(StaircaseError::Terminated(self.reversal_count));
        }
        let presented = self.delta;
        let step = self.active_step();
        let movement = if correct {
            self.consecutive_correct += 1;
            if self.consecutive_correct == 2 {
                self.consecutive_correct = 0;
                Some(Direction::Down)
            } else {
                None
            }
        } else {
            self.consecutive_correct = 0;
            Some(Direction::Up)
        };

        let mut reversal = false;
        if let Some(dir) = movement {
            reversal = self.direction.is_some_and(|prev| prev != dir);
            if reversal {
                self.reversal_count += 1;
                self.reversal_deltas.push(presented);
            }
            self.delta = match dir {
                Direction::Down => presented * (1.0 - step),
                Direction::Up => presented * (1.0 + step),
            };
            self.direction = Some(dir);
        }
        self.history.push(TrialRecord {
            delta: presented,
            correct,
            reversal,
            step: movement.map(|_| step),
            direction: movement,
        });
        Ok(())
    }

    /// Mean ΔS over the last four reversals, once the run has terminated.
    pub fn jnd(&self) -> Option<f64> {
        if !self.is_terminated() {
            return None;
        }
        let tail = &self.reversal_deltas[TOTAL_REVERSALS - AVERAGED_REVERSALS..TOTAL_REVERSALS];
        Some(tail.iter().sum::<f64>() / AVERAGED_REVERSALS as f64)
    }

    pub fn trials(&self) -> usize {
        self.history.len()
    }

    pub fn proportion_correct(&self) -> f64 {
        if self.history.is_empty() {
            return 0.0;
        }
        self.history.iter().filter(|t| t.correct).count() as f64 / self.history.len() as f64
    }

    pub fn max_delta(&self) -> f64 {
        self.history
            .iter()
            .map(|t| t.delta)
            .fold(self.delta, f64::max)
    }
}

/// JND relative to the reference magnitude.
pub fn weber_fraction(jnd: f64, reference: f64) -> Result<f64, StaircaseError> {
    if reference == 0.0 || !reference.is_finite() {
        return Err(StaircaseError::BadReference(reference));
    }
    Ok(jnd / reference.abs())
}
