//! Measurement machinery for perceptual thresholds and stimulus
//! identification, driven by seeded simulated observers.

mod confusion;
mod observer;
mod staircase;

pub use confusion::{
    calibrate_channel_sigma, confusion_experiment, ConfusionError, ConfusionMatrix, Session,
    Stimulus,
};
pub use observer::{
    afc3_trial, calibrate_sigma, comfort_probe, mean_weber, run_staircase, ObserverError,
    ProbeEvent, RunLimits, SimulatedObserver, StaircaseRun,
};
pub use staircase::{
    staircase_init, staircase_update, weber_fraction, Direction, StaircaseError, StaircaseState,
    TrialRecord, AVERAGED_REVERSALS, COARSE_REVERSALS, COARSE_STEP, FINE_STEP, INITIAL_FRACTION,
    TOTAL_REVERSALS,
};

/// Reference level of the threshold sessions, mm (half the comfort limit).
pub const JND_REFERENCE: f64 = 4.3;

/// Mean contraction Weber fraction the reference observer is tuned to.
pub const TARGET_WEBER: f64 = 0.308;

/// Perceptual noise (mm) that makes 3-AFC staircases at 4.3 mm average
/// [`TARGET_WEBER`]. Output of [`calibrate_sigma`] over 400 runs, seed 2024;
/// regenerate with the `calibrate_observers` example.
pub const REFERENCE_NOISE_SIGMA: f64 = 0.516764;

/// Session-1 identification accuracy the discrimination observer is tuned to.
pub const TARGET_IDENTIFICATION_ACCURACY: f64 = 0.9734;

/// Per-unit channel noise (mm) giving [`TARGET_IDENTIFICATION_ACCURACY`] on
/// the eight-stimulus session. Output of [`calibrate_channel_sigma`] with
/// reps 2000, seed 2024.
pub const REFERENCE_CHANNEL_SIGMA: f64 = 2.389459;

/// Signal magnitude of identification stimuli, mm.
pub const DISCRIMINATION_AMPLITUDE: f64 = 8.6;
