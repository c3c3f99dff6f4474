//! Seeded simulated observers and the 3-AFC staircase run built on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use super::staircase::{staircase_init, weber_fraction, StaircaseError, StaircaseState};

#[derive(Debug, Error, PartialEq)]
pub enum ObserverError {
    #[error("observer noise_sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("ΔS must be non-negative and finite, got {0}")]
    BadDelta(f64),
    #[error(transparent)]
    Staircase(#[from] StaircaseError),
}

/// Stand-in for a participant. Perception adds independent Gaussian noise
/// with standard deviation `noise_sigma` (mm) to each presented control
/// signal; an infinite sigma means the observer guesses uniformly.
#[derive(Debug, Clone)]
pub struct SimulatedObserver {
    /// Weber fraction the noise level was calibrated against.
    pub weber_k: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    rng: ChaCha8Rng,
}

impl SimulatedObserver {
    pub fn new(weber_k: f64, noise_sigma: f64, seed: u64) -> Result<Self, ObserverError> {
        if !(noise_sigma > 0.0) {
            return Err(ObserverError::BadSigma(noise_sigma));
        }
        Ok(SimulatedObserver {
            weber_k,
            noise_sigma,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Observer answering at chance on every trial.
    pub fn guessing(seed: u64) -> Self {
        SimulatedObserver::new(f64::NAN, f64::INFINITY, seed).expect("infinite sigma is valid")
    }

    pub fn is_guessing(&self) -> bool {
        self.noise_sigma.is_infinite()
    }

    /// Same observer restarted with a different seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        SimulatedObserver {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ..self.clone()
        }
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Draws a standard normal deviate scaled by `noise_sigma`.
    pub(crate) fn noise(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        z * self.noise_sigma
    }
}

/// One three-alternative forced-choice trial. Two intervals carry the
/// reference, one carries `reference ± delta` (sign and position random).
/// The observer picks the percept farthest in total from the other two and
/// the result says whether that was the odd one.
pub fn afc3_trial(
    reference: f64,
    delta: f64,
    observer: &mut SimulatedObserver,
) -> Result<bool, ObserverError> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(ObserverError::BadDelta(delta));
    }
    let odd = observer.rng().random_range(0..3usize);
    let sign = if observer.rng().random_bool(0.5) { 1.0 } else { -1.0 };
    if observer.is_guessing() {
        return Ok(observer.rng().random_range(0..3usize) == odd);
    }
    let mut percept = [reference; 3];
    percept[odd] += sign * delta;
    for p in percept.iter_mut() {
        *p += observer.noise();
    }
    let isolation = |i: usize| -> f64 {
        (0..3)
            .filter(|&j| j != i)
            .map(|j| (percept[i] - percept[j]).abs())
            .sum()
    };
    let mut choice = 0;
    for i in 1..3 {
        if isolation(i) > isolation(choice) {
            choice = i;
        }
    }
    Ok(choice == odd)
}

/// Limits that decide whether a staircase run counts as converged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunLimits {
    pub max_trials: usize,
    /// ΔS above this multiple of |reference| marks the run as diverging.
    pub ceiling_fraction: f64,
    /// Runs answering correctly less often than this are rejected. Halfway
    /// between 3-AFC chance (1/3) and the 2-down-1-up target (70.7%).
    pub min_proportion_correct: f64,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits {
            max_trials: 500,
            ceiling_fraction: 1.0,
            min_proportion_correct: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaircaseRun {
    pub state: StaircaseState,
    pub jnd: Option<f64>,
    pub weber: Option<f64>,
    /// Why the run was rejected, if it was.
    pub failure: Option<String>,
}

impl StaircaseRun {
    pub fn converged(&self) -> bool {
        self.failure.is_none()
    }
}

/// Runs one staircase to termination against `observer`.
pub fn run_staircase(
    reference: f64,
    observer: &mut SimulatedObserver,
    limits: &RunLimits,
) -> Result<StaircaseRun, ObserverError> {
    let mut state = staircase_init(reference)?;
    let ceiling = limits.ceiling_fraction * reference.abs();
    let mut failure = None;
    while !state.is_terminated() {
        if state.trials() >= limits.max_trials {
            failure = Some(format!(
                "no termination within {} trials ({} reversals)",
                limits.max_trials, state.reversal_count
            ));
            break;
        }
        if state.delta > ceiling {
            failure = Some(format!(
                "ΔS {:.3} mm exceeded ceiling {:.3} mm",
                state.delta, ceiling
            ));
            break;
        }
        let correct = afc3_trial(reference, state.delta, observer)?;
        state.apply(correct)?;
    }
    if failure.is_none() && state.proportion_correct() < limits.min_proportion_correct {
        failure = Some(format!(
            "proportion correct {:.3} below {:.3}",
            state.proportion_correct(),
            limits.min_proportion_correct
        ));
    }
    let jnd = if failure.is_none() { state.jnd() } else { None };
    let weber = jnd.map(|j| weber_fraction(j, reference)).transpose()?;
    Ok(StaircaseRun {
        state,
        jnd,
        weber,
        failure,
    })
}

/// Mean Weber fraction over `runs` seeded staircases; non-converged runs are
/// counted separately and excluded from the mean.
pub fn mean_weber(
    reference: f64,
    noise_sigma: f64,
    runs: u64,
    base_seed: u64,
    limits: &RunLimits,
) -> Result<(f64, usize), ObserverError> {
    let mut total = 0.0;
    let mut ok = 0usize;
    for i in 0..runs {
        let mut obs = SimulatedObserver::new(f64::NAN, noise_sigma, base_seed.wrapping_add(i))?;
        let run = run_staircase(reference, &mut obs, limits)?;
        if let Some(w) = run.weber {
            total += w;
            ok += 1;
        }
    }
    let failed = runs as usize - ok;
    Ok((if ok > 0 { total / ok as f64 } else { f64::NAN }, failed))
}

/// Finds the perceptual noise level whose staircase runs average the target
/// Weber fraction, by bisection in log-sigma with common random numbers.
pub fn calibrate_sigma(
    target_weber: f64,
    reference: f64,
    runs: u64,
    base_seed: u64,
) -> Result<f64, ObserverError> {
    let limits = RunLimits::default();
    let (mut lo, mut hi) = (1e-3_f64.ln(), 5.0_f64.ln());
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        let (w, _) = mean_weber(reference, mid.exp(), runs, base_seed, &limits)?;
        if w.is_nan() || w > target_weber {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Events of the comfort-limit probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeEvent {
    /// +10% of full travel.
    CoarseUp,
    /// +1% of full travel.
    FineUp,
    CoarseDown,
    FineDown,
    Discomfort,
}

/// Signal magnitude at the first discomfort report, or `device_max` when the
/// sequence ends without one. The signal is kept within `[0, device_max]`.
pub fn comfort_probe(events: &[ProbeEvent], device_max: f64) -> f64 {
    let mut percent: i32 = 0;
    for e in events {
        match e {
            ProbeEvent::CoarseUp => percent += 10,
            ProbeEvent::FineUp => percent += 1,
            ProbeEvent::CoarseDown => percent -= 10,
            ProbeEvent::FineDown => percent -= 1,
            ProbeEvent::Discomfort => return percent as f64 * device_max / 100.0,
        }
        percent = percent.clamp(0, 100);
    }
    device_max
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_limit_is_always_correct() {
        let mut obs = SimulatedObserver::new(0.0, 1e-12, 3).unwrap();
        for delta in [1e-6, 0.01, 1.0, 5.0] {
            for _ in 0..200 {
                assert!(afc3_trial(4.3, delta, &mut obs).unwrap());
            }
        }
    }

    #[test]
    fn zero_delta_is_chance() {
        let mut obs = SimulatedObserver::new(0.31, 0.5, 11).unwrap();
        let n = 10_000;
        let hits = (0..n).filter(|_| afc3_trial(-4.3, 0.0, &mut obs).unwrap()).count();
        let p = hits as f64 / n as f64;
        assert!((p - 1.0 / 3.0).abs() <= 0.03, "{p}");
    }

    #[test]
    fn guessing_is_chance() {
        let mut obs = SimulatedObserver::guessing(5);
        let n = 10_000;
        let hits = (0..n).filter(|_| afc3_trial(4.3, 2.0, &mut obs).unwrap()).count();
        assert!((hits as f64 / n as f64 - 1.0 / 3.0).abs() <= 0.03);
    }

    #[test]
    fn psychometric_function_is_monotone() {
        let mut last = 0.0;
        for delta in [0.0, 0.25, 0.5, 1.0, 2.0, 4.0] {
            let mut obs = SimulatedObserver::new(0.31, crate::psychophysics::REFERENCE_NOISE_SIGMA, 99).unwrap();
            let hits = (0..10_000)
                .filter(|_| afc3_trial(4.3, delta, &mut obs).unwrap())
                .count();
            let p = hits as f64 / 10_000.0;
            assert!(p >= last, "P(correct) fell to {p} at ΔS {delta}");
            last = p;
        }
        assert!(last > 0.95);
    }

    #[test]
    fn observer_rejects_bad_inputs() {
        assert_eq!(
            SimulatedObserver::new(0.3, 0.0, 1).unwrap_err(),
            ObserverError::BadSigma(0.0)
        );
        assert!(SimulatedObserver::new(0.3, -1.0, 1).is_err());
        assert!(SimulatedObserver::new(0.3, f64::NAN, 1).is_err());
        let mut obs = SimulatedObserver::new(0.3, 0.5, 1).unwrap();
        assert!(afc3_trial(4.3, -0.1, &mut obs).is_err());
    }

    #[test]
    fn seeded_runs_reproduce() {
        let run = |seed| {
            let mut obs = SimulatedObserver::new(0.31, crate::psychophysics::REFERENCE_NOISE_SIGMA, seed).unwrap();
            run_staircase(4.3, &mut obs, &RunLimits::default()).unwrap()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42).state.history, run(43).state.history);
    }

    #[test]
    fn noiseless_staircase_descends() {
        let mut obs = SimulatedObserver::new(0.0, 1e-9, 8).unwrap();
        let run = run_staircase(4.3, &mut obs, &RunLimits::default()).unwrap();
        let jnd = run.jnd.expect("converges");
        assert!(jnd <= 1.72 * 0.8f64.powi(4));
        let first_reversal = run.state.history.iter().position(|t| t.reversal).unwrap();
        let deltas: Vec<f64> = run.state.history[..first_reversal].iter().map(|t| t.delta).collect();
        assert!(deltas.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn guessing_staircase_is_flagged() {
        let mut flagged = 0;
        for seed in 0..200 {
            let mut obs = SimulatedObserver::guessing(seed);
            let run = run_staircase(4.3, &mut obs, &RunLimits::default()).unwrap();
            if !run.converged() {
                flagged += 1;
                assert!(run.jnd.is_none());
            }
        }
        assert!(flagged >= 180, "only {flagged}/200 chance runs flagged");
    }

    #[test]
    fn calibrated_observer_rarely_rejected() {
        let (_, failed) = mean_weber(4.3, crate::psychophysics::REFERENCE_NOISE_SIGMA, 200, 1000, &RunLimits::default()).unwrap();
        assert!(failed <= 2, "{failed}");
    }

    #[test]
    fn comfort_probe_examples() {
        use ProbeEvent::*;
        assert_eq!(comfort_probe(&[CoarseUp; 12], 11.0), 11.0);
        assert_eq!(comfort_probe(&[], 11.0), 11.0);
        let mut to_limit = vec![CoarseUp; 8];
        to_limit.extend([FineUp; 6]);
        to_limit.push(Discomfort);
        assert!((comfort_probe(&to_limit, 10.0) - 8.6).abs() < 1e-12);
        let mut events = vec![CoarseUp; 7];
        events.extend([FineUp; 3]);
        events.push(Discomfort);
        assert!((comfort_probe(&events, 11.0) - 8.03).abs() < 1e-12);
        let down = [CoarseUp, CoarseUp, FineDown, CoarseDown, CoarseDown, Discomfort];
        assert_eq!(comfort_probe(&down, 11.0), 0.0);
    }
}
