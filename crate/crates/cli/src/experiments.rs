//! `jnd` and `confusion`: psychophysics runs with simulated observers.

use quadstretch::model::{Side, StretchType};
use quadstretch::psychophysics::{
    confusion_experiment, run_staircase, ConfusionMatrix, Session, SimulatedObserver,
    TrialRecord, TARGET_WEBER,
};
use serde::Serialize;

use crate::artifact::{f6, to_json, write_file, Context, Provenance, RunManifest};
use crate::{CliError, ConfusionArgs, JndArgs, ObserverArgs, ObserverKind};

/// Noise standing in for a noiseless observer; Gaussian sampling needs a
/// positive sigma.
pub const NOISELESS_SIGMA: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct ObserverSummary {
    pub kind: &'static str,
    pub sigma: f64,
}

pub fn build_observer(
    args: &ObserverArgs,
    configured_sigma: f64,
    seed: u64,
) -> Result<(SimulatedObserver, ObserverSummary), CliError> {
    let (kind, sigma) = match args.observer {
        ObserverKind::Reference => ("reference", args.sigma.unwrap_or(configured_sigma)),
        ObserverKind::Noiseless => ("noiseless", args.sigma.unwrap_or(NOISELESS_SIGMA)),
        ObserverKind::Guessing => ("guessing", f64::INFINITY),
    };
    let obs = SimulatedObserver::new(TARGET_WEBER, sigma, seed)
        .map_err(|e| CliError::Usage(format!("--sigma: {e}")))?;
    Ok((obs, ObserverSummary { kind, sigma }))
}

#[derive(Debug, Serialize)]
pub struct JndRun {
    pub seed: u64,
    pub converged: bool,
    pub failure: Option<String>,
    pub jnd: Option<f64>,
    pub weber: Option<f64>,
    pub reversals: Vec<f64>,
    pub trials: usize,
    pub proportion_correct: f64,
}

#[derive(Debug, Serialize)]
pub struct JndSummary {
    pub provenance: Provenance,
    pub side: String,
    pub stretch_type: String,
    /// Signed reference level, mm (contraction is negative).
    pub reference: f64,
    pub observer: ObserverSummary,
    pub runs: Vec<JndRun>,
    pub mean_weber: Option<f64>,
    pub failed_runs: usize,
}

fn trial_rows(run: usize, history: &[TrialRecord], out: &mut String) {
    for (i, t) in history.iter().enumerate() {
        out.push_str(&format!(
            "{run},{},{},{},{},{},{}\n",
            i + 1,
            f6(t.delta),
            u8::from(t.correct),
            u8::from(t.reversal),
            t.step.map_or(String::new(), f6),
            match t.direction {
                Some(quadstretch::psychophysics::Direction::Up) => "up",
                Some(quadstretch::psychophysics::Direction::Down) => "down",
                None => "",
            }
        ));
    }
}

pub fn cmd_jnd(ctx: &Context, args: &JndArgs) -> Result<(), CliError> {
    let side: Side = args.side.parse().map_err(|e| CliError::Usage(format!("--side: {e}")))?;
    let kind: StretchType = args
        .stretch_type
        .parse()
        .map_err(|e| CliError::Usage(format!("--type: {e}")))?;
    if !(args.reference > 0.0 && args.reference.is_finite()) {
        return Err(CliError::Usage(format!("--reference must be > 0, got {}", args.reference)));
    }
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let dir = ctx.output_dir(&["jnd.json", "trials.csv", "manifest.json"])?;
    let reference = kind.sign() * args.reference;
    let limits = ctx.config.observer.limits();

    let mut runs = Vec::new();
    let mut log = ctx.csv_preamble();
    log.push_str("run,trial,delta,correct,reversal,step,direction\n");
    let mut observer_summary = None;
    for k in 0..args.runs {
        let seed = ctx.provenance.seed.wrapping_add(k);
        let (mut obs, summary) =
            build_observer(&args.observer, ctx.config.observer.noise_sigma, seed)?;
        observer_summary = Some(summary);
        let run = run_staircase(reference, &mut obs, &limits)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        trial_rows(k as usize + 1, &run.state.history, &mut log);
        runs.push(JndRun {
            seed,
            converged: run.converged(),
            failure: run.failure.clone(),
            jnd: run.jnd,
            weber: run.weber,
            reversals: run.state.reversal_deltas.clone(),
            trials: run.state.trials(),
            proportion_correct: run.state.proportion_correct(),
        });
    }
    let webers: Vec<f64> = runs.iter().filter_map(|r| r.weber).collect();
    let failed = runs.iter().filter(|r| !r.converged).count();
    let summary = JndSummary {
        provenance: ctx.provenance.clone(),
        side: side.letter().to_string(),
        stretch_type: kind.to_string(),
        reference,
        observer: observer_summary.expect("at least one run"),
        mean_weber: (!webers.is_empty()).then(|| webers.iter().sum::<f64>() / webers.len() as f64),
        failed_runs: failed,
        runs,
    };
    let json = to_json(&summary);
    print!("{json}");
    if let Some(dir) = dir {
        write_file(&dir, "jnd.json", json.as_bytes())?;
        write_file(&dir, "trials.csv", log.as_bytes())?;
        let mut manifest = RunManifest::new(ctx, "jnd");
        manifest.files = vec!["jnd.json".into(), "trials.csv".into(), "manifest.json".into()];
        write_file(&dir, "manifest.json", to_json(&manifest).as_bytes())?;
    }
    if failed > 0 {
        return Err(CliError::Runtime(format!(
            "{failed} of {} staircase run(s) did not converge",
            summary.runs.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ConfusionSummary {
    pub provenance: Provenance,
    pub session: u8,
    pub reps: u32,
    pub amplitude: f64,
    pub observer: ObserverSummary,
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u32>>,
    pub row_sums: Vec<u32>,
    pub accuracy: f64,
}

pub fn run_confusion(
    ctx: &Context,
    args: &ConfusionArgs,
) -> Result<(ConfusionMatrix, ObserverSummary), CliError> {
    let session = Session::from_number(args.session).map_err(|e| CliError::Usage(e.to_string()))?;
    let (mut obs, summary) = build_observer(
        &args.observer,
        ctx.config.observer.channel_sigma,
        ctx.provenance.seed,
    )?;
    let stimuli = session.stimuli(ctx.config.observer.amplitude);
    let m = confusion_experiment(&stimuli, args.reps, &mut obs)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((m, summary))
}

pub fn cmd_confusion(ctx: &Context, args: &ConfusionArgs) -> Result<(), CliError> {
    let dir = ctx.output_dir(&["confusion.json", "manifest.json"])?;
    let (m, observer) = run_confusion(ctx, args)?;
    let summary = ConfusionSummary {
        provenance: ctx.provenance.clone(),
        session: args.session,
        reps: args.reps,
        amplitude: ctx.config.observer.amplitude,
        observer,
        row_sums: m.row_sums(),
        accuracy: m.accuracy(),
        labels: m.labels.clone(),
        counts: m.counts.clone(),
    };
    print!("{m}");
    println!("accuracy {:.4} ({} / {})", m.accuracy(), m.trace(), m.total());
    if let Some(dir) = dir {
        write_file(&dir, "confusion.json", to_json(&summary).as_bytes())?;
        let mut manifest = RunManifest::new(ctx, "confusion");
        manifest.files = vec!["confusion.json".into(), "manifest.json".into()];
        write_file(&dir, "manifest.json", to_json(&manifest).as_bytes())?;
    }
    Ok(())
}
