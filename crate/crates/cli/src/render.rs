//! `render`: trajectory → scenario → renderer → device simulation.

use std::path::Path;

use quadstretch::config::Config;
use quadstretch::device::{
    run_realtime, write_quad_trace, write_squeezer_trace, QuadRow, QuadSim, SqueezerRow,
    SqueezerSim,
};
use quadstretch::model::{Side, StretchFrame};
use quadstretch::protocol::{
    encode_frame, loopback_session, CommandFrame, LinkEvent, LinkTrace, QuadEndpoint,
    SqueezerEndpoint, Transport,
};
use quadstretch::scenario::{
    interaction, parse_trajectory, HandSample, Interaction, ScenarioKind,
};
use quadstretch::squeeze::{render_force, render_value, SqueezeCommand};
use quadstretch::stretch::{render_1dof, render_3dof, RenderScheme1D, RenderScheme3D};

use crate::artifact::{f6, to_json, write_file, Context, RunManifest};
use crate::{CliError, DeviceKind, RenderArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    OneDof(RenderScheme1D),
    ThreeDof(RenderScheme3D),
    /// The Squeezer has a single rendering rule.
    Squeeze,
}

impl Scheme {
    pub fn resolve(
        kind: ScenarioKind,
        device: DeviceKind,
        flag: Option<&str>,
    ) -> Result<Scheme, CliError> {
        if device == DeviceKind::Squeezer {
            return match flag {
                None => Ok(Scheme::Squeeze),
                Some(_) => Err(CliError::Usage("--scheme applies to the quadstretcher only".into())),
            };
        }
        if kind.is_three_dof() {
            flag.map_or(Ok(RenderScheme3D::ContractTowardsForce), str::parse)
                .map(Scheme::ThreeDof)
                .map_err(|e| CliError::Usage(format!("{e} for 3-DoF scenario {kind}")))
        } else {
            flag.map_or(Ok(RenderScheme1D::AllContract), str::parse)
                .map(Scheme::OneDof)
                .map_err(|e| CliError::Usage(format!("{e} for 1-DoF scenario {kind}")))
        }
    }

    pub fn name(self) -> String {
        match self {
            Scheme::OneDof(s) => s.to_string(),
            Scheme::ThreeDof(s) => s.to_string(),
            Scheme::Squeeze => "squeeze".into(),
        }
    }
}

/// Columns of `samples.csv` and the rows under them.
pub struct SampleTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SampleTable {
    pub fn to_csv(&self, preamble: &str) -> String {
        let mut s = String::from(preamble);
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| f6(v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Long format: one `time,series,value` row per cell.
    pub fn to_long_csv(&self, preamble: &str) -> String {
        let mut s = String::from(preamble);
        s.push_str("time,series,value\n");
        for row in &self.rows {
            for (name, v) in self.columns.iter().zip(row).skip(1) {
                s.push_str(&format!("{},{name},{}\n", f6(row[0]), f6(*v)));
            }
        }
        s
    }
}

pub enum DeviceTrace {
    Quad(Vec<QuadRow>),
    Squeezer(Vec<SqueezerRow>),
}

pub struct RenderOutput {
    pub samples: SampleTable,
    pub trace: DeviceTrace,
    pub frames: Vec<CommandFrame>,
}

/// Loads a trajectory file. An empty file is an empty trajectory.
pub fn read_trajectory(path: &Path) -> Result<Vec<HandSample>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let blank = text
        .lines()
        .all(|l| l.trim().is_empty() || l.trim_start().starts_with('#'));
    if blank {
        return Ok(Vec::new());
    }
    parse_trajectory(text.as_bytes()).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn state_before<R>(rows: &[R], time: impl Fn(&R) -> f64, t: f64) -> Option<&R> {
    let n = rows.partition_point(|r| time(r) <= t + 1e-9);
    n.checked_sub(1).map(|i| &rows[i])
}

fn input_err(i: usize, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("sample {}: {e}", i + 1))
}

/// Runs the whole pipeline in memory.
pub fn render_pipeline(
    config: &Config,
    samples: &[HandSample],
    kind: ScenarioKind,
    scheme: Scheme,
) -> Result<RenderOutput, CliError> {
    let scenario = config.scenario(kind);
    let interactions = samples
        .iter()
        .enumerate()
        .map(|(i, s)| interaction(s, &scenario).map_err(|e| input_err(i, e)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut columns = vec!["time".to_string()];
    if kind.is_three_dof() {
        columns.extend(["force_x", "force_y", "force_z"].map(String::from));
    } else {
        columns.push("value".into());
    }
    let interaction_cells = |it: &Interaction| -> Vec<f64> {
        match *it {
            Interaction::OneDof(v) => vec![v],
            Interaction::ThreeDof(f) => f.to_array().to_vec(),
        }
    };

    let runtime = |e: &dyn std::fmt::Display| CliError::Runtime(e.to_string());
    match scheme {
        Scheme::Squeeze => {
            let cal = &config.calibration;
            let commands = samples
                .iter()
                .zip(&interactions)
                .enumerate()
                .map(|(i, (s, it))| {
                    let cmd = match *it {
                        Interaction::OneDof(v) => render_value(v, cal),
                        Interaction::ThreeDof(f) => render_force(f, cal),
                    };
                    cmd.map(|c| SqueezeCommand {
                        timestamp: s.t,
                        ..c
                    })
                    .map_err(|e| input_err(i, e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut sim = SqueezerSim::new(config.squeezer.clone(), config.pid);
            let rows = run_realtime(&commands, &mut sim, config.squeezer.pid_rate)
                .map_err(|e| runtime(&e))?;
            columns.extend(["setpoint", "contraction", "tension"].map(String::from));
            let table_rows = samples
                .iter()
                .zip(&interactions)
                .zip(&commands)
                .map(|((s, it), c)| {
                    let mut row = vec![s.t];
                    row.extend(interaction_cells(it));
                    let (contraction, tension) = state_before(&rows, |r| r.time, s.t)
                        .map_or((0.0, 0.0), |r| (r.contraction, r.tension));
                    row.extend([c.contraction, contraction, tension]);
                    row
                })
                .collect();
            let frames = commands
                .iter()
                .enumerate()
                .map(|(i, c)| CommandFrame::squeeze(i as u8, c.contraction).map_err(|e| runtime(&e)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(RenderOutput {
                samples: SampleTable {
                    columns,
                    rows: table_rows,
                },
                trace: DeviceTrace::Squeezer(rows),
                frames,
            })
        }
        Scheme::OneDof(_) | Scheme::ThreeDof(_) => {
            let commands = samples
                .iter()
                .zip(&interactions)
                .enumerate()
                .map(|(i, (s, it))| {
                    let frame = match (*it, scheme) {
                        (Interaction::OneDof(v), Scheme::OneDof(sc)) => {
                            render_1dof(v, sc, &config.quad)
                        }
                        (Interaction::ThreeDof(f), Scheme::ThreeDof(sc)) => {
                            render_3dof(f, sc, &config.quad)
                        }
                        _ => unreachable!("scheme resolved against scenario"),
                    };
                    frame
                        .map(|f| StretchFrame {
                            timestamp: s.t,
                            ..f
                        })
                        .map_err(|e| input_err(i, e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut sim = QuadSim::new(config.quad.clone());
            let rows =
                run_realtime(&commands, &mut sim, config.sim.quad_rate).map_err(|e| runtime(&e))?;
            columns.extend(Side::ALL.map(|s| format!("signal_{}", s.letter())));
            columns.extend(Side::ALL.map(|s| format!("position_{}", s.letter())));
            let table_rows = samples
                .iter()
                .zip(&interactions)
                .zip(&commands)
                .map(|((s, it), c)| {
                    let mut row = vec![s.t];
                    row.extend(interaction_cells(it));
                    row.extend(c.signals);
                    let pos = state_before(&rows, |r| r.time, s.t).map_or([0.0; 4], |r| r.position);
                    row.extend(pos);
                    row
                })
                .collect();
            let frames = commands
                .iter()
                .enumerate()
                .map(|(i, c)| CommandFrame::quad(i as u8, c).map_err(|e| runtime(&e)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(RenderOutput {
                samples: SampleTable {
                    columns,
                    rows: table_rows,
                },
                trace: DeviceTrace::Quad(rows),
                frames,
            })
        }
    }
}

pub fn trace_csv(preamble: &str, trace: &DeviceTrace) -> Result<String, CliError> {
    let mut buf = preamble.as_bytes().to_vec();
    match trace {
        DeviceTrace::Quad(rows) => write_quad_trace(&mut buf, rows),
        DeviceTrace::Squeezer(rows) => write_squeezer_trace(&mut buf, rows),
    }
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("ASCII CSV"))
}

pub fn frames_bytes(frames: &[CommandFrame]) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    for f in frames {
        out.extend(encode_frame(f).map_err(|e| CliError::Runtime(e.to_string()))?);
    }
    Ok(out)
}

/// Plays `frames` through a clean loopback link into a fresh device and
/// renders the applied rows as CSV.
pub fn link_csv(
    config: &Config,
    device: DeviceKind,
    frames: &[CommandFrame],
    preamble: &str,
) -> Result<(String, quadstretch::protocol::LinkStats), CliError> {
    let frame_dt = 1.0 / config.sim.frame_rate;
    let proto = |e: quadstretch::protocol::ProtocolError| CliError::Runtime(e.to_string());
    let mut buf = preamble.as_bytes().to_vec();
    let stats = match device {
        DeviceKind::Quadstretcher => {
            let mut ep = QuadEndpoint {
                sim: QuadSim::new(config.quad.clone()),
                frame_dt,
            };
            let trace = loopback_session(frames, &mut Transport::clean(), &mut ep).map_err(proto)?;
            let rows: Vec<QuadRow> = trace.applied().map(|(_, r)| r.clone()).collect();
            report_rejections(&trace)?;
            write_quad_trace(&mut buf, &rows).map_err(|e| CliError::Runtime(e.to_string()))?;
            trace.stats
        }
        DeviceKind::Squeezer => {
            let steps = (config.squeezer.pid_rate * frame_dt).round().max(1.0) as u32;
            let mut ep = SqueezerEndpoint {
                sim: SqueezerSim::new(config.squeezer.clone(), config.pid),
                steps_per_frame: steps,
            };
            let trace = loopback_session(frames, &mut Transport::clean(), &mut ep).map_err(proto)?;
            let rows: Vec<SqueezerRow> = trace.applied().map(|(_, r)| r.clone()).collect();
            report_rejections(&trace)?;
            write_squeezer_trace(&mut buf, &rows).map_err(|e| CliError::Runtime(e.to_string()))?;
            trace.stats
        }
    };
    Ok((String::from_utf8(buf).expect("ASCII CSV"), stats))
}

fn report_rejections<R>(trace: &LinkTrace<R>) -> Result<(), CliError> {
    for e in &trace.events {
        if let LinkEvent::Rejected { frame, error } = e {
            return Err(CliError::Input(format!("frame seq {}: {error}", frame.seq)));
        }
    }
    Ok(())
}

pub const RENDER_FILES: [&str; 6] = [
    "samples.csv",
    "trace.csv",
    "plot.csv",
    "frames.bin",
    "link.csv",
    "manifest.json",
];

pub fn cmd_render(ctx: &Context, args: &RenderArgs) -> Result<(), CliError> {
    let kind: ScenarioKind = args.scenario.parse().map_err(CliError::Usage)?;
    let scheme = Scheme::resolve(kind, args.device, args.scheme.as_deref())?;
    let dir = ctx.require_out(&RENDER_FILES)?;
    let samples = read_trajectory(&args.trajectory)?;
    let output = render_pipeline(&ctx.config, &samples, kind, scheme)?;

    let pre = ctx.csv_preamble();
    let header = format!(
        "{pre}# scenario: {kind}\n# device: {}\n# scheme: {}\n",
        args.device.name(),
        scheme.name()
    );
    write_file(&dir, "samples.csv", output.samples.to_csv(&header).as_bytes())?;
    write_file(&dir, "trace.csv", trace_csv(&header, &output.trace)?.as_bytes())?;
    write_file(&dir, "plot.csv", output.samples.to_long_csv(&header).as_bytes())?;
    write_file(&dir, "frames.bin", &frames_bytes(&output.frames)?)?;
    let (link, _) = link_csv(&ctx.config, args.device, &output.frames, &pre)?;
    write_file(&dir, "link.csv", link.as_bytes())?;

    let mut manifest = RunManifest::new(ctx, "render");
    manifest.inputs.push(args.trajectory.display().to_string());
    manifest.device = Some(args.device.name().into());
    manifest.scheme = Some(scheme.name());
    manifest.scenario = Some(kind.to_string());
    manifest.files = RENDER_FILES.map(String::from).to_vec();
    write_file(&dir, "manifest.json", to_json(&manifest).as_bytes())?;
    println!(
        "rendered {} samples ({} device steps) into {}",
        samples.len(),
        match &output.trace {
            DeviceTrace::Quad(r) => r.len(),
            DeviceTrace::Squeezer(r) => r.len(),
        },
        dir.display()
    );
    Ok(())
}
