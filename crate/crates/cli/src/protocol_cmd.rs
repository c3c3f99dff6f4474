//! `protocol dump | replay | fuzz`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use quadstretch::protocol::{annotate_dump, decode_all, DecodeError, Decoder, SYNC};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::artifact::{to_json, write_file, Context, Provenance, RunManifest};
use crate::render::link_csv;
use crate::{CliError, DeviceKind, ProtocolCommand};

fn read_dump(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct FuzzReport {
    pub buffers: u64,
    pub bytes: u64,
    pub frames: u64,
    pub bad_sync: u64,
    pub unknown_device: u64,
    pub checksum: u64,
    pub range: u64,
    pub truncated: u64,
    pub panics: u64,
}

/// Decodes `count` random buffers of up to `max_len` bytes. Half of them
/// start with a sync byte and a valid device id so the checks past framing
/// get exercised too.
pub fn fuzz_decoder(count: u64, max_len: usize, seed: u64) -> FuzzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FuzzReport::default();
    let mut buf = Vec::with_capacity(max_len);
    for _ in 0..count {
        let len = rng.random_range(0..=max_len);
        buf.clear();
        buf.extend((0..len).map(|_| rng.random::<u8>()));
        if len >= 2 && rng.random_bool(0.5) {
            buf[0] = SYNC;
            buf[1] = rng.random_range(1..=2);
        }
        report.buffers += 1;
        report.bytes += len as u64;
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            let mut d = Decoder::new();
            d.push(&buf);
            let mut items: Vec<_> = d.by_ref().collect();
            items.extend(d.finish().map(Err));
            items
        }));
        match outcome {
            Err(_) => report.panics += 1,
            Ok(items) => {
                for item in items {
                    match item {
                        Ok(_) => report.frames += 1,
                        Err(DecodeError::BadSync { .. }) => report.bad_sync += 1,
                        Err(DecodeError::UnknownDevice(_)) => report.unknown_device += 1,
                        Err(DecodeError::Checksum { .. }) => report.checksum += 1,
                        Err(DecodeError::Range(_)) => report.range += 1,
                        Err(DecodeError::Truncated { .. }) => report.truncated += 1,
                    }
                }
            }
        }
    }
    report
}

#[derive(Serialize)]
struct FuzzSummary {
    provenance: Provenance,
    max_len: usize,
    report: FuzzReport,
}

pub fn cmd_protocol(ctx: &Context, cmd: &ProtocolCommand) -> Result<(), CliError> {
    match cmd {
        ProtocolCommand::Dump { file } => {
            let bytes = read_dump(file)?;
            print!("{}", annotate_dump(&bytes));
            let errors = decode_all(&bytes).iter().filter(|r| r.is_err()).count();
            if errors > 0 {
                return Err(CliError::Input(format!(
                    "{}: {errors} damaged region(s)",
                    file.display()
                )));
            }
            Ok(())
        }
        ProtocolCommand::Replay { file, device } => replay(ctx, file, *device),
        ProtocolCommand::Fuzz { count, max_len } => {
            let dir = ctx.output_dir(&["fuzz.json"])?;
            let report = fuzz_decoder(*count, *max_len, ctx.provenance.seed);
            let json = to_json(&FuzzSummary {
                provenance: ctx.provenance.clone(),
                max_len: *max_len,
                report: report.clone(),
            });
            print!("{json}");
            if let Some(dir) = dir {
                write_file(&dir, "fuzz.json", json.as_bytes())?;
            }
            if report.panics > 0 {
                return Err(CliError::Runtime(format!("decoder panicked {} time(s)", report.panics)));
            }
            Ok(())
        }
    }
}

fn replay(ctx: &Context, file: &Path, device: DeviceKind) -> Result<(), CliError> {
    let dir = ctx.output_dir(&["link.csv", "manifest.json"])?;
    let bytes = read_dump(file)?;
    let mut frames = Vec::new();
    let mut errors = 0usize;
    for item in decode_all(&bytes) {
        match item {
            Ok(f) => frames.push(f),
            Err(e) => {
                errors += 1;
                eprintln!("{}: {e}", file.display());
            }
        }
    }
    let (csv, stats) = link_csv(&ctx.config, device, &frames, &ctx.csv_preamble())?;
    match &dir {
        Some(dir) => {
            write_file(dir, "link.csv", csv.as_bytes())?;
            let mut manifest = RunManifest::new(ctx, "protocol replay");
            manifest.inputs.push(file.display().to_string());
            manifest.device = Some(device.name().into());
            manifest.files = vec!["link.csv".into(), "manifest.json".into()];
            write_file(dir, "manifest.json", to_json(&manifest).as_bytes())?;
            println!(
                "replayed {} frame(s), {} sequence gap(s)",
                stats.frames_applied, stats.sequence_gaps
            );
        }
        None => print!("{csv}"),
    }
    if errors > 0 {
        return Err(CliError::Input(format!("{errors} damaged region(s) in dump")));
    }
    Ok(())
}
