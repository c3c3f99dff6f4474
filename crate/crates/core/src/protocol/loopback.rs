//! In-memory host-to-device link: frames are encoded, pushed through a byte
//! pipe that may corrupt data, decoded, and applied to a simulated device.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::frame::{encode_frame, CommandFrame, DecodeError, Decoder, Payload, ProtocolError};
use crate::device::{DeviceError, QuadRow, QuadSim, SimDevice, SqueezerRow, SqueezerSim};
use crate::squeeze::SqueezeCommand;

/// Single-producer, single-consumer byte pipe with optional corruption.
#[derive(Debug)]
pub struct Transport {
    queue: VecDeque<u8>,
    corruption: Option<(f64, ChaCha8Rng)>,
    pub bytes_written: u64,
    pub bytes_corrupted: u64,
}

impl Transport {
    pub fn clean() -> Self {
        Transport {
            queue: VecDeque::new(),
            corruption: None,
            bytes_written: 0,
            bytes_corrupted: 0,
        }
    }

    /// Each byte is replaced, with probability `byte_rate`, by XOR with a
    /// random non-zero mask.
    pub fn noisy(byte_rate: f64, seed: u64) -> Self {
        Transport {
            corruption: Some((byte_rate.clamp(0.0, 1.0), ChaCha8Rng::seed_from_u64(seed))),
            ..Transport::clean()
        }
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            let mut b = b;
            if let Some((rate, rng)) = self.corruption.as_mut() {
                if rng.random_bool(*rate) {
                    b ^= rng.random_range(1..=255u8);
                    self.bytes_corrupted += 1;
                }
            }
            self.queue.push_back(b);
        }
        self.bytes_written += bytes.len() as u64;
    }

    /// Takes up to `max` bytes.
    pub fn read(&mut self, max: usize) -> Vec<u8> {
        let n = max.min(self.queue.len());
        self.queue.drain(..n).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

/// Device side of the link.
pub trait Endpoint {
    type Row;
    fn apply(&mut self, frame: &CommandFrame) -> Result<Self::Row, LinkError>;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinkError {
    #[error("frame for {0} sent to the wrong device")]
    WrongDevice(&'static str),
    #[error("device rejected command: {0}")]
    Device(String),
}

/// QuadStretcher endpoint; each frame advances the device by `frame_dt`.
#[derive(Debug, Clone)]
pub struct QuadEndpoint {
    pub sim: QuadSim,
    pub frame_dt: f64,
}

impl From<DeviceError> for LinkError {
    fn from(e: DeviceError) -> Self {
        LinkError::Device(e.to_string())
    }
}

impl Endpoint for QuadEndpoint {
    type Row = QuadRow;

    fn apply(&mut self, frame: &CommandFrame) -> Result<QuadRow, LinkError> {
        let t = self.sim.state.sim_time + self.frame_dt;
        let target = frame
            .to_stretch_frame(t)
            .ok_or(LinkError::WrongDevice(frame.device().name()))?;
        Ok(self.sim.step(&target, self.frame_dt)?)
    }
}

/// Squeezer endpoint; each frame holds its setpoint for `steps_per_frame`
/// control cycles and reports the last.
#[derive(Debug, Clone)]
pub struct SqueezerEndpoint {
    pub sim: SqueezerSim,
    pub steps_per_frame: u32,
}

impl Endpoint for SqueezerEndpoint {
    type Row = SqueezerRow;

    fn apply(&mut self, frame: &CommandFrame) -> Result<SqueezerRow, LinkError> {
        let Payload::Squeeze(_) = frame.payload else {
            return Err(LinkError::WrongDevice(frame.device().name()));
        };
        let contraction = frame.signals_mm()[0];
        let dt = self.sim.params.control_period();
        let mut row = None;
        for _ in 0..self.steps_per_frame.max(1) {
            let cmd = SqueezeCommand {
                contraction,
                timestamp: self.sim.state.sim_time,
            };
            row = Some(self.sim.step(&cmd, dt)?);
        }
        Ok(row.expect("at least one step"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinkEvent<R> {
    Applied { frame: CommandFrame, row: R },
    SequenceGap { expected: u8, got: u8 },
    Decode(DecodeError),
    Rejected { frame: CommandFrame, error: LinkError },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LinkStats {
    pub frames_sent: u64,
    pub bytes_sent: u64,
    pub bytes_corrupted: u64,
    pub frames_applied: u64,
    pub frames_rejected: u64,
    /// Frames discarded after being framed: checksum and range failures.
    pub dropped_frames: u64,
    pub checksum_errors: u64,
    pub range_errors: u64,
    pub sync_errors: u64,
    pub skipped_bytes: u64,
    pub unknown_device: u64,
    pub truncated: u64,
    pub sequence_gaps: u64,
}

impl LinkStats {
    pub fn record_decode_error(&mut self, e: &DecodeError) {
        match e {
            DecodeError::BadSync { skipped } => {
                self.sync_errors += 1;
                self.skipped_bytes += *skipped as u64;
            }
            DecodeError::UnknownDevice(_) => {
                self.unknown_device += 1;
                self.skipped_bytes += 1;
            }
            DecodeError::Checksum { .. } => {
                self.checksum_errors += 1;
                self.dropped_frames += 1;
            }
            DecodeError::Range(_) => {
                self.range_errors += 1;
                self.dropped_frames += 1;
            }
            DecodeError::Truncated { .. } => self.truncated += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkTrace<R> {
    pub events: Vec<LinkEvent<R>>,
    pub stats: LinkStats,
}

impl<R> LinkTrace<R> {
    pub fn applied(&self) -> impl Iterator<Item = (&CommandFrame, &R)> {
        self.events.iter().filter_map(|e| match e {
            LinkEvent::Applied { frame, row } => Some((frame, row)),
            _ => None,
        })
    }
}

/// Bytes moved from transport to decoder per read; smaller than a frame so
/// partial reads are exercised.
pub const READ_CHUNK: usize = 5;

/// Sends `frames` through `transport` and applies what decodes to `endpoint`.
/// Frames with a sequence gap are still applied.
pub fn loopback_session<E: Endpoint>(
    frames: &[CommandFrame],
    transport: &mut Transport,
    endpoint: &mut E,
) -> Result<LinkTrace<E::Row>, ProtocolError> {
    let mut stats = LinkStats::default();
    let mut events = Vec::new();
    let mut decoder = Decoder::new();
    let mut last_seq: Option<u8> = None;

    let mut handle = |item: Result<CommandFrame, DecodeError>,
                      stats: &mut LinkStats,
                      events: &mut Vec<LinkEvent<E::Row>>| match item {
        Err(e) => {
            stats.record_decode_error(&e);
            events.push(LinkEvent::Decode(e));
        }
        Ok(frame) => {
            if let Some(prev) = last_seq {
                let expected = prev.wrapping_add(1);
                if frame.seq != expected {
                    stats.sequence_gaps += 1;
                    events.push(LinkEvent::SequenceGap {
                        expected,
                        got: frame.seq,
                    });
                }
            }
            last_seq = Some(frame.seq);
            match endpoint.apply(&frame) {
                Ok(row) => {
                    stats.frames_applied += 1;
                    events.push(LinkEvent::Applied { frame, row });
                }
                Err(error) => {
                    stats.frames_rejected += 1;
                    events.push(LinkEvent::Rejected { frame, error });
                }
            }
        }
    };

    for frame in frames {
        let bytes = encode_frame(frame)?;
        stats.frames_sent += 1;
        transport.write(&bytes);
        while !transport.is_empty() {
            decoder.push(&transport.read(READ_CHUNK));
            while let Some(item) = decoder.next_frame() {
                handle(item, &mut stats, &mut events);
            }
        }
    }
    if let Some(e) = decoder.finish() {
        handle(Err(e), &mut stats, &mut events);
    }
    stats.bytes_sent = transport.bytes_written;
    stats.bytes_corrupted = transport.bytes_corrupted;
    Ok(LinkTrace { events, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::PidGains;
    use crate::model::{default_quad_params, SqueezerParams, StretchFrame};

    fn quad_frames(n: usize) -> Vec<CommandFrame> {
        (0..n)
            .map(|i| {
                let s = 8.6 * ((i as f64) * 0.1).sin();
                CommandFrame::quad(i as u8, &StretchFrame::new([s, -s, s / 2.0, 0.0], 0.0)).unwrap()
            })
            .collect()
    }

    fn quad_endpoint() -> QuadEndpoint {
        QuadEndpoint {
            sim: QuadSim::new(default_quad_params()),
            frame_dt: 0.01,
        }
    }

    #[test]
    fn clean_link_applies_everything() {
        let frames = quad_frames(600);
        let trace = loopback_session(&frames, &mut Transport::clean(), &mut quad_endpoint()).unwrap();
        assert_eq!(trace.stats.frames_applied, 600);
        assert_eq!(trace.stats.sequence_gaps, 0);
        assert_eq!(trace.stats.bytes_sent, 600 * 12);
        let decoded: Vec<CommandFrame> = trace.applied().map(|(f, _)| *f).collect();
        assert_eq!(decoded, frames);
        // Positions follow targets under the slew limit.
        let (_, last) = trace.applied().last().unwrap();
        assert_eq!(last.position, last.target);
    }

    #[test]
    fn corrupted_link_accounts_for_every_drop() {
        let frames = quad_frames(2000);
        let mut transport = Transport::noisy(0.01, 99);
        let trace = loopback_session(&frames, &mut transport, &mut quad_endpoint()).unwrap();
        let s = &trace.stats;
        assert!(s.bytes_corrupted > 0);
        assert!(s.checksum_errors > 0);
        assert_eq!(s.dropped_frames, s.checksum_errors + s.range_errors);
        assert!(s.frames_applied < 2000);
        assert!(s.sequence_gaps > 0);
        // A one-byte checksum can miss compensating multi-byte damage, so
        // only require that almost everything applied was actually sent.
        let foreign = trace.applied().filter(|(f, _)| !frames.contains(f)).count();
        assert!(foreign <= 2, "{foreign}");
    }

    #[test]
    fn squeezer_link() {
        let frames: Vec<_> = (0..50u8)
            .map(|i| CommandFrame::squeeze(i, 5.0).unwrap())
            .collect();
        let mut ep = SqueezerEndpoint {
            sim: SqueezerSim::new(SqueezerParams::default(), PidGains::REFERENCE),
            steps_per_frame: 10,
        };
        let trace = loopback_session(&frames, &mut Transport::clean(), &mut ep).unwrap();
        assert_eq!(trace.stats.frames_applied, 50);
        let (_, row) = trace.applied().last().unwrap();
        assert!((row.contraction - 5.0).abs() < 0.05, "{}", row.contraction);
    }

    #[test]
    fn wrong_device_is_rejected() {
        let frames = [CommandFrame::squeeze(0, 1.0).unwrap()];
        let trace = loopback_session(&frames, &mut Transport::clean(), &mut quad_endpoint()).unwrap();
        assert_eq!(trace.stats.frames_rejected, 1);
        assert!(matches!(trace.events[0], LinkEvent::Rejected { .. }));
    }
}
