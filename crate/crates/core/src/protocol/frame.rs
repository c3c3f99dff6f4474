use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::StretchFrame;

pub const SYNC: u8 = 0xA5;
/// Signal limit carried by QuadStretcher frames, centi-millimeters.
pub const QUAD_LIMIT_CMM: i16 = 1100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DeviceId {
    QuadStretcher = 1,
    Squeezer = 2,
}

impl DeviceId {
    pub fn from_byte(b: u8) -> Option<DeviceId> {
        match b {
            1 => Some(DeviceId::QuadStretcher),
            2 => Some(DeviceId::Squeezer),
            _ => None,
        }
    }

    /// Total encoded length: sync, id, seq, payload, checksum.
    pub fn frame_len(self) -> usize {
        match self {
            DeviceId::QuadStretcher => 3 + 8 + 1,
            DeviceId::Squeezer => 3 + 2 + 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DeviceId::QuadStretcher => "quadstretcher",
            DeviceId::Squeezer => "squeezer",
        }
    }
}

/// Signals in centi-millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    /// One signal per stretch unit, D, R, V, L.
    Quad([i16; 4]),
    /// String contraction.
    Squeeze(i16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommandFrame {
    pub seq: u8,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("signal {0} cmm outside the encodable range")]
    Range(i32),
    #[error("servo angle {0:.2}° beyond ±90°")]
    MechanicalRange(f64),
    #[error("PWM count {0} outside 12-bit range")]
    PwmRange(i64),
    #[error("invalid pinion radius {0} mm")]
    BadRadius(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("skipped {skipped} byte(s) while searching for sync")]
    BadSync { skipped: usize },
    #[error("unknown device id {0:#04x}")]
    UnknownDevice(u8),
    #[error("checksum mismatch (frame sums to {residue:#04x}, expected 0x00)")]
    Checksum { residue: u8 },
    #[error("decoded signal {0} cmm out of range")]
    Range(i16),
    #[error("truncated frame: {have} of {need} bytes")]
    Truncated { have: usize, need: usize },
}

/// Two's-complement checksum byte making the whole frame sum to zero.
pub fn checksum(bytes: &[u8]) -> u8 {
    0u8.wrapping_sub(bytes.iter().fold(0u8, |a, &b| a.wrapping_add(b)))
}

/// Millimeters to centi-millimeters, rounded to nearest.
pub fn mm_to_cmm(mm: f64) -> Result<i16, ProtocolError> {
    let v = (mm * 100.0).round();
    if !(v >= i16::MIN as f64 && v <= i16::MAX as f64) {
        return Err(ProtocolError::Range(v.clamp(i32::MIN as f64, i32::MAX as f64) as i32));
    }
    Ok(v as i16)
}

pub fn cmm_to_mm(cmm: i16) -> f64 {
    cmm as f64 / 100.0
}

impl CommandFrame {
    pub fn quad(seq: u8, frame: &StretchFrame) -> Result<Self, ProtocolError> {
        let mut signals = [0i16; 4];
        for (out, &mm) in signals.iter_mut().zip(&frame.signals) {
            *out = mm_to_cmm(mm)?;
        }
        let f = CommandFrame {
            seq,
            payload: Payload::Quad(signals),
        };
        f.check()?;
        Ok(f)
    }

    pub fn squeeze(seq: u8, contraction_mm: f64) -> Result<Self, ProtocolError> {
        let f = CommandFrame {
            seq,
            payload: Payload::Squeeze(mm_to_cmm(contraction_mm)?),
        };
        f.check()?;
        Ok(f)
    }

    pub fn device(&self) -> DeviceId {
        match self.payload {
            Payload::Quad(_) => DeviceId::QuadStretcher,
            Payload::Squeeze(_) => DeviceId::Squeezer,
        }
    }

    fn check(&self) -> Result<(), ProtocolError> {
        match self.payload {
            Payload::Quad(s) => {
                if let Some(&bad) = s.iter().find(|v| v.abs() > QUAD_LIMIT_CMM) {
                    return Err(ProtocolError::Range(bad as i32));
                }
            }
            Payload::Squeeze(c) => {
                if c < 0 {
                    return Err(ProtocolError::Range(c as i32));
                }
            }
        }
        Ok(())
    }

    /// Payload signals in millimeters.
    pub fn signals_mm(&self) -> Vec<f64> {
        match self.payload {
            Payload::Quad(s) => s.iter().map(|&v| cmm_to_mm(v)).collect(),
            Payload::Squeeze(c) => vec![cmm_to_mm(c)],
        }
    }

    pub fn to_stretch_frame(&self, timestamp: f64) -> Option<StretchFrame> {
        match self.payload {
            Payload::Quad(s) => Some(StretchFrame::new(s.map(cmm_to_mm), timestamp)),
            Payload::Squeeze(_) => None,
        }
    }
}

/// Serializes a frame: `A5 id seq payload(i16 LE...) checksum`.
pub fn encode_frame(frame: &CommandFrame) -> Result<Vec<u8>, ProtocolError> {
    frame.check()?;
    let id = frame.device();
    let mut out = Vec::with_capacity(id.frame_len());
    out.extend([SYNC, id as u8, frame.seq]);
    match frame.payload {
        Payload::Quad(s) => s.iter().for_each(|v| out.extend(v.to_le_bytes())),
        Payload::Squeeze(c) => out.extend(c.to_le_bytes()),
    }
    out.push(checksum(&out));
    Ok(out)
}

/// Parses a complete, checksum-verified frame body. `bytes` must hold
/// exactly one frame of the length its id implies.
fn parse_body(bytes: &[u8], id: DeviceId) -> Result<CommandFrame, DecodeError> {
    let word = |i: usize| i16::from_le_bytes([bytes[3 + 2 * i], bytes[4 + 2 * i]]);
    let payload = match id {
        DeviceId::QuadStretcher => {
            let s = [word(0), word(1), word(2), word(3)];
            if let Some(&bad) = s.iter().find(|v| v.abs() > QUAD_LIMIT_CMM) {
                return Err(DecodeError::Range(bad));
            }
            Payload::Quad(s)
        }
        DeviceId::Squeezer => {
            let c = word(0);
            if c < 0 {
                return Err(DecodeError::Range(c));
            }
            Payload::Squeeze(c)
        }
    };
    Ok(CommandFrame {
        seq: bytes[2],
        payload,
    })
}

/// Decodes one frame from the start of `bytes`, returning it with the number
/// of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(CommandFrame, usize), DecodeError> {
    if bytes.first() != Some(&SYNC) {
        let skipped = bytes.iter().position(|&b| b == SYNC).unwrap_or(bytes.len());
        return Err(DecodeError::BadSync {
            skipped: skipped.max(1).min(bytes.len()),
        });
    }
    if bytes.len() < 2 {
        return Err(DecodeError::Truncated {
            have: bytes.len(),
            need: 2,
        });
    }
    let id = DeviceId::from_byte(bytes[1]).ok_or(DecodeError::UnknownDevice(bytes[1]))?;
    let len = id.frame_len();
    if bytes.len() < len {
        return Err(DecodeError::Truncated {
            have: bytes.len(),
            need: len,
        });
    }
    let body = &bytes[..len];
    let residue = body.iter().fold(0u8, |a, &b| a.wrapping_add(b));
    if residue != 0 {
        return Err(DecodeError::Checksum { residue });
    }
    parse_body(body, id).map(|f| (f, len))
}

/// Streaming decoder. Bytes are pushed as they arrive; complete frames and
/// errors come out in order. After a checksum or range failure the whole
/// frame is discarded; after a bad sync or unknown id the decoder skips
/// forward to the next sync byte.
#[derive(Debug, Default)]
pub struct Decoder {
    buf: Vec<u8>,
    pos: usize,
}

impl Decoder {
    pub fn new() -> Self {
        Decoder::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.pos > 4096 && self.pos * 2 > self.buf.len() {
            self.buf.drain(..self.pos);
            self.pos = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    pub fn pending(&self) -> usize {
        self.buf.len() - self.pos
    }

    /// Next frame or error, or `None` when more bytes are needed.
    pub fn next_frame(&mut self) -> Option<Result<CommandFrame, DecodeError>> {
        let rest = &self.buf[self.pos..];
        if rest.is_empty() {
            return None;
        }
        if rest[0] != SYNC {
            let skipped = rest.iter().position(|&b| b == SYNC).unwrap_or(rest.len());
            self.pos += skipped;
            return Some(Err(DecodeError::BadSync { skipped }));
        }
        if rest.len() < 2 {
            return None;
        }
        let Some(id) = DeviceId::from_byte(rest[1]) else {
            let b = rest[1];
            self.pos += 1;
            return Some(Err(DecodeError::UnknownDevice(b)));
        };
        let len = id.frame_len();
        if rest.len() < len {
            return None;
        }
        let result = decode_frame(&rest[..len]).map(|(f, _)| f);
        self.pos += len;
        Some(result)
    }

    /// Reports any buffered partial frame as truncated and clears it.
    pub fn finish(&mut self) -> Option<DecodeError> {
        let have = self.pending();
        if have == 0 {
            return None;
        }
        let need = self.buf[self.pos..]
            .get(1)
            .and_then(|&b| DeviceId::from_byte(b))
            .map_or(2, DeviceId::frame_len);
        self.buf.clear();
        self.pos = 0;
        Some(DecodeError::Truncated { have, need })
    }
}

impl Iterator for Decoder {
    type Item = Result<CommandFrame, DecodeError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame()
    }
}

/// Decodes a complete byte dump, including a trailing truncation error.
pub fn decode_all(bytes: &[u8]) -> Vec<Result<CommandFrame, DecodeError>> {
    let mut d = Decoder::new();
    d.push(bytes);
    let mut out: Vec<_> = d.by_ref().collect();
    if let Some(e) = d.finish() {
        out.push(Err(e));
    }
    out
}

fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl fmt::Display for CommandFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "device={} seq={}", self.device().name(), self.seq)?;
        match self.payload {
            Payload::Quad(s) => {
                for (letter, v) in ['D', 'R', 'V', 'L'].iter().zip(s) {
                    write!(f, " {letter}={:+.2}", cmm_to_mm(v))?;
                }
                f.write_str(" mm")
            }
            Payload::Squeeze(c) => write!(f, " contraction={:.2} mm", cmm_to_mm(c)),
        }
    }
}

/// Human-readable dump: one hex line per frame followed by decoded fields,
/// or the decode error for damaged regions.
pub fn annotate_dump(bytes: &[u8]) -> String {
    let mut out = String::new();
    let mut offset = 0usize;
    let mut index = 0usize;
    while offset < bytes.len() {
        let rest = &bytes[offset..];
        let (consumed, note) = match decode_frame(rest) {
            Ok((frame, len)) => {
                let neutral = if frame.signals_mm().iter().all(|&v| v == 0.0) {
                    " (neutral)"
                } else {
                    ""
                };
                let note = format!(
                    "  sync=0xa5 {frame} checksum={:#04x} ok{neutral}",
                    rest[len - 1]
                );
                (len, note)
            }
            Err(e) => {
                let len = match &e {
                    DecodeError::BadSync { skipped } => *skipped,
                    DecodeError::UnknownDevice(_) => 1,
                    DecodeError::Truncated { have, .. } => *have,
                    DecodeError::Checksum { .. } | DecodeError::Range(_) => {
                        DeviceId::from_byte(rest[1]).map_or(1, DeviceId::frame_len)
                    }
                };
                (len.max(1), format!("  error: {e}"))
            }
        };
        let _ = writeln!(
            out,
            "frame {index} @{offset:#06x}: {}",
            hex(&rest[..consumed])
        );
        let _ = writeln!(out, "{note}");
        offset += consumed;
        index += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn neutral() -> CommandFrame {
        CommandFrame {
            seq: 0,
            payload: Payload::Quad([0; 4]),
        }
    }

    #[test]
    fn neutral_frame_bytes() {
        let bytes = encode_frame(&neutral()).unwrap();
        assert_eq!(bytes, [0xA5, 0x01, 0x00, 0, 0, 0, 0, 0, 0, 0, 0, 0x5A]);
        let seq7 = encode_frame(&CommandFrame { seq: 7, ..neutral() }).unwrap();
        assert_eq!(seq7[11], 0u8.wrapping_sub(0xA5 + 0x01 + 7));
    }

    #[test]
    fn known_frame_layout() {
        let f = CommandFrame::quad(
            0x10,
            &StretchFrame::new([-3.44, 8.6, 0.0, -11.0], 0.0),
        )
        .unwrap();
        let bytes = encode_frame(&f).unwrap();
        // -344 = 0xfea8, 860 = 0x035c, -1100 = 0xfbb4, little-endian.
        assert_eq!(
            &bytes[..11],
            &[0xA5, 0x01, 0x10, 0xA8, 0xFE, 0x5C, 0x03, 0x00, 0x00, 0xB4, 0xFB]
        );
        assert_eq!(bytes.iter().fold(0u8, |a, &b| a.wrapping_add(b)), 0);
        let sq = encode_frame(&CommandFrame::squeeze(3, 4.0).unwrap()).unwrap();
        assert_eq!(sq.len(), 6);
        assert_eq!(&sq[..5], &[0xA5, 0x02, 0x03, 0x90, 0x01]);
    }

    #[test]
    fn encode_range_errors() {
        assert!(CommandFrame::quad(0, &StretchFrame::new([11.01, 0.0, 0.0, 0.0], 0.0)).is_err());
        assert!(CommandFrame::squeeze(0, -0.5).is_err());
        let bad = CommandFrame {
            seq: 0,
            payload: Payload::Quad([0, 1200, 0, 0]),
        };
        assert_eq!(encode_frame(&bad), Err(ProtocolError::Range(1200)));
        assert!(mm_to_cmm(1e9).is_err());
        assert!(mm_to_cmm(f64::NAN).is_err());
    }

    #[test]
    fn every_single_bit_flip_is_detected() {
        let frames = [
            CommandFrame::quad(200, &StretchFrame::new([1.0, -2.5, 8.6, 0.33], 0.0)).unwrap(),
            CommandFrame::squeeze(9, 7.25).unwrap(),
        ];
        for frame in frames {
            let clean = encode_frame(&frame).unwrap();
            for byte in 0..clean.len() {
                for bit in 0..8 {
                    let mut bad = clean.clone();
                    bad[byte] ^= 1 << bit;
                    let res = decode_frame(&bad);
                    assert!(res.is_err(), "flip byte {byte} bit {bit} accepted");
                    if (2..clean.len()).contains(&byte) {
                        assert!(
                            matches!(res, Err(DecodeError::Checksum { .. })),
                            "byte {byte} bit {bit}: {res:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn decoder_handles_partial_input() {
        let bytes = encode_frame(&neutral()).unwrap();
        let mut d = Decoder::new();
        d.push(&bytes[..5]);
        assert!(d.next_frame().is_none());
        d.push(&bytes[5..]);
        assert_eq!(d.next_frame(), Some(Ok(neutral())));
        assert!(d.next_frame().is_none());
        d.push(&bytes[..3]);
        assert_eq!(d.finish(), Some(DecodeError::Truncated { have: 3, need: 12 }));
    }

    #[test]
    fn decoder_resynchronizes() {
        let good = encode_frame(&neutral()).unwrap();
        let mut stream = vec![0x00, 0x13, 0x37];
        stream.extend(&good);
        let mut corrupt = good.clone();
        corrupt[5] ^= 0x40;
        stream.extend(&corrupt);
        stream.extend([SYNC, 0x09]);
        stream.extend(&good);
        let out = decode_all(&stream);
        assert_eq!(
            out,
            vec![
                Err(DecodeError::BadSync { skipped: 3 }),
                Ok(neutral()),
                Err(DecodeError::Checksum { residue: 0x40 }),
                Err(DecodeError::UnknownDevice(0x09)),
                Err(DecodeError::BadSync { skipped: 1 }),
                Ok(neutral()),
            ]
        );
    }

    #[test]
    fn checksum_valid_but_out_of_range() {
        let mut bytes = vec![SYNC, 0x01, 0x00];
        bytes.extend(2000i16.to_le_bytes());
        bytes.extend([0; 6]);
        bytes.push(checksum(&bytes));
        assert_eq!(decode_frame(&bytes), Err(DecodeError::Range(2000)));
    }

    #[test]
    fn annotated_neutral_frame() {
        let text = annotate_dump(&encode_frame(&neutral()).unwrap());
        assert_eq!(
            text,
            "frame 0 @0x0000: a5 01 00 00 00 00 00 00 00 00 00 5a\n  \
             sync=0xa5 device=quadstretcher seq=0 D=+0.00 R=+0.00 V=+0.00 L=+0.00 mm \
             checksum=0x5a ok (neutral)\n"
        );
    }

    fn any_frame() -> impl Strategy<Value = CommandFrame> {
        prop_oneof![
            (any::<u8>(), proptest::array::uniform4(-1100i16..=1100)).prop_map(|(seq, s)| {
                CommandFrame {
                    seq,
                    payload: Payload::Quad(s),
                }
            }),
            (any::<u8>(), 0i16..=i16::MAX).prop_map(|(seq, c)| CommandFrame {
                seq,
                payload: Payload::Squeeze(c),
            }),
        ]
    }

    proptest! {
        #[test]
        fn round_trip(frames in proptest::collection::vec(any_frame(), 1..20)) {
            let mut stream = Vec::new();
            for f in &frames {
                let bytes = encode_frame(f).unwrap();
                prop_assert_eq!(bytes.len(), f.device().frame_len());
                stream.extend(bytes);
            }
            let decoded: Vec<_> = decode_all(&stream).into_iter().map(Result::unwrap).collect();
            prop_assert_eq!(decoded, frames);
        }

        #[test]
        fn random_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let mut consumed = 0usize;
            let mut d = Decoder::new();
            d.push(&bytes);
            let before = d.pending();
            for item in d.by_ref() {
                consumed += match item {
                    Ok(f) => f.device().frame_len(),
                    Err(DecodeError::BadSync { skipped }) => skipped,
                    Err(DecodeError::UnknownDevice(_)) => 1,
                    Err(DecodeError::Checksum { .. }) | Err(DecodeError::Range(_)) => 0,
                    Err(DecodeError::Truncated { .. }) => 0,
                };
            }
            prop_assert!(consumed <= before);
            let _ = annotate_dump(&bytes);
        }
    }
}
