//! Compact binary pose message: 38 bytes per frame carrying twelve joint
//! angles as signed centidegrees, a sequence number, a session timestamp
//! and a CRC. At 30 frames per second the stream costs exactly 1140
//! application-layer bytes per second.
//!
//! Layout, little-endian:
//!
//! ```text
//! offset size field
//! 0      2    magic 0x4B 0x44
//! 2      1    version (1)
//! 3      1    flags (bit0 left arm occluded, bit1 right arm occluded)
//! 4      4    sequence number, u32
//! 8      4    timestamp, milliseconds since session start, u32
//! 12     24   12 x i16 angle slots, centidegrees
//! 36     2    CRC-16/CCITT (poly 0x1021, init 0xFFFF) over bytes 0..36
//! ```

mod session;

pub use session::{
    serve_session, DeliveredFrame, PoseSender, ReceiverSession, SessionStats, StatsSnapshot,
};

use thiserror::Error;

use crate::num::Real;
use crate::pose3d::{JointAngleFrame, SLOT_COUNT, SLOT_NAMES};

pub const MAGIC: [u8; 2] = [0x4B, 0x44];
pub const VERSION: u8 = 1;
pub const MESSAGE_SIZE: usize = 38;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("angle slot {slot} ({name}) = {degrees} degrees does not fit 16-bit centidegrees")]
    AngleOutOfRange {
        slot: usize,
        name: &'static str,
        degrees: f64,
    },
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unknown protocol version {0}")]
    UnknownVersion(u8),
    #[error("CRC mismatch: message corrupted")]
    CrcMismatch,
    #[error("session closed by peer")]
    SessionClosed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// CRC-16/CCITT-FALSE: polynomial 0x1021, init 0xFFFF, no reflection, no
/// final xor. Check value: crc16("123456789") == 0x29B1.
pub fn crc16(bytes: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &b in bytes {
        crc ^= (b as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ 0x1021
            } else {
                crc << 1
            };
        }
    }
    crc
}

/// One decoded wire message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoseMessage {
    pub flags: u8,
    pub seq: u32,
    pub timestamp_ms: u32,
    pub angles_centideg: [i16; SLOT_COUNT],
}

impl PoseMessage {
    pub fn left_occluded(&self) -> bool {
        self.flags & 0x01 != 0
    }

    pub fn right_occluded(&self) -> bool {
        self.flags & 0x02 != 0
    }

    pub fn to_joint_frame<T: Real>(&self) -> JointAngleFrame<T> {
        let mut frame = JointAngleFrame::zero();
        for (slot, &cd) in frame.slots.iter_mut().zip(&self.angles_centideg) {
            *slot = T::of(cd as f64 / 100.0);
        }
        frame.left_occluded = self.left_occluded();
        frame.right_occluded = self.right_occluded();
        frame
    }
}

/// Centidegree conversion, round half away from zero.
fn to_centideg(slot: usize, degrees: f64) -> Result<i16, WireError> {
    let cd = (degrees * 100.0).round();
    if !(-32767.0..=32767.0).contains(&cd) {
        return Err(WireError::AngleOutOfRange {
            slot,
            name: SLOT_NAMES[slot],
            degrees,
        });
    }
    Ok(cd as i16)
}

/// Encode one frame as a 38-byte message.
pub fn encode<T: Real>(
    frame: &JointAngleFrame<T>,
    seq: u32,
    timestamp_ms: u32,
) -> Result<[u8; MESSAGE_SIZE], WireError> {
    let mut out = [0u8; MESSAGE_SIZE];
    out[0..2].copy_from_slice(&MAGIC);
    out[2] = VERSION;
    out[3] = u8::from(frame.left_occluded) | (u8::from(frame.right_occluded) << 1);
    out[4..8].copy_from_slice(&seq.to_le_bytes());
    out[8..12].copy_from_slice(&timestamp_ms.to_le_bytes());
    for (i, v) in frame.slots.iter().enumerate() {
        let cd = to_centideg(i, v.as_f64())?;
        out[12 + 2 * i..14 + 2 * i].copy_from_slice(&cd.to_le_bytes());
    }
    let crc = crc16(&out[..36]);
    out[36..38].copy_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Outcome of a decode attempt on a byte buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoded {
    /// A message was consumed: exactly [`MESSAGE_SIZE`] bytes.
    Message(PoseMessage),
    /// Fewer than 38 bytes available; nothing consumed.
    NeedMore,
}

/// Validate and decode the message at the head of `buf`.
pub fn decode(buf: &[u8]) -> Result<Decoded, WireError> {
    if buf.len() < MESSAGE_SIZE {
        return Ok(Decoded::NeedMore);
    }
    if buf[0..2] != MAGIC {
        return Err(WireError::BadMagic);
    }
    if buf[2] != VERSION {
        return Err(WireError::UnknownVersion(buf[2]));
    }
    let stored = u16::from_le_bytes([buf[36], buf[37]]);
    if crc16(&buf[..36]) != stored {
        return Err(WireError::CrcMismatch);
    }
    let mut angles = [0i16; SLOT_COUNT];
    for (i, a) in angles.iter_mut().enumerate() {
        *a = i16::from_le_bytes([buf[12 + 2 * i], buf[13 + 2 * i]]);
    }
    Ok(Decoded::Message(PoseMessage {
        flags: buf[3],
        seq: u32::from_le_bytes([buf[4], buf[5], buf[6], buf[7]]),
        timestamp_ms: u32::from_le_bytes([buf[8], buf[9], buf[10], buf[11]]),
        angles_centideg: angles,
    }))
}

/// Streaming resynchronizer: feed arbitrary byte chunks in, pull intact
/// messages out. Corrupt stretches are skipped by scanning for the next
/// magic pair, so one bad message never desynchronizes the stream.
#[derive(Debug, Default)]
pub struct Deframer {
    buf: Vec<u8>,
    corrupt_events: u64,
    skipped_bytes: u64,
}

impl Deframer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn corrupt_events(&self) -> u64 {
        self.corrupt_events
    }

    pub fn skipped_bytes(&self) -> u64 {
        self.skipped_bytes
    }

    /// Next intact message, or None until more bytes arrive.
    pub fn next_message(&mut self) -> Option<PoseMessage> {
        loop {
            if self.buf.len() < MESSAGE_SIZE {
                return None;
            }
            match decode(&self.buf) {
                Ok(Decoded::Message(msg)) => {
                    self.buf.drain(..MESSAGE_SIZE);
                    return Some(msg);
                }
                Ok(Decoded::NeedMore) => return None,
                Err(_) => {
                    self.corrupt_events += 1;
                    // Resynchronize: drop up to the next candidate magic.
                    let skip = self.buf[1..]
                        .windows(2)
                        .position(|w| w == MAGIC)
                        .map(|p| p + 1)
                        .unwrap_or_else(|| {
                            // No magic ahead; keep a trailing half-magic.
                            if self.buf.last() == Some(&MAGIC[0]) {
                                self.buf.len() - 1
                            } else {
                                self.buf.len()
                            }
                        });
                    self.skipped_bytes += skip as u64;
                    self.buf.drain(..skip);
                }
            }
        }
    }
}
