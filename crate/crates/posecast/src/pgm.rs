//! PGM codec (binary P5, plus ASCII P2 read support) and the numbered
//! frame-sequence directory convention.
//!
//! A capture session is a directory of `frame_000001.pgm`, `frame_000002.pgm`,
//! ... processed in ascending filename order.

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::frame::Frame;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("bad magic: expected P5 or P2, found {found:?}")]
    BadMagic { found: String },
    #[error("header field '{field}' missing or malformed")]
    BadHeader { field: &'static str },
    #[error("maxval {maxval} exceeds 255")]
    MaxvalTooLarge { maxval: u64 },
    #[error("pixel data truncated: expected {expected} samples, found {got}")]
    TruncatedData { expected: usize, got: usize },
    #[error("sample value {value} exceeds maxval {maxval}")]
    SampleOutOfRange { value: u64, maxval: u64 },
    #[error("invalid frame: {0}")]
    Frame(#[from] crate::frame::FrameError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Header token reader: skips whitespace and `#` comment lines.
struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn skip_filler(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_filler();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            if self.bytes[self.pos] == b'#' {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, field: &'static str) -> Result<u64, PgmError> {
        let tok = self.token().ok_or(PgmError::BadHeader { field })?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PgmError::BadHeader { field })
    }
}

/// Decode a binary (P5) or ASCII (P2) PGM image with maxval <= 255.
pub fn read_pgm(bytes: &[u8]) -> Result<Frame, PgmError> {
    let mut toks = Tokens::new(bytes);
    let magic = toks.token().ok_or(PgmError::BadMagic {
        found: String::new(),
    })?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(PgmError::BadMagic {
                found: String::from_utf8_lossy(other).into_owned(),
            })
        }
    };

    let width = toks.number("width")?;
    let height = toks.number("height")?;
    let maxval = toks.number("maxval")?;
    if maxval > 255 {
        return Err(PgmError::MaxvalTooLarge { maxval });
    }
    if maxval == 0 || width == 0 || height == 0 || width > u32::MAX as u64 || height > u32::MAX as u64
    {
        return Err(PgmError::BadHeader {
            field: if maxval == 0 { "maxval" } else { "width" },
        });
    }
    let expected = (width * height) as usize;

    let data = if binary {
        // A single whitespace byte separates the header from the payload.
        let payload = &bytes[(toks.pos + 1).min(bytes.len())..];
        if payload.len() < expected {
            return Err(PgmError::TruncatedData {
                expected,
                got: payload.len(),
            });
        }
        payload[..expected].to_vec()
    } else {
        let mut data = Vec::with_capacity(expected);
        for _ in 0..expected {
            let v = match toks.number("sample") {
                Ok(v) => v,
                Err(_) => {
                    return Err(PgmError::TruncatedData {
                        expected,
                        got: data.len(),
                    })
                }
            };
            if v > maxval {
                return Err(PgmError::SampleOutOfRange { value: v, maxval });
            }
            data.push(v as u8);
        }
        data
    };

    Ok(Frame::new(width as u32, height as u32, data)?)
}

/// Encode as binary P5, maxval 255, single-whitespace separators.
pub fn write_pgm(frame: &Frame) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", frame.width(), frame.height());
    let mut out = Vec::with_capacity(header.len() + frame.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(frame.data());
    out
}

pub fn read_pgm_file(path: &Path) -> Result<Frame, PgmError> {
    read_pgm(&std::fs::read(path)?)
}

pub fn write_pgm_file(path: &Path, frame: &Frame) -> Result<(), PgmError> {
    Ok(std::fs::write(path, write_pgm(frame))?)
}

/// Canonical name of the `index`-th frame of a sequence (1-based).
pub fn sequence_file_name(index: usize) -> String {
    format!("frame_{index:06}.pgm")
}

/// All `*.pgm` files of a sequence directory in ascending filename order.
pub fn list_sequence(dir: &Path) -> Result<Vec<PathBuf>, io::Error> {
    let mut frames: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    frames.sort();
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_minimal_p5() {
        let bytes = b"P5 2 2 255 \x00\xff\x0a\x14";
        let f = read_pgm(bytes).unwrap();
        assert_eq!((f.width(), f.height()), (2, 2));
        assert_eq!(f.data(), &[0, 255, 10, 20]);
    }

    #[test]
    fn decodes_p2_with_comments() {
        let bytes = b"P2\n# a comment\n3 1\n# another\n255\n7 0 200\n";
        let f = read_pgm(bytes).unwrap();
        assert_eq!(f.data(), &[7, 0, 200]);
    }

    #[test]
    fn minimal_write_is_exact() {
        let f = Frame::new(1, 1, vec![0]).unwrap();
        assert_eq!(write_pgm(&f), b"P5\n1 1\n255\n\x00");
    }

    #[test]
    fn payload_size_is_exact_for_vga() {
        let f = Frame::filled(640, 480, 7);
        let bytes = write_pgm(&f);
        let header_len = b"P5\n640 480\n255\n".len();
        assert_eq!(bytes.len() - header_len, 307_200);
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let bytes = b"P5 2 2 255 \x00\x01\x02";
        match read_pgm(bytes) {
            Err(PgmError::TruncatedData { expected: 4, got: 3 }) => {}
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_bad_maxval_are_named() {
        assert!(matches!(
            read_pgm(b"P6 1 1 255 abc"),
            Err(PgmError::BadMagic { .. })
        ));
        assert!(matches!(
            read_pgm(b"P5 1 1 65535 ab"),
            Err(PgmError::MaxvalTooLarge { maxval: 65535 })
        ));
    }

    #[test]
    fn sequence_names_are_zero_padded() {
        assert_eq!(sequence_file_name(1), "frame_000001.pgm");
        assert_eq!(sequence_file_name(123456), "frame_123456.pgm");
    }

    proptest! {
        #[test]
        fn roundtrip_is_identity(
            w in 1u32..40,
            h in 1u32..40,
            seed in any::<u64>(),
        ) {
            let n = (w * h) as usize;
            let mut state = seed;
            let data: Vec<u8> = (0..n)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (state >> 33) as u8
                })
                .collect();
            let f = Frame::new(w, h, data).unwrap();
            let back = read_pgm(&write_pgm(&f)).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
