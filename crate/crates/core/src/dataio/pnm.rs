//! Netpbm decoding and encoding for the grayscale (P2/P5) and colour (P3/P6)
//! variants with 8-bit samples.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channels {
    Gray,
    Rgb,
}

impl Channels {
    pub fn count(self) -> usize {
        match self {
            Channels::Gray => 1,
            Channels::Rgb => 3,
        }
    }
}

/// Decoded 8-bit raster; RGB data is interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: Channels,
    pub data: Vec<u8>,
}

impl Raster {
    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::with_channels(width, height, Channels::Gray, data)
    }

    pub fn rgb(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::with_channels(width, height, Channels::Rgb, data)
    }

    fn with_channels(width: usize, height: usize, channels: Channels, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * channels.count() {
            return Err(Error::shape(
                "Raster",
                format!(
                    "{width}x{height}x{} needs {} samples, got {}",
                    channels.count(),
                    width * height * channels.count(),
                    data.len()
                ),
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }
}

pub fn decode_image(path: &Path) -> Result<Raster> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Pnm {
            offset: self.pos,
            msg: msg.into(),
        }
    }

    /// Skips whitespace and `#` comments.
    fn skip_blank(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<u32> {
        self.skip_blank();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.bytes.get(self.pos) {
                None => self.err(format!("unexpected end of data while reading {what}")),
                Some(&b) => self.err(format!("expected {what}, found byte 0x{b:02x}")),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Pnm {
                offset: start,
                msg: format!("{what} out of range"),
            })
    }
}

/// Decodes a P2, P3, P5 or P6 image. Samples with a maxval below 255 are
/// rescaled to the full 8-bit range.
pub fn decode_pnm(bytes: &[u8]) -> Result<Raster> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(cur.err("missing netpbm magic"));
    }
    let (channels, binary) = match bytes[1] {
        b'2' => (Channels::Gray, false),
        b'3' => (Channels::Rgb, false),
        b'5' => (Channels::Gray, true),
        b'6' => (Channels::Rgb, true),
        other => {
            return Err(Error::Pnm {
                offset: 1,
                msg: format!("unsupported netpbm variant P{}", other as char),
            })
        }
    };
    cur.pos = 2;
    let width = cur.read_uint("width")? as usize;
    let height = cur.read_uint("height")? as usize;
    let maxval_at = cur.pos;
    let maxval = cur.read_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::Pnm {
            offset: maxval_at,
            msg: format!("maxval {maxval} not in 1..=255"),
        });
    }
    let n = width * height * channels.count();
    let mut data = Vec::with_capacity(n);
    if binary {
        // Exactly one whitespace byte separates the header from the payload.
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(cur.err("expected whitespace after maxval")),
        }
        let available = bytes.len() - cur.pos;
        if available < n {
            return Err(Error::Pnm {
                offset: bytes.len(),
                msg: format!(
                    "truncated payload: expected {n} bytes from offset {}, found {available}",
                    cur.pos
                ),
            });
        }
        for &b in &bytes[cur.pos..cur.pos + n] {
            if u32::from(b) > maxval {
                return Err(cur.err(format!("sample {b} exceeds maxval {maxval}")));
            }
            data.push(b);
        }
    } else {
        for _ in 0..n {
            let at = cur.pos;
            let v = cur.read_uint("sample")?;
            if v > maxval {
                return Err(Error::Pnm {
                    offset: at,
                    msg: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            data.push(v as u8);
        }
    }
    if maxval != 255 {
        for v in &mut data {
            *v = ((u32::from(*v) * 255 + maxval / 2) / maxval) as u8;
        }
    }
    Raster::with_channels(width, height, channels, data)
}

fn magic(channels: Channels, binary: bool) -> &'static str {
    match (channels, binary) {
        (Channels::Gray, false) => "P2",
        (Channels::Rgb, false) => "P3",
        (Channels::Gray, true) => "P5",
        (Channels::Rgb, true) => "P6",
    }
}

/// Encodes as P5/P6.
pub fn encode_binary(r: &Raster) -> Vec<u8> {
    let mut out = format!("{}\n{} {}\n255\n", magic(r.channels, true), r.width, r.height).into_bytes();
    out.extend_from_slice(&r.data);
    out
}

/// Encodes as P2/P3, one raster row per line.
pub fn encode_ascii(r: &Raster) -> Vec<u8> {
    let mut out = format!("{}\n{} {}\n255\n", magic(r.channels, false), r.width, r.height);
    let per_row = r.width * r.channels.count();
    for row in r.data.chunks(per_row) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_checkerboard() {
        let r = decode_pnm(b"P2 2 2 255\n0 255 255 0\n").unwrap();
        assert_eq!((r.width, r.height, r.channels), (2, 2, Channels::Gray));
        assert_eq!(r.data, vec![0, 255, 255, 0]);
    }

    #[test]
    fn p5_matches_p2() {
        let ascii = decode_pnm(b"P2 2 2 255\n0 255 255 0\n").unwrap();
        let binary = decode_pnm(&encode_binary(&ascii)).unwrap();
        assert_eq!(ascii, binary);
        let mut hand = b"P5\n2 2\n255\n".to_vec();
        hand.extend_from_slice(&[0, 255, 255, 0]);
        assert_eq!(decode_pnm(&hand).unwrap(), ascii);
    }

    #[test]
    fn truncated_p5_reports_offset() {
        let mut bytes = b"P5\n4 4\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        match decode_pnm(&bytes) {
            Err(Error::Pnm { offset, msg }) => {
                assert_eq!(offset, bytes.len());
                assert!(msg.contains("truncated"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_truncated_ascii() {
        assert!(matches!(decode_pnm(b"GIF89a"), Err(Error::Pnm { offset: 0, .. })));
        assert!(matches!(decode_pnm(b"P4 1 1 1"), Err(Error::Pnm { offset: 1, .. })));
        match decode_pnm(b"P2 2 2 255 1 2 3") {
            Err(Error::Pnm { offset, .. }) => assert_eq!(offset, 16),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comments_and_maxval_rescale() {
        let r = decode_pnm(b"P2\n# a comment\n2 1 # trailing\n15\n0 15\n").unwrap();
        assert_eq!(r.data, vec![0, 255]);
        assert!(decode_pnm(b"P2 1 1 65535 3").is_err());
        assert!(decode_pnm(b"P2 1 1 10 11").is_err());
    }

    #[test]
    fn rgb_round_trip() {
        let r = Raster::rgb(2, 1, vec![255, 0, 0, 10, 20, 30]).unwrap();
        assert_eq!(decode_pnm(&encode_binary(&r)).unwrap(), r);
        assert_eq!(decode_pnm(&encode_ascii(&r)).unwrap(), r);
    }
}
