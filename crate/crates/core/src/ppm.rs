//! Binary PPM (P6) frame I/O, maxval 255 only.
//!
//! Writing always emits the canonical header `P6\n<w> <h>\n255\n`, so
//! store(load(p)) is byte-identical for canonically written files.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::isc::Frame;

#[derive(Debug, Error)]
pub enum PpmError {
    #[error("UnsupportedFormat: {0}")]
    UnsupportedFormat(String),
    #[error("MalformedHeader: {0}")]
    MalformedHeader(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Serialize a frame as canonical P6 bytes.
pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.samples());
    out
}

/// Parse P6 bytes. Header tokens may be separated by any whitespace and
/// `#` comments; exactly one whitespace byte separates the maxval from the
/// sample data.
pub fn decode_frame(bytes: &[u8]) -> Result<Frame, PpmError> {
    if bytes.len() < 2 {
        return Err(PpmError::MalformedHeader("file too short".into()));
    }
    let magic = &bytes[..2];
    if magic != b"P6" {
        let shown = String::from_utf8_lossy(magic).into_owned();
        return Err(PpmError::UnsupportedFormat(format!(
            "magic {shown:?}, only P6 supported"
        )));
    }
    let mut pos = 2;
    let next_token = |pos: &mut usize| -> Result<u32, PpmError> {
        // skip whitespace and comments
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                break;
            }
        }
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
            *pos += 1;
        }
        if start == *pos {
            return Err(PpmError::MalformedHeader("expected integer token".into()));
        }
        std::str::from_utf8(&bytes[start..*pos])
            .unwrap()
            .parse::<u32>()
            .map_err(|e| PpmError::MalformedHeader(e.to_string()))
    };
    let width = next_token(&mut pos)?;
    let height = next_token(&mut pos)?;
    let maxval = next_token(&mut pos)?;
    if maxval != 255 {
        return Err(PpmError::UnsupportedFormat(format!(
            "maxval {maxval}, only 255 supported"
        )));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(PpmError::MalformedHeader(
            "missing whitespace after maxval".into(),
        ));
    }
    pos += 1;
    let expected = width as usize * height as usize * 3;
    let data = &bytes[pos..];
    if data.len() != expected {
        return Err(PpmError::MalformedHeader(format!(
            "expected {expected} sample bytes, got {}",
            data.len()
        )));
    }
    Frame::new(width, height, data.to_vec())
        .map_err(|e| PpmError::MalformedHeader(e.to_string()))
}

pub fn store_frame_ppm(frame: &Frame, path: &Path) -> Result<(), PpmError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_frame(frame))?;
    Ok(())
}

pub fn load_frame_ppm(path: &Path) -> Result<Frame, PpmError> {
    decode_frame(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_bytes_for_tiny_white_frame() {
        let f = Frame::uniform(2, 1, [255, 255, 255]);
        let bytes = encode_frame(&f);
        let header = b"P6\n2 1\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0xFF; 6]);
        assert_eq!(bytes.len(), header.len() + 6);
    }

    #[test]
    fn roundtrip_identity() {
        let mut samples = Vec::new();
        for i in 0..5 * 3 * 3 {
            samples.push((i * 37 % 256) as u8);
        }
        let f = Frame::new(5, 3, samples).unwrap();
        let decoded = decode_frame(&encode_frame(&f)).unwrap();
        assert_eq!(decoded, f);
        // store(load(p)) byte-identical for canonical headers
        assert_eq!(encode_frame(&decoded), encode_frame(&f));
    }

    #[test]
    fn p3_rejected() {
        let err = decode_frame(b"P3\n1 1\n255\n1 2 3\n").unwrap_err();
        assert!(matches!(err, PpmError::UnsupportedFormat(_)));
    }

    #[test]
    fn wrong_maxval_rejected() {
        let err = decode_frame(b"P6\n1 1\n65535\n\0\0\0\0\0\0").unwrap_err();
        assert!(matches!(err, PpmError::UnsupportedFormat(_)));
    }

    #[test]
    fn malformed_header_rejected() {
        assert!(matches!(
            decode_frame(b"P6\nabc\n"),
            Err(PpmError::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_frame(b"P6\n2 1\n255\n\xff\xff"),
            Err(PpmError::MalformedHeader(_))
        ));
    }

    #[test]
    fn comments_in_header_accepted() {
        let f = decode_frame(b"P6\n# made by hand\n1 1\n255\n\x01\x02\x03").unwrap();
        assert_eq!(f.pixel(0, 0), [1, 2, 3]);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ppm");
        let f = Frame::uniform(4, 4, [9, 8, 7]);
        store_frame_ppm(&f, &path).unwrap();
        assert_eq!(load_frame_ppm(&path).unwrap(), f);
    }
}
