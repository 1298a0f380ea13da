//! Payload framing for the over-the-screen bit stream.
//!
//! A framed link is `preamble (0xAA) | length byte | payload | CRC-8`, sent
//! MSB-first per byte. The CRC covers the length and payload bytes and
//! detects every single-bit corruption.

use thiserror::Error;

/// Fixed 10101010 preamble byte.
pub const PREAMBLE: u8 = 0xAA;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FramingError {
    #[error("PayloadTooLong: {0} bytes, maximum 255")]
    PayloadTooLong(usize),
    #[error("EmptyPayload")]
    EmptyPayload,
    #[error("NonPrintablePayload: byte 0x{0:02x}")]
    NonPrintablePayload(u8),
    #[error("NoPreamble")]
    NoPreamble,
    #[error("LengthOutOfRange: {0}")]
    LengthOutOfRange(u8),
    #[error("CrcMismatch: expected 0x{expected:02x}, got 0x{got:02x}")]
    CrcMismatch { expected: u8, got: u8 },
    #[error("TruncatedFrame")]
    TruncatedFrame,
}

/// CRC-8, polynomial 0x07, init 0x00, no reflection, no final xor.
pub fn crc8(data: &[u8]) -> u8 {
    let mut crc: u8 = 0x00;
    for &byte in data {
        crc ^= byte;
        for _ in 0..8 {
            crc = if crc & 0x80 != 0 {
                (crc << 1) ^ 0x07
            } else {
                crc << 1
            };
        }
    }
    crc
}

fn is_printable(b: u8) -> bool {
    (0x20..=0x7e).contains(&b)
}

fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    let mut bits = Vec::with_capacity(bytes.len() * 8);
    for &b in bytes {
        for i in (0..8).rev() {
            bits.push(b >> i & 1 == 1);
        }
    }
    bits
}

fn bits_to_byte(bits: &[bool]) -> u8 {
    bits.iter().fold(0u8, |acc, &b| acc << 1 | b as u8)
}

/// Frame a printable link text into the transmit bit sequence.
pub fn frame_payload(text: &str) -> Result<Vec<bool>, FramingError> {
    let payload = text.as_bytes();
    if payload.is_empty() {
        return Err(FramingError::EmptyPayload);
    }
    if payload.len() > 255 {
        return Err(FramingError::PayloadTooLong(payload.len()));
    }
    if let Some(&bad) = payload.iter().find(|&&b| !is_printable(b)) {
        return Err(FramingError::NonPrintablePayload(bad));
    }
    let mut bytes = Vec::with_capacity(payload.len() + 3);
    bytes.push(PREAMBLE);
    bytes.push(payload.len() as u8);
    bytes.extend_from_slice(payload);
    bytes.push(crc8(&bytes[1..]));
    Ok(bytes_to_bits(&bytes))
}

/// Scan for the preamble at byte-aligned offsets, validate length and CRC,
/// and return the payload text.
pub fn deframe_payload(bits: &[bool]) -> Result<String, FramingError> {
    let byte_count = bits.len() / 8;
    let bytes: Vec<u8> = (0..byte_count)
        .map(|i| bits_to_byte(&bits[i * 8..i * 8 + 8]))
        .collect();
    let start = bytes
        .iter()
        .position(|&b| b == PREAMBLE)
        .ok_or(FramingError::NoPreamble)?;
    let rest = &bytes[start + 1..];
    let &length = rest.first().ok_or(FramingError::TruncatedFrame)?;
    if length == 0 {
        return Err(FramingError::LengthOutOfRange(length));
    }
    let need = length as usize + 2; // length byte + payload + crc
    if rest.len() < need {
        return Err(FramingError::TruncatedFrame);
    }
    let expected = crc8(&rest[..=length as usize]);
    let got = rest[length as usize + 1];
    if expected != got {
        return Err(FramingError::CrcMismatch { expected, got });
    }
    let payload = &rest[1..=length as usize];
    if let Some(&bad) = payload.iter().find(|&&b| !is_printable(b)) {
        return Err(FramingError::NonPrintablePayload(bad));
    }
    Ok(String::from_utf8(payload.to_vec()).expect("printable ASCII is valid UTF-8"))
}
