//! Bit-exact text encoding of `f64` vectors: little-endian bytes in base64.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("invalid base64: {0}")]
    Base64(String),
    #[error("byte length {0} is not a multiple of 8")]
    Length(usize),
}

pub fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_f64s(text: &str) -> Result<Vec<f64>, CodecError> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| CodecError::Base64(e.to_string()))?;
    if bytes.len() % 8 != 0 {
        return Err(CodecError::Length(bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let xs = [0.0, -0.0, 1.0 / 3.0, f64::MIN_POSITIVE, -1e300, f64::NAN];
        let back = decode_f64s(&encode_f64s(&xs)).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&xs));
        assert_eq!(encode_f64s(&[1.0]), "AAAAAAAA8D8=");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode_f64s("***").is_err());
        assert_eq!(decode_f64s("AAAA"), Err(CodecError::Length(3)));
    }
}
