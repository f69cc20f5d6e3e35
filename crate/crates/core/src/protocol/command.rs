//! `[0xA5, seq, token, crc8(bytes 0..3)]`, CRC-8 poly 0x07, init 0x00.

use thiserror::Error;

use crate::intent::Token;

pub const COMMAND_MAGIC: u8 = 0xA5;
pub const COMMAND_FRAME_LEN: usize = 4;

const CRC8_TABLE: [u8; 256] = build_crc8_table(0x07);

const fn build_crc8_table(poly: u8) -> [u8; 256] {
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x80 != 0 { (crc << 1) ^ poly } else { crc << 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

pub fn crc8(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0u8, |crc, &b| CRC8_TABLE[(crc ^ b) as usize])
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum CommandDecodeError {
    #[error("bad magic byte 0x{0:02x}")]
    BadMagic(u8),
    #[error("crc mismatch (expected 0x{expected:02x}, got 0x{actual:02x})")]
    BadCrc { expected: u8, actual: u8 },
    #[error("invalid token byte 0x{0:02x}")]
    InvalidToken(u8),
}

/// Encodes a token byte. Only `G`, `R` and `S` are accepted.
pub fn encode_command(token: u8, seq: u8) -> Result<[u8; 4], CommandDecodeError> {
    let token = Token::from_byte(token).ok_or(CommandDecodeError::InvalidToken(token))?;
    Ok(encode_token(token, seq))
}

pub fn encode_token(token: Token, seq: u8) -> [u8; 4] {
    let head = [COMMAND_MAGIC, seq, token.as_byte()];
    [head[0], head[1], head[2], crc8(&head)]
}

/// Decodes the first four bytes. `Ok(None)` means more bytes are needed.
pub fn decode_command(bytes: &[u8]) -> Result<Option<(Token, u8)>, CommandDecodeError> {
    if bytes.len() < COMMAND_FRAME_LEN {
        return Ok(None);
    }
    if bytes[0] != COMMAND_MAGIC {
        return Err(CommandDecodeError::BadMagic(bytes[0]));
    }
    let expected = crc8(&bytes[..3]);
    if bytes[3] != expected {
        return Err(CommandDecodeError::BadCrc {
            expected,
            actual: bytes[3],
        });
    }
    let token = Token::from_byte(bytes[2]).ok_or(CommandDecodeError::InvalidToken(bytes[2]))?;
    Ok(Some((token, bytes[1])))
}

/// Stamps outgoing commands with a wrapping sequence number.
#[derive(Debug, Clone, Default)]
pub struct CommandEncoder {
    next_seq: u8,
}

impl CommandEncoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn encode(&mut self, token: Token) -> [u8; 4] {
        let frame = encode_token(token, self.next_seq);
        self.next_seq = self.next_seq.wrapping_add(1);
        frame
    }

    pub fn next_seq(&self) -> u8 {
        self.next_seq
    }
}

/// Incremental decoder over a byte stream. On a bad frame it drops one byte
/// and rescans for the magic.
#[derive(Debug, Clone, Default)]
pub struct CommandDecoder {
    buf: Vec<u8>,
    errors: u64,
}

impl CommandDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) -> Vec<(Token, u8)> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        let mut start = 0;
        while self.buf.len() - start >= COMMAND_FRAME_LEN {
            match decode_command(&self.buf[start..]) {
                Ok(Some(frame)) => {
                    out.push(frame);
                    start += COMMAND_FRAME_LEN;
                }
                Ok(None) => break,
                Err(_) => {
                    self.errors += 1;
                    start += 1;
                    while start < self.buf.len() && self.buf[start] != COMMAND_MAGIC {
                        start += 1;
                    }
                }
            }
        }
        self.buf.drain(..start);
        out
    }

    /// Count of rejected frame candidates.
    pub fn errors(&self) -> u64 {
        self.errors
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bit-at-a-time CRC-8/0x07 with no table.
    fn crc8_bitwise(bytes: &[u8]) -> u8 {
        let mut crc = 0u8;
        for &b in bytes {
            crc ^= b;
            for _ in 0..8 {
                crc = if crc & 0x80 != 0 { (crc << 1) ^ 0x07 } else { crc << 1 };
            }
        }
        crc
    }

    #[test]
    fn crc_matches_bitwise_reference() {
        // CRC-8/SMBUS check value
        assert_eq!(crc8(b"123456789"), 0xF4);
        for a in 0..=255u8 {
            assert_eq!(crc8(&[a, 0x5A, 0x47]), crc8_bitwise(&[a, 0x5A, 0x47]));
        }
    }

    #[test]
    fn grip_seq_zero() {
        let f = encode_command(b'G', 0).unwrap();
        assert_eq!(&f[..3], &[0xA5, 0x00, 0x47]);
        assert_eq!(f[3], crc8_bitwise(&[0xA5, 0x00, 0x47]));
    }

    #[test]
    fn sequence_wraps() {
        let mut enc = CommandEncoder::new();
        for _ in 0..255 {
            enc.encode(Token::Stop);
        }
        assert_eq!(enc.encode(Token::Stop)[1], 0xFF);
        assert_eq!(enc.encode(Token::Stop)[1], 0x00);
    }

    #[test]
    fn invalid_token() {
        assert_eq!(encode_command(b'X', 0), Err(CommandDecodeError::InvalidToken(b'X')));
    }

    #[test]
    fn truncated_needs_more() {
        let f = encode_token(Token::Release, 9);
        assert_eq!(decode_command(&f[..3]), Ok(None));
        assert_eq!(decode_command(&f), Ok(Some((Token::Release, 9))));
    }

    #[test]
    fn errors_are_distinct() {
        let mut f = encode_token(Token::Grip, 1);
        f[0] = 0x00;
        assert!(matches!(decode_command(&f), Err(CommandDecodeError::BadMagic(0))));
        let mut f = encode_token(Token::Grip, 1);
        f[3] ^= 1;
        assert!(matches!(decode_command(&f), Err(CommandDecodeError::BadCrc { .. })));
        let head = [COMMAND_MAGIC, 1, b'Q'];
        let f = [head[0], head[1], head[2], crc8(&head)];
        assert_eq!(decode_command(&f), Err(CommandDecodeError::InvalidToken(b'Q')));
    }

    #[test]
    fn stream_decoder_resyncs() {
        let mut dec = CommandDecoder::new();
        let mut bytes = vec![0x00, 0x13];
        bytes.extend_from_slice(&encode_token(Token::Grip, 0));
        bytes.extend_from_slice(&[0xA5, 0x01]);
        bytes.extend_from_slice(&encode_token(Token::Stop, 1));
        let mut got = Vec::new();
        for b in &bytes {
            got.extend(dec.push(std::slice::from_ref(b)));
        }
        assert_eq!(got, vec![(Token::Grip, 0), (Token::Stop, 1)]);
        assert!(dec.errors() > 0);
    }
}
