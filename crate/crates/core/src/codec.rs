//! Little-endian framing shared by the dataset and checkpoint files: bounded
//! reads and a CRC32 trailer over everything before it.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("truncated input: wanted {wanted} bytes at offset {offset}, {available} left")]
    Truncated {
        offset: usize,
        wanted: usize,
        available: usize,
    },
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },
}

pub(crate) fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

/// Checks the magic and CRC trailer; returns the body between them.
pub(crate) fn open_frame<'a>(bytes: &'a [u8], magic: &'static str) -> Result<&'a [u8], CodecError> {
    let m = magic.as_bytes();
    if bytes.len() < m.len() + 4 {
        return Err(CodecError::Truncated {
            offset: 0,
            wanted: m.len() + 4,
            available: bytes.len(),
        });
    }
    if &bytes[..m.len()] != m {
        return Err(CodecError::BadMagic { expected: magic });
    }
    let (payload, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    let computed = crc32(payload);
    if stored != computed {
        return Err(CodecError::Checksum { stored, computed });
    }
    Ok(&payload[m.len()..])
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if n > self.remaining() {
            return Err(CodecError::Truncated {
                offset: self.pos,
                wanted: n,
                available: self.remaining(),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    pub fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    /// u32 length prefix followed by UTF-8.
    pub fn string(&mut self, what: &'static str) -> Result<&'a str, CodecError> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        std::str::from_utf8(raw).map_err(|e| CodecError::Malformed {
            what,
            detail: e.to_string(),
        })
    }
}

#[derive(Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn with_magic(magic: &str) -> Self {
        Self {
            buf: magic.as_bytes().to_vec(),
        }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    /// Appends the CRC32 trailer.
    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32(&self.buf);
        self.u32(crc);
        self.buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip_and_corruption() {
        let mut w = Writer::with_magic("TEST");
        w.u16(7);
        w.string("hello");
        w.f64(-1.5);
        let bytes = w.finish();
        let body = open_frame(&bytes, "TEST").unwrap();
        let mut r = Reader::new(body);
        assert_eq!(r.u16().unwrap(), 7);
        assert_eq!(r.string("s").unwrap(), "hello");
        assert_eq!(r.f64().unwrap(), -1.5);
        assert_eq!(r.remaining(), 0);
        assert!(matches!(r.u8(), Err(CodecError::Truncated { .. })));

        let mut bad = bytes.clone();
        bad[6] ^= 0x40;
        assert!(matches!(
            open_frame(&bad, "TEST"),
            Err(CodecError::Checksum { .. })
        ));
        assert!(matches!(
            open_frame(&bytes, "NOPE"),
            Err(CodecError::BadMagic { .. })
        ));
        assert!(matches!(
            open_frame(&bytes[..5], "TEST"),
            Err(CodecError::Truncated { .. })
        ));
    }
}
