//! Little-endian binary container shared by datasets and reconstructions.
//!
//! Layout: magic `BSD1`, a `u32` version word (low 16 bits: format version,
//! high 16 bits: record type), the record payload, then a CRC32 of every
//! preceding byte.

use num_complex::Complex64;

use crate::error::FormatError;

pub(crate) const MAGIC: [u8; 4] = *b"BSD1";
pub(crate) const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RecordType {
    Dataset = 0,
    Reconstruction = 1,
}

impl RecordType {
    fn version_word(self) -> u32 {
        ((self as u32) << 16) | FORMAT_VERSION
    }
}

pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(record: RecordType) -> Self {
        let mut enc = Encoder { buf: Vec::new() };
        enc.buf.extend_from_slice(&MAGIC);
        enc.u32(record.version_word());
        enc
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn c64(&mut self, v: Complex64) {
        self.f64(v.re);
        self.f64(v.im);
    }

    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

pub(crate) struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn open(buf: &'a [u8], record: RecordType) -> Result<Self, FormatError> {
        let mut dec = Decoder { buf, pos: 0 };
        let magic: [u8; 4] = dec.take(4)?.try_into().expect("four bytes");
        if magic != MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        let found = dec.u32()?;
        let expected = record.version_word();
        if found != expected {
            return Err(FormatError::VersionMismatch { found, expected });
        }
        Ok(dec)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let available = self.buf.len() - self.pos;
        if available < n {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    pub fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    pub fn c64(&mut self) -> Result<Complex64, FormatError> {
        Ok(Complex64::new(self.f64()?, self.f64()?))
    }

    /// Checks that exactly the checksum remains and that it matches.
    pub fn finish(mut self) -> Result<(), FormatError> {
        let body_end = self.pos;
        let stored = self.u32()?;
        let rest = self.buf.len() - self.pos;
        if rest != 0 {
            return Err(FormatError::TrailingBytes(rest));
        }
        let computed = crc32fast::hash(&self.buf[..body_end]);
        if stored != computed {
            return Err(FormatError::Checksum { stored, computed });
        }
        Ok(())
    }
}
