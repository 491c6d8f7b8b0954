//! Little-endian primitives shared by the model and KNN file formats.
//!
//! Every file ends with a CRC-64/XZ checksum of all bytes before it.

use std::path::Path;

use crc::{Crc, CRC_64_XZ};

use crate::error::{CliError, CliResult};

const CHECKSUM: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

pub fn checksum(bytes: &[u8]) -> u64 {
    CHECKSUM.checksum(bytes)
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4], version: u32) -> Self {
        let mut w = Writer::default();
        w.buf.extend_from_slice(magic);
        w.u32(version);
        w
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32s(&mut self, vs: &[f32]) {
        self.buf.reserve(vs.len() * 4);
        vs.iter().for_each(|&v| self.f32(v));
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|&v| self.f64(v));
    }

    pub fn bytes(&mut self, vs: &[u8]) {
        self.buf.extend_from_slice(vs);
    }

    pub fn patch_u64(&mut self, at: usize, v: u64) {
        self.buf[at..at + 8].copy_from_slice(&v.to_le_bytes());
    }

    /// Appends the checksum and returns the finished file.
    pub fn finish(mut self) -> Vec<u8> {
        let sum = checksum(&self.buf);
        self.u64(sum);
        self.buf
    }
}

pub fn u32_of(n: usize, what: &str) -> CliResult<u32> {
    u32::try_from(n).map_err(|_| CliError::usage(format!("{what} {n} does not fit the file format")))
}

pub struct Reader<'a> {
    path: &'a Path,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Verifies length, checksum, magic and version, and positions the
    /// reader just after the version field.
    pub fn open(path: &'a Path, bytes: &'a [u8], magic: &[u8; 4], version: u32) -> CliResult<Self> {
        if bytes.len() < 16 {
            return Err(CliError::format(path, "file is truncated"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        if &body[..4] != magic {
            return Err(CliError::format(path, format!("bad magic {:?}", &body[..4])));
        }
        if checksum(body) != stored {
            return Err(CliError::format(path, "checksum mismatch"));
        }
        let mut r = Reader { path, buf: body, pos: 4 };
        let v = r.u32()?;
        if v != version {
            return Err(CliError::format(path, format!("unsupported version {v}")));
        }
        Ok(r)
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn fail(&self, reason: impl Into<String>) -> CliError {
        CliError::format(self.path, reason)
    }

    fn take(&mut self, n: usize) -> CliResult<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| self.fail(format!("unexpected end of data at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> CliResult<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> CliResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn usize(&mut self) -> CliResult<usize> {
        Ok(self.u32()? as usize)
    }

    pub fn u64(&mut self) -> CliResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f32(&mut self) -> CliResult<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn f64(&mut self) -> CliResult<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f32s(&mut self, n: usize) -> CliResult<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| self.fail("length overflow"))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    pub fn f64s(&mut self, n: usize) -> CliResult<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| self.fail("length overflow"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    pub fn bytes(&mut self, n: usize) -> CliResult<&'a [u8]> {
        self.take(n)
    }

    pub fn expect_end(&self) -> CliResult<()> {
        if self.pos != self.buf.len() {
            return Err(self.fail(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| skullnet::Error::Io { path: path.into(), source: e }.into())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| skullnet::Error::Io { path: path.into(), source: e }.into())
}
