//! Little-endian tagged binary container with a trailing CRC32.
//!
//! Layout: 4-byte magic, u16 version, payload, u32 CRC32 of everything
//! before it. Arrays carry a u64 element count. Readers check every length
//! against the bytes left before allocating, so hostile input fails with
//! a [`Error::Format`] carrying the byte offset.

use hyperinr_core::{Error, Result};

pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4], version: u16) -> Self {
        let mut buf = Vec::with_capacity(1 << 12);
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&version.to_le_bytes());
        Self { buf }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u32(&mut self, x: u32) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    pub fn u64(&mut self, x: u64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    pub fn f64(&mut self, x: f64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    pub fn len_u32(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("dimension fits in u32"));
    }

    pub fn dims(&mut self, d: &[usize]) {
        self.len_u32(d.len());
        for &x in d {
            self.len_u32(x);
        }
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        self.buf.reserve(v.len() * 8);
        for x in v {
            self.f64(*x);
        }
    }

    pub fn u32s(&mut self, v: &[u32]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.u32(x);
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.buf.extend_from_slice(&crc.to_le_bytes());
        self.buf
    }
}

pub struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

fn fail<T>(offset: usize, reason: impl Into<String>) -> Result<T> {
    Err(Error::Format {
        offset,
        reason: reason.into(),
    })
}

impl<'a> Reader<'a> {
    /// Verifies magic, version and checksum; the reader then sits at the
    /// first payload byte.
    pub fn open(bytes: &'a [u8], magic: &[u8; 4], version: u16) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != magic {
            return fail(
                0,
                format!("bad magic, expected {:?}", String::from_utf8_lossy(magic)),
            );
        }
        if bytes.len() < 10 {
            return fail(bytes.len(), "truncated header");
        }
        let got = u16::from_le_bytes([bytes[4], bytes[5]]);
        if got != version {
            return fail(4, format!("unsupported version {got}, expected {version}"));
        }
        let body = bytes.len() - 4;
        let stored = u32::from_le_bytes(bytes[body..].try_into().expect("4 bytes"));
        if crc32fast::hash(&bytes[..body]) != stored {
            return fail(body, "checksum mismatch");
        }
        Ok(Self {
            bytes: &bytes[..body],
            pos: 6,
        })
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return fail(self.pos, format!("truncated: need {n} more bytes"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }

    pub fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    pub fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }

    pub fn f64(&mut self) -> Result<f64> {
        self.array().map(f64::from_le_bytes)
    }

    pub fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    pub fn dims(&mut self) -> Result<Vec<usize>> {
        let at = self.pos;
        let n = self.usize()?;
        if n > (self.bytes.len() - self.pos) / 4 {
            return fail(
                at,
                format!("dimension list of {n} entries overruns the file"),
            );
        }
        (0..n).map(|_| self.usize()).collect()
    }

    fn count(&mut self, width: usize) -> Result<usize> {
        let at = self.pos;
        let n = self.u64()?;
        let left = (self.bytes.len() - self.pos) / width;
        match usize::try_from(n) {
            Ok(n) if n <= left => Ok(n),
            _ => fail(at, format!("array of {n} elements overruns the file")),
        }
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.count(8)?;
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    pub fn u32s(&mut self) -> Result<Vec<u32>> {
        let n = self.count(4)?;
        let raw = self.take(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    /// Errors unless the whole payload was consumed.
    pub fn end(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return fail(self.pos, "trailing bytes after payload");
        }
        Ok(())
    }

    /// Wraps a semantic failure (bad shape, invalid arch) with the current
    /// offset.
    pub fn invalid<T>(&self, e: Error) -> Result<T> {
        match e {
            Error::Format { .. } => Err(e),
            other => fail(self.pos, other.to_string()),
        }
    }
}
