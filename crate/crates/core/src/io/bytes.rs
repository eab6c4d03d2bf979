use crate::error::{Result, ZshError};

/// Little-endian reader over an in-memory file image.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8], what: &'static str) -> Self {
        ByteReader { buf, pos: 0, what }
    }

    pub(crate) fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&end| end <= self.buf.len())
            .ok_or(ZshError::Truncated { what: self.what })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expected {
            return Err(ZshError::Format(format!(
                "bad magic for {} file: expected {:?}, found {:?}",
                self.what,
                String::from_utf8_lossy(expected),
                String::from_utf8_lossy(got)
            )));
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| ZshError::Format(format!("size {v} does not fit in memory")))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Reads `count` newline-terminated UTF-8 lines.
    pub(crate) fn lines(&mut self, count: usize) -> Result<Vec<String>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let rest = &self.buf[self.pos..];
            let nl = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or(ZshError::Truncated { what: self.what })?;
            let line = std::str::from_utf8(&rest[..nl])
                .map_err(|e| ZshError::Format(format!("{} file: invalid UTF-8: {e}", self.what)))?;
            out.push(line.to_string());
            self.pos += nl + 1;
        }
        Ok(out)
    }

    pub(crate) fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(ZshError::Format(format!(
                "{} trailing bytes after {} file",
                self.buf.len() - self.pos,
                self.what
            )));
        }
        Ok(())
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_lines<S: AsRef<str>>(out: &mut Vec<u8>, lines: &[S]) -> Result<()> {
    for line in lines {
        let line = line.as_ref();
        if line.contains('\n') {
            return Err(ZshError::Format(format!("identifier {line:?} contains a newline")));
        }
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
    }
    Ok(())
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| ZshError::io(path, e))
}

pub(crate) fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| ZshError::io(path, e))
}
