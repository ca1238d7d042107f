//! Little-endian section-tagged binary containers shared by the model and
//! checkpoint formats: a magic string, a u32 section count, then sections of
//! `[u8; 4]` tag + u64 payload length + payload.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub struct Payload(Vec<u8>);

impl Payload {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.0.write_u32::<LittleEndian>(v).expect("vec write");
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.0.write_u64::<LittleEndian>(v).expect("vec write");
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.0.write_f64::<LittleEndian>(v).expect("vec write");
        self
    }

    pub fn f64s(&mut self, vs: &[f64]) -> &mut Self {
        self.u64(vs.len() as u64);
        for &v in vs {
            self.f64(v);
        }
        self
    }

    /// Row count, column count, then values row-major.
    pub fn matrix(&mut self, m: &DMatrix<f64>) -> &mut Self {
        self.u64(m.nrows() as u64).u64(m.ncols() as u64);
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                self.f64(m[(r, c)]);
            }
        }
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
        self
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }
}

pub struct Reader<'a> {
    cursor: Cursor<&'a [u8]>,
    path: &'a Path,
    what: String,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], path: &'a Path, what: impl Into<String>) -> Self {
        Self {
            cursor: Cursor::new(bytes),
            path,
            what: what.into(),
        }
    }

    fn truncated(&self) -> Error {
        Error::format(self.path, format!("truncated {}", self.what))
    }

    pub fn u32(&mut self) -> Result<u32> {
        self.cursor.read_u32::<LittleEndian>().map_err(|_| self.truncated())
    }

    pub fn u64(&mut self) -> Result<u64> {
        self.cursor.read_u64::<LittleEndian>().map_err(|_| self.truncated())
    }

    pub fn f64(&mut self) -> Result<f64> {
        self.cursor.read_f64::<LittleEndian>().map_err(|_| self.truncated())
    }

    pub fn len_prefix(&mut self) -> Result<usize> {
        let len = self.u64()?;
        let remaining = self.cursor.get_ref().len() as u64 - self.cursor.position();
        if len > remaining {
            return Err(self.truncated());
        }
        Ok(len as usize)
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let len = self.len_prefix()?;
        (0..len).map(|_| self.f64()).collect()
    }

    pub fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let remaining = self.cursor.get_ref().len() as u64 - self.cursor.position();
        if (rows as u64).saturating_mul(cols as u64).saturating_mul(8) > remaining {
            return Err(self.truncated());
        }
        let mut m = DMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = self.f64()?;
                if !v.is_finite() {
                    return Err(Error::format(
                        self.path,
                        format!("{}: non-finite value at row {r}, column {c}", self.what),
                    ));
                }
                m[(r, c)] = v;
            }
        }
        Ok(m)
    }

    pub fn str(&mut self) -> Result<String> {
        let len = self.len_prefix()?;
        let mut buf = vec![0u8; len];
        self.cursor.read_exact(&mut buf).map_err(|_| self.truncated())?;
        String::from_utf8(buf).map_err(|_| Error::format(self.path, format!("{}: invalid utf-8", self.what)))
    }

    pub fn finished(&self) -> bool {
        self.cursor.position() as usize == self.cursor.get_ref().len()
    }
}

pub struct Section {
    pub tag: [u8; 4],
    pub payload: Vec<u8>,
}

impl Section {
    pub fn new(tag: &[u8; 4], payload: Payload) -> Self {
        Self {
            tag: *tag,
            payload: payload.into_bytes(),
        }
    }

    pub fn tag_str(&self) -> String {
        String::from_utf8_lossy(&self.tag).into_owned()
    }
}

pub fn write_sections(path: &Path, magic: &[u8], sections: &[Section]) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.write_u32::<LittleEndian>(sections.len() as u32).expect("vec write");
    for s in sections {
        out.extend_from_slice(&s.tag);
        out.write_u64::<LittleEndian>(s.payload.len() as u64)
            .expect("vec write");
        out.extend_from_slice(&s.payload);
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_sections(path: &Path, magic: &[u8]) -> Result<Vec<Section>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < magic.len() || &bytes[..magic.len()] != magic {
        return Err(Error::format(
            path,
            format!("bad magic, expected {:?}", String::from_utf8_lossy(magic)),
        ));
    }
    let mut reader = Reader::new(&bytes[magic.len()..], path, "section table");
    let count = reader.u32()?;
    let mut sections = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut tag = [0u8; 4];
        for b in &mut tag {
            *b = reader.cursor.read_u8().map_err(|_| reader.truncated())?;
        }
        let len = reader.len_prefix()?;
        let mut payload = vec![0u8; len];
        reader.cursor.read_exact(&mut payload).map_err(|_| reader.truncated())?;
        sections.push(Section { tag, payload });
    }
    if !reader.finished() {
        return Err(Error::format(path, "trailing bytes after last section"));
    }
    Ok(sections)
}

pub fn find<'s>(sections: &'s [Section], tag: &[u8; 4], path: &Path) -> Result<&'s Section> {
    sections
        .iter()
        .find(|s| &s.tag == tag)
        .ok_or_else(|| Error::format(path, format!("missing section {}", String::from_utf8_lossy(tag))))
}
