//! Self-describing binary container used by checkpoints and cached datasets.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "BIDSCNT\0"
//! version    u32
//! kind       u8       1 = checkpoint, 2 = dataset
//! entries    u32
//! entry*     name_len u16 | name utf-8 | dtype u8 | ndim u8 | dims u64 * ndim | payload
//! trailer    4 bytes  "END\0"
//! ```
//!
//! dtype 0 is f64 (`prod(dims)` values), 1 is u32, 2 is a list of `dims[0]`
//! strings each prefixed by a u32 byte length.

use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"BIDSCNT\0";
pub const VERSION: u32 = 1;
const TRAILER: &[u8; 4] = b"END\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Checkpoint = 1,
    Dataset = 2,
}

impl Kind {
    fn from_byte(b: u8) -> Result<Self> {
        match b {
            1 => Ok(Kind::Checkpoint),
            2 => Ok(Kind::Dataset),
            other => Err(Error::Format(format!("unknown container kind {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    F64 { shape: Vec<usize>, data: Vec<f64> },
    U32 { shape: Vec<usize>, data: Vec<u32> },
    Text(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: Kind,
    entries: IndexMap<String, Entry>,
}

impl Container {
    pub fn new(kind: Kind) -> Self {
        Container {
            kind,
            entries: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, entry: Entry) {
        self.entries.insert(name.into(), entry);
    }

    pub fn insert_tensor(&mut self, name: impl Into<String>, t: &Tensor) {
        self.insert(
            name,
            Entry::F64 {
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            },
        );
    }

    pub fn insert_text(&mut self, name: impl Into<String>, lines: Vec<String>) {
        self.insert(name, Entry::Text(lines));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Result<&Entry> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::Format(format!("container has no entry {name:?}")))
    }

    pub fn f64s(&self, name: &str) -> Result<(&[usize], &[f64])> {
        match self.get(name)? {
            Entry::F64 { shape, data } => Ok((shape, data)),
            _ => Err(Error::Format(format!("entry {name:?} is not f64"))),
        }
    }

    pub fn tensor(&self, name: &str) -> Result<Tensor> {
        let (shape, data) = self.f64s(name)?;
        Tensor::new(shape.to_vec(), data.to_vec())
    }

    pub fn u32s(&self, name: &str) -> Result<(&[usize], &[u32])> {
        match self.get(name)? {
            Entry::U32 { shape, data } => Ok((shape, data)),
            _ => Err(Error::Format(format!("entry {name:?} is not u32"))),
        }
    }

    pub fn text(&self, name: &str) -> Result<&[String]> {
        match self.get(name)? {
            Entry::Text(lines) => Ok(lines),
            _ => Err(Error::Format(format!("entry {name:?} is not text"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, entry) in &self.entries {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let (dtype, shape): (u8, Vec<usize>) = match entry {
                Entry::F64 { shape, .. } => (0, shape.clone()),
                Entry::U32 { shape, .. } => (1, shape.clone()),
                Entry::Text(lines) => (2, vec![lines.len()]),
            };
            out.push(dtype);
            out.push(shape.len() as u8);
            for d in &shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            match entry {
                Entry::F64 { data, .. } => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
                Entry::U32 { data, .. } => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
                Entry::Text(lines) => {
                    for l in lines {
                        out.extend_from_slice(&(l.len() as u32).to_le_bytes());
                        out.extend_from_slice(l.as_bytes());
                    }
                }
            }
        }
        out.extend_from_slice(TRAILER);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8, "magic")? != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                expected: VERSION,
            });
        }
        let kind = Kind::from_byte(r.take(1, "kind")?[0])?;
        let count = r.u32("entry count")?;
        let mut c = Container::new(kind);
        for _ in 0..count {
            let name_len = u16::from_le_bytes(r.take(2, "name length")?.try_into().unwrap()) as usize;
            let name = String::from_utf8(r.take(name_len, "name")?.to_vec())
                .map_err(|_| Error::Format("entry name is not utf-8".into()))?;
            let dtype = r.take(1, &name)?[0];
            let ndim = r.take(1, &name)?[0] as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                let d = u64::from_le_bytes(r.take(8, &name)?.try_into().unwrap());
                shape.push(usize::try_from(d).map_err(|_| Error::Format(format!("dimension overflow in {name}")))?);
            }
            let n: usize = shape.iter().product();
            let entry = match dtype {
                0 => {
                    let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?, &name)?;
                    Entry::F64 {
                        shape,
                        data: raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect(),
                    }
                }
                1 => {
                    let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::Format("size overflow".into()))?, &name)?;
                    Entry::U32 {
                        shape,
                        data: raw.chunks_exact(4).map(|b| u32::from_le_bytes(b.try_into().unwrap())).collect(),
                    }
                }
                2 => {
                    if ndim != 1 {
                        return Err(Error::Format(format!("text entry {name} must be 1-d")));
                    }
                    let mut lines = Vec::with_capacity(n.min(1 << 20));
                    for _ in 0..n {
                        let len = r.u32(&name)? as usize;
                        let s = String::from_utf8(r.take(len, &name)?.to_vec())
                            .map_err(|_| Error::Format(format!("text entry {name} is not utf-8")))?;
                        lines.push(s);
                    }
                    Entry::Text(lines)
                }
                other => return Err(Error::Format(format!("unknown dtype {other} for {name}"))),
            };
            c.entries.insert(name, entry);
        }
        if r.take(4, "trailer")? != TRAILER {
            return Err(Error::Format("missing end marker".into()));
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes after end marker", bytes.len() - r.pos)));
        }
        Ok(c)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Read and check the container kind.
    pub fn read(path: &Path, kind: Kind) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let c = Self::from_bytes(&bytes)?;
        if c.kind != kind {
            return Err(Error::Format(format!(
                "{} holds a {:?} container, expected {:?}",
                path.display(),
                c.kind,
                kind
            )));
        }
        Ok(c)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Truncated(format!("needed {n} bytes for {what} at offset {}, file has {}", self.pos, self.buf.len()))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}
