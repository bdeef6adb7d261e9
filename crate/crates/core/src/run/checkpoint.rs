use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"ASNN";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Named real-valued tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

/// Flat list of tensors in the `ASNN` little-endian container: magic,
/// version, entry count, then per entry the name, dims and f64 payload.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub entries: Vec<Entry>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated at byte {} reading {what}", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, dims: &[usize], data: Vec<f64>) {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        self.entries.push(Entry {
            name: name.into(),
            dims: dims.to_vec(),
            data,
        });
    }

    pub fn push_scalar(&mut self, name: impl Into<String>, value: f64) {
        self.push(name, &[1], vec![value]);
    }

    /// Stores UTF-8 text one byte per element.
    pub fn push_text(&mut self, name: impl Into<String>, text: &str) {
        let data: Vec<f64> = text.bytes().map(f64::from).collect();
        let n = data.len();
        self.push(name, &[n], data);
    }

    pub fn get(&self, name: &str) -> Result<&Entry> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing entry '{name}'")))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        let e = self.get(name)?;
        match e.data[..] {
            [v] => Ok(v),
            _ => Err(Error::Checkpoint(format!("entry '{name}' is not a scalar"))),
        }
    }

    pub fn text(&self, name: &str) -> Result<String> {
        let bytes = self
            .get(name)?
            .data
            .iter()
            .map(|&v| {
                if (0.0..=255.0).contains(&v) && v.fract() == 0.0 {
                    Ok(v as u8)
                } else {
                    Err(Error::Checkpoint(format!("entry '{name}' is not text")))
                }
            })
            .collect::<Result<Vec<u8>>>()?;
        String::from_utf8(bytes).map_err(|_| Error::Checkpoint(format!("entry '{name}' is not UTF-8")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
            out.extend_from_slice(e.name.as_bytes());
            out.extend_from_slice(&(e.dims.len() as u32).to_le_bytes());
            for &d in &e.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &e.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::Checkpoint("bad magic, not an ASNN checkpoint".into()));
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let count = r.u32("entry count")?;
        let mut entries = Vec::new();
        for _ in 0..count {
            let len = r.u32("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "name")?)
                .map_err(|_| Error::Checkpoint(format!("entry name at byte {} is not UTF-8", r.pos - len)))?
                .to_string();
            let ndim = r.u32("rank")? as usize;
            let dims = (0..ndim)
                .map(|_| r.u32("dimension").map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|n| n.checked_mul(8).is_some())
                .ok_or_else(|| Error::Checkpoint(format!("entry '{name}' has absurd dimensions {dims:?}")))?;
            let payload = r.take(n * 8, "payload")?;
            let data = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            entries.push(Entry { name, dims, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}
