//! A small named-tensor container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CTEN" u8:version(1) u32:count
//! count × { u16:name_len name u8:dtype u8:rank rank×u32:dims payload u32:crc32(payload) }
//! ```
//!
//! dtype is 1 for f32, 2 for u8 and 3 for i32.

use std::path::Path;

use crate::{io_err, Error, Result};

pub const MAGIC: &[u8; 4] = b"CTEN";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U8(Vec<u8>),
    I32(Vec<i32>),
}

impl TensorData {
    fn dtype(&self) -> u8 {
        match self {
            TensorData::F32(_) => 1,
            TensorData::U8(_) => 2,
            TensorData::I32(_) => 3,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U8(v) => v.len(),
            TensorData::I32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: TensorData,
}

impl Entry {
    pub fn f32(name: impl Into<String>, dims: &[usize], data: Vec<f32>) -> Self {
        Self { name: name.into(), dims: dims.to_vec(), data: TensorData::F32(data) }
    }

    pub fn u8(name: impl Into<String>, dims: &[usize], data: Vec<u8>) -> Self {
        Self { name: name.into(), dims: dims.to_vec(), data: TensorData::U8(data) }
    }

    pub fn as_f32(&self) -> Result<&[f32]> {
        match &self.data {
            TensorData::F32(v) => Ok(v),
            _ => Err(Error::Usage(format!("entry {:?} is not f32", self.name))),
        }
    }

    pub fn as_u8(&self) -> Result<&[u8]> {
        match &self.data {
            TensorData::U8(v) => Ok(v),
            _ => Err(Error::Usage(format!("entry {:?} is not u8", self.name))),
        }
    }
}

/// Looks an entry up by name.
pub fn find<'a>(entries: &'a [Entry], name: &str) -> Result<&'a Entry> {
    entries
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::Usage(format!("missing entry {name:?}")))
}

pub fn encode(entries: &[Entry]) -> Result<Vec<u8>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        if !e.name.is_ascii() || e.name.len() > u16::MAX as usize {
            return Err(Error::Usage(format!("entry name {:?} must be ASCII and at most 65535 bytes", e.name)));
        }
        if !seen.insert(e.name.as_str()) {
            return Err(Error::Usage(format!("duplicate entry name {:?}", e.name)));
        }
        if e.dims.len() > u8::MAX as usize || e.dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::Usage(format!("entry {:?} has an unsupported shape", e.name)));
        }
        let numel: usize = e.dims.iter().product();
        if numel != e.data.len() {
            return Err(Error::Usage(format!(
                "entry {:?}: shape {:?} holds {numel} values but {} were given",
                e.name,
                e.dims,
                e.data.len()
            )));
        }
        out.extend_from_slice(&(e.name.len() as u16).to_le_bytes());
        out.extend_from_slice(e.name.as_bytes());
        out.push(e.data.dtype());
        out.push(e.dims.len() as u8);
        for &d in &e.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        let start = out.len();
        match &e.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U8(v) => out.extend_from_slice(v),
            TensorData::I32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        let crc = crc32fast::hash(&out[start..]);
        out.extend_from_slice(&crc.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos,
                msg: format!("truncated while reading {what} ({n} bytes needed, {} left)", self.buf.len() - self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(buf: &[u8]) -> Result<Vec<Entry>> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format { offset: 0, msg: "bad magic".into() });
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(Error::Format { offset: 4, msg: format!("unsupported version {version}") });
    }
    let count = r.u32("entry count")?;
    let mut entries = Vec::new();
    for _ in 0..count {
        let len = r.u16("name length")? as usize;
        let at = r.pos;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .ok()
            .filter(|s| s.is_ascii())
            .ok_or_else(|| Error::Format { offset: at, msg: "entry name is not ASCII".into() })?
            .to_string();
        let dtype_at = r.pos;
        let dtype = r.u8("dtype")?;
        let rank = r.u8("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("dims")? as usize);
        }
        let numel = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Format { offset: dtype_at, msg: "shape overflows".into() })?;
        let width = match dtype {
            1 | 3 => 4,
            2 => 1,
            d => return Err(Error::Format { offset: dtype_at, msg: format!("unknown dtype {d}") }),
        };
        let payload_at = r.pos;
        let bytes = numel
            .checked_mul(width)
            .ok_or_else(|| Error::Format { offset: dtype_at, msg: "shape overflows".into() })?;
        let payload = r.take(bytes, "payload")?;
        let crc = r.u32("checksum")?;
        if crc32fast::hash(payload) != crc {
            return Err(Error::Checksum { name, offset: payload_at });
        }
        let data = match dtype {
            1 => TensorData::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4"))).collect()),
            2 => TensorData::U8(payload.to_vec()),
            _ => TensorData::I32(payload.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().expect("4"))).collect()),
        };
        entries.push(Entry { name, dims, data });
    }
    if r.pos != buf.len() {
        return Err(Error::Format { offset: r.pos, msg: "trailing bytes after last entry".into() });
    }
    Ok(entries)
}

pub fn write_file(path: &Path, entries: &[Entry]) -> Result<()> {
    let bytes = encode(entries)?;
    std::fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_file(path: &Path) -> Result<Vec<Entry>> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_pack() {
        let bytes = encode(&[]).unwrap();
        assert_eq!(bytes, b"CTEN\x01\x00\x00\x00\x00");
        assert!(decode(&bytes).unwrap().is_empty());
    }

    #[test]
    fn corruption_is_detected() {
        let e = vec![Entry::f32("w", &[2, 2], vec![1.0, -2.5, f32::MIN_POSITIVE, 3.0])];
        let mut bytes = encode(&e).unwrap();
        let payload = 4 + 1 + 4 + 2 + 1 + 1 + 1 + 8;
        bytes[payload + 3] ^= 0x40;
        match decode(&bytes) {
            Err(Error::Checksum { name, offset }) => assert_eq!((name.as_str(), offset), ("w", payload)),
            other => panic!("{other:?}"),
        }
        let ok = encode(&e).unwrap();
        assert!(matches!(decode(&ok[..ok.len() - 1]), Err(Error::Format { .. })));
        let mut bad = ok.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format { offset: 0, .. })));
        let mut bad = ok;
        bad[4] = 2;
        assert!(matches!(decode(&bad), Err(Error::Format { offset: 4, .. })));
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(encode(&[Entry::u8("a", &[2], vec![1]), ]).is_err());
        assert!(encode(&[Entry::u8("a", &[1], vec![1]), Entry::u8("a", &[1], vec![2])]).is_err());
        assert!(encode(&[Entry::u8("é", &[1], vec![1])]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(bits in proptest::collection::vec(any::<u32>(), 0..40), bytes in proptest::collection::vec(any::<u8>(), 1..30), ints in proptest::collection::vec(any::<i32>(), 1..10)) {
            let floats: Vec<f32> = bits.iter().map(|&b| f32::from_bits(b)).collect();
            let entries = vec![
                Entry::f32("floats", &[floats.len()], floats),
                Entry::u8("bytes", &[1, bytes.len()], bytes),
                Entry { name: "ints".into(), dims: vec![ints.len(), 1, 1], data: TensorData::I32(ints) },
            ];
            let decoded = decode(&encode(&entries).unwrap()).unwrap();
            prop_assert_eq!(decoded.len(), 3);
            for (a, b) in entries.iter().zip(&decoded) {
                prop_assert_eq!(&a.name, &b.name);
                prop_assert_eq!(&a.dims, &b.dims);
                match (&a.data, &b.data) {
                    (TensorData::F32(x), TensorData::F32(y)) => {
                        prop_assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
                    }
                    (x, y) => prop_assert_eq!(x, y),
                }
            }
        }
    }
}
