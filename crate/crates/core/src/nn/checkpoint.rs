//! Binary parameter container: `SPKL`, a `u32` version, then records of
//! (`u32` name length, UTF-8 name, `u32` rank, `u32` dims, `f32` values), all
//! little-endian, until end of file.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use super::layer::LayerParam;
use super::spectral::SpectralNormState;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SPKL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub records: Vec<Record>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
            out.extend_from_slice(r.name.as_bytes());
            out.extend_from_slice(&(r.dims.len() as u32).to_le_bytes());
            for &d in &r.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &r.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).ok() != Some(MAGIC.as_slice()) {
            return Err(Error::Checkpoint("missing SPKL magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let mut records = Vec::new();
        while r.pos < bytes.len() {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
            let rank = r.u32()? as usize;
            let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let count: usize = dims.iter().product();
            let raw = r.take(count.checked_mul(4).ok_or_else(|| Error::Checkpoint(format!("{name}: absurd dims {dims:?}")))?)?;
            let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            records.push(Record { name, dims, values });
        }
        Ok(Self { records })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn get(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.name == name)
    }

    /// Appends `prefix.layer.{weight,bias,sn_u}` records.
    pub fn push_layers(&mut self, prefix: &str, layers: &[LayerParam]) {
        let f32s = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        for l in layers {
            let s = l.weight.shape();
            self.records.push(Record { name: format!("{prefix}.{}.weight", l.name), dims: s.to_vec(), values: f32s(l.weight.data()) });
            self.records.push(Record { name: format!("{prefix}.{}.bias", l.name), dims: vec![l.bias.len()], values: f32s(&l.bias) });
            if let Some(sn) = &l.spectral {
                self.records.push(Record { name: format!("{prefix}.{}.sn_u", l.name), dims: vec![sn.u.len()], values: f32s(&sn.u) });
            }
        }
    }

    /// Names of records under `prefix.`.
    pub fn names_with_prefix(&self, prefix: &str) -> Vec<&str> {
        let p = format!("{prefix}.");
        self.records.iter().map(|r| r.name.as_str()).filter(|n| n.starts_with(&p)).collect()
    }

    /// Fills `layers` from the records under `prefix`, requiring the name sets to match exactly.
    pub fn load_layers(&self, prefix: &str, layers: &mut [LayerParam]) -> Result<()> {
        let expected: BTreeSet<String> = {
            let mut c = Checkpoint::default();
            c.push_layers(prefix, layers);
            c.records.into_iter().map(|r| r.name).collect()
        };
        let present: BTreeSet<String> = self.names_with_prefix(prefix).into_iter().map(String::from).collect();
        if expected != present {
            return Err(Error::CheckpointMismatch {
                missing: expected.difference(&present).cloned().collect(),
                extra: present.difference(&expected).cloned().collect(),
            });
        }
        let fetch = |name: String, dims: &[usize]| -> Result<Vec<f64>> {
            let r = self.get(&name).expect("checked above");
            if r.dims != dims {
                return Err(Error::Checkpoint(format!("{name}: stored dims {:?}, network expects {dims:?}", r.dims)));
            }
            Ok(r.values.iter().map(|&v| f64::from(v)).collect())
        };
        for l in layers.iter_mut() {
            let s = l.weight.shape();
            let w = fetch(format!("{prefix}.{}.weight", l.name), &s)?;
            l.weight.data_mut().copy_from_slice(&w);
            l.bias = fetch(format!("{prefix}.{}.bias", l.name), &[l.bias.len()])?;
            if let Some(sn) = &mut l.spectral {
                *sn = SpectralNormState::from_u(fetch(format!("{prefix}.{}.sn_u", l.name), &[sn.u.len()])?);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layers() -> Vec<LayerParam> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        vec![LayerParam::conv("c0", 4, 3, 3, true, &mut rng), LayerParam::conv("c1", 2, 4, 1, false, &mut rng)]
    }

    #[test]
    fn byte_round_trip() {
        let mut c = Checkpoint::default();
        c.push_layers("G", &layers());
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..4], b"SPKL");
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn layers_round_trip_and_mismatch() {
        let src = layers();
        let mut c = Checkpoint::default();
        c.push_layers("G", &src);
        let mut dst = layers();
        dst.iter_mut().for_each(|l| l.bias.iter_mut().for_each(|b| *b = 7.0));
        c.load_layers("G", &mut dst).unwrap();
        assert_eq!(dst, src);

        let mut wrong = vec![src[0].clone()];
        wrong[0].name = "other".into();
        match c.load_layers("G", &mut wrong).unwrap_err() {
            Error::CheckpointMismatch { missing, extra } => {
                assert!(missing.contains(&"G.other.weight".to_string()));
                assert!(extra.contains(&"G.c1.bias".to_string()));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(Checkpoint::from_bytes(b"NOPE").is_err());
        let mut c = Checkpoint::default();
        c.push_layers("G", &layers());
        let bytes = c.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }
}
