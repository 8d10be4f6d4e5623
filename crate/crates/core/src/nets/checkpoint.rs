//! Binary checkpoint format.
//!
//! ```text
//! magic      8 bytes  "ISIMCKPT"
//! version    u32
//! sections   u32
//! per section:
//!   tag      u8       0 = pedestrian actor, 1 = vehicle actor,
//!                     2 = vehicle log-std, 3 = critic
//!   ndims    u32
//!   dims     u32 x ndims
//!   values   f32 x count, layer by layer (weights row-major, then bias)
//! crc32      u32      over every preceding byte
//! ```
//!
//! All integers and floats are little-endian. A JSON sidecar
//! (`<file>.json`) records the training metadata.

use super::{Mlp, Policies};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const MAGIC: &[u8; 8] = b"ISIMCKPT";
pub const FORMAT_VERSION: u32 = 1;

const TAG_PED: u8 = 0;
const TAG_SDC: u8 = 1;
const TAG_LOG_STD: u8 = 2;
const TAG_CRITIC: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub map_version: String,
    pub update: u64,
    pub seed: u64,
    pub config_hash: String,
    pub mode: String,
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_section(buf: &mut Vec<u8>, tag: u8, dims: &[usize], values: &[f64]) {
    buf.push(tag);
    put_u32(buf, dims.len() as u32);
    for &d in dims {
        put_u32(buf, d as u32);
    }
    for &v in values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub fn encode(p: &Policies) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    put_u32(&mut buf, 4);
    put_section(&mut buf, TAG_PED, &p.ped.arch, &p.ped.params);
    put_section(&mut buf, TAG_SDC, &p.sdc.arch, &p.sdc.params);
    put_section(&mut buf, TAG_LOG_STD, &[2], &p.sdc_log_std);
    put_section(&mut buf, TAG_CRITIC, &p.critic.arch, &p.critic.params);
    let crc = crc32fast::hash(&buf);
    put_u32(&mut buf, crc);
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(4 * n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Policies> {
    if bytes.len() < MAGIC.len() + 12 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("bad magic header".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(Error::Checkpoint("checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let sections = r.u32()?;
    let (mut ped, mut sdc, mut log_std, mut critic) = (None, None, None, None);
    for _ in 0..sections {
        let tag = r.u8()?;
        let ndims = r.u32()? as usize;
        let dims = (0..ndims)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if tag == TAG_LOG_STD {
            if dims != [2] {
                return Err(Error::Checkpoint(
                    "log-std section must have 2 entries".into(),
                ));
            }
            let v = r.f32s(2)?;
            log_std = Some([v[0], v[1]]);
            continue;
        }
        let arch: [usize; 4] = dims
            .as_slice()
            .try_into()
            .map_err(|_| Error::Checkpoint(format!("network section with {ndims} dims")))?;
        let mut net = Mlp::zeros(arch);
        net.params = r.f32s(net.len())?;
        match tag {
            TAG_PED => ped = Some(net),
            TAG_SDC => sdc = Some(net),
            TAG_CRITIC => critic = Some(net),
            other => return Err(Error::Checkpoint(format!("unknown section tag {other}"))),
        }
    }
    if r.pos != body.len() {
        return Err(Error::Checkpoint(
            "trailing bytes after last section".into(),
        ));
    }
    let missing = |what: &str| Error::Checkpoint(format!("missing {what} section"));
    let p = Policies {
        ped: ped.ok_or_else(|| missing("pedestrian actor"))?,
        sdc: sdc.ok_or_else(|| missing("vehicle actor"))?,
        sdc_log_std: log_std.ok_or_else(|| missing("log-std"))?,
        critic: critic.ok_or_else(|| missing("critic"))?,
    };
    p.check_arch()?;
    Ok(p)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save(path: &Path, policies: &Policies, meta: &CheckpointMeta) -> Result<()> {
    std::fs::write(path, encode(policies))?;
    std::fs::write(
        sidecar_path(path),
        serde_json::to_string_pretty(meta)? + "\n",
    )?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Policies> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    decode(&bytes)
}

pub fn load_meta(path: &Path) -> Result<CheckpointMeta> {
    let text = std::fs::read_to_string(sidecar_path(path))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policies() -> Policies {
        Policies::init(11)
    }

    #[test]
    fn round_trip_is_f32_exact() {
        let p = policies();
        let q = decode(&encode(&p)).unwrap();
        for (a, b) in p.ped.params.iter().zip(&q.ped.params) {
            assert_eq!(*a as f32 as f64, *b);
        }
        assert_eq!(encode(&q), encode(&p));
    }

    #[test]
    fn detects_corruption() {
        let mut bytes = encode(&policies());
        bytes[40] ^= 1;
        assert!(matches!(decode(&bytes), Err(Error::Checkpoint(m)) if m.contains("checksum")));
        let mut bytes = encode(&policies());
        bytes[0] = b'X';
        assert!(decode(&bytes).is_err());
        let bytes = encode(&policies());
        assert!(decode(&bytes[..bytes.len() / 2]).is_err());
    }

    #[test]
    fn files_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let meta = CheckpointMeta {
            format_version: FORMAT_VERSION,
            map_version: crate::map::MAP_VERSION.into(),
            update: 3,
            seed: 9,
            config_hash: "abc".into(),
            mode: "co-train".into(),
        };
        save(&path, &policies(), &meta).unwrap();
        assert_eq!(load_meta(&path).unwrap(), meta);
        assert!(load(&path).is_ok());
        assert!(load(&dir.path().join("missing.ckpt")).is_err());
    }
}
