//! Binary checkpoint container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "ANTILMCK" | version u32
//! embedding_dim u64 | hidden_units u64 | num_layers u64 | tie u8 | dropout_keep f64
//! vocab_size u64 | vocab_fingerprint u64
//! rng_seed u64 | rng_stream u64 | rng_word_pos u128 | step_count u64
//! n_tensors u32, then per tensor:
//!   name_len u32 | name utf-8 | ndims u32 | dims u64 * ndims | data f64 * prod(dims)
//! ```

use std::fs;
use std::path::Path;

use super::{LmConfig, NeuralLm, Params};
use crate::corpus::Fingerprint;
use crate::error::{Error, Result};
use crate::rng::RngState;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ANTILMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("size overflow".into()))
    }
}

impl NeuralLm {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let c = &self.config;
        for v in [c.embedding_dim, c.hidden_units, c.num_layers] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.push(c.tie_embeddings as u8);
        out.extend_from_slice(&c.dropout_keep.to_le_bytes());
        out.extend_from_slice(&(self.vocab_size as u64).to_le_bytes());
        out.extend_from_slice(&self.vocab_fingerprint.0.to_le_bytes());
        out.extend_from_slice(&self.rng.seed.to_le_bytes());
        out.extend_from_slice(&self.rng.stream.to_le_bytes());
        out.extend_from_slice(&self.rng.word_pos.to_le_bytes());
        out.extend_from_slice(&self.step_count.to_le_bytes());

        let tensors = self.params.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for t in tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
            for d in &t.dims {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for x in t.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let config = LmConfig {
            embedding_dim: r.usize()?,
            hidden_units: r.usize()?,
            num_layers: r.usize()?,
            tie_embeddings: r.u8()? != 0,
            dropout_keep: r.f64()?,
        };
        config.validate()?;
        let vocab_size = r.usize()?;
        let vocab_fingerprint = Fingerprint(r.u64()?);
        let rng = RngState {
            seed: r.u64()?,
            stream: r.u64()?,
            word_pos: r.u128()?,
        };
        let step_count = r.u64()?;

        let mut params = Params::zeros(&config, vocab_size);
        let n = r.u32()? as usize;
        let mut views = params.tensors_mut();
        if n != views.len() {
            return Err(Error::Format(format!(
                "checkpoint has {n} tensors, config implies {}",
                views.len()
            )));
        }
        for view in views.iter_mut() {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format("tensor name is not utf-8".into()))?;
            if name != view.name {
                return Err(Error::Format(format!(
                    "expected tensor `{}`, found `{name}`",
                    view.name
                )));
            }
            let ndims = r.u32()? as usize;
            let dims = (0..ndims).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
            if dims != view.dims {
                return Err(Error::Format(format!(
                    "tensor `{name}` has dims {dims:?}, expected {:?}",
                    view.dims
                )));
            }
            for x in view.data.iter_mut() {
                *x = r.f64()?;
            }
        }
        drop(views);
        if r.pos != buf.len() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(NeuralLm {
            config,
            vocab_size,
            vocab_fingerprint,
            params,
            rng,
            step_count,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip_bitwise() {
        let cfg = LmConfig {
            embedding_dim: 3,
            hidden_units: 4,
            num_layers: 2,
            tie_embeddings: false,
            dropout_keep: 0.8,
        };
        let m = NeuralLm::init(cfg, 9, Fingerprint(0xabcdef), 42).unwrap();
        let bytes = m.to_bytes();
        let back = NeuralLm::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_corrupted_files() {
        let m = NeuralLm::init(LmConfig::default(), 5, Fingerprint(1), 1).unwrap();
        let bytes = m.to_bytes();
        assert!(NeuralLm::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(NeuralLm::from_bytes(&extra).is_err());
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(NeuralLm::from_bytes(&bad_magic).is_err());
    }
}
