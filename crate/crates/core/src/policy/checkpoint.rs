//! Binary checkpoint format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes  "RRCKPT01"
//! format       u32      CHECKPOINT_FORMAT
//! version      u64      parameter version (optimiser steps)
//! n_heads      u32      followed by n_heads × u32 acceleration head sizes
//! n_networks   u32
//! per network: u32 name length, UTF-8 name, u8 tanh_output,
//!              u32 n_layers, n_layers × (u32 in_dim, u32 out_dim)
//! payload:     for each network and layer, out·in weights (row-major)
//!              then out biases, as f64
//! ```

use std::path::Path;

use super::{Dense, Mlp, PolicyParams, NETWORK_NAMES};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RRCKPT01";
pub const CHECKPOINT_FORMAT: u32 = 1;

impl PolicyParams {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_FORMAT.to_le_bytes());
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.accel_heads.len() as u32).to_le_bytes());
        for &h in &self.accel_heads {
            out.extend_from_slice(&(h as u32).to_le_bytes());
        }
        let nets = self.networks();
        out.extend_from_slice(&(nets.len() as u32).to_le_bytes());
        for (name, m) in &nets {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(m.tanh_output as u8);
            out.extend_from_slice(&(m.layers.len() as u32).to_le_bytes());
            for l in &m.layers {
                out.extend_from_slice(&(l.in_dim as u32).to_le_bytes());
                out.extend_from_slice(&(l.out_dim as u32).to_le_bytes());
            }
        }
        for (_, m) in &nets {
            for s in m.slices() {
                for x in s {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let format = r.u32()?;
        if format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format {format}")));
        }
        let version = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
        let n_heads = r.u32()? as usize;
        let accel_heads = (0..n_heads).map(|_| r.u32().map(|h| h as usize)).collect::<Result<Vec<_>>>()?;
        let n_nets = r.u32()? as usize;
        if n_nets != NETWORK_NAMES.len() {
            return Err(Error::Checkpoint(format!("expected {} networks, found {n_nets}", NETWORK_NAMES.len())));
        }
        let mut nets = Vec::with_capacity(n_nets);
        for want in NETWORK_NAMES {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?).map_err(|e| Error::Checkpoint(e.to_string()))?;
            if name != want {
                return Err(Error::Checkpoint(format!("expected network `{want}`, found `{name}`")));
            }
            let tanh_output = r.take(1)?[0] != 0;
            let n_layers = r.u32()? as usize;
            let layers = (0..n_layers)
                .map(|_| Ok(Dense::zeros(r.u32()? as usize, r.u32()? as usize)))
                .collect::<Result<Vec<_>>>()?;
            if layers.is_empty() || layers.windows(2).any(|w| w[0].out_dim != w[1].in_dim) {
                return Err(Error::Checkpoint(format!("network `{name}` layer shapes do not chain")));
            }
            nets.push(Mlp { layers, tanh_output });
        }
        for m in nets.iter_mut() {
            for s in m.slices_mut() {
                for x in s.iter_mut() {
                    *x = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
                }
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let mut it = nets.into_iter();
        let p = PolicyParams {
            version,
            accel_heads,
            accel: it.next().unwrap(),
            spline: it.next().unwrap(),
            critic_encoder: it.next().unwrap(),
            critic_head: it.next().unwrap(),
        };
        if p.accel.out_dim() != p.accel_heads.iter().sum::<usize>() {
            return Err(Error::Checkpoint("acceleration heads do not match the network output".into()));
        }
        if !p.all_finite() {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        PolicyParams::from_bytes(&std::fs::read(path)?)
    }

    /// Errors unless every network has the same shape as in `expected`.
    pub fn check_compatible(&self, expected: &PolicyParams) -> Result<()> {
        if self.accel_heads != expected.accel_heads {
            return Err(Error::Checkpoint(format!(
                "acceleration heads {:?}, scenario needs {:?}",
                self.accel_heads, expected.accel_heads
            )));
        }
        for ((name, a), (_, b)) in self.networks().iter().zip(expected.networks()) {
            if a.sizes() != b.sizes() {
                return Err(Error::Checkpoint(format!(
                    "network `{name}` has shape {:?}, scenario needs {:?}",
                    a.sizes(),
                    b.sizes()
                )));
            }
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::super::PolicyShape;
    use super::*;
    use crate::rng::stream_rng;

    fn params(comm: bool) -> PolicyParams {
        let shape = PolicyShape {
            accel_inputs: 10,
            spline_inputs: 6,
            hidden: 5,
            comm,
        };
        let mut p = PolicyParams::new(shape, &mut stream_rng(2, 0, 0));
        p.version = 42;
        p
    }

    #[test]
    fn round_trip_bit_exact() {
        let p = params(true);
        let bytes = p.to_bytes();
        let q = PolicyParams::from_bytes(&bytes).unwrap();
        assert_eq!(p, q);
        assert_eq!(bytes, q.to_bytes());
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = params(false).to_bytes();
        assert!(PolicyParams::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(PolicyParams::from_bytes(&extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(PolicyParams::from_bytes(&bad).is_err());
    }

    #[test]
    fn incompatible_shapes_detected() {
        assert!(params(true).check_compatible(&params(false)).is_err());
        assert!(params(true).check_compatible(&params(true)).is_ok());
    }
}
