//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic      10 bytes  "ADVPOL-NET"
//! version    u32       1
//! head kind  u8        0 = categorical, 1 = gaussian
//! layers     u32       number of trunk layers
//! shapes     2 × u32 per trunk layer (rows = out, cols = in)
//! actions    u32       action dimension
//! payload    f64 row-major: each trunk layer W then b, action head W then b,
//!            value head W then b, log-std (gaussian only)
//! ```
//!
//! Nothing follows the payload; trailing bytes are rejected.

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ActionHead, PolicyNet};
use crate::numkit::{Activation, Dense, Matrix, MlpParams, Params};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 10] = b"ADVPOL-NET";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n * 8)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn dense(&mut self, rows: usize, cols: usize) -> Result<Dense> {
        let w = Matrix::from_vec(rows, cols, self.f64s(rows * cols)?)?;
        let b = self.f64s(rows)?;
        Ok(Dense { w, b })
    }
}

impl PolicyNet {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, VERSION);
        out.push(match self.head {
            ActionHead::Categorical { .. } => 0,
            ActionHead::Gaussian { .. } => 1,
        });
        put_u32(&mut out, self.trunk.layers().len() as u32);
        for l in self.trunk.layers() {
            put_u32(&mut out, l.output_dim() as u32);
            put_u32(&mut out, l.input_dim() as u32);
        }
        put_u32(&mut out, self.action_dim() as u32);
        for seg in self.segments() {
            for v in seg {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor { buf, pos: 0 };
        if c.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = c.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let kind = c.take(1)?[0];
        let n_layers = c.u32()? as usize;
        if n_layers == 0 || n_layers > 64 {
            return Err(Error::Checkpoint(format!("implausible layer count {n_layers}")));
        }
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            shapes.push((c.u32()? as usize, c.u32()? as usize));
        }
        let actions = c.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for &(r, k) in &shapes {
            layers.push(c.dense(r, k)?);
        }
        let trunk = MlpParams::new(layers, vec![Activation::Tanh; n_layers])?;
        let h = trunk.output_dim();
        let head_layer = c.dense(actions, h)?;
        let value = c.dense(1, h)?;
        let head = match kind {
            0 => ActionHead::Categorical { logits: head_layer },
            1 => ActionHead::Gaussian {
                mean: head_layer,
                log_std: c.f64s(actions)?,
            },
            k => return Err(Error::Checkpoint(format!("unknown head kind {k}"))),
        };
        if c.pos != buf.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - c.pos)));
        }
        PolicyNet::from_parts(trunk, head, value)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }

    /// Hex SHA-256 of the checkpoint bytes.
    pub fn content_hash(&self) -> String {
        hex(&Sha256::digest(self.to_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{HeadKind, PolicySpec};
    use crate::Rng64;
    use proptest::prelude::*;
    use rand::SeedableRng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn round_trip_bit_exact(seed in any::<u64>(), input in 1usize..10, hidden in 1usize..12,
                                actions in 1usize..6, gaussian in any::<bool>(), depth in 1usize..4) {
            let mut rng = Rng64::seed_from_u64(seed);
            let head = if gaussian { HeadKind::Gaussian(actions) } else { HeadKind::Categorical(actions) };
            let mut spec = PolicySpec::new(input, hidden, head);
            spec.hidden = vec![hidden; depth];
            let net = PolicyNet::new(&spec, &mut rng).unwrap();
            let bytes = net.to_bytes();
            let back = PolicyNet::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &net);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn rejects_corruption() {
        let mut rng = Rng64::seed_from_u64(1);
        let net = PolicyNet::new(&PolicySpec::new(3, 4, HeadKind::Categorical(2)), &mut rng).unwrap();
        let bytes = net.to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(PolicyNet::from_bytes(&bad).is_err());
        assert!(PolicyNet::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(PolicyNet::from_bytes(&long).is_err());
    }
}
