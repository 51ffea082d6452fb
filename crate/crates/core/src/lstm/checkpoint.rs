//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "LSTMCKPT"
//! version  u32      1
//! d, H, m  3 × u64  input dim, hidden units, output dim (d + 1)
//! count    u32      number of tensors
//! per tensor:
//!   name_len u16, name (UTF-8), rows u64, cols u64,
//!   rows × cols f64 values, row-major
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::{LstmParameters, Shape, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LSTMCKPT";
const VERSION: u32 = 1;

impl LstmParameters {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for dim in [self.input_dim(), self.hidden(), self.output_dim()] {
            out.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        out.extend_from_slice(&(Tensor::ALL.len() as u32).to_le_bytes());
        for t in Tensor::ALL {
            let name = t.name().as_bytes();
            let (rows, cols) = self.dims(t);
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name);
            out.extend_from_slice(&(rows as u64).to_le_bytes());
            out.extend_from_slice(&(cols as u64).to_le_bytes());
            for v in self.tensor(t) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a checkpoint; `origin` only labels error messages.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = Reader {
            bytes,
            pos: 0,
            origin: origin.to_path_buf(),
        };
        if r.take(8)? != MAGIC {
            return Err(r.fail("not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.fail(&format!("unsupported version {version}")));
        }
        let d = r.u64()? as usize;
        let h = r.u64()? as usize;
        let m = r.u64()? as usize;
        if d < 2 || h == 0 || m != d + 1 {
            return Err(r.fail(&format!("inconsistent dimensions d={d}, H={h}, m={m}")));
        }
        let count = r.u32()? as usize;
        if count != Tensor::ALL.len() {
            return Err(r.fail(&format!(
                "expected {} tensors, found {count}",
                Tensor::ALL.len()
            )));
        }
        let shape = Shape {
            input_dim: d,
            hidden: h,
        };
        let mut values = Vec::with_capacity(shape.len());
        for t in Tensor::ALL {
            let name_len = r.u16()? as usize;
            let name = r.take(name_len)?;
            if name != t.name().as_bytes() {
                return Err(r.fail(&format!(
                    "expected tensor {}, found {}",
                    t.name(),
                    String::from_utf8_lossy(name)
                )));
            }
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            if (rows, cols) != shape.dims(t) {
                return Err(r.fail(&format!(
                    "tensor {} has shape {rows}x{cols}, expected {:?}",
                    t.name(),
                    shape.dims(t)
                )));
            }
            for _ in 0..rows * cols {
                values.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
            }
        }
        if r.pos != bytes.len() {
            return Err(r.fail("trailing bytes after last tensor"));
        }
        Ok(LstmParameters::from_values(d, h, values))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        crate::experiments::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        LstmParameters::from_bytes(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: PathBuf,
}

impl<'a> Reader<'a> {
    fn fail(&self, reason: &str) -> Error {
        Error::Checkpoint {
            path: self.origin.clone(),
            reason: reason.to_string(),
        }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| self.fail("truncated"))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(d in 2usize..5, h in 1usize..7, seed: u64) {
            let mut p = LstmParameters::init(d, h, seed);
            // Exercise special bit patterns too.
            p.as_mut_slice()[0] = -0.0;
            p.as_mut_slice()[1] = f64::MIN_POSITIVE / 2.0;
            let back = LstmParameters::from_bytes(&p.to_bytes(), Path::new("mem")).unwrap();
            prop_assert_eq!(back.input_dim(), d);
            prop_assert_eq!(back.hidden(), h);
            let a: Vec<u64> = p.as_slice().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.as_slice().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_corruption() {
        let p = LstmParameters::init(2, 2, 0);
        let bytes = p.to_bytes();
        let origin = Path::new("x.ckpt");
        assert!(LstmParameters::from_bytes(&bytes[..bytes.len() - 1], origin).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(LstmParameters::from_bytes(&extra, origin).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        let err = LstmParameters::from_bytes(&bad, origin).unwrap_err();
        assert!(err.to_string().contains("x.ckpt"));
        // m != d + 1
        let mut dims = bytes;
        dims[12 + 16] = 9;
        assert!(LstmParameters::from_bytes(&dims, origin).is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let p = LstmParameters::init(3, 4, 77);
        p.save(&path).unwrap();
        assert_eq!(LstmParameters::load(&path).unwrap(), p);
        let missing = dir.path().join("missing.ckpt");
        let err = LstmParameters::load(&missing).unwrap_err();
        assert!(err.to_string().contains("missing.ckpt"));
    }
}
