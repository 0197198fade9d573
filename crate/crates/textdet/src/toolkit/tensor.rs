//! Binary tensor container: little-endian `f32` payloads with a fixed
//! header, so prediction and target tensors roundtrip bit-exactly.
//!
//! Layout: magic `PXAT`, version `u16`, dtype tag `u16`, rank `u16`,
//! reserved `u16` (zero), `rank` dims as `u32`, then the row-major payload
//! of `prod(dims)` floats. Everything is little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PXAT";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u16 = 1;

/// A rank >= 1 tensor of `f32` values in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<u32>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        let expected = checked_len(&dims)?;
        if data.len() != expected {
            return Err(Error::Format(format!(
                "payload of {} values does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_f64(dims: Vec<u32>, data: &[f64]) -> Result<Self> {
        Self::new(dims, data.iter().map(|&v| v as f32).collect())
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&DTYPE_F32.to_le_bytes())?;
        w.write_all(&(self.dims.len() as u16).to_le_bytes())?;
        w.write_all(&0u16.to_le_bytes())?;
        for &d in &self.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        for &v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let version = read_u16(r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dtype = read_u16(r)?;
        if dtype != DTYPE_F32 {
            return Err(Error::Format(format!("unsupported dtype tag {dtype}")));
        }
        let rank = read_u16(r)?;
        let _reserved = read_u16(r)?;
        if rank == 0 {
            return Err(Error::Format("rank-0 tensor".into()));
        }
        let mut dims = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            let mut buf = [0u8; 4];
            read_exact(r, &mut buf)?;
            dims.push(u32::from_le_bytes(buf));
        }
        let len = checked_len(&dims)?;
        let mut data = vec![0f32; len];
        for v in &mut data {
            let mut buf = [0u8; 4];
            read_exact(r, &mut buf)?;
            *v = f32::from_le_bytes(buf);
        }
        Ok(Self { dims, data })
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }
}

fn checked_len(dims: &[u32]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::Format("rank-0 tensor".into()));
    }
    let mut len: u64 = 1;
    for &d in dims {
        len = len
            .checked_mul(d as u64)
            .ok_or_else(|| Error::Format("dimension product overflow".into()))?;
    }
    // Payload must also fit in addressable memory with 4-byte elements.
    if len > (usize::MAX / 4) as u64 {
        return Err(Error::Format("dimension product overflow".into()));
    }
    Ok(len as usize)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Format("truncated tensor file".into()))
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut buf = [0u8; 2];
    read_exact(r, &mut buf)?;
    Ok(u16::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn bit_exact_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let data: Vec<f32> = (0..2 * 3 * 5).map(|_| rng.random::<f32>()).collect();
        let t = Tensor::new(vec![2, 3, 5], data).unwrap();

        let mut bytes = Vec::new();
        t.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 2 + 2 + 4 * 3 + 4 * 30);

        let back = Tensor::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, t);
        for (a, b) in t.data().iter().zip(back.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        // Writing again must produce identical bytes.
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Tensor::new(vec![], vec![]).is_err());
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());

        let t = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let mut bytes = Vec::new();
        t.write_to(&mut bytes).unwrap();

        // Corrupt magic.
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Tensor::read_from(&mut bad.as_slice()).is_err());

        // Truncated payload.
        let short = &bytes[..bytes.len() - 2];
        assert!(Tensor::read_from(&mut &short[..]).is_err());

        // Rank 0 on the wire.
        let mut rank0 = Vec::new();
        rank0.extend_from_slice(&MAGIC);
        rank0.extend_from_slice(&VERSION.to_le_bytes());
        rank0.extend_from_slice(&DTYPE_F32.to_le_bytes());
        rank0.extend_from_slice(&0u16.to_le_bytes());
        rank0.extend_from_slice(&0u16.to_le_bytes());
        assert!(Tensor::read_from(&mut rank0.as_slice()).is_err());

        // Overflowing dims.
        let mut huge = Vec::new();
        huge.extend_from_slice(&MAGIC);
        huge.extend_from_slice(&VERSION.to_le_bytes());
        huge.extend_from_slice(&DTYPE_F32.to_le_bytes());
        huge.extend_from_slice(&4u16.to_le_bytes());
        huge.extend_from_slice(&0u16.to_le_bytes());
        for _ in 0..4 {
            huge.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(Tensor::read_from(&mut huge.as_slice()).is_err());
    }
}
