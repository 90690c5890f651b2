//! Flat binary container for named tensors, shared by every model in the
//! crate.
//!
//! Layout: magic bytes `KSN1`, then one record per tensor:
//! name length (u32 LE), UTF-8 name, rank (u32 LE), each dim (u32 LE),
//! values as little-endian f64. Records run to end of file.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"KSN1";

pub fn write_container<W: Write>(mut w: W, tensors: &[(String, &Tensor)]) -> Result<()> {
    w.write_all(MAGIC)?;
    for (name, tensor) in tensors {
        let name_bytes = name.as_bytes();
        w.write_all(&(name_bytes.len() as u32).to_le_bytes())?;
        w.write_all(name_bytes)?;
        w.write_all(&(tensor.rank() as u32).to_le_bytes())?;
        for &d in tensor.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in tensor.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_container<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < 4 || &buf[..4] != MAGIC {
        return Err(Error::ModelFile("missing KSN1 magic".to_string()));
    }
    let mut pos = 4;
    let mut out = Vec::new();
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > buf.len() {
            return Err(Error::ModelFile(format!("truncated at byte {}", *pos)));
        }
        let s = &buf[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    while pos < buf.len() {
        let name_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(take(&mut pos, name_len)?)
            .map_err(|e| Error::ModelFile(format!("bad name: {e}")))?
            .to_string();
        let rank = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize);
        }
        let count: usize = shape.iter().product();
        let raw = take(&mut pos, count * 8)?;
        let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        out.push((name, Tensor::from_vec(&shape, data)?));
    }
    Ok(out)
}

pub fn save_tensors(path: &Path, tensors: &[(String, &Tensor)]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_container(std::io::BufWriter::new(file), tensors)
}

pub fn load_tensors(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let file = std::fs::File::open(path)?;
    read_container(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_names_shapes_bits() {
        let a = Tensor::from_vec(&[2, 3], vec![1.0, -2.5, 3.25, 0.0, f64::MIN_POSITIVE, 1e300]).unwrap();
        let b = Tensor::from_vec(&[4], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut bytes = Vec::new();
        write_container(&mut bytes, &[("gen.w".to_string(), &a), ("disc.b".to_string(), &b)]).unwrap();
        assert_eq!(&bytes[..4], b"KSN1");
        let back = read_container(&bytes[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].0, "gen.w");
        assert_eq!(back[0].1, a);
        assert_eq!(back[1].0, "disc.b");
        assert_eq!(back[1].1, b);
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(matches!(read_container(&b"XXXX"[..]), Err(Error::ModelFile(_))));
    }

    #[test]
    fn truncation_rejected() {
        let a = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let mut bytes = Vec::new();
        write_container(&mut bytes, &[("w".to_string(), &a)]).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(read_container(&bytes[..]), Err(Error::ModelFile(_))));
    }
}
