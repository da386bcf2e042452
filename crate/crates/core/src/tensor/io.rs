//! `TNS1` binary tensor files.
//!
//! Layout: the magic bytes `TNS1`, three little-endian `u64` dimensions
//! `(l, m, n)`, then `l·m·n` little-endian `f64` values in vec order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Tensor3;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TNS1";

pub fn write_tns<W: Write>(mut w: W, t: &Tensor3) -> Result<()> {
    let (l, m, n) = t.dims();
    w.write_all(MAGIC)?;
    for d in [l, m, n] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in t.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tns<R: Read>(mut r: R) -> Result<Tensor3> {
    let bad = |reason: &str| Error::Format {
        format: "TNS1",
        reason: reason.to_string(),
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| bad("truncated header"))?;
    if &magic != MAGIC {
        return Err(bad("missing TNS1 magic"));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let mut b = [0u8; 8];
        r.read_exact(&mut b).map_err(|_| bad("truncated header"))?;
        *d = usize::try_from(u64::from_le_bytes(b)).map_err(|_| bad("dimension overflow"))?;
    }
    let count = dims[0]
        .checked_mul(dims[1])
        .and_then(|v| v.checked_mul(dims[2]))
        .ok_or_else(|| bad("dimension overflow"))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(bad(&format!(
            "expected {} payload bytes, found {}",
            count * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Tensor3::from_vec(dims[0], dims[1], dims[2], data)
}

pub fn save_tns(path: impl AsRef<Path>, t: &Tensor3) -> Result<()> {
    write_tns(BufWriter::new(File::create(path)?), t)
}

pub fn load_tns(path: impl AsRef<Path>) -> Result<Tensor3> {
    read_tns(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_exact() {
        let t = Tensor3::from_vec(1, 2, 1, vec![1.5, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_tns(&mut buf, &t).unwrap();
        assert_eq!(&buf[..4], b"TNS1");
        assert_eq!(u64::from_le_bytes(buf[4..12].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[20..28].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(buf[28..36].try_into().unwrap()), 1.5);
        assert_eq!(buf.len(), 28 + 16);
        assert_eq!(read_tns(&buf[..]).unwrap(), t);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(matches!(read_tns(&b"TNS2"[..]), Err(Error::Format { .. })));
        let t = Tensor3::zeros(2, 2, 2);
        let mut buf = Vec::new();
        write_tns(&mut buf, &t).unwrap();
        buf.pop();
        assert!(matches!(read_tns(&buf[..]), Err(Error::Format { .. })));
    }
}
