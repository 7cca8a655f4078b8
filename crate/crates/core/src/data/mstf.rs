//! MSTF: little-endian tensor dataset files.
//!
//! ```text
//! "MSTF"            4 bytes
//! version           u32 (= 1)
//! n, c, h, w        u32 × 4
//! pixels            f32 × n·c·h·w, row-major NCHW
//! labels            u16 × n
//! J                 u32
//! metadata          J bytes of UTF-8, class names one per line
//! ```

use std::fs;
use std::path::Path;

use super::{DataError, Dataset, Result};
use crate::nn::Tensor4;

pub const MAGIC: [u8; 4] = *b"MSTF";
pub const VERSION: u32 = 1;

const HEADER_LEN: u64 = 4 + 4 + 16;

fn dim_u32(value: usize, what: &str) -> Result<u32> {
    u32::try_from(value).map_err(|_| DataError::Invalid(format!("{what} = {value} does not fit in u32")))
}

/// Serializes `dataset` to MSTF bytes.
pub fn encode_tensor_file(dataset: &Dataset) -> Result<Vec<u8>> {
    let [n, c, h, w] = dataset.images().shape();
    let labels = dataset
        .labels()
        .iter()
        .enumerate()
        .map(|(index, &label)| u16::try_from(label).map_err(|_| DataError::LabelTooLarge { index, label }))
        .collect::<Result<Vec<u16>>>()?;
    if let Some(bad) = dataset.class_names().iter().find(|s| s.is_empty() || s.contains(['\n', '\r'])) {
        return Err(DataError::Invalid(format!("class name {bad:?} is empty or spans lines")));
    }
    let metadata = dataset.class_names().join("\n");
    let j = dim_u32(metadata.len(), "metadata length")?;

    let pixels = dataset.images().data();
    let mut out = Vec::with_capacity(HEADER_LEN as usize + 4 * pixels.len() + 2 * n + 4 + metadata.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for (value, what) in [(n, "n"), (c, "c"), (h, "h"), (w, "w")] {
        out.extend_from_slice(&dim_u32(value, what)?.to_le_bytes());
    }
    for &p in pixels {
        out.extend_from_slice(&p.to_le_bytes());
    }
    for l in labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out.extend_from_slice(&j.to_le_bytes());
    out.extend_from_slice(metadata.as_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: u64) -> Result<&'a [u8]> {
        let available = (self.bytes.len() - self.pos) as u64;
        if len > available {
            return Err(DataError::Truncated {
                needed: self.pos as u64 + len,
                available: self.bytes.len() as u64,
            });
        }
        let len = len as usize;
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses MSTF bytes. Sizes are checked against the buffer before any
/// allocation, so corrupted headers cannot trigger huge allocations.
pub fn decode_tensor_file(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(DataError::BadMagic([magic[0], magic[1], magic[2], magic[3]]));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(DataError::UnsupportedVersion(version));
    }
    let dims = [r.u32()?, r.u32()?, r.u32()?, r.u32()?];
    let count = dims.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d as u64));
    let truncated = || DataError::Truncated {
        needed: u64::MAX,
        available: bytes.len() as u64,
    };
    let count = count.ok_or_else(truncated)?;
    let pixel_bytes = count.checked_mul(4).ok_or_else(truncated)?;
    let pixels = r.take(pixel_bytes)?;
    let n = dims[0] as u64;
    let label_bytes = r.take(2 * n)?;
    let j = r.u32()?;
    let metadata = r.take(j as u64)?;
    if r.pos != bytes.len() {
        return Err(DataError::TrailingBytes(bytes.len() - r.pos));
    }

    let data: Vec<f32> = pixels
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let labels: Vec<usize> = label_bytes
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]) as usize)
        .collect();
    let text = std::str::from_utf8(metadata).map_err(|_| DataError::Metadata)?;
    let class_names: Vec<String> = if text.is_empty() {
        Vec::new()
    } else {
        text.split('\n').map(str::to_string).collect()
    };
    let shape = dims.map(|d| d as usize);
    let images = Tensor4::from_vec(shape, data).map_err(|e| DataError::Invalid(e.to_string()))?;
    Dataset::from_parts(images, labels, class_names)
}

pub fn write_tensor_file(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    fs::write(path, encode_tensor_file(dataset)?)?;
    Ok(())
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_tensor_file(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let images = Tensor4::from_vec([2, 1, 1, 2], vec![1.0, -2.5, 0.0, f32::MAX]).unwrap();
        Dataset::new(images, vec![1, 0], 2, vec!["water".into(), "forest".into()]).unwrap()
    }

    #[test]
    fn layout_is_bit_exact() {
        let bytes = encode_tensor_file(&tiny()).unwrap();
        assert_eq!(&bytes[..4], b"MSTF");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..24], &[2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[24..28], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[40..44], &[1, 0, 0, 0]);
        assert_eq!(&bytes[44..48], &12u32.to_le_bytes());
        assert_eq!(&bytes[48..], b"water\nforest");
    }

    #[test]
    fn round_trip() {
        let ds = tiny();
        let bytes = encode_tensor_file(&ds).unwrap();
        let back = decode_tensor_file(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(encode_tensor_file(&back).unwrap(), bytes);
    }

    #[test]
    fn empty_metadata() {
        let images = Tensor4::from_vec([1, 1, 1, 1], vec![0.5]).unwrap();
        let ds = Dataset::from_parts(images, vec![3], vec![]).unwrap();
        let bytes = encode_tensor_file(&ds).unwrap();
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 0, 0, 0]);
        let back = decode_tensor_file(&bytes).unwrap();
        assert_eq!(back.num_classes(), 4);
        assert!(back.class_names().is_empty());
    }

    #[test]
    fn rejects_bad_headers() {
        let mut bytes = encode_tensor_file(&tiny()).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_tensor_file(&bytes), Err(DataError::BadMagic(m)) if &m == b"XXXX"));

        let mut bytes = encode_tensor_file(&tiny()).unwrap();
        bytes[4] = 2;
        assert!(matches!(decode_tensor_file(&bytes), Err(DataError::UnsupportedVersion(2))));

        let bytes = encode_tensor_file(&tiny()).unwrap();
        for cut in 0..bytes.len() {
            assert!(decode_tensor_file(&bytes[..cut]).is_err(), "prefix of {cut} bytes accepted");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_tensor_file(&long), Err(DataError::TrailingBytes(1))));
    }

    #[test]
    fn huge_dims_do_not_allocate() {
        let mut bytes = encode_tensor_file(&tiny()).unwrap();
        bytes[8..24].fill(0xff);
        assert!(matches!(decode_tensor_file(&bytes), Err(DataError::Truncated { .. })));
    }

    #[test]
    fn label_too_large() {
        let images = Tensor4::from_vec([1, 1, 1, 1], vec![0.0]).unwrap();
        let ds = Dataset::from_parts(images, vec![70_000], vec![]).unwrap();
        assert!(matches!(
            encode_tensor_file(&ds),
            Err(DataError::LabelTooLarge { index: 0, label: 70_000 })
        ));
    }
}
