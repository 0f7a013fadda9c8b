//! IDX ubyte files (the MNIST container): a big-endian magic number, one
//! big-endian `u32` per dimension, then the raw unsigned bytes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{LabeledDataset, Split};
use crate::nn::Matrix2D;
use crate::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let chunk = bytes.get(offset..offset + 4).ok_or_else(|| Error::Format {
        offset: bytes.len(),
        message: format!("truncated header while reading {what}"),
    })?;
    Ok(u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
}

fn check_magic(bytes: &[u8], expected: u32, what: &str) -> Result<()> {
    let magic = read_u32(bytes, 0, "magic number")?;
    if magic != expected {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad {what} magic 0x{magic:08x}, expected 0x{expected:08x}"),
        });
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], start: usize, len: usize, what: &str) -> Result<&'a [u8]> {
    let end = start + len;
    if bytes.len() < end {
        return Err(Error::Format {
            offset: bytes.len(),
            message: format!("truncated {what} payload: expected {len} bytes after offset {start}"),
        });
    }
    if bytes.len() > end {
        return Err(Error::Format {
            offset: end,
            message: format!("{} trailing bytes after {what} payload", bytes.len() - end),
        });
    }
    Ok(&bytes[start..end])
}

/// Parses an image file and a label file into a dataset with pixels scaled
/// to `[0, 1]` and every image flattened row-major.
pub fn parse_idx(
    images: &[u8],
    labels: &[u8],
    domain: impl Into<String>,
    split: Split,
) -> Result<LabeledDataset> {
    check_magic(images, IDX_IMAGES_MAGIC, "image")?;
    let count = read_u32(images, 4, "image count")? as usize;
    let rows = read_u32(images, 8, "row count")? as usize;
    let cols = read_u32(images, 12, "column count")? as usize;
    let pixels = payload(images, 16, count * rows * cols, "image")?;

    check_magic(labels, IDX_LABELS_MAGIC, "label")?;
    let label_count = read_u32(labels, 4, "label count")? as usize;
    if label_count != count {
        return Err(Error::Format {
            offset: 4,
            message: format!("label file holds {label_count} items, image file {count}"),
        });
    }
    let label_bytes = payload(labels, 8, label_count, "label")?;

    let data: Vec<f64> = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    LabeledDataset::new(
        Matrix2D::new(count, rows * cols, data)?,
        label_bytes.iter().map(|&l| usize::from(l)).collect(),
        domain,
        split,
    )
}

/// Encodes `count` images of `rows × cols` bytes.
pub fn encode_idx_images(rows: u32, cols: u32, pixels: &[u8]) -> Result<Vec<u8>> {
    let per = (rows * cols) as usize;
    if per == 0 || pixels.len() % per != 0 {
        return Err(Error::Input(
            "pixel buffer is not a whole number of images".into(),
        ));
    }
    let count = (pixels.len() / per) as u32;
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, count, rows, cols] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_two_by_two_image_scales_pixels() {
        let images = encode_idx_images(2, 2, &[0, 255, 128, 64]).unwrap();
        let labels = encode_idx_labels(&[7]);
        let d = parse_idx(&images, &labels, "digits", Split::Test).unwrap();
        assert_eq!(d.samples.rows(), 1);
        assert_eq!(d.samples.row(0), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
        assert_eq!(d.labels, vec![7]);
    }

    #[test]
    fn header_count_exceeding_payload_is_format_error() {
        let images = encode_idx_images(1, 1, &[1, 2, 3]).unwrap();
        let mut labels = encode_idx_labels(&[0, 1, 2]);
        labels.pop();
        match parse_idx(&images, &labels, "d", Split::Test) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 10),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_count_mismatch() {
        let mut images = encode_idx_images(1, 1, &[1, 2]).unwrap();
        let labels = encode_idx_labels(&[0, 1]);
        images[3] = 0x01;
        assert!(matches!(
            parse_idx(&images, &labels, "d", Split::Test),
            Err(Error::Format { offset: 0, .. })
        ));
        let images = encode_idx_images(1, 1, &[1, 2]).unwrap();
        let labels = encode_idx_labels(&[0, 1, 1]);
        assert!(matches!(
            parse_idx(&images, &labels, "d", Split::Test),
            Err(Error::Format { offset: 4, .. })
        ));
        assert!(matches!(
            parse_idx(&images[..10], &labels, "d", Split::Test),
            Err(Error::Format { .. })
        ));
    }
}
