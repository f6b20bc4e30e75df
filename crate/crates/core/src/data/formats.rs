//! IDX (big-endian, u8 payload) and CSV dataset loaders.

use std::fs;
use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            offset: offset as u64,
            message: "unexpected end of header".into(),
        })
}

fn expect_magic(bytes: &[u8], magic: u32) -> Result<()> {
    let found = read_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {found:#010x}, expected {magic:#010x}"),
        });
    }
    Ok(())
}

fn payload(bytes: &[u8], start: usize, len: usize) -> Result<&[u8]> {
    bytes.get(start..start + len).ok_or_else(|| Error::Format {
        offset: bytes.len() as u64,
        message: format!("truncated payload: need {len} bytes from offset {start}"),
    })
}

/// Parses an IDX image buffer into `(n, rows * cols, pixels scaled to [0, 1])`.
pub fn read_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    expect_magic(bytes, IMAGES_MAGIC)?;
    let n = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let dim = rows * cols;
    let pixels = payload(bytes, 16, n * dim)?;
    Ok((n, dim, pixels.iter().map(|&p| f64::from(p) / 255.0).collect()))
}

pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    expect_magic(bytes, LABELS_MAGIC)?;
    let n = read_u32(bytes, 4)? as usize;
    Ok(payload(bytes, 8, n)?.iter().map(|&y| usize::from(y)).collect())
}

/// Loads an IDX image/label file pair. The class count is `max(label) + 1`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let image_bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let (n, dim, features) = read_idx_images(&image_bytes)?;
    let labels = read_idx_labels(&label_bytes)?;
    if labels.len() != n {
        return Err(Error::Format {
            offset: 4,
            message: format!("{n} images but {} labels", labels.len()),
        });
    }
    let classes = labels.iter().copied().max().map_or(1, |m| m + 1);
    LabeledDataset::new(features, labels, dim, classes)
}

/// Writes `data` as an IDX pair with images shaped `rows x cols`.
///
/// Features are quantized to `round(x * 255)`; values outside `[0, 1]` and
/// labels above 255 are rejected.
pub fn write_idx(
    data: &LabeledDataset,
    rows: usize,
    cols: usize,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    if rows * cols != data.dim() {
        return Err(Error::Dimension {
            expected: data.dim(),
            found: rows * cols,
        });
    }
    let mut images = Vec::with_capacity(16 + data.features().len());
    images.extend(IMAGES_MAGIC.to_be_bytes());
    for v in [data.len(), rows, cols] {
        images.extend((v as u32).to_be_bytes());
    }
    for &x in data.features() {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidValue(format!("pixel {x} outside [0, 1]")));
        }
        images.push((x * 255.0).round() as u8);
    }
    let mut labels = Vec::with_capacity(8 + data.len());
    labels.extend(LABELS_MAGIC.to_be_bytes());
    labels.extend((data.len() as u32).to_be_bytes());
    for &y in data.labels() {
        labels.push(u8::try_from(y).map_err(|_| Error::InvalidValue(format!("label {y} exceeds 255")))?);
    }
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    fs::write(images_path, images).map_err(|e| Error::io(images_path, e))?;
    fs::write(labels_path, labels).map_err(|e| Error::io(labels_path, e))?;
    Ok(())
}

/// Loads a headed CSV whose last column is an integer label and whose other
/// columns are real features.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let offset = record.position().map_or(0, |p| p.byte());
        if record.len() < 2 {
            return Err(Error::Format {
                offset,
                message: "need at least one feature column and a label column".into(),
            });
        }
        let width = record.len() - 1;
        if *dim.get_or_insert(width) != width {
            return Err(Error::Format {
                offset,
                message: format!("row has {width} features, expected {}", dim.unwrap_or(0)),
            });
        }
        for field in record.iter().take(width) {
            features.push(field.trim().parse::<f64>().map_err(|_| Error::Format {
                offset,
                message: format!("bad feature value {field:?}"),
            })?);
        }
        let label = &record[width];
        labels.push(label.trim().parse::<usize>().map_err(|_| Error::Format {
            offset,
            message: format!("bad label {label:?}"),
        })?);
    }
    let classes = labels.iter().copied().max().map_or(1, |m| m + 1);
    LabeledDataset::new(features, labels, dim.unwrap_or(0), classes)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            offset,
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_images(n: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = IMAGES_MAGIC.to_be_bytes().to_vec();
        for v in [n, rows, cols] {
            b.extend(v.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    #[test]
    fn scales_pixels() {
        let (n, dim, x) = read_idx_images(&idx_images(1, 2, 2, &[0, 255, 0, 255])).unwrap();
        assert_eq!((n, dim), (1, 4));
        assert_eq!(x, vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let mut bytes = idx_images(1, 1, 1, &[3]);
        bytes[3] = 0x01;
        assert!(matches!(read_idx_images(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn truncated_payload() {
        let bytes = idx_images(2, 2, 2, &[1, 2, 3]);
        assert!(matches!(read_idx_images(&bytes), Err(Error::Format { offset: 19, .. })));
        assert!(matches!(read_idx_images(&bytes[..10]), Err(Error::Format { offset: 8, .. })));
    }

    #[test]
    fn mismatched_counts() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lbl = dir.path().join("lbl");
        fs::write(&img, idx_images(2, 1, 1, &[0, 1])).unwrap();
        let mut labels = LABELS_MAGIC.to_be_bytes().to_vec();
        labels.extend(3u32.to_be_bytes());
        labels.extend([0, 1, 2]);
        fs::write(&lbl, labels).unwrap();
        assert!(matches!(load_idx(&img, &lbl), Err(Error::Format { .. })));
    }

    #[test]
    fn csv_loader() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "a,b,label\n0.5,1.5,1\n-2,3,0\n").unwrap();
        let d = load_csv(&path).unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.labels(), &[1, 0]);
        assert_eq!(d.row(1), &[-2.0, 3.0]);

        fs::write(&path, "a,label\nx,1\n").unwrap();
        assert!(matches!(load_csv(&path), Err(Error::Format { .. })));
    }
}
