//! IDX tensors of unsigned bytes, as used by the MNIST distribution.
//!
//! Layout: a 4-byte big-endian magic number `0x0000 08 NN` (type code `0x08`
//! for `u8`, `NN` dimensions), one 4-byte big-endian size per dimension, then
//! the row-major payload.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use super::{Dataset, ProblemError};

/// Three-dimensional image tensor (count × rows × cols).
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
/// One-dimensional label vector.
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

const UBYTE: u8 = 0x08;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdxSection {
    Header,
    Payload,
}

impl fmt::Display for IdxSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdxSection::Header => "header",
            IdxSection::Payload => "payload",
        })
    }
}

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("bad IDX magic number {0:#010x}")]
    BadMagic(u32),
    #[error("truncated IDX {section}: need {needed} bytes, have {available}")]
    Truncated {
        section: IdxSection,
        needed: usize,
        available: usize,
    },
    #[error("IDX dimensions {0:?} overflow the addressable size")]
    DimensionOverflow(Vec<u32>),
    #[error("expected IDX magic {expected:#010x}, found {found:#010x}")]
    UnexpectedKind { expected: u32, found: u32 },
    #[error("IDX I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// A parsed IDX tensor of unsigned bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    dims: Vec<u32>,
    data: Vec<u8>,
}

fn read_be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().expect("4-byte slice"))
}

impl IdxArray {
    pub fn new(dims: Vec<u32>, data: Vec<u8>) -> Result<Self, IdxError> {
        if dims.is_empty() || dims.len() > u8::MAX as usize {
            return Err(IdxError::BadMagic(u32::from(UBYTE) << 8));
        }
        let len = Self::element_count(&dims)?;
        if data.len() != len {
            return Err(IdxError::Truncated {
                section: IdxSection::Payload,
                needed: len,
                available: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    fn element_count(dims: &[u32]) -> Result<usize, IdxError> {
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or_else(|| IdxError::DimensionOverflow(dims.to_vec()))
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, IdxError> {
        if bytes.len() < 4 {
            return Err(IdxError::Truncated {
                section: IdxSection::Header,
                needed: 4,
                available: bytes.len(),
            });
        }
        let magic = read_be_u32(bytes, 0);
        let [zero_a, zero_b, kind, ndims] = magic.to_be_bytes();
        if zero_a != 0 || zero_b != 0 || kind != UBYTE || ndims == 0 {
            return Err(IdxError::BadMagic(magic));
        }
        let header = 4 + 4 * ndims as usize;
        if bytes.len() < header {
            return Err(IdxError::Truncated {
                section: IdxSection::Header,
                needed: header,
                available: bytes.len(),
            });
        }
        let dims: Vec<u32> = (0..ndims as usize)
            .map(|i| read_be_u32(bytes, 4 + 4 * i))
            .collect();
        let len = Self::element_count(&dims)?;
        let needed = header
            .checked_add(len)
            .ok_or_else(|| IdxError::DimensionOverflow(dims.clone()))?;
        if bytes.len() < needed {
            return Err(IdxError::Truncated {
                section: IdxSection::Payload,
                needed: len,
                available: bytes.len() - header,
            });
        }
        Ok(Self {
            dims,
            data: bytes[header..needed].to_vec(),
        })
    }

    pub fn magic(&self) -> u32 {
        u32::from_be_bytes([0, 0, UBYTE, self.dims.len() as u8])
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + self.data.len());
        out.extend_from_slice(&self.magic().to_be_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }

    fn expect_magic(&self, expected: u32) -> Result<(), IdxError> {
        if self.magic() != expected {
            return Err(IdxError::UnexpectedKind {
                expected,
                found: self.magic(),
            });
        }
        Ok(())
    }

    /// Images flattened to rows of `rows · cols` features scaled to `[0, 1]`.
    pub fn images(&self) -> Result<(usize, usize, Vec<f64>), IdxError> {
        self.expect_magic(IDX_IMAGES_MAGIC)?;
        let count = self.dims[0] as usize;
        let features = self.dims[1] as usize * self.dims[2] as usize;
        let pixels = self.data.iter().map(|&b| f64::from(b) / 255.0).collect();
        Ok((count, features, pixels))
    }

    pub fn labels(&self) -> Result<Vec<f64>, IdxError> {
        self.expect_magic(IDX_LABELS_MAGIC)?;
        Ok(self.data.iter().map(|&b| f64::from(b)).collect())
    }
}

/// Reads and parses an IDX file.
pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxArray, IdxError> {
    IdxArray::parse(&std::fs::read(path)?)
}

impl Dataset {
    /// Pairs an image tensor with a label vector of the same length.
    pub fn from_idx(images: &IdxArray, labels: &IdxArray) -> Result<Self, ProblemError> {
        let (count, features, pixels) = images.images()?;
        let targets = labels.labels()?;
        if targets.len() != count {
            return Err(super::invalid(
                "idx dataset",
                format!("{count} images but {} labels", targets.len()),
            ));
        }
        if features == 0 {
            return Err(super::invalid("idx dataset", "images have no pixels"));
        }
        Dataset::new(pixels, features, targets)
    }
}
