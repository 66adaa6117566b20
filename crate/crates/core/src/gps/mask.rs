//! Binary foreground masks and run-length encoding.
//!
//! Runs alternate background/foreground starting with background, over the
//! pixels in row-major order. A mask that starts with foreground has a
//! leading zero-length run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

/// Serialized mask: `{"w": .., "h": .., "rle": [..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RleMask {
    pub w: usize,
    pub h: usize,
    pub rle: Vec<usize>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask", "width and height must be positive"));
        }
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask {}x{} needs {} cells, got {}",
                width,
                height,
                width * height,
                bits.len()
            )));
        }
        Ok(Mask {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Mask::new(width, height, vec![false; width * height])
    }

    /// Builds a mask from `(x, y)` foreground cells.
    pub fn from_cells(width: usize, height: usize, cells: &[(usize, usize)]) -> Result<Self> {
        let mut m = Mask::empty(width, height)?;
        for &(x, y) in cells {
            if x >= width || y >= height {
                return Err(Error::invalid(
                    "mask",
                    format!("cell ({x}, {y}) outside {width}x{height}"),
                ));
            }
            m.bits[y * width + x] = true;
        }
        Ok(m)
    }

    pub fn from_rle(rle: &RleMask) -> Result<Self> {
        let n = rle.w.saturating_mul(rle.h);
        let total: usize = rle
            .rle
            .iter()
            .try_fold(0usize, |acc, &c| acc.checked_add(c))
            .ok_or_else(|| Error::invalid("mask.rle", "run lengths overflow"))?;
        if total != n {
            return Err(Error::DimensionMismatch(format!(
                "run lengths sum to {total}, mask {}x{} has {n} cells",
                rle.w, rle.h
            )));
        }
        let mut bits = Vec::with_capacity(n);
        let mut value = false;
        for &run in &rle.rle {
            bits.extend(std::iter::repeat_n(value, run));
            value = !value;
        }
        Mask::new(rle.w, rle.h, bits)
    }

    pub fn to_rle(&self) -> RleMask {
        let mut runs = Vec::new();
        let mut current = false;
        let mut count = 0;
        for &b in &self.bits {
            if b != current {
                runs.push(count);
                count = 0;
                current = b;
            }
            count += 1;
        }
        runs.push(count);
        RleMask {
            w: self.width,
            h: self.height,
            rle: runs,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Intersection-over-union of two masks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskIou {
    pub iou: f64,
    /// Both masks were empty; `iou` is reported as 0.
    pub empty_union: bool,
}

pub fn mask_iou(m: &Mask, mhat: &Mask) -> Result<MaskIou> {
    if m.width != mhat.width || m.height != mhat.height {
        return Err(Error::DimensionMismatch(format!(
            "mask {}x{} vs {}x{}",
            m.width, m.height, mhat.width, mhat.height
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&a, &b) in m.bits.iter().zip(&mhat.bits) {
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    if union == 0 {
        return Ok(MaskIou {
            iou: 0.0,
            empty_union: true,
        });
    }
    Ok(MaskIou {
        iou: inter as f64 / union as f64,
        empty_union: false,
    })
}
