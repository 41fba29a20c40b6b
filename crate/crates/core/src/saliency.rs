//! Prime fixation area: saliency maps, thresholding and the attended region.
//!
//! Saliency maps come from an external model as 8-bit PGM files; when none is
//! available a center-biased Gaussian prior stands in.

use std::path::Path;

use crate::ingest::read_pgm;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_SIGMA_FRAC: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::invalid(
                "saliency buffer does not match its dimensions",
            ));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("saliency value {v} outside [0,1]")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Binary grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::invalid("mask buffer does not match its dimensions"));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// The mask as a {0,1}-valued saliency map.
    pub fn to_map(&self) -> SaliencyMap {
        SaliencyMap {
            width: self.width,
            height: self.height,
            values: self
                .bits
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BBox {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 as f64 && x <= self.x1 as f64 && y >= self.y0 as f64 && y <= self.y1 as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentiveRegion {
    pub bbox: BBox,
    /// Pixels of the selected component only.
    pub mask: BinaryMask,
    /// Set when the thresholded map was empty and the whole frame is used.
    pub fallback: bool,
}

/// Load an 8-bit PGM saliency map and scale it into [0,1].
pub fn load_saliency(path: &Path, dims: (usize, usize)) -> Result<SaliencyMap> {
    let img = read_pgm(path)?;
    if img.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            found: img.dims(),
        });
    }
    let values = img.data().iter().map(|&p| p as f64 / 255.0).collect();
    SaliencyMap::new(dims.0, dims.1, values)
}

/// Isotropic Gaussian centered on the frame, std `sigma_frac * min(W,H)`,
/// scaled so its largest pixel is exactly 1.
pub fn center_prior(dims: (usize, usize), sigma_frac: f64) -> Result<SaliencyMap> {
    let (w, h) = dims;
    if w < 8 || h < 8 {
        return Err(Error::invalid("center prior needs frames of at least 8x8"));
    }
    if !(sigma_frac > 0.0) {
        return Err(Error::invalid("sigma_frac must be positive"));
    }
    let sigma = sigma_frac * w.min(h) as f64;
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let k = 1.0 / (2.0 * sigma * sigma);
    // separable, so mirrored pixels get bit-identical values
    let gx: Vec<f64> = (0..w)
        .map(|x| (-(x as f64 - cx).powi(2) * k).exp())
        .collect();
    let gy: Vec<f64> = (0..h)
        .map(|y| (-(y as f64 - cy).powi(2) * k).exp())
        .collect();
    let peak = gx[w / 2] * gy[h / 2];
    let mut values = Vec::with_capacity(w * h);
    for &vy in &gy {
        for &vx in &gx {
            values.push((vx * vy / peak).min(1.0));
        }
    }
    SaliencyMap::new(w, h, values)
}

/// 1 where `value >= t_h`.
pub fn binarize(map: &SaliencyMap, t_h: f64) -> Result<BinaryMask> {
    if !(t_h > 0.0 && t_h < 1.0) {
        return Err(Error::invalid(format!("threshold {t_h} outside (0,1)")));
    }
    BinaryMask::new(
        map.width,
        map.height,
        map.values.iter().map(|&v| v >= t_h).collect(),
    )
}

/// Largest 4-connected component of `mask` (first in raster order on ties)
/// and its tight bounding box. An empty mask yields the whole frame with
/// `fallback` set.
pub fn attentive_region(mask: &BinaryMask) -> AttentiveRegion {
    let (w, h) = mask.dims();
    let mut label = vec![u32::MAX; w * h];
    let mut best: Option<(usize, Vec<usize>)> = None;
    let mut stack = Vec::new();
    let mut next = 0u32;
    for start in 0..w * h {
        if !mask.bits[start] || label[start] != u32::MAX {
            continue;
        }
        let mut pixels = Vec::new();
        label[start] = next;
        stack.push(start);
        while let Some(p) = stack.pop() {
            pixels.push(p);
            let (x, y) = (p % w, p / w);
            let mut visit = |q: usize| {
                if mask.bits[q] && label[q] == u32::MAX {
                    label[q] = next;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        next += 1;
        if best.as_ref().map_or(true, |(n, _)| pixels.len() > *n) {
            best = Some((pixels.len(), pixels));
        }
    }

    match best {
        None => AttentiveRegion {
            bbox: BBox {
                x0: 0,
                y0: 0,
                x1: w.saturating_sub(1),
                y1: h.saturating_sub(1),
            },
            mask: BinaryMask::from_fn(w, h, |_, _| true),
            fallback: true,
        },
        Some((_, pixels)) => {
            let mut bits = vec![false; w * h];
            let mut bbox = BBox {
                x0: usize::MAX,
                y0: usize::MAX,
                x1: 0,
                y1: 0,
            };
            for p in pixels {
                bits[p] = true;
                let (x, y) = (p % w, p / w);
                bbox.x0 = bbox.x0.min(x);
                bbox.y0 = bbox.y0.min(y);
                bbox.x1 = bbox.x1.max(x);
                bbox.y1 = bbox.y1.max(y);
            }
            AttentiveRegion {
                bbox,
                mask: BinaryMask {
                    width: w,
                    height: h,
                    bits,
                },
                fallback: false,
            }
        }
    }
}
