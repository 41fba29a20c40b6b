//! Binary PGM (P5) reading and writing for 8-bit grayscale frames.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "image buffer has {} bytes, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Half-resolution image, each pixel the rounded mean of a 2x2 cell.
    /// Odd trailing rows/columns are dropped; never shrinks below 1x1.
    pub fn downsample2(&self) -> GrayImage {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        let sx = if self.width >= 2 { 2 } else { 1 };
        let sy = if self.height >= 2 { 2 } else { 1 };
        GrayImage::from_fn(w, h, |x, y| {
            let mut sum = 0u32;
            let mut count = 0u32;
            for dy in 0..sy {
                for dx in 0..sx {
                    sum += self.get(x * sx + dx, y * sy + dy) as u32;
                    count += 1;
                }
            }
            ((sum + count / 2) / count) as u8
        })
    }
}

/// Parse a binary P5 PGM with maxval ≤ 255.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let bad = |reason: &str| Error::Pgm {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut pos = 0usize;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    if tokens[0] != "P5" {
        return Err(bad("magic number is not P5"));
    }
    let parse = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| bad(&format!("invalid {what} {s:?}")))
    };
    let width = parse(tokens[1], "width")?;
    let height = parse(tokens[2], "height")?;
    let maxval = parse(tokens[3], "maxval")?;
    if width == 0 || height == 0 {
        return Err(bad("zero dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit PGM (maxval 1..=255) is supported"));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("missing raster separator"));
    }
    pos += 1;
    let need = width * height;
    if bytes.len() - pos < need {
        return Err(bad("raster shorter than width*height"));
    }
    let data = bytes[pos..pos + need].to_vec();
    GrayImage::new(width, height, data)
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, path)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 40 + y) as u8);
        let bytes = encode_pgm(&img);
        assert_eq!(decode_pgm(&bytes, Path::new("t.pgm")).unwrap(), img);
    }

    #[test]
    fn header_with_comment() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[7, 9]);
        let img = decode_pgm(&bytes, Path::new("t.pgm")).unwrap();
        assert_eq!(img.data(), &[7, 9]);
    }

    #[test]
    fn rejects_malformed_headers() {
        for bytes in [
            b"P2\n2 1\n255\n\x01\x02".to_vec(),
            b"P5\n2 x\n255\n\x01\x02".to_vec(),
            b"P5\n2 1\n65535\n\x01\x02".to_vec(),
            b"P5\n2 2\n255\n\x01\x02".to_vec(),
            b"P5\n2".to_vec(),
        ] {
            let err = decode_pgm(&bytes, Path::new("bad.pgm")).unwrap_err();
            assert!(matches!(err, Error::Pgm { .. }), "{err}");
        }
    }

    #[test]
    fn downsample_rounds_mean() {
        let img = GrayImage::new(2, 2, vec![0, 1, 1, 1]).unwrap();
        assert_eq!(img.downsample2().data(), &[1]);
        let img = GrayImage::new(4, 2, vec![0, 0, 10, 20, 0, 0, 30, 40]).unwrap();
        assert_eq!(img.downsample2().data(), &[0, 25]);
    }
}
