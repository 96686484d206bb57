//! Row-major float images, binary masks, and Netpbm readers/writers.
//!
//! Color goes out as binary PPM (P6, maxval 255). Scalar images (depth,
//! weight maps) go out as 16-bit big-endian PGM (P5) with the value scale
//! recorded in a `# scale:` header comment: stored = round(v / scale * 65535).
//! Masks are 8-bit PGM with values 0/255.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ScalarImage {
    pub fn new(width: usize, height: usize) -> Self {
        ScalarImage {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        RgbImage {
            width,
            height,
            data: vec![[0.0; 3]; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: [f64; 3]) {
        self.data[y * self.width + x] = v;
    }
}

/// Binary mask over an image grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    /// Out-of-bounds pixels count as outside the mask.
    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return false;
        }
        self.data[y as usize * self.width + x as usize]
    }

    /// True if any pixel within `radius` (Chebyshev) of (x, y) is set.
    pub fn contains_dilated(&self, x: i64, y: i64, radius: i64) -> bool {
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                if self.contains(x + dx, y + dy) {
                    return true;
                }
            }
        }
        false
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Intersection-over-union of two same-sized masks; 1.0 when both empty.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    assert_eq!((a.width, a.height), (b.width, b.height));
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.data.iter().zip(&b.data) {
        if x && y {
            inter += 1;
        }
        if x || y {
            union += 1;
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary PPM (P6, maxval 255) bytes; values clamped to \[0,1].
pub fn ppm_bytes(img: &RgbImage) -> Vec<u8> {
    let mut buf = Vec::with_capacity(32 + img.data.len() * 3);
    let _ = write!(buf, "P6\n{} {}\n255\n", img.width, img.height);
    for px in &img.data {
        buf.push(quantize8(px[0]));
        buf.push(quantize8(px[1]));
        buf.push(quantize8(px[2]));
    }
    buf
}

/// Binary PPM (P6, maxval 255); values clamped to \[0,1].
pub fn write_ppm(img: &RgbImage, path: &Path) -> io::Result<()> {
    fs::write(path, ppm_bytes(img))
}

/// 16-bit big-endian PGM (P5) with the scale factor in a header comment.
pub fn write_pgm16(img: &ScalarImage, path: &Path) -> io::Result<()> {
    let scale = {
        let m = img.max_value();
        if m > 0.0 {
            m
        } else {
            1.0
        }
    };
    let mut buf = Vec::with_capacity(64 + img.data.len() * 2);
    write!(
        buf,
        "P5\n# scale: {scale}\n{} {}\n65535\n",
        img.width, img.height
    )?;
    for &v in &img.data {
        let q = ((v / scale).clamp(0.0, 1.0) * 65535.0).round() as u16;
        buf.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, buf)
}

/// 8-bit PGM (P5) with 0/255 values.
pub fn write_mask_pgm(mask: &BinaryMask, path: &Path) -> io::Result<()> {
    let mut buf = Vec::with_capacity(32 + mask.data.len());
    write!(buf, "P5\n{} {}\n255\n", mask.width, mask.height)?;
    for &b in &mask.data {
        buf.push(if b { 255 } else { 0 });
    }
    fs::write(path, buf)
}

/// Read an 8-bit P5 mask written by [`write_mask_pgm`]; any value > 127 is
/// treated as set.
pub fn read_mask_pgm(path: &Path) -> io::Result<BinaryMask> {
    parse_mask_pgm(&fs::read(path)?)
}

/// Parse an 8-bit P5 mask from raw bytes.
pub fn parse_mask_pgm(bytes: &[u8]) -> io::Result<BinaryMask> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    let mut pos = 0usize;
    let mut fields: Vec<String> = Vec::new();
    // Header: magic, width, height, maxval; '#' starts a comment line.
    while fields.len() < 4 {
        if pos >= bytes.len() {
            return Err(bad("truncated PGM header"));
        }
        let c = bytes[pos];
        if c == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else if c.is_ascii_whitespace() {
            pos += 1;
        } else {
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
    }
    pos += 1; // single whitespace byte after maxval
    if fields[0] != "P5" {
        return Err(bad("not a P5 PGM"));
    }
    let width: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
    let height: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
    let maxval: usize = fields[3].parse().map_err(|_| bad("bad maxval"))?;
    if maxval != 255 {
        return Err(bad("mask PGM must have maxval 255"));
    }
    if bytes.len() < pos + width * height {
        return Err(bad("truncated PGM payload"));
    }
    let mut mask = BinaryMask::new(width, height);
    for (i, &b) in bytes[pos..pos + width * height].iter().enumerate() {
        mask.data[i] = b > 127;
    }
    Ok(mask)
}
