//! Binary masks and distance queries.
//!
//! Masks are stored row-major as a dense bit plane. Point-to-mask queries go
//! through an exact Euclidean distance field that is built lazily on first
//! query and published atomically, so shared masks are safe to query from
//! many workers at once.
//!
//! Geometry convention: pixel (x, y) has its center at integer coordinates
//! (x, y). A query point is snapped to the nearest pixel center (clamped to
//! the image) and the distance is read there, which makes the fast path and a
//! brute-force scan agree bit for bit.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Axis-aligned box `[x, x+w] x [y, y+h]` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    /// Scale width and height by `factor` around the box center.
    pub fn expand(&self, factor: f64) -> BBox {
        let cx = self.x + self.w / 2.0;
        let cy = self.y + self.h / 2.0;
        let w = self.w * factor;
        let h = self.h * factor;
        BBox {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }

    /// Euclidean distance from a point to the nearest boundary point of the
    /// box; 0 when the point is inside or on the boundary.
    pub fn distance_to(&self, px: f64, py: f64) -> f64 {
        let dx = (self.x - px).max(0.0).max(px - (self.x + self.w));
        let dy = (self.y - py).max(0.0).max(py - (self.y + self.h));
        (dx * dx + dy * dy).sqrt()
    }
}

/// Dense binary mask with a lazily built exact Euclidean distance field.
#[derive(Debug)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
    foreground: usize,
    dist_sq: OnceLock<Vec<f64>>,
}

impl Clone for BinaryMask {
    fn clone(&self) -> Self {
        // The cache is cheap to rebuild; don't copy it.
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.data.clone(),
            foreground: self.foreground,
            dist_sq: OnceLock::new(),
        }
    }
}

impl PartialEq for BinaryMask {
    fn eq(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width && self.data == other.data
    }
}

impl BinaryMask {
    /// Build from a row-major plane of 0/1 values; length must be h*w.
    pub fn from_pixels(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Geometry(format!(
                "pixel plane length {} != {}x{}",
                data.len(),
                height,
                width
            )));
        }
        let data: Vec<u8> = data.into_iter().map(|v| u8::from(v != 0)).collect();
        let foreground = data.iter().filter(|&&v| v != 0).count();
        Ok(BinaryMask {
            height,
            width,
            data,
            foreground,
            dist_sq: OnceLock::new(),
        })
    }

    /// Decode uncompressed COCO RLE: alternating background/foreground run
    /// lengths in column-major order, starting with background.
    pub fn decode_rle(counts: &[u64], size: (usize, usize)) -> Result<Self> {
        let (h, w) = size;
        let total: u64 = counts.iter().sum();
        if total != (h as u64) * (w as u64) {
            return Err(Error::Decode(format!(
                "rle counts sum to {} but mask has {}x{} = {} pixels",
                total,
                h,
                w,
                h * w
            )));
        }
        let mut data = vec![0u8; h * w];
        let mut pos = 0usize; // column-major flat index
        let mut value = 0u8;
        for &run in counts {
            if value == 1 {
                for p in pos..pos + run as usize {
                    let col = p / h;
                    let row = p % h;
                    data[row * w + col] = 1;
                }
            }
            pos += run as usize;
            value = 1 - value;
        }
        Self::from_pixels(h, w, data)
    }

    /// Encode back to uncompressed column-major RLE (starts with background).
    pub fn encode_rle(&self) -> Vec<u64> {
        let n = self.height * self.width;
        let mut counts = Vec::new();
        let mut prev = 0u8;
        let mut run = 0u64;
        for p in 0..n {
            let col = p / self.height;
            let row = p % self.height;
            let v = self.data[row * self.width + col];
            if v == prev {
                run += 1;
            } else {
                counts.push(run);
                prev = v;
                run = 1;
            }
        }
        counts.push(run);
        counts
    }

    /// Rasterize one or more polygons (flat `[x0,y0,x1,y1,...]` lists) with
    /// even-odd fill; multiple polygons union. A pixel is foreground iff its
    /// center lies inside.
    pub fn rasterize_polygons(polygons: &[Vec<f64>], size: (usize, usize)) -> Result<Self> {
        let (h, w) = size;
        let mut data = vec![0u8; h * w];
        for poly in polygons {
            if poly.len() < 6 || poly.len() % 2 != 0 {
                return Err(Error::Geometry(format!(
                    "polygon needs >= 3 vertices, got {} coordinates",
                    poly.len()
                )));
            }
            fill_polygon(poly, h, w, &mut data);
        }
        Self::from_pixels(h, w, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.foreground
    }

    pub fn is_empty(&self) -> bool {
        self.foreground == 0
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.data[y * self.width + x] != 0
    }

    /// Tight bounding box of the foreground, or None when empty.
    pub fn tight_bbox(&self) -> Option<BBox> {
        if self.is_empty() {
            return None;
        }
        let (mut x0, mut y0, mut x1, mut y1) = (self.width, self.height, 0usize, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.data[y * self.width + x] != 0 {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        Some(BBox::new(
            x0 as f64,
            y0 as f64,
            (x1 - x0) as f64,
            (y1 - y0) as f64,
        ))
    }

    /// Euclidean distance from a point to the nearest foreground pixel
    /// center, under nearest-pixel semantics: the query snaps to the nearest
    /// pixel center (clamped into the image) and the exact distance field is
    /// read there. Returns `f64::INFINITY` for an empty mask; callers fold
    /// the sentinel into a zero similarity term rather than failing.
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        if self.is_empty() {
            return f64::INFINITY;
        }
        let col = snap(x, self.width);
        let row = snap(y, self.height);
        self.distance_at(col, row)
    }

    /// Distance field value at an exact pixel.
    pub fn distance_at(&self, col: usize, row: usize) -> f64 {
        if self.is_empty() {
            return f64::INFINITY;
        }
        let field = self.dist_sq.get_or_init(|| squared_distance_field(self));
        field[row * self.width + col].sqrt()
    }
}

fn snap(v: f64, len: usize) -> usize {
    debug_assert!(len > 0);
    let r = v.round();
    if r <= 0.0 {
        0
    } else if r >= (len - 1) as f64 {
        len - 1
    } else {
        r as usize
    }
}

/// Scanline even-odd fill. Crossings use the half-open vertical span rule
/// [min(y), max(y)) so vertices on a scanline are counted once; a pixel
/// center at integer x is inside iff it falls in a left-closed right-open
/// interval between sorted crossing pairs.
fn fill_polygon(poly: &[f64], h: usize, w: usize, data: &mut [u8]) {
    let n = poly.len() / 2;
    let mut crossings: Vec<f64> = Vec::new();
    for y in 0..h {
        let yf = y as f64;
        crossings.clear();
        for i in 0..n {
            let (x1, y1) = (poly[2 * i], poly[2 * i + 1]);
            let j = (i + 1) % n;
            let (x2, y2) = (poly[2 * j], poly[2 * j + 1]);
            if (y1 <= yf && yf < y2) || (y2 <= yf && yf < y1) {
                crossings.push(x1 + (yf - y1) * (x2 - x1) / (y2 - y1));
            }
        }
        crossings.sort_by(f64::total_cmp);
        let mut k = 0;
        while k + 1 < crossings.len() {
            let (a, b) = (crossings[k], crossings[k + 1]);
            let start = a.ceil().max(0.0) as usize;
            for x in start..w {
                let xf = x as f64;
                if xf >= b {
                    break;
                }
                if xf >= a {
                    data[y * w + x] = 1;
                }
            }
            k += 2;
        }
    }
}

/// Exact squared Euclidean distance transform: per-column nearest foreground
/// distance, then a 1D lower-envelope pass along each row. Inputs are
/// integers so every value is an exactly representable sum of two squares.
fn squared_distance_field(mask: &BinaryMask) -> Vec<f64> {
    let (h, w) = (mask.height, mask.width);
    // Larger than any achievable within-image distance.
    let big = (h + w + 1) as f64;
    let big_sq = big * big;

    // Column pass: distance in rows to the nearest foreground in the same column.
    let mut col_sq = vec![big_sq; h * w];
    for x in 0..w {
        let mut run = big;
        for y in 0..h {
            run = if mask.data[y * w + x] != 0 {
                0.0
            } else {
                (run + 1.0).min(big)
            };
            col_sq[y * w + x] = run * run;
        }
        run = big;
        for y in (0..h).rev() {
            run = if mask.data[y * w + x] != 0 {
                0.0
            } else {
                (run + 1.0).min(big)
            };
            col_sq[y * w + x] = col_sq[y * w + x].min(run * run);
        }
    }

    // Row pass: d(x) = min_q ((x-q)^2 + col_sq(q)) via the parabola envelope.
    let mut out = vec![0.0f64; h * w];
    let mut v = vec![0usize; w];
    let mut z = vec![0.0f64; w + 1];
    let mut f = vec![0.0f64; w];
    for y in 0..h {
        f.copy_from_slice(&col_sq[y * w..(y + 1) * w]);
        let mut k = 0usize;
        v[0] = 0;
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        for q in 1..w {
            // s <= z[0] = -inf is impossible, so k never underflows.
            loop {
                let p = v[k];
                let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                    / (2.0 * (q as f64 - p as f64));
                if s <= z[k] {
                    k -= 1;
                } else {
                    k += 1;
                    v[k] = q;
                    z[k] = s;
                    z[k + 1] = f64::INFINITY;
                    break;
                }
            }
        }
        let mut k = 0usize;
        for x in 0..w {
            while z[k + 1] < x as f64 {
                k += 1;
            }
            let q = v[k];
            let d = x as f64 - q as f64;
            out[y * w + x] = d * d + f[q];
        }
    }
    out
}
