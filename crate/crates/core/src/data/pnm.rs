//! Netpbm P2/P3/P5/P6 decoding (maxval ≤ 255) and binary encoding.

use super::{DataError, Image, Rgb8Image};

/// Decoded raster before scaling: `channels` is 1 or 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnmRaster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub maxval: u16,
    pub samples: Vec<u8>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err<T>(&self, reason: impl Into<String>) -> Result<T, DataError> {
        Err(DataError::Parse {
            offset: self.pos,
            reason: reason.into(),
        })
    }

    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, DataError> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return if self.pos >= self.bytes.len() {
                self.err(format!("truncated while reading {what}"))
            } else {
                self.err(format!("expected a decimal {what}"))
            };
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse().or_else(|_| {
            self.pos = start;
            self.err(format!("{what} is too large"))
        })
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<PnmRaster, DataError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let (ascii, channels) = match bytes.get(..2) {
        Some(b"P2") => (true, 1),
        Some(b"P3") => (true, 3),
        Some(b"P5") => (false, 1),
        Some(b"P6") => (false, 3),
        _ => return cur.err("bad magic, expected P2, P3, P5 or P6"),
    };
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_space();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return cur.err("zero image extent");
    }
    if maxval == 0 || maxval > 255 {
        cur.pos = maxval_at;
        return cur.err(format!("maxval {maxval} outside 1..=255"));
    }
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .filter(|&n| n <= 1 << 28);
    let Some(count) = count else {
        return cur.err("image is too large");
    };
    let mut samples = Vec::with_capacity(count);
    if ascii {
        for _ in 0..count {
            let at = cur.pos;
            let v = cur.number("sample")?;
            if v > maxval {
                cur.pos = at;
                return cur.err(format!("sample {v} exceeds maxval {maxval}"));
            }
            samples.push(v as u8);
        }
    } else {
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            Some(_) => return cur.err("expected whitespace before raster"),
            None => return cur.err("truncated before raster"),
        }
        let Some(raster) = bytes.get(cur.pos..cur.pos + count) else {
            cur.pos = bytes.len();
            return cur.err(format!("truncated raster: expected {count} bytes"));
        };
        if let Some(i) = raster.iter().position(|&v| v as usize > maxval) {
            cur.pos += i;
            return cur.err(format!("sample {} exceeds maxval {maxval}", raster[i]));
        }
        samples.extend_from_slice(raster);
    }
    Ok(PnmRaster {
        width,
        height,
        channels,
        maxval: maxval as u16,
        samples,
    })
}

/// Decodes a PNM into a 3-channel image with values in `[0, 1]`; grayscale
/// is replicated into all channels.
pub fn load_pnm(bytes: &[u8]) -> Result<Image, DataError> {
    let r = decode_pnm(bytes)?;
    let scale = f64::from(r.maxval);
    let plane = r.width * r.height;
    let mut data = vec![0.0; 3 * plane];
    for p in 0..plane {
        for c in 0..3 {
            let s = if r.channels == 1 { r.samples[p] } else { r.samples[p * 3 + c] };
            data[c * plane + p] = f64::from(s) / scale;
        }
    }
    Image::new(r.height, r.width, data)
}

/// Decodes a PNM into 8-bit RGB, rescaling to maxval 255.
pub fn load_rgb8(bytes: &[u8]) -> Result<Rgb8Image, DataError> {
    let r = decode_pnm(bytes)?;
    let rescale = |v: u8| -> u8 {
        if r.maxval == 255 {
            v
        } else {
            (f64::from(v) * 255.0 / f64::from(r.maxval)).round() as u8
        }
    };
    let pixels = (0..r.width * r.height)
        .map(|p| {
            if r.channels == 1 {
                let g = rescale(r.samples[p]);
                [g, g, g]
            } else {
                [
                    rescale(r.samples[3 * p]),
                    rescale(r.samples[3 * p + 1]),
                    rescale(r.samples[3 * p + 2]),
                ]
            }
        })
        .collect();
    Ok(Rgb8Image {
        width: r.width,
        height: r.height,
        pixels,
    })
}

/// Binary P6 encoding.
pub fn encode_p6(image: &Rgb8Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.reserve(image.pixels.len() * 3);
    for px in &image.pixels {
        out.extend_from_slice(px);
    }
    out
}

/// Binary P5 encoding of a single-channel raster.
pub fn encode_p5(width: usize, height: usize, gray: &[u8]) -> Vec<u8> {
    assert_eq!(gray.len(), width * height, "raster size mismatch");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(gray);
    out
}
