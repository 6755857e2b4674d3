use rand::Rng;

use super::{Image, Sample, TARGET_SIZE};

/// Reflective padding applied before the center crop.
pub const AUGMENT_PAD: usize = 4;

fn remap(image: &Image, height: usize, width: usize, src: impl Fn(usize, usize) -> (usize, usize)) -> Image {
    let mut data = Vec::with_capacity(3 * height * width);
    for c in 0..3 {
        for y in 0..height {
            for x in 0..width {
                let (sy, sx) = src(y, x);
                data.push(image.get(c, sy, sx));
            }
        }
    }
    Image { height, width, data }
}

pub fn hflip(image: &Image) -> Image {
    let w = image.width;
    remap(image, image.height, w, |y, x| (y, w - 1 - x))
}

/// Rotates counterclockwise by `quarter_turns · 90°`.
pub fn rotate90(image: &Image, quarter_turns: usize) -> Image {
    let mut out = image.clone();
    for _ in 0..quarter_turns % 4 {
        let w = out.width;
        out = remap(&out, out.width, out.height, |y, x| (x, w - 1 - y));
    }
    out
}

/// Mirror index without repeating the edge pixel (`-1 → 1`).
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m < n as isize { m } else { period - m }) as usize
}

pub fn reflect_pad(image: &Image, pad: usize) -> Image {
    let (h, w) = (image.height, image.width);
    remap(image, h + 2 * pad, w + 2 * pad, |y, x| {
        (
            reflect(y as isize - pad as isize, h),
            reflect(x as isize - pad as isize, w),
        )
    })
}

/// Central `size × size` window, clipped to the image extents.
pub fn center_crop(image: &Image, size: usize) -> Image {
    let (ch, cw) = (size.min(image.height), size.min(image.width));
    let top = (image.height - ch) / 2;
    let left = (image.width - cw) / 2;
    remap(image, ch, cw, |y, x| (y + top, x + left))
}

/// Random horizontal flip (p = 0.5), a uniformly chosen right-angle
/// rotation, then reflective pad and center crop back to the model size.
pub fn augment<R: Rng + ?Sized>(sample: &Sample, rng: &mut R) -> Sample {
    let mut image = sample.image.clone();
    if rng.random_bool(0.5) {
        image = hflip(&image);
    }
    image = rotate90(&image, rng.random_range(0..4));
    image = center_crop(&reflect_pad(&image, AUGMENT_PAD), TARGET_SIZE);
    Sample { image, ..sample.clone() }
}
