//! Radiance HDR (RGBE) codec with run-length encoded scanlines.

use std::path::Path;

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::image::LinearImage;
use crate::scalar::Real;

const MIN_RLE_WIDTH: usize = 8;
const MAX_RLE_WIDTH: usize = 0x7fff;

/// Splits a positive finite value into `m · 2^e` with `m ∈ [0.5, 1)`.
fn frexp(v: f64) -> (f64, i32) {
    let mut e = v.log2().floor() as i32 + 1;
    let mut m = v * 2f64.powi(-e);
    while m >= 1.0 {
        m *= 0.5;
        e += 1;
    }
    while m < 0.5 {
        m *= 2.0;
        e -= 1;
    }
    (m, e)
}

/// Encodes one linear RGB triple into shared-exponent bytes.
///
/// Mantissas are rounded to nearest, so every component is within half a
/// mantissa step (`max / 256`) of its input.
pub fn encode_pixel(rgb: [f64; 3]) -> [u8; 4] {
    let v = rgb[0].max(rgb[1]).max(rgb[2]);
    if !(v > 1e-38) {
        return [0; 4];
    }
    let (_, mut e) = frexp(v);
    if e > 127 {
        // saturate at the largest representable exponent
        return [255, 255, 255, 255];
    }
    let mut scale = 2f64.powi(8 - e);
    if (v * scale).round() >= 256.0 {
        e += 1;
        scale *= 0.5;
    }
    if e < -127 {
        return [0; 4];
    }
    let q = |c: f64| (c.max(0.0) * scale).round().min(255.0) as u8;
    [q(rgb[0]), q(rgb[1]), q(rgb[2]), (e + 128) as u8]
}

pub fn decode_pixel(px: [u8; 4]) -> [f64; 3] {
    if px[3] == 0 {
        return [0.0; 3];
    }
    let f = 2f64.powi(px[3] as i32 - 136);
    [px[0] as f64 * f, px[1] as f64 * f, px[2] as f64 * f]
}

fn write_rle_channel(out: &mut Vec<u8>, data: &[u8]) {
    let n = data.len();
    let mut i = 0;
    while i < n {
        // find the next run of at least 4 equal bytes
        let mut run_start = i;
        let mut run_len = 0;
        while run_start < n {
            run_len = 1;
            while run_start + run_len < n && run_len < 127 && data[run_start + run_len] == data[run_start] {
                run_len += 1;
            }
            if run_len >= 4 {
                break;
            }
            run_start += run_len;
        }
        if run_len < 4 {
            run_start = n;
        }
        // literals up to the run
        while i < run_start {
            let count = (run_start - i).min(128);
            out.push(count as u8);
            out.extend_from_slice(&data[i..i + count]);
            i += count;
        }
        if run_start < n {
            out.push((128 + run_len) as u8);
            out.push(data[run_start]);
            i = run_start + run_len;
        }
    }
}

/// Serializes an image into Radiance HDR bytes.
pub fn encode<T: Real>(img: &LinearImage<T>) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let mut out = format!("#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y {h} +X {w}\n").into_bytes();
    let rle = (MIN_RLE_WIDTH..=MAX_RLE_WIDTH).contains(&w);
    let mut channels = vec![vec![0u8; w]; 4];
    for y in 0..h {
        for x in 0..w {
            let [r, g, b] = img.get(x, y);
            let px = encode_pixel([r.to_f64_lossy(), g.to_f64_lossy(), b.to_f64_lossy()]);
            if rle {
                for c in 0..4 {
                    channels[c][x] = px[c];
                }
            } else {
                out.extend_from_slice(&px);
            }
        }
        if rle {
            out.extend_from_slice(&[2, 2, (w >> 8) as u8, (w & 0xff) as u8]);
            for ch in &channels {
                write_rle_channel(&mut out, ch);
            }
        }
    }
    out
}

pub fn write_rgbe<T: Real>(img: &LinearImage<T>, path: &Path) -> Result<()> {
    if img.data().iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(Error::invalid("RGBE output requires finite non-negative radiance"));
    }
    write_file(path, &encode(img))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn line(&mut self) -> Option<&'a str> {
        if self.pos >= self.bytes.len() {
            return None;
        }
        let rest = &self.bytes[self.pos..];
        let end = rest.iter().position(|b| *b == b'\n').unwrap_or(rest.len());
        self.pos += (end + 1).min(rest.len());
        std::str::from_utf8(&rest[..end]).ok().map(|s| s.trim_end_matches('\r'))
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }
}

/// Decodes Radiance HDR bytes; `origin` names the source in error messages.
pub fn decode<T: Real>(bytes: &[u8], origin: &Path) -> Result<LinearImage<T>> {
    let bad = |msg: &str| Error::format(origin, msg.to_string());
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.line().ok_or_else(|| bad("empty file"))?;
    if !(magic.starts_with("#?RADIANCE") || magic.starts_with("#?RGBE")) {
        return Err(bad("malformed header: missing #?RADIANCE signature"));
    }
    loop {
        let line = cur.line().ok_or_else(|| bad("malformed header: no blank line"))?;
        if line.is_empty() {
            break;
        }
        if let Some(fmt) = line.strip_prefix("FORMAT=") {
            if fmt.trim() != "32-bit_rle_rgbe" {
                return Err(bad(&format!("malformed header: unsupported format {fmt}")));
            }
        }
    }
    let res = cur.line().ok_or_else(|| bad("malformed header: missing resolution line"))?;
    let tok: Vec<&str> = res.split_whitespace().collect();
    if tok.len() != 4 || tok[0] != "-Y" || tok[2] != "+X" {
        return Err(bad(&format!("unsupported orientation line '{res}'")));
    }
    let h: usize = tok[1].parse().map_err(|_| bad("bad height"))?;
    let w: usize = tok[3].parse().map_err(|_| bad("bad width"))?;

    let truncated = || bad("truncated scanline");
    let mut data = Vec::with_capacity(3 * w * h);
    let mut line = vec![[0u8; 4]; w];
    for _ in 0..h {
        let head = bytes.get(cur.pos..cur.pos + 4).ok_or_else(truncated)?;
        let is_rle = (MIN_RLE_WIDTH..=MAX_RLE_WIDTH).contains(&w)
            && head[0] == 2
            && head[1] == 2
            && head[2] & 0x80 == 0
            && ((head[2] as usize) << 8 | head[3] as usize) == w;
        if is_rle {
            cur.pos += 4;
            for c in 0..4 {
                let mut x = 0;
                while x < w {
                    let count = cur.take(1).ok_or_else(truncated)?[0] as usize;
                    if count > 128 {
                        let n = count - 128;
                        let v = cur.take(1).ok_or_else(truncated)?[0];
                        if x + n > w {
                            return Err(bad("run overflows scanline"));
                        }
                        line[x..x + n].iter_mut().for_each(|px| px[c] = v);
                        x += n;
                    } else {
                        if count == 0 || x + count > w {
                            return Err(bad("invalid literal count"));
                        }
                        let src = cur.take(count).ok_or_else(truncated)?;
                        for (px, v) in line[x..x + count].iter_mut().zip(src) {
                            px[c] = *v;
                        }
                        x += count;
                    }
                }
            }
        } else {
            // flat pixels, with old-style (1,1,1,n) repeats
            let mut x = 0;
            let mut shift = 0;
            while x < w {
                let p = cur.take(4).ok_or_else(truncated)?;
                if p[0] == 1 && p[1] == 1 && p[2] == 1 {
                    let n = (p[3] as usize) << shift;
                    if x == 0 || x + n > w {
                        return Err(bad("invalid repeat run"));
                    }
                    let prev = line[x - 1];
                    line[x..x + n].fill(prev);
                    x += n;
                    shift += 8;
                } else {
                    line[x] = [p[0], p[1], p[2], p[3]];
                    x += 1;
                    shift = 0;
                }
            }
        }
        for px in &line {
            data.extend(decode_pixel(*px).iter().map(|v| T::lit(*v)));
        }
    }
    LinearImage::from_vec(w, h, data)
}

pub fn read_rgbe<T: Real>(path: &Path) -> Result<LinearImage<T>> {
    decode(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn max_rel_err(a: &LinearImage<f64>, b: &LinearImage<f64>) -> f64 {
        a.pixels()
            .zip(b.pixels())
            .map(|(p, q)| {
                let m = p[0].max(p[1]).max(p[2]);
                (0..3).map(|c| (p[c] - q[c]).abs() / m).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_is_zero_exponent() {
        assert_eq!(encode_pixel([0.0; 3]), [0, 0, 0, 0]);
        assert_eq!(decode_pixel([0, 0, 0, 0]), [0.0; 3]);
    }

    #[test]
    fn unit_white_matches_brute_force_scan() {
        // best (mantissa, exponent) pair by exhaustive search
        let target = 1.0f64;
        let mut best = (f64::INFINITY, 0u8, 0u8);
        for e in 1..=255u8 {
            for m in 128..=255u8 {
                let v = m as f64 * 2f64.powi(e as i32 - 136);
                let err = (v - target).abs();
                if err < best.0 {
                    best = (err, m, e);
                }
            }
        }
        assert_eq!((best.1, best.2), (128, 129));
        assert_eq!(encode_pixel([1.0; 3]), [128, 128, 128, 129]);
        assert_eq!(decode_pixel([128, 128, 128, 129]), [1.0; 3]);
    }

    #[test]
    fn random_roundtrip_within_one_percent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..64 * 32)
            .flat_map(|_| {
                let scale = 10f64.powf(rng.gen_range(-6.0..30.0));
                [rng.gen_range(0.0..1.0) * scale, rng.gen_range(0.0..1.0) * scale, rng.gen_range(0.0..1.0) * scale]
            })
            .collect();
        let img = LinearImage::from_vec(64, 32, data).unwrap();
        let back: LinearImage<f64> = decode(&encode(&img), Path::new("mem")).unwrap();
        assert!(max_rel_err(&img, &back) <= 0.01);
    }

    #[test]
    fn flat_scanlines_decode() {
        // width 4 is below the RLE minimum, so scanlines are flat
        let img = LinearImage::from_vec(4, 2, (0..24).map(|i| i as f64 * 0.25 + 0.5).collect()).unwrap();
        let bytes = encode(&img);
        assert_eq!(bytes.len(), "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 2 +X 4\n".len() + 32);
        let back: LinearImage<f64> = decode(&bytes, Path::new("mem")).unwrap();
        assert!(max_rel_err(&img, &back) <= 0.01);
    }

    #[test]
    fn constant_rows_compress() {
        let img = LinearImage::<f64>::filled(256, 4, [0.5, 0.25, 2.0]);
        let bytes = encode(&img);
        assert!(bytes.len() < 256 * 4);
        let back: LinearImage<f64> = decode(&bytes, Path::new("mem")).unwrap();
        assert!(back.pixels().all(|p| p == [0.5, 0.25, 2.0]));
    }

    #[test]
    fn header_errors() {
        let p = Path::new("mem");
        assert!(decode::<f64>(b"P6\n", p).is_err());
        assert!(decode::<f64>(b"#?RADIANCE\nFORMAT=32-bit_rle_xyze\n\n-Y 1 +X 1\n\0\0\0\0", p).is_err());
        let e = decode::<f64>(b"#?RADIANCE\n\n+Y 1 +X 1\n\0\0\0\0", p).unwrap_err();
        assert!(e.to_string().contains("orientation"));
        let e = decode::<f64>(b"#?RGBE\n\n-Y 2 +X 1\n\0\0\0\0", p).unwrap_err();
        assert!(e.to_string().contains("truncated"));
    }

    #[test]
    fn truncated_rle_scanline() {
        let img = LinearImage::<f64>::filled(16, 2, [1.0, 2.0, 3.0]);
        let bytes = encode(&img);
        assert!(decode::<f64>(&bytes[..bytes.len() - 3], Path::new("mem")).is_err());
    }

    proptest::proptest! {
        #[test]
        fn pixel_error_bounded_by_shared_exponent(r in 1e-6f64..1e30, g in 0.0f64..1.0, b in 0.0f64..1.0) {
            let px = [r, g * r, b * r];
            let back = decode_pixel(encode_pixel(px));
            for c in 0..3 {
                proptest::prop_assert!((back[c] - px[c]).abs() <= 0.01 * r);
            }
        }
    }
}
