//! Masked image-quality metrics and rank correlation.
//!
//! Images are converted to `[0, 1]`, background pixels are set to zero, the
//! metric is computed per pixel and channel, and only foreground pixels are
//! averaged.

pub mod report;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::image::{Mask, TonemappedImage};
use crate::scalar::Real;

pub const SSIM_WINDOW: usize = 7;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
const EXACT_PERMUTATION_LIMIT: usize = 10;

fn check_pair(a: &TonemappedImage, b: &TonemappedImage, mask: &Mask) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    mask.check_dims(a.width(), a.height())?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(())
}

/// Background-zeroed image as `[0,1]` floats, one plane per channel.
fn planes<T: Real>(img: &TonemappedImage, mask: &Mask) -> [Vec<T>; 3] {
    let n = img.width() * img.height();
    let scale = T::one() / T::lit(255.0);
    std::array::from_fn(|c| {
        (0..n)
            .map(|i| if mask.bits()[i] { T::from_u8(img.data()[3 * i + c]).unwrap() * scale } else { T::zero() })
            .collect()
    })
}

/// PSNR in dB from the mean squared error over masked pixels and all
/// channels; `+∞` for identical foregrounds.
pub fn masked_psnr<T: Real>(a: &TonemappedImage, b: &TonemappedImage, mask: &Mask) -> Result<T> {
    check_pair(a, b, mask)?;
    let (pa, pb) = (planes::<T>(a, mask), planes::<T>(b, mask));
    let mut sse = T::zero();
    for c in 0..3 {
        for (i, _) in mask.bits().iter().enumerate().filter(|(_, m)| **m) {
            let d = pa[c][i] - pb[c][i];
            sse = sse + d * d;
        }
    }
    let mse = sse / T::from_usize_lossy(3 * mask.count());
    if mse == T::zero() {
        return Ok(T::infinity());
    }
    Ok(T::lit(10.0) * (T::one() / mse).log10())
}

/// Sums over a window of half-width `r` clipped to `[0, n)`, along one axis.
fn box_sum_1d<T: Real>(src: &[T], dst: &mut [T], n: usize, stride: usize, count: usize, r: usize) {
    for line in 0..count {
        let base = if stride == 1 { line * n } else { line };
        let at = |i: usize| base + i * stride;
        let mut acc = T::zero();
        for i in 0..r.min(n) {
            acc = acc + src[at(i)];
        }
        for i in 0..n {
            if i + r < n {
                acc = acc + src[at(i + r)];
            }
            dst[at(i)] = acc;
            if i >= r {
                acc = acc - src[at(i - r)];
            }
        }
    }
}

fn box_sum<T: Real>(src: &[T], w: usize, h: usize, r: usize) -> Vec<T> {
    let mut tmp = vec![T::zero(); src.len()];
    box_sum_1d(src, &mut tmp, w, 1, h, r);
    let mut out = vec![T::zero(); src.len()];
    box_sum_1d(&tmp, &mut out, h, w, w, r);
    out
}

/// Per-pixel SSIM map of one channel with a uniform window cropped at the
/// image borders and sample (n-1) covariance normalization.
pub fn ssim_map<T: Real>(a: &[T], b: &[T], w: usize, h: usize) -> Vec<T> {
    let r = SSIM_WINDOW / 2;
    let prod = |x: &[T], y: &[T]| x.iter().zip(y).map(|(p, q)| *p * *q).collect::<Vec<T>>();
    let sa = box_sum(a, w, h, r);
    let sb = box_sum(b, w, h, r);
    let saa = box_sum(&prod(a, a), w, h, r);
    let sbb = box_sum(&prod(b, b), w, h, r);
    let sab = box_sum(&prod(a, b), w, h, r);
    let c1 = T::lit(SSIM_K1 * SSIM_K1);
    let c2 = T::lit(SSIM_K2 * SSIM_K2);
    let two = T::lit(2.0);
    let span = |i: usize, n: usize| (i + r + 1).min(n) - i.saturating_sub(r);
    (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let n = T::from_usize_lossy(span(x, w) * span(y, h));
            let cov_norm = n / (n - T::one());
            let (ma, mb) = (sa[i] / n, sb[i] / n);
            let va = (saa[i] / n - ma * ma) * cov_norm;
            let vb = (sbb[i] / n - mb * mb) * cov_norm;
            let vab = (sab[i] / n - ma * mb) * cov_norm;
            ((two * ma * mb + c1) * (two * vab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .collect()
}

/// Mean SSIM over masked pixels and channels (7×7 uniform window, data range 1).
pub fn masked_ssim<T: Real>(a: &TonemappedImage, b: &TonemappedImage, mask: &Mask) -> Result<T> {
    check_pair(a, b, mask)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::invalid(format!("image {w}x{h} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")));
    }
    let (pa, pb) = (planes::<T>(a, mask), planes::<T>(b, mask));
    let mut total = T::zero();
    for c in 0..3 {
        let map = ssim_map(&pa[c], &pb[c], w, h);
        total = total + map.iter().zip(mask.bits()).filter(|(_, m)| **m).map(|(s, _)| *s).sum::<T>();
    }
    Ok(total / T::from_usize_lossy(3 * mask.count()))
}

/// Mean of an externally computed per-pixel distance map over masked pixels.
///
/// The distance network is expected to see images mapped to `[-1, 1]` with
/// background pixels set to 0, and its feature-difference maps upscaled to
/// the image resolution.
pub fn masked_perceptual<T: Real>(dist: &[T], width: usize, height: usize, mask: &Mask) -> Result<T> {
    if dist.len() != width * height {
        return Err(Error::DimensionMismatch(format!("{} values for {width}x{height}", dist.len())));
    }
    mask.check_dims(width, height)?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let sum: T = dist.iter().zip(mask.bits()).filter(|(_, m)| **m).map(|(d, _)| *d).sum();
    Ok(sum / T::from_usize_lossy(mask.count()))
}

/// Ranks starting at 1, ties receiving their average rank.
pub fn average_ranks<T: Real>(x: &[T]) -> Vec<T> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|a, b| x[*a].partial_cmp(&x[*b]).expect("finite values"));
    let mut ranks = vec![T::zero(); x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = T::from_usize_lossy(i + j + 2) / T::lit(2.0);
        for k in &idx[i..=j] {
            ranks[*k] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman<T> {
    pub rho: T,
    /// Two-sided p-value: exact permutation test for N ≤ 10, Student-t otherwise.
    pub p: T,
}

fn centered<T: Real>(v: &[T]) -> Vec<T> {
    let mean = v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len());
    v.iter().map(|x| *x - mean).collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman<T: Real>(x: &[T], y: &[T]) -> Result<Spearman<T>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} values", x.len(), y.len())));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid(format!("rank correlation needs at least 2 values, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("rank correlation inputs must be finite"));
    }
    let rx = centered(&average_ranks(x));
    let ry = centered(&average_ranks(y));
    let sxx: T = rx.iter().map(|v| *v * *v).sum();
    let syy: T = ry.iter().map(|v| *v * *v).sum();
    if sxx == T::zero() || syy == T::zero() {
        return Err(Error::invalid("rank correlation is undefined for a constant input"));
    }
    let norm = (sxx * syy).sqrt();
    let dot = |perm: &[T]| rx.iter().zip(perm).map(|(a, b)| *a * *b).sum::<T>();
    let rho = dot(&ry) / norm;
    let p = if n <= EXACT_PERMUTATION_LIMIT {
        // Heap's algorithm over all n! orderings of the y ranks
        let threshold = rho.abs() * norm - T::lit(1e-9) * norm;
        let mut a = ry.clone();
        let mut c = vec![0usize; n];
        let mut extreme = u64::from(dot(&a).abs() >= threshold);
        let mut total = 1u64;
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    a.swap(0, i);
                } else {
                    a.swap(c[i], i);
                }
                total += 1;
                if dot(&a).abs() >= threshold {
                    extreme += 1;
                }
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        T::lit(extreme as f64 / total as f64)
    } else {
        let r = rho.to_f64_lossy().clamp(-1.0, 1.0);
        let dof = (n - 2) as f64;
        if (1.0 - r * r) <= 0.0 {
            T::zero()
        } else {
            let t = r * (dof / (1.0 - r * r)).sqrt();
            let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
            T::lit(2.0 * (1.0 - dist.cdf(t.abs())))
        }
    };
    Ok(Spearman { rho, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant(w: usize, h: usize, v: u8) -> TonemappedImage {
        TonemappedImage::from_vec(w, h, vec![v; 3 * w * h]).unwrap()
    }

    #[test]
    fn identical_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = TonemappedImage::from_vec(9, 8, (0..9 * 8 * 3).map(|_| rng.gen()).collect()).unwrap();
        let m = Mask::new(9, 8, true);
        assert!(masked_psnr::<f64>(&a, &a, &m).unwrap().is_infinite());
        assert_eq!(masked_ssim::<f64>(&a, &a, &m).unwrap(), 1.0);
    }

    #[test]
    fn one_level_difference() {
        let m = Mask::from_fn(10, 10, |x, _| x < 6);
        let p = masked_psnr::<f64>(&constant(10, 10, 100), &constant(10, 10, 101), &m).unwrap();
        assert!((p - 20.0 * 255f64.log10()).abs() < 1e-9);
        assert!((p - 48.13).abs() < 0.01);
    }

    #[test]
    fn constant_image_ssim_closed_form() {
        // 0.5 and 0.25 are not representable in 8 bits, so use the nearest codes
        let (a, b) = (constant(8, 8, 128), constant(8, 8, 64));
        let (x, y) = (128.0 / 255.0, 64.0 / 255.0);
        let c1 = 1e-4;
        let want = (2.0 * x * y + c1) / (x * x + y * y + c1);
        let got = masked_ssim::<f64>(&a, &b, &Mask::new(8, 8, true)).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn metric_errors() {
        let a = constant(6, 6, 1);
        assert!(masked_ssim::<f64>(&a, &a, &Mask::new(6, 6, true)).is_err());
        assert!(matches!(masked_psnr::<f64>(&a, &a, &Mask::new(6, 6, false)), Err(Error::EmptyMask)));
        assert!(masked_psnr::<f64>(&a, &constant(6, 5, 1), &Mask::new(6, 6, true)).is_err());
    }

    #[test]
    fn perceptual_means() {
        let m = Mask::from_fn(4, 4, |x, y| x > y);
        assert!((masked_perceptual(&[0.2; 16], 4, 4, &m).unwrap() - 0.2f64).abs() < 1e-15);
        let ind: Vec<f64> = m.bits().iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
        assert_eq!(masked_perceptual(&ind, 4, 4, &m).unwrap(), 1.0);
        // left half of a horizontal ramp 0..7 over 8x2
        let ramp: Vec<f64> = (0..16).map(|i| (i % 8) as f64).collect();
        let half = Mask::from_fn(8, 2, |x, _| x < 4);
        assert_eq!(masked_perceptual(&ramp, 8, 2, &half).unwrap(), 1.5);
        assert!(masked_perceptual(&ramp, 8, 2, &Mask::new(8, 2, false)).is_err());
    }

    #[test]
    fn spearman_perfect_orders() {
        let s = spearman::<f64>(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]).unwrap();
        assert!((s.rho - 1.0).abs() < 1e-12);
        assert!((s.p - 2.0 / 24.0).abs() < 1e-12);
        let s = spearman::<f64>(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((s.rho + 1.0).abs() < 1e-12);
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(spearman(&[1.0], &[1.0]).is_err());
        let s = spearman::<f64>(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((s.rho, s.p), (1.0, 1.0));
    }

    #[test]
    fn spearman_large_sample_uses_t() {
        let x: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..30).map(|i| ((i * 7) % 30) as f64).collect();
        let s = spearman(&x, &y).unwrap();
        assert!(s.p > 0.0 && s.p <= 1.0);
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
