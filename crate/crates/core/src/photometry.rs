//! Tone mapping, per-channel exposure solving, HDR bracket merging and
//! least-squares color transforms.

use crate::error::{Error, Result};
use crate::image::{LinearImage, Mask, TonemappedImage};
use crate::math::Mat3;
use crate::scalar::Real;

pub const DEFAULT_GAMMA: f64 = 1.0 / 2.2;
pub const DEFAULT_SATURATION: f64 = 0.98;

const EV_RANGE: f64 = 16.0;
const EV_GRID_STEP: f64 = 0.5;
const EV_TOLERANCE: f64 = 1e-4;

/// `y = clamp(round(255·(2^ev·x)^γ), 0, 255)`, rounding half away from zero.
#[inline]
pub fn tone_map_value<T: Real>(x: T, ev: T, gamma: T) -> u8 {
    let y = (T::lit(255.0) * (T::lit(2.0).powf(ev) * x).powf(gamma)).round();
    y.max(T::zero()).min(T::lit(255.0)).to_u8().unwrap_or(0)
}

pub fn tone_map<T: Real>(img: &LinearImage<T>, ev: T, gamma: T) -> TonemappedImage {
    tone_map_channels(img, [ev; 3], gamma)
}

/// Tone mapping with an independent exposure per channel.
pub fn tone_map_channels<T: Real>(img: &LinearImage<T>, ev: [T; 3], gamma: T) -> TonemappedImage {
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, x)| tone_map_value(*x, ev[i % 3], gamma))
        .collect();
    TonemappedImage::from_vec(img.width(), img.height(), data).expect("same dimensions")
}

/// Inverse of the tone curve (ignoring quantization and clipping).
pub fn linearize<T: Real>(img: &TonemappedImage, ev: T, gamma: T) -> LinearImage<T> {
    let scale = T::lit(2.0).powf(-ev);
    let inv_gamma = T::one() / gamma;
    let data = img
        .data()
        .iter()
        .map(|y| (T::from_u8(*y).unwrap() / T::lit(255.0)).powf(inv_gamma) * scale)
        .collect();
    LinearImage::from_vec(img.width(), img.height(), data).expect("same dimensions")
}

/// Result of [`solve_exposure`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureSolution<T> {
    pub ev: [T; 3],
    /// Set for channels whose masked render is entirely zero (EV reported as 0).
    pub degenerate: [bool; 3],
}

fn exposure_objective<T: Real>(ev: T, xs: &[T], ys: &[T], gamma: T) -> T {
    let s = T::lit(2.0).powf(ev);
    let n = T::from_usize_lossy(xs.len());
    xs.iter()
        .zip(ys)
        .map(|(x, y)| {
            let t = T::lit(255.0) * (s * *x).powf(gamma).clamp01() - *y;
            t * t
        })
        .sum::<T>()
        / n
}

fn golden_section<T: Real>(mut a: T, mut b: T, f: impl Fn(T) -> T) -> T {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > T::lit(EV_TOLERANCE) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    (a + b) / T::lit(2.0)
}

/// Per-channel EV minimizing the masked MSE between the continuously tone
/// mapped render and the 8-bit target.
///
/// A 0.5-stop grid over [-16, 16] brackets the minimum, then golden-section
/// search refines it to 1e-4 stops.
pub fn solve_exposure<T: Real>(
    render: &LinearImage<T>,
    gt: &TonemappedImage,
    mask: &Mask,
    gamma: T,
) -> Result<ExposureSolution<T>> {
    if render.width() != gt.width() || render.height() != gt.height() {
        return Err(Error::DimensionMismatch(format!(
            "render {}x{} vs target {}x{}",
            render.width(),
            render.height(),
            gt.width(),
            gt.height()
        )));
    }
    mask.check_dims(render.width(), render.height())?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut out = ExposureSolution { ev: [T::zero(); 3], degenerate: [false; 3] };
    for c in 0..3 {
        let (xs, ys): (Vec<T>, Vec<T>) = mask
            .bits()
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| (render.data()[3 * i + c], T::from_u8(gt.data()[3 * i + c]).unwrap()))
            .unzip();
        if xs.iter().all(|x| *x <= T::zero()) {
            out.degenerate[c] = true;
            continue;
        }
        let f = |ev: T| exposure_objective(ev, &xs, &ys, gamma);
        let steps = (2.0 * EV_RANGE / EV_GRID_STEP) as usize;
        let mut best = (T::infinity(), T::zero());
        for k in 0..=steps {
            let ev = T::lit(-EV_RANGE + EV_GRID_STEP * k as f64);
            let v = f(ev);
            if v < best.0 {
                best = (v, ev);
            }
        }
        let lo = (best.1 - T::lit(EV_GRID_STEP)).max(T::lit(-EV_RANGE));
        let hi = (best.1 + T::lit(EV_GRID_STEP)).min(T::lit(EV_RANGE));
        out.ev[c] = golden_section(lo, hi, f);
    }
    Ok(out)
}

/// Registered frames with their shutter times in seconds.
#[derive(Debug, Clone)]
pub struct ExposureBracket<T> {
    frames: Vec<(LinearImage<T>, T)>,
}

impl<T: Real> ExposureBracket<T> {
    pub fn new(frames: Vec<(LinearImage<T>, T)>) -> Result<Self> {
        let Some((first, _)) = frames.first() else {
            return Err(Error::invalid("exposure bracket has no frames"));
        };
        let (w, h) = (first.width(), first.height());
        for (i, (img, t)) in frames.iter().enumerate() {
            if img.width() != w || img.height() != h {
                return Err(Error::DimensionMismatch(format!("frame {i} differs in size")));
            }
            if !(*t > T::zero()) || !t.is_finite() {
                return Err(Error::invalid(format!("frame {i} has shutter time {t}")));
            }
            if frames[..i].iter().any(|(_, s)| s == t) {
                return Err(Error::invalid(format!("shutter time {t} appears twice")));
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[(LinearImage<T>, T)] {
        &self.frames
    }
}

#[derive(Debug, Clone)]
pub struct MergedHdr<T> {
    pub image: LinearImage<T>,
    /// Pixels where every frame was saturated in some channel.
    pub saturated: Mask,
}

/// Hat-weighted merge of linear frames: `Σ w(x)·x/t / Σ w(x)` over samples
/// below `saturation`, with `w(x) = 1 - |2x - 1|`.
pub fn merge_brackets<T: Real>(bracket: &ExposureBracket<T>, saturation: T) -> Result<MergedHdr<T>> {
    if !(saturation > T::zero() && saturation <= T::one()) {
        return Err(Error::invalid(format!("saturation threshold {saturation} outside (0, 1]")));
    }
    let frames = &bracket.frames;
    let (w, h) = (frames[0].0.width(), frames[0].0.height());
    let shortest = frames
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut out = LinearImage::new(w, h);
    let mut saturated = Mask::new(w, h, false);
    let two = T::lit(2.0);
    for i in 0..w * h {
        let mut px = [T::zero(); 3];
        for c in 0..3 {
            // incremental weighted mean, exact when all estimates agree
            let mut mean = T::zero();
            let mut den = T::zero();
            // longest unsaturated frame, for pixels whose samples all carry zero weight
            let mut fallback: Option<(T, T)> = None;
            for (img, t) in frames {
                let x = img.data()[3 * i + c];
                if x >= saturation {
                    continue;
                }
                let wgt = T::one() - (two * x - T::one()).abs();
                if wgt > T::zero() {
                    den = den + wgt;
                    mean = mean + wgt / den * (x / *t - mean);
                }
                if fallback.map_or(true, |(ft, _)| *t > ft) {
                    fallback = Some((*t, x / *t));
                }
            }
            px[c] = if den > T::zero() {
                mean
            } else if let Some((_, v)) = fallback {
                v
            } else {
                let (img, t) = &frames[shortest];
                saturated.set(i % w, i / w, true);
                img.data()[3 * i + c] / *t
            };
        }
        out.set(i % w, i / w, px);
    }
    Ok(MergedHdr { image: out, saturated })
}

/// Linear 3×3 map applied per pixel as `out = M·in`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorTransform<T> {
    pub matrix: Mat3<T>,
    /// Root-mean-square residual of the fit over all patch channels.
    pub residual_rms: T,
}

impl<T: Real> ColorTransform<T> {
    pub fn apply(&self, rgb: [T; 3]) -> [T; 3] {
        self.matrix.mul_vec(crate::math::Vec3::from_array(rgb)).to_array()
    }

    /// Applies the transform to every pixel, clamping negatives to zero.
    pub fn apply_image(&self, img: &LinearImage<T>) -> LinearImage<T> {
        let mut out = img.clone();
        for px in out.data_mut().chunks_exact_mut(3) {
            let v = self.apply([px[0], px[1], px[2]]);
            for c in 0..3 {
                px[c] = v[c].max(T::zero());
            }
        }
        out
    }
}

const MAX_CONDITION: f64 = 1e12;

/// Least-squares `M = argmin ‖M·src - dst‖_F` via the normal equations.
pub fn fit_color_transform<T: Real>(src: &[[T; 3]], dst: &[[T; 3]]) -> Result<ColorTransform<T>> {
    if src.len() != dst.len() {
        return Err(Error::DimensionMismatch(format!("{} source vs {} target patches", src.len(), dst.len())));
    }
    if src.len() < 3 {
        return Err(Error::RankDeficient(f64::INFINITY));
    }
    let mut ata = Mat3::zeros();
    let mut atb = Mat3::zeros();
    for (s, d) in src.iter().zip(dst) {
        for i in 0..3 {
            for j in 0..3 {
                ata.m[i][j] = ata.m[i][j] + s[i] * s[j];
                atb.m[i][j] = atb.m[i][j] + s[i] * d[j];
            }
        }
    }
    let (eig, _) = ata.symmetric_eigen();
    let lmax = eig.iter().copied().fold(T::zero(), T::max);
    let lmin = eig.iter().copied().fold(T::infinity(), T::min);
    let cond = if lmin > T::zero() { (lmax / lmin).sqrt().to_f64_lossy() } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::RankDeficient(cond));
    }
    let inv = ata.inverse().ok_or(Error::RankDeficient(f64::INFINITY))?;
    let matrix = inv.mul_mat(&atb).transpose();
    let n = T::from_usize_lossy(3 * src.len());
    let sse: T = src
        .iter()
        .zip(dst)
        .map(|(s, d)| {
            let p = matrix.mul_vec(crate::math::Vec3::from_array(*s));
            (0..3).map(|c| (p[c] - d[c]) * (p[c] - d[c])).sum::<T>()
        })
        .sum();
    Ok(ColorTransform { matrix, residual_rms: (sse / n).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const G: f64 = DEFAULT_GAMMA;

    #[test]
    fn tone_map_endpoints_and_midpoint() {
        assert_eq!(tone_map_value(0.0, 0.0, G), 0);
        assert_eq!(tone_map_value(1.0, 0.0, G), 255);
        assert_eq!(tone_map_value(0.5, 0.0, G), 186);
        assert_eq!(tone_map_value(0.5f32, 0.0, G as f32), 186);
        assert_eq!(tone_map_value(2.0, -1.0, G), tone_map_value(1.0, 0.0, G));
        assert_eq!(tone_map_value(50.0, 0.0, G), 255);
    }

    #[test]
    fn tone_map_is_monotone() {
        let mut last = 0;
        for i in 0..2000 {
            let y = tone_map_value(i as f64 / 1000.0, 0.0, G);
            assert!(y >= last);
            last = y;
        }
        let mut last = 0;
        for i in -100..100 {
            let y = tone_map_value(0.3, i as f64 / 10.0, G);
            assert!(y >= last);
            last = y;
        }
    }

    fn preimage(gt: &TonemappedImage) -> LinearImage<f64> {
        linearize(gt, 0.0, G)
    }

    fn random_target(rng: &mut ChaCha8Rng, w: usize, h: usize) -> TonemappedImage {
        TonemappedImage::from_vec(w, h, (0..3 * w * h).map(|_| rng.gen_range(5..240)).collect()).unwrap()
    }

    #[test]
    fn exact_preimage_solves_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gt = random_target(&mut rng, 16, 16);
        let sol = solve_exposure(&preimage(&gt), &gt, &Mask::new(16, 16, true), G).unwrap();
        for c in 0..3 {
            assert!(sol.ev[c].abs() < 1e-3, "{:?}", sol.ev);
        }
    }

    #[test]
    fn per_channel_scales_are_inverted() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gt = random_target(&mut rng, 16, 16);
        let render = preimage(&gt).scaled([2.0, 4.0, 8.0]);
        let sol = solve_exposure(&render, &gt, &Mask::new(16, 16, true), G).unwrap();
        for (c, want) in [-1.0, -2.0, -3.0].iter().enumerate() {
            assert!((sol.ev[c] - want).abs() < 0.01, "{:?}", sol.ev);
        }
    }

    #[test]
    fn exposure_errors_and_degenerate_channels() {
        let gt = TonemappedImage::new(4, 4);
        let r = LinearImage::<f64>::new(4, 4);
        assert!(matches!(solve_exposure(&r, &gt, &Mask::new(4, 4, false), G), Err(Error::EmptyMask)));
        assert!(solve_exposure(&r, &gt, &Mask::new(4, 3, true), G).is_err());
        let sol = solve_exposure(&r, &gt, &Mask::new(4, 4, true), G).unwrap();
        assert_eq!(sol.degenerate, [true; 3]);
        assert_eq!(sol.ev, [0.0; 3]);
    }

    fn frame(v: f64) -> LinearImage<f64> {
        LinearImage::filled(1, 1, [v; 3])
    }

    #[test]
    fn single_frame_is_identity() {
        let img = LinearImage::from_vec(2, 1, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let b = ExposureBracket::new(vec![(img.clone(), 1.0)]).unwrap();
        let m = merge_brackets(&b, DEFAULT_SATURATION).unwrap();
        for (a, b) in m.image.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn two_noiseless_frames() {
        let b = ExposureBracket::new(vec![(frame(0.3), 1.0), (frame(0.15), 0.5)]).unwrap();
        let m = merge_brackets(&b, DEFAULT_SATURATION).unwrap();
        assert!((m.image.get(0, 0)[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn saturated_long_exposure_is_excluded() {
        // radiance 1.6: long frame clips at 1.0, short frame reads 0.4
        let b = ExposureBracket::new(vec![(frame(1.0), 1.0), (frame(0.4), 0.25)]).unwrap();
        let m = merge_brackets(&b, DEFAULT_SATURATION).unwrap();
        assert_eq!(m.image.get(0, 0)[0], 0.4 / 0.25);
        assert!(!m.saturated.get(0, 0));
        let b = ExposureBracket::new(vec![(frame(1.0), 1.0), (frame(0.99), 0.25)]).unwrap();
        let m = merge_brackets(&b, DEFAULT_SATURATION).unwrap();
        assert!(m.saturated.get(0, 0));
        assert_eq!(m.image.get(0, 0)[0], 0.99 / 0.25);
    }

    #[test]
    fn bracket_validation() {
        assert!(ExposureBracket::<f64>::new(vec![]).is_err());
        assert!(ExposureBracket::new(vec![(frame(0.1), 1.0), (frame(0.1), 1.0)]).is_err());
        assert!(ExposureBracket::new(vec![(frame(0.1), 0.0)]).is_err());
        let b = ExposureBracket::new(vec![(frame(0.1), 1.0)]).unwrap();
        assert!(merge_brackets(&b, 0.0).is_err());
    }

    #[test]
    fn color_transform_identity_and_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let src: Vec<[f64; 3]> = (0..24).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let ct = fit_color_transform(&src, &src).unwrap();
        assert!(ct.matrix.max_abs_diff(&Mat3::identity()) < 1e-10);
        assert!(ct.residual_rms < 1e-12);
        assert!(matches!(fit_color_transform(&src[..2], &src[..2]), Err(Error::RankDeficient(_))));
        let flat: Vec<[f64; 3]> = (0..10).map(|i| [i as f64, 2.0 * i as f64, 1.0]).collect();
        assert!(matches!(fit_color_transform(&flat, &flat), Err(Error::RankDeficient(_))));
    }
}
