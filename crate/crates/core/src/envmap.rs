//! Equirectangular environment maps.
//!
//! Directions map to `(u, v) ∈ [0,1]²` with `+Z` on the top border, `+X` at the
//! image center, `+Y` at `u = 0.25` and `-Y` at `u = 0.75`:
//!
//! ```text
//! u = fract(0.5 + atan2(-y, x) / 2π)      v = acos(z) / π
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::LinearImage;
use crate::math::{Mat3, Vec3};
use crate::scalar::Real;

pub const LUMINANCE: [f64; 3] = [0.2126, 0.7152, 0.0722];

#[inline]
pub fn luminance<T: Real>(rgb: [T; 3]) -> T {
    rgb[0] * T::lit(LUMINANCE[0]) + rgb[1] * T::lit(LUMINANCE[1]) + rgb[2] * T::lit(LUMINANCE[2])
}

/// Maps a unit direction to equirectangular texture coordinates.
///
/// The azimuth is undefined at the poles; `u = 0.5` there.
pub fn dir_to_uv<T: Real>(d: Vec3<T>) -> Result<[T; 2]> {
    if !d.is_finite() {
        return Err(Error::invalid(format!("non-finite direction {d:?}")));
    }
    let v = d.z.max(-T::one()).min(T::one()).acos() / T::PI();
    if d.x == T::zero() && d.y == T::zero() {
        return Ok([T::lit(0.5), v]);
    }
    let mut u = T::lit(0.5) + (-d.y).atan2(d.x) / T::TAU();
    if u >= T::one() {
        u = u - T::one();
    }
    Ok([u, v])
}

/// Inverse of [`dir_to_uv`] for `u ∈ [0,1)`, `v ∈ [0,1]`.
pub fn uv_to_dir<T: Real>(u: T, v: T) -> Result<Vec3<T>> {
    if !(u >= T::zero() && u < T::one() && v >= T::zero() && v <= T::one()) {
        return Err(Error::invalid(format!("uv ({u}, {v}) out of range")));
    }
    Ok(uv_to_dir_unchecked(u, v))
}

#[inline]
fn uv_to_dir_unchecked<T: Real>(u: T, v: T) -> Vec3<T> {
    let (st, ct) = (v * T::PI()).sin_cos();
    let (sa, ca) = (T::TAU() * (u - T::lit(0.5))).sin_cos();
    Vec3::new(st * ca, -st * sa, ct)
}

#[inline]
fn cos_from_unit_z<T: Real>(c: T) -> T {
    c.max(-T::one()).min(T::one())
}

/// Luminance-proportional sampling tables: a marginal CDF over rows and a
/// conditional CDF over columns within each row.
#[derive(Debug, Clone)]
struct Sampler<T> {
    row_cdf: Vec<T>,
    col_cdf: Vec<T>,
    /// Probability mass of each texel.
    mass: Vec<T>,
}

/// Bilinear lookup footprint: four texel indices and their weights.
pub type Footprint<T> = [(usize, T); 4];

#[derive(Debug, Clone)]
pub struct EnvironmentMap<T> {
    image: LinearImage<T>,
    sampler: Option<Sampler<T>>,
}

impl<T: Real> EnvironmentMap<T> {
    pub fn new(image: LinearImage<T>) -> Result<Self> {
        if image.width() != 2 * image.height() || image.height() == 0 {
            return Err(Error::invalid(format!(
                "environment map must be 2:1, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        let sampler = Self::build_sampler(&image);
        Ok(Self { image, sampler })
    }

    pub fn constant(width: usize, height: usize, rgb: [T; 3]) -> Result<Self> {
        Self::new(LinearImage::filled(width, height, rgb))
    }

    /// Builds a map by evaluating `f` at every texel-center direction.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(Vec3<T>) -> [T; 3]) -> Result<Self> {
        let mut img = LinearImage::new(width, height);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = Self::texel_center(width, height, x, y);
                img.set(x, y, f(uv_to_dir_unchecked(u, v)));
            }
        }
        Self::new(img)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.image.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.image.height()
    }

    #[inline]
    pub fn image(&self) -> &LinearImage<T> {
        &self.image
    }

    pub fn into_image(self) -> LinearImage<T> {
        self.image
    }

    /// Applies `f` to the raster and rebuilds the sampling tables.
    pub fn map_image(&mut self, f: impl FnOnce(&mut LinearImage<T>)) {
        f(&mut self.image);
        self.sampler = Self::build_sampler(&self.image);
    }

    pub fn scaled(&self, s: T) -> Self {
        Self::new(self.image.scaled([s, s, s])).expect("scaling keeps the aspect ratio")
    }

    fn texel_center(w: usize, h: usize, x: usize, y: usize) -> (T, T) {
        (
            (T::from_usize_lossy(x) + T::lit(0.5)) / T::from_usize_lossy(w),
            (T::from_usize_lossy(y) + T::lit(0.5)) / T::from_usize_lossy(h),
        )
    }

    /// Direction through the center of texel `(x, y)`.
    pub fn texel_direction(&self, x: usize, y: usize) -> Vec3<T> {
        let (u, v) = Self::texel_center(self.width(), self.height(), x, y);
        uv_to_dir_unchecked(u, v)
    }

    /// Solid angle subtended by any texel of row `y`.
    pub fn texel_solid_angle(&self, y: usize) -> T {
        let h = T::from_usize_lossy(self.height());
        let t0 = T::from_usize_lossy(y) * T::PI() / h;
        let t1 = T::from_usize_lossy(y + 1) * T::PI() / h;
        T::TAU() / T::from_usize_lossy(self.width()) * (t0.cos() - t1.cos())
    }

    fn build_sampler(image: &LinearImage<T>) -> Option<Sampler<T>> {
        let (w, h) = (image.width(), image.height());
        let hf = T::from_usize_lossy(h);
        let mut mass = Vec::with_capacity(w * h);
        for y in 0..h {
            let t0 = T::from_usize_lossy(y) * T::PI() / hf;
            let t1 = T::from_usize_lossy(y + 1) * T::PI() / hf;
            let band = t0.cos() - t1.cos();
            for x in 0..w {
                mass.push(luminance(image.get(x, y)).max(T::zero()) * band);
            }
        }
        let total: T = mass.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            return None;
        }
        let mut row_cdf = Vec::with_capacity(h);
        let mut col_cdf = Vec::with_capacity(w * h);
        let mut acc = T::zero();
        for y in 0..h {
            let row = &mut mass[y * w..(y + 1) * w];
            let row_sum: T = row.iter().copied().sum();
            let mut racc = T::zero();
            for m in row.iter() {
                racc = racc + *m;
                col_cdf.push(if row_sum > T::zero() { racc / row_sum } else { T::zero() });
            }
            acc = acc + row_sum;
            row_cdf.push(acc / total);
            row.iter_mut().for_each(|m| *m = *m / total);
        }
        Some(Sampler { row_cdf, col_cdf, mass })
    }

    pub fn has_sampler(&self) -> bool {
        self.sampler.is_some()
    }

    /// Bilinear weights for direction `d`: `u` wraps, `v` clamps at the poles.
    pub fn footprint(&self, d: Vec3<T>) -> Footprint<T> {
        let [u, v] = dir_to_uv(d).unwrap_or([T::lit(0.5), T::lit(0.5)]);
        self.footprint_uv(u, v)
    }

    pub fn footprint_uv(&self, u: T, v: T) -> Footprint<T> {
        let (w, h) = (self.width(), self.height());
        let x = u * T::from_usize_lossy(w) - T::lit(0.5);
        let y = v * T::from_usize_lossy(h) - T::lit(0.5);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let wi = w as i64;
        let xi = x0.to_i64().unwrap_or(0);
        let yi = y0.to_i64().unwrap_or(0);
        let col = |i: i64| i.rem_euclid(wi) as usize;
        let row = |j: i64| j.clamp(0, h as i64 - 1) as usize;
        let (c0, c1, r0, r1) = (col(xi), col(xi + 1), row(yi), row(yi + 1));
        let one = T::one();
        [
            (r0 * w + c0, (one - fx) * (one - fy)),
            (r0 * w + c1, fx * (one - fy)),
            (r1 * w + c0, (one - fx) * fy),
            (r1 * w + c1, fx * fy),
        ]
    }

    /// Bilinearly interpolated radiance in direction `d`.
    pub fn sample_env(&self, d: Vec3<T>) -> [T; 3] {
        let data = self.image.data();
        let mut out = [T::zero(); 3];
        for (i, wgt) in self.footprint(d) {
            for c in 0..3 {
                out[c] = out[c] + wgt * data[3 * i + c];
            }
        }
        out
    }

    fn texel_of(&self, d: Vec3<T>) -> (usize, usize) {
        let [u, v] = dir_to_uv(d).unwrap_or([T::lit(0.5), T::lit(0.5)]);
        let x = (u * T::from_usize_lossy(self.width())).floor().to_usize().unwrap_or(0).min(self.width() - 1);
        let y = (v * T::from_usize_lossy(self.height())).floor().to_usize().unwrap_or(0).min(self.height() - 1);
        (x, y)
    }

    /// Solid-angle density of [`Self::sample_direction`] at `d`; zero for a black map.
    pub fn pdf(&self, d: Vec3<T>) -> T {
        let Some(s) = &self.sampler else { return T::zero() };
        let (x, y) = self.texel_of(d);
        s.mass[y * self.width() + x] / self.texel_solid_angle(y)
    }

    /// Draws a direction with density proportional to texel luminance times
    /// texel solid angle, uniform in solid angle within the chosen texel.
    pub fn sample_direction<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec3<T>, T)> {
        let s = self.sampler.as_ref().ok_or_else(|| Error::invalid("cannot sample an all-black environment map"))?;
        let (w, h) = (self.width(), self.height());
        let xi_row = T::lit(rng.gen::<f64>());
        let y = s.row_cdf.partition_point(|c| *c <= xi_row).min(h - 1);
        let row = &s.col_cdf[y * w..(y + 1) * w];
        let xi_col = T::lit(rng.gen::<f64>());
        let mut x = row.partition_point(|c| *c <= xi_col).min(w - 1);
        // skip zero-mass texels that share a CDF value with their successor
        while s.mass[y * w + x] == T::zero() && x + 1 < w {
            x += 1;
        }
        let wf = T::from_usize_lossy(w);
        let hf = T::from_usize_lossy(h);
        let u = (T::from_usize_lossy(x) + T::lit(rng.gen::<f64>())) / wf;
        let c0 = (T::from_usize_lossy(y) * T::PI() / hf).cos();
        let c1 = (T::from_usize_lossy(y + 1) * T::PI() / hf).cos();
        let cos_t = cos_from_unit_z(c0 + (c1 - c0) * T::lit(rng.gen::<f64>()));
        let sin_t = (T::one() - cos_t * cos_t).max(T::zero()).sqrt();
        let (sa, ca) = (T::TAU() * (u.min(T::one()) - T::lit(0.5))).sin_cos();
        let d = Vec3::new(sin_t * ca, -sin_t * sa, cos_t);
        let pdf = s.mass[y * w + x] / self.texel_solid_angle(y);
        Ok((d, pdf))
    }

    /// Total radiant flux `Σ L·Δω` per channel using texel values.
    pub fn flux(&self) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for y in 0..self.height() {
            let dw = self.texel_solid_angle(y);
            for x in 0..self.width() {
                let p = self.image.get(x, y);
                for c in 0..3 {
                    out[c] = out[c] + p[c] * dw;
                }
            }
        }
        out
    }
}

/// Resamples `env` so that `out(d) = env(Rᵀ d)` at every texel center.
pub fn rotate_env<T: Real>(env: &EnvironmentMap<T>, rot: &Mat3<T>) -> Result<EnvironmentMap<T>> {
    let tol = T::lit(1e-9);
    if !rot.is_finite() || rot.orthonormality_error() > tol || (rot.det() - T::one()).abs() > tol {
        return Err(Error::invalid("rotation matrix must be orthonormal with determinant +1"));
    }
    let rt = rot.transpose();
    let (w, h) = (env.width(), env.height());
    let mut img = LinearImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let d = env.texel_direction(x, y);
            img.set(x, y, env.sample_env(rt.mul_vec(d)));
        }
    }
    EnvironmentMap::new(img)
}

/// Overlap weights of destination cells `[i·s, (i+1)·s)` against unit source
/// cells, expressed through a monotone coordinate map `f`.
fn overlap_weights<T: Real>(src_n: usize, dst_n: usize, f: impl Fn(T) -> T) -> Vec<Vec<(usize, T)>> {
    let ratio = T::from_usize_lossy(src_n) / T::from_usize_lossy(dst_n);
    (0..dst_n)
        .map(|i| {
            let a = T::from_usize_lossy(i) * ratio;
            let b = T::from_usize_lossy(i + 1) * ratio;
            let first = a.floor().to_usize().unwrap_or(0);
            let last = (b.ceil().to_usize().unwrap_or(src_n)).min(src_n);
            let total = f(b) - f(a);
            (first..last)
                .filter_map(|j| {
                    let lo = a.max(T::from_usize_lossy(j));
                    let hi = b.min(T::from_usize_lossy(j + 1));
                    let wgt = (f(hi) - f(lo)) / total;
                    (wgt > T::zero()).then_some((j, wgt))
                })
                .collect()
        })
        .collect()
}

/// Solid-angle-weighted box resampling; total flux is preserved.
pub fn resize_env<T: Real>(env: &EnvironmentMap<T>, new_width: usize, new_height: usize) -> Result<EnvironmentMap<T>> {
    if new_height == 0 || new_width != 2 * new_height {
        return Err(Error::invalid(format!("target size {new_width}x{new_height} is not 2:1")));
    }
    let (w, h) = (env.width(), env.height());
    let cols = overlap_weights::<T>(w, new_width, |x| x);
    let hf = T::from_usize_lossy(h);
    // rows are weighted by solid angle: 1 - cos(θ) is monotone in the row coordinate
    let rows = overlap_weights::<T>(h, new_height, |y| T::one() - (y * T::PI() / hf).cos());
    let src = env.image().data();
    let mut tmp = vec![T::zero(); 3 * new_width * h];
    for y in 0..h {
        for (i, ws) in cols.iter().enumerate() {
            for (j, wgt) in ws {
                for c in 0..3 {
                    tmp[3 * (y * new_width + i) + c] = tmp[3 * (y * new_width + i) + c] + *wgt * src[3 * (y * w + j) + c];
                }
            }
        }
    }
    let mut out = vec![T::zero(); 3 * new_width * new_height];
    for (i, ws) in rows.iter().enumerate() {
        for (j, wgt) in ws {
            for x in 0..new_width {
                for c in 0..3 {
                    out[3 * (i * new_width + x) + c] = out[3 * (i * new_width + x) + c] + *wgt * tmp[3 * (j * new_width + x) + c];
                }
            }
        }
    }
    EnvironmentMap::new(LinearImage::from_vec(new_width, new_height, out)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    #[test]
    fn anchor_directions() {
        let cases = [
            (v(1.0, 0.0, 0.0), [0.5, 0.5]),
            (v(0.0, 1.0, 0.0), [0.25, 0.5]),
            (v(0.0, -1.0, 0.0), [0.75, 0.5]),
            (v(-1.0, 0.0, 0.0), [0.0, 0.5]),
            (v(0.0, 0.0, 1.0), [0.5, 0.0]),
            (v(0.0, 0.0, -1.0), [0.5, 1.0]),
        ];
        for (d, uv) in cases {
            let got = dir_to_uv(d).unwrap();
            assert!((got[0] - uv[0]).abs() < 1e-12 && (got[1] - uv[1]).abs() < 1e-12, "{d:?} -> {got:?}");
        }
    }

    #[test]
    fn anchor_inversion() {
        let d = uv_to_dir(0.5, 0.5).unwrap();
        assert!((d - v(1.0, 0.0, 0.0)).length() < 1e-12);
        let d = uv_to_dir(0.0, 0.5).unwrap();
        assert!((d - v(-1.0, 0.0, 0.0)).length() < 1e-12);
        assert!(uv_to_dir(1.0, 0.5).is_err());
        assert!(uv_to_dir(0.2, 1.5).is_err());
        assert!(dir_to_uv(v(f64::NAN, 0.0, 1.0)).is_err());
    }

    #[test]
    fn anchors_in_single_precision() {
        let got = dir_to_uv(Vec3::<f32>::new(0.0, 1.0, 0.0)).unwrap();
        assert!((got[0] - 0.25).abs() < 1e-6 && (got[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn constant_map_lookup() {
        let env = EnvironmentMap::<f64>::constant(16, 8, [0.3, 0.6, 0.9]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let d = v(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5).normalized();
            let l = env.sample_env(d);
            assert!((l[0] - 0.3).abs() < 1e-12 && (l[2] - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn two_texel_map_blends_at_center() {
        let img = LinearImage::from_vec(2, 1, vec![1.0, 0.0, 0.0, 3.0, 0.0, 0.0]).unwrap();
        let env = EnvironmentMap::<f64>::new(img).unwrap();
        // u = 0.5 sits halfway between the texel centers at u = 0.25 and 0.75
        assert!((env.sample_env(v(1.0, 0.0, 0.0))[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn texel_centers_are_exact() {
        let env = EnvironmentMap::<f64>::from_fn(8, 4, |d| [d.x.abs() + 0.1, d.y.abs(), d.z.abs()]).unwrap();
        for y in 0..4 {
            for x in 0..8 {
                let got = env.sample_env(env.texel_direction(x, y));
                let want = env.image().get(x, y);
                for c in 0..3 {
                    assert!((got[c] - want[c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn aspect_is_enforced() {
        assert!(EnvironmentMap::<f64>::constant(8, 8, [1.0; 3]).is_err());
        let env = EnvironmentMap::<f64>::constant(8, 4, [1.0; 3]).unwrap();
        assert!(resize_env(&env, 6, 2).is_err());
    }

    #[test]
    fn resize_by_hand() {
        let vals = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let img = LinearImage::from_vec(4, 2, vals.iter().flat_map(|x| [*x, 0.0, 0.0]).collect()).unwrap();
        let env = EnvironmentMap::<f64>::new(img).unwrap();
        let out = resize_env(&env, 2, 1).unwrap();
        // both rows span equal solid angle, so each output texel is a plain 2×2 mean
        assert!((out.image().get(0, 0)[0] - (1.0 + 2.0 + 5.0 + 6.0) / 4.0).abs() < 1e-12);
        assert!((out.image().get(1, 0)[0] - (3.0 + 4.0 + 7.0 + 8.0) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn resize_preserves_flux_and_constants() {
        let env = EnvironmentMap::<f64>::from_fn(210, 105, |d| [1.0 + 0.5 * d.x, 1.0 + 0.3 * d.z, 0.2]).unwrap();
        // same non-integer reduction factor as 6720 -> 1024
        let out = resize_env(&env, 32, 16).unwrap();
        let (a, b) = (env.flux(), out.flux());
        for c in 0..3 {
            assert!(((a[c] - b[c]) / a[c]).abs() < 5e-3);
        }
        let k = EnvironmentMap::<f64>::constant(210, 105, [0.7; 3]).unwrap();
        let out = resize_env(&k, 32, 16).unwrap();
        assert!(out.image().data().iter().all(|x| (x - 0.7).abs() < 1e-12));
    }

    #[test]
    fn resize_full_capture_resolution() {
        let env = EnvironmentMap::<f32>::constant(6720, 3360, [0.5, 1.0, 2.0]).unwrap();
        let out = resize_env(&env, 1024, 512).unwrap();
        assert_eq!((out.width(), out.height()), (1024, 512));
        assert!(out.image().pixels().all(|p| (p[1] - 1.0).abs() < 1e-4));
    }

    #[test]
    fn rotation_identity_and_shift() {
        let env = EnvironmentMap::<f64>::from_fn(32, 16, |d| [1.0 + d.x, 1.0 + d.y * d.z, 0.5]).unwrap();
        let same = rotate_env(&env, &Mat3::identity()).unwrap();
        for (a, b) in same.image().data().iter().zip(env.image().data()) {
            assert!((a - b).abs() <= 1e-6);
        }
        let k = 3;
        let rot = Mat3::rotation(v(0.0, 0.0, 1.0), std::f64::consts::TAU / 32.0 * k as f64);
        let shifted = rotate_env(&env, &rot).unwrap();
        for y in 0..16 {
            for x in 0..32 {
                let a = shifted.image().get(x, y);
                let b = env.image().get((x + k) % 32, y);
                for c in 0..3 {
                    assert!((a[c] - b[c]).abs() < 1e-9);
                }
            }
        }
        let bad = Mat3::from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0]);
        assert!(rotate_env(&env, &bad).is_err());
    }

    #[test]
    fn rotation_there_and_back() {
        let env = EnvironmentMap::<f64>::from_fn(64, 32, |d| [1.0 + 0.5 * d.x, 1.0 + 0.5 * d.y, 1.0 + 0.5 * d.z]).unwrap();
        let rot = Mat3::rotation(v(0.3, 0.5, 0.8), 0.7);
        let back = rotate_env(&rotate_env(&env, &rot).unwrap(), &rot.transpose()).unwrap();
        let n = env.image().data().len() as f64;
        let rms = (env.image().data().iter().zip(back.image().data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n).sqrt();
        let mean = env.image().data().iter().sum::<f64>() / n;
        assert!(rms / mean < 0.02);
    }

    #[test]
    fn constant_map_samples_uniformly() {
        let env = EnvironmentMap::<f64>::constant(32, 16, [1.0; 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let (d, pdf) = env.sample_direction(&mut rng).unwrap();
            assert!((d.length() - 1.0).abs() < 1e-12);
            assert!((pdf - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-6);
        }
    }

    #[test]
    fn pdf_integrates_to_one() {
        let env = EnvironmentMap::<f64>::from_fn(32, 16, |d| [(d.x + 1.1).powi(3), 0.2, (d.z + 1.0)]).unwrap();
        let mut total = 0.0;
        for y in 0..16 {
            for x in 0..32 {
                total += env.pdf(env.texel_direction(x, y)) * env.texel_solid_angle(y);
            }
        }
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn black_map_cannot_be_sampled() {
        let env = EnvironmentMap::<f64>::constant(8, 4, [0.0; 3]).unwrap();
        assert!(env.sample_direction(&mut ChaCha8Rng::seed_from_u64(0)).is_err());
        assert_eq!(env.pdf(v(1.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn bright_texel_dominates() {
        let mut img = LinearImage::<f64>::filled(32, 16, [1e-6; 3]);
        img.set(9, 5, [100.0; 3]);
        let env = EnvironmentMap::new(img).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| {
                let (d, _) = env.sample_direction(&mut rng).unwrap();
                env.texel_of(d) == (9, 5)
            })
            .count();
        assert!(hits as f64 >= 0.999 * n as f64);
    }

    #[test]
    fn importance_estimate_matches_quadrature() {
        let env = EnvironmentMap::<f64>::from_fn(64, 32, |d| {
            [1.0 + 0.8 * d.x + 0.5 * d.z * d.z, 0.5 + 0.4 * (d.y * 3.0).sin(), 2.0 * (1.0 + d.z)]
        })
        .unwrap();
        let quad = env.flux();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mut est = [0.0; 3];
        for _ in 0..n {
            let (d, pdf) = env.sample_direction(&mut rng).unwrap();
            let l = env.sample_env(d);
            for c in 0..3 {
                est[c] += l[c] / pdf / n as f64;
            }
        }
        for c in 0..3 {
            assert!(((est[c] - quad[c]) / quad[c]).abs() < 5e-3, "channel {c}: {} vs {}", est[c], quad[c]);
        }
    }

    proptest::proptest! {
        #[test]
        fn uv_roundtrip(u in 0.0f64..1.0, v in 1e-300f64..1.0) {
            let d = uv_to_dir(u, v).unwrap();
            let [u2, v2] = dir_to_uv(d).unwrap();
            let du = (u - u2).abs().min(1.0 - (u - u2).abs());
            proptest::prop_assert!(du < 1e-9);
            proptest::prop_assert!((v - v2).abs() < 1e-9);
        }
    }
}
