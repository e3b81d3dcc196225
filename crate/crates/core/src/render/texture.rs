use crate::error::{Error, Result};
use crate::scalar::Real;

/// Bilinear lookup footprint: texel indices and their weights.
pub type TexelWeights<T> = [(usize, T); 4];

/// Row-major multi-channel texture sampled with clamp-to-edge bilinear filtering.
///
/// Texel `(i, j)` is centered at `((i + 0.5)/w, (j + 0.5)/h)` in uv space,
/// `v` growing with the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> Texture<T> {
    pub fn filled(width: usize, height: usize, value: &[T]) -> Self {
        let channels = value.len();
        let data = (0..width * height).flat_map(|_| value.iter().copied()).collect();
        Self { width, height, channels, data }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height * channels || width == 0 || height == 0 || channels == 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height}x{channels} texture",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("texture values must be finite"));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn from_fn(width: usize, height: usize, channels: usize, f: impl Fn(T, T) -> Vec<T>) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for j in 0..height {
            for i in 0..width {
                let u = (T::from_usize_lossy(i) + T::lit(0.5)) / T::from_usize_lossy(width);
                let v = (T::from_usize_lossy(j) + T::lit(0.5)) / T::from_usize_lossy(height);
                let px = f(u, v);
                assert_eq!(px.len(), channels);
                data.extend(px);
            }
        }
        Self { width, height, channels, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn texel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn footprint(&self, uv: [T; 2]) -> TexelWeights<T> {
        let x = uv[0] * T::from_usize_lossy(self.width) - T::lit(0.5);
        let y = uv[1] * T::from_usize_lossy(self.height) - T::lit(0.5);
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = ((x - x0).clamp01(), (y - y0).clamp01());
        let xi = x0.to_i64().unwrap_or(0);
        let yi = y0.to_i64().unwrap_or(0);
        let cx = |i: i64| i.clamp(0, self.width as i64 - 1) as usize;
        let cy = |j: i64| j.clamp(0, self.height as i64 - 1) as usize;
        let (c0, c1, r0, r1) = (cx(xi), cx(xi + 1), cy(yi), cy(yi + 1));
        let one = T::one();
        let w = self.width;
        [
            (r0 * w + c0, (one - fx) * (one - fy)),
            (r0 * w + c1, fx * (one - fy)),
            (r1 * w + c0, (one - fx) * fy),
            (r1 * w + c1, fx * fy),
        ]
    }

    /// Interpolated value of channel `c` over a precomputed footprint.
    #[inline]
    pub fn eval(&self, fp: &TexelWeights<T>, c: usize) -> T {
        fp.iter().fold(T::zero(), |acc, (i, w)| acc + *w * self.data[i * self.channels + c])
    }

    pub fn sample(&self, uv: [T; 2]) -> Vec<T> {
        let fp = self.footprint(uv);
        (0..self.channels).map(|c| self.eval(&fp, c)).collect()
    }

    pub fn clamp_values(&mut self, lo: T, hi: T) {
        self.data.iter_mut().for_each(|v| *v = v.max(lo).min(hi));
    }
}
