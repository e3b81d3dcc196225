//! Raster containers: linear radiance images, 8-bit tone-mapped images and masks.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major RGB raster in linear radiometric units.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> LinearImage<T> {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![T::zero(); 3 * width * height] }
    }

    pub fn filled(width: usize, height: usize, rgb: [T; 3]) -> Self {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self { width, height, data }
    }

    /// Wraps raw RGB triples, checking length, finiteness and non-negativity.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} RGB image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < T::zero()) {
            return Err(Error::invalid(format!("radiance value {v} is negative or not finite")));
        }
        Ok(Self { width, height, data })
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
    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Mutable access; callers must keep values finite and non-negative.
    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [T; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [T; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [T; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// Multiplies each channel by its own factor.
    pub fn scaled(&self, s: [T; 3]) -> Self {
        let mut out = self.clone();
        for px in out.data.chunks_exact_mut(3) {
            for c in 0..3 {
                px[c] = px[c] * s[c];
            }
        }
        out
    }

    pub fn convert<U: Real>(&self) -> LinearImage<U> {
        LinearImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

/// Row-major RGB raster of 8-bit display values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TonemappedImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl TonemappedImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; 3 * width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} bytes for a {width}x{height} RGB image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
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
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Per-pixel foreground indicator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        Self { width, height, bits: vec![value; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!("{} mask bits for {width}x{height}", bits.len())));
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self { width, height, bits }
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
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::DimensionMismatch(format!(
                "mask is {}x{}, image is {width}x{height}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Images whose background can be blanked by a mask.
pub trait Maskable: Sized {
    fn dims(&self) -> (usize, usize);
    fn zero_pixel(&mut self, index: usize);
}

impl<T: Real> Maskable for LinearImage<T> {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
    fn zero_pixel(&mut self, index: usize) {
        self.data[3 * index..3 * index + 3].fill(T::zero());
    }
}

impl Maskable for TonemappedImage {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
    fn zero_pixel(&mut self, index: usize) {
        self.data[3 * index..3 * index + 3].fill(0);
    }
}

/// Sets every background pixel to zero in all channels.
pub fn apply_mask_zero<I: Maskable + Clone>(img: &I, mask: &Mask) -> Result<I> {
    let (w, h) = img.dims();
    mask.check_dims(w, h)?;
    let mut out = img.clone();
    for (i, _) in mask.bits.iter().enumerate().filter(|(_, b)| !**b) {
        out.zero_pixel(i);
    }
    Ok(out)
}
