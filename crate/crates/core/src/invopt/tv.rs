use crate::error::{Error, Result};
use crate::scalar::Real;

#[inline]
fn sign<T: Real>(d: T) -> T {
    if d > T::zero() {
        T::one()
    } else if d < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Anisotropic total variation of a row-major `width`×`height`×`channels`
/// raster: `Σ |T[i+1,j] - T[i,j]| + |T[i,j+1] - T[i,j]|` over forward
/// differences, with the horizontal difference wrapping around when
/// `wrap_u` is set. Returns the value and its subgradient (zero at ties).
pub fn tv<T: Real>(data: &[T], width: usize, height: usize, channels: usize, wrap_u: bool) -> Result<(T, Vec<T>)> {
    if data.len() != width * height * channels {
        return Err(Error::DimensionMismatch(format!(
            "{} values for a {width}x{height}x{channels} raster",
            data.len()
        )));
    }
    if width * height < 2 || channels == 0 {
        return Err(Error::invalid(format!("total variation needs at least two texels, got {width}x{height}")));
    }
    let mut value = T::zero();
    let mut grad = vec![T::zero(); data.len()];
    let idx = |x: usize, y: usize, c: usize| (y * width + x) * channels + c;
    let mut pair = |a: usize, b: usize, value: &mut T| {
        let d = data[b] - data[a];
        *value = *value + d.abs();
        let s = sign(d);
        grad[b] = grad[b] + s;
        grad[a] = grad[a] - s;
    };
    for y in 0..height {
        for x in 0..width {
            let right = if x + 1 < width {
                Some(x + 1)
            } else if wrap_u && width > 1 {
                Some(0)
            } else {
                None
            };
            for c in 0..channels {
                if let Some(xr) = right {
                    pair(idx(x, y, c), idx(xr, y, c), &mut value);
                }
                if y + 1 < height {
                    pair(idx(x, y, c), idx(x, y + 1, c), &mut value);
                }
            }
        }
    }
    Ok((value, grad))
}
