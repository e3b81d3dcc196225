use crate::error::{Error, Result};
use crate::render::brdf::{MaterialSample, ROUGHNESS_MIN};
use crate::render::texture::{TexelWeights, Texture};
use crate::scalar::Real;

/// Spatially varying material: RGB albedo, roughness and metallic textures
/// addressed by mesh uv coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialTextures<T> {
    pub albedo: Texture<T>,
    pub roughness: Texture<T>,
    pub metallic: Texture<T>,
}

/// Texel footprints of one uv lookup in each texture.
#[derive(Debug, Clone, Copy)]
pub struct MaterialFootprint<T> {
    pub albedo: TexelWeights<T>,
    pub roughness: TexelWeights<T>,
    pub metallic: TexelWeights<T>,
}

fn check_square(name: &str, t: &Texture<impl Real>, channels: usize) -> Result<()> {
    if t.width() != t.height() || !t.width().is_power_of_two() {
        return Err(Error::invalid(format!(
            "{name} texture must be square with a power-of-two side, got {}x{}",
            t.width(),
            t.height()
        )));
    }
    if t.channels() != channels {
        return Err(Error::invalid(format!("{name} texture has {} channels, expected {channels}", t.channels())));
    }
    Ok(())
}

impl<T: Real> MaterialTextures<T> {
    pub fn new(albedo: Texture<T>, roughness: Texture<T>, metallic: Texture<T>) -> Result<Self> {
        check_square("albedo", &albedo, 3)?;
        check_square("roughness", &roughness, 1)?;
        check_square("metallic", &metallic, 1)?;
        Ok(Self { albedo, roughness, metallic })
    }

    pub fn uniform(size: usize, albedo: [T; 3], roughness: T, metallic: T) -> Result<Self> {
        Self::new(
            Texture::filled(size, size, &albedo),
            Texture::filled(size, size, &[roughness]),
            Texture::filled(size, size, &[metallic]),
        )
    }

    pub fn footprint(&self, uv: [T; 2]) -> MaterialFootprint<T> {
        MaterialFootprint {
            albedo: self.albedo.footprint(uv),
            roughness: self.roughness.footprint(uv),
            metallic: self.metallic.footprint(uv),
        }
    }

    pub fn eval(&self, fp: &MaterialFootprint<T>) -> MaterialSample<T> {
        MaterialSample {
            albedo: [0, 1, 2].map(|c| self.albedo.eval(&fp.albedo, c)),
            roughness: self.roughness.eval(&fp.roughness, 0),
            metallic: self.metallic.eval(&fp.metallic, 0),
        }
    }

    pub fn sample(&self, uv: [T; 2]) -> MaterialSample<T> {
        self.eval(&self.footprint(uv))
    }

    /// Clamps texel values to the physically valid box.
    pub fn project(&mut self) {
        self.albedo.clamp_values(T::zero(), T::one());
        self.roughness.clamp_values(T::lit(ROUGHNESS_MIN), T::one());
        self.metallic.clamp_values(T::zero(), T::one());
    }

    /// Same textures resampled to `size`×`size` with bilinear lookups.
    pub fn resized(&self, size: usize) -> Self {
        let rs = |t: &Texture<T>| Texture::from_fn(size, size, t.channels(), |u, v| t.sample([u, v]));
        Self { albedo: rs(&self.albedo), roughness: rs(&self.roughness), metallic: rs(&self.metallic) }
    }
}
