//! Relighting benchmark toolkit.
//!
//! Provides the data model and I/O for multi-illumination object captures,
//! HDR photometry (tone mapping, exposure alignment, bracket merging, color
//! calibration), masked image metrics, a single-bounce environment-lit
//! renderer, and an inverse renderer that recovers materials and lighting
//! from posed images.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`, which the pipeline uses throughout.

pub mod assets;
pub mod camera;
pub mod dataset;
pub mod envmap;
pub mod error;
pub mod evaluate;
pub mod image;
pub mod invopt;
pub mod io;
pub mod math;
pub mod metrics;
pub mod photometry;
pub mod render;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use image::{Mask, TonemappedImage};
pub use scalar::Real;

pub type Vec3 = math::Vec3<f64>;
pub type Mat3 = math::Mat3<f64>;
pub type Ray = math::Ray<f64>;
pub type LinearImage = image::LinearImage<f64>;
pub type LinearImageF32 = image::LinearImage<f32>;
pub type EnvironmentMap = envmap::EnvironmentMap<f64>;
pub type EnvironmentMapF32 = envmap::EnvironmentMap<f32>;
pub type Camera = camera::Camera<f64>;
pub type CameraF32 = camera::Camera<f32>;
pub type Mesh = render::Mesh<f64>;
pub type MaterialTextures = render::MaterialTextures<f64>;
pub type SceneAssets = render::SceneAssets<f64>;
