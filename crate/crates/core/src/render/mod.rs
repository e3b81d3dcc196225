//! Forward renderer: BVH ray casting and single-bounce environment lighting.

pub mod brdf;
pub mod bvh;
pub mod material;
pub mod mesh;
pub mod shade;
pub mod texture;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::camera::Camera;
use crate::envmap::EnvironmentMap;
use crate::error::Result;
use crate::image::{LinearImage, Mask};
use crate::math::Ray;
use crate::scalar::Real;

pub use brdf::{BrdfModel, MaterialSample};
pub use bvh::{Bvh, Hit};
pub use material::MaterialTextures;
pub use mesh::Mesh;
pub use shade::{shade_direct, FrozenShading};
pub use texture::Texture;

/// Everything needed to render an object: geometry (with its BVH), materials,
/// environment lighting and the reflectance model.
#[derive(Debug, Clone)]
pub struct SceneAssets<T> {
    pub bvh: Arc<Bvh<T>>,
    pub materials: MaterialTextures<T>,
    pub env: EnvironmentMap<T>,
    pub brdf: BrdfModel,
}

impl<T: Real> SceneAssets<T> {
    pub fn new(mesh: Mesh<T>, materials: MaterialTextures<T>, env: EnvironmentMap<T>) -> Self {
        Self { bvh: Arc::new(Bvh::build(mesh)), materials, env, brdf: BrdfModel::Principled }
    }

    pub fn with_brdf(mut self, brdf: BrdfModel) -> Self {
        self.brdf = brdf;
        self
    }

    pub fn with_env(&self, env: EnvironmentMap<T>) -> Self {
        Self { env, ..self.clone() }
    }

    pub fn mesh(&self) -> &Mesh<T> {
        self.bvh.mesh()
    }
}

/// Rendered radiance and the pixels fully covered by the object.
#[derive(Debug, Clone)]
pub struct Rendering<T> {
    pub image: LinearImage<T>,
    pub mask: Mask,
}

/// Per-pixel random stream, reproducible regardless of thread scheduling.
pub fn pixel_rng(seed: u64, pixel: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pixel);
    rng
}

/// Subpixel sample positions: Latin-hypercube stratified in both axes.
fn subpixel_offsets<R: Rng>(spp: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let mut perm: Vec<usize> = (0..spp).collect();
    for i in (1..spp).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let n = spp as f64;
    (0..spp).map(|s| ((s as f64 + rng.gen::<f64>()) / n, (perm[s] as f64 + rng.gen::<f64>()) / n)).collect()
}

/// Renders `width`×`height` pixels with `spp` primary rays per pixel, each
/// shaded with one sample per strategy. Background pixels are
/// black; the mask marks pixels where every primary ray hits the object.
pub fn render_image<T: Real>(
    assets: &SceneAssets<T>,
    camera: &Camera<T>,
    width: usize,
    height: usize,
    spp: usize,
    seed: u64,
) -> Result<Rendering<T>> {
    let spp = spp.max(1);
    let rows: Vec<Result<(Vec<T>, Vec<bool>)>> = (0..height)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::with_capacity(3 * width);
            let mut covered = Vec::with_capacity(width);
            for x in 0..width {
                let mut rng = pixel_rng(seed, (y * width + x) as u64);
                let mut acc = [T::zero(); 3];
                let mut hits = 0;
                for (ox, oy) in subpixel_offsets(spp, &mut rng) {
                    let ray = camera.pixel_ray(T::lit(x as f64 + ox), T::lit(y as f64 + oy))?;
                    if let Some(c) = trace(assets, &ray, &mut rng) {
                        hits += 1;
                        for k in 0..3 {
                            acc[k] = acc[k] + c[k];
                        }
                    }
                }
                let inv = T::one() / T::from_usize_lossy(spp);
                row.extend(acc.map(|v| v * inv));
                covered.push(hits == spp);
            }
            Ok((row, covered))
        })
        .collect();
    let mut data = Vec::with_capacity(3 * width * height);
    let mut bits = Vec::with_capacity(width * height);
    for r in rows {
        let (row, covered) = r?;
        data.extend(row);
        bits.extend(covered);
    }
    Ok(Rendering { image: LinearImage::from_vec(width, height, data)?, mask: Mask::from_vec(width, height, bits)? })
}

fn trace<T: Real, R: Rng>(assets: &SceneAssets<T>, ray: &Ray<T>, rng: &mut R) -> Option<[T; 3]> {
    let hit = assets.bvh.intersect(ray)?;
    Some(shade_direct(assets, &hit, -ray.dir, 1, rng))
}
