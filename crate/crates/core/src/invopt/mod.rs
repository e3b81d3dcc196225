//! Inverse rendering: fits material textures and an environment map to posed
//! images of a known mesh by first-order descent on a rendering loss with
//! total-variation regularization.

pub mod adam;
pub mod loss;
pub mod tv;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::camera::Camera;
use crate::envmap::EnvironmentMap;
use crate::error::{Error, Result};
use crate::image::{LinearImage, Mask};
use crate::render::shade::freeze;
use crate::render::{render_image, MaterialTextures, Mesh, Rendering, SceneAssets};
use crate::scalar::Real;

pub use adam::Adam;
pub use loss::{loss_and_grad, loss_only, Batch, FrozenPixel, GradientSet, LossBreakdown, LossKind, LossWeights, ParamClass};
pub use tv::tv;

/// Optimizer settings.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimConfig {
    pub iterations: usize,
    /// Adam step size for material texels.
    pub learning_rate: f64,
    /// Adam step size for the environment, which is optimized as log radiance.
    pub env_learning_rate: f64,
    /// Rays per step.
    pub batch: usize,
    /// Samples per strategy at each shading point.
    pub samples: usize,
    pub alpha_env: f64,
    pub alpha_material: f64,
    pub loss: LossKind,
    pub seed: u64,
    /// Final material texture side length.
    pub material_size: usize,
    /// Material side length at the first iteration; doubled at evenly spaced
    /// steps until `material_size` is reached.
    pub coarse_size: usize,
    /// Fraction of the iterations over which material resolution grows.
    pub coarse_fraction: f64,
    pub env_width: usize,
    pub env_height: usize,
    /// Environment height at the first iteration; doubled on the same
    /// principle as the material resolution.
    pub env_coarse_height: usize,
    /// Draw the radiance derivatives from samples independent of the residual.
    pub decorrelate: bool,
    /// Jitter training rays within their pixel instead of using its centre.
    pub jitter: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            learning_rate: 0.005,
            env_learning_rate: 0.05,
            batch: 2048,
            samples: 4,
            alpha_env: 0.01,
            alpha_material: 0.01,
            loss: LossKind::L2,
            seed: 0,
            material_size: 512,
            coarse_size: 2,
            coarse_fraction: 0.5,
            env_width: 128,
            env_height: 64,
            env_coarse_height: 4,
            decorrelate: true,
            jitter: true,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.iterations > 0
            && self.learning_rate > 0.0
            && self.env_learning_rate > 0.0
            && self.batch > 0
            && self.samples > 0
            && self.alpha_env >= 0.0
            && self.alpha_material >= 0.0;
        if !positive {
            return Err(Error::invalid("optimizer settings must be positive"));
        }
        for (name, s) in [("material", self.material_size), ("coarse material", self.coarse_size)] {
            if s < 2 || !s.is_power_of_two() {
                return Err(Error::invalid(format!("{name} size {s} must be a power of two ≥ 2")));
            }
        }
        if self.coarse_size > self.material_size {
            return Err(Error::invalid("coarse material size exceeds the final size"));
        }
        if self.env_width != 2 * self.env_height || self.env_height == 0 {
            return Err(Error::invalid("environment resolution must be 2:1"));
        }
        let (ec, eh) = (self.env_coarse_height, self.env_height);
        if ec == 0 || ec > eh || eh % ec != 0 || !(eh / ec).is_power_of_two() {
            return Err(Error::invalid(format!("coarse environment height {ec} must divide {eh} by a power of two")));
        }
        if !(0.0..=1.0).contains(&self.coarse_fraction) {
            return Err(Error::invalid("coarse fraction must lie in [0, 1]"));
        }

        Ok(())
    }

    pub fn weights<T: Real>(&self) -> LossWeights<T> {
        LossWeights { alpha_env: T::lit(self.alpha_env), alpha_material: T::lit(self.alpha_material), kind: self.loss }
    }

    /// Iterations at which a resolution growing by `ratio` doubles.
    fn milestones(&self, ratio: usize) -> Vec<usize> {
        let levels = ratio.trailing_zeros() as usize;
        let span = self.coarse_fraction * self.iterations as f64;
        (1..=levels).map(|k| (span * k as f64 / levels as f64).round() as usize).collect()
    }
}

/// One posed training image in linear radiance with its foreground mask.
#[derive(Debug, Clone)]
pub struct TrainingView<T> {
    pub camera: Camera<T>,
    pub image: LinearImage<T>,
    pub mask: Mask,
}

/// Fitted assets with the per-iteration total loss.
#[derive(Debug, Clone)]
pub struct FitResult<T> {
    pub assets: SceneAssets<T>,
    pub trace: Vec<T>,
}

fn foreground_pixels<T: Real>(views: &[TrainingView<T>]) -> Result<Vec<(u32, u32, u32)>> {
    let mut out = Vec::new();
    for (v, view) in views.iter().enumerate() {
        view.mask.check_dims(view.image.width(), view.image.height())?;
        let w = view.mask.width();
        for (i, _) in view.mask.bits().iter().enumerate().filter(|(_, b)| **b) {
            out.push((v as u32, (i % w) as u32, (i / w) as u32));
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(out)
}

/// Default starting point: gray albedo 0.5, roughness 0.7, metallic 0.1 and a
/// uniform environment at the mean foreground radiance of the training views.
pub fn initial_assets<T: Real>(mesh: Mesh<T>, views: &[TrainingView<T>], cfg: &OptimConfig) -> Result<SceneAssets<T>> {
    cfg.validate()?;
    let pixels = foreground_pixels(views)?;
    let mut mean = [T::zero(); 3];
    for &(v, x, y) in &pixels {
        let p = views[v as usize].image.get(x as usize, y as usize);
        for c in 0..3 {
            mean[c] = mean[c] + p[c];
        }
    }
    let n = T::from_usize_lossy(pixels.len());
    let mean = mean.map(|m| (m / n).max(T::lit(1e-6)));
    let materials = MaterialTextures::uniform(cfg.coarse_size, [T::lit(0.5); 3], T::lit(0.7), T::lit(0.1))?;
    let env = EnvironmentMap::constant(2 * cfg.env_coarse_height, cfg.env_coarse_height, mean)?;
    Ok(SceneAssets::new(mesh, materials, env))
}

/// Freezes `cfg.batch` randomly chosen foreground rays for one step.
pub fn prepare_batch<T: Real>(
    assets: &SceneAssets<T>,
    views: &[TrainingView<T>],
    pixels: &[(u32, u32, u32)],
    cfg: &OptimConfig,
    step: u64,
) -> Result<Batch<T>> {
    let mut pick = ChaCha8Rng::seed_from_u64(cfg.seed);
    pick.set_stream(step.wrapping_mul(2));
    let chosen: Vec<(u32, u32, u32)> = (0..cfg.batch).map(|_| pixels[pick.gen_range(0..pixels.len())]).collect();
    let frozen: Vec<Result<FrozenPixel<T>>> = chosen
        .par_iter()
        .enumerate()
        .map(|(k, &(v, x, y))| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5DEE_CE66_D1CE_4E5B);
            rng.set_stream(step.wrapping_mul(cfg.batch as u64).wrapping_add(k as u64));
            let view = &views[v as usize];
            let (jx, jy) = if cfg.jitter { (rng.gen::<f64>(), rng.gen::<f64>()) } else { (0.5, 0.5) };
            let px = T::lit(x as f64 + jx);
            let py = T::lit(y as f64 + jy);
            let ray = view.camera.pixel_ray(px, py)?;
            let hit = assets.bvh.intersect(&ray);
            let shading = hit.as_ref().map(|hit| freeze(assets, hit, -ray.dir, cfg.samples, &mut rng));
            let gradient_samples = match &hit {
                Some(hit) if cfg.decorrelate => Some(freeze(assets, hit, -ray.dir, cfg.samples, &mut rng).samples),
                _ => None,
            };
            Ok(FrozenPixel { shading, target: view.image.get(x as usize, y as usize), gradient_samples })
        })
        .collect();
    let pixels_out = frozen.into_iter().collect::<Result<Vec<_>>>()?;
    let scale = T::from_usize_lossy(pixels.len()) / T::from_usize_lossy(cfg.batch);
    Ok(Batch { pixels: pixels_out, scale })
}

/// Smallest environment radiance representable during fitting.
const ENV_FLOOR: f64 = 1e-8;

/// Fits materials and environment of `assets` (mesh held fixed) to `views`.
pub fn optimize<T: Real>(assets: SceneAssets<T>, views: &[TrainingView<T>], cfg: &OptimConfig) -> Result<FitResult<T>> {
    cfg.validate()?;
    let pixels = foreground_pixels(views)?;
    let mut assets = assets;
    let probe = prepare_batch(&assets, views, &pixels, &OptimConfig { batch: pixels.len().min(512), samples: 1, ..cfg.clone() }, u64::MAX / 4)?;
    if probe.pixels.iter().all(|p| p.shading.is_none()) {
        return Err(Error::invalid("no training ray hits the mesh; dataset and mesh do not match"));
    }
    let weights = cfg.weights::<T>();
    let lr = T::lit(cfg.learning_rate);
    let lr_env = T::lit(cfg.env_learning_rate);
    // log radiance keeps texels positive and makes steps relative
    let floor = T::lit(ENV_FLOOR);
    let mut env_log: Vec<T> = assets.env.image().data().iter().map(|v| v.max(floor).ln()).collect();
    let milestones = cfg.milestones(cfg.material_size / cfg.coarse_size);
    let env_milestones = cfg.milestones(cfg.env_height / cfg.env_coarse_height);
    if assets.env.height() != cfg.env_coarse_height {
        assets.env = resample_env(&assets.env, cfg.env_coarse_height)?;
    }
    let new_adams = |a: &SceneAssets<T>| -> [Adam<T>; 3] {
        [ParamClass::Albedo, ParamClass::Roughness, ParamClass::Metallic].map(|c| Adam::new(c.values(a).len()))
    };
    let mut adams = new_adams(&assets);
    let mut adam_env = Adam::new(assets.env.image().data().len());
    let mut trace = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        if milestones.contains(&it) {
            let size = (assets.materials.albedo.width() * 2).min(cfg.material_size);
            assets.materials = assets.materials.resized(size);
            adams = new_adams(&assets);
        }
        if env_milestones.contains(&it) {
            assets.env = resample_env(&assets.env, (assets.env.height() * 2).min(cfg.env_height))?;
            env_log = assets.env.image().data().iter().map(|v| v.max(floor).ln()).collect();
            adam_env = Adam::new(env_log.len());
        }
        let batch = prepare_batch(&assets, views, &pixels, cfg, it as u64)?;
        let (loss, grads) = loss_and_grad(&assets, &batch, &weights)?;
        trace.push(loss.total);
        if it % 100 == 0 {
            log::debug!("step {it}: loss {} (data {})", loss.total, loss.data);
        }
        let m = &mut assets.materials;
        adams[0].step(m.albedo.data_mut(), &grads.albedo, lr);
        adams[1].step(m.roughness.data_mut(), &grads.roughness, lr);
        adams[2].step(m.metallic.data_mut(), &grads.metallic, lr);
        m.project();
        let g_log: Vec<T> = grads.env.iter().zip(assets.env.image().data()).map(|(g, e)| *g * *e).collect();
        adam_env.step(&mut env_log, &g_log, lr_env);
        assets.env.map_image(|img| {
            for (e, l) in img.data_mut().iter_mut().zip(&env_log) {
                *e = l.exp();
            }
        });
    }
    if assets.materials.albedo.width() != cfg.material_size {
        assets.materials = assets.materials.resized(cfg.material_size);
    }
    if assets.env.height() != cfg.env_height {
        assets.env = resample_env(&assets.env, cfg.env_height)?;
    }
    Ok(FitResult { assets, trace })
}

/// Bilinear resampling of `env` to `height`×`2·height` texels.
fn resample_env<T: Real>(env: &EnvironmentMap<T>, height: usize) -> Result<EnvironmentMap<T>> {
    EnvironmentMap::from_fn(2 * height, height, |d| env.sample_env(d))
}

/// Renders fitted assets under a different environment.
pub fn relight<T: Real>(
    assets: &SceneAssets<T>,
    new_env: &EnvironmentMap<T>,
    camera: &Camera<T>,
    width: usize,
    height: usize,
    spp: usize,
    seed: u64,
) -> Result<Rendering<T>> {
    render_image(&assets.with_env(new_env.clone()), camera, width, height, spp, seed)
}

