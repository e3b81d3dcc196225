//! Data and regularization terms of the fitting objective with analytic
//! gradients through the frozen direct-illumination estimator.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::invopt::tv::tv;
use crate::render::brdf::MaterialSample;
use crate::render::shade::{FrozenSample, FrozenShading};
use crate::render::SceneAssets;
use crate::scalar::Real;

/// Per-pixel residual norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    L1,
    L2,
}

/// Regularization weights and residual norm shared by the loss routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights<T> {
    /// Weight of the environment-map TV term.
    pub alpha_env: T,
    /// Weight of the summed material-texture TV terms.
    pub alpha_material: T,
    pub kind: LossKind,
}

/// One training ray with its frozen shading (absent for a miss) and the
/// observed linear radiance.
#[derive(Debug, Clone)]
pub struct FrozenPixel<T> {
    pub shading: Option<FrozenShading<T>>,
    pub target: [T; 3],
    /// Independent samples at the same hit. When present the residual is
    /// taken from `shading` and the radiance derivatives from these, so the
    /// gradient is not biased toward low-variance predictions.
    pub gradient_samples: Option<Vec<FrozenSample<T>>>,
}

/// A minibatch of frozen pixels; `scale` multiplies the summed residuals
/// (typically foreground pixel count over batch size).
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub pixels: Vec<FrozenPixel<T>>,
    pub scale: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown<T> {
    pub data: T,
    pub tv_env: T,
    pub tv_material: T,
    pub total: T,
}

/// `∂loss/∂θ`, shaped like the parameter rasters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    pub albedo: Vec<T>,
    pub roughness: Vec<T>,
    pub metallic: Vec<T>,
    pub env: Vec<T>,
}

impl<T: Real> GradientSet<T> {
    pub fn zeros_like(assets: &SceneAssets<T>) -> Self {
        let m = &assets.materials;
        Self {
            albedo: vec![T::zero(); m.albedo.data().len()],
            roughness: vec![T::zero(); m.roughness.data().len()],
            metallic: vec![T::zero(); m.metallic.data().len()],
            env: vec![T::zero(); assets.env.image().data().len()],
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.albedo, &self.roughness, &self.metallic, &self.env].iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Parameter class addressed by gradient checks and the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamClass {
    Albedo,
    Roughness,
    Metallic,
    Env,
}

impl ParamClass {
    pub const ALL: [ParamClass; 4] = [ParamClass::Albedo, ParamClass::Roughness, ParamClass::Metallic, ParamClass::Env];

    pub fn grad<'a, T>(self, g: &'a GradientSet<T>) -> &'a [T] {
        match self {
            ParamClass::Albedo => &g.albedo,
            ParamClass::Roughness => &g.roughness,
            ParamClass::Metallic => &g.metallic,
            ParamClass::Env => &g.env,
        }
    }

    pub fn values<'a, T: Real>(self, a: &'a SceneAssets<T>) -> &'a [T] {
        match self {
            ParamClass::Albedo => a.materials.albedo.data(),
            ParamClass::Roughness => a.materials.roughness.data(),
            ParamClass::Metallic => a.materials.metallic.data(),
            ParamClass::Env => a.env.image().data(),
        }
    }

    /// Applies `f` to the raster of this class; environment sampling tables are rebuilt.
    pub fn update<T: Real>(self, a: &mut SceneAssets<T>, f: impl FnOnce(&mut [T])) {
        match self {
            ParamClass::Albedo => f(a.materials.albedo.data_mut()),
            ParamClass::Roughness => f(a.materials.roughness.data_mut()),
            ParamClass::Metallic => f(a.materials.metallic.data_mut()),
            ParamClass::Env => a.env.map_image(|img| f(img.data_mut())),
        }
    }
}

/// Regularization terms and their gradients.
fn regularizers<T: Real>(assets: &SceneAssets<T>, w: &LossWeights<T>) -> Result<(T, T, GradientSet<T>)> {
    let m = &assets.materials;
    let e = assets.env.image();
    let (tv_env, g_env) = tv(e.data(), e.width(), e.height(), 3, true)?;
    let (ta, g_a) = tv(m.albedo.data(), m.albedo.width(), m.albedo.height(), 3, false)?;
    let (tr, g_r) = tv(m.roughness.data(), m.roughness.width(), m.roughness.height(), 1, false)?;
    let (tm, g_m) = tv(m.metallic.data(), m.metallic.width(), m.metallic.height(), 1, false)?;
    let scale = |v: Vec<T>, s: T| v.into_iter().map(|x| x * s).collect::<Vec<_>>();
    let grads = GradientSet {
        albedo: scale(g_a, w.alpha_material),
        roughness: scale(g_r, w.alpha_material),
        metallic: scale(g_m, w.alpha_material),
        env: scale(g_env, w.alpha_env),
    };
    Ok((tv_env, ta + tr + tm, grads))
}

#[inline]
fn residual_loss<T: Real>(kind: LossKind, r: T) -> (T, T) {
    match kind {
        LossKind::L1 => {
            let s = if r > T::zero() {
                T::one()
            } else if r < T::zero() {
                -T::one()
            } else {
                T::zero()
            };
            (r.abs(), s)
        }
        LossKind::L2 => (r * r, T::lit(2.0) * r),
    }
}

fn check_batch<T>(batch: &Batch<T>) -> Result<()> {
    if batch.pixels.is_empty() {
        return Err(Error::invalid("empty training batch"));
    }
    Ok(())
}

/// Loss value recomputed with the plain forward estimator.
pub fn loss_only<T: Real>(assets: &SceneAssets<T>, batch: &Batch<T>, w: &LossWeights<T>) -> Result<LossBreakdown<T>> {
    check_batch(batch)?;
    let mut data = T::zero();
    for px in &batch.pixels {
        let pred = px.shading.as_ref().map_or([T::zero(); 3], |s| s.radiance(assets));
        for c in 0..3 {
            data = data + residual_loss(w.kind, pred[c] - px.target[c]).0;
        }
    }
    let data = data * batch.scale;
    let (tv_env, tv_material, _) = regularizers(assets, w)?;
    let total = data + w.alpha_env * tv_env + w.alpha_material * tv_material;
    Ok(LossBreakdown { data, tv_env, tv_material, total })
}

/// Sparse gradient contributions of one chunk of pixels.
#[derive(Default)]
struct Partial<T> {
    data: T,
    albedo: Vec<(usize, T)>,
    roughness: Vec<(usize, T)>,
    metallic: Vec<(usize, T)>,
    env: Vec<(usize, T)>,
}

const CHUNK: usize = 64;

fn pixel_grad<T: Real>(assets: &SceneAssets<T>, px: &FrozenPixel<T>, w: &LossWeights<T>, scale: T, out: &mut Partial<T>) {
    let Some(sh) = &px.shading else {
        for c in 0..3 {
            out.data = out.data + residual_loss(w.kind, -px.target[c]).0 * scale;
        }
        return;
    };
    let mat: MaterialSample<T> = assets.materials.eval(&sh.material);
    let env = assets.env.image().data();
    let decorrelated = px.gradient_samples.as_deref();
    let grad_samples = decorrelated.unwrap_or(&sh.samples);
    let mut pred = [T::zero(); 3];
    if decorrelated.is_some() {
        pred = sh.radiance_with(assets.brdf, &mat, &assets.env);
    }
    let mut d_alb = [T::zero(); 3];
    let mut d_rough = [T::zero(); 3];
    let mut d_metal = [T::zero(); 3];
    let mut fk = Vec::with_capacity(grad_samples.len());
    for s in grad_samples {
        let g = assets.brdf.eval_grad(&mat, s.dir, sh.wo, sh.normal);
        let k = s.weight * sh.normal.dot(s.dir);
        for c in 0..3 {
            let l = s.env.iter().fold(T::zero(), |a, (i, wt)| a + *wt * env[3 * i + c]);
            let lk = l * k;
            if decorrelated.is_none() {
                pred[c] = pred[c] + g.value[c] * lk;
            }
            d_alb[c] = d_alb[c] + g.d_albedo[c] * lk;
            d_rough[c] = d_rough[c] + g.d_roughness[c] * lk;
            d_metal[c] = d_metal[c] + g.d_metallic[c] * lk;
        }
        fk.push(g.value.map(|f| f * k));
    }
    let mut dl = [T::zero(); 3];
    for c in 0..3 {
        let (v, d) = residual_loss(w.kind, pred[c] - px.target[c]);
        out.data = out.data + v * scale;
        dl[c] = d * scale;
    }
    let fp = &sh.material;
    for (i, wt) in fp.albedo {
        for c in 0..3 {
            out.albedo.push((3 * i + c, dl[c] * d_alb[c] * wt));
        }
    }
    let dr = (0..3).fold(T::zero(), |a, c| a + dl[c] * d_rough[c]);
    let dm = (0..3).fold(T::zero(), |a, c| a + dl[c] * d_metal[c]);
    for (i, wt) in fp.roughness {
        out.roughness.push((i, dr * wt));
    }
    for (i, wt) in fp.metallic {
        out.metallic.push((i, dm * wt));
    }
    for (s, f) in grad_samples.iter().zip(&fk) {
        for (i, wt) in s.env {
            for c in 0..3 {
                out.env.push((3 * i + c, dl[c] * f[c] * wt));
            }
        }
    }
}

/// Total loss and its gradient with respect to every material texel and
/// environment texel, holding sample directions, weights and visibility fixed.
pub fn loss_and_grad<T: Real>(
    assets: &SceneAssets<T>,
    batch: &Batch<T>,
    w: &LossWeights<T>,
) -> Result<(LossBreakdown<T>, GradientSet<T>)> {
    check_batch(batch)?;
    let partials: Vec<Partial<T>> = batch
        .pixels
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut p = Partial { data: T::zero(), ..Default::default() };
            for px in chunk {
                pixel_grad(assets, px, w, batch.scale, &mut p);
            }
            p
        })
        .collect();
    let (tv_env, tv_material, mut grads) = regularizers(assets, w)?;
    let mut data = T::zero();
    // fixed-order reduction keeps results independent of thread scheduling
    for p in partials {
        data = data + p.data;
        for (i, v) in p.albedo {
            grads.albedo[i] = grads.albedo[i] + v;
        }
        for (i, v) in p.roughness {
            grads.roughness[i] = grads.roughness[i] + v;
        }
        for (i, v) in p.metallic {
            grads.metallic[i] = grads.metallic[i] + v;
        }
        for (i, v) in p.env {
            grads.env[i] = grads.env[i] + v;
        }
    }
    let total = data + w.alpha_env * tv_env + w.alpha_material * tv_material;
    Ok((LossBreakdown { data, tv_env, tv_material, total }, grads))
}
