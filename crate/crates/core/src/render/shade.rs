//! Direct illumination from the environment map with multiple importance
//! sampling (balance heuristic) between environment, cosine and, for glossy
//! models, GGX sampling.
//!
//! Sample directions, estimator weights and visibility are drawn once and
//! stored in a [`FrozenShading`], which can then be evaluated (and
//! differentiated) against any material and environment. For frozen samples the
//! estimate is exactly linear in the environment radiance.

use rand::Rng;

use crate::envmap::{EnvironmentMap, Footprint};
use crate::math::Vec3;
use crate::render::brdf::BrdfModel;
use crate::render::bvh::Hit;
use crate::render::material::MaterialFootprint;
use crate::render::SceneAssets;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct FrozenSample<T> {
    pub dir: Vec3<T>,
    /// `1 / (N·Σ p_strategy)`.
    pub weight: T,
    pub env: Footprint<T>,
}

/// Shading point with its unoccluded, above-horizon light samples.
#[derive(Debug, Clone)]
pub struct FrozenShading<T> {
    pub normal: Vec3<T>,
    pub wo: Vec3<T>,
    pub material: MaterialFootprint<T>,
    pub samples: Vec<FrozenSample<T>>,
}

#[inline]
fn cosine_direction<T: Real, R: Rng + ?Sized>(n: Vec3<T>, rng: &mut R) -> Vec3<T> {
    let (t, b) = n.orthonormal_basis();
    let u1 = T::lit(rng.gen::<f64>());
    let u2 = T::lit(rng.gen::<f64>());
    let r = u1.sqrt();
    let (s, c) = (T::TAU() * u2).sin_cos();
    (t * (r * c) + b * (r * s) + n * (T::one() - u1).max(T::zero()).sqrt()).normalized()
}

/// Draws `n` samples per strategy at `hit` seen from `wo` (pointing away from
/// the surface) and records the visible ones.
pub fn freeze<T: Real, R: Rng + ?Sized>(
    assets: &SceneAssets<T>,
    hit: &Hit<T>,
    wo: Vec3<T>,
    n: usize,
    rng: &mut R,
) -> FrozenShading<T> {
    let env = &assets.env;
    let flip = |v: Vec3<T>| if v.dot(wo) < T::zero() { -v } else { v };
    let normal = flip(hit.normal);
    let ng = flip(hit.geometric_normal);
    let eps = assets.bvh.epsilon();
    let origin = hit.point + ng * eps;
    let use_env = env.has_sampler();
    let material = assets.materials.footprint(hit.uv);
    let glossy = assets.brdf.is_glossy().then(|| assets.materials.eval(&material));
    let nf = T::from_usize_lossy(n.max(1));
    let inv_pi = T::FRAC_1_PI();
    let mut samples = Vec::with_capacity(3 * n);
    let push = |dir: Vec3<T>, samples: &mut Vec<FrozenSample<T>>| {
        let cos = normal.dot(dir);
        if cos <= T::zero() || ng.dot(dir) <= T::zero() {
            return;
        }
        let mut p = cos * inv_pi;
        if use_env {
            p = p + env.pdf(dir);
        }
        if let Some(m) = &glossy {
            p = p + BrdfModel::glossy_pdf(m, dir, wo, normal);
        }
        if !(p > T::zero()) || assets.bvh.occluded(origin, dir, T::infinity()) {
            return;
        }
        samples.push(FrozenSample { dir, weight: T::one() / (nf * p), env: env.footprint(dir) });
    };
    for _ in 0..n {
        if use_env {
            if let Ok((d, _)) = env.sample_direction(rng) {
                push(d, &mut samples);
            }
        }
        let d = cosine_direction(normal, rng);
        push(d, &mut samples);
        if let Some(m) = &glossy {
            let d = BrdfModel::sample_glossy(m, wo, normal, T::lit(rng.gen::<f64>()), T::lit(rng.gen::<f64>()));
            if BrdfModel::glossy_pdf(m, d, wo, normal) > T::zero() {
                push(d, &mut samples);
            }
        }
    }
    FrozenShading { normal, wo, material, samples }
}

impl<T: Real> FrozenShading<T> {
    /// Outgoing radiance estimate for the given material and environment.
    pub fn radiance(&self, assets: &SceneAssets<T>) -> [T; 3] {
        self.radiance_with(assets.brdf, &assets.materials.eval(&self.material), &assets.env)
    }

    pub fn radiance_with(
        &self,
        model: BrdfModel,
        mat: &crate::render::brdf::MaterialSample<T>,
        env: &EnvironmentMap<T>,
    ) -> [T; 3] {
        let data = env.image().data();
        let mut out = [T::zero(); 3];
        for s in &self.samples {
            let f = model.eval(mat, s.dir, self.wo, self.normal);
            let k = s.weight * self.normal.dot(s.dir);
            for c in 0..3 {
                let l = s.env.iter().fold(T::zero(), |a, (i, w)| a + *w * data[3 * i + c]);
                out[c] = out[c] + f[c] * (l * k);
            }
        }
        out
    }
}

/// Single-bounce radiance leaving `hit` toward `wo` using `n` samples per strategy.
pub fn shade_direct<T: Real, R: Rng + ?Sized>(
    assets: &SceneAssets<T>,
    hit: &Hit<T>,
    wo: Vec3<T>,
    n: usize,
    rng: &mut R,
) -> [T; 3] {
    freeze(assets, hit, wo, n, rng).radiance(assets)
}
