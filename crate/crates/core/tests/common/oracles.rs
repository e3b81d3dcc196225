//! Slow, direct reference implementations used to check the library routes.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relight::invopt::{loss_and_grad, loss_only, Batch, FrozenPixel, LossKind, LossWeights, ParamClass};
use relight::math::{Ray, Vec3};
use relight::metrics::{SSIM_K1, SSIM_K2, SSIM_WINDOW};
use relight::render::shade::freeze;
use relight::render::{BrdfModel, MaterialSample, SceneAssets};
use relight::{Mask, TonemappedImage};

use super::{icosahedron, random_env, random_materials};

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3<f64> {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

fn value(img: &TonemappedImage, mask: &Mask, x: usize, y: usize, c: usize) -> f64 {
    if mask.get(x, y) {
        img.get(x, y)[c] as f64 / 255.0
    } else {
        0.0
    }
}

pub fn naive_psnr(a: &TonemappedImage, b: &TonemappedImage, mask: &Mask) -> f64 {
    let mut sse = 0.0;
    let mut n = 0.0;
    for y in 0..a.height() {
        for x in 0..a.width() {
            if !mask.get(x, y) {
                continue;
            }
            for c in 0..3 {
                let d = value(a, mask, x, y, c) - value(b, mask, x, y, c);
                sse += d * d;
                n += 1.0;
            }
        }
    }
    10.0 * (1.0 / (sse / n)).log10()
}

/// Window statistics gathered pixel by pixel, without running sums.
pub fn naive_ssim(a: &TonemappedImage, b: &TonemappedImage, mask: &Mask) -> f64 {
    let (w, h) = (a.width() as i64, a.height() as i64);
    let r = (SSIM_WINDOW / 2) as i64;
    let (c1, c2) = (SSIM_K1 * SSIM_K1, SSIM_K2 * SSIM_K2);
    let mut total = 0.0;
    let mut count = 0.0;
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x as usize, y as usize) {
                continue;
            }
            for c in 0..3 {
                let mut pa = Vec::new();
                let mut pb = Vec::new();
                for yy in (y - r).max(0)..=(y + r).min(h - 1) {
                    for xx in (x - r).max(0)..=(x + r).min(w - 1) {
                        pa.push(value(a, mask, xx as usize, yy as usize, c));
                        pb.push(value(b, mask, xx as usize, yy as usize, c));
                    }
                }
                let n = pa.len() as f64;
                let ma = pa.iter().sum::<f64>() / n;
                let mb = pb.iter().sum::<f64>() / n;
                let va = pa.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / (n - 1.0);
                let vb = pb.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / (n - 1.0);
                let vab = pa.iter().zip(&pb).map(|(p, q)| (p - ma) * (q - mb)).sum::<f64>() / (n - 1.0);
                total += ((2.0 * ma * mb + c1) * (2.0 * vab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1.0;
            }
        }
    }
    total / count
}

/// All N! orderings of `y` against `x`, counting those at least as extreme.
pub fn permutation_oracle(x: &[f64], y: &[f64]) -> (f64, f64) {
    let rank = |v: &[f64]| {
        let mut r = vec![0.0; v.len()];
        for (k, i) in (0..v.len()).sorted_by(|a, b| v[*a].partial_cmp(&v[*b]).unwrap()).enumerate() {
            r[i] = k as f64 + 1.0;
        }
        r
    };
    let n = x.len() as f64;
    let rho_of = |rx: &[f64], ry: &[f64]| {
        let d2: f64 = rx.iter().zip(ry).map(|(a, b)| (a - b).powi(2)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    };
    let (rx, ry) = (rank(x), rank(y));
    let rho = rho_of(&rx, &ry);
    let mut extreme = 0u64;
    let mut total = 0u64;
    for perm in ry.iter().copied().permutations(ry.len()) {
        total += 1;
        if rho_of(&rx, &perm).abs() >= rho.abs() - 1e-9 {
            extreme += 1;
        }
    }
    (rho, extreme as f64 / total as f64)
}

/// `∫ f·cos dω` for albedo 1 by MIS over cosine and GGX sampling.
pub fn reflected_energy(m: &MaterialSample<f64>, wo: Vec3<f64>, draws: usize, rng: &mut ChaCha8Rng) -> f64 {
    let n = Vec3::new(0.0, 0.0, 1.0);
    let model = BrdfModel::Principled;
    let mut total = 0.0;
    for _ in 0..draws {
        let wi = if rng.gen::<bool>() {
            let (u1, u2): (f64, f64) = (rng.gen(), rng.gen());
            let r = u1.sqrt();
            let phi = std::f64::consts::TAU * u2;
            Vec3::new(r * phi.cos(), r * phi.sin(), (1.0 - u1).sqrt())
        } else {
            BrdfModel::sample_glossy(m, wo, n, rng.gen(), rng.gen())
        };
        if wi.z <= 0.0 {
            continue;
        }
        let p = 0.5 * wi.z / std::f64::consts::PI + 0.5 * BrdfModel::glossy_pdf(m, wi, wo, n);
        if p > 0.0 {
            total += model.eval(m, wi, wo, n)[0] * wi.z / p;
        }
    }
    total / draws as f64
}

/// Icosahedron with random 8×8 material textures and a random 16×8 environment.
pub fn gradient_scene(seed: u64) -> SceneAssets<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SceneAssets::new(icosahedron(1.0), random_materials(&mut rng, 8), random_env(&mut rng, 16, 8))
}

/// Frozen rays toward the object with targets offset from the current prediction.
pub fn gradient_batch(assets: &SceneAssets<f64>, n: usize, samples: usize, decorrelate: bool, seed: u64) -> Batch<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::new();
    while pixels.len() < n {
        let origin = random_unit(&mut rng) * 3.0;
        let aim = Vec3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
        let ray = Ray::new(origin, (aim - origin).normalized());
        let Some(hit) = assets.bvh.intersect(&ray) else { continue };
        let shading = freeze(assets, &hit, -ray.dir, samples, &mut rng);
        let gradient_samples = decorrelate.then(|| freeze(assets, &hit, -ray.dir, samples, &mut rng).samples);
        let pred = shading.radiance(assets);
        let target = pred.map(|p| p * rng.gen_range(0.5..1.5) + rng.gen_range(-0.05..0.05));
        pixels.push(FrozenPixel { shading: Some(shading), target, gradient_samples });
    }
    Batch { pixels, scale: 1.7 }
}

/// Analytic versus central-difference gradient for one parameter class.
pub struct ClassCheck {
    pub class: ParamClass,
    /// Largest relative error over entries with a non-negligible gradient.
    pub max_rel: f64,
    /// Largest finite difference where the analytic gradient is negligible.
    pub max_stray: f64,
    pub checked: usize,
    pub len: usize,
}

pub fn finite_difference_check(assets: &SceneAssets<f64>, batch: &Batch<f64>, w: &LossWeights<f64>) -> Vec<ClassCheck> {
    let (_, grads) = loss_and_grad(assets, batch, w).unwrap();
    let h = 1e-4;
    ParamClass::ALL
        .into_iter()
        .map(|class| {
            let g = class.grad(&grads);
            let len = class.values(assets).len();
            let mut out = ClassCheck { class, max_rel: 0.0, max_stray: 0.0, checked: 0, len };
            for i in 0..len {
                let eval = |delta: f64| {
                    let mut a = assets.clone();
                    class.update(&mut a, |v| v[i] += delta);
                    loss_only(&a, batch, w).unwrap().total
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                if g[i].abs() > 1e-6 {
                    out.checked += 1;
                    out.max_rel = out.max_rel.max((g[i] - fd).abs() / g[i].abs().max(fd.abs()));
                } else {
                    out.max_stray = out.max_stray.max(fd.abs());
                }
            }
            out
        })
        .collect()
}

pub fn weights(kind: LossKind, alpha: f64) -> LossWeights<f64> {
    LossWeights { alpha_env: alpha, alpha_material: alpha, kind }
}
