//! Reflectance model: a principled-BRDF subset parameterized by albedo,
//! roughness and metallic, with analytic parameter derivatives.
//!
//! ```text
//! F0 = 0.04·(1 - m) + albedo·m
//! f  = (1 - m)·(1 - F(n·ωo))·albedo/π + D(h)·F(h·ωo)·G(ωi, ωo) / (4 (n·ωi)(n·ωo))
//! ```
//!
//! `D` is GGX with `α = roughness²`, `G` is the height-correlated Smith term
//! and `F` is Schlick's approximation. The diffuse lobe is attenuated by the
//! view-direction Fresnel reflectance so white materials do not reflect more
//! energy than they receive.

use crate::math::Vec3;
use crate::scalar::Real;

pub const ROUGHNESS_MIN: f64 = 0.03;
pub const DIELECTRIC_F0: f64 = 0.04;

/// Reflectance model applied to the material textures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BrdfModel {
    #[default]
    Principled,
    /// `albedo/π`; roughness and metallic are ignored.
    Lambertian,
}

impl BrdfModel {
    pub fn name(self) -> &'static str {
        match self {
            BrdfModel::Principled => "principled",
            BrdfModel::Lambertian => "lambertian",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "principled" => Some(BrdfModel::Principled),
            "lambertian" => Some(BrdfModel::Lambertian),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialSample<T> {
    pub albedo: [T; 3],
    pub roughness: T,
    pub metallic: T,
}

/// BRDF value with its partial derivatives per color channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BrdfGrad<T> {
    pub value: [T; 3],
    /// `∂f_c/∂albedo_c` (the Jacobian is diagonal).
    pub d_albedo: [T; 3],
    pub d_roughness: [T; 3],
    pub d_metallic: [T; 3],
}

struct Lobe<T> {
    nl: T,
    nv: T,
    nh: T,
    vh: T,
}

fn lobe<T: Real>(wi: Vec3<T>, wo: Vec3<T>, n: Vec3<T>) -> Option<Lobe<T>> {
    let nl = n.dot(wi);
    let nv = n.dot(wo);
    if nl <= T::zero() || nv <= T::zero() {
        return None;
    }
    let h = (wi + wo).normalized();
    Some(Lobe { nl, nv, nh: n.dot(h).max(T::zero()), vh: wo.dot(h).max(T::zero()) })
}

#[inline]
fn pow5<T: Real>(x: T) -> T {
    let x2 = x * x;
    x2 * x2 * x
}

/// Smith Λ for GGX and its derivative with respect to α².
#[inline]
fn smith_lambda<T: Real>(cos: T, a2: T) -> (T, T) {
    let c2 = cos * cos;
    let tan2 = (T::one() - c2).max(T::zero()) / c2;
    let root = (T::one() + a2 * tan2).sqrt();
    ((root - T::one()) * T::lit(0.5), tan2 / (T::lit(4.0) * root))
}

impl BrdfModel {
    pub fn eval<T: Real>(self, m: &MaterialSample<T>, wi: Vec3<T>, wo: Vec3<T>, n: Vec3<T>) -> [T; 3] {
        self.eval_grad(m, wi, wo, n).value
    }

    pub fn eval_grad<T: Real>(self, m: &MaterialSample<T>, wi: Vec3<T>, wo: Vec3<T>, n: Vec3<T>) -> BrdfGrad<T> {
        let Some(l) = lobe(wi, wo, n) else { return BrdfGrad::default() };
        let inv_pi = T::FRAC_1_PI();
        match self {
            BrdfModel::Lambertian => BrdfGrad {
                value: m.albedo.map(|a| a * inv_pi),
                d_albedo: [inv_pi; 3],
                ..Default::default()
            },
            BrdfModel::Principled => principled(m, &l),
        }
    }
}

impl BrdfModel {
    /// Whether the model has a specular lobe that benefits from its own sampling strategy.
    pub fn is_glossy(self) -> bool {
        self == BrdfModel::Principled
    }

    /// Reflects `wo` about a half vector drawn from the GGX distribution
    /// using the uniforms `u1`, `u2`. The result may lie below the horizon.
    pub fn sample_glossy<T: Real>(m: &MaterialSample<T>, wo: Vec3<T>, n: Vec3<T>, u1: T, u2: T) -> Vec3<T> {
        let a2 = ggx_a2(m.roughness);
        let one = T::one();
        let cos2 = ((one - u1) / (one + (a2 - one) * u1)).min(one).max(T::zero());
        let sin = (one - cos2).sqrt();
        let (s, c) = (T::TAU() * u2).sin_cos();
        let (t, b) = n.orthonormal_basis();
        let h = (t * (sin * c) + b * (sin * s) + n * cos2.sqrt()).normalized();
        h * (T::lit(2.0) * wo.dot(h)) - wo
    }

    /// Solid-angle density of [`BrdfModel::sample_glossy`] at `wi`.
    pub fn glossy_pdf<T: Real>(m: &MaterialSample<T>, wi: Vec3<T>, wo: Vec3<T>, n: Vec3<T>) -> T {
        let h = (wi + wo).normalized();
        let (nh, vh) = (n.dot(h), wo.dot(h));
        if nh <= T::zero() || vh <= T::zero() {
            return T::zero();
        }
        let a2 = ggx_a2(m.roughness);
        let q = nh * nh * (a2 - T::one()) + T::one();
        a2 / (T::PI() * q * q) * nh / (T::lit(4.0) * vh)
    }
}

fn ggx_a2<T: Real>(roughness: T) -> T {
    let r = roughness.max(T::lit(ROUGHNESS_MIN)).min(T::one());
    let alpha = r * r;
    alpha * alpha
}

fn principled<T: Real>(m: &MaterialSample<T>, l: &Lobe<T>) -> BrdfGrad<T> {
    let one = T::one();
    let pi = T::PI();
    let f0d = T::lit(DIELECTRIC_F0);
    let r_min = T::lit(ROUGHNESS_MIN);
    let (rough, rough_active) = if m.roughness < r_min {
        (r_min, false)
    } else if m.roughness > one {
        (one, false)
    } else {
        (m.roughness, true)
    };
    let metal = m.metallic;

    let alpha = rough * rough;
    let a2 = alpha * alpha;
    let q = l.nh * l.nh * (a2 - one) + one;
    let d = a2 / (pi * q * q);
    let dd_da2 = (q - T::lit(2.0) * a2 * l.nh * l.nh) / (pi * q * q * q);
    let (lam_i, dlam_i) = smith_lambda(l.nl, a2);
    let (lam_o, dlam_o) = smith_lambda(l.nv, a2);
    let g = one / (one + lam_i + lam_o);
    let dg_da2 = -g * g * (dlam_i + dlam_o);
    let denom = T::lit(4.0) * l.nl * l.nv;
    let k = d * g / denom;
    let da2_dr = T::lit(4.0) * rough * rough * rough;
    let dk_dr = if rough_active { (dd_da2 * g + d * dg_da2) / denom * da2_dr } else { T::zero() };

    let s_h = pow5(one - l.vh);
    let s_v = pow5(one - l.nv);
    let mut out = BrdfGrad::default();
    for c in 0..3 {
        let a = m.albedo[c];
        let f0 = f0d * (one - metal) + a * metal;
        let df0_da = metal;
        let df0_dm = a - f0d;
        let fh = f0 + (one - f0) * s_h;
        let fv = f0 + (one - f0) * s_v;
        let diffuse = (one - metal) * (one - fv) * a / pi;
        let specular = k * fh;
        out.value[c] = diffuse + specular;
        out.d_albedo[c] =
            (one - metal) / pi * ((one - fv) - a * (one - s_v) * df0_da) + k * (one - s_h) * df0_da;
        out.d_metallic[c] = -(one - fv) * a / pi - (one - metal) * a / pi * (one - s_v) * df0_dm
            + k * (one - s_h) * df0_dm;
        out.d_roughness[c] = dk_dr * fh;
    }
    out
}
