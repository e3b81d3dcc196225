//! Synthetic object datasets: analytic shapes with procedural materials
//! rendered under procedural environments, laid out as an object dataset with
//! a `truth/` directory holding the generating assets.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;

use rayon::prelude::*;

use crate::assets::{quantize_assets, write_assets};
use crate::camera::Camera;
use crate::dataset::{write_object_dataset, DatasetContent, EnvInfo, InputRecord, ObjectDataset, TestRecord};
use crate::envmap::EnvironmentMap;
use crate::error::{Error, Result};
use crate::image::{LinearImage, Mask};
use crate::io::ply::write_ply;
use crate::math::{Mat3, Vec3};
use crate::photometry::{tone_map, DEFAULT_GAMMA};
use crate::render::{render_image, BrdfModel, MaterialTextures, Mesh, Rendering, SceneAssets, Texture};

pub const TRUTH_DIR: &str = "truth";
pub const INPUT_MESH: &str = "mesh.ply";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Sphere,
    Box,
    Capsule,
    /// A sphere next to a rotated box.
    Composite,
}

impl Shape {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "sphere" => Some(Shape::Sphere),
            "box" => Some(Shape::Box),
            "capsule" => Some(Shape::Capsule),
            "composite" => Some(Shape::Composite),
            _ => None,
        }
    }
}

/// Procedural lighting, named after the capture environment categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    /// Sky gradient with a sun disc.
    Outdoor,
    /// Dim room with a bright window.
    IndoorNatural,
    /// Dark room with three colored lamps.
    IndoorArtificial,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::Outdoor, EnvKind::IndoorNatural, EnvKind::IndoorArtificial];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Outdoor => "outdoor",
            EnvKind::IndoorNatural => "indoor-natural",
            EnvKind::IndoorArtificial => "indoor-artificial",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn radiance(self, d: Vec3<f64>) -> [f64; 3] {
        match self {
            EnvKind::Outdoor => outdoor(d),
            EnvKind::IndoorNatural => indoor_window(d),
            EnvKind::IndoorArtificial => tri_light(d),
        }
    }
}

fn dir_from(azimuth_deg: f64, elevation_deg: f64) -> Vec3<f64> {
    let (a, e) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
    Vec3::new(e.cos() * a.cos(), e.cos() * a.sin(), e.sin())
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [0, 1, 2].map(|c| a[c] + (b[c] - a[c]) * t)
}

fn outdoor(d: Vec3<f64>) -> [f64; 3] {
    let sun = dir_from(60.0, 40.0);
    if d.dot(sun) > 4.0f64.to_radians().cos() {
        return [40.0, 36.0, 30.0];
    }
    if d.z >= 0.0 {
        lerp3([0.95, 0.95, 0.9], [0.3, 0.5, 0.95], d.z.sqrt())
    } else {
        [0.3, 0.25, 0.18]
    }
}

fn indoor_window(d: Vec3<f64>) -> [f64; 3] {
    let az = d.y.atan2(d.x).to_degrees();
    let el = d.z.clamp(-1.0, 1.0).asin().to_degrees();
    if (60.0..120.0).contains(&az) && (5.0..50.0).contains(&el) {
        return [3.2, 3.4, 3.8];
    }
    if d.z > 0.6 {
        [0.35, 0.33, 0.3]
    } else if d.z < -0.2 {
        [0.12, 0.09, 0.07]
    } else {
        [0.25, 0.2, 0.16]
    }
}

fn tri_light(d: Vec3<f64>) -> [f64; 3] {
    let lamps = [
        (dir_from(-20.0, 35.0), [12.0, 8.0, 4.0]),
        (dir_from(110.0, 55.0), [4.0, 7.0, 12.0]),
        (dir_from(220.0, 25.0), [5.0, 11.0, 6.0]),
    ];
    for (dir, rgb) in lamps {
        if d.dot(dir) > 9.0f64.to_radians().cos() {
            return rgb;
        }
    }
    [0.06, 0.06, 0.07]
}

/// Synthetic dataset recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub shape: Shape,
    /// Tessellation density (segments around a full circle).
    pub resolution: usize,
    pub material_size: usize,
    /// Environments; the first one lights the input views.
    pub envs: Vec<EnvKind>,
    pub env_width: usize,
    pub input_views: usize,
    pub test_views_per_env: usize,
    pub width: usize,
    pub height: usize,
    pub spp: usize,
    pub brdf: BrdfModel,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            shape: Shape::Composite,
            resolution: 48,
            material_size: 256,
            envs: EnvKind::ALL.to_vec(),
            env_width: 512,
            input_views: 16,
            test_views_per_env: 3,
            width: 128,
            height: 128,
            spp: 64,
            brdf: BrdfModel::Principled,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.envs.len() < 2 {
            return Err(Error::invalid("need at least two environments (one for reconstruction, one unseen)"));
        }
        if self.input_views < 8 {
            return Err(Error::invalid(format!("need at least 8 input views, got {}", self.input_views)));
        }
        if self.test_views_per_env == 0 || self.spp == 0 || self.width < 8 || self.height < 8 {
            return Err(Error::invalid("test views, spp and image size must be positive (images at least 8x8)"));
        }
        if self.resolution < 8 {
            return Err(Error::invalid("tessellation resolution must be at least 8"));
        }
        if self.material_size < 2 || !self.material_size.is_power_of_two() {
            return Err(Error::invalid("material size must be a power of two"));
        }
        if self.env_width < 4 || self.env_width % 2 != 0 {
            return Err(Error::invalid("environment width must be even"));
        }
        Ok(())
    }
}

fn sphere(center: Vec3<f64>, r: f64, n: usize) -> Result<Mesh<f64>> {
    let (nu, nv) = (n, n / 2);
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut uvs = Vec::new();
    for j in 0..=nv {
        let v = j as f64 / nv as f64;
        let theta = v * PI;
        for i in 0..=nu {
            let u = i as f64 / nu as f64;
            // matches the environment-map direction convention
            let phi = TAU * (0.5 - u);
            let nrm = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            vertices.push(center + nrm * r);
            normals.push(nrm);
            uvs.push([u, v]);
        }
    }
    let idx = |i: usize, j: usize| (j * (nu + 1) + i) as u32;
    let mut tris = Vec::new();
    for j in 0..nv {
        for i in 0..nu {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            if j > 0 {
                tris.push([a, c, b]);
            }
            if j + 1 < nv {
                tris.push([b, c, d]);
            }
        }
    }
    Mesh::new(vertices, normals, uvs, tris)
}

/// Axis-aligned box with each face subdivided `n`×`n`; faces occupy a 3×2
/// grid of cells in uv space.
fn cube(half: Vec3<f64>, n: usize) -> Result<Mesh<f64>> {
    let faces: [(Vec3<f64>, Vec3<f64>, Vec3<f64>); 6] = [
        (Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)),
        (Vec3::new(-1.0, 0.0, 0.0), Vec3::new(0.0, -1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)),
        (Vec3::new(0.0, 1.0, 0.0), Vec3::new(-1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0)),
        (Vec3::new(0.0, -1.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0)),
        (Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)),
        (Vec3::new(0.0, 0.0, -1.0), Vec3::new(-1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)),
    ];
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut uvs = Vec::new();
    let mut tris = Vec::new();
    let margin = 0.04;
    for (f, (nrm, a, b)) in faces.iter().enumerate() {
        let (col, row) = ((f % 3) as f64, (f / 3) as f64);
        let base = vertices.len() as u32;
        for j in 0..=n {
            for i in 0..=n {
                let s = i as f64 / n as f64;
                let t = j as f64 / n as f64;
                let p = nrm.mul_elem(half) + a.mul_elem(half) * (2.0 * s - 1.0) + b.mul_elem(half) * (1.0 - 2.0 * t);
                vertices.push(p);
                normals.push(*nrm);
                let cu = (col + margin + (1.0 - 2.0 * margin) * s) / 3.0;
                let cv = (row + margin + (1.0 - 2.0 * margin) * t) / 2.0;
                uvs.push([cu, cv]);
            }
        }
        let idx = |i: usize, j: usize| base + (j * (n + 1) + i) as u32;
        for j in 0..n {
            for i in 0..n {
                // counter-clockwise seen from outside
                tris.push([idx(i, j), idx(i, j + 1), idx(i + 1, j)]);
                tris.push([idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)]);
            }
        }
    }
    Mesh::new(vertices, normals, uvs, tris)
}

/// Capsule along z: a cylinder of half-length `half_len` capped by hemispheres.
fn capsule(r: f64, half_len: f64, n: usize) -> Result<Mesh<f64>> {
    let cap = n / 4;
    let arc = FRAC_PI_2 * r;
    let total = 2.0 * arc + 2.0 * half_len;
    // profile points: (radius, z, normal radial, normal z, arclength)
    let mut profile = Vec::new();
    for k in 0..=cap {
        let a = -FRAC_PI_2 + FRAC_PI_2 * k as f64 / cap as f64;
        profile.push((r * a.cos(), -half_len + r * a.sin(), a.cos(), a.sin(), arc * k as f64 / cap as f64));
    }
    for k in 1..cap.max(2) {
        let t = k as f64 / cap.max(2) as f64;
        profile.push((r, -half_len + 2.0 * half_len * t, 1.0, 0.0, arc + 2.0 * half_len * t));
    }
    for k in 0..=cap {
        let a = FRAC_PI_2 * k as f64 / cap as f64;
        profile.push((r * a.cos(), half_len + r * a.sin(), a.cos(), a.sin(), arc + 2.0 * half_len + arc * k as f64 / cap as f64));
    }
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut uvs = Vec::new();
    for &(rho, z, nr, nz, s) in &profile {
        for i in 0..=n {
            let u = i as f64 / n as f64;
            let phi = TAU * (0.5 - u);
            vertices.push(Vec3::new(rho * phi.cos(), rho * phi.sin(), z));
            normals.push(Vec3::new(nr * phi.cos(), nr * phi.sin(), nz).normalized());
            uvs.push([u, 1.0 - s / total]);
        }
    }
    let rows = profile.len();
    let idx = |i: usize, j: usize| (j * (n + 1) + i) as u32;
    let mut tris = Vec::new();
    for j in 0..rows - 1 {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            if j > 0 {
                tris.push([a, b, c]);
            }
            if j + 2 < rows {
                tris.push([b, d, c]);
            }
        }
    }
    Mesh::new(vertices, normals, uvs, tris)
}

fn transformed(mesh: Mesh<f64>, rot: &Mat3<f64>, offset: Vec3<f64>) -> Result<Mesh<f64>> {
    let v = mesh.vertices().iter().map(|p| rot.mul_vec(*p) + offset).collect();
    let n = mesh.normals().iter().map(|p| rot.mul_vec(*p).normalized()).collect();
    Mesh::new(v, n, mesh.uvs().to_vec(), mesh.triangles().to_vec())
}

/// Triangulated analytic shape roughly filling the cube `[-0.8, 0.8]³`.
pub fn build_shape(shape: Shape, resolution: usize) -> Result<Mesh<f64>> {
    let n = resolution.max(8);
    let box_n = (n / 8).max(2);
    match shape {
        Shape::Sphere => sphere(Vec3::zero(), 0.6, n),
        Shape::Box => cube(Vec3::new(0.45, 0.45, 0.45), box_n),
        Shape::Capsule => capsule(0.35, 0.3, n),
        Shape::Composite => {
            // sphere on the left half of the uv square, box faces on the right
            let s = sphere(Vec3::new(-0.3, -0.15, 0.0), 0.42, n)?.remap_uvs([0.01, 0.01], [0.47, 0.98]);
            let rot = Mat3::rotation(Vec3::new(0.0, 0.0, 1.0), 0.5);
            let b = transformed(cube(Vec3::new(0.3, 0.3, 0.3), box_n)?, &rot, Vec3::new(0.42, 0.32, -0.12))?
                .remap_uvs([0.52, 0.01], [0.47, 0.98]);
            Mesh::merge(&[s, b])
        }
    }
}

const PALETTE: [[f64; 3]; 6] = [
    [0.75, 0.3, 0.2],
    [0.2, 0.45, 0.7],
    [0.85, 0.75, 0.3],
    [0.3, 0.65, 0.35],
    [0.6, 0.6, 0.62],
    [0.55, 0.3, 0.6],
];

/// Ground-truth material pattern: a checkerboard on the left half of uv
/// space and a solid color per box face cell on the right half.
pub fn truth_material(u: f64, v: f64) -> ([f64; 3], f64, f64) {
    if u < 0.5 {
        let checker = ((u * 16.0).floor() as i64 + (v * 8.0).floor() as i64).rem_euclid(2) == 0;
        if checker {
            ([0.8, 0.55, 0.35], 0.35, 0.0)
        } else {
            ([0.25, 0.4, 0.6], 0.5, 0.0)
        }
    } else {
        let col = (((u - 0.5) * 6.0).floor() as usize).min(2);
        let row = ((v * 2.0).floor() as usize).min(1);
        let cell = row * 3 + col;
        let metallic = if cell == 4 { 0.8 } else { 0.0 };
        let rough = if row == 0 { 0.45 } else { 0.7 };
        (PALETTE[cell], rough, metallic)
    }
}

pub fn truth_materials(size: usize) -> Result<MaterialTextures<f64>> {
    let albedo = Texture::from_fn(size, size, 3, |u, v| truth_material(u, v).0.to_vec());
    let rough = Texture::from_fn(size, size, 1, |u, v| vec![truth_material(u, v).1]);
    let metal = Texture::from_fn(size, size, 1, |u, v| vec![truth_material(u, v).2]);
    MaterialTextures::new(albedo, rough, metal)
}

pub fn environment(kind: EnvKind, width: usize) -> Result<EnvironmentMap<f64>> {
    EnvironmentMap::from_fn(width, width / 2, |d| kind.radiance(d))
}

/// Camera on a sphere of radius `dist` around the origin.
fn orbit_camera(azimuth_deg: f64, elevation_deg: f64, dist: f64, width: usize, height: usize) -> Result<Camera<f64>> {
    let eye = dir_from(azimuth_deg, elevation_deg) * dist;
    let f = 1.45 * width.min(height) as f64;
    Camera::look_at(eye, Vec3::zero(), Vec3::new(0.0, 0.0, 1.0), f, f, width as f64 / 2.0, height as f64 / 2.0)
}

pub fn input_cameras(spec: &SynthSpec) -> Result<Vec<Camera<f64>>> {
    (0..spec.input_views)
        .map(|i| {
            let az = 360.0 * i as f64 / spec.input_views as f64;
            let el = if i % 2 == 0 { 15.0 } else { 45.0 };
            orbit_camera(az, el, 3.6, spec.width, spec.height)
        })
        .collect()
}

pub fn test_cameras(spec: &SynthSpec, env_index: usize) -> Result<Vec<Camera<f64>>> {
    let n = spec.test_views_per_env;
    (0..n)
        .map(|i| {
            let az = 360.0 * (i as f64 + 0.5) / n as f64 + 37.0 * env_index as f64 + 11.0;
            let el = 25.0 + 10.0 * ((i + env_index) % 2) as f64;
            orbit_camera(az, el, 3.6, spec.width, spec.height)
        })
        .collect()
}

/// Exposure placing the 99th percentile of masked channel maxima at 0.85.
pub fn auto_exposure(images: &[(&LinearImage<f64>, &Mask)]) -> f64 {
    let mut v: Vec<f64> = images
        .iter()
        .flat_map(|(img, mask)| {
            img.pixels().zip(mask.bits()).filter(|(_, m)| **m).map(|(p, _)| p[0].max(p[1]).max(p[2]))
        })
        .collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let p = v[((v.len() - 1) as f64 * 0.99).round() as usize];
    if p > 0.0 {
        (0.85 / p).log2()
    } else {
        0.0
    }
}

pub fn view_seed(seed: u64, group: u64, index: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (group << 32) ^ index
}

/// Ground-truth assets as written to `truth/` (RGBE-rounded), one per environment.
pub fn truth_assets(spec: &SynthSpec) -> Result<Vec<SceneAssets<f64>>> {
    let mesh = build_shape(spec.shape, spec.resolution)?;
    let materials = truth_materials(spec.material_size)?;
    let base = SceneAssets::new(mesh, materials, environment(spec.envs[0], spec.env_width)?).with_brdf(spec.brdf);
    spec.envs
        .iter()
        .map(|&k| quantize_assets(&base.with_env(environment(k, spec.env_width)?)))
        .collect()
}

/// Output of [`synth`]: the loaded dataset and the linear renders behind
/// its images.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: ObjectDataset,
    pub inputs: Vec<Rendering<f64>>,
    pub tests: Vec<Rendering<f64>>,
}

/// Renders `spec` and writes the dataset tree, the input mesh and `truth/` to `out`.
pub fn synth(spec: &SynthSpec, out: &Path) -> Result<SynthOutput> {
    spec.validate()?;
    let assets = truth_assets(spec)?;
    let cams = input_cameras(spec)?;
    let inputs: Vec<Rendering<f64>> = cams
        .iter()
        .enumerate()
        .map(|(i, cam)| render_image(&assets[0], cam, spec.width, spec.height, spec.spp, view_seed(spec.seed, 0, i as u64)))
        .collect::<Result<_>>()?;
    if inputs.iter().all(|r| r.mask.is_empty()) {
        return Err(Error::invalid("object not visible in any input view"));
    }
    let input_ev = auto_exposure(&inputs.iter().map(|r| (&r.image, &r.mask)).collect::<Vec<_>>());
    let mut content = DatasetContent {
        inputs: cams
            .iter()
            .zip(&inputs)
            .map(|(cam, r)| InputRecord {
                image: tone_map(&r.image, input_ev, DEFAULT_GAMMA),
                camera: cam.clone(),
                mask: r.mask.clone(),
            })
            .collect(),
        input_exposure: input_ev,
        bounding_box: bounding_box(assets[0].mesh()),
        tests: Vec::new(),
    };
    let mut tests = Vec::new();
    for (k, env_assets) in assets.iter().enumerate() {
        let cams = test_cameras(spec, k)?;
        let renders: Vec<Rendering<f64>> = cams
            .par_iter()
            .enumerate()
            .map(|(i, cam)| {
                render_image(env_assets, cam, spec.width, spec.height, spec.spp, view_seed(spec.seed, 1 + k as u64, i as u64))
            })
            .collect::<Result<_>>()?;
        for (cam, r) in cams.into_iter().zip(renders) {
            let ev = auto_exposure(&[(&r.image, &r.mask)]);
            content.tests.push(TestRecord {
                image: tone_map(&r.image, ev, DEFAULT_GAMMA),
                camera: cam,
                exposure: ev,
                env: env_assets.env.image().clone(),
                mask: Some(r.mask.clone()),
                info: Some(EnvInfo { name: spec.envs[k].name().to_string(), same_environment: k == 0 }),
            });
            tests.push(r);
        }
    }
    let dataset = write_object_dataset(&content, out)?;
    write_ply(assets[0].mesh(), &out.join(INPUT_MESH))?;
    let truth = out.join(TRUTH_DIR);
    write_assets(&assets[0], &truth)?;
    write_manifest(spec, &truth)?;
    Ok(SynthOutput { dataset, inputs, tests })
}

fn bounding_box(mesh: &Mesh<f64>) -> [f64; 6] {
    let (lo, hi) = mesh.bounds();
    [lo.x, lo.y, lo.z, hi.x, hi.y, hi.z]
}

fn write_manifest(spec: &SynthSpec, dir: &Path) -> Result<()> {
    let shape = match spec.shape {
        Shape::Sphere => "sphere",
        Shape::Box => "box",
        Shape::Capsule => "capsule",
        Shape::Composite => "composite",
    };
    let v = serde_json::json!({
        "shape": shape,
        "resolution": spec.resolution,
        "material_size": spec.material_size,
        "envs": spec.envs.iter().map(|e| e.name()).collect::<Vec<_>>(),
        "env_width": spec.env_width,
        "input_views": spec.input_views,
        "test_views_per_env": spec.test_views_per_env,
        "width": spec.width,
        "height": spec.height,
        "spp": spec.spp,
        "brdf": spec.brdf.name(),
        "seed": spec.seed,
    });
    crate::io::write_file(&dir.join("synth.json"), serde_json::to_string_pretty(&v).expect("json").as_bytes())
}

/// Recreates the spec recorded in `truth/synth.json`.
pub fn read_manifest(dir: &Path) -> Result<SynthSpec> {
    let path = dir.join("synth.json");
    let text = crate::io::read_text(&path)?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    let bad = |k: &str| Error::format(&path, format!("missing or invalid '{k}'"));
    let num = |k: &str| v.get(k).and_then(|x| x.as_u64()).map(|x| x as usize).ok_or_else(|| bad(k));
    let shape = v.get("shape").and_then(|x| x.as_str()).and_then(Shape::from_name).ok_or_else(|| bad("shape"))?;
    let brdf = v.get("brdf").and_then(|x| x.as_str()).and_then(BrdfModel::from_name).ok_or_else(|| bad("brdf"))?;
    let envs = v
        .get("envs")
        .and_then(|x| x.as_array())
        .ok_or_else(|| bad("envs"))?
        .iter()
        .map(|e| e.as_str().and_then(EnvKind::from_name).ok_or_else(|| bad("envs")))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthSpec {
        shape,
        resolution: num("resolution")?,
        material_size: num("material_size")?,
        envs,
        env_width: num("env_width")?,
        input_views: num("input_views")?,
        test_views_per_env: num("test_views_per_env")?,
        width: num("width")?,
        height: num("height")?,
        spp: num("spp")?,
        brdf,
        seed: v.get("seed").and_then(|x| x.as_u64()).ok_or_else(|| bad("seed"))?,
    })
}
