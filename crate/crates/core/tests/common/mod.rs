#![allow(dead_code)]

pub mod oracles;

use rand::Rng;
use relight::envmap::EnvironmentMap;
use relight::math::Vec3;
use relight::render::{BrdfModel, MaterialTextures, Mesh, SceneAssets, Texture};
use relight::{Camera, LinearImage, TonemappedImage};

pub fn random_tonemapped<R: Rng>(rng: &mut R, w: usize, h: usize) -> TonemappedImage {
    TonemappedImage::from_vec(w, h, (0..3 * w * h).map(|_| rng.gen()).collect()).unwrap()
}

pub fn random_linear<R: Rng>(rng: &mut R, w: usize, h: usize, lo: f64, hi: f64) -> LinearImage {
    LinearImage::from_vec(w, h, (0..3 * w * h).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Unit icosahedron: 20 triangles, radial normals, spherical uvs.
pub fn icosahedron(radius: f64) -> Mesh<f64> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let normals: Vec<Vec3<f64>> = raw.iter().map(|p| Vec3::from_array(*p).normalized()).collect();
    let vertices = normals.iter().map(|n| *n * radius).collect();
    let uvs = normals
        .iter()
        .map(|n| [0.5 + n.y.atan2(n.x) / std::f64::consts::TAU * 0.9, 0.05 + 0.9 * n.z.acos() / std::f64::consts::PI])
        .collect();
    let triangles = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    Mesh::new(vertices, normals, uvs, triangles).unwrap()
}

/// Tessellated sphere at the origin with outward normals.
pub fn sphere(radius: f64, n: usize) -> Mesh<f64> {
    let m = relight::synth::build_shape(relight::synth::Shape::Sphere, n).unwrap();
    let (lo, hi) = m.bounds();
    let k = radius / (0.5 * (hi - lo).max_component());
    Mesh::new(
        m.vertices().iter().map(|v| *v * k).collect(),
        m.normals().to_vec(),
        m.uvs().to_vec(),
        m.triangles().to_vec(),
    )
    .unwrap()
}

pub fn random_materials<R: Rng>(rng: &mut R, size: usize) -> MaterialTextures<f64> {
    let n = size * size;
    let albedo = Texture::from_vec(size, size, 3, (0..3 * n).map(|_| rng.gen_range(0.2..0.8)).collect()).unwrap();
    let rough = Texture::from_vec(size, size, 1, (0..n).map(|_| rng.gen_range(0.3..0.9)).collect()).unwrap();
    let metal = Texture::from_vec(size, size, 1, (0..n).map(|_| rng.gen_range(0.1..0.9)).collect()).unwrap();
    MaterialTextures::new(albedo, rough, metal).unwrap()
}

pub fn random_env<R: Rng>(rng: &mut R, w: usize, h: usize) -> EnvironmentMap<f64> {
    EnvironmentMap::new(random_linear(rng, w, h, 0.2, 2.0)).unwrap()
}

/// Lambertian sphere of the given albedo under a constant unit environment.
pub fn furnace_scene(albedo: f64) -> SceneAssets<f64> {
    SceneAssets::new(
        sphere(1.0, 64),
        MaterialTextures::uniform(4, [albedo; 3], 1.0, 0.0).unwrap(),
        EnvironmentMap::constant(32, 16, [1.0; 3]).unwrap(),
    )
    .with_brdf(BrdfModel::Lambertian)
}

/// Camera on the +x axis at `distance`, looking at the origin.
pub fn camera_at(distance: f64, size: usize, focal: f64) -> Camera {
    let c = size as f64 / 2.0;
    Camera::look_at(
        Vec3::new(distance, 0.0, 0.0),
        Vec3::zero(),
        Vec3::new(0.0, 0.0, 1.0),
        focal,
        focal,
        c,
        c,
    )
    .unwrap()
}
