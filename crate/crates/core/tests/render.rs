mod common;

use common::oracles::{random_unit, reflected_energy};
use common::{camera_at, furnace_scene, random_env, random_materials, sphere};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relight::envmap::EnvironmentMap;
use relight::math::{Ray, Vec3};
use relight::render::shade::freeze;
use relight::render::{render_image, shade_direct, Bvh, MaterialSample, MaterialTextures, Mesh, SceneAssets};

fn triangle_soup<R: Rng>(rng: &mut R, n: usize) -> Mesh<f64> {
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut uvs = Vec::new();
    let mut triangles = Vec::new();
    while triangles.len() < n {
        let c = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let tri: Vec<Vec3<f64>> = (0..3).map(|_| c + random_unit(rng) * rng.gen_range(0.05..0.3)).collect();
        let nrm = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
        if nrm.length() < 1e-4 {
            continue;
        }
        let base = vertices.len() as u32;
        for p in tri {
            vertices.push(p);
            normals.push(nrm.normalized());
            uvs.push([rng.gen(), rng.gen()]);
        }
        triangles.push([base, base + 1, base + 2]);
    }
    Mesh::new(vertices, normals, uvs, triangles).unwrap()
}

#[test]
fn bvh_matches_brute_force_on_random_soup() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let bvh = Bvh::build(triangle_soup(&mut rng, 500));
    let mut hits = 0;
    for _ in 0..10_000 {
        let origin = random_unit(&mut rng) * 2.5;
        let target = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let ray = Ray::new(origin, (target - origin).normalized());
        let fast = bvh.intersect(&ray);
        let slow = bvh.intersect_brute_force(&ray);
        match (fast, slow) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                hits += 1;
                assert_eq!(a.triangle, b.triangle);
                assert!((a.t - b.t).abs() < 1e-9);
            }
            (a, b) => panic!("bvh {a:?} vs brute force {b:?}"),
        }
    }
    assert!(hits > 1000, "only {hits} rays hit");
}

#[test]
fn centroid_hit_and_misses() {
    let mesh = Mesh::new(
        vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
        vec![Vec3::new(0.0, 0.0, 1.0); 3],
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        vec![[0, 1, 2]],
    )
    .unwrap();
    let bvh = Bvh::build(mesh);
    let c = Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0);
    let hit = bvh.intersect(&Ray::new(c + Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.0, -1.0))).unwrap();
    for b in hit.bary {
        assert!((b - 1.0f64 / 3.0).abs() < 1e-9);
    }
    assert!(bvh.intersect(&Ray::new(c + Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.0, 1.0))).is_none());
}

#[test]
fn furnace_single_point() {
    let assets = furnace_scene(0.5);
    let ray = Ray::new(Vec3::new(3.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0));
    let hit = assets.bvh.intersect(&ray).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let l = shade_direct(&assets, &hit, -ray.dir, 4096, &mut rng);
    for c in l {
        assert!((c - 0.5).abs() < 0.005, "{c}");
    }
}

#[test]
fn furnace_render() {
    let assets = furnace_scene(0.5);
    let r = render_image(&assets, &camera_at(4.0, 24, 40.0), 24, 24, 256, 3).unwrap();
    assert!(r.mask.count() > 50);
    let mut sum = 0.0;
    for y in 0..24 {
        for x in 0..24 {
            if r.mask.get(x, y) {
                sum += r.image.get(x, y).iter().sum::<f64>() / 3.0;
            }
        }
    }
    let mean = sum / r.mask.count() as f64;
    assert!((mean - 0.5).abs() < 0.005, "masked mean {mean}");
}

#[test]
fn brdf_conserves_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for &roughness in &[0.03, 0.1, 0.3, 0.6, 1.0] {
        for &metallic in &[0.0, 0.5, 1.0] {
            for &theta in &[0.0f64, 0.7, 1.3, 1.5] {
                let m = MaterialSample { albedo: [1.0; 3], roughness, metallic };
                let wo = Vec3::new(theta.sin(), 0.0, theta.cos());
                let e = reflected_energy(&m, wo, 40_000, &mut rng);
                assert!(e <= 1.01, "r={roughness} m={metallic} θ={theta}: {e}");
            }
        }
    }
}

#[test]
fn variance_falls_as_one_over_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let assets = SceneAssets::new(sphere(1.0, 48), random_materials(&mut rng, 8), random_env(&mut rng, 32, 16));
    let ray = Ray::new(Vec3::new(3.0, 0.4, 0.3), (Vec3::new(0.0, 0.0, 0.0) - Vec3::new(3.0, 0.4, 0.3)).normalized());
    let hit = assets.bvh.intersect(&ray).unwrap();
    let variance = |n: usize, rng: &mut ChaCha8Rng| {
        let xs: Vec<f64> = (0..4000).map(|_| shade_direct(&assets, &hit, -ray.dir, n, rng)[1]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
    };
    let v4 = variance(4, &mut rng);
    let v8 = variance(8, &mut rng);
    let ratio = v4 / v8;
    assert!((ratio - 2.0).abs() < 0.4, "variance ratio {ratio}");
}

#[test]
fn frozen_estimate_is_linear_in_environment() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let e1 = random_env(&mut rng, 32, 16);
    let e2 = random_env(&mut rng, 32, 16);
    let sum = EnvironmentMap::new(
        relight::LinearImage::from_vec(
            32,
            16,
            e1.image().data().iter().zip(e2.image().data()).map(|(a, b)| a + b).collect(),
        )
        .unwrap(),
    )
    .unwrap();
    let assets = SceneAssets::new(sphere(1.0, 48), random_materials(&mut rng, 8), e1.clone());
    for k in 0..50 {
        let origin = random_unit(&mut rng) * 3.0;
        let ray = Ray::new(origin, (Vec3::zero() - origin).normalized());
        let hit = assets.bvh.intersect(&ray).unwrap();
        let frozen = freeze(&assets, &hit, -ray.dir, 8, &mut rng);
        let mat = assets.materials.eval(&frozen.material);
        let a = frozen.radiance_with(assets.brdf, &mat, &e1);
        let b = frozen.radiance_with(assets.brdf, &mat, &e2);
        let s = frozen.radiance_with(assets.brdf, &mat, &sum);
        for c in 0..3 {
            let expect = a[c] + b[c];
            assert!((s[c] - expect).abs() <= 1e-6 * expect.abs().max(1e-12), "sample {k}: {} vs {expect}", s[c]);
        }
    }
}

#[test]
fn black_environment_and_full_occlusion_give_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let black = SceneAssets::new(
        sphere(1.0, 32),
        MaterialTextures::uniform(4, [0.8; 3], 0.5, 0.2).unwrap(),
        EnvironmentMap::constant(16, 8, [0.0; 3]).unwrap(),
    );
    let ray = Ray::new(Vec3::new(3.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0));
    let hit = black.bvh.intersect(&ray).unwrap();
    assert_eq!(shade_direct(&black, &hit, -ray.dir, 64, &mut rng), [0.0; 3]);

    let inner = sphere(0.3, 32);
    let outer = sphere(2.0, 32);
    let enclosed = SceneAssets::new(
        Mesh::merge(&[inner, outer]).unwrap(),
        MaterialTextures::uniform(4, [0.8; 3], 0.5, 0.2).unwrap(),
        EnvironmentMap::constant(16, 8, [1.0; 3]).unwrap(),
    );
    let ray = Ray::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0));
    let hit = enclosed.bvh.intersect(&ray).unwrap();
    assert!((hit.t - 0.7).abs() < 0.01);
    assert_eq!(shade_direct(&enclosed, &hit, -ray.dir, 256, &mut rng), [0.0; 3]);
}

#[test]
fn renders_are_deterministic_and_empty_when_looking_away() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let assets = SceneAssets::new(sphere(1.0, 32), random_materials(&mut rng, 8), random_env(&mut rng, 32, 16));
    let cam = camera_at(4.0, 16, 30.0);
    let a = render_image(&assets, &cam, 16, 16, 8, 11).unwrap();
    let b = render_image(&assets, &cam, 16, 16, 8, 11).unwrap();
    assert_eq!(a.image, b.image);
    assert_eq!(a.mask, b.mask);

    let away = relight::Camera::look_at(
        Vec3::new(4.0, 0.0, 0.0),
        Vec3::new(8.0, 0.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        30.0,
        30.0,
        8.0,
        8.0,
    )
    .unwrap();
    let r = render_image(&assets, &away, 16, 16, 4, 0).unwrap();
    assert!(r.mask.is_empty());
    assert!(r.image.data().iter().all(|v| *v == 0.0));
}
