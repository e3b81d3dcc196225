mod common;

use common::{random_linear, random_tonemapped};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relight::assets::rgbe_quantize;
use relight::camera::Camera;
use relight::dataset::{
    gt_camera_path, input_image_path, load_object_dataset, write_object_dataset, DatasetContent, EnvInfo, InputRecord,
    TestRecord,
};
use relight::io::ply::{read_ply, write_ply};
use relight::io::rgbe::{read_rgbe, write_rgbe};
use relight::math::{Mat3, Vec3};
use relight::synth::{build_shape, Shape};
use relight::{Error, Mask};

fn random_camera<R: Rng>(rng: &mut R) -> Camera<f64> {
    let axis = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalized();
    Camera::new(
        rng.gen_range(50.0..200.0),
        rng.gen_range(50.0..200.0),
        rng.gen_range(10.0..30.0),
        rng.gen_range(10.0..30.0),
        Mat3::rotation(axis, rng.gen_range(-3.0..3.0)),
        Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(1.0..5.0)),
        rng.gen_range(-0.2..0.2),
    )
    .unwrap()
}

fn random_mask<R: Rng>(rng: &mut R, w: usize, h: usize) -> Mask {
    Mask::from_vec(w, h, (0..w * h).map(|_| rng.gen()).collect()).unwrap()
}

fn content(seed: u64) -> DatasetContent {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (20, 12);
    DatasetContent {
        inputs: (0..3)
            .map(|_| InputRecord {
                image: random_tonemapped(&mut rng, w, h),
                camera: random_camera(&mut rng),
                mask: random_mask(&mut rng, w, h),
            })
            .collect(),
        input_exposure: rng.gen_range(-2.0..2.0),
        bounding_box: [-0.5, -0.4, -0.3, 0.5, 0.4, 0.3],
        tests: (0..2)
            .map(|k| TestRecord {
                image: random_tonemapped(&mut rng, w, h),
                camera: random_camera(&mut rng),
                exposure: rng.gen_range(-3.0..3.0),
                env: rgbe_quantize(&random_linear(&mut rng, 16, 8, 0.0, 10.0)),
                mask: Some(random_mask(&mut rng, w, h)),
                info: Some(EnvInfo { name: format!("env{k}"), same_environment: k == 0 }),
            })
            .collect(),
    }
}

fn assert_camera_close(a: &Camera<f64>, b: &Camera<f64>) {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + x.abs());
    assert!(close(a.fx, b.fx) && close(a.fy, b.fy) && close(a.cx, b.cx) && close(a.cy, b.cy) && close(a.k1, b.k1));
    for r in 0..3 {
        for c in 0..3 {
            assert!(close(a.rotation.m[r][c], b.rotation.m[r][c]));
        }
    }
    assert!(close(a.translation.x, b.translation.x));
    assert!(close(a.translation.y, b.translation.y));
    assert!(close(a.translation.z, b.translation.z));
}

#[test]
fn write_then_load_reproduces_content() {
    let dir = tempfile::tempdir().unwrap();
    let c = content(1);
    let ds = write_object_dataset(&c, dir.path()).unwrap();
    assert_eq!(ds.inputs.len(), 3);
    assert_eq!(ds.tests.len(), 2);
    let back = ds.read_content().unwrap();
    assert_eq!(back.input_exposure, c.input_exposure);
    assert_eq!(back.bounding_box, c.bounding_box);
    for (a, b) in c.inputs.iter().zip(&back.inputs) {
        assert_eq!(a.image, b.image);
        assert_eq!(a.mask, b.mask);
        assert_camera_close(&a.camera, &b.camera);
    }
    for (a, b) in c.tests.iter().zip(&back.tests) {
        assert_eq!(a.image, b.image);
        assert_eq!(a.mask, b.mask);
        assert_eq!(a.env, b.env);
        assert_eq!(a.exposure, b.exposure);
        assert_eq!(a.info, b.info);
        assert_camera_close(&a.camera, &b.camera);
    }
}

#[test]
fn empty_directory_names_first_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    match load_object_dataset(dir.path()) {
        Err(Error::MissingFile(p)) => assert!(p.ends_with("test/inputs/exposure.txt"), "{p:?}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_camera_is_named() {
    let dir = tempfile::tempdir().unwrap();
    write_object_dataset(&content(2), dir.path()).unwrap();
    let gone = gt_camera_path(dir.path(), 1);
    std::fs::remove_file(&gone).unwrap();
    match load_object_dataset(dir.path()) {
        Err(e @ Error::MissingFile(_)) => {
            assert!(e.is_io());
            assert!(e.to_string().contains("gt_camera_0001.txt"), "{e}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn inputs_without_images_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    write_object_dataset(&content(3), dir.path()).unwrap();
    let gone = input_image_path(dir.path(), 2);
    std::fs::remove_file(&gone).unwrap();
    match load_object_dataset(dir.path()) {
        Err(Error::MissingFile(p)) => assert_eq!(p, gone),
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_exposure_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    write_object_dataset(&content(4), dir.path()).unwrap();
    std::fs::write(relight::dataset::exposure_path(dir.path()), "bright\n").unwrap();
    let e = load_object_dataset(dir.path()).unwrap_err();
    assert!(matches!(e, Error::Format { .. }), "{e}");
    assert!(!e.is_io());
}

#[test]
fn rgbe_roundtrip_within_one_percent() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..20 {
        let img = random_linear(&mut rng, 64, 32, 1e-3, 1e3);
        let p = dir.path().join(format!("{k}.hdr"));
        write_rgbe(&img, &p).unwrap();
        let back = read_rgbe::<f64>(&p).unwrap();
        for (a, b) in img.pixels().zip(back.pixels()) {
            let m = a.iter().cloned().fold(0.0, f64::max);
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() <= 0.01 * m, "{a:?} vs {b:?}");
            }
        }
    }
}

#[test]
fn synthetic_meshes_survive_ply_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for shape in [Shape::Sphere, Shape::Box, Shape::Capsule, Shape::Composite] {
        let mesh = build_shape(shape, 24).unwrap();
        let p = dir.path().join("m.ply");
        write_ply(&mesh, &p).unwrap();
        assert_eq!(read_ply::<f64>(&p).unwrap(), mesh, "{shape:?}");
    }
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(100))]
    #[test]
    fn png_roundtrip_is_lossless(seed in 0u64..u64::MAX, w in 1usize..40, h in 1usize..40) {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = random_tonemapped(&mut rng, w, h);
        let p = dir.path().join("x.png");
        relight::io::png::write_png_rgb(&img, &p).unwrap();
        proptest::prop_assert_eq!(relight::io::png::read_png_rgb(&p).unwrap(), img);
    }

    #[test]
    fn rgbe_bytes_roundtrip_within_one_percent(seed in 0u64..u64::MAX, w in 1usize..80, h in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = random_linear(&mut rng, w, h, 0.0, 50.0);
        let bytes = relight::io::rgbe::encode(&img);
        let back = relight::io::rgbe::decode::<f64>(&bytes, std::path::Path::new("mem")).unwrap();
        for (a, b) in img.pixels().zip(back.pixels()) {
            let m = a.iter().cloned().fold(0.0, f64::max);
            for c in 0..3 {
                proptest::prop_assert!((a[c] - b[c]).abs() <= 0.01 * m);
            }
        }
    }
}
