//! Object dataset directory tree.
//!
//! ```text
//! <object>/test/gt_image_xxxx.png
//! <object>/test/gt_camera_xxxx.txt
//! <object>/test/gt_env_512_rotated_xxxx.hdr
//! <object>/test/gt_exposure_xxxx.txt
//! <object>/test/gt_mask_xxxx.png          (optional)
//! <object>/test/gt_env_info_xxxx.txt      (optional: "<env name> <same|unseen>")
//! <object>/test/inputs/image_xxxx.png
//! <object>/test/inputs/camera_xxxx.txt
//! <object>/test/inputs/mask_xxxx.png
//! <object>/test/inputs/exposure.txt
//! <object>/test/inputs/object_bounding_box.txt
//! ```
//!
//! Indices are four-digit zero-padded decimal numbers.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::camera::{read_camera, write_camera, Camera};
use crate::envmap::EnvironmentMap;
use crate::error::{Error, Result};
use crate::image::{LinearImage, Mask, TonemappedImage};
use crate::invopt::TrainingView;
use crate::io::png::{read_mask, read_png_rgb, write_mask, write_png_rgb};
use crate::io::rgbe::{read_rgbe, write_rgbe};
use crate::io::{parse_floats, read_text, write_file};
use crate::photometry::{linearize, DEFAULT_GAMMA};

pub const TEST_DIR: &str = "test";
pub const INPUTS_DIR: &str = "test/inputs";

/// Name of the environment a test view was captured in, and whether it is
/// the environment of the input images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvInfo {
    pub name: String,
    pub same_environment: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputView {
    pub index: u32,
    pub image: PathBuf,
    pub camera: Camera<f64>,
    pub mask: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestView {
    pub index: u32,
    pub image: PathBuf,
    pub camera: Camera<f64>,
    pub exposure: f64,
    pub env: PathBuf,
    pub mask: Option<PathBuf>,
    pub info: Option<EnvInfo>,
}

/// Parsed index of one object directory. Images are loaded on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectDataset {
    pub root: PathBuf,
    pub inputs: Vec<InputView>,
    pub input_exposure: f64,
    /// Min xyz then max xyz.
    pub bounding_box: [f64; 6],
    pub tests: Vec<TestView>,
}

/// Fully materialized dataset contents, as written by [`write_object_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetContent {
    pub inputs: Vec<InputRecord>,
    pub input_exposure: f64,
    pub bounding_box: [f64; 6],
    pub tests: Vec<TestRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputRecord {
    pub image: TonemappedImage,
    pub camera: Camera<f64>,
    pub mask: Mask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRecord {
    pub image: TonemappedImage,
    pub camera: Camera<f64>,
    pub exposure: f64,
    pub env: LinearImage<f64>,
    pub mask: Option<Mask>,
    pub info: Option<EnvInfo>,
}

fn indexed(dir: &Path, prefix: &str, index: u32, ext: &str) -> PathBuf {
    dir.join(format!("{prefix}{index:04}.{ext}"))
}

pub fn gt_image_path(root: &Path, i: u32) -> PathBuf {
    indexed(&root.join(TEST_DIR), "gt_image_", i, "png")
}
pub fn gt_camera_path(root: &Path, i: u32) -> PathBuf {
    indexed(&root.join(TEST_DIR), "gt_camera_", i, "txt")
}
pub fn gt_env_path(root: &Path, i: u32) -> PathBuf {
    indexed(&root.join(TEST_DIR), "gt_env_512_rotated_", i, "hdr")
}
pub fn gt_exposure_path(root: &Path, i: u32) -> PathBuf {
    indexed(&root.join(TEST_DIR), "gt_exposure_", i, "txt")
}
pub fn gt_mask_path(root: &Path, i: u32) -> PathBuf {
    indexed(&root.join(TEST_DIR), "gt_mask_", i, "png")
}
pub fn gt_env_info_path(root: &Path, i: u32) -> PathBuf {
    indexed(&root.join(TEST_DIR), "gt_env_info_", i, "txt")
}
pub fn input_image_path(root: &Path, i: u32) -> PathBuf {
    indexed(&root.join(INPUTS_DIR), "image_", i, "png")
}
pub fn input_camera_path(root: &Path, i: u32) -> PathBuf {
    indexed(&root.join(INPUTS_DIR), "camera_", i, "txt")
}
pub fn input_mask_path(root: &Path, i: u32) -> PathBuf {
    indexed(&root.join(INPUTS_DIR), "mask_", i, "png")
}
pub fn exposure_path(root: &Path) -> PathBuf {
    root.join(INPUTS_DIR).join("exposure.txt")
}
pub fn bounding_box_path(root: &Path) -> PathBuf {
    root.join(INPUTS_DIR).join("object_bounding_box.txt")
}

/// Indices `i` of files named `<prefix>iiii.<ext>` in `dir`.
fn scan(dir: &Path, prefix: &str, ext: &str) -> Result<BTreeSet<u32>> {
    let mut out = BTreeSet::new();
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(Error::io(dir, e)),
    };
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(rest) = name.strip_prefix(prefix).and_then(|r| r.strip_suffix(&format!(".{ext}"))) else {
            continue;
        };
        if rest.len() == 4 && rest.bytes().all(|b| b.is_ascii_digit()) {
            out.insert(rest.parse().expect("four digits"));
        }
    }
    Ok(out)
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingFile(path))
    }
}

fn read_scalars(path: &Path, n: usize) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let v = parse_floats(&text).map_err(|m| Error::format(path, m))?;
    if v.len() != n {
        return Err(Error::format(path, format!("expected {n} numbers, found {}", v.len())));
    }
    Ok(v)
}

pub fn read_env_info(path: &Path) -> Result<EnvInfo> {
    let text = read_text(path)?;
    let toks: Vec<&str> = text.lines().filter(|l| !l.trim_start().starts_with('#')).flat_map(str::split_whitespace).collect();
    match toks.as_slice() {
        [name, kind] if *kind == "same" || *kind == "unseen" => {
            Ok(EnvInfo { name: name.to_string(), same_environment: *kind == "same" })
        }
        _ => Err(Error::format(path, "expected '<env name> <same|unseen>'")),
    }
}

/// Loads and validates the dataset tree rooted at `root`.
pub fn load_object_dataset(root: &Path) -> Result<ObjectDataset> {
    let input_exposure = read_scalars(&require(exposure_path(root))?, 1)?[0];
    let bb = read_scalars(&require(bounding_box_path(root))?, 6)?;
    let bounding_box = [bb[0], bb[1], bb[2], bb[3], bb[4], bb[5]];

    let inputs_dir = root.join(INPUTS_DIR);
    let mut input_ids = scan(&inputs_dir, "image_", "png")?;
    input_ids.extend(scan(&inputs_dir, "camera_", "txt")?);
    input_ids.extend(scan(&inputs_dir, "mask_", "png")?);
    if input_ids.is_empty() {
        return Err(Error::MissingFile(input_image_path(root, 0)));
    }
    let mut inputs = Vec::with_capacity(input_ids.len());
    for i in input_ids {
        let image = require(input_image_path(root, i))?;
        let camera = read_camera(&require(input_camera_path(root, i))?)?;
        let mask = require(input_mask_path(root, i))?;
        inputs.push(InputView { index: i, image, camera, mask });
    }

    let test_dir = root.join(TEST_DIR);
    let mut test_ids = scan(&test_dir, "gt_image_", "png")?;
    test_ids.extend(scan(&test_dir, "gt_camera_", "txt")?);
    test_ids.extend(scan(&test_dir, "gt_exposure_", "txt")?);
    test_ids.extend(scan(&test_dir, "gt_env_512_rotated_", "hdr")?);
    let mut tests = Vec::with_capacity(test_ids.len());
    for i in test_ids {
        let image = require(gt_image_path(root, i))?;
        let camera = read_camera(&require(gt_camera_path(root, i))?)?;
        let exposure = read_scalars(&require(gt_exposure_path(root, i))?, 1)?[0];
        let env = require(gt_env_path(root, i))?;
        let mask = Some(gt_mask_path(root, i)).filter(|p| p.is_file());
        let info_path = gt_env_info_path(root, i);
        let info = if info_path.is_file() { Some(read_env_info(&info_path)?) } else { None };
        tests.push(TestView { index: i, image, camera, exposure, env, mask, info });
    }
    Ok(ObjectDataset { root: root.to_path_buf(), inputs, input_exposure, bounding_box, tests })
}

fn float_text(v: f64) -> String {
    format!("{v:.17e}\n")
}

/// Writes `content` as a dataset tree under `root`, numbering views from 0000.
pub fn write_object_dataset(content: &DatasetContent, root: &Path) -> Result<ObjectDataset> {
    write_file(&exposure_path(root), float_text(content.input_exposure).as_bytes())?;
    let bb = content.bounding_box.map(|v| format!("{v:.17e}")).join(" ") + "\n";
    write_file(&bounding_box_path(root), bb.as_bytes())?;
    for (i, rec) in content.inputs.iter().enumerate() {
        let i = i as u32;
        write_png_rgb(&rec.image, &input_image_path(root, i))?;
        write_camera(&rec.camera, &input_camera_path(root, i))?;
        write_mask(&rec.mask, &input_mask_path(root, i))?;
    }
    for (i, rec) in content.tests.iter().enumerate() {
        let i = i as u32;
        write_png_rgb(&rec.image, &gt_image_path(root, i))?;
        write_camera(&rec.camera, &gt_camera_path(root, i))?;
        write_file(&gt_exposure_path(root, i), float_text(rec.exposure).as_bytes())?;
        write_rgbe(&rec.env, &gt_env_path(root, i))?;
        if let Some(m) = &rec.mask {
            write_mask(m, &gt_mask_path(root, i))?;
        }
        if let Some(info) = &rec.info {
            let kind = if info.same_environment { "same" } else { "unseen" };
            write_file(&gt_env_info_path(root, i), format!("{} {kind}\n", info.name).as_bytes())?;
        }
    }
    load_object_dataset(root)
}

impl ObjectDataset {
    /// Reads every referenced image into memory.
    pub fn read_content(&self) -> Result<DatasetContent> {
        let inputs = self
            .inputs
            .iter()
            .map(|v| Ok(InputRecord { image: read_png_rgb(&v.image)?, camera: v.camera.clone(), mask: read_mask(&v.mask)? }))
            .collect::<Result<Vec<_>>>()?;
        let tests = self
            .tests
            .iter()
            .map(|t| {
                Ok(TestRecord {
                    image: read_png_rgb(&t.image)?,
                    camera: t.camera.clone(),
                    exposure: t.exposure,
                    env: read_rgbe(&t.env)?,
                    mask: t.mask.as_deref().map(read_mask).transpose()?,
                    info: t.info.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DatasetContent { inputs, input_exposure: self.input_exposure, bounding_box: self.bounding_box, tests })
    }

    /// Input images converted to linear radiance with the dataset exposure.
    pub fn training_views(&self) -> Result<Vec<TrainingView<f64>>> {
        self.inputs
            .iter()
            .map(|v| {
                let img = read_png_rgb(&v.image)?;
                let mask = read_mask(&v.mask)?;
                mask.check_dims(img.width(), img.height())?;
                Ok(TrainingView { camera: v.camera.clone(), image: linearize(&img, self.input_exposure, DEFAULT_GAMMA), mask })
            })
            .collect()
    }

    pub fn test_env(&self, i: usize) -> Result<EnvironmentMap<f64>> {
        EnvironmentMap::new(read_rgbe(&self.tests[i].env)?)
    }

    /// Directory name, used as the object identifier in reports.
    pub fn name(&self) -> String {
        self.root.file_name().and_then(|n| n.to_str()).unwrap_or("object").to_string()
    }
}
