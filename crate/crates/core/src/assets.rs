//! On-disk scene assets: a PLY mesh, three material rasters and the
//! environment map as Radiance HDR files, and a JSON manifest.
//!
//! Scalar textures are stored with the value replicated in all three channels.

use std::path::Path;

use serde_json::json;

use crate::envmap::EnvironmentMap;
use crate::error::{Error, Result};
use crate::image::LinearImage;
use crate::io::ply::{read_ply, write_ply};
use crate::io::rgbe::{decode_pixel, encode_pixel, read_rgbe, write_rgbe};
use crate::io::{read_text, write_file};
use crate::render::{BrdfModel, MaterialTextures, SceneAssets, Texture};

pub const MANIFEST: &str = "assets.json";
pub const MESH: &str = "mesh.ply";
pub const ALBEDO: &str = "albedo.hdr";
pub const ROUGHNESS: &str = "roughness.hdr";
pub const METALLIC: &str = "metallic.hdr";
pub const ENV: &str = "env.hdr";

pub fn texture_to_image(t: &Texture<f64>) -> LinearImage<f64> {
    let data = match t.channels() {
        3 => t.data().to_vec(),
        _ => t.data().iter().step_by(t.channels()).flat_map(|v| [*v; 3]).collect(),
    };
    LinearImage::from_vec(t.width(), t.height(), data).expect("texture dimensions")
}

pub fn image_to_texture(img: &LinearImage<f64>, channels: usize) -> Result<Texture<f64>> {
    let data = match channels {
        3 => img.data().to_vec(),
        1 => img.data().iter().step_by(3).copied().collect(),
        _ => return Err(Error::invalid(format!("unsupported channel count {channels}"))),
    };
    Texture::from_vec(img.width(), img.height(), channels, data)
}

/// Value after one RGBE encode/decode cycle, so rendering from the rounded
/// data matches what a reader of the written files sees.
pub fn rgbe_quantize(img: &LinearImage<f64>) -> LinearImage<f64> {
    let data = img
        .data()
        .chunks_exact(3)
        .flat_map(|p| decode_pixel(encode_pixel([p[0], p[1], p[2]])))
        .collect();
    LinearImage::from_vec(img.width(), img.height(), data).expect("same dimensions")
}

/// Materials and environment rounded to what [`write_assets`] stores.
pub fn quantize_assets(assets: &SceneAssets<f64>) -> Result<SceneAssets<f64>> {
    let m = &assets.materials;
    let q = |t: &Texture<f64>| image_to_texture(&rgbe_quantize(&texture_to_image(t)), t.channels());
    let materials = MaterialTextures::new(q(&m.albedo)?, q(&m.roughness)?, q(&m.metallic)?)?;
    let env = EnvironmentMap::new(rgbe_quantize(assets.env.image()))?;
    Ok(SceneAssets { bvh: assets.bvh.clone(), materials, env, brdf: assets.brdf })
}

pub fn write_assets(assets: &SceneAssets<f64>, dir: &Path) -> Result<()> {
    let m = &assets.materials;
    write_ply(assets.mesh(), &dir.join(MESH))?;
    write_rgbe(&texture_to_image(&m.albedo), &dir.join(ALBEDO))?;
    write_rgbe(&texture_to_image(&m.roughness), &dir.join(ROUGHNESS))?;
    write_rgbe(&texture_to_image(&m.metallic), &dir.join(METALLIC))?;
    write_rgbe(assets.env.image(), &dir.join(ENV))?;
    let manifest = json!({
        "brdf": assets.brdf.name(),
        "mesh": MESH,
        "albedo": ALBEDO,
        "roughness": ROUGHNESS,
        "metallic": METALLIC,
        "env": ENV,
        "material_size": m.albedo.width(),
        "env_size": [assets.env.width(), assets.env.height()],
    });
    let text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
    write_file(&dir.join(MANIFEST), text.as_bytes())
}

pub fn read_assets(dir: &Path) -> Result<SceneAssets<f64>> {
    let path = dir.join(MANIFEST);
    let manifest: serde_json::Value =
        serde_json::from_str(&read_text(&path)?).map_err(|e| Error::format(&path, e.to_string()))?;
    let field = |k: &str, default: &str| manifest.get(k).and_then(|v| v.as_str()).unwrap_or(default).to_string();
    let brdf_name = field("brdf", "principled");
    let brdf = BrdfModel::from_name(&brdf_name)
        .ok_or_else(|| Error::format(&path, format!("unknown reflectance model '{brdf_name}'")))?;
    let mesh = read_ply(&dir.join(field("mesh", MESH)))?;
    let tex = |name: String, ch: usize| -> Result<Texture<f64>> { image_to_texture(&read_rgbe(&dir.join(name))?, ch) };
    let materials = MaterialTextures::new(
        tex(field("albedo", ALBEDO), 3)?,
        tex(field("roughness", ROUGHNESS), 1)?,
        tex(field("metallic", METALLIC), 1)?,
    )?;
    let env = EnvironmentMap::new(read_rgbe(&dir.join(field("env", ENV)))?)?;
    Ok(SceneAssets::new(mesh, materials, env).with_brdf(brdf))
}
