//! Relighting evaluation: per-view exposure alignment, tone mapping, masking
//! and masked PSNR/SSIM (plus optional perceptual maps) against the dataset's
//! ground-truth test images.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dataset::ObjectDataset;
use crate::error::{Error, Result};
use crate::image::{apply_mask_zero, LinearImage, Mask, TonemappedImage};
use crate::io::png::{read_mask, read_png_rgb};
use crate::io::rgbe::read_rgbe;
use crate::metrics::report::{MetricsReport, MetricsRow};
use crate::metrics::{masked_perceptual, masked_psnr, masked_ssim};
use crate::photometry::{solve_exposure, tone_map_channels, DEFAULT_GAMMA};

pub fn render_path(dir: &Path, index: u32) -> PathBuf {
    dir.join(format!("render_{index:04}.hdr"))
}

pub fn perceptual_path(dir: &Path, index: u32) -> PathBuf {
    dir.join(format!("lpips_{index:04}.hdr"))
}

/// Scores of one submitted render against its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewScore {
    pub psnr_db: f64,
    pub ssim: f64,
    pub perceptual: Option<f64>,
    pub ev: [f64; 3],
    /// Exposure-aligned, tone-mapped and masked render.
    pub aligned: TonemappedImage,
}

/// Scores `render` against `gt` following the evaluation protocol.
pub fn score_view(
    render: &LinearImage<f64>,
    gt: &TonemappedImage,
    mask: &Mask,
    perceptual: Option<&[f64]>,
) -> Result<ViewScore> {
    let sol = solve_exposure(render, gt, mask, DEFAULT_GAMMA)?;
    let aligned = apply_mask_zero(&tone_map_channels(render, sol.ev, DEFAULT_GAMMA), mask)?;
    let gt = apply_mask_zero(gt, mask)?;
    let psnr_db = masked_psnr(&aligned, &gt, mask)?;
    let ssim = masked_ssim(&aligned, &gt, mask)?;
    let perceptual = perceptual.map(|d| masked_perceptual(d, mask.width(), mask.height(), mask)).transpose()?;
    Ok(ViewScore { psnr_db, ssim, perceptual, ev: sol.ev, aligned })
}

/// Evaluates every test view of `dataset` against `render_xxxx.hdr` files in
/// `renders`. Perceptual distance maps are read from `lpips_xxxx.hdr` (first
/// channel) when present. Views without a stored mask are scored over the
/// whole frame.
pub fn evaluate(dataset: &ObjectDataset, renders: &Path) -> Result<MetricsReport> {
    let object = dataset.name();
    let rows = dataset
        .tests
        .par_iter()
        .map(|t| {
            let path = render_path(renders, t.index);
            if !path.is_file() {
                return Err(Error::MissingFile(path));
            }
            let render = read_rgbe::<f64>(&path)?;
            let gt = read_png_rgb(&t.image)?;
            let mask = match &t.mask {
                Some(p) => read_mask(p)?,
                None => Mask::new(gt.width(), gt.height(), true),
            };
            let lp = perceptual_path(renders, t.index);
            let dist = if lp.is_file() {
                let img = read_rgbe::<f64>(&lp)?;
                Some(img.data().iter().step_by(3).copied().collect::<Vec<_>>())
            } else {
                None
            };
            let s = score_view(&render, &gt, &mask, dist.as_deref())?;
            let info = t.info.clone();
            Ok(MetricsRow {
                object: object.clone(),
                env: info.as_ref().map_or_else(|| "unknown".to_string(), |i| i.name.clone()),
                view: format!("{:04}", t.index),
                psnr_db: s.psnr_db,
                ssim: s.ssim,
                perceptual: s.perceptual,
                ev: s.ev,
                same_environment: info.is_some_and(|i| i.same_environment),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport { rows })
}
