use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::image::{Mask, TonemappedImage};

struct Decoded {
    width: usize,
    height: usize,
    color: ColorType,
    data: Vec<u8>,
}

fn decode(path: &Path) -> Result<Decoded> {
    let bytes = read_file(path)?;
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| Error::format(path, e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e.to_string()))?;
    if info.bit_depth != BitDepth::Eight {
        return Err(Error::UnsupportedBitDepth(format!("{}: {:?}", path.display(), info.bit_depth)));
    }
    buf.truncate(info.buffer_size());
    Ok(Decoded { width: info.width as usize, height: info.height as usize, color: info.color_type, data: buf })
}

/// Reads an 8-bit RGB PNG. Alpha, palette and grayscale layouts are rejected.
pub fn read_png_rgb(path: &Path) -> Result<TonemappedImage> {
    let d = decode(path)?;
    if d.color != ColorType::Rgb {
        return Err(Error::format(path, format!("expected 8-bit RGB, found {:?}", d.color)));
    }
    TonemappedImage::from_vec(d.width, d.height, d.data)
}

fn encode(path: &Path, width: usize, height: usize, color: ColorType, data: &[u8]) -> Result<()> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::format(path, e.to_string()))?;
        writer.write_image_data(data).map_err(|e| Error::format(path, e.to_string()))?;
    }
    write_file(path, &out)
}

pub fn write_png_rgb(img: &TonemappedImage, path: &Path) -> Result<()> {
    encode(path, img.width(), img.height(), ColorType::Rgb, img.data())
}

/// Reads an 8-bit mask; the first channel above 127 marks foreground.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let d = decode(path)?;
    let stride = match d.color {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => return Err(Error::format(path, "indexed masks are not supported")),
    };
    let bits = d.data.chunks_exact(stride).map(|px| px[0] > 127).collect();
    Mask::from_vec(d.width, d.height, bits)
}

pub fn write_mask(mask: &Mask, path: &Path) -> Result<()> {
    let data: Vec<u8> = mask.bits().iter().map(|b| if *b { 255 } else { 0 }).collect();
    encode(path, mask.width(), mask.height(), ColorType::Grayscale, &data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_red_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("red.png");
        let img = TonemappedImage::from_vec(1, 1, vec![255, 0, 0]).unwrap();
        write_png_rgb(&img, &p).unwrap();
        assert_eq!(read_png_rgb(&p).unwrap().data(), &[255, 0, 0]);
    }

    #[test]
    fn random_roundtrips_are_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for i in 0..100 {
            let data: Vec<u8> = (0..32 * 32 * 3).map(|_| rng.gen()).collect();
            let img = TonemappedImage::from_vec(32, 32, data).unwrap();
            let p = dir.path().join(format!("r{i}.png"));
            write_png_rgb(&img, &p).unwrap();
            assert_eq!(read_png_rgb(&p).unwrap(), img);
        }
    }

    #[test]
    fn sixteen_bit_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("deep.png");
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 1, 1);
            enc.set_color(ColorType::Rgb);
            enc.set_depth(BitDepth::Sixteen);
            enc.write_header().unwrap().write_image_data(&[0; 6]).unwrap();
        }
        std::fs::write(&p, out).unwrap();
        let err = read_png_rgb(&p).unwrap_err();
        assert!(matches!(err, Error::UnsupportedBitDepth(_)));
        assert!(err.to_string().contains("unsupported bit depth"));
    }

    #[test]
    fn alpha_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgba.png");
        encode(&p, 1, 1, ColorType::Rgba, &[1, 2, 3, 4]).unwrap();
        assert!(read_png_rgb(&p).is_err());
    }

    #[test]
    fn missing_file() {
        assert!(matches!(read_png_rgb(Path::new("/nonexistent/x.png")), Err(Error::MissingFile(_))));
    }

    #[test]
    fn mask_threshold() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        encode(&p, 4, 1, ColorType::Grayscale, &[0, 127, 128, 255]).unwrap();
        assert_eq!(read_mask(&p).unwrap().bits(), &[false, false, true, true]);
        let m = Mask::from_fn(5, 3, |x, y| x > y);
        write_mask(&m, &p).unwrap();
        assert_eq!(read_mask(&p).unwrap(), m);
    }
}
