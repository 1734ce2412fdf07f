use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn image_error(path: &Path, reason: impl ToString) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Decodes a PGM/PNM or PNG file to luminance in [0, 1], shape `[1, H, W]`.
///
/// Color is reduced with `0.299 R + 0.587 G + 0.114 B`; nothing else (no
/// binarization, inversion or cropping) is applied.
pub fn load_image(path: &Path) -> Result<Tensor<f32>> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Pnm) => {}
        Some(other) => return Err(image_error(path, format!("unsupported format {other:?}"))),
        None => return Err(image_error(path, "unrecognized image format")),
    }
    let img = reader.decode().map_err(|e| image_error(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(image_error(path, "image has a zero dimension"));
    }
    let data: Vec<f32> = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
        DynamicImage::ImageLuma16(g) => g.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect(),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => img
            .to_luma16()
            .into_raw()
            .into_iter()
            .map(|v| v as f32 / 65535.0)
            .collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                ((0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0).clamp(0.0, 1.0) as f32
            })
            .collect(),
    };
    Tensor::from_vec(&[1, h, w], data)
}

/// Bilinear resize with corner-aligned sampling: output row `i` samples input
/// row `i·(H−1)/(H'−1)`. Channels are resized independently.
pub fn resize(pixels: &Tensor<f32>, out_h: usize, out_w: usize) -> Result<Tensor<f32>> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::Config(format!("resize target {out_h}x{out_w} has a zero dimension")));
    }
    let (c, h, w) = pixels.dims3("resize")?;
    if (h, w) == (out_h, out_w) {
        return Ok(pixels.clone());
    }
    let map = |i: usize, n_out: usize, n_in: usize| -> (usize, usize, f32) {
        if n_out == 1 || n_in == 1 {
            return (0, 0, 0.0);
        }
        let pos = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
        let lo = (pos.floor() as usize).min(n_in - 1);
        let hi = (lo + 1).min(n_in - 1);
        (lo, hi, (pos - lo as f64) as f32)
    };
    let cols: Vec<_> = (0..out_w).map(|j| map(j, out_w, w)).collect();
    let src = pixels.data();
    let lerp = |a: f32, b: f32, t: f32| (a + (b - a) * t).clamp(a.min(b), a.max(b));
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for i in 0..out_h {
            let (r0, r1, ty) = map(i, out_h, h);
            for &(c0, c1, tx) in &cols {
                let top = lerp(plane[r0 * w + c0], plane[r0 * w + c1], tx);
                let bottom = lerp(plane[r1 * w + c0], plane[r1 * w + c1], tx);
                out.push(lerp(top, bottom, ty));
            }
        }
    }
    Tensor::from_vec(&[c, out_h, out_w], out)
}

/// Writes a single-channel tensor in [0, 1] as a binary 8-bit PGM.
pub fn write_pgm(path: &Path, pixels: &Tensor<f32>) -> Result<()> {
    let (c, h, w) = pixels.dims3("write_pgm")?;
    if c != 1 {
        return Err(Error::shape("write_pgm", pixels.shape(), &[1, h, w]));
    }
    let bytes: Vec<u8> = pixels
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let encoder = PnmEncoder::new(BufWriter::new(file)).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
    encoder
        .write_image(&bytes, w as u32, h as u32, ExtendedColorType::L8)
        .map_err(|e| image_error(path, e))
}
