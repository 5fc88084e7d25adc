//! Floating-point images in `[0, 1]` and the PNG boundary.
//!
//! Pixels are stored row-major and interleaved by channel, so the linear
//! pixel index is `r * width + c` and channel `k` of that pixel lives at
//! `(r * width + c) * channels + k`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

/// ITU-R BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeMode {
    Bilinear,
    Nearest,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Invalid(format!(
                "image must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "image {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invalid(format!(
                "image intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, color: &[f64]) -> Result<Self> {
        let data = (0..height * width)
            .flat_map(|_| color.iter().copied())
            .collect();
        Image::new(height, width, color.len(), data)
    }

    /// Builds an image from a per-pixel function returning one value per channel.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for k in 0..channels {
                    data.push(f(r, c, k));
                }
            }
        }
        Image::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize, k: usize) -> f64 {
        self.data[(r * self.width + c) * self.channels + k]
    }

    /// Color of pixel `idx` (linear row-major index).
    #[inline]
    pub fn pixel(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.channels..(idx + 1) * self.channels]
    }
}

/// Converts to a single luminance channel. Gray images are returned unchanged.
pub fn to_grayscale(img: &Image) -> Image {
    if img.channels == 1 {
        return img.clone();
    }
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| {
            let y = LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2];
            y.clamp(0.0, 1.0)
        })
        .collect();
    Image {
        height: img.height,
        width: img.width,
        channels: 1,
        data,
    }
}

/// Resamples to `h`x`w` using pixel-center alignment. Bilinear sampling
/// clamps at the border; nearest picks the source pixel whose center is
/// closest, so `{0, 1}` masks stay binary.
pub fn resize(img: &Image, h: usize, w: usize, mode: ResizeMode) -> Result<Image> {
    if h == 0 || w == 0 {
        return Err(Error::Invalid(format!("resize target {h}x{w} is empty")));
    }
    if h == img.height && w == img.width {
        return Ok(img.clone());
    }
    let sy = img.height as f64 / h as f64;
    let sx = img.width as f64 / w as f64;
    let ch = img.channels;
    let mut data = Vec::with_capacity(h * w * ch);
    for r in 0..h {
        let fy = (r as f64 + 0.5) * sy - 0.5;
        for c in 0..w {
            let fx = (c as f64 + 0.5) * sx - 0.5;
            match mode {
                ResizeMode::Nearest => {
                    let ry = nearest_source(r, h, img.height);
                    let rx = nearest_source(c, w, img.width);
                    for k in 0..ch {
                        data.push(img.get(ry, rx, k));
                    }
                }
                ResizeMode::Bilinear => {
                    for k in 0..ch {
                        data.push(sample_bilinear_clamped(img, fy, fx, k));
                    }
                }
            }
        }
    }
    Ok(Image {
        height: h,
        width: w,
        channels: ch,
        data,
    })
}

/// Source index sampled by destination index `i` when resampling a
/// `src`-long axis to `dst` samples with pixel-center alignment.
pub fn nearest_source(i: usize, dst: usize, src: usize) -> usize {
    let f = (i as f64 + 0.5) * src as f64 / dst as f64 - 0.5;
    (f + 0.5).floor().clamp(0.0, (src - 1) as f64) as usize
}

pub(crate) fn sample_bilinear_clamped(img: &Image, fy: f64, fx: f64, k: usize) -> f64 {
    let fy = fy.clamp(0.0, (img.height - 1) as f64);
    let fx = fx.clamp(0.0, (img.width - 1) as f64);
    let y0 = fy.floor() as usize;
    let x0 = fx.floor() as usize;
    let y1 = (y0 + 1).min(img.height - 1);
    let x1 = (x0 + 1).min(img.width - 1);
    let ty = fy - y0 as f64;
    let tx = fx - x0 as f64;
    let top = img.get(y0, x0, k) * (1.0 - tx) + img.get(y0, x1, k) * tx;
    let bottom = img.get(y1, x0, k) * (1.0 - tx) + img.get(y1, x1, k) * tx;
    (top * (1.0 - ty) + bottom * ty).clamp(0.0, 1.0)
}

/// Raw 8-bit raster as decoded from a PNG, alpha already stripped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub bytes: Vec<u8>,
}

pub fn read_png(path: &Path) -> Result<Raster> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND);
    let png_err = |e: png::DecodingError| Error::Png {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = decoder.read_info().map_err(png_err)?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Unsupported(format!(
            "{}: bit depth {:?}, only 8-bit PNGs are supported",
            path.display(),
            info.bit_depth
        )));
    }
    let (src_channels, keep) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        other => {
            return Err(Error::Unsupported(format!(
                "{}: color type {other:?}",
                path.display()
            )))
        }
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let row_len = info.line_size;
    let mut bytes = Vec::with_capacity(width * height * keep);
    for row in buf[..info.buffer_size()].chunks_exact(row_len) {
        for px in row[..width * src_channels].chunks_exact(src_channels) {
            bytes.extend_from_slice(&px[..keep]);
        }
    }
    Ok(Raster {
        height,
        width,
        channels: keep,
        bytes,
    })
}

pub fn write_png(path: &Path, raster: &Raster) -> Result<()> {
    let color = match raster.channels {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        n => return Err(Error::Invalid(format!("cannot write {n}-channel PNG"))),
    };
    if raster.bytes.len() != raster.height * raster.width * raster.channels {
        return Err(Error::Shape("raster byte count does not match dimensions".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(
        BufWriter::new(file),
        raster.width as u32,
        raster.height as u32,
    );
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let enc_err = |e: png::EncodingError| Error::Png {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut writer = encoder.write_header().map_err(enc_err)?;
    writer.write_image_data(&raster.bytes).map_err(enc_err)?;
    writer.finish().map_err(enc_err)
}

/// Loads an 8-bit gray or RGB PNG with intensities scaled to `[0, 1]`.
pub fn load_image(path: &Path) -> Result<Image> {
    let raster = read_png(path)?;
    let data = raster.bytes.iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(raster.height, raster.width, raster.channels, data)
}

/// Quantizes to the nearest 1/255 step and writes an 8-bit PNG.
pub fn save_image(path: &Path, img: &Image) -> Result<()> {
    write_png(path, &quantize(img))
}

pub fn quantize(img: &Image) -> Raster {
    Raster {
        height: img.height,
        width: img.width,
        channels: img.channels,
        bytes: img
            .data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect(),
    }
}
