//! Raster types shared by every stage of the pipeline.
//!
//! Pixel centres sit at integer coordinates: pixel `(x, y)` covers the
//! continuous square `[x - 0.5, x + 0.5) × [y - 0.5, y + 0.5)`.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("pixel buffer has {got} values, expected {expected} ({width}x{height}x{channels})")]
    BufferSize {
        width: usize,
        height: usize,
        channels: usize,
        expected: usize,
        got: usize,
    },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(usize),
    #[error("intensity {value} at index {index} is outside [0, 1]")]
    Range { index: usize, value: f64 },
    #[error("image has zero area")]
    Empty,
    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),
}

/// Row-major raster with 1 or 3 interleaved channels and intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::Channels(channels));
        }
        if width == 0 || height == 0 {
            return Err(ImageError::Empty);
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(ImageError::BufferSize { width, height, channels, expected, got: data.len() });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ImageError::Range { index, value });
        }
        Ok(Self { width, height, channels, data })
    }

    /// Builds an image, clamping every value into `[0, 1]` (NaN becomes 0).
    pub fn from_clamped(width: usize, height: usize, channels: usize, mut data: Vec<f64>) -> Result<Self, ImageError> {
        for v in data.iter_mut() {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(width, height, channels, data)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        Self { width, height, channels, data: vec![value.clamp(0.0, 1.0); width * height * channels] }
    }

    pub fn from_fn_rgb(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend(f(x, y).iter().map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self { width, height, channels: 3, data }
    }

    pub fn from_fn_gray(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self { width, height, channels: 1, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Writes a pixel, clamping into range.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v.clamp(0.0, 1.0);
    }

    /// Returns a 3-channel copy (grayscale is replicated).
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Image { width: self.width, height: self.height, channels: 3, data }
    }

    /// Bilinear sample at continuous coordinates with clamp-to-edge, or
    /// `None` when the point lies outside the raster footprint.
    pub fn sample_bilinear(&self, x: f64, y: f64, out: &mut [f64]) -> bool {
        let w = self.width as f64;
        let h = self.height as f64;
        if !(x >= -0.5 && x < w - 0.5 && y >= -0.5 && y < h - 0.5) {
            return false;
        }
        let xc = x.clamp(0.0, w - 1.0);
        let yc = y.clamp(0.0, h - 1.0);
        let x0 = xc.floor() as usize;
        let y0 = yc.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = xc - x0 as f64;
        let fy = yc - y0 as f64;
        for (c, o) in out.iter_mut().enumerate().take(self.channels) {
            let a = self.get(x0, y0, c);
            let b = self.get(x1, y0, c);
            let d = self.get(x0, y1, c);
            let e = self.get(x1, y1, c);
            let top = if fx == 0.0 { a } else { a + (b - a) * fx };
            let bottom = if fx == 0.0 { d } else { d + (e - d) * fx };
            *o = if fy == 0.0 { top } else { top + (bottom - top) * fy };
        }
        true
    }

    /// Area-averaging downscale so that the longer side is at most `max_side`.
    /// Returns the image and the factor `original / scaled`.
    pub fn downscale_to(&self, max_side: usize) -> (Image, f64) {
        let longer = self.width.max(self.height);
        if longer <= max_side {
            return (self.clone(), 1.0);
        }
        let factor = longer as f64 / max_side as f64;
        let nw = ((self.width as f64 / factor).round() as usize).max(1);
        let nh = ((self.height as f64 / factor).round() as usize).max(1);
        let fx = self.width as f64 / nw as f64;
        let fy = self.height as f64 / nh as f64;
        let mut data = vec![0.0; nw * nh * self.channels];
        for y in 0..nh {
            let y0 = (y as f64 * fy).floor() as usize;
            let y1 = (((y + 1) as f64 * fy).ceil() as usize).min(self.height).max(y0 + 1);
            for x in 0..nw {
                let x0 = (x as f64 * fx).floor() as usize;
                let x1 = (((x + 1) as f64 * fx).ceil() as usize).min(self.width).max(x0 + 1);
                let n = ((y1 - y0) * (x1 - x0)) as f64;
                for c in 0..self.channels {
                    let mut s = 0.0;
                    for yy in y0..y1 {
                        for xx in x0..x1 {
                            s += self.get(xx, yy, c);
                        }
                    }
                    data[(y * nw + x) * self.channels + c] = s / n;
                }
            }
        }
        let out = Image { width: nw, height: nh, channels: self.channels, data };
        (out, self.width as f64 / nw as f64)
    }

    pub fn flip_horizontal(&self) -> Image {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                data.extend_from_slice(self.pixel(x, y));
            }
        }
        Image { width: self.width, height: self.height, channels: self.channels, data }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Image, ImageError> {
        let dynamic = image::open(path)?;
        let rgb = dynamic.to_rgb8();
        let (w, h) = rgb.dimensions();
        let data = rgb.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
        Image::new(w as usize, h as usize, 3, data)
    }

    /// Saves as 8-bit PNG or JPEG depending on the extension.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let bytes: Vec<u8> = self.data.iter().map(|v| (v * 255.0).round() as u8).collect();
        let (w, h) = (self.width as u32, self.height as u32);
        match self.channels {
            1 => image::GrayImage::from_raw(w, h, bytes).expect("buffer size checked").save(path)?,
            _ => image::RgbImage::from_raw(w, h, bytes).expect("buffer size checked").save(path)?,
        }
        Ok(())
    }
}

/// Single-channel real-valued map without the `[0, 1]` restriction
/// (filter responses, gradients).
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn at_mut(&mut self, x: usize, y: usize) -> &mut f64 {
        &mut self.data[y * self.width + x]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl From<&Image> for Plane {
    /// Takes the first channel.
    fn from(img: &Image) -> Self {
        let data = (0..img.width * img.height).map(|i| img.data[i * img.channels]).collect();
        Plane { width: img.width, height: img.height, data }
    }
}
