//! Pixel containers and the raster primitives every other module builds on.
//!
//! [`Image`] holds 8-bit samples (1 or 3 interleaved channels, row-major),
//! [`Mask`] holds one boolean per pixel (`true` = editable region) and
//! [`Rect`] addresses a sub-window. PNG is the only interchange format:
//! RGB or grayscale for images, 8-bit grayscale for masks where values
//! `>= 128` binarize to `true`.

use std::io::Cursor;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Grayscale threshold at which a loaded mask pixel becomes `true`.
pub const MASK_THRESHOLD: u8 = 128;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannels(usize),
    #[error("buffer length {actual} does not match expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("rect {rect:?} exceeds {width}x{height} image")]
    OutOfBounds { rect: Rect, width: usize, height: usize },
    #[error("channel mismatch: {left} vs {right}")]
    ChannelMismatch { left: usize, right: usize },
    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch { left_w: usize, left_h: usize, right_w: usize, right_h: usize },
    #[error("png codec: {0}")]
    Codec(#[from] image::ImageError),
}

/// Axis-aligned pixel rectangle; `(x, y)` is the top-left corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    /// True when the rect is non-degenerate and lies inside a `width`x`height` raster.
    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.right() <= width && self.bottom() <= height
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    fn check(&self, width: usize, height: usize) -> Result<(), ImageError> {
        if self.fits_in(width, height) {
            Ok(())
        } else {
            Err(ImageError::OutOfBounds { rect: *self, width, height })
        }
    }
}

/// An 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::UnsupportedChannels(channels));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(ImageError::BufferLength { expected, actual: data.len() });
        }
        Ok(Self { width, height, channels, data })
    }

    /// An image with every sample set to `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image by evaluating `f(x, y)` for each pixel; `f` returns the channel samples.
    pub fn from_fn<F>(width: usize, height: usize, channels: usize, mut f: F) -> Result<Self, ImageError>
    where
        F: FnMut(usize, usize) -> Vec<u8>,
    {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                debug_assert_eq!(px.len(), channels);
                data.extend_from_slice(&px);
            }
        }
        Self::new(width, height, channels, data)
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn full_rect(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    #[inline]
    fn offset(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    /// Channel samples of pixel `(x, y)`.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let o = self.offset(x, y);
        &self.data[o..o + self.channels]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, px: &[u8]) {
        let o = self.offset(x, y);
        self.data[o..o + self.channels].copy_from_slice(px);
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.dims() == other.dims() && self.channels == other.channels
    }

    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Image { width: self.width, height: self.height, channels: 3, data }
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Image, ImageError> {
        let dynamic = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
        Ok(Self::from_dynamic(dynamic))
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, ImageError> {
        let color = if self.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        let mut out = Cursor::new(Vec::new());
        image::write_buffer_with_format(
            &mut out,
            &self.data,
            self.width as u32,
            self.height as u32,
            color,
            image::ImageFormat::Png,
        )?;
        Ok(out.into_inner())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Image, ImageError> {
        let dynamic = image::open(path)?;
        Ok(Self::from_dynamic(dynamic))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        std::fs::write(path, self.encode_png()?).map_err(|e| ImageError::Codec(image::ImageError::IoError(e)))
    }

    fn from_dynamic(dynamic: image::DynamicImage) -> Image {
        match dynamic {
            image::DynamicImage::ImageLuma8(buf) => {
                let (w, h) = buf.dimensions();
                Image { width: w as usize, height: h as usize, channels: 1, data: buf.into_raw() }
            }
            other => {
                let buf = other.to_rgb8();
                let (w, h) = buf.dimensions();
                Image { width: w as usize, height: h as usize, channels: 3, data: buf.into_raw() }
            }
        }
    }
}

/// Binary raster; `true` marks the editable / insertion region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        if bits.len() != width * height {
            return Err(ImageError::BufferLength { expected: width * height, actual: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn<F>(width: usize, height: usize, mut f: F) -> Result<Self, ImageError>
    where
        F: FnMut(usize, usize) -> bool,
    {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Every bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn crop(&self, r: Rect) -> Result<Mask, ImageError> {
        r.check(self.width, self.height)?;
        let mut bits = Vec::with_capacity(r.area());
        for y in r.y..r.bottom() {
            bits.extend_from_slice(&self.bits[y * self.width + r.x..y * self.width + r.right()]);
        }
        Mask::new(r.w, r.h, bits)
    }

    /// Nearest-neighbour resize using pixel-centre sampling; keeps the mask binary.
    pub fn resize_nearest(&self, new_w: usize, new_h: usize) -> Result<Mask, ImageError> {
        if new_w == 0 || new_h == 0 {
            return Err(ImageError::InvalidDimensions { width: new_w, height: new_h });
        }
        let xs: Vec<usize> = (0..new_w).map(|x| nearest_source(x, new_w, self.width)).collect();
        let ys: Vec<usize> = (0..new_h).map(|y| nearest_source(y, new_h, self.height)).collect();
        Mask::from_fn(new_w, new_h, |x, y| self.get(xs[x], ys[y]))
    }

    pub fn to_image(&self) -> Image {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        Image { width: self.width, height: self.height, channels: 1, data }
    }

    /// Binarizes a raster; RGB inputs are converted to luma first.
    pub fn from_image(img: &Image) -> Mask {
        let gray = to_grayscale(img);
        let bits = gray.data.iter().map(|&v| v >= MASK_THRESHOLD).collect();
        Mask { width: gray.width, height: gray.height, bits }
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Mask, ImageError> {
        Ok(Mask::from_image(&Image::decode_png(bytes)?))
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, ImageError> {
        self.to_image().encode_png()
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Mask, ImageError> {
        Ok(Mask::from_image(&Image::load_png(path)?))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        self.to_image().save_png(path)
    }
}

fn nearest_source(dst: usize, dst_len: usize, src_len: usize) -> usize {
    (((2 * dst + 1) * src_len) / (2 * dst_len)).min(src_len - 1)
}

/// Real-valued plane produced by filtering.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Plane {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// 4-neighbour Laplacian.
pub const LAPLACIAN_KERNEL: [[f64; 3]; 3] = [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]];

pub fn to_grayscale(img: &Image) -> Image {
    if img.channels == 1 {
        return img.clone();
    }
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| {
            let luma = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
            luma.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Image { width: img.width, height: img.height, channels: 1, data }
}

/// 3x3 convolution of a single-channel image with replicate border padding.
///
/// The kernel is flipped (true convolution); for the symmetric kernels used
/// here that is the same as correlation.
pub fn convolve3x3(img: &Image, kernel: &[[f64; 3]; 3]) -> Result<Plane, ImageError> {
    if img.channels != 1 {
        return Err(ImageError::ChannelMismatch { left: img.channels, right: 1 });
    }
    let (w, h) = img.dims();
    let at = |x: isize, y: isize| -> f64 {
        let cx = x.clamp(0, w as isize - 1) as usize;
        let cy = y.clamp(0, h as isize - 1) as usize;
        img.data[cy * w + cx] as f64
    };
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (ky, row) in kernel.iter().enumerate() {
                for (kx, &k) in row.iter().enumerate() {
                    if k != 0.0 {
                        acc += k * at(x + 1 - kx as isize, y + 1 - ky as isize);
                    }
                }
            }
            values.push(acc);
        }
    }
    Ok(Plane { width: w, height: h, values })
}

pub fn crop(img: &Image, r: Rect) -> Result<Image, ImageError> {
    r.check(img.width, img.height)?;
    let row_len = r.w * img.channels;
    let mut data = Vec::with_capacity(r.h * row_len);
    for y in r.y..r.bottom() {
        let o = img.offset(r.x, y);
        data.extend_from_slice(&img.data[o..o + row_len]);
    }
    Image::new(r.w, r.h, img.channels, data)
}

/// Returns a copy of `dst` with `src` written at `(x, y)`.
pub fn paste(dst: &Image, src: &Image, x: usize, y: usize) -> Result<Image, ImageError> {
    if dst.channels != src.channels {
        return Err(ImageError::ChannelMismatch { left: dst.channels, right: src.channels });
    }
    Rect::new(x, y, src.width, src.height).check(dst.width, dst.height)?;
    let mut out = dst.clone();
    let row_len = src.width * src.channels;
    for sy in 0..src.height {
        let d = out.offset(x, y + sy);
        let s = src.offset(0, sy);
        out.data[d..d + row_len].copy_from_slice(&src.data[s..s + row_len]);
    }
    Ok(out)
}

/// Source coordinate for destination index `dst` under align-corners mapping.
/// A single-sample axis maps to the source centre.
fn align_corners(dst: usize, dst_len: usize, src_len: usize) -> f64 {
    if dst_len == 1 {
        (src_len - 1) as f64 / 2.0
    } else {
        dst as f64 * (src_len - 1) as f64 / (dst_len - 1) as f64
    }
}

/// Bilinear resize with align-corners sampling (output corners land exactly
/// on input corners) and edge clamping. Results round half away from zero.
pub fn resize_bilinear(img: &Image, new_w: usize, new_h: usize) -> Result<Image, ImageError> {
    if new_w == 0 || new_h == 0 {
        return Err(ImageError::InvalidDimensions { width: new_w, height: new_h });
    }
    if (new_w, new_h) == img.dims() {
        return Ok(img.clone());
    }
    let taps = |dst_len: usize, src_len: usize| -> Vec<(usize, usize, f64)> {
        (0..dst_len)
            .map(|d| {
                let s = align_corners(d, dst_len, src_len);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(src_len - 1);
                (i0.min(src_len - 1), i1, s - i0 as f64)
            })
            .collect()
    };
    let xt = taps(new_w, img.width);
    let yt = taps(new_h, img.height);
    let c = img.channels;
    let mut data = Vec::with_capacity(new_w * new_h * c);
    for &(y0, y1, fy) in &yt {
        for &(x0, x1, fx) in &xt {
            for ch in 0..c {
                let p = |x: usize, y: usize| img.data[img.offset(x, y) + ch] as f64;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bot = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                let v = top * (1.0 - fy) + bot * fy;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Image::new(new_w, new_h, c, data)
}
