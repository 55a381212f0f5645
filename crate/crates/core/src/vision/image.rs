use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoundingBox, VisionError};

/// A captured RGB frame, 8 bits per channel, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    camera_id: String,
    timestamp_ms: u64,
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(
        camera_id: impl Into<String>,
        timestamp_ms: u64,
        width: u32,
        height: u32,
        pixels: Vec<u8>,
    ) -> Result<Self, VisionError> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(VisionError::BufferLength {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Frame {
            camera_id: camera_id.into(),
            timestamp_ms,
            width,
            height,
            pixels,
        })
    }

    /// Builds a frame whose three channels all carry the gray value.
    pub fn from_gray(camera_id: impl Into<String>, timestamp_ms: u64, gray: &GrayImage) -> Self {
        let pixels = gray.pixels().iter().flat_map(|&v| [v, v, v]).collect();
        Frame {
            camera_id: camera_id.into(),
            timestamp_ms,
            width: gray.width(),
            height: gray.height(),
            pixels,
        }
    }

    /// Reads a PNG or binary PPM file.
    pub fn load(
        path: impl AsRef<Path>,
        camera_id: impl Into<String>,
        timestamp_ms: u64,
    ) -> Result<Self, VisionError> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| VisionError::Decode(format!("{}: {e}", path.display())))?
            .into_rgb8();
        let (w, h) = img.dimensions();
        Frame::new(camera_id, timestamp_ms, w, h, img.into_raw())
    }

    pub fn decode(
        bytes: &[u8],
        camera_id: impl Into<String>,
        timestamp_ms: u64,
    ) -> Result<Self, VisionError> {
        let img = image::load_from_memory(bytes)
            .map_err(|e| VisionError::Decode(e.to_string()))?
            .into_rgb8();
        let (w, h) = img.dimensions();
        Frame::new(camera_id, timestamp_ms, w, h, img.into_raw())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, VisionError> {
        encode(
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
        )
    }

    pub fn camera_id(&self) -> &str {
        &self.camera_id
    }

    pub fn timestamp_ms(&self) -> u64 {
        self.timestamp_ms
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn bounds(&self) -> BoundingBox {
        BoundingBox::new(0, 0, self.width, self.height)
    }
}

/// 8-bit single-channel image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, VisionError> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(VisionError::BufferLength {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// Panics if either dimension is zero.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        GrayImage {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    /// Panics if either dimension is zero.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VisionError> {
        Ok(super::to_grayscale(&Frame::load(path, "", 0)?))
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, VisionError> {
        encode(
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::L8,
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn bounds(&self) -> BoundingBox {
        BoundingBox::new(0, 0, self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    /// Pixel lookup with coordinates clamped to the image (edge replication).
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> u8 {
        let x = x.clamp(0, self.width as i64 - 1) as u32;
        let y = y.clamp(0, self.height as i64 - 1) as u32;
        self.get(x, y)
    }

    pub fn map(&self, f: impl Fn(u8) -> u8) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&v| v as f64).sum::<f64>() / self.pixels.len() as f64
    }

    /// Copies out the region; fails if the box is not inside the image.
    pub fn crop(&self, area: &BoundingBox) -> Result<GrayImage, VisionError> {
        if !self.bounds().contains(area) || area.width == 0 || area.height == 0 {
            return Err(VisionError::OutOfBounds(format!(
                "crop {area:?} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(area.area() as usize);
        for y in area.y..area.y + area.height {
            let row = y as usize * self.width as usize;
            pixels.extend_from_slice(
                &self.pixels[row + area.x as usize..row + (area.x + area.width) as usize],
            );
        }
        Ok(GrayImage {
            width: area.width,
            height: area.height,
            pixels,
        })
    }

    /// Bilinear resize with pixel-center alignment.
    ///
    /// Interpolation weights are quantized to 11 bits and summed in integers,
    /// so adding a constant to every input pixel adds exactly that constant
    /// to every output pixel (when nothing clamps).
    pub fn resize(&self, width: u32, height: u32) -> GrayImage {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        if width == self.width && height == self.height {
            return self.clone();
        }
        const BITS: u32 = 11;
        const ONE: i64 = 1 << BITS;
        let taps = |dst: u32, src: u32| -> Vec<(usize, usize, i64)> {
            let scale = src as f64 / dst as f64;
            (0..dst)
                .map(|d| {
                    let s = ((d as f64 + 0.5) * scale - 0.5).max(0.0);
                    let i0 = (s.floor() as usize).min(src as usize - 1);
                    let i1 = (i0 + 1).min(src as usize - 1);
                    let frac = s - i0 as f64;
                    let w1 = ((frac * ONE as f64).round() as i64).clamp(0, ONE);
                    (i0, i1, w1)
                })
                .collect()
        };
        let xs = taps(width, self.width);
        let ys = taps(height, self.height);
        let sw = self.width as usize;
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for &(y0, y1, wy1) in &ys {
            let wy0 = ONE - wy1;
            let r0 = &self.pixels[y0 * sw..(y0 + 1) * sw];
            let r1 = &self.pixels[y1 * sw..(y1 + 1) * sw];
            for &(x0, x1, wx1) in &xs {
                let wx0 = ONE - wx1;
                let top = wx0 * r0[x0] as i64 + wx1 * r0[x1] as i64;
                let bottom = wx0 * r1[x0] as i64 + wx1 * r1[x1] as i64;
                let v = (wy0 * top + wy1 * bottom + (1 << (2 * BITS - 1))) >> (2 * BITS);
                pixels.push(v.clamp(0, 255) as u8);
            }
        }
        GrayImage {
            width,
            height,
            pixels,
        }
    }
}

fn check_dims(width: u32, height: u32) -> Result<(), VisionError> {
    if width == 0 || height == 0 {
        return Err(VisionError::InvalidDimensions { width, height });
    }
    Ok(())
}

fn encode(
    pixels: &[u8],
    width: u32,
    height: u32,
    color: image::ExtendedColorType,
) -> Result<Vec<u8>, VisionError> {
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(pixels, width, height, color)
        .map_err(|e| VisionError::Decode(e.to_string()))?;
    Ok(out)
}
