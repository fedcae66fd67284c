use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Smallest accepted frame side in pixels.
pub const MIN_SIDE: usize = 16;

/// One 8-bit luma plane, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LumaPlane {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LumaPlane {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("{width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "plane {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(LumaPlane {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        LumaPlane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds a plane by evaluating `f(x, y)` at every sample.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        LumaPlane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    pub(crate) fn check_same_size(&self, other: &LumaPlane) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

/// A decoded sequence of luma planes with a common geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    width: usize,
    height: usize,
    fps: f64,
    frames: Vec<LumaPlane>,
}

impl FrameSequence {
    pub fn new(width: usize, height: usize, fps: f64, frames: Vec<LumaPlane>) -> Result<Self> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::Dimension(format!(
                "{width}x{height} is below the {MIN_SIDE}-pixel minimum"
            )));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidParameter(format!("fps must be positive, got {fps}")));
        }
        if let Some(bad) = frames
            .iter()
            .position(|f| f.width != width || f.height != height)
        {
            return Err(Error::Dimension(format!(
                "frame {bad} is {}x{}, sequence is {width}x{height}",
                frames[bad].width, frames[bad].height
            )));
        }
        Ok(FrameSequence {
            width,
            height,
            fps,
            frames,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frames(&self) -> &[LumaPlane] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn check_yuv_dims(width: usize, height: usize) -> Result<()> {
    if width < MIN_SIDE || height < MIN_SIDE {
        return Err(Error::Dimension(format!(
            "{width}x{height} is below the {MIN_SIDE}-pixel minimum"
        )));
    }
    if width % 2 != 0 || height % 2 != 0 {
        return Err(Error::Dimension(format!(
            "{width}x{height} has an odd side, 4:2:0 needs even sides"
        )));
    }
    Ok(())
}

/// Reads headerless planar 8-bit YUV 4:2:0 and keeps the luma planes.
pub fn read_yuv(path: impl AsRef<Path>, width: usize, height: usize, fps: f64) -> Result<FrameSequence> {
    check_yuv_dims(width, height)?;
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let luma = width * height;
    let frame_bytes = luma * 3 / 2;
    if bytes.len() % frame_bytes != 0 {
        return Err(Error::SizeMismatch {
            frame_bytes,
            actual: bytes.len(),
        });
    }
    let frames = bytes
        .chunks_exact(frame_bytes)
        .map(|chunk| LumaPlane {
            width,
            height,
            data: chunk[..luma].to_vec(),
        })
        .collect();
    FrameSequence::new(width, height, fps, frames)
}

/// Writes luma planes as planar 4:2:0 with neutral (128) chroma.
pub fn write_yuv(path: impl AsRef<Path>, seq: &FrameSequence) -> Result<()> {
    check_yuv_dims(seq.width, seq.height)?;
    let path = path.as_ref();
    let chroma = vec![128u8; seq.width * seq.height / 2];
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(&mut file);
    for frame in &seq.frames {
        out.write_all(&frame.data).map_err(|e| Error::io(path, e))?;
        out.write_all(&chroma).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
