//! 8-bit grayscale raster, the currency every stage of the pipeline trades in.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("pixel data length {got} does not match {width}x{height}={expected}")]
    DataLengthMismatch {
        width: u32,
        height: u32,
        expected: usize,
        got: usize,
    },
    #[error("zero-sized frame ({width}x{height})")]
    EmptyFrame { width: u32, height: u32 },
    #[error("region {x0},{y0} {w}x{h} exceeds frame {fw}x{fh}")]
    RegionOutOfBounds {
        x0: u32,
        y0: u32,
        w: u32,
        h: u32,
        fw: u32,
        fh: u32,
    },
}

/// Row-major 8-bit grayscale image. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::EmptyFrame { width, height });
        }
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(FrameError::DataLengthMismatch {
                width,
                height,
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Constant-intensity frame.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self::new(width, height, vec![value; width as usize * height as usize])
            .expect("filled frame dimensions are consistent")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize;
        let off = y as usize * w;
        &self.data[off..off + w]
    }

    /// Column-mirrored copy (x -> width-1-x).
    pub fn mirrored(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            data.extend(self.row(y).iter().rev());
        }
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Sum of all intensities, for conservation checks.
    pub fn total_intensity(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }
}

/// Axis-aligned pixel rectangle, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
}

impl Region {
    pub fn new(x0: u32, y0: u32, w: u32, h: u32) -> Self {
        Self { x0, y0, w, h }
    }

    /// Whole-frame region.
    pub fn full(frame: &Frame) -> Self {
        Self::new(0, 0, frame.width(), frame.height())
    }

    pub fn fits_in(&self, frame: &Frame) -> bool {
        self.x0.checked_add(self.w).is_some_and(|x1| x1 <= frame.width())
            && self.y0.checked_add(self.h).is_some_and(|y1| y1 <= frame.height())
    }
}

/// 256-bin intensity histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hist256 {
    pub counts: [u32; 256],
}

impl Hist256 {
    pub fn zeroed() -> Self {
        Self { counts: [0; 256] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// Histogram over the pixels inside `region` only.
pub fn histogram(frame: &Frame, region: Region) -> Result<Hist256, FrameError> {
    if !region.fits_in(frame) {
        return Err(FrameError::RegionOutOfBounds {
            x0: region.x0,
            y0: region.y0,
            w: region.w,
            h: region.h,
            fw: frame.width(),
            fh: frame.height(),
        });
    }
    let mut hist = Hist256::zeroed();
    for y in region.y0..region.y0 + region.h {
        let row = frame.row(y);
        for &v in &row[region.x0 as usize..(region.x0 + region.w) as usize] {
            hist.counts[v as usize] += 1;
        }
    }
    Ok(hist)
}
