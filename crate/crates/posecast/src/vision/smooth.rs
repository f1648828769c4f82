//! Separable Gaussian smoothing for the noisy grayscale input.

use crate::frame::Frame;

use super::VisionError;

/// Normalized 1-D Gaussian kernel of radius `ceil(3*sigma)`.
fn kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Gaussian convolution with clamp-to-edge handling. The two separable
/// passes run in floating point and a single round happens at the end, so
/// a constant frame comes back bit-identical.
pub fn gaussian_smooth(frame: &Frame, sigma: f64) -> Result<Frame, VisionError> {
    if sigma <= 0.0 {
        return Err(VisionError::BadParameter("sigma must be positive"));
    }
    let k = kernel(sigma);
    let radius = (k.len() / 2) as i64;
    let w = frame.width() as i64;
    let h = frame.height() as i64;

    // Horizontal pass.
    let mut mid = vec![0.0f64; (w * h) as usize];
    for y in 0..h {
        let row = frame.row(y as u32);
        let out = &mut mid[(y * w) as usize..((y + 1) * w) as usize];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                let sx = (x + i as i64 - radius).clamp(0, w - 1);
                acc += kv * row[sx as usize] as f64;
            }
            out[x as usize] = acc;
        }
    }

    // Vertical pass with final rounding.
    let mut data = vec![0u8; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                let sy = (y + i as i64 - radius).clamp(0, h - 1);
                acc += kv * mid[(sy * w + x) as usize];
            }
            data[(y * w + x) as usize] = acc.round().clamp(0.0, 255.0) as u8;
        }
    }

    Ok(Frame::new(frame.width(), frame.height(), data).expect("dimensions preserved"))
}
