use super::CodecError;
use crate::image::ImageBuffer;

/// Reported for identical images, and the ceiling for every other pair.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak signal-to-noise ratio with peak 255, over all samples.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, CodecError> {
    if !a.same_layout(b) {
        return Err(CodecError::Dimension(format!(
            "cannot compare {}x{}x{} with {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    let sse: u64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = sse as f64 / a.samples().len() as f64;
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP_DB))
}
