//! Procedural labelled images.
//!
//! Background: multi-octave value noise around a per-image mean level.
//! Attributes are drawn independently from their prevalences, and attribute
//! `i` is drawn as overlay `i mod 3`: a filled disc, a patch of diagonal
//! stripes, or a checker patch, each at a random position.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::DatasetSpec;
use crate::image::ImageBuffer;
use crate::rng;

/// `(lattice spacing in pixels, amplitude in gray levels)` per octave.
const OCTAVES: [(usize, f64); 3] = [(32, 28.0), (16, 12.0), (8, 4.0)];
const MEAN_RANGE: (f64, f64) = (96.0, 160.0);
const OVERLAY_CONTRAST: (f64, f64) = (18.0, 30.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlayKind {
    Disc,
    Stripes,
    Checker,
}

impl OverlayKind {
    pub fn for_attribute(index: usize) -> Self {
        match index % 3 {
            0 => OverlayKind::Disc,
            1 => OverlayKind::Stripes,
            _ => OverlayKind::Checker,
        }
    }
}

/// One rendered record: the image and the names of the attributes it shows.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub image: ImageBuffer,
    pub attributes: Vec<String>,
}

/// Renders record `index` of `spec`; depends only on `(spec, index)`.
pub fn render(spec: &DatasetSpec, index: u64) -> RenderedImage {
    let mut rng = rng::stream(spec.seed, rng::domain::SYNTH, index);
    let present: Vec<bool> = spec.attributes.iter().map(|a| rng.random_bool(a.prevalence)).collect();

    let (w, h) = (spec.width, spec.height);
    let mean = rng.random_range(MEAN_RANGE.0..MEAN_RANGE.1);
    let mut plane = vec![mean; w * h];
    for &(spacing, amp) in &OCTAVES {
        add_value_noise(&mut plane, w, h, spacing, amp, &mut rng);
    }
    for (i, _) in present.iter().enumerate().filter(|(_, &p)| p) {
        draw_overlay(&mut plane, w, h, OverlayKind::for_attribute(i), &mut rng);
    }

    let samples = plane.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    let attributes = spec
        .attributes
        .iter()
        .zip(&present)
        .filter(|(_, &p)| p)
        .map(|(a, _)| a.name.clone())
        .collect();
    RenderedImage {
        image: ImageBuffer::from_gray(w, h, samples).expect("dimensions validated by spec"),
        attributes,
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn add_value_noise(plane: &mut [f64], w: usize, h: usize, spacing: usize, amp: f64, rng: &mut ChaCha8Rng) {
    let gw = w / spacing + 2;
    let gh = h / spacing + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(-1.0..1.0)).collect();
    let s = spacing as f64;
    for y in 0..h {
        let fy = y as f64 / s;
        let (gy, ty) = (fy.floor() as usize, smoothstep(fy.fract()));
        for x in 0..w {
            let fx = x as f64 / s;
            let (gx, tx) = (fx.floor() as usize, smoothstep(fx.fract()));
            let at = |xx: usize, yy: usize| lattice[yy * gw + xx];
            let top = at(gx, gy) * (1.0 - tx) + at(gx + 1, gy) * tx;
            let bottom = at(gx, gy + 1) * (1.0 - tx) + at(gx + 1, gy + 1) * tx;
            plane[y * w + x] += amp * (top * (1.0 - ty) + bottom * ty);
        }
    }
}

fn draw_overlay(plane: &mut [f64], w: usize, h: usize, kind: OverlayKind, rng: &mut ChaCha8Rng) {
    let contrast = rng.random_range(OVERLAY_CONTRAST.0..OVERLAY_CONTRAST.1);
    let contrast = if rng.random_bool(0.5) { contrast } else { -contrast };
    let size = (w.min(h) / 3).max(8);
    let x0 = rng.random_range(0..=w - size);
    let y0 = rng.random_range(0..=h - size);
    let half = size as f64 / 2.0;
    let (cx, cy) = (x0 as f64 + half, y0 as f64 + half);
    for y in y0..y0 + size {
        for x in x0..x0 + size {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let weight = match kind {
                OverlayKind::Disc => {
                    // one-pixel anti-aliased rim
                    let r = ((px - cx).powi(2) + (py - cy).powi(2)).sqrt();
                    (half - r + 0.5).clamp(0.0, 1.0)
                }
                OverlayKind::Stripes => {
                    let phase = (px + py) * std::f64::consts::PI / 8.0;
                    0.5 * phase.sin()
                }
                OverlayKind::Checker => {
                    let cell = ((x - x0) / 4 + (y - y0) / 4) % 2;
                    if cell == 0 { 0.5 } else { -0.5 }
                }
            };
            plane[y * w + x] += contrast * weight;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AttributeSpec;

    fn spec(prevalences: &[f64]) -> DatasetSpec {
        DatasetSpec {
            n_images: 10,
            width: 64,
            height: 64,
            attributes: prevalences
                .iter()
                .enumerate()
                .map(|(i, &p)| AttributeSpec::new(format!("a{i}"), p).unwrap())
                .collect(),
            seed: 3,
        }
    }

    #[test]
    fn deterministic_per_index() {
        let s = spec(&[0.5, 0.5, 0.5]);
        assert_eq!(render(&s, 4), render(&s, 4));
        assert_ne!(render(&s, 4).image, render(&s, 5).image);
    }

    #[test]
    fn overlays_change_pixels() {
        // Same stream, with and without attributes: the background draws come
        // after the attribute draws, so only the overlay differs.
        let always = spec(&[0.999_999, 0.999_999, 0.999_999]);
        let r = render(&always, 0);
        assert_eq!(r.attributes, vec!["a0", "a1", "a2"]);
        let lo = *r.image.samples().iter().min().unwrap();
        let hi = *r.image.samples().iter().max().unwrap();
        assert!(hi - lo > 40, "expected visible texture, range {lo}..{hi}");
    }

    #[test]
    fn samples_stay_off_the_rails() {
        let s = spec(&[0.5, 0.5, 0.5]);
        for i in 0..200 {
            let img = render(&s, i).image;
            assert!(img.samples().iter().all(|&v| v > 0 && v < 255));
        }
    }
}
