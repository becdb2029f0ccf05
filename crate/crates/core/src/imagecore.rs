//! Image representation, corpus ingestion, spectral whitening, circular
//! masking and synthetic stimuli.
//!
//! All images are square grids of `f64` luminance values in row-major order.
//! Frequency-domain code in this module measures radial frequency in cycles
//! per image width (integer bin units); the filter bank uses cycles per pixel.

use std::io::BufRead;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::fft::{self, bin_index};
use crate::loggabor::LogGaborBank;
use crate::pursuit::Edge;
use crate::{Error, Result};

/// Width of the raised-cosine taper inside the circular mask rim, in pixels.
pub const MASK_TAPER_WIDTH: f64 = 8.0;

/// A square, real-valued luminance grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    size: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(size: usize) -> Self {
        Image {
            size,
            data: vec![0.0; size * size],
        }
    }

    /// Builds an image from row-major data; `data.len()` must be `size²`.
    pub fn from_vec(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::SizeMismatch {
                expected: size * size,
                got: data.len(),
            });
        }
        Ok(Image { size, data })
    }

    pub fn from_fn(size: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                data.push(f(x, y));
            }
        }
        Image { size, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn width(&self) -> usize {
        self.size
    }

    pub fn height(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.size + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.size + x] = v;
    }

    /// ‖I‖², the sum of squared pixel values.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Subtracts the mean, leaving a zero-mean image.
    pub fn subtract_mean(&mut self) {
        let m = self.mean();
        for v in &mut self.data {
            *v -= m;
        }
    }

    pub fn scaled(&self, c: f64) -> Image {
        Image {
            size: self.size,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Image) {
        assert_eq!(self.size, other.size);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Circular shift by `(dx, dy)` pixels (same convention as the transform).
    pub fn shifted(&self, dx: usize, dy: usize) -> Image {
        let n = self.size;
        Image::from_fn(n, |x, y| {
            self.get((x + n - dx % n) % n, (y + n - dy % n) % n)
        })
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        fft::fft2_real(self.size, &self.data)
    }
}

/// Spectral whitening filter parameters.
///
/// `f0` is the cutoff in cycles per image width; the standard choice is
/// 0.45 of the Nyquist frequency with a fourth-power roll-off.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WhiteningParams {
    pub f0: f64,
    pub steepness: f64,
}

impl WhiteningParams {
    /// Default filter for a given image size: `f0 = 0.45 · Nyquist`.
    pub fn for_size(size: usize) -> Self {
        WhiteningParams {
            f0: 0.45 * size as f64 / 2.0,
            steepness: 4.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0) {
            return Err(Error::invalid(format!(
                "whitening f0 must be > 0, got {}",
                self.f0
            )));
        }
        if !(self.steepness > 0.0) {
            return Err(Error::invalid(format!(
                "whitening steepness must be > 0, got {}",
                self.steepness
            )));
        }
        Ok(())
    }

    /// Filter gain at radial frequency `f` (cycles per image width).
    pub fn gain(&self, f: f64) -> f64 {
        if f == 0.0 {
            0.0
        } else {
            f * (-(f / self.f0).powf(self.steepness)).exp()
        }
    }
}

/// Multiplies the spectrum by `W(f) = f · exp(−(f/f0)^steepness)`.
///
/// The envelope is radially symmetric so the output is real; the DC
/// coefficient is zeroed.
pub fn whiten(img: &Image, params: &WhiteningParams) -> Result<Image> {
    params.validate()?;
    let n = img.size();
    let mut spec = img.spectrum();
    for ky in 0..n {
        let fy = bin_index(ky, n) as f64;
        for kx in 0..n {
            let fx = bin_index(kx, n) as f64;
            let f = (fx * fx + fy * fy).sqrt();
            spec[ky * n + kx] *= params.gain(f);
        }
    }
    fft::ifft2(n, &mut spec);
    Ok(Image {
        size: n,
        data: spec.iter().map(|v| v.re).collect(),
    })
}

/// Multiplies pixels by a circular window: 1 inside, 0 beyond radius
/// `size/2`, with a raised-cosine taper of width [`MASK_TAPER_WIDTH`] inside
/// the rim.
pub fn apply_circular_mask(img: &Image) -> Image {
    let n = img.size();
    let c = n as f64 / 2.0;
    let r0 = n as f64 / 2.0;
    let flat = r0 - MASK_TAPER_WIDTH;
    Image::from_fn(n, |x, y| {
        let r = (x as f64 - c).hypot(y as f64 - c);
        let w = if r >= r0 {
            0.0
        } else if r <= flat {
            1.0
        } else {
            let t = (r - flat) / MASK_TAPER_WIDTH;
            (std::f64::consts::FRAC_PI_2 * t).cos().powi(2)
        };
        img.get(x, y) * w
    })
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

fn decode_luminance(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let dynimg = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::ImageDecode {
            path: path.to_path_buf(),
            source: e,
        })?;
    use image::DynamicImage::*;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    let data: Vec<f64> = match &dynimg {
        ImageLuma8(b) => b.pixels().map(|p| p.0[0] as f64).collect(),
        ImageLuma16(b) => b.pixels().map(|p| p.0[0] as f64).collect(),
        ImageLumaA8(b) => b.pixels().map(|p| p.0[0] as f64).collect(),
        ImageLumaA16(b) => b.pixels().map(|p| p.0[0] as f64).collect(),
        // Color inputs: plain channel average.
        ImageRgb8(b) => b
            .pixels()
            .map(|p| (p.0[0] as f64 + p.0[1] as f64 + p.0[2] as f64) / 3.0)
            .collect(),
        ImageRgba8(b) => b
            .pixels()
            .map(|p| (p.0[0] as f64 + p.0[1] as f64 + p.0[2] as f64) / 3.0)
            .collect(),
        ImageRgb16(b) => b
            .pixels()
            .map(|p| (p.0[0] as f64 + p.0[1] as f64 + p.0[2] as f64) / 3.0)
            .collect(),
        ImageRgba16(b) => b
            .pixels()
            .map(|p| (p.0[0] as f64 + p.0[1] as f64 + p.0[2] as f64) / 3.0)
            .collect(),
        other => {
            let b = other.to_rgb8();
            b.pixels()
                .map(|p| (p.0[0] as f64 + p.0[1] as f64 + p.0[2] as f64) / 3.0)
                .collect()
        }
    };
    Ok((w, h, data))
}

/// Loads a grayscale image (8/16-bit PGM or PNG; color is averaged),
/// central-crops it to `target_size` and subtracts the mean.
///
/// Images smaller than `target_size` are rejected; there is no upsampling.
pub fn load_image(path: impl AsRef<Path>, target_size: usize) -> Result<Image> {
    let path = path.as_ref();
    let (w, h, data) = decode_luminance(path)?;
    if w < target_size || h < target_size {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            target: target_size,
        });
    }
    let x0 = (w - target_size) / 2;
    let y0 = (h - target_size) / 2;
    let mut img = Image::from_fn(target_size, |x, y| data[(y + y0) * w + (x + x0)]);
    img.subtract_mean();
    Ok(img)
}

/// Writes a 16-bit binary PGM, mapping `[-m, m]` to `[0, 65535]` where `m`
/// is the largest pixel magnitude (zero maps to mid-gray). Returns `m`.
pub fn save_pgm16(img: &Image, path: impl AsRef<Path>) -> Result<f64> {
    let path = path.as_ref();
    let m = img.data().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let scale = if m > 0.0 { 32767.5 / m } else { 0.0 };
    let n = img.size();
    let mut buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(n as u32, n as u32);
    for y in 0..n {
        for x in 0..n {
            let v = (img.get(x, y) * scale + 32767.5).clamp(0.0, 65535.0);
            buf.put_pixel(x as u32, y as u32, image::Luma([v as u16]));
        }
    }
    buf.save_with_format(path, image::ImageFormat::Pnm)
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    Ok(m)
}

/// Reads a corpus manifest: one image path per line, `#` starts a comment.
/// Relative paths are resolved against the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let entry = line.split('#').next().unwrap_or("").trim();
        if entry.is_empty() {
            continue;
        }
        let p = Path::new(entry);
        out.push(if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        });
    }
    Ok(out)
}

/// Loads every manifest entry at `target_size`, returning `(stem, image)`
/// pairs in manifest order.
pub fn load_corpus(manifest: impl AsRef<Path>, target_size: usize) -> Result<Vec<(String, Image)>> {
    let paths = load_manifest(manifest)?;
    if paths.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    paths
        .iter()
        .map(|p| {
            let id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.to_string_lossy().into_owned());
            load_image(p, target_size).map(|img| (id, img))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Synthetic stimuli
// ---------------------------------------------------------------------------

/// Specification of the circle-in-noise stimulus.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticStimulusSpec {
    /// Circle radius in pixels.
    pub radius: f64,
    /// Number of random distractor edges.
    pub n_clutter: usize,
    /// Inclusive range of scale indices for the clutter edges.
    pub clutter_scale_range: (usize, usize),
    pub seed: u64,
}

impl SyntheticStimulusSpec {
    pub fn validate(&self, bank: &LogGaborBank) -> Result<()> {
        let n = bank.image_size() as f64;
        if !(self.radius > 0.0 && self.radius < n / 2.0) {
            return Err(Error::invalid(format!(
                "circle radius {} out of bounds for image size {n}",
                self.radius
            )));
        }
        let (lo, hi) = self.clutter_scale_range;
        if lo > hi || hi >= bank.params().n_scales {
            return Err(Error::invalid(format!(
                "clutter scale range {lo}..={hi} invalid for {} scales",
                bank.params().n_scales
            )));
        }
        Ok(())
    }

    /// Scale index used for the circle atoms: middle of the clutter range.
    pub fn circle_scale(&self) -> usize {
        (self.clutter_scale_range.0 + self.clutter_scale_range.1) / 2
    }
}

/// Arc spacing between circle atoms, in units of the atom wavelength.
const CIRCLE_ARC_SPACING: f64 = 1.5;

/// Builds the circle-in-noise stimulus and returns the planted ground truth:
/// atoms placed tangentially at regular arc spacing along the circle, plus
/// `n_clutter` atoms at uniformly random positions, orientations and scales.
/// Deterministic given the seed.
pub fn circle_in_noise_with_ground_truth(
    spec: &SyntheticStimulusSpec,
    bank: &LogGaborBank,
) -> Result<(Image, Vec<Edge>)> {
    spec.validate(bank)?;
    let n = bank.image_size();
    let params = bank.params();
    let orientations = params.orientation_angles();
    let center = n as f64 / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut planted = Vec::new();
    let circle_scale = spec.circle_scale();
    let lambda = 1.0 / params.center_frequency(circle_scale);
    let n_circle = ((2.0 * std::f64::consts::PI * spec.radius) / (CIRCLE_ARC_SPACING * lambda))
        .round()
        .max(8.0) as usize;
    for k in 0..n_circle {
        let beta = 2.0 * std::f64::consts::PI * k as f64 / n_circle as f64;
        let x = (center + spec.radius * beta.cos()).round();
        let y = (center + spec.radius * beta.sin()).round();
        let tangent = wrap_half_pi(beta + std::f64::consts::FRAC_PI_2);
        let orientation = nearest_orientation(&orientations, tangent);
        planted.push(Edge {
            x: (x as usize).min(n - 1),
            y: (y as usize).min(n - 1),
            scale: circle_scale,
            orientation,
            coeff: Complex64::new(1.0, 0.0),
        });
    }

    let (lo, hi) = spec.clutter_scale_range;
    for _ in 0..spec.n_clutter {
        let x = rng.random_range(0..n);
        let y = rng.random_range(0..n);
        let scale = rng.random_range(lo..=hi);
        let orientation = rng.random_range(0..orientations.len());
        let phase = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
        planted.push(Edge {
            x,
            y,
            scale,
            orientation,
            coeff: Complex64::from_polar(1.0, phase),
        });
    }

    let mut img = Image::zeros(n);
    for e in &planted {
        let atom = bank.synthesize_atom(&e.address(), e.coeff)?;
        img.add_assign(&atom);
    }
    Ok((img, planted))
}

/// As [`circle_in_noise_with_ground_truth`], discarding the ground truth.
pub fn make_circle_in_noise(spec: &SyntheticStimulusSpec, bank: &LogGaborBank) -> Result<Image> {
    circle_in_noise_with_ground_truth(spec, bank).map(|(img, _)| img)
}

/// Wraps an angle into (−π/2, π/2] on period π.
pub fn wrap_half_pi(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(std::f64::consts::PI);
    if t > std::f64::consts::FRAC_PI_2 {
        t -= std::f64::consts::PI;
    }
    t
}

fn nearest_orientation(orientations: &[f64], theta: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, &t) in orientations.iter().enumerate() {
        let mut d = (t - theta).rem_euclid(std::f64::consts::PI);
        if d > std::f64::consts::FRAC_PI_2 {
            d = std::f64::consts::PI - d;
        }
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}
