//! Over-complete log-Gabor filter bank in the frequency domain, and the
//! linear transform producing the complex coefficient pyramid.
//!
//! Each filter is a Gaussian envelope in log-polar frequency coordinates,
//! supported on a single half-plane so that the spatial atom is a quadrature
//! pair: the real part responds to even (line-like) structure, the imaginary
//! part to odd (step-like) structure. Envelopes are scaled so that both parts
//! have unit L2 norm; with that convention the complex correlation computed
//! by [`LogGaborBank::analyze`] returns exactly the coefficient a pure atom
//! was synthesized with.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::fft::{self, bin_index};
use crate::imagecore::Image;
use crate::{Error, Result};

/// Exponent cutoff for envelope support: bins where the combined log-polar
/// Gaussian exponent falls below −25 (amplitude < 1.4e-11 of peak) are exact
/// zeros. The truncation is part of the filter definition, so all identities
/// (norms, correlations, energy bookkeeping) remain exact.
const ENVELOPE_EXPONENT_CUTOFF: f64 = 25.0;

/// Centre frequencies are rejected below this many cycles per image. The
/// canonical rule of thumb is one cycle per image; half a cycle still leaves
/// a usable envelope on the discrete grid and admits the default 8-scale
/// dyadic pyramid on 256² images.
const MIN_CYCLES_PER_IMAGE: f64 = 0.5;

/// Log-Gabor bank parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BankParams {
    pub n_scales: usize,
    pub n_orientations: usize,
    /// Log-frequency bandwidth (standard deviation of the radial Gaussian
    /// in natural-log frequency units).
    pub b_f: f64,
    /// Angular bandwidth (standard deviation of the angular Gaussian,
    /// radians).
    pub b_theta: f64,
    /// Ratio between successive centre frequencies (2 = dyadic).
    pub scale_ratio: f64,
    /// Highest centre frequency, cycles per pixel.
    pub f_max: f64,
    /// Explicit orientation set overriding uniform spacing (used by the
    /// first-order prior equalization). Values in (−π/2, π/2].
    #[serde(default)]
    pub orientations: Option<Vec<f64>>,
}

impl Default for BankParams {
    fn default() -> Self {
        BankParams {
            n_scales: 8,
            n_orientations: 24,
            b_f: 0.4,
            b_theta: PI / 8.0,
            scale_ratio: 2.0,
            f_max: 0.45,
            orientations: None,
        }
    }
}

impl BankParams {
    /// Default parameters with `n_scales` clamped to what fits between the
    /// Nyquist frequency and the cycles-per-image floor for this image size.
    pub fn for_image_size(size: usize) -> Self {
        let mut p = BankParams::default();
        p.n_scales = p
            .n_scales
            .min(max_feasible_scales(p.f_max, p.scale_ratio, size));
        p
    }

    /// Centre frequency of scale `s`, cycles per pixel.
    pub fn center_frequency(&self, s: usize) -> f64 {
        self.f_max / self.scale_ratio.powi(s as i32)
    }

    /// Wavelength of scale `s`, pixels.
    pub fn wavelength(&self, s: usize) -> f64 {
        1.0 / self.center_frequency(s)
    }

    /// Atom orientations θ_k in (−π/2, π/2], ascending for the uniform set.
    pub fn orientation_angles(&self) -> Vec<f64> {
        match &self.orientations {
            Some(v) => v.clone(),
            None => (0..self.n_orientations)
                .map(|k| -FRAC_PI_2 + (k as f64 + 1.0) * PI / self.n_orientations as f64)
                .collect(),
        }
    }

    pub fn n_channels(&self) -> usize {
        self.n_scales * self.n_orientations
    }

    pub fn validate(&self, image_size: usize) -> Result<()> {
        if image_size < 16 {
            return Err(Error::invalid(format!("image size {image_size} < 16")));
        }
        if self.n_scales < 1 || self.n_orientations < 1 {
            return Err(Error::invalid("need at least one scale and orientation"));
        }
        if !(self.b_f > 0.0) {
            return Err(Error::invalid(format!("B_f must be > 0, got {}", self.b_f)));
        }
        if !(self.b_theta > 0.0 && self.b_theta < PI) {
            return Err(Error::invalid(format!(
                "B_theta must be in (0, pi), got {}",
                self.b_theta
            )));
        }
        if !(self.scale_ratio > 1.0) {
            return Err(Error::invalid(format!(
                "scale ratio must be > 1, got {}",
                self.scale_ratio
            )));
        }
        if !(self.f_max > 0.0) || self.f_max > 0.5 {
            return Err(Error::invalid(format!(
                "f_max = {} places the top scale above Nyquist (0.5 cycles/pixel)",
                self.f_max
            )));
        }
        let f_min = self.center_frequency(self.n_scales - 1);
        if f_min * (image_size as f64) < MIN_CYCLES_PER_IMAGE {
            return Err(Error::invalid(format!(
                "lowest centre frequency {:.4} cycles/image is below the minimum {:.1}",
                f_min * image_size as f64,
                MIN_CYCLES_PER_IMAGE
            )));
        }
        if let Some(v) = &self.orientations {
            if v.len() != self.n_orientations {
                return Err(Error::invalid(format!(
                    "orientation override has {} entries for n_orientations = {}",
                    v.len(),
                    self.n_orientations
                )));
            }
            if v.iter().any(|t| !(*t > -FRAC_PI_2 && *t <= FRAC_PI_2)) {
                return Err(Error::invalid("orientations must lie in (-pi/2, pi/2]"));
            }
        }
        Ok(())
    }
}

/// Largest scale count keeping every centre frequency at or above the
/// cycles-per-image floor.
pub fn max_feasible_scales(f_max: f64, scale_ratio: f64, image_size: usize) -> usize {
    let span = (f_max * image_size as f64 / MIN_CYCLES_PER_IMAGE).ln() / scale_ratio.ln();
    (1.0 + span + 1e-9).floor().max(1.0) as usize
}

/// Unnormalized envelope value at radial frequency `f` (cycles/pixel) and
/// frequency azimuth `az`, for centre frequency `f_s` and angular centre
/// `psi` (the azimuth of the lobe, perpendicular to the atom orientation).
/// Peak value is exactly 1 at `(f_s, psi)`.
pub fn envelope_value(f: f64, az: f64, f_s: f64, psi: f64, b_f: f64, b_theta: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    let radial = (f / f_s).ln();
    let ang = angular_distance_pi(az, psi);
    let exponent = -radial * radial / (2.0 * b_f * b_f) - ang * ang / (2.0 * b_theta * b_theta);
    if exponent <= -ENVELOPE_EXPONENT_CUTOFF {
        0.0
    } else {
        exponent.exp()
    }
}

/// Distance between two angles on period π, in [0, π/2].
pub fn angular_distance_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Pyramid address: (scale, orientation, position).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AtomAddress {
    pub scale: usize,
    pub orientation: usize,
    pub x: usize,
    pub y: usize,
}

/// The complex linear coefficients over (scale, orientation, y, x), stored
/// channel-major: linear index `((s·n_o + o)·n + y)·n + x`.
#[derive(Debug, Clone)]
pub struct CoefficientStack {
    pub n_scales: usize,
    pub n_orientations: usize,
    pub size: usize,
    pub values: Vec<Complex64>,
}

impl CoefficientStack {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn linear(&self, a: &AtomAddress) -> usize {
        ((a.scale * self.n_orientations + a.orientation) * self.size + a.y) * self.size + a.x
    }

    pub fn address_of(&self, linear: usize) -> AtomAddress {
        let n = self.size;
        let x = linear % n;
        let y = (linear / n) % n;
        let c = linear / (n * n);
        AtomAddress {
            scale: c / self.n_orientations,
            orientation: c % self.n_orientations,
            x,
            y,
        }
    }

    pub fn get(&self, a: &AtomAddress) -> Complex64 {
        self.values[self.linear(a)]
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let n2 = self.size * self.size;
        &self.values[c * n2..(c + 1) * n2]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n2 = self.size * self.size;
        &mut self.values[c * n2..(c + 1) * n2]
    }
}

struct Channel {
    envelope: Vec<f64>,
    support: Vec<u32>,
    /// Frequency rows (ky) with any support, for pruned transforms.
    support_rows: Vec<u32>,
}

/// The frequency-domain filter bank for one image size.
pub struct LogGaborBank {
    params: BankParams,
    image_size: usize,
    channels: Vec<Channel>,
    /// e^{−2πi j/n} lookup used for exact integer phase shifts.
    twiddle: Vec<Complex64>,
    /// Pairwise coupling bounds for the lazy pursuit engine, built on demand.
    coupling: OnceLock<CouplingTable>,
}

impl LogGaborBank {
    /// Builds the bank; fails if the parameters place a centre frequency
    /// above Nyquist or below the minimum cycles-per-image bound.
    pub fn build(params: BankParams, image_size: usize) -> Result<Self> {
        params.validate(image_size)?;
        let n = image_size;
        let orientations = params.orientation_angles();
        let mut channels = Vec::with_capacity(params.n_channels());
        for s in 0..params.n_scales {
            let f_s = params.center_frequency(s);
            for &theta in &orientations {
                let psi = theta + FRAC_PI_2; // lobe azimuth; distance has period π
                let mut envelope = vec![0.0; n * n];
                for ky in 0..n {
                    let iy = bin_index(ky, n);
                    for kx in 0..n {
                        let ix = bin_index(kx, n);
                        if !in_half_plane(ix, iy, kx, ky, n) {
                            continue;
                        }
                        let fx = ix as f64 / n as f64;
                        let fy = iy as f64 / n as f64;
                        let f = (fx * fx + fy * fy).sqrt();
                        let az = fy.atan2(fx);
                        envelope[ky * n + kx] =
                            envelope_value(f, az, f_s, psi, params.b_f, params.b_theta);
                    }
                }
                let sum_sq: f64 = envelope.iter().map(|v| v * v).sum();
                if sum_sq <= 0.0 {
                    return Err(Error::invalid(format!(
                        "degenerate envelope at scale {s} (centre {f_s} cycles/pixel)"
                    )));
                }
                // Unit-norm convention: each quadrature part of the spatial
                // atom has L2 norm 1, i.e. Σ E² = 2n².
                let scale = (2.0 * (n * n) as f64 / sum_sq).sqrt();
                let mut support = Vec::new();
                let mut support_rows = Vec::new();
                for (i, v) in envelope.iter_mut().enumerate() {
                    if *v > 0.0 {
                        *v *= scale;
                        support.push(i as u32);
                        let row = (i / n) as u32;
                        if support_rows.last() != Some(&row) {
                            support_rows.push(row);
                        }
                    }
                }
                channels.push(Channel {
                    envelope,
                    support,
                    support_rows,
                });
            }
        }
        let twiddle = (0..n)
            .map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 / n as f64))
            .collect();
        Ok(LogGaborBank {
            params,
            image_size,
            channels,
            twiddle,
            coupling: OnceLock::new(),
        })
    }

    pub fn params(&self) -> &BankParams {
        &self.params
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Total coefficient count M of the full pyramid.
    pub fn total_coefficients(&self) -> usize {
        self.n_channels() * self.image_size * self.image_size
    }

    pub fn channel_index(&self, scale: usize, orientation: usize) -> usize {
        scale * self.params.n_orientations + orientation
    }

    pub fn envelope(&self, c: usize) -> &[f64] {
        &self.channels[c].envelope
    }

    pub fn support(&self, c: usize) -> &[u32] {
        &self.channels[c].support
    }

    /// Frequency rows carrying any support of channel `c`.
    pub fn support_rows(&self, c: usize) -> &[u32] {
        &self.channels[c].support_rows
    }

    /// Phase factor e^{−2πi(kx·px + ky·py)/n} for integer positions.
    pub fn phase(&self, kx: usize, ky: usize, px: usize, py: usize) -> Complex64 {
        self.twiddle[(kx * px + ky * py) % self.image_size]
    }

    fn check_address(&self, a: &AtomAddress) -> Result<()> {
        if a.scale >= self.params.n_scales
            || a.orientation >= self.params.n_orientations
            || a.x >= self.image_size
            || a.y >= self.image_size
        {
            return Err(Error::AddressOutOfRange(format!("{a:?}")));
        }
        Ok(())
    }

    /// The complex spatial atom at `address` (coefficient 1): real part is
    /// the even filter, imaginary part the odd one.
    pub fn spatial_atom(&self, address: &AtomAddress) -> Result<Vec<Complex64>> {
        self.check_address(address)?;
        let n = self.image_size;
        let c = self.channel_index(address.scale, address.orientation);
        let mut buf = vec![Complex64::default(); n * n];
        for &i in &self.channels[c].support {
            let i = i as usize;
            let (kx, ky) = (i % n, i / n);
            buf[i] = self.channels[c].envelope[i] * self.phase(kx, ky, address.x, address.y);
        }
        fft::ifft2(n, &mut buf);
        Ok(buf)
    }

    /// Real spatial image `Re(coeff · Φ_address)`; its norm equals `|coeff|`.
    pub fn synthesize_atom(&self, address: &AtomAddress, coeff: Complex64) -> Result<Image> {
        let atom = self.spatial_atom(address)?;
        let data = atom.iter().map(|z| (coeff * z).re).collect();
        Image::from_vec(self.image_size, data)
    }

    /// Full linear transform: for every channel, the inverse transform of
    /// `spectrum(img) × envelope`, giving the complex correlation with the
    /// atom at every position.
    pub fn analyze(&self, img: &Image) -> Result<CoefficientStack> {
        if img.size() != self.image_size {
            return Err(Error::SizeMismatch {
                expected: self.image_size,
                got: img.size(),
            });
        }
        let spec = img.spectrum();
        let mut stack = CoefficientStack {
            n_scales: self.params.n_scales,
            n_orientations: self.params.n_orientations,
            size: self.image_size,
            values: vec![Complex64::default(); self.total_coefficients()],
        };
        let n = self.image_size;
        let mut buf = vec![Complex64::default(); n * n];
        for c in 0..self.n_channels() {
            self.correlate_channel(&spec, c, &mut buf);
            stack.channel_mut(c).copy_from_slice(&buf);
        }
        Ok(stack)
    }

    /// Writes the per-position complex correlation of channel `c` against a
    /// spectrum into `buf` (overwritten).
    pub fn correlate_channel(&self, spectrum: &[Complex64], c: usize, buf: &mut [Complex64]) {
        let env = &self.channels[c].envelope;
        for (b, (s, e)) in buf.iter_mut().zip(spectrum.iter().zip(env.iter())) {
            *b = s * e;
        }
        fft::ifft2(self.image_size, buf);
    }

    /// Pairwise coupling bounds for the pursuit engine, built on first use.
    pub fn coupling_table(&self) -> &CouplingTable {
        self.coupling.get_or_init(|| CouplingTable::build(self))
    }
}

/// Position-aware bounds on how much one pursuit subtraction can move the
/// coefficients of every other channel.
///
/// Removing `Re(δ·Φ_i)` at position p changes channel c by
/// `|Δa_c(q)| = |δ| · |X(q−p)|` with `X = IFFT(E_i·E_c)/2`, the half
/// cross-correlation kernel of the two envelopes. `peak` stores the kernel
/// maximum `X(0) = Σ E_i E_c / 2n²` (equal to 1 on the diagonal); strongly
/// coupled pairs additionally carry a radial profile of the kernel so that
/// positions far from p receive a much smaller bound.
pub struct CouplingTable {
    nc: usize,
    peak: Vec<f64>,
    /// Per-pair monotone radial bound, indexed by [`CouplingTable::band_of`];
    /// `None` for weakly coupled pairs (the scalar peak is used instead).
    profile: Vec<Option<Box<[f64]>>>,
}

/// Number of dyadic radius bands in a coupling profile.
pub const COUPLING_BANDS: usize = 16;

/// Pairs with peak coupling below this use the scalar bound only.
const PROFILE_THRESHOLD: f64 = 0.02;

impl CouplingTable {
    /// Dyadic band of a torus distance: 0 for d < 1, else `1 + ⌊log₂ d⌋`.
    #[inline]
    pub fn band_of(d: f64) -> usize {
        if d < 1.0 {
            0
        } else {
            ((d as u64).ilog2() as usize + 1).min(COUPLING_BANDS - 1)
        }
    }

    pub fn peak(&self, i: usize, j: usize) -> f64 {
        self.peak[i * self.nc + j]
    }

    pub fn profile(&self, i: usize, j: usize) -> Option<&[f64]> {
        self.profile[i * self.nc + j].as_deref()
    }

    fn build(bank: &LogGaborBank) -> CouplingTable {
        let nc = bank.n_channels();
        let n = bank.image_size();
        let n2 = (n * n) as f64;
        let mut peak = vec![0.0; nc * nc];
        for i in 0..nc {
            for j in i..nc {
                let (small, big) =
                    if bank.channels[i].support.len() <= bank.channels[j].support.len() {
                        (i, j)
                    } else {
                        (j, i)
                    };
                let env_big = &bank.channels[big].envelope;
                let env_small = &bank.channels[small].envelope;
                let mut sum = 0.0;
                for &k in &bank.channels[small].support {
                    let k = k as usize;
                    sum += env_small[k] * env_big[k];
                }
                // safety inflation keeps the bound sound under accumulation
                // rounding
                let v = sum / (2.0 * n2) * (1.0 + 1e-9);
                peak[i * nc + j] = v;
                peak[j * nc + i] = v;
            }
        }

        // torus radius band of every grid offset, shared across pairs
        let band_map: Vec<u8> = (0..n * n)
            .map(|k| {
                let (x, y) = (k % n, k / n);
                let dx = x.min(n - x) as f64;
                let dy = y.min(n - y) as f64;
                Self::band_of(dx.hypot(dy)) as u8
            })
            .collect();

        let mut profile: Vec<Option<Box<[f64]>>> = (0..nc * nc).map(|_| None).collect();
        let mut buf = vec![Complex64::default(); n * n];
        for i in 0..nc {
            for j in i..nc {
                if peak[i * nc + j] < PROFILE_THRESHOLD {
                    continue;
                }
                let env_i = &bank.channels[i].envelope;
                let env_j = &bank.channels[j].envelope;
                for v in buf.iter_mut() {
                    *v = Complex64::default();
                }
                for &k in &bank.channels[i].support {
                    let k = k as usize;
                    let e = env_i[k] * env_j[k];
                    if e != 0.0 {
                        buf[k] = Complex64::new(e, 0.0);
                    }
                }
                fft::ifft2(n, &mut buf);
                let mut bands = [0.0_f64; COUPLING_BANDS];
                for (v, &b) in buf.iter().zip(&band_map) {
                    let m = 0.5 * v.norm();
                    let b = b as usize;
                    if m > bands[b] {
                        bands[b] = m;
                    }
                }
                // monotone envelope: bound for "distance at least r"
                for b in (0..COUPLING_BANDS - 1).rev() {
                    bands[b] = bands[b].max(bands[b + 1]);
                }
                for v in bands.iter_mut() {
                    *v *= 1.0 + 1e-9;
                }
                let boxed: Box<[f64]> = bands.to_vec().into_boxed_slice();
                profile[i * nc + j] = Some(boxed.clone());
                profile[j * nc + i] = Some(boxed);
            }
        }
        CouplingTable { nc, peak, profile }
    }
}

/// A bin belongs to the active half-plane when its horizontal frequency is
/// positive, or zero with positive vertical frequency. DC, the Nyquist row
/// and column, and self-conjugate bins are excluded so the retained spectrum
/// has no aliased or self-mirrored content and quadrature identities are
/// exact.
fn in_half_plane(ix: i64, iy: i64, kx: usize, ky: usize, n: usize) -> bool {
    if n % 2 == 0 && (kx == n / 2 || ky == n / 2) {
        return false;
    }
    ix > 0 || (ix == 0 && iy > 0)
}
