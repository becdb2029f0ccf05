//! Natural-scene priors over extracted edges: first-order orientation
//! statistics with histogram equalization, second-order pairwise geometry
//! ("chevron") statistics, and co-occurrence-guided pursuit.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::imagecore::{wrap_half_pi, Image};
use crate::loggabor::LogGaborBank;
use crate::pursuit::{Edge, EdgeList, PursuitParams, StepRecord};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// First-order statistics
// ---------------------------------------------------------------------------

/// Histogram of edge orientations over (−π/2, π/2].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OrientationHistogram {
    pub n_bins: usize,
    /// Normalized per-bin mass (sums to 1).
    pub weights: Vec<f64>,
    /// Masses are coefficient-modulus-weighted when set, raw counts
    /// otherwise.
    pub modulus_weighted: bool,
}

/// Bin of an orientation in (−π/2, π/2] among `n_bins` equal (lo, hi] bins.
///
/// The tiny downward nudge keeps values that sit exactly on a bin edge (the
/// uniform orientation sets do) stably in the lower-edge bin regardless of
/// how they were computed.
pub fn orientation_bin(theta: f64, n_bins: usize) -> usize {
    let delta = PI / n_bins as f64;
    let q = (theta + FRAC_PI_2) / delta;
    ((q - 1e-9).ceil() as isize - 1).clamp(0, n_bins as isize - 1) as usize
}

impl OrientationHistogram {
    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.n_bins)
            .map(|j| -FRAC_PI_2 + j as f64 * PI / self.n_bins as f64)
            .collect()
    }

    /// Cumulative distribution at the bin edges (length `n_bins + 1`,
    /// from 0 to 1); linear inside bins.
    pub fn cdf(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_bins + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for w in &self.weights {
            acc += w;
            out.push(acc);
        }
        // guard the cumulative rounding at the top
        let top = *out.last().unwrap();
        if top > 0.0 {
            for v in out.iter_mut() {
                *v /= top;
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path.as_ref(), text).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Modulus-weighted (or count-weighted) histogram of edge orientations over
/// a corpus of edge lists.
pub fn orientation_stats(
    edge_lists: &[EdgeList],
    n_bins: usize,
    modulus_weighted: bool,
) -> Result<OrientationHistogram> {
    if n_bins == 0 {
        return Err(Error::invalid("need at least one orientation bin"));
    }
    let mut weights = vec![0.0; n_bins];
    let mut total = 0.0;
    for list in edge_lists {
        let angles = list.bank_params.orientation_angles();
        for e in &list.edges {
            let w = if modulus_weighted {
                e.coeff.norm()
            } else {
                1.0
            };
            weights[orientation_bin(angles[e.orientation], n_bins)] += w;
            total += w;
        }
    }
    if total <= 0.0 {
        return Err(Error::EmptyCorpus);
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(OrientationHistogram {
        n_bins,
        weights,
        modulus_weighted,
    })
}

/// Inverse-CDF sampling of `n_orientations` orientations: denser where the
/// histogram carries more mass, so that each returned orientation is
/// selected with equal prior probability.
pub fn equalize_orientations(
    hist: &OrientationHistogram,
    n_orientations: usize,
) -> Result<Vec<f64>> {
    if n_orientations < 1 {
        return Err(Error::invalid("need at least one orientation"));
    }
    let edges = hist.bin_edges();
    let cdf = hist.cdf();
    let mut out = Vec::with_capacity(n_orientations);
    for k in 0..n_orientations {
        let u = (k as f64 + 0.5) / n_orientations as f64;
        // find the bin with cdf[j] <= u <= cdf[j+1] and interpolate
        let mut j = 0;
        while j + 1 < cdf.len() - 1 && cdf[j + 1] < u {
            j += 1;
        }
        let span = cdf[j + 1] - cdf[j];
        let frac = if span > 0.0 { (u - cdf[j]) / span } else { 0.5 };
        let theta = edges[j] + frac * (edges[j + 1] - edges[j]);
        out.push(wrap_half_pi(theta));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Second-order (chevron) statistics
// ---------------------------------------------------------------------------

/// Binning layout of the chevron histogram. ψ and θ bins are centred on
/// multiples of π/n and wrap on period π; distance bins are log-spaced up to
/// `d_max` reference wavelengths; scale-ratio bins hold the clamped scale
/// index difference.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChevronBinning {
    pub n_psi: usize,
    pub n_theta: usize,
    pub n_d: usize,
    /// Minimum pair distance in units of the reference edge's wavelength.
    /// Pairs closer than this are multi-scale responses to one and the same
    /// underlying edge, not co-occurrences, and are excluded.
    pub d_min: f64,
    /// Pair-distance cutoff in units of the reference edge's wavelength.
    pub d_max: f64,
    /// Number of scale-ratio bins (odd; centre bin is "same scale").
    pub n_sigma: usize,
}

impl Default for ChevronBinning {
    fn default() -> Self {
        ChevronBinning {
            n_psi: 24,
            n_theta: 24,
            n_d: 4,
            d_min: 0.5,
            d_max: 4.0,
            n_sigma: 5,
        }
    }
}

impl ChevronBinning {
    pub fn n_cells(&self) -> usize {
        self.n_psi * self.n_theta * self.n_d * self.n_sigma
    }

    /// Index of an angle among bins centred on multiples of π/n, wrapping
    /// on period π. Values exactly on a bin edge resolve to the lower bin
    /// via a nudge far larger than rounding noise, so equal geometry always
    /// lands in the same cell.
    pub fn angle_bin(v: f64, n: usize) -> usize {
        let r = (v / (PI / n as f64) - 1e-9).round() as i64;
        r.rem_euclid(n as i64) as usize
    }

    pub fn d_bin(&self, d: f64) -> usize {
        if d <= 0.0 {
            return 0;
        }
        let t = (d / self.d_max).min(1.0);
        let k = (-t.log2()).floor() as usize;
        self.n_d - 1 - k.min(self.n_d - 1)
    }

    pub fn sigma_bin(&self, scale_a: usize, scale_b: usize) -> usize {
        let half = (self.n_sigma / 2) as i64;
        let ds = scale_b as i64 - scale_a as i64;
        (ds.clamp(-half, half) + half) as usize
    }

    fn cell(&self, psi: usize, theta: usize, d: usize, sigma: usize) -> usize {
        ((psi * self.n_theta + theta) * self.n_d + d) * self.n_sigma + sigma
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_psi == 0 || self.n_theta == 0 || self.n_d == 0 || self.n_sigma == 0 {
            return Err(Error::invalid("chevron binning has an empty axis"));
        }
        if self.n_sigma % 2 == 0 {
            return Err(Error::invalid("n_sigma must be odd"));
        }
        if !(self.d_max > 0.0) {
            return Err(Error::invalid("d_max must be positive"));
        }
        Ok(())
    }
}

/// Joint histogram of pairwise edge geometry: relative angles (ψ, θ),
/// normalized centre distance and scale ratio.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChevronHistogram {
    pub binning: ChevronBinning,
    /// Accumulated mass per cell, layout `[ψ][θ][d][σ]`.
    pub counts: Vec<f64>,
    /// Number of ordered pairs that contributed.
    pub n_pairs: u64,
    pub modulus_weighted: bool,
}

impl ChevronHistogram {
    /// Occurrence ratio relative to a uniform angular prior, marginalized
    /// over distance and scale ratio. Layout `[ψ][θ]`.
    pub fn marginal_ratio(&self) -> Vec<f64> {
        let b = &self.binning;
        let mut marginal = vec![0.0; b.n_psi * b.n_theta];
        let mut total = 0.0;
        for p in 0..b.n_psi {
            for t in 0..b.n_theta {
                let mut acc = 0.0;
                for d in 0..b.n_d {
                    for s in 0..b.n_sigma {
                        acc += self.counts[b.cell(p, t, d, s)];
                    }
                }
                marginal[p * b.n_theta + t] = acc;
                total += acc;
            }
        }
        let cells = (b.n_psi * b.n_theta) as f64;
        if total > 0.0 {
            for v in marginal.iter_mut() {
                *v *= cells / total;
            }
        }
        marginal
    }

    /// Occurrence ratio vs the uniform angular prior, per (ψ, θ, d) cell
    /// with scale ratio marginalized out. Normalization is per distance
    /// slice, so each `d` band compares its own geometry distribution to
    /// uniform. Layout `[ψ][θ][d]`.
    pub fn ratio_psi_theta_d(&self) -> Vec<f64> {
        let b = &self.binning;
        let mut out = vec![0.0; b.n_psi * b.n_theta * b.n_d];
        let mut slice_total = vec![0.0; b.n_d];
        for p in 0..b.n_psi {
            for t in 0..b.n_theta {
                for d in 0..b.n_d {
                    let mut acc = 0.0;
                    for s in 0..b.n_sigma {
                        acc += self.counts[b.cell(p, t, d, s)];
                    }
                    out[(p * b.n_theta + t) * b.n_d + d] = acc;
                    slice_total[d] += acc;
                }
            }
        }
        let cells = (b.n_psi * b.n_theta) as f64;
        for p in 0..b.n_psi {
            for t in 0..b.n_theta {
                for d in 0..b.n_d {
                    let idx = (p * b.n_theta + t) * b.n_d + d;
                    out[idx] = if slice_total[d] > 0.0 {
                        out[idx] * cells / slice_total[d]
                    } else {
                        0.0
                    };
                }
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path.as_ref(), text).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Relative geometry of an ordered edge pair (A = reference).
///
/// θ is the wrapped orientation difference, φ the azimuth of B seen from A
/// relative to A's orientation, and ψ = φ − θ/2 the swap-symmetric chevron
/// angle (zero for co-circular pairs). Distance is in units of A's
/// wavelength.
///
/// Halving θ makes ψ well defined only up to π/2 when |θ| = π/2 exactly
/// (both wrap representatives are valid); at that boundary the two orders
/// of a pair may land π/2 apart. Accumulating both ordered directions keeps
/// the histogram deterministic and rotation invariant either way.
pub fn pair_geometry(
    a: &Edge,
    b: &Edge,
    theta_a: f64,
    theta_b: f64,
    lambda_a: f64,
) -> (f64, f64, f64) {
    let dx = b.x as f64 - a.x as f64;
    let dy = b.y as f64 - a.y as f64;
    let theta = wrap_half_pi(theta_b - theta_a);
    let az = dy.atan2(dx);
    let psi = wrap_half_pi(az - theta_a - 0.5 * theta);
    let d = dx.hypot(dy) / lambda_a;
    (psi, theta, d)
}

/// Accumulates the chevron histogram over every ordered edge pair within
/// `d_max` reference wavelengths. Pair mass is the product of coefficient
/// moduli unless `modulus_weighted` is off.
pub fn chevron_stats(
    edge_lists: &[EdgeList],
    binning: &ChevronBinning,
    modulus_weighted: bool,
) -> Result<ChevronHistogram> {
    binning.validate()?;
    // per-image partial histograms, merged in corpus order
    let partials: Vec<(Vec<f64>, u64)> = edge_lists
        .par_iter()
        .map(|list| {
            let mut counts = vec![0.0; binning.n_cells()];
            let mut n_pairs = 0u64;
            let angles = list.bank_params.orientation_angles();
            let lambdas: Vec<f64> = (0..list.bank_params.n_scales)
                .map(|s| list.bank_params.wavelength(s))
                .collect();
            let edges = &list.edges;
            for (ia, a) in edges.iter().enumerate() {
                let lambda_a = lambdas[a.scale];
                let cutoff = binning.d_max * lambda_a;
                let cutoff_sq = cutoff * cutoff;
                for (ib, b) in edges.iter().enumerate() {
                    if ia == ib {
                        continue;
                    }
                    let dx = b.x as f64 - a.x as f64;
                    let dy = b.y as f64 - a.y as f64;
                    if dx * dx + dy * dy > cutoff_sq {
                        continue;
                    }
                    let (psi, theta, d) = pair_geometry(
                        a,
                        b,
                        angles[a.orientation],
                        angles[b.orientation],
                        lambda_a,
                    );
                    let cell = binning.cell(
                        ChevronBinning::angle_bin(psi, binning.n_psi),
                        ChevronBinning::angle_bin(theta, binning.n_theta),
                        binning.d_bin(d),
                        binning.sigma_bin(a.scale, b.scale),
                    );
                    counts[cell] += if modulus_weighted {
                        a.coeff.norm() * b.coeff.norm()
                    } else {
                        1.0
                    };
                    n_pairs += 1;
                }
            }
            (counts, n_pairs)
        })
        .collect();

    let mut hist = ChevronHistogram {
        binning: *binning,
        counts: vec![0.0; binning.n_cells()],
        n_pairs: 0,
        modulus_weighted,
    };
    for (counts, n_pairs) in partials {
        for (acc, v) in hist.counts.iter_mut().zip(&counts) {
            *acc += v;
        }
        hist.n_pairs += n_pairs;
    }
    Ok(hist)
}

// ---------------------------------------------------------------------------
// Co-occurrence-guided pursuit
// ---------------------------------------------------------------------------

/// Parameters of the co-occurrence prediction term.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoocParams {
    /// Strength of the prediction; 0 recovers plain pursuit exactly.
    pub eta: f64,
    /// Neighborhood radius in units of the extracted edge's wavelength.
    pub neighborhood_radius: f64,
    /// Floor on the ratio-normalized probability, as a fraction of uniform.
    pub epsilon_prob: f64,
}

impl Default for CoocParams {
    fn default() -> Self {
        CoocParams {
            eta: 0.15,
            neighborhood_radius: 4.0,
            epsilon_prob: 1e-3,
        }
    }
}

impl CoocParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) {
            return Err(Error::invalid("eta must be >= 0"));
        }
        if !(self.epsilon_prob > 0.0) {
            return Err(Error::invalid("epsilon_prob must be > 0"));
        }
        if !(self.neighborhood_radius > 0.0) {
            return Err(Error::invalid("neighborhood radius must be > 0"));
        }
        Ok(())
    }
}

/// Greedy pursuit whose selection score adds the accumulated co-occurrence
/// prediction `η Σ |s_i| · log p̂(π_* | π_i)` of the already extracted edges
/// to the reconstruction gain `|a_*|²/2`. Residual updates, accumulation and
/// stopping are identical to [`crate::pursuit::extract`]; with `eta = 0` the
/// output is bit-identical to it.
pub fn extract_with_prior(
    img: &Image,
    bank: &LogGaborBank,
    prior: &ChevronHistogram,
    pparams: &PursuitParams,
    cparams: &CoocParams,
) -> Result<EdgeList> {
    extract_with_prior_trace(img, bank, prior, pparams, cparams).map(|(list, _)| list)
}

/// As [`extract_with_prior`], returning measured residual energies as well.
pub fn extract_with_prior_trace(
    img: &Image,
    bank: &LogGaborBank,
    prior: &ChevronHistogram,
    pparams: &PursuitParams,
    cparams: &CoocParams,
) -> Result<(EdgeList, Vec<f64>)> {
    pparams.validate()?;
    cparams.validate()?;
    prior.binning.validate()?;
    if cparams.neighborhood_radius > prior.binning.d_max {
        return Err(Error::BinningMismatch);
    }
    if cparams.eta == 0.0 {
        // zero prediction strength: every splat would add zero bias, so this
        // is plain pursuit
        return crate::pursuit::extract_with_trace(img, bank, pparams);
    }
    if img.size() != bank.image_size() {
        return Err(Error::SizeMismatch {
            expected: bank.image_size(),
            got: img.size(),
        });
    }

    let n = bank.image_size();
    let nc = bank.n_channels();
    let e0 = img.energy();
    let mut list = EdgeList {
        edges: Vec::new(),
        steps: Vec::new(),
        image_size: n,
        bank_params: bank.params().clone(),
        initial_energy: e0,
    };
    let mut energies = vec![e0];
    if e0 == 0.0 {
        return Ok((list, energies));
    }

    // log p̂ over (ψ, θ, d), floored at epsilon_prob of uniform
    let b = prior.binning;
    let logp: Vec<f64> = prior
        .ratio_psi_theta_d()
        .iter()
        .map(|r| r.max(cparams.epsilon_prob).ln())
        .collect();
    let angles = bank.params().orientation_angles();

    let mut rhat = img.spectrum();
    let mut scratch = vec![Complex64::default(); n * n];
    let mut bias = vec![0.0; nc * n * n];
    let norm_sq = 1.0 / ((n * n) as f64 * (n * n) as f64);
    let mut index_of = std::collections::HashMap::new();

    loop {
        if list.steps.len() >= pparams.max_edges {
            break;
        }
        let energy: f64 = rhat.iter().map(|v| v.norm_sqr()).sum::<f64>() / (n * n) as f64;
        if energy <= pparams.energy_threshold * e0 {
            break;
        }
        // full scan: score = |a|²/2 + bias
        let mut best_score = f64::NEG_INFINITY;
        let mut best = None;
        for c in 0..nc {
            bank.correlate_channel(&rhat, c, &mut scratch);
            let bias_c = &bias[c * n * n..(c + 1) * n * n];
            for (i, v) in scratch.iter().enumerate() {
                let score = 0.5 * v.norm_sqr() + bias_c[i];
                if score > best_score {
                    best_score = score;
                    best = Some((c, i, *v));
                }
            }
        }
        let Some((c, idx, a)) = best else { break };
        if a.norm_sqr() == 0.0 {
            break; // nothing left to match
        }
        let _ = norm_sq;
        let delta = pparams.alpha * a;
        subtract_atom_from_spectrum(bank, &mut rhat, c, idx, delta);

        let no = bank.params().n_orientations;
        let (scale, orientation) = (c / no, c % no);
        let (x, y) = (idx % n, idx / n);
        let key = (scale, orientation, x, y);
        let (edge_index, weight) = match index_of.get(&key) {
            Some(&i) => {
                let before = list.edges[i as usize].coeff.norm();
                list.edges[i as usize].coeff += delta;
                (i as usize, list.edges[i as usize].coeff.norm() - before)
            }
            None => {
                list.edges.push(Edge {
                    x,
                    y,
                    scale,
                    orientation,
                    coeff: delta,
                });
                index_of.insert(key, (list.edges.len() - 1) as u64);
                (list.edges.len() - 1, delta.norm())
            }
        };
        list.steps.push(StepRecord {
            edge_index,
            modulus: a.norm(),
        });
        energies.push(rhat.iter().map(|v| v.norm_sqr()).sum::<f64>() / (n * n) as f64);

        // splat the accepted edge's prediction onto the bias grid
        splat_bias(
            &mut bias,
            bank,
            &b,
            &logp,
            &angles,
            cparams,
            scale,
            orientation,
            x,
            y,
            weight,
        );
    }
    Ok((list, energies))
}

/// Removes `Re(delta · Φ)` at `(channel, position)` from a residual
/// spectrum, mirrored to keep it Hermitian. Shared by both pursuit engines.
pub(crate) fn subtract_atom_from_spectrum(
    bank: &LogGaborBank,
    rhat: &mut [Complex64],
    c: usize,
    idx: usize,
    delta: Complex64,
) {
    let n = bank.image_size();
    let (px, py) = (idx % n, idx / n);
    let env = bank.envelope(c);
    let half = 0.5 * delta;
    for &k in bank.support(c) {
        let k = k as usize;
        let (kx, ky) = (k % n, k / n);
        let v = half * env[k] * bank.phase(kx, ky, px, py);
        rhat[k] -= v;
        let mirror = ((n - ky) % n) * n + (n - kx) % n;
        rhat[mirror] -= v.conj();
    }
}

/// Adds `η · weight · log p̂(candidate | accepted edge)` to every candidate
/// address within the neighborhood radius. No wrap-around: candidates past
/// the image border are skipped, matching the statistics accumulation.
#[allow(clippy::too_many_arguments)]
fn splat_bias(
    bias: &mut [f64],
    bank: &LogGaborBank,
    binning: &ChevronBinning,
    logp: &[f64],
    angles: &[f64],
    cparams: &CoocParams,
    scale_i: usize,
    orientation_i: usize,
    x_i: usize,
    y_i: usize,
    weight: f64,
) {
    let n = bank.image_size();
    let params = bank.params();
    let theta_i = angles[orientation_i];
    let lambda_i = params.wavelength(scale_i);
    let radius = cparams.neighborhood_radius * lambda_i;
    let r_px = radius.floor() as i64;
    let x_lo = (x_i as i64 - r_px).max(0);
    let x_hi = (x_i as i64 + r_px).min(n as i64 - 1);
    let y_lo = (y_i as i64 - r_px).max(0);
    let y_hi = (y_i as i64 + r_px).min(n as i64 - 1);
    let radius_sq = radius * radius;
    let eta_w = cparams.eta * weight;

    // per-channel angular constants
    let nc = bank.n_channels();
    let no = params.n_orientations;
    let mut theta_bin = vec![0usize; nc];
    let mut psi_ref = vec![0.0; nc];
    let mut sigma_clamped_logp_base = vec![0usize; nc];
    for c in 0..nc {
        let (s_t, o_t) = (c / no, c % no);
        let theta = wrap_half_pi(angles[o_t] - theta_i);
        theta_bin[c] = ChevronBinning::angle_bin(theta, binning.n_theta);
        psi_ref[c] = theta_i + 0.5 * theta;
        // σ is marginalized out of the lookup; record only for clarity
        sigma_clamped_logp_base[c] = s_t;
    }

    let psi_scale = binning.n_psi as f64 / PI;
    for y in y_lo..=y_hi {
        let dy = y - y_i as i64;
        for x in x_lo..=x_hi {
            let dx = x - x_i as i64;
            let dist_sq = (dx * dx + dy * dy) as f64;
            if dist_sq > radius_sq {
                continue;
            }
            let az = (dy as f64).atan2(dx as f64);
            let d_bin = binning.d_bin(dist_sq.sqrt() / lambda_i);
            let pos = y as usize * n + x as usize;
            for c in 0..nc {
                let r = ((az - psi_ref[c]) * psi_scale).round() as i64;
                let psi_bin = r.rem_euclid(binning.n_psi as i64) as usize;
                let cell = (psi_bin * binning.n_theta + theta_bin[c]) * binning.n_d + d_bin;
                bias[c * n * n + pos] += eta_w * logp[cell];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loggabor::BankParams;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn list_from_edges(edges: Vec<Edge>, params: BankParams) -> EdgeList {
        EdgeList {
            steps: edges
                .iter()
                .enumerate()
                .map(|(i, e)| StepRecord {
                    edge_index: i,
                    modulus: e.coeff.norm(),
                })
                .collect(),
            edges,
            image_size: 128,
            bank_params: params,
            initial_energy: 1.0,
        }
    }

    fn edge(x: usize, y: usize, scale: usize, orientation: usize, amp: f64) -> Edge {
        Edge {
            x,
            y,
            scale,
            orientation,
            coeff: Complex64::new(amp, 0.0),
        }
    }

    #[test]
    fn all_mass_in_one_bin_for_constant_orientation() {
        let params = BankParams::for_image_size(128);
        let k = 5;
        let edges = (0..40).map(|i| edge(i, i, 1, k, 1.0)).collect();
        let hist = orientation_stats(&[list_from_edges(edges, params.clone())], 24, true).unwrap();
        let bin = orientation_bin(params.orientation_angles()[k], 24);
        assert!((hist.weights[bin] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_synthetic_orientations_are_flat() {
        let params = BankParams::for_image_size(128);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n_samples = 24_000usize;
        let edges = (0..n_samples)
            .map(|i| edge(i % 100, i / 200, 1, rng.random_range(0..24), 1.0))
            .collect();
        let hist = orientation_stats(&[list_from_edges(edges, params)], 24, false).unwrap();
        // 3-sigma sampling bound per bin
        let p = 1.0 / 24.0;
        let sigma = (p * (1.0 - p) / n_samples as f64).sqrt();
        for w in &hist.weights {
            assert!((w - p).abs() < 3.0 * sigma + 1e-9, "bin {w} vs {p}");
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            orientation_stats(&[], 24, true),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn equalize_uniform_histogram_gives_uniform_spacing() {
        let hist = OrientationHistogram {
            n_bins: 24,
            weights: vec![1.0 / 24.0; 24],
            modulus_weighted: false,
        };
        let thetas = equalize_orientations(&hist, 24).unwrap();
        let spacing = thetas[1] - thetas[0];
        for w in thetas.windows(2) {
            assert!((w[1] - w[0] - spacing).abs() < 1e-9);
        }
        assert!((spacing - PI / 24.0).abs() < 1e-9);
    }

    #[test]
    fn equalize_concentrated_histogram_stays_in_support() {
        // all mass in bins covering [-0.1, 0.1]
        let n_bins = 180; // bin width π/180
        let mut weights = vec![0.0; n_bins];
        for (j, w) in weights.iter_mut().enumerate() {
            let lo = -FRAC_PI_2 + j as f64 * PI / n_bins as f64;
            let hi = lo + PI / n_bins as f64;
            if lo >= -0.1 && hi <= 0.1 {
                *w = 1.0;
            }
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        let hist = OrientationHistogram {
            n_bins,
            weights,
            modulus_weighted: false,
        };
        for theta in equalize_orientations(&hist, 12).unwrap() {
            assert!(
                (-0.11..=0.11).contains(&theta),
                "equalized orientation {theta} outside the mass support"
            );
        }
    }

    #[test]
    fn equalize_two_bin_histogram_matches_hand_inversion() {
        // 2 bins with masses 0.75 / 0.25, n = 4 → quantiles 1/8, 3/8, 5/8, 7/8
        // first three land in the heavy bin at fractions 1/6, 3/6, 5/6; the
        // last at fraction 1/2 of the light bin
        let hist = OrientationHistogram {
            n_bins: 2,
            weights: vec![0.75, 0.25],
            modulus_weighted: false,
        };
        let thetas = equalize_orientations(&hist, 4).unwrap();
        let w = PI / 2.0; // bin width
        let expect = [
            -FRAC_PI_2 + w * (1.0 / 6.0),
            -FRAC_PI_2 + w * (3.0 / 6.0),
            -FRAC_PI_2 + w * (5.0 / 6.0),
            0.0 + w * 0.5,
        ];
        for (got, want) in thetas.iter().zip(&expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn collinear_pair_has_zero_theta_and_psi() {
        let params = BankParams::for_image_size(128);
        let angles = params.orientation_angles();
        // orientation index for θ = 0
        let k0 = angles.iter().position(|&t| t.abs() < 1e-12).unwrap();
        let a = edge(30, 40, 1, k0, 1.0);
        let b = edge(42, 40, 1, k0, 1.0); // displaced along the edge axis
        let (psi, theta, d) = pair_geometry(&a, &b, angles[k0], angles[k0], 8.0);
        assert!(theta.abs() < 1e-12);
        assert!(psi.abs() < 1e-12);
        assert!((d - 1.5).abs() < 1e-12);
    }

    #[test]
    fn parallel_side_by_side_pair_has_psi_half_pi() {
        let params = BankParams::for_image_size(128);
        let angles = params.orientation_angles();
        let k0 = angles.iter().position(|&t| t.abs() < 1e-12).unwrap();
        let a = edge(30, 40, 1, k0, 1.0);
        let b = edge(30, 52, 1, k0, 1.0); // perpendicular displacement
        let (psi, theta, _) = pair_geometry(&a, &b, angles[k0], angles[k0], 8.0);
        assert!(theta.abs() < 1e-12);
        assert!((psi - FRAC_PI_2).abs() < 1e-12, "psi = {psi}");
    }

    #[test]
    fn swapping_reference_edge_lands_in_the_same_psi_theta_cell() {
        let binning = ChevronBinning::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 200 {
            let a = edge(
                rng.random_range(10..100),
                rng.random_range(10..100),
                0,
                0,
                1.0,
            );
            let b = edge(
                rng.random_range(10..100),
                rng.random_range(10..100),
                0,
                0,
                1.0,
            );
            let theta_a = rng.random::<f64>() * PI - FRAC_PI_2;
            let theta_b = rng.random::<f64>() * PI - FRAC_PI_2;
            if a.x == b.x && a.y == b.y {
                continue;
            }
            // the chevron angle is genuinely ambiguous at |θ| = π/2
            if (wrap_half_pi(theta_b - theta_a).abs() - FRAC_PI_2).abs() < 1e-6 {
                continue;
            }
            checked += 1;
            let (psi_ab, theta_ab, _) = pair_geometry(&a, &b, theta_a, theta_b, 4.0);
            let (psi_ba, theta_ba, _) = pair_geometry(&b, &a, theta_b, theta_a, 4.0);
            // ψ is swap-invariant; θ flips sign, so the symmetrized (ψ, |θ|)
            // cell is shared
            assert_eq!(
                ChevronBinning::angle_bin(psi_ab, binning.n_psi),
                ChevronBinning::angle_bin(psi_ba, binning.n_psi),
                "psi bins differ: {psi_ab} vs {psi_ba}"
            );
            let tb_ab = ChevronBinning::angle_bin(theta_ab, binning.n_theta);
            let tb_ba = ChevronBinning::angle_bin(-theta_ba, binning.n_theta);
            assert_eq!(tb_ab, tb_ba);
        }
    }

    #[test]
    fn chevron_counts_pairs_and_is_rotation_invariant() {
        let params = BankParams {
            n_scales: 3,
            n_orientations: 8,
            ..BankParams::default()
        };
        let angles = params.orientation_angles();
        let n_img = 128usize;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let edges: Vec<Edge> = (0..60)
            .map(|_| {
                edge(
                    rng.random_range(10..n_img - 10),
                    rng.random_range(10..n_img - 10),
                    rng.random_range(0..3),
                    rng.random_range(0..8),
                    0.5 + rng.random::<f64>(),
                )
            })
            .collect();
        let binning = ChevronBinning::default();
        let base = chevron_stats(
            &[list_from_edges(edges.clone(), params.clone())],
            &binning,
            false,
        )
        .unwrap();
        // Σ counts equals the number of contributing ordered pairs
        assert_eq!(base.counts.iter().sum::<f64>(), base.n_pairs as f64);

        // global quarter-turn: positions rotate, orientation indices shift
        // by n/4 (the uniform set is closed under +π/2 wrapping)
        let rotated: Vec<Edge> = edges
            .iter()
            .map(|e| Edge {
                x: n_img - 1 - e.y,
                y: e.x,
                scale: e.scale,
                orientation: (e.orientation + 4) % 8,
                coeff: e.coeff,
            })
            .collect();
        // check the orientation remap really is a quarter turn
        for e in &edges {
            let rot = wrap_half_pi(angles[e.orientation] + FRAC_PI_2);
            assert!((rot - angles[(e.orientation + 4) % 8]).abs() < 1e-12);
        }
        let turned =
            chevron_stats(&[list_from_edges(rotated, params)], &binning, false).unwrap();
        assert_eq!(base.counts, turned.counts, "chevron map not rotation invariant");
        assert_eq!(base.n_pairs, turned.n_pairs);
    }

    #[test]
    fn chevron_map_translation_and_scaling_invariance() {
        let params = BankParams {
            n_scales: 3,
            n_orientations: 8,
            ..BankParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let edges: Vec<Edge> = (0..50)
            .map(|_| {
                edge(
                    rng.random_range(5..50),
                    rng.random_range(5..50),
                    rng.random_range(0..2),
                    rng.random_range(0..8),
                    1.0,
                )
            })
            .collect();
        let binning = ChevronBinning::default();
        let base = chevron_stats(
            &[list_from_edges(edges.clone(), params.clone())],
            &binning,
            true,
        )
        .unwrap();
        let shifted: Vec<Edge> = edges
            .iter()
            .map(|e| Edge {
                x: e.x + 13,
                y: e.y + 57,
                ..*e
            })
            .collect();
        let moved = chevron_stats(&[list_from_edges(shifted, params.clone())], &binning, true)
            .unwrap();
        assert_eq!(base.counts, moved.counts);

        // uniform scaling: double positions and shift scales by one; distance
        // in wavelength units is unchanged
        let scaled: Vec<Edge> = edges
            .iter()
            .map(|e| Edge {
                x: e.x * 2,
                y: e.y * 2,
                scale: e.scale + 1,
                ..*e
            })
            .collect();
        let rescaled =
            chevron_stats(&[list_from_edges(scaled, params)], &binning, true).unwrap();
        assert_eq!(base.counts, rescaled.counts);
    }

    #[test]
    fn chevron_histogram_json_roundtrip() {
        let params = BankParams::for_image_size(128);
        let edges = vec![edge(10, 10, 1, 0, 1.0), edge(20, 10, 1, 0, 0.5)];
        let hist = chevron_stats(
            &[list_from_edges(edges, params)],
            &ChevronBinning::default(),
            true,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chevron.json");
        hist.save(&path).unwrap();
        let back = ChevronHistogram::load(&path).unwrap();
        assert_eq!(hist, back);
    }

    #[test]
    fn prior_pursuit_with_eta_zero_is_bit_identical_to_plain() {
        let bank = LogGaborBank::build(
            BankParams {
                n_scales: 3,
                n_orientations: 6,
                ..BankParams::default()
            },
            32,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = Image::from_fn(32, |_, _| rng.random::<f64>() - 0.5);
        let pparams = PursuitParams {
            alpha: 0.8,
            max_edges: 30,
            energy_threshold: 0.0,
            ..PursuitParams::default()
        };
        // an arbitrary prior: with eta = 0 it must not matter at all
        let prior = {
            let params = bank.params().clone();
            let edges = vec![edge(5, 5, 0, 0, 1.0), edge(9, 5, 0, 0, 1.0)];
            chevron_stats(
                &[list_from_edges(edges, params)],
                &ChevronBinning::default(),
                true,
            )
            .unwrap()
        };
        let plain = crate::pursuit::extract(&img, &bank, &pparams).unwrap();
        let with_prior = extract_with_prior(
            &img,
            &bank,
            &prior,
            &pparams,
            &CoocParams {
                eta: 0.0,
                ..CoocParams::default()
            },
        )
        .unwrap();
        assert_eq!(plain.to_json().unwrap(), with_prior.to_json().unwrap());
    }

    #[test]
    fn collinear_candidate_beats_perpendicular_under_prior() {
        // two-candidate toy: equal |a|, a prior favoring collinear geometry;
        // evaluate the score formula directly
        let binning = ChevronBinning {
            n_psi: 8,
            n_theta: 8,
            n_d: 2,
            d_max: 4.0,
            n_sigma: 1,
        };
        let params = BankParams {
            n_scales: 1,
            n_orientations: 8,
            ..BankParams::default()
        };
        let angles = params.orientation_angles();
        let k0 = angles.iter().position(|&t| t.abs() < 1e-12).unwrap();
        // build a prior from many collinear pairs
        let mut edges = Vec::new();
        for i in 0..30 {
            edges.push(edge(10 + 3 * i, 50, 0, k0, 1.0));
        }
        let prior = chevron_stats(&[list_from_edges(edges, params)], &binning, false).unwrap();
        let logp: Vec<f64> = prior
            .ratio_psi_theta_d()
            .iter()
            .map(|r| r.max(1e-3).ln())
            .collect();

        // extracted edge at (50, 50) with θ = 0; candidates at equal |a| and
        // equal distance: collinear (along x) vs perpendicular (along y)
        let d_bin = binning.d_bin(3.0 / 2.2222);
        let theta_bin = ChevronBinning::angle_bin(0.0, binning.n_theta);
        let collinear_cell = (ChevronBinning::angle_bin(0.0, binning.n_psi) * binning.n_theta
            + theta_bin)
            * binning.n_d
            + d_bin;
        let perp_cell = (ChevronBinning::angle_bin(FRAC_PI_2, binning.n_psi) * binning.n_theta
            + theta_bin)
            * binning.n_d
            + d_bin;
        let a = 0.7_f64;
        let eta = 0.15;
        let s_i = 1.0;
        let score_col = 0.5 * a * a + eta * s_i * logp[collinear_cell];
        let score_perp = 0.5 * a * a + eta * s_i * logp[perp_cell];
        assert!(
            score_col > score_perp,
            "collinear {score_col} vs perpendicular {score_perp}"
        );
    }

    #[test]
    fn prior_pursuit_preserves_energy_identity() {
        let bank = LogGaborBank::build(
            BankParams {
                n_scales: 3,
                n_orientations: 6,
                ..BankParams::default()
            },
            32,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let img = Image::from_fn(32, |_, _| rng.random::<f64>() - 0.5);
        // prior from the plain extraction of the same image
        let pparams = PursuitParams {
            alpha: 0.8,
            max_edges: 40,
            energy_threshold: 0.0,
            ..PursuitParams::default()
        };
        let plain = crate::pursuit::extract(&img, &bank, &pparams).unwrap();
        let prior = chevron_stats(&[plain], &ChevronBinning::default(), true).unwrap();
        let (list, energies) = extract_with_prior_trace(
            &img,
            &bank,
            &prior,
            &pparams,
            &CoocParams::default(),
        )
        .unwrap();
        let alpha = 0.8;
        let e0 = img.energy();
        let mut expected = e0;
        for (k, step) in list.steps.iter().enumerate() {
            expected -= alpha * (2.0 - alpha) * step.modulus * step.modulus;
            let rel = (energies[k + 1] - expected).abs() / e0;
            assert!(rel < 1e-8, "identity violated at step {k}: {rel}");
        }
    }
}
