//! Greedy matching pursuit over the log-Gabor stack: smooth pursuit with
//! complex coefficients, reconstruction and residual-energy accounting.
//!
//! [`extract`] runs the pursuit without materializing the full coefficient
//! pyramid. The residual is kept as a spectrum; each channel's correlation
//! field is recomputed from it on demand, and a sound per-channel staleness
//! bound (derived from the bank's coupling table) decides which channels can
//! possibly hold the next maximum. Selections are therefore identical to a
//! full scan of the freshly analyzed residual, at a fraction of the cost.

use std::collections::HashMap;
use std::path::Path;

use num_complex::Complex64;

use crate::fft;
use crate::imagecore::Image;
use crate::loggabor::{AtomAddress, BankParams, CoefficientStack, LogGaborBank};
use crate::{Error, Result};

pub const DEFAULT_TIE_EPSILON: f64 = 1e-12;

/// One sparse event: position, scale, orientation and the accumulated
/// complex coefficient (modulus = amplitude, argument = phase).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub x: usize,
    pub y: usize,
    pub scale: usize,
    pub orientation: usize,
    pub coeff: Complex64,
}

impl Edge {
    pub fn address(&self) -> AtomAddress {
        AtomAddress {
            scale: self.scale,
            orientation: self.orientation,
            x: self.x,
            y: self.y,
        }
    }
}

/// Per-step record: which edge the step touched and the modulus |a| of the
/// linear coefficient selected at that step (before the α scaling).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub edge_index: usize,
    pub modulus: f64,
}

/// Ordered result of an extraction. `edges` keeps first-selection order;
/// repeated selections of one address accumulate into the existing entry and
/// append a new step record.
#[derive(Debug, Clone)]
pub struct EdgeList {
    pub edges: Vec<Edge>,
    pub steps: Vec<StepRecord>,
    pub image_size: usize,
    pub bank_params: BankParams,
    pub initial_energy: f64,
}

impl EdgeList {
    /// Number of steps that re-selected an already extracted address.
    pub fn repeat_count(&self) -> usize {
        self.steps.len() - self.edges.len()
    }

    /// Orientation of each edge in radians, resolved through the bank
    /// parameters.
    pub fn thetas(&self) -> Vec<f64> {
        let angles = self.bank_params.orientation_angles();
        self.edges.iter().map(|e| angles[e.orientation]).collect()
    }
}

/// Stopping and smoothness parameters of the pursuit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PursuitParams {
    /// Fraction of the projection removed per step ("smooth" pursuit).
    pub alpha: f64,
    /// Maximum number of pursuit steps.
    pub max_edges: usize,
    /// Stop once residual energy falls to this fraction of ‖I‖².
    pub energy_threshold: f64,
    /// Relative tolerance for arg-max ties (lowest linear address wins).
    pub tie_epsilon: f64,
}

impl Default for PursuitParams {
    fn default() -> Self {
        PursuitParams {
            alpha: 0.8,
            max_edges: 2048,
            energy_threshold: 0.03,
            tie_epsilon: DEFAULT_TIE_EPSILON,
        }
    }
}

impl PursuitParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.energy_threshold >= 0.0) {
            return Err(Error::invalid("energy threshold must be >= 0"));
        }
        if !(self.tie_epsilon >= 0.0) {
            return Err(Error::invalid("tie epsilon must be >= 0"));
        }
        Ok(())
    }
}

/// Address and value of the stack coefficient with maximal modulus.
///
/// Ties within a relative `tie_epsilon` of the maximum resolve to the lowest
/// linear index. Fails with [`Error::NothingToMatch`] on an all-zero stack.
pub fn best_match(stack: &CoefficientStack, tie_epsilon: f64) -> Result<(AtomAddress, Complex64)> {
    let mut best = 0.0_f64;
    for v in &stack.values {
        best = best.max(v.norm_sqr());
    }
    if best == 0.0 {
        return Err(Error::NothingToMatch);
    }
    let thresh = best.sqrt() * (1.0 - tie_epsilon);
    let thresh_sq = thresh * thresh;
    let idx = stack
        .values
        .iter()
        .position(|v| v.norm_sqr() >= thresh_sq)
        .expect("threshold below the maximum");
    Ok((stack.address_of(idx), stack.values[idx]))
}

/// One smooth-pursuit step on a materialized stack: selects the best match,
/// removes `alpha` of its projection from the image and updates every
/// channel of the stack by the atom's cross-correlation.
///
/// Returns the selected edge (its `coeff` is this step's increment α·a_i),
/// the new residual image and the updated stack.
pub fn pursue_step(
    img: &Image,
    stack: CoefficientStack,
    bank: &LogGaborBank,
    alpha: f64,
) -> Result<(Edge, Image, CoefficientStack)> {
    let (addr, a) = best_match(&stack, DEFAULT_TIE_EPSILON)?;
    let delta = alpha * a;
    let atom = bank.synthesize_atom(&addr, delta)?;
    let mut residual = img.clone();
    for (r, v) in residual.data_mut().iter_mut().zip(atom.data()) {
        *r -= v;
    }
    let mut stack = stack;
    subtract_atom_from_stack(bank, &mut stack, &addr, delta);
    let edge = Edge {
        x: addr.x,
        y: addr.y,
        scale: addr.scale,
        orientation: addr.orientation,
        coeff: delta,
    };
    Ok((edge, residual, stack))
}

/// In-place update `a_j ← a_j − <atom, Φ_j>` for every channel, where the
/// atom is `Re(delta·Φ_addr)`. Mathematically identical to re-analyzing the
/// residual after the subtraction.
fn subtract_atom_from_stack(
    bank: &LogGaborBank,
    stack: &mut CoefficientStack,
    addr: &AtomAddress,
    delta: Complex64,
) {
    let n = bank.image_size();
    let ci = bank.channel_index(addr.scale, addr.orientation);
    let env_i = bank.envelope(ci);
    let supp_i = bank.support(ci);
    let mut buf = vec![Complex64::default(); n * n];
    for c in 0..bank.n_channels() {
        let env_c = bank.envelope(c);
        for v in buf.iter_mut() {
            *v = Complex64::default();
        }
        for &k in supp_i {
            let k = k as usize;
            let e = env_i[k] * env_c[k];
            if e != 0.0 {
                let (kx, ky) = (k % n, k / n);
                buf[k] = 0.5 * delta * e * bank.phase(kx, ky, addr.x, addr.y);
            }
        }
        fft::ifft2(n, &mut buf);
        for (s, b) in stack.channel_mut(c).iter_mut().zip(&buf) {
            *s -= b;
        }
    }
}

// ---------------------------------------------------------------------------
// Lazy pursuit engine
// ---------------------------------------------------------------------------

/// Side length of the cache blocks the position grid is tiled into.
const BLOCK: usize = 16;

/// Low-level pursuit driver; [`extract`] is the friendly entry point.
///
/// Caches, per channel and per 16×16 block of positions, the exact maximum
/// modulus found at the last refresh of that channel, together with a sound
/// bound (`slack`) on how far any coefficient in the block may have drifted
/// since. A channel is re-scanned only when some block's `max + slack`
/// could beat the current best fresh maximum, so selections are exact while
/// most steps touch only a handful of channels.
pub struct PursuitEngine<'b> {
    bank: &'b LogGaborBank,
    n: usize,
    /// blocks per side / per channel
    bw: usize,
    nb: usize,
    /// Residual spectrum; kept Hermitian by mirrored updates.
    rhat: Vec<Complex64>,
    /// Per (channel·nb + block): exact block max at last refresh, its
    /// position, value, and the accumulated drift bound.
    block_max: Vec<f64>,
    block_idx: Vec<u32>,
    block_val: Vec<Complex64>,
    block_slack: Vec<f64>,
    /// Per channel: upper bound max_b(max + slack), and whether the channel
    /// is fresh (zero slack everywhere).
    ub: Vec<f64>,
    fresh: Vec<bool>,
    scratch: Vec<Complex64>,
    /// scratch: per-block distance band from the last subtraction point
    band_of_block: Vec<u8>,
    /// Number of channel refreshes performed (diagnostic).
    pub refreshes: u64,
    pub steps: u64,
}

impl<'b> PursuitEngine<'b> {
    pub fn new(img: &Image, bank: &'b LogGaborBank) -> Result<Self> {
        if img.size() != bank.image_size() {
            return Err(Error::SizeMismatch {
                expected: bank.image_size(),
                got: img.size(),
            });
        }
        let n = bank.image_size();
        let bw = n.div_ceil(BLOCK);
        let nb = bw * bw;
        let nc = bank.n_channels();
        bank.coupling_table(); // force construction outside the hot loop
        let mut engine = PursuitEngine {
            bank,
            n,
            bw,
            nb,
            rhat: img.spectrum(),
            block_max: vec![0.0; nc * nb],
            block_idx: vec![0; nc * nb],
            block_val: vec![Complex64::default(); nc * nb],
            block_slack: vec![0.0; nc * nb],
            ub: vec![0.0; nc],
            fresh: vec![false; nc],
            scratch: vec![Complex64::default(); n * n],
            band_of_block: vec![0; nb],
            refreshes: 0,
            steps: 0,
        };
        for c in 0..nc {
            engine.refresh(c);
        }
        Ok(engine)
    }

    /// Residual energy ‖R‖², by Parseval over the residual spectrum.
    pub fn residual_energy(&self) -> f64 {
        self.rhat.iter().map(|v| v.norm_sqr()).sum::<f64>() / (self.n * self.n) as f64
    }

    /// Residual as a spatial image.
    pub fn residual_image(&self) -> Image {
        let mut buf = self.rhat.clone();
        fft::ifft2(self.n, &mut buf);
        Image::from_vec(self.n, buf.iter().map(|v| v.re).collect()).expect("square buffer")
    }

    /// Recomputes the channel's correlation field from the residual spectrum
    /// and rebuilds its block maxima. Works in the transposed layout so the
    /// final transpose of the 2-D inverse transform can be skipped, prunes
    /// empty frequency rows, and folds the scan into the last transform pass.
    fn refresh(&mut self, c: usize) {
        self.refreshes += 1;
        let n = self.n;
        let env = self.bank.envelope(c);
        for (b, (r, e)) in self
            .scratch
            .iter_mut()
            .zip(self.rhat.iter().zip(env.iter()))
        {
            *b = r * e;
        }
        let fft = fft::inverse_plan(n);
        let mut fft_scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // pass A: transform along kx, but only rows that carry support
        for &ky in self.bank.support_rows(c) {
            let ky = ky as usize;
            fft.process_with_scratch(&mut self.scratch[ky * n..(ky + 1) * n], &mut fft_scratch);
        }
        fft::transpose_in_place(n, &mut self.scratch);
        // pass B along ky, fused with the block scan; row px of the
        // transposed buffer holds positions (x = px, y = 0..n)
        let base = c * self.nb;
        self.block_max[base..base + self.nb].fill(-1.0);
        self.block_slack[base..base + self.nb].fill(0.0);
        let bw = self.bw;
        let norm = 1.0 / (n * n) as f64;
        for px in 0..n {
            let row = &mut self.scratch[px * n..(px + 1) * n];
            fft.process_with_scratch(row, &mut fft_scratch);
            let bcol = px / BLOCK;
            for (py, v) in row.iter().enumerate() {
                let ns = v.norm_sqr();
                let b = base + (py / BLOCK) * bw + bcol;
                if ns > self.block_max[b] {
                    self.block_max[b] = ns;
                    self.block_idx[b] = (py * n + px) as u32;
                    self.block_val[b] = *v;
                }
            }
        }
        let mut channel_best = 0.0_f64;
        for b in base..base + self.nb {
            let m = self.block_max[b].max(0.0).sqrt() * norm;
            self.block_max[b] = m;
            self.block_val[b] *= norm;
            channel_best = channel_best.max(m);
        }
        self.ub[c] = channel_best;
        self.fresh[c] = true;
    }

    /// Fresh channel's exact max and its first attaining block.
    fn channel_best(&self, c: usize) -> (f64, u32, Complex64) {
        let base = c * self.nb;
        let mut best = 0.0_f64;
        let mut idx = 0u32;
        let mut val = Complex64::default();
        for b in base..base + self.nb {
            if self.block_max[b] > best {
                best = self.block_max[b];
                idx = self.block_idx[b];
                val = self.block_val[b];
            }
        }
        (best, idx, val)
    }

    /// Exact arg-max over all channels and positions, refreshing only the
    /// channels whose staleness bound allows them to contend.
    fn select(&mut self, tie_epsilon: f64) -> Option<(usize, u32, Complex64)> {
        loop {
            // highest upper bound, lowest channel index on equality
            let mut c_star = 0usize;
            let mut ub_star = f64::NEG_INFINITY;
            for (c, &ub) in self.ub.iter().enumerate() {
                if ub > ub_star {
                    ub_star = ub;
                    c_star = c;
                }
            }
            if !self.fresh[c_star] {
                self.refresh(c_star);
                continue;
            }
            let m_star = self.ub[c_star];
            if m_star == 0.0 {
                return None; // residual orthogonal to the dictionary
            }
            // channels whose bound reaches into the tie band must be fresh
            let thresh = m_star * (1.0 - tie_epsilon);
            let mut refreshed_any = false;
            for c in 0..self.ub.len() {
                if !self.fresh[c] && self.ub[c] >= thresh {
                    self.refresh(c);
                    refreshed_any = true;
                }
            }
            if refreshed_any {
                continue;
            }
            // all contenders fresh: lowest channel among maxima in the band
            for c in 0..self.ub.len() {
                if self.ub[c] >= thresh {
                    let (_, idx, val) = self.channel_best(c);
                    return Some((c, idx, val));
                }
            }
        }
    }

    /// One pursuit step: selects the best match, removes `alpha` of its
    /// projection from the residual spectrum, and propagates staleness
    /// bounds. Returns the address and the full linear coefficient `a_i`.
    pub fn step(&mut self, alpha: f64, tie_epsilon: f64) -> Option<(AtomAddress, Complex64)> {
        let (c, idx, a) = self.select(tie_epsilon)?;
        let delta = alpha * a;
        self.subtract(c, idx as usize, delta);
        self.propagate_slack(c, idx as usize, delta.norm());
        let no = self.bank.params().n_orientations;
        let addr = AtomAddress {
            scale: c / no,
            orientation: c % no,
            x: idx as usize % self.n,
            y: idx as usize / self.n,
        };
        self.steps += 1;
        Some((addr, a))
    }

    /// Grows every block's slack by a sound bound on the perturbation the
    /// subtraction at `(c_sel, p)` caused there: the coupling kernel's
    /// radial bound at the block's distance from p.
    fn propagate_slack(&mut self, c_sel: usize, p: usize, dm: f64) {
        let n = self.n;
        let (px, py) = (p % n, p / n);
        // distance band from p to each block (exact torus point-to-block)
        for by in 0..self.bw {
            let y0 = by * BLOCK;
            let y1 = ((by + 1) * BLOCK).min(n) - 1;
            let dy = torus_point_interval(py, y0, y1, n);
            for bx in 0..self.bw {
                let x0 = bx * BLOCK;
                let x1 = ((bx + 1) * BLOCK).min(n) - 1;
                let dx = torus_point_interval(px, x0, x1, n);
                self.band_of_block[by * self.bw + bx] =
                    crate::loggabor::CouplingTable::band_of((dx * dx + dy * dy).sqrt()) as u8;
            }
        }
        let table = self.bank.coupling_table();
        let nc = self.ub.len();
        for c in 0..nc {
            let base = c * self.nb;
            let mut ub = 0.0_f64;
            match table.profile(c_sel, c) {
                Some(prof) => {
                    for (b, &band) in self.band_of_block.iter().enumerate() {
                        let s = (self.block_slack[base + b] + dm * prof[band as usize])
                            * (1.0 + 1e-12);
                        self.block_slack[base + b] = s;
                        let u = self.block_max[base + b] + s;
                        if u > ub {
                            ub = u;
                        }
                    }
                }
                None => {
                    let k = dm * table.peak(c_sel, c);
                    for b in 0..self.nb {
                        let s = (self.block_slack[base + b] + k) * (1.0 + 1e-12);
                        self.block_slack[base + b] = s;
                        let u = self.block_max[base + b] + s;
                        if u > ub {
                            ub = u;
                        }
                    }
                }
            }
            self.ub[c] = ub;
            self.fresh[c] = false;
        }
    }

    /// Removes `Re(delta · Φ)` at `(channel, position)` from the residual
    /// spectrum, with the mirrored conjugate update keeping it Hermitian.
    fn subtract(&mut self, c: usize, idx: usize, delta: Complex64) {
        let n = self.n;
        let (px, py) = (idx % n, idx / n);
        let env = self.bank.envelope(c);
        let half = 0.5 * delta;
        for &k in self.bank.support(c) {
            let k = k as usize;
            let (kx, ky) = (k % n, k / n);
            let v = half * env[k] * self.bank.phase(kx, ky, px, py);
            self.rhat[k] -= v;
            let mirror = ((n - ky) % n) * n + (n - kx) % n;
            self.rhat[mirror] -= v.conj();
        }
    }
}

/// Shortest distance on a circle of circumference `n` from point `p` to the
/// interval `[lo, hi]` (inclusive, `hi − lo < n`).
fn torus_point_interval(p: usize, lo: usize, hi: usize, n: usize) -> f64 {
    if p >= lo && p <= hi {
        return 0.0;
    }
    let d = |a: usize, b: usize| {
        let d = a.abs_diff(b);
        d.min(n - d)
    };
    d(p, lo).min(d(p, hi)) as f64
}

/// Greedy extraction: repeats pursuit steps until the residual energy falls
/// to `energy_threshold · ‖I‖²` or `max_edges` steps have run. Repeated
/// selections of one address accumulate complex coefficients.
///
/// The caller is responsible for whitening and masking the input first.
pub fn extract(img: &Image, bank: &LogGaborBank, params: &PursuitParams) -> Result<EdgeList> {
    extract_with_trace(img, bank, params).map(|(edges, _)| edges)
}

/// As [`extract`], also returning the measured residual energy after each
/// step (index 0 holds ‖I‖² itself), for energy-identity diagnostics.
pub fn extract_with_trace(
    img: &Image,
    bank: &LogGaborBank,
    params: &PursuitParams,
) -> Result<(EdgeList, Vec<f64>)> {
    params.validate()?;
    let e0 = img.energy();
    let mut list = EdgeList {
        edges: Vec::new(),
        steps: Vec::new(),
        image_size: img.size(),
        bank_params: bank.params().clone(),
        initial_energy: e0,
    };
    let mut energies = vec![e0];
    if e0 == 0.0 {
        return Ok((list, energies));
    }
    let mut engine = PursuitEngine::new(img, bank)?;
    let mut index_of: HashMap<(usize, usize, usize, usize), usize> = HashMap::new();
    while list.steps.len() < params.max_edges {
        if engine.residual_energy() <= params.energy_threshold * e0 {
            break;
        }
        let Some((addr, a)) = engine.step(params.alpha, params.tie_epsilon) else {
            break;
        };
        let delta = params.alpha * a;
        let key = (addr.scale, addr.orientation, addr.x, addr.y);
        let edge_index = match index_of.get(&key) {
            Some(&i) => {
                list.edges[i].coeff += delta;
                i
            }
            None => {
                list.edges.push(Edge {
                    x: addr.x,
                    y: addr.y,
                    scale: addr.scale,
                    orientation: addr.orientation,
                    coeff: delta,
                });
                index_of.insert(key, list.edges.len() - 1);
                list.edges.len() - 1
            }
        };
        list.steps.push(StepRecord {
            edge_index,
            modulus: a.norm(),
        });
        energies.push(engine.residual_energy());
    }
    Ok((list, energies))
}

/// Linear reconstruction Σ_i Re(s_i · Φ_i).
pub fn reconstruct(list: &EdgeList, bank: &LogGaborBank) -> Result<Image> {
    if *bank.params() != list.bank_params || bank.image_size() != list.image_size {
        return Err(Error::BankMismatch);
    }
    let n = bank.image_size();
    let mut half = vec![Complex64::default(); n * n];
    for e in &list.edges {
        let c = bank.channel_index(e.scale, e.orientation);
        let env = bank.envelope(c);
        for &k in bank.support(c) {
            let k = k as usize;
            let (kx, ky) = (k % n, k / n);
            half[k] += e.coeff * env[k] * bank.phase(kx, ky, e.x, e.y);
        }
    }
    // spectrum of the real part: half the lobe plus its mirrored conjugate
    let mut spec = vec![Complex64::default(); n * n];
    for ky in 0..n {
        for kx in 0..n {
            let k = ky * n + kx;
            let mirror = ((n - ky) % n) * n + (n - kx) % n;
            spec[k] = 0.5 * (half[k] + half[mirror].conj());
        }
    }
    fft::ifft2(n, &mut spec);
    Image::from_vec(n, spec.iter().map(|v| v.re).collect())
}

/// Residual-energy curve from the recorded coefficients alone:
/// `E_N = 1 − α(2−α) Σ_{k≤N} |a_k|² / ‖I‖²`.
pub fn energy_curve(list: &EdgeList, alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(list.steps.len() + 1);
    out.push(1.0);
    if list.initial_energy == 0.0 {
        return out;
    }
    let gain = alpha * (2.0 - alpha) / list.initial_energy;
    let mut e = 1.0;
    for s in &list.steps {
        e -= gain * s.modulus * s.modulus;
        out.push(e);
    }
    out
}

// ---------------------------------------------------------------------------
// Edge-list file format (versioned JSON)
// ---------------------------------------------------------------------------

pub const EDGE_LIST_FORMAT_VERSION: u32 = 1;

#[derive(serde::Serialize, serde::Deserialize)]
struct EdgeRecord {
    x: usize,
    y: usize,
    scale: usize,
    theta: f64,
    coeff_re: f64,
    coeff_im: f64,
    step: usize,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct StepFileRecord {
    edge: usize,
    modulus: f64,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct EdgeListFile {
    version: u32,
    image_size: usize,
    bank_params: BankParams,
    initial_energy: f64,
    edges: Vec<EdgeRecord>,
    steps: Vec<StepFileRecord>,
}

impl EdgeList {
    pub fn to_json(&self) -> Result<String> {
        let angles = self.bank_params.orientation_angles();
        // step at which each edge first appeared
        let mut first_step = vec![0usize; self.edges.len()];
        let mut seen = vec![false; self.edges.len()];
        for (k, s) in self.steps.iter().enumerate() {
            if !seen[s.edge_index] {
                seen[s.edge_index] = true;
                first_step[s.edge_index] = k;
            }
        }
        let file = EdgeListFile {
            version: EDGE_LIST_FORMAT_VERSION,
            image_size: self.image_size,
            bank_params: self.bank_params.clone(),
            initial_energy: self.initial_energy,
            edges: self
                .edges
                .iter()
                .zip(&first_step)
                .map(|(e, &step)| EdgeRecord {
                    x: e.x,
                    y: e.y,
                    scale: e.scale,
                    theta: angles[e.orientation],
                    coeff_re: e.coeff.re,
                    coeff_im: e.coeff.im,
                    step,
                })
                .collect(),
            steps: self
                .steps
                .iter()
                .map(|s| StepFileRecord {
                    edge: s.edge_index,
                    modulus: s.modulus,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<EdgeList> {
        let file: EdgeListFile = serde_json::from_str(text)?;
        if file.version != EDGE_LIST_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported edge list version {}",
                file.version
            )));
        }
        let angles = file.bank_params.orientation_angles();
        let orientation_of = |theta: f64| -> Result<usize> {
            // thetas were written from the same angle set; serde_json round-
            // trips f64 exactly, so exact match first, nearest as fallback
            if let Some(k) = angles.iter().position(|&t| t == theta) {
                return Ok(k);
            }
            let (k, d) = angles
                .iter()
                .enumerate()
                .map(|(k, &t)| (k, (t - theta).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty orientation set");
            if d < 1e-9 {
                Ok(k)
            } else {
                Err(Error::invalid(format!(
                    "orientation {theta} not in the bank's angle set"
                )))
            }
        };
        let mut edges = Vec::with_capacity(file.edges.len());
        for r in &file.edges {
            edges.push(Edge {
                x: r.x,
                y: r.y,
                scale: r.scale,
                orientation: orientation_of(r.theta)?,
                coeff: Complex64::new(r.coeff_re, r.coeff_im),
            });
        }
        Ok(EdgeList {
            edges,
            steps: file
                .steps
                .iter()
                .map(|s| StepRecord {
                    edge_index: s.edge,
                    modulus: s.modulus,
                })
                .collect(),
            image_size: file.image_size,
            bank_params: file.bank_params,
            initial_energy: file.initial_energy,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()?).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<EdgeList> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        EdgeList::from_json(&text)
    }
}
