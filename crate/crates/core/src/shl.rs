//! Sparse Hebbian learning on image patches: greedy ℓ₀ sparse coding,
//! correlation-proportional dictionary updates, and homeostatic gain control
//! keeping atom usage balanced.

use ndarray::{Array1, Array2, ArrayView1};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::imagecore::Image;
use crate::{Error, Result};

/// Histogram-equalization homeostasis tracks each atom's coefficient
/// distribution on this many bins.
const HISTOGRAM_BINS: usize = 128;

/// Homeostatic regime of the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomeoMode {
    None,
    GainVariance,
    HistogramEqualization,
}

/// A sparse code: pairs of (atom index, real coefficient), selection order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        SparseVector::default()
    }

    /// Count of nonzero coefficients (the ℓ₀ pseudo-norm).
    pub fn l0(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, atom: usize) -> f64 {
        self.entries
            .iter()
            .find(|(i, _)| *i == atom)
            .map(|(_, a)| *a)
            .unwrap_or(0.0)
    }

    /// Adds `value` to the coefficient of `atom`; drops the entry if the
    /// result is exactly zero (no stored zeros).
    pub fn accumulate(&mut self, atom: usize, value: f64) {
        if value == 0.0 {
            return;
        }
        if let Some(e) = self.entries.iter_mut().find(|(i, _)| *i == atom) {
            e.1 += value;
            if e.1 == 0.0 {
                self.entries.retain(|(i, _)| *i != atom);
            }
        } else {
            self.entries.push((atom, value));
        }
    }

    /// Dense reconstruction Φa for a given dictionary.
    pub fn synthesize(&self, dict: &Dictionary) -> Array1<f64> {
        let mut out = Array1::zeros(dict.patch_len());
        for &(i, a) in &self.entries {
            out.scaled_add(a, &dict.atoms.column(i));
        }
        out
    }
}

/// Per-atom usage statistics backing the homeostasis modes.
#[derive(Debug, Clone)]
pub enum UsageStats {
    None,
    /// Exponential moving average of squared coefficients.
    Variance(Array1<f64>),
    /// Per-atom histogram of |a| on a fixed grid over `[0, a_max]`, with
    /// exponential forgetting. `a_max` is calibrated on first contact with
    /// data; larger values clamp into the top bin.
    Histogram { bins: Array2<f64>, a_max: f64 },
}

/// Column-normalized atom matrix with homeostatic state.
#[derive(Debug, Clone)]
pub struct Dictionary {
    /// L×M matrix; every column has unit L2 norm.
    pub atoms: Array2<f64>,
    /// Per-atom multiplicative score gains (variance mode).
    pub gains: Array1<f64>,
    pub usage: UsageStats,
}

impl Dictionary {
    /// Random dictionary: unit-variance white noise columns, normalized.
    pub fn random(patch_len: usize, n_atoms: usize, mode: HomeoMode, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut atoms = Array2::zeros((patch_len, n_atoms));
        for mut col in atoms.columns_mut() {
            for v in col.iter_mut() {
                // Box-Muller keeps the dependency surface small
                let u1: f64 = rng.random::<f64>().max(1e-300);
                let u2: f64 = rng.random();
                *v = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            }
            let norm = col.dot(&col).sqrt();
            col.mapv_inplace(|v| v / norm);
        }
        Dictionary {
            atoms,
            gains: Array1::ones(n_atoms),
            usage: match mode {
                HomeoMode::None => UsageStats::None,
                HomeoMode::GainVariance => UsageStats::Variance(Array1::ones(n_atoms)),
                HomeoMode::HistogramEqualization => UsageStats::Histogram {
                    bins: Array2::zeros((n_atoms, HISTOGRAM_BINS)),
                    a_max: 0.0,
                },
            },
        }
    }

    pub fn patch_len(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    /// Renormalizes every column to unit L2 norm.
    pub fn normalize_columns(&mut self) {
        for mut col in self.atoms.columns_mut() {
            let norm = col.dot(&col).sqrt();
            if norm > 0.0 {
                col.mapv_inplace(|v| v / norm);
            }
        }
    }

    pub fn max_column_norm_deviation(&self) -> f64 {
        self.atoms
            .columns()
            .into_iter()
            .map(|c| (c.dot(&c).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// The atom's empirical CDF of |a| evaluated at `x`: the fraction of
    /// tracked mass strictly below `x`, linearly interpolated inside bins.
    fn cdf(&self, atom: usize, x: f64) -> f64 {
        let UsageStats::Histogram { bins, a_max } = &self.usage else {
            return 0.0;
        };
        if *a_max <= 0.0 {
            return 0.0;
        }
        let row = bins.row(atom);
        let total: f64 = row.sum();
        if total <= 0.0 {
            return 0.0;
        }
        let pos = (x / a_max * HISTOGRAM_BINS as f64).clamp(0.0, HISTOGRAM_BINS as f64);
        let whole = pos.floor() as usize;
        let frac = pos - whole as f64;
        let mut below = 0.0;
        for b in 0..whole.min(HISTOGRAM_BINS) {
            below += row[b];
        }
        if whole < HISTOGRAM_BINS {
            below += frac * row[whole];
        }
        below / total
    }
}

/// Learning parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ShlParams {
    pub patch_side: usize,
    pub n_atoms: usize,
    /// Learning rate; constant for the first 10% of steps, then 1/t decay.
    pub eta: f64,
    /// Nonzeros per patch coded during learning.
    pub l0_target: usize,
    pub n_steps: usize,
    pub batch_size: usize,
    pub homeo_mode: HomeoMode,
    /// Update rate of the per-atom usage statistics.
    pub homeo_rate: f64,
    pub seed: u64,
}

impl Default for ShlParams {
    fn default() -> Self {
        ShlParams {
            patch_side: 12,
            n_atoms: 324,
            eta: 0.01,
            l0_target: 15,
            n_steps: 20_000,
            batch_size: 32,
            homeo_mode: HomeoMode::HistogramEqualization,
            homeo_rate: 0.01,
            seed: 0,
        }
    }
}

impl ShlParams {
    pub fn validate(&self) -> Result<()> {
        if self.l0_target > self.n_atoms {
            return Err(Error::invalid(format!(
                "l0_target {} exceeds atom count {}",
                self.l0_target, self.n_atoms
            )));
        }
        if !(self.eta > 0.0) {
            return Err(Error::invalid("eta must be > 0"));
        }
        if self.patch_side == 0 || self.n_atoms == 0 || self.batch_size == 0 {
            return Err(Error::invalid("degenerate SHL geometry"));
        }
        if !(self.homeo_rate > 0.0 && self.homeo_rate < 1.0) {
            return Err(Error::invalid("homeo_rate must be in (0, 1)"));
        }
        Ok(())
    }
}

/// Greedy matching pursuit on a patch with α = 1, for exactly `l0_target`
/// steps or until the residual norm falls below 1e-12.
///
/// The matching score depends on the dictionary's homeostasis mode
/// (gain-weighted or rank-transformed correlations); the stored coefficient
/// is always the raw projection.
pub fn code_mp(patch: ArrayView1<f64>, dict: &Dictionary, l0_target: usize) -> SparseVector {
    let mut residual = patch.to_owned();
    let mut code = SparseVector::new();
    for _ in 0..l0_target {
        if residual.dot(&residual).sqrt() < 1e-12 {
            break;
        }
        let correlations = dict.atoms.t().dot(&residual);
        let mut best: Option<(usize, f64)> = None;
        for (i, &c) in correlations.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let score = match &dict.usage {
                UsageStats::None => c.abs(),
                UsageStats::Variance(_) => dict.gains[i] * c.abs(),
                UsageStats::Histogram { .. } => dict.cdf(i, c.abs()),
            };
            let better = match best {
                None => true,
                Some((bi, bs)) => {
                    score > bs
                        || (score == bs && {
                            // rank ties resolve on the raw correlation
                            let cb = correlations[bi].abs();
                            c.abs() > cb
                        })
                }
            };
            if better {
                best = Some((i, score));
            }
        }
        let Some((i, _)) = best else { break };
        let a = correlations[i];
        code.accumulate(i, a);
        residual.scaled_add(-a, &dict.atoms.column(i));
    }
    code
}

/// Hebbian step `Φ_i ← Φ_i + η·a_i·(I − Φa)` for the activated atoms only,
/// followed by column renormalization.
pub fn hebbian_update(
    dict: &mut Dictionary,
    patch: ArrayView1<f64>,
    code: &SparseVector,
    eta: f64,
) {
    let mut residual = patch.to_owned();
    residual -= &code.synthesize(dict);
    for &(i, a) in code.entries() {
        let mut col = dict.atoms.column_mut(i);
        col.scaled_add(eta * a, &residual);
        let norm = col.dot(&col).sqrt();
        if norm > 0.0 {
            col.mapv_inplace(|v| v / norm);
        }
    }
}

/// Updates the per-atom usage statistics from one code and refreshes gains.
///
/// Variance mode tracks an exponential moving average `v ← (1−rate)v + ra²`
/// per atom (zero for unused atoms) and sets gains to `v^(−1/2)` normalized
/// to unit geometric mean. Histogram mode deposits |a| into the atom's own
/// histogram with exponential forgetting; the selection score in
/// [`code_mp`] is then the atom's CDF at its current correlation.
pub fn homeostasis_update(dict: &mut Dictionary, code: &SparseVector, rate: f64) {
    let n_atoms = dict.n_atoms();
    match &mut dict.usage {
        UsageStats::None => {}
        UsageStats::Variance(v) => {
            for i in 0..n_atoms {
                let a = code.get(i);
                v[i] = (1.0 - rate) * v[i] + rate * a * a;
            }
            let mut log_sum = 0.0;
            let mut gains = Array1::zeros(n_atoms);
            for i in 0..n_atoms {
                let g = 1.0 / v[i].max(1e-12).sqrt();
                gains[i] = g;
                log_sum += g.ln();
            }
            let geo_mean = (log_sum / n_atoms as f64).exp();
            dict.gains = gains / geo_mean;
        }
        UsageStats::Histogram { bins, a_max } => {
            if *a_max <= 0.0 {
                let peak = code
                    .entries()
                    .iter()
                    .map(|(_, a)| a.abs())
                    .fold(0.0, f64::max);
                if peak == 0.0 {
                    return;
                }
                *a_max = 4.0 * peak;
            }
            let scale = HISTOGRAM_BINS as f64 / *a_max;
            for i in 0..n_atoms {
                let a = code.get(i).abs();
                let bin = ((a * scale) as usize).min(HISTOGRAM_BINS - 1);
                let mut row = bins.row_mut(i);
                row.mapv_inplace(|v| v * (1.0 - rate));
                row[bin] += rate;
            }
        }
    }
}

/// Source of training patches.
pub trait PatchSource {
    /// Next patch, or `None` when exhausted.
    fn next_patch(&mut self) -> Option<Array1<f64>>;
}

/// Draws patches at uniformly random positions from a set of (whitened)
/// images, rejecting nearly blank ones by a variance floor.
pub struct ImagePatchSampler {
    images: Vec<Image>,
    patch_side: usize,
    rng: ChaCha8Rng,
    min_variance: f64,
}

impl ImagePatchSampler {
    pub fn new(images: Vec<Image>, patch_side: usize, seed: u64) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if images.iter().any(|im| im.size() < patch_side) {
            return Err(Error::invalid("images smaller than the patch side"));
        }
        Ok(ImagePatchSampler {
            images,
            patch_side,
            rng: ChaCha8Rng::seed_from_u64(seed),
            min_variance: 1e-4,
        })
    }
}

impl PatchSource for ImagePatchSampler {
    fn next_patch(&mut self) -> Option<Array1<f64>> {
        let side = self.patch_side;
        // blank-sky patches stall learning; retry, then accept whatever comes
        for attempt in 0..64 {
            let img = &self.images[self.rng.random_range(0..self.images.len())];
            let x0 = self.rng.random_range(0..=img.size() - side);
            let y0 = self.rng.random_range(0..=img.size() - side);
            let mut patch = Array1::zeros(side * side);
            for dy in 0..side {
                for dx in 0..side {
                    patch[dy * side + dx] = img.get(x0 + dx, y0 + dy);
                }
            }
            let mean = patch.sum() / patch.len() as f64;
            let var = patch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / patch.len() as f64;
            if var >= self.min_variance || attempt == 63 {
                return Some(patch);
            }
        }
        unreachable!()
    }
}

/// Generates random k-sparse combinations of a fixed ground-truth
/// dictionary; the standard identifiability benchmark for sparse learners.
pub struct SyntheticSparseSource {
    pub ground_truth: Array2<f64>,
    sparsity: usize,
    rng: ChaCha8Rng,
}

impl SyntheticSparseSource {
    pub fn new(ground_truth: Array2<f64>, sparsity: usize, seed: u64) -> Self {
        SyntheticSparseSource {
            ground_truth,
            sparsity,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl PatchSource for SyntheticSparseSource {
    fn next_patch(&mut self) -> Option<Array1<f64>> {
        let m = self.ground_truth.ncols();
        let mut patch = Array1::zeros(self.ground_truth.nrows());
        for _ in 0..self.sparsity {
            let atom = self.rng.random_range(0..m);
            let amp = 0.5 + self.rng.random::<f64>();
            let sign = if self.rng.random::<bool>() { 1.0 } else { -1.0 };
            patch.scaled_add(sign * amp, &self.ground_truth.column(atom));
        }
        Some(patch)
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy)]
pub struct TrainRecord {
    pub step: usize,
    /// Mean relative residual energy of the batch codes at `l0_target`.
    pub mean_residual: f64,
    /// Kurtosis of the batch coefficient matrix (zeros included).
    pub kurtosis: f64,
    pub min_pick_rate: f64,
    pub max_pick_rate: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    /// Per-atom selection counts over the whole run.
    pub pick_counts: Vec<u64>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,residual,kurtosis,min_pick_rate,max_pick_rate\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.step, r.mean_residual, r.kurtosis, r.min_pick_rate, r.max_pick_rate
            ));
        }
        out
    }
}

/// Plain (non-excess) kurtosis of a sample: `E[(x−μ)⁴] / σ⁴`.
pub fn kurtosis(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = samples.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    if m2 == 0.0 {
        0.0
    } else {
        m4 / (m2 * m2)
    }
}

/// Runs the coding → Hebbian → homeostasis loop for `n_steps` batches.
///
/// Codes are computed against a frozen snapshot per batch; updates are
/// applied by a single writer. The learning rate is constant for the first
/// tenth of the run, then decays as 1/t.
pub fn learn(source: &mut dyn PatchSource, params: &ShlParams) -> Result<(Dictionary, TrainLog)> {
    params.validate()?;
    let patch_len = params.patch_side * params.patch_side;
    let mut dict = Dictionary::random(patch_len, params.n_atoms, params.homeo_mode, params.seed);
    let mut log = TrainLog {
        records: Vec::new(),
        pick_counts: vec![0; params.n_atoms],
    };
    if params.n_steps == 0 {
        return Ok((dict, log));
    }
    let burn_in = (params.n_steps / 10).max(1);
    let log_every = (params.n_steps / 100).max(1);

    let mut batch: Vec<Array1<f64>> = Vec::with_capacity(params.batch_size);
    for step in 0..params.n_steps {
        batch.clear();
        for _ in 0..params.batch_size {
            match source.next_patch() {
                Some(p) => {
                    if p.len() != patch_len {
                        return Err(Error::SizeMismatch {
                            expected: patch_len,
                            got: p.len(),
                        });
                    }
                    batch.push(p);
                }
                None => {
                    if batch.is_empty() && step == 0 {
                        return Err(Error::EmptyCorpus);
                    }
                    break;
                }
            }
        }
        if batch.is_empty() {
            break;
        }
        let eta_t = if step < burn_in {
            params.eta
        } else {
            params.eta * burn_in as f64 / step as f64
        };
        // code against the frozen snapshot
        let codes: Vec<SparseVector> = batch
            .iter()
            .map(|p| code_mp(p.view(), &dict, params.l0_target))
            .collect();
        for (patch, code) in batch.iter().zip(&codes) {
            hebbian_update(&mut dict, patch.view(), code, eta_t);
            homeostasis_update(&mut dict, code, params.homeo_rate);
            for &(i, _) in code.entries() {
                log.pick_counts[i] += 1;
            }
        }
        if step % log_every == 0 || step + 1 == params.n_steps {
            log.records
                .push(batch_record(step, &dict, &batch, &codes, &log.pick_counts));
        }
    }
    Ok((dict, log))
}

fn batch_record(
    step: usize,
    dict: &Dictionary,
    batch: &[Array1<f64>],
    codes: &[SparseVector],
    picks: &[u64],
) -> TrainRecord {
    let mut residual_sum = 0.0;
    let mut coeffs = Vec::with_capacity(batch.len() * dict.n_atoms());
    for (patch, code) in batch.iter().zip(codes) {
        let rec = code.synthesize(dict);
        let mut err = 0.0;
        let mut energy = 0.0;
        for (p, r) in patch.iter().zip(rec.iter()) {
            err += (p - r) * (p - r);
            energy += p * p;
        }
        residual_sum += if energy > 0.0 { err / energy } else { 0.0 };
        let mut dense = vec![0.0; dict.n_atoms()];
        for &(i, a) in code.entries() {
            dense[i] = a;
        }
        coeffs.extend(dense);
    }
    let total_picks: u64 = picks.iter().sum();
    let (min_rate, max_rate) = if total_picks > 0 {
        let lo = *picks.iter().min().unwrap() as f64 / total_picks as f64;
        let hi = *picks.iter().max().unwrap() as f64 / total_picks as f64;
        (lo, hi)
    } else {
        (0.0, 0.0)
    };
    TrainRecord {
        step,
        mean_residual: residual_sum / batch.len() as f64,
        kurtosis: kurtosis(&coeffs),
        min_pick_rate: min_rate,
        max_pick_rate: max_rate,
    }
}

/// Mean ± std of the relative residual L2 error after `N` plain-MP steps,
/// for each `N` in `grid`. Evaluation ignores homeostatic gains so that
/// dictionaries are compared on reconstruction quality alone.
pub fn efficiency_report(
    dict: &Dictionary,
    test_patches: &[Array1<f64>],
    grid: &[usize],
) -> Vec<(usize, f64, f64)> {
    let plain = Dictionary {
        atoms: dict.atoms.clone(),
        gains: Array1::ones(dict.n_atoms()),
        usage: UsageStats::None,
    };
    let max_n = grid.iter().copied().max().unwrap_or(0);
    let mut per_patch: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
    for patch in test_patches {
        let norm0 = patch.dot(patch).sqrt();
        let mut residual = patch.clone();
        let mut errs = vec![1.0; grid.len()];
        for n in 1..=max_n {
            let code = code_mp(residual.view(), &plain, 1);
            if let Some(&(i, a)) = code.entries().first() {
                residual.scaled_add(-a, &plain.atoms.column(i));
            }
            let rel = if norm0 > 0.0 {
                residual.dot(&residual).sqrt() / norm0
            } else {
                0.0
            };
            for (gi, &g) in grid.iter().enumerate() {
                if g == n {
                    errs[gi] = rel;
                }
            }
        }
        for (gi, &g) in grid.iter().enumerate() {
            if g == 0 {
                errs[gi] = 1.0;
            }
            per_patch[gi].push(errs[gi]);
        }
    }
    grid.iter()
        .zip(per_patch)
        .map(|(&n, errs)| {
            let count = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / count;
            let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / count;
            (n, mean, var.sqrt())
        })
        .collect()
}

/// Parametric coding costs: the log-prior cost
/// `C₁ = ‖I−Φa‖²/(2σ_n²) + β Σ ln(1 + a_i²/σ²)` and the ℓ₀ cost
/// `C₀ = ‖I−Φa‖²/(2σ_n²) + λ‖a‖₀`. Diagnostic only.
pub fn parametric_costs(
    patch: ArrayView1<f64>,
    dict: &Dictionary,
    code: &SparseVector,
    sigma_n: f64,
    beta: f64,
    sigma: f64,
    lambda: f64,
) -> Result<(f64, f64)> {
    if sigma_n == 0.0 || sigma == 0.0 {
        return Err(Error::invalid("sigma_n and sigma must be nonzero"));
    }
    let rec = code.synthesize(dict);
    let mut err = 0.0;
    for (p, r) in patch.iter().zip(rec.iter()) {
        err += (p - r) * (p - r);
    }
    let recon = err / (2.0 * sigma_n * sigma_n);
    let prior: f64 = code
        .entries()
        .iter()
        .map(|(_, a)| (1.0 + a * a / (sigma * sigma)).ln())
        .sum();
    let c1 = recon + beta * prior;
    let c0 = recon + lambda * code.l0() as f64;
    Ok((c1, c0))
}

// ---------------------------------------------------------------------------
// Dictionary file format
// ---------------------------------------------------------------------------

const DICT_MAGIC: &[u8; 4] = b"SPLD";
const DICT_VERSION: u32 = 1;

impl Dictionary {
    /// Binary format: magic, version, L, M, column-major atom values, gains.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(DICT_MAGIC);
        out.extend_from_slice(&DICT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.patch_len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.n_atoms() as u64).to_le_bytes());
        for col in self.atoms.columns() {
            for v in col {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for g in &self.gains {
            out.extend_from_slice(&g.to_le_bytes());
        }
        std::fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Dictionary> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let fail = |reason: &str| Error::Format {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        if bytes.len() < 24 || &bytes[0..4] != DICT_MAGIC {
            return Err(fail("not a dictionary file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != DICT_VERSION {
            return Err(fail("unsupported version"));
        }
        let l = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let m = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
        let expected = 24 + 8 * (l * m + m);
        if bytes.len() != expected {
            return Err(fail("truncated dictionary"));
        }
        let mut atoms = Array2::zeros((l, m));
        let mut off = 24;
        for mut col in atoms.columns_mut() {
            for v in col.iter_mut() {
                *v = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
                off += 8;
            }
        }
        let mut gains = Array1::zeros(m);
        for g in gains.iter_mut() {
            *g = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            off += 8;
        }
        Ok(Dictionary {
            atoms,
            gains,
            usage: UsageStats::None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn unit(v: Array1<f64>) -> Array1<f64> {
        let n = v.dot(&v).sqrt();
        v / n
    }

    fn plain_dict(atoms: Array2<f64>) -> Dictionary {
        Dictionary {
            gains: Array1::ones(atoms.ncols()),
            usage: UsageStats::None,
            atoms,
        }
    }

    #[test]
    fn code_mp_pure_atom_yields_unit_code() {
        let mut atoms = Array2::zeros((4, 3));
        atoms.column_mut(0).assign(&unit(array![1.0, 1.0, 0.0, 0.0]));
        atoms.column_mut(1).assign(&unit(array![0.0, 1.0, 1.0, 0.0]));
        atoms.column_mut(2).assign(&unit(array![0.0, 0.0, 1.0, 1.0]));
        let dict = plain_dict(atoms);
        let patch = dict.atoms.column(1).to_owned();
        let code = code_mp(patch.view(), &dict, 1);
        assert_eq!(code.l0(), 1);
        assert_eq!(code.entries()[0].0, 1);
        assert!((code.entries()[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn code_mp_orthonormal_dictionary_is_exact() {
        let l = 6;
        let mut atoms = Array2::zeros((l, l));
        for i in 0..l {
            atoms[(i, i)] = 1.0;
        }
        let dict = plain_dict(atoms);
        let patch = array![0.3, -0.5, 0.0, 2.0, 1.0, -0.25];
        let code = code_mp(patch.view(), &dict, l);
        let rec = code.synthesize(&dict);
        let err: f64 = patch
            .iter()
            .zip(rec.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        assert!(err < 1e-24, "residual {err}");
        // one of the six coefficients is zero, so it is never stored
        assert_eq!(code.l0(), 5);
    }

    #[test]
    fn code_mp_matches_brute_force_per_step() {
        // oracle: exhaustive argmax over atoms on an explicitly tracked
        // residual
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (l, m) = (8, 12);
        let mut atoms = Array2::zeros((l, m));
        for mut col in atoms.columns_mut() {
            for v in col.iter_mut() {
                *v = rng.random::<f64>() - 0.5;
            }
            let n = col.dot(&col).sqrt();
            col.mapv_inplace(|v| v / n);
        }
        let dict = plain_dict(atoms);
        let patch = Array1::from_iter((0..l).map(|_| rng.random::<f64>() - 0.5));

        let code = code_mp(patch.view(), &dict, 2);

        let mut residual = patch.clone();
        let mut expect = Vec::new();
        for _ in 0..2 {
            let mut best = (0usize, 0.0_f64);
            for i in 0..m {
                let c = dict.atoms.column(i).dot(&residual);
                if c.abs() > best.1.abs() {
                    best = (i, c);
                }
            }
            expect.push(best);
            residual.scaled_add(-best.1, &dict.atoms.column(best.0));
        }
        assert_eq!(code.entries().len(), 2);
        for (got, want) in code.entries().iter().zip(&expect) {
            assert_eq!(got.0, want.0);
            assert!((got.1 - want.1).abs() < 1e-12);
        }
    }

    #[test]
    fn hebbian_update_skips_inactive_atoms() {
        let mut dict = Dictionary::random(9, 4, HomeoMode::None, 1);
        let before = dict.atoms.column(2).to_owned();
        let patch = Array1::linspace(0.0, 1.0, 9);
        let mut code = SparseVector::new();
        code.accumulate(0, 0.7);
        hebbian_update(&mut dict, patch.view(), &code, 0.1);
        // atom 2 had a zero coefficient: untouched
        assert_eq!(dict.atoms.column(2), before);
        assert!(dict.max_column_norm_deviation() < 1e-12);
    }

    #[test]
    fn hebbian_update_is_identity_on_perfect_reconstruction() {
        let mut dict = Dictionary::random(4, 4, HomeoMode::None, 2);
        let patch = dict.atoms.column(1).to_owned() * 1.4;
        let mut code = SparseVector::new();
        code.accumulate(1, 1.4);
        let before = dict.atoms.clone();
        hebbian_update(&mut dict, patch.view(), &code, 0.5);
        let diff = (&dict.atoms - &before).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "dictionary moved by {diff}");
    }

    #[test]
    fn hebbian_update_matches_hand_computation() {
        // L = 2 toy: Φ1 = (1,0), patch = (0.8, 0.6), a = 0.8, η = 0.5
        // residual = (0, 0.6); update = (1, 0.24); normalized ≈ (0.972, 0.233)
        let mut atoms = Array2::zeros((2, 1));
        atoms[(0, 0)] = 1.0;
        let mut dict = plain_dict(atoms);
        let mut code = SparseVector::new();
        code.accumulate(0, 0.8);
        hebbian_update(&mut dict, array![0.8, 0.6].view(), &code, 0.5);
        let norm = (1.0_f64 + 0.24 * 0.24).sqrt();
        assert!((dict.atoms[(0, 0)] - 1.0 / norm).abs() < 1e-12);
        assert!((dict.atoms[(1, 0)] - 0.24 / norm).abs() < 1e-12);
        assert!((dict.atoms[(0, 0)] - 0.972).abs() < 5e-4);
        assert!((dict.atoms[(1, 0)] - 0.233).abs() < 5e-4);
    }

    #[test]
    fn identical_usage_gives_unit_gains() {
        let mut dict = Dictionary::random(4, 3, HomeoMode::GainVariance, 3);
        let mut code = SparseVector::new();
        for i in 0..3 {
            code.accumulate(i, 0.5);
        }
        for _ in 0..10 {
            homeostasis_update(&mut dict, &code, 0.05);
        }
        for &g in &dict.gains {
            assert!((g - 1.0).abs() < 1e-12, "gain {g}");
        }
    }

    #[test]
    fn homeostasis_none_mode_changes_nothing() {
        let mut dict = Dictionary::random(4, 3, HomeoMode::None, 5);
        let gains = dict.gains.clone();
        let atoms = dict.atoms.clone();
        let mut code = SparseVector::new();
        code.accumulate(0, 1.0);
        homeostasis_update(&mut dict, &code, 0.05);
        assert_eq!(dict.gains, gains);
        assert_eq!(dict.atoms, atoms);
    }

    #[test]
    fn unused_atom_gains_rise_in_variance_mode() {
        // atom 0 always wins with a = 1, atom 1 never picked
        let mut dict = Dictionary::random(4, 2, HomeoMode::GainVariance, 7);
        let mut code = SparseVector::new();
        code.accumulate(0, 1.0);
        for _ in 0..100 {
            homeostasis_update(&mut dict, &code, 0.01);
        }
        assert!(
            dict.gains[1] / dict.gains[0] > 1.0,
            "gains {:?}",
            dict.gains
        );
    }

    #[test]
    fn gains_bias_selection_but_not_value() {
        // two similar atoms; a gain pushes selection to the other one, but
        // the stored coefficient is always the raw projection
        let a0 = unit(array![1.0, 0.2, 0.0]);
        let a1 = unit(array![1.0, -0.2, 0.0]);
        let mut atoms = Array2::zeros((3, 2));
        atoms.column_mut(0).assign(&a0);
        atoms.column_mut(1).assign(&a1);
        let patch = array![1.0, 0.05, 0.0];

        let mut dict = Dictionary {
            atoms: atoms.clone(),
            gains: Array1::ones(2),
            usage: UsageStats::Variance(Array1::ones(2)),
        };
        let plain_choice = {
            let c0 = dict.atoms.column(0).dot(&patch);
            let c1 = dict.atoms.column(1).dot(&patch);
            if c0.abs() >= c1.abs() {
                0
            } else {
                1
            }
        };
        // gains equal: picks the plain argmax
        let code = code_mp(patch.view(), &dict, 1);
        assert_eq!(code.entries()[0].0, plain_choice);

        // now bias the other atom
        let other = 1 - plain_choice;
        dict.gains[other] = 10.0;
        let code = code_mp(patch.view(), &dict, 1);
        assert_eq!(code.entries()[0].0, other);
        let raw = dict.atoms.column(other).dot(&patch);
        assert!((code.entries()[0].1 - raw).abs() < 1e-12);

        // and the gain-weighted choice equals literally rescaling the atoms
        let mut scaled = atoms.clone();
        scaled.column_mut(other).mapv_inplace(|v| v * 10.0);
        let argmax_scaled = {
            let c0 = scaled.column(0).dot(&patch);
            let c1 = scaled.column(1).dot(&patch);
            if c0.abs() >= c1.abs() {
                0
            } else {
                1
            }
        };
        assert_eq!(argmax_scaled, other);
    }

    #[test]
    fn learn_zero_steps_returns_initial_dictionary() {
        let gt = Dictionary::random(16, 8, HomeoMode::None, 11).atoms;
        let mut source = SyntheticSparseSource::new(gt, 2, 1);
        let params = ShlParams {
            patch_side: 4,
            n_atoms: 8,
            l0_target: 2,
            n_steps: 0,
            ..ShlParams::default()
        };
        let (dict, log) = learn(&mut source, &params).unwrap();
        let reference = Dictionary::random(16, 8, params.homeo_mode, params.seed);
        assert_eq!(dict.atoms, reference.atoms);
        assert!(log.records.is_empty());
    }

    #[test]
    fn code_residual_is_non_increasing_in_l0() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dict = Dictionary::random(16, 24, HomeoMode::None, 6);
        let patch = Array1::from_iter((0..16).map(|_| rng.random::<f64>() - 0.5));
        let mut prev = f64::INFINITY;
        for l0 in 0..8 {
            let code = code_mp(patch.view(), &dict, l0);
            let rec = code.synthesize(&dict);
            let err: f64 = patch
                .iter()
                .zip(rec.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            assert!(err <= prev + 1e-12, "residual rose at l0 = {l0}");
            prev = err;
        }
    }

    #[test]
    fn hebbian_step_descends_on_average() {
        // small-η update with a fixed code may not descend on every single
        // draw, but must on the vast majority of random instances
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut descents = 0;
        for trial in 0..100 {
            let mut dict = Dictionary::random(9, 12, HomeoMode::None, trial);
            let patch = Array1::from_iter((0..9).map(|_| rng.random::<f64>() - 0.5));
            let code = code_mp(patch.view(), &dict, 3);
            let err_before = {
                let rec = code.synthesize(&dict);
                patch
                    .iter()
                    .zip(rec.iter())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            };
            hebbian_update(&mut dict, patch.view(), &code, 1e-3);
            let err_after = {
                let rec = code.synthesize(&dict);
                patch
                    .iter()
                    .zip(rec.iter())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            };
            if err_after <= err_before + 1e-12 {
                descents += 1;
            }
        }
        assert!(descents >= 97, "descent on only {descents}/100 instances");
    }

    #[test]
    fn population_rate_matches_l0_over_m() {
        let gt = Dictionary::random(64, 16, HomeoMode::None, 100).atoms;
        let mut source = SyntheticSparseSource::new(gt, 3, 2);
        let params = ShlParams {
            patch_side: 8,
            n_atoms: 16,
            l0_target: 4,
            n_steps: 300,
            batch_size: 16,
            homeo_mode: HomeoMode::HistogramEqualization,
            ..ShlParams::default()
        };
        let (_, log) = learn(&mut source, &params).unwrap();
        let total: u64 = log.pick_counts.iter().sum();
        let mean_rate = total as f64 / (300.0 * 16.0) / 16.0;
        // average activations per patch per atom ≈ l0/M
        let expected = params.l0_target as f64 / params.n_atoms as f64;
        assert!(
            (mean_rate - expected).abs() < 0.1 * expected,
            "mean rate {mean_rate} vs {expected}"
        );
    }

    #[test]
    fn parametric_costs_trivial_cases() {
        let dict = Dictionary::random(4, 6, HomeoMode::None, 9);
        let patch = array![0.5, -0.5, 0.25, 0.0];
        // a = 0
        let zero = SparseVector::new();
        let energy: f64 = patch.iter().map(|v| v * v).sum();
        let (c1, c0) = parametric_costs(patch.view(), &dict, &zero, 0.5, 2.0, 0.3, 1.0).unwrap();
        assert!((c1 - energy / 0.5).abs() < 1e-12);
        assert!((c0 - energy / 0.5).abs() < 1e-12);

        // perfect code on an atom, λ = 1 → C0 = ‖a‖₀
        let patch = dict.atoms.column(3).to_owned() * 2.0;
        let mut code = SparseVector::new();
        code.accumulate(3, 2.0);
        let (_, c0) = parametric_costs(patch.view(), &dict, &code, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((c0 - 1.0).abs() < 1e-12);

        // random instance vs direct evaluation
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let patch = Array1::from_iter((0..4).map(|_| rng.random::<f64>() - 0.5));
        let code = code_mp(patch.view(), &dict, 2);
        let (c1, c0) =
            parametric_costs(patch.view(), &dict, &code, 0.7, 1.3, 0.2, 0.9).unwrap();
        let rec = code.synthesize(&dict);
        let err: f64 = patch
            .iter()
            .zip(rec.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let mut c1_direct = err / (2.0 * 0.49);
        for &(_, a) in code.entries() {
            c1_direct += 1.3 * (1.0 + a * a / 0.04).ln();
        }
        let c0_direct = err / (2.0 * 0.49) + 0.9 * code.l0() as f64;
        assert!((c1 - c1_direct).abs() < 1e-10);
        assert!((c0 - c0_direct).abs() < 1e-10);

        assert!(parametric_costs(patch.view(), &dict, &code, 0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn efficiency_report_endpoints() {
        let l = 9;
        let mut atoms = Array2::zeros((l, l));
        for i in 0..l {
            atoms[(i, i)] = 1.0;
        }
        let dict = plain_dict(atoms);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let patches: Vec<Array1<f64>> = (0..5)
            .map(|_| Array1::from_iter((0..l).map(|_| rng.random::<f64>() - 0.5)))
            .collect();
        let report = efficiency_report(&dict, &patches, &[0, 3, l]);
        assert_eq!(report[0].1, 1.0);
        // orthonormal dictionary: exact at N = L
        assert!(report[2].1 < 1e-10);
        assert!(report[1].1 <= report[0].1);
    }

    #[test]
    fn columns_stay_normalized_through_learning() {
        let gt = Dictionary::random(64, 12, HomeoMode::None, 17).atoms;
        let mut source = SyntheticSparseSource::new(gt, 2, 3);
        for mode in [HomeoMode::None, HomeoMode::HistogramEqualization] {
            let params = ShlParams {
                patch_side: 8,
                n_atoms: 12,
                l0_target: 3,
                n_steps: 50,
                batch_size: 8,
                homeo_mode: mode,
                ..ShlParams::default()
            };
            let (dict, _) = learn(&mut source, &params).unwrap();
            assert!(dict.max_column_norm_deviation() < 1e-10);
        }
    }

    #[test]
    fn dictionary_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dict.bin");
        let dict = Dictionary::random(16, 9, HomeoMode::GainVariance, 42);
        dict.save(&path).unwrap();
        let back = Dictionary::load(&path).unwrap();
        assert_eq!(dict.atoms, back.atoms);
        assert_eq!(dict.gains, back.gains);
    }
}
