//! Efficiency metrics, corpus experiments and parameter sweeps; emits
//! plot-ready tables.
//!
//! The coding cost model counts address bits only: a representation of N
//! edges over a pyramid of M coefficients costs `N · log₂(M)` bits, i.e.
//! `N · log₂(M) / L` bits per pixel.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::imagecore::{apply_circular_mask, whiten, Image, WhiteningParams};
use crate::loggabor::{max_feasible_scales, BankParams, LogGaborBank};
use crate::pursuit::{energy_curve, extract, PursuitParams};
use crate::{Error, Result};

/// One (image, sparsity) sample of the efficiency experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyRecord {
    pub image_id: String,
    pub n: usize,
    /// Relative residual energy after `n` steps.
    pub e_n: f64,
    pub bits_per_pixel: f64,
}

/// Log-spaced sparsity grid 0, 1, 2, 4, ..., `max` (always includes `max`).
pub fn log_grid(max: usize) -> Vec<usize> {
    let mut grid = vec![0];
    let mut n = 1;
    while n < max {
        grid.push(n);
        n *= 2;
    }
    grid.push(max);
    grid.dedup();
    grid
}

/// Runs the extraction on every corpus image and records the residual
/// energy (from the coefficient identity) and the address-bit cost at each
/// grid count. Inputs must already be whitened and masked consistently.
pub fn efficiency_experiment(
    corpus: &[(String, Image)],
    bank: &LogGaborBank,
    params: &PursuitParams,
    grid: &[usize],
) -> Result<Vec<EfficiencyRecord>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let max_n = grid.iter().copied().max().unwrap_or(0);
    let run_params = PursuitParams {
        max_edges: max_n,
        energy_threshold: 0.0,
        ..*params
    };
    let m = bank.total_coefficients() as f64;
    let l = (bank.image_size() * bank.image_size()) as f64;
    let bits_per_edge = m.log2();
    // embarrassingly parallel over images; collection keeps corpus order
    let per_image: Result<Vec<Vec<EfficiencyRecord>>> = corpus
        .par_iter()
        .map(|(id, img)| {
            let list = extract(img, bank, &run_params)?;
            let curve = energy_curve(&list, run_params.alpha);
            Ok(grid
                .iter()
                .map(|&n| EfficiencyRecord {
                    image_id: id.clone(),
                    n,
                    e_n: curve[n.min(curve.len() - 1)],
                    bits_per_pixel: n as f64 * bits_per_edge / l,
                })
                .collect())
        })
        .collect();
    Ok(per_image?.into_iter().flatten().collect())
}

/// Mean ± std of `E_N` across images at each grid count.
pub fn aggregate(records: &[EfficiencyRecord], grid: &[usize]) -> Vec<(usize, f64, f64)> {
    grid.iter()
        .map(|&n| {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| r.n == n)
                .map(|r| r.e_n)
                .collect();
            let count = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / count;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
            (n, mean, var.sqrt())
        })
        .collect()
}

pub fn records_to_csv(records: &[EfficiencyRecord]) -> String {
    let mut out = String::from("image_id,N,E_N,bpp\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.image_id, r.n, r.e_n, r.bits_per_pixel
        ));
    }
    out
}

/// Code length in bits to reach a target extracted-energy fraction on one
/// image, interpolated linearly in log N between pursuit steps.
pub fn code_length_bits(
    img: &Image,
    bank: &LogGaborBank,
    params: &PursuitParams,
    target_extraction: f64,
) -> Result<f64> {
    let residual_target = 1.0 - target_extraction;
    let run_params = PursuitParams {
        energy_threshold: 0.0,
        ..*params
    };
    let list = extract(img, bank, &run_params)?;
    let curve = energy_curve(&list, run_params.alpha);
    let k = curve
        .iter()
        .position(|&e| e <= residual_target)
        .ok_or_else(|| {
            Error::invalid(format!(
                "extraction reached only {:.3} residual after {} steps (target {residual_target:.3})",
                curve.last().unwrap(),
                curve.len() - 1
            ))
        })?;
    let n_star = if k <= 1 {
        1.0
    } else {
        let (e_lo, e_hi) = (curve[k - 1], curve[k]);
        let frac = if e_lo > e_hi {
            (e_lo - residual_target) / (e_lo - e_hi)
        } else {
            1.0
        };
        let log_n = ((k - 1) as f64).ln() + frac * ((k as f64).ln() - ((k - 1) as f64).ln());
        log_n.exp()
    };
    Ok(n_star * (bank.total_coefficients() as f64).log2())
}

/// Which bank parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    BF,
    BTheta,
    NOrientations,
    NScales,
    ScaleRatio,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::BF => "B_f",
            SweepVariable::BTheta => "B_theta",
            SweepVariable::NOrientations => "n_orientations",
            SweepVariable::NScales => "n_scales",
            SweepVariable::ScaleRatio => "scale_ratio",
        }
    }
}

/// Parameter-sweep specification.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    /// Energy fraction whose code length is compared (default 0.85).
    pub target_extraction: f64,
    pub baseline: BankParams,
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, values: Vec<f64>, baseline: BankParams) -> Self {
        SweepSpec {
            variable,
            values,
            target_extraction: 0.85,
            baseline,
        }
    }

    /// Bank parameters with the swept variable overridden.
    ///
    /// When sweeping the scale ratio, the scale count is re-derived so that
    /// the pyramid spans the same frequency band as the baseline; comparing
    /// code lengths across ratios is only meaningful at matched coverage.
    pub fn bank_for_value(&self, value: f64, image_size: usize) -> BankParams {
        let mut p = self.baseline.clone();
        match self.variable {
            SweepVariable::BF => p.b_f = value,
            SweepVariable::BTheta => p.b_theta = value,
            SweepVariable::NOrientations => p.n_orientations = value.round().max(1.0) as usize,
            SweepVariable::NScales => p.n_scales = value.round().max(1.0) as usize,
            SweepVariable::ScaleRatio => {
                p.scale_ratio = value;
                if value > 1.0 {
                    let f_min_baseline = self
                        .baseline
                        .center_frequency(self.baseline.n_scales.saturating_sub(1));
                    let span = (p.f_max / f_min_baseline).ln() / value.ln();
                    let wanted = 1 + span.round().max(0.0) as usize;
                    p.n_scales = wanted.min(max_feasible_scales(p.f_max, value, image_size));
                }
            }
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("sweep grid is empty"));
        }
        if !(self.target_extraction > 0.0 && self.target_extraction < 1.0) {
            return Err(Error::invalid("target extraction must be in (0, 1)"));
        }
        Ok(())
    }
}

/// One sweep row: relative code length (value / baseline) aggregated over
/// the corpus, or the failure that prevented it.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub result: std::result::Result<(f64, f64), String>,
}

/// Ratio of the code length reaching the target extraction with each swept
/// value to the baseline's, averaged over the corpus (mean, per-image std).
///
/// A grid value whose bank cannot be built (or whose extraction cannot
/// reach the target) is reported as a failed row, never silently skipped.
pub fn parameter_sweep(
    corpus: &[(String, Image)],
    spec: &SweepSpec,
    pursuit: &PursuitParams,
) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let image_size = corpus[0].1.size();
    let baseline_bank = LogGaborBank::build(spec.baseline.clone(), image_size)?;
    let baseline_bits: Vec<f64> = corpus
        .par_iter()
        .map(|(_, img)| code_length_bits(img, &baseline_bank, pursuit, spec.target_extraction))
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let params = spec.bank_for_value(value, image_size);
        let result = (|| -> Result<(f64, f64)> {
            let bank = if params == spec.baseline {
                None // reuse the baseline bank (and its deterministic runs)
            } else {
                Some(LogGaborBank::build(params.clone(), image_size)?)
            };
            let bank_ref = bank.as_ref().unwrap_or(&baseline_bank);
            let gains: Vec<f64> = corpus
                .par_iter()
                .zip(baseline_bits.par_iter())
                .map(|((_, img), &base)| {
                    code_length_bits(img, bank_ref, pursuit, spec.target_extraction)
                        .map(|bits| bits / base)
                })
                .collect::<Result<_>>()?;
            let count = gains.len() as f64;
            let mean = gains.iter().sum::<f64>() / count;
            let var = gains.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / count;
            Ok((mean, var.sqrt()))
        })();
        rows.push(SweepRow {
            value,
            result: result.map_err(|e| e.to_string()),
        });
    }
    Ok(rows)
}

pub fn sweep_to_csv(variable: SweepVariable, rows: &[SweepRow]) -> String {
    let mut out = String::from("param,value,gain_mean,gain_std\n");
    for row in rows {
        match &row.result {
            Ok((mean, std)) => {
                out.push_str(&format!("{},{},{},{}\n", variable.name(), row.value, mean, std))
            }
            Err(_) => out.push_str(&format!("{},{},nan,nan\n", variable.name(), row.value)),
        }
    }
    out
}

/// Clean-versus-noisy efficiency tables.
#[derive(Debug, Clone)]
pub struct NoiseReport {
    pub clean: Vec<EfficiencyRecord>,
    pub noisy: Vec<EfficiencyRecord>,
}

/// Adds pixelwise Gaussian noise with variance equal to each image's
/// variance (halving the signal-to-noise ratio), runs the whitening/masking
/// pipeline on both versions and returns paired efficiency tables.
///
/// With `snr_halving` off the "noisy" table is computed from the clean
/// pipeline as well, so the two tables are identical.
pub fn noise_robustness(
    corpus_raw: &[(String, Image)],
    bank: &LogGaborBank,
    params: &PursuitParams,
    whitening: &WhiteningParams,
    grid: &[usize],
    snr_halving: bool,
    seed: u64,
) -> Result<NoiseReport> {
    if corpus_raw.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clean_imgs = Vec::with_capacity(corpus_raw.len());
    let mut noisy_imgs = Vec::with_capacity(corpus_raw.len());
    for (id, img) in corpus_raw {
        let clean = apply_circular_mask(&whiten(img, whitening)?);
        let noisy = if snr_halving {
            let n = img.size();
            let sigma = (img.energy() / (n * n) as f64).sqrt();
            let mut data = img.data().to_vec();
            for v in data.iter_mut() {
                let u1: f64 = rng.random::<f64>().max(1e-300);
                let u2: f64 = rng.random();
                *v += sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            }
            let mut img = Image::from_vec(n, data)?;
            img.subtract_mean();
            apply_circular_mask(&whiten(&img, whitening)?)
        } else {
            clean.clone()
        };
        clean_imgs.push((id.clone(), clean));
        noisy_imgs.push((id.clone(), noisy));
    }
    Ok(NoiseReport {
        clean: efficiency_experiment(&clean_imgs, bank, params, grid)?,
        noisy: efficiency_experiment(&noisy_imgs, bank, params, grid)?,
    })
}

/// Bits per pixel at which the mean `E_N` curve crosses `residual`,
/// log-interpolated on the grid.
pub fn bpp_at_residual(
    records: &[EfficiencyRecord],
    grid: &[usize],
    residual: f64,
    bank: &LogGaborBank,
) -> Option<f64> {
    let agg = aggregate(records, grid);
    let l = (bank.image_size() * bank.image_size()) as f64;
    let bits_per_edge = (bank.total_coefficients() as f64).log2();
    for w in agg.windows(2) {
        let (n0, e0, _) = w[0];
        let (n1, e1, _) = w[1];
        if e0 >= residual && e1 <= residual && n1 > 0 {
            let n0f = (n0.max(1)) as f64;
            let frac = if e0 > e1 { (e0 - residual) / (e0 - e1) } else { 1.0 };
            let log_n = n0f.ln() + frac * ((n1 as f64).ln() - n0f.ln());
            return Some(log_n.exp() * bits_per_edge / l);
        }
    }
    None
}
