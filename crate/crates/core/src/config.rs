//! Run configuration shared by the command-line tool: one `key = value`
//! text file covering every module's parameters, with lossless round-trips.

use std::path::PathBuf;

use crate::loggabor::BankParams;
use crate::priors::CoocParams;
use crate::pursuit::PursuitParams;
use crate::shl::{HomeoMode, ShlParams};
use crate::{Error, Result};

/// Whitening configuration in size-independent form: the cutoff as a
/// fraction of Nyquist plus the roll-off exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhiteningConfig {
    pub f0_nyquist: f64,
    pub steepness: f64,
}

impl Default for WhiteningConfig {
    fn default() -> Self {
        WhiteningConfig {
            f0_nyquist: 0.45,
            steepness: 4.0,
        }
    }
}

impl WhiteningConfig {
    pub fn for_size(&self, size: usize) -> crate::imagecore::WhiteningParams {
        crate::imagecore::WhiteningParams {
            f0: self.f0_nyquist * size as f64 / 2.0,
            steepness: self.steepness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

/// Complete run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bank: BankParams,
    pub pursuit: PursuitParams,
    pub shl: ShlParams,
    pub cooc: CoocParams,
    pub whitening: WhiteningConfig,
    pub seed: u64,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            bank: BankParams::default(),
            pursuit: PursuitParams::default(),
            shl: ShlParams::default(),
            cooc: CoocParams::default(),
            whitening: WhiteningConfig::default(),
            seed: 0,
            paths: Paths::default(),
        }
    }
}

fn homeo_name(mode: HomeoMode) -> &'static str {
    match mode {
        HomeoMode::None => "none",
        HomeoMode::GainVariance => "gain_variance",
        HomeoMode::HistogramEqualization => "histogram_equalization",
    }
}

pub fn parse_homeo_mode(s: &str) -> Result<HomeoMode> {
    match s {
        "none" => Ok(HomeoMode::None),
        "gain_variance" | "gain" => Ok(HomeoMode::GainVariance),
        "histogram_equalization" | "histogram" => Ok(HomeoMode::HistogramEqualization),
        other => Err(Error::invalid(format!("unknown homeostasis mode '{other}'"))),
    }
}

impl RunConfig {
    /// Serializes to the canonical `key = value` text form. `Display`
    /// formatting of floats is shortest-roundtrip, so parsing the output
    /// reproduces the configuration exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let orientations = match &self.bank.orientations {
            None => "auto".to_string(),
            Some(v) => v
                .iter()
                .map(|t| format!("{t}"))
                .collect::<Vec<_>>()
                .join(","),
        };
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("bank.n_scales = {}\n", self.bank.n_scales));
        s.push_str(&format!(
            "bank.n_orientations = {}\n",
            self.bank.n_orientations
        ));
        s.push_str(&format!("bank.b_f = {}\n", self.bank.b_f));
        s.push_str(&format!("bank.b_theta = {}\n", self.bank.b_theta));
        s.push_str(&format!("bank.scale_ratio = {}\n", self.bank.scale_ratio));
        s.push_str(&format!("bank.f_max = {}\n", self.bank.f_max));
        s.push_str(&format!("bank.orientations = {orientations}\n"));
        s.push_str(&format!("pursuit.alpha = {}\n", self.pursuit.alpha));
        s.push_str(&format!("pursuit.max_edges = {}\n", self.pursuit.max_edges));
        s.push_str(&format!(
            "pursuit.energy_threshold = {}\n",
            self.pursuit.energy_threshold
        ));
        s.push_str(&format!(
            "pursuit.tie_epsilon = {}\n",
            self.pursuit.tie_epsilon
        ));
        s.push_str(&format!("shl.patch_side = {}\n", self.shl.patch_side));
        s.push_str(&format!("shl.n_atoms = {}\n", self.shl.n_atoms));
        s.push_str(&format!("shl.eta = {}\n", self.shl.eta));
        s.push_str(&format!("shl.l0_target = {}\n", self.shl.l0_target));
        s.push_str(&format!("shl.n_steps = {}\n", self.shl.n_steps));
        s.push_str(&format!("shl.batch_size = {}\n", self.shl.batch_size));
        s.push_str(&format!(
            "shl.homeo_mode = {}\n",
            homeo_name(self.shl.homeo_mode)
        ));
        s.push_str(&format!("shl.homeo_rate = {}\n", self.shl.homeo_rate));
        s.push_str(&format!("shl.seed = {}\n", self.shl.seed));
        s.push_str(&format!("cooc.eta = {}\n", self.cooc.eta));
        s.push_str(&format!(
            "cooc.neighborhood_radius = {}\n",
            self.cooc.neighborhood_radius
        ));
        s.push_str(&format!("cooc.epsilon_prob = {}\n", self.cooc.epsilon_prob));
        s.push_str(&format!(
            "whitening.f0_nyquist = {}\n",
            self.whitening.f0_nyquist
        ));
        s.push_str(&format!(
            "whitening.steepness = {}\n",
            self.whitening.steepness
        ));
        if let Some(p) = &self.paths.corpus {
            s.push_str(&format!("paths.corpus = {}\n", p.display()));
        }
        if let Some(p) = &self.paths.out_dir {
            s.push_str(&format!("paths.out_dir = {}\n", p.display()));
        }
        s
    }

    /// Parses `key = value` text; `#` starts a comment, unknown keys are
    /// rejected, missing keys keep their defaults.
    pub fn from_text(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::invalid(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` override (the CLI's flag-beats-config rule
    /// funnels through here as well).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::invalid(format!("bad value '{value}' for {key}")))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "bank.n_scales" => self.bank.n_scales = num(key, value)?,
            "bank.n_orientations" => self.bank.n_orientations = num(key, value)?,
            "bank.b_f" => self.bank.b_f = num(key, value)?,
            "bank.b_theta" => self.bank.b_theta = num(key, value)?,
            "bank.scale_ratio" => self.bank.scale_ratio = num(key, value)?,
            "bank.f_max" => self.bank.f_max = num(key, value)?,
            "bank.orientations" => {
                self.bank.orientations = if value == "auto" {
                    None
                } else {
                    Some(
                        value
                            .split(',')
                            .map(|v| num("bank.orientations", v.trim()))
                            .collect::<Result<Vec<f64>>>()?,
                    )
                }
            }
            "pursuit.alpha" => self.pursuit.alpha = num(key, value)?,
            "pursuit.max_edges" => self.pursuit.max_edges = num(key, value)?,
            "pursuit.energy_threshold" => self.pursuit.energy_threshold = num(key, value)?,
            "pursuit.tie_epsilon" => self.pursuit.tie_epsilon = num(key, value)?,
            "shl.patch_side" => self.shl.patch_side = num(key, value)?,
            "shl.n_atoms" => self.shl.n_atoms = num(key, value)?,
            "shl.eta" => self.shl.eta = num(key, value)?,
            "shl.l0_target" => self.shl.l0_target = num(key, value)?,
            "shl.n_steps" => self.shl.n_steps = num(key, value)?,
            "shl.batch_size" => self.shl.batch_size = num(key, value)?,
            "shl.homeo_mode" => self.shl.homeo_mode = parse_homeo_mode(value)?,
            "shl.homeo_rate" => self.shl.homeo_rate = num(key, value)?,
            "shl.seed" => self.shl.seed = num(key, value)?,
            "cooc.eta" => self.cooc.eta = num(key, value)?,
            "cooc.neighborhood_radius" => self.cooc.neighborhood_radius = num(key, value)?,
            "cooc.epsilon_prob" => self.cooc.epsilon_prob = num(key, value)?,
            "whitening.f0_nyquist" => self.whitening.f0_nyquist = num(key, value)?,
            "whitening.steepness" => self.whitening.steepness = num(key, value)?,
            "paths.corpus" => self.paths.corpus = Some(PathBuf::from(value)),
            "paths.out_dir" => self.paths.out_dir = Some(PathBuf::from(value)),
            other => return Err(Error::invalid(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        RunConfig::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrip_is_lossless() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn nontrivial_roundtrip_is_lossless() {
        let mut cfg = RunConfig::default();
        cfg.seed = 99;
        cfg.bank.b_theta = 0.123456789012345678;
        cfg.bank.orientations = Some(vec![-1.2, 0.0, 0.7853981633974483]);
        cfg.pursuit.alpha = 0.95;
        cfg.shl.homeo_mode = HomeoMode::GainVariance;
        cfg.paths.corpus = Some(PathBuf::from("data/corpus/manifest.txt"));
        let text = cfg.to_text();
        let back = RunConfig::from_text(&text).unwrap();
        assert_eq!(cfg, back);
        // and the canonical text is a fixed point
        assert_eq!(text, back.to_text());
    }

    #[test]
    fn unknown_keys_and_malformed_lines_are_rejected() {
        assert!(RunConfig::from_text("bogus.key = 1\n").is_err());
        assert!(RunConfig::from_text("no equals sign\n").is_err());
        assert!(RunConfig::from_text("pursuit.alpha = not_a_number\n").is_err());
        // comments and blanks are fine
        let cfg = RunConfig::from_text("# comment\n\nseed = 5 # trailing\n").unwrap();
        assert_eq!(cfg.seed, 5);
    }
}
