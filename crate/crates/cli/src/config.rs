//! Experiment configuration: built-in defaults, then `KPZLAB_SEED`, then an
//! optional TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use kpzlab::experiments::Quantity;
use kpzlab::field::FieldParams;
use kpzlab::limit::LimitParams;
use kpzlab::stats::TailMethod;

use crate::error::{config_err, CliError};

pub const SEED_VAR: &str = "KPZLAB_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum QuantityName {
    #[serde(rename = "pi")]
    #[value(name = "pi")]
    Pi,
    #[serde(rename = "W")]
    #[value(name = "W")]
    W,
}

impl From<QuantityName> for Quantity {
    fn from(q: QuantityName) -> Self {
        match q {
            QuantityName::Pi => Quantity::Path,
            QuantityName::W => Quantity::Weight,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TailMethodName {
    GeneralizedGamma,
    SurvivalRegression,
}

impl From<TailMethodName> for TailMethod {
    fn from(m: TailMethodName) -> Self {
        match m {
            TailMethodName::GeneralizedGamma => TailMethod::GeneralizedGamma,
            TailMethodName::SurvivalRegression => TailMethod::SurvivalRegression,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,

    // field
    pub n_lines: usize,
    pub delta: f64,
    /// Half-width of the spatial window.
    pub window: f64,
    pub grid_correction: bool,
    pub n_samples: usize,

    // variation
    pub quantity: QuantityName,
    /// Empty means the three exponents around the critical one.
    pub alphas: Vec<f64>,
    /// Time scales, multiples of `1 / n_lines`.
    pub eps_list: Vec<f64>,
    pub interval: [f64; 2],
    /// Replicas whose paths are written out.
    pub stored_paths: usize,

    // increments, tails, independence, environment
    pub s: f64,
    /// Scale with `eps^3` a whole number of line spacings.
    pub eps: f64,
    pub band: [f64; 2],
    pub tail_method: TailMethodName,
    pub times: [f64; 2],
    pub resamples: usize,
    pub r: f64,
    pub probes: Vec<f64>,
    pub level: f64,

    // holder
    /// Grid points per unit time.
    pub resolutions: Vec<usize>,

    // limit environment
    pub limit_n: usize,
    pub limit_window: f64,
    pub limit_delta: f64,
    pub limit_samples: usize,
    pub truncation_extra: f64,
    pub truncation_checked: usize,

    // invariance
    pub scaling_times: [f64; 2],
    pub flip_query: [f64; 4],

    // selftest
    pub oracle_instances: usize,
    pub triples: usize,
    pub geodesics: usize,
    pub gate_samples: usize,
    pub meander_samples: usize,
    pub ks_repeats: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let n = 512;
        Self {
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("out"),
            n_lines: n,
            delta: 1.0 / 256.0,
            window: 2.0,
            grid_correction: true,
            n_samples: 10_000,
            quantity: QuantityName::Pi,
            alphas: Vec::new(),
            eps_list: [4.0, 8.0, 16.0, 32.0].iter().map(|k| k / n as f64).collect(),
            interval: [0.0, 1.0],
            stored_paths: 1,
            s: 0.5,
            eps: (32.0 / n as f64).cbrt(),
            band: [0.5, 0.99],
            tail_method: TailMethodName::GeneralizedGamma,
            times: [0.25, 0.75],
            resamples: 1000,
            r: 0.5,
            probes: vec![0.5, 1.0],
            level: 0.01,
            resolutions: vec![8, 32, 128],
            limit_n: 64,
            limit_window: 6.0,
            limit_delta: 1.0 / 64.0,
            limit_samples: 10_000,
            truncation_extra: 2.0,
            truncation_checked: 1000,
            scaling_times: [0.5, 0.125],
            flip_query: [0.3, 0.0, -0.2, 0.4],
            oracle_instances: 200,
            triples: 1000,
            geodesics: 200,
            gate_samples: 100_000,
            meander_samples: 10_000,
            ks_repeats: 100,
        }
    }
}

/// Values given on the command line; `None` leaves the lower layers alone.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// Master seed (default: $KPZLAB_SEED, else 1).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub n_lines: Option<usize>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub window: Option<f64>,
    #[arg(long, global = true)]
    pub grid_correction: Option<bool>,
    #[arg(long, global = true)]
    pub n_samples: Option<usize>,
    #[arg(long, global = true)]
    pub quantity: Option<QuantityName>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', num_args = 1)]
    pub interval: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub stored_paths: Option<usize>,
    #[arg(long, global = true)]
    pub s: Option<f64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub band: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub tail_method: Option<TailMethodName>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub resamples: Option<usize>,
    #[arg(long, global = true)]
    pub r: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub probes: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub level: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub resolutions: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub limit_n: Option<usize>,
    #[arg(long, global = true)]
    pub limit_window: Option<f64>,
    #[arg(long, global = true)]
    pub limit_delta: Option<f64>,
    #[arg(long, global = true)]
    pub limit_samples: Option<usize>,
    #[arg(long, global = true)]
    pub truncation_extra: Option<f64>,
    #[arg(long, global = true)]
    pub truncation_checked: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub scaling_times: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub flip_query: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub oracle_instances: Option<usize>,
    #[arg(long, global = true)]
    pub triples: Option<usize>,
    #[arg(long, global = true)]
    pub geodesics: Option<usize>,
    #[arg(long, global = true)]
    pub gate_samples: Option<usize>,
    #[arg(long, global = true)]
    pub meander_samples: Option<usize>,
    #[arg(long, global = true)]
    pub ks_repeats: Option<usize>,
}

fn fixed<const N: usize>(key: &str, v: Vec<f64>) -> Result<[f64; N], CliError> {
    let len = v.len();
    v.try_into()
        .map_err(|_| CliError::Config(format!("--{key} takes {N} comma-separated values, got {len}")))
}

macro_rules! apply {
    ($cfg:ident, $o:ident; $($f:ident),*) => {
        $(if let Some(v) = $o.$f.clone() { $cfg.$f = v; })*
    };
}

impl ExperimentConfig {
    /// Defaults with the seed taken from `KPZLAB_SEED` when set.
    pub fn from_env() -> Result<Self, CliError> {
        let mut cfg = Self::default();
        if let Ok(v) = std::env::var(SEED_VAR) {
            cfg.seed = v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{SEED_VAR}={v:?} is not a 64-bit unsigned integer")))?;
        }
        Ok(cfg)
    }

    /// Layers the TOML file at `path` over `self`; keys absent from the file
    /// keep their current values.
    pub fn with_file(self, path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut base = toml::Table::try_from(&self).map_err(|e| CliError::Config(e.to_string()))?;
        let file: toml::Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for (k, v) in file {
            base.insert(k, v);
        }
        base.try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self, CliError> {
        apply!(self, o; seed, out_dir, n_lines, delta, window, grid_correction, n_samples, quantity,
            alphas, eps_list, stored_paths, s, eps, tail_method, resamples, r, probes, level,
            resolutions, limit_n, limit_window, limit_delta, limit_samples, truncation_extra,
            truncation_checked, oracle_instances, triples, geodesics, gate_samples, meander_samples,
            ks_repeats);
        if let Some(v) = o.interval.clone() {
            self.interval = fixed("interval", v)?;
        }
        if let Some(v) = o.band.clone() {
            self.band = fixed("band", v)?;
        }
        if let Some(v) = o.times.clone() {
            self.times = fixed("times", v)?;
        }
        if let Some(v) = o.scaling_times.clone() {
            self.scaling_times = fixed("scaling-times", v)?;
        }
        if let Some(v) = o.flip_query.clone() {
            self.flip_query = fixed("flip-query", v)?;
        }
        Ok(self)
    }

    /// Fills the exponent list from the quantity when it is empty.
    pub fn resolved(mut self) -> Self {
        if self.alphas.is_empty() {
            let c = Quantity::from(self.quantity).critical_alpha();
            self.alphas = match self.quantity {
                QuantityName::Pi => vec![c - 0.5, c, c + 0.5],
                QuantityName::W => vec![c - 1.0, c, c + 1.0],
            };
        }
        self
    }

    /// Positivity and grid-compatibility checks shared by all subcommands.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("delta", self.delta),
            ("window", self.window),
            ("eps", self.eps),
            ("r", self.r),
            ("level", self.level),
            ("limit_window", self.limit_window),
            ("limit_delta", self.limit_delta),
            ("truncation_extra", self.truncation_extra),
        ];
        for (k, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return config_err(format!("{k} must be positive, got {v}"));
            }
        }
        let counts = [
            ("n_lines", self.n_lines),
            ("limit_n", self.limit_n),
            ("resamples", self.resamples),
        ];
        for (k, v) in counts {
            if v == 0 {
                return config_err(format!("{k} must be positive"));
            }
        }
        if self.n_samples < 2 || self.limit_samples < 2 {
            return config_err("n_samples and limit_samples must be at least 2");
        }
        if self.level >= 1.0 {
            return config_err(format!("level must be below 1, got {}", self.level));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0)) {
            return config_err("alphas must be positive");
        }
        let step = 1.0 / self.n_lines as f64;
        for &e in &self.eps_list {
            let k = e / step;
            if !(e > 0.0) || (k - k.round()).abs() > 1e-9 * k.max(1.0) {
                return config_err(format!("eps_list entry {e} is not a positive multiple of 1/{}", self.n_lines));
            }
        }
        if self.eps_list.is_empty() {
            return config_err("eps_list is empty");
        }
        if self.resolutions.iter().any(|&r| r == 0) {
            return config_err("resolutions must be positive");
        }
        Ok(())
    }

    pub fn field_params(&self) -> FieldParams {
        FieldParams {
            grid_correction: self.grid_correction,
            ..FieldParams::symmetric(self.n_lines, self.window, self.delta)
        }
    }

    pub fn limit_params(&self) -> LimitParams {
        LimitParams {
            grid_correction: self.grid_correction,
            ..LimitParams::new(self.limit_n, self.limit_window, self.limit_delta)
        }
    }

    /// The configuration as TOML, one key per line.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }
}
