//! Experiment configuration in engineering units and its conversion to the
//! SI model used by the library.

use std::collections::BTreeMap;
use std::path::Path;

use ppp_energy::netmodel::kappa_for_carrier;
use ppp_energy::optimizer::OptimizationBounds;
use ppp_energy::units::{
    db_to_linear, dbm_to_w, density_to_radius, linear_to_db, per_km2_to_per_m2, radius_to_density, w_to_dbm,
};
use ppp_energy::{PowerProfile, SystemParams};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("key {key}: cannot parse {value:?}")]
    BadValue { key: String, value: String },
    #[error("unknown preset {0:?}; available: high-exponent-sparse")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Which variable the Monte Carlo validation sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McAxis {
    Power,
    CellRadius,
}

/// All settings of a run, in the units used in configuration files.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub beta: f64,
    pub fc_ghz: f64,
    pub bw_mhz: f64,
    pub n0_dbm_hz: f64,
    pub p_circ_dbm: f64,
    pub p_idle_dbm: f64,
    pub p_tx_dbm: f64,
    pub r_cell_m: f64,
    pub lambda_mt_per_km2: f64,
    pub gamma_d_db: f64,
    pub gamma_a_db: f64,
    pub alpha: f64,

    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    pub r_cell_min_m: f64,
    pub r_cell_max_m: f64,
    pub root_tol: f64,
    pub eps: f64,
    pub max_alt_iters: usize,
    pub initial_r_cell_m: f64,
    /// Relative step below which the joint optimizer may stop; zero disables the check.
    pub alt_step_tol: f64,

    /// Sweep range in the unit of the swept variable; `None` picks the command default.
    pub sweep_min: Option<f64>,
    pub sweep_max: Option<f64>,
    pub sweep_points: Option<usize>,
    /// Points per axis of the brute-force reference; zero disables it.
    pub grid_points: usize,
    pub trials: usize,
    pub mc_axis: McAxis,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            beta: 3.5,
            fc_ghz: 2.1,
            bw_mhz: 20.0,
            n0_dbm_hz: -174.0,
            p_circ_dbm: 51.14,
            p_idle_dbm: 48.75,
            p_tx_dbm: 43.0,
            r_cell_m: 250.0,
            lambda_mt_per_km2: 121.0,
            gamma_d_db: 5.0,
            gamma_a_db: 5.0,
            alpha: 3.5,
            p_min_dbm: -20.0,
            p_max_dbm: 60.0,
            r_cell_min_m: 10.0,
            r_cell_max_m: 2000.0,
            root_tol: 1e-12,
            eps: 1e-6,
            max_alt_iters: 100,
            initial_r_cell_m: 2000.0,
            alt_step_tol: 0.0,
            sweep_min: None,
            sweep_max: None,
            sweep_points: None,
            grid_points: 0,
            trials: 1000,
            mc_axis: McAxis::Power,
        }
    }
}

/// The setup in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    pub params: SystemParams,
    pub power: PowerProfile,
    pub lambda_bs: f64,
    pub bounds: OptimizationBounds,
    pub initial_lambda: f64,
}

pub const PRESETS: [&str; 1] = ["high-exponent-sparse"];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: value.into() })
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim();
        match key {
            "beta" => self.beta = parse(key, value)?,
            "fc_ghz" => self.fc_ghz = parse(key, value)?,
            "bw_mhz" => self.bw_mhz = parse(key, value)?,
            "n0_dbm_hz" => self.n0_dbm_hz = parse(key, value)?,
            "p_circ_dbm" => self.p_circ_dbm = parse(key, value)?,
            "p_idle_dbm" => self.p_idle_dbm = parse(key, value)?,
            "p_tx_dbm" => self.p_tx_dbm = parse(key, value)?,
            "r_cell_m" => self.r_cell_m = parse(key, value)?,
            "lambda_mt_per_km2" => self.lambda_mt_per_km2 = parse(key, value)?,
            "gamma_d_db" => self.gamma_d_db = parse(key, value)?,
            "gamma_a_db" => self.gamma_a_db = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "p_min_dbm" => self.p_min_dbm = parse(key, value)?,
            "p_max_dbm" => self.p_max_dbm = parse(key, value)?,
            "r_cell_min_m" => self.r_cell_min_m = parse(key, value)?,
            "r_cell_max_m" => self.r_cell_max_m = parse(key, value)?,
            "root_tol" => self.root_tol = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "max_alt_iters" => self.max_alt_iters = parse(key, value)?,
            "initial_r_cell_m" => self.initial_r_cell_m = parse(key, value)?,
            "alt_step_tol" => self.alt_step_tol = parse(key, value)?,
            "sweep_min" => self.sweep_min = Some(parse(key, value)?),
            "sweep_max" => self.sweep_max = Some(parse(key, value)?),
            "sweep_points" => self.sweep_points = Some(parse(key, value)?),
            "grid_points" => self.grid_points = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "mc_axis" => {
                self.mc_axis = match value.trim() {
                    "power" => McAxis::Power,
                    "cell_radius" => McAxis::CellRadius,
                    _ => return Err(ConfigError::BadValue { key: key.into(), value: value.into() }),
                }
            }
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.into() })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
        self.apply_text(&text)
    }

    pub fn apply_preset(&mut self, name: &str) -> Result<(), ConfigError> {
        match name {
            // Steep path loss and a sparse population: the optimal power is
            // non-monotonic in the cell radius.
            "high-exponent-sparse" => {
                self.beta = 6.5;
                self.lambda_mt_per_km2 = 21.0;
            }
            _ => return Err(ConfigError::UnknownPreset(name.into())),
        }
        Ok(())
    }

    pub fn params(&self) -> SystemParams {
        SystemParams {
            beta: self.beta,
            kappa: kappa_for_carrier(self.fc_ghz * 1e9),
            bandwidth_hz: self.bw_mhz * 1e6,
            noise_psd: dbm_to_w(self.n0_dbm_hz),
            gamma_d: db_to_linear(self.gamma_d_db),
            gamma_a: db_to_linear(self.gamma_a_db),
            alpha: self.alpha,
            lambda_mt: per_km2_to_per_m2(self.lambda_mt_per_km2),
        }
    }

    pub fn power(&self) -> PowerProfile {
        PowerProfile {
            p_tx_w: dbm_to_w(self.p_tx_dbm),
            p_circ_w: dbm_to_w(self.p_circ_dbm),
            p_idle_w: dbm_to_w(self.p_idle_dbm),
        }
    }

    pub fn bounds(&self) -> OptimizationBounds {
        OptimizationBounds {
            p_min_w: dbm_to_w(self.p_min_dbm),
            p_max_w: dbm_to_w(self.p_max_dbm),
            lambda_min: radius_to_density(self.r_cell_max_m),
            lambda_max: radius_to_density(self.r_cell_min_m),
            root_tol: self.root_tol,
            alt_eps: self.eps,
            alt_step_tol: self.alt_step_tol,
            max_alt_iters: self.max_alt_iters,
        }
    }

    /// Converts to SI units and validates.
    pub fn to_model(&self) -> Result<Model, ConfigError> {
        let model = Model {
            params: self.params(),
            power: self.power(),
            lambda_bs: radius_to_density(self.r_cell_m),
            bounds: self.bounds(),
            initial_lambda: radius_to_density(self.initial_r_cell_m),
        };
        let invalid = |e: ppp_energy::Error| ConfigError::Invalid(e.to_string());
        model.params.validate().map_err(invalid)?;
        model.power.validate().map_err(invalid)?;
        model.bounds.validate().map_err(invalid)?;
        if !(self.r_cell_m > 0.0 && self.r_cell_m.is_finite()) {
            return Err(ConfigError::Invalid(format!("r_cell_m must be positive, got {}", self.r_cell_m)));
        }
        if !(model.initial_lambda >= model.bounds.lambda_min && model.initial_lambda <= model.bounds.lambda_max) {
            return Err(ConfigError::Invalid("initial_r_cell_m must lie within the cell radius bounds".into()));
        }
        Ok(model)
    }

    /// Physical settings recovered from SI values, the inverse of [`Self::to_model`].
    pub fn physical_from_si(params: &SystemParams, power: &PowerProfile, lambda_bs: f64) -> BTreeMap<&'static str, f64> {
        let fc_ghz = params.kappa.sqrt() * 3e8 / (4.0 * std::f64::consts::PI) / 1e9;
        BTreeMap::from([
            ("beta", params.beta),
            ("fc_ghz", fc_ghz),
            ("bw_mhz", params.bandwidth_hz / 1e6),
            ("n0_dbm_hz", w_to_dbm(params.noise_psd)),
            ("p_circ_dbm", w_to_dbm(power.p_circ_w)),
            ("p_idle_dbm", w_to_dbm(power.p_idle_w)),
            ("p_tx_dbm", w_to_dbm(power.p_tx_w)),
            ("r_cell_m", density_to_radius(lambda_bs)),
            ("lambda_mt_per_km2", params.lambda_mt * 1e6),
            ("gamma_d_db", linear_to_db(params.gamma_d)),
            ("gamma_a_db", linear_to_db(params.gamma_a)),
            ("alpha", params.alpha),
        ])
    }

    /// The physical settings as they appear in a configuration file.
    pub fn physical(&self) -> BTreeMap<&'static str, f64> {
        BTreeMap::from([
            ("beta", self.beta),
            ("fc_ghz", self.fc_ghz),
            ("bw_mhz", self.bw_mhz),
            ("n0_dbm_hz", self.n0_dbm_hz),
            ("p_circ_dbm", self.p_circ_dbm),
            ("p_idle_dbm", self.p_idle_dbm),
            ("p_tx_dbm", self.p_tx_dbm),
            ("r_cell_m", self.r_cell_m),
            ("lambda_mt_per_km2", self.lambda_mt_per_km2),
            ("gamma_d_db", self.gamma_d_db),
            ("gamma_a_db", self.gamma_a_db),
            ("alpha", self.alpha),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_match_library_reference() {
        let cfg = ExperimentConfig::default();
        let m = cfg.to_model().unwrap();
        let r = SystemParams::reference();
        assert!((m.params.kappa - r.kappa).abs() < 1e-9);
        assert!((m.params.gamma_d - r.gamma_d).abs() < 1e-15);
        assert_eq!(m.power, PowerProfile::reference());
        assert!((m.lambda_bs - 5.092_958_178_940_651e-6).abs() < 1e-18);
    }

    #[test]
    fn parses_comments_and_rejects_unknown_keys() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("# setup\nbeta = 4.0  # steeper\n\nr_cell_m=300\n").unwrap();
        assert_eq!((cfg.beta, cfg.r_cell_m), (4.0, 300.0));
        assert!(matches!(cfg.apply_text("nope=1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(cfg.apply_text("beta"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(cfg.apply_text("beta=x"), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let cfg = ExperimentConfig { beta: 2.0, ..ExperimentConfig::default() };
        assert!(cfg.to_model().is_err());
    }

    #[test]
    fn preset_sets_steep_sparse_case() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_preset("high-exponent-sparse").unwrap();
        assert_eq!((cfg.beta, cfg.lambda_mt_per_km2), (6.5, 21.0));
        assert!(cfg.apply_preset("other").is_err());
    }

    fn six_digits(a: f64, b: f64) -> bool {
        (a - b).abs() <= 5e-7 * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() < 1e-9
    }

    proptest! {
        #[test]
        fn unit_conversion_round_trips(
            beta in 2.1f64..8.0, fc in 0.5f64..60.0, bw in 1.0f64..400.0, n0 in -180.0f64..-150.0,
            pc in 20.0f64..60.0, pi in 10.0f64..60.0, pt in -30.0f64..70.0, r in 5.0f64..5000.0,
            lmt in 0.1f64..10000.0, gd in -20.0f64..30.0, ga in -20.0f64..30.0,
        ) {
            let cfg = ExperimentConfig {
                beta, fc_ghz: fc, bw_mhz: bw, n0_dbm_hz: n0, p_circ_dbm: pc, p_idle_dbm: pi, p_tx_dbm: pt,
                r_cell_m: r, lambda_mt_per_km2: lmt, gamma_d_db: gd, gamma_a_db: ga, ..ExperimentConfig::default()
            };
            let back = ExperimentConfig::physical_from_si(&cfg.params(), &cfg.power(), radius_to_density(r));
            for (k, v) in cfg.physical() {
                prop_assert!(six_digits(v, back[k]), "{k}: {v} vs {}", back[k]);
            }
        }
    }
}
