//! Experiment commands. Each produces one table with a header row and one
//! row per sweep point and load model, ordered by the sweep variable.

use clap::ValueEnum;
use ppp_energy::mcsim::{estimate_campaign, McEstimate, Scenario, SimConfig};
use ppp_energy::metrics::{self, NetworkMetrics};
use ppp_energy::optimizer::{
    brute_force_grid, joint_optimize, optimal_density, optimal_power, Clamp, GridSearch, OptimumReport,
};
use ppp_energy::units::{density_to_radius, per_km2_to_per_m2, radius_to_density, w_to_dbm};
use ppp_energy::{Error, LoadModel, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ConfigError, ExperimentConfig, McAxis, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Closed-form metrics at one operating point.
    Eval,
    /// Metrics and the optimal cell radius versus transmit power.
    SweepPower,
    /// Metrics and the optimal transmit power versus cell radius.
    SweepDensity,
    /// Joint optimum versus the mean distance between MTs.
    SweepMtDensity,
    /// Joint optimum versus the common detection/decoding threshold.
    SweepThreshold,
    /// Joint optimum at the configured setup.
    Optimize,
    /// PSE and EE of the joint optimum as the threshold varies.
    Tradeoff,
    /// Closed forms against Monte Carlo estimates.
    McValidate,
    /// Iterations of the joint optimizer versus its tolerance.
    ConvergenceStudy,
}

/// Run settings that come from flags rather than the configuration.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub loads: Vec<LoadModel>,
    pub seed: u64,
    pub mc_realizations: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self { loads: LoadModel::ALL.to_vec(), seed: sim.seed, mc_realizations: sim.realizations }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn blanks(n: usize) -> Vec<String> {
    vec![String::new(); n]
}

fn clamp_name(c: Clamp) -> &'static str {
    match c {
        Clamp::Interior => "interior",
        Clamp::AtPMin => "p_min",
        Clamp::AtPMax => "p_max",
        Clamp::AtLambdaMin => "lambda_min",
        Clamp::AtLambdaMax => "lambda_max",
        Clamp::MultipleClamps => "multiple",
    }
}

#[derive(Clone, Copy)]
enum Spacing {
    Linear,
    Log,
}

/// Sweep values from the configuration, falling back to the command default.
fn sweep_values(cfg: &ExperimentConfig, default: (f64, f64, usize), spacing: Spacing) -> Result<Vec<f64>, ConfigError> {
    let lo = cfg.sweep_min.unwrap_or(default.0);
    let hi = cfg.sweep_max.unwrap_or(default.1);
    let n = cfg.sweep_points.unwrap_or(default.2);
    if n == 0 || !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(ConfigError::Invalid(format!("sweep needs sweep_min <= sweep_max and sweep_points >= 1, got {lo}..{hi} x {n}")));
    }
    if matches!(spacing, Spacing::Log) && lo <= 0.0 {
        return Err(ConfigError::Invalid(format!("sweep over a positive quantity starts at {lo}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            match spacing {
                _ if i + 1 == n => hi,
                Spacing::Linear => lo + (hi - lo) * t,
                Spacing::Log => 10f64.powf(lo.log10() + (hi.log10() - lo.log10()) * t),
            }
        })
        .collect())
}

fn network(model: &Model) -> Result<Network, ConfigError> {
    Network::new(model.params).map_err(|e| ConfigError::Invalid(e.to_string()))
}

pub fn run(command: Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Table, ConfigError> {
    let model = cfg.to_model()?;
    if opts.loads.is_empty() {
        return Err(ConfigError::Invalid("no load model selected".into()));
    }
    match command {
        Command::Eval => eval(&model, opts),
        Command::SweepPower => sweep_power(cfg, &model, opts),
        Command::SweepDensity => sweep_density(cfg, &model, opts),
        Command::SweepMtDensity => {
            let radii = sweep_values(cfg, (5.0, 1000.0, 40), Spacing::Log)?;
            joint_sweep(cfg, opts, "r_mt_m", &radii, |c, r| c.lambda_mt_per_km2 = mt_density_for_radius(r))
        }
        Command::SweepThreshold => {
            let gammas = sweep_values(cfg, (-10.0, 20.0, 31), Spacing::Linear)?;
            joint_sweep(cfg, opts, "gamma_db", &gammas, |c, g| {
                c.gamma_d_db = g;
                c.gamma_a_db = g;
            })
        }
        Command::Optimize => optimize(cfg, &model, opts),
        Command::Tradeoff => tradeoff(cfg, opts),
        Command::McValidate => mc_validate(cfg, &model, opts),
        Command::ConvergenceStudy => convergence_study(cfg, &model, opts),
    }
}

const METRIC_COLUMNS: [&str; 4] = ["coverage_prob", "pse_bit_per_s_per_m2", "p_grid_w_per_m2", "ee_bit_per_j"];

fn metric_cells(m: &NetworkMetrics) -> Vec<String> {
    vec![num(m.coverage), num(m.pse), num(m.power_grid), num(m.energy_efficiency)]
}

fn eval(model: &Model, opts: &RunOptions) -> Result<Table, ConfigError> {
    let net = network(model)?;
    let mut header = vec!["p_tx_dbm".to_string(), "r_cell_m".into(), "coverage_prob".into(), "pse_bit_per_s_per_m2".into()];
    for load in &opts.loads {
        let k = load.index();
        header.push(format!("p_grid_lm{k}_w_per_m2"));
        header.push(format!("ee_lm{k}_bit_per_j"));
    }
    header.push("error".into());
    let (p, lam) = (model.power.p_tx_w, model.lambda_bs);
    let mut row = vec![num(w_to_dbm(p)), num(density_to_radius(lam))];
    let result = (|| -> ppp_energy::Result<Vec<String>> {
        let mut cells = vec![num(metrics::coverage(p, lam, &net)?), num(metrics::pse(p, lam, &net)?)];
        for &load in &opts.loads {
            cells.push(num(metrics::power_grid(p, lam, &net, &model.power, load)?));
            cells.push(num(metrics::energy_efficiency(p, lam, &net, &model.power, load)?));
        }
        Ok(cells)
    })();
    match result {
        Ok(cells) => {
            row.extend(cells);
            row.push(String::new());
        }
        Err(e) => {
            row.extend(blanks(header.len() - 3));
            row.push(e.to_string());
        }
    }
    Ok(Table { header, rows: vec![row] })
}

/// Evaluates `f` for every (point, load) pair in parallel and keeps sweep order.
fn rows_for<T: Sync>(
    points: &[T],
    loads: &[LoadModel],
    f: impl Fn(&T, LoadModel) -> Vec<String> + Sync,
) -> Vec<Vec<String>> {
    let pairs: Vec<(usize, LoadModel)> = (0..points.len()).flat_map(|i| loads.iter().map(move |&l| (i, l))).collect();
    pairs.par_iter().map(|&(i, l)| f(&points[i], l)).collect()
}

/// Appends the cells of a fallible computation, or blanks and the error.
fn finish(mut row: Vec<String>, width: usize, cells: ppp_energy::Result<Vec<String>>) -> Vec<String> {
    match cells {
        Ok(c) => {
            row.extend(c);
            row.push(String::new());
        }
        Err(e) => {
            row.extend(blanks(width));
            row.push(e.to_string());
        }
    }
    row
}

fn sweep_power(cfg: &ExperimentConfig, model: &Model, opts: &RunOptions) -> Result<Table, ConfigError> {
    let net = network(model)?;
    let powers = sweep_values(cfg, (cfg.p_min_dbm, cfg.p_max_dbm, 81), Spacing::Linear)?;
    let mut table = Table::new(&["p_tx_dbm", "load_model"]);
    table.header.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
    for h in ["r_cell_opt_m", "ee_at_r_cell_opt_bit_per_j", "clamp", "error"] {
        table.header.push(h.into());
    }
    let lam = model.lambda_bs;
    table.rows = rows_for(&powers, &opts.loads, |&dbm, load| {
        let p = ppp_energy::units::dbm_to_w(dbm);
        let cells = (|| {
            let mut c = metric_cells(&metrics::evaluate(p, lam, &net, &model.power, load)?);
            let opt = optimal_density(p, &net, &model.power, load, &model.bounds)?;
            c.extend([num(density_to_radius(opt.lambda_opt)), num(opt.ee_opt), clamp_name(opt.clamped).into()]);
            Ok(c)
        })();
        finish(vec![num(dbm), load.to_string()], 7, cells)
    });
    Ok(table)
}

fn sweep_density(cfg: &ExperimentConfig, model: &Model, opts: &RunOptions) -> Result<Table, ConfigError> {
    let net = network(model)?;
    let radii = sweep_values(cfg, (cfg.r_cell_min_m, cfg.r_cell_max_m, 60), Spacing::Log)?;
    let mut table = Table::new(&["r_cell_m", "lambda_bs_per_m2", "load_model"]);
    table.header.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
    for h in ["p_opt_dbm", "ee_at_p_opt_bit_per_j", "clamp", "error"] {
        table.header.push(h.into());
    }
    let p = model.power.p_tx_w;
    table.rows = rows_for(&radii, &opts.loads, |&r, load| {
        let lam = radius_to_density(r);
        let cells = (|| {
            let mut c = metric_cells(&metrics::evaluate(p, lam, &net, &model.power, load)?);
            let opt = optimal_power(lam, &net, &model.power, load, &model.bounds)?;
            c.extend([num(w_to_dbm(opt.p_opt_w)), num(opt.ee_opt), clamp_name(opt.clamped).into()]);
            Ok(c)
        })();
        finish(vec![num(r), num(lam), load.to_string()], 7, cells)
    });
    Ok(table)
}

const JOINT_COLUMNS: [&str; 7] = [
    "p_opt_dbm",
    "r_cell_opt_m",
    "ee_opt_bit_per_j",
    "pse_opt_bit_per_s_per_m2",
    "coverage_opt_prob",
    "iterations",
    "clamp",
];
const GRID_COLUMNS: [&str; 3] = ["grid_p_opt_dbm", "grid_r_cell_opt_m", "grid_ee_opt_bit_per_j"];

/// Joint optimum cells. A run that hits the iteration cap still reports its
/// best point, with the error text alongside.
fn joint_cells(model: &Model, load: LoadModel, grid_points: usize) -> (Vec<String>, String) {
    let width = JOINT_COLUMNS.len() + if grid_points > 0 { GRID_COLUMNS.len() } else { 0 };
    let net = match Network::new(model.params) {
        Ok(n) => n,
        Err(e) => return (blanks(width), e.to_string()),
    };
    let (report, mut error) = match joint_optimize(&net, &model.power, load, &model.bounds, model.initial_lambda) {
        Ok(r) => (r, String::new()),
        Err(Error::MaxIterations { best }) => {
            let msg = Error::MaxIterations { best: best.clone() }.to_string();
            (*best, msg)
        }
        Err(e) => return (blanks(width), e.to_string()),
    };
    let joint = |r: &OptimumReport| -> ppp_energy::Result<Vec<String>> {
        Ok(vec![
            num(w_to_dbm(r.p_opt_w)),
            num(density_to_radius(r.lambda_opt)),
            num(r.ee_opt),
            num(metrics::pse(r.p_opt_w, r.lambda_opt, &net)?),
            num(metrics::coverage(r.p_opt_w, r.lambda_opt, &net)?),
            r.iterations.to_string(),
            clamp_name(r.clamped).into(),
        ])
    };
    let mut cells = match joint(&report) {
        Ok(c) => c,
        Err(e) => return (blanks(width), e.to_string()),
    };
    if grid_points > 0 {
        let search = GridSearch::Joint { power_points: grid_points, density_points: grid_points };
        match brute_force_grid(search, &net, &model.power, load, &model.bounds) {
            Ok(g) => cells.extend([num(w_to_dbm(g.p_opt_w)), num(density_to_radius(g.lambda_opt)), num(g.ee_opt)]),
            Err(e) => {
                cells.extend(blanks(GRID_COLUMNS.len()));
                if error.is_empty() {
                    error = e.to_string();
                }
            }
        }
    }
    (cells, error)
}

fn joint_header(leading: &[&str], grid_points: usize) -> Vec<String> {
    let mut h: Vec<String> = leading.iter().map(|s| s.to_string()).collect();
    h.extend(JOINT_COLUMNS.iter().map(|s| s.to_string()));
    if grid_points > 0 {
        h.extend(GRID_COLUMNS.iter().map(|s| s.to_string()));
    }
    h.push("error".into());
    h
}

fn joint_sweep(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    column: &str,
    values: &[f64],
    apply: impl Fn(&mut ExperimentConfig, f64) + Sync,
) -> Result<Table, ConfigError> {
    let mut models = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = cfg.clone();
        apply(&mut c, v);
        models.push((v, c.to_model()?));
    }
    let header = joint_header(&[column, "load_model"], cfg.grid_points);
    let rows = rows_for(&models, &opts.loads, |(v, model), load| {
        let (cells, error) = joint_cells(model, load, cfg.grid_points);
        let mut row = vec![num(*v), load.to_string()];
        row.extend(cells);
        row.push(error);
        row
    });
    Ok(Table { header, rows })
}

fn optimize(cfg: &ExperimentConfig, model: &Model, opts: &RunOptions) -> Result<Table, ConfigError> {
    let header = joint_header(&["load_model"], cfg.grid_points);
    let rows = rows_for(&[*model], &opts.loads, |m, load| {
        let (cells, error) = joint_cells(m, load, cfg.grid_points);
        let mut row = vec![load.to_string()];
        row.extend(cells);
        row.push(error);
        row
    });
    Ok(Table { header, rows })
}

/// Joint optima as the common threshold varies: each row is one point of the
/// EE-versus-PSE curve of a load model.
fn tradeoff(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Table, ConfigError> {
    let gammas = sweep_values(cfg, (-10.0, 20.0, 31), Spacing::Linear)?;
    let header = ["gamma_db", "load_model", "pse_opt_bit_per_s_per_m2", "ee_opt_bit_per_j", "p_opt_dbm", "r_cell_opt_m", "error"];
    let mut models = Vec::new();
    for &g in &gammas {
        let mut c = cfg.clone();
        c.gamma_d_db = g;
        c.gamma_a_db = g;
        models.push((g, c.to_model()?));
    }
    let rows = rows_for(&models, &opts.loads, |(g, model), load| {
        let (cells, error) = joint_cells(model, load, 0);
        let mut row = vec![num(*g), load.to_string()];
        if cells.iter().all(|c| c.is_empty()) {
            row.extend(blanks(4));
        } else {
            row.extend([cells[3].clone(), cells[2].clone(), cells[0].clone(), cells[1].clone()]);
        }
        row.push(error);
        row
    });
    Ok(Table { header: header.iter().map(|s| s.to_string()).collect(), rows })
}

fn mc_validate(cfg: &ExperimentConfig, model: &Model, opts: &RunOptions) -> Result<Table, ConfigError> {
    let net = network(model)?;
    let sim = SimConfig { realizations: opts.mc_realizations, seed: opts.seed, ..SimConfig::default() };
    sim.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    // (cell radius, transmit powers in dBm) per campaign.
    let campaigns: Vec<(f64, Vec<f64>)> = match cfg.mc_axis {
        McAxis::Power => vec![(cfg.r_cell_m, sweep_values(cfg, (23.0, 53.0, 4), Spacing::Linear)?)],
        McAxis::CellRadius => sweep_values(cfg, (125.0, 500.0, 3), Spacing::Log)?
            .into_iter()
            .map(|r| (r, vec![cfg.p_tx_dbm]))
            .collect(),
    };
    let mut header = vec!["p_tx_dbm".to_string(), "r_cell_m".into(), "load_model".into()];
    for m in METRIC_COLUMNS {
        header.push(format!("closed_{m}"));
        header.push(format!("mc_{m}"));
        header.push(format!("mc_half_width_{m}"));
    }
    header.extend(["mc_samples".to_string(), "empty_redraws".into(), "error".into()]);
    let width = header.len() - 4;

    let mut rows = Vec::new();
    for (r, powers) in campaigns {
        let lam = radius_to_density(r);
        let scenarios: Vec<Scenario> = powers
            .iter()
            .flat_map(|&dbm| opts.loads.iter().map(move |&load| Scenario { p_tx: ppp_energy::units::dbm_to_w(dbm), load }))
            .collect();
        let estimates = estimate_campaign(lam, &net, &model.power, &scenarios, &sim);
        for (k, sc) in scenarios.iter().enumerate() {
            let row = vec![num(w_to_dbm(sc.p_tx)), num(r), sc.load.to_string()];
            let cells = match &estimates {
                Err(e) => Err(e.to_string()),
                Ok(est) => metrics::evaluate(sc.p_tx, lam, &net, &model.power, sc.load)
                    .map(|closed| {
                        let mc = &est[k];
                        let pairs: [(f64, &McEstimate); 4] = [
                            (closed.coverage, &mc.coverage),
                            (closed.pse, &mc.pse),
                            (closed.power_grid, &mc.power_grid),
                            (closed.energy_efficiency, &mc.energy_efficiency),
                        ];
                        let mut c: Vec<String> =
                            pairs.iter().flat_map(|(v, e)| [num(*v), num(e.mean), num(e.half_width)]).collect();
                        c.push(mc.coverage.samples.to_string());
                        c.push(mc.empty_redraws.to_string());
                        c
                    })
                    .map_err(|e| e.to_string()),
            };
            rows.push(match cells {
                Ok(c) => [row, c, vec![String::new()]].concat(),
                Err(msg) => [row, blanks(width), vec![msg]].concat(),
            });
        }
    }
    Ok(Table { header, rows })
}

/// Mean iteration count of the joint optimizer over initial densities drawn
/// uniformly from the density bounds. Every tolerance reuses the same draws.
fn convergence_study(cfg: &ExperimentConfig, model: &Model, opts: &RunOptions) -> Result<Table, ConfigError> {
    let net = network(model)?;
    if cfg.trials == 0 {
        return Err(ConfigError::Invalid("trials must be at least 1".into()));
    }
    let eps_values = sweep_values(cfg, (1e-8, 1e-1, 8), Spacing::Log)?;
    let (lo, hi) = (model.bounds.lambda_min, model.bounds.lambda_max);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts: Vec<f64> = (0..cfg.trials).map(|_| rng.random_range(lo..=hi)).collect();

    let header = ["eps", "load_model", "trials", "mean_iterations", "max_iterations", "failures", "error"];
    let rows = rows_for(&eps_values, &opts.loads, |&eps, load| {
        let bounds = ppp_energy::optimizer::OptimizationBounds { alt_eps: eps, ..model.bounds };
        let runs: Vec<Result<usize, String>> = starts
            .par_iter()
            .map(|&l0| joint_optimize(&net, &model.power, load, &bounds, l0).map(|r| r.iterations).map_err(|e| e.to_string()))
            .collect();
        let ok: Vec<usize> = runs.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let failures = runs.len() - ok.len();
        let first_error = runs.iter().find_map(|r| r.as_ref().err().cloned()).unwrap_or_default();
        let mut row = vec![num(eps), load.to_string(), cfg.trials.to_string()];
        if ok.is_empty() {
            row.extend(blanks(2));
        } else {
            row.push(num(ok.iter().sum::<usize>() as f64 / ok.len() as f64));
            row.push(ok.iter().max().unwrap().to_string());
        }
        row.push(failures.to_string());
        row.push(first_error);
        row
    });
    Ok(Table { header: header.iter().map(|s| s.to_string()).collect(), rows })
}

/// Mean MT density in per-km² for a mean inter-MT distance in metres.
pub fn mt_density_for_radius(r_mt_m: f64) -> f64 {
    radius_to_density(r_mt_m) / per_km2_to_per_m2(1.0)
}
