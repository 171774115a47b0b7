//! Experiment drivers behind the command-line subcommands.  Each driver
//! reads its options from a flat config, runs one scenario, writes CSV
//! artifacts plus a JSON report into the output directory, and returns the
//! report for exit-code decisions.

pub mod appendix;
pub mod cauchy_probe;
pub mod fixpoint;
pub mod forward;
pub mod project;
pub mod recover;
pub mod runge_density;
pub mod second_transfer;
pub mod sweep;

use std::path::PathBuf;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::grid::{DomainGrid, GridRef};
use crate::nonlinearity::{Gamma, Nonlinearity};
use crate::operator::NavierData;
use crate::report::Report;
use crate::solution_map::{MapParams, SolutionMap};

/// Everything a driver needs: parsed config, output directory, and the
/// effective seed (config `seed`, possibly overridden on the command line).
pub struct RunContext {
    pub cfg: Config,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl RunContext {
    pub fn report(&self, command: &str) -> Report {
        Report::new(command, self.seed, self.cfg.echo())
    }

    pub fn artifact_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Grid from `grid_nx` / `grid_ny` (the latter defaults to the former).
pub fn grid_from(cfg: &Config) -> Result<GridRef> {
    let nx = cfg.get_usize("grid_nx", 33)?;
    let ny = cfg.get_usize("grid_ny", nx)?;
    DomainGrid::new(nx, ny)
}

/// Nonlinearity from `{prefix}_kind`, `{prefix}_exponent`, `{prefix}_gamma`.
pub fn nonlinearity_from(cfg: &Config, prefix: &str) -> Result<Nonlinearity> {
    let kind = cfg.get_str(&format!("{prefix}_kind"), "zero");
    let gamma = Gamma::parse(&cfg.get_str(&format!("{prefix}_gamma"), "one"))?;
    let exponent = cfg.get_usize(&format!("{prefix}_exponent"), 3)? as u32;
    match kind.as_str() {
        "zero" => Ok(Nonlinearity::zero()),
        "power" => Nonlinearity::power(exponent, gamma),
        "sine" => Ok(Nonlinearity::sine(gamma)),
        "val_times_lap" => Ok(Nonlinearity::val_times_lap(gamma)),
        "grad_square" => Ok(Nonlinearity::grad_square(gamma)),
        other => Err(Error::Config(format!(
            "key `{prefix}_kind`: unknown nonlinearity `{other}` \
             (expected zero|power|sine|val_times_lap|grad_square)"
        ))),
    }
}

/// Solver knobs shared by every map-based experiment.
pub fn map_params_from(cfg: &Config) -> Result<MapParams> {
    let mut p = MapParams::default();
    p.delta_cap = cfg.get_positive("delta_cap", p.delta_cap)?;
    p.fixed_point_tol = cfg.get_positive("fp_tol", p.fixed_point_tol)?;
    p.max_fixed_point_iters = cfg.get_usize("fp_max_iters", p.max_fixed_point_iters)?;
    p.newton_tol = cfg.get_positive("newton_tol", p.newton_tol)?;
    p.max_newton_iters = cfg.get_usize("newton_max_iters", p.max_newton_iters)?;
    p.quadrature_order = cfg.get_usize("quad_order", p.quadrature_order)?;
    Ok(p)
}

/// Base solution per the `background` recipe: `zero` for the trivial
/// background, `newton` for a solve with smooth data scaled by
/// `bg_value_amp` / `bg_lap_amp`.
pub fn map_from(cfg: &Config, q: Nonlinearity, grid: &GridRef) -> Result<SolutionMap> {
    let params = map_params_from(cfg)?;
    let recipe = cfg.get_str("background", "zero");
    match recipe.as_str() {
        "zero" => SolutionMap::around_zero(q, grid, params),
        "newton" => {
            let va = cfg.get_f64("bg_value_amp", 0.2)?;
            let la = cfg.get_f64("bg_lap_amp", 0.0)?;
            let data = NavierData::from_fns(
                grid,
                move |x, y| va * (1.0 + 0.5 * x - 0.3 * y + x * y),
                move |x, y| la * (x - y),
            );
            SolutionMap::new(q, data, params)
        }
        other => Err(Error::Config(format!(
            "key `background`: unknown recipe `{other}` (expected zero|newton)"
        ))),
    }
}

/// Smooth probe data built from one perimeter Fourier mode.
pub fn probe_from(cfg: &Config, grid: &GridRef) -> Result<NavierData> {
    let mode = cfg.get_usize("probe_mode", 2)?;
    let va = cfg.get_f64("probe_value_amp", 0.05)?;
    let la = cfg.get_f64("probe_lap_amp", 0.0)?;
    let value = crate::grid::BoundaryTrace::from_arclength_fn(grid, |tau| {
        va * crate::runge::fourier_mode(mode, tau)
    });
    let lap = crate::grid::BoundaryTrace::from_arclength_fn(grid, |tau| {
        la * crate::runge::fourier_mode(mode, tau)
    });
    NavierData::new(value, lap)
}
