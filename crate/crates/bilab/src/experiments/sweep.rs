//! Reachable-set sweep: at chosen interior nodes, steer the solution value
//! along a one-parameter family of boundary data, solve for parameter roots
//! hitting prescribed level offsets, and compare the two nonlinearities on
//! the jets actually reached.

use crate::clamped::clamped_bump;
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::io;
use crate::recovery::{gauge_transform, reachable_sweep, SweepConfig};
use crate::report::{number, Report};

use super::{grid_from, map_from, nonlinearity_from, RunContext};

pub fn run(ctx: &RunContext) -> Result<Report> {
    let grid = grid_from(&ctx.cfg)?;
    let q1 = nonlinearity_from(&ctx.cfg, "q1")?;
    let map1 = map_from(&ctx.cfg, q1.clone(), &grid)?;
    let scenario = ctx.cfg.get_str("scenario", "gauge");
    let phi_amp = ctx.cfg.get_f64("phi_amp", 0.05)?;
    let n = grid.nx();
    let default_nodes = [
        (n / 2, n / 2),
        (n / 4, n / 4),
        (3 * n / 4, n / 4),
        (n / 4, 3 * n / 4),
        (3 * n / 4, 3 * n / 4),
    ];
    let nodes = ctx.cfg.get_node_list("nodes", &default_nodes)?;
    let mut sweep_cfg = SweepConfig::default();
    sweep_cfg.family_size = ctx.cfg.get_usize("family_size", sweep_cfg.family_size)?;
    sweep_cfg.lambda_count = ctx.cfg.get_usize("lambda_count", sweep_cfg.lambda_count)?;
    sweep_cfg.lambda_fraction = ctx
        .cfg
        .get_positive("lambda_fraction", sweep_cfg.lambda_fraction)?;
    sweep_cfg.t_safety = ctx.cfg.get_positive("t_safety", sweep_cfg.t_safety)?;
    sweep_cfg.root_tol = ctx.cfg.get_positive("root_tol", sweep_cfg.root_tol)?;
    sweep_cfg.max_bisection = ctx
        .cfg
        .get_usize("max_bisection", sweep_cfg.max_bisection)?;
    let mismatch_tol = ctx.cfg.get_positive("mismatch_tol", 1e-5)?;
    ctx.cfg.ensure_consumed()?;

    let mut report = ctx.report("sweep");

    // `identical` compares the nonlinearity against itself (phi = 0); for
    // `gauge` the second problem is the gauge transform by -phi, whose
    // solutions reach jets shifted by the phi jet.
    let (q2, phi) = match scenario.as_str() {
        "identical" => (q1.clone(), ScalarField::zeros(&grid)),
        "gauge" => {
            let phi = clamped_bump(&grid).scaled(phi_amp);
            let q2 = gauge_transform(&q1, &phi.scaled(-1.0))?;
            (q2, phi)
        }
        other => {
            return Err(Error::Config(format!(
                "key `scenario`: unknown scenario `{other}` (expected identical|gauge)"
            )))
        }
    };

    let result = reachable_sweep(&map1, &q2, &phi, &nodes, &sweep_cfg)?;

    let mut point_rows: Vec<Vec<String>> = Vec::new();
    for p in &result.points {
        point_rows.push(vec![
            p.node.0.to_string(),
            p.node.1.to_string(),
            number(p.lambda),
            number(p.t_root),
            number(p.root_error),
            number(p.mismatch),
            number(p.value_shift),
            number(p.lap_shift),
        ]);
    }
    let pt = ctx.artifact_path("points.csv");
    io::save_table(
        &pt,
        "i,j,lambda,t_root,root_error,mismatch,value_shift,lap_shift",
        &point_rows,
    )?;
    report.artifact(&pt);

    let mut range_rows: Vec<Vec<String>> = Vec::new();
    for r in &result.ranges {
        range_rows.push(vec![
            r.node.0.to_string(),
            r.node.1.to_string(),
            number(r.t_max),
            number(r.rho_lo),
            number(r.rho_hi),
            number(r.lambda_bar),
        ]);
    }
    let rt = ctx.artifact_path("ranges.csv");
    io::save_table(&rt, "i,j,t_max,rho_lo,rho_hi,lambda_bar", &range_rows)?;
    report.artifact(&rt);

    report.check_le(
        "max_root_error",
        result.max_root_error,
        sweep_cfg.root_tol,
        "largest residual of the level-set root solves",
    );
    report.check_le(
        "max_mismatch",
        result.max_mismatch,
        mismatch_tol,
        "largest disagreement of the two nonlinearities on reached jets",
    );
    report.check_true(
        "no_skipped_points",
        result.skipped.is_empty(),
        &format!(
            "{} of {} requested points skipped",
            result.skipped.len(),
            result.points.len() + result.skipped.len()
        ),
    );
    Ok(report)
}
