//! Fixed-point diagnostics for one nonlinear solve: per-iteration update
//! sizes, the contraction factor, and the residual of the produced solution.

use crate::error::Result;
use crate::io;
use crate::report::{number, Report};

use super::{grid_from, map_from, nonlinearity_from, probe_from, RunContext};

pub fn run(ctx: &RunContext) -> Result<Report> {
    let grid = grid_from(&ctx.cfg)?;
    let q = nonlinearity_from(&ctx.cfg, "q1")?;
    let map = map_from(&ctx.cfg, q, &grid)?;
    let probe = probe_from(&ctx.cfg, &grid)?;
    let residual_tol = ctx.cfg.get_positive("fp_residual_tol", 1e-8)?;
    let ratio_cap = ctx.cfg.get_positive("contraction_ratio_cap", 0.9)?;
    ctx.cfg.ensure_consumed()?;

    let mut report = ctx.report("fixpoint");

    let linear = map.linear_response(&probe)?;
    let contraction = map.contraction(&linear)?;
    let out = map.apply(&probe)?;
    let residual = map.residual_at(&out.output, &probe)?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut worst_ratio = 0.0f64;
    for (i, &update) in contraction.updates.iter().enumerate() {
        let ratio = if i > 0 && contraction.updates[i - 1] > 1e-13 {
            let r = update / contraction.updates[i - 1];
            // Ratios near the update floor are rounding noise, not decay
            // rates; only meaningful steps feed the contraction estimate.
            if update > 1e-13 {
                worst_ratio = worst_ratio.max(r);
            }
            number(r)
        } else {
            String::new()
        };
        rows.push(vec![i.to_string(), number(update), ratio]);
    }
    let table = ctx.artifact_path("updates.csv");
    io::save_table(&table, "iteration,update_sup,ratio", &rows)?;
    report.artifact(&table);

    let up = ctx.artifact_path("u.csv");
    io::save_field(&up, &out.output.u)?;
    report.artifact(&up);
    let mp = ctx.artifact_path("m.csv");
    io::save_field(&mp, &out.output.m)?;
    report.artifact(&mp);

    report.check_true(
        "converged_before_cap",
        contraction.iterations < map.params().max_fixed_point_iters,
        &format!(
            "{} iterations against a cap of {}",
            contraction.iterations,
            map.params().max_fixed_point_iters
        ),
    );
    report.check_le(
        "residual_sup",
        residual,
        residual_tol,
        "interior residual of the produced solution",
    );
    if contraction.updates.len() > 1 {
        report.check_le(
            "contraction_ratio",
            worst_ratio,
            ratio_cap,
            "largest ratio of successive update sizes above the rounding floor",
        );
    }
    Ok(report)
}
