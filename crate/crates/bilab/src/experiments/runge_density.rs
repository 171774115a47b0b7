//! Density study: approximate an external singular solution on a strict
//! subdomain by global solutions with smooth boundary data, and steer the
//! full second-order jet at a point.

use crate::error::Result;
use crate::grid::ScalarField;
use crate::io;
use crate::operator::LinearOperator;
use crate::report::{number, Report};
use crate::runge::{external_biharmonic, PointTargets, RungeFamily, Subdomain};

use super::{grid_from, RunContext};

/// Sup of value, first derivatives, and Laplacian over subdomain nodes.
fn sub_c2(field: &ScalarField, sub: &Subdomain) -> f64 {
    let grad = field.gradient();
    let lap = field.laplacian();
    sub.nodes()
        .map(|k| {
            field
                .get(k)
                .abs()
                .max(grad.x(k).abs())
                .max(grad.y(k).abs())
                .max(lap.get(k).abs())
        })
        .fold(0.0, f64::max)
}

pub fn run(ctx: &RunContext) -> Result<Report> {
    let grid = grid_from(&ctx.cfg)?;
    let schedule = ctx.cfg.get_usize_list("family_sizes", &[8, 16, 32, 64])?;
    let pole_x = ctx.cfg.get_f64("pole_x", 1.35)?;
    let pole_y = ctx.cfg.get_f64("pole_y", 0.62)?;
    let frac = |v: f64| ((grid.nx() - 1) as f64 * v).round() as usize;
    let i0 = ctx.cfg.get_usize("sub_i0", frac(0.3))?;
    let i1 = ctx.cfg.get_usize("sub_i1", frac(0.7))?;
    let j0 = ctx.cfg.get_usize("sub_j0", frac(0.3))?;
    let j1 = ctx.cfg.get_usize("sub_j1", frac(0.7))?;
    let reg = ctx.cfg.get_f64("reg", 0.0)?;
    let err_tol = ctx.cfg.get_positive("err_tol", 1e-3)?;
    let pc_i = ctx.cfg.get_usize("control_i", grid.nx() / 2)?;
    let pc_j = ctx.cfg.get_usize("control_j", grid.ny() / 2)?;
    let pc_tol = ctx.cfg.get_positive("control_tol", 1e-6)?;
    ctx.cfg.ensure_consumed()?;

    let mut report = ctx.report("runge");
    let sub = Subdomain::rectangle(&grid, i0, i1, j0, j1)?;

    // The target blows up at a pole outside the closed square; normalize it
    // so errors are read against a unit-size jet on the subdomain.
    let raw_target = external_biharmonic(&grid, (pole_x, pole_y))?;
    let scale = sub_c2(&raw_target, &sub);
    let target = raw_target.scaled(1.0 / scale);

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut errors: Vec<f64> = Vec::new();
    let mut largest_family = None;
    for &count in &schedule {
        let family = RungeFamily::new(LinearOperator::biharmonic(&grid), count)?;
        let independence = family.independence()?;
        let fit = family.approximate_on(&target, &sub, reg)?;
        rows.push(vec![
            count.to_string(),
            number(fit.c2_error),
            number(fit.l2_error),
            number(fit.condition),
            number(independence.sigma_min),
        ]);
        errors.push(fit.c2_error);
        largest_family = Some(family);
    }
    let table = ctx.artifact_path("density.csv");
    io::save_table(
        &table,
        "family_size,c2_error,l2_error,fit_condition,independence_sigma_min",
        &rows,
    )?;
    report.artifact(&table);

    let first = *errors.first().unwrap_or(&f64::NAN);
    let last = *errors.last().unwrap_or(&f64::NAN);
    report.check_true(
        "error_improves",
        last < first,
        &format!(
            "subdomain jet error falls from {} to {} across the schedule",
            number(first),
            number(last)
        ),
    );
    report.check_le(
        "final_error",
        last,
        err_tol,
        "subdomain jet error of the richest family on the normalized target",
    );

    // Jet steering at one interior node with the richest family.
    if let Some(family) = largest_family {
        let targets = PointTargets {
            value: 4.0,
            grad: [4.0, 4.0],
            lap: 4.0,
        };
        let control = family.point_control(pc_i, pc_j, &targets, reg)?;
        report.check_le(
            "point_control_residual",
            control.residual,
            pc_tol,
            &format!(
                "jet mismatch at node ({pc_i},{pc_j}); achieved value {}",
                number(control.achieved.value)
            ),
        );
        let cp = ctx.artifact_path("control_combination.csv");
        io::save_field(&cp, &control.combination.u)?;
        report.artifact(&cp);
    }
    Ok(report)
}
