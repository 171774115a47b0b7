//! Grid-convergence study of the discrete Navier solve against a closed-form
//! solution of the plain fourth-order problem.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{DomainGrid, ScalarField};
use crate::io;
use crate::operator::{LinearOperator, NavierData};
use crate::report::{number, Report};

use super::{nonlinearity_from, RunContext};

pub fn run(ctx: &RunContext) -> Result<Report> {
    let q = nonlinearity_from(&ctx.cfg, "q1")?;
    if !q.is_zero() {
        return Err(Error::Config(
            "key `q1_kind`: the forward study measures the plain fourth-order \
             solve; set q1_kind = zero (or omit it)"
                .into(),
        ));
    }
    let sizes = ctx.cfg.get_usize_list("sizes", &[9, 17, 33])?;
    let order_floor = ctx.cfg.get_f64("order_floor", 1.9)?;
    ctx.cfg.ensure_consumed()?;
    if sizes.len() < 2 {
        return Err(Error::Config(
            "key `sizes`: need at least two grid sizes to measure an order".into(),
        ));
    }

    let mut report = ctx.report("forward");
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut history: Vec<(f64, f64, f64)> = Vec::new(); // (h, err_u, err_m)
    let mut min_order_u = f64::INFINITY;
    let mut min_order_m = f64::INFINITY;
    let mut fine = None;

    for &n in &sizes {
        let grid = DomainGrid::new(n, n)?;
        let op = LinearOperator::biharmonic(&grid);
        let forcing = ScalarField::from_fn(&grid, |x, y| {
            4.0 * PI.powi(4) * (PI * x).sin() * (PI * y).sin()
        });
        let sol = op.solve(&NavierData::zeros(&grid), &forcing)?;
        let exact_u = ScalarField::from_fn(&grid, |x, y| (PI * x).sin() * (PI * y).sin());
        let exact_m = exact_u.scaled(-2.0 * PI * PI);
        let err_u = sol.u.sub(&exact_u).sup_norm();
        let err_m = sol.m.sub(&exact_m).sup_norm();
        let h = grid.hx();

        let (ord_u, ord_m) = match history.last() {
            Some(&(h0, e0u, e0m)) => {
                let s = (h0 / h).ln();
                let ou = (e0u / err_u).ln() / s;
                let om = (e0m / err_m).ln() / s;
                min_order_u = min_order_u.min(ou);
                min_order_m = min_order_m.min(om);
                (number(ou), number(om))
            }
            None => (String::new(), String::new()),
        };
        rows.push(vec![
            n.to_string(),
            number(h),
            number(err_u),
            ord_u,
            number(err_m),
            ord_m,
        ]);
        history.push((h, err_u, err_m));
        fine = Some(sol);
    }

    let table = ctx.artifact_path("convergence.csv");
    io::save_table(&table, "n,h,err_u,order_u,err_m,order_m", &rows)?;
    report.artifact(&table);
    if let Some(sol) = fine {
        let up = ctx.artifact_path("u_fine.csv");
        io::save_field(&up, &sol.u)?;
        report.artifact(&up);
        let mp = ctx.artifact_path("m_fine.csv");
        io::save_field(&mp, &sol.m)?;
        report.artifact(&mp);
    }

    report.check_ge(
        "order_u_min",
        min_order_u,
        order_floor,
        "slowest observed convergence order of the solution values",
    );
    report.check_ge(
        "order_m_min",
        min_order_m,
        order_floor,
        "slowest observed convergence order of the companion Laplacian",
    );
    Ok(report)
}
