//! Transfer between two solution maps: recover the clamped shift carrying a
//! solution of the first problem onto a solution of the second, and check
//! the derivative of the transfer against the second linear response.

use crate::cauchy::CauchyData;
use crate::clamped::clamped_bump;
use crate::error::{Error, Result};
use crate::io;
use crate::operator::Solution;
use crate::recovery::gauge_transform;
use crate::report::{number, Report};
use crate::second_map::{SecondMap, TransferParams};
use crate::solution_map::SolutionMap;

use super::{grid_from, map_from, nonlinearity_from, probe_from, RunContext};

pub fn run(ctx: &RunContext) -> Result<Report> {
    let grid = grid_from(&ctx.cfg)?;
    let q1 = nonlinearity_from(&ctx.cfg, "q1")?;
    let map1 = map_from(&ctx.cfg, q1.clone(), &grid)?;
    let probe = probe_from(&ctx.cfg, &grid)?;
    let scenario = ctx.cfg.get_str("scenario", "gauge");
    let phi_amp = ctx.cfg.get_f64("phi_amp", 0.05)?;
    let shift_tol = ctx.cfg.get_positive("shift_tol", 1e-6)?;
    let defect_tol = ctx.cfg.get_positive("defect_tol", 1e-6)?;
    let transfer_tol = ctx
        .cfg
        .get_positive("transfer_tol", TransferParams::default().tol)?;
    let transfer_iters = ctx
        .cfg
        .get_usize("transfer_max_iters", TransferParams::default().max_iters)?;
    let eps = ctx.cfg.get_positive("derivative_eps", 0.05)?;
    ctx.cfg.ensure_consumed()?;

    let mut report = ctx.report("second-map");
    let params = TransferParams {
        tol: transfer_tol,
        max_iters: transfer_iters,
    };

    // Build the second problem.  `identical` repeats the first; `gauge`
    // shifts it by a clamped field phi so that u - phi solves the second
    // problem whenever u solves the first, and the expected transfer shift
    // is exactly phi.
    let (map2, expected_shift) = match scenario.as_str() {
        "identical" => {
            let m2 = SolutionMap::new(
                q1.clone(),
                map1.background_data().clone(),
                map1.params().clone(),
            )?;
            (m2, None)
        }
        "gauge" => {
            let phi = clamped_bump(&grid).scaled(phi_amp);
            let q2 = gauge_transform(&q1, &phi)?;
            let w1 = map1.background();
            let w2 = Solution {
                u: w1.u.sub(&phi),
                m: w1.m.sub(&phi.laplacian()),
            };
            let m2 = SolutionMap::with_background(
                q2,
                map1.background_data().clone(),
                w2,
                map1.params().clone(),
            )?;
            (m2, Some(phi))
        }
        other => {
            return Err(Error::Config(format!(
                "key `scenario`: unknown scenario `{other}` (expected identical|gauge)"
            )))
        }
    };

    let second = SecondMap::new(&map1, &map2, params)?;
    let u1 = map1.apply(&probe)?.output;
    let transfer = second.transfer(&u1)?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, &update) in transfer.updates.iter().enumerate() {
        rows.push(vec![i.to_string(), number(update)]);
    }
    let table = ctx.artifact_path("transfer_updates.csv");
    io::save_table(&table, "iteration,update_sup", &rows)?;
    report.artifact(&table);
    let sp = ctx.artifact_path("shift.csv");
    io::save_field(&sp, &transfer.shift)?;
    report.artifact(&sp);

    report.check_le(
        "defect_sup",
        transfer.defect,
        defect_tol,
        "interior residual of the transferred solution in the second problem",
    );
    match &expected_shift {
        None => {
            report.check_le(
                "shift_sup",
                transfer.shift.sup_norm(),
                1e-10,
                "identical problems must transfer with a vanishing shift",
            );
        }
        Some(phi) => {
            let err = transfer.shift.sub(phi).sup_norm();
            report.check_le(
                "shift_error",
                err,
                shift_tol,
                "sup distance between the recovered shift and the gauge field",
            );
        }
    }
    let quad = CauchyData::distance(&transfer.transferred, &u1);
    report.check_le(
        "quadruple_preserved",
        quad,
        1e-12,
        "the transfer must not move the boundary quadruple",
    );

    // The derivative of the transfer is tangent to the second linear
    // response up to the central-difference footprint, which shrinks like
    // the square of the step.
    let d1 = second.derivative_check(&probe, eps, 1e-8)?;
    let d2 = second.derivative_check(&probe, eps / 2.0, 1e-8)?;
    let ratio = d1 / d2.max(f64::MIN_POSITIVE);
    let quadratic = d2 < 1e-12 || (2.5..=6.0).contains(&ratio);
    report.check_true(
        "derivative_quadratic",
        quadratic,
        &format!(
            "defect {} at step {eps:.3e} against {} at half step (ratio {})",
            number(d1),
            number(d2),
            number(ratio)
        ),
    );
    Ok(report)
}
