//! Coefficient recovery from boundary pairings: generate forward/adjoint
//! solution pairs for two lower-order perturbations of the same operator and
//! reconstruct the coefficient difference from the duality gaps alone.

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::io;
use crate::nonlinearity::{Gamma, LinearizedCoefficients};
use crate::operator::LinearOperator;
use crate::recovery::{
    assemble_identity_system, generate_solution_pairs, recover_coefficient_difference,
};
use crate::report::{number, Report};

use super::{grid_from, map_from, nonlinearity_from, RunContext};

pub fn run(ctx: &RunContext) -> Result<Report> {
    let grid = grid_from(&ctx.cfg)?;
    let q1 = nonlinearity_from(&ctx.cfg, "q1")?;
    let map1 = map_from(&ctx.cfg, q1, &grid)?;
    let scenario = ctx.cfg.get_str("scenario", "value_shift");
    let shift_amp = ctx.cfg.get_f64("shift_amp", 0.5)?;
    let n_pairs = ctx.cfg.get_usize("n_pairs", 160)?;
    let basis_k = ctx.cfg.get_usize("basis_k", 16)?;
    let reg = ctx.cfg.get_f64("reg", 1e-8)?;
    let rel_tol = ctx.cfg.get_positive("recovery_rel_tol", 0.1)?;
    let l2_rel_tol = ctx.cfg.get_positive("recovery_l2_rel_tol", 0.15)?;
    let null_tol = ctx.cfg.get_positive("null_tol", 1e-10)?;
    ctx.cfg.ensure_consumed()?;

    let mut report = ctx.report("recover");
    let base = map1.linearized().coefficients().clone();
    let op1 = LinearOperator::new(grid.clone(), base.clone())?;

    // The second operator differs from the first in one known lower-order
    // coefficient; that known difference is the ground truth below.
    let (delta_val, delta_lap): (ScalarField, ScalarField) = match scenario.as_str() {
        "identical" => (ScalarField::zeros(&grid), ScalarField::zeros(&grid)),
        "value_shift" => (
            ScalarField::from_fn(&grid, |_, _| shift_amp),
            ScalarField::zeros(&grid),
        ),
        "lap_bump" => (
            ScalarField::zeros(&grid),
            ScalarField::from_fn(&grid, move |x, y| shift_amp * Gamma::Bump.value(x, y)),
        ),
        other => {
            return Err(Error::Config(format!(
                "key `scenario`: unknown scenario `{other}` \
                 (expected identical|value_shift|lap_bump)"
            )))
        }
    };
    let coeffs2 = LinearizedCoefficients {
        lap_coeff: base.lap_coeff.add(&delta_lap),
        grad_coeff: base.grad_coeff.clone(),
        val_coeff: base.val_coeff.add(&delta_val),
    };
    let op2 = LinearOperator::new(grid.clone(), coeffs2)?;

    let pairs = generate_solution_pairs(&op1, &op2, n_pairs, ctx.seed)?;
    let system = assemble_identity_system(&pairs, basis_k)?;
    let rec = recover_coefficient_difference(&system, reg)?;

    let mut gap_rows: Vec<Vec<String>> = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        gap_rows.push(vec![i.to_string(), number(p.gap)]);
    }
    let gp = ctx.artifact_path("gaps.csv");
    io::save_table(&gp, "pair,gap", &gap_rows)?;
    report.artifact(&gp);
    for (name, field) in [
        ("recovered_val.csv", &rec.val_coeff),
        ("recovered_lap.csv", &rec.lap_coeff),
    ] {
        let p = ctx.artifact_path(name);
        io::save_field(&p, field)?;
        report.artifact(&p);
    }

    // The reconstruction returns first-problem-minus-second, so the known
    // difference enters with a flipped sign.
    let interior_sup = |f: &ScalarField| -> f64 {
        (0..grid.node_count())
            .filter(|&k| !grid.is_boundary(k))
            .map(|k| f.get(k).abs())
            .fold(0.0, f64::max)
    };
    let interior_l2 = |f: &ScalarField| -> f64 {
        (0..grid.node_count())
            .filter(|&k| !grid.is_boundary(k))
            .map(|k| f.get(k) * f.get(k))
            .sum::<f64>()
            .sqrt()
    };

    match scenario.as_str() {
        "identical" => {
            let max_gap = pairs.iter().map(|p| p.gap.abs()).fold(0.0, f64::max);
            report.check_le(
                "homogeneous_rows",
                max_gap,
                null_tol,
                "identical operators must produce rounding-level duality gaps",
            );
            let worst = interior_sup(&rec.val_coeff)
                .max(interior_sup(&rec.lap_coeff))
                .max(rec.grad_coeff.sup_norm());
            report.check_le(
                "recovered_null",
                worst,
                // The least-squares solve amplifies rounding-level gaps by
                // the (regularized) inverse singular values, so the
                // reconstructed fields are small but not gap-small.
                1e-6,
                "identical operators must recover a near-vanishing difference",
            );
        }
        "value_shift" => {
            let err = interior_sup(&rec.val_coeff.add(&delta_val)) / shift_amp.abs();
            report.check_le(
                "value_coefficient_rel_error",
                err,
                rel_tol,
                "relative sup error of the recovered constant shift",
            );
            report.check_le(
                "spurious_lap_coefficient",
                interior_sup(&rec.lap_coeff) / shift_amp.abs(),
                rel_tol,
                "leakage into the Laplacian coefficient",
            );
        }
        "lap_bump" => {
            let err = interior_l2(&rec.lap_coeff.add(&delta_lap)) / interior_l2(&delta_lap);
            report.check_le(
                "lap_coefficient_rel_l2_error",
                err,
                l2_rel_tol,
                "relative interior l2 error of the recovered bump",
            );
        }
        _ => unreachable!(),
    }
    report.check_true(
        "system_conditioning",
        rec.condition.is_finite(),
        &format!(
            "identity-system condition {} with lsq residual {}",
            number(rec.condition),
            number(rec.residual)
        ),
    );
    Ok(report)
}
