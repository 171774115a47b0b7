//! Projection diagnostics for the clamped least-squares inverter: preimage
//! roundtrip, idempotence, residual orthogonality, and non-member refusal.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clamped::{clamped_bump, interior_l2, ClampedProjector};
use crate::error::Result;
use crate::grid::ScalarField;
use crate::io;
use crate::operator::LinearOperator;
use crate::report::{number, Report};

use super::{grid_from, map_from, nonlinearity_from, RunContext};

pub fn run(ctx: &RunContext) -> Result<Report> {
    let grid = grid_from(&ctx.cfg)?;
    let q = nonlinearity_from(&ctx.cfg, "q1")?;
    let map = map_from(&ctx.cfg, q, &grid)?;
    let n_fields = ctx.cfg.get_usize("n_fields", 20)?;
    let roundtrip_tol = ctx.cfg.get_positive("roundtrip_tol", 1e-6)?;
    let idem_tol = ctx.cfg.get_positive("idempotence_tol", 1e-8)?;
    let orth_tol = ctx.cfg.get_positive("orthogonality_tol", 1e-8)?;
    ctx.cfg.ensure_consumed()?;

    let mut report = ctx.report("project");
    let coeffs = map.linearized().coefficients().clone();
    let op_for_image = LinearOperator::new(grid.clone(), coeffs.clone())?;
    let projector = ClampedProjector::new(LinearOperator::new(grid.clone(), coeffs)?)?;

    // Roundtrip: push a known clamped field through the operator and ask for
    // it back.
    let bump = clamped_bump(&grid);
    let image = op_for_image.apply_composed(&bump);
    let back = projector.preimage_of(&image, 1e-8)?;
    let roundtrip = back.preimage.sub(&bump).sup_norm();
    report.check_le(
        "bump_roundtrip",
        roundtrip,
        roundtrip_tol,
        "sup distance between a clamped bump and its recovered preimage",
    );

    // Random targets: idempotence and orthogonality of the projection.
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut idem_max = 0.0f64;
    let mut orth_max = 0.0f64;
    for idx in 0..n_fields {
        let c: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target = ScalarField::from_fn(&grid, |x, y| {
            let mut v = c[0] * x * x + c[1] * y * y + c[2] * x * y;
            for a in 1..=2usize {
                for b in 1..=2usize {
                    v += c[2 + 2 * a + b - 2]
                        * (a as f64 * PI * x).sin()
                        * (b as f64 * PI * y).sin();
                }
            }
            v
        });
        let p = projector.project(&target)?;
        // Idempotence of the projection as an operator identity: the drift
        // of P(Pt) from Pt, sampled through t and read against |t|.
        let p2 = projector.project(&p.projected)?;
        let idem = interior_l2(&p2.projected.sub(&p.projected))
            / interior_l2(&target).max(f64::MIN_POSITIVE);
        let resid = target.sub(&p.projected);
        let orth = projector.column_defect(&resid);
        idem_max = idem_max.max(idem);
        orth_max = orth_max.max(orth);
        rows.push(vec![
            idx.to_string(),
            number(p.residual_l2),
            number(p.relative_residual),
            number(idem),
            number(orth),
        ]);
    }
    let table = ctx.artifact_path("fields.csv");
    io::save_table(
        &table,
        "field,residual_l2,relative_residual,idempotence,orthogonality",
        &rows,
    )?;
    report.artifact(&table);

    report.check_le(
        "idempotence_max",
        idem_max,
        idem_tol,
        "largest relative drift when projecting an already-projected field",
    );
    report.check_le(
        "orthogonality_max",
        orth_max,
        orth_tol,
        "largest normalized column inner product of a projection residual",
    );

    // A target violating the boundary conditions of the image space must be
    // refused by the inverter.
    let outsider = ScalarField::from_fn(&grid, |x, y| (PI * x).sin() + y);
    report.check_true(
        "refuses_non_member",
        projector.preimage_of(&outsider, 1e-8).is_err(),
        "inversion of a field outside the image space returns an error",
    );
    Ok(report)
}
