//! Verification battery over all nonlinearity kinds and weights: exact
//! first-order expansion with integral remainder, two-point remainder
//! difference, analytic derivative bounds, and finite-difference consistency
//! of the partials.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::ScalarField;
use crate::io;
use crate::nonlinearity::{
    derivative_bound_check, finite_difference_consistency, remainder_difference, Deriv, Gamma, Jet,
    Nonlinearity,
};
use crate::quadrature::GaussLegendre;
use crate::report::{number, Report};

use super::{grid_from, RunContext};

fn battery() -> Result<Vec<Nonlinearity>> {
    let gammas = [Gamma::One, Gamma::Bump, Gamma::CosX];
    let mut out = Vec::new();
    for &g in &gammas {
        out.push(Nonlinearity::power(2, g)?);
        out.push(Nonlinearity::power(3, g)?);
        out.push(Nonlinearity::sine(g));
        out.push(Nonlinearity::val_times_lap(g));
        out.push(Nonlinearity::grad_square(g));
    }
    Ok(out)
}

pub fn run(ctx: &RunContext) -> Result<Report> {
    let grid = grid_from(&ctx.cfg)?;
    let quad_order = ctx.cfg.get_usize("quad_order", 8)?;
    let n_configs = ctx.cfg.get_usize("n_configs", 5)?;
    let taylor_tol = ctx.cfg.get_positive("taylor_tol", 1e-8)?;
    let remainder_tol = ctx.cfg.get_positive("remainder_tol", 1e-7)?;
    let fd_tol = ctx.cfg.get_positive("fd_tol", 1e-5)?;
    ctx.cfg.ensure_consumed()?;

    let mut report = ctx.report("verify-appendix");
    let quad = GaussLegendre::new(quad_order);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);

    // Smooth seeded jet configurations reused across the whole battery.
    let mut field = |amp: f64| -> ScalarField {
        use rand::Rng;
        let fx = rng.gen_range(1..=3) as f64;
        let fy = rng.gen_range(1..=3) as f64;
        let ph = rng.gen_range(0.0..std::f64::consts::TAU);
        ScalarField::from_fn(&grid, move |x, y| {
            amp * (fx * std::f64::consts::PI * x + ph).sin() * (fy * std::f64::consts::PI * y).sin()
        })
    };
    let mut configs = Vec::with_capacity(n_configs);
    for _ in 0..n_configs {
        let base = Jet::of_field(&field(0.3));
        let h = Jet::of_field(&field(0.2));
        let v = Jet::of_field(&field(0.15));
        let r1 = Jet::of_field(&field(0.1));
        let r2 = Jet::of_field(&field(0.12));
        configs.push((base, h, v, r1, r2));
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut taylor_max = 0.0f64;
    let mut remainder_max = 0.0f64;
    let mut fd_max = 0.0f64;
    let mut bound_ratio_max = 0.0f64;
    let derivs = Deriv::all_up_to(2);

    for q in battery()? {
        let mut q_taylor = 0.0f64;
        let mut q_remainder = 0.0f64;
        for (base, h, v, r1, r2) in &configs {
            let res = q.taylor_identity_residual(base, h, &quad)?;
            q_taylor = q_taylor.max(res.sup_norm());
            let diff = remainder_difference(&q, base, v, r1, r2, &quad)?;
            q_remainder = q_remainder.max(diff.sup_difference);
        }
        let box_field = ScalarField::from_fn(&grid, |x, y| {
            0.08 * (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
        });
        let mut q_bound = 0.0f64;
        for c in derivative_bound_check(&q, &box_field, &derivs, 9)? {
            q_bound = q_bound.max(c.ratio);
        }
        let q_fd = finite_difference_consistency(&q, &grid, &mut rng, 40);

        taylor_max = taylor_max.max(q_taylor);
        remainder_max = remainder_max.max(q_remainder);
        fd_max = fd_max.max(q_fd);
        bound_ratio_max = bound_ratio_max.max(q_bound);
        rows.push(vec![
            q.describe(),
            number(q_taylor),
            number(q_remainder),
            number(q_bound),
            number(q_fd),
        ]);
    }

    let table = ctx.artifact_path("battery.csv");
    io::save_table(
        &table,
        "nonlinearity,taylor_residual,remainder_difference,bound_ratio,fd_consistency",
        &rows,
    )?;
    report.artifact(&table);

    report.check_le(
        "taylor_identity_max",
        taylor_max,
        taylor_tol,
        "worst residual of the exact first-order expansion over the battery",
    );
    report.check_le(
        "remainder_difference_max",
        remainder_max,
        remainder_tol,
        "worst two-point remainder-difference defect over the battery",
    );
    report.check_le(
        "derivative_bound_ratio",
        bound_ratio_max,
        1.0 + 1e-12,
        "sampled derivative sups must stay below their analytic bounds",
    );
    report.check_le(
        "finite_difference_max",
        fd_max,
        fd_tol,
        "worst disagreement between partials and central differences",
    );
    Ok(report)
}
