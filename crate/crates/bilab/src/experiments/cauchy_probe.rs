//! Stability probe: compare interior distances of solution pairs to the
//! distance of their boundary quadruples over seeded random probes.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cauchy::{stability_probe, CauchyData};
use crate::error::Result;
use crate::grid::{BoundaryTrace, GridRef};
use crate::io;
use crate::operator::NavierData;
use crate::report::{number, Report};
use crate::runge::fourier_mode;

use super::{grid_from, map_from, nonlinearity_from, RunContext};

/// Random smooth boundary datum: a few perimeter Fourier modes with
/// coefficients drawn uniformly and damped by mode number.
pub fn random_probe(grid: &GridRef, rng: &mut impl Rng, amp: f64) -> Result<NavierData> {
    let n_modes = 8;
    let coeff_v: Vec<f64> = (0..n_modes)
        .map(|t| amp * rng.gen_range(-1.0..1.0) / (1.0 + t as f64))
        .collect();
    let coeff_l: Vec<f64> = (0..n_modes)
        .map(|t| amp * rng.gen_range(-1.0..1.0) / (1.0 + t as f64))
        .collect();
    let value = BoundaryTrace::from_arclength_fn(grid, |tau| {
        coeff_v
            .iter()
            .enumerate()
            .map(|(t, c)| c * fourier_mode(t, tau))
            .sum()
    });
    let lap = BoundaryTrace::from_arclength_fn(grid, |tau| {
        coeff_l
            .iter()
            .enumerate()
            .map(|(t, c)| c * fourier_mode(t, tau))
            .sum()
    });
    NavierData::new(value, lap)
}

pub fn run(ctx: &RunContext) -> Result<Report> {
    let grid = grid_from(&ctx.cfg)?;
    let q = nonlinearity_from(&ctx.cfg, "q1")?;
    let map = map_from(&ctx.cfg, q, &grid)?;
    let n_pairs = ctx.cfg.get_usize("n_pairs", 50)?;
    let amp = ctx.cfg.get_positive("probe_amp", 0.05)?;
    let floor = ctx.cfg.get_positive("degeneracy_floor", 1e-10)?;
    ctx.cfg.ensure_consumed()?;

    let mut report = ctx.report("cauchy-probe");
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);

    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let pa = random_probe(&grid, &mut rng, amp)?;
        let pb = random_probe(&grid, &mut rng, amp)?;
        let sa = map.apply(&pa)?.output;
        let sb = map.apply(&pb)?.output;
        pairs.push((sa, sb));
    }
    let probe = stability_probe(&pairs, floor);

    // A probe used twice must give coinciding solutions: the map has no
    // hidden state.
    let pc = random_probe(&grid, &mut rng, amp)?;
    let twin_a = map.apply(&pc)?.output;
    let twin_b = map.apply(&pc)?.output;
    let twin_gap = twin_a.u.sub(&twin_b.u).sup_norm();
    let twin_cauchy = CauchyData::distance(&twin_a, &twin_b);

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, s) in probe.samples.iter().enumerate() {
        rows.push(vec![
            i.to_string(),
            number(s.cauchy_distance),
            number(s.interior_distance),
            s.ratio.map(number).unwrap_or_default(),
        ]);
    }
    let table = ctx.artifact_path("samples.csv");
    io::save_table(
        &table,
        "pair,cauchy_distance,interior_distance,ratio",
        &rows,
    )?;
    report.artifact(&table);

    report.check_true(
        "ratio_bounded",
        probe.max_ratio.is_finite() && probe.max_ratio > 0.0,
        &format!(
            "largest interior/boundary ratio {} over {} pairs ({} degenerate skipped)",
            number(probe.max_ratio),
            n_pairs,
            probe.skipped_degenerate
        ),
    );
    report.check_le(
        "coincident_interior_gap",
        twin_gap,
        1e-8,
        &format!(
            "interior gap for a repeated probe (quadruple distance {})",
            number(twin_cauchy)
        ),
    );
    Ok(report)
}
