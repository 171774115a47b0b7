//! Linearized coefficient recovery from forward/adjoint solution pairs, the
//! gauge transform, the shift-independence check, and the reachable-set
//! sweep that compares two nonlinearities on the jets the solver actually
//! reaches.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clamped::is_clamped;
use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, GridRef, ScalarField, VectorField};
use crate::nonlinearity::{GaugeShift, JetPoint, Nonlinearity};
use crate::operator::{AdjointSolution, LinearOperator, NavierData, Solution};
use crate::runge::{fourier_mode, tikhonov_solve, PointTargets, RungeFamily};
use crate::solution_map::{jet_sup_norm, SolutionMap};

/// One forward solution of the first operator paired with one adjoint
/// solution of the second, plus the duality gap between their boundary
/// pairings.  The gap is an interior functional of the coefficient
/// difference, and vanishes to rounding when the operators coincide.
pub struct SolutionPair {
    pub forward: Solution,
    forward_raw: Vec<f64>,
    forward_rhs: Vec<f64>,
    pub adjoint: AdjointSolution,
    pub gap: f64,
}

impl SolutionPair {
    pub fn forward_raw(&self) -> &[f64] {
        &self.forward_raw
    }

    pub fn forward_rhs(&self) -> &[f64] {
        &self.forward_rhs
    }
}

/// Draw `n_pairs` pairs: the forward problem gets random low-order Fourier
/// Navier data, the adjoint gets a random smooth forcing.  Deterministic in
/// the seed.
pub fn generate_solution_pairs(
    op1: &LinearOperator,
    op2: &LinearOperator,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<SolutionPair>> {
    if !op1.grid().same_grid(op2.grid()) {
        return Err(Error::Shape(
            "the two operators live on different grids".into(),
        ));
    }
    let grid = op1.grid().clone();
    let zero_forcing = ScalarField::zeros(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let mut f0c = [0.0f64; 8];
        let mut f1c = [0.0f64; 8];
        for t in 0..8 {
            f0c[t] = rng.gen_range(-1.0..1.0) / (1.0 + t as f64);
            f1c[t] = rng.gen_range(-1.0..1.0) / (1.0 + t as f64);
        }
        let value = BoundaryTrace::from_arclength_fn(&grid, |tau| {
            (0..8).map(|t| f0c[t] * fourier_mode(t, tau)).sum()
        });
        let lap = BoundaryTrace::from_arclength_fn(&grid, |tau| {
            (0..8).map(|t| f1c[t] * fourier_mode(t, tau)).sum()
        });
        let data = NavierData::new(value, lap)?;
        let forward = op1.solve(&data, &zero_forcing)?;
        let forward_raw = forward.raw();
        let forward_rhs = op1.rhs_vector(&data, &zero_forcing);

        let mut amp = [[0.0f64; 3]; 3];
        let mut amp_s = [[0.0f64; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                amp[a][b] = rng.gen_range(-1.0..1.0) / (1.0 + (a + b) as f64);
                amp_s[a][b] = rng.gen_range(-1.0..1.0) / (1.0 + (a + b) as f64);
            }
        }
        let pi = std::f64::consts::PI;
        let forcing = ScalarField::from_fn(&grid, |x, y| {
            let mut v = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    v += amp[a][b] * (a as f64 * pi * x).cos() * (b as f64 * pi * y).cos();
                    v += amp_s[a][b]
                        * ((a + 1) as f64 * pi * x).sin()
                        * ((b + 1) as f64 * pi * y).sin();
                }
            }
            v
        });
        let adjoint = op2.solve_adjoint(&forcing)?;
        let gap =
            adjoint.pair_forward_rhs(&forward_rhs) - adjoint.pair_forward_solution(&forward_raw);
        pairs.push(SolutionPair {
            forward,
            forward_raw,
            forward_rhs,
            adjoint,
            gap,
        });
    }
    Ok(pairs)
}

/// Tensor Chebyshev modes `T_a(2x-1) T_b(2y-1)` enumerated by max degree.
#[derive(Debug, Clone)]
pub struct ChebyshevBasis {
    modes: Vec<(u32, u32)>,
}

fn cheb(n: u32, s: f64) -> f64 {
    let t = (2.0 * s - 1.0).clamp(-1.0, 1.0);
    (n as f64 * t.acos()).cos()
}

impl ChebyshevBasis {
    pub fn graded(count: usize) -> ChebyshevBasis {
        let mut modes = Vec::with_capacity(count);
        let mut d = 0u32;
        while modes.len() < count {
            let mut level = Vec::new();
            for a in 0..=d {
                for b in 0..=d {
                    if a.max(b) == d {
                        level.push((a, b));
                    }
                }
            }
            level.sort_unstable();
            for m in level {
                if modes.len() < count {
                    modes.push(m);
                }
            }
            d += 1;
        }
        ChebyshevBasis { modes }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn mode(&self, m: usize) -> (u32, u32) {
        self.modes[m]
    }

    pub fn eval(&self, m: usize, x: f64, y: f64) -> f64 {
        let (a, b) = self.modes[m];
        cheb(a, x) * cheb(b, y)
    }

    pub fn field(&self, grid: &GridRef, m: usize) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| self.eval(m, x, y))
    }

    /// Expand basis coefficients into a grid field.
    pub fn expand(&self, grid: &GridRef, coeffs: &[f64]) -> Result<ScalarField> {
        if coeffs.len() != self.modes.len() {
            return Err(Error::Shape(format!(
                "{} coefficients for {} modes",
                coeffs.len(),
                self.modes.len()
            )));
        }
        let mut out = ScalarField::zeros(grid);
        for (m, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                out.axpy(c, &self.field(grid, m));
            }
        }
        Ok(out)
    }
}

/// The assembled linear system relating the coefficient-difference expansion
/// to the measured duality gaps.  Columns are ordered by unknown field:
/// Laplacian coefficient, the two gradient components, then the value
/// coefficient, each with `basis.len()` modes.
pub struct IdentitySystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub basis: ChebyshevBasis,
    grid: GridRef,
}

impl IdentitySystem {
    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Assemble one row per pair: discrete interior integrals of the three
/// product families (`lap u1 * psi2`, `grad u1 * psi2`, `u1 * psi2`) against
/// the Chebyshev modes, with the duality gap on the right-hand side.
pub fn assemble_identity_system(
    pairs: &[SolutionPair],
    basis_dim: usize,
) -> Result<IdentitySystem> {
    if pairs.is_empty() {
        return Err(Error::Precondition(
            "cannot assemble an identity system without pairs".into(),
        ));
    }
    if basis_dim == 0 {
        return Err(Error::Precondition(
            "basis dimension must be positive".into(),
        ));
    }
    let grid = pairs[0].forward.grid().clone();
    let basis = ChebyshevBasis::graded(basis_dim);
    let k = basis.len();
    let n = grid.node_count();
    let interior: Vec<usize> = (0..n).filter(|&q| !grid.is_boundary(q)).collect();
    let mode_fields: Vec<ScalarField> = (0..k).map(|m| basis.field(&grid, m)).collect();

    let mut matrix = DMatrix::zeros(pairs.len(), 4 * k);
    let mut rhs = DVector::zeros(pairs.len());
    for (p, pair) in pairs.iter().enumerate() {
        if !grid.same_grid(pair.forward.grid()) {
            return Err(Error::Shape("pairs live on different grids".into()));
        }
        let grad = pair.forward.u.gradient();
        let psi = &pair.adjoint.psi;
        for (m, tf) in mode_fields.iter().enumerate() {
            let mut s_lap = 0.0;
            let mut s_gx = 0.0;
            let mut s_gy = 0.0;
            let mut s_val = 0.0;
            for &q in &interior {
                let w = grid.weight(q) * tf.get(q) * psi.get(q);
                s_lap += w * pair.forward.m.get(q);
                s_gx += w * grad.x(q);
                s_gy += w * grad.y(q);
                s_val += w * pair.forward.u.get(q);
            }
            matrix[(p, m)] = s_lap;
            matrix[(p, k + m)] = s_gx;
            matrix[(p, 2 * k + m)] = s_gy;
            matrix[(p, 3 * k + m)] = s_val;
        }
        rhs[p] = pair.gap;
    }
    Ok(IdentitySystem {
        matrix,
        rhs,
        basis,
        grid,
    })
}

/// Tikhonov-regularized recovery of the coefficient difference
/// (first problem minus second problem), expanded back onto the grid.
pub struct RecoveredDifference {
    pub lap_coeff: ScalarField,
    pub grad_coeff: VectorField,
    pub val_coeff: ScalarField,
    pub coefficients: Vec<f64>,
    pub residual: f64,
    pub condition: f64,
}

pub fn recover_coefficient_difference(
    system: &IdentitySystem,
    reg: f64,
) -> Result<RecoveredDifference> {
    let k = system.basis.len();
    if system.rows() < 3 * k {
        return Err(Error::Precondition(format!(
            "{} rows is too few for {} modes per field; need at least {}",
            system.rows(),
            k,
            3 * k
        )));
    }
    let (coeff, condition) = tikhonov_solve(system.matrix.clone(), &system.rhs, reg)?;
    let residual = (&system.matrix * &coeff - &system.rhs).norm();
    let grid = system.grid.clone();
    let lap_coeff = system
        .basis
        .expand(&grid, coeff.as_slice().get(0..k).unwrap())?;
    let gx = system.basis.expand(&grid, &coeff.as_slice()[k..2 * k])?;
    let gy = system
        .basis
        .expand(&grid, &coeff.as_slice()[2 * k..3 * k])?;
    let val_coeff = system
        .basis
        .expand(&grid, &coeff.as_slice()[3 * k..4 * k])?;
    Ok(RecoveredDifference {
        lap_coeff,
        grad_coeff: VectorField::from_fields(gx, gy),
        val_coeff,
        coefficients: coeff.iter().cloned().collect(),
        residual,
        condition,
    })
}

/// The gauge transform: `(T_phi Q)(x, z, p, q) = lap^2 phi(x) + Q(x, z +
/// phi, p + grad phi, q + lap phi)`, with all shifts taken as discrete
/// fields.  If `u` solves the `Q`-problem then `u - phi` solves the
/// `T_phi Q`-problem with the same Cauchy data, because `phi` is clamped.
pub fn gauge_transform(q: &Nonlinearity, phi: &ScalarField) -> Result<Nonlinearity> {
    let tol = 1e-10 * (1.0 + phi.sup_norm());
    if !is_clamped(phi, tol) {
        return Err(Error::NotClamped(
            "gauge shift must vanish near the boundary".into(),
        ));
    }
    Ok(Nonlinearity::gauged(q.clone(), GaugeShift::from_field(phi)))
}

/// Check that the discrepancy `u2_v - u1_v` between the two full solution
/// maps does not depend on the probe `v`.  Returns the largest drift from
/// the first probe's discrepancy, measured in the discrete C2 surrogate.
///
/// Precondition: the two linearizations agree pointwise at the probed
/// solution jets (the constructive stand-in for equality of the linearized
/// boundary measurements).
pub fn phi_independence_check(
    map1: &SolutionMap,
    map2: &SolutionMap,
    probes: &[NavierData],
) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::Precondition(
            "need at least one probe for the independence check".into(),
        ));
    }
    if !map1.grid().same_grid(map2.grid()) {
        return Err(Error::Shape("maps live on different grids".into()));
    }
    let mut reference: Option<ScalarField> = None;
    let mut worst = 0.0f64;
    for probe in probes {
        let u1 = map1.apply(probe)?;
        let u2 = map2.apply(probe)?;
        let c1 = map1
            .nonlinearity()
            .linearized_coefficients(&u1.output.jet())?;
        let c2 = map2
            .nonlinearity()
            .linearized_coefficients(&u2.output.jet())?;
        let agreement = c1.sup_distance(&c2);
        if agreement > 1e-8 {
            return Err(Error::Precondition(format!(
                "linearized coefficients disagree at the probed jets by {agreement:.3e}"
            )));
        }
        let shift = u2.output.u.sub(&u1.output.u);
        match &reference {
            None => reference = Some(shift),
            Some(r) => worst = worst.max(shift.sub(r).c2_norm()),
        }
    }
    Ok(worst)
}

/// Configuration of the reachable-set sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Members in the point-control family.
    pub family_size: usize,
    /// Number of target shifts per node (symmetric grid including 0).
    pub lambda_count: usize,
    /// Fraction of the verified shift range actually swept.
    pub lambda_fraction: f64,
    /// Fraction of the contraction ball used for the ray parameter.
    pub t_safety: f64,
    /// Root tolerance on the achieved value shift.
    pub root_tol: f64,
    pub max_bisection: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            family_size: 12,
            lambda_count: 5,
            lambda_fraction: 0.8,
            t_safety: 0.8,
            root_tol: 1e-8,
            max_bisection: 80,
        }
    }
}

/// One recorded sweep point: the reached jet and both nonlinearity values.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub node: (usize, usize),
    pub lambda: f64,
    pub t_root: f64,
    pub root_error: f64,
    pub jet: JetPoint,
    pub q1_value: f64,
    pub gauged_q2_value: f64,
    pub mismatch: f64,
    pub value_shift: f64,
    pub grad_shift: [f64; 2],
    pub lap_shift: f64,
}

/// Verified shift range at one node.
#[derive(Debug, Clone)]
pub struct NodeRange {
    pub node: (usize, usize),
    pub t_max: f64,
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub lambda_bar: f64,
}

#[derive(Debug, Clone)]
pub struct SkippedPoint {
    pub node: (usize, usize),
    pub lambda: f64,
    pub reason: String,
}

pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub ranges: Vec<NodeRange>,
    pub skipped: Vec<SkippedPoint>,
    pub max_mismatch: f64,
    pub max_root_error: f64,
}

/// Sweep the reachable set of the first problem's solution map: at each
/// marked node, steer the solution value by `lambda` along a point-controlled
/// ray and compare the first nonlinearity with the gauge-transformed second
/// one at the jet actually reached.
pub fn reachable_sweep(
    map1: &SolutionMap,
    q2: &Nonlinearity,
    phi: &ScalarField,
    nodes: &[(usize, usize)],
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    if cfg.lambda_count == 0 || cfg.lambda_fraction <= 0.0 || cfg.lambda_fraction >= 1.0 {
        return Err(Error::Precondition(
            "sweep needs lambda_count >= 1 and lambda_fraction in (0, 1)".into(),
        ));
    }
    if cfg.t_safety <= 0.0 || cfg.t_safety >= 1.0 {
        return Err(Error::Precondition("t_safety must lie in (0, 1)".into()));
    }
    let grid = map1.grid().clone();
    if !grid.same_grid(phi.grid()) {
        return Err(Error::Shape("gauge shift lives on a different grid".into()));
    }
    let q1 = map1.nonlinearity();
    let tq2 = gauge_transform(q2, phi)?;
    let family_op = LinearOperator::new(grid.clone(), map1.linearized().coefficients().clone())?;
    let family = RungeFamily::new(family_op, cfg.family_size)?;
    let targets = PointTargets {
        value: 4.0,
        grad: [4.0, 4.0],
        lap: 4.0,
    };
    let background_jet = map1.background().jet();

    let mut points = Vec::new();
    let mut ranges = Vec::new();
    let mut skipped = Vec::new();
    for &(i, j) in nodes {
        let node = grid.index(i, j);
        if grid.is_boundary(node) {
            return Err(Error::Precondition(format!(
                "sweep node ({i}, {j}) is on the boundary"
            )));
        }
        let pc = family.point_control(i, j, &targets, 0.0)?;
        let probe_trace = pc.combination.navier_trace();
        let ray_scale = jet_sup_norm(&pc.combination);
        let t_max = cfg.t_safety * map1.params().delta_cap / ray_scale;
        let w_val = map1.background().u.get(node);
        let rho_of = |t: f64| -> Result<(f64, Solution)> {
            let out = map1.apply(&probe_trace.scaled(t))?;
            Ok((out.output.u.get(node) - w_val, out.output))
        };
        let (rho_lo, _) = rho_of(-t_max)?;
        let (rho_hi, _) = rho_of(t_max)?;
        if !(rho_lo < 0.0 && rho_hi > 0.0) {
            skipped.push(SkippedPoint {
                node: (i, j),
                lambda: f64::NAN,
                reason: format!(
                    "value shift does not change sign over the ray: \
                     rho(-t)={rho_lo:.3e}, rho(t)={rho_hi:.3e}"
                ),
            });
            continue;
        }
        let lambda_bar = cfg.lambda_fraction * rho_hi.min(-rho_lo);
        ranges.push(NodeRange {
            node: (i, j),
            t_max,
            rho_lo,
            rho_hi,
            lambda_bar,
        });
        for s in 0..cfg.lambda_count {
            let lambda = if cfg.lambda_count == 1 {
                0.0
            } else {
                lambda_bar * (2.0 * s as f64 / (cfg.lambda_count as f64 - 1.0) - 1.0)
            };
            let mut tl = -t_max;
            let mut th = t_max;
            let mut found = None;
            for _ in 0..cfg.max_bisection {
                let tm = 0.5 * (tl + th);
                let (rho_m, out) = rho_of(tm)?;
                let f = rho_m - lambda;
                if f.abs() <= cfg.root_tol {
                    found = Some((tm, rho_m, out));
                    break;
                }
                if f < 0.0 {
                    tl = tm;
                } else {
                    th = tm;
                }
                if th - tl < 1e-16 * t_max.max(1.0) {
                    break;
                }
            }
            let Some((t_root, rho_root, reached)) = found else {
                skipped.push(SkippedPoint {
                    node: (i, j),
                    lambda,
                    reason: "bisection stalled before reaching the root tolerance".into(),
                });
                continue;
            };
            let jet = reached.jet().at(node);
            let base = background_jet.at(node);
            let q1_value = q1.eval(&grid, node, jet);
            let gauged_q2_value = tq2.eval(&grid, node, jet);
            points.push(SweepPoint {
                node: (i, j),
                lambda,
                t_root,
                root_error: (rho_root - lambda).abs(),
                jet,
                q1_value,
                gauged_q2_value,
                mismatch: (q1_value - gauged_q2_value).abs(),
                value_shift: rho_root,
                grad_shift: [jet.grad[0] - base.grad[0], jet.grad[1] - base.grad[1]],
                lap_shift: jet.lap - base.lap,
            });
        }
    }
    let max_mismatch = points.iter().map(|p| p.mismatch).fold(0.0f64, f64::max);
    let max_root_error = points.iter().map(|p| p.root_error).fold(0.0f64, f64::max);
    Ok(SweepResult {
        points,
        ranges,
        skipped,
        max_mismatch,
        max_root_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clamped::clamped_bump;
    use crate::grid::DomainGrid;
    use crate::nonlinearity::{Gamma, LinearizedCoefficients};
    use crate::solution_map::{nonlinear_residual, MapParams, SolutionMap};

    fn coeff_ops(size: usize) -> (LinearOperator, LinearOperator) {
        let g = DomainGrid::new(size, size).unwrap();
        let a = ScalarField::from_fn(&g, |x, y| 0.3 * (x + 0.5 * y));
        let xf = VectorField::from_fields(
            ScalarField::from_fn(&g, |x, _| 0.2 * x),
            ScalarField::from_fn(&g, |_, y| -0.1 * y),
        );
        let v = ScalarField::from_fn(&g, |x, y| 1.0 + 0.4 * x * y);
        let coeffs = LinearizedCoefficients {
            lap_coeff: a,
            grad_coeff: xf,
            val_coeff: v,
        };
        let op1 = LinearOperator::new(g.clone(), coeffs.clone()).unwrap();
        let op2 = LinearOperator::new(g, coeffs).unwrap();
        (op1, op2)
    }

    #[test]
    fn zero_pairs_is_empty_and_pairs_certify() {
        let (op1, op2) = coeff_ops(17);
        assert!(generate_solution_pairs(&op1, &op2, 0, 7)
            .unwrap()
            .is_empty());

        let pairs = generate_solution_pairs(&op1, &op2, 3, 7).unwrap();
        let norm1 = op1.matrix_norm().unwrap();
        for pair in &pairs {
            // Forward residual against the first operator.
            let ax = op1.apply_system(pair.forward_raw());
            let err = ax
                .iter()
                .zip(pair.forward_rhs())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            let xs = pair
                .forward_raw()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err <= 1e-9 * norm1 * xs, "forward residual {err}");

            // Adjoint residual against the transpose of the second operator.
            let aty = op2.apply_system_transpose(pair.adjoint.raw());
            let aerr = aty
                .iter()
                .zip(pair.adjoint.rhs())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            let ys = pair
                .adjoint
                .raw()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(
                aerr <= 1e-9 * norm1 * ys.max(1e-30),
                "adjoint residual {aerr}"
            );
        }
    }

    #[test]
    fn pair_generation_is_deterministic_in_the_seed() {
        let (op1, op2) = coeff_ops(17);
        let a = generate_solution_pairs(&op1, &op2, 2, 42).unwrap();
        let b = generate_solution_pairs(&op1, &op2, 2, 42).unwrap();
        let c = generate_solution_pairs(&op1, &op2, 2, 43).unwrap();
        assert_eq!(a[1].forward.u.values(), b[1].forward.u.values());
        assert_eq!(a[1].gap.to_bits(), b[1].gap.to_bits());
        assert_ne!(a[1].forward.u.values(), c[1].forward.u.values());
    }

    #[test]
    fn chebyshev_grading_and_values() {
        let basis = ChebyshevBasis::graded(16);
        assert_eq!(basis.len(), 16);
        assert_eq!(basis.mode(0), (0, 0));
        assert_eq!(basis.mode(1), (0, 1));
        assert_eq!(basis.mode(2), (1, 0));
        assert_eq!(basis.mode(3), (1, 1));
        assert_eq!(basis.mode(4), (0, 2));
        let max_deg = (0..16).map(|m| basis.mode(m)).map(|(a, b)| a.max(b)).max();
        assert_eq!(max_deg, Some(3));

        // T_2(s) = 2s^2 - 1 at x = 0.75 -> s = 0.5.
        let t2 = basis.eval(6, 0.75, 0.3);
        let (a, b) = basis.mode(6);
        assert_eq!((a, b), (2, 0));
        assert!((t2 - (2.0 * 0.25 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn identical_operators_have_vanishing_gaps() {
        let (op1, op2) = coeff_ops(17);
        let pairs = generate_solution_pairs(&op1, &op2, 6, 11).unwrap();
        for pair in &pairs {
            assert!(pair.gap.abs() < 1e-10, "gap {}", pair.gap);
        }
        let system = assemble_identity_system(&pairs, 4).unwrap();
        assert_eq!(system.rows(), 6);
        assert_eq!(system.cols(), 16);
        for p in 0..6 {
            assert!(system.rhs[p].abs() < 1e-10);
        }
    }

    #[test]
    fn assembled_rows_match_brute_force() {
        let (op1, _) = coeff_ops(17);
        let g = op1.grid().clone();
        let v2 = ScalarField::from_fn(&g, |x, y| 1.0 + 0.4 * x * y + 0.2 * x);
        let coeffs2 = LinearizedCoefficients {
            lap_coeff: op1.coefficients().lap_coeff.clone(),
            grad_coeff: op1.coefficients().grad_coeff.clone(),
            val_coeff: v2,
        };
        let op2 = LinearOperator::new(g.clone(), coeffs2).unwrap();
        let pairs = generate_solution_pairs(&op1, &op2, 2, 3).unwrap();
        let system = assemble_identity_system(&pairs, 3).unwrap();
        let basis = ChebyshevBasis::graded(3);

        let pair = &pairs[1];
        let grad = pair.forward.u.gradient();
        for m in 0..3 {
            let mut s = [0.0f64; 4];
            for k in 0..g.node_count() {
                if g.is_boundary(k) {
                    continue;
                }
                let (x, y) = g.coords(k);
                let w = g.hx() * g.hy() * basis.eval(m, x, y) * pair.adjoint.psi.get(k);
                s[0] += w * pair.forward.m.get(k);
                s[1] += w * grad.x(k);
                s[2] += w * grad.y(k);
                s[3] += w * pair.forward.u.get(k);
            }
            for (f, sf) in s.iter().enumerate() {
                let got = system.matrix[(1, f * 3 + m)];
                assert!(
                    (got - sf).abs() < 1e-12 * (1.0 + sf.abs()),
                    "entry ({f}, {m}): {got} vs {sf}"
                );
            }
        }
    }

    #[test]
    fn identical_operators_recover_zero() {
        let (op1, op2) = coeff_ops(17);
        let pairs = generate_solution_pairs(&op1, &op2, 30, 5).unwrap();
        let system = assemble_identity_system(&pairs, 9).unwrap();
        let rec = recover_coefficient_difference(&system, 1e-8).unwrap();
        assert!(
            rec.lap_coeff.sup_norm() < 1e-6,
            "{}",
            rec.lap_coeff.sup_norm()
        );
        assert!(rec.grad_coeff.sup_norm() < 1e-6);
        assert!(rec.val_coeff.sup_norm() < 1e-6);
    }

    #[test]
    fn constant_value_shift_is_recovered() {
        let (op1, _) = coeff_ops(17);
        let g = op1.grid().clone();
        let shifted = LinearizedCoefficients {
            lap_coeff: op1.coefficients().lap_coeff.clone(),
            grad_coeff: op1.coefficients().grad_coeff.clone(),
            val_coeff: op1
                .coefficients()
                .val_coeff
                .add(&ScalarField::from_fn(&g, |_, _| 0.5)),
        };
        let op2 = LinearOperator::new(g.clone(), shifted).unwrap();
        let pairs = generate_solution_pairs(&op1, &op2, 160, 13).unwrap();
        let system = assemble_identity_system(&pairs, 16).unwrap();
        let rec = recover_coefficient_difference(&system, 1e-8).unwrap();
        let mut worst = 0.0f64;
        for k in 0..g.node_count() {
            if !g.is_boundary(k) {
                worst = worst.max((rec.val_coeff.get(k) + 0.5).abs());
            }
        }
        assert!(worst < 0.05, "value-coefficient error {worst}");
        assert!(rec.lap_coeff.sup_norm() < 0.05);
    }

    #[test]
    fn recovery_error_shrinks_with_more_pairs() {
        let (op1, _) = coeff_ops(17);
        let g = op1.grid().clone();
        let shifted = LinearizedCoefficients {
            lap_coeff: op1.coefficients().lap_coeff.clone(),
            grad_coeff: op1.coefficients().grad_coeff.clone(),
            val_coeff: op1
                .coefficients()
                .val_coeff
                .add(&ScalarField::from_fn(&g, |_, _| 0.5)),
        };
        let op2 = LinearOperator::new(g.clone(), shifted).unwrap();
        let mut errs = Vec::new();
        for n in [60usize, 160] {
            let pairs = generate_solution_pairs(&op1, &op2, n, 13).unwrap();
            let system = assemble_identity_system(&pairs, 16).unwrap();
            let rec = recover_coefficient_difference(&system, 1e-8).unwrap();
            let mut worst = 0.0f64;
            for k in 0..g.node_count() {
                if !g.is_boundary(k) {
                    worst = worst.max((rec.val_coeff.get(k) + 0.5).abs());
                }
            }
            errs.push(worst);
        }
        assert!(
            errs[1] <= errs[0] * 1.05 + 1e-12,
            "errors did not shrink: {errs:?}"
        );
    }

    #[test]
    fn smooth_bump_in_the_lap_coefficient_is_recovered() {
        let (op1, _) = coeff_ops(17);
        let g = op1.grid().clone();
        let bump = ScalarField::from_fn(&g, |x, y| 0.3 * Gamma::Bump.value(x, y));
        let perturbed = LinearizedCoefficients {
            lap_coeff: op1.coefficients().lap_coeff.add(&bump),
            grad_coeff: op1.coefficients().grad_coeff.clone(),
            val_coeff: op1.coefficients().val_coeff.clone(),
        };
        let op2 = LinearOperator::new(g.clone(), perturbed).unwrap();
        let pairs = generate_solution_pairs(&op1, &op2, 200, 29).unwrap();
        let system = assemble_identity_system(&pairs, 16).unwrap();
        let rec = recover_coefficient_difference(&system, 1e-8).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..g.node_count() {
            if !g.is_boundary(k) {
                let d = rec.lap_coeff.get(k) + bump.get(k);
                num += d * d;
                den += bump.get(k) * bump.get(k);
            }
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.15, "relative recovery error {rel}");
    }

    #[test]
    fn gauge_transform_basics() {
        let g = DomainGrid::new(17, 17).unwrap();
        let q = Nonlinearity::power(3, Gamma::One).unwrap();
        let zero = ScalarField::zeros(&g);
        let tq = gauge_transform(&q, &zero).unwrap();
        let jp = JetPoint {
            val: 0.7,
            grad: [0.2, -0.1],
            lap: 0.4,
        };
        assert!((tq.eval(&g, 40, jp) - q.eval(&g, 40, jp)).abs() < 1e-15);

        let phi = clamped_bump(&g).scaled(0.2);
        let tzero = gauge_transform(&Nonlinearity::zero(), &phi).unwrap();
        let bilap = phi.laplacian().laplacian();
        for k in [40usize, 100, 150] {
            let a = tzero.eval(&g, k, jp);
            let b = tzero.eval(
                &g,
                k,
                JetPoint {
                    val: -3.0,
                    grad: [9.0, 2.0],
                    lap: 1.0,
                },
            );
            assert!((a - b).abs() < 1e-14, "gauged zero must ignore the jet");
            assert!((a - bilap.get(k)).abs() < 1e-11);
        }

        let not_clamped = ScalarField::from_fn(&g, |x, _| x);
        assert!(matches!(
            gauge_transform(&q, &not_clamped),
            Err(Error::NotClamped(_))
        ));
    }

    #[test]
    fn gauge_transform_moves_solutions() {
        let g = DomainGrid::new(17, 17).unwrap();
        let q = Nonlinearity::power(2, Gamma::CosX).unwrap();
        let data = NavierData::from_fns(&g, |x, y| 0.1 * (x + y), |x, _| 0.05 * x);
        let map = SolutionMap::new(q.clone(), data, MapParams::default()).unwrap();
        let u = map.background().clone();

        let phi = clamped_bump(&g).scaled(0.15);
        let tq = gauge_transform(&q, &phi).unwrap();
        let moved = Solution {
            u: u.u.sub(&phi),
            m: u.m.sub(&phi.laplacian()),
        };
        let res = nonlinear_residual(&tq, &moved, map.background_data()).unwrap();
        let res_sup = res.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(res_sup < 1e-8, "gauged residual {res_sup}");
    }

    #[test]
    fn shift_independence_for_identical_and_gauged_problems() {
        let g = DomainGrid::new(17, 17).unwrap();
        let q = Nonlinearity::power(3, Gamma::One).unwrap();
        let data = NavierData::from_fns(&g, |x, y| 0.05 * x * y, |_, _| 0.0);
        let map1 = SolutionMap::new(q.clone(), data.clone(), MapParams::default()).unwrap();
        let map2 = SolutionMap::new(q.clone(), data.clone(), MapParams::default()).unwrap();

        let probes = [
            NavierData::zeros(&g),
            NavierData::from_fns(&g, |x, _| 0.02 * x, |_, _| 0.0),
            NavierData::from_fns(&g, |_, y| 0.02 * y * y, |_, y| 0.01 * y),
        ];
        let drift = phi_independence_check(&map1, &map2, &probes).unwrap();
        assert!(drift < 1e-12, "identical maps drifted by {drift}");
        assert_eq!(
            phi_independence_check(&map1, &map2, &probes[..1]).unwrap(),
            0.0
        );

        // Gauge pair: the second problem is the first one shifted by phi.
        let phi = clamped_bump(&g).scaled(0.1);
        let q2 = gauge_transform(&q, &phi.scaled(-1.0)).unwrap();
        let w2 = Solution {
            u: map1.background().u.add(&phi),
            m: map1.background().m.add(&phi.laplacian()),
        };
        let map2 =
            SolutionMap::with_background(q2, w2.navier_trace(), w2, MapParams::default()).unwrap();
        let drift = phi_independence_check(&map1, &map2, &probes).unwrap();
        assert!(drift < 1e-6, "gauge pair drifted by {drift}");

        // And the common discrepancy is phi itself.
        let u1 = map1.apply(&probes[1]).unwrap();
        let u2 = map2.apply(&probes[1]).unwrap();
        let discrepancy = u2.output.u.sub(&u1.output.u);
        assert!(discrepancy.sub(&phi).c2_norm() < 1e-6);
    }

    #[test]
    fn sweep_with_identical_nonlinearity_matches_itself() {
        let g = DomainGrid::new(17, 17).unwrap();
        let q = Nonlinearity::power(3, Gamma::One).unwrap();
        let map = SolutionMap::around_zero(q.clone(), &g, MapParams::default()).unwrap();
        let cfg = SweepConfig {
            family_size: 10,
            lambda_count: 3,
            ..SweepConfig::default()
        };
        let result = reachable_sweep(&map, &q, &ScalarField::zeros(&g), &[(8, 8)], &cfg).unwrap();
        assert!(result.skipped.is_empty(), "skipped: {:?}", result.skipped);
        assert_eq!(result.points.len(), 3);
        assert!(result.max_root_error <= cfg.root_tol);
        assert!(
            result.max_mismatch < 1e-6,
            "mismatch {}",
            result.max_mismatch
        );
        let zero_point = result
            .points
            .iter()
            .find(|p| p.lambda == 0.0)
            .expect("lambda = 0 in the grid");
        assert_eq!(zero_point.t_root, 0.0);
        assert!(result.ranges[0].lambda_bar > 0.0);
    }

    #[test]
    fn sweep_for_a_gauge_pair_has_tiny_mismatch() {
        let g = DomainGrid::new(17, 17).unwrap();
        let q1 = Nonlinearity::power(3, Gamma::One).unwrap();
        let map1 = SolutionMap::around_zero(q1.clone(), &g, MapParams::default()).unwrap();
        let phi = clamped_bump(&g).scaled(0.1);
        let q2 = gauge_transform(&q1, &phi.scaled(-1.0)).unwrap();
        let cfg = SweepConfig {
            family_size: 10,
            lambda_count: 3,
            ..SweepConfig::default()
        };
        let result = reachable_sweep(&map1, &q2, &phi, &[(8, 8), (5, 11)], &cfg).unwrap();
        assert!(result.skipped.is_empty(), "skipped: {:?}", result.skipped);
        assert!(
            result.max_mismatch < 1e-5,
            "mismatch {}",
            result.max_mismatch
        );
        assert!(result.max_root_error <= cfg.root_tol);
    }
}
