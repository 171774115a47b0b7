//! The nonlinear solution map for small Navier data around a background
//! solution, built from a contraction fixed point on the linearized solver.
//!
//! Given a nonlinearity `Q` and background Navier data, the map first solves
//! the full nonlinear problem for the background `w` (Newton), linearizes at
//! `w`, and then sends a probe data pair to `w + v + r`, where `v` is the
//! linearized solve of the probe data and the correction `r` is the fixed
//! point of `r -> -G(R(v + r))` with homogeneous data, `G` the linearized
//! solver and `R` the integral Taylor remainder around `w`.

use crate::error::{Error, Result};
use crate::grid::{GridRef, ScalarField};
use crate::nonlinearity::Nonlinearity;
use crate::operator::{LinearOperator, NavierData, Solution};
use crate::quadrature::GaussLegendre;

/// Tunable knobs of the solution map.
#[derive(Debug, Clone)]
pub struct MapParams {
    /// Radius of the admissible input ball in the jet sup norm.
    pub delta_cap: f64,
    /// Absolute stop tolerance for fixed-point updates.
    pub fixed_point_tol: f64,
    pub max_fixed_point_iters: usize,
    /// Relative residual tolerance for the Newton background solve.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Gauss-Legendre order for the remainder parameter integral.
    pub quadrature_order: usize,
}

impl Default for MapParams {
    fn default() -> Self {
        MapParams {
            delta_cap: 0.5,
            fixed_point_tol: 1e-11,
            max_fixed_point_iters: 60,
            newton_tol: 1e-11,
            max_newton_iters: 30,
            quadrature_order: 8,
        }
    }
}

/// Sup norm over all jet slots of a mixed solution (value, both gradient
/// components through the grid stencil, companion Laplacian).
pub fn jet_sup_norm(sol: &Solution) -> f64 {
    sol.u
        .sup_norm()
        .max(sol.u.gradient().sup_norm())
        .max(sol.m.sup_norm())
}

/// Interleaved residual of the nonlinear mixed system at a candidate
/// solution: `lap_h u - m` on interior value rows, `lap_h m + Q(jet)` on
/// interior companion rows, and data mismatch on boundary rows.
pub fn nonlinear_residual(
    q: &Nonlinearity,
    candidate: &Solution,
    data: &NavierData,
) -> Result<Vec<f64>> {
    let grid = candidate.grid().clone();
    let jet = candidate.jet();
    let q_vals = q.eval_field(&jet)?;
    let lap_u = candidate.u.laplacian();
    let lap_m = candidate.m.laplacian();
    let n = grid.node_count();
    let mut res = vec![0.0; 2 * n];
    for k in 0..n {
        if let Some(slot) = grid.boundary_slot(k) {
            res[2 * k] = candidate.u.get(k) - data.value.get(slot);
            res[2 * k + 1] = candidate.m.get(k) - data.lap.get(slot);
        } else {
            res[2 * k] = lap_u.get(k) - candidate.m.get(k);
            res[2 * k + 1] = lap_m.get(k) + q_vals.get(k);
        }
    }
    Ok(res)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton solve of the nonlinear Navier problem
/// `bilap u + Q(x, u, grad u, lap u) = 0`, `(u, lap u) = data` on the
/// boundary, starting from the biharmonic solve of the same data.
pub fn solve_nonlinear(
    q: &Nonlinearity,
    data: &NavierData,
    params: &MapParams,
) -> Result<Solution> {
    let grid = data.grid().clone();
    let mut current = LinearOperator::biharmonic(&grid).solve(data, &ScalarField::zeros(&grid))?;
    let scale = {
        let res = nonlinear_residual(q, &current, data)?;
        sup(&res).max(1.0)
    };
    for _ in 0..params.max_newton_iters {
        let res = nonlinear_residual(q, &current, data)?;
        let res_norm = sup(&res);
        if res_norm <= params.newton_tol * scale {
            return Ok(current);
        }
        let jacobian = LinearOperator::from_nonlinearity(q, &current.jet())?;
        let neg: Vec<f64> = res.iter().map(|v| -v).collect();
        let step = jacobian.solve_raw(&neg)?;
        current.axpy(1.0, &step);
    }
    let res = nonlinear_residual(q, &current, data)?;
    Err(Error::NoConvergence {
        what: "newton iteration for the nonlinear Navier problem".into(),
        iterations: params.max_newton_iters,
        last_update: sup(&res),
    })
}

/// Outcome of the contraction fixed point.
#[derive(Debug, Clone)]
pub struct Contraction {
    pub correction: Solution,
    pub iterations: usize,
    /// Sup-norm sizes of successive updates.
    pub updates: Vec<f64>,
}

/// Output of one application of the solution map.
#[derive(Debug, Clone)]
pub struct MapOutput {
    /// Linearized response `v` to the probe data.
    pub linear_part: Solution,
    /// Fixed-point correction `r`.
    pub correction: Solution,
    /// Full nonlinear solution `w + v + r`.
    pub output: Solution,
    pub iterations: usize,
}

/// The solution map around a fixed background.
pub struct SolutionMap {
    q: Nonlinearity,
    background: Solution,
    background_data: NavierData,
    linearized: LinearOperator,
    quad: GaussLegendre,
    params: MapParams,
}

impl SolutionMap {
    /// Solve for the background and linearize there.
    pub fn new(
        q: Nonlinearity,
        background_data: NavierData,
        params: MapParams,
    ) -> Result<SolutionMap> {
        let background = solve_nonlinear(&q, &background_data, &params)?;
        let linearized = LinearOperator::from_nonlinearity(&q, &background.jet())?;
        Ok(SolutionMap {
            quad: GaussLegendre::new(params.quadrature_order.max(2)),
            q,
            background,
            background_data,
            linearized,
            params,
        })
    }

    /// Background around zero data (the default laboratory setup).
    pub fn around_zero(q: Nonlinearity, grid: &GridRef, params: MapParams) -> Result<SolutionMap> {
        SolutionMap::new(q, NavierData::zeros(grid), params)
    }

    /// Use an externally constructed background after validating that it
    /// actually solves the nonlinear problem.  Gauge-shifted scenarios build
    /// their background in closed form and salvage exactness this way.
    pub fn with_background(
        q: Nonlinearity,
        background_data: NavierData,
        background: Solution,
        params: MapParams,
    ) -> Result<SolutionMap> {
        let res = nonlinear_residual(&q, &background, &background_data)?;
        let scale = background.m.laplacian().sup_norm() + 1.0;
        let res_norm = sup(&res);
        if res_norm > 1e-7 * scale {
            return Err(Error::Precondition(format!(
                "supplied background does not solve the nonlinear problem: \
                 residual {res_norm:.3e} against scale {scale:.3e}"
            )));
        }
        let linearized = LinearOperator::from_nonlinearity(&q, &background.jet())?;
        Ok(SolutionMap {
            quad: GaussLegendre::new(params.quadrature_order.max(2)),
            q,
            background,
            background_data,
            linearized,
            params,
        })
    }

    pub fn grid(&self) -> &GridRef {
        self.background.grid()
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.q
    }

    pub fn background(&self) -> &Solution {
        &self.background
    }

    pub fn background_data(&self) -> &NavierData {
        &self.background_data
    }

    pub fn linearized(&self) -> &LinearOperator {
        &self.linearized
    }

    pub fn params(&self) -> &MapParams {
        &self.params
    }

    pub fn quadrature(&self) -> &GaussLegendre {
        &self.quad
    }

    /// Linearized response: solve the linearization at the background with
    /// the probe data and zero forcing.
    pub fn linear_response(&self, probe: &NavierData) -> Result<Solution> {
        self.linearized
            .solve(probe, &ScalarField::zeros(self.grid()))
    }

    /// Fixed point of `r -> -G(R(v + r))` with homogeneous Navier data.
    pub fn contraction(&self, v: &Solution) -> Result<Contraction> {
        let input_size = jet_sup_norm(v);
        if input_size > self.params.delta_cap {
            return Err(Error::ContractionBall {
                what: "solution-map input".into(),
                measured: input_size,
                cap: self.params.delta_cap,
            });
        }
        let base_jet = self.background.jet();
        let mut r = Solution::zeros(self.grid());
        let mut updates = Vec::new();
        for iter in 0..self.params.max_fixed_point_iters {
            let mut shifted = v.clone();
            shifted.axpy(1.0, &r);
            let iterate_size = jet_sup_norm(&shifted);
            if iterate_size > 2.0 * self.params.delta_cap {
                return Err(Error::ContractionBall {
                    what: "fixed-point iterate".into(),
                    measured: iterate_size,
                    cap: 2.0 * self.params.delta_cap,
                });
            }
            let remainder = self.q.remainder(&base_jet, &shifted.jet(), &self.quad)?;
            let next = self.linearized.solve_zero_data(&remainder.scaled(-1.0))?;
            let update = next.sub(&r);
            let update_size = update.u.sup_norm().max(update.m.sup_norm());
            updates.push(update_size);
            r = next;
            if update_size <= self.params.fixed_point_tol {
                return Ok(Contraction {
                    correction: r,
                    iterations: iter + 1,
                    updates,
                });
            }
        }
        Err(Error::NoConvergence {
            what: "contraction fixed point".into(),
            iterations: self.params.max_fixed_point_iters,
            last_update: *updates.last().unwrap_or(&f64::NAN),
        })
    }

    /// Apply the map to an already-computed linearized response.
    pub fn apply_field(&self, v: &Solution) -> Result<MapOutput> {
        let contraction = self.contraction(v)?;
        let mut output = self.background.clone();
        output.axpy(1.0, v);
        output.axpy(1.0, &contraction.correction);
        Ok(MapOutput {
            linear_part: v.clone(),
            correction: contraction.correction,
            output,
            iterations: contraction.iterations,
        })
    }

    /// Apply the map to a probe data pair.
    pub fn apply(&self, probe: &NavierData) -> Result<MapOutput> {
        let v = self.linear_response(probe)?;
        self.apply_field(&v)
    }

    /// Converse direction: given a full solution produced by this map,
    /// recover the probe data from the boundary traces of `u - w` (the
    /// companion field supplies the Laplacian trace exactly) and rebuild the
    /// linearized response.
    pub fn recover_input(&self, full: &Solution) -> Result<(NavierData, Solution)> {
        let diff = full.sub(&self.background);
        let probe = diff.navier_trace();
        let v = self.linear_response(&probe)?;
        Ok((probe, v))
    }

    /// Central-difference directional derivative of the map at zero probe in
    /// the direction of `probe`, with parameter step `eps`.
    pub fn directional_derivative(&self, probe: &NavierData, eps: f64) -> Result<Solution> {
        if eps <= 0.0 {
            return Err(Error::Precondition(
                "directional derivative needs a positive step".into(),
            ));
        }
        let plus = self.apply(&probe.scaled(eps))?;
        let minus = self.apply(&probe.scaled(-eps))?;
        let mut diff = plus.output.sub(&minus.output);
        diff = diff.scaled(1.0 / (2.0 * eps));
        Ok(diff)
    }

    /// Residual of the nonlinear problem at a candidate against the
    /// background data shifted by a probe.
    pub fn residual_at(&self, candidate: &Solution, probe: &NavierData) -> Result<f64> {
        let mut data = self.background_data.clone();
        data.axpy(1.0, probe);
        let res = nonlinear_residual(&self.q, candidate, &data)?;
        Ok(sup(&res))
    }
}
