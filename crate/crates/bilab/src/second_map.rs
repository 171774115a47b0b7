//! The second solution map: transfer a solution of one nonlinear problem to
//! a solution of another sharing its Cauchy data, by iterating a clamped
//! least-squares solve.
//!
//! Given `u1` solving problem 1, the transfer looks for a clamped shift `r`
//! such that `u1 - r` solves problem 2.  Subtracting the two equations and
//! adding the linearization of problem 2 at its background to both sides
//! yields the fixed-point target
//!
//! `L2 r = (A2 lap + X2 . grad + V2) r + Q2(jet(u1 - r)) - Q1(jet u1)`,
//!
//! solved at each sweep in the least-squares sense over the clamped
//! subspace.  Because `r` is clamped, `u1 - r` carries the same Cauchy
//! quadruple as `u1` exactly.

use crate::clamped::{interior_l2, ClampedProjector};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::nonlinearity::Jet;
use crate::operator::{LinearOperator, NavierData, Solution};
use crate::solution_map::SolutionMap;

#[derive(Debug, Clone)]
pub struct TransferParams {
    /// Stop when successive shifts differ by at most this sup norm.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for TransferParams {
    fn default() -> Self {
        TransferParams {
            tol: 1e-8,
            max_iters: 40,
        }
    }
}

/// Outcome of one transfer.
#[derive(Debug, Clone)]
pub struct Transfer {
    /// The clamped shift `r`; the transferred solution is `u1 - r`.
    pub shift: ScalarField,
    /// `u1 - r` with companion `m1 - lap_h r`.
    pub transferred: Solution,
    pub iterations: usize,
    pub updates: Vec<f64>,
    /// Relative least-squares residual of the final sweep.
    pub lsq_residual: f64,
    /// Interior sup norm of the fixed-point defect at the final shift; this
    /// equals the interior residual of problem 2 at the transferred
    /// solution.
    pub defect: f64,
}

/// Transfer machinery between two solution maps on the same grid.
pub struct SecondMap<'a> {
    map1: &'a SolutionMap,
    map2: &'a SolutionMap,
    projector: ClampedProjector,
    params: TransferParams,
}

impl<'a> SecondMap<'a> {
    pub fn new(
        map1: &'a SolutionMap,
        map2: &'a SolutionMap,
        params: TransferParams,
    ) -> Result<SecondMap<'a>> {
        if !map1.grid().same_grid(map2.grid()) {
            return Err(Error::Shape(
                "the two solution maps live on different grids".into(),
            ));
        }
        // The projector needs its own copy of the linearized operator of
        // problem 2; only the stencil application is used, never the
        // factorization.
        let op = LinearOperator::new(
            map2.grid().clone(),
            map2.linearized().coefficients().clone(),
        )?;
        Ok(SecondMap {
            map1,
            map2,
            projector: ClampedProjector::new(op)?,
            params,
        })
    }

    pub fn projector(&self) -> &ClampedProjector {
        &self.projector
    }

    /// The fixed-point target `(A2 lap + X2 grad + V2) r + Q2(jet(u1 - r)) -
    /// Q1(jet u1)`.
    fn target(
        &self,
        r: &ScalarField,
        u1: &Solution,
        q1_at_u1: &ScalarField,
    ) -> Result<ScalarField> {
        let grid = self.map1.grid().clone();
        let coeffs = self.map2.linearized().coefficients();
        let lap_r = r.laplacian();
        let grad_r = r.gradient();
        let shifted_jet = Jet::of_parts(u1.u.sub(r), u1.m.sub(&lap_r));
        let q2_shifted = self.map2.nonlinearity().eval_field(&shifted_jet)?;
        let mut out = ScalarField::zeros(&grid);
        for k in 0..grid.node_count() {
            out.set(
                k,
                coeffs.lap_coeff.get(k) * lap_r.get(k)
                    + coeffs.grad_coeff.x(k) * grad_r.x(k)
                    + coeffs.grad_coeff.y(k) * grad_r.y(k)
                    + coeffs.val_coeff.get(k) * r.get(k)
                    + q2_shifted.get(k)
                    - q1_at_u1.get(k),
            );
        }
        Ok(out)
    }

    /// Run the transfer iteration on a solution of problem 1.
    pub fn transfer(&self, u1: &Solution) -> Result<Transfer> {
        let q1_at_u1 = self.map1.nonlinearity().eval_field(&u1.jet())?;
        let mut shift = self.map1.background().u.sub(&self.map2.background().u);
        let mut updates = Vec::new();
        for iter in 0..self.params.max_iters {
            let f = self.target(&shift, u1, &q1_at_u1)?;
            let projection = self.projector.project(&f)?;
            let update = projection.preimage.sub(&shift).sup_norm();
            updates.push(update);
            shift = projection.preimage.clone();
            if update <= self.params.tol {
                let defect_field = self
                    .projector
                    .operator()
                    .apply_composed(&shift)
                    .sub(&self.target(&shift, u1, &q1_at_u1)?);
                let mut defect = 0.0f64;
                let grid = self.map1.grid();
                for k in 0..grid.node_count() {
                    if !grid.is_boundary(k) {
                        defect = defect.max(defect_field.get(k).abs());
                    }
                }
                let transferred = Solution {
                    u: u1.u.sub(&shift),
                    m: u1.m.sub(&shift.laplacian()),
                };
                return Ok(Transfer {
                    shift,
                    transferred,
                    iterations: iter + 1,
                    updates,
                    lsq_residual: projection.relative_residual,
                    defect,
                });
            }
        }
        Err(Error::NoConvergence {
            what: "second-map transfer iteration".into(),
            iterations: self.params.max_iters,
            last_update: *updates.last().unwrap_or(&f64::NAN),
        })
    }

    /// Check that the derivative of the transfer is tangent to the
    /// linearized response of problem 2.  Requires the two linearizations to
    /// coincide along their backgrounds (otherwise the identity is not
    /// expected to hold) and returns the sup defect of the central
    /// difference.
    pub fn derivative_check(&self, probe: &NavierData, eps: f64, coeff_tol: f64) -> Result<f64> {
        let dist = self
            .map1
            .linearized()
            .coefficients()
            .sup_distance(self.map2.linearized().coefficients());
        if dist > coeff_tol {
            return Err(Error::Precondition(format!(
                "transfer derivative check needs coinciding linearizations; \
                 coefficient distance {dist:.3e} exceeds {coeff_tol:.3e}"
            )));
        }
        let plus = self.transfer(&self.map1.apply(&probe.scaled(eps))?.output)?;
        let minus = self.transfer(&self.map1.apply(&probe.scaled(-eps))?.output)?;
        let derivative = plus
            .transferred
            .u
            .sub(&minus.transferred.u)
            .scaled(1.0 / (2.0 * eps));
        let reference = self.map2.linear_response(probe)?;
        Ok(derivative.sub(&reference.u).sup_norm())
    }
}

/// Consistency helper for gauge scenarios: interior l2 distance between two
/// fields, ignoring the boundary ring.
pub fn interior_distance(a: &ScalarField, b: &ScalarField) -> f64 {
    interior_l2(&a.sub(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clamped::clamped_bump;
    use crate::grid::{DomainGrid, GridRef};
    use crate::nonlinearity::{Gamma, GaugeShift, Nonlinearity};
    use crate::solution_map::MapParams;

    fn probe(grid: &GridRef, s: f64) -> NavierData {
        NavierData::from_fns(
            grid,
            move |x, y| s * (x * x - 0.5 * y + x * y),
            move |x, y| s * (0.3 * x + 0.2 * y),
        )
    }

    fn gauge_pair(g: &GridRef, q1: Nonlinearity, phi: &ScalarField) -> (SolutionMap, SolutionMap) {
        let data = probe(g, 0.04);
        let map1 = SolutionMap::new(q1.clone(), data.clone(), MapParams::default()).unwrap();
        // Q2 = gauge transform of Q1 by -phi; then u + phi solves problem 2
        // whenever u solves problem 1, and the closed-form background
        // w2 = w1 + phi passes the residual gate exactly.
        let minus_phi = phi.scaled(-1.0);
        let q2 = Nonlinearity::gauged(q1, GaugeShift::from_field(&minus_phi));
        let w1 = map1.background().clone();
        let w2 = Solution {
            u: w1.u.add(phi),
            m: w1.m.add(&phi.laplacian()),
        };
        let map2 = SolutionMap::with_background(q2, data, w2, MapParams::default()).unwrap();
        (map1, map2)
    }

    #[test]
    fn identical_problems_give_zero_shift() {
        let g = DomainGrid::new(33, 33).unwrap();
        let q = Nonlinearity::sine(Gamma::One);
        let map1 = SolutionMap::new(q.clone(), probe(&g, 0.04), MapParams::default()).unwrap();
        let map2 = SolutionMap::new(q, probe(&g, 0.04), MapParams::default()).unwrap();
        let second = SecondMap::new(&map1, &map2, TransferParams::default()).unwrap();
        let u1 = map1.apply(&probe(&g, 0.02)).unwrap().output;
        let t = second.transfer(&u1).unwrap();
        assert_eq!(t.shift.sup_norm(), 0.0);
        assert_eq!(t.transferred.u.sub(&u1.u).sup_norm(), 0.0);
        assert_eq!(t.iterations, 1);
    }

    #[test]
    fn gauge_pair_shift_is_recovered() {
        let g = DomainGrid::new(33, 33).unwrap();
        let phi = clamped_bump(&g).scaled(0.05);
        let (map1, map2) = gauge_pair(&g, Nonlinearity::sine(Gamma::One), &phi);
        let second = SecondMap::new(&map1, &map2, TransferParams::default()).unwrap();
        let u1 = map1.apply(&probe(&g, 0.02)).unwrap().output;
        let t = second.transfer(&u1).unwrap();
        // u2 = u1 + phi, so the shift r = u1 - u2 = -phi.
        let err = t.shift.add(&phi).sup_norm();
        assert!(err < 1e-7, "shift error {err}, iterations {}", t.iterations);
        assert!(t.defect < 1e-6, "defect {}", t.defect);
        assert!(t.iterations <= 5, "iterations {}", t.iterations);
        // The transferred solution keeps the Cauchy quadruple of u1 exactly.
        let cd = crate::cauchy::CauchyData::distance(&t.transferred, &u1);
        assert_eq!(cd, 0.0);
    }

    #[test]
    fn derivative_check_for_identical_problems() {
        let g = DomainGrid::new(33, 33).unwrap();
        let q = Nonlinearity::power(3, Gamma::One).unwrap();
        let map1 = SolutionMap::around_zero(q.clone(), &g, MapParams::default()).unwrap();
        let map2 = SolutionMap::around_zero(q, &g, MapParams::default()).unwrap();
        let second = SecondMap::new(&map1, &map2, TransferParams::default()).unwrap();
        let defect = second
            .derivative_check(&probe(&g, 0.3), 0.05, 1e-12)
            .unwrap();
        // Central differences leave an O(eps^2) footprint.
        assert!(defect < 1e-3, "defect {defect}");
    }

    #[test]
    fn derivative_check_refuses_mismatched_linearizations() {
        let g = DomainGrid::new(33, 33).unwrap();
        let map1 =
            SolutionMap::around_zero(Nonlinearity::sine(Gamma::One), &g, MapParams::default())
                .unwrap();
        let map2 = SolutionMap::around_zero(
            Nonlinearity::power(3, Gamma::One).unwrap(),
            &g,
            MapParams::default(),
        )
        .unwrap();
        let second = SecondMap::new(&map1, &map2, TransferParams::default()).unwrap();
        let err = second
            .derivative_check(&probe(&g, 0.1), 0.05, 1e-12)
            .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "got {err:?}");
    }
}
