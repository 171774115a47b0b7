//! The linearized operator `bilap u + A lap u + X . grad u + V u` in mixed
//! form, with Navier boundary data, banded factorization, and the discrete
//! adjoint solve.
//!
//! Mixed form introduces the companion unknown `m ~ lap u`.  Per node `k` the
//! system carries `u(k)` at position `2k` and `m(k)` at `2k + 1`:
//!
//! * interior row `2k`:      `lap_h u(k) - m(k) = 0`
//! * interior row `2k + 1`:  `lap_h m(k) + A m(k) + X . grad_h u(k) + V u(k) = F(k)`
//! * boundary rows:          `u(k) = f0`, `m(k) = f1`
//!
//! The interleaving keeps the bandwidth at `2 nx + 1` on both sides of the
//! diagonal.

use std::sync::OnceLock;

use crate::band::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, GridRef, ScalarField, VectorField};
use crate::nonlinearity::{Jet, LinearizedCoefficients, Nonlinearity};

/// Navier boundary data: the trace of the solution and the trace of its
/// Laplacian.
#[derive(Debug, Clone)]
pub struct NavierData {
    pub value: BoundaryTrace,
    pub lap: BoundaryTrace,
}

impl NavierData {
    pub fn zeros(grid: &GridRef) -> NavierData {
        NavierData {
            value: BoundaryTrace::zeros(grid),
            lap: BoundaryTrace::zeros(grid),
        }
    }

    pub fn new(value: BoundaryTrace, lap: BoundaryTrace) -> Result<NavierData> {
        if !value.grid().same_grid(lap.grid()) {
            return Err(Error::Shape(
                "Navier data components live on different grids".into(),
            ));
        }
        Ok(NavierData { value, lap })
    }

    pub fn from_fns(
        grid: &GridRef,
        f0: impl Fn(f64, f64) -> f64,
        f1: impl Fn(f64, f64) -> f64,
    ) -> NavierData {
        NavierData {
            value: BoundaryTrace::from_fn(grid, &f0),
            lap: BoundaryTrace::from_fn(grid, &f1),
        }
    }

    pub fn grid(&self) -> &GridRef {
        self.value.grid()
    }

    pub fn sup_norm(&self) -> f64 {
        self.value.sup_norm().max(self.lap.sup_norm())
    }

    pub fn axpy(&mut self, alpha: f64, other: &NavierData) {
        self.value.axpy(alpha, &other.value);
        self.lap.axpy(alpha, &other.lap);
    }

    pub fn sub(&self, other: &NavierData) -> NavierData {
        NavierData {
            value: self.value.sub(&other.value),
            lap: self.lap.sub(&other.lap),
        }
    }

    pub fn scaled(&self, alpha: f64) -> NavierData {
        let mut out = self.clone();
        out.value.scale(alpha);
        out.lap.scale(alpha);
        out
    }
}

/// Solution of a mixed Navier solve: the field and its companion Laplacian
/// unknown.  On solutions the companion is the exact discrete Laplacian slot
/// used by every interior equation, so jets built from it close the algebra
/// without stencil error.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: ScalarField,
    pub m: ScalarField,
}

impl Solution {
    pub fn zeros(grid: &GridRef) -> Solution {
        Solution {
            u: ScalarField::zeros(grid),
            m: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &GridRef {
        self.u.grid()
    }

    /// Second-order jet with the companion field in the Laplacian slot.
    pub fn jet(&self) -> Jet {
        Jet::of_parts(self.u.clone(), self.m.clone())
    }

    /// Boundary traces `(u, m)` — the Navier data the solve imposed.
    pub fn navier_trace(&self) -> NavierData {
        NavierData {
            value: self.u.trace(),
            lap: self.m.trace(),
        }
    }

    /// Interleaved raw unknown vector.
    pub fn raw(&self) -> Vec<f64> {
        let n = self.u.grid().node_count();
        let mut x = vec![0.0; 2 * n];
        for k in 0..n {
            x[2 * k] = self.u.get(k);
            x[2 * k + 1] = self.m.get(k);
        }
        x
    }

    pub fn from_raw(grid: &GridRef, x: &[f64]) -> Solution {
        let n = grid.node_count();
        let mut u = ScalarField::zeros(grid);
        let mut m = ScalarField::zeros(grid);
        for k in 0..n {
            u.set(k, x[2 * k]);
            m.set(k, x[2 * k + 1]);
        }
        Solution { u, m }
    }

    pub fn axpy(&mut self, alpha: f64, other: &Solution) {
        self.u.axpy(alpha, &other.u);
        self.m.axpy(alpha, &other.m);
    }

    pub fn sub(&self, other: &Solution) -> Solution {
        Solution {
            u: self.u.sub(&other.u),
            m: self.m.sub(&other.m),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Solution {
        Solution {
            u: self.u.scaled(alpha),
            m: self.m.scaled(alpha),
        }
    }
}

/// Result of a discrete adjoint solve.  `psi` is the adjoint field recovered
/// from the companion block of the transpose solve; its values on boundary
/// nodes are multipliers, meaningful only through the raw vectors.
#[derive(Debug, Clone)]
pub struct AdjointSolution {
    pub psi: ScalarField,
    raw: Vec<f64>,
    rhs: Vec<f64>,
}

impl AdjointSolution {
    /// Raw transpose-system solution `y` with `S^T y = e`.
    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// The functional vector `e` representing `x -> sum_k W(k) F(k) u(k)`.
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Pair the raw adjoint vector against a forward right-hand side.
    pub fn pair_forward_rhs(&self, b: &[f64]) -> f64 {
        self.raw.iter().zip(b).map(|(a, c)| a * c).sum()
    }

    /// Pair the functional vector against a raw forward solution.
    pub fn pair_forward_solution(&self, x: &[f64]) -> f64 {
        self.rhs.iter().zip(x).map(|(a, c)| a * c).sum()
    }
}

struct Factored {
    lu: BandLu,
    matrix_norm: f64,
}

/// Assembled linearized operator with lazily cached banded factorization.
/// One factorization serves every forward, transpose, and adjoint solve
/// against the same coefficients.
pub struct LinearOperator {
    grid: GridRef,
    coeffs: LinearizedCoefficients,
    factored: OnceLock<std::result::Result<Factored, ()>>,
}

/// Relative condition level beyond which the assembled operator is treated
/// as singular: zero is then (numerically) a Navier eigenvalue.
const CONDITION_LIMIT: f64 = 1e12;

/// Certification threshold on the componentwise-normalized backward error of
/// a banded solve.
const BACKWARD_ERROR_LIMIT: f64 = 1e-8;

impl LinearOperator {
    pub fn new(grid: GridRef, coeffs: LinearizedCoefficients) -> Result<LinearOperator> {
        if !grid.same_grid(coeffs.grid()) {
            return Err(Error::Shape(
                "coefficient fields live on a different grid".into(),
            ));
        }
        Ok(LinearOperator {
            grid,
            coeffs,
            factored: OnceLock::new(),
        })
    }

    /// The unperturbed biharmonic operator.
    pub fn biharmonic(grid: &GridRef) -> LinearOperator {
        LinearOperator {
            grid: grid.clone(),
            coeffs: LinearizedCoefficients::zeros(grid),
            factored: OnceLock::new(),
        }
    }

    /// Linearization of `bilap + Q` along a base jet.
    pub fn from_nonlinearity(q: &Nonlinearity, base: &Jet) -> Result<LinearOperator> {
        let coeffs = q.linearized_coefficients(base)?;
        LinearOperator::new(base.grid().clone(), coeffs)
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn coefficients(&self) -> &LinearizedCoefficients {
        &self.coeffs
    }

    fn system_bandwidth(&self) -> usize {
        2 * self.grid.nx() + 1
    }

    /// Assemble the interleaved band matrix.
    fn assemble(&self) -> BandMatrix {
        let g = &self.grid;
        let n = g.node_count();
        let nx = g.nx();
        let sx = 1.0 / (g.hx() * g.hx());
        let sy = 1.0 / (g.hy() * g.hy());
        let cx = 1.0 / (2.0 * g.hx());
        let cy = 1.0 / (2.0 * g.hy());
        let band = self.system_bandwidth();
        let mut a = BandMatrix::zeros(2 * n, band, band);

        for k in 0..n {
            let (ru, rm) = (2 * k, 2 * k + 1);
            if g.is_boundary(k) {
                a.set(ru, ru, 1.0);
                a.set(rm, rm, 1.0);
                continue;
            }
            // lap_h u - m = 0
            a.set(ru, ru, -2.0 * sx - 2.0 * sy);
            a.set(ru, 2 * (k - 1), sx);
            a.set(ru, 2 * (k + 1), sx);
            a.set(ru, 2 * (k - nx), sy);
            a.set(ru, 2 * (k + nx), sy);
            a.set(ru, rm, -1.0);
            // lap_h m + A m + X . grad_h u + V u = F
            a.set(rm, rm, -2.0 * sx - 2.0 * sy + self.coeffs.lap_coeff.get(k));
            a.set(rm, 2 * (k - 1) + 1, sx);
            a.set(rm, 2 * (k + 1) + 1, sx);
            a.set(rm, 2 * (k - nx) + 1, sy);
            a.set(rm, 2 * (k + nx) + 1, sy);
            a.set(rm, ru, self.coeffs.val_coeff.get(k));
            a.add(rm, 2 * (k + 1), self.coeffs.grad_coeff.x(k) * cx);
            a.add(rm, 2 * (k - 1), -self.coeffs.grad_coeff.x(k) * cx);
            a.add(rm, 2 * (k + nx), self.coeffs.grad_coeff.y(k) * cy);
            a.add(rm, 2 * (k - nx), -self.coeffs.grad_coeff.y(k) * cy);
        }
        a
    }

    /// Apply the assembled system to a raw vector without materializing the
    /// matrix.  Used for residual certification after a solve.
    pub fn apply_system(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let n = g.node_count();
        assert_eq!(x.len(), 2 * n);
        let nx = g.nx();
        let sx = 1.0 / (g.hx() * g.hx());
        let sy = 1.0 / (g.hy() * g.hy());
        let cx = 1.0 / (2.0 * g.hx());
        let cy = 1.0 / (2.0 * g.hy());
        let u = |k: usize| x[2 * k];
        let m = |k: usize| x[2 * k + 1];
        let mut out = vec![0.0; 2 * n];
        for k in 0..n {
            if g.is_boundary(k) {
                out[2 * k] = u(k);
                out[2 * k + 1] = m(k);
                continue;
            }
            let lap_u = sx * (u(k - 1) + u(k + 1)) + sy * (u(k - nx) + u(k + nx))
                - (2.0 * sx + 2.0 * sy) * u(k);
            let lap_m = sx * (m(k - 1) + m(k + 1)) + sy * (m(k - nx) + m(k + nx))
                - (2.0 * sx + 2.0 * sy) * m(k);
            let gx = cx * (u(k + 1) - u(k - 1));
            let gy = cy * (u(k + nx) - u(k - nx));
            out[2 * k] = lap_u - m(k);
            out[2 * k + 1] = lap_m
                + self.coeffs.lap_coeff.get(k) * m(k)
                + self.coeffs.grad_coeff.x(k) * gx
                + self.coeffs.grad_coeff.y(k) * gy
                + self.coeffs.val_coeff.get(k) * u(k);
        }
        out
    }

    /// Apply the transpose of the assembled system to a raw vector.  Used to
    /// certify adjoint solves independently of the factorization.
    pub fn apply_system_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.assemble().matvec_transpose(y)
    }

    /// Right-hand side vector for given Navier data and interior forcing.
    pub fn rhs_vector(&self, data: &NavierData, forcing: &ScalarField) -> Vec<f64> {
        let g = &self.grid;
        let n = g.node_count();
        let mut b = vec![0.0; 2 * n];
        for k in 0..n {
            if let Some(slot) = g.boundary_slot(k) {
                b[2 * k] = data.value.get(slot);
                b[2 * k + 1] = data.lap.get(slot);
            } else {
                b[2 * k + 1] = forcing.get(k);
            }
        }
        b
    }

    fn factored(&self) -> Result<&Factored> {
        let entry = self.factored.get_or_init(|| {
            let matrix = self.assemble();
            let matrix_norm = matrix.inf_norm();
            let lu = matrix.factor().map_err(|_| ())?;
            // One-shot inverse-growth probe: a solve against a fixed generic
            // vector estimates how strongly the inverse can amplify data.
            let n = lu.n();
            let probe: Vec<f64> = (0..n)
                .map(|i| ((i % 13) as f64 - 6.0) / 6.0 + 1e-3 * ((i % 7) as f64))
                .collect();
            let probe_norm = probe.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let z = lu.solve(&probe);
            let growth = z.iter().fold(0.0f64, |a, v| a.max(v.abs())) / probe_norm;
            if matrix_norm * growth > CONDITION_LIMIT {
                return Err(());
            }
            Ok(Factored { lu, matrix_norm })
        });
        entry.as_ref().map_err(|_| Error::NavierEigenvalue)
    }

    /// Infinity norm of the assembled matrix.
    pub fn matrix_norm(&self) -> Result<f64> {
        Ok(self.factored()?.matrix_norm)
    }

    fn certify(&self, x: &[f64], b: &[f64], matrix_norm: f64) -> Result<()> {
        let ax = self.apply_system(x);
        let mut res = 0.0f64;
        let mut xn = 0.0f64;
        let mut bn = 0.0f64;
        for i in 0..x.len() {
            res = res.max((b[i] - ax[i]).abs());
            xn = xn.max(x[i].abs());
            bn = bn.max(b[i].abs());
        }
        let eta = res / (matrix_norm * xn + bn).max(f64::MIN_POSITIVE);
        if eta > BACKWARD_ERROR_LIMIT {
            return Err(Error::Precondition(format!(
                "banded solve failed residual certification: backward error {eta:.3e}"
            )));
        }
        Ok(())
    }

    /// Solve the Navier problem with interior forcing.
    pub fn solve(&self, data: &NavierData, forcing: &ScalarField) -> Result<Solution> {
        if !self.grid.same_grid(data.grid()) || !self.grid.same_grid(forcing.grid()) {
            return Err(Error::Shape("solve inputs live on a different grid".into()));
        }
        let f = self.factored()?;
        let b = self.rhs_vector(data, forcing);
        let x = f.lu.solve(&b);
        self.certify(&x, &b, f.matrix_norm)?;
        let sol = Solution::from_raw(&self.grid, &x);
        sol.u.assert_finite("navier solve")?;
        sol.m.assert_finite("navier solve companion")?;
        Ok(sol)
    }

    /// Solve with homogeneous Navier data.
    pub fn solve_zero_data(&self, forcing: &ScalarField) -> Result<Solution> {
        self.solve(&NavierData::zeros(&self.grid), forcing)
    }

    /// Solve against a raw interleaved right-hand side (used by the Newton
    /// iteration, whose residual populates both equation families).
    pub fn solve_raw(&self, b: &[f64]) -> Result<Solution> {
        if b.len() != 2 * self.grid.node_count() {
            return Err(Error::Shape("raw right-hand side has wrong length".into()));
        }
        let f = self.factored()?;
        let x = f.lu.solve(b);
        self.certify(&x, b, f.matrix_norm)?;
        let sol = Solution::from_raw(&self.grid, &x);
        sol.u.assert_finite("raw navier solve")?;
        sol.m.assert_finite("raw navier solve companion")?;
        Ok(sol)
    }

    /// Solve the transpose system against the functional `x -> sum_k W(k)
    /// target(k) u(k)` and recover the adjoint field from the companion
    /// block: `psi(k) = y(2k+1) / W(k)`.
    pub fn solve_adjoint(&self, target: &ScalarField) -> Result<AdjointSolution> {
        if !self.grid.same_grid(target.grid()) {
            return Err(Error::Shape(
                "adjoint target lives on a different grid".into(),
            ));
        }
        let f = self.factored()?;
        let n = self.grid.node_count();
        let mut e = vec![0.0; 2 * n];
        for k in 0..n {
            e[2 * k] = self.grid.weight(k) * target.get(k);
        }
        let y = f.lu.solve_transpose(&e);
        let mut psi = ScalarField::zeros(&self.grid);
        for k in 0..n {
            psi.set(k, y[2 * k + 1] / self.grid.weight(k));
        }
        psi.assert_finite("adjoint field")?;
        Ok(AdjointSolution {
            psi,
            raw: y,
            rhs: e,
        })
    }

    /// The operator applied by stencil composition:
    /// `lap_h(lap_h u) + A lap_h u + X . grad_h u + V u`.
    ///
    /// Away from the boundary this agrees with the mixed system; within two
    /// layers of the boundary the one-sided stencils of the composition
    /// differ from the mixed solve's companion treatment.
    pub fn apply_composed(&self, u: &ScalarField) -> ScalarField {
        let lap = u.laplacian();
        let grad = u.gradient();
        let mut out = lap.laplacian();
        for k in 0..self.grid.node_count() {
            out.set(
                k,
                out.get(k)
                    + self.coeffs.lap_coeff.get(k) * lap.get(k)
                    + self.coeffs.grad_coeff.x(k) * grad.x(k)
                    + self.coeffs.grad_coeff.y(k) * grad.y(k)
                    + self.coeffs.val_coeff.get(k) * u.get(k),
            );
        }
        out
    }

    /// The formal adjoint applied by stencil composition:
    /// `lap_h(lap_h psi + A psi) - div_h(X psi) + V psi`.
    pub fn apply_formal_adjoint(&self, psi: &ScalarField) -> ScalarField {
        let g = &self.grid;
        let lap_psi = psi.laplacian();
        let mut a_psi = ScalarField::zeros(g);
        let mut xx = ScalarField::zeros(g);
        let mut xy = ScalarField::zeros(g);
        for k in 0..g.node_count() {
            a_psi.set(k, self.coeffs.lap_coeff.get(k) * psi.get(k));
            xx.set(k, self.coeffs.grad_coeff.x(k) * psi.get(k));
            xy.set(k, self.coeffs.grad_coeff.y(k) * psi.get(k));
        }
        let div = VectorField::from_fields(xx, xy).divergence();
        let mut inner = lap_psi;
        inner.axpy(1.0, &a_psi);
        let mut out = inner.laplacian();
        for k in 0..g.node_count() {
            out.set(
                k,
                out.get(k) - div.get(k) + self.coeffs.val_coeff.get(k) * psi.get(k),
            );
        }
        out
    }
}
