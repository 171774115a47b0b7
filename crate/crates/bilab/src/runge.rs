//! Density toolchain: families of global solutions driven by boundary
//! Fourier modes, least-squares approximation of local solutions on
//! subdomains, and point control of the solution jet at a marked node.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, GridRef, ScalarField};
use crate::operator::{LinearOperator, NavierData, Solution};

/// Value of the `t`-th boundary Fourier mode at arclength `tau` along the
/// unit-square perimeter (total length 4):
/// `1, cos(pi tau / 2), sin(pi tau / 2), cos(pi tau), sin(pi tau), ...`.
pub fn fourier_mode(t: usize, tau: f64) -> f64 {
    if t == 0 {
        return 1.0;
    }
    let rank = t.div_ceil(2) as f64;
    let angle = rank * std::f64::consts::FRAC_PI_2 * tau;
    if t % 2 == 1 {
        angle.cos()
    } else {
        angle.sin()
    }
}

/// A family of global solutions of one linearized Navier problem, driven by
/// the first boundary Fourier modes.  Member `2t` puts mode `t` on the value
/// trace, member `2t + 1` puts it on the Laplacian trace.
pub struct RungeFamily {
    op: LinearOperator,
    datas: Vec<NavierData>,
    members: Vec<Solution>,
}

/// Boundary independence measurement of a family.
#[derive(Debug, Clone)]
pub struct IndependenceReport {
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl RungeFamily {
    pub fn new(op: LinearOperator, count: usize) -> Result<RungeFamily> {
        if count == 0 {
            return Err(Error::Precondition(
                "a runge family needs at least one member".into(),
            ));
        }
        let grid = op.grid().clone();
        let zero_forcing = ScalarField::zeros(&grid);
        let mut datas = Vec::with_capacity(count);
        let mut members = Vec::with_capacity(count);
        for idx in 0..count {
            let t = idx / 2;
            let trace = BoundaryTrace::from_arclength_fn(&grid, |tau| fourier_mode(t, tau));
            let data = if idx % 2 == 0 {
                NavierData::new(trace, BoundaryTrace::zeros(&grid))?
            } else {
                NavierData::new(BoundaryTrace::zeros(&grid), trace)?
            };
            let sol = op.solve(&data, &zero_forcing)?;
            datas.push(data);
            members.push(sol);
        }
        Ok(RungeFamily { op, datas, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn grid(&self) -> &GridRef {
        self.op.grid()
    }

    pub fn operator(&self) -> &LinearOperator {
        &self.op
    }

    pub fn member(&self, i: usize) -> &Solution {
        &self.members[i]
    }

    pub fn data(&self, i: usize) -> &NavierData {
        &self.datas[i]
    }

    /// Singular values of the stacked boundary-data vectors.  A healthy
    /// family is numerically independent at the boundary.
    pub fn independence(&self) -> Result<IndependenceReport> {
        let l = self.grid().boundary_len();
        let k = self.members.len();
        let mut b = DMatrix::zeros(k, 2 * l);
        for (i, d) in self.datas.iter().enumerate() {
            for s in 0..l {
                b[(i, s)] = d.value.get(s);
                b[(i, l + s)] = d.lap.get(s);
            }
        }
        let svd = b.svd(false, false);
        let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let sigma_min = svd
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if sigma_min <= 1e-10 * sigma_max {
            return Err(Error::RankDeficient(format!(
                "runge family boundary data is numerically dependent: \
                 sigma_min {sigma_min:.3e} against sigma_max {sigma_max:.3e}"
            )));
        }
        Ok(IndependenceReport {
            sigma_min,
            sigma_max,
        })
    }

    /// Weighted least-squares fit of a local solution on a subdomain,
    /// matching values, both first derivatives, and the Laplacian with unit
    /// weights.  `reg` is the relative Tikhonov parameter (`lambda^2 = reg *
    /// sigma_max^2`); zero falls back to a truncated pseudoinverse.
    ///
    /// The target must be a local solution: the composed operator applied to
    /// it must vanish on the subdomain up to a truncation-scaled allowance.
    pub fn approximate_on(
        &self,
        target: &ScalarField,
        sub: &Subdomain,
        reg: f64,
    ) -> Result<LocalFit> {
        if !self.grid().same_grid(target.grid()) {
            return Err(Error::Shape("target lives on a different grid".into()));
        }
        let nodes: Vec<usize> = sub.nodes().collect();
        let k = self.members.len();
        let rows = 4 * nodes.len();
        if rows < k {
            return Err(Error::Precondition(format!(
                "subdomain provides {rows} constraints for {k} members"
            )));
        }

        // Composed-operator values are only meaningful two layers in: closer
        // to the boundary the inner Laplacian mixes one-sided stencils.
        let applied = self.op.apply_composed(target);
        let mut local_residual = 0.0f64;
        for &node in &nodes {
            if self.grid().depth(node) >= 2 {
                local_residual = local_residual.max(applied.get(node).abs());
            }
        }
        let h = self.grid().hx().max(self.grid().hy());
        let allowance = 400.0 * h * h * (1.0 + target.c2_norm());
        if local_residual > allowance {
            return Err(Error::Precondition(format!(
                "target is not a local solution on the subdomain: residual \
                 {local_residual:.3e} exceeds allowance {allowance:.3e}"
            )));
        }

        let t_grad = target.gradient();
        let t_lap = target.laplacian();
        let m_grads: Vec<_> = self.members.iter().map(|m| m.u.gradient()).collect();

        let mut a = DMatrix::zeros(rows, k);
        let mut b = DVector::zeros(rows);
        for (r, &node) in nodes.iter().enumerate() {
            for (c, member) in self.members.iter().enumerate() {
                a[(4 * r, c)] = member.u.get(node);
                a[(4 * r + 1, c)] = m_grads[c].x(node);
                a[(4 * r + 2, c)] = m_grads[c].y(node);
                a[(4 * r + 3, c)] = member.m.get(node);
            }
            b[4 * r] = target.get(node);
            b[4 * r + 1] = t_grad.x(node);
            b[4 * r + 2] = t_grad.y(node);
            b[4 * r + 3] = t_lap.get(node);
        }
        let (coeff, condition) = tikhonov_solve(a, &b, reg)?;

        let mut approximation = Solution::zeros(self.grid());
        for (c, member) in self.members.iter().enumerate() {
            approximation.axpy(coeff[c], member);
        }
        let diff = target.sub(&approximation.u);
        let d_grad = diff.gradient();
        let d_lap = diff.laplacian();
        let mut c2_error = 0.0f64;
        let mut l2_sq = 0.0;
        for &node in &nodes {
            c2_error = c2_error
                .max(diff.get(node).abs())
                .max(d_grad.x(node).abs())
                .max(d_grad.y(node).abs())
                .max(d_lap.get(node).abs());
            l2_sq += diff.get(node) * diff.get(node);
        }
        Ok(LocalFit {
            coefficients: coeff.iter().cloned().collect(),
            approximation,
            c2_error,
            l2_error: l2_sq.sqrt(),
            local_residual,
            condition,
        })
    }

    /// Minimum-norm combination whose jet hits the given targets at a node.
    /// `reg > 0` trades exactness for coefficient size.
    pub fn point_control(
        &self,
        i: usize,
        j: usize,
        targets: &PointTargets,
        reg: f64,
    ) -> Result<PointControl> {
        let g = self.grid().clone();
        let node = g.index(i, j);
        if g.is_boundary(node) {
            return Err(Error::Precondition(
                "point control needs an interior node".into(),
            ));
        }
        let k = self.members.len();
        if k <= 4 {
            return Err(Error::Precondition(format!(
                "point control needs more than 4 members, got {k}"
            )));
        }
        let mut a = DMatrix::zeros(4, k);
        for (c, member) in self.members.iter().enumerate() {
            let grad = member.u.gradient();
            a[(0, c)] = member.u.get(node);
            a[(1, c)] = grad.x(node);
            a[(2, c)] = grad.y(node);
            a[(3, c)] = member.m.get(node);
        }
        let svd = a.clone().svd(false, false);
        let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let sigma_min = svd
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if sigma_min <= 1e-10 * sigma_max {
            return Err(Error::RankDeficient(format!(
                "point-control matrix is rank deficient: sigma_min {sigma_min:.3e}"
            )));
        }
        let b = DVector::from_column_slice(&[
            targets.value,
            targets.grad[0],
            targets.grad[1],
            targets.lap,
        ]);
        let (coeff, _) = tikhonov_solve(a, &b, reg)?;
        let mut combination = Solution::zeros(&g);
        for (c, member) in self.members.iter().enumerate() {
            combination.axpy(coeff[c], member);
        }
        let grad = combination.u.gradient();
        let achieved = PointTargets {
            value: combination.u.get(node),
            grad: [grad.x(node), grad.y(node)],
            lap: combination.m.get(node),
        };
        let residual = (achieved.value - targets.value)
            .abs()
            .max((achieved.grad[0] - targets.grad[0]).abs())
            .max((achieved.grad[1] - targets.grad[1]).abs())
            .max((achieved.lap - targets.lap).abs());
        Ok(PointControl {
            coefficients: coeff.iter().cloned().collect(),
            combination,
            achieved,
            residual,
        })
    }
}

/// Least-squares fit of a target on a subdomain by family members.
#[derive(Debug, Clone)]
pub struct LocalFit {
    pub coefficients: Vec<f64>,
    pub approximation: Solution,
    /// Largest mismatch of value, first derivatives, or Laplacian over the
    /// subdomain nodes.
    pub c2_error: f64,
    pub l2_error: f64,
    /// Composed-operator residual of the target over the subdomain.
    pub local_residual: f64,
    /// Condition number of the fitting matrix.
    pub condition: f64,
}

/// Solve `min |Ax - b|^2 + lambda^2 |x|^2` with `lambda^2 = reg *
/// sigma_max^2`; `reg = 0` uses a truncated pseudoinverse.  Returns the
/// solution and the condition number of `A`.
pub(crate) fn tikhonov_solve(
    a: DMatrix<f64>,
    b: &DVector<f64>,
    reg: f64,
) -> Result<(DVector<f64>, f64)> {
    if !(0.0..1.0).contains(&reg) {
        return Err(Error::Precondition(format!(
            "regularization parameter {reg} outside [0, 1)"
        )));
    }
    let cols = a.ncols();
    let svd = a.svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let s = &svd.singular_values;
    let sigma_max = s.iter().cloned().fold(0.0f64, f64::max);
    let sigma_min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if sigma_max == 0.0 {
        return Ok((DVector::zeros(cols), f64::INFINITY));
    }
    let lam2 = reg * sigma_max * sigma_max;
    let ub = u.transpose() * b;
    let mut coeff = DVector::zeros(cols);
    for i in 0..s.len() {
        let si = s[i];
        let factor = if lam2 == 0.0 {
            if si > 1e-13 * sigma_max {
                1.0 / si
            } else {
                0.0
            }
        } else {
            si / (si * si + lam2)
        };
        coeff.axpy(factor * ub[i], &vt.row(i).transpose(), 1.0);
    }
    let condition = if sigma_min > 0.0 {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    };
    Ok((coeff, condition))
}

/// Jet targets at the marked node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTargets {
    pub value: f64,
    pub grad: [f64; 2],
    pub lap: f64,
}

/// Outcome of a point-control solve.
#[derive(Debug, Clone)]
pub struct PointControl {
    pub coefficients: Vec<f64>,
    pub combination: Solution,
    pub achieved: PointTargets,
    pub residual: f64,
}

/// An axis-aligned interior node rectangle, with a connectivity check on its
/// complement (every node outside the subdomain must connect to the
/// boundary, so the subdomain does not enclose shielded pockets).
#[derive(Debug, Clone)]
pub struct Subdomain {
    grid: GridRef,
    mask: Vec<bool>,
}

impl Subdomain {
    /// Rectangle of nodes `i0..=i1` by `j0..=j1`, strictly interior.
    pub fn rectangle(
        grid: &GridRef,
        i0: usize,
        i1: usize,
        j0: usize,
        j1: usize,
    ) -> Result<Subdomain> {
        if i0 > i1 || j0 > j1 || i1 >= grid.nx() || j1 >= grid.ny() {
            return Err(Error::Precondition(
                "empty or out-of-range subdomain".into(),
            ));
        }
        if i0 == 0 || j0 == 0 || i1 == grid.nx() - 1 || j1 == grid.ny() - 1 {
            return Err(Error::Precondition(
                "subdomain must be strictly interior".into(),
            ));
        }
        let mut mask = vec![false; grid.node_count()];
        for j in j0..=j1 {
            for i in i0..=i1 {
                mask[grid.index(i, j)] = true;
            }
        }
        Subdomain::from_mask(grid, mask)
    }

    /// General node mask; rejects masks touching the boundary or masks whose
    /// complement has a component cut off from the boundary.
    pub fn from_mask(grid: &GridRef, mask: Vec<bool>) -> Result<Subdomain> {
        if mask.len() != grid.node_count() {
            return Err(Error::Shape("subdomain mask has wrong length".into()));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::Precondition("subdomain mask is empty".into()));
        }
        for (k, &inside) in mask.iter().enumerate() {
            if inside && grid.is_boundary(k) {
                return Err(Error::Precondition(
                    "subdomain must be strictly interior".into(),
                ));
            }
        }
        // Flood fill the complement from the boundary ring.
        let mut reached = vec![false; grid.node_count()];
        let mut stack: Vec<usize> = (0..grid.node_count())
            .filter(|&k| grid.is_boundary(k))
            .collect();
        for &k in &stack {
            reached[k] = true;
        }
        let nx = grid.nx();
        while let Some(k) = stack.pop() {
            let (i, j) = grid.ij(k);
            let mut push = |n: usize| {
                if !mask[n] && !reached[n] {
                    reached[n] = true;
                    stack.push(n);
                }
            };
            if i > 0 {
                push(k - 1);
            }
            if i + 1 < nx {
                push(k + 1);
            }
            if j > 0 {
                push(k - nx);
            }
            if j + 1 < grid.ny() {
                push(k + nx);
            }
        }
        for k in 0..grid.node_count() {
            if !mask[k] && !reached[k] {
                return Err(Error::Precondition(
                    "subdomain complement has a component cut off from the boundary".into(),
                ));
            }
        }
        Ok(Subdomain {
            grid: grid.clone(),
            mask,
        })
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn contains(&self, k: usize) -> bool {
        self.mask[k]
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.node_count()).filter(move |&k| self.mask[k])
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }
}

/// Sample of `|x - c|^2 log |x - c|`, biharmonic away from `c`; with the pole
/// held outside the closed square this is a smooth local solution on any
/// subdomain.
pub fn external_biharmonic(grid: &GridRef, center: (f64, f64)) -> Result<ScalarField> {
    let (cx, cy) = center;
    let dist_x = (-cx).max(cx - 1.0).max(0.0);
    let dist_y = (-cy).max(cy - 1.0).max(0.0);
    let dist = (dist_x * dist_x + dist_y * dist_y).sqrt();
    if dist < 0.05 {
        return Err(Error::Precondition(format!(
            "fundamental-solution pole ({cx}, {cy}) is too close to the closed square"
        )));
    }
    Ok(ScalarField::from_fn(grid, move |x, y| {
        let r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        0.5 * r2 * r2.ln()
    }))
}
