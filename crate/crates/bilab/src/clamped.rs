//! The discrete clamped subspace and least-squares inversion of the
//! linearized operator over it.
//!
//! A field is *clamped* here when it vanishes on the four outermost node
//! layers.  All four boundary traces (value, normal derivative, Laplacian,
//! normal derivative of the Laplacian) of such a field are then exactly zero
//! under the one-sided stencils, because every stencil involved only reads
//! layers where the field or its discrete Laplacian already vanishes.  The
//! projector inverts the composed linearized operator over this subspace by
//! banded Cholesky on the Gram normal equations.

use std::collections::BTreeMap;

use crate::band::BandSymMatrix;
use crate::error::{Error, Result};
use crate::grid::{GridRef, ScalarField};
use crate::operator::LinearOperator;

/// Number of outermost node layers a clamped field must vanish on.
pub const CLAMPED_MARGIN: usize = 4;

/// Exact membership in the clamped realization subspace.
pub fn in_clamped_space(f: &ScalarField) -> bool {
    let g = f.grid();
    (0..g.node_count()).all(|k| g.depth(k) >= CLAMPED_MARGIN || f.get(k) == 0.0)
}

/// Sup over the four clamped boundary conditions, measured with the same
/// stencils as `CauchyData`: value trace, normal derivative, Laplacian
/// trace, normal derivative of the Laplacian.
pub fn clamped_conditions_sup(f: &ScalarField) -> f64 {
    let lap = f.laplacian();
    f.trace()
        .sup_norm()
        .max(f.normal_derivative().sup_norm())
        .max(lap.trace().sup_norm())
        .max(lap.normal_derivative().sup_norm())
}

/// Whether all four clamped conditions hold to `tol`.
pub fn is_clamped(f: &ScalarField, tol: f64) -> bool {
    clamped_conditions_sup(f) <= tol
}

/// The canonical clamped test function: a separable quartic bump supported
/// on `[1/4, 3/4]^2`, `C^3` across the support edge, with unit peak.
pub fn clamped_bump(grid: &GridRef) -> ScalarField {
    clamped_bump_on(grid, 0.25, 0.75)
}

/// Separable quartic bump supported on `[a, b]^2`.
pub fn clamped_bump_on(grid: &GridRef, a: f64, b: f64) -> ScalarField {
    let profile = move |t: f64| {
        if t <= a || t >= b {
            0.0
        } else {
            (4.0 * (t - a) * (b - t) / ((b - a) * (b - a))).powi(4)
        }
    };
    ScalarField::from_fn(grid, move |x, y| profile(x) * profile(y))
}

/// Outcome of a least-squares projection onto the image of the clamped
/// subspace under the composed linearized operator.
///
/// All norms are taken over interior nodes: the composed operator's
/// one-sided boundary stencils produce values on the boundary ring that are
/// not part of the equation being projected.
#[derive(Debug, Clone)]
pub struct Projection {
    /// The clamped preimage `y`.
    pub preimage: ScalarField,
    /// `L y`, the projected field.
    pub projected: ScalarField,
    /// Interior l2 norm of `target - L y`.
    pub residual_l2: f64,
    /// `residual_l2 / max(interior l2 of target, tiny)`.
    pub relative_residual: f64,
}

/// Plain l2 norm over interior nodes.
pub fn interior_l2(f: &ScalarField) -> f64 {
    let g = f.grid();
    (0..g.node_count())
        .filter(|&k| !g.is_boundary(k))
        .map(|k| f.get(k) * f.get(k))
        .sum::<f64>()
        .sqrt()
}

/// Least-squares inverter of a composed linearized operator over the clamped
/// subspace, in the interior l2 inner product.  Columns of the operator
/// restricted to deep-node indicators are precomputed sparsely (they only
/// touch nodes of depth >= 2, where every stencil is central); the Gram
/// matrix is banded and factored once.
pub struct ClampedProjector {
    op: LinearOperator,
    deep: Vec<usize>,
    columns: Vec<Vec<(usize, f64)>>,
    chol: crate::band::BandCholesky,
    gram: BandSymMatrix,
}

impl ClampedProjector {
    pub fn new(op: LinearOperator) -> Result<ClampedProjector> {
        let g = op.grid().clone();
        let (nx, ny) = (g.nx(), g.ny());
        if nx <= 2 * CLAMPED_MARGIN + 1 || ny <= 2 * CLAMPED_MARGIN + 1 {
            return Err(Error::GridTooSmall { nx, ny });
        }
        let width = nx - 2 * CLAMPED_MARGIN;
        let mut deep = Vec::new();
        for j in CLAMPED_MARGIN..ny - CLAMPED_MARGIN {
            for i in CLAMPED_MARGIN..nx - CLAMPED_MARGIN {
                deep.push(g.index(i, j));
            }
        }

        let columns: Vec<Vec<(usize, f64)>> = deep.iter().map(|&k| sparse_column(&op, k)).collect();

        // Columns interact only within a (2 margin + 1)^2 index window.
        let bw = CLAMPED_MARGIN * width + CLAMPED_MARGIN;
        let nb = deep.len();
        let mut gram = BandSymMatrix::zeros(nb, bw.min(nb - 1));
        for a in 0..nb {
            for b in a..nb.min(a + bw + 1) {
                let v = sparse_dot(&columns[a], &columns[b]);
                if v != 0.0 || a == b {
                    gram.set_lower(b, a, v);
                }
            }
        }
        let chol = gram.clone().factor().map_err(|_| {
            Error::NotPositiveDefinite(
                "clamped Gram matrix is not positive definite; the linearized \
                 operator is degenerate on the clamped subspace"
                    .into(),
            )
        })?;
        Ok(ClampedProjector {
            op,
            deep,
            columns,
            chol,
            gram,
        })
    }

    pub fn grid(&self) -> &GridRef {
        self.op.grid()
    }

    pub fn operator(&self) -> &LinearOperator {
        &self.op
    }

    pub fn basis_len(&self) -> usize {
        self.deep.len()
    }

    /// Least-squares solve `min_y || L y - target ||_2` over clamped `y`.
    pub fn project(&self, target: &ScalarField) -> Result<Projection> {
        if !self.grid().same_grid(target.grid()) {
            return Err(Error::Shape(
                "projection target lives on a different grid".into(),
            ));
        }
        let nb = self.deep.len();
        let mut rhs = vec![0.0; nb];
        for (a, col) in self.columns.iter().enumerate() {
            rhs[a] = col.iter().map(|&(k, v)| v * target.get(k)).sum();
        }
        let mut coeff = self.chol.solve(&rhs);
        // Iterative refinement counters the squared conditioning of the
        // normal equations; a few sweeps reach the rounding floor on the
        // grid sizes in play, and stalling residuals stop the loop early.
        let rhs_scale = rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
        let mut last_resid = f64::INFINITY;
        for _ in 0..4 {
            let gy = self.gram.sym_matvec(&coeff);
            let resid: Vec<f64> = rhs.iter().zip(gy.iter()).map(|(b, a)| b - a).collect();
            let resid_norm = resid.iter().map(|r| r * r).sum::<f64>().sqrt();
            if resid_norm <= 1e-16 * rhs_scale || resid_norm >= 0.5 * last_resid {
                break;
            }
            last_resid = resid_norm;
            let correction = self.chol.solve(&resid);
            for (c, d) in coeff.iter_mut().zip(correction.iter()) {
                *c += d;
            }
        }

        let mut preimage = ScalarField::zeros(self.grid());
        for (a, &k) in self.deep.iter().enumerate() {
            preimage.set(k, coeff[a]);
        }
        preimage.assert_finite("clamped preimage")?;
        let projected = self.op.apply_composed(&preimage);
        let diff = projected.sub(target);
        let residual_l2 = interior_l2(&diff);
        let relative_residual = residual_l2 / interior_l2(target).max(f64::MIN_POSITIVE);
        Ok(Projection {
            preimage,
            projected,
            residual_l2,
            relative_residual,
        })
    }

    /// Largest normalized inner product of a field against the operator
    /// columns.  A least-squares residual must drive this to rounding level;
    /// it is the defining property of the projection, measurable without
    /// re-solving.
    pub fn column_defect(&self, field: &ScalarField) -> f64 {
        let scale = interior_l2(field).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for col in &self.columns {
            let dot: f64 = col.iter().map(|&(k, v)| v * field.get(k)).sum();
            let col_norm: f64 = col.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
            if col_norm > 0.0 {
                worst = worst.max(dot.abs() / (col_norm * scale));
            }
        }
        worst
    }

    /// Invert over the clamped subspace: the target must lie in the image to
    /// `rel_tol`, otherwise the inversion is refused.
    pub fn preimage_of(&self, member: &ScalarField, rel_tol: f64) -> Result<Projection> {
        let p = self.project(member)?;
        if p.relative_residual > rel_tol {
            return Err(Error::NotInRange {
                distance: p.relative_residual,
                tolerance: rel_tol,
            });
        }
        Ok(p)
    }
}

/// Sparse column of the composed linearized operator applied to the
/// indicator of a deep node.  All stencils involved are central because the
/// node sits at depth >= 4.
fn sparse_column(op: &LinearOperator, node: usize) -> Vec<(usize, f64)> {
    let g = op.grid();
    let nx = g.nx();
    let sx = 1.0 / (g.hx() * g.hx());
    let sy = 1.0 / (g.hy() * g.hy());
    let cx = 1.0 / (2.0 * g.hx());
    let cy = 1.0 / (2.0 * g.hy());
    let coeffs = op.coefficients();

    // lap of the indicator.
    let lap1: [(usize, f64); 5] = [
        (node, -2.0 * sx - 2.0 * sy),
        (node - 1, sx),
        (node + 1, sx),
        (node - nx, sy),
        (node + nx, sy),
    ];
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    // lap(lap) plus A * lap, accumulated around each first-pass node.
    for &(nb, w) in lap1.iter() {
        *acc.entry(nb).or_insert(0.0) += w * (-2.0 * sx - 2.0 * sy);
        *acc.entry(nb - 1).or_insert(0.0) += w * sx;
        *acc.entry(nb + 1).or_insert(0.0) += w * sx;
        *acc.entry(nb - nx).or_insert(0.0) += w * sy;
        *acc.entry(nb + nx).or_insert(0.0) += w * sy;
        *acc.entry(nb).or_insert(0.0) += coeffs.lap_coeff.get(nb) * w;
    }
    // X . grad of the indicator: nonzero at the four axis neighbors.
    *acc.entry(node - 1).or_insert(0.0) += coeffs.grad_coeff.x(node - 1) * cx;
    *acc.entry(node + 1).or_insert(0.0) -= coeffs.grad_coeff.x(node + 1) * cx;
    *acc.entry(node - nx).or_insert(0.0) += coeffs.grad_coeff.y(node - nx) * cy;
    *acc.entry(node + nx).or_insert(0.0) -= coeffs.grad_coeff.y(node + nx) * cy;
    // V at the node itself.
    *acc.entry(node).or_insert(0.0) += coeffs.val_coeff.get(node);

    acc.into_iter().collect()
}

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let mut ia = 0;
    let mut ib = 0;
    let mut acc = 0.0;
    while ia < a.len() && ib < b.len() {
        match a[ia].0.cmp(&b[ib].0) {
            std::cmp::Ordering::Less => ia += 1,
            std::cmp::Ordering::Greater => ib += 1,
            std::cmp::Ordering::Equal => {
                acc += a[ia].1 * b[ib].1;
                ia += 1;
                ib += 1;
            }
        }
    }
    acc
}
