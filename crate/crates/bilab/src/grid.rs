//! Uniform tensor grid on the unit square and the discrete calculus built on it.
//!
//! Node `(i, j)` sits at `(i * hx, j * hy)` with `i` running in the x
//! direction.  Fields are stored flat in row-major order, `k = j * nx + i`.
//! Interior nodes use centered second-order stencils; boundary nodes fall back
//! to one-sided second-order stencils so that every operator is defined on the
//! full node set.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Outward normal direction attached to a boundary node.  Corner nodes are
/// assigned the x-axis normal of the edge they terminate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normal {
    XNeg,
    XPos,
    YNeg,
    YPos,
}

impl Normal {
    /// True when the normal points along the x axis.
    pub fn is_x(self) -> bool {
        matches!(self, Normal::XNeg | Normal::XPos)
    }

    /// Outward sign along the normal's axis.
    pub fn sign(self) -> f64 {
        match self {
            Normal::XPos | Normal::YPos => 1.0,
            Normal::XNeg | Normal::YNeg => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundaryNode {
    /// Flat node index into grid fields.
    pub node: usize,
    pub i: usize,
    pub j: usize,
    pub normal: Normal,
}

/// Discretization of `[0,1]^2` with `nx * ny` nodes.
#[derive(Debug)]
pub struct DomainGrid {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    boundary: Vec<BoundaryNode>,
    /// Flat node index -> boundary slot, or `usize::MAX` for interior nodes.
    boundary_slot: Vec<usize>,
    /// Boundary slots in counterclockwise perimeter order starting at (0,0).
    perimeter: Vec<usize>,
    /// Arclength along the perimeter for each entry of `perimeter`.
    perimeter_tau: Vec<f64>,
}

pub type GridRef = Arc<DomainGrid>;

impl DomainGrid {
    /// Build a grid with at least five nodes per direction.
    pub fn new(nx: usize, ny: usize) -> Result<GridRef> {
        if nx < 5 || ny < 5 {
            return Err(Error::GridTooSmall { nx, ny });
        }
        let hx = 1.0 / (nx - 1) as f64;
        let hy = 1.0 / (ny - 1) as f64;

        let mut boundary = Vec::new();
        let mut boundary_slot = vec![usize::MAX; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let normal = if i == 0 {
                    Normal::XNeg
                } else if i == nx - 1 {
                    Normal::XPos
                } else if j == 0 {
                    Normal::YNeg
                } else if j == ny - 1 {
                    Normal::YPos
                } else {
                    continue;
                };
                boundary_slot[j * nx + i] = boundary.len();
                boundary.push(BoundaryNode {
                    node: j * nx + i,
                    i,
                    j,
                    normal,
                });
            }
        }

        // Counterclockwise perimeter walk: bottom, right, top, left.
        let mut walk: Vec<(usize, usize, f64)> = Vec::new();
        let mut tau = 0.0;
        for i in 0..nx {
            walk.push((i, 0, tau));
            tau += hx;
        }
        tau = 1.0 + hy;
        for j in 1..ny {
            walk.push((nx - 1, j, tau));
            tau += hy;
        }
        tau = 2.0 + hx;
        for i in (0..nx - 1).rev() {
            walk.push((i, ny - 1, tau));
            tau += hx;
        }
        tau = 3.0 + hy;
        for j in (1..ny - 1).rev() {
            walk.push((0, j, tau));
            tau += hy;
        }
        let perimeter: Vec<usize> = walk
            .iter()
            .map(|&(i, j, _)| boundary_slot[j * nx + i])
            .collect();
        let perimeter_tau: Vec<f64> = walk.iter().map(|&(_, _, t)| t).collect();

        Ok(Arc::new(DomainGrid {
            nx,
            ny,
            hx,
            hy,
            boundary,
            boundary_slot,
            perimeter,
            perimeter_tau,
        }))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (i as f64 * self.hx, j as f64 * self.hy)
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.boundary_slot[k] != usize::MAX
    }

    /// Layers of nodes between `k` and the nearest boundary edge
    /// (0 for boundary nodes).
    pub fn depth(&self, k: usize) -> usize {
        let (i, j) = self.ij(k);
        i.min(self.nx - 1 - i).min(j).min(self.ny - 1 - j)
    }

    pub fn boundary_nodes(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn boundary_len(&self) -> usize {
        self.boundary.len()
    }

    /// Boundary slot of a flat node index, if the node lies on the boundary.
    pub fn boundary_slot(&self, k: usize) -> Option<usize> {
        let s = self.boundary_slot[k];
        (s != usize::MAX).then_some(s)
    }

    /// Boundary slots in counterclockwise perimeter order with arclength.
    pub fn perimeter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.perimeter
            .iter()
            .copied()
            .zip(self.perimeter_tau.iter().copied())
    }

    /// Total arclength of the boundary polygon.
    pub fn perimeter_length(&self) -> f64 {
        4.0
    }

    /// Trapezoidal quadrature weight of a node.
    pub fn weight(&self, k: usize) -> f64 {
        let (i, j) = self.ij(k);
        let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
        wx * wy * self.hx * self.hy
    }

    pub fn same_grid(&self, other: &DomainGrid) -> bool {
        std::ptr::eq(self, other) || (self.nx == other.nx && self.ny == other.ny)
    }
}

/// Scalar nodal field.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: GridRef,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &GridRef) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn from_fn(grid: &GridRef, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|k| {
                let (x, y) = grid.coords(k);
                f(x, y)
            })
            .collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_values(grid: &GridRef, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Shape(format!(
                "field length {} does not match grid with {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn set(&mut self, k: usize, v: f64) {
        self.values[k] = v;
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max over nodes at depth >= `depth`.
    pub fn sup_norm_at_depth(&self, depth: usize) -> f64 {
        (0..self.values.len())
            .filter(|&k| self.grid.depth(k) >= depth)
            .fold(0.0, |m, k| m.max(self.values[k].abs()))
    }

    pub fn axpy(&mut self, alpha: f64, other: &ScalarField) {
        for (a, b) in self.values.iter_mut().zip(other.values.iter()) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in self.values.iter_mut() {
            *a *= alpha;
        }
    }

    pub fn linear_combination(terms: &[(f64, &ScalarField)]) -> Result<ScalarField> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Shape("empty linear combination".into()))?;
        let mut out = ScalarField::zeros(first.1.grid());
        for &(c, f) in terms {
            out.axpy(c, f);
        }
        Ok(out)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn scaled(&self, alpha: f64) -> ScalarField {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    fn d2x(&self, i: usize, j: usize) -> f64 {
        let g = &self.grid;
        let h2 = g.hx * g.hx;
        let f = |ii: usize| self.values[g.index(ii, j)];
        if i == 0 {
            (2.0 * f(0) - 5.0 * f(1) + 4.0 * f(2) - f(3)) / h2
        } else if i == g.nx - 1 {
            let n = g.nx - 1;
            (2.0 * f(n) - 5.0 * f(n - 1) + 4.0 * f(n - 2) - f(n - 3)) / h2
        } else {
            (f(i + 1) - 2.0 * f(i) + f(i - 1)) / h2
        }
    }

    fn d2y(&self, i: usize, j: usize) -> f64 {
        let g = &self.grid;
        let h2 = g.hy * g.hy;
        let f = |jj: usize| self.values[g.index(i, jj)];
        if j == 0 {
            (2.0 * f(0) - 5.0 * f(1) + 4.0 * f(2) - f(3)) / h2
        } else if j == g.ny - 1 {
            let n = g.ny - 1;
            (2.0 * f(n) - 5.0 * f(n - 1) + 4.0 * f(n - 2) - f(n - 3)) / h2
        } else {
            (f(j + 1) - 2.0 * f(j) + f(j - 1)) / h2
        }
    }

    fn dx(&self, i: usize, j: usize) -> f64 {
        let g = &self.grid;
        let f = |ii: usize| self.values[g.index(ii, j)];
        if i == 0 {
            (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * g.hx)
        } else if i == g.nx - 1 {
            let n = g.nx - 1;
            (3.0 * f(n) - 4.0 * f(n - 1) + f(n - 2)) / (2.0 * g.hx)
        } else {
            (f(i + 1) - f(i - 1)) / (2.0 * g.hx)
        }
    }

    fn dy(&self, i: usize, j: usize) -> f64 {
        let g = &self.grid;
        let f = |jj: usize| self.values[g.index(i, jj)];
        if j == 0 {
            (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * g.hy)
        } else if j == g.ny - 1 {
            let n = g.ny - 1;
            (3.0 * f(n) - 4.0 * f(n - 1) + f(n - 2)) / (2.0 * g.hy)
        } else {
            (f(j + 1) - f(j - 1)) / (2.0 * g.hy)
        }
    }

    /// Five-point Laplacian, one-sided at the boundary.
    pub fn laplacian(&self) -> ScalarField {
        let g = self.grid.clone();
        let mut out = ScalarField::zeros(&g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                out.values[g.index(i, j)] = self.d2x(i, j) + self.d2y(i, j);
            }
        }
        out
    }

    /// Centered gradient, one-sided at the boundary.
    pub fn gradient(&self) -> VectorField {
        let g = self.grid.clone();
        let mut vx = vec![0.0; g.node_count()];
        let mut vy = vec![0.0; g.node_count()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.index(i, j);
                vx[k] = self.dx(i, j);
                vy[k] = self.dy(i, j);
            }
        }
        VectorField { grid: g, vx, vy }
    }

    /// Outward normal derivative on the boundary (one-sided, second order).
    pub fn normal_derivative(&self) -> BoundaryTrace {
        let g = self.grid.clone();
        let values = g
            .boundary_nodes()
            .iter()
            .map(|b| match b.normal {
                Normal::XNeg | Normal::XPos => b.normal.sign() * self.dx(b.i, b.j),
                Normal::YNeg | Normal::YPos => b.normal.sign() * self.dy(b.i, b.j),
            })
            .collect();
        BoundaryTrace { grid: g, values }
    }

    /// Restriction to the boundary nodes.
    pub fn trace(&self) -> BoundaryTrace {
        let g = self.grid.clone();
        let values = g
            .boundary_nodes()
            .iter()
            .map(|b| self.values[b.node])
            .collect();
        BoundaryTrace { grid: g, values }
    }

    /// Trapezoidal discretization of the L^2 pairing on the square.
    pub fn inner_product(&self, other: &ScalarField) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for k in 0..g.node_count() {
            acc += g.weight(k) * self.values[k] * other.values[k];
        }
        acc
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner_product(self).sqrt()
    }

    /// Unweighted Euclidean norm of the nodal values.
    pub fn l2_norm_plain(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Sup-norm surrogate for the C^2 norm:
    /// `max(|f|, |df/dx|, |df/dy|, |lap f|)` over all nodes.
    pub fn c2_norm(&self) -> f64 {
        let grad = self.gradient();
        let lap = self.laplacian();
        let mut m = 0.0f64;
        for k in 0..self.values.len() {
            m = m
                .max(self.values[k].abs())
                .max(grad.vx[k].abs())
                .max(grad.vy[k].abs())
                .max(lap.values()[k].abs());
        }
        m
    }

    pub fn assert_finite(&self, what: &str) -> Result<()> {
        for (k, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: what.to_string(),
                    node: k,
                });
            }
        }
        Ok(())
    }
}

/// Two-component nodal field (e.g. a discrete gradient).
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: GridRef,
    vx: Vec<f64>,
    vy: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: &GridRef) -> Self {
        VectorField {
            grid: grid.clone(),
            vx: vec![0.0; grid.node_count()],
            vy: vec![0.0; grid.node_count()],
        }
    }

    pub fn from_fields(x: ScalarField, y: ScalarField) -> Self {
        VectorField {
            grid: x.grid().clone(),
            vx: x.values,
            vy: y.values,
        }
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn x(&self, k: usize) -> f64 {
        self.vx[k]
    }

    pub fn y(&self, k: usize) -> f64 {
        self.vy[k]
    }

    pub fn get(&self, k: usize) -> [f64; 2] {
        [self.vx[k], self.vy[k]]
    }

    pub fn set(&mut self, k: usize, v: [f64; 2]) {
        self.vx[k] = v[0];
        self.vy[k] = v[1];
    }

    pub fn x_component(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.vx.clone(),
        }
    }

    pub fn y_component(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.vy.clone(),
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &VectorField) {
        for (a, b) in self.vx.iter_mut().zip(other.vx.iter()) {
            *a += alpha * b;
        }
        for (a, b) in self.vy.iter_mut().zip(other.vy.iter()) {
            *a += alpha * b;
        }
    }

    /// Largest absolute component value.
    pub fn sup_norm(&self) -> f64 {
        self.vx
            .iter()
            .chain(self.vy.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in self.vx.iter_mut() {
            *a *= alpha;
        }
        for a in self.vy.iter_mut() {
            *a *= alpha;
        }
    }

    /// Discrete divergence with the same first-derivative stencils as
    /// `ScalarField::gradient`.
    pub fn divergence(&self) -> ScalarField {
        let fx = self.x_component();
        let fy = self.y_component();
        let gx = fx.gradient();
        let gy = fy.gradient();
        let mut out = ScalarField::zeros(&self.grid);
        for k in 0..self.grid.node_count() {
            out.values[k] = gx.vx[k] + gy.vy[k];
        }
        out
    }
}

/// Values attached to the boundary nodes, in the grid's boundary-slot order.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    grid: GridRef,
    values: Vec<f64>,
}

impl BoundaryTrace {
    pub fn zeros(grid: &GridRef) -> Self {
        BoundaryTrace {
            grid: grid.clone(),
            values: vec![0.0; grid.boundary_len()],
        }
    }

    /// Trace sampled from a closed form on the boundary nodes.
    pub fn from_fn(grid: &GridRef, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid
            .boundary_nodes()
            .iter()
            .map(|b| {
                let (x, y) = grid.coords(b.node);
                f(x, y)
            })
            .collect();
        BoundaryTrace {
            grid: grid.clone(),
            values,
        }
    }

    /// Trace defined by a function of arclength along the perimeter.
    pub fn from_arclength_fn(grid: &GridRef, f: impl Fn(f64) -> f64) -> Self {
        let mut values = vec![0.0; grid.boundary_len()];
        for (slot, tau) in grid.perimeter() {
            values[slot] = f(tau);
        }
        BoundaryTrace {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, slot: usize) -> f64 {
        self.values[slot]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn axpy(&mut self, alpha: f64, other: &BoundaryTrace) {
        for (a, b) in self.values.iter_mut().zip(other.values.iter()) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in self.values.iter_mut() {
            *v *= alpha;
        }
    }

    pub fn sub(&self, other: &BoundaryTrace) -> BoundaryTrace {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}
