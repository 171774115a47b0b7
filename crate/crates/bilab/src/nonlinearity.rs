//! First-order nonlinear perturbations `Q(x, u, grad u, lap u)` of the
//! biharmonic operator: evaluation, partial derivatives up to total order
//! three, linearization data, and the integral-remainder identities used by
//! the solution maps.

use crate::error::{Error, Result};
use crate::grid::{DomainGrid, GridRef, ScalarField, VectorField};
use crate::quadrature::GaussLegendre;

/// Scalar weight in front of a nonlinearity kind, chosen from a fixed list of
/// closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    /// Constant 1.
    One,
    /// Gaussian bump centered in the square: `exp(-8 ((x-1/2)^2 + (y-1/2)^2))`.
    Bump,
    /// `cos(pi x)`.
    CosX,
}

impl Gamma {
    pub fn value(self, x: f64, y: f64) -> f64 {
        match self {
            Gamma::One => 1.0,
            Gamma::Bump => (-8.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2))).exp(),
            Gamma::CosX => (std::f64::consts::PI * x).cos(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gamma::One => "one",
            Gamma::Bump => "bump",
            Gamma::CosX => "cosx",
        }
    }

    pub fn parse(s: &str) -> Result<Gamma> {
        match s {
            "one" => Ok(Gamma::One),
            "bump" => Ok(Gamma::Bump),
            "cosx" => Ok(Gamma::CosX),
            other => Err(Error::Config(format!("unknown gamma weight `{other}`"))),
        }
    }
}

/// Point value of a second-order jet `(u, grad u, lap u)` at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetPoint {
    pub val: f64,
    pub grad: [f64; 2],
    pub lap: f64,
}

impl JetPoint {
    pub const ZERO: JetPoint = JetPoint {
        val: 0.0,
        grad: [0.0, 0.0],
        lap: 0.0,
    };

    pub fn axpy(self, alpha: f64, other: JetPoint) -> JetPoint {
        JetPoint {
            val: self.val + alpha * other.val,
            grad: [
                self.grad[0] + alpha * other.grad[0],
                self.grad[1] + alpha * other.grad[1],
            ],
            lap: self.lap + alpha * other.lap,
        }
    }
}

impl std::ops::Sub for JetPoint {
    type Output = JetPoint;

    fn sub(self, other: JetPoint) -> JetPoint {
        self.axpy(-1.0, other)
    }
}

/// Discrete second-order jet of a field.
#[derive(Debug, Clone)]
pub struct Jet {
    pub val: ScalarField,
    pub grad: VectorField,
    pub lap: ScalarField,
}

impl Jet {
    /// Jet with the Laplacian slot computed by the discrete stencil.
    pub fn of_field(f: &ScalarField) -> Jet {
        Jet {
            grad: f.gradient(),
            lap: f.laplacian(),
            val: f.clone(),
        }
    }

    /// Jet with an externally supplied Laplacian slot (e.g. the mixed-system
    /// companion field, which is exact on solutions).
    pub fn of_parts(val: ScalarField, lap: ScalarField) -> Jet {
        Jet {
            grad: val.gradient(),
            val,
            lap,
        }
    }

    pub fn zeros(grid: &GridRef) -> Jet {
        Jet {
            val: ScalarField::zeros(grid),
            grad: VectorField::zeros(grid),
            lap: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &GridRef {
        self.val.grid()
    }

    pub fn at(&self, k: usize) -> JetPoint {
        JetPoint {
            val: self.val.get(k),
            grad: self.grad.get(k),
            lap: self.lap.get(k),
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &Jet) {
        self.val.axpy(alpha, &other.val);
        self.grad.axpy(alpha, &other.grad);
        self.lap.axpy(alpha, &other.lap);
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn scaled(&self, alpha: f64) -> Jet {
        let mut out = self.clone();
        out.val.scale(alpha);
        out.grad.scale(alpha);
        out.lap.scale(alpha);
        out
    }
}

/// Multi-index for partial derivatives in the `(u, grad u, lap u)` slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Deriv {
    pub val: u8,
    pub grad: [u8; 2],
    pub lap: u8,
}

impl Deriv {
    pub const EVAL: Deriv = Deriv::new(0, 0, 0, 0);

    pub const fn new(val: u8, g0: u8, g1: u8, lap: u8) -> Deriv {
        Deriv {
            val,
            grad: [g0, g1],
            lap,
        }
    }

    pub fn order(self) -> u8 {
        self.val + self.grad[0] + self.grad[1] + self.lap
    }

    pub fn val_slot() -> Deriv {
        Deriv::new(1, 0, 0, 0)
    }

    pub fn grad_slot(c: usize) -> Deriv {
        match c {
            0 => Deriv::new(0, 1, 0, 0),
            _ => Deriv::new(0, 0, 1, 0),
        }
    }

    pub fn lap_slot() -> Deriv {
        Deriv::new(0, 0, 0, 1)
    }

    pub fn plus(self, other: Deriv) -> Deriv {
        Deriv {
            val: self.val + other.val,
            grad: [self.grad[0] + other.grad[0], self.grad[1] + other.grad[1]],
            lap: self.lap + other.lap,
        }
    }

    /// All multi-indices with total order in `1..=max_order`.
    pub fn all_up_to(max_order: u8) -> Vec<Deriv> {
        let mut out = Vec::new();
        for total in 1..=max_order {
            for a in 0..=total {
                for b in 0..=(total - a) {
                    for c in 0..=(total - a - b) {
                        let d = total - a - b - c;
                        out.push(Deriv::new(a, b, c, d));
                    }
                }
            }
        }
        out
    }
}

/// Structural kind of a nonlinearity, each multiplied by a `Gamma` weight.
#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    /// Identically zero.
    Zero,
    /// `gamma * u^k`, `k >= 2`.
    Power { exponent: u32 },
    /// `gamma * sin(u)`.
    Sine,
    /// `gamma * u * lap(u)`.
    ValTimesLap,
    /// `gamma * |grad u|^2`.
    GradSquare,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Zero => "zero",
            Kind::Power { .. } => "power",
            Kind::Sine => "sine",
            Kind::ValTimesLap => "zq",
            Kind::GradSquare => "pquad",
        }
    }
}

#[derive(Debug, Clone)]
enum Form {
    Base {
        kind: Kind,
        gamma: Gamma,
    },
    Gauged {
        inner: Box<Nonlinearity>,
        shift: GaugeShift,
    },
}

/// Discrete fields of a gauge shift: the shift function together with its
/// discrete gradient, Laplacian and bilaplacian, all sampled with the grid
/// stencils so that gauge identities telescope exactly at the discrete level.
#[derive(Debug, Clone)]
pub struct GaugeShift {
    pub phi: ScalarField,
    pub grad: VectorField,
    pub lap: ScalarField,
    pub bilap: ScalarField,
}

impl GaugeShift {
    pub fn from_field(phi: &ScalarField) -> GaugeShift {
        let lap = phi.laplacian();
        GaugeShift {
            grad: phi.gradient(),
            bilap: lap.laplacian(),
            lap,
            phi: phi.clone(),
        }
    }
}

/// A nonlinearity `Q(x, u, grad u, lap u)`, evaluable together with all
/// partial derivatives in the jet slots up to total order three.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    form: Form,
}

impl Nonlinearity {
    pub fn zero() -> Nonlinearity {
        Nonlinearity {
            form: Form::Base {
                kind: Kind::Zero,
                gamma: Gamma::One,
            },
        }
    }

    pub fn power(exponent: u32, gamma: Gamma) -> Result<Nonlinearity> {
        if exponent < 2 {
            return Err(Error::Config(format!(
                "power kind needs exponent >= 2, got {exponent}"
            )));
        }
        Ok(Nonlinearity {
            form: Form::Base {
                kind: Kind::Power { exponent },
                gamma,
            },
        })
    }

    pub fn sine(gamma: Gamma) -> Nonlinearity {
        Nonlinearity {
            form: Form::Base {
                kind: Kind::Sine,
                gamma,
            },
        }
    }

    pub fn val_times_lap(gamma: Gamma) -> Nonlinearity {
        Nonlinearity {
            form: Form::Base {
                kind: Kind::ValTimesLap,
                gamma,
            },
        }
    }

    pub fn grad_square(gamma: Gamma) -> Nonlinearity {
        Nonlinearity {
            form: Form::Base {
                kind: Kind::GradSquare,
                gamma,
            },
        }
    }

    /// Wrap `inner` with a gauge shift.  The resulting nonlinearity is
    /// `(x, u, p, m) -> bilap phi(x) + inner(x, u + phi, p + grad phi, m + lap phi)`.
    pub fn gauged(inner: Nonlinearity, shift: GaugeShift) -> Nonlinearity {
        Nonlinearity {
            form: Form::Gauged {
                inner: Box::new(inner),
                shift,
            },
        }
    }

    pub fn describe(&self) -> String {
        match &self.form {
            Form::Base { kind, gamma } => format!("{}({})", kind.name(), gamma.name()),
            Form::Gauged { inner, .. } => format!("gauged[{}]", inner.describe()),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(
            self.form,
            Form::Base {
                kind: Kind::Zero,
                ..
            }
        )
    }

    /// Evaluate at one node.
    pub fn eval(&self, grid: &DomainGrid, node: usize, jp: JetPoint) -> f64 {
        self.partial(grid, node, Deriv::EVAL, jp)
    }

    /// Partial derivative `d` at one node.  Orders beyond the kind's
    /// polynomial degree return zero.
    pub fn partial(&self, grid: &DomainGrid, node: usize, d: Deriv, jp: JetPoint) -> f64 {
        match &self.form {
            Form::Base { kind, gamma } => {
                let (x, y) = grid.coords(node);
                let g = gamma.value(x, y);
                g * base_partial(kind, d, jp)
            }
            Form::Gauged { inner, shift } => {
                let shifted = JetPoint {
                    val: jp.val + shift.phi.get(node),
                    grad: [
                        jp.grad[0] + shift.grad.x(node),
                        jp.grad[1] + shift.grad.y(node),
                    ],
                    lap: jp.lap + shift.lap.get(node),
                };
                let base = inner.partial(grid, node, d, shifted);
                if d.order() == 0 {
                    shift.bilap.get(node) + base
                } else {
                    base
                }
            }
        }
    }

    /// Pointwise evaluation over a whole jet.
    pub fn eval_field(&self, jet: &Jet) -> Result<ScalarField> {
        let grid = jet.grid().clone();
        let mut out = ScalarField::zeros(&grid);
        for k in 0..grid.node_count() {
            out.set(k, self.eval(&grid, k, jet.at(k)));
        }
        out.assert_finite("nonlinearity evaluation")?;
        Ok(out)
    }

    /// Coefficient fields of the linearization at a base jet:
    /// `lap_coeff = dQ/d(lap u)`, `grad_coeff = dQ/d(grad u)`,
    /// `val_coeff = dQ/du`, all evaluated along the jet.
    pub fn linearized_coefficients(&self, base: &Jet) -> Result<LinearizedCoefficients> {
        let grid = base.grid().clone();
        let mut lap_coeff = ScalarField::zeros(&grid);
        let mut gx = ScalarField::zeros(&grid);
        let mut gy = ScalarField::zeros(&grid);
        let mut val_coeff = ScalarField::zeros(&grid);
        for k in 0..grid.node_count() {
            let jp = base.at(k);
            lap_coeff.set(k, self.partial(&grid, k, Deriv::lap_slot(), jp));
            gx.set(k, self.partial(&grid, k, Deriv::grad_slot(0), jp));
            gy.set(k, self.partial(&grid, k, Deriv::grad_slot(1), jp));
            val_coeff.set(k, self.partial(&grid, k, Deriv::val_slot(), jp));
        }
        lap_coeff.assert_finite("lap coefficient")?;
        val_coeff.assert_finite("val coefficient")?;
        Ok(LinearizedCoefficients {
            lap_coeff,
            grad_coeff: VectorField::from_fields(gx, gy),
            val_coeff,
        })
    }

    /// Integral remainder of the first-order Taylor expansion around `base`:
    ///
    /// `R(h) = int_0^1 [Q_u(base + t h) - Q_u(base)] h
    ///       + [Q_p(base + t h) - Q_p(base)] . grad h
    ///       + [Q_m(base + t h) - Q_m(base)] lap h dt`,
    ///
    /// with the parameter integral evaluated by Gauss-Legendre quadrature.
    pub fn remainder(&self, base: &Jet, h: &Jet, quad: &GaussLegendre) -> Result<ScalarField> {
        let grid = base.grid().clone();
        let mut out = ScalarField::zeros(&grid);
        for k in 0..grid.node_count() {
            let b = base.at(k);
            let hp = h.at(k);
            let dv0 = self.partial(&grid, k, Deriv::val_slot(), b);
            let dg0 = [
                self.partial(&grid, k, Deriv::grad_slot(0), b),
                self.partial(&grid, k, Deriv::grad_slot(1), b),
            ];
            let dl0 = self.partial(&grid, k, Deriv::lap_slot(), b);
            let mut acc = 0.0;
            for (t, wt) in quad.iter() {
                let jp = b.axpy(t, hp);
                let dv = self.partial(&grid, k, Deriv::val_slot(), jp) - dv0;
                let dgx = self.partial(&grid, k, Deriv::grad_slot(0), jp) - dg0[0];
                let dgy = self.partial(&grid, k, Deriv::grad_slot(1), jp) - dg0[1];
                let dl = self.partial(&grid, k, Deriv::lap_slot(), jp) - dl0;
                acc += wt * (dv * hp.val + dgx * hp.grad[0] + dgy * hp.grad[1] + dl * hp.lap);
            }
            out.set(k, acc);
        }
        out.assert_finite("integral remainder")?;
        Ok(out)
    }

    /// Residual of the exact first-order expansion
    /// `Q(base + h) = Q(base) + val_coeff h + grad_coeff . grad h
    ///  + lap_coeff lap h + R(h)`.
    pub fn taylor_identity_residual(
        &self,
        base: &Jet,
        h: &Jet,
        quad: &GaussLegendre,
    ) -> Result<ScalarField> {
        let grid = base.grid().clone();
        let coeffs = self.linearized_coefficients(base)?;
        let remainder = self.remainder(base, h, quad)?;
        let mut out = ScalarField::zeros(&grid);
        for k in 0..grid.node_count() {
            let b = base.at(k);
            let hp = h.at(k);
            let full = self.eval(&grid, k, b.axpy(1.0, hp));
            let lin = self.eval(&grid, k, b)
                + coeffs.val_coeff.get(k) * hp.val
                + coeffs.grad_coeff.x(k) * hp.grad[0]
                + coeffs.grad_coeff.y(k) * hp.grad[1]
                + coeffs.lap_coeff.get(k) * hp.lap;
            out.set(k, full - lin - remainder.get(k));
        }
        Ok(out)
    }
}

/// Linearization coefficients along a base jet.  The linearized operator is
/// `bilap r + lap_coeff * lap r + grad_coeff . grad r + val_coeff * r`.
#[derive(Debug, Clone)]
pub struct LinearizedCoefficients {
    pub lap_coeff: ScalarField,
    pub grad_coeff: VectorField,
    pub val_coeff: ScalarField,
}

impl LinearizedCoefficients {
    pub fn zeros(grid: &GridRef) -> LinearizedCoefficients {
        LinearizedCoefficients {
            lap_coeff: ScalarField::zeros(grid),
            grad_coeff: VectorField::zeros(grid),
            val_coeff: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &GridRef {
        self.lap_coeff.grid()
    }

    pub fn sup_distance(&self, other: &LinearizedCoefficients) -> f64 {
        let mut m = 0.0f64;
        for k in 0..self.lap_coeff.grid().node_count() {
            m = m
                .max((self.lap_coeff.get(k) - other.lap_coeff.get(k)).abs())
                .max((self.grad_coeff.x(k) - other.grad_coeff.x(k)).abs())
                .max((self.grad_coeff.y(k) - other.grad_coeff.y(k)).abs())
                .max((self.val_coeff.get(k) - other.val_coeff.get(k)).abs());
        }
        m
    }
}

fn falling_factorial(k: u32, a: u32) -> f64 {
    (0..a).map(|t| (k - t) as f64).product()
}

fn base_partial(kind: &Kind, d: Deriv, jp: JetPoint) -> f64 {
    match kind {
        Kind::Zero => 0.0,
        Kind::Power { exponent } => {
            if d.grad[0] > 0 || d.grad[1] > 0 || d.lap > 0 {
                return 0.0;
            }
            let a = d.val as u32;
            if a > *exponent {
                0.0
            } else {
                falling_factorial(*exponent, a) * jp.val.powi((*exponent - a) as i32)
            }
        }
        Kind::Sine => {
            if d.grad[0] > 0 || d.grad[1] > 0 || d.lap > 0 {
                return 0.0;
            }
            // d^a/du^a sin(u) = sin(u + a pi/2).
            (jp.val + d.val as f64 * std::f64::consts::FRAC_PI_2).sin()
        }
        Kind::ValTimesLap => {
            if d.grad[0] > 0 || d.grad[1] > 0 {
                return 0.0;
            }
            match (d.val, d.lap) {
                (0, 0) => jp.val * jp.lap,
                (1, 0) => jp.lap,
                (0, 1) => jp.val,
                (1, 1) => 1.0,
                _ => 0.0,
            }
        }
        Kind::GradSquare => {
            if d.val > 0 || d.lap > 0 {
                return 0.0;
            }
            match d.grad {
                [0, 0] => jp.grad[0] * jp.grad[0] + jp.grad[1] * jp.grad[1],
                [1, 0] => 2.0 * jp.grad[0],
                [0, 1] => 2.0 * jp.grad[1],
                [2, 0] | [0, 2] => 2.0,
                _ => 0.0,
            }
        }
    }
}

/// Both sides of the second-difference remainder expansion: the directly
/// evaluated `R(v + r1) - R(v + r2)` and its expansion into chain-rule double
/// integrals plus third-order triple integrals.
#[derive(Debug)]
pub struct RemainderDifference {
    pub direct: ScalarField,
    pub expanded: ScalarField,
    pub sup_difference: f64,
}

/// Evaluate the second-difference expansion of the integral remainder.
///
/// With `u1 = v + r1` and `u2 = v + r2`, the difference
/// `R(u1) - R(u2)` equals a sum of six `d/ds` double integrals (two per jet
/// slot, along the `u1` and `u2` rays) and nine triple integrals carrying the
/// third-order partials along the segment between the two rays.  All
/// parameter integrals use the same nested Gauss-Legendre rule.
pub fn remainder_difference(
    q: &Nonlinearity,
    base: &Jet,
    v: &Jet,
    r1: &Jet,
    r2: &Jet,
    quad: &GaussLegendre,
) -> Result<RemainderDifference> {
    let grid = base.grid().clone();
    let u1 = v.add(r1);
    let u2 = v.add(r2);

    let direct = {
        let ra = q.remainder(base, &u1, quad)?;
        let rb = q.remainder(base, &u2, quad)?;
        ra.sub(&rb)
    };

    let d2 = |a: Deriv, b: Deriv| a.plus(b);
    let val = Deriv::val_slot();
    let lap = Deriv::lap_slot();
    let gs = [Deriv::grad_slot(0), Deriv::grad_slot(1)];

    let mut expanded = ScalarField::zeros(&grid);
    for k in 0..grid.node_count() {
        let w = base.at(k);
        let a1 = u1.at(k);
        let a2 = u2.at(k);
        let dd = a1 - a2;
        let mut acc = 0.0;

        for (t, wt) in quad.iter() {
            for (s, ws) in quad.iter() {
                // d/ds terms along both rays; the chain rule gives the factor
                // t (u d_u + grad u . d_p + lap u d_m) applied to each first
                // partial, evaluated at base + s t u_i.
                for ui in [a1, a2] {
                    let jp = w.axpy(s * t, ui);
                    let part = |dv: Deriv| q.partial(&grid, k, dv, jp);
                    let chain = |first: Deriv| {
                        t * (ui.val * part(d2(first, val))
                            + ui.grad[0] * part(d2(first, gs[0]))
                            + ui.grad[1] * part(d2(first, gs[1]))
                            + ui.lap * part(d2(first, lap)))
                    };
                    let mut inner = dd.val * chain(val) + dd.lap * chain(lap);
                    for (dg, slot) in dd.grad.iter().zip(gs) {
                        inner += dg * chain(slot);
                    }
                    acc += wt * ws * inner;
                }
                // Triple integrals along the segment between the rays.
                let st2 = s * t * t;
                for (tau, wtau) in quad.iter() {
                    let seg = w.axpy(s * t, a2).axpy(tau * s * t, dd);
                    let part = |dv: Deriv| q.partial(&grid, k, dv, seg);
                    let third = |second: Deriv| {
                        dd.val * part(d2(second, val))
                            + dd.grad[0] * part(d2(second, gs[0]))
                            + dd.grad[1] * part(d2(second, gs[1]))
                            + dd.lap * part(d2(second, lap))
                    };
                    let mut inner = a1.val * a2.val * third(d2(val, val))
                        + a1.lap * a2.lap * third(d2(lap, lap));
                    for c in 0..2 {
                        for e in 0..2 {
                            inner += a1.grad[c] * a2.grad[e] * third(d2(gs[c], gs[e]));
                        }
                    }
                    acc += wt * ws * wtau * st2 * inner;
                }
            }
        }
        expanded.set(k, acc);
    }

    let sup_difference = direct.sub(&expanded).sup_norm();
    Ok(RemainderDifference {
        direct,
        expanded,
        sup_difference,
    })
}

/// One derivative-bound comparison: the sup of a composed partial derivative
/// along a jet against the max of the same partial over the compact box
/// `[-M, M]^4` with `M = c2_norm(f)`.
#[derive(Debug, Clone)]
pub struct BoundCheck {
    pub deriv: Deriv,
    pub measured: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Compare composed partial derivatives along the jet of `f` against the box
/// maximum, sampled with `samples_per_axis` uniformly spaced points per jet
/// slot (including the endpoints and, for odd counts, zero).
pub fn derivative_bound_check(
    q: &Nonlinearity,
    f: &ScalarField,
    derivs: &[Deriv],
    samples_per_axis: usize,
) -> Result<Vec<BoundCheck>> {
    let grid = f.grid().clone();
    let jet = Jet::of_field(f);
    let m = f.c2_norm();
    let ns = samples_per_axis.max(2);
    let sample = |t: usize| -m + 2.0 * m * t as f64 / (ns - 1) as f64;

    let mut out = Vec::with_capacity(derivs.len());
    for &d in derivs {
        let mut measured = 0.0f64;
        for k in 0..grid.node_count() {
            measured = measured.max(q.partial(&grid, k, d, jet.at(k)).abs());
        }
        let mut bound = 0.0f64;
        for k in 0..grid.node_count() {
            for tz in 0..ns {
                for tp0 in 0..ns {
                    for tp1 in 0..ns {
                        for tl in 0..ns {
                            let jp = JetPoint {
                                val: sample(tz),
                                grad: [sample(tp0), sample(tp1)],
                                lap: sample(tl),
                            };
                            bound = bound.max(q.partial(&grid, k, d, jp).abs());
                        }
                    }
                }
            }
        }
        let ratio = if measured == 0.0 {
            0.0
        } else {
            measured / bound
        };
        out.push(BoundCheck {
            deriv: d,
            measured,
            bound,
            ratio,
        });
    }
    Ok(out)
}

/// Worst relative disagreement between supplied partials and central finite
/// differences of the next-lower order, over `n_jets` random jet points.
pub fn finite_difference_consistency(
    q: &Nonlinearity,
    grid: &GridRef,
    rng: &mut impl rand::Rng,
    n_jets: usize,
) -> f64 {
    let step = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..n_jets {
        let node = rng.gen_range(0..grid.node_count());
        let jp = JetPoint {
            val: rng.gen_range(-1.0..1.0),
            grad: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            lap: rng.gen_range(-1.0..1.0),
        };
        for d in Deriv::all_up_to(3) {
            // Differentiate the first active slot of `d` away from the
            // lower-order partial.
            let (parent, slot) = if d.val > 0 {
                (Deriv::new(d.val - 1, d.grad[0], d.grad[1], d.lap), 0)
            } else if d.grad[0] > 0 {
                (Deriv::new(d.val, d.grad[0] - 1, d.grad[1], d.lap), 1)
            } else if d.grad[1] > 0 {
                (Deriv::new(d.val, d.grad[0], d.grad[1] - 1, d.lap), 2)
            } else {
                (Deriv::new(d.val, d.grad[0], d.grad[1], d.lap - 1), 3)
            };
            let shift = |jp: JetPoint, eps: f64| {
                let mut s = jp;
                match slot {
                    0 => s.val += eps,
                    1 => s.grad[0] += eps,
                    2 => s.grad[1] += eps,
                    _ => s.lap += eps,
                }
                s
            };
            let fd = (q.partial(grid, node, parent, shift(jp, step))
                - q.partial(grid, node, parent, shift(jp, -step)))
                / (2.0 * step);
            let exact = q.partial(grid, node, d, jp);
            let err = (fd - exact).abs() / exact.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}
