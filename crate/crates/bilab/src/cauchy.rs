//! Cauchy quadruples on the boundary: the solution trace, its normal
//! derivative, the Laplacian trace, and the normal derivative of the
//! Laplacian.  These four traces are the data an observer at the boundary
//! can read off, and the stability probe quantifies how strongly interior
//! differences are controlled by them.

use crate::grid::BoundaryTrace;
use crate::operator::Solution;

/// The four boundary traces of a solution.
#[derive(Debug, Clone)]
pub struct CauchyData {
    pub value: BoundaryTrace,
    pub normal: BoundaryTrace,
    pub lap: BoundaryTrace,
    pub lap_normal: BoundaryTrace,
}

impl CauchyData {
    /// Read the quadruple off a mixed solution.  The Laplacian trace comes
    /// from the companion field (exact on solutions); both normal
    /// derivatives use the one-sided second-order boundary stencil.
    pub fn from_solution(sol: &Solution) -> CauchyData {
        CauchyData {
            value: sol.u.trace(),
            normal: sol.u.normal_derivative(),
            lap: sol.m.trace(),
            lap_normal: sol.m.normal_derivative(),
        }
    }

    /// Sup norm over all four traces.
    pub fn sup_norm(&self) -> f64 {
        self.value
            .sup_norm()
            .max(self.normal.sup_norm())
            .max(self.lap.sup_norm())
            .max(self.lap_normal.sup_norm())
    }

    pub fn sub(&self, other: &CauchyData) -> CauchyData {
        CauchyData {
            value: self.value.sub(&other.value),
            normal: self.normal.sub(&other.normal),
            lap: self.lap.sub(&other.lap),
            lap_normal: self.lap_normal.sub(&other.lap_normal),
        }
    }

    /// Distance between two solutions in the quadruple norm.
    pub fn distance(a: &Solution, b: &Solution) -> f64 {
        CauchyData::from_solution(a)
            .sub(&CauchyData::from_solution(b))
            .sup_norm()
    }
}

/// One compared pair in a stability probe.
#[derive(Debug, Clone)]
pub struct StabilitySample {
    pub cauchy_distance: f64,
    pub interior_distance: f64,
    /// `interior / cauchy`, absent for degenerate (near-coincident) pairs.
    pub ratio: Option<f64>,
}

/// Outcome of a stability probe over a family of solution pairs.
#[derive(Debug, Clone)]
pub struct StabilityProbe {
    pub samples: Vec<StabilitySample>,
    /// Largest ratio over non-degenerate pairs.
    pub max_ratio: f64,
    pub skipped_degenerate: usize,
}

/// Compare solution pairs: interior sup distance against Cauchy-quadruple
/// distance.  Pairs whose quadruples differ by less than `degeneracy_floor`
/// are recorded but excluded from the ratio (they carry no directional
/// information).
pub fn stability_probe(pairs: &[(Solution, Solution)], degeneracy_floor: f64) -> StabilityProbe {
    let mut samples = Vec::with_capacity(pairs.len());
    let mut max_ratio = 0.0f64;
    let mut skipped = 0usize;
    for (a, b) in pairs {
        let dc = CauchyData::distance(a, b);
        let di = a.u.sub(&b.u).sup_norm();
        if dc < degeneracy_floor {
            skipped += 1;
            samples.push(StabilitySample {
                cauchy_distance: dc,
                interior_distance: di,
                ratio: None,
            });
        } else {
            let ratio = di / dc;
            max_ratio = max_ratio.max(ratio);
            samples.push(StabilitySample {
                cauchy_distance: dc,
                interior_distance: di,
                ratio: Some(ratio),
            });
        }
    }
    StabilityProbe {
        samples,
        max_ratio,
        skipped_degenerate: skipped,
    }
}
