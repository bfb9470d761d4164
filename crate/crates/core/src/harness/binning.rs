//! Binnings that keep atoms and singular sets as classes of their own, so
//! mixed laws can be tested with one chi-square statistic.

use crate::planar::{singular_masses, Endpoint, JointDensity, MotionSpec, Region};
use crate::{Error, Result};

/// n × n bins on the rotated coordinates of the interior, then four vertex
/// classes, four side classes and one class for both diagonals.
#[derive(Debug, Clone)]
pub struct PlanarBins {
    pub t: f64,
    pub c_x: f64,
    pub c_y: f64,
    pub n: usize,
}

impl PlanarBins {
    pub const SINGULAR: usize = 9;

    pub fn new(spec: &MotionSpec, t: f64, n: usize) -> Self {
        Self {
            t,
            c_x: spec.c_x,
            c_y: spec.c_y,
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.n * self.n + Self::SINGULAR
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn cell(&self, s: f64) -> usize {
        // s = u / t + ½ ∈ (0, 1)
        ((s * self.n as f64).floor().max(0.0) as usize).min(self.n - 1)
    }

    pub fn index(&self, e: &Endpoint) -> usize {
        let nn = self.n * self.n;
        match e.region {
            Region::Vertex(k) => nn + k as usize,
            Region::Side(k) => nn + 4 + k as usize,
            Region::HorizontalDiagonal | Region::VerticalDiagonal => nn + 8,
            Region::Interior => {
                let (a, b) = (e.state.x / self.c_x, e.state.y / self.c_y);
                let (u, v) = (0.5 * (a + b), 0.5 * (a - b));
                self.cell(u / self.t + 0.5) * self.n + self.cell(v / self.t + 0.5)
            }
        }
    }

    /// Bin probabilities of the standard motion at constant rate, from the
    /// product law of the rotated coordinates.
    pub fn standard_probabilities(&self, spec: &MotionSpec) -> Result<Vec<f64>> {
        let joint = JointDensity::new(spec, self.t)?;
        let d = joint
            .uv_law()
            .ok_or_else(|| Error::UnsupportedVariant(spec.variant.to_string()))?;
        let w = self.t / self.n as f64;
        let cells: Vec<f64> = (0..self.n)
            .map(|i| {
                d.ac_integral(
                    -0.5 * self.t + i as f64 * w,
                    -0.5 * self.t + (i + 1) as f64 * w,
                    1e-14,
                )
            })
            .collect::<Result<_>>()?;
        let mut p = Vec::with_capacity(self.len());
        for &a in &cells {
            for &b in &cells {
                p.push(a * b);
            }
        }
        let m = singular_masses(spec, self.t);
        p.extend([m.vertex / 4.0; 4]);
        p.extend([m.side_total / 4.0; 4]);
        p.push(m.diagonal_total);
        Ok(p)
    }
}

/// n equal bins on (lo, hi) followed by one class per atom.
#[derive(Debug, Clone)]
pub struct LineBins {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub atoms: Vec<f64>,
}

impl LineBins {
    pub fn new(lo: f64, hi: f64, n: usize, atoms: Vec<f64>) -> Self {
        Self { lo, hi, n, atoms }
    }

    pub fn len(&self) -> usize {
        self.n + self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bin of x; atoms are matched to within 1e-12 of the range. `None`
    /// outside the range.
    pub fn index(&self, x: f64) -> Option<usize> {
        let tol = 1e-12 * self.lo.abs().max(self.hi.abs());
        if let Some(k) = self.atoms.iter().position(|a| (x - a).abs() <= tol) {
            return Some(self.n + k);
        }
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let s = (x - self.lo) / (self.hi - self.lo);
        Some(((s * self.n as f64).floor() as usize).min(self.n - 1))
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.n as f64;
        (self.lo + i as f64 * w, self.lo + (i + 1) as f64 * w)
    }

    /// Probabilities from the continuous mass of each bin and the atom masses.
    pub fn probabilities<F>(&self, ac_mass: F, atom_masses: &[f64]) -> Result<Vec<f64>>
    where
        F: Fn(f64, f64) -> Result<f64>,
    {
        if atom_masses.len() != self.atoms.len() {
            return Err(Error::BinningMismatch(format!(
                "{} atom masses for {} atoms",
                atom_masses.len(),
                self.atoms.len()
            )));
        }
        let mut p: Vec<f64> = (0..self.n)
            .map(|i| {
                let (a, b) = self.edges(i);
                ac_mass(a, b)
            })
            .collect::<Result<_>>()?;
        p.extend_from_slice(atom_masses);
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planar::{PlanarState, Variant};
    use crate::rates::RateFunction;

    #[test]
    fn standard_probabilities_sum_to_one() {
        let spec =
            MotionSpec::symmetric(Variant::Standard, 1.0, RateFunction::constant(1.0)).unwrap();
        let bins = PlanarBins::new(&spec, 1.0, 25);
        let p = bins.standard_probabilities(&spec).unwrap();
        assert_eq!(p.len(), 634);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planar_indices() {
        let spec =
            MotionSpec::new(Variant::Standard, 2.0, 1.0, RateFunction::constant(1.0)).unwrap();
        let bins = PlanarBins::new(&spec, 1.0, 4);
        let at = |x, y, region| Endpoint {
            state: PlanarState { x, y, direction: 0 },
            region,
            events: 1,
        };
        assert_eq!(bins.index(&at(2.0, 0.0, Region::Vertex(0))), 16);
        assert_eq!(bins.index(&at(1.0, 0.5, Region::Side(0))), 20);
        assert_eq!(bins.index(&at(0.4, 0.0, Region::HorizontalDiagonal)), 24);
        // u = 0.45, v = 0.05 → cells 3 and 2
        assert_eq!(bins.index(&at(1.0, 0.4, Region::Interior)), 3 * 4 + 2);
    }

    #[test]
    fn line_indices() {
        let b = LineBins::new(-1.0, 1.0, 4, vec![-1.0, 0.0, 1.0]);
        assert_eq!(b.index(1.0), Some(6));
        assert_eq!(b.index(0.0), Some(5));
        assert_eq!(b.index(-0.75), Some(0));
        assert_eq!(b.index(0.99), Some(3));
        assert_eq!(b.index(1.5), None);
        assert!(b.probabilities(|_, _| Ok(0.0), &[1.0]).is_err());
    }
}
