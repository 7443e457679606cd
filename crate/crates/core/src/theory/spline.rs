//! Clamped uniform B-spline bases.

use crate::error::{invalid, Result};

/// Degree-k B-splines on `grid` equally spaced points of [a, b]
/// (grid − 1 intervals), clamped at both ends; m = grid + k − 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasisSpec {
    grid: usize,
    degree: usize,
    a: f64,
    b: f64,
    knots: Vec<f64>,
}

impl SplineBasisSpec {
    pub fn new(grid: usize, degree: usize, a: f64, b: f64) -> Result<Self> {
        if grid < 2 {
            return Err(invalid(format!("spline grid needs at least 2 points, got {grid}")));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(invalid(format!("spline domain [{a}, {b}] is empty")));
        }
        let intervals = grid - 1;
        let h = (b - a) / intervals as f64;
        let mut knots = Vec::with_capacity(grid + 2 * degree);
        knots.extend(std::iter::repeat_n(a, degree));
        knots.extend((0..intervals).map(|i| a + h * i as f64));
        knots.push(b);
        knots.extend(std::iter::repeat_n(b, degree));
        Ok(Self { grid, degree, a, b, knots })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions, grid + k − 1.
    pub fn size(&self) -> usize {
        self.grid + self.degree - 1
    }

    /// Distinct knots a = t_0 < … < t_{grid−1} = b.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.knots[self.degree..self.degree + self.grid].to_vec()
    }

    /// Writes all basis values at z into `out` (length m); returns whether z
    /// had to be clamped into the domain.
    pub fn fill(&self, z: f64, out: &mut [f64]) -> bool {
        let clamped = !(self.a..=self.b).contains(&z);
        let z = z.clamp(self.a, self.b);
        let k = self.degree;
        let t = &self.knots;
        // span s with t_s <= z < t_{s+1}; the right end belongs to the last span
        let last = self.size() - 1;
        let s = if z >= self.b {
            last
        } else {
            let rel = ((z - self.a) / (self.b - self.a) * (self.grid - 1) as f64).floor() as usize;
            (rel + k).min(last)
        };
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut n = [0.0f64; 16];
        let mut left = [0.0f64; 16];
        let mut right = [0.0f64; 16];
        debug_assert!(k < 16);
        n[0] = 1.0;
        for j in 1..=k {
            left[j] = z - t[s + 1 - j];
            right[j] = t[s + j] - z;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        out[s - k..=s].copy_from_slice(&n[..=k]);
        clamped
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisValues {
    pub values: Vec<f64>,
    /// z lay outside the domain and was moved to the nearest end.
    pub clamped: bool,
}

pub fn bspline_basis(z: f64, spec: &SplineBasisSpec) -> BasisValues {
    let mut values = vec![0.0; spec.size()];
    let clamped = spec.fill(z, &mut values);
    BasisValues { values, clamped }
}
