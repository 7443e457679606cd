//! Basis moments ν = E[b(z)] and C = E[b(z) b(z)ᵀ] under a marginal density.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::numerics::{integrate, Matrix, Quadrature, DEFAULT_PANELS, GL_ORDER};
use crate::theory::spline::SplineBasisSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Density {
    /// Uniform on the spline domain.
    Uniform,
    /// Standard normal truncated to the spline domain.
    Normal,
}

impl Density {
    /// Spline domain each density is paired with by default.
    pub fn default_domain(self) -> (f64, f64) {
        match self {
            Density::Uniform => (-1.0, 1.0),
            Density::Normal => (-4.0, 4.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Density::Uniform => "uniform",
            Density::Normal => "normal",
        }
    }

    /// Unnormalized density on the domain.
    fn weight(self, z: f64) -> f64 {
        match self {
            Density::Uniform => 1.0,
            Density::Normal => (-0.5 * z * z).exp(),
        }
    }
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Density {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Density::Uniform),
            "normal" | "gaussian" => Ok(Density::Normal),
            other => Err(Error::Parse(format!("unknown density {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentBundle {
    pub density: Density,
    pub spec: SplineBasisSpec,
    pub nu: Vec<f64>,
    pub c: Matrix,
    /// ννᵀ
    pub d: Matrix,
    /// C − D
    pub s: Matrix,
}

impl MomentBundle {
    pub fn size(&self) -> usize {
        self.nu.len()
    }

    /// Unit vector along the all-ones coefficient direction.
    pub fn v0(&self) -> Vec<f64> {
        let m = self.size();
        vec![1.0 / (m as f64).sqrt(); m]
    }
}

/// Quadrature with panels aligned to the spline breakpoints, so every panel
/// sees a single polynomial piece.
pub fn knot_aligned_quadrature(spec: &SplineBasisSpec) -> Result<Quadrature> {
    let breaks = spec.breakpoints();
    let intervals = breaks.len() - 1;
    let per_interval = DEFAULT_PANELS.div_ceil(intervals);
    Quadrature::on_breakpoints(&breaks, per_interval, GL_ORDER)
}

pub fn basis_moments(spec: &SplineBasisSpec, density: Density) -> Result<MomentBundle> {
    let quad = knot_aligned_quadrature(spec)?;
    let mass = integrate(|z| density.weight(z), &quad)?;
    if !(mass > 0.0) {
        return Err(invalid(format!("{density} density has no mass on {:?}", spec.domain())));
    }
    let m = spec.size();
    let mut nu = vec![0.0; m];
    let mut c = Matrix::zeros(m, m);
    let mut b = vec![0.0; m];
    for (&z, &w) in quad.nodes.iter().zip(&quad.weights) {
        let wz = w * density.weight(z) / mass;
        spec.fill(z, &mut b);
        for i in 0..m {
            if b[i] == 0.0 {
                continue;
            }
            nu[i] += wz * b[i];
            for j in i..m {
                c[(i, j)] += wz * b[i] * b[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            c[(i, j)] = c[(j, i)];
        }
    }
    let d = Matrix::from_vec(m, m, nu.iter().flat_map(|a| nu.iter().map(move |b| a * b)).collect())?;
    let s = c.sub(&d)?;
    Ok(MomentBundle { density, spec: spec.clone(), nu, c, d, s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sym_eig;

    fn uniform(grid: usize, k: usize) -> MomentBundle {
        basis_moments(&SplineBasisSpec::new(grid, k, -1.0, 1.0).unwrap(), Density::Uniform).unwrap()
    }

    #[test]
    fn two_cell_indicators_by_hand() {
        // two cells of width 1 on [−1, 1] under density ½
        let mb = uniform(3, 0);
        assert_eq!(mb.size(), 2);
        for v in &mb.nu {
            assert!((v - 0.5).abs() < 1e-15);
        }
        let c = Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let s = Matrix::from_rows(&[vec![0.25, -0.25], vec![-0.25, 0.25]]).unwrap();
        assert!(mb.c.sub(&c).unwrap().max_abs() < 1e-15);
        assert!(mb.s.sub(&s).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn linear_hats_exact() {
        // hats on [−1, 0, 1]: ν = [¼, ½, ¼]; C = [[1/6, 1/12, 0], [1/12, 1/3, 1/12], [0, 1/12, 1/6]]
        let mb = uniform(3, 1);
        let nu = [0.25, 0.5, 0.25];
        for (a, b) in mb.nu.iter().zip(nu) {
            assert!((a - b).abs() < 1e-14);
        }
        let c = Matrix::from_rows(&[
            vec![1.0 / 6.0, 1.0 / 12.0, 0.0],
            vec![1.0 / 12.0, 1.0 / 3.0, 1.0 / 12.0],
            vec![0.0, 1.0 / 12.0, 1.0 / 6.0],
        ])
        .unwrap();
        assert!(mb.c.sub(&c).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn mass_and_null_direction() {
        for density in [Density::Uniform, Density::Normal] {
            for (grid, k) in [(4, 2), (8, 3), (16, 3), (4, 0)] {
                let (a, b) = density.default_domain();
                let mb = basis_moments(&SplineBasisSpec::new(grid, k, a, b).unwrap(), density).unwrap();
                assert!((mb.nu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let sv = mb.s.matvec(&mb.v0()).unwrap();
                assert!(sv.iter().all(|v| v.abs() < 1e-10), "{density} {grid} {k}");
                assert!(mb.c.asymmetry() == 0.0);
                let ce = sym_eig(&mb.c).unwrap();
                assert!(ce.min() > 0.0);
                let se = sym_eig(&mb.s).unwrap();
                assert!(se.min() > -1e-12);
            }
        }
    }

    #[test]
    fn normal_density_is_symmetric() {
        let mb = basis_moments(&SplineBasisSpec::new(8, 3, -4.0, 4.0).unwrap(), Density::Normal).unwrap();
        let m = mb.size();
        for i in 0..m {
            assert!((mb.nu[i] - mb.nu[m - 1 - i]).abs() < 1e-12);
        }
        // mass concentrates near zero
        assert!(mb.nu[0] < mb.nu[m / 2]);
    }

    #[test]
    fn density_names() {
        assert_eq!("uniform".parse::<Density>().unwrap(), Density::Uniform);
        assert_eq!("normal".parse::<Density>().unwrap(), Density::Normal);
        assert!("cauchy".parse::<Density>().is_err());
    }
}
