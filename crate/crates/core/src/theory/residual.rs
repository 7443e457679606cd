//! Empirical Hessian from sampled windows and its distance to the
//! leading-order approximation.

use std::io::Write;

use crate::datagen::{build_windows, generate_ar, sample_acf, ArConfig, Standardizer};
use crate::error::{shape, Result};
use crate::numerics::{spectral_norm_sym, sym_eig, toeplitz_from_acf, Matrix};
use crate::theory::hessian::leading_order_hessian;
use crate::theory::moments::{basis_moments, Density};
use crate::theory::spline::SplineBasisSpec;

/// Clamped fraction above which the empirical Hessian carries a warning.
pub const CLAMP_WARNING_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalHessian {
    pub m: Matrix,
    pub clamped_fraction: f64,
    pub warning: Option<String>,
}

/// Block (j, j′) = mean over rows of b(x_j) b(x_j′)ᵀ.
pub fn empirical_hessian(x: &Matrix, spec: &SplineBasisSpec) -> Result<EmpiricalHessian> {
    let (n, p) = (x.rows(), x.cols());
    if n == 0 {
        return Err(shape("empirical Hessian needs at least one row"));
    }
    let m = spec.size();
    let dim = p * m;
    let mut acc = vec![0.0; dim * dim];
    let mut feat = vec![0.0; dim];
    let mut nonzero = Vec::with_capacity(p * (spec.degree() + 1));
    let mut clamped = 0usize;
    for row in 0..n {
        nonzero.clear();
        for (j, &z) in x.row(row).iter().enumerate() {
            let block = &mut feat[j * m..(j + 1) * m];
            if spec.fill(z, block) {
                clamped += 1;
            }
            nonzero.extend((0..m).filter(|&l| block[l] != 0.0).map(|l| j * m + l));
        }
        for &a in &nonzero {
            let fa = feat[a];
            for &b in &nonzero {
                if b >= a {
                    acc[a * dim + b] += fa * feat[b];
                }
            }
        }
    }
    let inv = 1.0 / n as f64;
    for a in 0..dim {
        for b in a..dim {
            let v = acc[a * dim + b] * inv;
            acc[a * dim + b] = v;
            acc[b * dim + a] = v;
        }
    }
    let clamped_fraction = clamped as f64 / (n * p) as f64;
    let warning = (clamped_fraction > CLAMP_WARNING_FRACTION).then(|| {
        format!(
            "{:.3}% of inputs fell outside the spline domain {:?} and were clamped",
            100.0 * clamped_fraction,
            spec.domain()
        )
    });
    Ok(EmpiricalHessian { m: Matrix::from_vec(dim, dim, acc)?, clamped_fraction, warning })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// ‖M_emp − M_leading‖₂
    pub res_norm: f64,
    pub rel_res: f64,
    /// max_i |λ_i(M_emp) − λ_i(M_leading)|
    pub max_eig_dev: f64,
    /// Every eigenvalue deviation is within ‖E‖₂ + 1e-8.
    pub weyl_ok: bool,
}

pub fn residual_report(m_emp: &Matrix, m_leading: &Matrix) -> Result<ResidualReport> {
    if m_emp.rows() != m_leading.rows() || m_emp.cols() != m_leading.cols() {
        return Err(shape(format!(
            "empirical {}x{} vs leading {}x{}",
            m_emp.rows(),
            m_emp.cols(),
            m_leading.rows(),
            m_leading.cols()
        )));
    }
    let e = m_emp.sub(m_leading)?.symmetrized();
    let res_norm = spectral_norm_sym(&e)?;
    let lead_norm = spectral_norm_sym(m_leading)?;
    let a = sym_eig(m_emp)?;
    let b = sym_eig(m_leading)?;
    let max_eig_dev = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(ResidualReport {
        res_norm,
        rel_res: if lead_norm > 0.0 { res_norm / lead_norm } else { 0.0 },
        max_eig_dev,
        weyl_ok: max_eig_dev <= res_norm + 1e-8,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub rho: f64,
    pub p: usize,
    pub samples: usize,
    pub report: ResidualReport,
    pub clamped_fraction: f64,
    pub warning: Option<String>,
}

/// Simulates AR(1) data, standardizes `samples` lag-p windows and compares
/// the empirical Hessian with the Gaussian-marginal leading-order one built
/// from the sample autocorrelations.
pub fn residual_study(rho: f64, p: usize, samples: usize, spec: &SplineBasisSpec, seed: u64) -> Result<ResidualRow> {
    let series = generate_ar(&ArConfig::new(1, rho, 0.0, samples + p, seed))?;
    let (windows, _) = build_windows(&series, p)?;
    let x = Standardizer::fit(&windows)?.apply(&windows)?;
    let emp = empirical_hessian(&x, spec)?;
    let r = toeplitz_from_acf(&sample_acf(&series, p - 1)?)?;
    let bundle = basis_moments(spec, Density::Normal)?;
    let lead = leading_order_hessian(&bundle, &r)?;
    Ok(ResidualRow {
        rho,
        p,
        samples: x.rows(),
        report: residual_report(&emp.m, &lead.m)?,
        clamped_fraction: emp.clamped_fraction,
        warning: emp.warning,
    })
}

pub const RESIDUAL_HEADER: [&str; 9] =
    ["rho", "p", "samples", "res_norm", "rel_res", "max_eig_dev", "weyl_ok", "clamped_fraction", "warning"];

pub fn write_residual_csv<W: Write>(rows: &[ResidualRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESIDUAL_HEADER)?;
    for r in rows {
        w.write_record([
            r.rho.to_string(),
            r.p.to_string(),
            r.samples.to_string(),
            r.report.res_norm.to_string(),
            r.report.rel_res.to_string(),
            r.report.max_eig_dev.to_string(),
            r.report.weyl_ok.to_string(),
            r.clamped_fraction.to_string(),
            r.warning.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use rand_distr::{Distribution, StandardNormal};

    fn normal_spec() -> SplineBasisSpec {
        SplineBasisSpec::new(8, 3, -4.0, 4.0).unwrap()
    }

    #[test]
    fn identical_matrices_zero_residual() {
        let bundle = basis_moments(&normal_spec(), Density::Normal).unwrap();
        let h = leading_order_hessian(&bundle, &Matrix::identity(3)).unwrap();
        let r = residual_report(&h.m, &h.m).unwrap();
        assert_eq!(r.res_norm, 0.0);
        assert_eq!(r.rel_res, 0.0);
        assert!(r.weyl_ok);
        assert!(residual_report(&h.m, &Matrix::identity(2)).is_err());
    }

    #[test]
    fn single_row_is_outer_product() {
        let spec = SplineBasisSpec::new(4, 2, -1.0, 1.0).unwrap();
        let x = Matrix::from_rows(&[vec![0.1, -0.7]]).unwrap();
        let emp = empirical_hessian(&x, &spec).unwrap();
        let mut f = crate::theory::spline::bspline_basis(0.1, &spec).values;
        f.extend(crate::theory::spline::bspline_basis(-0.7, &spec).values);
        for a in 0..f.len() {
            for b in 0..f.len() {
                assert!((emp.m[(a, b)] - f[a] * f[b]).abs() < 1e-15);
            }
        }
        assert_eq!(emp.m.asymmetry(), 0.0);
        assert!(emp.warning.is_none());
    }

    #[test]
    fn independent_normals_match_moments() {
        let spec = normal_spec();
        let mut rng = substream(3, Stream::Probe);
        let n = 100_000;
        let data: Vec<f64> = (0..n * 2).map(|_| StandardNormal.sample(&mut rng)).collect();
        let emp = empirical_hessian(&Matrix::from_vec(n, 2, data).unwrap(), &spec).unwrap();
        let bundle = basis_moments(&spec, Density::Normal).unwrap();
        let m = spec.size();
        let mut worst_diag = 0.0f64;
        let mut worst_off = 0.0f64;
        for i in 0..m {
            for l in 0..m {
                worst_diag = worst_diag.max((emp.m[(i, l)] - bundle.c[(i, l)]).abs());
                worst_off = worst_off.max((emp.m[(i, m + l)] - bundle.d[(i, l)]).abs());
            }
        }
        // entries are O(0.1) to O(0.3); standard errors are O(1e-3)
        assert!(worst_diag < 6e-3, "{worst_diag}");
        assert!(worst_off < 6e-3, "{worst_off}");
    }

    #[test]
    fn clamping_warning() {
        let spec = SplineBasisSpec::new(4, 2, -1.0, 1.0).unwrap();
        let x = Matrix::from_rows(&[vec![0.0], vec![5.0]]).unwrap();
        let emp = empirical_hessian(&x, &spec).unwrap();
        assert_eq!(emp.clamped_fraction, 0.5);
        assert!(emp.warning.is_some());
    }

    #[test]
    fn study_row_small() {
        let row = residual_study(0.0, 3, 20_000, &normal_spec(), 1).unwrap();
        assert_eq!(row.samples, 20_000);
        assert!(row.report.weyl_ok);
        assert!(row.report.rel_res < 0.05, "{}", row.report.rel_res);
        let mut buf = Vec::new();
        write_residual_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("rho,p,samples,res_norm,rel_res,max_eig_dev"));
    }
}
