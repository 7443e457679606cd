//! Eigenvalue and condition-number bounds for the leading-order Hessian.

use std::io::Write;

use crate::error::Result;
use crate::numerics::sym_eig;
use crate::theory::hessian::{ar1_correlation, leading_order_hessian, HessianBundle};
use crate::numerics::Matrix;
use crate::theory::moments::{basis_moments, Density, MomentBundle};
use crate::theory::spline::SplineBasisSpec;

/// Relative slack on every comparison.
pub const BOUND_SLACK: f64 = 1e-9;

/// lo ≤ hi up to `BOUND_SLACK` times the larger magnitude.
pub fn le_with_slack(lo: f64, hi: f64) -> bool {
    lo <= hi + BOUND_SLACK * lo.abs().max(hi.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

impl Bound {
    pub fn lower_ok(&self) -> bool {
        le_with_slack(self.lower, self.value)
    }

    pub fn upper_ok(&self) -> bool {
        le_with_slack(self.value, self.upper)
    }

    /// The interval itself is non-empty.
    pub fn consistent(&self) -> bool {
        le_with_slack(self.lower, self.upper)
    }

    pub fn holds(&self) -> bool {
        self.lower_ok() && self.upper_ok() && self.consistent()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub p: usize,
    pub lmax_r: f64,
    pub lmin_r: f64,
    pub lmax_c: f64,
    pub lmin_c: f64,
    /// λ_max(C)/λ_min(C)
    pub c_k: f64,
    /// ½λ_max(R)λ_max(C) ≤ λ_max(M) ≤ pλ_max(C)
    pub lambda_max: Bound,
    /// λ_min(R)λ_min(C) ≤ λ_p(M) ≤ λ_min(R)λ_max(C)
    pub lambda_p: Bound,
    /// λ_max(R)/(2λ_min(R)) ≤ κ ≤ pC_k/λ_min(R)
    pub kappa: Bound,
    pub null_dim: usize,
    pub null_dim_ok: bool,
    /// λ_max(R) ≤ p
    pub lmax_r_ok: bool,
}

impl BoundsReport {
    pub fn pass(&self) -> bool {
        self.lambda_max.holds() && self.lambda_p.holds() && self.kappa.holds() && self.null_dim_ok && self.lmax_r_ok
    }

    /// Human-readable names of every failed check.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, b) in [("lambda_max", &self.lambda_max), ("lambda_p", &self.lambda_p), ("kappa", &self.kappa)] {
            if !b.lower_ok() {
                out.push(format!("{name} lower: {} > {}", b.lower, b.value));
            }
            if !b.upper_ok() {
                out.push(format!("{name} upper: {} > {}", b.value, b.upper));
            }
            if !b.consistent() {
                out.push(format!("{name} interval empty: {} > {}", b.lower, b.upper));
            }
        }
        if !self.null_dim_ok {
            out.push(format!("null dimension {} != {}", self.null_dim, self.p - 1));
        }
        if !self.lmax_r_ok {
            out.push(format!("lambda_max(R) {} > p = {}", self.lmax_r, self.p));
        }
        out
    }
}

pub fn theorem_bounds(r: &Matrix, bundle: &MomentBundle, hess: &HessianBundle) -> Result<BoundsReport> {
    let re = sym_eig(r)?;
    let ce = sym_eig(&bundle.c)?;
    let (lmax_r, lmin_r) = (re.max(), re.min());
    let (lmax_c, lmin_c) = (ce.max(), ce.min());
    let p = hess.p;
    let pf = p as f64;
    let c_k = lmax_c / lmin_c;
    Ok(BoundsReport {
        p,
        lmax_r,
        lmin_r,
        lmax_c,
        lmin_c,
        c_k,
        lambda_max: Bound { lower: 0.5 * lmax_r * lmax_c, value: hess.lambda_max(), upper: pf * lmax_c },
        lambda_p: Bound { lower: lmin_r * lmin_c, value: hess.lambda_p, upper: lmin_r * lmax_c },
        kappa: Bound { lower: lmax_r / (2.0 * lmin_r), value: hess.kappa_tsf, upper: pf * c_k / lmin_r },
        null_dim: hess.degenerate_count,
        null_dim_ok: hess.degenerate_count + 1 == p,
        lmax_r_ok: le_with_slack(lmax_r, pf),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRow {
    pub rho: f64,
    pub grid: usize,
    pub degree: usize,
    pub density: Density,
    pub report: BoundsReport,
}

/// One bounds report per ρ using the AR(1) correlation r(h) = ρ^h.
pub fn condition_sweep(rho_grid: &[f64], p: usize, spec: &SplineBasisSpec, density: Density) -> Result<Vec<ConditionRow>> {
    let bundle = basis_moments(spec, density)?;
    rho_grid
        .iter()
        .map(|&rho| {
            let r = ar1_correlation(rho, p)?;
            let h = leading_order_hessian(&bundle, &r)?;
            Ok(ConditionRow {
                rho,
                grid: spec.grid(),
                degree: spec.degree(),
                density,
                report: theorem_bounds(&r, &bundle, &h)?,
            })
        })
        .collect()
}

pub const CONDITION_HEADER: [&str; 21] = [
    "rho", "p", "G", "k", "density", "lmax_R", "lmin_R", "lmax_C", "lmin_C", "C_k", "lmax_M", "lambda_p", "kappa",
    "bound1_lo", "bound1_hi", "bound2_lo", "bound2_hi", "bound3_lo", "bound3_hi", "null_dim", "pass",
];

pub fn write_condition_csv<W: Write>(rows: &[ConditionRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONDITION_HEADER)?;
    for row in rows {
        let r = &row.report;
        let mut rec = vec![row.rho.to_string(), r.p.to_string(), row.grid.to_string(), row.degree.to_string()];
        rec.push(row.density.to_string());
        for v in [
            r.lmax_r,
            r.lmin_r,
            r.lmax_c,
            r.lmin_c,
            r.c_k,
            r.lambda_max.value,
            r.lambda_p.value,
            r.kappa.value,
            r.lambda_max.lower,
            r.lambda_max.upper,
            r.lambda_p.lower,
            r.lambda_p.upper,
            r.kappa.lower,
            r.kappa.upper,
        ] {
            rec.push(v.to_string());
        }
        rec.push(r.null_dim.to_string());
        rec.push(r.pass().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_spec(grid: usize, k: usize) -> SplineBasisSpec {
        SplineBasisSpec::new(grid, k, -1.0, 1.0).unwrap()
    }

    #[test]
    fn slack_comparison() {
        assert!(le_with_slack(1.0, 1.0));
        assert!(le_with_slack(1.0 + 1e-12, 1.0));
        assert!(!le_with_slack(1.0 + 1e-6, 1.0));
        assert!(le_with_slack(-1.0, 0.0));
    }

    #[test]
    fn identity_reduces_to_independent_case() {
        let rows = condition_sweep(&[0.0], 6, &uniform_spec(8, 3), Density::Uniform).unwrap();
        let r = &rows[0].report;
        assert!(r.pass(), "{:?}", r.failures());
        assert_eq!(r.lmax_r, 1.0);
        assert_eq!(r.lmin_r, 1.0);
        assert!(r.kappa.lower == 0.5);
        assert!(r.kappa.value >= 1.0 && r.kappa.value <= 6.0 * r.c_k);
        assert!(r.lmin_c > 0.0 && r.c_k.is_finite());
    }

    #[test]
    fn strong_correlation_passes() {
        let rows = condition_sweep(&[0.8], 6, &uniform_spec(8, 3), Density::Uniform).unwrap();
        let r = &rows[0].report;
        assert!(r.pass(), "{:?}", r.failures());
        assert_eq!(r.null_dim, 5);
    }

    #[test]
    fn kappa_grows_with_rho() {
        let grid: Vec<f64> = (1..=8).map(|i| i as f64 / 10.0).collect();
        let rows = condition_sweep(&grid, 6, &uniform_spec(8, 3), Density::Uniform).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].report.kappa.value >= w[0].report.kappa.value);
        }
    }

    #[test]
    fn detects_violation() {
        let b = Bound { lower: 2.0, value: 1.0, upper: 3.0 };
        assert!(!b.lower_ok() && b.upper_ok() && b.consistent() && !b.holds());
        let rows = condition_sweep(&[0.5], 3, &uniform_spec(4, 2), Density::Uniform).unwrap();
        let mut r = rows[0].report.clone();
        r.null_dim = 1;
        r.null_dim_ok = false;
        assert!(!r.pass());
        assert_eq!(r.failures().len(), 1);
    }

    #[test]
    fn csv_header_and_rows() {
        let rows = condition_sweep(&[0.0, 0.5], 3, &uniform_spec(8, 3), Density::Uniform).unwrap();
        let mut buf = Vec::new();
        write_condition_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("rho,p,G,k,density,lmax_R,lmin_R,lmax_C,lmin_C,C_k,lmax_M,lambda_p,kappa,bound1_lo"));
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("0,3,8,3,uniform,"));
        assert!(text.lines().nth(1).unwrap().ends_with(",2,true"));
    }
}
