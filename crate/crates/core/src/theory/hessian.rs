//! Leading-order Hessian M = J_p ⊗ D + R ⊗ S of a single-layer spline model
//! with p autocorrelated lag inputs.

use crate::error::{invalid, shape, Result};
use crate::numerics::{kron, sym_eig, toeplitz_from_acf, EigenDecomposition, Matrix};
use crate::theory::moments::MomentBundle;

/// Eigenvalues below this fraction of λ_max count as degenerate.
pub const DEGENERACY_RATIO: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct HessianBundle {
    pub p: usize,
    pub r: Matrix,
    pub m: Matrix,
    pub eig: EigenDecomposition,
    pub degenerate_count: usize,
    /// First eigenvalue above the degeneracy threshold.
    pub lambda_p: f64,
    /// 1-based ascending index of `lambda_p`.
    pub lambda_p_index: usize,
    /// `lambda_p_index` differs from p.
    pub index_mismatch: bool,
    pub kappa_tsf: f64,
}

impl HessianBundle {
    pub fn lambda_max(&self) -> f64 {
        self.eig.max()
    }
}

/// AR(1) autocorrelations r(h) = ρ^h, h = 0..p−1.
pub fn ar1_acf(rho: f64, p: usize) -> Vec<f64> {
    (0..p).map(|h| rho.powi(h as i32)).collect()
}

pub fn ar1_correlation(rho: f64, p: usize) -> Result<Matrix> {
    if !(rho.abs() < 1.0) {
        return Err(invalid(format!("AR(1) coefficient {rho} must lie in (-1, 1)")));
    }
    toeplitz_from_acf(&ar1_acf(rho, p))
}

pub fn leading_order_hessian(bundle: &MomentBundle, r: &Matrix) -> Result<HessianBundle> {
    if !r.is_square() || r.rows() == 0 {
        return Err(shape(format!("R must be square, got {}x{}", r.rows(), r.cols())));
    }
    let p = r.rows();
    let r_eig = sym_eig(r)?;
    if r_eig.min() < -1e-10 {
        return Err(invalid(format!("R is not positive semidefinite (λ_min = {:e})", r_eig.min())));
    }
    let j = Matrix::from_vec(p, p, vec![1.0; p * p])?;
    let m = kron(&j, &bundle.d).add(&kron(r, &bundle.s))?;
    let eig = sym_eig(&m)?;
    let lmax = eig.max();
    if !(lmax > 0.0) {
        return Err(invalid("leading-order Hessian has no positive eigenvalue"));
    }
    let degenerate_count = eig.values.iter().filter(|&&v| v < DEGENERACY_RATIO * lmax).count();
    let lambda_p = eig.values[degenerate_count];
    Ok(HessianBundle {
        p,
        r: r.clone(),
        m,
        degenerate_count,
        lambda_p,
        lambda_p_index: degenerate_count + 1,
        index_mismatch: degenerate_count + 1 != p,
        kappa_tsf: lmax / lambda_p,
        eig,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::moments::{basis_moments, Density};
    use crate::theory::spline::SplineBasisSpec;

    fn bundle(grid: usize, k: usize) -> MomentBundle {
        basis_moments(&SplineBasisSpec::new(grid, k, -1.0, 1.0).unwrap(), Density::Uniform).unwrap()
    }

    /// Eigenvalues of a symmetric 4x4 matrix by bisection on the
    /// characteristic polynomial det(M − λI) via Gaussian elimination.
    #[allow(clippy::needless_range_loop)]
    fn char_poly_roots(m: &Matrix) -> Vec<f64> {
        let n = m.rows();
        let det = |lam: f64| -> f64 {
            let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)] - if i == j { lam } else { 0.0 }).collect()).collect();
            let mut d = 1.0;
            for c in 0..n {
                let piv = (c..n).max_by(|&x, &y| a[x][c].abs().partial_cmp(&a[y][c].abs()).unwrap()).unwrap();
                if a[piv][c] == 0.0 {
                    return 0.0;
                }
                if piv != c {
                    a.swap(piv, c);
                    d = -d;
                }
                d *= a[c][c];
                for r in c + 1..n {
                    let f = a[r][c] / a[c][c];
                    for k in c..n {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
            d
        };
        // scan a fine grid for sign changes, then bisect
        let mut roots = Vec::new();
        let steps = 20000;
        // offset so no grid point lands on an eigenvalue
        let (lo, hi) = (-0.5 + 1e-5 * std::f64::consts::PI, 2.0);
        let mut prev = det(lo);
        for s in 1..=steps {
            let x = lo + (hi - lo) * s as f64 / steps as f64;
            let cur = det(x);
            if prev == 0.0 {
                roots.push(x - (hi - lo) / steps as f64);
            } else if prev.signum() != cur.signum() {
                let (mut a, mut b) = (x - (hi - lo) / steps as f64, x);
                for _ in 0..100 {
                    let mid = 0.5 * (a + b);
                    if det(mid).signum() == det(a).signum() {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            prev = cur;
        }
        roots
    }

    #[test]
    fn identity_r_gives_block_structure() {
        let b = bundle(8, 3);
        let p = 3;
        let h = leading_order_hessian(&b, &Matrix::identity(p)).unwrap();
        let m = b.size();
        for bj in 0..p {
            for bk in 0..p {
                let want = if bj == bk { &b.c } else { &b.d };
                for i in 0..m {
                    for l in 0..m {
                        assert!((h.m[(bj * m + i, bk * m + l)] - want[(i, l)]).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn hand_bundle_two_lags() {
        // two indicator cells: C = ½I, D = ¼J, S = ¼[[1,−1],[−1,1]]
        let b = bundle(3, 0);
        let rho = 0.5;
        let r = ar1_correlation(rho, 2).unwrap();
        let h = leading_order_hessian(&b, &r).unwrap();
        let want = Matrix::from_rows(&[
            vec![0.5, 0.0, 0.25 + 0.25 * rho, 0.25 - 0.25 * rho],
            vec![0.0, 0.5, 0.25 - 0.25 * rho, 0.25 + 0.25 * rho],
            vec![0.25 + 0.25 * rho, 0.25 - 0.25 * rho, 0.5, 0.0],
            vec![0.25 - 0.25 * rho, 0.25 + 0.25 * rho, 0.0, 0.5],
        ])
        .unwrap();
        assert!(h.m.sub(&want).unwrap().max_abs() < 1e-15);
        // eigenvalues {0, ½(1−ρ), ½(1+ρ), 1}
        let oracle = char_poly_roots(&want);
        assert_eq!(oracle.len(), 4);
        for (a, b) in h.eig.values.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        for (a, b) in h.eig.values.iter().zip([0.0, 0.25, 0.75, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(h.degenerate_count, 1);
        assert!(!h.index_mismatch);
        assert!((h.lambda_p - 0.25).abs() < 1e-12);
        assert!((h.kappa_tsf - 4.0).abs() < 1e-10);
    }

    #[test]
    fn independent_inputs_kappa_region() {
        let b = bundle(3, 0);
        let h = leading_order_hessian(&b, &Matrix::identity(2)).unwrap();
        let c_k = 1.0; // C = ½I
        assert!(h.kappa_tsf >= 1.0 && h.kappa_tsf <= 2.0 * c_k + 1e-12);
    }

    #[test]
    fn psd_and_null_space() {
        for (grid, k) in [(4, 2), (8, 3)] {
            let b = bundle(grid, k);
            for p in [3, 6] {
                for rho in [0.0, 0.4, 0.8] {
                    let h = leading_order_hessian(&b, &ar1_correlation(rho, p).unwrap()).unwrap();
                    assert!(h.eig.min() >= -1e-9 * h.lambda_max());
                    assert_eq!(h.degenerate_count, p - 1, "grid {grid} k {k} p {p} rho {rho}");
                    // u ⊗ 1 with Σu = 0 lies in the null space
                    let m = b.size();
                    let mut v = vec![0.0; p * m];
                    v[..m].iter_mut().for_each(|x| *x = 1.0);
                    v[m..2 * m].iter_mut().for_each(|x| *x = -1.0);
                    let mv = h.m.matvec(&v).unwrap();
                    assert!(mv.iter().all(|x| x.abs() < 1e-12));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_r() {
        let b = bundle(4, 2);
        let not_psd = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(leading_order_hessian(&b, &not_psd).is_err());
        assert!(leading_order_hessian(&b, &Matrix::zeros(2, 3)).is_err());
        assert!(ar1_correlation(1.0, 3).is_err());
        assert_eq!(ar1_acf(0.5, 3), vec![1.0, 0.5, 0.25]);
    }
}
