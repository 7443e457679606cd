//! Per-eigenmode error decay of gradient descent on a quadratic loss.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, shape, Result};
use crate::numerics::{dot, sym_eig, Matrix};
use crate::rng::{substream, Stream};
use crate::theory::hessian::DEGENERACY_RATIO;

/// Modes with λ above this fraction of λ_max have their rate checked.
pub const RATE_CHECK_RATIO: f64 = 1e-6;
/// Amplitudes below this fraction of ‖e₀‖ are excluded from fits.
const FIT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ModeRate {
    pub lambda: f64,
    /// −ln(1 − ηλ)
    pub expected_rate: f64,
    /// Negative slope of ln|a| against step; `None` with fewer than two usable points.
    pub fitted_rate: Option<f64>,
    pub degenerate: bool,
    /// λ is large enough for the rate to be checked.
    pub checked: bool,
}

impl ModeRate {
    pub fn rel_error(&self) -> Option<f64> {
        self.fitted_rate.map(|f| (f - self.expected_rate).abs() / self.expected_rate.abs().max(f64::MIN_POSITIVE))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeDecayReport {
    pub eta: f64,
    pub steps: usize,
    pub degenerate_count: usize,
    /// Ascending in λ.
    pub modes: Vec<ModeRate>,
}

impl ModeDecayReport {
    /// Largest relative rate error over checked modes.
    pub fn max_rel_error(&self) -> f64 {
        self.modes
            .iter()
            .filter(|m| m.checked)
            .map(|m| m.rel_error().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }
}

/// Runs θ ← θ − η(Mθ − b) with b = Mθ* from a random θ₀ and fits each mode's
/// decay of the error θ − θ*.
pub fn mode_decay_sim(m: &Matrix, eta: f64, steps: usize, seed: u64) -> Result<ModeDecayReport> {
    if !m.is_square() {
        return Err(shape("mode decay needs a square matrix"));
    }
    let eig = sym_eig(m)?;
    let lmax = eig.max();
    if !(lmax > 0.0) || !(eta > 0.0) || eta * lmax >= 1.0 {
        return Err(invalid(format!("step size {eta} is not stable for λ_max = {lmax}")));
    }
    if steps < 2 {
        return Err(invalid("mode decay needs at least two steps"));
    }
    let n = m.rows();
    let mut rng = substream(seed, Stream::Probe);
    let mut draw = || -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let target = draw();
    let mut theta = draw();
    let b = m.matvec(&target)?;
    let vectors: Vec<Vec<f64>> = (0..n).map(|k| eig.vector(k)).collect();

    let error = |theta: &[f64]| -> Vec<f64> { theta.iter().zip(&target).map(|(a, b)| a - b).collect() };
    let e0 = error(&theta);
    let floor = FIT_FLOOR * dot(&e0, &e0).sqrt();
    // per-mode least-squares sums over (t, ln|a|)
    let mut sums = vec![[0.0f64; 5]; n];
    let mut active = vec![true; n];
    for t in 0..=steps {
        let e = error(&theta);
        for k in 0..n {
            if !active[k] {
                continue;
            }
            let a = dot(&vectors[k], &e).abs();
            if a <= floor {
                active[k] = false;
                continue;
            }
            let (x, y) = (t as f64, a.ln());
            let s = &mut sums[k];
            s[0] += 1.0;
            s[1] += x;
            s[2] += y;
            s[3] += x * x;
            s[4] += x * y;
        }
        if t == steps || !active.iter().any(|&a| a) {
            break;
        }
        let grad = m.matvec(&theta)?;
        for ((th, g), bi) in theta.iter_mut().zip(&grad).zip(&b) {
            *th -= eta * (g - bi);
        }
    }

    let degenerate_count = eig.values.iter().filter(|&&v| v < DEGENERACY_RATIO * lmax).count();
    let modes = eig
        .values
        .iter()
        .zip(&sums)
        .map(|(&lambda, s)| {
            let denom = s[0] * s[3] - s[1] * s[1];
            let fitted_rate = (s[0] >= 2.0 && denom > 0.0).then(|| -(s[0] * s[4] - s[1] * s[2]) / denom);
            ModeRate {
                lambda,
                expected_rate: -(1.0 - eta * lambda.max(0.0)).ln(),
                fitted_rate,
                degenerate: lambda < DEGENERACY_RATIO * lmax,
                checked: lambda > RATE_CHECK_RATIO * lmax,
            }
        })
        .collect();
    Ok(ModeDecayReport { eta, steps, degenerate_count, modes })
}

pub const DECAY_HEADER: [&str; 8] =
    ["label", "mode", "lambda", "expected_rate", "fitted_rate", "rel_error", "degenerate", "checked"];

pub fn write_decay_csv<W: Write>(reports: &[(String, ModeDecayReport)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DECAY_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (label, rep) in reports {
        for (i, mode) in rep.modes.iter().enumerate() {
            w.write_record([
                label.clone(),
                i.to_string(),
                mode.lambda.to_string(),
                mode.expected_rate.to_string(),
                opt(mode.fitted_rate),
                opt(mode.rel_error()),
                mode.degenerate.to_string(),
                mode.checked.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
