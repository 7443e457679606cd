//! Synthetic AR(N) series, lag windows, standardization, the three-frequency
//! target and the chronological train/test split.

use std::io::{Read, Write};

use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{invalid, shape, Error, Result};
use crate::numerics::Matrix;
use crate::rng::{substream, Stream};

/// Parameters of x_t = ρ1 x_{t-1} + ρ2 Σ_{i=2..N} x_{t-i} + σ ε_t.
#[derive(Debug, Clone, PartialEq)]
pub struct ArConfig {
    pub order: usize,
    pub rho1: f64,
    pub rho2: f64,
    pub length: usize,
    pub seed: u64,
}

impl ArConfig {
    pub fn new(order: usize, rho1: f64, rho2: f64, length: usize, seed: u64) -> Self {
        Self { order, rho1, rho2, length, seed }
    }

    /// Window length p = 3N.
    pub fn lags(&self) -> usize {
        3 * self.order
    }

    pub fn burn_in(&self) -> usize {
        10 * self.order
    }

    /// σ = √(1 − ρ1² − (N−1)ρ2²).
    pub fn noise_scale(&self) -> Result<f64> {
        let var = 1.0 - self.rho1 * self.rho1 - (self.order as f64 - 1.0) * self.rho2 * self.rho2;
        if !(var > 0.0) {
            return Err(invalid(format!(
                "1 - rho1^2 - (N-1) rho2^2 = {var} must be positive (N={}, rho1={}, rho2={})",
                self.order, self.rho1, self.rho2
            )));
        }
        Ok(var.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(invalid("AR order N must be at least 1"));
        }
        self.noise_scale()?;
        let coeff_sum = self.rho1.abs() + (self.order as f64 - 1.0) * self.rho2.abs();
        if coeff_sum >= 1.0 {
            return Err(invalid(format!(
                "|rho1| + (N-1)|rho2| = {coeff_sum} >= 1; process may be non-stationary"
            )));
        }
        if self.length <= 10 * self.lags() {
            return Err(invalid(format!(
                "length {} must exceed 10 p = {}",
                self.length,
                10 * self.lags()
            )));
        }
        Ok(())
    }
}

/// Generates the AR(N) series from a zero initial state, discarding a
/// burn-in of 10·N samples.
pub fn generate_ar(cfg: &ArConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let sigma = cfg.noise_scale()?;
    let n = cfg.order;
    let total = cfg.burn_in() + cfg.length;
    let mut rng = substream(cfg.seed, Stream::Series);
    let mut x = Vec::with_capacity(total);
    for t in 0..total {
        let lag = |i: usize| if t >= i { x[t - i] } else { 0.0 };
        let mut next = cfg.rho1 * lag(1);
        if n > 1 {
            next += cfg.rho2 * (2..=n).map(lag).sum::<f64>();
        }
        let eps: f64 = StandardNormal.sample(&mut rng);
        x.push(next + sigma * eps);
    }
    Ok(x.split_off(cfg.burn_in()))
}

/// Lag windows [x_t, x_{t-1}, …, x_{t-p+1}] for every t with a successor,
/// plus the series index t of each row.
pub fn build_windows(series: &[f64], p: usize) -> Result<(Matrix, Vec<usize>)> {
    if p == 0 {
        return Err(invalid("window length p must be positive"));
    }
    if p >= series.len() {
        return Err(invalid(format!("p = {p} must be below series length {}", series.len())));
    }
    let rows = series.len() - p;
    let mut data = Vec::with_capacity(rows * p);
    let mut times = Vec::with_capacity(rows);
    for t in (p - 1)..(series.len() - 1) {
        data.extend((0..p).map(|j| series[t - j]));
        times.push(t);
    }
    Ok((Matrix::from_vec(rows, p, data)?, times))
}

/// Per-column affine standardization fitted on training rows
/// (population variance convention).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x_train: &Matrix) -> Result<Self> {
        let n = x_train.rows();
        if n < 2 {
            return Err(invalid(format!("standardizer needs at least 2 rows, got {n}")));
        }
        let cols = x_train.cols();
        let mut means = vec![0.0; cols];
        let mut sds = vec![0.0; cols];
        for j in 0..cols {
            let col = x_train.column(j);
            let (m, v) = mean_var(&col);
            if !(v > 0.0) {
                return Err(Error::Degenerate(format!("column {j} has zero variance")));
            }
            means[j] = m;
            sds[j] = v.sqrt();
        }
        Ok(Self { means, sds })
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.means.len() {
            return Err(shape(format!(
                "standardizer fitted on {} columns applied to {}",
                self.means.len(),
                x.cols()
            )));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.means[j]) / self.sds[j];
            }
        }
        Ok(out)
    }
}

/// Population mean and variance.
pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Angular factors and observation noise of the synthetic target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub omega_low: f64,
    pub omega_mid: f64,
    pub omega_high: f64,
    pub noise_sd: f64,
}

impl Default for TargetSpec {
    fn default() -> Self {
        Self { omega_low: 1.0, omega_mid: 3.0, omega_high: 6.0, noise_sd: 0.05 }
    }
}

impl TargetSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("low", self.omega_low), ("mid", self.omega_mid), ("high", self.omega_high)] {
            if !(w > 0.0) || !w.is_finite() {
                return Err(invalid(format!("omega_{name} = {w} must be positive")));
            }
        }
        if !(self.noise_sd >= 0.0) {
            return Err(invalid(format!("noise_sd = {} must be non-negative", self.noise_sd)));
        }
        Ok(())
    }
}

/// Known per-row target components.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Components {
    pub low: Vec<f64>,
    pub mid: Vec<f64>,
    pub high: Vec<f64>,
}

impl Components {
    pub fn slice(&self, start: usize, end: usize) -> Components {
        Components {
            low: self.low[start..end].to_vec(),
            mid: self.mid[start..end].to_vec(),
            high: self.high[start..end].to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Targets {
    pub y: Vec<f64>,
    pub components: Components,
    /// y − (low + mid + high), exact by construction.
    pub noise: Vec<f64>,
    pub v_easy: Vec<f64>,
    pub v_hard: Vec<f64>,
}

/// w_easy = 1_N ⊗ [1,1,1], w_hard = 1_N ⊗ [1,−2,1].
pub fn projection_vectors(p: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if p == 0 || !p.is_multiple_of(3) {
        return Err(invalid(format!("window length p = {p} must be a positive multiple of 3")));
    }
    let easy = vec![1.0; p];
    let hard = (0..p).map(|j| if j % 3 == 1 { -2.0 } else { 1.0 }).collect();
    Ok((easy, hard))
}

/// Raw projections wᵀx for every row.
pub fn project(x: &Matrix, w: &[f64]) -> Result<Vec<f64>> {
    x.matvec(w)
}

/// Builds y = sin(ω_low V_easy) + sin(ω_mid V_hard) + sin(ω_high V_hard) + η
/// from standardized windows. Projections are normalized with the first
/// `train_rows` rows; η comes from the target-noise substream of `seed`.
pub fn build_targets(
    x_std: &Matrix,
    train_rows: usize,
    spec: &TargetSpec,
    seed: u64,
) -> Result<Targets> {
    spec.validate()?;
    let (w_easy, w_hard) = projection_vectors(x_std.cols())?;
    if train_rows < 2 || train_rows > x_std.rows() {
        return Err(invalid(format!(
            "train_rows = {train_rows} outside 2..={}",
            x_std.rows()
        )));
    }
    let v_easy = normalize_on_prefix(project(x_std, &w_easy)?, train_rows)?;
    let v_hard = normalize_on_prefix(project(x_std, &w_hard)?, train_rows)?;

    let mut rng = substream(seed, Stream::TargetNoise);
    let noise_dist = Normal::new(0.0, spec.noise_sd).map_err(|e| invalid(e.to_string()))?;
    let rows = x_std.rows();
    let mut comps = Components {
        low: Vec::with_capacity(rows),
        mid: Vec::with_capacity(rows),
        high: Vec::with_capacity(rows),
    };
    let mut y = Vec::with_capacity(rows);
    let mut noise = Vec::with_capacity(rows);
    for i in 0..rows {
        let low = (spec.omega_low * v_easy[i]).sin();
        let mid = (spec.omega_mid * v_hard[i]).sin();
        let high = (spec.omega_high * v_hard[i]).sin();
        let eta: f64 = noise_dist.sample(&mut rng);
        let signal = low + mid + high;
        let yi = signal + eta;
        comps.low.push(low);
        comps.mid.push(mid);
        comps.high.push(high);
        y.push(yi);
        noise.push(yi - signal);
    }
    Ok(Targets { y, components: comps, noise, v_easy, v_hard })
}

fn normalize_on_prefix(mut v: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    let (mean, var) = mean_var(&v[..n]);
    if !(var > 0.0) {
        return Err(Error::Degenerate("projection has zero variance on training rows".into()));
    }
    let sd = var.sqrt();
    for x in &mut v {
        *x = (*x - mean) / sd;
    }
    Ok(v)
}

/// Biased sample autocorrelation r(0..=max_lag), r(0) = 1.
pub fn sample_acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if series.len() <= 10 * max_lag || series.len() < 2 {
        return Err(invalid(format!(
            "series of length {} too short for max_lag {max_lag}",
            series.len()
        )));
    }
    let n = series.len() as f64;
    let (mean, _) = mean_var(series);
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let gamma = |h: usize| centered.iter().zip(&centered[h..]).map(|(a, b)| a * b).sum::<f64>() / n;
    let g0 = gamma(0);
    if !(g0 > 0.0) {
        return Err(Error::Degenerate("series has zero variance".into()));
    }
    let mut r = vec![1.0];
    r.extend((1..=max_lag).map(|h| gamma(h) / g0));
    Ok(r)
}

/// First test row: floor(ratio · rows), both sides non-empty.
pub fn split_index(rows: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(invalid(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    let idx = (ratio * rows as f64).floor() as usize;
    if idx == 0 || idx >= rows {
        return Err(invalid(format!("split of {rows} rows at {ratio} leaves an empty side")));
    }
    Ok(idx)
}

/// Windowed, standardized, target-annotated data with a chronological split.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Series index t of each row's newest lag.
    pub times: Vec<usize>,
    pub x: Matrix,
    pub y: Vec<f64>,
    pub components: Components,
    pub noise: Vec<f64>,
    pub split_index: usize,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    pub fn lags(&self) -> usize {
        self.x.cols()
    }

    pub fn train_x(&self) -> Matrix {
        self.x.slice_rows(0, self.split_index)
    }

    pub fn test_x(&self) -> Matrix {
        self.x.slice_rows(self.split_index, self.rows())
    }

    pub fn train_y(&self) -> &[f64] {
        &self.y[..self.split_index]
    }

    pub fn test_y(&self) -> &[f64] {
        &self.y[self.split_index..]
    }

    pub fn test_components(&self) -> Components {
        self.components.slice(self.split_index, self.rows())
    }

    /// Re-splits chronologically (no shuffling).
    pub fn split_chronological(mut self, ratio: f64) -> Result<Self> {
        self.split_index = split_index(self.rows(), ratio)?;
        Ok(self)
    }

    /// Replaces the inputs (same rows, possibly transformed) keeping targets.
    pub fn with_inputs(&self, x: Matrix) -> Result<Self> {
        if x.rows() != self.rows() {
            return Err(shape(format!("{} rows for a dataset of {}", x.rows(), self.rows())));
        }
        Ok(Self { x, ..self.clone() })
    }

    /// CSV with header `t,x_lag0..x_lag{p-1},y,c_low,c_mid,c_high,is_test`.
    /// Values use the shortest round-trip decimal form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.lags()).map(|j| format!("x_lag{j}")));
        header.extend(["y", "c_low", "c_mid", "c_high", "is_test"].map(String::from));
        w.write_record(&header)?;
        for i in 0..self.rows() {
            let mut rec = vec![self.times[i].to_string()];
            rec.extend(self.x.row(i).iter().map(|v| v.to_string()));
            rec.push(self.y[i].to_string());
            rec.push(self.components.low[i].to_string());
            rec.push(self.components.mid[i].to_string());
            rec.push(self.components.high[i].to_string());
            rec.push(u8::from(i >= self.split_index).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let p = header.iter().filter(|h| h.starts_with("x_lag")).count();
        if header.len() != p + 6 || header.get(0) != Some("t") {
            return Err(Error::Parse(format!("unexpected dataset header: {header:?}")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        let mut times = Vec::new();
        let mut data = Vec::new();
        let mut y = Vec::new();
        let mut comps = Components::default();
        let mut split = None;
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            times.push(rec[0].parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?);
            for j in 0..p {
                data.push(num(&rec[1 + j])?);
            }
            y.push(num(&rec[p + 1])?);
            comps.low.push(num(&rec[p + 2])?);
            comps.mid.push(num(&rec[p + 3])?);
            comps.high.push(num(&rec[p + 4])?);
            match (&rec[p + 5], split) {
                ("1", None) => split = Some(i),
                ("0", Some(_)) => {
                    return Err(Error::Parse(format!("training row {i} after test rows")))
                }
                ("0", None) | ("1", Some(_)) => {}
                (other, _) => return Err(Error::Parse(format!("is_test = {other:?}"))),
            }
        }
        let rows = y.len();
        let noise = (0..rows).map(|i| y[i] - (comps.low[i] + comps.mid[i] + comps.high[i])).collect();
        Ok(Self {
            times,
            x: Matrix::from_vec(rows, p, data)?,
            y,
            components: comps,
            noise,
            split_index: split.unwrap_or(rows),
        })
    }
}

/// Full pipeline: series → windows → split → standardize on training rows →
/// targets. The returned dataset holds standardized lag windows (KAN input).
pub fn prepare_dataset(cfg: &ArConfig, target: &TargetSpec, train_ratio: f64) -> Result<Dataset> {
    let series = generate_ar(cfg)?;
    dataset_from_series(&series, cfg.lags(), target, train_ratio, cfg.seed)
}

pub fn dataset_from_series(
    series: &[f64],
    p: usize,
    target: &TargetSpec,
    train_ratio: f64,
    seed: u64,
) -> Result<Dataset> {
    let (windows, times) = build_windows(series, p)?;
    let split = split_index(windows.rows(), train_ratio)?;
    let standardizer = Standardizer::fit(&windows.slice_rows(0, split))?;
    let x = standardizer.apply(&windows)?;
    let t = build_targets(&x, split, target, seed)?;
    Ok(Dataset {
        times,
        x,
        y: t.y,
        components: t.components,
        noise: t.noise,
        split_index: split,
    })
}
