//! FastKAN: layers of learnable edge functions built from Gaussian radial
//! basis functions plus a SiLU-weighted residual path, with exact
//! reverse-mode gradients.
//!
//! Each layer computes
//!
//! ```text
//! out_j = Σ_i [ Σ_ℓ c_{jiℓ} φ_ℓ(z_i) + w_{ji} SiLU(z_i) ]
//! ```
//!
//! where `z` is the layer input, layer-normalized first on hidden layers
//! when enabled. Parameters live in one flat vector ordered as
//! (layer, output, input, basis) for the RBF coefficients, followed by the
//! (output, input) base weights of the same layer.

use std::io::{BufRead, Write};

use rand_distr::{Distribution, Normal};

use crate::error::{invalid, shape, Error, Result};
use crate::numerics::Matrix;
use crate::rng::{substream, Stream};

const LAYERNORM_EPS: f64 = 1e-5;

/// Equally spaced Gaussian RBF centers on [lo, hi]; bandwidth = spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfGrid {
    pub lo: f64,
    pub hi: f64,
    pub size: usize,
}

impl Default for RbfGrid {
    fn default() -> Self {
        Self { lo: -2.0, hi: 2.0, size: 8 }
    }
}

impl RbfGrid {
    pub fn new(lo: f64, hi: f64, size: usize) -> Result<Self> {
        let g = Self { lo, hi, size };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 2 || !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(invalid(format!(
                "RBF grid needs size >= 2 and lo < hi, got {} on [{}, {}]",
                self.size, self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn bandwidth(&self) -> f64 {
        (self.hi - self.lo) / (self.size - 1) as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let h = self.bandwidth();
        (0..self.size).map(|i| self.lo + h * i as f64).collect()
    }

    /// Fills φ_ℓ(z) = exp(−((z − c_ℓ)/h)²) for every center.
    ///
    /// Starts at the nearest center and walks outwards with the exact ratio
    /// φ_{ℓ±1}/φ_ℓ = exp(±2(u − ℓ) − 1), u = (z − lo)/h, so a full row costs
    /// three exponentials.
    fn fill(&self, z: f64, out: &mut [f64]) {
        let m = self.size;
        let u = (z - self.lo) / self.bandwidth();
        let anchor = u.round().clamp(0.0, (m - 1) as f64) as usize;
        let d = u - anchor as f64;
        let peak = (-d * d).exp();
        out[anchor] = peak;
        let mut up = (2.0 * d - 1.0).exp();
        let mut v = peak;
        for slot in out.iter_mut().take(m).skip(anchor + 1) {
            v *= up;
            up *= std::f64::consts::E.powi(-2);
            *slot = v;
        }
        let mut down = (-2.0 * d - 1.0).exp();
        v = peak;
        for slot in out[..anchor].iter_mut().rev() {
            v *= down;
            down *= std::f64::consts::E.powi(-2);
            *slot = v;
        }
    }
}

/// Basis values φ_1..φ_m at z.
pub fn rbf_basis(z: f64, grid: &RbfGrid) -> Vec<f64> {
    let mut out = vec![0.0; grid.size];
    grid.fill(z, &mut out);
    out
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KanConfig {
    pub widths: Vec<usize>,
    pub grid: RbfGrid,
    /// Layer-normalize the inputs of hidden (non-input) layers.
    pub layernorm: bool,
    /// Include the SiLU residual path.
    pub base_path: bool,
}

impl KanConfig {
    pub fn new(widths: Vec<usize>) -> Self {
        Self { widths, grid: RbfGrid::default(), layernorm: true, base_path: true }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.widths.len() < 2 {
            return Err(invalid(format!("widths {:?} need at least input and output", self.widths)));
        }
        if self.widths.contains(&0) {
            return Err(invalid(format!("zero width in {:?}", self.widths)));
        }
        if *self.widths.last().unwrap() != 1 {
            return Err(invalid("the forecasting network has a single output"));
        }
        if self.layernorm && self.widths[1..self.widths.len() - 1].contains(&1) {
            return Err(invalid("layer normalization needs hidden widths of at least 2"));
        }
        Ok(())
    }
}

/// Shape and parameter offsets of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct KanLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub layernorm: bool,
    pub base_path: bool,
    rbf_offset: usize,
    base_offset: usize,
}

impl KanLayer {
    pub fn rbf_len(&self, m: usize) -> usize {
        self.out_dim * self.in_dim * m
    }

    pub fn base_len(&self) -> usize {
        if self.base_path {
            self.out_dim * self.in_dim
        } else {
            0
        }
    }

    pub fn rbf_offset(&self) -> usize {
        self.rbf_offset
    }

    pub fn base_offset(&self) -> usize {
        self.base_offset
    }
}

#[derive(Debug, Clone)]
pub struct KanNetwork {
    config: KanConfig,
    layers: Vec<KanLayer>,
    params: Vec<f64>,
    generation: u64,
}

/// Per-parameter partials in the network's flat parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle(pub Vec<f64>);

impl GradientBundle {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    /// Layer inputs after optional normalization, batch × in.
    z: Vec<f64>,
    /// 1/σ per row when layer-normalized.
    inv_sigma: Vec<f64>,
    /// RBF values, batch × in × m.
    phi: Vec<f64>,
    /// SiLU(z) and σ(z), batch × in (empty without base path).
    silu: Vec<f64>,
    sig: Vec<f64>,
}

/// Everything a matching backward pass needs.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    batch: usize,
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.batch
    }
}

impl KanNetwork {
    /// Draws RBF coefficients from N(0, 1/√(in·m)) and base weights from
    /// N(0, 1/√in) using the initialization substream of `seed`.
    pub fn init(config: KanConfig, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        let m = net.config.grid.size;
        let mut rng = substream(seed, Stream::Init);
        for layer in net.layers.clone() {
            let rbf_sd = 1.0 / ((layer.in_dim * m) as f64).sqrt();
            let base_sd = 1.0 / (layer.in_dim as f64).sqrt();
            let rbf = Normal::new(0.0, rbf_sd).map_err(|e| invalid(e.to_string()))?;
            let base = Normal::new(0.0, base_sd).map_err(|e| invalid(e.to_string()))?;
            for v in &mut net.params[layer.rbf_offset..layer.rbf_offset + layer.rbf_len(m)] {
                *v = rbf.sample(&mut rng);
            }
            for v in &mut net.params[layer.base_offset..layer.base_offset + layer.base_len()] {
                *v = base.sample(&mut rng);
            }
        }
        Ok(net)
    }

    /// A network with every parameter set to zero.
    pub fn zeros(config: KanConfig) -> Result<Self> {
        config.validate()?;
        let m = config.grid.size;
        let mut layers = Vec::with_capacity(config.widths.len() - 1);
        let mut offset = 0;
        for (l, w) in config.widths.windows(2).enumerate() {
            let mut layer = KanLayer {
                in_dim: w[0],
                out_dim: w[1],
                layernorm: config.layernorm && l > 0,
                base_path: config.base_path,
                rbf_offset: offset,
                base_offset: 0,
            };
            offset += layer.rbf_len(m);
            layer.base_offset = offset;
            offset += layer.base_len();
            layers.push(layer);
        }
        Ok(Self { config, layers, params: vec![0.0; offset], generation: 0 })
    }

    pub fn config(&self) -> &KanConfig {
        &self.config
    }

    pub fn layers(&self) -> &[KanLayer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access; invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation += 1;
        &mut self.params
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(shape(format!(
                "{} values for {} parameters",
                values.len(),
                self.params.len()
            )));
        }
        self.params_mut().copy_from_slice(values);
        Ok(())
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    fn check_batch(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.config.widths[0] {
            return Err(shape(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.config.widths[0]
            )));
        }
        Ok(())
    }

    /// Predictions and the cache needed for [`KanNetwork::backward`].
    pub fn forward(&self, batch: &Matrix) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_batch(batch)?;
        let b = batch.rows();
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut input = batch.as_slice().to_vec();
        for layer in &self.layers {
            let (out, cache) = self.layer_forward(layer, &input, b);
            caches.push(cache);
            input = out;
        }
        Ok((input, ForwardCache { generation: self.generation, batch: b, layers: caches }))
    }

    /// Predictions only.
    pub fn predict(&self, batch: &Matrix) -> Result<Vec<f64>> {
        self.forward(batch).map(|(p, _)| p)
    }

    fn layer_forward(&self, layer: &KanLayer, input: &[f64], b: usize) -> (Vec<f64>, LayerCache) {
        let (n_in, n_out, m) = (layer.in_dim, layer.out_dim, self.config.grid.size);
        let mut z = input.to_vec();
        let mut inv_sigma = Vec::new();
        if layer.layernorm {
            inv_sigma.reserve(b);
            for row in z.chunks_mut(n_in) {
                let mean = row.iter().sum::<f64>() / n_in as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_in as f64;
                let inv = 1.0 / (var + LAYERNORM_EPS).sqrt();
                for v in row.iter_mut() {
                    *v = (*v - mean) * inv;
                }
                inv_sigma.push(inv);
            }
        }
        let mut phi = vec![0.0; b * n_in * m];
        for (zi, chunk) in z.iter().zip(phi.chunks_mut(m)) {
            self.config.grid.fill(*zi, chunk);
        }
        let (mut silu, mut sig) = (Vec::new(), Vec::new());
        if layer.base_path {
            sig = z.iter().map(|&v| sigmoid(v)).collect();
            silu = z.iter().zip(&sig).map(|(v, s)| v * s).collect();
        }

        let coeffs = &self.params[layer.rbf_offset..layer.rbf_offset + layer.rbf_len(m)];
        let base = &self.params[layer.base_offset..layer.base_offset + layer.base_len()];
        let mut out = vec![0.0; b * n_out];
        let row_len = n_in * m;
        for s in 0..b {
            let phi_s = &phi[s * row_len..(s + 1) * row_len];
            for j in 0..n_out {
                let c_j = &coeffs[j * row_len..(j + 1) * row_len];
                let mut acc: f64 = c_j.iter().zip(phi_s).map(|(c, p)| c * p).sum();
                if layer.base_path {
                    let w_j = &base[j * n_in..(j + 1) * n_in];
                    acc += w_j.iter().zip(&silu[s * n_in..(s + 1) * n_in]).map(|(w, a)| w * a).sum::<f64>();
                }
                out[s * n_out + j] = acc;
            }
        }
        (out, LayerCache { z, inv_sigma, phi, silu, sig })
    }

    /// Gradient of the batch mean of a per-sample loss whose derivative with
    /// respect to each prediction is `residuals[s]`. For ½(pred − y)² the
    /// residual is pred − y.
    pub fn backward(&self, cache: &ForwardCache, residuals: &[f64]) -> Result<GradientBundle> {
        if cache.generation != self.generation {
            return Err(Error::StaleCache { cache: cache.generation, network: self.generation });
        }
        if residuals.len() != cache.batch {
            return Err(shape(format!(
                "{} residuals for a batch of {}",
                residuals.len(),
                cache.batch
            )));
        }
        let b = cache.batch;
        let m = self.config.grid.size;
        let h = self.config.grid.bandwidth();
        let lo = self.config.grid.lo;
        let mut grads = vec![0.0; self.params.len()];
        let scale = 1.0 / b as f64;
        let mut g_out: Vec<f64> = residuals.iter().map(|r| r * scale).collect();

        for (l, layer) in self.layers.iter().enumerate().rev() {
            let lc = &cache.layers[l];
            let (n_in, n_out) = (layer.in_dim, layer.out_dim);
            let row_len = n_in * m;
            let coeffs = &self.params[layer.rbf_offset..layer.rbf_offset + layer.rbf_len(m)];
            let base = &self.params[layer.base_offset..layer.base_offset + layer.base_len()];
            let need_input = l > 0;
            let mut g_in = if need_input { vec![0.0; b * n_in] } else { Vec::new() };
            let mut d_phi = vec![0.0; row_len];
            let mut d_z = vec![0.0; n_in];

            let (g_rbf, rest) = grads[layer.rbf_offset..].split_at_mut(layer.rbf_len(m));
            let g_base = &mut rest[..layer.base_len()];

            for s in 0..b {
                let phi_s = &lc.phi[s * row_len..(s + 1) * row_len];
                let go = &g_out[s * n_out..(s + 1) * n_out];
                if need_input {
                    d_phi.iter_mut().for_each(|v| *v = 0.0);
                    d_z.iter_mut().for_each(|v| *v = 0.0);
                }
                for (j, &g) in go.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    let gc = &mut g_rbf[j * row_len..(j + 1) * row_len];
                    for (d, p) in gc.iter_mut().zip(phi_s) {
                        *d += g * p;
                    }
                    if need_input {
                        let c_j = &coeffs[j * row_len..(j + 1) * row_len];
                        for (d, c) in d_phi.iter_mut().zip(c_j) {
                            *d += g * c;
                        }
                    }
                    if layer.base_path {
                        let silu_s = &lc.silu[s * n_in..(s + 1) * n_in];
                        let gw = &mut g_base[j * n_in..(j + 1) * n_in];
                        for (d, a) in gw.iter_mut().zip(silu_s) {
                            *d += g * a;
                        }
                        if need_input {
                            let w_j = &base[j * n_in..(j + 1) * n_in];
                            for (d, w) in d_z.iter_mut().zip(w_j) {
                                *d += g * w;
                            }
                        }
                    }
                }
                if !need_input {
                    continue;
                }
                let z_s = &lc.z[s * n_in..(s + 1) * n_in];
                for i in 0..n_in {
                    let z = z_s[i];
                    let mut dz = if layer.base_path {
                        let sg = lc.sig[s * n_in + i];
                        d_z[i] * sg * (1.0 + z * (1.0 - sg))
                    } else {
                        0.0
                    };
                    let u = (z - lo) / h;
                    for k in 0..m {
                        let p = phi_s[i * m + k];
                        dz += d_phi[i * m + k] * p * (-2.0 * (u - k as f64) / h);
                    }
                    d_z[i] = dz;
                }
                let gi = &mut g_in[s * n_in..(s + 1) * n_in];
                if layer.layernorm {
                    let inv = lc.inv_sigma[s];
                    let mean_dz = d_z.iter().sum::<f64>() / n_in as f64;
                    let mean_dz_z =
                        d_z.iter().zip(z_s).map(|(a, b)| a * b).sum::<f64>() / n_in as f64;
                    for i in 0..n_in {
                        gi[i] = inv * (d_z[i] - mean_dz - z_s[i] * mean_dz_z);
                    }
                } else {
                    gi.copy_from_slice(&d_z);
                }
            }
            g_out = g_in;
        }
        Ok(GradientBundle(grads))
    }

    /// ½·mean((pred − y)²) and its gradient.
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[f64]) -> Result<(f64, GradientBundle)> {
        let (pred, cache) = self.forward(x)?;
        if y.len() != pred.len() {
            return Err(shape(format!("{} targets for {} rows", y.len(), pred.len())));
        }
        let residuals: Vec<f64> = pred.iter().zip(y).map(|(p, t)| p - t).collect();
        let loss = 0.5 * residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64;
        let grads = self.backward(&cache, &residuals)?;
        Ok((loss, grads))
    }

    /// Checkpoint: a `#` metadata line, then an `index,value` CSV of the flat
    /// parameter vector.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        let c = &self.config;
        let widths: Vec<String> = c.widths.iter().map(ToString::to_string).collect();
        writeln!(
            out,
            "# widths={} grid_lo={} grid_hi={} grid_size={} layernorm={} base_path={} params={}",
            widths.join(";"),
            c.grid.lo,
            c.grid.hi,
            c.grid.size,
            c.layernorm,
            c.base_path,
            self.params.len()
        )?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "value"])?;
        for (i, v) in self.params.iter().enumerate() {
            w.write_record([i.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(mut input: R) -> Result<Self> {
        let mut meta = String::new();
        input.read_line(&mut meta)?;
        let meta = meta
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("checkpoint lacks metadata line".into()))?;
        let field = |key: &str| -> Result<&str> {
            meta.split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| Error::Parse(format!("checkpoint missing {key}")))
        };
        let parse_err = |e: &dyn std::fmt::Display| Error::Parse(e.to_string());
        let widths = field("widths")?
            .split(';')
            .map(|s| s.parse::<usize>().map_err(|e| parse_err(&e)))
            .collect::<Result<Vec<_>>>()?;
        let grid = RbfGrid::new(
            field("grid_lo")?.parse().map_err(|e| parse_err(&e))?,
            field("grid_hi")?.parse().map_err(|e| parse_err(&e))?,
            field("grid_size")?.parse().map_err(|e| parse_err(&e))?,
        )?;
        let config = KanConfig {
            widths,
            grid,
            layernorm: field("layernorm")?.parse().map_err(|e| parse_err(&e))?,
            base_path: field("base_path")?.parse().map_err(|e| parse_err(&e))?,
        };
        let mut net = Self::zeros(config)?;
        let mut values = Vec::with_capacity(net.param_count());
        for rec in csv::Reader::from_reader(input).records() {
            let rec = rec?;
            values.push(rec[1].parse::<f64>().map_err(|e| parse_err(&e))?);
        }
        net.set_params(&values)?;
        Ok(net)
    }
}
