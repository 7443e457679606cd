//! Adam minimization of the half mean-squared error, epoch-wise test
//! evaluation and the component-recovery metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::datagen::{mean_var, prepare_dataset, ArConfig, Dataset, TargetSpec};
use crate::dct::dct_dataset;
use crate::error::{invalid, shape, Error, Result};
use crate::fastkan::{KanConfig, KanNetwork, RbfGrid};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            batch_size: 256,
            epochs: 150,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let rates_ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !rates_ok {
            return Err(invalid(format!("bad optimizer constants {self:?}")));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(invalid("batch size and epoch count must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], cfg: &TrainConfig) -> Result<()> {
    if params.len() != state.len() || grads.len() != state.len() {
        return Err(shape(format!(
            "adam state {} / params {} / grads {}",
            state.len(),
            params.len(),
            grads.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NumericalDomain(format!(
            "non-finite gradient {} at parameter {i} (step {})",
            grads[i],
            state.step + 1
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 / (1.0 - cfg.beta1.powi(t));
    let c2 = 1.0 / (1.0 - cfg.beta2.powi(t));
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        *p -= cfg.learning_rate * (*m * c1) / ((*v * c2).sqrt() + cfg.epsilon);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Kan,
    DctKan,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Kan, Variant::DctKan];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Kan => "kan",
            Variant::DctKan => "dct-kan",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kan" => Ok(Variant::Kan),
            "dct-kan" => Ok(Variant::DctKan),
            other => Err(Error::Parse(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub variant: Variant,
    pub order: usize,
    pub rho1: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub test_mse: f64,
    pub e_low: f64,
    pub e_mid: f64,
    pub e_high: f64,
}

#[derive(Debug, Clone)]
pub struct RunHistory {
    pub meta: RunMeta,
    /// Metrics before the first update.
    pub initial: EpochRecord,
    /// One record per epoch, epochs 1..=E.
    pub records: Vec<EpochRecord>,
    /// Parameters after the last epoch.
    pub network: KanNetwork,
}

pub const RUN_HEADER: [&str; 9] =
    ["variant", "N", "rho1", "seed", "epoch", "test_mse", "e_low", "e_mid", "e_high"];

impl RunHistory {
    pub fn final_record(&self) -> &EpochRecord {
        self.records.last().unwrap_or(&self.initial)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RUN_HEADER)?;
        for r in &self.records {
            w.write_record([
                self.meta.variant.to_string(),
                self.meta.order.to_string(),
                self.meta.rho1.to_string(),
                self.meta.seed.to_string(),
                r.epoch.to_string(),
                r.test_mse.to_string(),
                r.e_low.to_string(),
                r.e_mid.to_string(),
                r.e_high.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_pair(pred: &[f64], component: &[f64]) -> Result<()> {
    if pred.len() != component.len() {
        return Err(shape(format!("{} predictions vs {} component values", pred.len(), component.len())));
    }
    if pred.len() < 2 {
        return Err(invalid("amplitude needs at least two samples"));
    }
    Ok(())
}

/// â = clip(Cov(pred, C) / (Var(C) + 1e-8), 0, 1), population moments.
pub fn recovered_amplitude(pred: &[f64], component: &[f64]) -> Result<f64> {
    check_pair(pred, component)?;
    let n = pred.len() as f64;
    let (mp, _) = mean_var(pred);
    let (mc, vc) = mean_var(component);
    let cov = pred.iter().zip(component).map(|(a, b)| (a - mp) * (b - mc)).sum::<f64>() / n;
    let a = (cov / (vc + 1e-8)).clamp(0.0, 1.0);
    if a.is_nan() {
        return Err(Error::NumericalDomain("amplitude is NaN".into()));
    }
    Ok(a)
}

/// E = (1 − â)².
pub fn component_error(pred: &[f64], component: &[f64]) -> Result<f64> {
    let a = recovered_amplitude(pred, component)?;
    Ok((1.0 - a) * (1.0 - a))
}

/// Test MSE and component errors of `net` on the test split.
pub fn evaluate(net: &KanNetwork, ds: &Dataset, epoch: usize) -> Result<EpochRecord> {
    let pred = net.predict(&ds.test_x())?;
    let y = ds.test_y();
    let test_mse = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64;
    if !test_mse.is_finite() {
        return Err(Error::Diverged { epoch, reason: format!("test MSE {test_mse}") });
    }
    let c = ds.test_components();
    Ok(EpochRecord {
        epoch,
        test_mse,
        e_low: component_error(&pred, &c.low)?,
        e_mid: component_error(&pred, &c.mid)?,
        e_high: component_error(&pred, &c.high)?,
    })
}

/// Minibatch Adam over shuffled training rows, evaluated on the test split
/// after every epoch.
pub fn train(mut net: KanNetwork, ds: &Dataset, cfg: &TrainConfig, meta: RunMeta) -> Result<RunHistory> {
    cfg.validate()?;
    let n_train = ds.split_index;
    if n_train == 0 || n_train >= ds.rows() {
        return Err(invalid("dataset needs non-empty train and test splits"));
    }
    let train_x = ds.train_x();
    let train_y = ds.train_y();
    let initial = evaluate(&net, ds, 0)?;
    let mut adam = AdamState::new(net.param_count());
    let mut rng = substream(cfg.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xb = train_x.select_rows(batch);
            let (pred, cache) = net.forward(&xb)?;
            let residuals: Vec<f64> = pred.iter().zip(batch).map(|(p, &i)| p - train_y[i]).collect();
            let grads = net.backward(&cache, &residuals)?;
            adam_step(&mut adam, net.params_mut(), grads.as_slice(), cfg)
                .map_err(|e| Error::Diverged { epoch, reason: e.to_string() })?;
        }
        records.push(evaluate(&net, ds, epoch)?);
    }
    Ok(RunHistory { meta, initial, records, network: net })
}

/// Everything needed to reproduce one training run from scratch.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub ar: ArConfig,
    pub target: TargetSpec,
    pub train_ratio: f64,
    pub hidden_width: usize,
    pub grid: RbfGrid,
    pub layernorm: bool,
    pub base_path: bool,
    pub variant: Variant,
    pub train: TrainConfig,
}

impl RunSpec {
    /// Table I protocol for one (N, ρ1, ρ2, variant, seed); the same seed
    /// drives data, initialization and shuffling through separate streams.
    pub fn new(order: usize, rho1: f64, rho2: f64, variant: Variant, seed: u64) -> Self {
        Self {
            ar: ArConfig::new(order, rho1, rho2, 5000, seed),
            target: TargetSpec::default(),
            train_ratio: 0.8,
            hidden_width: 50,
            grid: RbfGrid::default(),
            layernorm: true,
            base_path: true,
            variant,
            train: TrainConfig { seed, ..TrainConfig::default() },
        }
    }

    pub fn kan_config(&self) -> KanConfig {
        KanConfig {
            widths: vec![self.ar.lags(), self.hidden_width, 1],
            grid: self.grid,
            layernorm: self.layernorm,
            base_path: self.base_path,
        }
    }

    pub fn dataset(&self) -> Result<Dataset> {
        let ds = prepare_dataset(&self.ar, &self.target, self.train_ratio)?;
        match self.variant {
            Variant::Kan => Ok(ds),
            Variant::DctKan => dct_dataset(&ds),
        }
    }

    pub fn run(&self) -> Result<RunHistory> {
        let ds = self.dataset()?;
        let net = KanNetwork::init(self.kan_config(), self.train.seed)?;
        let meta = RunMeta {
            variant: self.variant,
            order: self.ar.order,
            rho1: self.ar.rho1,
            seed: self.train.seed,
        };
        train(net, &ds, &self.train, meta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let (mean, var) = mean_var(values);
        Self { mean, sd: var.max(0.0).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variant: Variant,
    pub order: usize,
    pub rho1: f64,
    pub epoch: usize,
    pub runs: usize,
    pub test_mse: MeanSd,
    pub e_low: MeanSd,
    pub e_mid: MeanSd,
    pub e_high: MeanSd,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_HEADER: [&str; 13] = [
    "variant",
    "N",
    "rho1",
    "epoch",
    "runs",
    "test_mse_mean",
    "test_mse_sd",
    "e_low_mean",
    "e_low_sd",
    "e_mid_mean",
    "e_mid_sd",
    "e_high_mean",
    "e_high_sd",
];

impl SweepTable {
    /// Row for the given group and epoch.
    pub fn get(&self, variant: Variant, rho1: f64, epoch: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.variant == variant && r.rho1 == rho1 && r.epoch == epoch)
    }

    /// Last-epoch row of every (variant, ρ1) group.
    pub fn final_rows(&self) -> Vec<&SweepRow> {
        let mut out: Vec<&SweepRow> = Vec::new();
        for row in &self.rows {
            match out.last_mut() {
                Some(last) if last.variant == row.variant && last.rho1 == row.rho1 => *last = row,
                _ => out.push(row),
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SWEEP_HEADER)?;
        for r in &self.rows {
            let mut rec = vec![
                r.variant.to_string(),
                r.order.to_string(),
                r.rho1.to_string(),
                r.epoch.to_string(),
                r.runs.to_string(),
            ];
            for m in [r.test_mse, r.e_low, r.e_mid, r.e_high] {
                rec.push(m.mean.to_string());
                rec.push(m.sd.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per (variant, ρ1, epoch) mean and population sd over seeds.
pub fn aggregate_runs(histories: &[RunHistory]) -> Result<SweepTable> {
    let Some(first) = histories.first() else {
        return Ok(SweepTable::default());
    };
    let order = first.meta.order;
    let epochs = first.records.len();
    // ρ1 keyed by bit pattern so grouping is exact
    let mut groups: BTreeMap<(Variant, i64), Vec<&RunHistory>> = BTreeMap::new();
    for h in histories {
        if h.meta.order != order || h.records.len() != epochs {
            return Err(invalid(format!(
                "mixed configurations: N={} with {} epochs vs N={order} with {epochs} epochs",
                h.meta.order,
                h.records.len()
            )));
        }
        if !h.meta.rho1.is_finite() {
            return Err(invalid("non-finite rho1"));
        }
        groups.entry((h.meta.variant, ordered_key(h.meta.rho1))).or_default().push(h);
    }
    let mut rows = Vec::with_capacity(groups.len() * epochs);
    for ((variant, _), runs) in groups {
        let mut seeds = BTreeSet::new();
        for h in &runs {
            if !seeds.insert(h.meta.seed) {
                return Err(invalid(format!(
                    "seed {} repeated for {variant} at rho1={}",
                    h.meta.seed, h.meta.rho1
                )));
            }
        }
        for e in 0..epochs {
            let pick = |f: fn(&EpochRecord) -> f64| -> Vec<f64> { runs.iter().map(|h| f(&h.records[e])).collect() };
            rows.push(SweepRow {
                variant,
                order,
                rho1: runs[0].meta.rho1,
                epoch: runs[0].records[e].epoch,
                runs: runs.len(),
                test_mse: MeanSd::of(&pick(|r| r.test_mse)),
                e_low: MeanSd::of(&pick(|r| r.e_low)),
                e_mid: MeanSd::of(&pick(|r| r.e_mid)),
                e_high: MeanSd::of(&pick(|r| r.e_high)),
            });
        }
    }
    Ok(SweepTable { rows })
}

/// Monotone integer key for a finite float.
fn ordered_key(x: f64) -> i64 {
    let bits = (x + 0.0).to_bits() as i64;
    if bits < 0 {
        bits ^ i64::MAX
    } else {
        bits
    }
}
