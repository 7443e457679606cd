//! Subcommand bodies. Each returns whether its verification checks passed;
//! commands without checks always pass.

use std::sync::atomic::{AtomicUsize, Ordering};

use acbias::datagen::prepare_dataset;
use acbias::dct::dct_dataset;
use acbias::numerics::Matrix;
use acbias::theory::bounds::write_condition_csv;
use acbias::theory::decay::{write_decay_csv, ModeDecayReport};
use acbias::theory::residual::write_residual_csv;
use acbias::theory::{
    ar1_correlation, basis_moments, condition_sweep, leading_order_hessian, mode_decay_sim, residual_study, Density,
    SplineBasisSpec,
};
use acbias::trainer::{aggregate_runs, RunHistory, RunSpec, SweepTable, Variant};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::config::{ArEntry, Config};
use crate::error::CliError;
use crate::manifest::Outputs;
use crate::svg::LineChart;

/// Mode-decay tolerance on the relative rate error.
pub const DECAY_TOLERANCE: f64 = 0.05;

fn execute(specs: &[RunSpec], pool: &ThreadPool) -> Result<Vec<RunHistory>, CliError> {
    let done = AtomicUsize::new(0);
    let total = specs.len();
    let results: Vec<acbias::Result<RunHistory>> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let h = spec.run();
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Ok(h) = &h {
                    eprintln!(
                        "[{k}/{total}] N={} {} rho1={} seed={} final test MSE {:.6}",
                        h.meta.order,
                        h.meta.variant,
                        h.meta.rho1,
                        h.meta.seed,
                        h.final_record().test_mse
                    );
                }
                h
            })
            .collect()
    });
    Ok(results.into_iter().collect::<acbias::Result<Vec<_>>>()?)
}

fn run_file(h: &RunHistory) -> String {
    format!("runs/N{}/{}_rho{}_seed{}.csv", h.meta.order, h.meta.variant, h.meta.rho1, h.meta.seed)
}

fn write_runs(out: &mut Outputs, runs: &[RunHistory]) -> Result<(), CliError> {
    for h in runs {
        out.write_with(&run_file(h), |buf| h.write_csv(buf))?;
    }
    Ok(())
}

fn experiment_runs(cfg: &Config, entry: &ArEntry, pool: &ThreadPool) -> Result<Vec<RunHistory>, CliError> {
    execute(&cfg.experiment.runs_for(entry)?, pool)
}

pub fn epoch_dynamics(cfg: &Config, out: &mut Outputs, pool: &ThreadPool) -> Result<bool, CliError> {
    cfg.experiment.validate()?;
    let entry = cfg.experiment.order_one()?.clone();
    let runs = experiment_runs(cfg, &entry, pool)?;
    write_runs(out, &runs)?;
    let table = aggregate_runs(&runs)?;
    out.write_with("epoch_dynamics.csv", |buf| table.write_csv(buf))?;

    for variant in cfg.experiment.variants()? {
        let mut mse = LineChart::new(format!("{variant}: mean test MSE (N=1)"), "epoch", "test MSE").log_y();
        for &rho in &cfg.experiment.rho_grid {
            let rows: Vec<_> = table.rows.iter().filter(|r| r.variant == variant && r.rho1 == rho).collect();
            mse.add(format!("rho1={rho}"), rows.iter().map(|r| (r.epoch as f64, r.test_mse.mean)).collect());
            let mut comp =
                LineChart::new(format!("{variant}: component errors, rho1={rho} (N=1)"), "epoch", "E_q").log_y();
            comp.add("E_low", rows.iter().map(|r| (r.epoch as f64, r.e_low.mean)).collect());
            comp.add("E_mid", rows.iter().map(|r| (r.epoch as f64, r.e_mid.mean)).collect());
            comp.add("E_high", rows.iter().map(|r| (r.epoch as f64, r.e_high.mean)).collect());
            out.write(&format!("plots/epoch_components_{variant}_rho{rho}.svg"), comp.render().as_bytes())?;
        }
        out.write(&format!("plots/epoch_mse_{variant}.svg"), mse.render().as_bytes())?;
    }
    Ok(true)
}

/// Wide table: one row per ρ1, `<variant>_<metric>_{mean,sd}` columns.
fn wide_table(table: &SweepTable, variants: &[Variant], metrics: &[&str]) -> Result<Vec<u8>, CliError> {
    let finals = table.final_rows();
    let mut rhos: Vec<f64> = finals.iter().map(|r| r.rho1).collect();
    rhos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rhos.dedup();
    let mut header = vec!["rho1".to_string()];
    for v in variants {
        for m in metrics {
            header.push(format!("{v}_{m}_mean"));
            header.push(format!("{v}_{m}_sd"));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(acbias::Error::from)?;
    for &rho in &rhos {
        let mut rec = vec![rho.to_string()];
        for &v in variants {
            let row = finals.iter().find(|r| r.variant == v && r.rho1 == rho);
            for m in metrics {
                let stat = row.map(|r| match *m {
                    "test_mse" => r.test_mse,
                    "e_low" => r.e_low,
                    "e_mid" => r.e_mid,
                    _ => r.e_high,
                });
                rec.push(stat.map(|s| s.mean.to_string()).unwrap_or_default());
                rec.push(stat.map(|s| s.sd.to_string()).unwrap_or_default());
            }
        }
        w.write_record(&rec).map_err(acbias::Error::from)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

pub fn rho_sweep(cfg: &Config, out: &mut Outputs, pool: &ThreadPool) -> Result<bool, CliError> {
    cfg.experiment.validate()?;
    let variants = cfg.experiment.variants()?;
    let components = ["e_low", "e_mid", "e_high"];
    for entry in &cfg.experiment.ar_configs {
        let n = entry.order;
        let runs = experiment_runs(cfg, entry, pool)?;
        write_runs(out, &runs)?;
        let table = aggregate_runs(&runs)?;
        let finals = SweepTable { rows: table.final_rows().into_iter().cloned().collect() };
        out.write_with(&format!("sweep_N{n}.csv"), |buf| finals.write_csv(buf))?;
        out.write(&format!("mse_N{n}.csv"), &wide_table(&table, &variants, &["test_mse"])?)?;
        out.write(&format!("components_N{n}.csv"), &wide_table(&table, &variants, &components)?)?;

        let mut mse = LineChart::new(format!("final test MSE vs rho1 (N={n})"), "rho1", "test MSE").log_y();
        let mut comp = LineChart::new(format!("final component errors vs rho1 (N={n})"), "rho1", "E_q").log_y();
        for &v in &variants {
            let rows: Vec<_> = finals.rows.iter().filter(|r| r.variant == v).collect();
            mse.add(v.to_string(), rows.iter().map(|r| (r.rho1, r.test_mse.mean)).collect());
            comp.add(format!("{v} E_low"), rows.iter().map(|r| (r.rho1, r.e_low.mean)).collect());
            comp.add(format!("{v} E_mid"), rows.iter().map(|r| (r.rho1, r.e_mid.mean)).collect());
            comp.add(format!("{v} E_high"), rows.iter().map(|r| (r.rho1, r.e_high.mean)).collect());
        }
        out.write(&format!("plots/mse_N{n}.svg"), mse.render().as_bytes())?;
        out.write(&format!("plots/components_N{n}.svg"), comp.render().as_bytes())?;
    }
    Ok(true)
}

pub fn theory(cfg: &Config, out: &mut Outputs, pool: &ThreadPool) -> Result<bool, CliError> {
    let t = &cfg.theory;
    t.validate()?;
    let mut jobs = Vec::new();
    for density in t.densities()? {
        for &k in &t.degrees {
            for &g in &t.grids {
                for &p in &t.lags {
                    jobs.push((density, k, g, p));
                }
            }
        }
    }
    let results: Vec<acbias::Result<_>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(density, k, g, p)| {
                let (a, b) = density.default_domain();
                let spec = SplineBasisSpec::new(g, k, a, b)?;
                condition_sweep(&t.rho_grid, p, &spec, density)
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    out.write_with("theory_condition.csv", |buf| write_condition_csv(&rows, buf))?;

    let failures: Vec<String> = rows
        .iter()
        .filter(|r| !r.report.pass())
        .map(|r| {
            format!(
                "rho={} p={} G={} k={} density={}: {}",
                r.rho,
                r.report.p,
                r.grid,
                r.degree,
                r.density,
                r.report.failures().join("; ")
            )
        })
        .collect();
    let mut summary = format!("{} rows checked, {} failed\n", rows.len(), failures.len());
    for f in &failures {
        summary.push_str(f);
        summary.push('\n');
    }
    out.write("theory_summary.txt", summary.as_bytes())?;

    for &(density, k, g, _) in jobs.iter().filter(|j| j.3 == t.lags[0]) {
        let mut chart = LineChart::new(format!("kappa vs rho ({density}, G={g}, k={k})"), "rho", "kappa").log_y();
        for &p in &t.lags {
            let pts = rows
                .iter()
                .filter(|r| r.density == density && r.degree == k && r.grid == g && r.report.p == p)
                .map(|r| (r.rho, r.report.kappa.value))
                .collect();
            chart.add(format!("p={p}"), pts);
        }
        out.write(&format!("plots/kappa_{density}_G{g}_k{k}.svg"), chart.render().as_bytes())?;
    }
    eprint!("{summary}");
    Ok(failures.is_empty())
}

pub fn residual(cfg: &Config, out: &mut Outputs, pool: &ThreadPool) -> Result<bool, CliError> {
    let r = &cfg.residual;
    r.validate()?;
    let spec = r.spec()?;
    let mut jobs = Vec::new();
    for &rho in &r.rho_grid {
        for &n in &r.samples {
            jobs.push((rho, n));
        }
    }
    let rows: Vec<acbias::Result<_>> =
        pool.install(|| jobs.par_iter().map(|&(rho, n)| residual_study(rho, r.lags, n, &spec, r.seed)).collect());
    let rows = rows.into_iter().collect::<acbias::Result<Vec<_>>>()?;
    out.write_with("residual.csv", |buf| write_residual_csv(&rows, buf))?;
    for row in &rows {
        eprintln!(
            "rho={} samples={} rel_res={:.4} max_eig_dev={:.3e} weyl={}",
            row.rho, row.samples, row.report.rel_res, row.report.max_eig_dev, row.report.weyl_ok
        );
        if let Some(w) = &row.warning {
            eprintln!("warning (rho={}, samples={}): {w}", row.rho, row.samples);
        }
    }
    Ok(rows.iter().all(|row| row.report.weyl_ok))
}

pub fn mode_decay(cfg: &Config, out: &mut Outputs) -> Result<bool, CliError> {
    let d = &cfg.mode_decay;
    d.validate()?;
    let spec = SplineBasisSpec::new(d.grid, d.degree, -1.0, 1.0)?;
    let bundle = basis_moments(&spec, Density::Uniform)?;
    let mut reports: Vec<(String, ModeDecayReport)> = Vec::new();
    let mut ok = true;
    for &rho in &d.rho_grid {
        let h = leading_order_hessian(&bundle, &ar1_correlation(rho, d.lags)?)?;
        let rep = mode_decay_sim(&h.m, d.eta_fraction / h.lambda_max(), d.steps, d.seed)?;
        ok &= rep.degenerate_count + 1 == d.lags && rep.max_rel_error() < DECAY_TOLERANCE;
        eprintln!(
            "rho={rho}: {} modes, {} degenerate, max relative rate error {:.2e}",
            rep.modes.len(),
            rep.degenerate_count,
            rep.max_rel_error()
        );
        reports.push((format!("rho={rho}"), rep));
    }
    let diag = mode_decay_sim(&Matrix::diagonal(&[1.0, 10.0]), 0.05, d.steps.min(500), d.seed)?;
    ok &= diag.max_rel_error() < DECAY_TOLERANCE;
    reports.push(("diag(1,10)".into(), diag));
    out.write_with("mode_decay.csv", |buf| write_decay_csv(&reports, buf))?;
    Ok(ok)
}

pub fn gen(cfg: &Config, out: &mut Outputs) -> Result<bool, CliError> {
    cfg.experiment.validate()?;
    let variants = cfg.experiment.variants()?;
    for entry in &cfg.experiment.ar_configs {
        for &rho in &cfg.experiment.rho_grid {
            for seed in 0..cfg.gen.seeds {
                let spec = cfg.experiment.run_spec(entry, rho, Variant::Kan, seed);
                let ds = prepare_dataset(&spec.ar, &spec.target, spec.train_ratio)?;
                let stem = format!("datasets/N{}_rho{rho}_seed{seed}", entry.order);
                for &v in &variants {
                    let data = match v {
                        Variant::Kan => ds.clone(),
                        Variant::DctKan => dct_dataset(&ds)?,
                    };
                    out.write_with(&format!("{stem}_{v}.csv"), |buf| data.write_csv(buf))?;
                }
            }
        }
    }
    Ok(true)
}
