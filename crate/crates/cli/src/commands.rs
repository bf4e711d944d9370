use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use serde::{Deserialize, Serialize};

use respoles::dispersion::SystemParams;
use respoles::evolution::{
    expansion_reconstruct, fit_decay_rate, hermite_rule, relative_l2, simulate_dde, InitialData,
    QuadratureRule, TimeGrid, TimeSeries,
};
use respoles::fmt_f64;
use respoles::poles::{default_region, find_poles, ContourBox, PoleSearch, SearchOptions};
use respoles::stability::{critical_coupling, linspace, stability_map};

use crate::args::{Command, Format, RunConfig};

/// Branch range behind the default region of `compare` and `expansion`.
const DEFAULT_BRANCHES: (i32, i32) = (-3, 3);

/// One row of the pole table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleRow {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub residue_re: f64,
    pub residue_im: f64,
    pub seed_branch: Option<i32>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolesOutput {
    pub params: SystemParams,
    pub region: ContourBox,
    pub region_count: i64,
    pub poles: Vec<PoleRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KcOutput {
    pub tau: f64,
    pub omega0: f64,
    pub k_c: f64,
}

/// Summary of a `compare` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub fitted_rate: f64,
    pub leading_pole_re: Option<f64>,
    pub relative_gap: Option<f64>,
    pub l2_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOutput {
    pub params: SystemParams,
    pub window: (f64, f64),
    pub summary: CompareSummary,
    pub simulated: TimeSeries,
    pub reconstructed: TimeSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesOutput {
    pub params: SystemParams,
    pub series: TimeSeries,
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn params_header(cfg: &RunConfig) -> String {
    let p = &cfg.params;
    format!(
        "# params: k={} (from {}), tau={}, omega0={}, h={}",
        fmt_f64(p.k),
        cfg.k_input,
        fmt_f64(p.tau),
        fmt_f64(p.omega0),
        fmt_f64(p.h)
    )
}

fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .context("building the worker pool")?;
    pool.install(|| match cfg.command {
        Command::Poles => poles(cfg),
        Command::Kc => kc(cfg),
        Command::StabilityMap => stability(cfg),
        Command::Simulate => simulate(cfg),
        Command::Compare => compare(cfg),
        Command::Expansion => expansion(cfg),
    })
}

fn search(cfg: &RunConfig, fallback: (i32, i32)) -> Result<PoleSearch> {
    let p = &cfg.params;
    let branches = cfg.branches.unwrap_or(fallback);
    let region = cfg
        .region
        .unwrap_or_else(|| default_region(p, branches.0..=branches.1));
    let opts = SearchOptions {
        branches: cfg.branches.map(|(lo, hi)| lo..=hi),
        ..SearchOptions::default()
    };
    info!("searching {region:?}");
    let s = find_poles(p, &region, &opts)?;
    info!("{} poles, region count {}", s.poles.len(), s.region_count);
    Ok(s)
}

pub fn pole_rows(s: &PoleSearch) -> Vec<PoleRow> {
    s.poles
        .iter()
        .map(|q| PoleRow {
            lambda_re: q.lambda.re,
            lambda_im: q.lambda.im,
            residue_re: q.residue.re,
            residue_im: q.residue.im,
            seed_branch: q.seed_branch,
            residual: q.final_residual,
        })
        .collect()
}

fn poles(cfg: &RunConfig) -> Result<()> {
    let s = search(cfg, DEFAULT_BRANCHES)?;
    let rows = pole_rows(&s);
    let mut w = open_output(cfg.out.as_deref())?;
    match cfg.format {
        Format::Csv => {
            writeln!(w, "{}", params_header(cfg))?;
            writeln!(
                w,
                "lambda_re,lambda_im,residue_re,residue_im,seed_branch,residual"
            )?;
            for r in &rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    fmt_f64(r.lambda_re),
                    fmt_f64(r.lambda_im),
                    fmt_f64(r.residue_re),
                    fmt_f64(r.residue_im),
                    r.seed_branch.map(|b| b.to_string()).unwrap_or_default(),
                    fmt_f64(r.residual)
                )?;
            }
        }
        Format::Json => write_json(
            &mut *w,
            &PolesOutput {
                params: cfg.params,
                region: s.region,
                region_count: s.region_count,
                poles: rows,
            },
        )?,
    }
    w.flush()?;
    Ok(())
}

fn kc(cfg: &RunConfig) -> Result<()> {
    let p = &cfg.params;
    let k_c = critical_coupling(p.tau, p.omega0)?;
    let mut w = open_output(cfg.out.as_deref())?;
    match cfg.format {
        Format::Csv => writeln!(w, "{k_c}")?,
        Format::Json => write_json(
            &mut *w,
            &KcOutput {
                tau: p.tau,
                omega0: p.omega0,
                k_c,
            },
        )?,
    }
    w.flush()?;
    Ok(())
}

fn stability(cfg: &RunConfig) -> Result<()> {
    let taus = linspace(cfg.tau_grid.0, cfg.tau_grid.1, cfg.tau_grid.2);
    let ks = linspace(cfg.k_grid.0, cfg.k_grid.1, cfg.k_grid.2);
    let map = stability_map(&taus, &ks, cfg.params.omega0, cfg.mode)?;
    let mut w = open_output(cfg.out.as_deref())?;
    match cfg.format {
        Format::Csv => {
            writeln!(w, "# omega0={}, mode={:?}", fmt_f64(map.omega0), map.mode)?;
            map.write_csv(&mut w)?;
        }
        Format::Json => write_json(&mut *w, &map)?,
    }
    w.flush()?;
    Ok(())
}

struct Discretization {
    rule: QuadratureRule,
    init: InitialData,
    dt: f64,
    t_end: f64,
}

/// Builds the frequency rule and step size; `default_t` maps the recurrence
/// time to the end time used when `--T` is absent.
fn discretize(cfg: &RunConfig, default_t: impl Fn(f64) -> f64) -> Result<Discretization> {
    let p = &cfg.params;
    let rule = hermite_rule(cfg.nodes, p)?;
    let m = cfg.dt_divisor;
    let dt = p.tau / m as f64;
    let t_rec = rule.recurrence_time();
    let t_end = cfg.t_end.unwrap_or_else(|| default_t(t_rec));
    info!(
        "N = {}, dt = {dt}, T = {t_end}, T_rec = {t_rec}",
        rule.len()
    );
    Ok(Discretization {
        rule,
        init: InitialData::constant(m),
        dt,
        t_end,
    })
}

fn write_series(cfg: &RunConfig, series: &TimeSeries) -> Result<()> {
    let mut w = open_output(cfg.out.as_deref())?;
    match cfg.format {
        Format::Csv => {
            writeln!(w, "{}", params_header(cfg))?;
            series.write_csv(&mut w)?;
        }
        Format::Json => write_json(
            &mut *w,
            &SeriesOutput {
                params: cfg.params,
                series: series.clone(),
            },
        )?,
    }
    w.flush()?;
    Ok(())
}

fn simulate(cfg: &RunConfig) -> Result<()> {
    let d = discretize(cfg, |t_rec| (0.8 * t_rec).min(40.0))?;
    let series = simulate_dde(&cfg.params, &d.rule, &d.init, d.dt, d.t_end)?;
    write_series(cfg, &series)
}

fn expansion(cfg: &RunConfig) -> Result<()> {
    let d = discretize(cfg, |t_rec| (0.8 * t_rec).min(40.0))?;
    let s = search(cfg, DEFAULT_BRANCHES)?;
    let kept = &s.poles[..cfg.modes.min(s.poles.len())];
    let grid = TimeGrid {
        t0: 0.0,
        dt: d.dt,
        len: (d.t_end / d.dt + 1e-9).floor() as usize + 1,
    };
    let series = expansion_reconstruct(kept, &d.init, &cfg.params, grid)?;
    write_series(cfg, &series)
}

/// `<stem>.summary.json` next to the output file.
fn summary_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.json"))
}

fn compare(cfg: &RunConfig) -> Result<()> {
    let p = &cfg.params;
    let d = discretize(cfg, |t_rec| 0.8 * t_rec)?;
    let sim = simulate_dde(p, &d.rule, &d.init, d.dt, d.t_end)?;
    let s = search(cfg, DEFAULT_BRANCHES)?;
    let kept = &s.poles[..cfg.modes.min(s.poles.len())];
    let rec = expansion_reconstruct(kept, &d.init, p, sim.grid())?;
    let window = (cfg.window_start.unwrap_or(2.0 * p.tau), d.t_end);
    let (fitted_rate, r2) = fit_decay_rate(&sim, window)?;
    info!("fit r^2 = {r2}");
    let leading = s.poles.first().map(|q| q.lambda.re);
    let summary = CompareSummary {
        fitted_rate,
        leading_pole_re: leading,
        relative_gap: leading.map(|l| (fitted_rate - l).abs() / l.abs()),
        l2_mismatch: relative_l2(&sim, &rec, window)?,
    };

    match cfg.format {
        Format::Json => {
            let mut w = open_output(cfg.out.as_deref())?;
            write_json(
                &mut *w,
                &CompareOutput {
                    params: *p,
                    window,
                    summary,
                    simulated: sim,
                    reconstructed: rec,
                },
            )?;
            w.flush()?;
        }
        Format::Csv => {
            let mut w = open_output(cfg.out.as_deref())?;
            writeln!(w, "{}", params_header(cfg))?;
            writeln!(w, "t,sim_re,sim_im,sim_abs,rec_re,rec_im,rec_abs")?;
            for (i, (a, b)) in sim.values.iter().zip(&rec.values).enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    fmt_f64(sim.time(i)),
                    fmt_f64(a.re),
                    fmt_f64(a.im),
                    fmt_f64(a.norm()),
                    fmt_f64(b.re),
                    fmt_f64(b.im),
                    fmt_f64(b.norm())
                )?;
            }
            w.flush()?;
            let text = serde_json::to_string_pretty(&summary)?;
            match &cfg.out {
                Some(out) => {
                    let path = summary_path(out);
                    std::fs::write(&path, format!("{text}\n"))
                        .with_context(|| format!("writing {}", path.display()))?;
                    println!("{text}");
                }
                None => eprintln!("{text}"),
            }
        }
    }
    Ok(())
}
