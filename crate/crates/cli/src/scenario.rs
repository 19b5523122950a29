//! Scenario runners. Each writes its data files plus summary.json and
//! returns the one-line summary printed on stdout.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use framesim::analysis::{linspace, wigner, write_wigner_csv};
use framesim::fockops::Matrix;
use framesim::io::{config_hash, fmt_f64, write_table, CsvHeader, VERSION};
use framesim::models::angular;
use framesim::protocol::{
    displaced_jc_series, run_benchmark, run_driven_jc_experiment, run_forced_jc_experiment, run_variant, sweep, threads_from_env,
    write_observations_csv, write_sweep_csv, DisplacedJcSpec, BENCHMARK_COLUMNS,
};
use framesim::theory;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Benchmark,
    DisplacedJc,
    DrivenJc,
    ForcedJc,
    Transfer,
    Sweep,
    Oracle,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Benchmark => "benchmark",
            Scenario::DisplacedJc => "displaced-jc",
            Scenario::DrivenJc => "driven-jc",
            Scenario::ForcedJc => "forced-jc",
            Scenario::Transfer => "transfer",
            Scenario::Sweep => "sweep",
            Scenario::Oracle => "oracle",
        }
    }
}

pub const ORACLE_COLUMNS: [&str; 6] = ["n_over_ncrit", "chi_over_chi0", "j_over_j0", "cumulative_xi", "cumulative_ratio", "transfer_amplitude"];
pub const TRADEOFF_COLUMNS: [&str; 3] = ["n_crit", "ringup_ratio", "transfer_ratio"];
pub const FORCED_COLUMNS: [&str; 3] = ["t_ns", "squeeze_ratio", "theory_ratio"];
pub const DEFORMATION_COLUMNS: [&str; 9] =
    ["init", "t_ns", "delta_phi", "delta_n", "fidelity", "squeeze_r", "squeeze_ratio", "re_frame", "im_frame"];

/// Output directory plus the header shared by every file in it.
pub struct Output {
    dir: PathBuf,
    hash: String,
    header: CsvHeader,
}

#[derive(Serialize)]
struct Summary<'a, R: Serialize> {
    scenario: &'a str,
    version: &'a str,
    config_hash: &'a str,
    config: &'a RunConfig,
    results: R,
}

impl Output {
    pub fn new(dir: &Path, cfg: &RunConfig) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        let hash = config_hash(&cfg.canonical());
        Ok(Self { dir: dir.to_path_buf(), header: CsvHeader::new(hash.clone()), hash })
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn table(&self, name: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let mut f = self.file(name)?;
        write_table(&mut f, &self.header, columns, rows)?;
        f.flush()?;
        Ok(())
    }

    fn wigner(&self, name: &str, rho: &Matrix, cfg: &RunConfig) -> Result<(), CliError> {
        let grid = linspace(-cfg.wigner.extent, cfg.wigner.extent, cfg.wigner.points);
        let w = wigner(rho, &grid, &grid)?;
        let mut f = self.file(name)?;
        write_wigner_csv(&mut f, &self.header, &grid, &grid, &w)?;
        f.flush()?;
        Ok(())
    }

    fn summary<R: Serialize>(&self, scenario: Scenario, cfg: &RunConfig, results: R) -> Result<(), CliError> {
        let s = Summary { scenario: scenario.name(), version: VERSION, config_hash: &self.hash, config: cfg, results };
        let mut f = self.file("summary.json")?;
        serde_json::to_writer_pretty(&mut f, &s).map_err(framesim::SimError::from)?;
        writeln!(f)?;
        f.flush()?;
        Ok(())
    }
}

pub fn run(scenario: Scenario, cfg: &RunConfig, out: &Output) -> Result<String, CliError> {
    match scenario {
        Scenario::Oracle => oracle(cfg, out),
        Scenario::Benchmark => benchmark(cfg, out),
        Scenario::Transfer => transfer(cfg, out),
        Scenario::Sweep => sweep_grid(cfg, out),
        Scenario::DisplacedJc => displaced_jc(cfg, out),
        Scenario::DrivenJc => driven_jc(cfg, out),
        Scenario::ForcedJc => forced_jc(cfg, out),
    }
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.log10(), hi.log10(), n).into_iter().map(|x| 10f64.powf(x)).collect()
}

fn oracle(cfg: &RunConfig, out: &Output) -> Result<String, CliError> {
    let p = &cfg.model;
    let s = p.scales();
    let o = &cfg.oracle;
    let e_c = angular(o.e_c_hz);
    let delta_c = p.delta_c(p.omega_cav() - p.omega_m());
    let j0 = theory::j_peak(s.chi0);
    let rows: Vec<Vec<f64>> = logspace(o.n_min, o.n_max, o.points)
        .into_iter()
        .map(|u| {
            let n = u * s.n_crit;
            let xi = theory::cumulative_squeeze(n, s.n_crit, s.chi0, e_c);
            vec![
                u,
                theory::chi_of_n(n, s.chi0, s.n_crit) / s.chi0,
                theory::j_of_n(n, s.chi0, s.n_crit) / j0,
                xi,
                (4.0 * xi).exp(),
                theory::transfer_squeeze_amplitude(n, s.n_crit, s.chi0, delta_c),
            ]
        })
        .collect();
    out.table("oracle.csv", &ORACLE_COLUMNS, &rows)?;
    let trade: Vec<Vec<f64>> = logspace(1.0, 1e4, o.tradeoff_points)
        .into_iter()
        .map(|nc| {
            let t = theory::tradeoff(nc, s.chi0, e_c, delta_c, o.tradeoff_n_cav);
            vec![t.n_crit, t.ringup_ratio, t.transfer_ratio]
        })
        .collect();
    out.table("tradeoff.csv", &TRADEOFF_COLUMNS, &trade)?;
    out.summary(Scenario::Oracle, cfg, json!({ "chi0_rad_s": s.chi0, "n_crit": s.n_crit, "j_peak_rad_s": j0, "rows": rows.len() }))?;
    Ok(format!("oracle: {} curve points, {} trade-off points (n_crit = {:.1})", rows.len(), trade.len(), s.n_crit))
}

fn benchmark(cfg: &RunConfig, out: &Output) -> Result<String, CliError> {
    let b = &cfg.benchmark;
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &e in &b.e_c_hz {
        eprintln!("benchmark: E/2pi = {e:.3e} Hz");
        let u = theory::truncation_error_u(b.n_cav_dim as f64, angular(e) * cfg.stepper.tau);
        match run_benchmark(e, b.duration_s, b.n_cav_dim, &cfg.stepper) {
            Ok(pt) => {
                rows.push(vec![e, pt.tau * 1e9, b.n_cav_dim as f64, pt.u, pt.r_eps, pt.r_disp]);
                points.push(json!({ "e_c_hz": e, "u": pt.u, "r_eps": pt.r_eps, "r_disp": pt.r_disp, "error": null }));
            }
            Err(err) if err.is_numerical() => {
                eprintln!("benchmark: E/2pi = {e:.3e} Hz stopped: {err}");
                rows.push(vec![e, cfg.stepper.tau * 1e9, b.n_cav_dim as f64, u, f64::NAN, f64::NAN]);
                points.push(json!({ "e_c_hz": e, "u": u, "r_eps": null, "r_disp": null, "error": err.to_string() }));
            }
            Err(err) => return Err(err.into()),
        }
    }
    out.table("benchmark.csv", &BENCHMARK_COLUMNS, &rows)?;
    out.summary(Scenario::Benchmark, cfg, json!({ "points": points }))?;
    let stopped = rows.iter().filter(|r| r[4].is_nan()).count();
    Ok(format!("benchmark: {} drive amplitudes, {stopped} stopped by guards", rows.len()))
}

fn transfer(cfg: &RunConfig, out: &Output) -> Result<String, CliError> {
    let pc = cfg.protocol()?;
    eprintln!("transfer: {} from {}, {} ring-up intervals", pc.variant.label(), pc.init, (pc.ringup.t_r_s / pc.stepper.tau).round());
    let (outcome, report) = run_variant(pc.variant, &pc)?;
    let r = &outcome.result;
    let mut f = out.file("trajectory.csv")?;
    r.trajectory.write_csv(&mut f, &out.header)?;
    f.flush()?;
    let mut f = out.file("observables.csv")?;
    write_observations_csv(&mut f, &out.header, &r.observations)?;
    f.flush()?;
    out.wigner("wigner_mech.csv", &r.mech_state, cfg)?;
    out.wigner("wigner_cavity_switch.csv", &r.cavity_at_switch, cfg)?;
    let results = json!({
        "init": r.init,
        "variant": r.variant,
        "mech_fidelity": r.mech_fidelity,
        "mech_delta_phi": r.mech_delta_phi,
        "ringup_intervals": r.ringup_intervals,
        "switch": r.switch,
        "stats": r.stats,
        "variant_report": report,
        "reference_mech_fidelity": outcome.reference.as_ref().map(|x| x.mech_fidelity),
    });
    out.summary(Scenario::Transfer, cfg, results)?;
    Ok(format!("transfer {}: mech_fidelity = {:.6}", r.init, r.mech_fidelity))
}

fn sweep_grid(cfg: &RunConfig, out: &Output) -> Result<String, CliError> {
    let base = cfg.protocol()?;
    let n = cfg.sweep.points(&base).len();
    eprintln!("sweep: {n} points");
    let rows = sweep(&base, &cfg.sweep, threads_from_env())?;
    let mut f = out.file("sweep.csv")?;
    write_sweep_csv(&mut f, &out.header, &rows)?;
    f.flush()?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    out.summary(Scenario::Sweep, cfg, json!({ "rows": rows }))?;
    Ok(format!("sweep: {} points, {failed} failed", rows.len()))
}

fn displaced_jc(cfg: &RunConfig, out: &Output) -> Result<String, CliError> {
    let d = &cfg.displaced_jc;
    let spec = DisplacedJcSpec {
        variant: d.variant,
        n_cav: d.n_cav,
        duration_s: d.duration_s,
        samples: d.samples,
        n_cav_dim: d.n_cav_dim,
        compensate: d.compensate,
    };
    eprintln!("displaced-jc: n = {:.3e}, {} inputs", d.n_cav, d.inits.len());
    let runs = displaced_jc_series(&cfg.model, &spec, &d.inits, &cfg.stepper).map_err(CliError::from_config)?;
    let mut f = out.file("deformation.csv")?;
    out.header.write(&mut f)?;
    writeln!(f, "{}", DEFORMATION_COLUMNS.join(","))?;
    for run in &runs {
        for (rep, frame) in run.reports.iter().zip(&run.frames) {
            let (r, ratio) = rep.squeeze.map_or((f64::NAN, f64::NAN), |s| (s.r, s.ratio));
            let nums = [rep.t * 1e9, rep.delta_phi, rep.delta_n, rep.fidelity, r, ratio, frame.re, frame.im];
            writeln!(f, "{},{}", run.init.slug(), nums.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(","))?;
        }
        out.wigner(&format!("wigner_displaced_{}.csv", run.init.slug()), &run.final_cavity, cfg)?;
    }
    f.flush()?;
    let finals: Vec<_> = runs.iter().map(|r| json!({ "init": r.init, "final": r.reports.last() })).collect();
    out.summary(Scenario::DisplacedJc, cfg, json!({ "runs": finals }))?;
    let worst = runs.iter().filter_map(|r| r.reports.last()).map(|r| r.fidelity).fold(1.0, f64::min);
    Ok(format!("displaced-jc: {} inputs, lowest final fidelity {worst:.6}", runs.len()))
}

fn driven_jc(cfg: &RunConfig, out: &Output) -> Result<String, CliError> {
    let d = &cfg.driven_jc;
    eprintln!("driven-jc: E/2pi = {:.3e} Hz to n = {:.3e}", d.e_c_hz, d.n_target);
    let r = run_driven_jc_experiment(&cfg.model, d.init, d.e_c_hz, d.n_target, d.n_cav_dim, d.budget, &cfg.stepper)
        .map_err(CliError::from_config)?;
    out.summary(Scenario::DrivenJc, cfg, &r)?;
    Ok(format!(
        "driven-jc: n = {:.4e} (reached {}), squeeze ratio {:.6} on the adiabatic branch, cumulative estimate {:.6}",
        r.n_reached, r.reached, r.branch_squeeze.ratio, r.theory_ratio
    ))
}

fn forced_jc(cfg: &RunConfig, out: &Output) -> Result<String, CliError> {
    let d = &cfg.forced_jc;
    eprintln!("forced-jc: n = {:.3e} for {:.3e} s", d.n_cav, d.duration_s);
    let r = run_forced_jc_experiment(&cfg.model, d.n_cav, d.duration_s, d.n_cav_dim, d.every, &cfg.stepper).map_err(CliError::from_config)?;
    let rows: Vec<Vec<f64>> = r.t.iter().zip(&r.ratio).zip(&r.theory).map(|((t, a), b)| vec![t * 1e9, *a, *b]).collect();
    out.table("forced_jc.csv", &FORCED_COLUMNS, &rows)?;
    let peak = r.ratio.iter().copied().fold(1.0, f64::max);
    out.summary(Scenario::ForcedJc, cfg, json!({ "n_cav": r.n_cav, "delta_c": r.delta_c, "peak_ratio": peak, "samples": rows.len() }))?;
    Ok(format!("forced-jc: peak squeeze ratio {peak:.6} over {} samples", rows.len()))
}
