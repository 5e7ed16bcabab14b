//! The four subcommands. Each writes its files and `report.json` into the
//! output directory and returns the report; the caller exits with
//! `report.exit_code`.

use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hypiss_core::control::{self, ControlError, FeasibilityMap, Plant, SynthesisOptions};
use hypiss_core::pde::{self, IssBoundParams, PdeError, SimConfig, Trajectory};
use hypiss_core::{DiagMatrix, Matrix, SymMatrix};
use rayon::prelude::*;
use serde_json::json;

use crate::certificate::{margins_with_prefix, CertificateFile, Margin};
use crate::config::{self, ConfigError, ExperimentConfig};
use crate::output::{header, number, optional, OutputDir};
use crate::report::RunReport;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_FAILED: u8 = 2;

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Pde(#[from] PdeError),
}

#[derive(Debug, Clone)]
pub struct CommonArgs {
    pub config: PathBuf,
    /// Overrides `output.directory`.
    pub out: Option<PathBuf>,
}

/// Where `simulate` takes its gain from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GainSource {
    Zero,
    Auto,
    File(PathBuf),
}

impl std::str::FromStr for GainSource {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "zero" => GainSource::Zero,
            "auto" => GainSource::Auto,
            path => GainSource::File(PathBuf::from(path)),
        })
    }
}

struct Run {
    config: ExperimentConfig,
    plant: Plant,
    opts: SynthesisOptions,
    out: OutputDir,
    report: RunReport,
    started: Instant,
}

impl Run {
    fn start(command: &str, args: &CommonArgs) -> Result<Run, CliError> {
        let started = Instant::now();
        let loaded = config::load(&args.config)?;
        let config = loaded.config;
        let plant = config.plant.to_plant()?;
        let opts = config.design.synthesis_options()?;
        let root = args.out.clone().unwrap_or_else(|| config.output.directory.clone());
        let out = OutputDir::create(&root).map_err(|source| CliError::Io { path: root, source })?;
        Ok(Run { config, plant, opts, out, report: RunReport::new(command, &loaded.digest), started })
    }

    fn io(&self, name: &str) -> impl FnOnce(io::Error) -> CliError {
        let path = self.out.path(name);
        move |source| CliError::Io { path, source }
    }

    fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let err = self.io(name);
        self.out.write_json(name, value).map_err(err)
    }

    fn write_csv(&mut self, name: &str, cols: &[String], rows: Vec<Vec<String>>) -> Result<(), CliError> {
        let err = self.io(name);
        self.out.write_csv(name, cols, rows).map_err(err)
    }

    fn finish(mut self, status: &str, exit_code: u8, summary: String) -> Result<RunReport, CliError> {
        self.report.status = status.to_string();
        self.report.exit_code = exit_code;
        self.report.summary = summary;
        self.report.files = self.out.manifest().to_vec();
        self.report.elapsed_seconds = self.started.elapsed().as_secs_f64();
        let err = self.io(REPORT_FILE);
        self.out.write_json_untracked(REPORT_FILE, &self.report).map_err(err)?;
        Ok(self.report)
    }

    fn scalar_design(&self) -> Result<(f64, f64), ConfigError> {
        Ok((self.config.design.mu.scalar("design.mu")?, self.config.design.alpha.scalar("design.alpha")?))
    }
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Well-posedness constants as a report value plus their four slacks.
fn wellposedness(plant: &Plant, k: &Matrix, delta: f64) -> Result<(serde_json::Value, Vec<Margin>), ControlError> {
    let wp = control::wellposedness_certificate(plant, k, delta)?;
    let chk = wp.check(plant, k)?;
    let margins = [
        ("tau", chk.tau_slack),
        ("mu", chk.mu_slack),
        ("rho_half_mu", chk.rho_half_mu_slack),
        ("rho_contraction", chk.rho_contraction_slack),
    ]
    .into_iter()
    .map(|(l, v)| Margin { label: format!("wellposedness.{l}"), value: v })
    .collect();
    let value = json!({
        "tau": wp.tau,
        "mu_wp": wp.mu_wp,
        "rho": wp.rho,
        "log_bound": wp.log_bound,
        "contraction": wp.contraction,
        "delta": wp.delta,
        "holds": chk.holds(),
    });
    Ok((value, margins))
}

/// Labels of the synthesis constraints, in problem order.
fn synthesis_labels(plant: &Plant, mu: f64, alpha: f64, eps: f64) -> Result<Vec<String>, ControlError> {
    let (problem, _) = control::build_synthesis_lmis(plant, mu, alpha, eps)?;
    Ok(problem.constraints().iter().map(|c| c.label.clone()).collect())
}

fn infeasible_margins(labels: Vec<String>, values: &[f64]) -> Vec<Margin> {
    labels.into_iter().zip(values).map(|(l, &v)| Margin { label: format!("synthesis.{l}"), value: v }).collect()
}

/// Solves the synthesis LMIs at the configured scalar `(μ, α)`.
pub fn synth(args: &CommonArgs) -> Result<RunReport, CliError> {
    let mut run = Run::start("synth", args)?;
    let (mu, alpha) = run.scalar_design()?;
    run.report.detail("mu", mu);
    run.report.detail("alpha", alpha);
    match control::synthesize(&run.plant, mu, alpha, &run.opts) {
        Ok(cert) => {
            let file = CertificateFile::from(&cert);
            if run.config.output.certificate {
                run.write_json("certificate.json", &file)?;
            }
            let (wp, wp_margins) = wellposedness(&run.plant, &cert.k, run.config.design.delta)?;
            run.report.margins = margins_with_prefix("synthesis", &cert.margins);
            run.report.margins.extend(wp_margins);
            run.report.detail("wellposedness", wp);
            run.report.certificate = Some(file);
            let summary = format!("feasible: c = {:.6}, gamma = {:.6}, omega = {}, kappa = {:.6}", cert.c, cert.gamma, cert.omega, cert.kappa);
            run.finish("feasible", EXIT_OK, summary)
        }
        Err(ControlError::Infeasible { phase1_slack, margins }) => {
            let labels = synthesis_labels(&run.plant, mu, alpha, run.opts.epsilon)?;
            run.report.margins = infeasible_margins(labels, &margins);
            run.report.detail("phase1_slack", phase1_slack);
            let summary = format!("infeasible at mu = {mu}, alpha = {alpha} (phase-1 slack {phase1_slack:.3e})");
            run.finish("infeasible", EXIT_FAILED, summary)
        }
        Err(e) => Err(e.into()),
    }
}

/// Grid status column: every successful cell is `feasible`.
fn cell_status(c: &control::GridCell) -> String {
    if c.status.is_success() {
        "feasible".to_string()
    } else {
        c.status.to_string()
    }
}

/// Solves every `(μ, α)` cell of the configured grids in parallel.
pub fn grid(args: &CommonArgs) -> Result<RunReport, CliError> {
    let mut run = Run::start("grid", args)?;
    let mus = run.config.design.mu.values("design.mu")?;
    let alphas = run.config.design.alpha.values("design.alpha")?;
    let pairs: Vec<(f64, f64)> = mus.iter().flat_map(|&m| alphas.iter().map(move |&a| (m, a))).collect();
    let (plant, opts) = (&run.plant, &run.opts);
    let results: Vec<_> = pairs.par_iter().map(|&(mu, alpha)| control::solve_cell(plant, mu, alpha, opts)).collect();
    let map = FeasibilityMap::from_cells(mus, alphas, results)?;

    let rows = map
        .cells
        .iter()
        .map(|c| vec![number(c.mu), number(c.alpha), cell_status(c), optional(c.c), optional(c.gamma)])
        .collect();
    run.write_csv("grid.csv", &header(&["mu", "alpha", "status", "c", "gamma"]), rows)?;
    run.report.detail("cells", map.cells.len());
    run.report.detail("feasible_cells", map.feasible_count());
    let failures: Vec<_> = map
        .cells
        .iter()
        .filter_map(|c| c.error.as_ref().map(|e| json!({"mu": c.mu, "alpha": c.alpha, "error": e})))
        .collect();
    if !failures.is_empty() {
        run.report.detail("failed_cells", failures);
    }
    match &map.best {
        Some(best) => {
            let file = CertificateFile::from(best);
            if run.config.output.certificate {
                run.write_json("best_certificate.json", &file)?;
            }
            run.report.detail("best", json!({"mu": best.mu, "alpha": best.alpha, "c": best.c, "gamma": best.gamma}));
            run.report.margins = margins_with_prefix("synthesis", &best.margins);
            run.report.certificate = Some(file);
            let summary = format!(
                "{} of {} cells feasible; best mu = {}, alpha = {}, gamma = {:.6}",
                map.feasible_count(),
                map.cells.len(),
                best.mu,
                best.alpha,
                best.gamma
            );
            run.finish("feasible", EXIT_OK, summary)
        }
        None => {
            let summary = format!("0 of {} cells feasible", map.cells.len());
            run.finish("infeasible", EXIT_FAILED, summary)
        }
    }
}

/// Lyapunov data attached to a gain.
struct Weight {
    p: DiagMatrix,
    mu: f64,
    alpha: f64,
}

fn run_sim(plant: &Plant, k: &Matrix, cfg: &SimConfig) -> Result<Trajectory, PdeError> {
    pde::simulate(plant, k, cfg)
}

/// Simulates the closed loop and, unless the gain is zero, the open loop.
pub fn simulate(args: &CommonArgs, gain: &GainSource) -> Result<RunReport, CliError> {
    let mut run = Run::start("simulate", args)?;
    let sim = run.config.simulation.clone().ok_or_else(|| ConfigError::at("simulation", "required by simulate"))?;
    let mut cfg = sim.to_sim_config(&run.plant, run.config.output.snapshots)?;
    let zero = Matrix::zeros(run.plant.inputs(), run.plant.states());

    let (k, weight) = match gain {
        GainSource::Zero => (zero.clone(), None),
        GainSource::Auto => {
            let (mu, alpha) = run.scalar_design()?;
            match control::synthesize(&run.plant, mu, alpha, &run.opts) {
                Ok(cert) => {
                    let file = CertificateFile::from(&cert);
                    if run.config.output.certificate {
                        run.write_json("certificate.json", &file)?;
                    }
                    run.report.margins = margins_with_prefix("synthesis", &cert.margins);
                    run.report.certificate = Some(file);
                    (cert.k.clone(), Some(Weight { p: cert.p(), mu, alpha }))
                }
                Err(ControlError::Infeasible { phase1_slack, margins }) => {
                    let labels = synthesis_labels(&run.plant, mu, alpha, run.opts.epsilon)?;
                    run.report.margins = infeasible_margins(labels, &margins);
                    run.report.detail("phase1_slack", phase1_slack);
                    return run.finish("infeasible", EXIT_FAILED, "no gain: synthesis infeasible".to_string());
                }
                Err(e) => return Err(e.into()),
            }
        }
        GainSource::File(path) => {
            let file = CertificateFile::load(path)?;
            let r = file.resolve(&run.plant, run.scalar_design().ok())?;
            run.report.certificate = Some(file);
            let p = r.p();
            (r.k, Some(Weight { p, mu: r.mu, alpha: r.alpha }))
        }
    };
    run.report.detail(
        "gain",
        match gain {
            GainSource::Zero => "zero".to_string(),
            GainSource::Auto => "auto".to_string(),
            GainSource::File(p) => p.display().to_string(),
        },
    );
    run.report.detail("k", matrix_rows(&k));
    cfg.lyapunov = weight.as_ref().map(|w| (w.p.clone(), w.mu));

    let want_open = *gain != GainSource::Zero && run.config.output.open_loop;
    let open_cfg = SimConfig { lyapunov: None, record_snapshots: false, ..cfg.clone() };
    let plant = &run.plant;
    let (closed, open) = rayon::join(|| run_sim(plant, &k, &cfg), || want_open.then(|| run_sim(plant, &zero, &open_cfg)));
    let closed = match closed {
        Ok(t) => t,
        Err(PdeError::BlowUp { time }) => {
            run.report.detail("blow_up_time", time);
            return run.finish("blow_up", EXIT_ERROR, format!("state became non-finite at t = {time}"));
        }
        Err(e) => return Err(e.into()),
    };
    let open = match open.transpose() {
        Ok(t) => t,
        Err(PdeError::BlowUp { time }) => {
            run.report.detail("open_loop_blow_up_time", time);
            None
        }
        Err(e) => return Err(e.into()),
    };

    let iss = match &weight {
        Some(w) => Some(IssBoundParams::from_lyapunov(&w.p, w.mu, w.alpha, run.config.design.chi, closed.l2_norms[0])?),
        None => None,
    };
    let rhs: Option<Vec<f64>> =
        iss.map(|p| closed.times.iter().zip(&closed.disturbance_energy).map(|(&t, &e)| pde::iss_rhs(t, &p, e)).collect());

    if run.config.output.norms {
        let rows = (0..closed.len())
            .map(|i| {
                vec![
                    number(closed.times[i]),
                    number(closed.l2_norms[i]),
                    optional(rhs.as_ref().map(|r| r[i])),
                    optional(closed.lyapunov_values.as_ref().map(|v| v[i])),
                ]
            })
            .collect();
        run.write_csv("norms.csv", &header(&["t", "l2_norm", "iss_rhs", "lyapunov"]), rows)?;
    }
    if run.config.output.controls {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=run.plant.inputs()).map(|i| format!("u{i}")));
        let rows = closed
            .times
            .iter()
            .zip(&closed.control_traces)
            .map(|(&t, u)| std::iter::once(number(t)).chain(u.iter().map(|&v| number(v))).collect())
            .collect();
        run.write_csv("controls.csv", &cols, rows)?;
    }
    if let Some(snaps) = &closed.snapshots {
        let mut cols = header(&["t", "z"]);
        cols.extend((1..=run.plant.states()).map(|i| format!("x{i}")));
        let mut rows = Vec::new();
        for (&t, field) in closed.times.iter().zip(snaps) {
            let g = field.grid();
            for j in 0..g.cells() {
                rows.push(
                    [number(t), number(g.center(j))].into_iter().chain(field.cell(j).iter().map(|&v| number(v))).collect(),
                );
            }
        }
        run.write_csv("snapshots.csv", &cols, rows)?;
    }
    if let Some(open) = &open {
        let rows = open.times.iter().zip(&open.l2_norms).map(|(&t, &n)| vec![number(t), number(n)]).collect();
        run.write_csv("open_loop_norms.csv", &header(&["t", "l2_norm"]), rows)?;
        run.report.detail("open_loop_final_l2_norm", open.l2_norms.last().copied());
    }

    let final_norm = *closed.l2_norms.last().expect("trajectory has its initial sample");
    run.report.detail("dt", closed.dt);
    run.report.detail("steps", closed.steps);
    run.report.detail("samples", closed.len());
    run.report.detail("final_l2_norm", final_norm);
    let max_control = closed.control_traces.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    run.report.detail("max_abs_control", max_control);
    let mut summary = format!("final l2 norm {final_norm:.6}");
    if let Some(open) = &open {
        summary.push_str(&format!(" (open loop {:.6})", open.l2_norms.last().unwrap()));
    }
    if let Some(rhs) = &rhs {
        let violations = closed.l2_norms.iter().zip(rhs).filter(|(n, r)| n > r).count();
        let min_slack = closed.l2_norms.iter().zip(rhs).map(|(n, r)| r - n).fold(f64::INFINITY, f64::min);
        run.report.detail("iss_violations", violations);
        run.report.detail("iss_min_slack", min_slack);
        summary.push_str(&format!(", dissipation bound violated at {violations} samples"));
    }
    run.finish("completed", EXIT_OK, summary)
}

/// Recomputes every margin of a certificate against the configured plant.
pub fn verify(args: &CommonArgs, certificate: &Path, tolerance: f64) -> Result<RunReport, CliError> {
    let mut run = Run::start("verify", args)?;
    if !tolerance.is_finite() {
        return Err(ConfigError::at("--tolerance", "must be finite").into());
    }
    let file = CertificateFile::load(certificate)?;
    let r = file.resolve(&run.plant, run.scalar_design().ok())?;
    let chi = run.config.design.chi;

    let syn = control::check_synthesis_point(&run.plant, r.mu, r.alpha, &r.q, &r.w(), &r.gamma_hat, r.s.as_ref(), &run.opts)?;
    let p = r.p();
    let gamma = SymMatrix::from_matrix(&p.mul_matrix(&r.gamma_hat.to_matrix()).mul_diag(&p));
    // The analysis LMIs are a congruence transform of the synthesis ones:
    // strictness carries over, a uniform ε slack does not.
    let strict = SynthesisOptions { epsilon: 0.0, ..run.opts.clone() };
    let ana = control::verify_analysis(&run.plant, &r.k, &p, &gamma, r.mu, chi, r.alpha, &strict)?;
    let (wp, wp_margins) = wellposedness(&run.plant, &r.k, run.config.design.delta)?;
    let iss = control::iss_coefficients(&p, r.mu, r.alpha, chi)?;

    let mut margins = margins_with_prefix("synthesis", &syn.margins);
    margins.extend(margins_with_prefix("analysis", &ana.margins));
    margins.extend(wp_margins);
    let worst = margins.iter().cloned().reduce(|a, b| if b.value < a.value { b } else { a }).expect("margins");
    let pass = margins.iter().all(|m| m.value >= tolerance);

    run.report.detail("mu", r.mu);
    run.report.detail("alpha", r.alpha);
    run.report.detail("tolerance", tolerance);
    run.report.detail("s", syn.s.entries());
    run.report.detail("t", ana.certificate.t.entries());
    run.report.detail("iss", json!({"omega": iss.omega, "kappa": iss.kappa, "gamma": iss.gamma}));
    run.report.detail("wellposedness", wp);
    run.report.detail("worst_margin", json!({"label": worst.label, "value": worst.value}));
    run.report.margins = margins;
    run.report.certificate = Some(file);
    let summary = format!("worst margin {} = {:.6e} (tolerance {tolerance})", worst.label, worst.value);
    if pass {
        run.finish("verified", EXIT_OK, summary)
    } else {
        run.finish("failed", EXIT_FAILED, summary)
    }
}

/// Bundled reproduction configs, by file name.
pub const SEED_CONFIGS: &[(&str, &str)] = &[
    ("reference.json", include_str!("../configs/reference.json")),
    ("reference_grid.json", include_str!("../configs/reference_grid.json")),
    ("reference_certificate.json", include_str!("../configs/reference_certificate.json")),
];

/// Writes the bundled configs into `dir`, refusing to overwrite.
pub fn seed_configs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    for (name, text) in SEED_CONFIGS {
        let path = dir.join(name);
        let mut f = std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|source| CliError::Io { path: path.clone(), source })?;
        io::Write::write_all(&mut f, text.as_bytes()).map_err(|source| CliError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}
