//! Command-line front end: configuration precedence, subcommand dispatch and
//! plain-text output.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coefficients::{
    axial_scan, cache_file_name, BlochProvider, BlochSolver, CoefficientCache, CoefficientField,
};
use crate::config::{Resolved, RunConfig};
use crate::ensemble::{run_ensemble, sample_initial, EnsembleResult};
use crate::error::{Error, Result};
use crate::fields::Fields;
use crate::hilbert::{build_operators, liouvillian_at, steady_state};
use crate::sde::{simulate, WellSpec};
use crate::validation::{format_matrix, run_suite, SuiteOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cavity-fort", version, about = "Cavity cooling and trapping of an atom in a Laguerre-Gauss FORT")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; they override the configuration file.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// case-a, case-b, case-b-lg012 or case-b-intense.
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    /// Write output files here instead of standard output.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Solve every Bloch point directly instead of using an interpolation table.
    #[arg(long, global = true)]
    pub no_cache: bool,
    /// Omit the generation-time header line.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Print the fully resolved configuration and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
    /// Integration step [us].
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Censoring horizon [us].
    #[arg(long, global = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub n_g: Option<usize>,
    #[arg(long, global = true)]
    pub n_s: Option<usize>,
    /// Interpolation stencil width, 4 or 6.
    #[arg(long, global = true)]
    pub stencil: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct ScanArgs {
    /// Radial distance [um] or "max" for the FORT intensity maximum.
    #[arg(long, default_value = "max")]
    pub rho: String,
    #[arg(long, default_value_t = 600)]
    pub points: usize,
    /// Scan start [um]; 0 by default.
    #[arg(long)]
    pub x_start: Option<f64>,
    /// Scan end [um]; 2.5 FORT wavelengths by default.
    #[arg(long)]
    pub x_end: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady state and correlation integrals at one (g, S).
    Steady {
        /// Coupling [rad/us].
        #[arg(long, allow_hyphen_values = true)]
        g: f64,
        /// Stark shift [rad/us].
        #[arg(long)]
        s: f64,
    },
    /// Force, friction and diffusion along the cavity axis.
    Coeffs(ScanArgs),
    /// Dressed-state detunings along the cavity axis.
    Dressed(ScanArgs),
    /// One trajectory as a time series.
    Simulate {
        /// Initial azimuth [rad]; drawn uniformly when absent.
        #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["tangential", "orthogonal"])]
        theta: Option<f64>,
        /// Start with the velocity tangential to the ring (azimuth 0).
        #[arg(long, conflicts_with = "orthogonal")]
        tangential: bool,
        /// Start with the velocity along the radius (azimuth pi/2).
        #[arg(long)]
        orthogonal: bool,
        /// Record every `stride` steps.
        #[arg(long)]
        stride: Option<usize>,
        /// Switch off all noise terms.
        #[arg(long)]
        noiseless: bool,
        /// Stream index of the trajectory within the master seed.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Monte Carlo ensemble with trapping-time statistics.
    Ensemble {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Deterministic invariant suite across all modules.
    Validate {
        /// Random (g, S) points per scenario.
        #[arg(long)]
        points: Option<usize>,
        /// Skip the time-domain correlation oracle.
        #[arg(long)]
        no_oracle: bool,
    },
}

/// Number format used in every table and report.
pub fn num(x: f64) -> String {
    // +0 and −0 print alike
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.8e}")
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| num(*v)).collect::<Vec<_>>().join(",")
}

/// Write `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

struct Output<'a> {
    run: &'a Resolved,
    command: &'static str,
}

impl Output<'_> {
    fn header(&self, extra: &str) -> String {
        let mut h = String::new();
        h.push_str(&format!("# cavity-fort {} {}\n", env!("CARGO_PKG_VERSION"), self.command));
        h.push_str(&format!(
            "# scenario={} params={:016x}{}\n",
            self.run.scenario,
            self.run.params.digest(),
            extra
        ));
        if self.run.io.timestamp {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            h.push_str(&format!("# generated_unix={secs}\n"));
        }
        h
    }

    fn emit(&self, name: &str, body: &str, extra: &str) -> Result<()> {
        let text = format!("{}{}", self.header(extra), body);
        match &self.run.io.output_dir {
            Some(dir) => write_atomic(&dir.join(name), &text),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())?;
                out.flush()?;
                Ok(())
            }
        }
    }
}

fn apply_flags(cfg: &mut RunConfig, c: &CommonArgs) {
    if let Some(s) = &c.scenario {
        cfg.physics.scenario = s.clone();
    }
    if let Some(d) = &c.output_dir {
        cfg.io.output_dir = Some(d.clone());
    }
    if let Some(d) = &c.cache_dir {
        cfg.io.cache_dir = d.clone();
    }
    if c.no_cache {
        cfg.io.cache = false;
    }
    if c.no_timestamp {
        cfg.io.timestamp = false;
    }
    if let Some(v) = c.dt {
        cfg.sde.dt = v;
    }
    if let Some(v) = c.t_max {
        cfg.sde.t_max = Some(v);
    }
    if let Some(v) = c.seed {
        cfg.ensemble.seed = v;
    }
    if let Some(v) = c.n_g {
        cfg.grid.n_g = Some(v);
    }
    if let Some(v) = c.n_s {
        cfg.grid.n_s = Some(v);
    }
    if let Some(v) = c.stencil {
        cfg.grid.stencil = Some(v);
    }
}

fn apply_command(cfg: &mut RunConfig, cmd: &Command) {
    match cmd {
        Command::Simulate { theta, tangential, orthogonal, stride, noiseless, .. } => {
            if let Some(t) = theta {
                cfg.ensemble.theta = Some(*t);
            } else if *tangential {
                cfg.ensemble.theta = Some(0.0);
            } else if *orthogonal {
                cfg.ensemble.theta = Some(std::f64::consts::FRAC_PI_2);
            }
            if let Some(s) = stride {
                cfg.sde.stride = *s;
            }
            if *noiseless {
                cfg.sde.dipole_noise = false;
                cfg.sde.spontaneous_noise = false;
            }
        }
        Command::Ensemble { n: Some(n) } => cfg.ensemble.n = *n,
        _ => {}
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_flags(&mut cfg, &cli.common);
    apply_command(&mut cfg, &cli.command);
    Ok(cfg)
}

fn provider(run: &Resolved) -> Result<Box<dyn BlochProvider>> {
    let solver = BlochSolver::new(&run.params)?;
    if !run.io.cache {
        return Ok(Box::new(solver));
    }
    let dir = &run.io.cache_dir;
    std::fs::create_dir_all(dir)?;
    let path = dir.join(cache_file_name(&run.params, run.grid));
    Ok(Box::new(CoefficientCache::load_or_build(&solver, run.grid, &path)?))
}

fn scan_range(run: &Resolved, a: &ScanArgs) -> Result<(f64, f64, f64)> {
    let rho = if a.rho == "max" {
        run.params.rho_max()
    } else {
        a.rho
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("--rho must be a number or 'max', not '{}'", a.rho)))?
    };
    if a.points < 2 {
        return Err(Error::Config("--points must be at least 2".into()));
    }
    Ok((
        rho,
        a.x_start.unwrap_or(0.0),
        a.x_end.unwrap_or(2.5 * run.params.lambda_s),
    ))
}

fn cmd_steady(run: &Resolved, g: f64, s: f64) -> Result<()> {
    let solver = BlochSolver::new(&run.params)?;
    let b = solver.bloch_point(g, s)?;
    let ops = build_operators(run.params.n_max)?;
    let eta = steady_state(&liouvillian_at(&ops, &run.params, g, s)?)?;
    let photons = eta.expect(&ops.photon_number).re;
    let mut body = String::new();
    let mut kv = |k: &str, v: f64| body.push_str(&format!("{k} = {}\n", num(v)));
    kv("g", g);
    kv("s", s);
    kv("photon_number", photons);
    kv("empty_cavity_photon_number", run.params.empty_cavity_photons());
    for (name, v) in crate::coefficients::BLOCH_NAMES.iter().zip(b.to_array()) {
        kv(name, v);
    }
    Output { run, command: "steady" }.emit("steady.txt", &body, "")
}

fn cmd_coeffs(run: &Resolved, a: &ScanArgs) -> Result<()> {
    let (rho, x0, x1) = scan_range(run, a)?;
    let field = CoefficientField::new(&run.params, provider(run)?);
    let scan = axial_scan(&field, rho, x0, x1, a.points)?;
    let mut body = String::from(
        "x_um,x_over_lambda_s,g,s,exp_ee,force_x_per_mass,gamma_xx,d_xx_per_mass2,d_spont_x_per_mass2\n",
    );
    for (x, c) in scan {
        body.push_str(&join(&[
            x,
            x / run.params.lambda_s,
            c.g,
            c.s,
            c.exp_ee,
            c.phi[0],
            c.gamma_xx,
            c.d_xx,
            c.d_spont[0],
        ]));
        body.push('\n');
    }
    Output { run, command: "coeffs" }.emit("coeffs.csv", &body, &format!(" rho_um={}", num(rho)))
}

fn cmd_dressed(run: &Resolved, a: &ScanArgs) -> Result<()> {
    let (rho, x0, x1) = scan_range(run, a)?;
    let f = Fields::new(&run.params);
    let mut body = String::from("x_um,x_over_lambda_s,g,s,delta_plus,delta_minus\n");
    for i in 0..a.points {
        let x = x0 + (x1 - x0) * i as f64 / (a.points - 1) as f64;
        let r = [x, 0.0, rho];
        let (dp, dm) = f.dressed_detunings(&r);
        body.push_str(&join(&[
            x,
            x / run.params.lambda_s,
            f.coupling(&r).0,
            f.stark_shift(&r).0,
            dp,
            dm,
        ]));
        body.push('\n');
    }
    Output { run, command: "dressed" }.emit("dressed.csv", &body, &format!(" rho_um={}", num(rho)))
}

fn cmd_simulate(run: &Resolved, index: u64) -> Result<()> {
    let field = CoefficientField::new(&run.params, provider(run)?);
    let well = WellSpec::new(&run.params, run.ensemble.well)?;
    let mut rng = ChaCha8Rng::seed_from_u64(run.ensemble.master_seed);
    rng.set_stream(index);
    let initial = sample_initial(&run.ensemble.initial, &mut rng);
    let traj = simulate(&field, initial, &well, &run.sde, &mut rng)?;
    let mut body = String::from("t,x,y,z,vx,vy,vz,rho\n");
    for s in &traj.samples {
        body.push_str(&join(&[s.t, s.r[0], s.r[1], s.r[2], s.v[0], s.v[1], s.v[2], s.rho()]));
        body.push('\n');
    }
    body.push_str(&format!(
        "# escape_time_us={} escape_kind={} vx_rms={}\n",
        num(traj.escape_time),
        traj.escape_kind.name(),
        num(traj.diagnostics.vx_rms())
    ));
    let extra = format!(" seed={} index={index} dt={}", run.ensemble.master_seed, num(run.sde.dt));
    Output { run, command: "simulate" }.emit("trajectory.csv", &body, &extra)
}

/// Structured report of an ensemble run.
pub fn ensemble_report(res: &EnsembleResult) -> String {
    let mut s = String::new();
    let opt = |v: Option<f64>| v.map_or("nan".to_string(), num);
    let fit = res.survival.as_ref();
    s.push_str(&format!("n = {}\n", res.records.len()));
    s.push_str(&format!("blow_ups = {}\n", res.blow_ups.len()));
    s.push_str(&format!(
        "subset = {}\n",
        match res.subset {
            crate::params::SurvivalSubset::Trapped => "trapped",
            crate::params::SurvivalSubset::All => "all",
        }
    ));
    s.push_str(&format!("subset_n = {}\n", res.subset_indices().len()));
    s.push_str(&format!("censored_n = {}\n", fit.map_or(0, |f| f.censored)));
    s.push_str(&format!("trapped_fraction = {}\n", num(res.trapped_fraction())));
    s.push_str(&format!("tau_mle_ms = {}\n", opt(fit.map(|f| f.tau_mle / 1000.0))));
    s.push_str(&format!(
        "tau_lsq_ms = {}\n",
        opt(fit.and_then(|f| f.tau_lsq).map(|t| t / 1000.0))
    ));
    s.push_str(&format!("sigma_ms = {}\n", opt(fit.map(|f| f.sigma / 1000.0))));
    let mean_v = |idx: &[usize]| {
        (!idx.is_empty()).then(|| {
            idx.iter().map(|&i| res.records[i].vx_rms).sum::<f64>() / idx.len() as f64
        })
    };
    s.push_str(&format!(
        "vx_rms_trapped_cm_s = {}\n",
        opt(mean_v(&res.partition.trapped).map(|v| v * 100.0))
    ));
    s.push_str(&format!(
        "vx_rms_untrapped_cm_s = {}\n",
        opt(mean_v(&res.partition.untrapped).map(|v| v * 100.0))
    ));
    s.push_str(&format!("median_delta_g = {}\n", opt(res.median_coupling_variation())));
    for n in &res.notices {
        s.push_str(&format!("# notice: {n}\n"));
    }
    s
}

/// Per-trajectory summary table.
pub fn ensemble_table(res: &EnsembleResult) -> String {
    let mut s = String::from("index,seed,t_ms,vx_rms_cm_s,escape_kind,theta0\n");
    for r in &res.records {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.index,
            r.master_seed,
            num(r.escape_time / 1000.0),
            num(r.vx_rms * 100.0),
            r.escape_kind.name(),
            num(r.theta0)
        ));
    }
    s
}

/// Kaplan-Meier curve of the fitted subset.
pub fn survival_table(res: &EnsembleResult) -> String {
    let mut s = String::from("t_ms,p\n");
    if let Some(fit) = &res.survival {
        for pt in &fit.curve {
            s.push_str(&format!("{},{}\n", num(pt.t / 1000.0), num(pt.p)));
        }
    }
    s
}

fn cmd_ensemble(run: &Resolved) -> Result<()> {
    let field = CoefficientField::new(&run.params, provider(run)?);
    let res = run_ensemble(&field, &run.ensemble)?;
    let extra = format!(
        " seed={} n={} dt={} t_max_us={}",
        run.ensemble.master_seed,
        run.ensemble.n,
        num(run.sde.dt),
        num(run.sde.t_max)
    );
    let out = Output { run, command: "ensemble" };
    out.emit("trajectories.csv", &ensemble_table(&res), &extra)?;
    out.emit("survival.csv", &survival_table(&res), &extra)?;
    out.emit("report.txt", &ensemble_report(&res), &extra)
}

fn cmd_validate(run: &Resolved, points: Option<usize>, no_oracle: bool) -> Result<bool> {
    let mut opts = SuiteOptions {
        cache_dir: run.io.cache.then(|| run.io.cache_dir.clone()),
        ..SuiteOptions::default()
    };
    if let Some(p) = points {
        opts.points = p;
    }
    if no_oracle {
        opts.oracle_points = 0;
    }
    let results = run_suite(&opts);
    let ok = results.iter().all(|r| r.pass);
    Output { run, command: "validate" }.emit("validate.txt", &format_matrix(&results), "")?;
    Ok(ok)
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = build_config(cli)?;
    if cli.common.dump_config {
        let text = cfg.explicit()?.to_toml()?;
        match &cfg.io.output_dir {
            Some(dir) => write_atomic(&dir.join("config.toml"), &text)?,
            None => print!("{text}"),
        }
        return Ok(EXIT_OK);
    }
    let run = cfg.resolve()?;
    match &cli.command {
        Command::Steady { g, s } => cmd_steady(&run, *g, *s)?,
        Command::Coeffs(a) => cmd_coeffs(&run, a)?,
        Command::Dressed(a) => cmd_dressed(&run, a)?,
        Command::Simulate { index, .. } => cmd_simulate(&run, *index)?,
        Command::Ensemble { .. } => cmd_ensemble(&run)?,
        Command::Validate { points, no_oracle } => {
            if !cmd_validate(&run, *points, *no_oracle)? {
                return Ok(EXIT_DOMAIN);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parse `args` and run; returns the process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DOMAIN
        }
    }
}
