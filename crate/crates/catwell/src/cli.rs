//! Command-line surface: parse argv, resolve parameters (flags over config
//! file over built-in defaults), run the requested pipeline, and emit
//! deterministic CSV/JSON through [`crate::emit`].
//!
//! Exit codes: 0 on success, 1 on computational failure (non-convergence,
//! budget, norm drift), 2 on usage or configuration errors. Float tables
//! print in fixed `%.12e` form; JSON uses serde's shortest-round-trip float
//! form with stable key order — either way, identical inputs produce
//! byte-identical outputs. Every emitted file opens with a metadata block
//! echoing the fully resolved parameter set of the run.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::emit::{read_csv, to_json, write_out, Table};
use crate::error::{CatwellError, Result};
use crate::evolve::{
    cat_metrics, ground_wave, propagate_grid, propagate_modal, GridTrajectory, ModalState,
    WaveState, MODAL_MIN_LEVELS,
};
use crate::params::{self, LoadedConfig, ScaledCoords, TWO_PI};
use crate::potential;
use crate::ramp::{self, synthesize_schedule, RampSchedule, ReportMode, REFERENCE_FIT};
use crate::spectrum::{auto_grid, build_hamiltonian, eigenpairs, fit, sweep_lambda, SystemFamily};

/// Fast demonstration point used when neither flags nor a config file pin
/// the dimensionless system: the double well deepens over a numerically
/// comfortable λ range, so every command answers in seconds.
pub const DESK_R: f64 = 1e-2;
pub const DESK_DELTA: f64 = 0.1;
pub const DESK_OMEGA_HZ: f64 = 1.0;

#[derive(Parser, Debug)]
#[command(
    name = "catwell",
    version,
    about = "Double-well optomechanics: spectra, adiabatic ramps, and cat-state feasibility"
)]
pub struct Cli {
    /// Physical-parameter file (`key = value` lines). Flags override file
    /// values; built-in defaults fill the rest.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tabulate the dimensionless potential v(q) at one drive strength.
    Potential(PotentialArgs),
    /// Low-lying spectrum and adiabatic coupling rows at one or many drives.
    Spectrum(SpectrumArgs),
    /// Fit the critical-region gap/coupling power laws over the full sweep.
    FitScaling(FitScalingArgs),
    /// Assemble the feasibility chain at one scaled parameter point.
    Feasibility(FeasibilityArgs),
    /// Synthesize the adiabatic drive schedule lambda(t).
    Ramp(RampArgs),
    /// Propagate a schedule and report cat metrics at every node.
    Evolve(EvolveArgs),
    /// Headline feasibility numbers as a single JSON record.
    ReportPaper(ReportPaperArgs),
}

#[derive(Args, Debug)]
pub struct PotentialArgs {
    /// Drive strength λ = n/n_c.
    #[arg(long)]
    pub lambda: f64,
    /// Coupling ratio r = g/κ.
    #[arg(long)]
    pub r: Option<f64>,
    /// Detuning ratio δ = Δ/κ.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Half-width of the q grid.
    #[arg(long, default_value_t = 12.0)]
    pub q_max: f64,
    /// Number of q samples.
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    /// Output file (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    /// Single drive strength λ = n/n_c.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Sweep start (with --lambda-max and --grid-points).
    #[arg(long)]
    pub lambda_min: Option<f64>,
    /// Sweep end (inclusive).
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Number of sweep samples.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// How many levels to solve for.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Coupling ratio r = g/κ.
    #[arg(long)]
    pub r: Option<f64>,
    /// Detuning ratio δ = Δ/κ.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Output file (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitScalingArgs {
    /// Output file (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FeasibilityArgs {
    /// Mechanical frequency multiplier Ω/(2π·1 Hz).
    #[arg(long)]
    pub omega0: Option<f64>,
    /// Detuning multiplier Δ/(2π·10 kHz).
    #[arg(long)]
    pub delta0: Option<f64>,
    /// Linewidth multiplier κ/(2π·1 MHz).
    #[arg(long)]
    pub kappa0: Option<f64>,
    /// Cavity length multiplier L/(6 cm).
    #[arg(long)]
    pub l0: Option<f64>,
    /// Mirror mass multiplier m/(10 mg).
    #[arg(long)]
    pub m0: Option<f64>,
    /// Optomechanical coupling multiplier (baseline 1).
    #[arg(long)]
    pub g0: Option<f64>,
    /// Photon-number accuracy multiplier a0 (δn/n_c = a0 × 10⁻³).
    #[arg(long)]
    pub a0: Option<f64>,
    /// Refine the gap/coupling extrema from eigendata at this point instead
    /// of using the reference fitted constants.
    #[arg(long)]
    pub live: bool,
    /// Output file (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RampArgs {
    /// Photon-number headroom δn/n_c above critical to ramp to.
    #[arg(long, default_value_t = 2e-3)]
    pub target_dn: f64,
    /// Safety factor on the adiabatic rate bound, in (0, 1].
    #[arg(long, default_value_t = 0.1)]
    pub safety: f64,
    /// Coupling ratio r = g/κ.
    #[arg(long)]
    pub r: Option<f64>,
    /// Detuning ratio δ = Δ/κ.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Mechanical frequency in Hz (cyclic).
    #[arg(long)]
    pub omega_hz: Option<f64>,
    /// Coherence budget in seconds (config file's budget, else unbounded).
    #[arg(long)]
    pub t_coh: Option<f64>,
    /// Output file (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Grid,
    Modal,
    Both,
}

impl Method {
    fn as_str(self) -> &'static str {
        match self {
            Method::Grid => "grid",
            Method::Modal => "modal",
            Method::Both => "both",
        }
    }
}

#[derive(Args, Debug)]
pub struct EvolveArgs {
    /// Schedule CSV produced by `catwell ramp` (columns t_s, lambda).
    #[arg(long, value_name = "FILE")]
    pub schedule: PathBuf,
    /// Propagation route.
    #[arg(long, value_enum, default_value_t = Method::Both)]
    pub method: Method,
    /// Eigenbasis size for the modal route.
    #[arg(long, default_value_t = MODAL_MIN_LEVELS)]
    pub k: usize,
    /// Coupling ratio r = g/κ.
    #[arg(long)]
    pub r: Option<f64>,
    /// Detuning ratio δ = Δ/κ.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Mechanical frequency in Hz (cyclic).
    #[arg(long)]
    pub omega_hz: Option<f64>,
    /// Output file (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportPaperArgs {
    /// Output file (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Parse argv, run, and map the outcome to the exit-code contract.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("catwell: {e}");
            match e {
                CatwellError::Config(_) | CatwellError::NotSecondOrder { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let config = match &cli.config {
        Some(path) => Some(params::load_config(path).map_err(|e| {
            CatwellError::Config(format!("{}: {e}", path.display()))
        })?),
        None => None,
    };
    match cli.command {
        Command::Potential(args) => run_potential(&config, args),
        Command::Spectrum(args) => run_spectrum(&config, args),
        Command::FitScaling(args) => run_fit_scaling(args),
        Command::Feasibility(args) => run_feasibility(&config, args),
        Command::Ramp(args) => run_ramp(&config, args),
        Command::Evolve(args) => run_evolve(&config, args),
        Command::ReportPaper(args) => run_report_paper(args),
    }
}

/// Apply CATWELL_THREADS to the global rayon pool. A pool that is already
/// initialized (repeat in-process dispatch) is left as it is.
fn init_threads() -> Result<()> {
    match std::env::var("CATWELL_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| {
                CatwellError::Config(format!(
                    "CATWELL_THREADS must be a positive integer, got {v:?}"
                ))
            })?;
            usage(n > 0, || "CATWELL_THREADS must be at least 1".into())?;
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

fn usage(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(CatwellError::Config(msg()))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    usage(v.is_finite(), || format!("{name} must be finite, got {v}"))
}

fn positive(name: &str, v: f64) -> Result<()> {
    usage(v.is_finite() && v > 0.0, || {
        format!("{name} must be > 0 and finite, got {v}")
    })
}

/// The resolved dimensionless point: flag > config file > desk default.
struct ResolvedSystem {
    r: f64,
    delta: f64,
    /// Angular mechanical frequency (rad/s).
    omega: f64,
    omega_hz: f64,
}

fn resolve_system(
    config: &Option<LoadedConfig>,
    r: Option<f64>,
    delta: Option<f64>,
    omega_hz: Option<f64>,
) -> Result<ResolvedSystem> {
    let from_cfg = match config {
        Some(c) => {
            let sys = params::to_dimensionless(&c.params, 0.0)?;
            Some((sys.r, sys.delta, c.params.omega / TWO_PI))
        }
        None => None,
    };
    let r = r.or(from_cfg.map(|t| t.0)).unwrap_or(DESK_R);
    let delta = delta.or(from_cfg.map(|t| t.1)).unwrap_or(DESK_DELTA);
    let omega_hz = omega_hz.or(from_cfg.map(|t| t.2)).unwrap_or(DESK_OMEGA_HZ);
    positive("r", r)?;
    finite("delta", delta)?;
    usage(delta >= 0.0, || format!("delta must be >= 0, got {delta}"))?;
    positive("omega-hz", omega_hz)?;
    Ok(ResolvedSystem {
        r,
        delta,
        omega: TWO_PI * omega_hz,
        omega_hz,
    })
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
        .collect()
}

fn run_potential(config: &Option<LoadedConfig>, args: PotentialArgs) -> Result<()> {
    finite("lambda", args.lambda)?;
    usage(args.lambda >= 0.0, || {
        format!("lambda must be >= 0, got {}", args.lambda)
    })?;
    positive("q-max", args.q_max)?;
    usage(args.points >= 2, || "points must be at least 2".into())?;
    let sys = resolve_system(config, args.r, args.delta, None)?;

    let point = crate::params::DimensionlessSystem::new(sys.r, sys.delta, args.lambda, sys.omega);
    let curve = potential::curve(&point, &linspace(-args.q_max, args.q_max, args.points))?;

    let mut table = Table::new(["q", "v"]);
    table
        .meta("command", "potential")
        .meta_f64("lambda", args.lambda)
        .meta_f64("r", sys.r)
        .meta_f64("delta", sys.delta)
        .meta_f64("q_max", args.q_max)
        .meta("points", args.points.to_string());
    for (&q, &v) in curve.q.iter().zip(&curve.v) {
        table.push_row(vec![q, v])?;
    }
    write_out(args.out.as_deref(), &table.to_csv())
}

fn run_spectrum(config: &Option<LoadedConfig>, args: SpectrumArgs) -> Result<()> {
    usage(args.k >= 1 && args.k <= 64, || {
        format!("k must be in 1..=64, got {}", args.k)
    })?;
    let sweep_flags =
        [args.lambda_min.is_some(), args.lambda_max.is_some(), args.grid_points.is_some()];
    let lambdas: Vec<f64> = match (args.lambda, sweep_flags.iter().any(|&f| f)) {
        (Some(l), false) => {
            finite("lambda", l)?;
            usage(l >= 0.0, || format!("lambda must be >= 0, got {l}"))?;
            vec![l]
        }
        (Some(_), true) => {
            return Err(CatwellError::Config(
                "--lambda conflicts with the sweep flags (--lambda-min/--lambda-max/--grid-points)"
                    .into(),
            ))
        }
        (None, _) => {
            let (lo, hi, n) = match (args.lambda_min, args.lambda_max, args.grid_points) {
                (Some(lo), Some(hi), Some(n)) => (lo, hi, n),
                _ => {
                    return Err(CatwellError::Config(
                        "give --lambda, or all of --lambda-min, --lambda-max, --grid-points"
                            .into(),
                    ))
                }
            };
            finite("lambda-min", lo)?;
            finite("lambda-max", hi)?;
            usage(lo >= 0.0 && hi >= lo, || {
                format!("need 0 <= lambda-min <= lambda-max, got [{lo}, {hi}]")
            })?;
            usage(n >= 2, || "grid-points must be at least 2".into())?;
            linspace(lo, hi, n)
        }
    };
    let sys = resolve_system(config, args.r, args.delta, None)?;
    let family = SystemFamily::new(sys.r, sys.delta, sys.omega);

    let coupling_indices: Vec<usize> = crate::spectrum::sweep::SWEEP_COUPLING_INDICES
        .iter()
        .copied()
        .filter(|&i| i < args.k)
        .collect();
    let mut columns = vec!["lambda".to_string()];
    columns.extend((0..args.k).map(|i| format!("e{i}")));
    columns.extend(coupling_indices.iter().map(|i| format!("dcoupling{i}")));

    let mut table = Table::new(columns);
    table
        .meta("command", "spectrum")
        .meta_f64("r", sys.r)
        .meta_f64("delta", sys.delta)
        .meta("k", args.k.to_string())
        .meta("rows", lambdas.len().to_string());

    for (lambda, row) in sweep_lambda(&family, &lambdas, args.k) {
        let row = row.map_err(|e| {
            CatwellError::NonConverged(format!("lambda = {lambda}: {e}"))
        })?;
        let mut fields = Vec::with_capacity(table.columns.len());
        fields.push(lambda);
        fields.extend_from_slice(&row.energies);
        for &i in &coupling_indices {
            let cr = row
                .couplings
                .iter()
                .find(|c| c.i == i)
                .ok_or_else(|| {
                    CatwellError::NonConverged(format!(
                        "lambda = {lambda}: coupling row {i} missing"
                    ))
                })?;
            fields.push(cr.dcoupling);
        }
        table.push_row(fields)?;
    }
    write_out(args.out.as_deref(), &table.to_csv())
}

fn run_fit_scaling(args: FitScalingArgs) -> Result<()> {
    let fit = fit::scaling_fit()?;
    let out = Envelope {
        metadata: meta_map([
            ("command", json!("fit-scaling")),
            ("g_ratios", json!(fit::default_g_ratios())),
            ("d_ratios", json!(fit::default_d_ratios())),
            ("lambda_grid_len", json!(fit::default_lambda_grid().len())),
        ]),
        result: fit,
    };
    write_out(args.out.as_deref(), &to_json(&out)?)
}

fn run_feasibility(config: &Option<LoadedConfig>, args: FeasibilityArgs) -> Result<()> {
    let from_cfg = config
        .as_ref()
        .map(|c| params::scaled_coords(&c.params, c.a0));
    let pick = |flag: Option<f64>, cfg: Option<f64>, default: f64| {
        flag.or(cfg).unwrap_or(default)
    };
    let sc = ScaledCoords {
        omega0: pick(args.omega0, from_cfg.as_ref().map(|s| s.omega0), 1.0),
        delta0: pick(args.delta0, from_cfg.as_ref().map(|s| s.delta0), 1.0),
        kappa0: pick(args.kappa0, from_cfg.as_ref().map(|s| s.kappa0), 1.0),
        l0: pick(args.l0, from_cfg.as_ref().map(|s| s.l0), 1.0),
        m0: pick(args.m0, from_cfg.as_ref().map(|s| s.m0), 1.0),
        g0: pick(args.g0, from_cfg.as_ref().map(|s| s.g0), 1.0),
        a0: pick(args.a0, from_cfg.as_ref().map(|s| s.a0), 2.0),
    };
    for (name, v) in [
        ("omega0", sc.omega0),
        ("delta0", sc.delta0),
        ("kappa0", sc.kappa0),
        ("l0", sc.l0),
        ("m0", sc.m0),
        ("g0", sc.g0),
        ("a0", sc.a0),
    ] {
        positive(name, v)?;
    }
    let mode = if args.live { ReportMode::Live } else { ReportMode::Reference };
    let report = ramp::feasibility_report(&sc, &REFERENCE_FIT, mode)?;
    let out = Envelope {
        metadata: meta_map([
            ("command", json!("feasibility")),
            ("omega0", json!(sc.omega0)),
            ("delta0", json!(sc.delta0)),
            ("kappa0", json!(sc.kappa0)),
            ("l0", json!(sc.l0)),
            ("m0", json!(sc.m0)),
            ("g0", json!(sc.g0)),
            ("a0", json!(sc.a0)),
            ("live", json!(args.live)),
        ]),
        result: report,
    };
    write_out(args.out.as_deref(), &to_json(&out)?)
}

fn run_ramp(config: &Option<LoadedConfig>, args: RampArgs) -> Result<()> {
    positive("target-dn", args.target_dn)?;
    usage(args.safety > 0.0 && args.safety <= 1.0 && args.safety.is_finite(), || {
        format!("safety must be in (0, 1], got {}", args.safety)
    })?;
    let sys = resolve_system(config, args.r, args.delta, args.omega_hz)?;
    let t_coh = match args.t_coh {
        Some(t) => {
            positive("t-coh", t)?;
            t
        }
        None => match config {
            Some(c) => ramp::coherence_time(&c.params),
            None => 1e30,
        },
    };
    let family = SystemFamily::new(sys.r, sys.delta, sys.omega);
    let lambda_target = 1.0 + args.target_dn;
    let sched = synthesize_schedule(&family, lambda_target, args.safety, sys.omega, t_coh)?;

    write_out(args.out.as_deref(), &schedule_csv(&sched, &sys, args.target_dn, t_coh))
}

fn schedule_csv(sched: &RampSchedule, sys: &ResolvedSystem, target_dn: f64, t_coh: f64) -> String {
    let mut table = Table::new(["t_s", "lambda", "rate_bound"]);
    table
        .meta("command", "ramp")
        .meta_f64("r", sys.r)
        .meta_f64("delta", sys.delta)
        .meta_f64("omega_hz", sys.omega_hz)
        .meta_f64("target_dn", target_dn)
        .meta_f64("safety", sched.safety)
        .meta_f64("t_coh_s", t_coh)
        .meta_f64("lambda_start", sched.lambdas[0])
        .meta_f64("lambda_target", *sched.lambdas.last().unwrap())
        .meta_f64("total_time_s", sched.total_time);
    for i in 0..sched.times.len() {
        table
            .push_row(vec![sched.times[i], sched.lambdas[i], sched.rate_bound[i]])
            .expect("schedule columns are fixed");
    }
    table.to_csv()
}

/// Parse a schedule table (as written by `ramp`) back into a RampSchedule.
/// Only `t_s` and `lambda` are required; `rate_bound` and the `safety`
/// metadata are carried along when present.
fn schedule_from_table(table: &Table) -> Result<RampSchedule> {
    let col_t = table
        .column("t_s")
        .ok_or_else(|| CatwellError::Config("schedule CSV lacks a t_s column".into()))?;
    let col_l = table
        .column("lambda")
        .ok_or_else(|| CatwellError::Config("schedule CSV lacks a lambda column".into()))?;
    let col_rb = table.column("rate_bound");
    usage(table.rows.len() >= 2, || {
        "schedule needs at least two nodes".into()
    })?;

    let times: Vec<f64> = table.rows.iter().map(|r| r[col_t]).collect();
    let lambdas: Vec<f64> = table.rows.iter().map(|r| r[col_l]).collect();
    let rate_bound: Vec<f64> = match col_rb {
        Some(c) => table.rows.iter().map(|r| r[c]).collect(),
        None => vec![0.0; times.len()],
    };
    for w in times.windows(2) {
        usage(w[0].is_finite() && w[1].is_finite() && w[1] >= w[0], || {
            "schedule times must be finite and nondecreasing".into()
        })?;
    }
    for &l in &lambdas {
        usage(l.is_finite(), || "schedule lambdas must be finite".into())?;
    }
    let safety = table
        .meta_value("safety")
        .and_then(|v| v.parse::<f64>().ok())
        .unwrap_or(1.0);
    let total_time = times.last().unwrap() - times[0];
    Ok(RampSchedule {
        times,
        lambdas,
        rate_bound,
        safety,
        total_time,
    })
}

/// Instantaneous (fidelity, parity, separation, norm) for one wavefunction,
/// against the two lowest eigenstates at its own λ on its own grid.
fn node_metrics(ws: &WaveState, family: &SystemFamily) -> Result<[f64; 4]> {
    let sys = family.at(ws.lambda);
    let op = build_hamiltonian(&sys, &ws.grid)?;
    let es = eigenpairs(&op, &ws.grid, &sys, 2)?;
    let m = cat_metrics(ws, &es)?;
    Ok([m.fidelity_gs, m.parity_overlap, m.separation, ws.norm()])
}

fn grid_rows(traj: &GridTrajectory, family: &SystemFamily) -> Result<Vec<[f64; 4]>> {
    traj.states.iter().map(|st| node_metrics(st, family)).collect()
}

fn modal_rows(traj: &[ModalState], family: &SystemFamily) -> Result<Vec<[f64; 4]>> {
    traj.iter()
        .map(|node| {
            let n = node.basis.states[0].len();
            let mut psi = vec![Complex64::new(0.0, 0.0); n];
            for (c, state) in node.c.iter().zip(&node.basis.states) {
                for (p, &s) in psi.iter_mut().zip(state) {
                    *p += c * s;
                }
            }
            let ws = WaveState {
                grid: node.basis.grid,
                psi,
                t: node.t,
                lambda: node.lambda,
            };
            node_metrics(&ws, family)
        })
        .collect()
}

fn run_evolve(config: &Option<LoadedConfig>, args: EvolveArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.schedule).map_err(|e| {
        CatwellError::Config(format!("{}: {e}", args.schedule.display()))
    })?;
    let sched_table = read_csv(&text)
        .map_err(|e| CatwellError::Config(format!("{}: {e}", args.schedule.display())))?;
    let sched = schedule_from_table(&sched_table)?;
    if args.method != Method::Grid {
        usage(args.k >= MODAL_MIN_LEVELS, || {
            format!("k must be at least {MODAL_MIN_LEVELS} for the modal route")
        })?;
    }
    let sys = resolve_system(config, args.r, args.delta, args.omega_hz)?;
    let family = SystemFamily::new(sys.r, sys.delta, sys.omega);

    let lambda_hi = sched.lambdas.iter().cloned().fold(f64::NAN, f64::max);
    let want_grid = matches!(args.method, Method::Grid | Method::Both);
    let want_modal = matches!(args.method, Method::Modal | Method::Both);

    let g_rows = if want_grid {
        let grid = auto_grid(&family.at(lambda_hi), 2)?;
        let psi0 = ground_wave(&family.at(sched.lambdas[0]), &grid)?;
        let traj = propagate_grid(&sched, &family, &psi0)?;
        Some(grid_rows(&traj, &family)?)
    } else {
        None
    };
    let m_rows = if want_modal {
        let traj = propagate_modal(&sched, &family, args.k)?;
        Some(modal_rows(&traj, &family)?)
    } else {
        None
    };

    let columns: Vec<String> = match args.method {
        Method::Grid | Method::Modal => {
            ["t_s", "lambda", "fidelity_gs", "parity_overlap", "separation", "norm"]
                .map(String::from)
                .to_vec()
        }
        Method::Both => [
            "t_s",
            "lambda",
            "fidelity_grid",
            "fidelity_modal",
            "parity_grid",
            "parity_modal",
            "separation_grid",
            "separation_modal",
            "norm_grid",
            "norm_modal",
        ]
        .map(String::from)
        .to_vec(),
    };
    let mut table = Table::new(columns);
    table
        .meta("command", "evolve")
        .meta("schedule", args.schedule.display().to_string())
        .meta("method", args.method.as_str())
        .meta("k", args.k.to_string())
        .meta_f64("r", sys.r)
        .meta_f64("delta", sys.delta)
        .meta_f64("omega_hz", sys.omega_hz)
        .meta_f64("safety", sched.safety)
        .meta("nodes", sched.times.len().to_string());

    for i in 0..sched.times.len() {
        let mut row = vec![sched.times[i], sched.lambdas[i]];
        match (&g_rows, &m_rows) {
            (Some(g), None) => row.extend_from_slice(&g[i]),
            (None, Some(m)) => row.extend_from_slice(&m[i]),
            (Some(g), Some(m)) => {
                for j in 0..4 {
                    row.push(g[i][j]);
                    row.push(m[i][j]);
                }
            }
            (None, None) => unreachable!("at least one method is always selected"),
        }
        table.push_row(row)?;
    }
    write_out(args.out.as_deref(), &table.to_csv())
}

/// The headline record: critical photon number at the benchmark point, the
/// feasibility bounds at the scaled worked point, and the fitted exponents.
#[derive(Debug, Serialize)]
pub struct PaperReport {
    pub n_c: f64,
    pub omega0_bound: f64,
    pub gamma_bound_hz: f64,
    pub t_coh_s: f64,
    #[serde(rename = "power_nW")]
    pub power_nw: f64,
    pub x: f64,
    pub y: f64,
}

/// The scaled worked point the headline bounds are quoted at: the benchmark
/// hardware with Ω ×80, Δ ×0.01, κ ×0.1, L ×0.05, m ×0.1 and the
/// photon-number accuracy knob a0 = 2. The coupling multiplier g0 follows
/// from the hardware scalings (g ∝ √(1/(mΩ))/L), it is not an input.
pub fn worked_point() -> ScaledCoords {
    let mut p = params::PhysicalParams::default();
    p.omega *= 80.0;
    p.delta *= 0.01;
    p.kappa *= 0.1;
    p.kappa_e = p.kappa;
    p.length *= 0.05;
    p.m *= 0.1;
    params::scaled_coords(&p, 2.0)
}

pub fn paper_report() -> Result<PaperReport> {
    let baseline = ScaledCoords {
        omega0: 1.0,
        delta0: 1.0,
        kappa0: 1.0,
        l0: 1.0,
        m0: 1.0,
        g0: 1.0,
        a0: 2.0,
    };
    let at_baseline = ramp::feasibility_report(&baseline, &REFERENCE_FIT, ReportMode::Reference)?;
    let at_worked =
        ramp::feasibility_report(&worked_point(), &REFERENCE_FIT, ReportMode::Reference)?;
    Ok(PaperReport {
        n_c: at_baseline.n_c,
        omega0_bound: at_worked.omega0_bound,
        gamma_bound_hz: at_worked.gamma_bound_hz,
        t_coh_s: at_worked.t_coh_s,
        power_nw: at_worked.input_power_w * 1e9,
        x: REFERENCE_FIT.x,
        y: REFERENCE_FIT.y,
    })
}

fn run_report_paper(args: ReportPaperArgs) -> Result<()> {
    let report = paper_report()?;
    let wp = worked_point();
    let out = Envelope {
        metadata: meta_map([
            ("command", json!("report-paper")),
            (
                "worked_point",
                json!({
                    "omega0": wp.omega0,
                    "delta0": wp.delta0,
                    "kappa0": wp.kappa0,
                    "l0": wp.l0,
                    "m0": wp.m0,
                    "g0": wp.g0,
                    "a0": wp.a0,
                }),
            ),
        ]),
        result: report,
    };
    write_out(args.out.as_deref(), &to_json(&out)?)
}

#[derive(Serialize)]
struct Envelope<R: Serialize> {
    metadata: BTreeMap<String, Value>,
    result: R,
}

fn meta_map<const N: usize>(pairs: [(&str, Value); N]) -> BTreeMap<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
