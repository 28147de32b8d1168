//! `galilax` — command-line front end for the Galilean-reduced n-body
//! library.
//!
//! Verbs:
//!
//! * `simulate`   — integrate a configured system, writing `trajectory.tsv`,
//!   `diagnostics.tsv`, and `summary.txt` into `--out`.
//! * `invariants` — print the invariant signature (p, q, ω²ⱼ), motion rank,
//!   and rank margins of a configured or stored state.
//! * `classify`   — describe the coadjoint orbit of a signature given on the
//!   command line.
//! * `tables`     — print the orbit catalog tables for n = 3 and n = 4.
//! * `verify`     — run a seeded verification suite.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error,
//! 3 integration/runtime failure. Verbosity is controlled by the
//! `GALILAX_LOG` environment variable (off, error, warn, info, debug).
//! Identical configuration and seed produce byte-identical outputs.

mod config;
mod logging;
mod output;
mod verify;

use clap::{Parser, Subcommand, ValueEnum};
use galilax::configuration::{center, CenteredState};
use galilax::dynamics::{simulate, Mode};
use galilax::normal_form::{invariants_from_z, InvariantSignature};
use galilax::orbit_catalog::{catalog_table, closure_strata, emit_tables, orbit_descriptor};
use galilax::reduction::rank_with_margins;
use galilax::tolerances::RANK_REL;
use galilax::Error as LibError;
use nalgebra::DMatrix;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// A failed command, tagged with which exit code it maps to.
enum Failure {
    /// Bad configuration, flags, or files the user supplied → exit 2.
    Input(String),
    /// The computation itself broke down (singularity, step underflow,
    /// inconsistent tolerances, failed factorization) → exit 3.
    Run(String),
    /// A verification suite found a violated identity → exit 1.
    Verification(String),
}

impl Failure {
    fn report(&self) -> ExitCode {
        let (tag, msg, code) = match self {
            Failure::Input(m) => ("input error", m, 2),
            Failure::Run(m) => ("runtime failure", m, 3),
            Failure::Verification(m) => ("verification failure", m, 1),
        };
        eprintln!("galilax: {tag}: {msg}");
        ExitCode::from(code)
    }
}

/// Maps library errors onto exit-code classes: malformed problems are the
/// user's input, everything that breaks mid-computation is a runtime failure.
fn from_lib(e: LibError) -> Failure {
    match e {
        LibError::InvalidInput(_) | LibError::UnsupportedCase(_) => Failure::Input(e.to_string()),
        _ => Failure::Run(e.to_string()),
    }
}

fn from_io(context: &str, e: std::io::Error) -> Failure {
    Failure::Input(format!("{context}: {e}"))
}

#[derive(Parser)]
#[command(
    name = "galilax",
    version,
    about = "Galilean-reduced n-body dynamics: Lax flows, momentum maps, and coadjoint orbits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Which side(s) of the Lax pair to evolve.
#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Evolve the reduced state Z.
    Z,
    /// Evolve the Lax matrix K = JG.
    K,
    /// Evolve both and report the cross residual ‖K − JG(Z)‖.
    Both,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Z => Mode::Z,
            ModeArg::K => Mode::K,
            ModeArg::Both => Mode::Both,
        }
    }
}

/// Verification suite names.
#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    /// Trace pairing tr Lᵏ = tr Kᵏ on random states.
    Spectral,
    /// Casimir conservation along Lax flows and normal-form trace identities.
    Casimir,
    /// Relative-motion / Lax-flow equivalence on random three-body states.
    AcEquivalence,
    /// Plant-and-recover round-trips of the normal-form factorization.
    XuRoundtrip,
    /// Every suite in sequence.
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured system and write trajectory, diagnostics, and a summary.
    Simulate {
        /// Run configuration file (key = value lines).
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the configured evolution mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Override the configured adaptive tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Override the configured seed (reserved; simulate is deterministic).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the invariant signature of a configured or stored state.
    Invariants {
        /// Run configuration file; the signature of its initial state is reported.
        #[arg(long, conflicts_with = "state")]
        config: Option<PathBuf>,
        /// Whitespace-separated matrix file holding a centered state (d rows, 2m columns).
        #[arg(long)]
        state: Option<PathBuf>,
        /// Relative tolerance for rank decisions.
        #[arg(long, default_value_t = RANK_REL)]
        tol: f64,
    },
    /// Describe the coadjoint orbit of an invariant signature.
    Classify {
        /// Number of Jacobi vectors, m = n − 1.
        #[arg(long)]
        m: usize,
        /// Half the rank of the angular momentum: number of σ-planes.
        #[arg(long)]
        p: usize,
        /// Nilpotent corank, q = rank Z − 2p.
        #[arg(long)]
        q: usize,
        /// Squared frequencies ω²_1 … ω²_p (order-insensitive).
        #[arg(long, num_args = 1..)]
        omega: Vec<f64>,
    },
    /// Print the orbit catalog tables (n = 3, n = 4, or both when omitted).
    Tables {
        /// Body count.
        n: Option<usize>,
    },
    /// Run a seeded verification suite.
    Verify {
        /// Which suite to run.
        #[arg(value_enum)]
        suite: SuiteArg,
        /// Seed for the random draws.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Number of random trials (applied to each suite under `all`).
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    logging::init();
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            mode,
            tol,
            seed,
        } => cmd_simulate(&config, &out, mode, tol, seed),
        Command::Invariants { config, state, tol } => cmd_invariants(config, state, tol),
        Command::Classify { m, p, q, omega } => cmd_classify(m, p, q, omega),
        Command::Tables { n } => cmd_tables(n),
        Command::Verify { suite, seed, trials } => cmd_verify(suite, seed, trials),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}

fn load_config(path: &Path) -> Result<config::RunConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| from_io(&format!("cannot read {}", path.display()), e))?;
    config::parse(&text)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn cmd_simulate(
    config_path: &Path,
    out: &Path,
    mode: Option<ModeArg>,
    tol: Option<f64>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let mut cfg = load_config(config_path)?;
    if let Some(m) = mode {
        cfg.mode = m.into();
    }
    if let Some(t) = tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Failure::Input(format!("--tol must be positive, got {t}")));
        }
        cfg.tol = t;
    }
    if let Some(s) = seed {
        cfg.seed = Some(s);
    }

    let sys = cfg.mass_system().map_err(from_lib)?;
    let basis = cfg.jacobi_basis().map_err(from_lib)?;
    let state = cfg.phase_state().map_err(from_lib)?;
    let pot = cfg.build_potential().map_err(from_lib)?;
    let z0 = center(&sys, &state, &basis).map_err(from_lib)?;
    let signature = invariants_from_z(&z0, RANK_REL).map_err(from_lib)?;
    let margins = rank_with_margins(z0.z(), RANK_REL);
    logging::info(&format!(
        "initial signature: (p, q) = ({}, {}), motion rank {}",
        signature.p, signature.q, signature.motion_rank
    ));

    let icfg = cfg.integrator();
    logging::debug(&format!(
        "integrating to t = {} in mode {:?} at tol {:.3e}",
        cfg.t_end, cfg.mode, icfg.tol
    ));
    let traj = simulate(&z0, &basis, &pot, cfg.t_end, &icfg, cfg.mode).map_err(from_lib)?;

    fs::create_dir_all(out)
        .map_err(|e| from_io(&format!("cannot create {}", out.display()), e))?;
    let write = |e| from_io(&format!("cannot write into {}", out.display()), e);
    output::write_trajectory(out, &traj, cfg.mode).map_err(write)?;
    output::write_diagnostics(out, &traj, cfg.mode).map_err(write)?;
    let ctx = output::SummaryContext {
        cfg: &cfg,
        initial: &z0,
        signature: &signature,
        margins: &margins,
    };
    output::write_summary(out, &ctx, &traj, cfg.mode).map_err(write)?;
    emit(&format!(
        "simulate: wrote {} samples to {}\n",
        traj.times.len(),
        out.display()
    ))
}

/// Reads a whitespace-separated real matrix with one row per line.
fn read_matrix(path: &Path) -> Result<DMatrix<f64>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| from_io(&format!("cannot read {}", path.display()), e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = body.split_whitespace().map(str::parse).collect();
        let row = row.map_err(|e| {
            Failure::Input(format!("{}, line {}: {e}", path.display(), idx + 1))
        })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Failure::Input(format!(
                    "{}, line {}: expected {} entries, found {}",
                    path.display(),
                    idx + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Failure::Input(format!(
            "{}: no numeric rows found",
            path.display()
        )));
    }
    let (d, w) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(d, w, |i, j| rows[i][j]))
}

fn cmd_invariants(
    config: Option<PathBuf>,
    state: Option<PathBuf>,
    tol: f64,
) -> Result<(), Failure> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Failure::Input(format!("--tol must be positive, got {tol}")));
    }
    let z: CenteredState<f64> = match (config, state) {
        (Some(path), None) => {
            let cfg = load_config(&path)?;
            let sys = cfg.mass_system().map_err(from_lib)?;
            let basis = cfg.jacobi_basis().map_err(from_lib)?;
            let phase = cfg.phase_state().map_err(from_lib)?;
            center(&sys, &phase, &basis).map_err(from_lib)?
        }
        (None, Some(path)) => {
            CenteredState::new(read_matrix(&path)?).map_err(from_lib)?
        }
        _ => {
            return Err(Failure::Input(
                "provide exactly one of --config or --state".into(),
            ))
        }
    };
    let sig = invariants_from_z(&z, tol).map_err(from_lib)?;
    let margins = rank_with_margins(z.z(), tol);
    let mut out = String::new();
    let _ = writeln!(out, "(p, q) = ({}, {})", sig.p, sig.q);
    let _ = writeln!(out, "omega_sq: [{}]", join_floats(&sig.omega_sq));
    let _ = writeln!(out, "motion rank: {}", sig.motion_rank);
    let _ = writeln!(
        out,
        "rank Z: {} of {} (kept margin {:.3e}, dropped margin {:.3e})",
        margins.rank,
        z.d().min(2 * z.m()),
        margins.kept_ratio,
        margins.dropped_ratio
    );
    emit(&out)
}

fn join_floats(xs: &[f64]) -> String {
    let mut out = String::new();
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{x}");
    }
    out
}

fn cmd_classify(m: usize, p: usize, q: usize, mut omega: Vec<f64>) -> Result<(), Failure> {
    if omega.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Failure::Input(format!(
            "--omega entries must be positive squared frequencies, got {omega:?}"
        )));
    }
    omega.sort_by(|a, b| b.partial_cmp(a).expect("finite frequencies"));
    let sig = InvariantSignature {
        p,
        q,
        omega_sq: omega,
        m,
        motion_rank: 2 * p + q,
    };
    let desc = orbit_descriptor(&sig).map_err(from_lib)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "signature: p = {}, q = {}, m = {} (motion rank {})",
        p, q, m, sig.motion_rank
    );
    if !sig.omega_sq.is_empty() {
        let _ = writeln!(out, "omega_sq: [{}]", join_floats(&sig.omega_sq));
    }
    let _ = writeln!(
        out,
        "isotropy: {} (dim {})",
        desc.isotropy.render(),
        desc.isotropy_dim
    );
    let _ = writeln!(out, "orbit dimension: {}", desc.orbit_dim);
    let _ = writeln!(out, "generic: {}", if desc.generic { "yes" } else { "no" });
    let _ = writeln!(out, "closed: {}", if q == 0 { "yes" } else { "no" });
    if q > 0 {
        let _ = writeln!(out, "closure strata (p, q) -> orbit dimension:");
        for stratum in closure_strata(&sig) {
            let d = orbit_descriptor(&stratum).map_err(from_lib)?;
            let _ = writeln!(out, "  ({}, {}) -> {}", stratum.p, stratum.q, d.orbit_dim);
        }
    }
    emit(&out)
}

/// Writes a block to stdout, treating a closed pipe as a successful finish
/// so `galilax tables | head` behaves like any other filter.
fn emit(text: &str) -> Result<(), Failure> {
    use std::io::Write as _;
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(Failure::Run(format!("cannot write to stdout: {e}"))),
    }
}

fn cmd_tables(n: Option<usize>) -> Result<(), Failure> {
    match n {
        Some(n) => emit(&catalog_table(n).map_err(from_lib)?),
        None => {
            let (three, four) = emit_tables();
            emit(&format!("{three}\n{four}"))
        }
    }
}

fn cmd_verify(suite: SuiteArg, seed: u64, trials: Option<usize>) -> Result<(), Failure> {
    let run = |s: SuiteArg| -> verify::SuiteReport {
        match s {
            SuiteArg::Spectral => verify::spectral(seed, trials.unwrap_or(100)),
            SuiteArg::Casimir => verify::casimir(seed, trials.unwrap_or(6)),
            SuiteArg::AcEquivalence => verify::ac_equivalence(seed, trials.unwrap_or(50)),
            SuiteArg::XuRoundtrip => verify::xu_roundtrip(seed, trials.unwrap_or(25)),
            SuiteArg::All => unreachable!("expanded by the caller"),
        }
    };
    let suites: &[SuiteArg] = match suite {
        SuiteArg::All => &[
            SuiteArg::Spectral,
            SuiteArg::Casimir,
            SuiteArg::AcEquivalence,
            SuiteArg::XuRoundtrip,
        ],
        _ => std::slice::from_ref(&suite),
    };
    let mut failed = Vec::new();
    for &s in suites {
        let report = run(s);
        emit(&format!("{}\n", report.render()))?;
        if !report.passed {
            failed.push(report.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "suite(s) failed: {}",
            failed.join(", ")
        )))
    }
}
