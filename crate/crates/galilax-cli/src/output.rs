//! Deterministic writers for simulation outputs.
//!
//! Three flat files land in the output directory:
//!
//! * `trajectory.tsv` — time plus the flattened evolved matrix per sample
//!   (`z_i_j` columns for state runs, `k_i_j` for Lax-only runs);
//! * `diagnostics.tsv` — time, energy, `‖L‖`, the Casimir traces, and the
//!   cross residual column when both sides evolve;
//! * `summary.txt` — run settings, conservation extremes, and the invariant
//!   signature of the initial state.
//!
//! Every float prints as `{:.16e}`, so identical runs produce identical
//! bytes.

use crate::config::{PotentialSpec, RunConfig};
use galilax::configuration::CenteredState;
use galilax::dynamics::{Mode, Trajectory};
use galilax::normal_form::InvariantSignature;
use galilax::reduction::RankMargins;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// `{:.16e}` — the one float format used in every output file.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `trajectory.tsv`: the evolved `Z` (state modes) or `K` (Lax-only
/// mode) flattened row-major, one sample per line.
pub fn write_trajectory(dir: &Path, traj: &Trajectory<f64>, mode: Mode) -> io::Result<()> {
    let mut out = String::new();
    match mode {
        Mode::Z | Mode::Both => {
            let states = traj.z_states.as_ref().expect("state modes record Z");
            let (d, two_m) = states[0].z().shape();
            out.push_str("time");
            for i in 0..d {
                for j in 0..two_m {
                    let _ = write!(out, "\tz_{i}_{j}");
                }
            }
            out.push('\n');
            for (t, z) in traj.times.iter().zip(states) {
                out.push_str(&fmt(*t));
                for i in 0..d {
                    for j in 0..two_m {
                        let _ = write!(out, "\t{}", fmt(z.z()[(i, j)]));
                    }
                }
                out.push('\n');
            }
        }
        Mode::K => {
            let states = traj.k_states.as_ref().expect("K mode records K");
            let two_m = states[0].k().nrows();
            out.push_str("time");
            for i in 0..two_m {
                for j in 0..two_m {
                    let _ = write!(out, "\tk_{i}_{j}");
                }
            }
            out.push('\n');
            for (t, k) in traj.times.iter().zip(states) {
                out.push_str(&fmt(*t));
                for i in 0..two_m {
                    for j in 0..two_m {
                        let _ = write!(out, "\t{}", fmt(k.k()[(i, j)]));
                    }
                }
                out.push('\n');
            }
        }
    }
    fs::write(dir.join("trajectory.tsv"), out)
}

/// Writes `diagnostics.tsv`; the `cross_residual` column appears exactly in
/// `both` mode.
pub fn write_diagnostics(dir: &Path, traj: &Trajectory<f64>, mode: Mode) -> io::Result<()> {
    let mut out = String::from("time\tenergy\tl_norm\ttr_k2\ttr_k4\ttr_k6");
    if mode == Mode::Both {
        out.push_str("\tcross_residual");
    }
    out.push('\n');
    for diag in &traj.diagnostics {
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            fmt(diag.time),
            fmt(diag.energy),
            fmt(diag.l_norm),
            fmt(diag.casimirs[0]),
            fmt(diag.casimirs[1]),
            fmt(diag.casimirs[2])
        );
        if mode == Mode::Both {
            let r = diag.cross_residual.expect("both mode records cross residuals");
            let _ = write!(out, "\t{}", fmt(r));
        }
        out.push('\n');
    }
    fs::write(dir.join("diagnostics.tsv"), out)
}

/// Inputs for the run summary beyond the trajectory itself.
pub struct SummaryContext<'a> {
    /// The validated configuration the run used (after CLI overrides).
    pub cfg: &'a RunConfig,
    /// Initial reduced state.
    pub initial: &'a CenteredState<f64>,
    /// Signature of the initial state.
    pub signature: &'a InvariantSignature<f64>,
    /// Rank margins of the initial state's rank decision.
    pub margins: &'a RankMargins<f64>,
}

/// Writes `summary.txt`.
pub fn write_summary(
    dir: &Path,
    ctx: &SummaryContext<'_>,
    traj: &Trajectory<f64>,
    mode: Mode,
) -> io::Result<()> {
    let cfg = ctx.cfg;
    let n = cfg.masses.len();
    let mut out = String::new();
    let _ = writeln!(out, "galilax run summary");
    let _ = writeln!(out, "===================");
    let _ = writeln!(out, "bodies: {n} (d = {}, m = {})", cfg.dim, n - 1);
    match cfg.potential {
        PotentialSpec::Newtonian { g } => {
            let _ = writeln!(out, "potential: newtonian, g = {}", fmt(g));
        }
        PotentialSpec::Homogeneous { alpha, coupling } => {
            let _ = writeln!(
                out,
                "potential: homogeneous, alpha = {}, coupling = {}",
                fmt(alpha),
                fmt(coupling)
            );
        }
    }
    if let Some(eps) = cfg.softening {
        let _ = writeln!(out, "softening: {}", fmt(eps));
    }
    let _ = writeln!(
        out,
        "integrator: {} (step = {}, tol = {}, max_steps = {})",
        match cfg.method {
            galilax::dynamics::Method::Rk4Fixed => "rk4",
            galilax::dynamics::Method::Rk45Adaptive => "rk45",
        },
        fmt(cfg.step),
        fmt(cfg.tol),
        cfg.max_steps
    );
    let _ = writeln!(
        out,
        "mode: {}",
        match mode {
            Mode::Z => "z",
            Mode::K => "k",
            Mode::Both => "both",
        }
    );
    let _ = writeln!(out, "t_end: {}", fmt(cfg.t_end));
    let _ = writeln!(out, "samples: {}", traj.len());
    let _ = writeln!(out);

    let sig = ctx.signature;
    let _ = writeln!(out, "initial |Z|_F: {}", fmt(ctx.initial.z().norm()));
    let _ = writeln!(
        out,
        "initial signature: (p, q) = ({}, {}), motion rank {}",
        sig.p, sig.q, sig.motion_rank
    );
    if sig.omega_sq.is_empty() {
        let _ = writeln!(out, "omega_sq: (none)");
    } else {
        let vals: Vec<String> = sig.omega_sq.iter().map(|w| fmt(*w)).collect();
        let _ = writeln!(out, "omega_sq: {}", vals.join(" "));
    }
    let _ = writeln!(
        out,
        "rank margins: rank {}, kept ratio {}, dropped ratio {}",
        ctx.margins.rank,
        fmt(ctx.margins.kept_ratio),
        fmt(ctx.margins.dropped_ratio)
    );
    let _ = writeln!(out);

    let d0 = &traj.diagnostics[0];
    let dlast = traj.diagnostics.last().expect("at least one sample");
    let mut de = 0.0f64;
    let mut dl = 0.0f64;
    let mut dc = 0.0f64;
    let mut cross = 0.0f64;
    for diag in &traj.diagnostics {
        de = de.max((diag.energy - d0.energy).abs());
        dl = dl.max((diag.l_norm - d0.l_norm).abs());
        dc = dc.max((diag.casimirs[0] - d0.casimirs[0]).abs());
        if let Some(r) = diag.cross_residual {
            cross = cross.max(r);
        }
    }
    let _ = writeln!(out, "initial energy: {}", fmt(d0.energy));
    let _ = writeln!(out, "final energy:   {}", fmt(dlast.energy));
    let _ = writeln!(out, "initial |L|:    {}", fmt(d0.l_norm));
    let _ = writeln!(out, "final |L|:      {}", fmt(dlast.l_norm));
    let _ = writeln!(out, "max |energy drift|: {}", fmt(de));
    let _ = writeln!(out, "max ||L| drift|:    {}", fmt(dl));
    let _ = writeln!(out, "max |tr K2 drift|:  {}", fmt(dc));
    if mode == Mode::Both {
        let _ = writeln!(out, "max cross residual ||K - J G(Z)||: {}", fmt(cross));
    }
    fs::write(dir.join("summary.txt"), out)
}
