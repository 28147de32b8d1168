//! Seeded verification suites behind `galilax verify`.
//!
//! Each suite draws reproducible random inputs (ChaCha-seeded, Gaussian
//! entries, with collision rejection where states get integrated), checks a
//! mathematical identity of the library at a fixed tolerance, and reports
//! one PASS/FAIL line. Identical seed and trial count give byte-identical
//! output.

use crate::logging;
use galilax::ac_bridge::verify_equivalence;
use galilax::configuration::{build_jacobi_basis, center, CenteredState, MassSystem, PhaseState};
use galilax::dynamics::{casimirs, simulate, IntegratorConfig, Method, Mode};
use galilax::forces::{squared_distances_from_positions, Potential};
use galilax::normal_form::{normal_form_matrix, xu_decompose, InvariantSignature};
use galilax::reduction::spectral_traces;
use galilax::sampling;
use galilax::tolerances::RANK_REL;

/// Outcome of one suite.
pub struct SuiteReport {
    /// Suite name as given on the command line.
    pub name: &'static str,
    /// Whether every check passed.
    pub passed: bool,
    /// One-line result detail (worst residuals, counts).
    pub detail: String,
}

impl SuiteReport {
    /// The stdout line for this suite.
    pub fn render(&self) -> String {
        format!(
            "{}: {} ({})",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

/// Trace pairing `tr Lᵏ = tr Kᵏ` on random states of cycling shapes.
pub fn spectral(seed: u64, trials: usize) -> SuiteReport {
    let mut rng = sampling::rng(seed);
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let d = 2 + trial % 3;
        let m = 1 + trial % 4;
        let z = CenteredState::new(sampling::gaussian_matrix(&mut rng, d, 2 * m))
            .expect("even column count");
        let (tl, tk) = spectral_traces(&z, 6);
        for k in 0..6 {
            worst = worst.max((tl[k] - tk[k]).abs() / tk[k].abs().max(1.0));
        }
    }
    SuiteReport {
        name: "spectral",
        passed: worst <= 1e-9,
        detail: format!("worst trace defect {worst:.3e} over {trials} states"),
    }
}

/// Casimir conservation along the Lax flow plus the exact normal-form trace
/// identities `tr K^(2l) = 2 (−1)^l Σ ω_j^(4l)`.
pub fn casimir(seed: u64, trials: usize) -> SuiteReport {
    let mut rng = sampling::rng(seed);
    let sys = MassSystem::new(3, vec![1.0, 1.5, 0.8]).expect("three positive masses");
    let basis = build_jacobi_basis(&sys, true).expect("normalized basis");
    let pot = Potential::newtonian(1.0).expect("positive coupling");
    let cfg = IntegratorConfig {
        method: Method::Rk45Adaptive,
        step: 1e-2,
        tol: 1e-10,
        max_steps: 1_000_000,
    };

    let mut rejected = 0usize;
    let mut worst_drift = 0.0f64;
    for _ in 0..trials {
        // Collision rejection: keep every pair at least 0.5 apart so the
        // short horizon stays far from the singular set.
        let state = loop {
            let q = sampling::gaussian_matrix(&mut rng, 3, 3);
            let p = sampling::gaussian_matrix(&mut rng, 3, 3) * 0.3;
            let r_sq = squared_distances_from_positions(&q);
            let min_sq = r_sq.pairs().map(|(_, _, v)| v).fold(f64::INFINITY, f64::min);
            if min_sq >= 0.25 {
                break PhaseState::new(q, p).expect("matching shapes");
            }
            rejected += 1;
        };
        let z0 = center(&sys, &state, &basis).expect("centering");
        let traj = match simulate(&z0, &basis, &pot, 1.0, &cfg, Mode::K) {
            Ok(t) => t,
            Err(e) => {
                return SuiteReport {
                    name: "casimir",
                    passed: false,
                    detail: format!("integration failed: {e}"),
                }
            }
        };
        let c0 = traj.diagnostics[0].casimirs.clone();
        for diag in &traj.diagnostics {
            for (c, c_init) in diag.casimirs.iter().zip(c0.iter()).take(2) {
                let drift = (c - c_init).abs() / c_init.abs().max(1.0);
                worst_drift = worst_drift.max(drift);
            }
        }
    }
    if rejected > 0 {
        logging::info(&format!("casimir suite: {rejected} draws rejected for close pairs"));
    }

    // Exact trace identities on representative normal forms.
    let sigs = [
        (1usize, 0usize, vec![2.0f64], 2usize),
        (1, 1, vec![2.5], 2),
        (2, 0, vec![2.0, 1.0], 3),
    ];
    let mut worst_identity = 0.0f64;
    for (p, q, omega_sq, m) in sigs {
        let sig = InvariantSignature {
            p,
            q,
            omega_sq: omega_sq.clone(),
            m,
            motion_rank: 2 * p + q,
        };
        let g0 = normal_form_matrix(&sig, m).expect("valid signature");
        let traces = casimirs(g0.k(), 3);
        for (idx, tr) in traces.iter().enumerate() {
            let l = (idx + 1) as i32;
            let expect = 2.0
                * (-1.0f64).powi(l)
                * omega_sq.iter().map(|w| w.powi(2 * l)).sum::<f64>();
            worst_identity =
                worst_identity.max((tr - expect).abs() / expect.abs().max(1.0));
        }
    }

    SuiteReport {
        name: "casimir",
        passed: worst_drift <= 1e-8 && worst_identity <= 1e-12,
        detail: format!(
            "worst drift {worst_drift:.3e} over {trials} Lax runs, worst identity defect {worst_identity:.3e}"
        ),
    }
}

/// Relative-motion / Lax-flow equivalence and the hat-Gram kernel on random
/// three-body states.
pub fn ac_equivalence(seed: u64, trials: usize) -> SuiteReport {
    let mut rng = sampling::rng(seed);
    let sys = MassSystem::new(3, vec![1.0, 2.0, 0.5]).expect("three positive masses");
    let basis = build_jacobi_basis(&sys, true).expect("normalized basis");
    let pot = Potential::newtonian(1.0).expect("positive coupling");

    let mut rejected = 0usize;
    let mut states = Vec::with_capacity(trials);
    while states.len() < trials {
        let q = sampling::gaussian_matrix(&mut rng, 3, 3);
        let p = sampling::gaussian_matrix(&mut rng, 3, 3);
        let r_sq = squared_distances_from_positions(&q);
        let min_sq = r_sq.pairs().map(|(_, _, v)| v).fold(f64::INFINITY, f64::min);
        if min_sq < 1e-4 {
            rejected += 1;
            continue;
        }
        states.push(PhaseState::new(q, p).expect("matching shapes"));
    }
    if rejected > 0 {
        logging::info(&format!(
            "ac-equivalence suite: {rejected} draws rejected for close pairs"
        ));
    }

    match verify_equivalence(&sys, &basis, &pot, &states) {
        Ok(rep) => SuiteReport {
            name: "ac-equivalence",
            passed: rep.max_nrel_residual <= 1e-10
                && rep.max_topleft_residual <= 1e-12
                && rep.max_kernel_residual <= 1e-10,
            detail: format!(
                "{} states: flow defect {:.3e}, position-block defect {:.3e}, kernel defect {:.3e}",
                rep.cases, rep.max_nrel_residual, rep.max_topleft_residual, rep.max_kernel_residual
            ),
        },
        Err(e) => SuiteReport {
            name: "ac-equivalence",
            passed: false,
            detail: format!("equivalence check failed: {e}"),
        },
    }
}

/// Plant-and-recover round-trips of the factorization `Z = Q D T⁻¹`.
pub fn xu_roundtrip(seed: u64, trials: usize) -> SuiteReport {
    let mut rng = sampling::rng(seed);
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let d = 2 + trial % 3;
        let m = 1 + trial % 4;
        let (z, planted) = sampling::planted_xu(&mut rng, d, m);
        match xu_decompose(&z, RANK_REL) {
            Ok(f) => {
                let res = f.residuals(&z);
                worst = worst.max(res.reconstruction).max(res.symplectic);
                let freqs_ok = f
                    .sigma()
                    .iter()
                    .zip(planted.omega_sq.iter())
                    .all(|(a, b)| (a - b).abs() <= 1e-8 * b.max(1.0));
                if res.reconstruction > 1e-8
                    || res.symplectic > 1e-8
                    || f.signature().p != planted.p
                    || f.signature().q != planted.q
                    || !freqs_ok
                {
                    return SuiteReport {
                        name: "xu-roundtrip",
                        passed: false,
                        detail: format!(
                            "trial {trial} (d = {d}, m = {m}): residuals ({:.3e}, {:.3e}), (p, q) = ({}, {}) want ({}, {})",
                            res.reconstruction,
                            res.symplectic,
                            f.signature().p,
                            f.signature().q,
                            planted.p,
                            planted.q
                        ),
                    };
                }
            }
            Err(e) => {
                return SuiteReport {
                    name: "xu-roundtrip",
                    passed: false,
                    detail: format!("trial {trial} (d = {d}, m = {m}) failed to factor: {e}"),
                }
            }
        }
    }
    SuiteReport {
        name: "xu-roundtrip",
        passed: true,
        detail: format!("{trials} round-trips, worst residual {worst:.3e}"),
    }
}
