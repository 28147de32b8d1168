//! Seeded, reproducible random states and structured matrices.
//!
//! Everything here is deterministic given the seed: the generator is a
//! ChaCha 8-round stream cipher (stable across platforms and releases), and
//! Gaussian variates are produced by an explicit Box–Muller transform on
//! that stream, so test suites and the command-line verification suites
//! reproduce byte-for-byte.
//!
//! Besides raw Gaussian matrices the module provides the structured draws
//! the verification suites need — Haar-like orthogonal matrices (QR with
//! sign fixing), symplectic matrices (`exp(J·sym)`), the two standard
//! two-body Kepler configurations with known closed-form oracles, and
//! "planted" states `Z = Q₀ D R₀` whose invariant signature `(p, q, ω²)` is
//! known by construction.

use crate::configuration::{CenteredState, MassSystem, PhaseState};
use crate::normal_form::InvariantSignature;
use crate::reduction::standard_j;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A seeded deterministic generator.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A uniform draw in `[0, 1)`.
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>()
}

/// A standard Gaussian draw (Box–Muller on the uniform stream).
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - rng.random::<f64>(); // (0, 1]: keeps the log finite
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// A matrix of independent standard Gaussians (column-major fill order).
pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = gaussian(rng);
        }
    }
    m
}

/// A random orthogonal matrix: QR of a Gaussian matrix with the sign
/// ambiguity fixed by making the diagonal of `R` positive.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    assert!(d > 0, "orthogonal matrices need dimension ≥ 1");
    let a = gaussian_matrix(rng, d, d);
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for i in 0..d {
        if r[(i, i)] < 0.0 {
            for k in 0..d {
                q[(k, i)] = -q[(k, i)];
            }
        }
    }
    q
}

/// A random symplectic matrix `exp(J S)` with `S = spread · sym(Gaussian)`.
///
/// Small `spread` keeps the matrix well conditioned; `spread = 0` is the
/// identity.
pub fn random_symplectic(rng: &mut ChaCha8Rng, m: usize, spread: f64) -> DMatrix<f64> {
    assert!(m > 0, "symplectic matrices need m ≥ 1");
    assert!(spread.is_finite() && spread >= 0.0, "spread must be finite and ≥ 0");
    let raw = gaussian_matrix(rng, 2 * m, 2 * m);
    let s = (raw.transpose() + &raw) * (0.5 * spread);
    let h = standard_j::<f64>(2 * m) * s;
    h.exp()
}

/// Period of the circular two-body orbit produced by [`two_body_circular`]:
/// `2π r^{3/2} / √(2g)` for unit masses.
pub fn circular_period(g: f64, r: f64) -> f64 {
    2.0 * std::f64::consts::PI * r.powf(1.5) / (2.0 * g).sqrt()
}

/// Period of the elliptic orbit produced by [`two_body_eccentric`]:
/// `2π √(a³ / (2g))` for unit masses (gravitational parameter `2g`).
pub fn eccentric_period(g: f64, a: f64) -> f64 {
    2.0 * std::f64::consts::PI * (a.powi(3) / (2.0 * g)).sqrt()
}

/// Two unit masses in `d = 3` on a circular orbit of separation `r` about
/// their common center, in the xy-plane. Exact relations for checks:
/// angular rate `ω = √(2g/r³)`, energy `−g/(2r)`, period
/// [`circular_period`].
pub fn two_body_circular(g: f64, r: f64) -> (MassSystem<f64>, PhaseState<f64>) {
    assert!(g > 0.0 && r > 0.0, "coupling and separation must be positive");
    let sys = MassSystem::new(3, vec![1.0, 1.0]).expect("two unit masses in d = 3");
    let omega = (2.0 * g / r.powi(3)).sqrt();
    let half_r = 0.5 * r;
    let half_v = 0.5 * omega * r;
    let q = DMatrix::from_column_slice(3, 2, &[half_r, 0.0, 0.0, -half_r, 0.0, 0.0]);
    let p = DMatrix::from_column_slice(3, 2, &[0.0, half_v, 0.0, 0.0, -half_v, 0.0]);
    (sys, PhaseState::new(q, p).expect("matching shapes"))
}

/// Two unit masses in `d = 3` on an elliptic orbit with relative semi-major
/// axis `a` and eccentricity `e`, starting at apoapsis. Vis-viva at
/// apoapsis gives the relative speed `√(2g(1−e)/(a(1+e)))`; the period is
/// [`eccentric_period`].
pub fn two_body_eccentric(g: f64, a: f64, e: f64) -> (MassSystem<f64>, PhaseState<f64>) {
    assert!(g > 0.0 && a > 0.0, "coupling and semi-major axis must be positive");
    assert!((0.0..1.0).contains(&e), "eccentricity must lie in [0, 1)");
    let sys = MassSystem::new(3, vec![1.0, 1.0]).expect("two unit masses in d = 3");
    let r_apo = a * (1.0 + e);
    let v_apo = (2.0 * g * (1.0 - e) / (a * (1.0 + e))).sqrt();
    let q = DMatrix::from_column_slice(3, 2, &[0.5 * r_apo, 0.0, 0.0, -0.5 * r_apo, 0.0, 0.0]);
    let p = DMatrix::from_column_slice(3, 2, &[0.0, 0.5 * v_apo, 0.0, 0.0, -0.5 * v_apo, 0.0]);
    (sys, PhaseState::new(q, p).expect("matching shapes"))
}

/// A centered state with a *planted* invariant signature: `Z = Q₀ D R₀`
/// with `Q₀` orthogonal, `R₀` symplectic, and `D` the canonical sparse
/// matrix of the signature (entries `√ω²_j` in the oscillator slots, ones
/// in the nilpotent slots). The signature of the result is exactly `sig`.
///
/// Panics if the signature violates the rank bounds for ambient
/// dimension `d`.
pub fn planted_xu_with_signature(
    rng: &mut ChaCha8Rng,
    d: usize,
    sig: &InvariantSignature<f64>,
) -> CenteredState<f64> {
    assert!(
        sig.respects_bounds(d),
        "signature (p, q, m) = ({}, {}, {}) violates the d = {d} rank bounds",
        sig.p,
        sig.q,
        sig.m
    );
    let m = sig.m;
    let mut dm = DMatrix::<f64>::zeros(d, 2 * m);
    for (j, &w_sq) in sig.omega_sq.iter().enumerate() {
        let w = w_sq.sqrt();
        dm[(j, j)] = w;
        dm[(sig.p + sig.q + j, m + j)] = w;
    }
    for i in 0..sig.q {
        dm[(sig.p + i, sig.p + i)] = 1.0;
    }
    let q0 = random_orthogonal(rng, d);
    let r0 = random_symplectic(rng, m, 0.3);
    CenteredState::new(q0 * dm * r0).expect("planted state has even column count")
}

/// A random planted state: draws a signature respecting the `(d, m)` rank
/// bounds (frequencies well separated, descending), then builds the state
/// with [`planted_xu_with_signature`]. Returns the state and the exact
/// signature.
pub fn planted_xu(
    rng: &mut ChaCha8Rng,
    d: usize,
    m: usize,
) -> (CenteredState<f64>, InvariantSignature<f64>) {
    assert!(d >= 1 && m >= 1, "planted states need d ≥ 1 and m ≥ 1");
    let p_max = (d / 2).min(m);
    let p = (uniform(rng) * (p_max + 1) as f64).floor() as usize;
    let p = p.min(p_max);
    let q_max = (d - 2 * p).min(m - p);
    let q = (uniform(rng) * (q_max + 1) as f64).floor() as usize;
    let q = q.min(q_max);
    // Descending ladder with pairwise gaps ≥ 0.5 so the recovered spectrum
    // clusters unambiguously.
    let omega_sq: Vec<f64> = (0..p)
        .map(|k| 1.0 + 1.5 * (p - 1 - k) as f64 + uniform(rng))
        .collect();
    let sig = InvariantSignature {
        p,
        q,
        omega_sq,
        m,
        motion_rank: 2 * p + q,
    };
    let z = planted_xu_with_signature(rng, d, &sig);
    (z, sig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::{build_jacobi_basis, center};
    use crate::forces::{energy, Potential};

    #[test]
    fn seeded_streams_are_reproducible() {
        let a = gaussian_matrix(&mut rng(7), 4, 5);
        let b = gaussian_matrix(&mut rng(7), 4, 5);
        assert_eq!(a, b);
        let c = gaussian_matrix(&mut rng(8), 4, 5);
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_moments_are_sane() {
        let mut r = rng(11);
        let n = 20_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = gaussian(&mut r);
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn orthogonal_draws_are_orthogonal() {
        let mut r = rng(13);
        for d in [1usize, 2, 3, 5] {
            let q = random_orthogonal(&mut r, d);
            let defect = (q.transpose() * &q - DMatrix::<f64>::identity(d, d)).norm();
            assert!(defect < 1e-13, "d = {d}: defect {defect:.3e}");
        }
        // Sign fixing makes the draw deterministic, not just orthogonal.
        let q1 = random_orthogonal(&mut rng(17), 4);
        let q2 = random_orthogonal(&mut rng(17), 4);
        assert_eq!(q1, q2);
    }

    #[test]
    fn symplectic_draws_satisfy_the_defining_relation() {
        let mut r = rng(19);
        for m in [1usize, 2, 3] {
            let s = random_symplectic(&mut r, m, 0.4);
            let j = standard_j::<f64>(2 * m);
            let defect = (&s * &j * s.transpose() - &j).norm();
            assert!(defect < 1e-12, "m = {m}: defect {defect:.3e}");
        }
        let id = random_symplectic(&mut rng(23), 2, 0.0);
        assert!((id - DMatrix::<f64>::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn circular_sample_matches_its_oracles() {
        let (sys, state) = two_body_circular(1.0, 1.0);
        // Zero total momentum and centered positions by construction.
        let p_tot: f64 = (0..3).map(|i| state.p()[(i, 0)] + state.p()[(i, 1)]).map(f64::abs).sum();
        assert_eq!(p_tot, 0.0);
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let z = center(&sys, &state, &basis).unwrap();
        let h = energy(&z, &basis, &pot).unwrap();
        assert!((h - (-0.5)).abs() < 1e-14, "H = {h}");
        assert!((circular_period(1.0, 1.0) - std::f64::consts::PI * 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn eccentric_sample_has_the_vis_viva_energy() {
        // H = −g·m₁m₂/(2a) · (μ-scaling) — for unit masses and κ = 2g the
        // orbital energy of the relative motion is −μκ/(2a) = −g/(2a).
        let (sys, state) = two_body_eccentric(1.0, 1.0, 0.5);
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let z = center(&sys, &state, &basis).unwrap();
        let h = energy(&z, &basis, &pot).unwrap();
        assert!((h - (-0.5)).abs() < 1e-13, "H = {h}");
        // Apoapsis separation is a(1+e) = 1.5.
        let sep: f64 = (0..3)
            .map(|i| (state.q()[(i, 0)] - state.q()[(i, 1)]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((sep - 1.5).abs() < 1e-15);
        assert!((eccentric_period(1.0, 1.0) - std::f64::consts::PI * 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn planted_states_have_planted_rank_data() {
        let mut r = rng(29);
        for _ in 0..20 {
            let d = 2 + (uniform(&mut r) * 3.0) as usize; // 2..=4
            let m = 2 + (uniform(&mut r) * 3.0) as usize;
            let (z, sig) = planted_xu(&mut r, d, m);
            assert!(sig.respects_bounds(d));
            assert_eq!(z.z().nrows(), d);
            assert_eq!(z.z().ncols(), 2 * m);
            // Rank of Z is 2p + q by construction.
            let rank = crate::reduction::numerical_rank(z.z(), 1e-10);
            assert_eq!(rank, 2 * sig.p + sig.q, "signature {sig:?}");
        }
    }
}
