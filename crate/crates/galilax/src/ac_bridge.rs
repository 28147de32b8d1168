//! Equivalence with the relative-motion (mutual-distance) formulation.
//!
//! The classical reduction by translations and rotations works with the
//! Gram blocks of the state rather than the state itself. Splitting
//! `G = ZᵀZ` into `m×m` blocks
//!
//! ```text
//! G = [ b      c + r ]        b = XᵀX,  d = YᵀY,
//!     [ c − r  d     ]        c = sym(XᵀY),  r = asym(XᵀY),
//! ```
//!
//! the equations of motion close on the blocks ((NRel) form):
//!
//! ```text
//! ḃ = (c+r) M̃⁻¹ + M̃⁻¹ (c−r),        ṫop-right = M̃⁻¹ d − b Ã,
//! ḋ = −Ã (c+r) − (c−r) Ã,
//! ```
//!
//! and this is *identical* to the Lax-side derivative `Ġ = −J [P, J G]`:
//! the two reductions are the same flow written in different coordinates.
//! [`verify_equivalence`] measures the discrepancy on a batch of states.
//!
//! The mass-weighted ("hat") picture makes the contact with the classical
//! relative-distance equations explicit: `q̂ = q M^{1/2}`, `p̂ = p M^{−1/2}`,
//! `Â = M^{−1/2} A M^{−1/2}` turn Newton's equations into `q̂̇ = p̂`,
//! `p̂̇ = −q̂ Â`, the hat Gram matrix annihilates the mass vector
//! `w = (√m_1, …, √m_n)` on centered states, and the rotation-invariant
//! block `R = asym(q̂ᵀp̂)` obeys `Ṙ = ½ [Â, B]` with `B = q̂ᵀq̂`.

use crate::configuration::{center, reconstruct, CenteredState, JacobiBasis, MassSystem, PhaseState};
use crate::forces::{assemble_p, wintner_conley_full, wintner_conley_reduced, Potential};
use crate::linalg::{asym_part, sym_part};
use crate::reduction::{standard_j, GramElement};
use crate::{Error, Real, Result};
use nalgebra::{DMatrix, DVector};

/// The four natural blocks of a Gram-type matrix.
///
/// For the reduced state these are `m×m`; for the hat picture they are
/// `n×n`. `b` and `d` are symmetric, `c` symmetric, `r` antisymmetric,
/// with the off-diagonal blocks of the assembled matrix equal to `c ± r`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGram<T: Real = f64> {
    /// Position Gram block.
    pub b: DMatrix<T>,
    /// Symmetric part of the cross block.
    pub c: DMatrix<T>,
    /// Antisymmetric part of the cross block (the rotation-invariant data).
    pub r: DMatrix<T>,
    /// Momentum Gram block.
    pub d: DMatrix<T>,
}

impl<T: Real> BlockGram<T> {
    /// Splits a symmetric `2m×2m` matrix into its four blocks.
    pub fn split(g: &DMatrix<T>) -> Result<Self> {
        let two_m = g.nrows();
        if g.ncols() != two_m || two_m == 0 || two_m % 2 != 0 {
            return Err(Error::InvalidInput(
                "block split needs a square matrix of even size".into(),
            ));
        }
        let m = two_m / 2;
        let b = g.view((0, 0), (m, m)).into_owned();
        let d = g.view((m, m), (m, m)).into_owned();
        let top_right = g.view((0, m), (m, m)).into_owned();
        Ok(Self {
            b,
            c: sym_part(&top_right),
            r: asym_part(&top_right),
            d,
        })
    }

    /// Splits a Gram element (always valid, shape pre-checked).
    pub fn from_gram(g: &GramElement<T>) -> Self {
        Self::split(g.g()).expect("GramElement is square, even, symmetric")
    }

    /// Exact blocks of a centered state: `b = XᵀX`, `c ± r = XᵀY` split,
    /// `d = YᵀY`.
    pub fn from_state(z: &CenteredState<T>) -> Self {
        let x = z.x();
        let y = z.y();
        let cross = x.transpose() * &y;
        Self {
            b: x.transpose() * &x,
            c: sym_part(&cross),
            r: asym_part(&cross),
            d: y.transpose() * &y,
        }
    }

    /// Block size.
    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    /// Reassembles `[[b, c+r], [c−r, d]]`.
    pub fn assemble(&self) -> DMatrix<T> {
        let m = self.m();
        let mut g = DMatrix::<T>::zeros(2 * m, 2 * m);
        let plus = &self.c + &self.r;
        let minus = &self.c - &self.r;
        g.view_mut((0, 0), (m, m)).copy_from(&self.b);
        g.view_mut((0, m), (m, m)).copy_from(&plus);
        g.view_mut((m, 0), (m, m)).copy_from(&minus);
        g.view_mut((m, m), (m, m)).copy_from(&self.d);
        g
    }
}

/// The relative-motion right-hand side, blockwise:
///
/// ```text
/// ḃ = (c+r) M̃⁻¹ + M̃⁻¹ (c−r)
/// (ċ + ṙ) = M̃⁻¹ d − b Ã       (top-right block)
/// ḋ = −Ã (c+r) − (c−r) Ã
/// ```
///
/// Returned as a [`BlockGram`] whose fields hold the *derivative* blocks
/// (with the top-right derivative split into symmetric/antisymmetric
/// parts), so `result.assemble()` is the full `Ġ`.
pub fn nrel_rhs<T: Real>(
    blocks: &BlockGram<T>,
    basis: &JacobiBasis<T>,
    a_tilde: &DMatrix<T>,
) -> Result<BlockGram<T>> {
    let m = blocks.m();
    if basis.m() != m || a_tilde.shape() != (m, m) {
        return Err(Error::InvalidInput(format!(
            "block size {m} does not match basis m = {} or force matrix {:?}",
            basis.m(),
            a_tilde.shape()
        )));
    }
    let mu = basis.reduced_masses();
    let m_inv = DMatrix::<T>::from_diagonal(&DVector::from_iterator(
        m,
        mu.iter().map(|&v| T::one() / v),
    ));
    let plus = &blocks.c + &blocks.r;
    let minus = &blocks.c - &blocks.r;
    let db = &plus * &m_inv + &m_inv * &minus;
    let top_right = &m_inv * &blocks.d - &blocks.b * a_tilde;
    let dd = -a_tilde * &plus - &minus * a_tilde;
    Ok(BlockGram {
        b: db,
        c: sym_part(&top_right),
        r: asym_part(&top_right),
        d: dd,
    })
}

/// The same right-hand side computed on the Lax side: `Ġ = −J [P, J G]`.
pub fn lax_gram_rhs<T: Real>(
    g: &GramElement<T>,
    basis: &JacobiBasis<T>,
    pot: &Potential<T>,
) -> Result<DMatrix<T>> {
    let blocks = BlockGram::from_gram(g);
    let wc = wintner_conley_reduced(basis, &blocks.b, pot)?;
    let p = assemble_p(&wc, basis.reduced_masses())?;
    let two_m = g.g().nrows();
    let j = standard_j::<T>(two_m);
    let k = g.k();
    let k_dot = p.p() * k - k * p.p();
    Ok(-(&j * k_dot))
}

/// Mass-weighted coordinates: `q̂ = q M^{1/2}`, `p̂ = p M^{−1/2}`, with the
/// force matrix conjugated to `Â = M^{−1/2} A M^{−1/2}`.
#[derive(Debug, Clone)]
pub struct HatState<T: Real = f64> {
    q_hat: DMatrix<T>,
    p_hat: DMatrix<T>,
    a_hat: DMatrix<T>,
    w: DVector<T>,
}

impl<T: Real> HatState<T> {
    /// Mass-weighted positions (d×n).
    pub fn q_hat(&self) -> &DMatrix<T> {
        &self.q_hat
    }

    /// Mass-weighted momenta (d×n).
    pub fn p_hat(&self) -> &DMatrix<T> {
        &self.p_hat
    }

    /// Conjugated force matrix `Â` (n×n, symmetric).
    pub fn a_hat(&self) -> &DMatrix<T> {
        &self.a_hat
    }

    /// The mass vector `w = (√m_1, …, √m_n)` annihilated by the hat Gram
    /// matrix on centered states.
    pub fn w(&self) -> &DVector<T> {
        &self.w
    }

    /// Hat dynamics: `(q̂̇, p̂̇) = (p̂, −q̂ Â)`.
    pub fn rhs(&self) -> (DMatrix<T>, DMatrix<T>) {
        (self.p_hat.clone(), -(&self.q_hat * &self.a_hat))
    }

    /// The hat Lax generator `P̂ = (0 Â; −I 0)` in `sp(2n)`.
    pub fn generator(&self) -> DMatrix<T> {
        let n = self.q_hat.ncols();
        let mut p = DMatrix::<T>::zeros(2 * n, 2 * n);
        p.view_mut((0, n), (n, n)).copy_from(&self.a_hat);
        for i in 0..n {
            p[(n + i, i)] = -T::one();
        }
        p
    }

    /// The full `2n×2n` hat Gram matrix of `Ẑ = [q̂ | p̂]`.
    pub fn gram(&self) -> DMatrix<T> {
        let n = self.q_hat.ncols();
        let d = self.q_hat.nrows();
        let mut z_hat = DMatrix::<T>::zeros(d, 2 * n);
        z_hat.view_mut((0, 0), (d, n)).copy_from(&self.q_hat);
        z_hat.view_mut((0, n), (d, n)).copy_from(&self.p_hat);
        z_hat.transpose() * z_hat
    }

    /// The hat blocks `B = q̂ᵀq̂`, `C ± R = q̂ᵀp̂` split, `D = p̂ᵀp̂`.
    pub fn blocks(&self) -> BlockGram<T> {
        let cross = self.q_hat.transpose() * &self.p_hat;
        BlockGram {
            b: self.q_hat.transpose() * &self.q_hat,
            c: sym_part(&cross),
            r: asym_part(&cross),
            d: self.p_hat.transpose() * &self.p_hat,
        }
    }

    /// The rotation-invariant rate `Ṙ = ½ [Â, B]` with `B = q̂ᵀq̂`.
    pub fn r_rate(&self) -> DMatrix<T> {
        let b = self.q_hat.transpose() * &self.q_hat;
        let half = T::of(0.5);
        (&self.a_hat * &b - &b * &self.a_hat) * half
    }
}

/// Builds the hat picture at a raw phase-space state.
pub fn hat_transform<T: Real>(
    sys: &MassSystem<T>,
    state: &PhaseState<T>,
    pot: &Potential<T>,
) -> Result<HatState<T>> {
    if state.q().shape() != (sys.d(), sys.n()) {
        return Err(Error::InvalidInput(format!(
            "state is {:?} but the mass system expects {}×{}",
            state.q().shape(),
            sys.d(),
            sys.n()
        )));
    }
    let n = sys.n();
    let wc = wintner_conley_full(sys, state.q(), pot)?;
    let sqrt_m: Vec<T> = sys.masses().iter().map(|&m| m.sqrt()).collect();
    let mut q_hat = state.q().clone();
    let mut p_hat = state.p().clone();
    for a in 0..n {
        let s = sqrt_m[a];
        for i in 0..q_hat.nrows() {
            q_hat[(i, a)] *= s;
            p_hat[(i, a)] /= s;
        }
    }
    let mut a_hat = wc.matrix().clone();
    for a in 0..n {
        for b in 0..n {
            a_hat[(a, b)] /= sqrt_m[a] * sqrt_m[b];
        }
    }
    Ok(HatState {
        q_hat,
        p_hat,
        a_hat,
        w: DVector::from_vec(sqrt_m),
    })
}

/// Aggregate residuals over a batch of states.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport<T: Real = f64> {
    /// Number of states checked.
    pub cases: usize,
    /// Largest relative defect `‖Ġ_blocks − (−J[P, JG])‖_F / max(1, ‖Ġ‖_F)`.
    pub max_nrel_residual: T,
    /// Largest `‖ḃ − 2c‖_F` over normalized bases (`M̃ = I`); zero cases
    /// are skipped when the basis is unnormalized.
    pub max_topleft_residual: T,
    /// Largest `‖Ĝ w‖ / max(1, ‖Ĝ‖_F)` — the exact hat-Gram kernel.
    pub max_kernel_residual: T,
}

/// Checks, state by state, that the relative-motion equations and the Lax
/// equation are the same flow, and that the hat Gram matrix annihilates the
/// mass vector after centering.
pub fn verify_equivalence<T: Real>(
    sys: &MassSystem<T>,
    basis: &JacobiBasis<T>,
    pot: &Potential<T>,
    states: &[PhaseState<T>],
) -> Result<EquivalenceReport<T>> {
    let mut max_nrel = T::zero();
    let mut max_topleft = T::zero();
    let mut max_kernel = T::zero();
    for state in states {
        let z = center(sys, state, basis)?;
        let g = GramElement::from_state(&z);
        let blocks = BlockGram::from_state(&z);
        let wc = wintner_conley_reduced(basis, &blocks.b, pot)?;
        let rhs_blocks = nrel_rhs(&blocks, basis, wc.matrix())?.assemble();
        let rhs_lax = lax_gram_rhs(&g, basis, pot)?;
        let scale = rhs_lax.norm().max(T::one());
        max_nrel = max_nrel.max((&rhs_blocks - &rhs_lax).norm() / scale);

        if basis.normalized() {
            let db = rhs_blocks.view((0, 0), (basis.m(), basis.m())).into_owned();
            let two_c = &blocks.c * T::of(2.0);
            max_topleft = max_topleft.max((db - two_c).norm());
        }

        // Kernel check in the hat picture, on the centered representative.
        let centered_raw = reconstruct(sys, basis, &z)?;
        let hat = hat_transform(sys, &centered_raw, pot)?;
        let gram = hat.gram();
        let n = sys.n();
        let mut w2 = DVector::<T>::zeros(2 * n);
        w2.rows_mut(0, n).copy_from(hat.w());
        w2.rows_mut(n, n).copy_from(hat.w());
        let kernel = (&gram * &w2).norm() / gram.norm().max(T::one());
        max_kernel = max_kernel.max(kernel);
    }
    Ok(EquivalenceReport {
        cases: states.len(),
        max_nrel_residual: max_nrel,
        max_topleft_residual: max_topleft,
        max_kernel_residual: max_kernel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::build_jacobi_basis;
    use crate::sampling;
    use nalgebra::DMatrix;

    fn random_setup(
        seed: u64,
        n: usize,
        d: usize,
        normalized: bool,
        equal_masses: bool,
    ) -> (MassSystem<f64>, JacobiBasis<f64>, Potential<f64>, PhaseState<f64>) {
        let mut rng = sampling::rng(seed);
        let masses: Vec<f64> = if equal_masses {
            vec![1.0; n]
        } else {
            (0..n).map(|_| 0.5 + sampling::uniform(&mut rng)).collect()
        };
        let sys = MassSystem::new(d, masses).unwrap();
        let basis = build_jacobi_basis(&sys, normalized).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let q = sampling::gaussian_matrix(&mut rng, d, n);
        let p = sampling::gaussian_matrix(&mut rng, d, n);
        (sys, basis, pot, PhaseState::new(q, p).unwrap())
    }

    #[test]
    fn block_split_and_assemble_round_trip() {
        let mut rng = sampling::rng(41);
        let z0 = sampling::gaussian_matrix(&mut rng, 3, 6);
        let g = z0.transpose() * &z0;
        let blocks = BlockGram::split(&g).unwrap();
        assert!((blocks.assemble() - &g).norm() < 1e-14);
        assert!((&blocks.c - blocks.c.transpose()).norm() < 1e-15);
        assert!((&blocks.r + blocks.r.transpose()).norm() < 1e-15);
        assert!(BlockGram::split(&DMatrix::<f64>::zeros(3, 3)).is_err());
    }

    #[test]
    fn nrel_matches_lax_rhs_both_normalizations() {
        for (seed, normalized) in [(7u64, true), (8, false), (9, true), (10, false)] {
            let (sys, basis, pot, state) = random_setup(seed, 4, 3, normalized, false);
            let z = center(&sys, &state, &basis).unwrap();
            let g = GramElement::from_state(&z);
            let blocks = BlockGram::from_state(&z);
            let wc = wintner_conley_reduced(&basis, &blocks.b, &pot).unwrap();
            let lhs = nrel_rhs(&blocks, &basis, wc.matrix()).unwrap().assemble();
            let rhs = lax_gram_rhs(&g, &basis, &pot).unwrap();
            let scale = rhs.norm().max(1.0);
            assert!(
                (&lhs - &rhs).norm() / scale < 1e-12,
                "(NRel) vs Lax defect {:.3e} (normalized = {normalized})",
                (&lhs - &rhs).norm() / scale
            );
        }
    }

    #[test]
    fn top_left_block_is_twice_c_for_unit_reduced_masses() {
        let (sys, basis, pot, state) = random_setup(11, 3, 3, true, true);
        let z = center(&sys, &state, &basis).unwrap();
        let blocks = BlockGram::from_state(&z);
        let wc = wintner_conley_reduced(&basis, &blocks.b, &pot).unwrap();
        let rhs = nrel_rhs(&blocks, &basis, wc.matrix()).unwrap();
        assert!((&rhs.b - &blocks.c * 2.0).norm() < 1e-13);
    }

    #[test]
    fn finite_differences_confirm_the_gram_rate() {
        // Evolve the raw Newtonian system with a tiny RK4 step and compare
        // the centered-Gram finite difference against the (NRel) blocks.
        let (sys, basis, pot, state) = random_setup(12, 3, 3, true, false);
        let h = 1e-5;
        let step = |s: &PhaseState<f64>, dt: f64| -> PhaseState<f64> {
            let deriv = |q: &DMatrix<f64>, p: &DMatrix<f64>| -> (DMatrix<f64>, DMatrix<f64>) {
                let wc = wintner_conley_full(&sys, q, &pot).unwrap();
                let m_inv: Vec<f64> = sys.masses().iter().map(|&m| 1.0 / m).collect();
                let mut dq = p.clone();
                for a in 0..sys.n() {
                    for i in 0..sys.d() {
                        dq[(i, a)] = p[(i, a)] * m_inv[a];
                    }
                }
                (dq, -(q * wc.matrix()))
            };
            let (k1q, k1p) = deriv(s.q(), s.p());
            let (k2q, k2p) = deriv(&(s.q() + &k1q * (dt / 2.0)), &(s.p() + &k1p * (dt / 2.0)));
            let (k3q, k3p) = deriv(&(s.q() + &k2q * (dt / 2.0)), &(s.p() + &k2p * (dt / 2.0)));
            let (k4q, k4p) = deriv(&(s.q() + &k3q * dt), &(s.p() + &k3p * dt));
            PhaseState::new(
                s.q() + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (dt / 6.0),
                s.p() + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (dt / 6.0),
            )
            .unwrap()
        };
        let plus = center(&sys, &step(&state, h), &basis).unwrap();
        let minus = center(&sys, &step(&state, -h), &basis).unwrap();
        let g_plus = GramElement::from_state(&plus);
        let g_minus = GramElement::from_state(&minus);
        let fd = (g_plus.g() - g_minus.g()) / (2.0 * h);

        let z = center(&sys, &state, &basis).unwrap();
        let blocks = BlockGram::from_state(&z);
        let wc = wintner_conley_reduced(&basis, &blocks.b, &pot).unwrap();
        let rhs = nrel_rhs(&blocks, &basis, wc.matrix()).unwrap().assemble();
        let scale = rhs.norm().max(1.0);
        assert!(
            (&fd - &rhs).norm() / scale < 1e-7,
            "finite-difference defect {:.3e}",
            (&fd - &rhs).norm() / scale
        );
    }

    #[test]
    fn hat_dynamics_and_r_rate() {
        let (sys, _basis, pot, state) = random_setup(13, 4, 3, true, false);
        let hat = hat_transform(&sys, &state, &pot).unwrap();

        // p̂̇ = −q̂ Â must reproduce the raw force law ṗ = −q A, re-weighted.
        let wc = wintner_conley_full(&sys, state.q(), &pot).unwrap();
        let raw_force = -(state.q() * wc.matrix());
        let (dq_hat, dp_hat) = hat.rhs();
        assert_eq!(dq_hat, *hat.p_hat());
        for a in 0..sys.n() {
            let s = sys.masses()[a].sqrt();
            for i in 0..sys.d() {
                let expect = raw_force[(i, a)] / s;
                assert!((dp_hat[(i, a)] - expect).abs() < 1e-12 * (1.0 + expect.abs()));
            }
        }

        // Finite-difference Ṙ along the hat flow vs ½[Â, B].
        let h = 1e-6;
        let r_of = |q_hat: &DMatrix<f64>, p_hat: &DMatrix<f64>| -> DMatrix<f64> {
            let cross = q_hat.transpose() * p_hat;
            asym_part(&cross)
        };
        // One Euler half-step forward/backward is enough at O(h²) accuracy
        // for the central difference (Â is refreshed at the base point only;
        // the force variation enters at O(h²) and cancels in the difference).
        let qf = hat.q_hat() + hat.p_hat() * h;
        let pf = hat.p_hat() - hat.q_hat() * hat.a_hat() * h;
        let qb = hat.q_hat() - hat.p_hat() * h;
        let pb = hat.p_hat() + hat.q_hat() * hat.a_hat() * h;
        let fd = (r_of(&qf, &pf) - r_of(&qb, &pb)) / (2.0 * h);
        let rate = hat.r_rate();
        assert!(
            (&fd - &rate).norm() < 1e-6 * rate.norm().max(1.0),
            "Ṙ defect {:.3e}",
            (&fd - &rate).norm()
        );

        // The ½ matters: the unhalved commutator is wrong by a factor 2.
        let b = hat.q_hat().transpose() * hat.q_hat();
        let full = hat.a_hat() * &b - &b * hat.a_hat();
        assert!((&fd - &full).norm() > 0.4 * full.norm());
    }

    #[test]
    fn hat_gram_annihilates_the_mass_vector_after_centering() {
        let (sys, basis, pot, state) = random_setup(14, 5, 3, false, false);
        let z = center(&sys, &state, &basis).unwrap();
        let centered_raw = reconstruct(&sys, &basis, &z).unwrap();
        let hat = hat_transform(&sys, &centered_raw, &pot).unwrap();
        let gram = hat.gram();
        let n = sys.n();
        let mut w2 = nalgebra::DVector::<f64>::zeros(2 * n);
        w2.rows_mut(0, n).copy_from(hat.w());
        w2.rows_mut(n, n).copy_from(hat.w());
        assert!((&gram * &w2).norm() < 1e-12 * gram.norm().max(1.0));

        // Before centering the kernel relation fails for generic states.
        let hat_raw = hat_transform(&sys, &state, &pot).unwrap();
        let gram_raw = hat_raw.gram();
        assert!((&gram_raw * &w2).norm() > 1e-6);
    }

    #[test]
    fn equivalence_report_over_a_batch() {
        let n = 3;
        let sys = MassSystem::new(3, vec![1.0; n]).unwrap();
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let mut rng = sampling::rng(15);
        let states: Vec<PhaseState<f64>> = (0..20)
            .map(|_| {
                PhaseState::new(
                    sampling::gaussian_matrix(&mut rng, 3, n),
                    sampling::gaussian_matrix(&mut rng, 3, n),
                )
                .unwrap()
            })
            .collect();
        let report = verify_equivalence(&sys, &basis, &pot, &states).unwrap();
        assert_eq!(report.cases, 20);
        assert!(report.max_nrel_residual < 1e-10, "{:?}", report);
        assert!(report.max_topleft_residual < 1e-12, "{:?}", report);
        assert!(report.max_kernel_residual < 1e-10, "{:?}", report);
    }
}
