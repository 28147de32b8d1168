//! Pair potentials, Wintner–Conley force matrices, and the Lax generator.
//!
//! For a translation-invariant pair potential `W(q) = Σ_{a<b} W_ab(r²_ab)`
//! with `r_ab = |q_a − q_b|`, the force field organizes into a symmetric
//! matrix. Writing `γ_ab = −2 ∂W_ab/∂r²_ab` (non-negative for attractive
//! interactions), the *Wintner–Conley matrix*
//!
//! ```text
//! A = Σ_{a<b} γ_ab (e_a − e_b)(e_a − e_b)ᵀ
//! ```
//!
//! satisfies `∇U = −q A` where `U = −W` is minus the potential energy, i.e.
//! Newton's equations read `q̈ M = −q A`. Its rows and columns sum to zero,
//! so `A` descends through any mass-orthogonal Jacobi basis: with
//! `u^{(ab)} = first m components of T(e_a − e_b)` the reduced matrix is
//! exactly
//!
//! ```text
//! Ã = Σ_{a<b} γ_ab u^{(ab)} u^{(ab)ᵀ}  ∈ symm(m),   m = n − 1,
//! ```
//!
//! and the reduced equations of motion become linear in the state with
//! state-dependent coefficients: `Ẋ = Y M̃⁻¹`, `Ẏ = −X Ã`, equivalently
//! `Ż = −Z P` with the Hamiltonian-linear generator `P = J S`,
//! `S = diag(M̃⁻¹, Ã)` — an element of the symplectic Lie algebra `sp(2m)`.
//!
//! For Newtonian gravity `W_ab = G m_a m_b / r_ab` one has
//! `γ_ab = G m_a m_b / r³_ab ≥ 0`; e.g. two unit masses at distance 2 with
//! `G = 1` give `A = [[1/8, −1/8], [−1/8, 1/8]]`.

use crate::configuration::{pair_index, CenteredState, JacobiBasis, MassSystem};
use crate::tolerances;
use crate::{Error, Real, Result};
use nalgebra::DMatrix;
use std::sync::Arc;

/// A symmetric table of per-pair values, indexed by body pairs `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable<T: Real = f64> {
    n: usize,
    vals: Vec<T>,
}

impl<T: Real> PairTable<T> {
    /// All-zero table for `n` bodies.
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            vals: vec![T::zero(); n * (n - 1) / 2],
        }
    }

    /// Builds a table by evaluating `f(a, b)` on every pair a < b.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut t = Self::zeros(n);
        for a in 0..n {
            for b in a + 1..n {
                t.set(a, b, f(a, b));
            }
        }
        t
    }

    /// Number of bodies.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Value of the pair `(a, b)`; order of the indices does not matter.
    pub fn get(&self, a: usize, b: usize) -> T {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.vals[pair_index(self.n, a, b)]
    }

    /// Sets the pair `(a, b)`.
    pub fn set(&mut self, a: usize, b: usize, v: T) {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.vals[pair_index(self.n, a, b)] = v;
    }

    /// Iterates over `(a, b, value)` in lexicographic pair order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |a| (a + 1..n).map(move |b| (a, b, self.get(a, b))))
    }
}

/// Per-pair evaluation of a custom potential: given masses and squared
/// distances, return the total potential value `W` and the table of
/// derivatives `∂W_ab/∂r²_ab`.
pub type PairEvaluator<T> =
    Arc<dyn Fn(&[T], &PairTable<T>) -> (T, PairTable<T>) + Send + Sync>;

/// The supported interaction families.
#[derive(Clone)]
pub enum PotentialKind<T: Real = f64> {
    /// `W = Σ G m_a m_b / r_ab` (attractive, singular at collisions).
    NewtonianGravity {
        /// Gravitational constant `G > 0`.
        g: T,
    },
    /// `W = Σ coupling · m_a m_b · r_ab^alpha`.
    Homogeneous {
        /// Homogeneity degree `alpha` of the pair distance.
        alpha: T,
        /// Overall coupling strength.
        coupling: T,
    },
    /// User-supplied pair law.
    Custom {
        /// Evaluates `(W, ∂W/∂r²)` from masses and squared distances.
        evaluator: PairEvaluator<T>,
        /// Whether force evaluation degenerates as some `r_ab → 0`.
        singular_at_zero: bool,
    },
}

impl<T: Real> std::fmt::Debug for PotentialKind<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NewtonianGravity { g } => f.debug_struct("NewtonianGravity").field("g", g).finish(),
            Self::Homogeneous { alpha, coupling } => f
                .debug_struct("Homogeneous")
                .field("alpha", alpha)
                .field("coupling", coupling)
                .finish(),
            Self::Custom { singular_at_zero, .. } => f
                .debug_struct("Custom")
                .field("singular_at_zero", singular_at_zero)
                .finish(),
        }
    }
}

/// A pair potential together with an optional Plummer-type softening.
#[derive(Debug, Clone)]
pub struct Potential<T: Real = f64> {
    kind: PotentialKind<T>,
    softening: Option<T>,
}

impl<T: Real> Potential<T> {
    /// Newtonian gravity with constant `g`.
    pub fn newtonian(g: T) -> Result<Self> {
        if !g.is_finite() || g <= T::zero() {
            return Err(Error::InvalidInput("gravitational constant must be finite and > 0".into()));
        }
        Ok(Self {
            kind: PotentialKind::NewtonianGravity { g },
            softening: None,
        })
    }

    /// Homogeneous pair law `coupling · m_a m_b · r^alpha`.
    pub fn homogeneous(alpha: T, coupling: T) -> Result<Self> {
        if !alpha.is_finite() || !coupling.is_finite() {
            return Err(Error::InvalidInput("homogeneous parameters must be finite".into()));
        }
        Ok(Self {
            kind: PotentialKind::Homogeneous { alpha, coupling },
            softening: None,
        })
    }

    /// Custom pair law; `singular_at_zero` controls collision detection.
    pub fn custom(evaluator: PairEvaluator<T>, singular_at_zero: bool) -> Self {
        Self {
            kind: PotentialKind::Custom { evaluator, singular_at_zero },
            softening: None,
        }
    }

    /// Replaces every `r²` by `r² + ε²` before evaluation, removing the
    /// collision singularity (and the collision guard) for `ε > 0`.
    pub fn with_softening(mut self, epsilon: T) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= T::zero() {
            return Err(Error::InvalidInput("softening length must be finite and > 0".into()));
        }
        self.softening = Some(epsilon);
        Ok(self)
    }

    /// The interaction family.
    pub fn kind(&self) -> &PotentialKind<T> {
        &self.kind
    }

    /// The softening length, if any.
    pub fn softening(&self) -> Option<T> {
        self.softening
    }

    /// Whether an unsoftened evaluation degenerates at zero separation.
    ///
    /// For the homogeneous family the *pair coupling* `γ ∝ r^{α−2}`
    /// diverges for every `α < 2` except the constant case `α = 0`, so such
    /// exponents count as singular even when `W` itself stays bounded.
    pub fn singular_at_zero(&self) -> bool {
        if self.softening.is_some() {
            return false;
        }
        match &self.kind {
            PotentialKind::NewtonianGravity { .. } => true,
            PotentialKind::Homogeneous { alpha, coupling } => {
                *coupling != T::zero() && *alpha != T::zero() && *alpha < T::of(2.0)
            }
            PotentialKind::Custom { singular_at_zero, .. } => *singular_at_zero,
        }
    }

    /// Evaluates the potential value `W` and the derivative table
    /// `∂W_ab/∂r²_ab` on the given squared distances.
    ///
    /// Softening is applied first. If the potential is singular at zero
    /// separation, a pair with `r_ab < ctol · max_cd r_cd` (collision
    /// threshold `ctol` = [`tolerances::COLLISION_REL`]) aborts with
    /// [`Error::Singularity`].
    pub fn evaluate(&self, masses: &[T], r_sq: &PairTable<T>) -> Result<(T, PairTable<T>)> {
        if r_sq.n() != masses.len() {
            return Err(Error::InvalidInput(format!(
                "distance table is for {} bodies but {} masses were given",
                r_sq.n(),
                masses.len()
            )));
        }
        let mut table = r_sq.clone();
        if let Some(eps) = self.softening {
            let e2 = eps * eps;
            for (a, b, v) in r_sq.pairs() {
                table.set(a, b, v + e2);
            }
        }
        if self.singular_at_zero() {
            let mut max_sq = T::zero();
            let mut min_sq = T::of(f64::INFINITY);
            let mut min_pair = (0usize, 1usize);
            for (a, b, v) in table.pairs() {
                if v > max_sq {
                    max_sq = v;
                }
                if v < min_sq {
                    min_sq = v;
                    min_pair = (a, b);
                }
            }
            let threshold = tolerances::tol::<T>(tolerances::COLLISION_REL) * max_sq.sqrt();
            if min_sq.sqrt() <= threshold || max_sq == T::zero() {
                return Err(Error::Singularity {
                    a: min_pair.0,
                    b: min_pair.1,
                    separation: min_sq.sqrt().to_f64().unwrap_or(f64::NAN),
                    threshold: threshold.to_f64().unwrap_or(f64::NAN),
                    time: None,
                });
            }
        }

        match &self.kind {
            PotentialKind::NewtonianGravity { g } => {
                let mut w = T::zero();
                let mut dw = PairTable::zeros(table.n());
                for (a, b, r2) in table.pairs() {
                    let mm = *g * masses[a] * masses[b];
                    let r = r2.sqrt();
                    w += mm / r;
                    // d(r^{-1})/d(r²) = −½ r^{-3}
                    dw.set(a, b, -mm * T::of(0.5) / (r2 * r));
                }
                Ok((w, dw))
            }
            PotentialKind::Homogeneous { alpha, coupling } => {
                let mut w = T::zero();
                let mut dw = PairTable::zeros(table.n());
                let half_alpha = *alpha * T::of(0.5);
                for (a, b, r2) in table.pairs() {
                    let mm = *coupling * masses[a] * masses[b];
                    // r^alpha = (r²)^{α/2}; d/d(r²) = (α/2)(r²)^{α/2−1}.
                    w += mm * r2.powf(half_alpha);
                    if *alpha == T::zero() {
                        dw.set(a, b, T::zero());
                    } else {
                        dw.set(a, b, mm * half_alpha * r2.powf(half_alpha - T::one()));
                    }
                }
                Ok((w, dw))
            }
            PotentialKind::Custom { evaluator, .. } => {
                let (w, dw) = evaluator(masses, &table);
                if dw.n() != table.n() {
                    return Err(Error::InvalidInput(
                        "custom evaluator returned a table of the wrong size".into(),
                    ));
                }
                Ok((w, dw))
            }
        }
    }
}

/// Which label space a Wintner–Conley matrix acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// Body labels: `n×n`, rows and columns sum to zero.
    Full,
    /// Reduced Jacobi labels: `m×m = (n−1)×(n−1)`.
    Reduced,
}

/// A symmetric force matrix with its gauge tag.
#[derive(Debug, Clone, PartialEq)]
pub struct WintnerConley<T: Real = f64> {
    matrix: DMatrix<T>,
    gauge: Gauge,
}

impl<T: Real> WintnerConley<T> {
    /// The matrix itself.
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    /// Full (body-label) or reduced (Jacobi-label) gauge.
    pub fn gauge(&self) -> Gauge {
        self.gauge
    }
}

/// The position-block Gram matrix `b = Xᵀ X ∈ symm(m)` of a reduced state.
pub fn small_gram<T: Real>(z: &CenteredState<T>) -> DMatrix<T> {
    let x = z.x();
    x.transpose() * x
}

/// Squared pair distances `r²_ab = |q_a − q_b|²` from raw positions.
pub fn squared_distances_from_positions<T: Real>(q: &DMatrix<T>) -> PairTable<T> {
    let n = q.ncols();
    PairTable::from_fn(n, |a, b| {
        let mut s = T::zero();
        for i in 0..q.nrows() {
            let dq = q[(i, a)] - q[(i, b)];
            s += dq * dq;
        }
        s
    })
}

/// Squared pair distances recovered from the reduced Gram block:
/// `r²_ab = u^{(ab)ᵀ} b u^{(ab)}`.
pub fn squared_distances_from_b<T: Real>(
    basis: &JacobiBasis<T>,
    b: &DMatrix<T>,
) -> Result<PairTable<T>> {
    let m = basis.m();
    if b.shape() != (m, m) {
        return Err(Error::InvalidInput(format!(
            "Gram block must be {m}×{m}, got {:?}",
            b.shape()
        )));
    }
    let n = basis.n();
    Ok(PairTable::from_fn(n, |a, bb| {
        let u = basis.pair_vector(a, bb);
        (u.transpose() * b * u)[(0, 0)]
    }))
}

fn pair_couplings<T: Real>(
    masses: &[T],
    r_sq: &PairTable<T>,
    pot: &Potential<T>,
) -> Result<PairTable<T>> {
    let (_, dw) = pot.evaluate(masses, r_sq)?;
    // γ_ab = −2 ∂W/∂r²_ab.
    let minus_two = T::of(-2.0);
    Ok(PairTable::from_fn(masses.len(), |a, b| minus_two * dw.get(a, b)))
}

/// Full Wintner–Conley matrix on body labels.
///
/// For Newtonian gravity the off-diagonal entries are
/// `A_ab = −G m_a m_b / r³_ab` and the diagonal makes rows sum to zero.
pub fn wintner_conley_full<T: Real>(
    sys: &MassSystem<T>,
    q: &DMatrix<T>,
    pot: &Potential<T>,
) -> Result<WintnerConley<T>> {
    if q.shape() != (sys.d(), sys.n()) {
        return Err(Error::InvalidInput(format!(
            "positions must be {}×{}, got {:?}",
            sys.d(),
            sys.n(),
            q.shape()
        )));
    }
    let n = sys.n();
    let gamma = pair_couplings(sys.masses(), &squared_distances_from_positions(q), pot)?;
    let mut a = DMatrix::<T>::zeros(n, n);
    for (i, j, g) in gamma.pairs() {
        a[(i, j)] = -g;
        a[(j, i)] = -g;
        a[(i, i)] += g;
        a[(j, j)] += g;
    }
    Ok(WintnerConley { matrix: a, gauge: Gauge::Full })
}

/// Reduced Wintner–Conley matrix `Ã ∈ symm(m)` evaluated from the Gram
/// block `b` alone — the closed form `Ã = Σ γ_ab u^{(ab)} u^{(ab)ᵀ}`, which
/// agrees exactly with the congruence `T A Tᵀ` truncated to the first `m`
/// rows and columns.
pub fn wintner_conley_reduced<T: Real>(
    basis: &JacobiBasis<T>,
    b: &DMatrix<T>,
    pot: &Potential<T>,
) -> Result<WintnerConley<T>> {
    let m = basis.m();
    let r_sq = squared_distances_from_b(basis, b)?;
    let gamma = pair_couplings(basis.masses(), &r_sq, pot)?;
    let mut a = DMatrix::<T>::zeros(m, m);
    for (i, j, g) in gamma.pairs() {
        let u = basis.pair_vector(i, j);
        for r in 0..m {
            for c in 0..m {
                a[(r, c)] += g * u[r] * u[c];
            }
        }
    }
    Ok(WintnerConley { matrix: a, gauge: Gauge::Reduced })
}

/// The Lax generator `P = J S ∈ sp(2m)`, `S = diag(M̃⁻¹, Ã)`:
///
/// ```text
/// P = ( 0      Ã    )
///     ( −M̃⁻¹  0    )
/// ```
///
/// so that `Ż = −Z P` reproduces `Ẋ = Y M̃⁻¹`, `Ẏ = −X Ã`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxGenerator<T: Real = f64> {
    p: DMatrix<T>,
}

impl<T: Real> LaxGenerator<T> {
    /// The `2m×2m` matrix `P`.
    pub fn p(&self) -> &DMatrix<T> {
        &self.p
    }

    /// Symplectic-algebra defect `‖Pᵀ J + J P‖_∞` (zero whenever the
    /// diagonal blocks were assembled from symmetric data).
    pub fn sp_defect(&self) -> T {
        let two_m = self.p.nrows();
        let j = crate::reduction::standard_j::<T>(two_m);
        let def = self.p.transpose() * &j + &j * &self.p;
        def.iter().fold(T::zero(), |m, &v| if v.abs() > m { v.abs() } else { m })
    }
}

/// Assembles the Lax generator from a reduced force matrix and the reduced
/// masses. The force matrix must be in the reduced gauge and symmetric to
/// within [`tolerances::STRUCTURAL`] of its scale.
pub fn assemble_p<T: Real>(
    a_tilde: &WintnerConley<T>,
    reduced_masses: &[T],
) -> Result<LaxGenerator<T>> {
    if a_tilde.gauge() != Gauge::Reduced {
        return Err(Error::InvalidInput(
            "assemble_p needs a reduced-gauge force matrix".into(),
        ));
    }
    let m = reduced_masses.len();
    let a = a_tilde.matrix();
    if a.shape() != (m, m) {
        return Err(Error::InvalidInput(format!(
            "force matrix is {:?} but {m} reduced masses were given",
            a.shape()
        )));
    }
    for &mu in reduced_masses {
        if !mu.is_finite() || mu <= T::zero() {
            return Err(Error::InvalidInput("reduced masses must be positive".into()));
        }
    }
    let scale = a.iter().fold(T::one(), |s, &v| if v.abs() > s { v.abs() } else { s });
    let sym_defect = (a - a.transpose()).norm();
    if sym_defect > tolerances::tol::<T>(tolerances::STRUCTURAL) * scale {
        return Err(Error::InvalidInput(format!(
            "force matrix is not symmetric: defect {:.3e}",
            sym_defect.to_f64().unwrap_or(f64::NAN)
        )));
    }
    let mut p = DMatrix::<T>::zeros(2 * m, 2 * m);
    p.view_mut((0, m), (m, m)).copy_from(a);
    for k in 0..m {
        p[(m + k, k)] = -T::one() / reduced_masses[k];
    }
    Ok(LaxGenerator { p })
}

/// Total reduced energy `H = ½ tr(Y M̃⁻¹ Yᵀ) − W̃(b)` of a centered state.
pub fn energy<T: Real>(
    z: &CenteredState<T>,
    basis: &JacobiBasis<T>,
    pot: &Potential<T>,
) -> Result<T> {
    let ke = crate::configuration::reduced_kinetic_energy(basis, z);
    let b = small_gram(z);
    let r_sq = squared_distances_from_b(basis, &b)?;
    let (w, _) = pot.evaluate(basis.masses(), &r_sq)?;
    Ok(ke - w)
}

/// Energy recovered from a momentum-map value alone:
/// `H = ½ tr(M̃⁻¹ d) − W̃(b)` with `b, d` the diagonal blocks of `G`.
pub fn energy_from_gram<T: Real>(
    g: &DMatrix<T>,
    basis: &JacobiBasis<T>,
    pot: &Potential<T>,
) -> Result<T> {
    let m = basis.m();
    if g.shape() != (2 * m, 2 * m) {
        return Err(Error::InvalidInput(format!(
            "Gram matrix must be {}×{}, got {:?}",
            2 * m,
            2 * m,
            g.shape()
        )));
    }
    let mut ke = T::zero();
    for k in 0..m {
        ke += g[(m + k, m + k)] / basis.reduced_masses()[k];
    }
    ke *= T::of(0.5);
    let b = g.view((0, 0), (m, m)).into_owned();
    let b = (&b + b.transpose()) * T::of(0.5);
    let r_sq = squared_distances_from_b(basis, &b)?;
    let (w, _) = pot.evaluate(basis.masses(), &r_sq)?;
    Ok(ke - w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::{build_jacobi_basis, center, PhaseState};
    use crate::sampling;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
    }

    fn random_separated_positions(
        rng: &mut rand_chacha::ChaCha8Rng,
        d: usize,
        n: usize,
    ) -> DMatrix<f64> {
        loop {
            let q = sampling::gaussian_matrix(rng, d, n);
            let r = squared_distances_from_positions(&q);
            if r.pairs().all(|(_, _, v)| v > 0.05) {
                return q;
            }
        }
    }

    #[test]
    fn two_unit_masses_at_distance_two_newtonian() {
        let sys = MassSystem::new(3, vec![1.0, 1.0]).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let q = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
        let a = wintner_conley_full(&sys, &q, &pot).unwrap();
        // γ = G m₁ m₂ / r³ = 1/8: diagonal +1/8, off-diagonal −1/8.
        assert!(close(a.matrix()[(0, 0)], 0.125, 1e-15));
        assert!(close(a.matrix()[(0, 1)], -0.125, 1e-15));
        assert!(close(a.matrix()[(1, 0)], -0.125, 1e-15));
        assert!(close(a.matrix()[(1, 1)], 0.125, 1e-15));
    }

    #[test]
    fn rows_of_full_matrix_sum_to_zero() {
        let mut rng = sampling::rng(71);
        let masses: Vec<f64> = (0..5).map(|_| 0.2 + sampling::uniform(&mut rng)).collect();
        let sys = MassSystem::new(3, masses).unwrap();
        let pot = Potential::newtonian(2.0).unwrap();
        let q = random_separated_positions(&mut rng, 3, 5);
        let a = wintner_conley_full(&sys, &q, &pot).unwrap();
        let scale: f64 = a.matrix().iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..5 {
            let rs: f64 = (0..5).map(|j| a.matrix()[(i, j)]).sum();
            assert!(rs.abs() < 1e-14 * scale.max(1.0), "row {i} sums to {rs}");
        }
        let sym = (a.matrix() - a.matrix().transpose()).norm();
        assert_eq!(sym, 0.0, "construction must be exactly symmetric");
    }

    #[test]
    fn gradient_of_potential_matches_force_matrix() {
        // Central-difference check of ∇U = −q A (U = −W) for gravity and a
        // homogeneous law, over random well-separated configurations.
        let mut rng = sampling::rng(83);
        let pots = [
            Potential::newtonian(1.3).unwrap(),
            Potential::homogeneous(1.5, 0.7).unwrap(),
            Potential::homogeneous(-2.0, 0.4).unwrap(),
        ];
        for trial in 0..30 {
            let n = 3 + trial % 3;
            let d = 2 + trial % 2;
            let masses: Vec<f64> = (0..n).map(|_| 0.3 + sampling::uniform(&mut rng)).collect();
            let sys = MassSystem::new(d, masses.clone()).unwrap();
            let q = random_separated_positions(&mut rng, d, n);
            for pot in &pots {
                let a = wintner_conley_full(&sys, &q, pot).unwrap();
                let force = -&q * a.matrix(); // = ∇U = +∇W… sign: q̈M = −qA means force −qA? see below
                let h = 1e-5;
                for bdy in 0..n {
                    for i in 0..d {
                        let mut qp = q.clone();
                        let mut qm = q.clone();
                        qp[(i, bdy)] += h;
                        qm[(i, bdy)] -= h;
                        let wp = pot
                            .evaluate(&masses, &squared_distances_from_positions(&qp))
                            .unwrap()
                            .0;
                        let wm = pot
                            .evaluate(&masses, &squared_distances_from_positions(&qm))
                            .unwrap()
                            .0;
                        // Newton: ṗ = ∂W/∂q (force of W = −U), and ṗ = −(qA).
                        let grad_w = (wp - wm) / (2.0 * h);
                        assert!(
                            close(force[(i, bdy)], grad_w, 1e-6),
                            "component ({i},{bdy}): −qA = {} vs ∂W = {}",
                            force[(i, bdy)],
                            grad_w
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn reduced_matrix_agrees_with_congruence() {
        let mut rng = sampling::rng(97);
        for &normalized in &[true, false] {
            for _ in 0..10 {
                let n = 4;
                let masses: Vec<f64> = (0..n).map(|_| 0.4 + sampling::uniform(&mut rng)).collect();
                let sys = MassSystem::new(3, masses).unwrap();
                let basis = build_jacobi_basis(&sys, normalized).unwrap();
                let pot = Potential::newtonian(1.0).unwrap();
                let q = random_separated_positions(&mut rng, 3, n);
                let p = DMatrix::zeros(3, n);
                let z = center(&sys, &PhaseState::new(q.clone(), p).unwrap(), &basis).unwrap();

                let full = wintner_conley_full(&sys, &q, &pot).unwrap();
                let b = small_gram(&z);
                let red = wintner_conley_reduced(&basis, &b, &pot).unwrap();

                let cong = basis.t() * full.matrix() * basis.t().transpose();
                for i in 0..n - 1 {
                    for j in 0..n - 1 {
                        assert!(
                            close(red.matrix()[(i, j)], cong[(i, j)], 1e-11),
                            "({i},{j}): closed form {} vs congruence {}",
                            red.matrix()[(i, j)],
                            cong[(i, j)]
                        );
                    }
                }
                // The truncated row/column of the congruence vanishes.
                for k in 0..n {
                    assert!(cong[(n - 1, k)].abs() < 1e-12, "ghost row entry {}", cong[(n - 1, k)]);
                }
            }
        }
    }

    #[test]
    fn two_body_reduced_coupling_is_two_g_over_r_cubed() {
        // Equal unit masses, normalized basis: Ã = (2G/r³) as a 1×1 matrix.
        let sys = MassSystem::new(3, vec![1.0, 1.0]).unwrap();
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let g = 1.7;
        let r = 2.5;
        let pot = Potential::newtonian(g).unwrap();
        // b = r²/2 for the normalized separation coordinate X₁ = ρ/√2.
        let b = DMatrix::from_element(1, 1, r * r / 2.0);
        let a = wintner_conley_reduced(&basis, &b, &pot).unwrap();
        assert!(close(a.matrix()[(0, 0)], 2.0 * g / (r * r * r), 1e-14));
    }

    #[test]
    fn reduced_gradient_identity_by_finite_differences() {
        // ∇_X W̃(XᵀX) = −X Ã, checked by central differences in X.
        let mut rng = sampling::rng(101);
        let masses: Vec<f64> = (0..4).map(|_| 0.5 + sampling::uniform(&mut rng)).collect();
        let sys = MassSystem::new(3, masses.clone()).unwrap();
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let q = random_separated_positions(&mut rng, 3, 4);
        let z = center(
            &sys,
            &PhaseState::new(q, DMatrix::zeros(3, 4)).unwrap(),
            &basis,
        )
        .unwrap();
        let x = z.x();
        let w_of = |x: &DMatrix<f64>| {
            let b = x.transpose() * x;
            let r = squared_distances_from_b(&basis, &b).unwrap();
            pot.evaluate(&masses, &r).unwrap().0
        };
        let a = wintner_conley_reduced(&basis, &(x.transpose() * &x), &pot).unwrap();
        let expect = -&x * a.matrix();
        let h = 1e-5;
        for k in 0..3 {
            for i in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[(i, k)] += h;
                xm[(i, k)] -= h;
                let fd = (w_of(&xp) - w_of(&xm)) / (2.0 * h);
                assert!(close(fd, expect[(i, k)], 1e-6), "({i},{k}): fd {fd} vs {}", expect[(i, k)]);
            }
        }
    }

    #[test]
    fn lax_generator_blocks_and_sp_membership() {
        // Free motion: Ã = 0 and unit reduced masses give P = (0 0; −I 0).
        let a = WintnerConley { matrix: DMatrix::<f64>::zeros(2, 2), gauge: Gauge::Reduced };
        let p = assemble_p(&a, &[1.0, 1.0]).unwrap();
        let mut expect = DMatrix::zeros(4, 4);
        expect[(2, 0)] = -1.0;
        expect[(3, 1)] = -1.0;
        assert_eq!(p.p(), &expect);
        assert_eq!(p.sp_defect(), 0.0);

        // A generic symmetric Ã also lands exactly in sp(2m).
        let mut rng = sampling::rng(103);
        let s = sampling::gaussian_matrix(&mut rng, 3, 3);
        let sym = WintnerConley { matrix: &s + s.transpose(), gauge: Gauge::Reduced };
        let p = assemble_p(&sym, &[0.5, 1.5, 2.0]).unwrap();
        assert_eq!(p.sp_defect(), 0.0);
    }

    #[test]
    fn assemble_p_rejects_bad_inputs() {
        let asym = WintnerConley {
            matrix: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            gauge: Gauge::Reduced,
        };
        assert!(assemble_p(&asym, &[1.0, 1.0]).is_err());
        let full = WintnerConley { matrix: DMatrix::<f64>::zeros(2, 2), gauge: Gauge::Full };
        assert!(assemble_p(&full, &[1.0, 1.0]).is_err());
        let ok = WintnerConley { matrix: DMatrix::<f64>::zeros(2, 2), gauge: Gauge::Reduced };
        assert!(assemble_p(&ok, &[1.0, -1.0]).is_err());
    }

    #[test]
    fn circular_orbit_energy() {
        // Equal unit masses, G = 1, circular orbit at separation 1:
        // H = ½ μ v_rel² − G/r = ½·½·2 − 1 = −½.
        let (sys, state) = sampling::two_body_circular(1.0, 1.0);
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let z = center(&sys, &state, &basis).unwrap();
        let h = energy(&z, &basis, &pot).unwrap();
        assert!(close(h, -0.5, 1e-14), "H = {h}");
    }

    #[test]
    fn gram_energy_equals_state_energy() {
        let mut rng = sampling::rng(107);
        for &normalized in &[true, false] {
            let masses: Vec<f64> = (0..4).map(|_| 0.4 + sampling::uniform(&mut rng)).collect();
            let sys = MassSystem::new(3, masses).unwrap();
            let basis = build_jacobi_basis(&sys, normalized).unwrap();
            let pot = Potential::newtonian(1.0).unwrap();
            let q = random_separated_positions(&mut rng, 3, 4);
            let p = sampling::gaussian_matrix(&mut rng, 3, 4);
            let z = center(&sys, &PhaseState::new(q, p).unwrap(), &basis).unwrap();
            let h1 = energy(&z, &basis, &pot).unwrap();
            let g = z.z().transpose() * z.z();
            let h2 = energy_from_gram(&g, &basis, &pot).unwrap();
            assert!(close(h1, h2, 1e-12), "state {h1} vs gram {h2}");
        }
    }

    #[test]
    fn homogeneous_minus_one_matches_newtonian() {
        let mut rng = sampling::rng(109);
        let masses = vec![1.0, 2.0, 0.5];
        let sys = MassSystem::new(3, masses).unwrap();
        let q = random_separated_positions(&mut rng, 3, 3);
        let g = 1.9;
        let a1 = wintner_conley_full(&sys, &q, &Potential::newtonian(g).unwrap()).unwrap();
        let a2 = wintner_conley_full(&sys, &q, &Potential::homogeneous(-1.0, g).unwrap()).unwrap();
        assert!((a1.matrix() - a2.matrix()).norm() < 1e-13 * a1.matrix().norm());
    }

    #[test]
    fn custom_quartic_pair_law() {
        // W = Σ (r²)², so ∂W/∂r² = 2 r² and γ = −4 r².
        let eval: PairEvaluator<f64> = Arc::new(|_, r2| {
            let w = r2.pairs().map(|(_, _, v)| v * v).sum();
            let dw = PairTable::from_fn(r2.n(), |a, b| 2.0 * r2.get(a, b));
            (w, dw)
        });
        let pot = Potential::custom(eval, false);
        let sys = MassSystem::new(2, vec![1.0, 1.0]).unwrap();
        let q = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
        let a = wintner_conley_full(&sys, &q, &pot).unwrap();
        // r² = 4: γ = −2·(2·4) = −16 → off-diagonal +16.
        assert!(close(a.matrix()[(0, 1)], 16.0, 1e-14));
    }

    #[test]
    fn collision_raises_singularity() {
        let sys = MassSystem::new(3, vec![1.0, 1.0, 1.0]).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let q = DMatrix::from_column_slice(
            3,
            3,
            &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0],
        );
        let err = wintner_conley_full(&sys, &q, &pot).unwrap_err();
        match err {
            Error::Singularity { a, b, .. } => {
                assert_eq!((a, b), (0, 1));
            }
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn softening_removes_the_singularity() {
        let sys = MassSystem::new(3, vec![1.0, 1.0]).unwrap();
        let pot = Potential::newtonian(1.0).unwrap().with_softening(0.1).unwrap();
        let q = DMatrix::zeros(3, 2); // total collision
        let a = wintner_conley_full(&sys, &q, &pot).unwrap();
        // γ = 1/ε³ = 1000 at zero separation.
        assert!(close(a.matrix()[(0, 0)], 1000.0, 1e-12));
    }

    #[test]
    fn homogeneous_singularity_classification() {
        assert!(Potential::<f64>::newtonian(1.0).unwrap().singular_at_zero());
        assert!(Potential::<f64>::homogeneous(1.0, 1.0).unwrap().singular_at_zero());
        assert!(!Potential::<f64>::homogeneous(2.0, 1.0).unwrap().singular_at_zero());
        assert!(!Potential::<f64>::homogeneous(0.0, 1.0).unwrap().singular_at_zero());
        assert!(!Potential::<f64>::homogeneous(-1.0, 0.0).unwrap().singular_at_zero());
        assert!(!Potential::<f64>::newtonian(1.0)
            .unwrap()
            .with_softening(0.2)
            .unwrap()
            .singular_at_zero());
    }
}
