//! Mass systems, mass-weighted Jacobi bases, and the Galilean centering map.
//!
//! A raw state of `n` bodies in dimension `d` is a pair of `d×n` matrices
//! `(q, p)` whose columns are positions and linear momenta. Quotienting by
//! translations and Galilean boosts is done in two steps:
//!
//! 1. subtract the center of mass from `q` and distribute the total momentum
//!    mass-proportionally out of `p`;
//! 2. change to a mass-orthogonal Jacobi basis: a matrix `T` with rows
//!    `E_1, …, E_n` such that `⟨E_i, E_j⟩_M = Σ_a m_a E_i[a] E_j[a] = 0` for
//!    `i ≠ j` and `E_n ∝ (1, …, 1)`.
//!
//! Writing `q = Q T` (so `Q = q T⁻¹` holds column-wise), the k-th Jacobi
//! vector here is `Q_k = cm(q_1..q_k) − q_{k+1}`, the center of mass of the
//! first k bodies minus body k+1; `Q_n` is the center of mass itself and
//! vanishes after centering. The Gram identity `T M Tᵀ = diag(μ_1, …, μ_n)`
//! holds exactly with the classical reduced masses
//! `μ_k = M_k m_{k+1} / M_{k+1}` (`M_k = m_1 + … + m_k`) and `μ_n = M_n`.
//!
//! Dropping the last column of `Q` (and of the conjugate momenta
//! `Y = p Tᵀ`) yields the reduced state `Z = (X | Y) ∈ R^{d×(2n−2)}` on
//! which the rest of the crate operates. In the *normalized* basis the rows
//! are rescaled by `1/√μ_k` so that `T M Tᵀ = I` and the reduced kinetic
//! energy is `½ tr(Y Yᵀ)`.

use crate::{Error, Real, Result};
use nalgebra::{DMatrix, DVector};

/// A collection of `n ≥ 2` point masses living in dimension `d ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassSystem<T: Real = f64> {
    d: usize,
    masses: Vec<T>,
}

impl<T: Real> MassSystem<T> {
    /// Validates and stores the system. Masses must be finite and strictly
    /// positive; at least two bodies are required for any reduction.
    pub fn new(d: usize, masses: Vec<T>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("spatial dimension d must be ≥ 1".into()));
        }
        if masses.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 bodies, got {}",
                masses.len()
            )));
        }
        for (a, &m) in masses.iter().enumerate() {
            if !m.is_finite() || m <= T::zero() {
                return Err(Error::InvalidInput(format!(
                    "mass of body {a} must be finite and > 0"
                )));
            }
        }
        Ok(Self { d, masses })
    }

    /// Number of bodies.
    pub fn n(&self) -> usize {
        self.masses.len()
    }

    /// Spatial dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// The masses, in body order.
    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    /// Total mass `M = Σ m_a`.
    pub fn total_mass(&self) -> T {
        self.masses.iter().copied().fold(T::zero(), |s, m| s + m)
    }

    /// The diagonal mass matrix `M = diag(m_1, …, m_n)`.
    pub fn mass_matrix(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&DVector::from_vec(self.masses.clone()))
    }
}

/// Mass inner product `⟨u, v⟩_M = Σ_a m_a u_a v_a` on label space.
pub fn mass_inner<T: Real>(sys: &MassSystem<T>, u: &[T], v: &[T]) -> Result<T> {
    if u.len() != sys.n() || v.len() != sys.n() {
        return Err(Error::InvalidInput(format!(
            "mass inner product needs vectors of length n = {}",
            sys.n()
        )));
    }
    Ok(sys
        .masses()
        .iter()
        .zip(u.iter().zip(v.iter()))
        .fold(T::zero(), |s, (&m, (&a, &b))| s + m * a * b))
}

/// A raw (unreduced) state: positions and momenta as `d×n` column matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState<T: Real = f64> {
    q: DMatrix<T>,
    p: DMatrix<T>,
}

impl<T: Real> PhaseState<T> {
    /// Positions and momenta must have identical shapes.
    pub fn new(q: DMatrix<T>, p: DMatrix<T>) -> Result<Self> {
        if q.shape() != p.shape() {
            return Err(Error::InvalidInput(format!(
                "position block is {:?} but momentum block is {:?}",
                q.shape(),
                p.shape()
            )));
        }
        if q.ncols() < 2 || q.nrows() == 0 {
            return Err(Error::InvalidInput(
                "state must hold at least two bodies in dimension ≥ 1".into(),
            ));
        }
        Ok(Self { q, p })
    }

    /// Position columns.
    pub fn q(&self) -> &DMatrix<T> {
        &self.q
    }

    /// Momentum columns.
    pub fn p(&self) -> &DMatrix<T> {
        &self.p
    }
}

/// A mass-orthogonal Jacobi basis for a given mass system.
///
/// Stores the full `n×n` row matrix `T` (rows `E_k`), its exact analytic
/// inverse, and the reduced masses `μ_k` appearing in
/// `T M Tᵀ = diag(μ_1, …, μ_{n−1}, μ_n)`. In normalized form the rows are
/// scaled so all `μ_k = 1`. The constructing mass vector is kept so force
/// reductions can form pair couplings without a separate `MassSystem`.
#[derive(Debug, Clone)]
pub struct JacobiBasis<T: Real = f64> {
    t: DMatrix<T>,
    t_inv: DMatrix<T>,
    reduced: Vec<T>,
    normalized: bool,
    masses: Vec<T>,
    /// `u^{(ab)}` = first n−1 components of `T (e_a − e_b)` for each pair
    /// a < b; the last component is exactly zero because `E_n ∝ (1,…,1)`.
    pair_vectors: Vec<DVector<T>>,
}

impl<T: Real> JacobiBasis<T> {
    /// The basis matrix `T` (n×n, rows `E_k`).
    pub fn t(&self) -> &DMatrix<T> {
        &self.t
    }

    /// The exact inverse `T⁻¹` (columns are the Jacobi-vector functionals).
    pub fn t_inv(&self) -> &DMatrix<T> {
        &self.t_inv
    }

    /// Reduced masses `μ_1, …, μ_{n−1}` (all ones when normalized).
    pub fn reduced_masses(&self) -> &[T] {
        &self.reduced
    }

    /// Whether rows were rescaled to make `T M Tᵀ = I`.
    pub fn normalized(&self) -> bool {
        self.normalized
    }

    /// Number of bodies.
    pub fn n(&self) -> usize {
        self.t.nrows()
    }

    /// Reduced degree count `m = n − 1`.
    pub fn m(&self) -> usize {
        self.n() - 1
    }

    /// The masses the basis was built from.
    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    /// Reduced mass matrix `M̃ = diag(μ_1, …, μ_{n−1})`.
    pub fn m_tilde(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&DVector::from_vec(self.reduced.clone()))
    }

    /// Pair vector `u^{(ab)}` with `q_a − q_b = X u^{(ab)}` and
    /// `r²_ab = u^{(ab)ᵀ} b u^{(ab)}`. Requires `a < b < n`.
    pub fn pair_vector(&self, a: usize, b: usize) -> &DVector<T> {
        assert!(a < b && b < self.n(), "pair_vector needs a < b < n");
        &self.pair_vectors[pair_index(self.n(), a, b)]
    }
}

/// Flat index of the pair (a, b), a < b, in row-major upper-triangular order.
pub(crate) fn pair_index(n: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b && b < n);
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

/// Builds the Jacobi basis for a mass system.
///
/// Construction: the inverse `V = T⁻¹` is assembled column-wise from the
/// Jacobi-vector functionals `v_k = cmw(1..k) − e_{k+1}` (center-of-mass
/// weights of the first k bodies minus body k+1) and `v_n = cmw(1..n)`; the
/// identity `Vᵀ M⁻¹ V = diag(1/μ_k)` then gives the exact analytic inverse
/// `T = diag(μ) Vᵀ M⁻¹` without any numerical inversion. For two equal
/// masses the normalized rows are `E₁ = (1/√2, −1/√2)`, `E₂ = (1/√2, 1/√2)`.
pub fn build_jacobi_basis<T: Real>(sys: &MassSystem<T>, normalized: bool) -> Result<JacobiBasis<T>> {
    let n = sys.n();
    let masses = sys.masses();

    // Partial sums M_k = m_1 + … + m_k.
    let mut partial = Vec::with_capacity(n);
    let mut acc = T::zero();
    for &m in masses {
        acc += m;
        partial.push(acc);
    }
    let total = partial[n - 1];

    // V = T⁻¹ by columns.
    let mut v = DMatrix::<T>::zeros(n, n);
    for k in 0..n - 1 {
        for a in 0..=k {
            v[(a, k)] = masses[a] / partial[k];
        }
        v[(k + 1, k)] = -T::one();
    }
    for a in 0..n {
        v[(a, n - 1)] = masses[a] / total;
    }

    // Reduced masses: μ_k = M_k m_{k+1} / M_{k+1}, μ_n = M.
    let mut mu = Vec::with_capacity(n);
    for k in 0..n - 1 {
        mu.push(partial[k] * masses[k + 1] / partial[k + 1]);
    }
    mu.push(total);

    // T = diag(μ) Vᵀ M⁻¹: E_k[a] = μ_k v[(a,k)] / m_a.
    let mut t = DMatrix::<T>::zeros(n, n);
    for k in 0..n {
        for a in 0..n {
            t[(k, a)] = mu[k] * v[(a, k)] / masses[a];
        }
    }

    let mut t_inv = v;
    if normalized {
        // Scale rows of T by 1/√μ_k and columns of T⁻¹ by √μ_k.
        for k in 0..n {
            let s = mu[k].sqrt();
            for a in 0..n {
                t[(k, a)] /= s;
                t_inv[(a, k)] *= s;
            }
        }
    }
    let reduced = if normalized {
        vec![T::one(); n - 1]
    } else {
        mu[..n - 1].to_vec()
    };

    // Pair vectors u^{(ab)} = first n−1 components of T (e_a − e_b).
    let mut pair_vectors = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            let mut u = DVector::<T>::zeros(n - 1);
            for k in 0..n - 1 {
                u[k] = t[(k, a)] - t[(k, b)];
            }
            pair_vectors.push(u);
        }
    }

    Ok(JacobiBasis {
        t,
        t_inv,
        reduced,
        normalized,
        masses: masses.to_vec(),
        pair_vectors,
    })
}

/// A centered, reduced state `Z = (X | Y) ∈ R^{d×2m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredState<T: Real = f64> {
    z: DMatrix<T>,
}

impl<T: Real> CenteredState<T> {
    /// Wraps a matrix with an even number of columns.
    pub fn new(z: DMatrix<T>) -> Result<Self> {
        if z.ncols() == 0 || z.ncols() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "a centered state needs an even, positive column count, got {}",
                z.ncols()
            )));
        }
        Ok(Self { z })
    }

    /// Assembles `Z = (X | Y)` from equally shaped position and momentum blocks.
    pub fn from_blocks(x: &DMatrix<T>, y: &DMatrix<T>) -> Result<Self> {
        if x.shape() != y.shape() {
            return Err(Error::InvalidInput(
                "X and Y blocks must have identical shapes".into(),
            ));
        }
        let (d, m) = x.shape();
        let mut z = DMatrix::<T>::zeros(d, 2 * m);
        z.view_mut((0, 0), (d, m)).copy_from(x);
        z.view_mut((0, m), (d, m)).copy_from(y);
        Self::new(z)
    }

    /// The full `d×2m` matrix.
    pub fn z(&self) -> &DMatrix<T> {
        &self.z
    }

    /// Number of Jacobi degrees `m = n − 1`.
    pub fn m(&self) -> usize {
        self.z.ncols() / 2
    }

    /// Spatial dimension `d`.
    pub fn d(&self) -> usize {
        self.z.nrows()
    }

    /// Position block `X` (first m columns).
    pub fn x(&self) -> DMatrix<T> {
        self.z.view((0, 0), (self.d(), self.m())).into_owned()
    }

    /// Momentum block `Y` (last m columns).
    pub fn y(&self) -> DMatrix<T> {
        self.z.view((0, self.m()), (self.d(), self.m())).into_owned()
    }
}

fn check_state_shape<T: Real>(sys: &MassSystem<T>, state: &PhaseState<T>) -> Result<()> {
    if state.q().shape() != (sys.d(), sys.n()) {
        return Err(Error::InvalidInput(format!(
            "state shape {:?} does not match system (d, n) = ({}, {})",
            state.q().shape(),
            sys.d(),
            sys.n()
        )));
    }
    Ok(())
}

fn check_basis_match<T: Real>(sys: &MassSystem<T>, basis: &JacobiBasis<T>) -> Result<()> {
    if basis.n() != sys.n() || basis.masses() != sys.masses() {
        return Err(Error::InvalidInput(
            "Jacobi basis was built for a different mass system".into(),
        ));
    }
    Ok(())
}

/// Centers a raw state and expresses it in the Jacobi basis.
///
/// Subtracts the center of mass from positions and the mass-proportional
/// share of the total momentum from each body, then forms
/// `X = (q_c T⁻¹)` and `Y = (p_c Tᵀ)`, dropping the exactly-vanishing last
/// columns. The output is invariant under translations and boosts of the
/// input.
pub fn center<T: Real>(
    sys: &MassSystem<T>,
    state: &PhaseState<T>,
    basis: &JacobiBasis<T>,
) -> Result<CenteredState<T>> {
    check_state_shape(sys, state)?;
    check_basis_match(sys, basis)?;
    let (d, n) = (sys.d(), sys.n());
    let m_tot = sys.total_mass();

    // Center of mass and total momentum.
    let mut cm = DVector::<T>::zeros(d);
    let mut ptot = DVector::<T>::zeros(d);
    for a in 0..n {
        let ma = sys.masses()[a];
        for i in 0..d {
            cm[i] += ma * state.q()[(i, a)];
            ptot[i] += state.p()[(i, a)];
        }
    }
    cm /= m_tot;

    let mut qc = state.q().clone();
    let mut pc = state.p().clone();
    for a in 0..n {
        let share = sys.masses()[a] / m_tot;
        for i in 0..d {
            qc[(i, a)] -= cm[i];
            pc[(i, a)] -= share * ptot[i];
        }
    }

    let q_full = &qc * basis.t_inv(); // Jacobi vectors, last column ≈ 0
    let y_full = &pc * basis.t().transpose(); // conjugate momenta, last column ≈ 0
    let x = q_full.view((0, 0), (d, n - 1)).into_owned();
    let y = y_full.view((0, 0), (d, n - 1)).into_owned();
    CenteredState::from_blocks(&x, &y)
}

/// Reconstructs the unique centered raw state from a reduced one:
/// `q = X T̃` and `p = Y M̃⁻¹ T̃ M`, where `T̃` is the first n−1 rows of `T`.
/// The output has exactly zero center of mass and total momentum (up to
/// rounding), and `center ∘ reconstruct` is the identity on `Z`.
pub fn reconstruct<T: Real>(
    sys: &MassSystem<T>,
    basis: &JacobiBasis<T>,
    z: &CenteredState<T>,
) -> Result<PhaseState<T>> {
    check_basis_match(sys, basis)?;
    let (d, n, m) = (sys.d(), sys.n(), basis.m());
    if z.d() != d || z.m() != m {
        return Err(Error::InvalidInput(format!(
            "reduced state is {}×{} but the system needs {}×{}",
            z.d(),
            2 * z.m(),
            d,
            2 * m
        )));
    }
    let t_rows = basis.t().view((0, 0), (m, n)).into_owned();
    let q = z.x() * &t_rows;

    // p = Y M̃⁻¹ T̃ M, assembled column-by-column to stay exact about the
    // diagonal scalings.
    let mut ym = z.y();
    for k in 0..m {
        let mu = basis.reduced_masses()[k];
        for i in 0..d {
            ym[(i, k)] /= mu;
        }
    }
    let mut p = ym * &t_rows;
    for a in 0..n {
        let ma = sys.masses()[a];
        for i in 0..d {
            p[(i, a)] *= ma;
        }
    }
    PhaseState::new(q, p)
}

/// Reduced kinetic energy `½ tr(Y M̃⁻¹ Yᵀ) = ½ Σ_k |Y_k|²/μ_k`.
pub fn reduced_kinetic_energy<T: Real>(basis: &JacobiBasis<T>, z: &CenteredState<T>) -> T {
    let y = z.y();
    let mut ke = T::zero();
    for k in 0..z.m() {
        let col = y.column(k);
        ke += col.dot(&col) / basis.reduced_masses()[k];
    }
    ke * T::of(0.5)
}
