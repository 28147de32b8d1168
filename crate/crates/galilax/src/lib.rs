//! Galilean-invariant reduction of the Newtonian n-body problem.
//!
//! For `n` bodies in dimension `d`, quotienting by translations and Galilean
//! boosts (via mass-weighted Jacobi coordinates) leaves a matrix phase space
//! of states `Z = (X | Y) ∈ R^{d×(2n−2)}`. On it the equations of motion take
//! the Lax-like form
//!
//! ```text
//!     Ż = −Z P(b),        P = J S,   S = diag(M̃⁻¹, Ã(b)),
//!     K̇ = [P, K],         K = J G,   G = ZᵀZ,
//! ```
//!
//! where `J = (0 I; −I 0)` is the standard symplectic form on `R^{2n−2}`,
//! `M̃` the reduced mass matrix, `Ã(b)` the reduced Wintner–Conley force
//! matrix (a function of the position Gram block `b = XᵀX` alone), and
//! `G = ZᵀZ` the full Gram matrix. `G ↦ K = JG` identifies positive
//! semidefinite matrices of rank ≤ d with a cone inside `sp(2n−2)*`, so the
//! flow of `K` is a curve of coadjoint orbits and its spectrum is conserved.
//!
//! The rotation-invariant and frame-covariant halves of the state are the two
//! momentum maps
//!
//! ```text
//!     G = ZᵀZ   (invariants of the O(d) action),
//!     L = Z J Zᵀ (angular momentum bivector, equivariant under O(d)),
//! ```
//!
//! which share their nonzero spectrum: `tr Lᵏ = tr Kᵏ` for all k ≥ 1.
//!
//! What the crate provides, module by module:
//!
//! - [`configuration`]: mass systems, mass-weighted Jacobi bases, centering
//!   of raw states into `Z`, and exact reconstruction.
//! - [`forces`]: Wintner–Conley force matrices `A` (full) and `Ã` (reduced)
//!   for potentials that depend on positions only through squared mutual
//!   distances; the Lax generator `P = JS`; reduced energy.
//! - [`dynamics`]: fixed-step RK4 and adaptive embedded RK45 integration of
//!   the `Z`-flow and the isospectral `K`-flow, with conservation
//!   diagnostics (energy, ‖L‖, Casimir traces).
//! - [`reduction`]: the two momentum maps, spectral trace identities, and
//!   membership of `G` in the rank-≤ d positive cone.
//! - [`normal_form`]: spectral invariants `(p, q, ω²₁ ≥ … ≥ ω²_p)` of a
//!   state, symplectic normal forms of `G`, and the constructive Xu
//!   factorization `Z = Q D T⁻¹` with `Q` orthogonal and `T` symplectic.
//! - [`orbit_catalog`]: coadjoint orbit dimensions and isotropy groups per
//!   signature, closure stratification, the tabulated catalogs for n = 3, 4,
//!   and the spatial (d = 3) reduced-space report.
//! - [`ac_bridge`]: the block form of the Gram flow (relative equations of
//!   motion), and the mass-metric "hat" change of variables that embeds the
//!   unreduced problem in the same framework.
//! - [`sampling`]: seeded, reproducible random states, orthogonal and
//!   symplectic matrices for property tests and verification suites.
//!
//! All core types are generic over the scalar via the [`Real`] trait
//! (`f64` by default, `f32` supported); concrete aliases such as
//! [`MassSystem64`] are exported at the crate root.
//!
//! # Example
//!
//! Centering a two-body state and inspecting its invariants:
//!
//! ```
//! use galilax::configuration::{build_jacobi_basis, center, MassSystem, PhaseState};
//! use galilax::normal_form::invariants_from_z;
//! use nalgebra::DMatrix;
//!
//! let sys = MassSystem::new(3, vec![1.0, 1.0]).unwrap();
//! let basis = build_jacobi_basis(&sys, true).unwrap();
//! // circular orbit of separation 1 in the xy-plane
//! let q = DMatrix::from_column_slice(3, 2, &[0.5, 0.0, 0.0, -0.5, 0.0, 0.0]);
//! let half = f64::sqrt(2.0) / 2.0 / 2.0;
//! let p = DMatrix::from_column_slice(3, 2, &[0.0, half * 2.0, 0.0, 0.0, -half * 2.0, 0.0]);
//! let z = center(&sys, &PhaseState::new(q, p).unwrap(), &basis).unwrap();
//! let sig = invariants_from_z(&z, 1e-10).unwrap();
//! assert_eq!((sig.p, sig.q), (1, 0)); // planar two-body motion: one oscillator pair
//! ```

pub mod ac_bridge;
pub mod configuration;
pub mod dynamics;
pub mod forces;
mod linalg;
pub mod normal_form;
pub mod orbit_catalog;
pub mod reduction;
pub mod sampling;
pub mod tolerances;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Scalar trait unifying the nalgebra and num-traits requirements of the
/// crate: a copyable real field with primitive conversions and the usual
/// constants. Implemented by `f32` and `f64` via the blanket impl.
pub trait Real:
    Copy
    + nalgebra::RealField
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::FloatConst
{
    /// Lossless-enough conversion from an `f64` constant (tolerances,
    /// coefficients). Panics only if the scalar cannot represent finite
    /// doubles at all, which no supported scalar triggers.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant must convert into the scalar type")
    }

    /// Conversion from a usize index/count.
    fn of_usize(k: usize) -> Self {
        Self::from_usize(k).expect("usize must convert into the scalar type")
    }
}

impl<T> Real for T where
    T: Copy
        + nalgebra::RealField
        + num_traits::FromPrimitive
        + num_traits::ToPrimitive
        + num_traits::FloatConst
{
}

/// Default-precision aliases for the main types.
pub type MassSystem64 = configuration::MassSystem<f64>;
pub type PhaseState64 = configuration::PhaseState<f64>;
pub type JacobiBasis64 = configuration::JacobiBasis<f64>;
pub type CenteredState64 = configuration::CenteredState<f64>;
pub type Potential64 = forces::Potential<f64>;
pub type GramElement64 = reduction::GramElement<f64>;
pub type AngularMomentum64 = reduction::AngularMomentum<f64>;
pub type InvariantSignature64 = normal_form::InvariantSignature<f64>;
pub type XuFactorization64 = normal_form::XuFactorization<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;

/// Single-precision aliases (compile-time supported; the numerically
/// demanding verification suites are double-precision).
pub type MassSystem32 = configuration::MassSystem<f32>;
pub type PhaseState32 = configuration::PhaseState<f32>;
pub type JacobiBasis32 = configuration::JacobiBasis<f32>;
pub type CenteredState32 = configuration::CenteredState<f32>;

pub use reduction::standard_j;
