//! Central numerical tolerances.
//!
//! Every threshold used by the library lives here with a short justification,
//! so tests, verification suites, and library internals agree on one set of
//! numbers. All values are dimensionless and applied to suitably normalized
//! quantities (relative residuals, ratios against the largest singular
//! value), never to raw floats of unknown scale.

/// Relative rank cutoff shared by every rank decision (`σ > RANK_REL · σ_max`
/// keeps a singular value). 1e−10 sits far above f64 roundoff for the small
/// dense matrices involved (≤ a few dozen rows) and far below any physically
/// meaningful singular value gap.
pub const RANK_REL: f64 = 1e-10;

/// Residual bound for exact structural identities evaluated in one or two
/// matrix multiplications (membership of P in sp, antisymmetry of L,
/// agreement of algebraically identical right-hand sides).
pub const STRUCTURAL: f64 = 1e-12;

/// Residual bound for identities that pass through one spectral
/// decomposition (orthogonality of recovered Q factors).
pub const ORTHOGONALITY: f64 = 1e-10;

/// Residual bound for identities that pass through several decompositions
/// and a linear solve (symplectic defect of recovered T factors, Xu
/// reconstruction relative residual).
pub const FACTORIZATION: f64 = 1e-8;

/// Relative eigenvalue floor below which a Gram block recovered from K is
/// still accepted as positive semidefinite: eigenvalues ≥ −PSD_SLACK · tr(b).
pub const PSD_SLACK: f64 = 1e-8;

/// Collision threshold factor: a potential that is singular at zero
/// separation errors out when some r_ab < COLLISION_REL × (largest r_ab).
pub const COLLISION_REL: f64 = 1e-12;

/// Spectral-trace agreement: |tr Lᵏ − tr Kᵏ| ≤ TRACE_REL · max(1, |tr Kᵏ|).
pub const TRACE_REL: f64 = 1e-9;

/// Default clustering width for deciding which ω²_j coincide, relative to
/// the largest ω²: eigenvalue perturbation for the symmetric products
/// involved is O(machine ε · κ), so 1e−8 separates "equal by construction"
/// from "distinct" for well-scaled inputs.
pub const FREQ_CLUSTER_REL: f64 = 1e-8;

/// Conversion helper: fetch a tolerance as the working scalar.
pub fn tol<T: crate::Real>(value: f64) -> T {
    T::of(value)
}
