//! Dual momentum maps of the reduced n-body problem and the standard
//! symplectic structure.
//!
//! The reduced state space `R^{d×2m}` (rows: space, columns: phase) carries
//! two commuting group actions — `O(d)` rotating space on the left and
//! `Sp(2m)` acting on the right — with momentum maps
//!
//! * the **Gram map** `G = Zᵀ Z ∈ symm(2m)` (for `sp(2m)`, via `K = J G`),
//! * the **angular momentum** `L = Z J Zᵀ ∈ so(d)` (for the rotations),
//!
//! where `J` is the standard symplectic form. The two matrices `K = JG`
//! and `L` share all spectral data: `tr Lᵏ = tr Kᵏ` for every `k ≥ 1`
//! (both equal `tr (JZᵀZ…)` rearranged by cyclicity), all odd traces
//! vanish, and the nonzero eigenvalues agree with multiplicity. This is
//! the engine behind classifying relative equilibria by either map.
//!
//! The image of the Gram map is the cone of positive-semidefinite matrices
//! of rank at most `d`; [`cone_membership`] locates a symmetric matrix
//! relative to that cone.

use crate::configuration::CenteredState;
use crate::linalg;
use crate::tolerances;
use crate::{Error, Real, Result};
use nalgebra::DMatrix;

/// The standard symplectic form on `R^{2m}`:
///
/// ```text
/// J = (  0   I_m )
///     ( −I_m  0  )
/// ```
///
/// Panics if `two_m` is odd or zero.
pub fn standard_j<T: Real>(two_m: usize) -> DMatrix<T> {
    assert!(two_m > 0 && two_m % 2 == 0, "J needs an even positive size");
    let m = two_m / 2;
    let mut j = DMatrix::<T>::zeros(two_m, two_m);
    for k in 0..m {
        j[(k, m + k)] = T::one();
        j[(m + k, k)] = -T::one();
    }
    j
}

/// A value of the Gram momentum map, with the Lax matrix `K = J G` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct GramElement<T: Real = f64> {
    g: DMatrix<T>,
    k: DMatrix<T>,
}

impl<T: Real> GramElement<T> {
    /// Wraps a symmetric matrix of even size. Symmetry must hold to within
    /// [`tolerances::STRUCTURAL`] of the scale; the stored copy is exactly
    /// symmetrized.
    pub fn new(g: DMatrix<T>) -> Result<Self> {
        if g.nrows() != g.ncols() || g.nrows() == 0 || g.nrows() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "Gram matrix must be square of even size, got {:?}",
                g.shape()
            )));
        }
        let scale = g.norm().max(T::one());
        let defect = (&g - g.transpose()).norm();
        if defect > tolerances::tol::<T>(tolerances::STRUCTURAL) * scale {
            return Err(Error::InvalidInput(format!(
                "Gram matrix is not symmetric: defect {:.3e}",
                defect.to_f64().unwrap_or(f64::NAN)
            )));
        }
        let g = (&g + g.transpose()) * T::of(0.5);
        let k = standard_j::<T>(g.nrows()) * &g;
        Ok(Self { g, k })
    }

    /// Builds `G = Zᵀ Z` from a reduced state (exactly symmetric).
    pub fn from_state(z: &CenteredState<T>) -> Self {
        let g = z.z().transpose() * z.z();
        let k = standard_j::<T>(g.nrows()) * &g;
        Self { g, k }
    }

    /// Recovers a Gram element from the Lax matrix `K` via `G = −J K`.
    pub fn from_k(k: &DMatrix<T>) -> Result<Self> {
        if k.nrows() != k.ncols() || k.nrows() == 0 || k.nrows() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "Lax matrix must be square of even size, got {:?}",
                k.shape()
            )));
        }
        let g = -(standard_j::<T>(k.nrows()) * k);
        Self::new(g)
    }

    /// The symmetric matrix `G`.
    pub fn g(&self) -> &DMatrix<T> {
        &self.g
    }

    /// The Lax matrix `K = J G ∈ sp(2m)`.
    pub fn k(&self) -> &DMatrix<T> {
        &self.k
    }

    /// Number of Jacobi degrees `m`.
    pub fn m(&self) -> usize {
        self.g.nrows() / 2
    }

    /// Smallest eigenvalue of `G` (0 for a valid momentum value, up to
    /// numerical slack).
    pub fn min_eigenvalue(&self) -> T {
        let eig = self.g.clone().symmetric_eigen();
        eig.eigenvalues
            .iter()
            .fold(T::of(f64::INFINITY), |m, &v| if v < m { v } else { m })
    }
}

/// A value of the rotational momentum map `L = Z J Zᵀ ∈ so(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularMomentum<T: Real = f64> {
    l: DMatrix<T>,
}

impl<T: Real> AngularMomentum<T> {
    /// Wraps an antisymmetric matrix, validated to
    /// [`tolerances::STRUCTURAL`] and stored exactly antisymmetrized.
    pub fn new(l: DMatrix<T>) -> Result<Self> {
        if l.nrows() != l.ncols() || l.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "angular momentum must be square, got {:?}",
                l.shape()
            )));
        }
        let scale = l.norm().max(T::one());
        let defect = (&l + l.transpose()).norm();
        if defect > tolerances::tol::<T>(tolerances::STRUCTURAL) * scale {
            return Err(Error::InvalidInput(format!(
                "angular momentum is not antisymmetric: defect {:.3e}",
                defect.to_f64().unwrap_or(f64::NAN)
            )));
        }
        let l = (&l - l.transpose()) * T::of(0.5);
        Ok(Self { l })
    }

    /// Builds `L = Z J Zᵀ = X Yᵀ − Y Xᵀ` from a reduced state.
    pub fn from_state(z: &CenteredState<T>) -> Self {
        let x = z.x();
        let y = z.y();
        let xyt = &x * y.transpose();
        let l = &xyt - xyt.transpose();
        Self { l }
    }

    /// The antisymmetric matrix `L`.
    pub fn l(&self) -> &DMatrix<T> {
        &self.l
    }

    /// Frobenius norm `‖L‖_F = √(−tr L²)`.
    pub fn norm(&self) -> T {
        self.l.norm()
    }
}

/// Convenience: the angular momentum of a reduced state.
pub fn angular_momentum<T: Real>(z: &CenteredState<T>) -> AngularMomentum<T> {
    AngularMomentum::from_state(z)
}

/// The paired trace sequences `(tr Lᵏ)` and `(tr Kᵏ)` for `k = 1..=k_max`.
///
/// The two sequences agree identically (and vanish for odd `k`); the
/// returned pair allows verifying this numerically.
pub fn spectral_traces<T: Real>(z: &CenteredState<T>, k_max: usize) -> (Vec<T>, Vec<T>) {
    let l = AngularMomentum::from_state(z);
    let g = GramElement::from_state(z);
    (
        linalg::trace_powers(l.l(), k_max),
        linalg::trace_powers(g.k(), k_max),
    )
}

/// Position of a symmetric matrix relative to the Gram cone
/// `{G ⪰ 0, rank G ≤ d}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeVerdict {
    /// PSD with rank exactly `d` (a regular value of the Gram map).
    Inside,
    /// PSD with the given rank `< d` (degenerate stratum; the zero matrix
    /// reports `Boundary(0)`).
    Boundary(usize),
    /// Not attainable: indefinite, or rank exceeding `d`.
    Outside,
}

/// Locates a symmetric matrix relative to the rank-`d` PSD cone.
///
/// Eigenvalues below `−tol_rel · σ_max` count as genuinely negative;
/// eigenvalues above `tol_rel · σ_max` count toward the rank.
pub fn cone_membership<T: Real>(g: &DMatrix<T>, d: usize, tol_rel: f64) -> Result<ConeVerdict> {
    if g.nrows() != g.ncols() || g.nrows() == 0 {
        return Err(Error::InvalidInput("cone test needs a square matrix".into()));
    }
    let scale = g.norm().max(T::one());
    if (g - g.transpose()).norm() > tolerances::tol::<T>(tolerances::STRUCTURAL) * scale {
        return Err(Error::InvalidInput("cone test needs a symmetric matrix".into()));
    }
    let sym = (g + g.transpose()) * T::of(0.5);
    let eig = sym.symmetric_eigen();
    let sigma_max = eig
        .eigenvalues
        .iter()
        .fold(T::zero(), |m, &v| if v.abs() > m { v.abs() } else { m });
    if sigma_max == T::zero() {
        return Ok(ConeVerdict::Boundary(0));
    }
    let cut = tolerances::tol::<T>(tol_rel) * sigma_max;
    let mut rank = 0usize;
    for &v in eig.eigenvalues.iter() {
        if v < -cut {
            return Ok(ConeVerdict::Outside);
        }
        if v > cut {
            rank += 1;
        }
    }
    Ok(if rank > d {
        ConeVerdict::Outside
    } else if rank == d {
        ConeVerdict::Inside
    } else {
        ConeVerdict::Boundary(rank)
    })
}

/// Numerical rank with the shared relative threshold
/// (σ kept iff σ > tol_rel · σ_max).
pub fn numerical_rank<T: Real>(mat: &DMatrix<T>, tol_rel: f64) -> usize {
    linalg::numerical_rank(mat, T::of(tol_rel))
}

/// How decisively a rank cut separated the spectrum: the smallest kept and
/// largest dropped singular values, each relative to the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankMargins<T: Real = f64> {
    /// Detected numerical rank.
    pub rank: usize,
    /// `min kept σ / threshold` (∞ when nothing is kept).
    pub kept_ratio: T,
    /// `max dropped σ / threshold` (0 when nothing is dropped).
    pub dropped_ratio: T,
}

/// Numerical rank plus its margins against the threshold `tol_rel · σ_max`.
pub fn rank_with_margins<T: Real>(mat: &DMatrix<T>, tol_rel: f64) -> RankMargins<T> {
    let sv = linalg::singular_values(mat);
    let sigma_max = sv.first().copied().unwrap_or(T::zero());
    if sigma_max == T::zero() {
        return RankMargins { rank: 0, kept_ratio: T::of(f64::INFINITY), dropped_ratio: T::zero() };
    }
    let threshold = T::of(tol_rel) * sigma_max;
    let mut rank = 0usize;
    let mut kept = T::of(f64::INFINITY);
    let mut dropped = T::zero();
    for &s in &sv {
        if s > threshold {
            rank += 1;
            if s < kept {
                kept = s;
            }
        } else if s > dropped {
            dropped = s;
        }
    }
    RankMargins {
        rank,
        kept_ratio: kept / threshold,
        dropped_ratio: dropped / threshold,
    }
}
