//! Internal dense linear-algebra helpers shared across modules.

use crate::Real;
use nalgebra::DMatrix;

/// Numerical rank: number of singular values above `tol_rel · σ_max`.
/// The zero matrix has rank 0 for every tolerance.
pub(crate) fn numerical_rank<T: Real>(m: &DMatrix<T>, tol_rel: T) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
    if smax == T::zero() {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol_rel * smax).count()
}

/// Singular values in descending order.
pub(crate) fn singular_values<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    let mut sv: Vec<T> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
    sv
}

/// Symmetric part (M + Mᵀ)/2.
pub(crate) fn sym_part<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::of(0.5)
}

/// Antisymmetric part (M − Mᵀ)/2.
pub(crate) fn asym_part<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m - m.transpose()) * T::of(0.5)
}

/// Traces of the first `k_max` powers: `[tr M, tr M², …, tr M^{k_max}]`.
pub(crate) fn trace_powers<T: Real>(m: &DMatrix<T>, k_max: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(k_max);
    let mut power = m.clone();
    for k in 1..=k_max {
        out.push(power.trace());
        if k < k_max {
            power *= m;
        }
    }
    out
}
