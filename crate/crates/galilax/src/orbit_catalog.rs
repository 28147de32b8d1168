//! The catalog of coadjoint orbits meeting the image of the Gram map.
//!
//! A normal form `G₀` with invariants `(p, q, ω²)` determines a coadjoint
//! orbit of `Sp(2m)` through `K₀ = J G₀ ∈ sp(2m)*≅ sp(2m)`. Its dimension
//! is `dim sp(2m) − dim g_λ`, where `g_λ` is the isotropy subalgebra — the
//! quadratic Hamiltonians commuting with `K₀`. The isotropy decomposes by
//! frequency clusters and by the structure of the zero-frequency sector:
//!
//! * each cluster of `k` equal frequencies contributes `U(k)` (printed
//!   `SO(2)` when `k = 1`);
//! * the zero sector with `m₀ = m − p` inert pairs and `q` nilpotent
//!   directions contributes, depending on `(q, m₀)`: the full `Sp(2m₀)`
//!   (`q = 0`), a line `R` (`q = m₀ = 1`), `SO(q) ⋉ symm(q)` (`q = m₀ ≥ 2`),
//!   `Sp(2(m₀−1)) ⋉ Heis_{m₀−1}` (`q = 1 < m₀`), or
//!   `(SO(q) × Sp(2(m₀−q))) ⋉ (symm(q) × P_{q,m₀−q})` in general.
//!
//! The resulting dimension satisfies the closed formula
//! `dim g_λ = Σ k_i² + q² + 2q n′ + n′(2n′ + 1)` with `n′ = m − p − q`,
//! which [`isotropy_nullspace_dim`] checks independently by computing the
//! kernel of `S ↦ [JS, JG₀]` over the full space of symmetric matrices.
//!
//! Orbit closures stratify by dropping nilpotent directions one at a time
//! ([`closure_strata`]), and [`spatial_reduction_report`] summarizes the
//! global geometry of the reduced space for spatial (`d = 3`) systems.

use crate::linalg;
use crate::normal_form::InvariantSignature;
use crate::reduction::standard_j;
use crate::tolerances;
use crate::{Error, Real, Result};
use nalgebra::DMatrix;

/// An atomic isotropy factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IsotropyFactor {
    /// Special orthogonal group `SO(k)`, dimension `k(k−1)/2`.
    SO(usize),
    /// Unitary group `U(k)`, dimension `k²`.
    U(usize),
    /// Symplectic group `Sp(size)` (`size` even), dimension `size(size+1)/2`.
    Sp(usize),
    /// Additive group `R^k`, dimension `k`.
    R(usize),
    /// Symmetric matrices `symm(k)` under addition, dimension `k(k+1)/2`.
    Symm(usize),
    /// Heisenberg group `Heis_k`, dimension `2k + 1`.
    Heis(usize),
    /// The abelian block `P_{a,b} ≅ R^{a×b} ⊕ R^{a×b}`, dimension `2ab`.
    P(usize, usize),
}

impl IsotropyFactor {
    /// Dimension of the factor as a Lie group.
    pub fn dim(&self) -> usize {
        match *self {
            Self::SO(k) => k * (k - 1) / 2,
            Self::U(k) => k * k,
            Self::Sp(size) => size * (size + 1) / 2,
            Self::R(k) => k,
            Self::Symm(k) => k * (k + 1) / 2,
            Self::Heis(k) => 2 * k + 1,
            Self::P(a, b) => 2 * a * b,
        }
    }

    /// Conventional printed name.
    pub fn render(&self) -> String {
        match *self {
            Self::SO(k) => format!("SO({k})"),
            Self::U(k) => format!("U({k})"),
            Self::Sp(size) => format!("Sp({size})"),
            Self::R(1) => "R".to_string(),
            Self::R(k) => format!("R^{k}"),
            Self::Symm(k) => format!("symm({k})"),
            Self::Heis(k) => format!("Heis_{k}"),
            Self::P(a, b) => format!("P_{{{a},{b}}}"),
        }
    }
}

/// A product/semidirect-product tree of isotropy factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupExpr {
    /// A single factor.
    Factor(IsotropyFactor),
    /// Direct product of the children.
    Prod(Vec<GroupExpr>),
    /// Semidirect product `left ⋉ right` (right is the normal part).
    Semi(Box<GroupExpr>, Box<GroupExpr>),
}

impl GroupExpr {
    /// Total dimension.
    pub fn dim(&self) -> usize {
        match self {
            Self::Factor(f) => f.dim(),
            Self::Prod(children) => children.iter().map(|c| c.dim()).sum(),
            Self::Semi(l, r) => l.dim() + r.dim(),
        }
    }

    /// Printed name, with parentheses exactly where precedence demands:
    /// semidirect products inside a product, products on either side of a
    /// `⋉`.
    pub fn render(&self) -> String {
        match self {
            Self::Factor(f) => f.render(),
            Self::Prod(children) => children
                .iter()
                .map(|c| match c {
                    Self::Semi(..) => format!("({})", c.render()),
                    _ => c.render(),
                })
                .collect::<Vec<_>>()
                .join(" × "),
            Self::Semi(l, r) => {
                let ls = match **l {
                    Self::Prod(_) => format!("({})", l.render()),
                    _ => l.render(),
                };
                let rs = match **r {
                    Self::Prod(_) => format!("({})", r.render()),
                    _ => r.render(),
                };
                format!("{ls} ⋉ {rs}")
            }
        }
    }
}

fn zero_sector(m0: usize, q: usize) -> Option<GroupExpr> {
    use GroupExpr::{Factor, Prod, Semi};
    use IsotropyFactor::{Heis, Sp, Symm, P, R, SO};
    if m0 == 0 {
        return None;
    }
    Some(if q == 0 {
        Factor(Sp(2 * m0))
    } else if q == m0 {
        if q == 1 {
            Factor(R(1))
        } else {
            Semi(Box::new(Factor(SO(q))), Box::new(Factor(Symm(q))))
        }
    } else if q == 1 {
        Semi(
            Box::new(Factor(Sp(2 * (m0 - 1)))),
            Box::new(Factor(Heis(m0 - 1))),
        )
    } else {
        Semi(
            Box::new(Prod(vec![Factor(SO(q)), Factor(Sp(2 * (m0 - q)))])),
            Box::new(Prod(vec![Factor(Symm(q)), Factor(P(q, m0 - q))])),
        )
    })
}

/// The identity component of the isotropy group of a normal form with `p`
/// oscillator planes (frequency multiplicities `mult`, summing to `p`) and
/// `q` nilpotent directions inside `sp(2m)`.
pub fn isotropy_group(p: usize, q: usize, mult: &[usize], m: usize) -> Result<GroupExpr> {
    if mult.iter().sum::<usize>() != p || mult.contains(&0) {
        return Err(Error::InvalidInput(format!(
            "multiplicities {mult:?} must be positive and sum to p = {p}"
        )));
    }
    if p + q > m {
        return Err(Error::InvalidInput(format!(
            "need p + q = {} ≤ m = {m}",
            p + q
        )));
    }
    let mut parts: Vec<GroupExpr> = mult
        .iter()
        .map(|&k| {
            GroupExpr::Factor(if k == 1 {
                IsotropyFactor::SO(2)
            } else {
                IsotropyFactor::U(k)
            })
        })
        .collect();
    if let Some(sector) = zero_sector(m - p, q) {
        parts.push(sector);
    }
    debug_assert!(!parts.is_empty(), "m ≥ 1 always leaves a sector or a plane");
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        GroupExpr::Prod(parts)
    })
}

/// Closed-form isotropy dimension
/// `Σ k_i² + q² + 2 q n′ + n′(2n′+1)`, `n′ = m − p − q`.
pub fn isotropy_dim_formula(q: usize, mult: &[usize], m: usize) -> usize {
    let p: usize = mult.iter().sum();
    let n_prime = m - p - q;
    mult.iter().map(|&k| k * k).sum::<usize>()
        + q * q
        + 2 * q * n_prime
        + n_prime * (2 * n_prime + 1)
}

/// A fully described coadjoint orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitDescriptor<T: Real = f64> {
    /// The classifying invariants.
    pub signature: InvariantSignature<T>,
    /// Frequency multiplicities (clustered, descending values).
    pub multiplicities: Vec<usize>,
    /// Identity component of the isotropy group.
    pub isotropy: GroupExpr,
    /// `dim g_λ`.
    pub isotropy_dim: usize,
    /// `dim O_λ = m(2m+1) − dim g_λ`.
    pub orbit_dim: usize,
    /// Whether the orbit has the generic dimension `2m²`.
    pub generic: bool,
}

/// Groups the (descending) frequencies into clusters of relative width
/// [`tolerances::FREQ_CLUSTER_REL`].
pub fn frequency_multiplicities<T: Real>(omega_sq: &[T]) -> Vec<usize> {
    let mut mult = Vec::new();
    let mut i = 0;
    while i < omega_sq.len() {
        let leader = omega_sq[i];
        let mut k = 1;
        while i + k < omega_sq.len()
            && (leader - omega_sq[i + k]).abs()
                <= tolerances::tol::<T>(tolerances::FREQ_CLUSTER_REL) * leader
        {
            k += 1;
        }
        mult.push(k);
        i += k;
    }
    mult
}

/// Describes the coadjoint orbit through the normal form of a signature.
pub fn orbit_descriptor<T: Real>(sig: &InvariantSignature<T>) -> Result<OrbitDescriptor<T>> {
    if sig.omega_sq.len() != sig.p {
        return Err(Error::InvalidInput(format!(
            "signature lists {} frequencies for p = {}",
            sig.omega_sq.len(),
            sig.p
        )));
    }
    let mult = frequency_multiplicities(&sig.omega_sq);
    let isotropy = isotropy_group(sig.p, sig.q, &mult, sig.m)?;
    let isotropy_dim = isotropy.dim();
    let total = sig.m * (2 * sig.m + 1);
    let orbit_dim = total - isotropy_dim;
    Ok(OrbitDescriptor {
        signature: sig.clone(),
        multiplicities: mult,
        isotropy,
        isotropy_dim,
        orbit_dim,
        generic: isotropy_dim == sig.m,
    })
}

/// Convenience: just the orbit dimension of a signature's normal form.
pub fn orbit_dimension<T: Real>(sig: &InvariantSignature<T>) -> Result<usize> {
    orbit_descriptor(sig).map(|d| d.orbit_dim)
}

/// The signatures whose orbits appear in the closure of a given one:
/// nilpotent directions peel off one at a time, `(p, q) → (p, q−1) → …`,
/// with frequencies unchanged.
pub fn closure_strata<T: Real>(sig: &InvariantSignature<T>) -> Vec<InvariantSignature<T>> {
    (0..=sig.q)
        .rev()
        .map(|q| InvariantSignature {
            p: sig.p,
            q,
            omega_sq: sig.omega_sq.clone(),
            m: sig.m,
            motion_rank: 2 * sig.p + q,
        })
        .collect()
}

/// Brute-force isotropy dimension of a Gram normal form: the nullity of the
/// linear map `S ↦ [J S, J G]` on symmetric `2m×2m` matrices.
pub fn isotropy_nullspace_dim<T: Real>(g_normal: &DMatrix<T>, tol_rel: f64) -> Result<usize> {
    let two_m = g_normal.nrows();
    if g_normal.ncols() != two_m || two_m == 0 || two_m % 2 != 0 {
        return Err(Error::InvalidInput("normal form must be square of even size".into()));
    }
    let scale = g_normal.norm().max(T::one());
    if (g_normal - g_normal.transpose()).norm()
        > tolerances::tol::<T>(tolerances::STRUCTURAL) * scale
    {
        return Err(Error::InvalidInput("normal form must be symmetric".into()));
    }
    let j = standard_j::<T>(two_m);
    let kg = &j * g_normal;
    let n_sym = two_m * (two_m + 1) / 2;
    let mut map = DMatrix::<T>::zeros(two_m * two_m, n_sym);
    let mut col = 0;
    for a in 0..two_m {
        for b in a..two_m {
            let mut s = DMatrix::<T>::zeros(two_m, two_m);
            s[(a, b)] = T::one();
            s[(b, a)] = T::one();
            let ks = &j * s;
            let comm = &ks * &kg - &kg * &ks;
            for r in 0..two_m {
                for c in 0..two_m {
                    map[(r * two_m + c, col)] = comm[(r, c)];
                }
            }
            col += 1;
        }
    }
    let rank = linalg::numerical_rank(&map, T::of(tol_rel));
    Ok(n_sym - rank)
}

/// One zero-angular-momentum stratum of the spatial reduced space.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroMomentumStratum {
    /// Motion rank `r` (`= q`, since `p = 0`).
    pub rank: usize,
    /// Gram normal form as a quadratic function of the canonical frame.
    pub normal_form: String,
    /// Dimension of the corresponding coadjoint orbit.
    pub orbit_dim: usize,
}

/// Global geometry of the reduced space for spatial (`d = 3`) systems.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialReductionReport {
    /// Number of bodies (`≥ 3`).
    pub n: usize,
    /// Jacobi degrees `m = n − 1`.
    pub m: usize,
    /// Dimension `6n − 10` of the reduced space at generic momentum.
    pub reduced_dim: usize,
    /// `ℓ = 2n − 5`, the dimension of the cone link.
    pub ell: usize,
    /// Codimension `ℓ + 1 = 2(n − 2)` of the planar stratum.
    pub planar_stratum_codim: usize,
    /// Dimension `4n − 6` of the smooth factor transverse to the cone.
    pub smooth_factor_dim: usize,
    /// The link of the cone point: real projective space `RP^ℓ`.
    pub cone_link: String,
    /// The zero-angular-momentum strata, by increasing rank.
    pub zero_momentum: Vec<ZeroMomentumStratum>,
    /// Reminder that reconstruction uses the double cover of SO(3).
    pub double_cover_note: String,
}

/// Builds the spatial reduction report for `n ≥ 3` bodies.
pub fn spatial_reduction_report(n: usize) -> Result<SpatialReductionReport> {
    if n < 3 {
        return Err(Error::InvalidInput("the spatial report needs n ≥ 3 bodies".into()));
    }
    let m = n - 1;
    let max_rank = m.min(3);
    let mut zero_momentum = Vec::with_capacity(max_rank + 1);
    for rank in 0..=max_rank {
        let sig = InvariantSignature::<f64> {
            p: 0,
            q: rank,
            omega_sq: Vec::new(),
            m,
            motion_rank: rank,
        };
        let orbit_dim = orbit_dimension(&sig)?;
        let normal_form = if rank == 0 {
            "0".to_string()
        } else {
            let terms: Vec<String> = (1..=rank).map(|i| format!("y{i}^2")).collect();
            format!("({})/2", terms.join(" + "))
        };
        zero_momentum.push(ZeroMomentumStratum { rank, normal_form, orbit_dim });
    }
    Ok(SpatialReductionReport {
        n,
        m,
        reduced_dim: 6 * n - 10,
        ell: 2 * n - 5,
        planar_stratum_codim: 2 * (n - 2),
        smooth_factor_dim: 4 * n - 6,
        cone_link: format!("RP^{}", 2 * n - 5),
        zero_momentum,
        double_cover_note: "reconstruction of spatial motions factors through the 2:1 cover \
                            SU(2) -> SO(3); the fibers over the reduced space carry the cover, \
                            not SO(3) itself"
            .to_string(),
    })
}

// ---------------------------------------------------------------------------
// Printed tables.
// ---------------------------------------------------------------------------

struct CatalogRow {
    p_label: String,
    q: usize,
    name: String,
    orbit_dim: usize,
    motion_d: usize,
}

fn catalog_rows(n: usize) -> Result<Vec<CatalogRow>> {
    let specs: Vec<(usize, Vec<usize>, usize, &str)> = match n {
        3 => vec![
            (2, vec![1, 1], 0, " (nondeg.)"),
            (2, vec![2], 0, " (deg.)"),
            (1, vec![1], 1, ""),
            (1, vec![1], 0, ""),
            (0, vec![], 2, ""),
            (0, vec![], 1, ""),
        ],
        4 => vec![
            (1, vec![1], 1, ""),
            (1, vec![1], 0, ""),
            (0, vec![], 3, ""),
            (0, vec![], 2, ""),
            (0, vec![], 1, ""),
        ],
        _ => {
            return Err(Error::UnsupportedCase(format!(
                "printed catalog tables cover n = 3 and n = 4, not n = {n}"
            )))
        }
    };
    let m = n - 1;
    let total = m * (2 * m + 1);
    specs
        .into_iter()
        .map(|(p, mult, q, note)| {
            let expr = isotropy_group(p, q, &mult, m)?;
            Ok(CatalogRow {
                p_label: format!("{p}{note}"),
                q,
                name: expr.render(),
                orbit_dim: total - expr.dim(),
                motion_d: 2 * p + q,
            })
        })
        .collect()
}

/// Renders the orbit catalog table for `n = 3` or `n = 4` bodies.
pub fn catalog_table(n: usize) -> Result<String> {
    let rows = catalog_rows(n)?;
    let m = n - 1;
    let headers = ["p", "q", "isotropy group", "dim orbit", "d"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.p_label.clone(),
                r.q.to_string(),
                r.name.clone(),
                r.orbit_dim.to_string(),
                r.motion_d.to_string(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    out.push_str(&format!(
        "coadjoint orbits meeting the Gram cone: n = {n} bodies, m = {m}, dim sp({}) = {}, generic orbit dimension {}\n\n",
        2 * m,
        m * (2 * m + 1),
        2 * m * m
    ));
    let fmt_row = |cols: &[String; 5], widths: &[usize]| -> String {
        let mut line = String::new();
        for (i, (cell, w)) in cols.iter().zip(widths.iter()).enumerate() {
            line.push_str(cell);
            if i + 1 < cols.len() {
                for _ in 0..(w - cell.chars().count() + 2) {
                    line.push(' ');
                }
            }
        }
        line.trim_end().to_string()
    };
    let header_cells: [String; 5] = [
        headers[0].to_string(),
        headers[1].to_string(),
        headers[2].to_string(),
        headers[3].to_string(),
        headers[4].to_string(),
    ];
    out.push_str(&fmt_row(&header_cells, &widths));
    out.push('\n');
    let rule_len = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(rule_len));
    out.push('\n');
    for row in &cells {
        out.push_str(&fmt_row(row, &widths));
        out.push('\n');
    }
    Ok(out)
}

/// Both printed tables `(n = 3, n = 4)`.
pub fn emit_tables() -> (String, String) {
    (
        catalog_table(3).expect("n = 3 table is always available"),
        catalog_table(4).expect("n = 4 table is always available"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal_form::normal_form_matrix;
    use crate::tolerances::RANK_REL;

    fn sig(p: usize, q: usize, omega_sq: Vec<f64>, m: usize) -> InvariantSignature<f64> {
        InvariantSignature { p, q, motion_rank: 2 * p + q, omega_sq, m }
    }

    #[test]
    fn all_catalog_names_render_exactly() {
        let m2 = [
            (2, vec![1usize, 1], 0, "SO(2) × SO(2)"),
            (2, vec![2], 0, "U(2)"),
            (1, vec![1], 1, "SO(2) × R"),
            (1, vec![1], 0, "SO(2) × Sp(2)"),
            (0, vec![], 2, "SO(2) ⋉ symm(2)"),
            (0, vec![], 1, "Sp(2) ⋉ Heis_1"),
        ];
        for (p, mult, q, want) in m2 {
            let expr = isotropy_group(p, q, &mult, 2).unwrap();
            assert_eq!(expr.render(), want);
        }
        let m3 = [
            (1, vec![1usize], 1, "SO(2) × (Sp(2) ⋉ Heis_1)"),
            (1, vec![1], 0, "SO(2) × Sp(4)"),
            (0, vec![], 3, "SO(3) ⋉ symm(3)"),
            (0, vec![], 2, "(SO(2) × Sp(2)) ⋉ (symm(2) × P_{2,1})"),
            (0, vec![], 1, "Sp(4) ⋉ Heis_2"),
        ];
        for (p, mult, q, want) in m3 {
            let expr = isotropy_group(p, q, &mult, 3).unwrap();
            assert_eq!(expr.render(), want);
        }
    }

    #[test]
    fn orbit_dimensions_match_the_tables() {
        let m2: [(usize, Vec<usize>, usize, usize); 6] = [
            (2, vec![1, 1], 0, 8),
            (2, vec![2], 0, 6),
            (1, vec![1], 1, 8),
            (1, vec![1], 0, 6),
            (0, vec![], 2, 6),
            (0, vec![], 1, 4),
        ];
        for (p, mult, q, want) in m2 {
            let expr = isotropy_group(p, q, &mult, 2).unwrap();
            assert_eq!(10 - expr.dim(), want, "(p, q) = ({p}, {q}) at m = 2");
            assert_eq!(expr.dim(), isotropy_dim_formula(q, &mult, 2));
        }
        let m3: [(usize, Vec<usize>, usize, usize); 5] = [
            (1, vec![1], 1, 14),
            (1, vec![1], 0, 10),
            (0, vec![], 3, 12),
            (0, vec![], 2, 10),
            (0, vec![], 1, 6),
        ];
        for (p, mult, q, want) in m3 {
            let expr = isotropy_group(p, q, &mult, 3).unwrap();
            assert_eq!(21 - expr.dim(), want, "(p, q) = ({p}, {q}) at m = 3");
            assert_eq!(expr.dim(), isotropy_dim_formula(q, &mult, 3));
        }
    }

    #[test]
    fn generic_orbits_have_dimension_two_m_squared() {
        // All frequencies distinct, p = m.
        let s = sig(2, 0, vec![2.0, 1.0], 2);
        let d = orbit_descriptor(&s).unwrap();
        assert_eq!(d.orbit_dim, 8);
        assert!(d.generic);
        let s = sig(3, 0, vec![3.0, 2.0, 1.0], 3);
        let d = orbit_descriptor(&s).unwrap();
        assert_eq!(d.orbit_dim, 18);
        assert!(d.generic);
        // …and p = m − 1 with one nilpotent direction is generic too.
        let s = sig(1, 1, vec![2.0], 2);
        let d = orbit_descriptor(&s).unwrap();
        assert_eq!(d.orbit_dim, 8);
        assert!(d.generic);
        // The degenerate frequency case is not.
        let s = sig(2, 0, vec![1.0, 1.0], 2);
        let d = orbit_descriptor(&s).unwrap();
        assert_eq!(d.orbit_dim, 6);
        assert!(!d.generic);
        assert_eq!(d.multiplicities, vec![2]);
    }

    #[test]
    fn brute_force_nullspace_agrees_for_small_forms() {
        // (1, 1) at m = 2: isotropy dim 2.
        let s = sig(1, 1, vec![2.0], 2);
        let g = normal_form_matrix(&s, 2).unwrap();
        assert_eq!(isotropy_nullspace_dim(g.g(), RANK_REL).unwrap(), 2);
        // Degenerate pair of planes: U(2), dim 4.
        let s = sig(2, 0, vec![1.0, 1.0], 2);
        let g = normal_form_matrix(&s, 2).unwrap();
        assert_eq!(isotropy_nullspace_dim(g.g(), RANK_REL).unwrap(), 4);
        // Pure nilpotent (0, 1) at m = 2: Sp(2) ⋉ Heis_1, dim 6.
        let s = sig(0, 1, vec![], 2);
        let g = normal_form_matrix(&s, 2).unwrap();
        assert_eq!(isotropy_nullspace_dim(g.g(), RANK_REL).unwrap(), 6);
        // Zero momentum value: the whole algebra, dim 10.
        let s = sig(0, 0, vec![], 2);
        let g = normal_form_matrix(&s, 2).unwrap();
        assert_eq!(isotropy_nullspace_dim(g.g(), RANK_REL).unwrap(), 10);
    }

    #[test]
    fn closure_strata_peel_off_nilpotents() {
        let s = sig(1, 1, vec![2.5], 3);
        let strata = closure_strata(&s);
        assert_eq!(strata.len(), 2);
        assert_eq!((strata[0].p, strata[0].q), (1, 1));
        assert_eq!((strata[1].p, strata[1].q), (1, 0));
        assert_eq!(strata[1].omega_sq, vec![2.5]);
        assert_eq!(strata[1].motion_rank, 2);
        let s = sig(0, 3, vec![], 3);
        let qs: Vec<usize> = closure_strata(&s).iter().map(|s| s.q).collect();
        assert_eq!(qs, vec![3, 2, 1, 0]);
    }

    #[test]
    fn spatial_report_formulas() {
        let r = spatial_reduction_report(3).unwrap();
        assert_eq!((r.reduced_dim, r.ell, r.planar_stratum_codim, r.smooth_factor_dim), (8, 1, 2, 6));
        assert_eq!(r.cone_link, "RP^1");
        assert_eq!(r.zero_momentum.len(), 3); // ranks 0..=min(3, m=2)
        assert_eq!(r.zero_momentum[2].normal_form, "(y1^2 + y2^2)/2");
        assert_eq!(r.zero_momentum[1].orbit_dim, 4);
        assert_eq!(r.zero_momentum[2].orbit_dim, 6);

        let r = spatial_reduction_report(5).unwrap();
        assert_eq!((r.reduced_dim, r.ell, r.planar_stratum_codim, r.smooth_factor_dim), (20, 5, 6, 14));
        assert_eq!(r.cone_link, "RP^5");
        assert_eq!(r.zero_momentum.len(), 4);
        assert_eq!(r.zero_momentum[3].normal_form, "(y1^2 + y2^2 + y3^2)/2");
        assert_eq!(r.planar_stratum_codim, r.ell + 1);

        assert!(spatial_reduction_report(2).is_err());
    }

    #[test]
    fn tables_contain_the_expected_rows() {
        let (t3, t4) = emit_tables();
        for needle in ["U(2)", "SO(2) × SO(2)", "Sp(2) ⋉ Heis_1", "generic orbit dimension 8"] {
            assert!(t3.contains(needle), "n = 3 table missing {needle:?}:\n{t3}");
        }
        for needle in [
            "SO(2) × (Sp(2) ⋉ Heis_1)",
            "Sp(4) ⋉ Heis_2",
            "(SO(2) × Sp(2)) ⋉ (symm(2) × P_{2,1})",
            "generic orbit dimension 18",
        ] {
            assert!(t4.contains(needle), "n = 4 table missing {needle:?}:\n{t4}");
        }
        assert!(catalog_table(5).is_err());
    }

    #[test]
    fn descriptor_validates_input() {
        let bad = InvariantSignature::<f64> {
            p: 2,
            q: 0,
            omega_sq: vec![1.0],
            m: 3,
            motion_rank: 4,
        };
        assert!(orbit_descriptor(&bad).is_err());
        assert!(isotropy_group(1, 3, &[1], 3).is_err());
        assert!(isotropy_group(2, 0, &[1], 3).is_err());
    }
}
