//! Numerical invariants and symplectic normal forms of reduced states.
//!
//! A reduced state `Z ∈ R^{d×2m}` is classified, up to the commuting
//! `O(d) × Sp(2m)` actions, by three invariants:
//!
//! * `p` — the number of *oscillator planes*: half the rank of the angular
//!   momentum `L = Z J Zᵀ`;
//! * `ω²_1 ≥ … ≥ ω²_p > 0` — the distinct-by-position frequencies: the
//!   singular values of `L`, which come in equal pairs (one value per
//!   plane);
//! * `q` — the number of *nilpotent directions*: `rank Z − 2p`.
//!
//! Together `2p + q = rank Z` is the motion rank, bounded by
//! `p ≤ ⌊d/2⌋`, `q ≤ min(d − 2p, m − p)` and `2p + q ≤ min(d, 2m)`.
//!
//! The Gram matrix of a state with invariants `(p, q, ω²)` is symplectically
//! congruent to the diagonal **normal form**
//!
//! ```text
//! G₀ = diag( ω²_1..ω²_p, 0.. | ω²_1..ω²_p, 1 (q times), 0.. )
//! ```
//!
//! (positions `j` and `m+j` carry `ω²_j`; positions `m+p+i` carry the
//! nilpotent ones). [`xu_decompose`] produces the constructive witness: a
//! factorization `Z = Q D T⁻¹` with `Q ∈ O(d)`, `T ∈ Sp(2m)` and a sparse
//! rectangular `D` whose entries are the frequencies `ω_j = √(ω²_j)` (so
//! `D J Dᵀ` recovers `L`'s canonical form and `Dᵀ D` a Gram normal form
//! that differs from `G₀` only by the exact symplectic swap
//! `(x, y) ↦ (y, −x)` on the nilpotent planes).

use crate::configuration::CenteredState;
use crate::linalg;
use crate::reduction::{standard_j, AngularMomentum, GramElement};
use crate::tolerances;
use crate::{Error, Real, Result};
use nalgebra::{DMatrix, RowDVector};

/// The complete classifying data of a reduced state.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSignature<T: Real = f64> {
    /// Number of oscillator planes (half the rank of `L`).
    pub p: usize,
    /// Number of nilpotent directions (`rank Z − 2p`).
    pub q: usize,
    /// Squared frequencies `ω²_1 ≥ … ≥ ω²_p > 0`.
    pub omega_sq: Vec<T>,
    /// Number of Jacobi degrees (`n − 1`).
    pub m: usize,
    /// `2p + q = rank Z`: the minimal spatial dimension hosting the motion.
    pub motion_rank: usize,
}

impl<T: Real> InvariantSignature<T> {
    /// Checks the rank inequalities against an ambient dimension `d`.
    pub fn respects_bounds(&self, d: usize) -> bool {
        let two_p = 2 * self.p;
        self.p <= d / 2
            && self.p + self.q <= self.m
            && two_p + self.q <= d.min(2 * self.m)
            && self.q <= d - two_p.min(d)
            && self.motion_rank == two_p + self.q
    }
}

/// Extracts `(p, [ω²_j])` from an angular momentum matrix.
///
/// The singular values of an antisymmetric matrix come in equal pairs;
/// values above `tol_rel · σ_max` count toward the rank, which must be even
/// (an odd count signals an ill-placed threshold and returns
/// [`Error::ToleranceInconsistency`]). The returned frequencies are the
/// pair values in descending order.
pub fn invariants_from_l<T: Real>(l: &DMatrix<T>, tol_rel: f64) -> Result<(usize, Vec<T>)> {
    invariants_from_l_floored(l, tol_rel, T::zero())
}

/// [`invariants_from_l`] with an external scale floor on the rank cutoff.
///
/// When `L` comes from a state via `L = Z J Zᵀ`, its natural scale is
/// `σ_max(Z)²` (indeed `‖Z J Zᵀ‖₂ ≤ ‖Z‖₂²`), not `σ_max(L)` itself: a
/// collinear state has `L = 0` up to roundoff, and a cutoff relative to that
/// roundoff would promote pure noise to rank 2. Flooring the cutoff scale by
/// `σ_max(Z)²` keeps the `L` threshold commensurate with the one used for
/// `rank Z`.
fn invariants_from_l_floored<T: Real>(
    l: &DMatrix<T>,
    tol_rel: f64,
    scale_floor: T,
) -> Result<(usize, Vec<T>)> {
    if l.nrows() != l.ncols() || l.nrows() == 0 {
        return Err(Error::InvalidInput("angular momentum must be square".into()));
    }
    let scale = l.norm().max(T::one());
    if (l + l.transpose()).norm() > tolerances::tol::<T>(tolerances::STRUCTURAL) * scale {
        return Err(Error::InvalidInput(
            "invariants need an antisymmetric angular momentum".into(),
        ));
    }
    let sv = linalg::singular_values(l);
    let sigma_max = sv.first().copied().unwrap_or(T::zero());
    if sigma_max == T::zero() {
        return Ok((0, Vec::new()));
    }
    let cut = tolerances::tol::<T>(tol_rel) * sigma_max.max(scale_floor);
    if sigma_max <= cut {
        return Ok((0, Vec::new()));
    }
    let rank = sv.iter().take_while(|&&s| s > cut).count();
    if rank % 2 != 0 {
        return Err(Error::ToleranceInconsistency(format!(
            "threshold {:.3e} split a singular-value pair of L (rank came out {rank})",
            cut.to_f64().unwrap_or(f64::NAN)
        )));
    }
    let p = rank / 2;
    let mut omega_sq = Vec::with_capacity(p);
    for j in 0..p {
        let (s0, s1) = (sv[2 * j], sv[2 * j + 1]);
        if (s0 - s1).abs() > cut {
            return Err(Error::ToleranceInconsistency(format!(
                "singular values {:.6e} and {:.6e} should pair up but differ beyond the threshold",
                s0.to_f64().unwrap_or(f64::NAN),
                s1.to_f64().unwrap_or(f64::NAN)
            )));
        }
        omega_sq.push((s0 + s1) * T::of(0.5));
    }
    Ok((p, omega_sq))
}

/// Classifies a reduced state: `p` and `ω²` from `L = Z J Zᵀ`, then
/// `q = rank Z − 2p`, with all rank bounds validated.
///
/// Both rank decisions share one scale: singular values of `Z` count above
/// `tol_rel · σ_max(Z)`, and singular values of `L` above
/// `tol_rel · σ_max(Z)²` (see [`invariants_from_l`] for the pure-relative
/// variant). The shared floor keeps a collinear state — whose `L` is exactly
/// zero plus roundoff — from reading as an oscillator.
pub fn invariants_from_z<T: Real>(
    z: &CenteredState<T>,
    tol_rel: f64,
) -> Result<InvariantSignature<T>> {
    let sv_z = linalg::singular_values(z.z());
    let smax_z = sv_z.first().copied().unwrap_or(T::zero());
    let l = AngularMomentum::from_state(z);
    let (p, omega_sq) = invariants_from_l_floored(l.l(), tol_rel, smax_z * smax_z)?;
    let cut_z = tolerances::tol::<T>(tol_rel) * smax_z;
    let rank_z = sv_z.iter().take_while(|&&s| s > cut_z).count();
    if rank_z < 2 * p {
        return Err(Error::ToleranceInconsistency(format!(
            "rank Z = {rank_z} is smaller than 2p = {} — the two thresholds disagree",
            2 * p
        )));
    }
    let q = rank_z - 2 * p;
    let sig = InvariantSignature { p, q, omega_sq, m: z.m(), motion_rank: rank_z };
    if !sig.respects_bounds(z.d()) {
        return Err(Error::ToleranceInconsistency(format!(
            "computed signature (p, q) = ({p}, {q}) violates the rank bounds for d = {}, m = {}",
            z.d(),
            z.m()
        )));
    }
    Ok(sig)
}

/// The diagonal Gram normal form `G₀` of a signature inside `symm(2m)`.
///
/// Positions `j` and `m+j` (0-based, `j < p`) carry `ω²_j`; positions
/// `m+p+i` (`i < q`) carry 1; everything else is zero. Any Gram value with
/// these invariants is `Sp(2m)`-congruent to `G₀`.
pub fn normal_form_matrix<T: Real>(
    sig: &InvariantSignature<T>,
    m: usize,
) -> Result<GramElement<T>> {
    if sig.p + sig.q > m {
        return Err(Error::InvalidInput(format!(
            "signature needs p + q = {} ≤ m = {m}",
            sig.p + sig.q
        )));
    }
    if sig.omega_sq.len() != sig.p {
        return Err(Error::InvalidInput(format!(
            "signature lists {} frequencies but p = {}",
            sig.omega_sq.len(),
            sig.p
        )));
    }
    for &w in &sig.omega_sq {
        if !w.is_finite() || w <= T::zero() {
            return Err(Error::InvalidInput(
                "frequencies must be finite and strictly positive".into(),
            ));
        }
    }
    for w in sig.omega_sq.windows(2) {
        if w[0] < w[1] {
            return Err(Error::InvalidInput("frequencies must be sorted descending".into()));
        }
    }
    let mut g = DMatrix::<T>::zeros(2 * m, 2 * m);
    for (j, &w) in sig.omega_sq.iter().enumerate() {
        g[(j, j)] = w;
        g[(m + j, m + j)] = w;
    }
    for i in 0..sig.q {
        g[(m + sig.p + i, m + sig.p + i)] = T::one();
    }
    GramElement::new(g)
}

/// Residual norms of a computed factorization against its input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XuResiduals<T: Real = f64> {
    /// `‖Z − Q D T⁻¹‖ / max(1, ‖Z‖)`.
    pub reconstruction: T,
    /// `‖Qᵀ Q − I‖`.
    pub orthogonality: T,
    /// `‖Tᵀ J T − J‖`.
    pub symplectic: T,
}

/// A factorization `Z = Q D T⁻¹` with `Q ∈ O(d)`, `T ∈ Sp(2m)` and sparse
/// rectangular `D` carrying the frequencies.
#[derive(Debug, Clone)]
pub struct XuFactorization<T: Real = f64> {
    q: DMatrix<T>,
    d_matrix: DMatrix<T>,
    t: DMatrix<T>,
    t_inv: DMatrix<T>,
    sigma: Vec<T>,
    signature: InvariantSignature<T>,
}

impl<T: Real> XuFactorization<T> {
    /// The spatial rotation `Q` (d×d, orthogonal).
    pub fn q(&self) -> &DMatrix<T> {
        &self.q
    }

    /// The sparse core `D` (d×2m): `ω_j` at `(j, j)` and `(p+q+j, m+j)`,
    /// ones at `(p+i, p+i)`.
    pub fn d_matrix(&self) -> &DMatrix<T> {
        &self.d_matrix
    }

    /// The symplectic change of frame `T` (2m×2m).
    pub fn t(&self) -> &DMatrix<T> {
        &self.t
    }

    /// The cached inverse `T⁻¹ = −J Tᵀ J`.
    pub fn t_inv(&self) -> &DMatrix<T> {
        &self.t_inv
    }

    /// The squared frequencies `ω²_j` (descending).
    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }

    /// The invariant signature detected during factorization.
    pub fn signature(&self) -> &InvariantSignature<T> {
        &self.signature
    }

    /// Reassembles `Q D T⁻¹`.
    pub fn reconstruct(&self) -> DMatrix<T> {
        &self.q * &self.d_matrix * &self.t_inv
    }

    /// Measures this factorization against a state.
    pub fn residuals(&self, z: &CenteredState<T>) -> XuResiduals<T> {
        let d = self.q.nrows();
        let two_m = self.t.nrows();
        let recon = self.reconstruct();
        let j = standard_j::<T>(two_m);
        XuResiduals {
            reconstruction: (z.z() - recon).norm() / z.z().norm().max(T::one()),
            orthogonality: (self.q.transpose() * &self.q - DMatrix::<T>::identity(d, d)).norm(),
            symplectic: (self.t.transpose() * &j * &self.t - &j).norm(),
        }
    }
}

/// Symplectic product of two row vectors: `Ω(u, v) = u J vᵀ`.
fn omega<T: Real>(j: &DMatrix<T>, u: &RowDVector<T>, v: &RowDVector<T>) -> T {
    (u * j * v.transpose())[(0, 0)]
}

/// Symplectic projection `π(v)` onto the plane spanned by a normalized pair
/// `(f, g)` with `Ω(f, g) = 1`; subtracting it makes `v` symplectically
/// orthogonal to both.
fn plane_projection<T: Real>(
    j: &DMatrix<T>,
    v: &RowDVector<T>,
    f: &RowDVector<T>,
    g: &RowDVector<T>,
) -> RowDVector<T> {
    f * omega(j, v, g) - g * omega(j, v, f)
}

/// Orthonormal basis of the orthogonal complement of the columns of `b`
/// inside `R^dim` (via the spectral projector `I − B Bᵀ`).
fn orthogonal_complement<T: Real>(b: &DMatrix<T>, dim: usize) -> Vec<nalgebra::DVector<T>> {
    let want = dim - b.ncols();
    if want == 0 {
        return Vec::new();
    }
    let proj = DMatrix::<T>::identity(dim, dim) - b * b.transpose();
    let eig = proj.symmetric_eigen();
    let mut out = Vec::with_capacity(want);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &bb| {
        eig.eigenvalues[bb]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for &i in order.iter().take(want) {
        out.push(eig.eigenvectors.column(i).into_owned());
    }
    out
}

/// Computes the factorization `Z = Q D T⁻¹`.
///
/// The construction is fully explicit:
///
/// 1. eigen-analysis of `LᵀL` yields orthonormal plane frames
///    `(u_j, v_j = L u_j / ω²_j)` for each oscillator;
/// 2. the top `q` left singular vectors of the plane-complement part of `Z`
///    span the nilpotent motion directions;
/// 3. those `2p + q` columns, completed orthonormally, form `Q`;
/// 4. the corresponding rows of `Qᵀ Z`, scaled by `1/ω_j`, satisfy exact
///    canonical pairings and are completed to a full symplectic matrix by a
///    symplectic Gram–Schmidt (pseudo-inverse conjugate rows for the
///    nilpotent block, residual pairing over the untouched complement).
///
/// Residuals beyond [`tolerances::FACTORIZATION`] abort with
/// [`Error::DecompositionFailure`].
pub fn xu_decompose<T: Real>(z: &CenteredState<T>, tol_rel: f64) -> Result<XuFactorization<T>> {
    let d = z.d();
    let m = z.m();
    let two_m = 2 * m;
    let j = standard_j::<T>(two_m);
    let signature = invariants_from_z(z, tol_rel)?;
    let (p, q) = (signature.p, signature.q);

    // Trivial state: identity frames, zero core.
    if signature.motion_rank == 0 {
        let d_matrix = DMatrix::<T>::zeros(d, two_m);
        return Ok(XuFactorization {
            q: DMatrix::identity(d, d),
            d_matrix,
            t: DMatrix::identity(two_m, two_m),
            t_inv: DMatrix::identity(two_m, two_m),
            sigma: Vec::new(),
            signature,
        });
    }

    let omegas: Vec<T> = signature.omega_sq.iter().map(|w| w.sqrt()).collect();
    let l = AngularMomentum::from_state(z);

    // --- 1. oscillator plane frames -------------------------------------
    let ltl = {
        let raw = l.l().transpose() * l.l();
        (&raw + raw.transpose()) * T::of(0.5)
    };
    let eig = ltl.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut us: Vec<nalgebra::DVector<T>> = Vec::with_capacity(p);
    let mut vs: Vec<nalgebra::DVector<T>> = Vec::with_capacity(p);
    for jj in 0..p {
        // Candidates for this plane sit at sorted positions 2j and 2j+1;
        // later candidates only matter when frequencies coincide and the
        // Gram–Schmidt sweep rejects an already-consumed direction.
        let mut chosen = None;
        for &idx in order.iter().skip(2 * jj) {
            let mut u = eig.eigenvectors.column(idx).into_owned();
            for k in 0..us.len() {
                let cu = us[k].dot(&u);
                let cv = vs[k].dot(&u);
                u -= &us[k] * cu + &vs[k] * cv;
            }
            let norm = u.norm();
            if norm > T::of(0.5) {
                chosen = Some(u / norm);
                break;
            }
        }
        let u = chosen.ok_or_else(|| Error::DecompositionFailure {
            reason: format!("could not isolate oscillator plane {jj}"),
            residual: f64::NAN,
        })?;
        let mut v = (l.l() * &u) / signature.omega_sq[jj];
        // Clean and renormalize; analytically v is already unit and
        // orthogonal to everything chosen so far.
        for k in 0..us.len() {
            let cu = us[k].dot(&v);
            let cv = vs[k].dot(&v);
            v -= &us[k] * cu + &vs[k] * cv;
        }
        v -= &u * u.dot(&v);
        let vnorm = v.norm();
        if (vnorm - T::one()).abs() > T::of(1e-6) {
            return Err(Error::DecompositionFailure {
                reason: format!(
                    "plane partner for frequency ω²_{jj} came out with norm {:.6e}",
                    vnorm.to_f64().unwrap_or(f64::NAN)
                ),
                residual: (vnorm - T::one()).abs().to_f64().unwrap_or(f64::NAN),
            });
        }
        us.push(u);
        vs.push(v / vnorm);
    }

    // --- 2. nilpotent motion directions ---------------------------------
    let mut ks: Vec<nalgebra::DVector<T>> = Vec::with_capacity(q);
    if q > 0 {
        let mut zk = z.z().clone();
        for k in 0..p {
            let pu = us[k].transpose() * z.z();
            let pv = vs[k].transpose() * z.z();
            zk -= &us[k] * pu + &vs[k] * pv;
        }
        let sigma_z = linalg::singular_values(z.z());
        let cut = tolerances::tol::<T>(tol_rel) * sigma_z[0];
        let svd = nalgebra::SVD::new(zk.clone(), true, false);
        let u_mat = svd.u.as_ref().ok_or_else(|| Error::DecompositionFailure {
            reason: "SVD of the plane complement failed".into(),
            residual: f64::NAN,
        })?;
        let mut vals: Vec<(usize, T)> =
            svd.singular_values.iter().copied().enumerate().collect();
        vals.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        let kept: Vec<usize> = vals
            .iter()
            .filter(|(_, s)| *s > cut)
            .map(|(i, _)| *i)
            .collect();
        if kept.len() != q {
            return Err(Error::ToleranceInconsistency(format!(
                "plane complement has numerical rank {} but q = {q}",
                kept.len()
            )));
        }
        for idx in kept {
            let mut k = u_mat.column(idx).into_owned();
            for jjj in 0..p {
                let cu = us[jjj].dot(&k);
                let cv = vs[jjj].dot(&k);
                k -= &us[jjj] * cu + &vs[jjj] * cv;
            }
            for prev in &ks {
                let c = prev.dot(&k);
                k -= prev * c;
            }
            ks.push(k.normalize());
        }
    }

    // --- 3. assemble Q ----------------------------------------------------
    let core_cols = 2 * p + q;
    let mut core = DMatrix::<T>::zeros(d, core_cols);
    for (jj, v) in vs.iter().enumerate() {
        core.set_column(jj, v);
    }
    for (ii, k) in ks.iter().enumerate() {
        core.set_column(p + ii, k);
    }
    for (jj, u) in us.iter().enumerate() {
        core.set_column(p + q + jj, u);
    }
    let completion = orthogonal_complement(&core, d);
    let mut q_mat = DMatrix::<T>::zeros(d, d);
    q_mat.view_mut((0, 0), (d, core_cols)).copy_from(&core);
    for (i, col) in completion.iter().enumerate() {
        q_mat.set_column(core_cols + i, col);
    }

    // --- 4. canonical rows and symplectic completion ---------------------
    let row_of = |vec: &nalgebra::DVector<T>| -> RowDVector<T> {
        (vec.transpose() * z.z()).row(0).into_owned()
    };
    let mut fs: Vec<RowDVector<T>> = Vec::with_capacity(m);
    let mut gs: Vec<RowDVector<T>> = Vec::with_capacity(m);
    for jj in 0..p {
        fs.push(row_of(&vs[jj]) / omegas[jj]); // a_j / ω_j
        gs.push(row_of(&us[jj]) / omegas[jj]); // b_j / ω_j
    }
    // Symplectic Gram–Schmidt over the oscillator pairs.
    for jj in 0..p {
        let (mut f, mut g) = (fs[jj].clone(), gs[jj].clone());
        for k in 0..jj {
            f -= plane_projection(&j, &f, &fs[k], &gs[k]);
            g -= plane_projection(&j, &g, &fs[k], &gs[k]);
        }
        let s = omega(&j, &f, &g);
        if s.abs() < T::of(1e-10) {
            return Err(Error::DecompositionFailure {
                reason: format!("oscillator pair {jj} degenerated during completion"),
                residual: s.abs().to_f64().unwrap_or(f64::NAN),
            });
        }
        g /= s;
        fs[jj] = f;
        gs[jj] = g;
    }

    // Nilpotent rows c_i and their conjugates h_i.
    let mut cs: Vec<RowDVector<T>> = Vec::with_capacity(q);
    let mut hs: Vec<RowDVector<T>> = Vec::with_capacity(q);
    if q > 0 {
        for k_col in ks.iter().take(q) {
            let mut c = row_of(k_col);
            for k in 0..p {
                c -= plane_projection(&j, &c, &fs[k], &gs[k]);
            }
            cs.push(c);
        }
        // Want Ω(c_k, h_i) = δ_ki: minimal-norm solution via pseudo-inverse
        // of the q×2m matrix with rows c_k J.
        let mut cj = DMatrix::<T>::zeros(q, two_m);
        for (ii, c) in cs.iter().enumerate() {
            cj.set_row(ii, &(c * &j).row(0).into_owned());
        }
        let eps = tolerances::tol::<T>(1e-12) * cj.norm().max(T::one());
        let pinv = cj.clone().pseudo_inverse(eps).map_err(|e| Error::DecompositionFailure {
            reason: format!("pseudo-inverse for nilpotent conjugates failed: {e}"),
            residual: f64::NAN,
        })?;
        for ii in 0..q {
            let mut h = pinv.column(ii).transpose().into_owned();
            for k in 0..p {
                h -= plane_projection(&j, &h, &fs[k], &gs[k]);
            }
            hs.push(h);
        }
        // Kill the mutual products Ω(h_i, h_k) without touching Ω(c, h):
        // h_i ← h_i − ½ Σ_k Ω(h_i, h_k) c_k.
        let mut s_mat = DMatrix::<T>::zeros(q, q);
        for i in 0..q {
            for k in 0..q {
                s_mat[(i, k)] = omega(&j, &hs[i], &hs[k]);
            }
        }
        let half = T::of(0.5);
        let fixed: Vec<RowDVector<T>> = (0..q)
            .map(|i| {
                let mut h = hs[i].clone();
                for k in 0..q {
                    h -= &cs[k] * (half * s_mat[(i, k)]);
                }
                h
            })
            .collect();
        hs = fixed;
    }

    // Remaining symplectic complement: pairs spanned by the null space of
    // (all fixed rows) · J.
    let n_extra = m - p - q;
    let mut extra_f: Vec<RowDVector<T>> = Vec::with_capacity(n_extra);
    let mut extra_g: Vec<RowDVector<T>> = Vec::with_capacity(n_extra);
    if n_extra > 0 {
        let fixed_count = 2 * (p + q);
        let mut pool: Vec<RowDVector<T>> = if fixed_count == 0 {
            // Nothing fixed: the complement is everything.
            (0..two_m)
                .map(|i| {
                    let mut r = RowDVector::<T>::zeros(two_m);
                    r[i] = T::one();
                    r
                })
                .collect()
        } else {
            let mut bj = DMatrix::<T>::zeros(fixed_count, two_m);
            for (row, f) in fs.iter().chain(gs.iter()).chain(cs.iter()).chain(hs.iter()).enumerate()
            {
                bj.set_row(row, &(f * &j).row(0).into_owned());
            }
            // Null space of bj = complement of its row space.
            let svd = nalgebra::SVD::new(bj, false, true);
            let vt = svd.v_t.as_ref().expect("requested V^T");
            let mut basis = DMatrix::<T>::zeros(two_m, vt.nrows());
            for i in 0..vt.nrows() {
                basis.set_column(i, &vt.row(i).transpose());
            }
            orthogonal_complement(&basis, two_m)
                .into_iter()
                .map(|c| c.transpose())
                .collect()
        };
        while extra_f.len() < n_extra {
            // Pivot on the pair with the largest symplectic product: any
            // single vector can sit nearly J-orthogonal to the rest of the
            // pool even when the pool as a whole is perfectly symplectic.
            let mut best = (0usize, 0usize, T::zero());
            for a in 0..pool.len() {
                for b in (a + 1)..pool.len() {
                    let w = omega(&j, &pool[a], &pool[b]).abs();
                    if w > best.2 {
                        best = (a, b, w);
                    }
                }
            }
            if best.2 < T::of(1e-10) {
                return Err(Error::DecompositionFailure {
                    reason: "residual subspace is not symplectic".into(),
                    residual: best.2.to_f64().unwrap_or(f64::NAN),
                });
            }
            let f = pool[best.0].clone();
            let g = pool[best.1].clone() / omega(&j, &pool[best.0], &pool[best.1]);
            pool.remove(best.1);
            pool.remove(best.0);
            for v in pool.iter_mut() {
                let corr = plane_projection(&j, v, &f, &g);
                *v -= corr;
                let n = v.norm();
                if n > T::zero() {
                    *v /= n;
                }
            }
            extra_f.push(f);
            extra_g.push(g);
        }
    }

    // --- assemble R = T⁻¹, T, D ------------------------------------------
    let mut r = DMatrix::<T>::zeros(two_m, two_m);
    for jj in 0..p {
        r.set_row(jj, &fs[jj]);
        r.set_row(m + jj, &gs[jj]);
    }
    for ii in 0..q {
        r.set_row(p + ii, &cs[ii]);
        r.set_row(m + p + ii, &hs[ii]);
    }
    for ll in 0..n_extra {
        r.set_row(p + q + ll, &extra_f[ll]);
        r.set_row(m + p + q + ll, &extra_g[ll]);
    }
    // R J Rᵀ = J by construction, so R⁻¹ = −J Rᵀ J.
    let t = -(&j * r.transpose() * &j);

    let mut d_matrix = DMatrix::<T>::zeros(d, two_m);
    for (jj, &w) in omegas.iter().enumerate() {
        d_matrix[(jj, jj)] = w;
        d_matrix[(p + q + jj, m + jj)] = w;
    }
    for ii in 0..q {
        d_matrix[(p + ii, p + ii)] = T::one();
    }

    let fact = XuFactorization {
        q: q_mat,
        d_matrix,
        t,
        t_inv: r,
        sigma: signature.omega_sq.clone(),
        signature,
    };
    let res = fact.residuals(z);
    let gate = tolerances::tol::<T>(tolerances::FACTORIZATION);
    if res.reconstruction > gate || res.orthogonality > gate || res.symplectic > gate {
        return Err(Error::DecompositionFailure {
            reason: format!(
                "factorization residuals too large: reconstruction {:.3e}, orthogonality {:.3e}, symplectic {:.3e}",
                res.reconstruction.to_f64().unwrap_or(f64::NAN),
                res.orthogonality.to_f64().unwrap_or(f64::NAN),
                res.symplectic.to_f64().unwrap_or(f64::NAN)
            ),
            residual: res
                .reconstruction
                .max(res.orthogonality)
                .max(res.symplectic)
                .to_f64()
                .unwrap_or(f64::NAN),
        });
    }
    Ok(fact)
}
