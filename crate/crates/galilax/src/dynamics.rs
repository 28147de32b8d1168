//! Time evolution of the reduced problem, on either side of the Lax pair.
//!
//! The reduced equations of motion are linear in the state with
//! state-dependent coefficients:
//!
//! ```text
//! Ż = −Z P(b),        P = J S,  S = diag(M̃⁻¹, Ã(b)),  b = Xᵀ X,
//! ```
//!
//! and push forward along the Gram momentum map to the *Lax equation*
//!
//! ```text
//! K̇ = [P, K],         K = J G,  G = Zᵀ Z,
//! ```
//!
//! which closes in `K` alone: the coefficient matrix `Ã` only needs the
//! position block `b`, recoverable as the top-left block of `G = −J K`.
//! Conjugation-invariant functions of `K` — in particular the Casimir
//! traces `tr K^{2ℓ}` — are conserved along the flow, as are the energy and
//! the spatial angular momentum.
//!
//! Two integrators are provided: a fixed-step classical Runge–Kutta 4 and
//! an adaptive Dormand–Prince 5(4) pair with a standard PI-free step
//! controller. [`simulate`] can evolve the state side, the Lax side, or
//! both (sharing one time grid so the two flows can be cross-validated
//! sample by sample).

use crate::configuration::{CenteredState, JacobiBasis};
use crate::forces::{assemble_p, energy, energy_from_gram, wintner_conley_reduced, Potential};
use crate::reduction::{standard_j, AngularMomentum, GramElement};
use crate::tolerances;
use crate::{Error, Real, Result};
use nalgebra::DMatrix;

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Classical fixed-step fourth-order Runge–Kutta.
    Rk4Fixed,
    /// Adaptive Dormand–Prince 5(4) with scaled max-norm error control.
    Rk45Adaptive,
}

/// Which side(s) of the Lax pair to evolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// The state `Z` (diagnostics derived from it).
    Z,
    /// The Lax matrix `K` only.
    K,
    /// Both, on a shared time grid, with per-sample cross residuals.
    Both,
}

/// Step-size and tolerance settings for the integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T: Real = f64> {
    /// Scheme to use.
    pub method: Method,
    /// Fixed step (RK4) or initial trial step (RK45).
    pub step: T,
    /// Relative tolerance for the adaptive controller; the absolute
    /// tolerance is `tol × 1e−3`.
    pub tol: T,
    /// Budget on step *attempts* (rejections included) for a whole run.
    pub max_steps: usize,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            method: Method::Rk45Adaptive,
            step: T::of(1e-2),
            tol: T::of(1e-10),
            max_steps: 1_000_000,
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    fn validate(&self) -> Result<()> {
        if !self.step.is_finite() || self.step <= T::zero() {
            return Err(Error::InvalidInput("integrator step must be finite and > 0".into()));
        }
        if !self.tol.is_finite() || self.tol <= T::zero() {
            return Err(Error::InvalidInput("integrator tolerance must be finite and > 0".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Conserved-quantity readouts attached to each recorded sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics<T: Real = f64> {
    /// Sample time.
    pub time: T,
    /// Total reduced energy `½ tr(Y M̃⁻¹ Yᵀ) − W̃` (from `G` in K-mode).
    pub energy: T,
    /// Frobenius norm of the spatial angular momentum (`√(−tr K²)` in K-mode).
    pub l_norm: T,
    /// Casimir traces `tr K²`, `tr K⁴`, `tr K⁶`.
    pub casimirs: Vec<T>,
    /// `‖K − J G(Z)‖_F`, only recorded when both sides evolve.
    pub cross_residual: Option<T>,
}

/// A recorded integration run.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real = f64> {
    /// Sample times, starting at 0.
    pub times: Vec<T>,
    /// State samples (modes `Z` and `Both`).
    pub z_states: Option<Vec<CenteredState<T>>>,
    /// Lax samples (modes `K` and `Both`).
    pub k_states: Option<Vec<GramElement<T>>>,
    /// Per-sample conserved-quantity readouts.
    pub diagnostics: Vec<Diagnostics<T>>,
}

impl<T: Real> Trajectory<T> {
    /// Number of recorded samples.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Whether anything was recorded.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Final state sample, if the state side was evolved.
    pub fn final_z(&self) -> Option<&CenteredState<T>> {
        self.z_states.as_ref().and_then(|v| v.last())
    }

    /// Final Lax sample, if the Lax side was evolved.
    pub fn final_k(&self) -> Option<&GramElement<T>> {
        self.k_states.as_ref().and_then(|v| v.last())
    }
}

/// Casimir traces `tr K^{2ℓ}` for `ℓ = 1..=count`.
pub fn casimirs<T: Real>(k: &DMatrix<T>, count: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(count);
    let mut power = k * k;
    let k2 = power.clone();
    for l in 0..count {
        if l > 0 {
            power = &power * &k2;
        }
        out.push(power.trace());
    }
    out
}

// ---------------------------------------------------------------------------
// Runge–Kutta engines on matrix-valued ODEs.
// ---------------------------------------------------------------------------

type Rhs<'a, T> = dyn FnMut(T, &DMatrix<T>) -> Result<DMatrix<T>> + 'a;

/// Optional observer invoked with `(t, y)` after every accepted step.
type Recorder<'a, T> = Option<&'a mut dyn FnMut(T, &DMatrix<T>)>;

/// Inspects the current state when an adaptive step underflows, optionally
/// promoting the breakdown into a structured error (collision detection).
type BreakdownCheck<'a, T> = dyn Fn(&DMatrix<T>, f64) -> Option<Error> + 'a;

/// Attributes an integrator breakdown to a two-body collision when the
/// closest pair has contracted below `√COLLISION_REL` (≈ 1e−6) of the
/// initial configuration extent and the potential is singular there.
/// `b` is the position Gram block at the breakdown; `scale0_sq` the largest
/// initial squared pair separation.
fn classify_collision<T: Real>(
    basis: &JacobiBasis<T>,
    pot: &Potential<T>,
    b: &DMatrix<T>,
    scale0_sq: T,
    t: f64,
) -> Option<Error> {
    if !pot.singular_at_zero() {
        return None;
    }
    let r_sq = crate::forces::squared_distances_from_b(basis, b).ok()?;
    let mut min_sq = T::of(f64::INFINITY);
    let mut pair = (0usize, 1usize);
    for (a, bb, v) in r_sq.pairs() {
        if v < min_sq {
            min_sq = v;
            pair = (a, bb);
        }
    }
    let threshold_sq = scale0_sq * tolerances::tol::<T>(tolerances::COLLISION_REL);
    if min_sq <= threshold_sq {
        Some(Error::Singularity {
            a: pair.0,
            b: pair.1,
            separation: min_sq.sqrt().to_f64().unwrap_or(0.0),
            threshold: threshold_sq.sqrt().to_f64().unwrap_or(0.0),
            time: Some(t),
        })
    } else {
        None
    }
}

fn rk4_step<T: Real>(f: &mut Rhs<T>, t: T, y: &DMatrix<T>, h: T) -> Result<DMatrix<T>> {
    let half = T::of(0.5);
    let k1 = f(t, y)?;
    let k2 = f(t + half * h, &(y + &k1 * (half * h)))?;
    let k3 = f(t + half * h, &(y + &k2 * (half * h)))?;
    let k4 = f(t + h, &(y + &k3 * h))?;
    Ok(y + (k1 + k2 * T::of(2.0) + k3 * T::of(2.0) + k4) * (h / T::of(6.0)))
}

/// Dormand–Prince 5(4) Butcher data.
const DP_C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [&[f64]; 6] = [
    &[0.2],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince attempt: returns the 5th-order solution and the
/// scaled error-norm (acceptable iff ≤ 1).
fn dp_attempt<T: Real>(
    f: &mut Rhs<T>,
    t: T,
    y: &DMatrix<T>,
    h: T,
    rtol: T,
    atol: T,
) -> Result<(DMatrix<T>, T)> {
    let mut ks: Vec<DMatrix<T>> = Vec::with_capacity(7);
    ks.push(f(t, y)?);
    for stage in 0..6 {
        let mut arg = y.clone();
        for (j, &a) in DP_A[stage].iter().enumerate() {
            if a != 0.0 {
                arg += &ks[j] * (h * T::of(a));
            }
        }
        ks.push(f(t + T::of(DP_C[stage]) * h, &arg)?);
    }
    let mut y5 = y.clone();
    for (j, &b) in DP_B5.iter().enumerate() {
        if b != 0.0 {
            y5 += &ks[j] * (h * T::of(b));
        }
    }
    let mut err = DMatrix::<T>::zeros(y.nrows(), y.ncols());
    for (j, (&b5, &b4)) in DP_B5.iter().zip(DP_B4.iter()).enumerate() {
        let e = b5 - b4;
        if e != 0.0 {
            err += &ks[j] * (h * T::of(e));
        }
    }
    let mut norm = T::zero();
    for i in 0..y.nrows() {
        for j in 0..y.ncols() {
            let scale = atol + rtol * y[(i, j)].abs().max(y5[(i, j)].abs());
            let r = err[(i, j)].abs() / scale;
            if r > norm {
                norm = r;
            }
        }
    }
    Ok((y5, norm))
}

struct StepBudget {
    used: usize,
    max: usize,
}

impl StepBudget {
    fn charge<T: Real>(&mut self, t: T) -> Result<()> {
        self.used += 1;
        if self.used > self.max {
            return Err(Error::IntegrationFailure {
                time: t.to_f64().unwrap_or(f64::NAN),
                reason: format!("step budget of {} exhausted", self.max),
            });
        }
        Ok(())
    }
}

/// Advances adaptively from `t0` to `t1`, appending every accepted sample
/// to `record` (when provided). `h` carries the trial step across calls.
#[allow(clippy::too_many_arguments)]
fn advance_adaptive<T: Real>(
    f: &mut Rhs<T>,
    y: &mut DMatrix<T>,
    t0: T,
    t1: T,
    h: &mut T,
    cfg: &IntegratorConfig<T>,
    budget: &mut StepBudget,
    mut record: Recorder<'_, T>,
    diagnose: Option<&BreakdownCheck<T>>,
) -> Result<()> {
    let rtol = cfg.tol;
    let atol = cfg.tol * tolerances::tol::<T>(1e-3);
    let span = (t1 - t0).abs().max(t1.abs()).max(T::one());
    let h_min = span * T::of(1e-14);
    let mut t = t0;
    while t < t1 {
        let mut h_try = (*h).min(t1 - t);
        loop {
            budget.charge(t)?;
            let (y5, err) = dp_attempt(f, t, y, h_try, rtol, atol)
                .map_err(|e| e.with_time(t.to_f64().unwrap_or(f64::NAN)))?;
            if err <= T::one() || h_try <= h_min {
                if err > T::one() {
                    let t_f = t.to_f64().unwrap_or(f64::NAN);
                    if let Some(check) = diagnose {
                        if let Some(cause) = check(y, t_f) {
                            return Err(cause);
                        }
                    }
                    return Err(Error::IntegrationFailure {
                        time: t_f,
                        reason: format!(
                            "step size underflow: error {:.3e} at the minimal step",
                            err.to_f64().unwrap_or(f64::NAN)
                        ),
                    });
                }
                t += h_try;
                *y = y5;
                let grow = if err == T::zero() {
                    T::of(5.0)
                } else {
                    (T::of(0.9) * err.powf(T::of(-0.2))).min(T::of(5.0)).max(T::of(0.2))
                };
                *h = h_try * grow;
                if let Some(rec) = record.as_deref_mut() {
                    rec(t, y);
                }
                break;
            }
            let shrink = (T::of(0.9) * err.powf(T::of(-0.2))).max(T::of(0.2)).min(T::of(0.9));
            h_try *= shrink;
        }
    }
    Ok(())
}

/// Advances with fixed RK4 steps from `t0` to `t1`, hitting `t1` exactly by
/// shortening the last step, recording each step when asked.
fn advance_rk4<T: Real>(
    f: &mut Rhs<T>,
    y: &mut DMatrix<T>,
    t0: T,
    t1: T,
    cfg: &IntegratorConfig<T>,
    budget: &mut StepBudget,
    mut record: Recorder<'_, T>,
) -> Result<()> {
    let mut t = t0;
    while t < t1 {
        budget.charge(t)?;
        let h = cfg.step.min(t1 - t);
        *y = rk4_step(f, t, y, h).map_err(|e| e.with_time(t.to_f64().unwrap_or(f64::NAN)))?;
        t += h;
        if let Some(rec) = record.as_deref_mut() {
            rec(t, y);
        }
    }
    Ok(())
}

fn integrate_recording<T: Real>(
    f: &mut Rhs<T>,
    y0: DMatrix<T>,
    t_end: T,
    cfg: &IntegratorConfig<T>,
    diagnose: Option<&BreakdownCheck<T>>,
) -> Result<(Vec<T>, Vec<DMatrix<T>>)> {
    let mut times = vec![T::zero()];
    let mut states = vec![y0.clone()];
    let mut y = y0;
    let mut budget = StepBudget { used: 0, max: cfg.max_steps };
    let mut rec = |t: T, s: &DMatrix<T>| {
        times.push(t);
        states.push(s.clone());
    };
    match cfg.method {
        Method::Rk4Fixed => {
            advance_rk4(f, &mut y, T::zero(), t_end, cfg, &mut budget, Some(&mut rec))?
        }
        Method::Rk45Adaptive => {
            let mut h = cfg.step;
            advance_adaptive(
                f,
                &mut y,
                T::zero(),
                t_end,
                &mut h,
                cfg,
                &mut budget,
                Some(&mut rec),
                diagnose,
            )?
        }
    }
    Ok((times, states))
}

fn integrate_over_grid<T: Real>(
    f: &mut Rhs<T>,
    y0: DMatrix<T>,
    times: &[T],
    cfg: &IntegratorConfig<T>,
    diagnose: Option<&BreakdownCheck<T>>,
) -> Result<Vec<DMatrix<T>>> {
    let mut states = vec![y0.clone()];
    let mut y = y0;
    let mut budget = StepBudget { used: 0, max: cfg.max_steps };
    let mut h = cfg.step;
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        match cfg.method {
            Method::Rk4Fixed => advance_rk4(f, &mut y, t0, t1, cfg, &mut budget, None)?,
            Method::Rk45Adaptive => {
                advance_adaptive(f, &mut y, t0, t1, &mut h, cfg, &mut budget, None, diagnose)?
            }
        }
        states.push(y.clone());
    }
    Ok(states)
}

// ---------------------------------------------------------------------------
// Right-hand sides.
// ---------------------------------------------------------------------------

fn z_rhs<'a, T: Real>(
    basis: &'a JacobiBasis<T>,
    pot: &'a Potential<T>,
) -> impl FnMut(T, &DMatrix<T>) -> Result<DMatrix<T>> + 'a {
    let m = basis.m();
    move |_t, zmat| {
        let d = zmat.nrows();
        let x = zmat.view((0, 0), (d, m));
        let b = x.transpose() * x;
        let a_tilde = wintner_conley_reduced(basis, &b, pot)?;
        let p = assemble_p(&a_tilde, basis.reduced_masses())?;
        Ok(-(zmat * p.p()))
    }
}

fn k_rhs<'a, T: Real>(
    basis: &'a JacobiBasis<T>,
    pot: &'a Potential<T>,
) -> impl FnMut(T, &DMatrix<T>) -> Result<DMatrix<T>> + 'a {
    let m = basis.m();
    let j = standard_j::<T>(2 * m);
    move |_t, kmat| {
        let b = recover_position_block(&j, kmat, m)?;
        let a_tilde = wintner_conley_reduced(basis, &b, pot)?;
        let p = assemble_p(&a_tilde, basis.reduced_masses())?;
        Ok(p.p() * kmat - kmat * p.p())
    }
}

/// Extracts `b` (top-left block of `G = −J K`), symmetrizes it, and checks
/// that it stayed on the positive cone to within
/// [`tolerances::PSD_SLACK`] × trace.
fn recover_position_block<T: Real>(
    j: &DMatrix<T>,
    kmat: &DMatrix<T>,
    m: usize,
) -> Result<DMatrix<T>> {
    let g = -(j * kmat);
    let b = g.view((0, 0), (m, m)).into_owned();
    let b = (&b + b.transpose()) * T::of(0.5);
    let eig = b.clone().symmetric_eigen();
    let min = eig
        .eigenvalues
        .iter()
        .fold(T::of(f64::INFINITY), |acc, &v| if v < acc { v } else { acc });
    let floor = -tolerances::tol::<T>(tolerances::PSD_SLACK) * b.trace();
    if min < floor {
        return Err(Error::ToleranceInconsistency(format!(
            "position Gram block left the positive cone: min eigenvalue {:.3e} vs slack {:.3e}",
            min.to_f64().unwrap_or(f64::NAN),
            floor.to_f64().unwrap_or(f64::NAN)
        )));
    }
    // Clip the numerically-negative directions to zero.
    let mut vals = eig.eigenvalues.clone();
    let mut clipped = false;
    for v in vals.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
            clipped = true;
        }
    }
    if clipped {
        let q = eig.eigenvectors;
        Ok(&q * DMatrix::from_diagonal(&vals) * q.transpose())
    } else {
        Ok(b)
    }
}

// ---------------------------------------------------------------------------
// Public stepping and simulation.
// ---------------------------------------------------------------------------

/// Advances the state side by one step.
///
/// RK4 takes exactly `cfg.step`; RK45 performs one *accepted* adaptive step
/// starting from trial `cfg.step`. Returns the new state and the step
/// actually taken.
pub fn step_z<T: Real>(
    z: &CenteredState<T>,
    basis: &JacobiBasis<T>,
    pot: &Potential<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<(CenteredState<T>, T)> {
    cfg.validate()?;
    check_z_dims(z, basis)?;
    let mut f = z_rhs(basis, pot);
    single_step(&mut f, z.z().clone(), cfg).and_then(|(y, h)| Ok((CenteredState::new(y)?, h)))
}

/// Advances the Lax side by one step (see [`step_z`] for step semantics).
pub fn step_k<T: Real>(
    k: &GramElement<T>,
    basis: &JacobiBasis<T>,
    pot: &Potential<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<(GramElement<T>, T)> {
    cfg.validate()?;
    if k.m() != basis.m() {
        return Err(Error::InvalidInput(format!(
            "Lax matrix has m = {} but the basis has m = {}",
            k.m(),
            basis.m()
        )));
    }
    let mut f = k_rhs(basis, pot);
    single_step(&mut f, k.k().clone(), cfg).and_then(|(y, h)| Ok((GramElement::from_k(&y)?, h)))
}

fn single_step<T: Real>(
    f: &mut Rhs<T>,
    y0: DMatrix<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<(DMatrix<T>, T)> {
    let mut budget = StepBudget { used: 0, max: cfg.max_steps };
    match cfg.method {
        Method::Rk4Fixed => {
            budget.charge(T::zero())?;
            Ok((rk4_step(f, T::zero(), &y0, cfg.step)?, cfg.step))
        }
        Method::Rk45Adaptive => {
            let rtol = cfg.tol;
            let atol = cfg.tol * tolerances::tol::<T>(1e-3);
            let mut h = cfg.step;
            loop {
                budget.charge(T::zero())?;
                let (y5, err) = dp_attempt(f, T::zero(), &y0, h, rtol, atol)?;
                if err <= T::one() {
                    return Ok((y5, h));
                }
                h *= (T::of(0.9) * err.powf(T::of(-0.2))).max(T::of(0.2)).min(T::of(0.9));
            }
        }
    }
}

fn check_z_dims<T: Real>(z: &CenteredState<T>, basis: &JacobiBasis<T>) -> Result<()> {
    if z.m() != basis.m() {
        return Err(Error::InvalidInput(format!(
            "state has m = {} but the basis has m = {}",
            z.m(),
            basis.m()
        )));
    }
    Ok(())
}

/// Integrates from `t = 0` to `t_end ≥ 0`, recording every accepted step.
///
/// * [`Mode::Z`] evolves the state and derives diagnostics from it.
/// * [`Mode::K`] evolves the Lax matrix alone, recovering `b` (and hence
///   energy) from `G = −J K` at every evaluation.
/// * [`Mode::Both`] evolves `Z` first, then drives `K` across the exact
///   sample grid the state run produced, recording `‖K − J G(Z)‖_F` per
///   sample.
pub fn simulate<T: Real>(
    initial: &CenteredState<T>,
    basis: &JacobiBasis<T>,
    pot: &Potential<T>,
    t_end: T,
    cfg: &IntegratorConfig<T>,
    mode: Mode,
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    check_z_dims(initial, basis)?;
    if !t_end.is_finite() || t_end < T::zero() {
        return Err(Error::InvalidInput("t_end must be finite and ≥ 0".into()));
    }

    // Initial extent, for attributing adaptive breakdowns to collisions.
    let b0 = crate::forces::small_gram(initial);
    let scale0_sq = crate::forces::squared_distances_from_b(basis, &b0)?
        .pairs()
        .map(|(_, _, v)| v)
        .fold(T::zero(), |acc, v| acc.max(v));
    let m = basis.m();
    let z_diag = move |y: &DMatrix<T>, t: f64| -> Option<Error> {
        let x = y.view((0, 0), (y.nrows(), m));
        let b = x.transpose() * x;
        classify_collision(basis, pot, &b, scale0_sq, t)
    };
    let j = standard_j::<T>(2 * m);
    let k_diag = move |y: &DMatrix<T>, t: f64| -> Option<Error> {
        let g = -(&j * y);
        let b = g.view((0, 0), (m, m)).into_owned();
        let b = (&b + b.transpose()) * T::of(0.5);
        classify_collision(basis, pot, &b, scale0_sq, t)
    };

    match mode {
        Mode::Z | Mode::Both => {
            let mut f = z_rhs(basis, pot);
            let (times, raw) =
                integrate_recording(&mut f, initial.z().clone(), t_end, cfg, Some(&z_diag))?;
            let z_states: Vec<CenteredState<T>> = raw
                .into_iter()
                .map(CenteredState::new)
                .collect::<Result<_>>()?;

            let k_states = if mode == Mode::Both {
                let mut fk = k_rhs(basis, pot);
                let k0 = GramElement::from_state(initial);
                let raw_k =
                    integrate_over_grid(&mut fk, k0.k().clone(), &times, cfg, Some(&k_diag))?;
                Some(
                    raw_k
                        .iter()
                        .map(GramElement::from_k)
                        .collect::<Result<Vec<_>>>()?,
                )
            } else {
                None
            };

            let mut diagnostics = Vec::with_capacity(times.len());
            for (i, (t, z)) in times.iter().zip(z_states.iter()).enumerate() {
                let g = GramElement::from_state(z);
                let cross = k_states.as_ref().map(|ks| (ks[i].k() - g.k()).norm());
                diagnostics.push(Diagnostics {
                    time: *t,
                    energy: energy(z, basis, pot)?,
                    l_norm: AngularMomentum::from_state(z).norm(),
                    casimirs: casimirs(g.k(), 3),
                    cross_residual: cross,
                });
            }
            Ok(Trajectory { times, z_states: Some(z_states), k_states, diagnostics })
        }
        Mode::K => {
            let mut f = k_rhs(basis, pot);
            let k0 = GramElement::from_state(initial);
            let (times, raw) =
                integrate_recording(&mut f, k0.k().clone(), t_end, cfg, Some(&k_diag))?;
            let k_states: Vec<GramElement<T>> =
                raw.iter().map(GramElement::from_k).collect::<Result<_>>()?;
            let mut diagnostics = Vec::with_capacity(times.len());
            for (t, k) in times.iter().zip(k_states.iter()) {
                let cas = casimirs(k.k(), 3);
                let l_norm = (-cas[0]).max(T::zero()).sqrt();
                diagnostics.push(Diagnostics {
                    time: *t,
                    energy: energy_from_gram(k.g(), basis, pot)?,
                    l_norm,
                    casimirs: cas,
                    cross_residual: None,
                });
            }
            Ok(Trajectory { times, z_states: None, k_states: Some(k_states), diagnostics })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::{build_jacobi_basis, center, CenteredState, MassSystem};
    use crate::sampling;

    fn free_potential() -> Potential<f64> {
        Potential::homogeneous(2.0, 0.0).unwrap()
    }

    #[test]
    fn free_motion_is_exact_for_both_integrators() {
        // With Ã ≡ 0 the generator is constant nilpotent: X(t) = X₀ + t Y₀ M̃⁻¹.
        let mut rng = sampling::rng(301);
        let sys = MassSystem::new(3, vec![1.0, 2.0, 3.0]).unwrap();
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let z0 = CenteredState::new(sampling::gaussian_matrix(&mut rng, 3, 4)).unwrap();
        let pot = free_potential();
        for method in [Method::Rk4Fixed, Method::Rk45Adaptive] {
            let cfg = IntegratorConfig { method, step: 0.05, ..Default::default() };
            let traj = simulate(&z0, &basis, &pot, 1.7, &cfg, Mode::Z).unwrap();
            let zf = traj.final_z().unwrap();
            let expect_x = z0.x() + z0.y() * 1.7;
            assert!((zf.x() - expect_x).norm() < 1e-12, "{method:?} drifted");
            assert!((zf.y() - z0.y()).norm() < 1e-12);
        }
    }

    #[test]
    fn circular_orbit_is_a_lax_fixed_point() {
        // Equal masses on a circular orbit: [P, K] = 0 exactly, and K stays
        // put over several periods.
        let (sys, state) = sampling::two_body_circular(1.0, 1.0);
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let z0 = center(&sys, &state, &basis).unwrap();

        let g0 = GramElement::from_state(&z0);
        let b = crate::forces::small_gram(&z0);
        let a = wintner_conley_reduced(&basis, &b, &pot).unwrap();
        let p = assemble_p(&a, basis.reduced_masses()).unwrap();
        let comm = p.p() * g0.k() - g0.k() * p.p();
        assert!(comm.norm() < 1e-13, "commutator norm {}", comm.norm());

        let period = 2.0 * std::f64::consts::PI / (2.0_f64).sqrt();
        let cfg = IntegratorConfig { tol: 1e-11, ..Default::default() };
        let traj = simulate(&z0, &basis, &pot, period, &cfg, Mode::Z).unwrap();
        let kf = GramElement::from_state(traj.final_z().unwrap());
        assert!((kf.k() - g0.k()).norm() < 1e-9, "K drifted {}", (kf.k() - g0.k()).norm());
    }

    #[test]
    fn eccentric_orbit_closes_after_one_period() {
        let (sys, state) = sampling::two_body_eccentric(1.0, 1.0, 0.5);
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let z0 = center(&sys, &state, &basis).unwrap();
        let period = std::f64::consts::PI * (2.0_f64).sqrt();
        let cfg = IntegratorConfig { tol: 1e-10, ..Default::default() };
        let traj = simulate(&z0, &basis, &pot, period, &cfg, Mode::Z).unwrap();
        let zf = traj.final_z().unwrap();
        let err = (zf.z() - z0.z()).norm() / z0.z().norm();
        assert!(err < 1e-6, "orbit failed to close: {err:.3e}");
        // Conserved quantities along the way.
        let h0 = traj.diagnostics[0].energy;
        let l0 = traj.diagnostics[0].l_norm;
        for d in &traj.diagnostics {
            assert!((d.energy - h0).abs() < 1e-9 * h0.abs());
            assert!((d.l_norm - l0).abs() < 1e-9 * l0.abs());
        }
    }

    #[test]
    fn k_mode_tracks_z_mode() {
        let (sys, state) = sampling::two_body_eccentric(1.0, 1.0, 0.3);
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let z0 = center(&sys, &state, &basis).unwrap();
        let cfg = IntegratorConfig { tol: 1e-10, ..Default::default() };
        let traj = simulate(&z0, &basis, &pot, 2.0, &cfg, Mode::Both).unwrap();
        assert!(traj.z_states.is_some() && traj.k_states.is_some());
        for d in &traj.diagnostics {
            let r = d.cross_residual.unwrap();
            assert!(r < 1e-7, "cross residual {r:.3e} at t = {}", d.time);
        }
    }

    #[test]
    fn k_mode_alone_conserves_casimirs() {
        let (sys, state) = sampling::two_body_eccentric(1.0, 1.0, 0.4);
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let z0 = center(&sys, &state, &basis).unwrap();
        let cfg = IntegratorConfig { tol: 1e-11, ..Default::default() };
        let traj = simulate(&z0, &basis, &pot, 3.0, &cfg, Mode::K).unwrap();
        let c0 = traj.diagnostics[0].casimirs.clone();
        for d in &traj.diagnostics {
            for (a, b) in d.casimirs.iter().zip(c0.iter()) {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "casimir drift {a} vs {b}");
            }
        }
    }

    #[test]
    fn casimirs_of_planted_diagonal_gram() {
        // G = diag(ω², 1, …) in the canonical layout gives
        // tr K^{2ℓ} = 2(−1)^ℓ Σ_j ω_j^{4ℓ} plus nilpotent zeros.
        let m = 2;
        let omega_sq = 2.0;
        let mut g = DMatrix::<f64>::zeros(2 * m, 2 * m);
        g[(0, 0)] = omega_sq;
        g[(m, m)] = omega_sq;
        let k = standard_j::<f64>(2 * m) * g;
        let cas = casimirs(&k, 3);
        assert!((cas[0] - (-2.0 * omega_sq * omega_sq)).abs() < 1e-14, "tr K² = {}", cas[0]);
        assert!((cas[1] - 2.0 * omega_sq.powi(4)).abs() < 1e-13);
        assert!((cas[2] - (-2.0 * omega_sq.powi(6))).abs() < 1e-12);
    }

    #[test]
    fn singularity_is_stamped_with_time() {
        // Head-on radial infall: the two bodies collide in finite time.
        let sys = MassSystem::new(3, vec![1.0, 1.0]).unwrap();
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let q = nalgebra::DMatrix::from_column_slice(3, 2, &[0.5, 0.0, 0.0, -0.5, 0.0, 0.0]);
        let p = nalgebra::DMatrix::zeros(3, 2);
        let z0 = center(&sys, &crate::configuration::PhaseState::new(q, p).unwrap(), &basis).unwrap();
        let cfg = IntegratorConfig { tol: 1e-8, max_steps: 200_000, ..Default::default() };
        let err = simulate(&z0, &basis, &pot, 10.0, &cfg, Mode::Z).unwrap_err();
        match err {
            Error::Singularity { time: Some(t), .. } => {
                // Free-fall time for r₀ = 1, μ = ½, G m₁ m₂ = 1 is π/4·√(μ r₀³/(2·…)) ≈ 0.555;
                // only sanity-check the stamp lies in the integration window.
                assert!(t > 0.0 && t < 10.0, "collision time {t}");
            }
            other => panic!("expected a time-stamped singularity, got {other:?}"),
        }
    }

    #[test]
    fn step_budget_is_enforced() {
        let (sys, state) = sampling::two_body_circular(1.0, 1.0);
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let z0 = center(&sys, &state, &basis).unwrap();
        let cfg = IntegratorConfig { max_steps: 3, ..Default::default() };
        match simulate(&z0, &basis, &pot, 100.0, &cfg, Mode::Z) {
            Err(Error::IntegrationFailure { .. }) => {}
            other => panic!("expected integration failure, got {other:?}"),
        }
    }

    #[test]
    fn single_steps_agree_with_simulate() {
        let (sys, state) = sampling::two_body_circular(1.0, 2.0);
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let z0 = center(&sys, &state, &basis).unwrap();
        let cfg = IntegratorConfig { method: Method::Rk4Fixed, step: 0.01, ..Default::default() };
        let (z1, h) = step_z(&z0, &basis, &pot, &cfg).unwrap();
        assert_eq!(h, 0.01);
        let traj = simulate(&z0, &basis, &pot, 0.01, &cfg, Mode::Z).unwrap();
        assert!((traj.final_z().unwrap().z() - z1.z()).norm() < 1e-14);

        let k0 = GramElement::from_state(&z0);
        let (k1, _) = step_k(&k0, &basis, &pot, &cfg).unwrap();
        let g1 = GramElement::from_state(&z1);
        assert!((k1.k() - g1.k()).norm() < 1e-9, "one-step Lax agreement");
    }

    #[test]
    fn k_mode_rejects_indefinite_position_block() {
        let sys = MassSystem::new(3, vec![1.0, 1.0]).unwrap();
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        // Hand-built symmetric G with a genuinely negative position block.
        let mut g = DMatrix::<f64>::identity(2, 2);
        g[(0, 0)] = -1.0;
        let k = GramElement::new(g).unwrap();
        match step_k(&k, &basis, &pot, &IntegratorConfig::default()) {
            Err(Error::ToleranceInconsistency(_)) => {}
            other => panic!("expected a cone violation, got {other:?}"),
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (sys, state) = sampling::two_body_circular(1.0, 1.0);
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let z0 = center(&sys, &state, &basis).unwrap();
        let bad = IntegratorConfig { step: 0.0, ..Default::default() };
        assert!(simulate(&z0, &basis, &pot, 1.0, &bad, Mode::Z).is_err());
        let bad = IntegratorConfig::<f64> { tol: -1.0, ..Default::default() };
        assert!(simulate(&z0, &basis, &pot, 1.0, &bad, Mode::Z).is_err());
        assert!(simulate(&z0, &basis, &pot, -1.0, &IntegratorConfig::default(), Mode::Z).is_err());
        assert!(simulate(&z0, &basis, &pot, f64::NAN, &IntegratorConfig::default(), Mode::Z).is_err());
    }

    #[test]
    fn zero_horizon_returns_the_initial_sample() {
        let (sys, state) = sampling::two_body_circular(1.0, 1.0);
        let basis = build_jacobi_basis(&sys, true).unwrap();
        let pot = Potential::newtonian(1.0).unwrap();
        let z0 = center(&sys, &state, &basis).unwrap();
        let traj = simulate(&z0, &basis, &pot, 0.0, &IntegratorConfig::default(), Mode::Both).unwrap();
        assert_eq!(traj.len(), 1);
        assert!(traj.diagnostics[0].cross_residual.unwrap() < 1e-14);
    }
}
