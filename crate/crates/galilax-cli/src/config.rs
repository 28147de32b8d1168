//! Run-configuration files: one `key = value` per line.
//!
//! `#` starts a comment (full-line or trailing), blank lines are ignored,
//! keys are case-insensitive, and list values (masses, positions, momenta)
//! accept whitespace- or comma-separated numbers. Unknown keys are errors:
//! a typo must never silently fall back to a default.
//!
//! ```text
//! # two unit masses on a circular orbit
//! dim      = 3
//! masses   = 1.0 1.0
//! potential = newtonian
//! g_const  = 1.0
//! q1 =  0.5 0.0 0.0
//! q2 = -0.5 0.0 0.0
//! p1 = 0.0  0.3535533905932738 0.0
//! p2 = 0.0 -0.3535533905932738 0.0
//! method   = rk45
//! step     = 1e-2
//! tol      = 1e-10
//! t_end    = 4.0
//! mode     = both
//! ```

use galilax::configuration::{build_jacobi_basis, JacobiBasis, MassSystem, PhaseState};
use galilax::dynamics::{IntegratorConfig, Method, Mode};
use galilax::forces::Potential;
use nalgebra::DMatrix;
use std::collections::BTreeMap;

/// Which pair potential a run uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSpec {
    /// Newtonian gravity with coupling `g`.
    Newtonian { g: f64 },
    /// Homogeneous pair potential `coupling · r^(−alpha)` (energy gauge as
    /// in the library).
    Homogeneous { alpha: f64, coupling: f64 },
}

/// A parsed and structurally validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Ambient dimension `d ≥ 1`.
    pub dim: usize,
    /// Body masses (defines `n`).
    pub masses: Vec<f64>,
    /// Pair potential.
    pub potential: PotentialSpec,
    /// Optional softening length added as `r² + ε²`.
    pub softening: Option<f64>,
    /// Initial positions, one `d`-vector per body.
    pub positions: Vec<Vec<f64>>,
    /// Initial momenta, one `d`-vector per body.
    pub momenta: Vec<Vec<f64>>,
    /// Integration scheme.
    pub method: Method,
    /// Fixed step (rk4) or initial trial step (rk45).
    pub step: f64,
    /// Relative tolerance for the adaptive controller.
    pub tol: f64,
    /// End time of the run.
    pub t_end: f64,
    /// Budget on step attempts.
    pub max_steps: usize,
    /// Which side(s) of the Lax pair to evolve.
    pub mode: Mode,
    /// Whether the Jacobi basis is mass-orthonormalized (`M̃ = I`).
    pub normalized: bool,
    /// Reserved for sampling-driven commands; `simulate` is deterministic
    /// and ignores it.
    pub seed: Option<u64>,
}

/// Parses a configuration file's text.
pub fn parse(text: &str) -> Result<RunConfig, String> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(cut) => &raw[..cut],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`, got {line:?}", idx + 1))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(format!("line {}: empty key or value", idx + 1));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(format!("line {}: duplicate key {key:?}", idx + 1));
        }
    }

    let mut take = |k: &str| map.remove(k);

    let dim = match take("dim") {
        Some(v) => parse_usize("dim", &v)?,
        None => 3,
    };
    if dim == 0 {
        return Err("dim must be at least 1".into());
    }
    let masses = parse_floats("masses", &take("masses").ok_or("missing key `masses`")?)?;
    let n = masses.len();
    if n < 2 {
        return Err("at least two masses are required".into());
    }

    let potential = match take("potential").as_deref().unwrap_or("newtonian") {
        "newtonian" => {
            let g = match take("g_const") {
                Some(v) => parse_float("g_const", &v)?,
                None => 1.0,
            };
            PotentialSpec::Newtonian { g }
        }
        "homogeneous" => {
            let alpha = parse_float(
                "alpha",
                &take("alpha").ok_or("homogeneous potential needs `alpha`")?,
            )?;
            let coupling = parse_float(
                "coupling",
                &take("coupling").ok_or("homogeneous potential needs `coupling`")?,
            )?;
            PotentialSpec::Homogeneous { alpha, coupling }
        }
        other => {
            return Err(format!(
                "unknown potential {other:?} (expected `newtonian` or `homogeneous`)"
            ))
        }
    };
    let softening = take("softening").map(|v| parse_float("softening", &v)).transpose()?;

    let mut positions = Vec::with_capacity(n);
    let mut momenta = Vec::with_capacity(n);
    for body in 1..=n {
        let qk = format!("q{body}");
        let pk = format!("p{body}");
        let q = parse_floats(&qk, &take(&qk).ok_or_else(|| format!("missing key `{qk}`"))?)?;
        let p = parse_floats(&pk, &take(&pk).ok_or_else(|| format!("missing key `{pk}`"))?)?;
        if q.len() != dim || p.len() != dim {
            return Err(format!(
                "body {body}: q/p must have dim = {dim} components, got {} and {}",
                q.len(),
                p.len()
            ));
        }
        positions.push(q);
        momenta.push(p);
    }

    let method = match take("method").as_deref().unwrap_or("rk45") {
        "rk4" => Method::Rk4Fixed,
        "rk45" => Method::Rk45Adaptive,
        other => return Err(format!("unknown method {other:?} (expected `rk4` or `rk45`)")),
    };
    let step = match take("step") {
        Some(v) => parse_float("step", &v)?,
        None => 1e-2,
    };
    let tol = match take("tol") {
        Some(v) => parse_float("tol", &v)?,
        None => 1e-10,
    };
    let t_end = match take("t_end") {
        Some(v) => parse_float("t_end", &v)?,
        None => 1.0,
    };
    let max_steps = match take("max_steps") {
        Some(v) => parse_usize("max_steps", &v)?,
        None => 1_000_000,
    };
    let mode = match take("mode").as_deref().unwrap_or("z") {
        "z" => Mode::Z,
        "k" => Mode::K,
        "both" => Mode::Both,
        other => return Err(format!("unknown mode {other:?} (expected `z`, `k` or `both`)")),
    };
    let normalized = match take("normalized").as_deref() {
        None | Some("true") => true,
        Some("false") => false,
        Some(other) => return Err(format!("normalized must be true or false, got {other:?}")),
    };
    let seed = take("seed").map(|v| parse_usize("seed", &v).map(|s| s as u64)).transpose()?;

    if let Some(stray) = map.keys().next() {
        return Err(format!("unknown key {stray:?}"));
    }

    Ok(RunConfig {
        dim,
        masses,
        potential,
        softening,
        positions,
        momenta,
        method,
        step,
        tol,
        t_end,
        max_steps,
        mode,
        normalized,
        seed,
    })
}

impl RunConfig {
    /// Builds the mass system.
    pub fn mass_system(&self) -> galilax::Result<MassSystem<f64>> {
        MassSystem::new(self.dim, self.masses.clone())
    }

    /// Builds the Jacobi basis for the configured system.
    pub fn jacobi_basis(&self) -> galilax::Result<JacobiBasis<f64>> {
        build_jacobi_basis(&self.mass_system()?, self.normalized)
    }

    /// Builds the raw phase state (`d × n` position and momentum columns).
    pub fn phase_state(&self) -> galilax::Result<PhaseState<f64>> {
        let n = self.masses.len();
        let mut q = DMatrix::<f64>::zeros(self.dim, n);
        let mut p = DMatrix::<f64>::zeros(self.dim, n);
        for a in 0..n {
            for i in 0..self.dim {
                q[(i, a)] = self.positions[a][i];
                p[(i, a)] = self.momenta[a][i];
            }
        }
        PhaseState::new(q, p)
    }

    /// Builds the pair potential.
    pub fn build_potential(&self) -> galilax::Result<Potential<f64>> {
        let pot = match self.potential {
            PotentialSpec::Newtonian { g } => Potential::newtonian(g)?,
            PotentialSpec::Homogeneous { alpha, coupling } => {
                Potential::homogeneous(alpha, coupling)?
            }
        };
        match self.softening {
            Some(eps) => pot.with_softening(eps),
            None => Ok(pot),
        }
    }

    /// Builds the integrator settings (after CLI overrides are applied).
    pub fn integrator(&self) -> IntegratorConfig<f64> {
        IntegratorConfig {
            method: self.method,
            step: self.step,
            tol: self.tol,
            max_steps: self.max_steps,
        }
    }
}

fn parse_float(key: &str, v: &str) -> Result<f64, String> {
    v.parse::<f64>().map_err(|_| format!("key `{key}`: cannot parse {v:?} as a number"))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, String> {
    v.parse::<usize>().map_err(|_| format!("key `{key}`: cannot parse {v:?} as an integer"))
}

fn parse_floats(key: &str, v: &str) -> Result<Vec<f64>, String> {
    v.replace(',', " ")
        .split_whitespace()
        .map(|tok| parse_float(key, tok))
        .collect()
}
