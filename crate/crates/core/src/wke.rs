//! Time integration of the single-mode kinetic equation `∂ₜf = C[f]`.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::collision::{collision_apply_with, KernelEngine};
use crate::error::{Error, Result};
use crate::grid::GridField;

/// Blow-up guard: a state whose weighted norm exceeds this multiple of the
/// initial norm is rejected.
pub const GUARD_FACTOR: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Method {
    /// Picard iterate of the given depth, reported at `outputs` equally
    /// spaced times after `t = 0`.
    Picard {
        depth: usize,
        #[serde(default = "one")]
        outputs: usize,
    },
    Rk4 { dt: f64 },
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDiagnostics {
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
    pub norm: f64,
    /// Smallest grid value; negative values are reported, not corrected.
    pub min_value: f64,
}

impl StateDiagnostics {
    pub fn of(eng: &KernelEngine, f: &GridField, time: f64, s: f64) -> Self {
        let rel = eng.relation();
        Self {
            time,
            mass: f.integral(),
            energy: f.weighted_integral(|x| rel.omega(x)),
            norm: f.weighted_norm(s),
            min_value: f.values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Clone, Debug)]
pub struct WkeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridField>,
    pub diagnostics: Vec<StateDiagnostics>,
}

impl WkeTrajectory {
    fn start(eng: &KernelEngine, f0: &GridField, s: f64) -> Self {
        Self { times: vec![0.0], states: vec![f0.clone()], diagnostics: vec![StateDiagnostics::of(eng, f0, 0.0, s)] }
    }

    fn push(&mut self, eng: &KernelEngine, f: GridField, time: f64, s: f64) {
        self.diagnostics.push(StateDiagnostics::of(eng, &f, time, s));
        self.times.push(time);
        self.states.push(f);
    }

    pub fn last(&self) -> &GridField {
        self.states.last().expect("trajectory always holds the initial state")
    }

    /// Largest relative mass change against the initial state.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.diagnostics[0].mass;
        let drift = self.diagnostics.iter().map(|d| (d.mass - m0).abs()).fold(0.0, f64::max);
        if m0 == 0.0 {
            drift
        } else {
            drift / m0.abs()
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        for d in &self.diagnostics {
            w.serialize(d).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `state_NNNN.wkf` for every output time plus `diagnostics.csv`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (i, f) in self.states.iter().enumerate() {
            f.save(dir.join(format!("state_{i:04}.wkf")))?;
        }
        self.write_csv(dir.join("diagnostics.csv"))
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::InvalidConfig(format!("csv: {other:?}")),
    }
}

/// Step size with `dt·M·‖f₀‖² ≤ 0.1`, capped at `t_end`.
pub fn default_dt(t_end: f64, m_est: f64, norm_f0: f64) -> f64 {
    let lip = m_est * norm_f0 * norm_f0;
    if lip > 0.0 {
        t_end.min(0.1 / lip)
    } else {
        t_end
    }
}

/// Runs the solver and returns the trajectory up to the first rejected
/// state together with the rejection, if any.
pub fn solve_wke_partial(
    eng: &KernelEngine,
    f0: &GridField,
    t_end: f64,
    method: Method,
    s: f64,
) -> Result<(WkeTrajectory, Option<Error>)> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::ParameterOutOfRange(format!("final time must be positive, got {t_end}")));
    }
    let mut traj = WkeTrajectory::start(eng, f0, s);
    let limit = GUARD_FACTOR * traj.diagnostics[0].norm;
    let guard = |f: &GridField, time: f64| {
        let norm = f.weighted_norm(s);
        if norm > limit {
            Some(Error::StepRejected { time, norm, limit })
        } else {
            None
        }
    };
    match method {
        Method::Rk4 { dt } => {
            if !(dt > 0.0) {
                return Err(Error::ParameterOutOfRange(format!("dt must be positive, got {dt}")));
            }
            let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
            let h = t_end / steps as f64;
            let mut f = f0.clone();
            for n in 1..=steps {
                f = rk4_step(eng, &f, h)?;
                let time = n as f64 * h;
                if let Some(e) = guard(&f, time) {
                    return Ok((traj, Some(e)));
                }
                traj.push(eng, f.clone(), time, s);
            }
        }
        Method::Picard { depth, outputs } => {
            let outputs = outputs.max(1);
            let c0 = collision_apply_with(eng, f0)?;
            for i in 1..=outputs {
                let time = t_end * i as f64 / outputs as f64;
                let f = picard_with(eng, f0, &c0, time, depth)?;
                if let Some(e) = guard(&f, time) {
                    return Ok((traj, Some(e)));
                }
                traj.push(eng, f, time, s);
            }
        }
    }
    Ok((traj, None))
}

/// Solves `∂ₜf = C[f]` on `[0, t_end]`; `s` is the weight of the monitored
/// norm.
pub fn solve_wke(eng: &KernelEngine, f0: &GridField, t_end: f64, method: Method, s: f64) -> Result<WkeTrajectory> {
    match solve_wke_partial(eng, f0, t_end, method, s)? {
        (traj, None) => Ok(traj),
        (_, Some(e)) => Err(e),
    }
}

/// One classical four-stage Runge–Kutta step.
pub fn rk4_step(eng: &KernelEngine, f: &GridField, h: f64) -> Result<GridField> {
    let k1 = collision_apply_with(eng, f)?;
    let k2 = collision_apply_with(eng, &f.axpy(0.5 * h, &k1)?)?;
    let k3 = collision_apply_with(eng, &f.axpy(0.5 * h, &k2)?)?;
    let k4 = collision_apply_with(eng, &f.axpy(h, &k3)?)?;
    let values = (0..f.values.len())
        .map(|i| f.values[i] + h / 6.0 * (k1.values[i] + 2.0 * k2.values[i] + 2.0 * k3.values[i] + k4.values[i]))
        .collect();
    Ok(GridField { spec: f.spec, values })
}

/// Gauss–Legendre nodes and weights on `[0, 1]` (Golub–Welsch).
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (eig.eigenvalues[i] + 1.0), v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Polynomial degree in `t` of the Picard iterate of depth `j`.
fn picard_degree(j: usize) -> usize {
    (0..j).fold(0, |d, _| 3 * d + 1)
}

/// The Picard iterate `fʲ(t)` with `f⁰ = f₀` and
/// `fʲ⁺¹(t) = f₀ + ∫₀ᵗ C[fʲ(τ)] dτ`. The iterates are polynomials in `τ`,
/// so the time integrals are evaluated exactly by Gauss–Legendre rules.
pub fn picard_iterate(eng: &KernelEngine, f0: &GridField, t: f64, j: usize) -> Result<GridField> {
    if j == 0 {
        return Ok(f0.clone());
    }
    let c0 = collision_apply_with(eng, f0)?;
    picard_with(eng, f0, &c0, t, j)
}

fn picard_with(eng: &KernelEngine, f0: &GridField, c0: &GridField, t: f64, j: usize) -> Result<GridField> {
    match j {
        0 => Ok(f0.clone()),
        1 => f0.axpy(t, c0),
        _ => {
            let n = (3 * picard_degree(j - 1) + 1).div_ceil(2);
            let (x, w) = gauss_legendre_unit(n);
            let mut out = f0.clone();
            for (xi, wi) in x.iter().zip(&w) {
                let inner = picard_with(eng, f0, c0, t * xi, j - 1)?;
                out = out.axpy(t * wi, &collision_apply_with(eng, &inner)?)?;
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..9 {
            let (x, w) = gauss_legendre_unit(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 1.0, max_relative = 1e-13);
            for p in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert_relative_eq!(q, 1.0 / (p + 1) as f64, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn picard_degrees() {
        assert_eq!(picard_degree(0), 0);
        assert_eq!(picard_degree(1), 1);
        assert_eq!(picard_degree(2), 4);
        assert_eq!(picard_degree(3), 13);
    }

    #[test]
    fn default_dt_rule() {
        assert_relative_eq!(default_dt(1.0, 2.0, 0.5), 0.2);
        assert_eq!(default_dt(0.05, 2.0, 0.5), 0.05);
        assert_eq!(default_dt(0.3, 2.0, 0.0), 0.3);
    }

    #[test]
    fn method_json() {
        let m: Method = serde_json::from_str(r#"{"kind":"picard","depth":2}"#).unwrap();
        assert_eq!(m, Method::Picard { depth: 2, outputs: 1 });
        let m: Method = serde_json::from_str(r#"{"kind":"rk4","dt":0.01}"#).unwrap();
        assert_eq!(m, Method::Rk4 { dt: 0.01 });
    }
}
