//! Browser bindings for three small demos: the annealing schedule, a single
//! anneal of the uniform model in the symmetric subspace, and the low-lying
//! spectrum along the anneal.
//!
//! The plain Rust functions do the work and are what the tests exercise; the
//! `#[wasm_bindgen]` wrappers only translate errors for JavaScript.

use cdanneal::dynamics::{propagate, uniform_lambda_grid, Ansatz, AnsatzSpec, PropagationOptions};
use cdanneal::linalg::eigh;
use cdanneal::model::{ModelSpec, Schedule};
use wasm_bindgen::prelude::*;

/// Largest size offered by the page; the subspace has `n + 1` states.
pub const MAX_N: usize = 200;

/// Points recorded per trajectory, whatever the step count.
const TRAJECTORY_POINTS: usize = 200;

fn check_n(n: usize) -> Result<(), String> {
    if n == 0 || n > MAX_N {
        return Err(format!("n must lie in 1..={MAX_N}, got {n}"));
    }
    Ok(())
}

/// `lambda(t)` at `points` evenly spaced times in `[0, T]`.
pub fn lambda_samples(total_time: f64, points: usize) -> Result<Vec<f64>, String> {
    let sched = Schedule::new(total_time).map_err(|e| e.to_string())?;
    if points < 2 {
        return Err("need at least two points".into());
    }
    (0..points)
        .map(|k| sched.lambda(total_time * k as f64 / (points - 1) as f64).map_err(|e| e.to_string()))
        .collect()
}

fn ansatz_from(name: &str, order: usize, eta: f64) -> Result<AnsatzSpec, String> {
    let ansatz = match name {
        "none" => Ansatz::None,
        "nc" => Ansatz::Nested { order: order.max(1) },
        "ca" => Ansatz::Cyclic,
        "exact" => Ansatz::Exact,
        other => return Err(format!("unknown ansatz '{other}' (none, nc, ca, exact)")),
    };
    Ok(AnsatzSpec::new(ansatz, eta))
}

/// One recorded anneal.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    lambdas: Vec<f64>,
    pgs: Vec<f64>,
    fidelity: f64,
}

#[wasm_bindgen]
impl Trajectory {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn lambdas(&self) -> Vec<f64> {
        self.lambdas.clone()
    }

    /// Ground-state probability at each recorded time.
    #[wasm_bindgen(getter)]
    pub fn pgs(&self) -> Vec<f64> {
        self.pgs.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn fidelity(&self) -> f64 {
        self.fidelity
    }
}

/// Anneals the uniform `p`-spin model of `n` spins in the symmetric subspace.
/// `ansatz` is one of `none`, `nc` (with `order`), `ca`, `exact`.
pub fn run_anneal(n: usize, p: u32, ansatz: &str, order: usize, total_time: f64, dt: f64) -> Result<Trajectory, String> {
    check_n(n)?;
    let spec = ModelSpec::uniform_subspace(n, p).map_err(|e| e.to_string())?;
    let ansatz = ansatz_from(ansatz, order, 0.0)?;
    let sched = Schedule::new(total_time).map_err(|e| e.to_string())?;
    let steps = (total_time / dt).round().max(1.0) as usize;
    let opts = PropagationOptions {
        stride: (steps / TRAJECTORY_POINTS).max(1),
        ..PropagationOptions::with_dt(dt)
    };
    let rec = propagate(&spec, &ansatz, &sched, &opts).map_err(|e| e.to_string())?;
    Ok(Trajectory {
        times: rec.times,
        lambdas: rec.lambdas,
        pgs: rec.pgs,
        fidelity: rec.fidelity,
    })
}

/// The `levels` lowest energies of `H0(lambda)` relative to the ground
/// energy, on `points` evenly spaced values of lambda. Row-major: one row of
/// `levels` values per lambda.
pub fn spectrum(n: usize, p: u32, points: usize, levels: usize) -> Result<Vec<f64>, String> {
    check_n(n)?;
    if points < 2 || levels == 0 {
        return Err("need at least two points and one level".into());
    }
    let ham = ModelSpec::uniform_subspace(n, p)
        .and_then(|s| s.build())
        .map_err(|e| e.to_string())?;
    let levels = levels.min(n + 1);
    let mut out = Vec::with_capacity(points * levels);
    for lambda in uniform_lambda_grid(points) {
        let h0 = ham.h0(lambda).map_err(|e| e.to_string())?;
        let eig = eigh(h0.matrix()).map_err(|e| e.to_string())?;
        let e0 = eig.values[0];
        out.extend(eig.values.iter().take(levels).map(|e| e - e0));
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn schedule_curve(total_time: f64, points: usize) -> Result<Vec<f64>, JsError> {
    lambda_samples(total_time, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn anneal_trajectory(
    n: usize,
    p: u32,
    ansatz: &str,
    order: usize,
    total_time: f64,
    dt: f64,
) -> Result<Trajectory, JsError> {
    run_anneal(n, p, ansatz, order, total_time, dt).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn spectrum_scan(n: usize, p: u32, points: usize, levels: usize) -> Result<Vec<f64>, JsError> {
    spectrum(n, p, points, levels).map_err(|e| JsError::new(&e))
}
