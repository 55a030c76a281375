//! Unitary evolution under `H(t) = H_0(lambda(t)) + lambda'(t) A_lambda(t)`.
//!
//! Each step applies `exp(-i H(t_i + dt/2) dt)` through the Hermitian
//! eigendecomposition of the midpoint Hamiltonian, with the gauge potential
//! re-optimized at the midpoint `lambda`. The ground-state probability is
//! always measured against the bare `H_0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{AnnealingHamiltonian, ModelSpec, Schedule, RNG_ALGORITHM};
use crate::spin_algebra::{Operator, Representation, TraceWeight};
use crate::variational::{exact_cd, FixedBasisSolver, NestedEigenSolver};

/// Default time step.
pub const DEFAULT_DT: f64 = 1e-3;
/// Default number of steps between recorded samples.
pub const DEFAULT_STRIDE: usize = 10;
/// Levels closer than this to the ground level count as ground.
pub const DEGENERATE_SPLITTING: f64 = 1e-10;
/// Largest tolerated deviation of the state norm from one.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ansatz {
    None,
    Nested { order: usize },
    Cyclic,
    Exact,
}

impl Ansatz {
    pub fn label(&self) -> &'static str {
        match self {
            Ansatz::None => "none",
            Ansatz::Nested { .. } => "nc",
            Ansatz::Cyclic => "ca",
            Ansatz::Exact => "exact",
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Ansatz::Nested { order } => *order,
            _ => 0,
        }
    }
}

/// Ansatz plus the trace weight used to optimize it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub ansatz: Ansatz,
    pub eta: f64,
}

impl AnsatzSpec {
    pub fn new(ansatz: Ansatz, eta: f64) -> Self {
        Self { ansatz, eta }
    }

    pub fn bare() -> Self {
        Self::new(Ansatz::None, 0.0)
    }

    pub fn nested(order: usize, eta: f64) -> Self {
        Self::new(Ansatz::Nested { order }, eta)
    }

    pub fn cyclic(eta: f64) -> Self {
        Self::new(Ansatz::Cyclic, eta)
    }

    pub fn exact() -> Self {
        Self::new(Ansatz::Exact, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    rep: Representation,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    pub fn new(rep: Representation, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != rep.dim() {
            return Err(Error::DimensionMismatch {
                expected: rep.dim(),
                got: amplitudes.len(),
            });
        }
        let norm = linalg::vec_norm(&amplitudes);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("state norm {norm} is not 1")));
        }
        Ok(Self { rep, amplitudes })
    }

    /// Lowest eigenvector of a Hermitian operator.
    pub fn ground_state(op: &Operator) -> Result<Self> {
        let eig = linalg::eigh(op.matrix())?;
        let amplitudes = eig.vectors.col(0).iter().copied().collect();
        Ok(Self {
            rep: op.rep(),
            amplitudes,
        })
    }

    pub fn rep(&self) -> Representation {
        self.rep
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        linalg::vec_norm(&self.amplitudes)
    }
}

/// Squared overlap of `state` with the ground level of `h0`. With
/// `degenerate_sum`, every level within [`DEGENERATE_SPLITTING`] of the
/// lowest one is included.
pub fn ground_state_probability(state: &QuantumState, h0: &Operator, degenerate_sum: bool) -> Result<f64> {
    if state.rep != h0.rep() {
        return Err(Error::DimensionMismatch {
            expected: h0.dim(),
            got: state.amplitudes.len(),
        });
    }
    let eig = linalg::eigh(h0.matrix())?;
    Ok(ground_probability_from(&eig, &state.amplitudes, degenerate_sum))
}

fn ground_probability_from(eig: &linalg::Eigen, psi: &[Complex64], degenerate_sum: bool) -> f64 {
    let e0 = eig.values[0];
    let mut p = 0.0;
    for (k, &e) in eig.values.iter().enumerate() {
        if k > 0 && !(degenerate_sum && e - e0 < DEGENERATE_SPLITTING) {
            break;
        }
        let overlap: Complex64 = eig
            .vectors
            .col(k)
            .iter()
            .zip(psi)
            .map(|(v, x)| v.conj() * x)
            .sum();
        p += overlap.norm_sqr();
    }
    p.min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    pub dt: f64,
    /// Record `P_gs` every `stride` steps (the final time is always recorded).
    pub stride: usize,
    pub record_alphas: bool,
    /// Spacing of a `lambda` grid on which variational coefficients are
    /// cached and linearly interpolated. Cyclic ansatz only.
    pub lambda_cache: Option<f64>,
    pub degenerate_sum: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            stride: DEFAULT_STRIDE,
            record_alphas: false,
            lambda_cache: None,
            degenerate_sum: true,
        }
    }
}

impl PropagationOptions {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    /// Records only the endpoints.
    pub fn final_only(mut self) -> Self {
        self.stride = usize::MAX;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub spec: ModelSpec,
    pub ansatz: AnsatzSpec,
    pub total_time: f64,
    pub dt: f64,
    pub seed: Option<u64>,
    pub rng: Option<String>,
    pub times: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub pgs: Vec<f64>,
    pub fidelity: f64,
    pub alphas_trace: Option<Vec<Vec<f64>>>,
    pub max_norm_drift: f64,
}

enum CdTerm {
    None,
    Nested(NestedEigenSolver),
    Fixed(FixedBasisSolver, Option<CoefficientCache>),
    Exact,
}

struct CoefficientCache {
    spacing: f64,
    nodes: Vec<Option<Vec<f64>>>,
}

impl CoefficientCache {
    fn new(spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing <= 0.5) {
            return Err(Error::InvalidInput(format!(
                "lambda cache spacing {spacing} must lie in (0, 0.5]"
            )));
        }
        let count = (1.0 / spacing).ceil() as usize + 1;
        Ok(Self {
            spacing,
            nodes: vec![None; count],
        })
    }

    fn node_lambda(&self, k: usize) -> f64 {
        (k as f64 * self.spacing).min(1.0)
    }

    fn interpolate(&mut self, solver: &FixedBasisSolver, lambda: f64) -> Result<Vec<f64>> {
        let last = self.nodes.len() - 1;
        let k = ((lambda / self.spacing).floor() as usize).min(last - 1);
        for node in [k, k + 1] {
            if self.nodes[node].is_none() {
                let lam = self.node_lambda(node);
                self.nodes[node] = Some(solver.coefficients(lam)?.alphas);
            }
        }
        let (l0, l1) = (self.node_lambda(k), self.node_lambda(k + 1));
        let w = if l1 > l0 { (lambda - l0) / (l1 - l0) } else { 0.0 };
        let a0 = self.nodes[k].as_ref().expect("filled above");
        let a1 = self.nodes[k + 1].as_ref().expect("filled above");
        Ok(a0.iter().zip(a1).map(|(x, y)| (1.0 - w) * x + w * y).collect())
    }
}

impl CdTerm {
    fn new(ham: &AnnealingHamiltonian, ansatz: &AnsatzSpec, opts: &PropagationOptions) -> Result<Self> {
        let weight = || TraceWeight::for_rep(ham.rep(), ansatz.eta);
        if opts.lambda_cache.is_some() && ansatz.ansatz != Ansatz::Cyclic {
            return Err(Error::InvalidInput(
                "the lambda cache is only available for the cyclic ansatz".into(),
            ));
        }
        Ok(match ansatz.ansatz {
            Ansatz::None => CdTerm::None,
            Ansatz::Nested { order } => CdTerm::Nested(NestedEigenSolver::new(order, weight()?)?),
            Ansatz::Cyclic => {
                let cache = opts.lambda_cache.map(CoefficientCache::new).transpose()?;
                CdTerm::Fixed(FixedBasisSolver::cyclic(ham, &weight()?)?, cache)
            }
            Ansatz::Exact => CdTerm::Exact,
        })
    }

    /// Gauge potential at `lambda` and its variational coefficients.
    fn potential(
        &mut self,
        ham: &AnnealingHamiltonian,
        h0: &Operator,
        lambda: f64,
    ) -> Result<Option<(Operator, Vec<f64>)>> {
        match self {
            CdTerm::None => Ok(None),
            CdTerm::Nested(solver) => {
                let s = solver.solve(h0, &ham.dh0())?;
                Ok(Some((s.potential, s.solution.alphas)))
            }
            CdTerm::Fixed(solver, None) => {
                let (a, sol) = solver.solve(lambda)?;
                Ok(Some((a, sol.alphas)))
            }
            CdTerm::Fixed(solver, Some(cache)) => {
                let alphas = cache.interpolate(solver, lambda)?;
                Ok(Some((solver.basis().combine(&alphas), alphas)))
            }
            CdTerm::Exact => Ok(Some((exact_cd(h0, &ham.dh0())?, Vec::new()))),
        }
    }
}

/// Number of steps of size `dt` covering `[0, T]`.
fn step_count(total_time: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt = {dt} must be positive")));
    }
    let steps = (total_time / dt).round();
    if steps < 1.0 || (steps * dt - total_time).abs() > 1e-9 * total_time {
        return Err(Error::InvalidInput(format!(
            "T = {total_time} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(steps as usize)
}

/// Anneals from the ground state of `H_q` and records `P_gs(t)`.
pub fn propagate(
    spec: &ModelSpec,
    ansatz: &AnsatzSpec,
    sched: &Schedule,
    opts: &PropagationOptions,
) -> Result<RunRecord> {
    let ham = spec.build()?;
    propagate_hamiltonian(&ham, ansatz, sched, opts)
}

pub fn propagate_hamiltonian(
    ham: &AnnealingHamiltonian,
    ansatz: &AnsatzSpec,
    sched: &Schedule,
    opts: &PropagationOptions,
) -> Result<RunRecord> {
    let total_time = sched.total_time();
    let dt = opts.dt;
    let steps = step_count(total_time, dt)?;
    let stride = opts.stride.max(1);
    let mut cd = CdTerm::new(ham, ansatz, opts)?;

    let h_start = ham.h0(0.0)?;
    let mut psi = QuantumState::ground_state(&h_start)?.amplitudes;

    let mut times = vec![0.0];
    let mut lambdas = vec![0.0];
    let start_eig = linalg::eigh(h_start.matrix())?;
    let mut pgs = vec![ground_probability_from(&start_eig, &psi, opts.degenerate_sum)];
    let mut alphas_trace = opts.record_alphas.then(Vec::new);
    let mut max_drift = 0.0f64;

    for i in 0..steps {
        let t_mid = (i as f64 + 0.5) * dt;
        let lam = sched.lambda(t_mid)?;
        let lam_dot = sched.lambda_dot(t_mid)?;
        let h0 = ham.h0(lam)?;
        let h = match cd.potential(ham, &h0, lam)? {
            None => h0,
            Some((a, alphas)) => {
                if let Some(trace) = alphas_trace.as_mut() {
                    trace.push(alphas);
                }
                &h0 + &a.scale(lam_dot)
            }
        };
        if !h.is_hermitian_flagged() {
            return Err(Error::NotHermitian {
                deviation: h.hermiticity_deviation(),
            });
        }
        let eig = linalg::eigh(h.matrix())?;
        let mut coeffs = linalg::adjoint_mat_vec(&eig.vectors, &psi);
        for (z, &e) in coeffs.iter_mut().zip(&eig.values) {
            *z *= Complex64::from_polar(1.0, -e * dt);
        }
        psi = linalg::mat_vec(&eig.vectors, &coeffs);

        let t = (i + 1) as f64 * dt;
        let drift = (linalg::vec_norm(&psi) - 1.0).abs();
        max_drift = max_drift.max(drift);
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::NormDrift { drift, time: t });
        }
        if (i + 1) % stride == 0 || i + 1 == steps {
            let t = if i + 1 == steps { total_time } else { t };
            let lam_t = sched.lambda(t)?;
            let h_t = ham.h0(lam_t)?;
            let e_t = linalg::eigh(h_t.matrix())?;
            times.push(t);
            lambdas.push(lam_t);
            pgs.push(ground_probability_from(&e_t, &psi, opts.degenerate_sum));
        }
    }

    let spec = *ham.spec();
    Ok(RunRecord {
        spec,
        ansatz: *ansatz,
        total_time,
        dt,
        seed: spec.seed(),
        rng: spec.seed().map(|_| RNG_ALGORITHM.to_string()),
        fidelity: *pgs.last().expect("at least the initial sample"),
        times,
        lambdas,
        pgs,
        alphas_trace,
        max_norm_drift: max_drift,
    })
}

/// Which excitation counts as "the gap".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    /// `e_1 - e_0`.
    Adjacent,
    /// Distance from the ground level to the lowest level above the ground
    /// manifold that `dH_0` couples to it. Excludes excitations that
    /// symmetry forbids (e.g. the odd-parity partner for `p = 2`).
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimalGap {
    pub delta: f64,
    pub lambda_min: f64,
}

pub fn gap_at(ham: &AnnealingHamiltonian, lambda: f64, kind: GapKind) -> Result<f64> {
    let h0 = ham.h0(lambda)?;
    let eig = linalg::eigh(h0.matrix())?;
    let e0 = eig.values[0];
    if eig.values.len() < 2 {
        return Ok(0.0);
    }
    match kind {
        GapKind::Adjacent => Ok(eig.values[1] - e0),
        GapKind::Coupled => {
            let dh0 = ham.dh0();
            let ground: Vec<Complex64> = eig.vectors.col(0).iter().copied().collect();
            let image = linalg::mat_vec(dh0.matrix(), &ground);
            let couplings: Vec<f64> = (0..eig.values.len())
                .map(|k| {
                    eig.vectors
                        .col(k)
                        .iter()
                        .zip(&image)
                        .map(|(v, x)| v.conj() * x)
                        .sum::<Complex64>()
                        .norm()
                })
                .collect();
            let scale = couplings.iter().skip(1).copied().fold(0.0, f64::max);
            let threshold = 1e-8 * scale.max(1e-300);
            let found = (1..eig.values.len()).find(|&k| {
                eig.values[k] - e0 >= DEGENERATE_SPLITTING && couplings[k] > threshold
            });
            Ok(found.map_or(eig.values[1] - e0, |k| eig.values[k] - e0))
        }
    }
}

/// Minimum of the gap over `lambda_grid`, refined by golden-section search
/// around the best grid point.
pub fn minimal_gap(ham: &AnnealingHamiltonian, lambda_grid: &[f64], kind: GapKind) -> Result<MinimalGap> {
    if lambda_grid.len() < 2 {
        return Err(Error::InvalidInput("gap scan needs at least two lambda points".into()));
    }
    let gaps = lambda_grid
        .iter()
        .map(|&l| gap_at(ham, l, kind))
        .collect::<Result<Vec<_>>>()?;
    let (best, _) = gaps
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &g)| if g < acc.1 { (k, g) } else { acc });
    let mut lo = lambda_grid[best.saturating_sub(1)];
    let mut hi = lambda_grid[(best + 1).min(lambda_grid.len() - 1)];
    let mut best_point = MinimalGap {
        delta: gaps[best],
        lambda_min: lambda_grid[best],
    };
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = gap_at(ham, x1, kind)?;
    let mut f2 = gap_at(ham, x2, kind)?;
    while hi - lo > 1e-6 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = gap_at(ham, x1, kind)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = gap_at(ham, x2, kind)?;
        }
        for (x, f) in [(x1, f1), (x2, f2)] {
            if f < best_point.delta {
                best_point = MinimalGap {
                    delta: f,
                    lambda_min: x,
                };
            }
        }
    }
    Ok(best_point)
}

/// `count` evenly spaced points on `[0, 1]`.
pub fn uniform_lambda_grid(count: usize) -> Vec<f64> {
    let count = count.max(2);
    (0..count).map(|k| k as f64 / (count - 1) as f64).collect()
}

/// Applies a diagonal phase to a state (test helper for gauge invariance).
#[doc(hidden)]
pub fn rephase(state: &QuantumState, phases: &[f64]) -> QuantumState {
    QuantumState {
        rep: state.rep,
        amplitudes: state
            .amplitudes
            .iter()
            .zip(phases)
            .map(|(z, &p)| z * Complex64::from_polar(1.0, p))
            .collect(),
    }
}
