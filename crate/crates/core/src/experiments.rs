//! Parameter sweeps, random ensembles and exponential fits.
//!
//! Sweep points and ensemble instances are independent and run on the
//! current rayon pool. Results are always returned in input order (or seed
//! order for ensembles), so the output does not depend on the pool size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{minimal_gap, propagate, Ansatz, AnsatzSpec, GapKind, MinimalGap, PropagationOptions, RunRecord};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Schedule};
use crate::spin_algebra::Representation;

/// Fidelities at or below this are treated as numerical zeros.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Above this the linearized Landau-Zener estimate is unreliable.
pub const LZ_VALIDITY_LIMIT: f64 = 0.5;

/// Least-squares fit of `F = phi exp(-gamma n)` in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub phi: f64,
    pub gamma: f64,
    /// Root-mean-square residual of `log F`.
    pub residual: f64,
    pub n_range: (usize, usize),
    /// Sizes left out because their fidelity underflowed.
    pub excluded: Vec<usize>,
}

impl FitResult {
    pub fn predict(&self, n: usize) -> f64 {
        self.phi * (-self.gamma * n as f64).exp()
    }
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "linear fit needs matching samples (got {} and {})",
            xs.len(),
            ys.len()
        )));
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("linear fit needs two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fits `log F = log phi - gamma n`, skipping underflowed fidelities.
pub fn fit_exponential(points: &[(usize, f64)]) -> Result<FitResult> {
    if points.is_empty() {
        return Err(Error::InvalidInput("no points to fit".into()));
    }
    let (kept, excluded): (Vec<_>, Vec<_>) = points
        .iter()
        .partition(|(_, f)| f.is_finite() && *f > UNDERFLOW_FLOOR);
    if kept.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "exponential fit needs at least 4 usable points, got {}",
            kept.len()
        )));
    }
    let xs: Vec<f64> = kept.iter().map(|(n, _)| *n as f64).collect();
    let ys: Vec<f64> = kept.iter().map(|(_, f)| f.ln()).collect();
    let lin = linear_fit(&xs, &ys)?;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - lin.intercept - lin.slope * x).powi(2))
        .sum();
    let ns = points.iter().map(|(n, _)| *n);
    Ok(FitResult {
        phi: lin.intercept.exp(),
        gamma: -lin.slope,
        residual: (sse / xs.len() as f64).sqrt(),
        n_range: (ns.clone().min().unwrap_or(0), ns.max().unwrap_or(0)),
        excluded: excluded.iter().map(|(n, _)| *n).collect(),
    })
}

/// Fixed-width histogram on `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub total: u64,
    /// Values outside `[lo, hi)`.
    pub dropped: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, n_bins: usize) -> Result<Self> {
        if n_bins == 0 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput(format!(
                "histogram needs lo < hi and at least one bin (got [{lo}, {hi}), {n_bins} bins)"
            )));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; n_bins],
            total: 0,
            dropped: 0,
        })
    }

    pub fn from_values(lo: f64, hi: f64, n_bins: usize, values: &[f64]) -> Result<Self> {
        let mut h = Self::new(lo, hi, n_bins)?;
        values.iter().for_each(|&v| h.add(v));
        Ok(h)
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.n_bins() as f64
    }

    pub fn bin_edges(&self, k: usize) -> (f64, f64) {
        let w = self.bin_width();
        (self.lo + k as f64 * w, self.lo + (k + 1) as f64 * w)
    }

    pub fn add(&mut self, value: f64) {
        self.total += 1;
        if !(value >= self.lo && value < self.hi) {
            self.dropped += 1;
            return;
        }
        let k = (((value - self.lo) / self.bin_width()) as usize).min(self.n_bins() - 1);
        self.counts[k] += 1;
    }

    /// Index of the most populated bin (lowest index on ties).
    pub fn peak(&self) -> Option<usize> {
        let max = *self.counts.iter().max()?;
        (max > 0).then(|| self.counts.iter().position(|&c| c == max).expect("max exists"))
    }
}

/// One run per size, with the fit of the resulting fidelities.
#[derive(Debug, Clone)]
pub struct ScalingResult {
    pub records: Vec<RunRecord>,
    pub points: Vec<(usize, f64)>,
    pub fit: Result<FitResult>,
}

/// Runs `spec_at(n)` for each size in `n_list` and fits the fidelities.
pub fn size_scaling<F>(
    spec_at: F,
    ansatz: &AnsatzSpec,
    n_list: &[usize],
    sched: &Schedule,
    opts: &PropagationOptions,
) -> Result<ScalingResult>
where
    F: Fn(usize) -> Result<ModelSpec> + Sync,
{
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("sizes must be strictly ascending".into()));
    }
    let records = n_list
        .par_iter()
        .map(|&n| propagate(&spec_at(n)?, ansatz, sched, opts))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(usize, f64)> = n_list.iter().copied().zip(records.iter().map(|r| r.fidelity)).collect();
    let fit = fit_exponential(&points);
    Ok(ScalingResult {
        records,
        points,
        fit,
    })
}

/// Runs every order in `orders` on the same model.
pub fn order_sweep(
    spec: &ModelSpec,
    orders: &[usize],
    eta: f64,
    sched: &Schedule,
    opts: &PropagationOptions,
) -> Result<Vec<RunRecord>> {
    orders
        .par_iter()
        .map(|&l| propagate(spec, &AnsatzSpec::nested(l, eta), sched, opts))
        .collect()
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    /// One record per instance, ordered by seed.
    pub records: Vec<RunRecord>,
}

impl EnsembleResult {
    pub fn fidelities(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fidelity).collect()
    }

    pub fn sorted_fidelities(&self) -> Vec<f64> {
        let mut f = self.fidelities();
        f.sort_by(f64::total_cmp);
        f
    }

    pub fn mean(&self) -> f64 {
        mean(&self.fidelities())
    }

    /// Unbiased sample variance (zero for a single instance).
    pub fn variance(&self) -> f64 {
        variance(&self.fidelities())
    }

    pub fn histogram(&self, lo: f64, hi: f64, n_bins: usize) -> Result<Histogram> {
        Histogram::from_values(lo, hi, n_bins, &self.fidelities())
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

pub fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

/// `m` random instances with seeds `seed0, seed0 + 1, ...`.
#[allow(clippy::too_many_arguments)]
pub fn random_ensemble(
    n: usize,
    p: u32,
    pj: f64,
    ansatz: &AnsatzSpec,
    m: usize,
    sched: &Schedule,
    opts: &PropagationOptions,
    seed0: u64,
) -> Result<EnsembleResult> {
    if m == 0 {
        return Err(Error::InvalidInput("ensemble needs at least one instance".into()));
    }
    let records = (0..m as u64)
        .into_par_iter()
        .map(|i| propagate(&ModelSpec::random(n, p, pj, seed0 + i)?, ansatz, sched, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleResult { records })
}

/// Minimal gaps of the same instances [`random_ensemble`] would run.
pub fn ensemble_gaps(
    n: usize,
    p: u32,
    pj: f64,
    m: usize,
    seed0: u64,
    lambda_grid: &[f64],
    kind: GapKind,
) -> Result<Vec<MinimalGap>> {
    (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let ham = ModelSpec::random(n, p, pj, seed0 + i)?.build()?;
            minimal_gap(&ham, lambda_grid, kind)
        })
        .collect()
}

/// Linearized Landau-Zener estimate `2 pi Delta^2 T` of the final ground
/// state population for a small gap.
pub fn lz_estimate(delta: f64, total_time: f64) -> f64 {
    let est = 2.0 * std::f64::consts::PI * delta * delta * total_time;
    if est > LZ_VALIDITY_LIMIT {
        log::warn!("Landau-Zener estimate {est:.3} is outside the small-gap regime");
    }
    est
}

/// The same run with the trace weight at `eta = 0` and `eta = 1/2`.
#[derive(Debug, Clone)]
pub struct EtaPair {
    pub ansatz: Ansatz,
    pub symmetric: RunRecord,
    pub whole: RunRecord,
}

impl EtaPair {
    /// `F(eta = 1/2) - F(eta = 0)`.
    pub fn delta_f(&self) -> f64 {
        self.whole.fidelity - self.symmetric.fidelity
    }
}

pub fn eta_comparison(
    spec: &ModelSpec,
    ansatze: &[Ansatz],
    sched: &Schedule,
    opts: &PropagationOptions,
) -> Result<Vec<EtaPair>> {
    if !spec.rep.is_full() {
        return Err(Error::InvalidInput(
            "the eta comparison needs the full Hilbert space".into(),
        ));
    }
    if ansatze.iter().any(|a| matches!(a, Ansatz::None | Ansatz::Exact)) {
        return Err(Error::InvalidInput(
            "the eta comparison needs a variational ansatz".into(),
        ));
    }
    let jobs: Vec<(Ansatz, f64)> = ansatze.iter().flat_map(|&a| [(a, 0.0), (a, 0.5)]).collect();
    let mut records = jobs
        .par_iter()
        .map(|&(a, eta)| propagate(spec, &AnsatzSpec::new(a, eta), sched, opts))
        .collect::<Result<Vec<_>>>()?
        .into_iter();
    Ok(ansatze
        .iter()
        .map(|&ansatz| EtaPair {
            ansatz,
            symmetric: records.next().expect("two records per ansatz"),
            whole: records.next().expect("two records per ansatz"),
        })
        .collect())
}

/// Finite-range runs at `eta = 1/2` for every `(nu, ansatz)` pair, ordered
/// by `nu` first.
pub fn finite_range_sweep(
    n: usize,
    p: u32,
    ansatze: &[Ansatz],
    nus: &[f64],
    sched: &Schedule,
    opts: &PropagationOptions,
) -> Result<Vec<RunRecord>> {
    let jobs: Vec<(f64, Ansatz)> = nus
        .iter()
        .flat_map(|&nu| ansatze.iter().map(move |&a| (nu, a)))
        .collect();
    jobs.par_iter()
        .map(|&(nu, a)| propagate(&ModelSpec::finite_range(n, p, nu)?, &AnsatzSpec::new(a, 0.5), sched, opts))
        .collect()
}

/// Convenience for the maximal-spin uniform model.
pub fn uniform_subspace_at(p: u32) -> impl Fn(usize) -> Result<ModelSpec> + Sync {
    move |n| ModelSpec::uniform_subspace(n, p)
}

/// Convenience for the uniform model in the full space.
pub fn uniform_full_at(p: u32) -> impl Fn(usize) -> Result<ModelSpec> + Sync {
    move |n| ModelSpec::new(n, p, crate::model::Variant::Uniform, Representation::full(n)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn opts(dt: f64) -> PropagationOptions {
        PropagationOptions::with_dt(dt).final_only()
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let pts: Vec<(usize, f64)> = (4..=14).map(|n| (n, 0.8 * (-0.3 * n as f64).exp())).collect();
        let fit = fit_exponential(&pts).unwrap();
        assert_abs_diff_eq!(fit.phi, 0.8, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.gamma, 0.3, epsilon = 1e-10);
        assert!(fit.residual < 1e-12);
        assert_eq!(fit.n_range, (4, 14));
        assert!(fit.excluded.is_empty());
    }

    #[test]
    fn refit_of_predictions_is_a_fixed_point() {
        let pts = [(4, 0.31), (6, 0.12), (9, 0.061), (12, 0.009), (15, 0.0031)];
        let fit = fit_exponential(&pts).unwrap();
        let again: Vec<(usize, f64)> = pts.iter().map(|&(n, _)| (n, fit.predict(n))).collect();
        let refit = fit_exponential(&again).unwrap();
        assert_abs_diff_eq!(refit.phi, fit.phi, epsilon = 1e-12);
        assert_abs_diff_eq!(refit.gamma, fit.gamma, epsilon = 1e-12);
    }

    #[test]
    fn fit_skips_underflow() {
        let mut pts: Vec<(usize, f64)> = (2..=7).map(|n| (n, 2f64.powi(-(n as i32)))).collect();
        pts.push((8, 0.0));
        pts.push((9, 1e-320));
        let fit = fit_exponential(&pts).unwrap();
        assert_eq!(fit.excluded, vec![8, 9]);
        assert_eq!(fit.n_range, (2, 9));
        assert_abs_diff_eq!(fit.gamma, 2f64.ln(), epsilon = 1e-12);
        assert!(fit_exponential(&pts[3..]).is_err());
    }

    #[test]
    fn linear_fit_basics() {
        let f = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert_abs_diff_eq!(f.slope, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.intercept, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn histogram_edges() {
        let h = Histogram::from_values(0.0, 1.0, 4, &[0.0, 0.2499, 0.25, 0.99, 1.0, -0.1]).unwrap();
        assert_eq!(h.counts, vec![2, 1, 0, 1]);
        assert_eq!(h.dropped, 2);
        assert_eq!(h.total, 6);
        assert_eq!(h.peak(), Some(0));
        assert_eq!(h.bin_edges(1), (0.25, 0.5));
        assert!(Histogram::new(1.0, 1.0, 3).is_err());
        assert!(Histogram::new(0.0, 1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn histogram_conserves_counts(values in prop::collection::vec(-0.5f64..1.5, 0..300), bins in 1usize..120) {
            let h = Histogram::from_values(0.3, 0.45, bins, &values).unwrap();
            prop_assert_eq!(h.counts.iter().sum::<u64>() + h.dropped, values.len() as u64);
            prop_assert_eq!(h.total, values.len() as u64);
        }
    }

    #[test]
    fn lz_definition() {
        assert_eq!(lz_estimate(0.0, 3.0), 0.0);
        let delta = (0.1 / (2.0 * std::f64::consts::PI * 2.0)).sqrt();
        assert_abs_diff_eq!(lz_estimate(delta, 2.0), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn ensemble_is_deterministic_and_seeded() {
        let s = Schedule::new(0.5).unwrap();
        let a = random_ensemble(3, 3, 0.5, &AnsatzSpec::bare(), 6, &s, &opts(1e-2), 11).unwrap();
        let b = random_ensemble(3, 3, 0.5, &AnsatzSpec::bare(), 6, &s, &opts(1e-2), 11).unwrap();
        assert_eq!(a.fidelities(), b.fidelities());
        let seeds: Vec<u64> = a.records.iter().map(|r| r.seed.unwrap()).collect();
        assert_eq!(seeds, (11..17).collect::<Vec<_>>());
        // same instance run on its own
        let solo = propagate(&ModelSpec::random(3, 3, 0.5, 13).unwrap(), &AnsatzSpec::bare(), &s, &opts(1e-2)).unwrap();
        assert_eq!(solo.fidelity, a.records[2].fidelity);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| random_ensemble(3, 3, 0.5, &AnsatzSpec::bare(), 6, &s, &opts(1e-2), 11)).unwrap();
        assert_eq!(a.fidelities(), c.fidelities());
    }

    #[test]
    fn full_dilution_probability_has_no_spread() {
        let s = Schedule::new(0.5).unwrap();
        let e = random_ensemble(4, 3, 1.0, &AnsatzSpec::bare(), 5, &s, &opts(1e-2), 0).unwrap();
        let f = e.fidelities();
        assert!(f.iter().all(|&x| x == f[0]));
        assert_eq!(e.variance(), 0.0);
        let h = e.histogram(0.0, 1.0, 100).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
    }

    #[test]
    fn zero_range_exponent_matches_uniform() {
        let s = Schedule::new(0.3).unwrap();
        let recs = finite_range_sweep(4, 3, &[Ansatz::Cyclic], &[0.0], &s, &opts(1e-2)).unwrap();
        let uniform = propagate(&uniform_full_at(3)(4).unwrap(), &AnsatzSpec::cyclic(0.5), &s, &opts(1e-2)).unwrap();
        assert_eq!(recs[0].pgs, uniform.pgs);
    }

    #[test]
    fn symmetric_weight_matches_subspace_dynamics() {
        let s = Schedule::new(1.0).unwrap();
        let o = PropagationOptions::with_dt(2e-3);
        for n in [3, 5] {
            for a in [AnsatzSpec::cyclic(0.0), AnsatzSpec::nested(2, 0.0)] {
                let full = propagate(&uniform_full_at(3)(n).unwrap(), &a, &s, &o).unwrap();
                let sub = propagate(&ModelSpec::uniform_subspace(n, 3).unwrap(), &a, &s, &o).unwrap();
                for (x, y) in full.pgs.iter().zip(&sub.pgs) {
                    assert_abs_diff_eq!(x, y, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn eta_pairs_are_ordered() {
        let s = Schedule::new(0.2).unwrap();
        let spec = uniform_full_at(3)(3).unwrap();
        let pairs = eta_comparison(&spec, &[Ansatz::Cyclic, Ansatz::Nested { order: 2 }], &s, &opts(1e-2)).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[1].ansatz, Ansatz::Nested { order: 2 });
        assert_eq!(pairs[0].symmetric.ansatz.eta, 0.0);
        assert_eq!(pairs[0].whole.ansatz.eta, 0.5);
        let sub = ModelSpec::uniform_subspace(3, 3).unwrap();
        assert!(eta_comparison(&sub, &[Ansatz::Cyclic], &s, &opts(1e-2)).is_err());
    }

    #[test]
    fn low_orders_help_small_systems() {
        let s = Schedule::new(1.0).unwrap();
        let recs = order_sweep(&ModelSpec::uniform_subspace(6, 3).unwrap(), &[1, 2, 3], 0.0, &s, &opts(1e-3)).unwrap();
        for w in recs.windows(2) {
            assert!(w[1].fidelity >= w[0].fidelity, "{} < {}", w[1].fidelity, w[0].fidelity);
        }
    }

    #[test]
    fn scaling_rejects_unsorted_sizes() {
        let s = Schedule::new(1.0).unwrap();
        assert!(size_scaling(uniform_subspace_at(3), &AnsatzSpec::bare(), &[5, 4], &s, &opts(1e-2)).is_err());
    }

    #[test]
    fn p2_gap_follows_cube_root() {
        let grid = crate::dynamics::uniform_lambda_grid(101);
        let sizes = [10usize, 20, 30, 40, 50, 60];
        let gaps: Vec<f64> = sizes
            .iter()
            .map(|&n| {
                let ham = ModelSpec::uniform_subspace(n, 2).unwrap().build().unwrap();
                minimal_gap(&ham, &grid, GapKind::Coupled).unwrap().delta
            })
            .collect();
        let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope + 1.0 / 3.0).abs() <= 0.1, "slope {}", fit.slope);
    }
}
