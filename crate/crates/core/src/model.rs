//! Annealing Hamiltonians and the interpolation schedule.
//!
//! Energies are in units of `Gamma = J = hbar = 1`. The driver is
//! `H_q = -2 S_x`, the target the p-spin ferromagnet
//! `H_p = -(1 / n^(p-1)) sum_{i_1..i_p} J_{i_1..i_p} sigma^z_{i_1} ... sigma^z_{i_p}`
//! with uniform, distance-weighted or randomly diluted couplings.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin_algebra::{collective_spin_ops, site_z, Operator, RepKind, Representation};

/// Name of the generator used for random dilution.
pub const RNG_ALGORITHM: &str = "ChaCha8";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    Uniform,
    FiniteRange { nu: f64 },
    Random { pj: f64, seed: u64 },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Uniform => "uniform",
            Variant::FiniteRange { .. } => "finite_range",
            Variant::Random { .. } => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n: usize,
    pub p: u32,
    pub variant: Variant,
    pub rep: Representation,
}

impl ModelSpec {
    pub fn new(n: usize, p: u32, variant: Variant, rep: Representation) -> Result<Self> {
        let spec = Self { n, p, variant, rep };
        spec.validate()?;
        Ok(spec)
    }

    /// Uniform p-spin model in the maximum-spin subspace.
    pub fn uniform_subspace(n: usize, p: u32) -> Result<Self> {
        Self::new(n, p, Variant::Uniform, Representation::max_spin(n)?)
    }

    pub fn uniform_full(n: usize, p: u32) -> Result<Self> {
        Self::new(n, p, Variant::Uniform, Representation::full(n)?)
    }

    pub fn finite_range(n: usize, p: u32, nu: f64) -> Result<Self> {
        Self::new(n, p, Variant::FiniteRange { nu }, Representation::full(n)?)
    }

    pub fn random(n: usize, p: u32, pj: f64, seed: u64) -> Result<Self> {
        Self::new(n, p, Variant::Random { pj, seed }, Representation::full(n)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be positive".into()));
        }
        if self.p == 0 {
            return Err(Error::InvalidInput("p must be positive".into()));
        }
        if self.rep.n() != self.n {
            return Err(Error::InvalidInput(format!(
                "representation is for n = {}, model has n = {}",
                self.rep.n(),
                self.n
            )));
        }
        match self.variant {
            Variant::Uniform => {}
            Variant::FiniteRange { nu } => {
                self.require_full()?;
                if !(nu >= 0.0 && nu.is_finite()) {
                    return Err(Error::InvalidInput(format!("nu = {nu} must be >= 0")));
                }
                // With n <= p every tuple of distinct sites is a permutation
                // of the whole chain, so all couplings equal J.
                if self.p >= 2 && self.n <= self.p as usize {
                    return Err(Error::InvalidInput(format!(
                        "finite-range model is undefined for n = {} with p = {}",
                        self.n, self.p
                    )));
                }
            }
            Variant::Random { pj, .. } => {
                self.require_full()?;
                if !(0.0..=1.0).contains(&pj) {
                    return Err(Error::OutOfRange {
                        what: "P_J",
                        value: pj,
                        lo: 0.0,
                        hi: 1.0,
                    });
                }
            }
        }
        Ok(())
    }

    fn require_full(&self) -> Result<()> {
        if self.rep.kind() != RepKind::FullHilbert {
            return Err(Error::InvalidInput(format!(
                "{} variant breaks spin symmetry and needs the full Hilbert space",
                self.variant.name()
            )));
        }
        Ok(())
    }

    pub fn seed(&self) -> Option<u64> {
        match self.variant {
            Variant::Random { seed, .. } => Some(seed),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<AnnealingHamiltonian> {
        self.validate()?;
        Ok(AnnealingHamiltonian {
            spec: *self,
            driver: driver_hamiltonian(self)?,
            target: target_hamiltonian(self)?,
        })
    }
}

/// Total annealing time `T` and the schedule
/// `lambda(t) = sin^2[(pi/2) sin^2(pi t / 2T)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    total_time: f64,
}

/// Slack allowed when a time lands just outside `[0, T]` from rounding.
const TIME_SLACK: f64 = 1e-12;

impl Schedule {
    pub fn new(total_time: f64) -> Result<Self> {
        if !(total_time > 0.0 && total_time.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "annealing time must be positive, got {total_time}"
            )));
        }
        Ok(Self { total_time })
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    fn check(&self, t: f64) -> Result<f64> {
        let slack = TIME_SLACK * self.total_time.max(1.0);
        if !(t >= -slack && t <= self.total_time + slack) {
            return Err(Error::OutOfRange {
                what: "t",
                value: t,
                lo: 0.0,
                hi: self.total_time,
            });
        }
        Ok(t.clamp(0.0, self.total_time))
    }

    pub fn lambda(&self, t: f64) -> Result<f64> {
        let t = self.check(t)?;
        let v = PI * t / (2.0 * self.total_time);
        let u = 0.5 * PI * v.sin().powi(2);
        Ok(u.sin().powi(2))
    }

    /// Analytic derivative `(pi^2 / 4T) sin(2u) sin(2v)`.
    pub fn lambda_dot(&self, t: f64) -> Result<f64> {
        let t = self.check(t)?;
        let v = PI * t / (2.0 * self.total_time);
        let u = 0.5 * PI * v.sin().powi(2);
        Ok(PI * PI / (4.0 * self.total_time) * (2.0 * u).sin() * (2.0 * v).sin())
    }
}

/// `H_q = -2 S_x`.
pub fn driver_hamiltonian(spec: &ModelSpec) -> Result<Operator> {
    let ops = collective_spin_ops(spec.rep);
    Ok(ops.sx.scale(-2.0))
}

/// Diagonal target Hamiltonian for the spec's variant.
pub fn target_hamiltonian(spec: &ModelSpec) -> Result<Operator> {
    spec.validate()?;
    let diag = match spec.rep.kind() {
        RepKind::MaxSpinSubspace => subspace_target_diagonal(spec.n, spec.p),
        RepKind::FullHilbert => {
            let couplings = coupling_table(spec)?;
            full_target_diagonal(spec.n, spec.p, &couplings)
        }
    };
    Operator::diagonal(spec.rep, &diag)
}

/// `-(2m)^p / n^(p-1)` for `m = n/2 - w`.
fn subspace_target_diagonal(n: usize, p: u32) -> Vec<f64> {
    let norm = (n as f64).powi(p as i32 - 1);
    (0..=n)
        .map(|w| {
            let two_m = n as f64 - 2.0 * w as f64;
            -two_m.powi(p as i32) / norm
        })
        .collect()
}

/// Index tuples `(i_1, ..., i_p)` in lexicographic order, 1-based.
pub fn index_tuples(n: usize, p: u32) -> impl Iterator<Item = Vec<usize>> {
    let total = n.pow(p);
    (0..total).map(move |mut k| {
        let mut tuple = vec![0; p as usize];
        for slot in tuple.iter_mut().rev() {
            *slot = k % n + 1;
            k /= n;
        }
        tuple
    })
}

/// Coupling `J_{i_1..i_p}` (with `J = 1`) for each tuple of
/// [`index_tuples`].
pub fn coupling_table(spec: &ModelSpec) -> Result<Vec<f64>> {
    match spec.variant {
        Variant::Uniform => Ok(vec![1.0; spec.n.pow(spec.p)]),
        Variant::FiniteRange { nu } => Ok(index_tuples(spec.n, spec.p)
            .map(|t| 1.0 / dist(&t).powf(nu))
            .collect()),
        Variant::Random { pj, seed } => Ok(random_couplings(spec.n, spec.p, pj, seed)),
    }
}

/// One Bernoulli draw per ordered tuple: `1` with probability `pj`, else 0.
pub fn random_couplings(n: usize, p: u32, pj: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n.pow(p))
        .map(|_| if rng.random::<f64>() < pj { 1.0 } else { 0.0 })
        .collect()
}

fn full_target_diagonal(n: usize, p: u32, couplings: &[f64]) -> Vec<f64> {
    let norm = (n as f64).powi(p as i32 - 1);
    let dim = 1usize << n;
    let tuples: Vec<(Vec<usize>, f64)> = index_tuples(n, p)
        .zip(couplings.iter().copied())
        .filter(|(_, j)| *j != 0.0)
        .collect();
    (0..dim)
        .map(|state| {
            let mut e = 0.0;
            for (tuple, j) in &tuples {
                let sign: f64 = tuple.iter().map(|&i| site_z(n, i, state)).product();
                e += j * sign;
            }
            -e / norm
        })
        .collect()
}

/// Normalized chain distance of a tuple of 1-based site labels:
/// `sum_{j<k} |i_k - i_j| / Z` with `Z = (p^3 - p)/6` when all labels are
/// distinct, 1 otherwise.
pub fn dist(indices: &[usize]) -> f64 {
    let p = indices.len();
    if p < 2 {
        return 1.0;
    }
    let mut sum = 0usize;
    for j in 0..p {
        for k in (j + 1)..p {
            if indices[j] == indices[k] {
                return 1.0;
            }
            sum += indices[j].abs_diff(indices[k]);
        }
    }
    let z = (p * p * p - p) as f64 / 6.0;
    sum as f64 / z
}

/// Driver and target Hamiltonians of one model instance.
#[derive(Debug, Clone)]
pub struct AnnealingHamiltonian {
    spec: ModelSpec,
    driver: Operator,
    target: Operator,
}

impl AnnealingHamiltonian {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn rep(&self) -> Representation {
        self.spec.rep
    }

    pub fn driver(&self) -> &Operator {
        &self.driver
    }

    pub fn target(&self) -> &Operator {
        &self.target
    }

    /// `(1 - lambda) H_q + lambda H_p`
    pub fn h0(&self, lambda: f64) -> Result<Operator> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::OutOfRange {
                what: "lambda",
                value: lambda,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(&self.driver.scale(1.0 - lambda) + &self.target.scale(lambda))
    }

    /// `dH_0/dlambda = H_p - H_q`
    pub fn dh0(&self) -> Operator {
        &self.target - &self.driver
    }
}
