//! Variational adiabatic gauge potentials.
//!
//! For a trial potential `A = sum_j alpha_j A_j` the operator
//! `G = dH_0 + i[A, H_0] = O_0 + sum_j alpha_j M_j` with `M_j = i[A_j, H_0]`
//! is Hermitian, and the action `S(alpha) = wTr(G^2)` is the quadratic form
//! `A + 2 B.alpha + alpha^T C alpha` with `A = wTr(O_0^2)`,
//! `B_j = wTr(O_0 M_j)`, `C_jk = wTr(M_j M_k)`. The minimizer diagonalizes
//! `C`, drops modes below `GRAM_REL_TOL * max_eigenvalue`, and solves the
//! remaining modes independently.
//!
//! Besides the generic path this module has two solvers used by the
//! propagator: the nested-commutator ansatz evaluated in the eigenbasis of
//! `H_0` (where `O_k` is a Hadamard power of `O_0`), and a fixed-basis solver
//! that exploits the linearity of `H_0` in `lambda` to precompute the
//! quadratic form once.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, I};
use crate::model::AnnealingHamiltonian;
use crate::spin_algebra::{collective_spin_ops, Operator, Prepared, Representation, TraceWeight};

/// Relative eigenvalue cutoff for the Gram matrix `C`.
pub const GRAM_REL_TOL: f64 = 1e-10;

/// Minimum level spacing accepted by [`exact_cd`].
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct VariationalBasis {
    ops: Vec<Operator>,
    labels: Vec<String>,
}

impl VariationalBasis {
    pub fn new(ops: Vec<Operator>, labels: Vec<String>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidInput("variational basis is empty".into()));
        }
        if ops.len() != labels.len() {
            return Err(Error::InvalidInput("one label per basis operator".into()));
        }
        let rep = ops[0].rep();
        let mut checked = Vec::with_capacity(ops.len());
        for op in ops {
            if op.rep() != rep {
                return Err(Error::DimensionMismatch {
                    expected: rep.dim(),
                    got: op.dim(),
                });
            }
            checked.push(op.into_hermitian()?);
        }
        Ok(Self {
            ops: checked,
            labels,
        })
    }

    pub fn ops(&self) -> &[Operator] {
        &self.ops
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn rep(&self) -> Representation {
        self.ops[0].rep()
    }

    /// `sum_j alphas[j] A_j`
    pub fn combine(&self, alphas: &[f64]) -> Operator {
        let mut acc = linalg::zeros(self.rep().dim());
        for (op, &a) in self.ops.iter().zip(alphas) {
            linalg::axpy(&mut acc, c(a), op.matrix());
        }
        Operator::from_parts(self.rep(), acc, true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSolution {
    pub alphas: Vec<f64>,
    pub action_min: f64,
    /// Action at `alpha = 0`, i.e. `wTr(O_0^2)`.
    pub action_zero: f64,
    /// Largest over smallest retained Gram eigenvalue; infinite when every
    /// mode was dropped.
    pub gram_condition: f64,
    pub dropped_modes: usize,
}

/// Quadratic form `a0 + 2 b.alpha + alpha^T c alpha`.
#[derive(Debug, Clone)]
pub struct QuadraticAction {
    pub a0: f64,
    pub b: Vec<f64>,
    pub c: Mat<f64>,
}

impl QuadraticAction {
    pub fn evaluate(&self, alphas: &[f64]) -> f64 {
        let l = self.b.len();
        let mut s = self.a0;
        for j in 0..l {
            s += 2.0 * self.b[j] * alphas[j];
            for k in 0..l {
                s += alphas[j] * self.c[(j, k)] * alphas[k];
            }
        }
        s
    }

    /// Stationary point restricted to the well-conditioned modes of `c`.
    pub fn minimize(&self) -> Result<ActionSolution> {
        let l = self.b.len();
        let (evals, evecs) = linalg::eigh_real(&self.c)?;
        let max_eval = evals.iter().copied().fold(0.0f64, f64::max);
        // An identically vanishing C: the basis commutes with H_0.
        if max_eval <= 1e-20 * self.a0.abs().max(1.0) {
            return Ok(ActionSolution {
                alphas: vec![0.0; l],
                action_min: self.a0,
                action_zero: self.a0,
                gram_condition: f64::INFINITY,
                dropped_modes: l,
            });
        }
        let cutoff = GRAM_REL_TOL * max_eval;
        let mut alphas = vec![0.0; l];
        let mut dropped = 0;
        let mut min_kept = f64::INFINITY;
        for (k, &d) in evals.iter().enumerate() {
            if d < cutoff {
                dropped += 1;
                continue;
            }
            min_kept = min_kept.min(d);
            let b_rot: f64 = (0..l).map(|j| evecs[(j, k)] * self.b[j]).sum();
            let a_rot = -b_rot / d;
            for (j, a) in alphas.iter_mut().enumerate() {
                *a += evecs[(j, k)] * a_rot;
            }
        }
        let action_min = self.evaluate(&alphas).max(0.0);
        Ok(ActionSolution {
            alphas,
            action_min,
            action_zero: self.a0,
            gram_condition: max_eval / min_kept,
            dropped_modes: dropped,
        })
    }
}

/// Builds the quadratic form from `O_0` and the Hermitian directions `M_j`.
fn action_from_directions(
    weight: &TraceWeight,
    o0: &Prepared,
    dirs: &[Prepared],
) -> QuadraticAction {
    let l = dirs.len();
    let a0 = weight.inner(o0, o0);
    let b = dirs.iter().map(|m| weight.inner(o0, m)).collect();
    let mut cm = Mat::zeros(l, l);
    for j in 0..l {
        for k in j..l {
            let v = weight.inner(&dirs[j], &dirs[k]);
            cm[(j, k)] = v;
            cm[(k, j)] = v;
        }
    }
    QuadraticAction { a0, b, c: cm }
}

fn check_pair(h0: &Operator, dh0: &Operator) -> Result<()> {
    h0.check_same(dh0)
}

fn check_weight(rep: Representation, weight: &TraceWeight) -> Result<()> {
    if let Some(emb) = weight.embedding() {
        if !rep.is_full() || emb.n() != rep.n() {
            return Err(Error::DimensionMismatch {
                expected: 1 << emb.n(),
                got: rep.dim(),
            });
        }
    } else if rep.is_full() && weight.eta() != 0.5 {
        return Err(Error::InvalidInput(
            "full-space weighting with eta != 1/2 needs a Dicke embedding".into(),
        ));
    }
    Ok(())
}

/// Quadratic action of an arbitrary Hermitian basis.
pub fn quadratic_action(
    h0: &Operator,
    dh0: &Operator,
    basis: &VariationalBasis,
    weight: &TraceWeight,
) -> Result<QuadraticAction> {
    check_pair(h0, dh0)?;
    if basis.rep() != h0.rep() {
        return Err(Error::DimensionMismatch {
            expected: h0.dim(),
            got: basis.rep().dim(),
        });
    }
    check_weight(h0.rep(), weight)?;
    let o0 = weight.prepare(dh0.matrix());
    let dirs: Vec<Prepared> = basis
        .ops()
        .iter()
        .map(|a| {
            let m = linalg::scaled(&linalg::commutator(a.matrix(), h0.matrix()), I);
            weight.prepare(&m)
        })
        .collect();
    Ok(action_from_directions(weight, &o0, &dirs))
}

/// Minimizes `wTr(G^2)` over the span of `basis`.
pub fn minimize_quadratic_action(
    h0: &Operator,
    dh0: &Operator,
    basis: &VariationalBasis,
    weight: &TraceWeight,
) -> Result<ActionSolution> {
    quadratic_action(h0, dh0, basis, weight)?.minimize()
}

/// `[O_0, ..., O_{2l}]` with `O_0 = dH_0` and `O_k = [H_0, O_{k-1}]`.
pub fn nested_operators(h0: &Operator, dh0: &Operator, l: usize) -> Result<Vec<Operator>> {
    check_pair(h0, dh0)?;
    if l == 0 {
        return Err(Error::InvalidInput("nested-commutator order must be >= 1".into()));
    }
    let mut ops = Vec::with_capacity(2 * l + 1);
    ops.push(dh0.clone());
    for k in 1..=2 * l {
        let next = h0.commutator(&ops[k - 1])?;
        ops.push(next);
    }
    Ok(ops)
}

/// Nested-commutator potential `A = sum_k alpha_k i O_{2k-1}` of order `l`.
///
/// The returned coefficients are the `alpha_k` of that expansion; for
/// `p = 1` and `l = 1` they equal [`p1_alpha_analytic`].
pub fn nc_potential(
    h0: &Operator,
    dh0: &Operator,
    l: usize,
    weight: &TraceWeight,
) -> Result<(Operator, ActionSolution)> {
    check_weight(h0.rep(), weight)?;
    let ops = nested_operators(h0, dh0, l)?;
    let o0 = weight.prepare(ops[0].matrix());
    // i[i O_{2k-1}, H_0] = O_{2k}
    let dirs: Vec<Prepared> = (1..=l).map(|k| weight.prepare(ops[2 * k].matrix())).collect();
    let sol = action_from_directions(weight, &o0, &dirs).minimize()?;
    let mut acc = linalg::zeros(h0.dim());
    for (k, &a) in sol.alphas.iter().enumerate() {
        linalg::axpy(&mut acc, I * a, ops[2 * k + 1].matrix());
    }
    let pot = Operator::new(h0.rep(), acc, true)?;
    Ok((pot, sol))
}

/// `{S_y, S_y^3, S_x S_y S_z + h.c.}`
pub fn ca_basis(rep: Representation) -> VariationalBasis {
    let ops = collective_spin_ops(rep);
    let sy3 = ops.sy.pow(3);
    let xyz = (&(&ops.sx * &ops.sy) * &ops.sz).plus_adjoint();
    VariationalBasis::new(
        vec![ops.sy, sy3, xyz],
        vec!["Sy".into(), "Sy^3".into(), "SxSySz+h.c.".into()],
    )
    .expect("collective spin polynomials are Hermitian")
}

/// Three-parameter cyclic-ansatz potential.
pub fn ca_potential(
    h0: &Operator,
    dh0: &Operator,
    weight: &TraceWeight,
) -> Result<(Operator, ActionSolution)> {
    let basis = ca_basis(h0.rep());
    let sol = minimize_quadratic_action(h0, dh0, &basis, weight)?;
    Ok((basis.combine(&sol.alphas), sol))
}

/// Exact gauge potential
/// `A = i sum_{m != l} <m|dH_0|l> / (e_l - e_m) |m><l|`.
///
/// Refuses degenerate spectra.
pub fn exact_cd(h0: &Operator, dh0: &Operator) -> Result<Operator> {
    check_pair(h0, dh0)?;
    let eig = linalg::eigh(h0.matrix())?;
    let spacing = eig
        .values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if spacing <= DEGENERACY_TOL {
        return Err(Error::DegenerateSpectrum { spacing });
    }
    let v = &eig.vectors;
    let o0 = v.adjoint() * (dh0.matrix() * v);
    let d = h0.dim();
    let a_eig = CMat::from_fn(d, d, |m, l| {
        if m == l {
            Complex64::new(0.0, 0.0)
        } else {
            I * o0[(m, l)] / (eig.values[l] - eig.values[m])
        }
    });
    let a = v * (&a_eig * v.adjoint());
    Operator::new(h0.rep(), a, true)
}

/// Closed-form `p = 1` nested-commutator coefficient
/// `-1 / (4 - 8 lambda + 8 lambda^2)`.
pub fn p1_alpha_analytic(lambda: f64) -> f64 {
    -1.0 / (4.0 - 8.0 * lambda + 8.0 * lambda * lambda)
}

/// Nested-commutator solver working in the eigenbasis of `H_0`.
///
/// With `H_0 = V diag(e) V^dag`, the nested commutators are
/// `O_k = V (w^k o O_0') V^dag` where `w_rm = e_r - e_m`, so the directions
/// `O_{2k}` form the Krylov sequence of `O_0'` under entrywise
/// multiplication by `w^2`. The monomial Gram matrix of that sequence is a
/// Hankel moment matrix whose conditioning degrades exponentially with the
/// order, so the minimization runs on an Arnoldi-orthonormalized basis of
/// the same span instead. Reported `alphas` are converted back to the
/// monomial convention; the potential is assembled from the stable basis.
#[derive(Debug, Clone)]
pub struct NestedEigenSolver {
    order: usize,
    weight: TraceWeight,
}

/// Result of one eigenbasis solve.
pub struct EigenSolve {
    pub potential: Operator,
    pub solution: ActionSolution,
}

impl NestedEigenSolver {
    pub fn new(order: usize, weight: TraceWeight) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("nested-commutator order must be >= 1".into()));
        }
        Ok(Self { order, weight })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn solve(&self, h0: &Operator, dh0: &Operator) -> Result<EigenSolve> {
        check_pair(h0, dh0)?;
        check_weight(h0.rep(), &self.weight)?;
        let eig = linalg::eigh(h0.matrix())?;
        let v = &eig.vectors;
        let d = h0.dim();
        let l = self.order;
        let o0 = v.adjoint() * (dh0.matrix() * v);
        let omega = |r: usize, m: usize| eig.values[r] - eig.values[m];
        let rotated_basis = self
            .weight
            .embedding()
            .map(|emb| v.adjoint() * emb.basis());
        let prep = |mat: CMat| self.weight.prepare_in(mat, rotated_basis.as_ref());
        let times_x = |mat: &CMat| {
            CMat::from_fn(d, d, |r, m| {
                let w = omega(r, m);
                mat[(r, m)] * (w * w)
            })
        };

        // Arnoldi on the Krylov sequence x o O_0', x^2 o O_0', ... with
        // x = w^2. Entry k of `poly` holds the monomial coefficients of the
        // k-th orthonormal direction.
        let o0p = prep(o0.clone());
        let mut basis: Vec<Prepared> = Vec::with_capacity(l);
        let mut poly: Vec<Vec<f64>> = Vec::with_capacity(l);
        for k in 0..l {
            let (mut w, mut coeffs) = match basis.last() {
                None => {
                    let mut e = vec![0.0; l];
                    e[0] = 1.0;
                    (prep(times_x(&o0)), e)
                }
                Some(prev) => {
                    let mut shifted = vec![0.0; l];
                    shifted[1..].copy_from_slice(&poly[k - 1][..l - 1]);
                    (prep(times_x(prev.mat())), shifted)
                }
            };
            let start_norm = self.weight.inner(&w, &w).max(0.0).sqrt();
            for _ in 0..2 {
                for (q, qc) in basis.iter().zip(&poly) {
                    let h = self.weight.inner(q, &w);
                    w.axpy(-h, q);
                    for (c, qv) in coeffs.iter_mut().zip(qc) {
                        *c -= h * qv;
                    }
                }
            }
            let norm = self.weight.inner(&w, &w).max(0.0).sqrt();
            // The Krylov space is invariant from here on.
            if !(norm > GRAM_REL_TOL * start_norm) {
                break;
            }
            w.scale(1.0 / norm);
            coeffs.iter_mut().for_each(|c| *c /= norm);
            basis.push(w);
            poly.push(coeffs);
        }

        let betas: Vec<f64> = basis.iter().map(|q| -self.weight.inner(q, &o0p)).collect();
        let mut alphas = vec![0.0; l];
        let mut m_eig = linalg::zeros(d);
        for ((q, qc), &b) in basis.iter().zip(&poly).zip(&betas) {
            linalg::axpy(&mut m_eig, c(b), q.mat());
            for (a, qv) in alphas.iter_mut().zip(qc) {
                *a += b * qv;
            }
        }
        let mut g = prep(o0.clone());
        g.axpy(1.0, &prep(m_eig.clone()));
        let solution = ActionSolution {
            alphas,
            action_min: self.weight.inner(&g, &g).max(0.0),
            action_zero: self.weight.inner(&o0p, &o0p),
            gram_condition: monomial_condition(&poly),
            dropped_modes: l - basis.len(),
        };

        // i[A, H_0] = M  <=>  A'_rm = i M'_rm / w_rm off the kernel.
        let a_eig = CMat::from_fn(d, d, |r, m| {
            let w = omega(r, m);
            if w == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                I * m_eig[(r, m)] / w
            }
        });
        // Hermitian by construction; symmetrize away the rotation roundoff.
        let a = v * (&a_eig * v.adjoint());
        let a = (&a + a.adjoint()) * faer::Scale(c(0.5));
        let potential = Operator::from_parts(h0.rep(), a, true);
        Ok(EigenSolve {
            potential,
            solution,
        })
    }
}

/// Condition number of the monomial Gram matrix `T^T T`, where `T` inverts
/// the triangular change of basis accumulated by the Arnoldi process.
fn monomial_condition(poly: &[Vec<f64>]) -> f64 {
    let kept = poly.len();
    if kept == 0 {
        return f64::INFINITY;
    }
    // r[(j, k)]: coefficient of x^(j+1) in direction k, upper triangular.
    let r = Mat::from_fn(kept, kept, |j, k| poly[k][j]);
    let mut t = Mat::<f64>::zeros(kept, kept);
    for col in 0..kept {
        for row in (0..=col).rev() {
            let mut s = if row == col { 1.0 } else { 0.0 };
            for k in row + 1..=col {
                s -= r[(row, k)] * t[(k, col)];
            }
            t[(row, col)] = s / r[(row, row)];
        }
    }
    let gram = t.transpose() * &t;
    match linalg::eigh_real(&gram) {
        Ok((vals, _)) => vals[kept - 1] / vals[0].max(f64::MIN_POSITIVE),
        Err(_) => f64::INFINITY,
    }
}

/// Fixed-basis solver for `H_0(lambda) = (1 - lambda) H_q + lambda H_p`.
///
/// `M_j(lambda)` is affine in `lambda`, so `B` is affine and `C` quadratic;
/// their coefficients are computed once and each `lambda` costs only an
/// `l x l` eigendecomposition.
#[derive(Debug, Clone)]
pub struct FixedBasisSolver {
    basis: VariationalBasis,
    a0: f64,
    b_q: Vec<f64>,
    b_p: Vec<f64>,
    c_qq: Mat<f64>,
    c_qp: Mat<f64>,
    c_pp: Mat<f64>,
}

impl FixedBasisSolver {
    pub fn new(
        ham: &AnnealingHamiltonian,
        basis: VariationalBasis,
        weight: &TraceWeight,
    ) -> Result<Self> {
        if basis.rep() != ham.rep() {
            return Err(Error::DimensionMismatch {
                expected: ham.rep().dim(),
                got: basis.rep().dim(),
            });
        }
        check_weight(ham.rep(), weight)?;
        let dh0 = ham.dh0();
        let o0 = weight.prepare(dh0.matrix());
        let direction = |a: &Operator, h: &Operator| {
            weight.prepare(&linalg::scaled(&linalg::commutator(a.matrix(), h.matrix()), I))
        };
        let mq: Vec<Prepared> = basis.ops().iter().map(|a| direction(a, ham.driver())).collect();
        let mp: Vec<Prepared> = basis.ops().iter().map(|a| direction(a, ham.target())).collect();
        let l = basis.len();
        let gram = |x: &[Prepared], y: &[Prepared]| {
            Mat::from_fn(l, l, |j, k| weight.inner(&x[j], &y[k]))
        };
        Ok(Self {
            a0: weight.inner(&o0, &o0),
            b_q: mq.iter().map(|m| weight.inner(&o0, m)).collect(),
            b_p: mp.iter().map(|m| weight.inner(&o0, m)).collect(),
            c_qq: gram(&mq, &mq),
            c_qp: gram(&mq, &mp),
            c_pp: gram(&mp, &mp),
            basis,
        })
    }

    pub fn cyclic(ham: &AnnealingHamiltonian, weight: &TraceWeight) -> Result<Self> {
        Self::new(ham, ca_basis(ham.rep()), weight)
    }

    pub fn basis(&self) -> &VariationalBasis {
        &self.basis
    }

    pub fn action(&self, lambda: f64) -> QuadraticAction {
        let (u, v) = (1.0 - lambda, lambda);
        let l = self.basis.len();
        let b = (0..l).map(|j| u * self.b_q[j] + v * self.b_p[j]).collect();
        let cm = Mat::from_fn(l, l, |j, k| {
            u * u * self.c_qq[(j, k)]
                + u * v * (self.c_qp[(j, k)] + self.c_qp[(k, j)])
                + v * v * self.c_pp[(j, k)]
        });
        QuadraticAction { a0: self.a0, b, c: cm }
    }

    pub fn coefficients(&self, lambda: f64) -> Result<ActionSolution> {
        self.action(lambda).minimize()
    }

    pub fn solve(&self, lambda: f64) -> Result<(Operator, ActionSolution)> {
        let sol = self.coefficients(lambda)?;
        Ok((self.basis.combine(&sol.alphas), sol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use crate::spin_algebra::DickeEmbedding;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn subspace(n: usize, p: u32) -> AnnealingHamiltonian {
        ModelSpec::uniform_subspace(n, p).unwrap().build().unwrap()
    }

    #[test]
    fn p1_nested_operators_closed_forms() {
        for n in [1, 2, 5, 12] {
            let ham = subspace(n, 1);
            let ops = collective_spin_ops(ham.rep());
            for lam in [0.0, 0.3, 0.5, 0.9] {
                let h0 = ham.h0(lam).unwrap();
                let nested = nested_operators(&h0, &ham.dh0(), 1).unwrap();
                let o0 = (&ops.sx - &ops.sz).scale(2.0);
                assert!(nested[0].max_abs_diff(&o0) < 1e-13);
                let o1 = ops.sy.scale_complex(Complex64::new(0.0, -4.0));
                assert!(nested[1].max_abs_diff(&o1) < 1e-12);
                let o2 = &ops.sz.scale(-8.0 * (1.0 - lam)) + &ops.sx.scale(8.0 * lam);
                assert!(nested[2].max_abs_diff(&o2) < 1e-12);
            }
        }
    }

    #[test]
    fn nested_operator_parity() {
        let ham = subspace(6, 3);
        let h0 = ham.h0(0.4).unwrap();
        let ops = nested_operators(&h0, &ham.dh0(), 3).unwrap();
        assert_eq!(ops.len(), 7);
        for (k, o) in ops.iter().enumerate() {
            let adj = o.adjoint();
            let scale = o.frobenius_norm().max(1.0);
            if k % 2 == 0 {
                assert!(o.max_abs_diff(&adj) / scale < 1e-12);
            } else {
                assert!(o.max_abs_diff(&adj.scale(-1.0)) / scale < 1e-12);
            }
        }
        assert!(nested_operators(&h0, &ham.dh0(), 0).is_err());
        let other = subspace(5, 3).dh0();
        assert!(nested_operators(&h0, &other, 1).is_err());
    }

    #[test]
    fn p1_trace_identities() {
        for n in [1usize, 2, 3, 8, 25] {
            let ham = subspace(n, 1);
            let nf = n as f64;
            let base = nf * (nf + 1.0) * (nf + 2.0) / 12.0;
            for lam in [0.0, 0.2, 0.5, 0.85] {
                let h0 = ham.h0(lam).unwrap();
                let ops = nested_operators(&h0, &ham.dh0(), 1).unwrap();
                let t02 = (&ops[0] * &ops[2]).trace().re;
                let t22 = (&ops[2] * &ops[2]).trace().re;
                assert_abs_diff_eq!(t02, 16.0 * base, epsilon = 1e-9 * t02.abs());
                let expected = 64.0 * base * (1.0 - 2.0 * lam + 2.0 * lam * lam);
                assert_abs_diff_eq!(t22, expected, epsilon = 1e-9 * expected);
            }
        }
        let ham = subspace(2, 1);
        let ops = nested_operators(&ham.h0(0.3).unwrap(), &ham.dh0(), 1).unwrap();
        assert_abs_diff_eq!((&ops[0] * &ops[2]).trace().re, 32.0, epsilon = 1e-12);
    }

    #[test]
    fn p1_analytic_values() {
        assert_abs_diff_eq!(p1_alpha_analytic(0.0), -0.25);
        assert_abs_diff_eq!(p1_alpha_analytic(0.5), -0.5);
        assert_abs_diff_eq!(p1_alpha_analytic(1.0), -0.25);
        assert_abs_diff_eq!(p1_alpha_analytic(0.3), -1.0 / 2.32, epsilon = 1e-15);
    }

    #[test]
    fn sy_basis_coefficient_is_four_times_nc_alpha() {
        // i O_1 = 4 S_y, so the coefficient on S_y alone is 4 alpha.
        for n in [1, 4, 30] {
            let ham = subspace(n, 1);
            let sy = collective_spin_ops(ham.rep()).sy;
            let basis = VariationalBasis::new(vec![sy], vec!["Sy".into()]).unwrap();
            for lam in [0.0, 0.3, 0.5, 1.0] {
                let sol = minimize_quadratic_action(
                    &ham.h0(lam).unwrap(),
                    &ham.dh0(),
                    &basis,
                    &TraceWeight::plain(),
                )
                .unwrap();
                assert_abs_diff_eq!(sol.alphas[0], 4.0 * p1_alpha_analytic(lam), epsilon = 1e-12);
                assert!(sol.action_min <= sol.action_zero);
            }
        }
    }

    #[test]
    fn nc_l1_p1_matches_analytic() {
        for n in [1, 3, 10, 60] {
            let ham = subspace(n, 1);
            for k in 0..=20 {
                let lam = k as f64 / 20.0;
                let (_, sol) =
                    nc_potential(&ham.h0(lam).unwrap(), &ham.dh0(), 1, &TraceWeight::plain())
                        .unwrap();
                assert_abs_diff_eq!(sol.alphas[0], p1_alpha_analytic(lam), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn nc_higher_order_p1_is_rank_one() {
        let ham = subspace(8, 1);
        let w = TraceWeight::plain();
        for lam in [0.1, 0.5, 0.8] {
            let h0 = ham.h0(lam).unwrap();
            let (a1, _) = nc_potential(&h0, &ham.dh0(), 1, &w).unwrap();
            let (a3, s3) = nc_potential(&h0, &ham.dh0(), 3, &w).unwrap();
            assert_eq!(s3.dropped_modes, 2);
            assert!(a1.max_abs_diff(&a3) < 1e-9);
        }
    }

    #[test]
    fn commuting_basis_leaves_action_unchanged() {
        let ham = subspace(5, 3);
        let h0 = ham.h0(0.4).unwrap();
        let basis = VariationalBasis::new(vec![h0.clone()], vec!["H0".into()]).unwrap();
        let sol = minimize_quadratic_action(&h0, &ham.dh0(), &basis, &TraceWeight::plain()).unwrap();
        assert_eq!(sol.alphas, vec![0.0]);
        assert_eq!(sol.dropped_modes, 1);
        let a0 = (&ham.dh0() * &ham.dh0()).trace().re;
        assert_abs_diff_eq!(sol.action_min, a0, epsilon = 1e-9 * a0);
    }

    /// Dense 3x3 solve by Cramer's rule, independent of the eigen route.
    fn cramer3(c: &Mat<f64>, rhs: &[f64]) -> [f64; 3] {
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let mut base = [[0.0; 3]; 3];
        for j in 0..3 {
            for k in 0..3 {
                base[j][k] = c[(j, k)];
            }
        }
        let d = det(base);
        let mut out = [0.0; 3];
        for (col, o) in out.iter_mut().enumerate() {
            let mut m = base;
            for r in 0..3 {
                m[r][col] = rhs[r];
            }
            *o = det(m) / d;
        }
        out
    }

    #[test]
    fn ca_matches_dense_normal_equations() {
        let spec = ModelSpec::uniform_full(2, 3).unwrap();
        let ham = spec.build().unwrap();
        let w = TraceWeight::for_rep(spec.rep, 0.0).unwrap();
        let h0 = ham.h0(0.5).unwrap();
        let basis = ca_basis(spec.rep);
        let q = quadratic_action(&h0, &ham.dh0(), &basis, &w).unwrap();
        let sol = q.minimize().unwrap();
        if sol.dropped_modes == 0 {
            let neg_b: Vec<f64> = q.b.iter().map(|x| -x).collect();
            let direct = cramer3(&q.c, &neg_b);
            for k in 0..3 {
                assert_abs_diff_eq!(sol.alphas[k], direct[k], epsilon = 1e-9 * direct[k].abs().max(1.0));
            }
        } else {
            // n = 2: S_y^3 = S_y within spin-1, the directions are degenerate
            // and the minimizer must still reach the action minimum.
            let w_sy = VariationalBasis::new(
                vec![basis.ops()[0].clone(), basis.ops()[2].clone()],
                vec!["Sy".into(), "xyz".into()],
            )
            .unwrap();
            let reduced = minimize_quadratic_action(&h0, &ham.dh0(), &w_sy, &w).unwrap();
            assert_abs_diff_eq!(sol.action_min, reduced.action_min, epsilon = 1e-9);
        }
    }

    #[test]
    fn ca_dense_solve_on_nondegenerate_case() {
        let ham = subspace(6, 3);
        let h0 = ham.h0(0.5).unwrap();
        let q = quadratic_action(&h0, &ham.dh0(), &ca_basis(ham.rep()), &TraceWeight::plain())
            .unwrap();
        let sol = q.minimize().unwrap();
        assert_eq!(sol.dropped_modes, 0);
        let neg_b: Vec<f64> = q.b.iter().map(|x| -x).collect();
        let direct = cramer3(&q.c, &neg_b);
        for k in 0..3 {
            assert_abs_diff_eq!(sol.alphas[k], direct[k], epsilon = 1e-9 * direct[k].abs().max(1.0));
        }
    }

    #[test]
    fn ca_cyclic_identities() {
        for rep in [
            Representation::max_spin(5).unwrap(),
            Representation::full(3).unwrap(),
        ] {
            let o = collective_spin_ops(rep);
            let xyz = (&(&o.sx * &o.sy) * &o.sz).plus_adjoint();
            let zxy = (&(&o.sz * &o.sx) * &o.sy).plus_adjoint();
            let xzy = (&(&o.sx * &o.sz) * &o.sy).plus_adjoint();
            assert!(xyz.max_abs_diff(&zxy) < 1e-12);
            assert!(xyz.max_abs_diff(&xzy) < 1e-12);
        }
    }

    #[test]
    fn ca_spin_half_degenerates_to_sy() {
        let ham = subspace(1, 3);
        let o = collective_spin_ops(ham.rep());
        assert!(o.sy.pow(3).max_abs_diff(&o.sy.scale(0.25)) < 1e-15);
        let h0 = ham.h0(0.35).unwrap();
        let (a_ca, sol) = ca_potential(&h0, &ham.dh0(), &TraceWeight::plain()).unwrap();
        assert!(sol.dropped_modes >= 1);
        let basis = VariationalBasis::new(vec![o.sy.clone()], vec!["Sy".into()]).unwrap();
        let sy_sol = minimize_quadratic_action(&h0, &ham.dh0(), &basis, &TraceWeight::plain()).unwrap();
        let a_sy = basis.combine(&sy_sol.alphas);
        assert!(a_ca.max_abs_diff(&a_sy) < 1e-9);
    }

    #[test]
    fn ca_beats_nc1() {
        let spec = ModelSpec::uniform_full(4, 3).unwrap();
        let ham = spec.build().unwrap();
        let w = TraceWeight::for_rep(spec.rep, 0.0).unwrap();
        let h0 = ham.h0(0.5).unwrap();
        let (_, ca) = ca_potential(&h0, &ham.dh0(), &w).unwrap();
        let (_, nc) = nc_potential(&h0, &ham.dh0(), 1, &w).unwrap();
        assert!(ca.action_min <= nc.action_min + 1e-9 * nc.action_zero);
    }

    #[test]
    fn nc_action_monotone_in_order() {
        for (n, lam) in [(10, 0.5), (20, 0.4), (40, 0.6)] {
            let ham = subspace(n, 3);
            let h0 = ham.h0(lam).unwrap();
            let mut prev = f64::INFINITY;
            for l in 1..=10 {
                let solver = NestedEigenSolver::new(l, TraceWeight::plain()).unwrap();
                let sol = solver.solve(&h0, &ham.dh0()).unwrap().solution;
                assert!(sol.action_min <= prev + 1e-10 * sol.action_zero, "n = {n}, l = {l}");
                prev = sol.action_min;
            }
        }
    }

    #[test]
    fn exact_cd_zero_diagonal_and_p1_form() {
        for n in [1, 4, 9] {
            let ham = subspace(n, 1);
            let sy = collective_spin_ops(ham.rep()).sy;
            for lam in [0.05, 0.3, 0.5, 0.95] {
                let h0 = ham.h0(lam).unwrap();
                let a = exact_cd(&h0, &ham.dh0()).unwrap();
                let eig = linalg::eigh(h0.matrix()).unwrap();
                let ae = eig.vectors.adjoint() * (a.matrix() * &eig.vectors);
                for k in 0..h0.dim() {
                    assert!(ae[(k, k)].norm() < 1e-12);
                }
                let expected = sy.scale(4.0 * p1_alpha_analytic(lam));
                assert!(a.max_abs_diff(&expected) < 1e-9, "n={n} lam={lam}");
            }
        }
    }

    #[test]
    fn exact_cd_refuses_degenerate() {
        let ham = subspace(6, 2);
        let err = exact_cd(&ham.h0(1.0).unwrap(), &ham.dh0()).unwrap_err();
        assert!(matches!(err, Error::DegenerateSpectrum { .. }));
    }

    #[test]
    fn nc_converges_to_exact() {
        // With A* the exact potential, G = diag(O_0') + i[A - A*, H_0], so the
        // residual action above the diagonal floor measures the distance.
        let ham = subspace(4, 3);
        let h0 = ham.h0(0.5).unwrap();
        let dh0 = ham.dh0();
        let exact = exact_cd(&h0, &dh0).unwrap();
        let eig = linalg::eigh(h0.matrix()).unwrap();
        let o0 = eig.vectors.adjoint() * (dh0.matrix() * &eig.vectors);
        let floor: f64 = (0..h0.dim()).map(|k| o0[(k, k)].norm_sqr()).sum();
        let mut prev = f64::INFINITY;
        for l in 1..=10 {
            let solver = NestedEigenSolver::new(l, TraceWeight::plain()).unwrap();
            let s = solver.solve(&h0, &dh0).unwrap();
            let diff = (&s.potential - &exact).commutator(&h0).unwrap();
            let dist2 = diff.frobenius_norm().powi(2);
            assert_abs_diff_eq!(s.solution.action_min - floor, dist2, epsilon = 1e-9 * floor);
            assert!(dist2 <= prev + 1e-12, "l = {l}: {dist2} > {prev}");
            prev = dist2;
        }
        // d = 5 gives at most 10 distinct transition frequencies.
        assert!(prev < 1e-8 * floor, "residual {prev}");
    }

    #[test]
    fn eigen_solver_matches_commutator_route() {
        for (spec, eta) in [
            (ModelSpec::uniform_subspace(10, 3).unwrap(), 0.0),
            (ModelSpec::uniform_full(4, 3).unwrap(), 0.0),
            (ModelSpec::random(4, 3, 0.6, 3).unwrap(), 0.5),
            (ModelSpec::finite_range(5, 3, 1.0).unwrap(), 0.25),
        ] {
            let ham = spec.build().unwrap();
            let w = TraceWeight::for_rep(spec.rep, eta).unwrap();
            for l in [1, 3] {
                let solver = NestedEigenSolver::new(l, w.clone()).unwrap();
                for lam in [0.2, 0.6] {
                    let h0 = ham.h0(lam).unwrap();
                    let (a_ref, s_ref) = nc_potential(&h0, &ham.dh0(), l, &w).unwrap();
                    let fast = solver.solve(&h0, &ham.dh0()).unwrap();
                    let scale = a_ref.frobenius_norm().max(1.0);
                    assert!(fast.potential.max_abs_diff(&a_ref) / scale < 1e-7, "{spec:?} l={l}");
                    assert_eq!(fast.solution.dropped_modes, s_ref.dropped_modes);
                }
            }
        }
    }

    #[test]
    fn fixed_basis_solver_matches_generic() {
        for (spec, eta) in [
            (ModelSpec::uniform_subspace(12, 3).unwrap(), 0.0),
            (ModelSpec::uniform_full(5, 3).unwrap(), 0.0),
            (ModelSpec::uniform_full(5, 3).unwrap(), 0.5),
            (ModelSpec::random(5, 3, 0.3, 9).unwrap(), 0.5),
        ] {
            let ham = spec.build().unwrap();
            let w = TraceWeight::for_rep(spec.rep, eta).unwrap();
            let solver = FixedBasisSolver::cyclic(&ham, &w).unwrap();
            for lam in [0.0, 0.33, 0.5, 0.9, 1.0] {
                let h0 = ham.h0(lam).unwrap();
                let (a_ref, s_ref) = ca_potential(&h0, &ham.dh0(), &w).unwrap();
                let (a, s) = solver.solve(lam).unwrap();
                let scale = a_ref.frobenius_norm().max(1.0);
                assert!(a.max_abs_diff(&a_ref) / scale < 1e-9);
                assert_abs_diff_eq!(s.action_min, s_ref.action_min, epsilon = 1e-8 * s.action_zero);
            }
        }
    }

    #[test]
    fn subspace_and_full_eta0_agree() {
        for n in 2..=6 {
            let sub = subspace(n, 3);
            let fspec = ModelSpec::uniform_full(n, 3).unwrap();
            let full = fspec.build().unwrap();
            let emb = Arc::new(DickeEmbedding::new(n).unwrap());
            let w = TraceWeight::with_embedding(emb, 0.0).unwrap();
            for lam in [0.25, 0.5, 0.75] {
                let (_, s_sub) = nc_potential(&sub.h0(lam).unwrap(), &sub.dh0(), 2, &TraceWeight::plain()).unwrap();
                let (_, s_full) = nc_potential(&full.h0(lam).unwrap(), &full.dh0(), 2, &w).unwrap();
                for (a, b) in s_sub.alphas.iter().zip(&s_full.alphas) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-9 * a.abs().max(1.0));
                }
                let (_, c_sub) = ca_potential(&sub.h0(lam).unwrap(), &sub.dh0(), &TraceWeight::plain()).unwrap();
                let (_, c_full) = ca_potential(&full.h0(lam).unwrap(), &full.dh0(), &w).unwrap();
                assert_abs_diff_eq!(c_sub.action_min, c_full.action_min, epsilon = 1e-9 * c_sub.action_zero);
            }
        }
    }

    #[test]
    fn nc_gram_equals_nested_traces() {
        let ham = subspace(7, 3);
        let h0 = ham.h0(0.45).unwrap();
        let l = 3;
        let ops = nested_operators(&h0, &ham.dh0(), l).unwrap();
        let basis = VariationalBasis::new(
            (1..=l).map(|k| ops[2 * k - 1].times_i()).collect(),
            (1..=l).map(|k| format!("iO{}", 2 * k - 1)).collect(),
        )
        .unwrap();
        let q = quadratic_action(&h0, &ham.dh0(), &basis, &TraceWeight::plain()).unwrap();
        for j in 1..=l {
            for k in 1..=l {
                let direct = (&ops[2 * j] * &ops[2 * k]).trace().re;
                assert!((q.c[(j - 1, k - 1)] - direct).abs() <= 1e-9 * direct.abs());
            }
            let bj = (&ops[0] * &ops[2 * j]).trace().re;
            assert!((q.b[j - 1] - bj).abs() <= 1e-9 * bj.abs());
        }
    }

    #[test]
    fn stationarity_of_minimizer() {
        let ham = subspace(8, 3);
        let w = TraceWeight::plain();
        for lam in [0.1, 0.4, 0.5, 0.7, 0.95] {
            let h0 = ham.h0(lam).unwrap();
            let q = quadratic_action(&h0, &ham.dh0(), &ca_basis(ham.rep()), &w).unwrap();
            let sol = q.minimize().unwrap();
            let s0 = q.evaluate(&sol.alphas);
            for j in 0..3 {
                for delta in [1e-4, -1e-4] {
                    let mut a = sol.alphas.clone();
                    a[j] += delta;
                    assert!(q.evaluate(&a) >= s0 - 1e-9 * s0.abs());
                }
            }
        }
    }

    #[test]
    fn basis_validation() {
        assert!(VariationalBasis::new(vec![], vec![]).is_err());
        let a = collective_spin_ops(Representation::max_spin(2).unwrap()).sy;
        let b = collective_spin_ops(Representation::max_spin(3).unwrap()).sy;
        assert!(VariationalBasis::new(vec![a.clone(), b], vec!["a".into(), "b".into()]).is_err());
        assert!(VariationalBasis::new(vec![a.times_i()], vec!["ia".into()]).is_err());
    }
}
