//! Collective and single-site spin operators.
//!
//! Two representations are supported. The maximum-spin subspace has
//! dimension `n + 1` with basis `|n/2 - w>` ordered by descending `S_z`
//! eigenvalue. The full Hilbert space has dimension `2^n`; computational
//! states are indexed site-1-major, with bit value 0 meaning spin up
//! (`sigma_z = +1`).

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, I};

/// Default cap on the number of qubits for full-space construction.
pub const FULL_HILBERT_CAP: usize = 12;

/// Absolute tolerance for Hermiticity checks, in units of J.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepKind {
    MaxSpinSubspace,
    FullHilbert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Representation {
    kind: RepKind,
    n: usize,
}

impl Representation {
    pub fn max_spin(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("qubit count must be positive".into()));
        }
        Ok(Self {
            kind: RepKind::MaxSpinSubspace,
            n,
        })
    }

    pub fn full(n: usize) -> Result<Self> {
        Self::full_with_cap(n, FULL_HILBERT_CAP)
    }

    pub fn full_with_cap(n: usize, cap: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("qubit count must be positive".into()));
        }
        if n > cap {
            return Err(Error::DimensionCap { n, cap });
        }
        Ok(Self {
            kind: RepKind::FullHilbert,
            n,
        })
    }

    pub fn new(kind: RepKind, n: usize) -> Result<Self> {
        match kind {
            RepKind::MaxSpinSubspace => Self::max_spin(n),
            RepKind::FullHilbert => Self::full(n),
        }
    }

    pub fn kind(&self) -> RepKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            RepKind::MaxSpinSubspace => self.n + 1,
            RepKind::FullHilbert => 1 << self.n,
        }
    }

    pub fn is_full(&self) -> bool {
        self.kind == RepKind::FullHilbert
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RepKind::MaxSpinSubspace => write!(f, "subspace(n={})", self.n),
            RepKind::FullHilbert => write!(f, "full(n={})", self.n),
        }
    }
}

/// Dense complex operator tagged with its representation.
#[derive(Clone)]
pub struct Operator {
    rep: Representation,
    mat: CMat,
    hermitian: bool,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Operator")
            .field("rep", &self.rep)
            .field("hermitian", &self.hermitian)
            .finish_non_exhaustive()
    }
}

impl Operator {
    /// Wraps a matrix. With `hermitian_hint` set the matrix is checked
    /// against [`HERMITIAN_TOL`] and exactly symmetrized.
    pub fn new(rep: Representation, mat: CMat, hermitian_hint: bool) -> Result<Self> {
        let dim = rep.dim();
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: mat.nrows().max(mat.ncols()),
            });
        }
        let mut op = Self {
            rep,
            mat,
            hermitian: false,
        };
        if hermitian_hint {
            op = op.into_hermitian()?;
        }
        Ok(op)
    }

    pub(crate) fn from_parts(rep: Representation, mat: CMat, hermitian: bool) -> Self {
        debug_assert_eq!(mat.nrows(), rep.dim());
        Self {
            rep,
            mat,
            hermitian,
        }
    }

    pub fn zeros(rep: Representation) -> Self {
        Self::from_parts(rep, linalg::zeros(rep.dim()), true)
    }

    pub fn identity(rep: Representation) -> Self {
        Self::from_parts(rep, linalg::identity(rep.dim()), true)
    }

    pub fn diagonal(rep: Representation, entries: &[f64]) -> Result<Self> {
        Self::new(rep, linalg::diagonal(entries), false).map(|mut op| {
            op.hermitian = true;
            op
        })
    }

    /// Validates Hermiticity (relative to the largest entry) and replaces
    /// the matrix by `(M + M†)/2`.
    pub fn into_hermitian(self) -> Result<Self> {
        let deviation = linalg::hermiticity_deviation(&self.mat);
        if deviation > HERMITIAN_TOL * linalg::max_abs(&self.mat).max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        let sym = (&self.mat + self.mat.adjoint()) * faer::Scale(c(0.5));
        Ok(Self {
            rep: self.rep,
            mat: sym,
            hermitian: true,
        })
    }

    pub fn rep(&self) -> Representation {
        self.rep
    }

    pub fn dim(&self) -> usize {
        self.rep.dim()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::hermiticity_deviation(&self.mat)
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.mat[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_parts(self.rep, linalg::adjoint(&self.mat), self.hermitian)
    }

    pub fn trace(&self) -> Complex64 {
        linalg::trace(&self.mat)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_parts(self.rep, linalg::scaled(&self.mat, c(s)), self.hermitian)
    }

    /// Multiplies by a complex scalar; the Hermitian flag survives only for
    /// real scalars.
    pub fn scale_complex(&self, s: Complex64) -> Self {
        Self::from_parts(
            self.rep,
            linalg::scaled(&self.mat, s),
            self.hermitian && s.im == 0.0,
        )
    }

    /// `i * self`
    pub fn times_i(&self) -> Self {
        self.scale_complex(I)
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self::from_parts(
            self.rep,
            linalg::commutator(&self.mat, &other.mat),
            false,
        ))
    }

    /// `A + A†`
    pub fn plus_adjoint(&self) -> Self {
        Self::from_parts(self.rep, &self.mat + self.mat.adjoint(), true)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::identity(self.rep);
        for _ in 0..k {
            out = &out * self;
        }
        out.hermitian = self.hermitian;
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        linalg::max_abs_diff(&self.mat, &other.mat)
    }

    pub fn frobenius_norm(&self) -> f64 {
        linalg::frobenius_norm(&self.mat)
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.rep != other.rep {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    /// Whether the operator is diagonal to within `tol`.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|j| (0..d).all(|i| i == j || self.mat[(i, j)].norm() <= tol))
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.rep, rhs.rep, "representation mismatch");
        Operator::from_parts(self.rep, &self.mat + &rhs.mat, self.hermitian && rhs.hermitian)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.rep, rhs.rep, "representation mismatch");
        Operator::from_parts(self.rep, &self.mat - &rhs.mat, self.hermitian && rhs.hermitian)
    }
}

/// Matrix product.
impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.rep, rhs.rep, "representation mismatch");
        Operator::from_parts(self.rep, &self.mat * &rhs.mat, false)
    }
}

/// Total spin operators `S_x, S_y, S_z`.
#[derive(Debug, Clone)]
pub struct SpinOps {
    pub sx: Operator,
    pub sy: Operator,
    pub sz: Operator,
}

impl SpinOps {
    /// `S_x^2 + S_y^2 + S_z^2`
    pub fn casimir(&self) -> Operator {
        let sum = &(&self.sx * &self.sx) + &(&self.sy * &self.sy);
        &sum + &(&self.sz * &self.sz)
    }
}

pub fn collective_spin_ops(rep: Representation) -> SpinOps {
    match rep.kind() {
        RepKind::MaxSpinSubspace => subspace_spin_ops(rep),
        RepKind::FullHilbert => full_spin_ops(rep),
    }
}

fn subspace_spin_ops(rep: Representation) -> SpinOps {
    let n = rep.n();
    let dim = n + 1;
    let j = n as f64 / 2.0;
    // row a <-> m = j - a; S+ raises m, i.e. maps column a to row a - 1.
    let mut splus = linalg::zeros(dim);
    for a in 1..dim {
        let m = j - a as f64;
        splus[(a - 1, a)] = c((j * (j + 1.0) - m * (m + 1.0)).sqrt());
    }
    let sminus = linalg::adjoint(&splus);
    let sx = (&splus + &sminus) * faer::Scale(c(0.5));
    let sy = (&splus - &sminus) * faer::Scale(Complex64::new(0.0, -0.5));
    let sz_diag: Vec<f64> = (0..dim).map(|a| j - a as f64).collect();
    SpinOps {
        sx: Operator::from_parts(rep, sx, true),
        sy: Operator::from_parts(rep, sy, true),
        sz: Operator::from_parts(rep, linalg::diagonal(&sz_diag), true),
    }
}

/// Bit of `site` (1-based) in computational state `state`.
#[inline]
pub(crate) fn site_bit(n: usize, site: usize, state: usize) -> usize {
    (state >> (n - site)) & 1
}

/// `sigma_z` eigenvalue (+1 for bit 0) of `site` in `state`.
#[inline]
pub(crate) fn site_z(n: usize, site: usize, state: usize) -> f64 {
    if site_bit(n, site, state) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn full_spin_ops(rep: Representation) -> SpinOps {
    let n = rep.n();
    let dim = rep.dim();
    let mut sx = linalg::zeros(dim);
    let mut sy = linalg::zeros(dim);
    let mut sz = vec![0.0; dim];
    for state in 0..dim {
        for site in 1..=n {
            let mask = 1 << (n - site);
            let flipped = state ^ mask;
            sx[(flipped, state)] += c(0.5);
            // sigma_y |up> = i|down>, sigma_y |down> = -i|up>
            let amp = if site_bit(n, site, state) == 0 { 0.5 } else { -0.5 };
            sy[(flipped, state)] += Complex64::new(0.0, amp);
            sz[state] += 0.5 * site_z(n, site, state);
        }
    }
    SpinOps {
        sx: Operator::from_parts(rep, sx, true),
        sy: Operator::from_parts(rep, sy, true),
        sz: Operator::from_parts(rep, linalg::diagonal(&sz), true),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Pauli matrix on one site of the full Hilbert space (1-based `site`).
pub fn site_pauli(rep: Representation, site: usize, axis: Axis) -> Result<Operator> {
    if !rep.is_full() {
        return Err(Error::InvalidInput(
            "site operators require the full Hilbert space".into(),
        ));
    }
    let n = rep.n();
    if site == 0 || site > n {
        return Err(Error::OutOfRange {
            what: "site",
            value: site as f64,
            lo: 1.0,
            hi: n as f64,
        });
    }
    let dim = rep.dim();
    let mask = 1 << (n - site);
    let mut m = linalg::zeros(dim);
    for state in 0..dim {
        let up = site_bit(n, site, state) == 0;
        match axis {
            Axis::X => m[(state ^ mask, state)] = c(1.0),
            Axis::Y => {
                m[(state ^ mask, state)] = Complex64::new(0.0, if up { 1.0 } else { -1.0 })
            }
            Axis::Z => m[(state, state)] = c(if up { 1.0 } else { -1.0 }),
        }
    }
    Ok(Operator::from_parts(rep, m, true))
}

/// Symmetric Dicke states spanning the maximum-spin subspace inside the
/// full Hilbert space. Column `w` is the normalized uniform superposition of
/// computational states with `w` down spins (`S_z = n/2 - w`).
#[derive(Debug, Clone)]
pub struct DickeEmbedding {
    n: usize,
    basis: CMat,
}

impl DickeEmbedding {
    pub fn new(n: usize) -> Result<Self> {
        let rep = Representation::full(n)?;
        let dim = rep.dim();
        let mut basis = faer::Mat::zeros(dim, n + 1);
        let mut counts = vec![0usize; n + 1];
        for state in 0..dim {
            counts[state.count_ones() as usize] += 1;
        }
        for state in 0..dim {
            let w = state.count_ones() as usize;
            basis[(state, w)] = c(1.0 / (counts[w] as f64).sqrt());
        }
        Ok(Self { n, basis })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `2^n x (n + 1)` matrix whose columns are the Dicke states.
    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    pub fn vector(&self, w: usize) -> Vec<Complex64> {
        self.basis.col(w).iter().copied().collect()
    }

    /// Matrix of `op` in the Dicke basis, `E† O E`.
    pub fn restrict(&self, op: &Operator) -> Result<CMat> {
        self.check(op)?;
        Ok(self.basis.adjoint() * (op.matrix() * &self.basis))
    }

    /// Embeds a subspace state into the full space.
    pub fn embed_state(&self, amplitudes: &[Complex64]) -> Vec<Complex64> {
        linalg::mat_vec(&self.basis, amplitudes)
    }

    /// Sum of diagonal elements of `op` over the Dicke basis.
    pub fn symmetric_trace(&self, op: &Operator) -> Result<Complex64> {
        self.check(op)?;
        let oe = op.matrix() * &self.basis;
        Ok(column_inner_sum(&self.basis, &oe))
    }

    fn check(&self, op: &Operator) -> Result<()> {
        if !op.rep().is_full() || op.rep().n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.n,
                got: op.dim(),
            });
        }
        Ok(())
    }
}

/// `sum_w a_w† b_w` over matching columns.
fn column_inner_sum(a: &CMat, b: &CMat) -> Complex64 {
    linalg::frobenius_inner(a, b)
}

/// `(1 - eta) Tr_sym(O) + eta Tr_perp(O)` for full-space operators; the
/// plain trace for subspace operators.
pub fn weighted_trace(op: &Operator, eta: f64, emb: Option<&DickeEmbedding>) -> Result<Complex64> {
    if !op.rep().is_full() {
        return Ok(op.trace());
    }
    check_eta(eta)?;
    let emb = emb.ok_or_else(|| {
        Error::InvalidInput("full-space weighted trace needs a Dicke embedding".into())
    })?;
    let sym = emb.symmetric_trace(op)?;
    let total = op.trace();
    Ok(sym * (1.0 - eta) + (total - sym) * eta)
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::OutOfRange {
            what: "eta",
            value: eta,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// Trace weighting used by the variational action.
///
/// Evaluates `wTr(X Y) = eta Tr(X Y) + (1 - 2 eta) Tr_sym(X Y)` for
/// Hermitian `X`, `Y` without forming the product.
#[derive(Debug, Clone)]
pub struct TraceWeight {
    eta: f64,
    emb: Option<Arc<DickeEmbedding>>,
}

impl TraceWeight {
    /// Plain trace (subspace work, or full space with `eta = 1/2` up to a
    /// factor of two).
    pub fn plain() -> Self {
        Self { eta: 0.5, emb: None }
    }

    /// Weight appropriate for `rep`: the embedding is built only for the
    /// full space.
    pub fn for_rep(rep: Representation, eta: f64) -> Result<Self> {
        if !rep.is_full() {
            return Ok(Self::plain());
        }
        Self::with_embedding(Arc::new(DickeEmbedding::new(rep.n())?), eta)
    }

    pub fn with_embedding(emb: Arc<DickeEmbedding>, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        Ok(Self { eta, emb: Some(emb) })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn embedding(&self) -> Option<&DickeEmbedding> {
        self.emb.as_deref()
    }

    /// Whether the symmetric-subspace correction term contributes.
    pub(crate) fn projector_coefficient(&self) -> f64 {
        if self.emb.is_some() {
            1.0 - 2.0 * self.eta
        } else {
            0.0
        }
    }

    pub(crate) fn trace_coefficient(&self) -> f64 {
        if self.emb.is_some() {
            self.eta
        } else {
            1.0
        }
    }

    /// Precomputes what the weighted inner product needs from one operator.
    pub(crate) fn prepare(&self, mat: &CMat) -> Prepared {
        self.prepare_in(mat.clone(), self.emb.as_deref().map(DickeEmbedding::basis))
    }

    /// Like [`prepare`](Self::prepare) with the Dicke basis expressed in
    /// the same frame as `mat` (e.g. rotated into an eigenbasis).
    pub(crate) fn prepare_in(&self, mat: CMat, dicke_basis: Option<&CMat>) -> Prepared {
        let projected = match dicke_basis {
            Some(e) if self.projector_coefficient() != 0.0 => Some(&mat * e),
            _ => None,
        };
        Prepared { mat, projected }
    }

    /// Real part of `wTr(X Y)` for prepared Hermitian operands.
    pub(crate) fn inner(&self, x: &Prepared, y: &Prepared) -> f64 {
        let mut acc = self.trace_coefficient() * linalg::frobenius_inner(&x.mat, &y.mat).re;
        if let (Some(px), Some(py)) = (&x.projected, &y.projected) {
            acc += self.projector_coefficient() * linalg::frobenius_inner(px, py).re;
        }
        acc
    }

    /// Real part of `wTr(X Y)` for Hermitian operators.
    pub fn weighted_product_trace(&self, x: &Operator, y: &Operator) -> f64 {
        self.inner(&self.prepare(x.matrix()), &self.prepare(y.matrix()))
    }
}

pub(crate) struct Prepared {
    mat: CMat,
    projected: Option<CMat>,
}

impl Prepared {
    pub(crate) fn mat(&self) -> &CMat {
        &self.mat
    }

    /// `self += s * other`
    pub(crate) fn axpy(&mut self, s: f64, other: &Prepared) {
        linalg::axpy(&mut self.mat, linalg::c(s), &other.mat);
        if let (Some(p), Some(q)) = (self.projected.as_mut(), other.projected.as_ref()) {
            linalg::axpy(p, linalg::c(s), q);
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.mat = linalg::scaled(&self.mat, linalg::c(s));
        if let Some(p) = self.projected.as_mut() {
            *p = linalg::scaled(p, linalg::c(s));
        }
    }
}
