//! Kraus, Choi and Stinespring representations of qudit channels.
//!
//! Bipartite indices are flattened reference-system first: the basis vector
//! `|i>_A (x) |j>_B` sits at position `i * d_B + j`. The Choi matrix uses the
//! trace-one convention
//!
//! ```text
//! J = (id (x) E)(|Phi_d><Phi_d|),   |Phi_d> = d^{-1/2} sum_i |i>|i>
//! ```
//!
//! so `J[(i d + p), (j d + q)] = (1/d) sum_a K_a[p, i] conj(K_a[q, j])` and the
//! channel is recovered as `E(rho) = d tr_A[(rho^T (x) I) J]`.

use crate::error::{Error, Result};
use crate::numerics::{
    self, c, eigh, hermitian_map, hermiticity_defect, max_abs_diff,
    trace, ComplexMatrix, ComplexVector, ZERO,
};

/// Tolerance on Hermiticity, trace and positivity of density matrices.
pub const STATE_TOL: f64 = 1e-10;
/// Tolerance on the closure relation and on Choi-matrix invariants.
pub const CHANNEL_TOL: f64 = 1e-9;

/// A qudit state: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, STATE_TOL)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        numerics::check_finite(&matrix)?;
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::NotSquare(matrix.nrows(), matrix.ncols()));
        }
        let defect = hermiticity_defect(&matrix);
        if defect > tol {
            return Err(Error::InvalidState(format!("not Hermitian (defect {defect:e})")));
        }
        let tr = trace(&matrix);
        if (tr - c(1.0, 0.0)).norm() > tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = *eigh(&matrix)?.eigenvalues.last().expect("non-empty");
        if min < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix already known to be a state, symmetrizing round-off.
    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        let matrix = (&matrix + matrix.adjoint()).scale(0.5);
        Self { matrix }
    }

    pub fn pure(psi: &ComplexVector) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self::from_matrix_unchecked(psi * psi.adjoint()))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(d, d).scale(1.0 / d as f64),
        }
    }

    /// Random full-rank state `G G^dag / tr(G G^dag)` with Ginibre `G`.
    pub fn random(d: usize, seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = numerics::gaussian_matrix(&mut rng, d, d);
        let m = &g * g.adjoint();
        let tr = trace(&m).re;
        Self::from_matrix_unchecked(m.scale(1.0 / tr))
    }

    /// Haar-random pure state.
    pub fn random_pure(d: usize, seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = numerics::gaussian_matrix(&mut rng, d, 1);
        let v = ComplexVector::from_column_slice(g.as_slice()).normalize();
        Self::from_matrix_unchecked(&v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}

/// Kraus operators `K_a : C^{d_in} -> C^{d_out}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    d_in: usize,
    d_out: usize,
    operators: Vec<ComplexMatrix>,
}

impl KrausSet {
    /// Builds a set and checks `sum_a K_a^dag K_a = I` within [`CHANNEL_TOL`].
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self> {
        let set = Self::new_unchecked(operators)?;
        let residual = set.closure_residual();
        if residual > CHANNEL_TOL {
            return Err(Error::ClosureViolation(residual));
        }
        Ok(set)
    }

    /// Builds a set that is only checked for consistent shapes and finite
    /// entries. Used for diagnostics on candidate channels.
    pub fn new_unchecked(operators: Vec<ComplexMatrix>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::OutOfRange("a Kraus set needs at least one operator".into()))?;
        let (d_out, d_in) = first.shape();
        if d_in == 0 || d_out == 0 {
            return Err(Error::OutOfRange("Kraus operators must be non-empty".into()));
        }
        for (alpha, k) in operators.iter().enumerate() {
            if k.shape() != (d_out, d_in) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{d_out}x{d_in}"),
                    got: format!("{}x{} (operator {alpha})", k.nrows(), k.ncols()),
                });
            }
            numerics::check_finite(k)?;
        }
        Ok(Self {
            d_in,
            d_out,
            operators,
        })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    /// Common dimension of a square channel.
    pub fn dim(&self) -> Result<usize> {
        if self.d_in != self.d_out {
            return Err(Error::RectangularChannel {
                d_in: self.d_in,
                d_out: self.d_out,
            });
        }
        Ok(self.d_in)
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn into_operators(self) -> Vec<ComplexMatrix> {
        self.operators
    }

    /// Largest entry of `sum_a K_a^dag K_a - I`.
    pub fn closure_residual(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.d_in, self.d_in);
        for k in &self.operators {
            sum += k.adjoint() * k;
        }
        max_abs_diff(&sum, &ComplexMatrix::identity(self.d_in, self.d_in))
    }

    /// The set `K'_b = sum_a U[b, a] K_a`. For unitary `U` this represents the
    /// same channel.
    pub fn mixed(&self, u: &ComplexMatrix) -> Result<Self> {
        let m = self.operators.len();
        if u.shape() != (m, m) {
            return Err(Error::DimensionMismatch {
                expected: format!("{m}x{m} mixing matrix"),
                got: format!("{}x{}", u.nrows(), u.ncols()),
            });
        }
        let operators = mix_operators(&self.operators, u);
        Ok(Self {
            d_in: self.d_in,
            d_out: self.d_out,
            operators,
        })
    }

    /// Appends zero operators so the set has `m` elements.
    pub fn padded(&self, m: usize) -> Self {
        let mut operators = self.operators.clone();
        while operators.len() < m {
            operators.push(ComplexMatrix::zeros(self.d_out, self.d_in));
        }
        Self {
            d_in: self.d_in,
            d_out: self.d_out,
            operators,
        }
    }
}

pub(crate) fn mix_operators(ops: &[ComplexMatrix], u: &ComplexMatrix) -> Vec<ComplexMatrix> {
    let (rows, cols) = ops[0].shape();
    (0..u.nrows())
        .map(|b| {
            let mut acc = ComplexMatrix::zeros(rows, cols);
            for (a, k) in ops.iter().enumerate() {
                let w = u[(b, a)];
                if w != ZERO {
                    acc += k * w;
                }
            }
            acc
        })
        .collect()
}

/// Trace-one Choi matrix of a `d -> d` channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    d: usize,
    matrix: ComplexMatrix,
}

impl ChoiMatrix {
    /// Validates Hermiticity, positivity, unit trace and `tr_B J = I/d`.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let d = choi_dim(&matrix)?;
        let candidate = Self { d, matrix };
        let report = verify_cptp(ChannelRef::Choi(&candidate), CHANNEL_TOL);
        if !report.hermitian {
            return Err(Error::NotHermitian(report.hermiticity_defect));
        }
        if !report.completely_positive {
            return Err(Error::NegativeEigenvalue(report.min_choi_eigenvalue));
        }
        if !report.trace_preserving {
            return Err(Error::InvalidChoi(format!(
                "partial trace over the output differs from I/d by {:e}",
                report.trace_residual
            )));
        }
        Ok(candidate)
    }

    /// Wraps a `d^2 x d^2` matrix without checking channel invariants.
    pub fn new_unchecked(matrix: ComplexMatrix) -> Result<Self> {
        let d = choi_dim(&matrix)?;
        numerics::check_finite(&matrix)?;
        Ok(Self { d, matrix })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}

fn choi_dim(m: &ComplexMatrix) -> Result<usize> {
    if !m.is_square() {
        return Err(Error::NotSquare(m.nrows(), m.ncols()));
    }
    let n = m.nrows();
    let d = (n as f64).sqrt().round() as usize;
    if d == 0 || d * d != n {
        return Err(Error::InvalidChoi(format!("size {n} is not a perfect square")));
    }
    Ok(d)
}

/// Isometry `V = sum_a K_a (x) |a>_E`, rows indexed `p * env_dim + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct StinespringIsometry {
    pub d_in: usize,
    pub d_out: usize,
    pub env_dim: usize,
    pub v: ComplexMatrix,
}

impl StinespringIsometry {
    /// Block `<a|_E V`.
    pub fn kraus_block(&self, alpha: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.d_out, self.d_in, |p, i| {
            self.v[(p * self.env_dim + alpha, i)]
        })
    }

    pub fn to_kraus(&self) -> Result<KrausSet> {
        KrausSet::new((0..self.env_dim).map(|a| self.kraus_block(a)).collect())
    }

    pub fn isometry_residual(&self) -> f64 {
        max_abs_diff(
            &(self.v.adjoint() * &self.v),
            &ComplexMatrix::identity(self.d_in, self.d_in),
        )
    }
}

fn check_state_dim(expected: usize, rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected: format!("{expected}-dimensional input"),
            got: format!("{}-dimensional state", rho.dim()),
        });
    }
    Ok(())
}

/// `E(rho) = sum_a K_a rho K_a^dag`.
pub fn apply_kraus(k: &KrausSet, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_state_dim(k.d_in, rho)?;
    let mut out = ComplexMatrix::zeros(k.d_out, k.d_out);
    for op in &k.operators {
        out += op * rho.matrix() * op.adjoint();
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// `vec(K)[i * d_out + p] = K[p, i]`, the vector `sqrt(d) (I (x) K)|Phi_d>`.
pub(crate) fn choi_vector(k: &ComplexMatrix) -> ComplexVector {
    let (d_out, d_in) = k.shape();
    ComplexVector::from_fn(d_in * d_out, |idx, _| k[(idx % d_out, idx / d_out)])
}

/// Inverse of [`choi_vector`] for a square `d x d` operator.
pub(crate) fn unvec(v: &ComplexVector, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |p, i| v[i * d + p])
}

pub fn kraus_to_choi(k: &KrausSet) -> Result<ChoiMatrix> {
    let d = k.dim()?;
    Ok(ChoiMatrix {
        d,
        matrix: choi_of_operators(k.operators(), d),
    })
}

pub(crate) fn choi_of_operators(ops: &[ComplexMatrix], d: usize) -> ComplexMatrix {
    let mut j = ComplexMatrix::zeros(d * d, d * d);
    for op in ops {
        let v = choi_vector(op);
        j += &v * v.adjoint();
    }
    let j = j.scale(1.0 / d as f64);
    (&j + j.adjoint()).scale(0.5)
}

/// Canonical Kraus operators from the eigendecomposition of `J`:
/// `K_a[p, i] = sqrt(d lambda_a) v_a[i d + p]`, one per eigenvalue above
/// `tol * lambda_max`.
pub fn choi_to_kraus(j: &ChoiMatrix, tol: f64) -> Result<KrausSet> {
    let d = j.d;
    let e = eigh(&j.matrix)?;
    let lmax = e.eigenvalues[0];
    let lmin = *e.eigenvalues.last().expect("non-empty");
    if lmin < -tol * lmax.max(0.0) || lmax <= 0.0 {
        return Err(Error::NegativeEigenvalue(lmin));
    }
    let operators: Vec<ComplexMatrix> = e
        .eigenvalues
        .iter()
        .enumerate()
        .take_while(|(_, &l)| l > tol * lmax)
        .map(|(a, &l)| {
            let v = e.eigenvectors.column(a).into_owned();
            unvec(&v, d).scale((d as f64 * l).sqrt())
        })
        .collect();
    KrausSet::new_unchecked(operators)
}

fn partial_trace_a_product(rho_t_kron: &ComplexMatrix, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |p, q| (0..d).map(|i| rho_t_kron[(i * d + p, i * d + q)]).sum())
}

/// `E(rho) = d tr_A[(rho^T (x) I) J]`.
pub fn choi_apply(j: &ChoiMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let d = j.d;
    check_state_dim(d, rho)?;
    let lifted = numerics::kron(&rho.matrix().transpose(), &ComplexMatrix::identity(d, d));
    let prod = lifted * &j.matrix;
    let out = partial_trace_a_product(&prod, d).scale(d as f64);
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

pub fn kraus_to_stinespring(k: &KrausSet) -> StinespringIsometry {
    let m = k.len();
    let (d_out, d_in) = (k.d_out, k.d_in);
    let v = ComplexMatrix::from_fn(d_out * m, d_in, |row, i| {
        let (p, alpha) = (row / m, row % m);
        k.operators[alpha][(p, i)]
    });
    StinespringIsometry {
        d_in,
        d_out,
        env_dim: m,
        v,
    }
}

/// `tr_B` of a `(dA dB) x (dA dB)` matrix.
pub fn partial_trace_b(m: &ComplexMatrix, da: usize, db: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(da, da, |i, j| (0..db).map(|b| m[(i * db + b, j * db + b)]).sum())
}

/// `tr_A` of a `(dA dB) x (dA dB)` matrix.
pub fn partial_trace_a(m: &ComplexMatrix, da: usize, db: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(db, db, |p, q| (0..da).map(|a| m[(a * db + p, a * db + q)]).sum())
}

/// `|Phi_d> = d^{-1/2} sum_i |ii>`.
pub fn maximally_entangled(d: usize) -> ComplexVector {
    let s = 1.0 / (d as f64).sqrt();
    ComplexVector::from_fn(d * d, |idx, _| if idx % (d + 1) == 0 { c(s, 0.0) } else { ZERO })
}

/// Borrowed channel in either representation, for diagnostics.
#[derive(Debug, Clone, Copy)]
pub enum ChannelRef<'a> {
    Kraus(&'a KrausSet),
    Choi(&'a ChoiMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CptpReport {
    pub trace_preserving: bool,
    pub completely_positive: bool,
    pub hermitian: bool,
    /// Largest constraint residual over all checks.
    pub max_violation: f64,
    pub trace_residual: f64,
    pub hermiticity_defect: f64,
    /// Smallest eigenvalue of the Choi matrix (zero for Kraus input).
    pub min_choi_eigenvalue: f64,
}

impl CptpReport {
    pub fn pass(&self) -> bool {
        self.trace_preserving && self.completely_positive
    }
}

pub fn verify_cptp(channel: ChannelRef<'_>, tol: f64) -> CptpReport {
    match channel {
        ChannelRef::Kraus(k) => {
            let trace_residual = k.closure_residual();
            CptpReport {
                trace_preserving: trace_residual <= tol,
                completely_positive: true,
                hermitian: true,
                max_violation: trace_residual,
                trace_residual,
                hermiticity_defect: 0.0,
                min_choi_eigenvalue: 0.0,
            }
        }
        ChannelRef::Choi(j) => {
            let d = j.d;
            let defect = hermiticity_defect(&j.matrix);
            let hermitian = defect <= tol;
            let reduced = partial_trace_b(&j.matrix, d, d);
            let target = ComplexMatrix::identity(d, d).scale(1.0 / d as f64);
            let trace_residual = max_abs_diff(&reduced, &target);
            let sym = (&j.matrix + j.matrix.adjoint()).scale(0.5);
            let min_eig = eigh(&sym)
                .map(|e| *e.eigenvalues.last().expect("non-empty"))
                .unwrap_or(f64::NEG_INFINITY);
            let neg = (-min_eig).max(0.0);
            CptpReport {
                trace_preserving: trace_residual <= tol,
                completely_positive: hermitian && neg <= tol,
                hermitian,
                max_violation: trace_residual.max(defect).max(neg),
                trace_residual,
                hermiticity_defect: defect,
                min_choi_eigenvalue: min_eig,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDistance {
    pub trace_distance: f64,
    pub fidelity: f64,
}

/// Trace distance and Uhlmann fidelity between two Choi states.
pub fn channel_distance(j1: &ChoiMatrix, j2: &ChoiMatrix) -> Result<ChannelDistance> {
    if j1.d != j2.d {
        return Err(Error::DimensionMismatch {
            expected: format!("d = {}", j1.d),
            got: format!("d = {}", j2.d),
        });
    }
    Ok(ChannelDistance {
        trace_distance: trace_distance(&j1.matrix, &j2.matrix)?,
        fidelity: fidelity(&j1.matrix, &j2.matrix)?,
    })
}

/// `(1/2) ||a - b||_1` for Hermitian `a`, `b`, clamped to `[0, 1]`.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let diff = a - b;
    let e = eigh(&(&diff + diff.adjoint()).scale(0.5))?;
    let td = 0.5 * e.eigenvalues.iter().map(|l| l.abs()).sum::<f64>();
    Ok(td.clamp(0.0, 1.0))
}

/// `(tr sqrt(sqrt(a) b sqrt(a)))^2 = ||sqrt(a) sqrt(b)||_1^2` for positive
/// semidefinite `a`, `b`.
pub fn fidelity(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let root = |m: &ComplexMatrix| -> Result<ComplexMatrix> {
        let e = eigh(m)?;
        let cutoff = 1e-13 * e.eigenvalues[0].abs().max(f64::MIN_POSITIVE);
        hermitian_map(m, |l| if l > cutoff { l.sqrt() } else { 0.0 })
    };
    let nuclear: f64 = numerics::svd(&(root(a)? * root(b)?))?.singular_values.iter().sum();
    Ok((nuclear * nuclear).clamp(0.0, 1.0))
}

/// `<Phi_d| J |Phi_d>`, the maximally entangled fraction of a Choi state.
pub fn entangled_fraction(j: &ComplexMatrix, d: usize) -> f64 {
    let phi = maximally_entangled(d);
    (phi.adjoint() * j * &phi)[(0, 0)].re
}
