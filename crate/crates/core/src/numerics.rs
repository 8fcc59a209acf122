//! Dense complex linear algebra used by every other module.
//!
//! Matrices are stored as [`nalgebra::DMatrix`] values over `Complex<f64>`;
//! the singular value and Hermitian eigen decompositions run through `faer`.
//! All decompositions return their spectra in descending order so that derived
//! objects (canonical Kraus operators, Schmidt bases) are deterministic.

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Default relative cutoff for [`numerical_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Per-entry tolerance for the Hermiticity check in [`eigh`].
pub const HERMITIAN_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Thin singular value decomposition `M = U diag(S) Vdag`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v_adjoint: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * &self.v_adjoint
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the unit eigenvector for `eigenvalues[i]`.
    pub eigenvectors: ComplexMatrix,
}

pub fn check_finite(m: &ComplexMatrix) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub fn svd(m: &ComplexMatrix) -> Result<Svd> {
    check_finite(m)?;
    let (rows, cols) = m.shape();
    let r = rows.min(cols);
    if r == 0 {
        return Ok(Svd {
            u: ComplexMatrix::zeros(rows, 0),
            singular_values: Vec::new(),
            v_adjoint: ComplexMatrix::zeros(0, cols),
        });
    }
    let raw = to_faer(m)
        .thin_svd()
        .map_err(|e| Error::Sampling(format!("SVD failed to converge: {e:?}")))?;
    let (u, s, v) = (raw.U(), raw.S(), raw.V());
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| s[b].re.total_cmp(&s[a].re));

    let mut su = ComplexMatrix::zeros(rows, r);
    let mut svt = ComplexMatrix::zeros(r, cols);
    let mut vals = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..rows {
            su[(i, dst)] = u[(i, src)];
        }
        for j in 0..cols {
            svt[(dst, j)] = v[(j, src)].conj();
        }
        vals.push(s[src].re.max(0.0));
    }
    Ok(Svd {
        u: su,
        singular_values: vals,
        v_adjoint: svt,
    })
}

fn to_faer(m: &ComplexMatrix) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Largest entrywise deviation of `h` from its adjoint.
pub fn hermiticity_defect(h: &ComplexMatrix) -> f64 {
    let n = h.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn eigh(h: &ComplexMatrix) -> Result<Eigh> {
    check_finite(h)?;
    if !h.is_square() {
        return Err(Error::NotSquare(h.nrows(), h.ncols()));
    }
    let defect = hermiticity_defect(h);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let n = h.nrows();
    if n == 0 {
        return Ok(Eigh {
            eigenvalues: Vec::new(),
            eigenvectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let sym = (h + h.adjoint()).scale(0.5);
    let raw = to_faer(&sym)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Sampling(format!("Hermitian eigensolver failed: {e:?}")))?;
    let (vecs_raw, vals_raw) = (raw.U(), raw.S());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals_raw[b].re.total_cmp(&vals_raw[a].re));
    let mut vecs = ComplexMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vecs[(i, dst)] = vecs_raw[(i, src)];
        }
        vals.push(vals_raw[src].re);
    }
    Ok(Eigh {
        eigenvalues: vals,
        eigenvectors: vecs,
    })
}

/// Number of singular values strictly above `tol * sigma_max`.
pub fn numerical_rank(m: &ComplexMatrix, tol: f64) -> Result<usize> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::OutOfRange(format!("rank tolerance {tol} not in (0, 1)")));
    }
    let s = svd(m)?.singular_values;
    Ok(rank_of_spectrum(&s, tol))
}

pub(crate) fn rank_of_spectrum(sorted_desc: &[f64], tol: f64) -> usize {
    match sorted_desc.first() {
        Some(&max) if max > 0.0 => sorted_desc.iter().filter(|&&s| s > tol * max).count(),
        _ => 0,
    }
}

/// Haar-distributed `n x n` unitary, deterministic in `seed`.
pub fn haar_random_unitary(n: usize, seed: u64) -> Result<ComplexMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_unitary_from(&mut rng, n)
}

/// Haar unitary drawn from an existing generator: QR of a complex Ginibre
/// matrix with the phases of `diag(R)` folded back into `Q`.
pub fn haar_unitary_from<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::OutOfRange("unitary dimension must be >= 1".into()));
    }
    let g = gaussian_matrix(rng, n, n);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    Ok(q)
}

/// Matrix of i.i.d. standard complex Gaussian entries (`E|z|^2 = 1`).
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * scale, im * scale)
    })
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn trace(a: &ComplexMatrix) -> C64 {
    a.diagonal().iter().sum()
}

/// `f(H)` for Hermitian `H`, applied through its eigendecomposition.
pub fn hermitian_map(h: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let e = eigh(h)?;
    let n = h.nrows();
    let mut scaled = e.eigenvectors.clone();
    for j in 0..n {
        let fj = f(e.eigenvalues[j]);
        scaled.column_mut(j).scale_mut(fj);
    }
    Ok(scaled * e.eigenvectors.adjoint())
}

/// `exp(A)` for anti-Hermitian `A`, computed as `V exp(-i L) V^dag` from the
/// Hermitian matrix `iA = V L V^dag`. The result is unitary to machine
/// precision.
pub fn expm_anti_hermitian(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let h = a.map(|z| z * C64::i());
    let e = eigh(&h)?;
    let n = a.nrows();
    let mut scaled = e.eigenvectors.clone();
    for j in 0..n {
        let phase = C64::from_polar(1.0, -e.eigenvalues[j]);
        for i in 0..n {
            scaled[(i, j)] *= phase;
        }
    }
    Ok(scaled * e.eigenvectors.adjoint())
}

/// Frobenius inner product `tr(A^dag B)`.
pub fn inner(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frobenius_sq(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}
