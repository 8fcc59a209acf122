//! Schmidt rank of pure states and Schmidt-number bounds for channels.
//!
//! Upper bounds come from Kraus-rank certificates: a Kraus representation
//! whose operators all have rank at most `k` places the channel in `O_k`.
//! The search for such a representation runs over unitary mixings of the
//! canonical Kraus set; a failed search proves nothing. The only lower bound
//! offered is the maximally-entangled-fraction witness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channels::{
    choi_of_operators, choi_to_kraus, choi_vector, entangled_fraction, kraus_to_choi,
    mix_operators, unvec,
    ChoiMatrix, KrausSet,
};
use crate::error::{Error, Result};
use crate::numerics::{
    self, c, expm_anti_hermitian, frobenius_sq, haar_unitary_from, hermitian_map, inner,
    max_abs_diff, rank_of_spectrum, svd, ComplexMatrix, ComplexVector, DEFAULT_RANK_TOL,
};

/// Relative tolerance on the normalization of pure states.
pub const NORM_TOL: f64 = 1e-10;

/// Once a restart crosses the acceptance threshold it keeps descending until
/// the objective falls this many orders further, so that truncating the tail
/// singular values leaves the Choi matrix unchanged to within
/// [`CERTIFICATE_TOL`].
const POLISH_FACTOR: f64 = 1e-10;
const NONMONOTONE_WINDOW: usize = 10;
const STALL_WINDOW: usize = 200;

/// Witness Choi matrices must match the channel within this, entrywise.
pub const CERTIFICATE_TOL: f64 = 1e-8;

/// Slack subtracted from `F d` before rounding up in the fidelity witness.
const WITNESS_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtDecomposition {
    /// All `min(dA, dB)` coefficients, descending.
    pub coefficients: Vec<f64>,
    /// `dA x r` matrix with orthonormal columns.
    pub left_basis: ComplexMatrix,
    /// `dB x r` matrix with orthonormal columns.
    pub right_basis: ComplexMatrix,
    pub rank: usize,
}

impl SchmidtDecomposition {
    /// `sum_i c_i left_i (x) right_i` over the first `rank` terms.
    pub fn reconstruct(&self) -> ComplexVector {
        let (da, db) = (self.left_basis.nrows(), self.right_basis.nrows());
        let mut v = ComplexVector::zeros(da * db);
        for i in 0..self.rank {
            for a in 0..da {
                for b in 0..db {
                    v[a * db + b] +=
                        self.left_basis[(a, i)] * self.right_basis[(b, i)] * self.coefficients[i];
                }
            }
        }
        v
    }
}

fn reshape(v: &ComplexVector, da: usize, db: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(da, db, |a, b| v[a * db + b])
}

pub fn schmidt_decompose(
    v: &ComplexVector,
    da: usize,
    db: usize,
    tol: f64,
) -> Result<SchmidtDecomposition> {
    if da == 0 || db == 0 || v.len() != da * db {
        return Err(Error::DimensionMismatch {
            expected: format!("vector of length {da} x {db}"),
            got: format!("length {}", v.len()),
        });
    }
    let norm = v.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(norm));
    }
    let s = svd(&reshape(v, da, db))?;
    let r = s.singular_values.len();
    let mut left = s.u;
    let mut right = s.v_adjoint.transpose();
    // Fix the phase: largest-magnitude entry of each left vector is real positive.
    for i in 0..r {
        let (mut best, mut pivot) = (0.0, numerics::ONE);
        for a in 0..da {
            let z = left[(a, i)];
            if z.norm() > best {
                best = z.norm();
                pivot = z;
            }
        }
        if best > 0.0 {
            let phase = pivot / best;
            for a in 0..da {
                left[(a, i)] *= phase.conj();
            }
            for b in 0..db {
                right[(b, i)] *= phase;
            }
        }
    }
    let rank = rank_of_spectrum(&s.singular_values, tol);
    Ok(SchmidtDecomposition {
        coefficients: s.singular_values,
        left_basis: left,
        right_basis: right,
        rank,
    })
}

pub fn schmidt_rank(v: &ComplexVector, da: usize, db: usize, tol: f64) -> Result<usize> {
    Ok(schmidt_decompose(v, da, db, tol)?.rank)
}

/// Largest numerical rank among the operators of `k`. The channel lies in
/// `O_r` for the returned `r`.
pub fn kraus_max_rank(k: &KrausSet, tol: f64) -> Result<usize> {
    let mut worst = 0;
    for op in k.operators() {
        worst = worst.max(numerics::numerical_rank(op, tol)?);
    }
    Ok(worst)
}

/// Settings for [`minimize_kraus_rank`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Initial geodesic step length.
    pub step: f64,
    pub seed: u64,
    /// Relative rank cutoff used when checking witnesses.
    pub tol: f64,
    /// Zero operators appended to the canonical set before mixing.
    pub extra_operators: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iters: 2000,
            step: 0.5,
            seed: 0,
            tol: DEFAULT_RANK_TOL,
            extra_operators: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RankCertificate {
    pub target_k: usize,
    pub achieved: bool,
    /// Present iff `achieved`.
    pub witness_kraus: Option<KrausSet>,
    /// Largest operator rank in the best representation found.
    pub max_rank_found: usize,
    pub mixing_unitary: ComplexMatrix,
    /// Tail energy `sum_b sum_{i > k} sigma_i(K'_b)^2` at the optimum.
    pub residual: f64,
    pub best_restart: usize,
    pub restarts_run: usize,
    pub iterations: usize,
}

/// Tail energy of a mixed Kraus set and its Riemannian gradient with respect
/// to left multiplication `U -> exp(H) U`, `H` anti-Hermitian.
pub(crate) fn tail_objective(ops: &[ComplexMatrix], k: usize, with_grad: bool) -> Result<(f64, Option<ComplexMatrix>)> {
    let m = ops.len();
    let mut value = 0.0;
    let mut tails = Vec::with_capacity(if with_grad { m } else { 0 });
    for op in ops {
        let s = svd(op)?;
        let mut tail = ComplexMatrix::zeros(op.nrows(), op.ncols());
        for (i, &sigma) in s.singular_values.iter().enumerate().skip(k) {
            value += sigma * sigma;
            if with_grad && sigma > 0.0 {
                let u = s.u.column(i);
                let v = s.v_adjoint.row(i);
                tail += (u * v) * c(sigma, 0.0);
            }
        }
        if with_grad {
            tails.push(tail);
        }
    }
    if !with_grad {
        return Ok((value, None));
    }
    // d f = 2 Re sum_{b,g} H[b,g] <T_b, K'_g>; with C^[b,g] = conj<T_b, K'_g>
    // the gradient in the anti-Hermitian algebra is C^ - C^dag.
    let chat = ComplexMatrix::from_fn(m, m, |b, g| inner(&tails[b], &ops[g]).conj());
    let grad = &chat - chat.adjoint();
    Ok((value, Some(grad)))
}

struct RestartOutcome {
    index: usize,
    value: f64,
    unitary: ComplexMatrix,
    iterations: usize,
}

fn run_restart(
    canonical: &[ComplexMatrix],
    k: usize,
    threshold: f64,
    config: &SearchConfig,
    index: usize,
) -> Result<RestartOutcome> {
    let m = canonical.len();
    let mut unitary = if index == 0 {
        ComplexMatrix::identity(m, m)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(index as u64);
        haar_unitary_from(&mut rng, m)?
    };
    let mut ops = mix_operators(canonical, &unitary);
    let (mut value, grad) = tail_objective(&ops, k, true)?;
    let mut grad = grad.expect("gradient requested");
    let mut step = config.step;
    let mut history = vec![value];
    let mut iterations = 0;
    let polish_target = threshold * POLISH_FACTOR;

    // Riemannian gradient descent with Barzilai-Borwein steps, safeguarded by
    // a non-monotone Armijo test against the recent maximum.
    while iterations < config.max_iters && value > polish_target {
        iterations += 1;
        let gnorm2 = frobenius_sq(&grad);
        if gnorm2 == 0.0 {
            break;
        }
        let reference = history
            .iter()
            .rev()
            .take(NONMONOTONE_WINDOW)
            .fold(f64::MIN, |a, &b| a.max(b));
        let mut accepted = None;
        while step > 1e-14 {
            let rotation = expm_anti_hermitian(&grad.scale(-step))?;
            let trial_u = &rotation * &unitary;
            let trial_ops = mix_operators(canonical, &trial_u);
            let (trial_value, _) = tail_objective(&trial_ops, k, false)?;
            if trial_value <= reference - 1e-4 * step * gnorm2 {
                accepted = Some((trial_u, trial_ops, trial_value));
                break;
            }
            step *= 0.5;
        }
        let Some((trial_u, trial_ops, _)) = accepted else {
            break;
        };
        unitary = trial_u;
        ops = trial_ops;
        let (v, g) = tail_objective(&ops, k, true)?;
        let g = g.expect("gradient requested");
        // s = -step * grad, y = g - grad
        let y = &g - &grad;
        let sy = -step * inner(&grad, &y).re;
        let ss = step * step * gnorm2;
        step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e6) } else { (step * 2.0).min(1e6) };
        value = v;
        grad = g;
        history.push(value);
        if stalled(&history, threshold) {
            break;
        }
    }
    Ok(RestartOutcome {
        index,
        value,
        unitary,
        iterations,
    })
}

// A restart that has flattened out is stuck in a local minimum, or has
// polished as far as round-off allows.
fn stalled(history: &[f64], threshold: f64) -> bool {
    if history.len() <= STALL_WINDOW {
        return false;
    }
    let window = &history[history.len() - STALL_WINDOW - 1..];
    let old = window.iter().fold(f64::MIN, |a, &b| a.max(b));
    let new = *window.last().expect("non-empty");
    let required = if new <= threshold { 1e-3 } else { 1e-6 };
    old - new < required * old
}

/// Best rank-`k` truncation of each operator, renormalized on the right by
/// `(sum K^dag K)^{-1/2}` so the closure relation holds exactly again.
fn truncate_to_rank(ops: &[ComplexMatrix], k: usize) -> Result<Vec<ComplexMatrix>> {
    let mut truncated = Vec::with_capacity(ops.len());
    for op in ops {
        let s = svd(op)?;
        let mut t = ComplexMatrix::zeros(op.nrows(), op.ncols());
        for i in 0..k.min(s.singular_values.len()) {
            t += (s.u.column(i) * s.v_adjoint.row(i)) * c(s.singular_values[i], 0.0);
        }
        truncated.push(t);
    }
    let d = ops[0].ncols();
    let mut gram = ComplexMatrix::zeros(d, d);
    for t in &truncated {
        gram += t.adjoint() * t;
    }
    let inv_sqrt = hermitian_map(&gram, |l| if l > 0.0 { 1.0 / l.sqrt() } else { 0.0 })?;
    Ok(truncated.into_iter().map(|t| t * &inv_sqrt).collect())
}

/// Searches unitary mixings `K'_b = sum_a U[b, a] K_a` of the canonical Kraus
/// set for a representation whose operators all have rank at most
/// `target_k`.
pub fn minimize_kraus_rank(
    k: &KrausSet,
    target_k: usize,
    config: &SearchConfig,
) -> Result<RankCertificate> {
    let d = k.dim()?;
    if target_k == 0 || target_k > d {
        return Err(Error::OutOfRange(format!("target_k = {target_k} not in [1, {d}]")));
    }
    if config.restarts == 0 {
        return Err(Error::OutOfRange("at least one restart is required".into()));
    }
    let choi = kraus_to_choi(k)?;
    let canonical = choi_to_kraus(&choi, config.tol)?;
    let canonical = canonical.padded(canonical.len() + config.extra_operators);
    let canonical = canonical.operators();
    let total: f64 = canonical.iter().map(frobenius_sq).sum();
    let threshold = 1e-12 * total;

    // Restarts run in fixed-size waves; the search stops after the first wave
    // that yields a certified witness, so the outcome does not depend on
    // scheduling.
    const WAVE: usize = 8;
    let mut outcomes: Vec<RestartOutcome> = Vec::new();
    let mut certified: Option<(usize, KrausSet)> = None;
    let mut start = 0;
    while start < config.restarts && certified.is_none() {
        let end = (start + WAVE).min(config.restarts);
        let wave = (start..end)
            .into_par_iter()
            .map(|i| run_restart(canonical, target_k, threshold, config, i))
            .collect::<Result<Vec<RestartOutcome>>>()?;
        let mut order: Vec<&RestartOutcome> = wave.iter().filter(|o| o.value <= threshold).collect();
        order.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.index.cmp(&b.index)));
        for o in order {
            let mixed = mix_operators(canonical, &o.unitary);
            let candidate = KrausSet::new_unchecked(truncate_to_rank(&mixed, target_k)?)?;
            if certificate_holds(&candidate, &choi, target_k, config.tol)? {
                certified = Some((o.index, candidate));
                break;
            }
        }
        outcomes.extend(wave);
        start = end;
    }
    let restarts_run = outcomes.len();
    let iterations = outcomes.iter().map(|o| o.iterations).sum();
    let best = match &certified {
        Some((index, _)) => outcomes.into_iter().find(|o| o.index == *index),
        None => outcomes
            .into_iter()
            .min_by(|a, b| a.value.total_cmp(&b.value).then(a.index.cmp(&b.index))),
    }
    .expect("at least one restart");

    let (witness, max_rank_found) = match certified {
        Some((_, w)) => {
            let r = kraus_max_rank(&w, config.tol)?;
            (Some(w), r)
        }
        None => {
            let mixed = mix_operators(canonical, &best.unitary);
            let mut r = 0;
            for op in &mixed {
                r = r.max(numerics::numerical_rank(op, config.tol)?);
            }
            (None, r)
        }
    };
    Ok(RankCertificate {
        target_k,
        achieved: witness.is_some(),
        witness_kraus: witness,
        max_rank_found,
        mixing_unitary: best.unitary,
        residual: best.value,
        best_restart: best.index,
        restarts_run,
        iterations,
    })
}

/// Independent check of a witness: every operator has rank at most `k`, the
/// closure relation holds, and the witness reproduces `choi`.
pub fn certificate_holds(witness: &KrausSet, choi: &ChoiMatrix, k: usize, tol: f64) -> Result<bool> {
    if kraus_max_rank(witness, tol)? > k {
        return Ok(false);
    }
    if witness.closure_residual() > CERTIFICATE_TOL {
        return Ok(false);
    }
    let regenerated = choi_of_operators(witness.operators(), choi.d());
    Ok(max_abs_diff(&regenerated, choi.matrix()) < CERTIFICATE_TOL)
}

/// Result of the Kraus-rank scan.
#[derive(Debug, Clone)]
pub struct UpperSearch {
    pub upper_bound: usize,
    pub canonical_max_rank: usize,
    /// Certificate for `upper_bound`.
    pub certificate: RankCertificate,
}

/// Smallest `k` for which [`minimize_kraus_rank`] certifies a witness, out of
/// `1..=canonical max rank`. Targets below the entangled-state witness are
/// infeasible and skipped; the rest are tried in increasing order, so the
/// first success is the minimum.
pub fn sn_upper_search_detailed(k: &KrausSet, config: &SearchConfig) -> Result<UpperSearch> {
    let choi = kraus_to_choi(k)?;
    let canonical = choi_to_kraus(&choi, config.tol)?;
    let start = kraus_max_rank(&canonical, config.tol)?.max(1);
    let lower = sn_lower_bound_entangled(&choi)?.min(start);
    for target in lower..start {
        let cert = minimize_kraus_rank(k, target, config)?;
        if cert.achieved {
            return Ok(UpperSearch {
                upper_bound: target,
                canonical_max_rank: start,
                certificate: cert,
            });
        }
    }
    let cert = minimize_kraus_rank(k, start, config)?;
    if !cert.achieved {
        return Err(Error::Verification(cert.residual));
    }
    Ok(UpperSearch {
        upper_bound: start,
        canonical_max_rank: start,
        certificate: cert,
    })
}

pub fn sn_upper_search(k: &KrausSet, config: &SearchConfig) -> Result<usize> {
    Ok(sn_upper_search_detailed(k, config)?.upper_bound)
}

/// Smallest `k` compatible with `F = <Phi_d|J|Phi_d>`, using
/// `F <= k / d` for every state of Schmidt number at most `k`.
pub fn sn_lower_bound_fidelity(j: &ChoiMatrix) -> usize {
    lower_bound_from_matrix(j.matrix(), j.d())
}

pub(crate) fn lower_bound_from_matrix(m: &ComplexMatrix, d: usize) -> usize {
    let f = entangled_fraction(m, d);
    let k = (f * d as f64 - WITNESS_SLACK).ceil();
    (k.max(1.0) as usize).min(d)
}

/// Iterations of the polar ascent in [`sn_lower_bound_entangled`].
pub const POLAR_ITERS: usize = 500;

fn polar(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let s = svd(m)?;
    Ok(&s.u * &s.v_adjoint)
}

/// Overlap `<Phi_W|J|Phi_W>` with `|Phi_W> = vec(W) / sqrt(d)`, maximized over
/// unitaries `W` by the ascent `W <- polar(unvec(J vec(W)))`, which never
/// decreases the overlap since `J >= 0`. Starts from the identity and from
/// the polar factors of the leading eigenvectors of `J`.
pub fn max_entangled_overlap(j: &ChoiMatrix) -> Result<f64> {
    let d = j.d();
    let m = j.matrix();
    let norm = c(1.0 / (d as f64).sqrt(), 0.0);
    let eig = numerics::eigh(m)?;
    let mut starts = vec![ComplexMatrix::identity(d, d)];
    for col in 0..d.min(eig.eigenvalues.len()) {
        if eig.eigenvalues[col] <= 1e-12 {
            break;
        }
        let v = eig.eigenvectors.column(col).into_owned();
        starts.push(polar(&unvec(&v, d))?);
    }
    let overlap = |w: &ComplexMatrix| {
        let x = choi_vector(w) * norm;
        (x.adjoint() * m * &x)[(0, 0)].re
    };
    let mut best: f64 = 0.0;
    for mut w in starts {
        let mut f = overlap(&w);
        for _ in 0..POLAR_ITERS {
            let g = m * (choi_vector(&w) * norm);
            let next = polar(&unvec(&g, d))?;
            let f_next = overlap(&next);
            if f_next <= f + 1e-15 {
                break;
            }
            w = next;
            f = f_next;
        }
        best = best.max(f);
    }
    Ok(best.min(1.0))
}

/// Like [`sn_lower_bound_fidelity`] but with the fidelity taken against the
/// best maximally entangled state found, so it is insensitive to local
/// unitaries on the output. Never smaller than the fixed-state bound.
pub fn sn_lower_bound_entangled(j: &ChoiMatrix) -> Result<usize> {
    let d = j.d();
    let f = max_entangled_overlap(j)?.max(entangled_fraction(j.matrix(), d));
    let k = (f * d as f64 - WITNESS_SLACK).ceil();
    Ok((k.max(1.0) as usize).min(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{maximally_entangled, DensityMatrix};
    use crate::numerics::{gaussian_matrix, haar_random_unitary, ONE, ZERO};

    fn basis_vec(n: usize, idx: &[(usize, f64)]) -> ComplexVector {
        let mut v = ComplexVector::zeros(n);
        for &(i, x) in idx {
            v[i] = c(x, 0.0);
        }
        v
    }

    fn rank2_scrambled(seed: u64) -> KrausSet {
        // three rank-2 operators on d = 3, normalized on the right, then mixed
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<ComplexMatrix> = (0..3)
            .map(|_| gaussian_matrix(&mut rng, 3, 2) * gaussian_matrix(&mut rng, 2, 3))
            .collect();
        let mut gram = ComplexMatrix::zeros(3, 3);
        for a in &raw {
            gram += a.adjoint() * a;
        }
        let inv = hermitian_map(&gram, |l| 1.0 / l.sqrt()).unwrap();
        let k = KrausSet::new(raw.into_iter().map(|a| a * &inv).collect()).unwrap();
        k.mixed(&haar_unitary_from(&mut rng, 3).unwrap()).unwrap()
    }

    #[test]
    fn schmidt_examples() {
        let s = 0.5f64.sqrt();
        let phi2 = maximally_entangled(2);
        let dec = schmidt_decompose(&phi2, 2, 2, 1e-10).unwrap();
        assert_eq!(dec.rank, 2);
        assert!((dec.coefficients[0] - s).abs() < 1e-14);
        assert!((dec.coefficients[1] - s).abs() < 1e-14);

        let prod = basis_vec(4, &[(0, 1.0)]);
        let dec = schmidt_decompose(&prod, 2, 2, 1e-10).unwrap();
        assert_eq!(dec.rank, 1);
        assert!((dec.coefficients[0] - 1.0).abs() < 1e-14);

        let plus = basis_vec(4, &[(0, s), (1, s)]);
        assert_eq!(schmidt_rank(&plus, 2, 2, 1e-10).unwrap(), 1);
    }

    #[test]
    fn schmidt_rank_examples() {
        assert_eq!(schmidt_rank(&maximally_entangled(3), 3, 3, 1e-10).unwrap(), 3);
        let s = 0.5f64.sqrt();
        let padded = basis_vec(9, &[(0, s), (4, s)]);
        assert_eq!(schmidt_rank(&padded, 3, 3, 1e-10).unwrap(), 2);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = gaussian_matrix(&mut rng, 12, 1);
        let v = ComplexVector::from_column_slice(g.as_slice()).normalize();
        assert_eq!(schmidt_rank(&v, 3, 4, 1e-10).unwrap(), 3);
        let sv = svd(&reshape(&v, 3, 4)).unwrap().singular_values;
        assert!(sv[2] > 1e-3);
    }

    #[test]
    fn schmidt_reconstruction_and_phase_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = gaussian_matrix(&mut rng, 12, 1);
        let v = ComplexVector::from_column_slice(g.as_slice()).normalize();
        let dec = schmidt_decompose(&v, 4, 3, 1e-10).unwrap();
        assert!((&dec.reconstruct() - &v).norm() < 1e-10);
        let sumsq: f64 = dec.coefficients.iter().map(|x| x * x).sum();
        assert!((sumsq - 1.0).abs() < 1e-10);
        for i in 0..dec.rank {
            let col = dec.left_basis.column(i);
            let pivot = col.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
            assert!(pivot.im.abs() < 1e-14 && pivot.re > 0.0);
        }
    }

    #[test]
    fn schmidt_rejects_unnormalized() {
        let v = basis_vec(4, &[(0, 2.0)]);
        assert!(matches!(schmidt_decompose(&v, 2, 2, 1e-10), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn max_rank_examples() {
        let id = KrausSet::new(vec![ComplexMatrix::identity(3, 3)]).unwrap();
        assert_eq!(kraus_max_rank(&id, 1e-10).unwrap(), 3);

        let mut ops = Vec::new();
        for p in 0..2 {
            for i in 0..2 {
                let mut m = ComplexMatrix::zeros(2, 2);
                m[(p, i)] = c(0.5f64.sqrt(), 0.0);
                ops.push(m);
            }
        }
        assert_eq!(kraus_max_rank(&KrausSet::new(ops).unwrap(), 1e-10).unwrap(), 1);

        let mut k0 = ComplexMatrix::identity(2, 2);
        k0[(1, 1)] = c(0.5f64.sqrt(), 0.0);
        let mut k1 = ComplexMatrix::zeros(2, 2);
        k1[(0, 1)] = c(0.5f64.sqrt(), 0.0);
        assert_eq!(kraus_max_rank(&KrausSet::new(vec![k0, k1]).unwrap(), 1e-10).unwrap(), 2);
    }

    #[test]
    fn tail_gradient_matches_finite_differences() {
        let k = rank2_scrambled(4);
        let ops = k.operators().to_vec();
        let (f0, g) = tail_objective(&ops, 1, true).unwrap();
        let g = g.unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = gaussian_matrix(&mut rng, 3, 3);
        let h = (&r - r.adjoint()).scale(0.5);
        let eps = 1e-6;
        let plus = expm_anti_hermitian(&h.scale(eps)).unwrap();
        let minus = expm_anti_hermitian(&h.scale(-eps)).unwrap();
        let fp = tail_objective(&mix_operators(&ops, &plus), 1, false).unwrap().0;
        let fm = tail_objective(&mix_operators(&ops, &minus), 1, false).unwrap().0;
        let numeric = (fp - fm) / (2.0 * eps);
        let analytic = inner(&g, &h).re;
        assert!(f0 > 0.0);
        assert!((numeric - analytic).abs() < 1e-6 * (1.0 + analytic.abs()), "{numeric} vs {analytic}");
    }

    #[test]
    fn identity_channel_is_trivially_certified_at_d() {
        let id = KrausSet::new(vec![ComplexMatrix::identity(3, 3)]).unwrap();
        let cert = minimize_kraus_rank(&id, 3, &SearchConfig::default()).unwrap();
        assert!(cert.achieved);
        assert_eq!(cert.witness_kraus.unwrap().len(), 1);
        assert_eq!(cert.residual, 0.0);
    }

    #[test]
    fn target_out_of_range_rejected() {
        let id = KrausSet::new(vec![ComplexMatrix::identity(2, 2)]).unwrap();
        assert!(minimize_kraus_rank(&id, 0, &SearchConfig::default()).is_err());
        assert!(minimize_kraus_rank(&id, 3, &SearchConfig::default()).is_err());
    }

    #[test]
    fn unscrambles_completely_depolarizing_qubit() {
        let s = 0.5f64.sqrt();
        let mut ops = Vec::new();
        for p in 0..2 {
            for i in 0..2 {
                let mut m = ComplexMatrix::zeros(2, 2);
                m[(p, i)] = c(s, 0.0);
                ops.push(m);
            }
        }
        let k = KrausSet::new(ops).unwrap();
        let scrambled = k.mixed(&haar_random_unitary(4, 77).unwrap()).unwrap();
        assert!(kraus_max_rank(&scrambled, 1e-10).unwrap() > 1);
        let cert = minimize_kraus_rank(&scrambled, 1, &SearchConfig::default()).unwrap();
        assert!(cert.achieved, "residual {}", cert.residual);
        assert!(cert.residual < 1e-12);
        let witness = cert.witness_kraus.unwrap();
        let j = kraus_to_choi(&scrambled).unwrap();
        assert!(certificate_holds(&witness, &j, 1, 1e-10).unwrap());
    }

    #[test]
    fn unscrambles_rank_two_channel() {
        let k = rank2_scrambled(10);
        assert_eq!(kraus_max_rank(&k, 1e-10).unwrap(), 3);
        let cert = minimize_kraus_rank(&k, 2, &SearchConfig::default()).unwrap();
        assert!(cert.achieved, "residual {}", cert.residual);
        let witness = cert.witness_kraus.as_ref().unwrap();
        assert!(kraus_max_rank(witness, 1e-10).unwrap() <= 2);
        // the same witness certifies the next class up
        assert!(certificate_holds(witness, &kraus_to_choi(&k).unwrap(), 3, 1e-10).unwrap());
    }

    #[test]
    fn upper_search_examples() {
        let cfg = SearchConfig::default();
        let mut ops = Vec::new();
        let s = 1.0 / 3f64.sqrt();
        for p in 0..3 {
            for i in 0..3 {
                let mut m = ComplexMatrix::zeros(3, 3);
                m[(p, i)] = c(s, 0.0);
                ops.push(m);
            }
        }
        let dep = KrausSet::new(ops).unwrap();
        let dep = dep.mixed(&haar_random_unitary(9, 5).unwrap()).unwrap();
        assert_eq!(sn_upper_search(&dep, &cfg).unwrap(), 1);

        let u = KrausSet::new(vec![haar_random_unitary(3, 1).unwrap()]).unwrap();
        assert_eq!(sn_upper_search(&u, &cfg).unwrap(), 3);

        let z = ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
        let deph = KrausSet::new(vec![
            ComplexMatrix::identity(2, 2).scale(0.75f64.sqrt()),
            z.scale(0.5),
        ])
        .unwrap();
        let small = SearchConfig {
            restarts: 8,
            max_iters: 500,
            ..cfg
        };
        assert_eq!(sn_upper_search(&deph, &small).unwrap(), 2);
    }

    #[test]
    fn fidelity_witness_examples() {
        let id = kraus_to_choi(&KrausSet::new(vec![ComplexMatrix::identity(3, 3)]).unwrap()).unwrap();
        assert_eq!(sn_lower_bound_fidelity(&id), 3);

        let dep = ChoiMatrix::new(ComplexMatrix::identity(9, 9).scale(1.0 / 9.0)).unwrap();
        assert!((entangled_fraction(dep.matrix(), 3) - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(sn_lower_bound_fidelity(&dep), 1);

        // |Phi_2> padded into 3 (x) 3 has F = 2/3 against |Phi_3>
        let s = 0.5f64.sqrt();
        let padded = basis_vec(9, &[(0, s), (4, s)]);
        let state = &padded * padded.adjoint();
        assert!((entangled_fraction(&state, 3) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(lower_bound_from_matrix(&state, 3), 2);

        // a channel that keeps the {0,1} block coherent: K0 = P01, K1 = |0><2|
        let mut p01 = ComplexMatrix::zeros(3, 3);
        p01[(0, 0)] = ONE;
        p01[(1, 1)] = ONE;
        let mut k1 = ComplexMatrix::zeros(3, 3);
        k1[(0, 2)] = ONE;
        let j = kraus_to_choi(&KrausSet::new(vec![p01, k1]).unwrap()).unwrap();
        assert!((entangled_fraction(j.matrix(), 3) - 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(sn_lower_bound_fidelity(&j), 2);
    }

    #[test]
    fn mixing_preserves_channel() {
        for seed in 0..10 {
            let k = rank2_scrambled(100 + seed);
            let u = haar_random_unitary(3, seed).unwrap();
            let j1 = kraus_to_choi(&k).unwrap();
            let j2 = kraus_to_choi(&k.mixed(&u).unwrap()).unwrap();
            assert!(max_abs_diff(j1.matrix(), j2.matrix()) < 1e-10);
            let rho = DensityMatrix::random(3, seed);
            let a = crate::channels::apply_kraus(&k, &rho).unwrap();
            let b = crate::channels::apply_kraus(&k.mixed(&u).unwrap(), &rho).unwrap();
            assert!(max_abs_diff(a.matrix(), b.matrix()) < 1e-10);
        }
    }

    #[test]
    fn entangled_witness_sees_through_local_unitaries() {
        for (d, seed) in [(2, 1), (3, 5), (4, 9)] {
            let u = KrausSet::new(vec![haar_random_unitary(d, seed).unwrap()]).unwrap();
            let j = kraus_to_choi(&u).unwrap();
            assert!((max_entangled_overlap(&j).unwrap() - 1.0).abs() < 1e-9);
            assert_eq!(sn_lower_bound_entangled(&j).unwrap(), d);
        }
        // a depolarized unitary: overlap (1 - p) + p / d^2
        let d = 3;
        let p = 0.5f64;
        let w = haar_random_unitary(d, 2).unwrap();
        let mut ops = vec![w.clone() * c((1.0 - p + p / 9.0).sqrt(), 0.0)];
        for m in 0..d {
            for n in 0..d {
                if m + n > 0 {
                    ops.push(&w * crate::protocol::weyl(d, m, n).unwrap() * c(p.sqrt() / 3.0, 0.0));
                }
            }
        }
        let j = kraus_to_choi(&KrausSet::new(ops).unwrap()).unwrap();
        let f = max_entangled_overlap(&j).unwrap();
        assert!((f - (1.0 - p + p / 9.0)).abs() < 1e-9, "{f}");
        assert_eq!(sn_lower_bound_entangled(&j).unwrap(), 2);
    }

    #[test]
    fn entangled_witness_never_exceeds_upper_search() {
        let j = kraus_to_choi(&rank2_scrambled(3)).unwrap();
        let lower = sn_lower_bound_entangled(&j).unwrap();
        assert!(lower >= sn_lower_bound_fidelity(&j));
        assert!(lower <= 2);
        let full = ComplexMatrix::identity(4, 4).scale(0.25);
        assert_eq!(sn_lower_bound_entangled(&ChoiMatrix::new(full).unwrap()).unwrap(), 1);
    }
}
