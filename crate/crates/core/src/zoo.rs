//! Named and randomized channels with known Schmidt-number structure.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channels::{kraus_to_choi, KrausSet};
use crate::error::{Error, Result};
use crate::numerics::{
    self, c, gaussian_matrix, haar_unitary_from, hermitian_map, ComplexMatrix, ONE,
};
use crate::protocol::weyl;
use crate::schmidt::sn_lower_bound_entangled;

/// Attempts before `random_rank_k_channel` gives up on a singular draw.
pub const MAX_RESAMPLES: u64 = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SnBounds {
    pub lower: usize,
    pub upper: usize,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct ChannelSpec {
    pub name: String,
    pub d: usize,
    pub params: BTreeMap<String, f64>,
    pub kraus: KrausSet,
    pub known_sn_bounds: SnBounds,
}

/// Generator names accepted by [`by_name`].
pub const NAMES: [&str; 8] = [
    "depolarizing",
    "dephasing",
    "amplitude-damping",
    "werner-holevo",
    "measure-prepare",
    "unitary",
    "identity",
    "random-rank-k",
];

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn check_dim(d: usize, min: usize) -> Result<()> {
    if d < min {
        return Err(Error::OutOfRange(format!("dimension {d} below {min}")));
    }
    Ok(())
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("{name} = {p} not in [0, 1]")));
    }
    Ok(())
}

fn witness_lower(kraus: &KrausSet) -> Result<usize> {
    sn_lower_bound_entangled(&kraus_to_choi(kraus)?)
}

fn spec(name: &str, d: usize, params: BTreeMap<String, f64>, kraus: KrausSet, lower: usize, upper: usize, note: &str) -> ChannelSpec {
    ChannelSpec {
        name: name.into(),
        d,
        params,
        kraus,
        known_sn_bounds: SnBounds {
            lower,
            upper: upper.max(lower),
            note: note.into(),
        },
    }
}

/// `(1 - p) rho + p I / d`, expanded over the `d^2` Weyl operators.
pub fn depolarizing(d: usize, p: f64) -> Result<ChannelSpec> {
    check_dim(d, 1)?;
    check_probability("p", p)?;
    let df = d as f64;
    let mut ops = Vec::with_capacity(d * d);
    for m in 0..d {
        for n in 0..d {
            let w = if m == 0 && n == 0 {
                (1.0 - p + p / (df * df)).sqrt()
            } else {
                p.sqrt() / df
            };
            ops.push(weyl(d, m, n)? * c(w, 0.0));
        }
    }
    let kraus = KrausSet::new(ops)?;
    let lower = witness_lower(&kraus)?;
    let eb = p >= df / (df + 1.0) - 1e-12;
    let upper = if eb { 1 } else { d };
    let note = if eb {
        "fidelity witness; entanglement breaking for p >= d/(d+1)"
    } else {
        "fidelity witness; trivial upper bound d"
    };
    Ok(spec("depolarizing", d, params(&[("p", p)]), kraus, lower, upper, note))
}

/// Kraus `{sqrt(1-p) I} u {sqrt(p/(d-1)) Z^j : 1 <= j < d}`.
pub fn dephasing(d: usize, p: f64) -> Result<ChannelSpec> {
    check_dim(d, 2)?;
    check_probability("p", p)?;
    let mut ops = vec![ComplexMatrix::identity(d, d) * c((1.0 - p).sqrt(), 0.0)];
    let w = (p / (d - 1) as f64).sqrt();
    for j in 1..d {
        ops.push(weyl(d, 0, j)? * c(w, 0.0));
    }
    let kraus = KrausSet::new(ops)?;
    let lower = witness_lower(&kraus)?;
    // p = (d-1)/d removes every coherence: measurement in the computational basis
    let complete = (p - (d - 1) as f64 / d as f64).abs() < 1e-12;
    let (upper, note) = if complete {
        (1, "fidelity witness; complete dephasing is a computational-basis measurement")
    } else {
        (d, "fidelity witness; trivial upper bound d")
    };
    Ok(spec("dephasing", d, params(&[("p", p)]), kraus, lower, upper, note))
}

pub fn amplitude_damping_qubit(gamma: f64) -> Result<ChannelSpec> {
    check_probability("gamma", gamma)?;
    let mut k0 = ComplexMatrix::zeros(2, 2);
    k0[(0, 0)] = ONE;
    k0[(1, 1)] = c((1.0 - gamma).sqrt(), 0.0);
    let mut k1 = ComplexMatrix::zeros(2, 2);
    k1[(0, 1)] = c(gamma.sqrt(), 0.0);
    let kraus = KrausSet::new(vec![k0, k1])?;
    let lower = witness_lower(&kraus)?;
    let upper = crate::schmidt::kraus_max_rank(&kraus, numerics::DEFAULT_RANK_TOL)?;
    Ok(spec(
        "amplitude-damping",
        2,
        params(&[("gamma", gamma)]),
        kraus,
        lower,
        upper,
        "fidelity witness; rank of the defining Kraus operators",
    ))
}

/// Kraus `{(|i><j| - |j><i|) / sqrt(d-1) : i < j}`.
pub fn werner_holevo(d: usize) -> Result<ChannelSpec> {
    check_dim(d, 2)?;
    let s = 1.0 / ((d - 1) as f64).sqrt();
    let mut ops = Vec::with_capacity(d * (d - 1) / 2);
    for i in 0..d {
        for j in i + 1..d {
            let mut k = ComplexMatrix::zeros(d, d);
            k[(i, j)] = c(s, 0.0);
            k[(j, i)] = c(-s, 0.0);
            ops.push(k);
        }
    }
    let kraus = KrausSet::new(ops)?;
    let lower = witness_lower(&kraus)?;
    Ok(spec(
        "werner-holevo",
        d,
        BTreeMap::new(),
        kraus,
        lower,
        2,
        "fidelity witness; every Kraus operator has rank 2",
    ))
}

/// Random entanglement-breaking channel: a rank-one POVM `{|e_i><e_i|}` read
/// off the rows of the first `d` columns of a Haar unitary of size `d + 1`,
/// followed by preparation of Haar-random pure states `|phi_i>`.
pub fn measure_prepare(d: usize, seed: u64) -> Result<ChannelSpec> {
    check_dim(d, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let big = haar_unitary_from(&mut rng, d + 1)?;
    let povm = big.columns(0, d).into_owned();
    let mut ops = Vec::with_capacity(d + 1);
    for i in 0..=d {
        let phi = haar_unitary_from(&mut rng, d)?.column(0).into_owned();
        let row = povm.row(i).into_owned();
        ops.push(&phi * row);
    }
    let kraus = KrausSet::new(ops)?;
    Ok(spec(
        "measure-prepare",
        d,
        params(&[("seed", seed as f64)]),
        kraus,
        1,
        1,
        "measure-and-prepare form, all Kraus operators rank 1",
    ))
}

/// Single Haar-random unitary Kraus operator.
pub fn unitary_channel(d: usize, seed: u64) -> Result<ChannelSpec> {
    check_dim(d, 1)?;
    let u = numerics::haar_random_unitary(d, seed)?;
    let kraus = KrausSet::new(vec![u])?;
    Ok(spec(
        "unitary",
        d,
        params(&[("seed", seed as f64)]),
        kraus,
        d,
        d,
        "unitary channels have Schmidt number d",
    ))
}

pub fn identity(d: usize) -> Result<ChannelSpec> {
    check_dim(d, 1)?;
    let kraus = KrausSet::new(vec![ComplexMatrix::identity(d, d)])?;
    Ok(spec(
        "identity",
        d,
        BTreeMap::new(),
        kraus,
        d,
        d,
        "unitary channels have Schmidt number d",
    ))
}

/// `num_kraus` operators `G_a H_a` with Gaussian `d x k` and `k x d` factors,
/// right-normalized by `(sum_a (G_a H_a)^dag G_a H_a)^{-1/2}`. With `scramble`
/// the set is mixed by a Haar unitary, which hides the rank structure but
/// leaves the channel unchanged.
pub fn random_rank_k_channel(d: usize, k: usize, num_kraus: usize, seed: u64, scramble: bool) -> Result<ChannelSpec> {
    check_dim(d, 1)?;
    if k == 0 || k > d {
        return Err(Error::OutOfRange(format!("k = {k} not in [1, {d}]")));
    }
    if num_kraus == 0 {
        return Err(Error::OutOfRange("num_kraus must be >= 1".into()));
    }
    if num_kraus * k < d {
        return Err(Error::OutOfRange(format!(
            "num_kraus * k = {} < d = {d}: the normalizer is always singular",
            num_kraus * k
        )));
    }
    for attempt in 0..MAX_RESAMPLES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        let raw: Vec<ComplexMatrix> = (0..num_kraus)
            .map(|_| gaussian_matrix(&mut rng, d, k) * gaussian_matrix(&mut rng, k, d))
            .collect();
        let mut gram = ComplexMatrix::zeros(d, d);
        for a in &raw {
            gram += a.adjoint() * a;
        }
        let spectrum = numerics::eigh(&gram)?.eigenvalues;
        if spectrum[d - 1] <= 1e-10 * spectrum[0] {
            continue;
        }
        let inv_sqrt = hermitian_map(&gram, |l| 1.0 / l.sqrt())?;
        let mut kraus = KrausSet::new(raw.into_iter().map(|a| a * &inv_sqrt).collect())?;
        if scramble {
            let u = haar_unitary_from(&mut rng, num_kraus)?;
            kraus = kraus.mixed(&u)?;
        }
        let p = params(&[
            ("k", k as f64),
            ("num_kraus", num_kraus as f64),
            ("seed", seed as f64),
            ("scramble", if scramble { 1.0 } else { 0.0 }),
        ]);
        return Ok(spec(
            "random-rank-k",
            d,
            p,
            kraus,
            1,
            k,
            "built from operators of rank <= k; mixing preserves membership",
        ));
    }
    Err(Error::Sampling(format!(
        "no invertible normalizer after {MAX_RESAMPLES} draws (d = {d}, k = {k}, num_kraus = {num_kraus})"
    )))
}

fn required(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::OutOfRange(format!("missing parameter '{key}'")))
}

fn as_count(v: f64, key: &str) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 {
        return Err(Error::OutOfRange(format!("parameter '{key}' must be a non-negative integer, got {v}")));
    }
    Ok(v as usize)
}

/// Dispatch by generator name. Parameters: `p` (depolarizing, dephasing),
/// `gamma` (amplitude-damping), `k`, `num_kraus` and `scramble`
/// (random-rank-k, `num_kraus` defaults to 3 and `scramble` to 0).
pub fn by_name(name: &str, d: usize, params: &BTreeMap<String, f64>, seed: u64) -> Result<ChannelSpec> {
    match name {
        "depolarizing" => depolarizing(d, required(params, "p")?),
        "dephasing" => dephasing(d, required(params, "p")?),
        "amplitude-damping" => {
            if d != 2 {
                return Err(Error::OutOfRange(format!("amplitude-damping is a qubit channel, got d = {d}")));
            }
            amplitude_damping_qubit(required(params, "gamma")?)
        }
        "werner-holevo" => werner_holevo(d),
        "measure-prepare" => measure_prepare(d, seed),
        "unitary" => unitary_channel(d, seed),
        "identity" => identity(d),
        "random-rank-k" => {
            let k = as_count(required(params, "k")?, "k")?;
            let m = as_count(params.get("num_kraus").copied().unwrap_or(3.0), "num_kraus")?;
            let scramble = params.get("scramble").copied().unwrap_or(0.0) != 0.0;
            random_rank_k_channel(d, k, m, seed, scramble)
        }
        other => Err(Error::OutOfRange(format!(
            "unknown channel '{other}', expected one of {}",
            NAMES.join(", ")
        ))),
    }
}

/// Every generator at `d` in {2, 3, 4} plus random rank-`k` channels for
/// each `1 <= k <= d`, scrambled and plain.
pub fn corpus() -> Result<Vec<ChannelSpec>> {
    let mut out = Vec::new();
    for d in 2..=4usize {
        let df = d as f64;
        out.push(depolarizing(d, 0.5)?);
        out.push(depolarizing(d, 1.0)?);
        out.push(dephasing(d, 0.3)?);
        out.push(dephasing(d, (df - 1.0) / df)?);
        out.push(werner_holevo(d)?);
        out.push(measure_prepare(d, 100 + d as u64)?);
        out.push(unitary_channel(d, 200 + d as u64)?);
        out.push(identity(d)?);
        for k in 1..=d {
            let seed = 300 + 10 * d as u64 + k as u64;
            let m = 3.max(d.div_ceil(k));
            out.push(random_rank_k_channel(d, k, m, seed, false)?);
            out.push(random_rank_k_channel(d, k, m, seed, true)?);
        }
    }
    out.push(amplitude_damping_qubit(0.5)?);
    out.push(amplitude_damping_qubit(1.0)?);
    Ok(out)
}
