//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::time::Instant;

use rayon::prelude::*;

use kpeb::channels::{
    apply_kraus, channel_distance, choi_apply, choi_to_kraus, entangled_fraction, kraus_to_choi,
    kraus_to_stinespring, DensityMatrix, KrausSet,
};
use kpeb::numerics::{c, haar_random_unitary, max_abs_diff, ComplexMatrix, ONE};
use kpeb::protocol::{
    make_resource, protocol_choi, protocol_kraus, simulate_locc_exact, simulate_locc_sampled,
};
use kpeb::schmidt::{
    certificate_holds, kraus_max_rank, minimize_kraus_rank, sn_lower_bound_fidelity,
    sn_upper_search_detailed, SearchConfig,
};
use kpeb::zoo::{self, ChannelSpec};

const RANK_TOL: f64 = 1e-10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn inputs(d: usize, n: u64, salt: u64) -> Vec<DensityMatrix> {
    (0..n).map(|i| DensityMatrix::random(d, salt * 1000 + i)).collect()
}

fn label(spec: &ChannelSpec) -> String {
    let params: Vec<String> = spec.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{}(d={}, {})", spec.name, spec.d, params.join(", "))
}

struct TheoremRun {
    residual: f64,
    choi_distance: f64,
    composite_rank: usize,
    k: usize,
    resource_rank: usize,
}

fn theorem_run(spec: &ChannelSpec, idx: u64) -> Result<TheoremRun, String> {
    let kraus = &spec.kraus;
    let k = kraus_max_rank(kraus, RANK_TOL).map_err(|e| e.to_string())?;
    let mut residual: f64 = 0.0;
    for rho in inputs(spec.d, 10, idx) {
        let (out, _) = simulate_locc_exact(kraus, k, &rho).map_err(|e| format!("{}: {e}", label(spec)))?;
        let direct = apply_kraus(kraus, &rho).map_err(|e| e.to_string())?;
        residual = residual.max(max_abs_diff(out.matrix(), direct.matrix()));
    }
    let pj = protocol_choi(kraus, k).map_err(|e| e.to_string())?;
    let tj = kraus_to_choi(kraus).map_err(|e| e.to_string())?;
    let choi_distance = channel_distance(&pj, &tj).map_err(|e| e.to_string())?.trace_distance;
    let composite = protocol_kraus(kraus, k).map_err(|e| e.to_string())?;
    let composite_rank = kraus_max_rank(&composite, RANK_TOL).map_err(|e| e.to_string())?;
    let resource_rank = make_resource(k)
        .and_then(|r| r.schmidt_rank())
        .map_err(|e| e.to_string())?;
    Ok(TheoremRun {
        residual,
        choi_distance,
        composite_rank,
        k,
        resource_rank,
    })
}

fn criteria_1_2(corpus: &[ChannelSpec]) -> (Outcome, Outcome) {
    let start = Instant::now();
    let runs: Vec<Result<TheoremRun, String>> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, spec)| theorem_run(spec, i as u64))
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let errors: Vec<&String> = runs.iter().filter_map(|r| r.as_ref().err()).collect();
    let ok: Vec<&TheoremRun> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let max_res = ok.iter().map(|r| r.residual).fold(0.0, f64::max);
    let max_dist = ok.iter().map(|r| r.choi_distance).fold(0.0, f64::max);
    let c1 = errors.is_empty()
        && corpus.len() >= 30
        && ok.iter().all(|r| r.residual <= 1e-9 && r.choi_distance <= 1e-8)
        && secs < 120.0;
    let mut detail = format!(
        "{} channels x 10 inputs, max entrywise residual {max_res:.2e} (tol 1e-9), max Choi trace distance {max_dist:.2e} (tol 1e-8), {secs:.1} s (limit 120 s)",
        corpus.len()
    );
    if let Some(e) = errors.first() {
        detail.push_str(&format!(", first error: {e}"));
    }
    let rank_ok = ok.iter().filter(|r| r.composite_rank <= r.k).count();
    let resource_ok = ok.iter().filter(|r| r.resource_rank == r.k).count();
    let c2 = errors.is_empty() && rank_ok == ok.len() && resource_ok == ok.len();
    (
        Outcome { pass: c1, detail },
        Outcome {
            pass: c2,
            detail: format!(
                "composite Kraus rank <= k in {rank_ok}/{} runs, resource Schmidt rank = k in {resource_ok}/{} runs",
                corpus.len(),
                corpus.len()
            ),
        },
    )
}

/// One corpus channel through the three legs of the equivalence chain, with
/// `k` the channel's known Schmidt-number upper bound.
fn chain(spec: &ChannelSpec, idx: u64) -> Result<(), String> {
    let name = label(spec);
    let k = spec.known_sn_bounds.upper;
    let config = SearchConfig {
        seed: idx,
        ..SearchConfig::default()
    };
    let kraus = if kraus_max_rank(&spec.kraus, RANK_TOL).map_err(|e| e.to_string())? <= k {
        spec.kraus.clone()
    } else {
        let cert = minimize_kraus_rank(&spec.kraus, k, &config).map_err(|e| e.to_string())?;
        cert.witness_kraus
            .ok_or_else(|| format!("{name}: no rank-{k} representation found (residual {:.2e})", cert.residual))?
    };

    // rank-k Kraus form => LOCC simulation with a Schmidt-rank-k resource
    let rho = DensityMatrix::random(spec.d, 77 + idx);
    let (out, _) = simulate_locc_exact(&kraus, k, &rho).map_err(|e| format!("{name}: simulation: {e}"))?;
    let direct = apply_kraus(&spec.kraus, &rho).map_err(|e| e.to_string())?;
    if max_abs_diff(out.matrix(), direct.matrix()) > 1e-9 {
        return Err(format!("{name}: simulated output deviates from the channel"));
    }
    let pj = protocol_choi(&kraus, k).map_err(|e| e.to_string())?;
    let tj = kraus_to_choi(&spec.kraus).map_err(|e| e.to_string())?;
    if channel_distance(&pj, &tj).map_err(|e| e.to_string())?.trace_distance > 1e-8 {
        return Err(format!("{name}: protocol Choi differs from the channel's"));
    }

    // LOCC simulation => Choi Schmidt number <= k
    let lower = sn_lower_bound_fidelity(&pj);
    if lower > k {
        return Err(format!("{name}: protocol Choi witness {lower} > k = {k}"));
    }

    // Choi of rank-k operators => rank-k Kraus form recovered from the Choi alone
    let j = kraus_to_choi(&kraus).map_err(|e| e.to_string())?;
    let canonical = choi_to_kraus(&j, RANK_TOL).map_err(|e| e.to_string())?;
    let cert = minimize_kraus_rank(&canonical, k, &config).map_err(|e| e.to_string())?;
    let witness = cert
        .witness_kraus
        .ok_or_else(|| format!("{name}: canonical set not reduced to rank {k} (residual {:.2e})", cert.residual))?;
    if kraus_max_rank(&witness, RANK_TOL).map_err(|e| e.to_string())? > k {
        return Err(format!("{name}: witness rank exceeds {k}"));
    }
    Ok(())
}

fn criterion_3(corpus: &[ChannelSpec]) -> Outcome {
    let start = Instant::now();
    let results: Vec<Result<(), String>> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, spec)| chain(spec, i as u64))
        .collect();
    let failures: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let mut detail = format!(
        "all three legs on {}/{} channels, {:.1} s",
        corpus.len() - failures.len(),
        corpus.len(),
        start.elapsed().as_secs_f64()
    );
    for f in failures.iter().take(3) {
        detail.push_str(&format!("; {f}"));
    }
    Outcome {
        pass: failures.is_empty(),
        detail,
    }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let results: Vec<(bool, bool)> = (0..20u64)
        .map(|i| {
            let k = 1 + (i % 2) as usize;
            let m = 3 + (i % 3) as usize;
            let spec = zoo::random_rank_k_channel(3, k, m, 5000 + i, true).expect("instance");
            let config = SearchConfig {
                restarts: 32,
                seed: i,
                ..SearchConfig::default()
            };
            let search = sn_upper_search_detailed(&spec.kraus, &config).expect("search runs");
            let recovered = search.upper_bound == k;
            let choi = kraus_to_choi(&spec.kraus).unwrap();
            let cert = &search.certificate;
            let verified = match &cert.witness_kraus {
                Some(w) => {
                    let rank_ok = kraus_max_rank(w, RANK_TOL).unwrap() <= cert.target_k;
                    let choi_ok = max_abs_diff(kraus_to_choi(w).unwrap().matrix(), choi.matrix()) <= 1e-8;
                    rank_ok && choi_ok && certificate_holds(w, &choi, cert.target_k, 1e-8).unwrap()
                }
                None => false,
            };
            (recovered, verified)
        })
        .collect();
    let recovered = results.iter().filter(|r| r.0).count();
    let verified = results.iter().filter(|r| r.1).count();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: recovered >= 19 && verified == 20 && secs < 300.0,
        detail: format!(
            "planted k recovered in {recovered}/20 (need 19), certificates re-verified {verified}/20, {secs:.1} s (limit 300 s)"
        ),
    }
}

fn criterion_5() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut branches = 0;
    for d in [2usize, 3, 4] {
        for s in 0..5u64 {
            let u = haar_random_unitary(d, 900 + 10 * d as u64 + s).unwrap();
            let kraus = KrausSet::new(vec![u.clone()]).unwrap();
            let rho = DensityMatrix::random(d, 40 + s);
            let target = &u * rho.matrix() * u.adjoint();
            let (_, transcript) = simulate_locc_exact(&kraus, d, &rho).unwrap();
            for entry in &transcript.outcomes {
                worst = worst.max(max_abs_diff(entry.bob_output.matrix(), &target));
                branches += 1;
            }
        }
    }
    Outcome {
        pass: worst <= 1e-10 && branches == 5 * (4 + 9 + 16),
        detail: format!("{branches} branches, worst deviation from U rho U^dag {worst:.2e} (tol 1e-10)"),
    }
}

fn criterion_6() -> Outcome {
    let resource = make_resource(1).unwrap();
    let product = resource.vector.len() == 1 && (resource.vector[0] - ONE).norm() == 0.0;
    let mut worst_res: f64 = 0.0;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut count = 0;
    for d in [2usize, 3, 4] {
        for seed in 0..4u64 {
            let spec = zoo::measure_prepare(d, seed * 31 + d as u64).unwrap();
            for rho in inputs(d, 10, 600 + seed) {
                let (out, _) = simulate_locc_exact(&spec.kraus, 1, &rho).unwrap();
                let direct = apply_kraus(&spec.kraus, &rho).unwrap();
                worst_res = worst_res.max(max_abs_diff(out.matrix(), direct.matrix()));
            }
            let pj = protocol_choi(&spec.kraus, 1).unwrap();
            let f = entangled_fraction(pj.matrix(), d);
            worst_gap = worst_gap.max(f - 1.0 / d as f64);
            count += 1;
        }
    }
    Outcome {
        pass: product && worst_res <= 1e-9 && worst_gap <= 1e-9,
        detail: format!(
            "{count} measure-prepare channels with the |00> resource, max residual {worst_res:.2e} (tol 1e-9), max F - 1/d {worst_gap:.2e} (tol 1e-9)"
        ),
    }
}

fn criterion_7(corpus: &[ChannelSpec]) -> Outcome {
    let mut round_trip: f64 = 0.0;
    let mut apply: f64 = 0.0;
    let mut stine: f64 = 0.0;
    for (i, spec) in corpus.iter().enumerate() {
        let j = kraus_to_choi(&spec.kraus).unwrap();
        let back = kraus_to_choi(&choi_to_kraus(&j, RANK_TOL).unwrap()).unwrap();
        round_trip = round_trip.max(max_abs_diff(j.matrix(), back.matrix()));
        for rho in inputs(spec.d, 3, 700 + i as u64) {
            let a = choi_apply(&j, &rho).unwrap();
            let b = apply_kraus(&spec.kraus, &rho).unwrap();
            apply = apply.max(max_abs_diff(a.matrix(), b.matrix()));
        }
        let s = kraus_to_stinespring(&spec.kraus);
        stine = stine.max(max_abs_diff(kraus_to_choi(&s.to_kraus().unwrap()).unwrap().matrix(), j.matrix()));
    }
    Outcome {
        pass: round_trip <= 1e-9 && apply <= 1e-9 && stine <= 1e-9,
        detail: format!(
            "{} channels: Kraus->Choi->Kraus {round_trip:.2e}, choi_apply vs apply_kraus {apply:.2e}, Stinespring {stine:.2e} (tol 1e-9)",
            corpus.len()
        ),
    }
}

fn criterion_8() -> Outcome {
    let spec = zoo::depolarizing(2, 1.0).unwrap();
    let mut ket0 = ComplexMatrix::zeros(2, 2);
    ket0[(0, 0)] = ONE;
    let rho = DensityMatrix::new(ket0).unwrap();
    let target = ComplexMatrix::identity(2, 2) * c(0.5, 0.0);
    let k = kraus_max_rank(&spec.kraus, RANK_TOL).unwrap();
    let mut good = 0;
    let mut worst_z: f64 = 0.0;
    for seed in 0..20u64 {
        let run = simulate_locc_sampled(&spec.kraus, k, &rho, seed, 10_000).unwrap();
        let mut ok = true;
        for r in 0..2 {
            for col in 0..2 {
                let dev = (run.empirical_output.matrix()[(r, col)] - target[(r, col)]).norm();
                let se = run.standard_error[(r, col)];
                if se > 0.0 {
                    worst_z = worst_z.max(dev / se);
                    ok &= dev <= 5.0 * se;
                } else {
                    ok &= dev <= 1e-12;
                }
            }
        }
        good += ok as usize;
    }
    Outcome {
        pass: good >= 19,
        detail: format!("{good}/20 seeds within 5 standard errors of I/2 (need 19), largest |z| {worst_z:.2}"),
    }
}

fn main() {
    let corpus = zoo::corpus().expect("corpus builds");
    let mut all = true;
    let mut report = |n: usize, name: &str, o: Outcome| {
        all &= o.pass;
        println!("{} criterion {n} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    };
    let (c1, c2) = criteria_1_2(&corpus);
    report(1, "theorem reproduction", c1);
    report(2, "composite rank and resource", c2);
    report(3, "equivalence chain", criterion_3(&corpus));
    report(4, "Kraus-rank minimization", criterion_4());
    report(5, "teleportation branches", criterion_5());
    report(6, "entanglement-breaking case", criterion_6());
    report(7, "representation algebra", criterion_7(&corpus));
    report(8, "sampled-mode statistics", criterion_8());
    if !all {
        std::process::exit(1);
    }
}
