use std::collections::BTreeMap;

use cmr_core::algebra::{Field, FieldSpec};
use cmr_core::bounds::{msmr_point, Rational};
use cmr_core::mbcr::MbcrCode;
use cmr_core::rlnc::{rlnc_stress, StressOptions};
use cmr_core::secret::{SecretKind, BRUTE_FORCE_BUDGET};
use cmr_core::zigzag::{
    k_subsets, u_set, verify_schedule_counts, verify_solvability, Solvability, ZigzagCode,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::args::{CodeParams, SecretKindArg, VerifyArgs};
use crate::codec::zigzag_dims;
use crate::error::{CliError, Result};
use crate::report::{Bandwidth, Report};
use crate::secret_cmd::scheme_from_params;

/// Subsets scanned per size when `--all-z-subsets` is not given.
const SAMPLE: usize = 16;

pub fn verify(a: &VerifyArgs) -> Result<Report> {
    if !(a.zigzag || a.mbcr || a.secret || a.rlnc) {
        return Err(CliError::Params(
            "choose at least one of --zigzag, --mbcr, --secret, --rlnc".into(),
        ));
    }
    let seed = a.output.seed.unwrap_or(0);
    let mut report = Report::new("verify", seed);
    if a.zigzag {
        zigzag_suite(&a.params, seed, &mut report)?;
    }
    if a.mbcr {
        mbcr_suite(&a.params, seed, &mut report)?;
    }
    if a.secret {
        secret_suite(a, seed, &mut report)?;
    }
    if a.rlnc {
        rlnc_suite(a, seed, &mut report)?;
    }
    Ok(report)
}

fn random_vec(field: &Field, len: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    (0..len).map(|_| field.random(rng)).collect()
}

fn zigzag_suite(p: &CodeParams, seed: u64, report: &mut Report) -> Result<()> {
    let (r, k) = zigzag_dims(p)?;
    let field = Field::new(p.field.unwrap_or(FieldSpec::gf256()));
    report.param(
        "zigzag",
        json!({ "r": r, "k": k, "n": r + k, "field": field.spec().to_string() }),
    );
    let code = match ZigzagCode::build(r, k, &field, seed) {
        Ok(c) => c,
        Err(e) => {
            report.check("zigzag_build", false, e.to_string());
            return Ok(());
        }
    };
    let subsets = k_subsets(code.n(), k).len();
    match code.check_mds() {
        Ok(()) => report.check(
            "zigzag_mds",
            true,
            format!("all {subsets} k-subsets have rank {}", k * code.alpha()),
        ),
        Err(bad) => report.check(
            "zigzag_mds",
            false,
            format!("subset {bad:?} is rank-deficient"),
        ),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = random_vec(&field, k * code.alpha(), &mut rng);
    let nodes = code.encode(&data)?;
    for failed in code.supported_patterns() {
        let name = format!(
            "zigzag_repair_{}",
            failed
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("_")
        );
        let schedule = match code.multi_repair_schedule(&failed) {
            Ok(s) => s,
            Err(e) => {
                report.check(name, false, e.to_string());
                continue;
            }
        };
        let counts = verify_schedule_counts(&schedule, &code);
        let solv = verify_solvability(&code, &schedule);
        let avail: Vec<Option<&[u32]>> = (0..code.n())
            .map(|v| (!failed.contains(&v)).then(|| nodes[v].as_slice()))
            .collect();
        let exact = schedule
            .gather(&avail)
            .and_then(|got| code.execute_repair(&schedule, &got))
            .is_ok_and(|out| failed.iter().zip(&out).all(|(&v, o)| *o == nodes[v]));
        report.check(
            name,
            counts.pass && solv == Solvability::Solvable && exact,
            format!(
                "{} symbols, {} per helper, {:?}, exact={exact}",
                counts.total, counts.expected_per_helper, solv
            ),
        );
    }
    let lay = code.layout();
    let mut mismatches = Vec::new();
    let mut sets = 0;
    for t in 1..=3.min(r).min(k.saturating_sub(1)) {
        let failed: Vec<usize> = (0..t).collect();
        for mask in 0..1u32 << t {
            let s: Vec<usize> = (0..t).filter(|&j| mask >> j & 1 == 1).collect();
            let want = r.pow((k - 1 - t) as u32) * (r - 1).pow((t - s.len()) as u32);
            for l in 0..r {
                sets += 1;
                let got = u_set(lay, &failed, &s, l).len();
                if got != want {
                    mismatches.push(format!("t={t} S={s:?} l={l}: {got} != {want}"));
                }
            }
        }
    }
    report.check(
        "zigzag_u_set_sizes",
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("{sets} sets match the closed form")
        } else {
            mismatches.join("; ")
        },
    );
    Ok(())
}

fn default_nkdt(
    p: &CodeParams,
    dflt: (usize, usize, usize, usize),
) -> Result<(usize, usize, usize, usize)> {
    match (p.n, p.k, p.d, p.t) {
        (None, None, None, None) => Ok(dflt),
        (Some(n), Some(k), Some(d), Some(t)) => Ok((n, k, d, t)),
        _ => Err(CliError::Params(
            "give all of --n --k --d --t or none".into(),
        )),
    }
}

fn mbcr_suite(p: &CodeParams, seed: u64, report: &mut Report) -> Result<()> {
    let (n, k, d, t) = default_nkdt(p, (6, 3, 4, 2))?;
    let field = Field::new(
        p.field
            .unwrap_or_else(|| MbcrCode::default_field(n, d, t).spec()),
    );
    report.param(
        "mbcr",
        json!({ "n": n, "k": k, "d": d, "t": t, "field": field.spec().to_string() }),
    );
    let code = MbcrCode::build(n, k, d, t, &field)?;
    for b in 1..=k {
        let rep = code.entropy_accumulation_rank(b)?;
        report.check(
            format!("mbcr_entropy_b{b}"),
            rep.uniform() && rep.min() == rep.expected,
            format!(
                "{} subsets, ranks {}..{}, expected {}",
                rep.ranks.len(),
                rep.min(),
                rep.max(),
                rep.expected
            ),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let file = random_vec(&field, code.file_size(), &mut rng);
    let nodes = code.encode(&file)?;
    let avail: Vec<Option<&[u32]>> = nodes.iter().map(|v| Some(v.as_slice())).collect();
    let (mut cases, mut bad) = (0, Vec::new());
    for failed in k_subsets(n, t) {
        let rest: Vec<usize> = (0..n).filter(|v| !failed.contains(v)).collect();
        for pick in k_subsets(rest.len(), d) {
            let helpers: Vec<usize> = pick.iter().map(|&i| rest[i]).collect();
            cases += 1;
            match code.centralized_repair(&failed, &helpers, &avail) {
                Ok((out, bw))
                    if bw == 2 * d * t && failed.iter().zip(&out).all(|(&v, o)| *o == nodes[v]) => {
                }
                Ok((_, bw)) => bad.push(format!(
                    "{failed:?}<-{helpers:?}: {bw} symbols or wrong output"
                )),
                Err(e) => bad.push(format!("{failed:?}<-{helpers:?}: {e}")),
            }
        }
    }
    report.check(
        "mbcr_repair",
        bad.is_empty(),
        if bad.is_empty() {
            format!("{cases} failure/helper choices, {} symbols each", 2 * d * t)
        } else {
            bad.join("; ")
        },
    );
    let wrong = k_subsets(n, k)
        .into_iter()
        .filter(|s| {
            let picked: Vec<(usize, &[u32])> =
                s.iter().map(|&v| (v, nodes[v].as_slice())).collect();
            code.reconstruct(&picked).ok().as_ref() != Some(&file)
        })
        .count();
    report.check(
        "mbcr_reconstruct",
        wrong == 0,
        format!("{wrong} k-subsets fail to decode"),
    );
    Ok(())
}

fn secret_params(a: &VerifyArgs, kind: SecretKindArg) -> CodeParams {
    let p = &a.params;
    if p.n.is_some() || p.t.is_some() || p.z.is_some() || p.d.is_some() {
        return p.clone();
    }
    match kind {
        SecretKindArg::Mbmr => CodeParams {
            n: Some(4),
            d: Some(2),
            t: Some(1),
            z: Some(1),
            field: Some(p.field.unwrap_or(FieldSpec::prime(5).expect("5 is prime"))),
            ..CodeParams::default()
        },
        SecretKindArg::MsmrZigzag => CodeParams {
            n: Some(6),
            t: Some(2),
            z: Some(1),
            field: p.field,
            ..CodeParams::default()
        },
    }
}

fn subsets_to_scan(
    count: usize,
    size: usize,
    all: bool,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<usize>>, usize) {
    let mut subsets = k_subsets(count, size);
    let total = subsets.len();
    if !all && total > SAMPLE {
        subsets.shuffle(rng);
        subsets.truncate(SAMPLE);
        subsets.sort();
    }
    (subsets, total)
}

fn secret_suite(a: &VerifyArgs, seed: u64, report: &mut Report) -> Result<()> {
    let kind = a.kind.unwrap_or(SecretKindArg::Mbmr);
    let p = secret_params(a, kind);
    let scheme = scheme_from_params(kind, &p, seed)?;
    let field = scheme.field().clone();
    report.param(
        "secret",
        json!({
            "kind": scheme.kind().name(),
            "n": scheme.n(),
            "d": scheme.d(),
            "t": scheme.t(),
            "z": scheme.z(),
            "N": scheme.share_count(),
            "Ms": scheme.secret_size(),
            "field": field.spec().to_string(),
        }),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = scheme.z();
    let (subsets, total) = subsets_to_scan(scheme.share_count(), z, a.all_z_subsets, &mut rng);
    let brute = (field.order() as u128)
        .checked_pow(scheme.randomness_size() as u32)
        .is_some_and(|v| v <= BRUTE_FORCE_BUDGET as u128);
    let mut rows = Vec::new();
    let (mut leaky, mut imperfect) = (0, 0);
    let mut per_secret = 0;
    for s in &subsets {
        let leaked = scheme.leakage(s)?.leaked_symbols;
        leaky += usize::from(leaked != 0);
        let mut row = json!({ "shares": format!("{s:?}"), "leaked_symbols": leaked });
        if brute {
            let bf = scheme.brute_force_secrecy(s, BRUTE_FORCE_BUDGET, &mut rng)?;
            imperfect += usize::from(!bf.perfect);
            per_secret = bf.per_secret;
            row["enumerated_per_secret"] = json!(bf.per_secret);
            row["secrets"] = json!(bf.secrets_tested);
            row["identical"] = json!(bf.perfect);
        }
        rows.push(row);
    }
    report.check(
        "z_secrecy",
        leaky == 0,
        format!(
            "{} of {total} z-subsets scanned, {leaky} leak",
            subsets.len()
        ),
    );
    if brute {
        report.check(
            "brute_force",
            imperfect == 0,
            format!("{per_secret} randomness values per secret, {imperfect} subsets differ"),
        );
    }
    report.detail("leakage", rows);
    let (over, over_total) =
        subsets_to_scan(scheme.share_count(), z + 1, a.all_z_subsets, &mut rng);
    let mut silent = 0;
    for s in &over {
        silent += usize::from(scheme.leakage(s)?.leaked_symbols == 0);
    }
    report.check(
        "z_plus_one_leaks",
        silent == 0,
        format!(
            "{} of {over_total} (z+1)-subsets scanned, {silent} reveal nothing",
            over.len()
        ),
    );

    let secret = random_vec(&field, scheme.secret_size(), &mut rng);
    let shares = scheme.share(&secret, &mut rng)?;
    let first: Vec<(usize, &[u32])> = (0..scheme.d()).map(|s| (s, shares[s].as_slice())).collect();
    let (back, bw) = scheme.reconstruct(&first)?;
    let bound = scheme.bandwidth_bound()?;
    let band = Bandwidth::new(bw as u64, bound, BTreeMap::new());
    report.check(
        "secret_reconstruct",
        back == secret,
        format!("from shares 0..{}", scheme.d() - 1),
    );
    report.check(
        "secret_bandwidth",
        band.exact(),
        format!("downloaded {bw}, bound {bound}"),
    );
    report.bandwidth = Some(band);
    let helpers: Vec<(usize, &[u32])> = (1..scheme.share_count())
        .map(|s| (s, shares[s].as_slice()))
        .collect();
    let helpers = match scheme.kind() {
        SecretKind::Mbmr => helpers[..scheme.d()].to_vec(),
        SecretKind::MsmrZigzag => helpers,
    };
    let repaired = scheme.repair_shares(&[0], &helpers)?;
    report.check(
        "share_repair",
        repaired.0 == vec![shares[0].clone()],
        format!("share 0 rebuilt with {} symbols", repaired.1),
    );
    Ok(())
}

fn rlnc_suite(a: &VerifyArgs, seed: u64, report: &mut Report) -> Result<()> {
    let (n, k, d, t) = default_nkdt(&a.params, (8, 4, 5, 2))?;
    let field = Field::new(a.params.field.unwrap_or(FieldSpec::gf65536()));
    report.param(
        "rlnc",
        json!({ "n": n, "k": k, "d": d, "t": t, "rounds": a.rounds, "field": field.spec().to_string() }),
    );
    let stress = rlnc_stress(n, k, d, t, &field, a.rounds, seed, StressOptions::default())?;
    let expected_ledger = (a.rounds * d * t) as u64;
    report.check(
        "rlnc_data_collection",
        stress.failures.is_empty(),
        format!(
            "{} rank failures over {} checked rounds",
            stress.failures.len(),
            stress.checked_rounds
        ),
    );
    report.check(
        "rlnc_ledger",
        stress.ledger == expected_ledger,
        format!("{} vs {expected_ledger}", stress.ledger),
    );
    report.check(
        "rlnc_bound_ratio",
        stress.bound_ratio_exact == Rational::from_integer(1),
        stress.bound_ratio_exact.to_string(),
    );
    let (_, gamma) = msmr_point(stress.params.file_size as u64, k, d, t)?;
    report.bandwidth = Some(Bandwidth::new(
        stress.ledger,
        gamma * Rational::from_integer(a.rounds as i64),
        BTreeMap::new(),
    ));
    report.detail("stress", &stress);
    Ok(())
}
