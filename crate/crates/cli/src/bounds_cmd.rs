use cmr_core::bounds::{
    file_size_bound, mbcr_operating_params, mbmr_hb_condition, mbmr_point, min_file_size_bound,
    msmr_point, secret_bw_bound, BoundsError, CmrParams, PartitionSpec, Rational, SecretParams,
};
use serde_json::json;

use crate::args::BoundsArgs;
use crate::codec::need;
use crate::error::{CliError, Result};
use crate::report::Report;

fn int(v: u64) -> Rational {
    Rational::from_integer(v as i64)
}

pub fn bounds(a: &BoundsArgs) -> Result<Report> {
    let p = &a.params;
    let k = need(p.k, "k")?;
    let d = need(p.d, "d")?;
    let t = p.t.unwrap_or(1);
    let n = p.n.unwrap_or(d + t);
    CmrParams::new(n, k, d, t, int(0), int(0))?;
    let m =
        a.m.ok_or_else(|| CliError::Params("--M is required".into()))?;
    if m == 0 || m > i64::MAX as u64 / 1024 {
        return Err(CliError::Params(format!("M = {m} is out of range")));
    }
    let mut report = Report::new("bounds", a.output.seed.unwrap_or(0));
    report
        .param("n", n)
        .param("k", k)
        .param("d", d)
        .param("t", t)
        .param("M", m);

    match msmr_point(m, k, d, t) {
        Ok((alpha, gamma)) => {
            let cp = CmrParams::new(n, k, d, t, alpha, gamma / int(d as u64))?;
            let (v, part) = min_file_size_bound(&cp);
            report.detail(
                "msmr",
                json!({
                    "alpha": alpha.to_string(),
                    "beta": cp.beta.to_string(),
                    "gamma": gamma.to_string(),
                    "min_file_size_bound": v.to_string(),
                    "argmin_partition": format!("{:?}", part.sizes()),
                }),
            );
            report.check(
                "msmr_tight",
                v == int(m),
                format!("min over partitions {v} vs M = {m}"),
            );
        }
        Err(BoundsError::NotDivisible { .. }) => {
            report.detail(
                "msmr",
                json!({ "note": format!("k = {k} does not divide M = {m}") }),
            );
        }
        Err(e) => return Err(e.into()),
    }

    if k % t == 0 {
        let gamma = mbmr_point(m, k, d, t)?;
        let cp = CmrParams::new(n, k, d, t, gamma, gamma / int(d as u64))?;
        let part = PartitionSpec::new(vec![t; k / t], k, t)?;
        let v = file_size_bound(&cp, &part)?;
        report.detail(
            "mbmr",
            json!({
                "alpha": gamma.to_string(),
                "beta": cp.beta.to_string(),
                "gamma": gamma.to_string(),
                "all_t_partition_bound": v.to_string(),
            }),
        );
        report.check(
            "mbmr_all_t_partition",
            v == int(m),
            format!("{v} vs M = {m}"),
        );
    } else {
        // Flagged: the operating point needs an entropy condition on the code.
        let op = mbcr_operating_params(m, k, d, t)?;
        let rows: Vec<_> = (1..=k)
            .map(|b| {
                json!({
                    "b": b,
                    "threshold": mbmr_hb_condition(b, d, t, op.beta).to_string(),
                    "h_b": op.h(b).to_string(),
                })
            })
            .collect();
        report.detail(
            "mbmr",
            json!({
                "t_divides_k": false,
                "note": format!("t = {t} does not divide k = {k}; H_b must meet the threshold below"),
                "beta": op.beta.to_string(),
            }),
        );
        report.detail("hb_threshold", rows);
    }

    if let Ok(op) = mbcr_operating_params(m, k, d, t) {
        report.detail(
            "mbcr",
            json!({
                "alpha": op.alpha.to_string(),
                "beta": op.beta.to_string(),
                "beta_prime": op.beta_prime.to_string(),
                "h_t": op.h(t).to_string(),
            }),
        );
    }

    if let Some(z) = p.z {
        let alpha = int(m) / Rational::from_integer(k as i64);
        let ms = match a.ms {
            Some(ms) => int(ms),
            None => int(m) - alpha * Rational::from_integer(z as i64),
        };
        if !ms.is_integer() || ms <= int(0) {
            return Err(CliError::Params(format!(
                "secret size {ms} is not a positive integer; pass --Ms"
            )));
        }
        let share = if alpha.is_integer() {
            *alpha.numer() as u64
        } else {
            0
        };
        let sp = SecretParams::new(n, z, n - d, *ms.numer() as u64, share)?;
        let bw = secret_bw_bound(&sp, d)?;
        report.detail(
            "secret",
            json!({ "N": n, "z": z, "Ms": ms.to_string(), "bw_bound": bw.to_string() }),
        );
    }
    Ok(report)
}
