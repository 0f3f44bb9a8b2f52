//! share / repair / reconstruct for secret-sharing schemes.

use std::collections::BTreeMap;
use std::fs;

use cmr_core::algebra::{Field, FieldSpec};
use cmr_core::bounds::{mbcr_operating_params, msmr_point};
use cmr_core::secret::{SecretKind, SecretScheme};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::{CodeParams, ReconstructArgs, RepairArgs, SecretKindArg, ShareArgs};
use crate::codec::{need, write_nodes};
use crate::error::{CliError, Result};
use crate::format::{
    pack, unpack, write_atomic, Extension, Header, NodeFile, PayloadKind, ShareExt,
};
use crate::report::{Bandwidth, Report};
use crate::store::NodeSet;

/// Builds a scheme from `--n --t --z` (and `--d` for mbmr).
pub fn scheme_from_params(kind: SecretKindArg, p: &CodeParams, seed: u64) -> Result<SecretScheme> {
    let (n, t, z) = (need(p.n, "n")?, need(p.t, "t")?, need(p.z, "z")?);
    match kind {
        SecretKindArg::MsmrZigzag => {
            if let Some(d) = p.d {
                if d <= z {
                    return Err(CliError::Params(format!("need d > z, got d={d}, z={z}")));
                }
                if d != n - t.min(n) {
                    return Err(CliError::Params(format!(
                        "msmr-zigzag contacts d = n - t = {} shares",
                        n - t.min(n)
                    )));
                }
            }
            let spec = p.field.unwrap_or(FieldSpec::gf256());
            Ok(SecretScheme::msmr_zigzag(n, t, z, &Field::new(spec), seed)?)
        }
        SecretKindArg::Mbmr => {
            let d = need(p.d, "d")?;
            if d <= z {
                return Err(CliError::Params(format!("need d > z, got d={d}, z={z}")));
            }
            let spec = p
                .field
                .unwrap_or_else(|| FieldSpec::smallest_prime_at_least((n + d - z) as u32));
            Ok(SecretScheme::mbmr(n, d, t, z, &Field::new(spec))?)
        }
    }
}

fn scheme_from_header(h: &Header) -> Result<SecretScheme> {
    let ext = h.share_ext()?;
    let field = Field::new(h.field);
    let s = match h.kind {
        PayloadKind::ShareZigzag => SecretScheme::msmr_zigzag(h.n, h.t, ext.z, &field, h.seed)?,
        PayloadKind::ShareMbmr => SecretScheme::mbmr(h.n, h.d, h.t, ext.z, &field)?,
        _ => return Err(CliError::Format("not a share file".into())),
    };
    if s.share_count() != ext.shares
        || s.secret_size() != ext.secret_size
        || s.share_size() != h.symbols
    {
        return Err(CliError::Format(
            "share header disagrees with the scheme it names".into(),
        ));
    }
    Ok(s)
}

fn scheme_params(report: &mut Report, s: &SecretScheme) {
    report
        .param("kind", s.kind().name())
        .param("field", s.field().spec().to_string())
        .param("n", s.n())
        .param("k", s.k())
        .param("d", s.d())
        .param("t", s.t())
        .param("z", s.z())
        .param("N", s.share_count())
        .param("Ms", s.secret_size())
        .param("alpha", s.share_size());
}

fn share_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

pub fn share(a: &ShareArgs) -> Result<Report> {
    let seed = a.output.seed.unwrap_or(0);
    let scheme = scheme_from_params(a.kind, &a.params, seed)?;
    let data = fs::read(&a.input).map_err(|e| CliError::io(&a.input, e))?;
    let spec = scheme.field().spec();
    let secret = pack(&data, spec, scheme.secret_size())?;
    let shares = scheme.share(&secret, &mut share_rng(seed))?;
    let kind = match scheme.kind() {
        SecretKind::MsmrZigzag => PayloadKind::ShareZigzag,
        SecretKind::Mbmr => PayloadKind::ShareMbmr,
    };
    let ext = ShareExt {
        shares: scheme.share_count(),
        z: scheme.z(),
        secret_size: scheme.secret_size(),
        punctured: scheme.punctured().to_vec(),
    };
    let files: Vec<NodeFile> = shares
        .into_iter()
        .enumerate()
        .map(|(s, payload)| NodeFile {
            header: Header {
                kind,
                field: spec,
                n: scheme.n(),
                k: scheme.k(),
                d: scheme.d(),
                t: scheme.t(),
                node: s,
                seed,
                original_len: data.len() as u64,
                symbols: scheme.share_size(),
                ext: Extension::Share(ext.clone()),
            },
            payload,
        })
        .collect();
    let mut report = Report::new("share", seed);
    scheme_params(&mut report, &scheme);
    report.param("original_len", data.len());
    let first: Vec<(usize, &[u32])> = files[..scheme.d()]
        .iter()
        .map(|f| (f.header.node, f.payload.as_slice()))
        .collect();
    let (back, bw) = scheme.reconstruct(&first)?;
    report.check(
        "reconstruct_first_d",
        back == secret,
        format!("shares 0..{} recover the secret", scheme.d() - 1),
    );
    let bound = scheme.bandwidth_bound()?;
    let band = Bandwidth::new(bw as u64, bound, BTreeMap::new());
    report.check(
        "bound_ratio",
        band.exact(),
        format!("reconstruction downloads {bw}, bound {bound}"),
    );
    write_nodes(&a.out, &files, &mut report)?;
    Ok(report)
}

pub fn repair_shares(a: &RepairArgs, set: &NodeSet) -> Result<Report> {
    let h = &set.header;
    let scheme = scheme_from_header(h)?;
    let seed = a.output.seed.unwrap_or(h.seed);
    let mut failed = a.failed.clone();
    failed.sort_unstable();
    failed.dedup();
    let helpers: Vec<usize> = match &a.helpers {
        Some(v) => v.clone(),
        None => {
            let avail = set.files.keys().copied().filter(|v| !failed.contains(v));
            match scheme.kind() {
                SecretKind::Mbmr => avail.take(scheme.d()).collect(),
                SecretKind::MsmrZigzag => avail.collect(),
            }
        }
    };
    if let Some(v) = helpers.iter().find(|v| !set.files.contains_key(v)) {
        return Err(CliError::Missing(format!("share {v} has no file")));
    }
    let given: Vec<(usize, &[u32])> = helpers
        .iter()
        .map(|&v| (v, set.files[&v].payload.as_slice()))
        .collect();
    let (rebuilt, bw) = scheme.repair_shares(&failed, &given)?;
    let mut report = Report::new("repair", seed);
    scheme_params(&mut report, &scheme);
    report.param("failed", failed.clone());
    let bound = match scheme.kind() {
        SecretKind::MsmrZigzag => {
            // Failed shares and punctured nodes are rebuilt as one group.
            let g = failed.len() + scheme.t();
            let m = scheme.k() * scheme.share_size();
            msmr_point(m as u64, scheme.k(), scheme.n() - g, g)?.1
        }
        SecretKind::Mbmr => {
            let m = scheme.k() * (2 * scheme.d() + scheme.t() - scheme.k());
            mbcr_operating_params(m as u64, scheme.k(), scheme.d(), scheme.t())?.h(scheme.t())
        }
    };
    let band = Bandwidth::new(bw as u64, bound, BTreeMap::new());
    report.check(
        "bound_ratio",
        band.exact(),
        format!("downloaded {bw}, bound {bound}, ratio {}", band.ratio),
    );
    report.bandwidth = Some(band);
    let files: Vec<NodeFile> = failed
        .iter()
        .zip(rebuilt)
        .map(|(&s, payload)| NodeFile {
            header: Header {
                node: s,
                ..h.clone()
            },
            payload,
        })
        .collect();
    let out = a.out.as_deref().unwrap_or(&a.dir);
    write_nodes(out, &files, &mut report)?;
    Ok(report)
}

pub fn reconstruct_secret(a: &ReconstructArgs, set: &NodeSet) -> Result<Report> {
    let h = &set.header;
    let scheme = scheme_from_header(h)?;
    let d = a.d.unwrap_or(scheme.d());
    if d <= scheme.z() {
        return Err(CliError::Params(format!(
            "need d > z, got d={d}, z={}",
            scheme.z()
        )));
    }
    if d != scheme.d() {
        return Err(CliError::Params(format!(
            "this scheme reconstructs from d = {} shares",
            scheme.d()
        )));
    }
    let shares: Vec<usize> = match &a.nodes {
        Some(v) => v.clone(),
        None => set.files.keys().copied().take(d).collect(),
    };
    if let Some(v) = shares.iter().find(|v| !set.files.contains_key(v)) {
        return Err(CliError::Missing(format!("share {v} has no file")));
    }
    let given: Vec<(usize, &[u32])> = shares
        .iter()
        .map(|&v| (v, set.files[&v].payload.as_slice()))
        .collect();
    let (secret, bw) = scheme.reconstruct(&given)?;
    let data = unpack(&secret, h.field, h.original_len as usize)?;
    write_atomic(&a.out, &data)?;
    let mut report = Report::new("reconstruct", a.output.seed.unwrap_or(h.seed));
    scheme_params(&mut report, &scheme);
    report.param("shares", shares);
    let bound = scheme.bandwidth_bound()?;
    let band = Bandwidth::new(bw as u64, bound, BTreeMap::new());
    report.check(
        "bound_ratio",
        band.exact(),
        format!("downloaded {bw}, bound {bound}"),
    );
    report.bandwidth = Some(band);
    report.files.push(
        a.out
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    );
    Ok(report)
}
