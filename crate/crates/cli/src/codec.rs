//! encode / repair / reconstruct for storage codes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use cmr_core::algebra::{Field, FieldSpec, Matrix};
use cmr_core::bounds::{mbcr_operating_params, msmr_point, Rational};
use cmr_core::mbcr::MbcrCode;
use cmr_core::rlnc::rlnc_init;
use cmr_core::zigzag::{
    k_subsets, verify_schedule_counts, verify_solvability, RepairMethod, Solvability, ZigzagCode,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::{CodeKind, CodeParams, EncodeArgs, ReconstructArgs, RepairArgs};
use crate::error::{CliError, Result};
use crate::format::{pack, unpack, write_atomic, Extension, Header, NodeFile, PayloadKind};
use crate::report::{Bandwidth, Report};
use crate::secret_cmd;
use crate::store::{load_dir, rlnc_coefficients, Code, NodeSet};

pub fn need(v: Option<usize>, name: &str) -> Result<usize> {
    v.ok_or_else(|| CliError::Params(format!("--{name} is required")))
}

/// `(r, k)` from `--k` with `--r` or `--n`.
pub fn zigzag_dims(p: &CodeParams) -> Result<(usize, usize)> {
    let k = need(p.k, "k")?;
    let r = match (p.r, p.n) {
        (Some(r), Some(n)) if n != r + k => {
            return Err(CliError::Params(format!(
                "--n {n} disagrees with --k {k} --r {r}"
            )));
        }
        (Some(r), _) => r,
        (None, Some(n)) if n > k => n - k,
        (None, Some(n)) => return Err(CliError::Params(format!("need n > k, got n={n}, k={k}"))),
        (None, None) => return Err(CliError::Params("zigzag needs --r or --n".into())),
    };
    Ok((r, k))
}

fn nkdt(p: &CodeParams) -> Result<(usize, usize, usize, usize)> {
    Ok((
        need(p.n, "n")?,
        need(p.k, "k")?,
        need(p.d, "d")?,
        need(p.t, "t")?,
    ))
}

pub fn write_nodes(dir: &Path, files: &[NodeFile], report: &mut Report) -> Result<()> {
    for f in files {
        let name = f.header.kind.file_name(f.header.node);
        write_atomic(&dir.join(&name), &f.to_bytes()?)?;
        report.files.push(name);
    }
    Ok(())
}

fn header_params(report: &mut Report, h: &Header) {
    report
        .param("code", h.kind.name())
        .param("field", h.field.to_string())
        .param("n", h.n)
        .param("k", h.k)
        .param("alpha", h.symbols)
        .param("original_len", h.original_len);
    if h.kind != PayloadKind::Zigzag {
        report.param("d", h.d).param("t", h.t);
    }
}

pub fn encode(a: &EncodeArgs) -> Result<Report> {
    let seed = a.output.seed.unwrap_or(0);
    let data = fs::read(&a.input).map_err(|e| CliError::io(&a.input, e))?;
    let p = &a.params;
    let (kind, spec, n, k, d, t) = match a.code {
        CodeKind::Zigzag => {
            let (r, k) = zigzag_dims(p)?;
            (
                PayloadKind::Zigzag,
                p.field.unwrap_or(FieldSpec::gf256()),
                r + k,
                k,
                0,
                0,
            )
        }
        CodeKind::Mbcr => {
            let (n, k, d, t) = nkdt(p)?;
            let spec = p
                .field
                .unwrap_or_else(|| MbcrCode::default_field(n, d, t).spec());
            (PayloadKind::Mbcr, spec, n, k, d, t)
        }
        CodeKind::Rlnc => {
            let (n, k, d, t) = nkdt(p)?;
            (
                PayloadKind::Rlnc,
                p.field.unwrap_or(FieldSpec::gf65536()),
                n,
                k,
                d,
                t,
            )
        }
    };
    let field = Field::new(spec);
    let mut header = Header {
        kind,
        field: spec,
        n,
        k,
        d,
        t,
        node: 0,
        seed,
        original_len: data.len() as u64,
        symbols: 0,
        ext: Extension::None,
    };
    let (code, payloads, coeffs): (Code, Vec<Vec<u32>>, Vec<Extension>) = match kind {
        PayloadKind::Zigzag => {
            let code = ZigzagCode::build(n - k, k, &field, seed)?;
            let sym = pack(&data, spec, k * code.alpha())?;
            let nodes = code.encode(&sym)?;
            (Code::Zigzag(code), nodes, vec![Extension::None; n])
        }
        PayloadKind::Mbcr => {
            let code = MbcrCode::build(n, k, d, t, &field)?;
            let sym = pack(&data, spec, code.file_size())?;
            let nodes = code.encode(&sym)?;
            (Code::Mbcr(code), nodes, vec![Extension::None; n])
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let state = rlnc_init(n, k, d, t, &field, &mut rng)?;
            let sym = pack(&data, spec, state.file_size())?;
            let nodes = (0..n).map(|i| state.node(i).mul_vec(&sym)).collect();
            let ext = (0..n)
                .map(|i| Extension::Coefficients(state.node(i).data().to_vec()))
                .collect();
            (
                Code::Rlnc {
                    field: field.clone(),
                    k,
                    alpha: state.alpha(),
                },
                nodes,
                ext,
            )
        }
    };
    header.symbols = code.alpha();
    let files: Vec<NodeFile> = payloads
        .into_iter()
        .zip(coeffs)
        .enumerate()
        .map(|(node, (payload, ext))| NodeFile {
            header: Header {
                node,
                ext,
                ..header.clone()
            },
            payload,
        })
        .collect();
    let mut report = Report::new("encode", seed);
    header_params(&mut report, &header);
    report.param("M", code.file_size());
    let tail: Vec<&NodeFile> = files[n - k..].iter().collect();
    let back = unpack(&code.decode(&tail)?, spec, data.len())?;
    report.check(
        "decode_last_k",
        back == data,
        format!("nodes {}..{} reproduce the input", n - k, n - 1),
    );
    write_nodes(&a.out, &files, &mut report)?;
    Ok(report)
}

fn normalize(list: &[usize], limit: usize, what: &str) -> Result<Vec<usize>> {
    let mut v = list.to_vec();
    v.sort_unstable();
    let before = v.len();
    v.dedup();
    if v.len() != before {
        return Err(CliError::Params(format!("repeated {what} index")));
    }
    if let Some(&bad) = v.iter().find(|&&x| x >= limit) {
        return Err(CliError::Params(format!(
            "{what} index {bad} out of range (limit {limit})"
        )));
    }
    Ok(v)
}

fn pick_helpers(
    set: &NodeSet,
    n: usize,
    failed: &[usize],
    wanted: Option<&[usize]>,
    d: usize,
) -> Result<Vec<usize>> {
    let helpers = match wanted {
        Some(h) => normalize(h, n, "helper")?,
        None => (0..n)
            .filter(|v| !failed.contains(v) && set.files.contains_key(v))
            .take(d)
            .collect(),
    };
    if let Some(v) = helpers.iter().find(|v| failed.contains(v)) {
        return Err(CliError::Params(format!(
            "node {v} is both failed and helper"
        )));
    }
    if let Some(v) = helpers.iter().find(|v| !set.files.contains_key(v)) {
        return Err(CliError::Missing(format!("helper {v} has no file")));
    }
    if helpers.len() != d {
        let err = format!("repair needs d = {d} helpers, {} available", helpers.len());
        return Err(if wanted.is_some() {
            CliError::Params(err)
        } else {
            CliError::Missing(err)
        });
    }
    Ok(helpers)
}

pub fn repair(a: &RepairArgs) -> Result<Report> {
    let set = load_dir(&a.dir)?;
    if set.header.kind.is_share() {
        return secret_cmd::repair_shares(a, &set);
    }
    let h = set.header.clone();
    let seed = a.output.seed.unwrap_or(h.seed);
    let failed = normalize(&a.failed, h.n, "failed")?;
    if failed.is_empty() {
        return Err(CliError::Params("nothing to repair".into()));
    }
    let t = failed.len();
    let mut report = Report::new("repair", seed);
    header_params(&mut report, &h);
    report.param("failed", failed.clone());
    let code = Code::from_header(&h)?;
    let m = code.file_size();
    let template = |node: usize, payload: Vec<u32>, ext: Extension| NodeFile {
        header: Header {
            node,
            ext,
            ..h.clone()
        },
        payload,
    };
    let mut rebuilt = Vec::new();
    let (downloaded, per_helper, bound) = match &code {
        Code::Zigzag(zz) => {
            let d = h.n - t;
            if a.d.is_some_and(|x| x != d) {
                return Err(CliError::Params(format!(
                    "zigzag repair of {t} nodes uses d = n - t = {d}"
                )));
            }
            let schedule = zz.repair_schedule(&failed)?;
            let used = schedule.helpers();
            if let Some(w) = &a.helpers {
                let w = normalize(w, h.n, "helper")?;
                if let Some(v) = used.iter().find(|v| !w.contains(v)) {
                    return Err(CliError::Params(format!(
                        "the schedule for {failed:?} needs helper {v}"
                    )));
                }
            }
            let avail: Vec<Option<&[u32]>> = (0..h.n)
                .map(|v| {
                    if failed.contains(&v) {
                        None
                    } else {
                        set.payload(v)
                    }
                })
                .collect();
            if let Some(v) = used.iter().find(|&&v| avail[v].is_none()) {
                return Err(CliError::Missing(format!("helper {v} has no file")));
            }
            let got = schedule.gather(&avail)?;
            let out = zz.execute_repair(&schedule, &got)?;
            for (&v, payload) in schedule.failed().iter().zip(out) {
                rebuilt.push(template(v, payload, Extension::None));
            }
            if schedule.method() == RepairMethod::Schedule {
                let counts = verify_schedule_counts(&schedule, zz);
                report.check(
                    "helper_counts",
                    counts.pass,
                    format!(
                        "{} per helper expected, total {}",
                        counts.expected_per_helper, counts.total
                    ),
                );
                let solv = verify_solvability(zz, &schedule);
                report.check(
                    "solvable",
                    solv == Solvability::Solvable,
                    format!("{solv:?}"),
                );
            } else {
                report.check(
                    "schedule",
                    true,
                    format!("decode from {} nodes and re-encode", used.len()),
                );
            }
            let (_, gamma) = msmr_point(m as u64, h.k, d, t)?;
            let per: BTreeMap<usize, u64> = schedule
                .per_helper()
                .into_iter()
                .map(|(k, v)| (k, v as u64))
                .collect();
            (schedule.total_download() as u64, per, gamma)
        }
        Code::Mbcr(mc) => {
            if t != h.t {
                return Err(CliError::Params(format!(
                    "this code repairs exactly t = {} nodes at once",
                    h.t
                )));
            }
            let d = a.d.unwrap_or(h.d);
            if d != h.d {
                return Err(CliError::Params(format!(
                    "this code was built for d = {}",
                    h.d
                )));
            }
            let helpers = pick_helpers(&set, h.n, &failed, a.helpers.as_deref(), d)?;
            let avail: Vec<Option<&[u32]>> = (0..h.n).map(|v| set.payload(v)).collect();
            let (out, bw) = mc.centralized_repair(&failed, &helpers, &avail)?;
            for (&v, payload) in failed.iter().zip(out) {
                rebuilt.push(template(v, payload, Extension::None));
            }
            let per = helpers.iter().map(|&v| (v, 2 * t as u64)).collect();
            let bound = mbcr_operating_params(m as u64, h.k, d, t)?.h(t);
            (bw as u64, per, bound)
        }
        Code::Rlnc { field, alpha, .. } => {
            if t != h.t {
                return Err(CliError::Params(format!(
                    "this code repairs exactly t = {} nodes at once",
                    h.t
                )));
            }
            let d = a.d.unwrap_or(h.d);
            if d != h.d {
                return Err(CliError::Params(format!(
                    "this code was built for d = {}",
                    h.d
                )));
            }
            let helpers = pick_helpers(&set, h.n, &failed, a.helpers.as_deref(), d)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2);
            let mut pool = Matrix::zeros(field, 0, m + 1);
            for &v in &helpers {
                let f = &set.files[&v];
                let aug = augmented(field, &rlnc_coefficients(f, *alpha, m)?, &f.payload);
                let mix = random_matrix(field, t, *alpha, &mut rng);
                pool = pool.vstack(&mix.mul(&aug)?)?;
            }
            for &v in &failed {
                let mix = random_matrix(field, *alpha, d * t, &mut rng);
                let node = mix.mul(&pool)?;
                let coeffs = node.select_cols(&(0..m).collect::<Vec<_>>());
                let payload = node.col_values(m);
                rebuilt.push(template(
                    v,
                    payload,
                    Extension::Coefficients(coeffs.data().to_vec()),
                ));
            }
            let mut nodes: BTreeMap<usize, &NodeFile> =
                set.files.iter().map(|(&v, f)| (v, f)).collect();
            for f in &rebuilt {
                nodes.insert(f.header.node, f);
            }
            let ids: Vec<usize> = nodes.keys().copied().collect();
            let mut bad = Vec::new();
            let subsets = k_subsets(ids.len(), h.k);
            for s in &subsets {
                let mut g = Matrix::zeros(field, 0, m);
                for &i in s {
                    g = g.vstack(&rlnc_coefficients(nodes[&ids[i]], *alpha, m)?)?;
                }
                if g.rank() < m {
                    bad.push(s.iter().map(|&i| ids[i]).collect::<Vec<_>>());
                }
            }
            report.check(
                "data_collection",
                bad.is_empty(),
                format!(
                    "{} of {} k-subsets of present nodes rank-deficient",
                    bad.len(),
                    subsets.len()
                ),
            );
            let per = helpers.iter().map(|&v| (v, t as u64)).collect();
            let (_, gamma) = msmr_point(m as u64, h.k, d, t)?;
            ((d * t) as u64, per, gamma)
        }
    };
    let bw = Bandwidth::new(downloaded, bound, per_helper);
    report.check(
        "bound_ratio",
        bw.exact(),
        format!("downloaded {downloaded}, bound {bound}, ratio {}", bw.ratio),
    );
    report.bandwidth = Some(bw);
    let out = a.out.as_deref().unwrap_or(&a.dir);
    write_nodes(out, &rebuilt, &mut report)?;
    Ok(report)
}

fn augmented(field: &Field, coeffs: &Matrix, payload: &[u32]) -> Matrix {
    let mut m = Matrix::zeros(field, 0, coeffs.cols() + 1);
    for (r, &y) in payload.iter().enumerate() {
        let mut row = coeffs.row(r).to_vec();
        row.push(y);
        m.push_row(&row);
    }
    m
}

fn random_matrix(field: &Field, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| field.random(rng)).collect();
    Matrix::from_vec(field, rows, cols, data)
}

pub fn reconstruct(a: &ReconstructArgs) -> Result<Report> {
    let set = load_dir(&a.dir)?;
    if set.header.kind.is_share() {
        return secret_cmd::reconstruct_secret(a, &set);
    }
    let h = set.header.clone();
    if a.d.is_some() {
        return Err(CliError::Params("--d applies to share files only".into()));
    }
    let code = Code::from_header(&h)?;
    let nodes = match &a.nodes {
        Some(v) => normalize(v, h.n, "node")?,
        None => set.files.keys().copied().take(code.k()).collect(),
    };
    if let Some(v) = nodes.iter().find(|v| !set.files.contains_key(v)) {
        return Err(CliError::Missing(format!("node {v} has no file")));
    }
    if nodes.len() < code.k() {
        return Err(CliError::Missing(format!(
            "need k = {} nodes, found {}",
            code.k(),
            nodes.len()
        )));
    }
    let files: Vec<&NodeFile> = nodes.iter().map(|v| &set.files[v]).collect();
    let symbols = code.decode(&files)?;
    let data = unpack(&symbols, h.field, h.original_len as usize)?;
    write_atomic(&a.out, &data)?;
    let mut report = Report::new("reconstruct", a.output.seed.unwrap_or(h.seed));
    header_params(&mut report, &h);
    report.param("nodes", nodes.clone());
    let downloaded = (nodes.len() * code.alpha()) as u64;
    let bw = Bandwidth::new(
        downloaded,
        Rational::from_integer(code.file_size() as i64),
        BTreeMap::new(),
    );
    report.check(
        "bound_ratio",
        bw.exact(),
        format!("{downloaded} symbols for a file of {}", code.file_size()),
    );
    report.bandwidth = Some(bw);
    report.files.push(
        a.out
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    );
    Ok(report)
}
