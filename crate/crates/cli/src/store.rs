//! Loading node directories and rebuilding codes from file headers.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use cmr_core::algebra::{Field, Matrix};
use cmr_core::mbcr::MbcrCode;
use cmr_core::zigzag::ZigzagCode;

use crate::error::{CliError, Result};
use crate::format::{Extension, Header, NodeFile, PayloadKind};

#[derive(Debug)]
pub struct NodeSet {
    pub header: Header,
    pub files: BTreeMap<usize, NodeFile>,
}

impl NodeSet {
    pub fn payload(&self, node: usize) -> Option<&[u32]> {
        self.files.get(&node).map(|f| f.payload.as_slice())
    }
}

/// Reads every `.cmr` file in `dir`; all must come from one encoding.
pub fn load_dir(dir: &Path) -> Result<NodeSet> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "cmr") && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    let mut files = BTreeMap::new();
    let mut header: Option<Header> = None;
    for path in paths {
        let f = NodeFile::read(&path)?;
        match &header {
            None => header = Some(f.header.clone()),
            Some(h) if !h.same_family(&f.header) => {
                return Err(CliError::Format(format!(
                    "{} belongs to a different encoding",
                    path.display()
                )));
            }
            _ => {}
        }
        let node = f.header.node;
        if files.insert(node, f).is_some() {
            return Err(CliError::Format(format!(
                "index {node} appears twice in {}",
                dir.display()
            )));
        }
    }
    let header =
        header.ok_or_else(|| CliError::Missing(format!("no .cmr files in {}", dir.display())))?;
    Ok(NodeSet { header, files })
}

/// A storage code rebuilt from header parameters.
pub enum Code {
    Zigzag(ZigzagCode),
    Mbcr(MbcrCode),
    Rlnc {
        field: Field,
        k: usize,
        alpha: usize,
    },
}

impl Code {
    pub fn from_header(h: &Header) -> Result<Self> {
        let field = Field::new(h.field);
        let code = match h.kind {
            PayloadKind::Zigzag => Code::Zigzag(ZigzagCode::build(h.n - h.k, h.k, &field, h.seed)?),
            PayloadKind::Mbcr => Code::Mbcr(MbcrCode::build(h.n, h.k, h.d, h.t, &field)?),
            PayloadKind::Rlnc => {
                if h.k > h.d || h.t == 0 || h.d + h.t > h.n {
                    return Err(CliError::Format(format!(
                        "bad RLNC parameters in header: {h:?}"
                    )));
                }
                Code::Rlnc {
                    field,
                    k: h.k,
                    alpha: h.d - h.k + h.t,
                }
            }
            PayloadKind::ShareZigzag | PayloadKind::ShareMbmr => {
                return Err(CliError::Params(
                    "share files hold a secret, not a storage code".into(),
                ))
            }
        };
        if h.symbols != code.alpha() {
            return Err(CliError::Format(format!(
                "header says {} symbols per node, code has {}",
                h.symbols,
                code.alpha()
            )));
        }
        Ok(code)
    }

    pub fn alpha(&self) -> usize {
        match self {
            Code::Zigzag(c) => c.alpha(),
            Code::Mbcr(c) => c.alpha(),
            Code::Rlnc { alpha, .. } => *alpha,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Code::Zigzag(c) => c.k(),
            Code::Mbcr(c) => c.k(),
            Code::Rlnc { k, .. } => *k,
        }
    }

    pub fn file_size(&self) -> usize {
        match self {
            Code::Zigzag(c) => c.k() * c.alpha(),
            Code::Mbcr(c) => c.file_size(),
            Code::Rlnc { k, alpha, .. } => k * alpha,
        }
    }

    pub fn decode(&self, nodes: &[&NodeFile]) -> Result<Vec<u32>> {
        let pairs: Vec<(usize, &[u32])> = nodes
            .iter()
            .map(|f| (f.header.node, f.payload.as_slice()))
            .collect();
        match self {
            Code::Zigzag(c) => Ok(c.decode_any_k(&pairs)?),
            Code::Mbcr(c) => Ok(c.reconstruct(&pairs)?),
            Code::Rlnc { field, .. } => {
                let m = self.file_size();
                let mut g = Matrix::zeros(field, 0, m);
                let mut rhs = Vec::new();
                for f in nodes {
                    let coeffs = rlnc_coefficients(f, self.alpha(), m)?;
                    g = g.vstack(&coeffs)?;
                    rhs.extend_from_slice(&f.payload);
                }
                let x = g.solve(&Matrix::column(field, &rhs))?;
                Ok(x.col_values(0))
            }
        }
    }
}

pub fn rlnc_coefficients(f: &NodeFile, alpha: usize, m: usize) -> Result<Matrix> {
    match &f.header.ext {
        Extension::Coefficients(c) if c.len() == alpha * m => Ok(Matrix::from_vec(
            &Field::new(f.header.field),
            alpha,
            m,
            c.clone(),
        )),
        _ => Err(CliError::Format(format!(
            "node {} lacks an {alpha}x{m} coefficient block",
            f.header.node
        ))),
    }
}
