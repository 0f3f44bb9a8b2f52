//! On-disk node and share files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CMR1" | kind u8 | field kind u8 | modulus u32
//! n u16 | k u16 | d u16 | t u16 | node u16
//! seed u64 | original length u64 | symbol count u32
//! extension length u32 | extension bytes
//! payload symbols (fixed width per field)
//! first 8 bytes of SHA-256 over everything above
//! ```
//!
//! Share files carry `{N u16, z u16, M_s u32, count u16, punctured u16...}`
//! as extension; RLNC node files carry their `alpha x M` coefficient matrix.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cmr_core::algebra::{FieldKind, FieldSpec};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"CMR1";
const DIGEST_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    Zigzag = 1,
    Mbcr = 2,
    Rlnc = 3,
    ShareZigzag = 4,
    ShareMbmr = 5,
}

impl PayloadKind {
    fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            1 => PayloadKind::Zigzag,
            2 => PayloadKind::Mbcr,
            3 => PayloadKind::Rlnc,
            4 => PayloadKind::ShareZigzag,
            5 => PayloadKind::ShareMbmr,
            other => return Err(CliError::Format(format!("unknown payload kind {other}"))),
        })
    }

    pub fn is_share(self) -> bool {
        matches!(self, PayloadKind::ShareZigzag | PayloadKind::ShareMbmr)
    }

    pub fn name(self) -> &'static str {
        match self {
            PayloadKind::Zigzag => "zigzag",
            PayloadKind::Mbcr => "mbcr",
            PayloadKind::Rlnc => "rlnc",
            PayloadKind::ShareZigzag => "msmr-zigzag",
            PayloadKind::ShareMbmr => "mbmr",
        }
    }

    pub fn file_name(self, index: usize) -> String {
        if self.is_share() {
            format!("share_{index}.cmr")
        } else {
            format!("node_{index}.cmr")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareExt {
    pub shares: usize,
    pub z: usize,
    pub secret_size: usize,
    pub punctured: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extension {
    None,
    Share(ShareExt),
    Coefficients(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub kind: PayloadKind,
    pub field: FieldSpec,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub t: usize,
    /// Base node index, or share index for share files.
    pub node: usize,
    pub seed: u64,
    pub original_len: u64,
    pub symbols: usize,
    pub ext: Extension,
}

impl Header {
    /// True when two files belong to the same encoding.
    pub fn same_family(&self, other: &Header) -> bool {
        let share = |h: &Header| match &h.ext {
            Extension::Share(s) => Some(s.clone()),
            _ => None,
        };
        (
            self.kind,
            self.field,
            self.n,
            self.k,
            self.d,
            self.t,
            self.seed,
            self.original_len,
            self.symbols,
        ) == (
            other.kind,
            other.field,
            other.n,
            other.k,
            other.d,
            other.t,
            other.seed,
            other.original_len,
            other.symbols,
        ) && share(self) == share(other)
    }

    pub fn share_ext(&self) -> Result<&ShareExt> {
        match &self.ext {
            Extension::Share(s) => Ok(s),
            _ => Err(CliError::Format(
                "share file without share extension".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeFile {
    pub header: Header,
    pub payload: Vec<u32>,
}

fn put_u16(out: &mut Vec<u8>, v: usize, what: &str) -> Result<()> {
    let v = u16::try_from(v)
        .map_err(|_| CliError::Params(format!("{what} = {v} does not fit the file format")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_u32(out: &mut Vec<u8>, v: usize, what: &str) -> Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| CliError::Params(format!("{what} = {v} does not fit the file format")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_symbols(out: &mut Vec<u8>, symbols: &[u32], width: usize) {
    for &s in symbols {
        out.extend_from_slice(&s.to_le_bytes()[..width]);
    }
}

impl NodeFile {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let h = &self.header;
        if self.payload.len() != h.symbols {
            return Err(CliError::Format(format!(
                "payload has {} symbols, header says {}",
                self.payload.len(),
                h.symbols
            )));
        }
        let width = h.field.symbol_bytes();
        let mut out = Vec::with_capacity(64 + width * h.symbols);
        out.extend_from_slice(MAGIC);
        out.push(h.kind as u8);
        out.push(match h.field.kind() {
            FieldKind::Prime => 0,
            FieldKind::BinaryExtension => 1,
        });
        out.extend_from_slice(&h.field.modulus().to_le_bytes());
        for (v, what) in [
            (h.n, "n"),
            (h.k, "k"),
            (h.d, "d"),
            (h.t, "t"),
            (h.node, "node"),
        ] {
            put_u16(&mut out, v, what)?;
        }
        out.extend_from_slice(&h.seed.to_le_bytes());
        out.extend_from_slice(&h.original_len.to_le_bytes());
        put_u32(&mut out, h.symbols, "symbol count")?;
        let mut ext = Vec::new();
        match &h.ext {
            Extension::None => {}
            Extension::Share(s) => {
                put_u16(&mut ext, s.shares, "N")?;
                put_u16(&mut ext, s.z, "z")?;
                put_u32(&mut ext, s.secret_size, "secret size")?;
                put_u16(&mut ext, s.punctured.len(), "punctured count")?;
                for &p in &s.punctured {
                    put_u16(&mut ext, p, "punctured index")?;
                }
            }
            Extension::Coefficients(c) => {
                put_u32(&mut ext, c.len(), "coefficient count")?;
                put_symbols(&mut ext, c, width);
            }
        }
        put_u32(&mut out, ext.len(), "extension length")?;
        out.extend_from_slice(&ext);
        put_symbols(&mut out, &self.payload, width);
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest[..DIGEST_LEN]);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + DIGEST_LEN || &bytes[..4] != MAGIC {
            return Err(CliError::Format("missing CMR1 magic".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body)[..DIGEST_LEN] != *digest {
            return Err(CliError::Format("checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 4 };
        let kind = PayloadKind::from_byte(r.u8()?)?;
        let field_kind = r.u8()?;
        let modulus = r.u32()?;
        let field = match field_kind {
            0 => FieldSpec::prime(modulus),
            1 => FieldSpec::binary(modulus),
            other => return Err(CliError::Format(format!("unknown field kind {other}"))),
        }
        .map_err(|e| CliError::Format(e.to_string()))?;
        let (n, k, d, t, node) = (r.u16()?, r.u16()?, r.u16()?, r.u16()?, r.u16()?);
        let seed = r.u64()?;
        let original_len = r.u64()?;
        let symbols = r.u32()? as usize;
        let ext_len = r.u32()? as usize;
        let ext_bytes = r.take(ext_len)?;
        let width = field.symbol_bytes();
        let order = field.order();
        let mut er = Reader {
            buf: ext_bytes,
            pos: 0,
        };
        let ext = if kind.is_share() {
            let shares = er.u16()?;
            let z = er.u16()?;
            let secret_size = er.u32()? as usize;
            let count = er.u16()?;
            let punctured = (0..count).map(|_| er.u16()).collect::<Result<Vec<_>>>()?;
            Extension::Share(ShareExt {
                shares,
                z,
                secret_size,
                punctured,
            })
        } else if kind == PayloadKind::Rlnc {
            let count = er.u32()? as usize;
            Extension::Coefficients(er.symbols(count, width, order)?)
        } else {
            Extension::None
        };
        if er.pos != ext_bytes.len() {
            return Err(CliError::Format(
                "trailing bytes in header extension".into(),
            ));
        }
        let payload = r.symbols(symbols, width, order)?;
        if r.pos != body.len() {
            return Err(CliError::Format("trailing bytes after payload".into()));
        }
        let limit = match &ext {
            Extension::Share(s) => s.shares,
            _ => n,
        };
        if node >= limit || k == 0 || k > n {
            return Err(CliError::Format(format!(
                "inconsistent header: n={n}, k={k}, node={node}"
            )));
        }
        let header = Header {
            kind,
            field,
            n,
            k,
            d,
            t,
            node,
            seed,
            original_len,
            symbols,
            ext,
        };
        Ok(NodeFile { header, payload })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            CliError::Format(m) => CliError::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| CliError::Format("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<usize> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()) as usize)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn symbols(&mut self, count: usize, width: usize, order: u32) -> Result<Vec<u32>> {
        let raw = self.take(
            count
                .checked_mul(width)
                .ok_or_else(|| CliError::Format("symbol count overflow".into()))?,
        )?;
        raw.chunks(width)
            .map(|c| {
                let mut b = [0u8; 4];
                b[..width].copy_from_slice(c);
                let v = u32::from_le_bytes(b);
                if v < order {
                    Ok(v)
                } else {
                    Err(CliError::Format(format!("symbol {v} outside the field")))
                }
            })
            .collect()
    }
}

/// Splits bytes into `symbols` field elements of `floor(log2 q)` bits each,
/// most significant bit first, zero-padding the tail.
pub fn pack(data: &[u8], field: FieldSpec, symbols: usize) -> Result<Vec<u32>> {
    let bits = field.bits_per_symbol() as usize;
    let capacity = symbols * bits / 8;
    if data.len() > capacity {
        return Err(CliError::Params(format!(
            "input is {} bytes, the code holds at most {capacity}",
            data.len()
        )));
    }
    let mask = (1u64 << bits) - 1;
    let mut bytes = data.iter().copied();
    let (mut acc, mut have) = (0u64, 0usize);
    let mut out = Vec::with_capacity(symbols);
    while out.len() < symbols {
        while have < bits {
            acc = acc << 8 | bytes.next().unwrap_or(0) as u64;
            have += 8;
        }
        have -= bits;
        out.push((acc >> have & mask) as u32);
        acc &= (1u64 << have) - 1;
    }
    Ok(out)
}

/// Inverse of [`pack`]; keeps the first `len` bytes.
pub fn unpack(symbols: &[u32], field: FieldSpec, len: usize) -> Result<Vec<u8>> {
    let bits = field.bits_per_symbol() as usize;
    if len > symbols.len() * bits / 8 {
        return Err(CliError::Format(format!(
            "original length {len} exceeds the decoded capacity"
        )));
    }
    let (mut acc, mut have) = (0u64, 0usize);
    let mut out = Vec::with_capacity(len);
    for &s in symbols {
        if (s as u64) >> bits != 0 {
            return Err(CliError::Algebraic(format!(
                "decoded symbol {s} is not a data symbol"
            )));
        }
        acc = acc << bits | s as u64;
        have += bits;
        while have >= 8 && out.len() < len {
            have -= 8;
            out.push((acc >> have) as u8);
            acc &= (1u64 << have) - 1;
        }
    }
    Ok(out)
}

/// Writes via a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(fs::Permissions::from_mode(0o644))
            .map_err(|e| CliError::io(path, e))?;
    }
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(kind: PayloadKind, ext: Extension) -> NodeFile {
        NodeFile {
            header: Header {
                kind,
                field: FieldSpec::gf65536(),
                n: 8,
                k: 4,
                d: 5,
                t: 2,
                node: 3,
                seed: 99,
                original_len: 17,
                symbols: 3,
                ext,
            },
            payload: vec![1, 0xFFFF, 7],
        }
    }

    #[test]
    fn header_round_trip() {
        for f in [
            sample(PayloadKind::Zigzag, Extension::None),
            sample(PayloadKind::Rlnc, Extension::Coefficients(vec![5, 6, 7, 8])),
            sample(
                PayloadKind::ShareMbmr,
                Extension::Share(ShareExt {
                    shares: 6,
                    z: 1,
                    secret_size: 12,
                    punctured: vec![1],
                }),
            ),
        ] {
            let bytes = f.to_bytes().unwrap();
            assert_eq!(NodeFile::from_bytes(&bytes).unwrap(), f);
        }
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = sample(PayloadKind::Mbcr, Extension::None)
            .to_bytes()
            .unwrap();
        for i in [0, 5, 12, bytes.len() - 1] {
            let mut bad = bytes.clone();
            bad[i] ^= 0x40;
            assert!(
                matches!(NodeFile::from_bytes(&bad), Err(CliError::Format(_))),
                "byte {i}"
            );
        }
        assert!(NodeFile::from_bytes(&bytes[..10]).is_err());
    }

    #[test]
    fn packing_round_trip() {
        let data: Vec<u8> = (0..=40).collect();
        for (field, symbols) in [
            (FieldSpec::gf256(), 41),
            (FieldSpec::gf65536(), 21),
            (FieldSpec::prime(13).unwrap(), 110),
            (FieldSpec::prime(2).unwrap(), 328),
        ] {
            let s = pack(&data, field, symbols).unwrap();
            assert_eq!(s.len(), symbols);
            assert!(s.iter().all(|&v| v < field.order()));
            assert_eq!(unpack(&s, field, data.len()).unwrap(), data);
        }
        assert!(pack(&data, FieldSpec::gf256(), 40).is_err());
        assert_eq!(
            pack(&[0xAB], FieldSpec::gf256(), 3).unwrap(),
            vec![0xAB, 0, 0]
        );
        assert_eq!(
            pack(&[0xAB, 0xCD], FieldSpec::gf65536(), 1).unwrap(),
            vec![0xABCD]
        );
    }
}
