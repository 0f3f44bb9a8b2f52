use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cmr_core::algebra::FieldSpec;

#[derive(Debug, Parser)]
#[command(name = "cmr", version, about = "Centralized multi-node repair codes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// File-size bound and operating points for (n, k, d, t, M).
    Bounds(BoundsArgs),
    /// Encode a file into per-node files.
    Encode(EncodeArgs),
    /// Rebuild failed nodes or shares from the surviving files.
    Repair(RepairArgs),
    /// Recover the original file or secret.
    Reconstruct(ReconstructArgs),
    /// Split a secret into repairable shares.
    Share(ShareArgs),
    /// Run verification suites; exit 1 if any check fails.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CodeKind {
    Zigzag,
    Mbcr,
    Rlnc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SecretKindArg {
    MsmrZigzag,
    Mbmr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Table,
}

pub fn parse_field(s: &str) -> Result<FieldSpec, String> {
    match s {
        "gf256" => Ok(FieldSpec::gf256()),
        "gf65536" => Ok(FieldSpec::gf65536()),
        _ => {
            let p = s
                .strip_prefix("prime:")
                .ok_or_else(|| format!("expected gf256, gf65536 or prime:P, got {s:?}"))?;
            let p: u32 = p.parse().map_err(|e| format!("bad prime {p:?}: {e}"))?;
            FieldSpec::prime(p).map_err(|e| e.to_string())
        }
    }
}

#[derive(Debug, Clone, Args, Default)]
pub struct CodeParams {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub z: Option<usize>,
    /// Number of zigzag parity nodes.
    #[arg(long)]
    pub r: Option<usize>,
    /// gf256, gf65536 or prime:P.
    #[arg(long, value_parser = parse_field)]
    pub field: Option<FieldSpec>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputOpts {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: OutputFormat,
    /// Also write the report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub params: CodeParams,
    /// File size in symbols.
    #[arg(long = "M")]
    pub m: Option<u64>,
    /// Secret size for the sharing bound; defaults to M - z M/k.
    #[arg(long = "Ms")]
    pub ms: Option<u64>,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long, value_enum)]
    pub code: CodeKind,
    #[command(flatten)]
    pub params: CodeParams,
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for node_<i>.cmr files.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
pub struct RepairArgs {
    /// Directory holding the surviving node or share files.
    #[arg(long)]
    pub dir: PathBuf,
    /// Failed node (or share) indices.
    #[arg(long, value_delimiter = ',', required = true)]
    pub failed: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub helpers: Option<Vec<usize>>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Where to write rebuilt files; defaults to --dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub dir: PathBuf,
    /// Nodes (or shares) to read; defaults to the first k (or d) available.
    #[arg(long, value_delimiter = ',')]
    pub nodes: Option<Vec<usize>>,
    /// Shares to contact when reconstructing a secret.
    #[arg(long)]
    pub d: Option<usize>,
    /// Output file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
pub struct ShareArgs {
    #[arg(long, value_enum)]
    pub kind: SecretKindArg,
    #[command(flatten)]
    pub params: CodeParams,
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for share_<s>.cmr files.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub zigzag: bool,
    #[arg(long)]
    pub mbcr: bool,
    #[arg(long)]
    pub secret: bool,
    #[arg(long)]
    pub rlnc: bool,
    #[arg(long, value_enum)]
    pub kind: Option<SecretKindArg>,
    /// Scan every z-subset of shares instead of a sample.
    #[arg(long)]
    pub all_z_subsets: bool,
    #[arg(long, default_value_t = 100)]
    pub rounds: usize,
    #[command(flatten)]
    pub params: CodeParams,
    #[command(flatten)]
    pub output: OutputOpts,
}
