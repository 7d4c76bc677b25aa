use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "biokey", version, about = "Biometric key management for health records")]
pub struct Cli {
    /// JSON config file; defaults to $BIOKEY_CONFIG.
    #[arg(long, global = true, env = "BIOKEY_CONFIG")]
    pub config: Option<PathBuf>,
    /// Clock override, seconds since the Unix epoch.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub now: Option<i64>,
    /// Seed for every random draw; one is generated and reported when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report what would change without writing any file.
    #[arg(long, global = true)]
    pub dry_run: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive a time-limited key from a gray-level image.
    Keygen(KeygenArgs),
    /// Bind a key to a fingerprint template, or release it.
    #[command(subcommand)]
    Vault(VaultCommand),
    /// Bind a key to an iris code.
    Commit(CommitArgs),
    /// Release a key from an iris commitment.
    Decommit(DecommitArgs),
    /// Patient key custody.
    #[command(subcommand)]
    Escrow(EscrowCommand),
    /// Resolve what a requester may see of a record.
    View(ViewArgs),
    /// Create or edit protected records.
    #[command(subcommand)]
    Record(RecordCommand),
    /// Inspect the access log.
    #[command(subcommand)]
    Audit(AuditCommand),
    /// FAR/FRR evaluation on synthetic populations.
    Eval(EvalArgs),
    /// Error-correcting code diagnostics.
    #[command(subcommand)]
    Ecc(EccCommand),
    /// Scripted end-to-end walkthrough on fresh stores.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub distance: usize,
    #[arg(long, default_value_t = 0)]
    pub angle: u32,
    /// Requantize to this many gray levels; defaults to the file's own.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long, default_value_t = biokey::glcm::DEFAULT_KEY_LEN)]
    pub key_len: usize,
    /// Validity window in seconds.
    #[arg(long)]
    pub ttl: i64,
}

#[derive(Debug, Subcommand)]
pub enum VaultCommand {
    Lock {
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        key: String,
        /// Helper output file; printed in the JSON when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Unlock {
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        helper: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct CommitArgs {
    #[arg(long)]
    pub iris: PathBuf,
    /// 120-bit key as 30 hex digits.
    #[arg(long)]
    pub key_bits: String,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecommitArgs {
    #[arg(long)]
    pub iris: PathBuf,
    #[arg(long)]
    pub commitment: PathBuf,
}

#[derive(Debug, Args)]
pub struct StoreArg {
    /// Escrow store; falls back to the config file.
    #[arg(long)]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Physician {
    /// Physician license number; only its hash is kept.
    #[arg(long)]
    pub license: Option<String>,
    #[arg(long)]
    pub license_hash: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum EscrowCommand {
    Deposit {
        #[command(flatten)]
        store: StoreArg,
        #[arg(long)]
        patient: String,
        #[command(flatten)]
        physician: Physician,
        #[arg(long)]
        hospital: String,
        /// A TimedKey JSON document as printed by `keygen`.
        #[arg(long, conflicts_with_all = ["key", "ttl"])]
        key_file: Option<PathBuf>,
        #[arg(long, requires = "ttl")]
        key: Option<String>,
        #[arg(long)]
        ttl: Option<i64>,
    },
    /// Enroll by opening the key's vault with the physician's own template.
    Enroll {
        #[command(flatten)]
        store: StoreArg,
        #[arg(long)]
        id: u64,
        #[command(flatten)]
        physician: Physician,
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        helper: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    Revoke {
        #[command(flatten)]
        store: StoreArg,
        #[arg(long)]
        patient: String,
        #[arg(long)]
        id: u64,
    },
    Sweep {
        #[command(flatten)]
        store: StoreArg,
    },
    List {
        #[command(flatten)]
        store: StoreArg,
        #[arg(long)]
        patient: Option<String>,
        #[arg(long)]
        active: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ViewAs {
    /// Authenticated physician, no key.
    Login,
    /// Physician with the escrowed key.
    Key,
    /// Emergency access through the patient's iris.
    Biometric,
    /// The patient, with their own key.
    Patient,
}

#[derive(Debug, Args)]
pub struct ViewArgs {
    #[arg(long)]
    pub record: PathBuf,
    #[arg(long = "as", value_enum)]
    pub view_as: ViewAs,
    #[arg(long)]
    pub license: Option<String>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Live iris code, for `--as biometric`.
    #[arg(long)]
    pub iris: Option<PathBuf>,
    #[arg(long)]
    pub commitment: Option<PathBuf>,
    /// Key digits, for `--as patient`.
    #[arg(long)]
    pub key: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum RecordCommand {
    /// Encrypt a plain `{patient_no, attributes}` JSON document.
    Seal {
        #[arg(long)]
        plain: PathBuf,
        #[arg(long)]
        key: String,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Set one attribute and log the write.
    Update {
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        attribute: String,
        #[arg(long)]
        value: String,
        #[arg(long)]
        license: String,
        /// Needed for attributes outside the basic set.
        #[arg(long)]
        key: Option<String>,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AuditCommand {
    Verify {
        #[arg(long)]
        log: Option<PathBuf>,
        /// Expected chain hash of the last entry, to detect truncation.
        #[arg(long)]
        head: Option<String>,
    },
    Show {
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        tagmap: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemArg {
    Vault,
    Commitment,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub system: SystemArg,
    #[arg(long, default_value_t = 200)]
    pub size: usize,
    /// Noise model as inline JSON or a path to a JSON file.
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub max_impostor_pairs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-trial CSV (id, enroll_time, extract_time, accept).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum EccCommand {
    Selftest {
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Write the resulting record, stores and log here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
