use std::fs;
use std::path::{Path, PathBuf};

use biokey::audit::{interpret, verify_bytes, verify_bytes_anchored, AuditLog, ChainStatus, TagMap};
use biokey::commitment::{commit, decommit, Commitment, CommitmentError, IrisCode};
use biokey::ecc::selftest;
use biokey::escrow::{EnrollmentProof, EscrowError, EscrowStore, LicenseHash};
use biokey::eval::{gen_population, run_far_frr, EvalConfig, NoiseModel, DEFAULT_MAX_IMPOSTOR_PAIRS};
use biokey::glcm::{attach_validity, key_from_image, Angle, GlcmError, GlcmParams, GrayImage, TimedKey};
use biokey::keys::KeyBits;
use biokey::par::Execution;
use biokey::privacy::{
    emergency_unlock, encrypt_confidential, resolve_view, update_attribute, AccessContext, AttributeCatalog, EhrRecord,
    PlainRecord, PrivacyError, Requester, View,
};
use biokey::scenario::{scenario_demo, ScenarioError};
use biokey::time::{Clock, SystemClock, Timestamp};
use biokey::vault::{lock_vault, unlock_vault, KeyChunks, MatchParams, MinutiaeTemplate, VaultError, VaultHelperData};
use rand::rngs::OsRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::config::CliConfig;
use crate::lock::FileLock;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or parameters; exit 64.
    Usage(String),
    /// A policy or biometric refusal, reported as data; exit 2.
    Reject(Value),
    /// Anything else that went wrong; exit 1.
    Fault(String),
    /// A check that ran to completion but failed; exit 1 with its report.
    Failed(Value),
}

pub type Res = Result<Value, CliError>;

fn fault(e: impl std::fmt::Display) -> CliError {
    CliError::Fault(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn reject(reason: &str, extra: Value) -> CliError {
    let mut v = json!({ "result": "reject", "reason": reason });
    if let (Value::Object(base), Value::Object(more)) = (&mut v, extra) {
        base.extend(more);
    }
    CliError::Reject(v)
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("output serializes")
}

pub struct Ctx {
    pub cfg: CliConfig,
    pub now: Timestamp,
    pub dry_run: bool,
    seed: Option<u64>,
}

impl Ctx {
    pub fn new(cli: &Cli) -> Result<Self, CliError> {
        let cfg = match &cli.config {
            Some(path) => CliConfig::load(path).map_err(usage)?,
            None => CliConfig::default(),
        };
        let now = cli.now.or(cfg.now).unwrap_or_else(|| SystemClock.now());
        Ok(Self { cfg, now, dry_run: cli.dry_run, seed: cli.seed })
    }

    /// The run's seed, drawn and reported on first use when not given.
    pub fn seed(&mut self) -> u64 {
        *self.seed.get_or_insert_with(|| {
            let s: u64 = OsRng.gen();
            eprintln!("seed: {s}");
            s
        })
    }

    fn rng(&mut self) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.seed())
    }

    fn write(&self, path: &Path, text: &str) -> Result<(), CliError> {
        if self.dry_run {
            return Ok(());
        }
        fs::write(path, text).map_err(|e| fault(format!("{}: {e}", path.display())))
    }

    fn path(&self, given: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
        given.clone().or_else(|| configured.clone()).ok_or_else(|| usage(format!("no {what} given on the command line or in the config")))
    }

    fn catalog(&self, given: &Option<PathBuf>) -> Result<AttributeCatalog, CliError> {
        match given.as_ref().or(self.cfg.catalog.as_ref()) {
            Some(p) => AttributeCatalog::from_json(&read(p)?).map_err(usage),
            None => Ok(AttributeCatalog::default()),
        }
    }

    fn tagmap(&self, given: &Option<PathBuf>) -> Result<TagMap, CliError> {
        match given.as_ref().or(self.cfg.tagmap.as_ref()) {
            Some(p) => TagMap::from_json(&read(p)?).map_err(usage),
            None => Ok(TagMap::default()),
        }
    }

    fn match_params(&self, threshold: Option<f64>) -> Result<MatchParams, CliError> {
        let mut p = MatchParams::default();
        if let Some(t) = threshold.or(self.cfg.vault_threshold) {
            if !(t > 0.0 && t <= 1.0) {
                return Err(usage(format!("threshold must lie in (0, 1], got {t}")));
            }
            p.threshold = t;
        }
        Ok(p)
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| fault(format!("{}: {e}", path.display())))
}

fn parse<T: std::str::FromStr>(path: &Path) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    read(path)?.parse().map_err(|e| fault(format!("{}: {e}", path.display())))
}

fn key_digits(s: &str) -> Result<&str, CliError> {
    if !s.is_empty() && s.len() <= biokey::glcm::MAX_KEY_LEN && s.bytes().all(|b| b.is_ascii_digit()) {
        Ok(s)
    } else {
        Err(usage(format!("key must be 1..={} decimal digits", biokey::glcm::MAX_KEY_LEN)))
    }
}

fn license(p: &Physician) -> Result<LicenseHash, CliError> {
    match (&p.license, &p.license_hash) {
        (Some(l), _) => Ok(LicenseHash::of(l)),
        (None, Some(h)) => LicenseHash::try_from(h.clone()).map_err(usage),
        (None, None) => Err(usage("a physician license is required")),
    }
}

pub fn dispatch(cli: Cli) -> Res {
    let mut ctx = Ctx::new(&cli)?;
    match cli.command {
        Command::Keygen(a) => keygen(&ctx, a),
        Command::Vault(c) => vault(&mut ctx, c),
        Command::Commit(a) => commit_cmd(&ctx, a),
        Command::Decommit(a) => decommit_cmd(a),
        Command::Escrow(c) => escrow(&ctx, c),
        Command::View(a) => view(&ctx, a),
        Command::Record(c) => record(&mut ctx, c),
        Command::Audit(c) => audit(&ctx, c),
        Command::Eval(a) => eval(&mut ctx, a),
        Command::Ecc(EccCommand::Selftest { sequential }) => ecc_selftest(&mut ctx, sequential),
        Command::Demo(a) => demo(&mut ctx, a),
    }
}

fn glcm_error(e: GlcmError) -> CliError {
    match e {
        GlcmError::ZeroDistance
        | GlcmError::BadAngle(_)
        | GlcmError::BadKeyLength(_)
        | GlcmError::NonPositiveDuration(_)
        | GlcmError::BadLevels(_) => usage(e),
        other => fault(other),
    }
}

fn keygen(ctx: &Ctx, a: KeygenArgs) -> Res {
    let mut image: GrayImage = parse(&a.image)?;
    if let Some(levels) = a.levels.filter(|&l| l != image.levels()) {
        let from = image.levels();
        let pixels = image.pixels().iter().map(|&p| (p as usize * levels / from) as u16).collect();
        image = GrayImage::new(image.width(), image.height(), levels, pixels).map_err(glcm_error)?;
    }
    let params = GlcmParams::new(a.distance, Angle::from_degrees(a.angle).map_err(glcm_error)?).map_err(glcm_error)?;
    let digits = key_from_image(&image, params, a.key_len).map_err(glcm_error)?;
    let timed = attach_validity(&digits, ctx.now, a.ttl).map_err(glcm_error)?;
    Ok(to_value(&timed))
}

fn vault_reject(e: VaultError) -> CliError {
    match e {
        VaultError::MatchBelowThreshold { score, threshold } => {
            reject("match_below_threshold", json!({ "score": score, "threshold": threshold }))
        }
        VaultError::RootRecoveryFailure => reject("root_recovery_failure", json!({})),
        VaultError::ExpiredHelper => reject("expired_helper", json!({})),
        other => fault(other),
    }
}

fn vault(ctx: &mut Ctx, c: VaultCommand) -> Res {
    match c {
        VaultCommand::Lock { template, key, out } => {
            let template: MinutiaeTemplate = parse(&template)?;
            let chunks = KeyChunks::from_key(key_digits(&key)?).map_err(usage)?;
            let z_seed = ctx.rng().gen();
            let helper = lock_vault(&template, &chunks, z_seed).map_err(fault)?;
            let text = helper.to_string();
            let mut v = json!({
                "result": "locked",
                "n": helper.n,
                "z_seed": helper.z_seed,
                "chunk_width": helper.chunk_width,
                "seed": ctx.seed(),
            });
            match out {
                Some(path) => {
                    ctx.write(&path, &text)?;
                    v["out"] = json!(path);
                }
                None => v["helper"] = json!(text),
            }
            Ok(v)
        }
        VaultCommand::Unlock { template, helper, threshold } => {
            let query: MinutiaeTemplate = parse(&template)?;
            let helper: VaultHelperData = parse(&helper)?;
            let chunks = unlock_vault(&query, &helper, ctx.match_params(threshold)?).map_err(vault_reject)?;
            Ok(json!({ "result": "accept", "key": chunks.to_digits() }))
        }
    }
}

fn commit_cmd(ctx: &Ctx, a: CommitArgs) -> Res {
    let iris: IrisCode = parse(&a.iris)?;
    let key: KeyBits = a.key_bits.parse().map_err(usage)?;
    let params = ctx.cfg.commit_params(a.threshold);
    params.validate().map_err(usage)?;
    let c = commit(&iris, &key, params, ctx.now).map_err(fault)?;
    let text = c.to_text();
    let mut v = json!({ "result": "committed", "bits": c.masked.len(), "threshold": params.threshold });
    match a.out {
        Some(path) => {
            ctx.write(&path, &text)?;
            v["out"] = json!(path);
        }
        None => v["commitment"] = json!(text),
    }
    Ok(v)
}

fn decommit_cmd(a: DecommitArgs) -> Res {
    let iris: IrisCode = parse(&a.iris)?;
    let c: Commitment = parse(&a.commitment)?;
    match decommit(&iris, &c) {
        Ok(key) => Ok(json!({ "result": "accept", "key_bits": key.to_hex() })),
        Err(CommitmentError::Rejected(r)) => Err(reject(&r.to_string(), json!({}))),
        Err(e) => Err(fault(e)),
    }
}

fn escrow_error(e: EscrowError) -> CliError {
    let reason = match &e {
        EscrowError::ActiveKeyExists { .. } => "active_key_exists",
        EscrowError::IdentityMismatch => "identity_mismatch",
        EscrowError::KeyMismatch => "key_mismatch",
        EscrowError::KeyExpired(_) => "key_expired",
        EscrowError::NotOwner(_) => "not_owner",
        EscrowError::NotEnrolled(_) => "not_enrolled",
        EscrowError::NoActiveKey => "no_active_key",
        _ => return fault(e),
    };
    reject(reason, json!({ "message": e.to_string() }))
}

/// Loads the store under an exclusive lock, applies `f`, and saves only if
/// `f` succeeded and this is not a dry run.
fn with_store<F>(ctx: &Ctx, path: &Path, f: F) -> Res
where
    F: FnOnce(&mut EscrowStore) -> Res,
{
    let _lock = if ctx.dry_run { None } else { Some(FileLock::acquire(path).map_err(fault)?) };
    let seal = ctx.cfg.seal_key().map_err(usage)?;
    let mut store = EscrowStore::load(path, seal).map_err(fault)?;
    let out = f(&mut store)?;
    if !ctx.dry_run {
        store.save(path).map_err(fault)?;
    }
    Ok(out)
}

fn escrow(ctx: &Ctx, c: EscrowCommand) -> Res {
    let now = ctx.now;
    match c {
        EscrowCommand::Deposit { store, patient, physician, hospital, key_file, key, ttl } => {
            let path = ctx.path(&store.store, &ctx.cfg.escrow_store, "escrow store")?;
            let lic = license(&physician)?;
            let timed: TimedKey = match (key_file, key, ttl) {
                (Some(f), _, _) => serde_json::from_str(&read(&f)?).map_err(|e| fault(format!("{}: {e}", f.display())))?,
                (None, Some(k), Some(t)) => attach_validity(key_digits(&k)?, now, t).map_err(glcm_error)?,
                _ => return Err(usage("give --key-file, or --key with --ttl")),
            };
            with_store(ctx, &path, |s| {
                let r = s.deposit_key(&patient, &timed, &lic, &hospital, now).map_err(escrow_error)?;
                Ok(to_value(r))
            })
        }
        EscrowCommand::Enroll { store, id, physician, template, helper, threshold } => {
            let path = ctx.path(&store.store, &ctx.cfg.escrow_store, "escrow store")?;
            let lic = license(&physician)?;
            let query: MinutiaeTemplate = parse(&template)?;
            let helper: VaultHelperData = parse(&helper)?;
            let chunks = unlock_vault(&query, &helper, ctx.match_params(threshold)?).map_err(vault_reject)?;
            let proof = EnrollmentProof::from_unlock(lic, &chunks);
            with_store(ctx, &path, |s| Ok(to_value(s.enroll_key(id, &proof, now).map_err(escrow_error)?)))
        }
        EscrowCommand::Revoke { store, patient, id } => {
            let path = ctx.path(&store.store, &ctx.cfg.escrow_store, "escrow store")?;
            with_store(ctx, &path, |s| Ok(to_value(s.revoke_key(&patient, id).map_err(escrow_error)?)))
        }
        EscrowCommand::Sweep { store } => {
            let path = ctx.path(&store.store, &ctx.cfg.escrow_store, "escrow store")?;
            with_store(ctx, &path, |s| Ok(json!({ "expired": s.expire_sweep(now) })))
        }
        EscrowCommand::List { store, patient, active } => {
            let path = ctx.path(&store.store, &ctx.cfg.escrow_store, "escrow store")?;
            let s = EscrowStore::load(&path, ctx.cfg.seal_key().map_err(usage)?).map_err(fault)?;
            let rows: Vec<_> = s
                .records()
                .iter()
                .filter(|r| patient.as_deref().is_none_or(|p| r.patient_no == p))
                .filter(|r| !active || r.is_active())
                .collect();
            Ok(to_value(&rows))
        }
    }
}

/// Runs `f` against the audit log, appending whatever it adds.
fn with_log<T, F>(ctx: &Ctx, path: Option<&Path>, tags: TagMap, f: F) -> Result<(T, usize), CliError>
where
    F: FnOnce(&mut AuditLog) -> Result<T, CliError>,
{
    let lock = match path {
        Some(p) if !ctx.dry_run => Some(FileLock::acquire(p).map_err(fault)?),
        _ => None,
    };
    let mut log = match path {
        Some(p) => AuditLog::load(p, tags).map_err(fault)?,
        None => AuditLog::new(tags),
    };
    let before = log.len();
    let out = f(&mut log);
    // refusals are logged too, so append before propagating
    if let (Some(p), Some(_)) = (path, &lock) {
        log.append_to(p, before).map_err(fault)?;
    }
    Ok((out?, log.len() - before))
}

fn view_value(v: &View, appended: usize) -> Value {
    let mut out = to_value(v);
    out["result"] = json!(if v.denials.is_empty() { "grant" } else { "partial" });
    out["audit_entries"] = json!(appended);
    out
}

fn view(ctx: &Ctx, a: ViewArgs) -> Res {
    let record = EhrRecord::from_json(&read(&a.record)?).map_err(fault)?;
    let catalog = ctx.catalog(&a.catalog)?;
    let tags = ctx.tagmap(&None)?;
    let log_path = a.log.clone().or_else(|| ctx.cfg.audit_log.clone());
    let physician = || {
        a.license
            .as_deref()
            .map(LicenseHash::of)
            .ok_or_else(|| usage("--license is required for physician views"))
    };
    let store = match a.store.as_ref().or(ctx.cfg.escrow_store.as_ref()) {
        Some(p) => EscrowStore::load(p, ctx.cfg.seal_key().map_err(usage)?).map_err(fault)?,
        None => EscrowStore::new(),
    };
    let privacy = |e: PrivacyError| match e {
        PrivacyError::Rejected(r) => reject(&r.to_string(), json!({})),
        PrivacyError::NotEnrolled => reject("not_enrolled", json!({})),
        PrivacyError::NotOwner(p) => reject("not_owner", json!({ "patient_no": p })),
        PrivacyError::Tampered => reject("record_tampered", json!({})),
        other => fault(other),
    };

    let (view, appended) = match a.view_as {
        ViewAs::Login | ViewAs::Key => {
            let lic = physician()?;
            let mut access = AccessContext::login(Requester::Physician(lic.clone()));
            if a.view_as == ViewAs::Key {
                if let Ok(r) = store.authorize(&record.patient_no, &lic, ctx.now) {
                    access = access.with_key(KeyBits::from_digits(&r.key_digits));
                } else if let Some(r) = store.query_active(&record.patient_no, &lic).or_else(|| {
                    store.records().iter().rev().find(|r| r.patient_no == record.patient_no && r.license_hash == lic)
                }) {
                    // let the resolver report why the escrowed key was refused
                    access = access.with_key(KeyBits::from_digits(&r.key_digits));
                } else {
                    return Err(reject("no_active_key", json!({})));
                }
            }
            with_log(ctx, log_path.as_deref(), tags, |log| {
                resolve_view(&record, &access, &catalog, &store, log, ctx.now).map_err(privacy)
            })?
        }
        ViewAs::Biometric => {
            let lic = physician()?;
            let iris: IrisCode = parse(a.iris.as_deref().ok_or_else(|| usage("--iris is required"))?)?;
            let commitment: Option<Commitment> = a.commitment.as_deref().map(parse).transpose()?;
            with_log(ctx, log_path.as_deref(), tags, |log| {
                emergency_unlock(&record, &iris, commitment.as_ref(), &catalog, &lic, log, ctx.now).map_err(privacy)
            })?
        }
        ViewAs::Patient => {
            let key = KeyBits::from_digits(key_digits(a.key.as_deref().ok_or_else(|| usage("--key is required"))?)?);
            let access = AccessContext::login(Requester::Patient(record.patient_no.clone())).with_key(key);
            with_log(ctx, log_path.as_deref(), tags, |log| {
                resolve_view(&record, &access, &catalog, &store, log, ctx.now).map_err(privacy)
            })?
        }
    };
    let out = view_value(&view, appended);
    if let Some((_, denial)) = view.denials.iter().next() {
        let mut v = out;
        v["result"] = json!("reject");
        v["reason"] = to_value(denial);
        return Err(CliError::Reject(v));
    }
    Ok(out)
}

fn record(ctx: &mut Ctx, c: RecordCommand) -> Res {
    match c {
        RecordCommand::Seal { plain, key, catalog, out } => {
            let plain: PlainRecord = serde_json::from_str(&read(&plain)?).map_err(|e| fault(format!("{}: {e}", plain.display())))?;
            let key = KeyBits::from_digits(key_digits(&key)?);
            let catalog = ctx.catalog(&catalog)?;
            let mut rng = ctx.rng();
            let record = encrypt_confidential(&plain, &catalog, &key, &mut rng).map_err(usage)?;
            ctx.write(&out, &record.to_json())?;
            Ok(json!({
                "result": "sealed",
                "patient_no": record.patient_no,
                "clear_attributes": record.attributes.len(),
                "digest": record.confidential.digest,
                "out": out,
            }))
        }
        RecordCommand::Update { record, attribute, value, license, key, log, catalog } => {
            let catalog = ctx.catalog(&catalog)?;
            let tags = ctx.tagmap(&None)?;
            let key = key.as_deref().map(key_digits).transpose()?.map(KeyBits::from_digits);
            let log_path = log.or_else(|| ctx.cfg.audit_log.clone());
            let _lock = if ctx.dry_run { None } else { Some(FileLock::acquire(&record).map_err(fault)?) };
            let mut rec = EhrRecord::from_json(&read(&record)?).map_err(fault)?;
            let actor = LicenseHash::of(&license);
            let mut rng = ctx.rng();
            let now = ctx.now;
            let ((), appended) = with_log(ctx, log_path.as_deref(), tags, |log| {
                update_attribute(&mut rec, &attribute, &value, key.as_ref(), &catalog, &actor, log, now, &mut rng).map_err(|e| match e {
                    PrivacyError::UnknownAttribute(_) => usage(e),
                    PrivacyError::DecryptFailure => reject("decrypt_failure", json!({})),
                    PrivacyError::Tampered => reject("record_tampered", json!({})),
                    other => fault(other),
                })
            })?;
            ctx.write(&record, &rec.to_json())?;
            Ok(json!({ "result": "updated", "attribute": attribute, "audit_entries": appended, "digest": rec.confidential.digest }))
        }
    }
}

fn audit(ctx: &Ctx, c: AuditCommand) -> Res {
    match c {
        AuditCommand::Verify { log, head } => {
            let path = ctx.path(&log, &ctx.cfg.audit_log, "audit log")?;
            let bytes = fs::read(&path).map_err(|e| fault(format!("{}: {e}", path.display())))?;
            let status = match &head {
                Some(h) => verify_bytes_anchored(&bytes, h),
                None => verify_bytes(&bytes),
            };
            match status {
                ChainStatus::Ok { entries } => {
                    let head = AuditLog::from_jsonl(&String::from_utf8_lossy(&bytes), TagMap::default())
                        .map(|l| l.head().to_owned())
                        .map_err(fault)?;
                    Ok(json!({ "result": "ok", "entries": entries, "head": head }))
                }
                ChainStatus::Tampered { first_index } => {
                    Err(reject("tampered", json!({ "first_tampered": first_index })))
                }
            }
        }
        AuditCommand::Show { log, tagmap } => {
            let path = ctx.path(&log, &ctx.cfg.audit_log, "audit log")?;
            let tags = ctx.tagmap(&tagmap)?;
            let log = AuditLog::load(&path, tags).map_err(fault)?;
            let entries: Vec<_> = log.entries().iter().map(|e| interpret(e, &tags)).collect();
            Ok(json!({ "chain": log.verify(), "entries": entries }))
        }
    }
}

fn eval(ctx: &mut Ctx, a: EvalArgs) -> Res {
    let noise: NoiseModel = match &a.noise {
        None => NoiseModel::NONE,
        Some(s) if s.trim_start().starts_with('{') => serde_json::from_str(s).map_err(usage)?,
        Some(path) => serde_json::from_str(&read(Path::new(path))?).map_err(usage)?,
    };
    noise.validate().map_err(usage)?;
    let system = match a.system {
        SystemArg::Vault => biokey::eval::System::Vault,
        SystemArg::Commitment => biokey::eval::System::Commitment,
    };
    let seed = ctx.seed();
    let commitment = ctx.cfg.commit_params(if system == biokey::eval::System::Commitment { a.threshold } else { None });
    commitment.validate().map_err(usage)?;
    let vault = ctx.match_params(if system == biokey::eval::System::Vault { a.threshold } else { None })?;
    let cfg = EvalConfig {
        seed,
        noise,
        vault,
        commitment,
        max_impostor_pairs: a.max_impostor_pairs.unwrap_or(DEFAULT_MAX_IMPOSTOR_PAIRS),
        exec: if a.sequential { Execution::Sequential } else { Execution::Parallel },
    };
    let population = gen_population(system.biometric(), a.size, commitment.iris_bits(), seed).map_err(usage)?;
    let report = run_far_frr(&population, &cfg).map_err(fault)?;
    if let Some(csv) = &a.csv {
        ctx.write(csv, &report.to_csv())?;
    }
    match &a.out {
        Some(path) => {
            ctx.write(path, &report.to_json())?;
            let mut summary = to_value(&report);
            summary.as_object_mut().expect("report is an object").remove("trials");
            summary["out"] = json!(path);
            Ok(summary)
        }
        None => Ok(to_value(&report)),
    }
}

fn ecc_selftest(ctx: &mut Ctx, sequential: bool) -> Res {
    let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
    let results = selftest::run_all(exec, ctx.seed());
    let passed = results.iter().all(|r| r.passed());
    let v = json!({ "result": if passed { "pass" } else { "fail" }, "suites": results });
    if passed {
        Ok(v)
    } else {
        Err(CliError::Failed(v))
    }
}

fn demo(ctx: &mut Ctx, a: DemoArgs) -> Res {
    let seed = ctx.seed();
    let run = scenario_demo(seed, ctx.now).map_err(|e| match e {
        ScenarioError::Deviation { .. } => CliError::Failed(json!({ "result": "fail", "message": e.to_string() })),
        ScenarioError::Setup(_) => fault(e),
    })?;
    let mut v = to_value(&run.transcript);
    v["result"] = json!("pass");
    if let Some(dir) = &a.out_dir {
        if !ctx.dry_run {
            fs::create_dir_all(dir).map_err(fault)?;
        }
        ctx.write(&dir.join("record.json"), &run.record.to_json())?;
        ctx.write(&dir.join("escrow.jsonl"), &run.store.to_jsonl())?;
        ctx.write(&dir.join("audit.jsonl"), &run.log.to_jsonl())?;
        ctx.write(&dir.join("commitment.fc"), &run.commitment.to_text())?;
        v["out_dir"] = json!(dir);
    }
    Ok(v)
}
