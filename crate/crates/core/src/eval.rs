//! Synthetic populations and FAR/FRR evaluation for both bindings.
//!
//! Every random draw comes from a ChaCha stream addressed by (seed, purpose,
//! index), so a trial's inputs do not depend on which thread runs it or in
//! what order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commitment::{commit, decommit, CommitParams, Commitment, CommitmentError, IrisCode};
use crate::keys::KeyBits;
use crate::par::{self, Execution};
use crate::vault::{lock_vault, unlock_vault, KeyChunks, MatchParams, Minutia, MinutiaKind, MinutiaeTemplate, VaultError, VaultHelperData};

/// Side of the square minutiae grid.
pub const GRID: u16 = 512;
pub const MIN_MINUTIAE: usize = 30;
pub const MAX_MINUTIAE: usize = 50;
pub const KEY_DIGITS: usize = 15;
/// Full cross-product impostor sweep for 200 templates.
pub const DEFAULT_MAX_IMPOSTOR_PAIRS: usize = 200 * 199;

const STREAM_POPULATION: u64 = 1;
const STREAM_KEYS: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_PAIRS: u64 = 4;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("population needs at least 2 templates, got {0}")]
    PopulationTooSmall(usize),
    #[error("noise model: {0}")]
    BadNoise(String),
    #[error(transparent)]
    Vault(#[from] VaultError),
    #[error(transparent)]
    Commitment(#[from] CommitmentError),
}

fn rng_for(seed: u64, purpose: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 48) | index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Independent per-bit flip probability for iris codes.
    pub flip_probability: f64,
    pub burst_count: usize,
    pub burst_length: usize,
    /// Gaussian jitter of minutia position, pixels.
    pub xy_sigma: f64,
    /// Gaussian jitter of minutia angle, degrees.
    pub theta_sigma: f64,
    pub drop_rate: f64,
    /// Chance, per original point, of adding a random spurious point.
    pub spurious_rate: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::NONE
    }
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        flip_probability: 0.0,
        burst_count: 0,
        burst_length: 0,
        xy_sigma: 0.0,
        theta_sigma: 0.0,
        drop_rate: 0.0,
        spurious_rate: 0.0,
    };

    pub fn iris(p: f64) -> Self {
        Self { flip_probability: p, ..Self::NONE }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::BadNoise(m.to_owned()));
        if !(0.0..=0.5).contains(&self.flip_probability) {
            return bad("flip_probability must lie in [0, 0.5]");
        }
        if !(0.0..=1.0).contains(&self.drop_rate) || !(0.0..=1.0).contains(&self.spurious_rate) {
            return bad("drop_rate and spurious_rate must lie in [0, 1]");
        }
        if !(self.xy_sigma.is_finite() && self.xy_sigma >= 0.0 && self.theta_sigma.is_finite() && self.theta_sigma >= 0.0) {
            return bad("jitter sigmas must be finite and nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiometricKind {
    Fingerprint,
    Iris,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Population {
    Fingerprint(Vec<MinutiaeTemplate>),
    Iris(Vec<IrisCode>),
}

impl Population {
    pub fn len(&self) -> usize {
        match self {
            Population::Fingerprint(v) => v.len(),
            Population::Iris(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn random_minutia<R: Rng>(rng: &mut R) -> Minutia {
    let kind = if rng.gen() { MinutiaKind::Ending } else { MinutiaKind::Bifurcation };
    Minutia::new(rng.gen_range(0..GRID), rng.gen_range(0..GRID), rng.gen_range(0..360), kind)
}

pub fn random_fingerprint<R: Rng>(rng: &mut R) -> MinutiaeTemplate {
    let n = rng.gen_range(MIN_MINUTIAE..=MAX_MINUTIAE);
    let mut points: Vec<Minutia> = Vec::with_capacity(n);
    while points.len() < n {
        let p = random_minutia(rng);
        if !points.iter().any(|q| q.x == p.x && q.y == p.y) {
            points.push(p);
        }
    }
    MinutiaeTemplate::new(points).expect("point count within bounds")
}

pub fn random_iris<R: Rng>(rng: &mut R, id: impl Into<String>, bits: usize) -> IrisCode {
    IrisCode::new(id, (0..bits).map(|_| rng.gen()).collect())
}

/// `iris_bits` is ignored for fingerprints.
pub fn gen_population(kind: BiometricKind, size: usize, iris_bits: usize, seed: u64) -> Result<Population, EvalError> {
    if size < 2 {
        return Err(EvalError::PopulationTooSmall(size));
    }
    Ok(match kind {
        BiometricKind::Fingerprint => Population::Fingerprint(
            (0..size).map(|i| random_fingerprint(&mut rng_for(seed, STREAM_POPULATION, i as u64))).collect(),
        ),
        BiometricKind::Iris => Population::Iris(
            (0..size)
                .map(|i| random_iris(&mut rng_for(seed, STREAM_POPULATION, i as u64), format!("I{i:04}"), iris_bits))
                .collect(),
        ),
    })
}

/// Flips each bit when its own uniform draw falls below `p`. The draws do
/// not depend on `p`, so for a fixed stream the flip set only grows with `p`.
pub fn perturb_iris<R: Rng>(iris: &IrisCode, noise: &NoiseModel, rng: &mut R) -> IrisCode {
    let mut bits = iris.bits.clone();
    for b in bits.iter_mut() {
        if rng.gen::<f64>() < noise.flip_probability {
            *b = !*b;
        }
    }
    let n = bits.len();
    if n > 0 {
        for _ in 0..noise.burst_count {
            let start = rng.gen_range(0..n);
            for b in bits.iter_mut().skip(start).take(noise.burst_length) {
                *b = !*b;
            }
        }
    }
    IrisCode::new(iris.id.clone(), bits)
}

/// Drops, jitters and adds points. Fails when too few points survive.
pub fn perturb_minutiae<R: Rng>(template: &MinutiaeTemplate, noise: &NoiseModel, rng: &mut R) -> Result<MinutiaeTemplate, VaultError> {
    let xy = Normal::new(0.0, noise.xy_sigma).expect("validated sigma");
    let th = Normal::new(0.0, noise.theta_sigma).expect("validated sigma");
    let mut out = Vec::with_capacity(template.len());
    for p in template.points() {
        let drop = rng.gen::<f64>() < noise.drop_rate;
        let dx = xy.sample(rng).round() as i32;
        let dy = xy.sample(rng).round() as i32;
        let dt = th.sample(rng).round() as i32;
        let spurious = rng.gen::<f64>() < noise.spurious_rate;
        if !drop {
            let x = (p.x as i32 + dx).clamp(0, GRID as i32 - 1) as u16;
            let y = (p.y as i32 + dy).clamp(0, GRID as i32 - 1) as u16;
            let theta = (p.theta as i32 + dt).rem_euclid(360) as u16;
            out.push(Minutia::new(x, y, theta, p.kind));
        }
        if spurious {
            out.push(random_minutia(rng));
        }
    }
    MinutiaeTemplate::new(out)
}

pub fn random_key_digits<R: Rng>(rng: &mut R) -> String {
    let mut s = String::with_capacity(KEY_DIGITS);
    s.push(char::from(b'1' + rng.gen_range(0..9u8)));
    for _ in 1..KEY_DIGITS {
        s.push(char::from(b'0' + rng.gen_range(0..10u8)));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Vault,
    Commitment,
}

impl System {
    pub fn biometric(self) -> BiometricKind {
        match self {
            System::Vault => BiometricKind::Fingerprint,
            System::Commitment => BiometricKind::Iris,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub seed: u64,
    pub noise: NoiseModel,
    pub vault: MatchParams,
    pub commitment: CommitParams,
    /// Above this many ordered pairs, impostor pairs are sampled.
    pub max_impostor_pairs: usize,
    pub exec: Execution,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            noise: NoiseModel::NONE,
            vault: MatchParams::default(),
            commitment: CommitParams::default(),
            max_impostor_pairs: DEFAULT_MAX_IMPOSTOR_PAIRS,
            exec: Execution::default(),
        }
    }
}

/// One genuine trial, in the shape of the usual enrollment log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub id: String,
    pub enroll_time: f64,
    pub extract_time: f64,
    pub accept: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: System,
    pub size: usize,
    pub seed: u64,
    pub noise: NoiseModel,
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
    pub genuine_trials: usize,
    pub impostor_trials: usize,
    pub false_accepts: usize,
    pub false_rejects: usize,
    pub impostor_sampled: bool,
    /// Seconds.
    pub enc_total: f64,
    pub enc_mean: f64,
    pub dec_total: f64,
    pub dec_mean: f64,
    pub genuine_rejects: BTreeMap<String, usize>,
    pub impostor_rejects: BTreeMap<String, usize>,
    pub trials: Vec<TrialRow>,
}

impl EvalReport {
    /// The report with every wall-clock field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.enc_total = 0.0;
        r.enc_mean = 0.0;
        r.dec_total = 0.0;
        r.dec_mean = 0.0;
        for t in &mut r.trials {
            t.enroll_time = 0.0;
            t.extract_time = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,enroll_time,extract_time,accept\n");
        for t in &self.trials {
            writeln!(out, "{},{:.9},{:.9},{}", t.id, t.enroll_time, t.extract_time, t.accept).expect("string write");
        }
        out
    }
}

struct Outcome {
    accept: bool,
    reason: Option<String>,
    seconds: f64,
}

fn vault_reason(e: &VaultError) -> &'static str {
    match e {
        VaultError::MatchBelowThreshold { .. } => "match_below_threshold",
        VaultError::RootRecoveryFailure => "root_recovery_failure",
        VaultError::PointCount(_) => "too_few_points",
        VaultError::ExpiredHelper => "expired_helper",
        _ => "malformed",
    }
}

fn commitment_reason(e: &CommitmentError) -> String {
    match e {
        CommitmentError::Rejected(r) => r.to_string(),
        _ => "error".to_owned(),
    }
}

fn impostor_pairs(n: usize, max_pairs: usize, seed: u64) -> (Vec<(usize, usize)>, bool) {
    let total = n * (n - 1);
    if total <= max_pairs {
        let pairs = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        return (pairs, false);
    }
    let mut rng = rng_for(seed, STREAM_PAIRS, 0);
    let pairs = (0..max_pairs)
        .map(|_| {
            let i = rng.gen_range(0..n);
            let j = (i + rng.gen_range(1..n)) % n;
            (i, j)
        })
        .collect();
    (pairs, true)
}

fn tally(outcomes: &[Outcome]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for r in outcomes.iter().filter_map(|o| o.reason.clone()) {
        *m.entry(r).or_insert(0) += 1;
    }
    m
}

fn mean(total: f64, n: usize) -> f64 {
    if n == 0 { 0.0 } else { total / n as f64 }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    system: System,
    cfg: &EvalConfig,
    threshold: f64,
    ids: Vec<String>,
    enroll: Vec<f64>,
    genuine: Vec<Outcome>,
    impostor: Vec<Outcome>,
    sampled: bool,
) -> EvalReport {
    let false_rejects = genuine.iter().filter(|o| !o.accept).count();
    let false_accepts = impostor.iter().filter(|o| o.accept).count();
    let enc_total: f64 = enroll.iter().sum();
    let dec_total: f64 = genuine.iter().map(|o| o.seconds).sum();
    let trials = ids
        .into_iter()
        .zip(&enroll)
        .zip(&genuine)
        .map(|((id, &e), g)| TrialRow { id, enroll_time: e, extract_time: g.seconds, accept: g.accept as u8 })
        .collect();
    EvalReport {
        system,
        size: enroll.len(),
        seed: cfg.seed,
        noise: cfg.noise,
        threshold,
        far: mean(false_accepts as f64, impostor.len()),
        frr: mean(false_rejects as f64, genuine.len()),
        genuine_trials: genuine.len(),
        impostor_trials: impostor.len(),
        false_accepts,
        false_rejects,
        impostor_sampled: sampled,
        enc_total,
        enc_mean: mean(enc_total, enroll.len()),
        dec_total,
        dec_mean: mean(dec_total, genuine.len()),
        genuine_rejects: tally(&genuine),
        impostor_rejects: tally(&impostor),
        trials,
    }
}

fn keys_for(n: usize, seed: u64) -> Vec<String> {
    (0..n).map(|i| random_key_digits(&mut rng_for(seed, STREAM_KEYS, i as u64))).collect()
}

pub fn run_vault(population: &[MinutiaeTemplate], cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let n = population.len();
    if n < 2 {
        return Err(EvalError::PopulationTooSmall(n));
    }
    cfg.noise.validate()?;
    let keys = keys_for(n, cfg.seed);
    let enrolled: Vec<(VaultHelperData, f64)> = par::map_range(cfg.exec, n, |i| {
        let chunks = KeyChunks::from_key(&keys[i])?;
        let z = rng_for(cfg.seed, STREAM_KEYS, (n + i) as u64).gen();
        let start = Instant::now();
        let helper = lock_vault(&population[i], &chunks, z)?;
        Ok::<_, VaultError>((helper, start.elapsed().as_secs_f64()))
    })
    .into_iter()
    .collect::<Result<_, _>>()?;

    let genuine = par::map_range(cfg.exec, n, |i| {
        let mut rng = rng_for(cfg.seed, STREAM_NOISE, i as u64);
        let query = match perturb_minutiae(&population[i], &cfg.noise, &mut rng) {
            Ok(q) => q,
            Err(e) => return Outcome { accept: false, reason: Some(vault_reason(&e).into()), seconds: 0.0 },
        };
        let start = Instant::now();
        let result = unlock_vault(&query, &enrolled[i].0, cfg.vault);
        let seconds = start.elapsed().as_secs_f64();
        match result {
            Ok(chunks) if chunks.to_digits() == keys[i] => Outcome { accept: true, reason: None, seconds },
            Ok(_) => Outcome { accept: false, reason: Some("wrong_key".into()), seconds },
            Err(e) => Outcome { accept: false, reason: Some(vault_reason(&e).into()), seconds },
        }
    });

    let (pairs, sampled) = impostor_pairs(n, cfg.max_impostor_pairs, cfg.seed);
    let impostor = par::map_slice(cfg.exec, &pairs, |&(q, s)| {
        let start = Instant::now();
        let result = unlock_vault(&population[q], &enrolled[s].0, cfg.vault);
        let seconds = start.elapsed().as_secs_f64();
        match result {
            Ok(_) => Outcome { accept: true, reason: None, seconds },
            Err(e) => Outcome { accept: false, reason: Some(vault_reason(&e).into()), seconds },
        }
    });

    let ids = (0..n).map(|i| format!("F{i:04}")).collect();
    let enroll = enrolled.iter().map(|(_, t)| *t).collect();
    Ok(assemble(System::Vault, cfg, cfg.vault.threshold, ids, enroll, genuine, impostor, sampled))
}

fn enroll_irises(population: &[IrisCode], keys: &[String], cfg: &EvalConfig) -> Result<Vec<(Commitment, f64)>, EvalError> {
    Ok(par::map_range(cfg.exec, population.len(), |i| {
        let key = KeyBits::from_digits(&keys[i]);
        let start = Instant::now();
        let c = commit(&population[i], &key, cfg.commitment, 0)?;
        Ok::<_, CommitmentError>((c, start.elapsed().as_secs_f64()))
    })
    .into_iter()
    .collect::<Result<_, _>>()?)
}

pub fn run_commitment(population: &[IrisCode], cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let n = population.len();
    if n < 2 {
        return Err(EvalError::PopulationTooSmall(n));
    }
    cfg.noise.validate()?;
    let keys = keys_for(n, cfg.seed);
    let enrolled = enroll_irises(population, &keys, cfg)?;

    let genuine = par::map_range(cfg.exec, n, |i| {
        let query = perturb_iris(&population[i], &cfg.noise, &mut rng_for(cfg.seed, STREAM_NOISE, i as u64));
        let start = Instant::now();
        let result = decommit(&query, &enrolled[i].0);
        let seconds = start.elapsed().as_secs_f64();
        match result {
            Ok(k) if k == KeyBits::from_digits(&keys[i]) => Outcome { accept: true, reason: None, seconds },
            Ok(_) => Outcome { accept: false, reason: Some("wrong_key".into()), seconds },
            Err(e) => Outcome { accept: false, reason: Some(commitment_reason(&e)), seconds },
        }
    });

    let (pairs, sampled) = impostor_pairs(n, cfg.max_impostor_pairs, cfg.seed);
    let impostor = par::map_slice(cfg.exec, &pairs, |&(q, s)| {
        let start = Instant::now();
        let result = decommit(&population[q], &enrolled[s].0);
        let seconds = start.elapsed().as_secs_f64();
        match result {
            Ok(_) => Outcome { accept: true, reason: None, seconds },
            Err(e) => Outcome { accept: false, reason: Some(commitment_reason(&e)), seconds },
        }
    });

    let ids = population.iter().map(|c| c.id.clone()).collect();
    let enroll = enrolled.iter().map(|(_, t)| *t).collect();
    Ok(assemble(System::Commitment, cfg, cfg.commitment.threshold, ids, enroll, genuine, impostor, sampled))
}

pub fn run_far_frr(population: &Population, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    match population {
        Population::Fingerprint(p) => run_vault(p, cfg),
        Population::Iris(p) => run_commitment(p, cfg),
    }
}

/// Commitment FRR at each flip probability. Trial `t` uses template
/// `t mod n` and the same noise stream at every `p`.
pub fn frr_curve(population: &[IrisCode], ps: &[f64], trials: usize, cfg: &EvalConfig) -> Result<Vec<(f64, f64)>, EvalError> {
    let n = population.len();
    if n == 0 {
        return Err(EvalError::PopulationTooSmall(0));
    }
    let keys = keys_for(n, cfg.seed);
    let enrolled = enroll_irises(population, &keys, cfg)?;
    ps.iter()
        .map(|&p| {
            let noise = NoiseModel::iris(p);
            noise.validate()?;
            let rejects = par::count_range(cfg.exec, trials, |t| {
                let i = t % n;
                let query = perturb_iris(&population[i], &noise, &mut rng_for(cfg.seed, STREAM_NOISE, t as u64));
                decommit(&query, &enrolled[i].0).map_or(true, |k| k != KeyBits::from_digits(&keys[i]))
            });
            Ok((p, rejects as f64 / trials as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commitment::hamming_distance;

    fn cfg(seed: u64) -> EvalConfig {
        EvalConfig { seed, ..EvalConfig::default() }
    }

    #[test]
    fn populations_are_seeded() {
        let a = gen_population(BiometricKind::Iris, 20, 2048, 7).unwrap();
        assert_eq!(a, gen_population(BiometricKind::Iris, 20, 2048, 7).unwrap());
        assert_ne!(a, gen_population(BiometricKind::Iris, 20, 2048, 8).unwrap());
        assert!(matches!(gen_population(BiometricKind::Iris, 1, 2048, 7), Err(EvalError::PopulationTooSmall(1))));
    }

    #[test]
    fn fingerprint_sizes_within_bounds() {
        let Population::Fingerprint(fp) = gen_population(BiometricKind::Fingerprint, 200, 0, 7).unwrap() else { unreachable!() };
        assert!(fp.iter().all(|t| (MIN_MINUTIAE..=MAX_MINUTIAE).contains(&t.len())));
        assert!(fp.iter().flat_map(|t| t.points()).all(|p| p.x < GRID && p.y < GRID));
    }

    #[test]
    fn iris_pairs_are_half_apart() {
        let Population::Iris(ir) = gen_population(BiometricKind::Iris, 50, 2048, 3).unwrap() else { unreachable!() };
        let mut total = 0.0;
        let mut count = 0;
        for i in 0..ir.len() {
            for j in i + 1..ir.len() {
                total += hamming_distance(&ir[i].bits, &ir[j].bits).unwrap() as f64 / 2048.0;
                count += 1;
            }
        }
        assert!((total / count as f64 - 0.5).abs() < 0.04);
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let fp = random_fingerprint(&mut rng);
        assert_eq!(perturb_minutiae(&fp, &NoiseModel::NONE, &mut rng).unwrap(), fp);
        let ir = random_iris(&mut rng, "x", 2048);
        assert_eq!(perturb_iris(&ir, &NoiseModel::NONE, &mut rng), ir);
    }

    #[test]
    fn iris_flip_count_within_three_sigma() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let ir = random_iris(&mut rng, "x", 2048);
        let q = perturb_iris(&ir, &NoiseModel::iris(0.1), &mut rng);
        let flips = hamming_distance(&ir.bits, &q.bits).unwrap() as f64;
        let sigma = (2048.0f64 * 0.1 * 0.9).sqrt();
        assert!((flips - 204.8).abs() <= 3.0 * sigma, "{flips}");
    }

    #[test]
    fn flip_sets_nest_across_p() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let ir = random_iris(&mut rng, "x", 2048);
        let lo = perturb_iris(&ir, &NoiseModel::iris(0.05), &mut ChaCha20Rng::seed_from_u64(5));
        let hi = perturb_iris(&ir, &NoiseModel::iris(0.2), &mut ChaCha20Rng::seed_from_u64(5));
        for k in 0..2048 {
            if lo.bits[k] != ir.bits[k] {
                assert_ne!(hi.bits[k], ir.bits[k]);
            }
        }
    }

    #[test]
    fn drop_rate_survivors_within_bounds() {
        let pts: Vec<Minutia> = (0..40).map(|i| Minutia::new(i * 10, i * 10, 0, MinutiaKind::Ending)).collect();
        let t = MinutiaeTemplate::new(pts).unwrap();
        let noise = NoiseModel { drop_rate: 0.1, ..NoiseModel::NONE };
        let sigma = (40.0f64 * 0.1 * 0.9).sqrt();
        let mut total = 0.0;
        for s in 0..200 {
            let q = perturb_minutiae(&t, &noise, &mut ChaCha20Rng::seed_from_u64(s)).unwrap();
            assert!((q.len() as f64 - 36.0).abs() <= 4.0 * sigma);
            total += q.len() as f64;
        }
        assert!((total / 200.0 - 36.0).abs() < 0.5);
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseModel::iris(0.6).validate().is_err());
        assert!(NoiseModel { drop_rate: 1.5, ..NoiseModel::NONE }.validate().is_err());
        assert!(NoiseModel { xy_sigma: -1.0, ..NoiseModel::NONE }.validate().is_err());
        let parsed: NoiseModel = serde_json::from_str(r#"{"flip_probability":0.1}"#).unwrap();
        assert_eq!(parsed, NoiseModel::iris(0.1));
    }

    #[test]
    fn small_vault_run() {
        let Population::Fingerprint(fp) = gen_population(BiometricKind::Fingerprint, 12, 0, 4).unwrap() else { unreachable!() };
        let r = run_vault(&fp, &cfg(4)).unwrap();
        assert_eq!((r.far, r.frr), (0.0, 0.0));
        assert_eq!(r.impostor_trials, 12 * 11);
        assert!(!r.impostor_sampled);
        assert_eq!(r.trials.len(), 12);
        let again = run_vault(&fp, &EvalConfig { exec: Execution::Sequential, ..cfg(4) }).unwrap();
        assert_eq!(again.without_timing(), r.without_timing());
    }

    #[test]
    fn small_commitment_run_and_saturation() {
        let Population::Iris(ir) = gen_population(BiometricKind::Iris, 10, 2048, 5).unwrap() else { unreachable!() };
        let r = run_commitment(&ir, &cfg(5)).unwrap();
        assert_eq!((r.far, r.frr), (0.0, 0.0));
        let noisy = run_commitment(&ir, &EvalConfig { noise: NoiseModel::iris(0.35), ..cfg(5) }).unwrap();
        assert_eq!(noisy.frr, 1.0);
        assert!(r.to_csv().starts_with("id,enroll_time,extract_time,accept\nI0000,"));
    }

    #[test]
    fn sampling_kicks_in_above_limit() {
        let (pairs, sampled) = impostor_pairs(10, 20, 1);
        assert!(sampled);
        assert_eq!(pairs.len(), 20);
        assert!(pairs.iter().all(|(i, j)| i != j));
    }
}
