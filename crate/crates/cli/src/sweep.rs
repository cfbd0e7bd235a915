//! The `sweep` subcommand: reproduce the experiment matrix from a plain-text
//! spec, training missing checkpoints on demand and evaluating every cell.
//!
//! Spec format: `[section]` headers with `key = value` lines; list values are
//! space- or comma-separated. See README for a complete example.

use crate::{log, ratio_to_c_last, SweepArgs};
use jscc_core::channel::ChannelConfig;
use jscc_core::error::{Error, Result};
use jscc_core::models::{
    Checkpoint, Enhancer, EnhancerConfig, Order, System, TrainMeta, TransNet, TransNetConfig,
};
use jscc_core::rng::derive_seed;
use jscc_core::signal::{build_dataset, Dataset, DatasetSpec};
use jscc_core::training::{
    evaluate, train_enhancer_separate, train_joint, train_transnet_separate, Pipeline, TrainConfig,
};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    NoisyBaseline,
    EnhanceOnly,
    TransmitOnly,
    Separate,
    Joint,
}

impl Method {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "noisy-baseline" => Ok(Method::NoisyBaseline),
            "enhance-only" => Ok(Method::EnhanceOnly),
            "transmit-only" => Ok(Method::TransmitOnly),
            "separate" => Ok(Method::Separate),
            "joint" => Ok(Method::Joint),
            other => Err(Error::format(format!(
                "unknown method '{other}': noisy-baseline | enhance-only | transmit-only | separate | joint"
            ))),
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            Method::NoisyBaseline => "noisy-baseline",
            Method::EnhanceOnly => "enhance-only",
            Method::TransmitOnly => "transmit-only",
            Method::Separate => "separate",
            Method::Joint => "joint",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    // [data]
    pub count: usize,
    pub duration_s: f64,
    pub master_seed: u64,
    // [train]
    pub max_epochs: usize,
    pub train_snr_w_db: f64,
    pub train_missing: bool,
    // [grid]
    pub snr_a_db: Vec<f64>,
    pub snr_w_db: Vec<f64>,
    pub ratio: Vec<f64>,
    pub latency_ms: Vec<u32>,
    pub order: Vec<Order>,
    pub method: Vec<Method>,
    pub seeds: Vec<u64>,
    // [output]
    pub dir: PathBuf,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            count: 24,
            duration_s: 1.5,
            master_seed: 0,
            max_epochs: 40,
            train_snr_w_db: 10.0,
            train_missing: true,
            snr_a_db: vec![-5.0, 0.0, 5.0, 12.0],
            snr_w_db: vec![10.0],
            ratio: vec![1.0],
            latency_ms: vec![3],
            order: vec![Order::EnhanceTransmit],
            method: vec![Method::NoisyBaseline, Method::Separate, Method::Joint],
            seeds: vec![0],
            dir: PathBuf::from("sweep-out"),
        }
    }
}

fn parse_snr_value(v: &str) -> Result<f64> {
    match v {
        "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
        other => other
            .parse()
            .map_err(|_| Error::format(format!("invalid SNR value '{other}'"))),
    }
}

pub fn parse_spec(text: &str) -> Result<SweepSpec> {
    let mut spec = SweepSpec::default();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::format(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let values: Vec<&str> = value
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|v| !v.is_empty())
            .collect();
        let one = || -> Result<&str> {
            if values.len() == 1 {
                Ok(values[0])
            } else {
                Err(Error::format(format!("key '{key}' expects one value")))
            }
        };
        match (section.as_str(), key) {
            ("data", "count") => spec.count = one()?.parse().map_err(|_| Error::format("bad count"))?,
            ("data", "duration_s") => {
                spec.duration_s = one()?.parse().map_err(|_| Error::format("bad duration_s"))?
            }
            ("data", "master_seed") => {
                spec.master_seed = one()?.parse().map_err(|_| Error::format("bad master_seed"))?
            }
            ("train", "max_epochs") => {
                spec.max_epochs = one()?.parse().map_err(|_| Error::format("bad max_epochs"))?
            }
            ("train", "train_snr_w_db") => spec.train_snr_w_db = parse_snr_value(one()?)?,
            ("train", "train_missing") => {
                spec.train_missing = one()? == "true";
            }
            ("grid", "snr_a_db") => {
                spec.snr_a_db = values.iter().map(|v| parse_snr_value(v)).collect::<Result<_>>()?
            }
            ("grid", "snr_w_db") => {
                spec.snr_w_db = values.iter().map(|v| parse_snr_value(v)).collect::<Result<_>>()?
            }
            ("grid", "ratio") => {
                spec.ratio = values
                    .iter()
                    .map(|v| v.parse().map_err(|_| Error::format("bad ratio")))
                    .collect::<Result<_>>()?
            }
            ("grid", "latency_ms") => {
                spec.latency_ms = values
                    .iter()
                    .map(|v| v.parse().map_err(|_| Error::format("bad latency")))
                    .collect::<Result<_>>()?
            }
            ("grid", "order") => {
                spec.order = values.iter().map(|v| Order::parse(v)).collect::<Result<_>>()?
            }
            ("grid", "method") => {
                spec.method = values.iter().map(|v| Method::parse(v)).collect::<Result<_>>()?
            }
            ("grid", "seeds") => {
                spec.seeds = values
                    .iter()
                    .map(|v| v.parse().map_err(|_| Error::format("bad seed")))
                    .collect::<Result<_>>()?
            }
            ("output", "dir") => spec.dir = PathBuf::from(value),
            (sec, key) => {
                return Err(Error::format(format!(
                    "unknown spec entry [{sec}] {key}"
                )))
            }
        }
    }
    for r in &spec.ratio {
        ratio_to_c_last(*r).map_err(|e| Error::format(e.to_string()))?;
    }
    if spec.snr_a_db.is_empty() || spec.seeds.is_empty() || spec.method.is_empty() {
        return Err(Error::format("grid axes must be non-empty"));
    }
    Ok(spec)
}

// ── Cell enumeration ────────────────────────────────────────────────

#[derive(Clone, Debug)]
struct Cell {
    snr_a_db: f64,
    snr_w_db: f64,
    ratio: f64,
    latency_ms: u32,
    order: Order,
    method: Method,
    seed: u64,
}

fn cells(spec: &SweepSpec) -> Vec<Cell> {
    let mut out = Vec::new();
    for &method in &spec.method {
        for &latency_ms in &spec.latency_ms {
            for &ratio in &spec.ratio {
                for &order in &spec.order {
                    for &snr_w_db in &spec.snr_w_db {
                        for &snr_a_db in &spec.snr_a_db {
                            for &seed in &spec.seeds {
                                out.push(Cell {
                                    snr_a_db,
                                    snr_w_db,
                                    ratio,
                                    latency_ms,
                                    order,
                                    method,
                                    seed,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

// ── Checkpoint store ────────────────────────────────────────────────

fn fmt_f(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum CkptKey {
    Enh { latency: u32, seed: u64 },
    Tn { latency: u32, c_last: usize, seed: u64 },
    JointPair { latency: u32, c_last: usize, order: &'static str, seed: u64 },
}

impl CkptKey {
    fn file_stem(&self) -> String {
        match self {
            CkptKey::Enh { latency, seed } => format!("enh_l{latency}_s{seed}"),
            CkptKey::Tn {
                latency,
                c_last,
                seed,
            } => format!("tn_l{latency}_c{c_last}_s{seed}"),
            CkptKey::JointPair {
                latency,
                c_last,
                order,
                seed,
            } => format!("joint_l{latency}_c{c_last}_{order}_s{seed}"),
        }
    }

    /// Paths of the checkpoint files this key produces.
    fn paths(&self, dir: &Path) -> Vec<PathBuf> {
        match self {
            CkptKey::JointPair { .. } => vec![
                dir.join(format!("{}_enh.ckpt", self.file_stem())),
                dir.join(format!("{}_tn.ckpt", self.file_stem())),
            ],
            _ => vec![dir.join(format!("{}.ckpt", self.file_stem()))],
        }
    }
}

fn keys_for_cell(cell: &Cell) -> Vec<CkptKey> {
    let c_last = ratio_to_c_last(cell.ratio).expect("validated ratio");
    let enh = CkptKey::Enh {
        latency: cell.latency_ms,
        seed: cell.seed,
    };
    let tn = CkptKey::Tn {
        latency: cell.latency_ms,
        c_last,
        seed: cell.seed,
    };
    match cell.method {
        Method::NoisyBaseline => vec![],
        Method::EnhanceOnly => vec![enh],
        Method::TransmitOnly => vec![tn],
        Method::Separate => vec![enh, tn],
        Method::Joint => vec![
            enh.clone(),
            tn.clone(),
            CkptKey::JointPair {
                latency: cell.latency_ms,
                c_last,
                order: cell.order.as_str(),
                seed: cell.seed,
            },
        ],
    }
}

struct SweepContext {
    spec: SweepSpec,
    ckpt_dir: PathBuf,
    datasets: BTreeMap<u64, Dataset>,
}

impl SweepContext {
    fn dataset_for(&self, seed: u64) -> &Dataset {
        &self.datasets[&seed]
    }

    fn train_cfg(&self, base: TrainConfig, seed: u64, log_stem: &str) -> TrainConfig {
        let mut cfg = base;
        cfg.seed = seed;
        cfg.max_epochs = self.spec.max_epochs;
        cfg.quiet = true;
        cfg.log_path = Some(self.ckpt_dir.join(format!("{log_stem}.log")));
        cfg
    }

    fn train_key(&self, key: &CkptKey) -> Result<()> {
        let paths = key.paths(&self.ckpt_dir);
        match key {
            CkptKey::Enh { latency, seed } => {
                let enh_cfg = EnhancerConfig::desk_default(*latency)?;
                let cfg = self.train_cfg(TrainConfig::separate_enhancer(), *seed, &key.file_stem());
                let ds = self.dataset_for(*seed);
                let (model, report) = train_enhancer_separate(ds, &enh_cfg, &cfg)?;
                if report.diverged {
                    return Err(Error::Divergence(format!("{} diverged", key.file_stem())));
                }
                model
                    .to_checkpoint(&TrainMeta {
                        epochs: report.epochs_run as u32,
                        best_val_loss: report.best_val_loss,
                        seed: *seed,
                    })
                    .save(&paths[0])
            }
            CkptKey::Tn {
                latency,
                c_last,
                seed,
            } => {
                let tn_cfg = TransNetConfig::desk_default(*latency, *c_last)?;
                let chan = ChannelConfig::new(self.spec.train_snr_w_db, *seed);
                let cfg = self.train_cfg(TrainConfig::separate_transnet(), *seed, &key.file_stem());
                let ds = self.dataset_for(*seed);
                let (model, report) = train_transnet_separate(ds, &tn_cfg, &chan, &cfg)?;
                if report.diverged {
                    return Err(Error::Divergence(format!("{} diverged", key.file_stem())));
                }
                model
                    .to_checkpoint(&TrainMeta {
                        epochs: report.epochs_run as u32,
                        best_val_loss: report.best_val_loss,
                        seed: *seed,
                    })
                    .save(&paths[0])
            }
            CkptKey::JointPair {
                latency,
                c_last,
                order,
                seed,
            } => {
                let enh_key = CkptKey::Enh {
                    latency: *latency,
                    seed: *seed,
                };
                let enh =
                    Enhancer::from_checkpoint(&Checkpoint::load(&enh_key.paths(&self.ckpt_dir)[0])?)?;
                let tn_key = CkptKey::Tn {
                    latency: *latency,
                    c_last: *c_last,
                    seed: *seed,
                };
                let tn =
                    TransNet::from_checkpoint(&Checkpoint::load(&tn_key.paths(&self.ckpt_dir)[0])?)?;
                let tn_cfg = TransNetConfig::desk_default(*latency, *c_last)?;
                let chan = ChannelConfig::new(self.spec.train_snr_w_db, *seed);
                let cfg = self.train_cfg(TrainConfig::joint(), *seed, &key.file_stem());
                let ds = self.dataset_for(*seed);
                let (system, report) =
                    train_joint(ds, enh, Some(tn), &tn_cfg, Order::parse(order)?, &chan, &cfg)?;
                if report.diverged {
                    return Err(Error::Divergence(format!("{} diverged", key.file_stem())));
                }
                let meta = TrainMeta {
                    epochs: report.epochs_run as u32,
                    best_val_loss: report.best_val_loss,
                    seed: *seed,
                };
                system.enhancer.to_checkpoint(&meta).save(&paths[0])?;
                system.transnet.to_checkpoint(&meta).save(&paths[1])
            }
        }
    }
}

// ── Rows ────────────────────────────────────────────────────────────

#[derive(Clone, Debug)]
struct Row {
    kind: &'static str, // "cell" | "aggregate"
    snr_a: String,
    snr_w: String,
    ratio: String,
    latency_ms: String,
    order: String,
    method: String,
    seed: String,
    n_items: usize,
    si_sdr_mean: Option<f64>,
    si_sdr_std: Option<f64>,
    estoi_mean: Option<f64>,
    estoi_std: Option<f64>,
    mse_mean: Option<f64>,
}

fn mean_std(vals: &[f64]) -> (Option<f64>, Option<f64>) {
    if vals.is_empty() {
        return (None, None);
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
    (Some(mean), Some(var.sqrt()))
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

const CSV_COLUMNS: &str = "row_kind,snr_a_db,snr_w_db,ratio,latency_ms,order,method,seed,n_items,si_sdr_mean_db,si_sdr_std_db,estoi_mean,estoi_std,mse_mean,pesq";

impl Row {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},",
            self.kind,
            self.snr_a,
            self.snr_w,
            self.ratio,
            self.latency_ms,
            self.order,
            self.method,
            self.seed,
            self.n_items,
            opt(self.si_sdr_mean),
            opt(self.si_sdr_std),
            opt(self.estoi_mean),
            opt(self.estoi_std),
            opt(self.mse_mean),
        )
    }
}

fn evaluate_cell(ctx: &SweepContext, cell: &Cell) -> Result<Row> {
    let ds = ctx.dataset_for(cell.seed);
    let mut items = Vec::with_capacity(ds.test.len());
    for item in &ds.test {
        items.push(item.remixed_at(cell.snr_a_db)?);
    }
    // Channel noise pairs up across methods: the seed depends only on the
    // data seed and the channel condition.
    let chan = ChannelConfig::new(
        cell.snr_w_db,
        derive_seed(
            derive_seed(ctx.spec.master_seed, cell.seed),
            cell.snr_w_db.to_bits(),
        ),
    );

    let c_last = ratio_to_c_last(cell.ratio)?;
    let load_enh = |key: &CkptKey, idx: usize| -> Result<Enhancer> {
        Enhancer::from_checkpoint(&Checkpoint::load(&key.paths(&ctx.ckpt_dir)[idx])?)
    };
    let load_tn = |key: &CkptKey, idx: usize| -> Result<TransNet> {
        TransNet::from_checkpoint(&Checkpoint::load(&key.paths(&ctx.ckpt_dir)[idx])?)
    };

    let reports = match cell.method {
        Method::NoisyBaseline => evaluate(&Pipeline::Passthrough, &items, &chan)?,
        Method::EnhanceOnly => {
            let enh = load_enh(
                &CkptKey::Enh {
                    latency: cell.latency_ms,
                    seed: cell.seed,
                },
                0,
            )?;
            evaluate(&Pipeline::EnhanceOnly(&enh), &items, &chan)?
        }
        Method::TransmitOnly => {
            let tn = load_tn(
                &CkptKey::Tn {
                    latency: cell.latency_ms,
                    c_last,
                    seed: cell.seed,
                },
                0,
            )?;
            evaluate(&Pipeline::TransmitOnly(&tn), &items, &chan)?
        }
        Method::Separate => {
            let enh = load_enh(
                &CkptKey::Enh {
                    latency: cell.latency_ms,
                    seed: cell.seed,
                },
                0,
            )?;
            let tn = load_tn(
                &CkptKey::Tn {
                    latency: cell.latency_ms,
                    c_last,
                    seed: cell.seed,
                },
                0,
            )?;
            let sys = System::new(enh, tn, cell.order)?;
            evaluate(&Pipeline::Full(&sys), &items, &chan)?
        }
        Method::Joint => {
            let key = CkptKey::JointPair {
                latency: cell.latency_ms,
                c_last,
                order: cell.order.as_str(),
                seed: cell.seed,
            };
            let enh = load_enh(&key, 0)?;
            let tn = load_tn(&key, 1)?;
            let sys = System::new(enh, tn, cell.order)?;
            evaluate(&Pipeline::Full(&sys), &items, &chan)?
        }
    };

    let si: Vec<f64> = reports.iter().filter_map(|r| r.si_sdr_db).collect();
    let es: Vec<f64> = reports.iter().filter_map(|r| r.estoi).collect();
    let ms: Vec<f64> = reports.iter().filter_map(|r| r.mse).collect();
    let (si_mean, si_std) = mean_std(&si);
    let (es_mean, es_std) = mean_std(&es);
    let (mse_mean, _) = mean_std(&ms);
    Ok(Row {
        kind: "cell",
        snr_a: fmt_f(cell.snr_a_db),
        snr_w: fmt_f(cell.snr_w_db),
        ratio: fmt_f(cell.ratio),
        latency_ms: format!("{}", cell.latency_ms),
        order: cell.order.as_str().to_string(),
        method: cell.method.as_str().to_string(),
        seed: format!("{}", cell.seed),
        n_items: reports.len(),
        si_sdr_mean: si_mean,
        si_sdr_std: si_std,
        estoi_mean: es_mean,
        estoi_std: es_std,
        mse_mean,
    })
}

/// Aggregate over SNR_a and seeds per (method, latency, ratio, order, snr_w),
/// in spec order.
fn aggregate_rows(spec: &SweepSpec, rows: &[Row]) -> Vec<Row> {
    let mut out = Vec::new();
    for &method in &spec.method {
        for &latency in &spec.latency_ms {
            for &ratio in &spec.ratio {
                for &order in &spec.order {
                    for &snr_w in &spec.snr_w_db {
                        let members: Vec<&Row> = rows
                            .iter()
                            .filter(|r| {
                                r.method == method.as_str()
                                    && r.latency_ms == format!("{latency}")
                                    && r.ratio == fmt_f(ratio)
                                    && r.order == order.as_str()
                                    && r.snr_w == fmt_f(snr_w)
                            })
                            .collect();
                        if members.is_empty() {
                            continue;
                        }
                        let si: Vec<f64> = members.iter().filter_map(|r| r.si_sdr_mean).collect();
                        let es: Vec<f64> = members.iter().filter_map(|r| r.estoi_mean).collect();
                        let ms: Vec<f64> = members.iter().filter_map(|r| r.mse_mean).collect();
                        let (si_mean, si_std) = mean_std(&si);
                        let (es_mean, es_std) = mean_std(&es);
                        let (mse_mean, _) = mean_std(&ms);
                        out.push(Row {
                            kind: "aggregate",
                            snr_a: "all".to_string(),
                            snr_w: fmt_f(snr_w),
                            ratio: fmt_f(ratio),
                            latency_ms: format!("{latency}"),
                            order: order.as_str().to_string(),
                            method: method.as_str().to_string(),
                            seed: "all".to_string(),
                            n_items: members.iter().map(|r| r.n_items).sum(),
                            si_sdr_mean: si_mean,
                            si_sdr_std: si_std,
                            estoi_mean: es_mean,
                            estoi_std: es_std,
                            mse_mean,
                        });
                    }
                }
            }
        }
    }
    out
}

fn print_summary(aggregates: &[Row]) {
    println!();
    println!("{:<16} {:<18} {:>8} {:>6} {:>7} | {:>11} {:>7} {:>5}",
        "method", "order", "latency", "R", "SNR_w", "SI-SDR (dB)", "ESTOI", "PESQ");
    for row in aggregates {
        println!(
            "{:<16} {:<18} {:>5} ms {:>6} {:>7} | {:>11} {:>7} {:>5}",
            row.method,
            row.order,
            row.latency_ms,
            row.ratio,
            row.snr_w,
            row.si_sdr_mean.map_or("-".into(), |v| format!("{v:.2}")),
            row.estoi_mean.map_or("-".into(), |v| format!("{v:.3}")),
            "-",
        );
    }
    println!();
}

pub fn run(args: &SweepArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.spec)?;
    let spec = parse_spec(&text)?;
    run_spec(&spec, args.jobs)
}

pub fn run_spec(spec: &SweepSpec, jobs: usize) -> Result<i32> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;

    std::fs::create_dir_all(&spec.dir)?;
    let ckpt_dir = spec.dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir)?;

    // Per-seed datasets, built once.
    let mut datasets = BTreeMap::new();
    for &seed in &spec.seeds {
        let ds = build_dataset(&DatasetSpec {
            count: spec.count,
            duration_s: spec.duration_s,
            master_seed: derive_seed(spec.master_seed, seed),
            ..DatasetSpec::default()
        })?;
        datasets.insert(seed, ds);
    }
    let ctx = SweepContext {
        spec: spec.clone(),
        ckpt_dir: ckpt_dir.clone(),
        datasets,
    };

    let all_cells = cells(spec);
    log::info(format!("sweep: {} cells", all_cells.len()));

    // Phase 1: collect distinct checkpoint keys and train anything missing.
    let mut needed: Vec<CkptKey> = Vec::new();
    for cell in &all_cells {
        for key in keys_for_cell(cell) {
            if !needed.contains(&key) {
                needed.push(key);
            }
        }
    }
    let missing: Vec<CkptKey> = needed
        .iter()
        .filter(|k| k.paths(&ckpt_dir).iter().any(|p| !p.exists()))
        .cloned()
        .collect();
    if !spec.train_missing && !missing.is_empty() {
        for key in &missing {
            log::error(format!("missing checkpoint: {}", key.file_stem()));
        }
        log::error(format!(
            "{} checkpoints missing and train_missing = false; skipping",
            missing.len()
        ));
        return Ok(1);
    }
    // Base models first (joint initialization reads the enhancer checkpoint
    // from disk), then joint pairs; each phase parallel over distinct keys.
    let (joint_keys, base_keys): (Vec<CkptKey>, Vec<CkptKey>) = missing
        .into_iter()
        .partition(|k| matches!(k, CkptKey::JointPair { .. }));
    for (phase, keys) in [("base", base_keys), ("joint", joint_keys)] {
        if keys.is_empty() {
            continue;
        }
        log::info(format!("training {} {phase} checkpoint(s)", keys.len()));
        let results: Vec<Result<()>> = pool.install(|| {
            keys.par_iter()
                .map(|key| {
                    log::info(format!("training {}", key.file_stem()));
                    ctx.train_key(key)
                })
                .collect()
        });
        for r in results {
            r?;
        }
    }

    // Phase 2: evaluate every cell in parallel, then emit in spec order.
    let rows: Vec<Result<Row>> = pool.install(|| {
        all_cells.par_iter().map(|cell| evaluate_cell(&ctx, cell)).collect()
    });
    let rows: Vec<Row> = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let aggregates = aggregate_rows(spec, &rows);

    let csv_path = spec.dir.join("results.csv");
    let mut f = std::fs::File::create(&csv_path)?;
    writeln!(
        f,
        "# jscc sweep results; cell rows hold one (cell, seed); aggregate rows average over snr_a and seeds; pesq is reserved and always empty"
    )?;
    writeln!(f, "{CSV_COLUMNS}")?;
    for row in rows.iter().chain(aggregates.iter()) {
        writeln!(f, "{}", row.csv())?;
    }
    log::info(format!(
        "wrote {} ({} cell rows, {} aggregate rows)",
        csv_path.display(),
        rows.len(),
        aggregates.len()
    ));
    print_summary(&aggregates);
    Ok(0)
}
