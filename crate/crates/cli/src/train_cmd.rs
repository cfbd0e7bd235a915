//! The `train` subcommand.

use crate::{log, parse_snr, ratio_to_c_last, TrainArgs};
use jscc_core::channel::ChannelConfig;
use jscc_core::error::{Error, Result};
use jscc_core::models::{
    Checkpoint, Enhancer, EnhancerConfig, Order, TrainMeta, TransNet, TransNetConfig,
};
use jscc_core::signal::{build_dataset, build_dataset_from_dirs, Dataset, DatasetSpec};
use jscc_core::training::{
    train_enhancer_separate, train_joint, train_transnet_separate, TrainConfig, TrainReport,
};
use std::path::Path;

pub fn load_or_build_dataset(
    data: &str,
    count: usize,
    duration_s: f64,
    master_seed: u64,
) -> Result<Dataset> {
    let spec = DatasetSpec {
        count,
        duration_s,
        master_seed,
        ..DatasetSpec::default()
    };
    if data == "synth" {
        build_dataset(&spec)
    } else {
        let root = Path::new(data);
        build_dataset_from_dirs(&root.join("clean"), &root.join("noise"), &spec)
    }
}

fn meta(report: &TrainReport, seed: u64) -> TrainMeta {
    TrainMeta {
        epochs: report.epochs_run as u32,
        best_val_loss: report.best_val_loss,
        seed,
    }
}

fn finish(report: &TrainReport, what: &str) -> Result<i32> {
    if report.diverged {
        log::error(format!(
            "{what} diverged: {} (last good checkpoint written)",
            report.divergence_detail.as_deref().unwrap_or("loss went non-finite")
        ));
        return Ok(3);
    }
    log::info(format!(
        "{what}: {} epochs, best val loss {:.6} at epoch {}",
        report.epochs_run, report.best_val_loss, report.best_epoch
    ));
    Ok(0)
}

pub fn run(args: &TrainArgs) -> Result<i32> {
    let snr_w = parse_snr(&args.snr_w)?;
    let c_last = ratio_to_c_last(args.ratio)?;
    let order = Order::parse(&args.order)?;
    std::fs::create_dir_all(&args.out)?;
    let dataset = load_or_build_dataset(&args.data, args.count, args.duration_s, args.seed)?;
    log::info(format!(
        "dataset: {} train / {} val / {} test utterances of {:.2} s",
        dataset.train.len(),
        dataset.val.len(),
        dataset.test.len(),
        args.duration_s
    ));

    let base_cfg = |mut cfg: TrainConfig, log_name: &str| -> TrainConfig {
        cfg.seed = args.seed;
        cfg.max_epochs = args.max_epochs;
        cfg.quiet = args.quiet;
        cfg.log_path = Some(args.out.join(log_name));
        if let Some(lr) = args.lr {
            cfg.lr = lr;
        }
        if let Some(bs) = args.batch_size {
            cfg.batch_size = bs;
        }
        cfg
    };

    match args.method.as_str() {
        "separate-enhancer" => {
            let enh_cfg = EnhancerConfig::desk_default(args.latency_ms)?;
            let cfg = base_cfg(TrainConfig::separate_enhancer(), "train.log");
            let (model, report) = train_enhancer_separate(&dataset, &enh_cfg, &cfg)?;
            model
                .to_checkpoint(&meta(&report, args.seed))
                .save(args.out.join("enhancer.ckpt"))?;
            finish(&report, "separate-enhancer")
        }
        "separate-transnet" => {
            let tn_cfg = TransNetConfig::desk_default(args.latency_ms, c_last)?;
            let chan = ChannelConfig::new(snr_w, args.seed);
            let cfg = base_cfg(TrainConfig::separate_transnet(), "train.log");
            let (model, report) = train_transnet_separate(&dataset, &tn_cfg, &chan, &cfg)?;
            model
                .to_checkpoint(&meta(&report, args.seed))
                .save(args.out.join("transnet.ckpt"))?;
            finish(&report, "separate-transnet")
        }
        "joint" => {
            let enh_init = match &args.enhancer {
                Some(path) => Enhancer::from_checkpoint(&Checkpoint::load(path)?)?,
                None => {
                    log::info("no --enhancer given; training the enhancer first");
                    let enh_cfg = EnhancerConfig::desk_default(args.latency_ms)?;
                    let cfg = base_cfg(TrainConfig::separate_enhancer(), "pretrain.log");
                    let (model, report) = train_enhancer_separate(&dataset, &enh_cfg, &cfg)?;
                    if report.diverged {
                        log::error("enhancer pre-training diverged");
                        return Ok(3);
                    }
                    model
                }
            };
            if enh_init.cfg.window != jscc_core::models::frame_len_for_latency(args.latency_ms)? {
                return Err(Error::config(format!(
                    "enhancer checkpoint window {} does not match --latency-ms {}",
                    enh_init.cfg.window, args.latency_ms
                )));
            }
            let tn_cfg = TransNetConfig::desk_default(args.latency_ms, c_last)?;
            let tn_init = match &args.transnet {
                Some(path) => Some(TransNet::from_checkpoint(&Checkpoint::load(path)?)?),
                None => None,
            };
            let chan = ChannelConfig::new(snr_w, args.seed);
            let cfg = base_cfg(TrainConfig::joint(), "train.log");
            let (system, report) = train_joint(&dataset, enh_init, tn_init, &tn_cfg, order, &chan, &cfg)?;
            let m = meta(&report, args.seed);
            system
                .enhancer
                .to_checkpoint(&m)
                .save(args.out.join("enhancer.ckpt"))?;
            system
                .transnet
                .to_checkpoint(&m)
                .save(args.out.join("transnet.ckpt"))?;
            finish(&report, "joint")
        }
        other => Err(Error::usage(format!(
            "unknown method '{other}': use separate-enhancer, separate-transnet or joint"
        ))),
    }
}
