//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! The trend and capacity criteria train desk-scale models from scratch on
//! the synthetic corpus; they dominate the runtime. Every tolerance is
//! pinned in code here.

use jscc_core::channel::{empirical_snr_db, AwgnChannel, ChannelConfig};
use jscc_core::metrics::{estoi, si_sdr_db, SI_SDR_CLAMP_DB};
use jscc_core::models::{
    frame_len_for_latency, Enhancer, EnhancerConfig, Order, System, TransNet, TransNetConfig,
};
use jscc_core::rng::derive_seed;
use jscc_core::signal::{
    build_dataset, mix_at_snr, synth_noise, synth_speechlike, Dataset, DatasetSpec, NoiseKind,
    SplitFractions,
};
use jscc_core::tensor::Tensor;
use jscc_core::training::{
    evaluate, mean_si_sdr, train_enhancer_separate, train_joint, train_transnet_separate,
    Pipeline, TrainConfig,
};
use std::process::Command;
use std::time::Instant;

fn criterion(n: u32, name: &str, passed: bool, detail: &str) {
    println!(
        "criterion {n} ({name}): {} - {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {n} ({name}): {detail}");
}

#[test]
fn c1_gradient_correctness() {
    let t0 = Instant::now();
    let suite = jscc_core::verify::gradient_suite(0xACC1, 20).expect("gradient suite");
    let elapsed = t0.elapsed().as_secs_f64();
    let worst = suite
        .iter()
        .max_by(|a, b| a.max_rel_err.partial_cmp(&b.max_rel_err).unwrap())
        .unwrap();
    let ok = suite.iter().all(|r| r.max_rel_err < 1e-4) && elapsed < 60.0;
    criterion(
        1,
        "gradient correctness",
        ok,
        &format!(
            "{} kinds x 20 shapes, worst {} at {:.2e} (< 1e-4), {:.1} s (< 60 s)",
            suite.len(),
            worst.name,
            worst.max_rel_err,
            elapsed
        ),
    );
}

#[test]
fn c2_channel_fidelity() {
    let n = 1_000_000;
    let mut details = Vec::new();
    let mut ok = true;
    for snr in [0.0, 10.0, 20.0] {
        let z = Tensor::new(vec![1, n], vec![1.0; n]).unwrap();
        let mut ch = AwgnChannel::new(ChannelConfig::new(snr, 0xC2));
        let y = ch.transmit(&z, n);
        let got = empirical_snr_db(z.data(), y.data()).unwrap();
        ok &= (got - snr).abs() < 0.1;
        details.push(format!("{snr}->{got:.4} dB"));
    }
    criterion(
        2,
        "channel fidelity",
        ok,
        &format!("empirical SNR over 1e6 symbols within +-0.1 dB: {}", details.join(", ")),
    );
}

#[test]
fn c3_si_sdr_properties() {
    let r: Vec<f64> = (0..96).map(|i| ((i * 37 % 13) as f64) * 0.17 - 1.0).collect();
    let e: Vec<f64> = (0..96).map(|i| ((i * 53 % 17) as f64) * 0.13 - 1.1).collect();
    let base = si_sdr_db(&r, &e).unwrap();
    let mut ok = true;
    for alpha in [0.5, 2.0, 10.0] {
        let scaled: Vec<f64> = e.iter().map(|v| alpha * v).collect();
        ok &= (si_sdr_db(&r, &scaled).unwrap() - base).abs() < 1e-9;
    }
    ok &= si_sdr_db(&r, &r).unwrap() == SI_SDR_CLAMP_DB;
    ok &= si_sdr_db(&[1.0, 0.0], &[0.0, 1.0]).unwrap() == -SI_SDR_CLAMP_DB;
    criterion(
        3,
        "SI-SDR properties",
        ok,
        "scale invariance < 1e-9 dB for alpha in {0.5,2,10}; identity +100 dB; orthogonal -100 dB",
    );
}

#[test]
fn c4_estoi_properties() {
    let x = synth_speechlike(0xE5, 2.0);
    let same = estoi(&x, &x).unwrap();
    let mut scaled = x.clone();
    for v in scaled.samples.iter_mut() {
        *v *= 7.0;
    }
    let scale_inv = estoi(&x, &scaled).unwrap();
    let mut means = Vec::new();
    for snr in [-10.0, 0.0, 10.0] {
        let mut sum = 0.0;
        for seed in 0..10 {
            let s = synth_speechlike(seed, 2.0);
            let n = synth_noise(seed + 900, 2.0, NoiseKind::White);
            sum += estoi(&s, &mix_at_snr(&s, &n, snr).unwrap()).unwrap();
        }
        means.push(sum / 10.0);
    }
    let ok = (same - 1.0).abs() < 1e-6
        && (scale_inv - 1.0).abs() < 1e-6
        && means[0] < means[1]
        && means[1] < means[2];
    criterion(
        4,
        "ESTOI properties",
        ok,
        &format!(
            "estoi(x,x)={same:.8}; scale-invariant; monotone means {:.4} < {:.4} < {:.4} over {{-10,0,10}} dB x 10 seeds",
            means[0], means[1], means[2]
        ),
    );
}

fn probe_system(seed: u64, latency: u32, c_last: usize, order: Order) -> System {
    let enh = Enhancer::new(
        EnhancerConfig {
            window: frame_len_for_latency(latency).unwrap(),
            basis: 12,
            bottleneck: 6,
            hidden: 8,
            kernel: 3,
            blocks: 2,
            repeats: 1,
            eps: 1e-8,
        },
        seed,
    )
    .unwrap();
    let tn = TransNet::new(
        TransNetConfig {
            frame_len: frame_len_for_latency(latency).unwrap(),
            widths: [3, 4, 6, 6],
            c_last,
            kernel_boundary: 5,
            kernel_residual: 3,
            kernel_stride: 4,
            dilations: [1, 3, 9],
            bias: true,
            eps: 1e-8,
        },
        seed + 1,
    )
    .unwrap();
    System::new(enh, tn, order).unwrap()
}

#[test]
fn c5_latency_and_causality_contract() {
    // Algorithmic latency is exactly one frame for each latency config.
    let mut ok = true;
    let mut details = Vec::new();
    for (latency, expect) in [(3u32, 48usize), (5, 80), (9, 144)] {
        let sys = probe_system(5, latency, 4, Order::EnhanceTransmit);
        let rep =
            jscc_core::streaming::latency_report(&sys, ChannelConfig::new(10.0, 1), 20).unwrap();
        ok &= rep.latency_samples == expect;
        ok &= (rep.latency_ms - expect as f64 / 16.0).abs() < 1e-12;
        details.push(format!("{latency}ms->{} samples", rep.latency_samples));

        // Future-perturbation probe, bit-exact.
        let n = sys.frame_len();
        let frames = 5;
        let mut gs = jscc_core::rng::GaussianSource::new(derive_seed(9, latency as u64));
        let y: Vec<f64> = (0..n * frames).map(|_| gs.next() * 0.2).collect();
        let cfg = ChannelConfig::noiseless(0);
        let mut chan = AwgnChannel::new(cfg);
        let base = sys.run(&y, &mut chan).unwrap();
        for &t0 in &[n / 2, 2 * n + 5, 3 * n - 1] {
            let mut cut = y.clone();
            for v in cut.iter_mut().skip(t0 + 1) {
                *v = -*v + 0.3;
            }
            let mut chan = AwgnChannel::new(cfg);
            let probe = sys.run(&cut, &mut chan).unwrap();
            let frame_start = (t0 / n) * n;
            for j in 0..frame_start {
                if base[j].to_bits() != probe[j].to_bits() {
                    ok = false;
                    details.push(format!("leak at {latency}ms t0={t0} j={j}"));
                    break;
                }
            }
        }
    }
    // Streaming/batch equivalence over 10 random configs (bit-exact).
    let checks = jscc_core::verify::run_all(0xC5, None);
    let stream_check = checks
        .iter()
        .find(|c| c.name == "streaming_equivalence")
        .unwrap();
    ok &= stream_check.passed;
    criterion(
        5,
        "latency/causality contract",
        ok,
        &format!(
            "{}; future-perturbation bit-exact; {}",
            details.join(", "),
            stream_check.detail
        ),
    );
}

#[test]
fn c6_bandwidth_arithmetic() {
    let mut ok = true;
    let mut details = Vec::new();
    for (latency, n) in [(3u32, 48usize), (5, 80), (9, 144)] {
        for c_last in [2usize, 4, 8] {
            let cfg = TransNetConfig::desk_default(latency, c_last).unwrap();
            let model = TransNet::new(cfg, 1).unwrap();
            let frames = 4;
            let mut gs = jscc_core::rng::GaussianSource::new(derive_seed(11, (latency as u64) << 8 | c_last as u64));
            let x: Vec<f64> = (0..n * frames).map(|_| gs.next() * 0.2).collect();
            let z = model.encode(&x).unwrap();
            let per_frame = z.len() / frames;
            let expect = (cfg.ratio() * n as f64).round() as usize;
            ok &= per_frame == expect && per_frame == cfg.symbols_per_frame();
            details.push(format!("R={} n={n}: k={per_frame}", cfg.ratio()));
        }
    }
    criterion(6, "bandwidth arithmetic", ok, &details.join(", "));
}

// ── Trend reproduction ──────────────────────────────────────────────

const TREND_SEEDS: [u64; 3] = [0, 1, 2];
const TREND_COUNT: usize = 20;
const TREND_DURATION_S: f64 = 0.5;
const TREND_EPOCHS_SEP: usize = 45;
const TREND_EPOCHS_JOINT: usize = 30;
const TREND_BATCH: usize = 4;
const TREND_LR_TN: f64 = 1e-3;

struct SeedOutcome {
    seed: u64,
    separate_10: f64,
    joint_0: f64,
    joint_10: f64,
    joint_inf: f64,
    joint_quarter_10: f64,
    joint9_10: f64,
}

fn trend_dataset(seed: u64) -> Dataset {
    build_dataset(&DatasetSpec {
        count: TREND_COUNT,
        duration_s: TREND_DURATION_S,
        master_seed: derive_seed(0xACCE, seed),
        ..DatasetSpec::default()
    })
    .unwrap()
}

fn sep_cfg(base: TrainConfig, seed: u64, lr: Option<f64>) -> TrainConfig {
    let mut cfg = base;
    cfg.seed = seed;
    cfg.batch_size = TREND_BATCH;
    cfg.max_epochs = TREND_EPOCHS_SEP;
    cfg.quiet = true;
    if let Some(lr) = lr {
        cfg.lr = lr;
    }
    cfg
}

fn run_trend_seed(seed: u64) -> SeedOutcome {
    let ds = trend_dataset(seed);
    let chan10 = ChannelConfig::new(10.0, 0xC4);

    let train_pair = |latency: u32, c_last: usize| -> (Enhancer, TransNet) {
        let enh_cfg = EnhancerConfig::desk_default(latency).unwrap();
        let (enh, _) = train_enhancer_separate(
            &ds,
            &enh_cfg,
            &sep_cfg(TrainConfig::separate_enhancer(), seed, None),
        )
        .unwrap();
        let tn_cfg = TransNetConfig::desk_default(latency, c_last).unwrap();
        let (tn, _) = train_transnet_separate(
            &ds,
            &tn_cfg,
            &chan10,
            &sep_cfg(TrainConfig::separate_transnet(), seed, Some(TREND_LR_TN)),
        )
        .unwrap();
        (enh, tn)
    };
    let train_joint_from = |enh: &Enhancer, tn: &TransNet, latency: u32, c_last: usize| -> System {
        let tn_cfg = TransNetConfig::desk_default(latency, c_last).unwrap();
        let mut cfg = sep_cfg(TrainConfig::joint(), seed, None);
        cfg.max_epochs = TREND_EPOCHS_JOINT;
        let (sys, rep) = train_joint(
            &ds,
            enh.clone(),
            Some(tn.clone()),
            &tn_cfg,
            Order::EnhanceTransmit,
            &chan10,
            &cfg,
        )
        .unwrap();
        assert!(!rep.diverged, "joint diverged on seed {seed}");
        sys
    };

    // 3 ms, R = 1
    let (enh3, tn3) = train_pair(3, 8);
    let sep3 = System::new(enh3.clone(), tn3.clone(), Order::EnhanceTransmit).unwrap();
    let joint3 = train_joint_from(&enh3, &tn3, 3, 8);
    // 3 ms, R = 0.25
    let (_, tn3q) = {
        let tn_cfg = TransNetConfig::desk_default(3, 2).unwrap();
        let (tn, _) = train_transnet_separate(
            &ds,
            &tn_cfg,
            &chan10,
            &sep_cfg(TrainConfig::separate_transnet(), seed, Some(TREND_LR_TN)),
        )
        .unwrap();
        ((), tn)
    };
    let joint3q = train_joint_from(&enh3, &tn3q, 3, 2);
    // 9 ms, R = 1
    let (enh9, tn9) = train_pair(9, 8);
    let joint9 = train_joint_from(&enh9, &tn9, 9, 8);

    let eval_at = |sys: &System, snr_w: f64| -> f64 {
        let cfg = ChannelConfig::new(snr_w, derive_seed(0xE7A1, seed));
        mean_si_sdr(&evaluate(&Pipeline::Full(sys), &ds.test, &cfg).unwrap())
    };
    SeedOutcome {
        seed,
        separate_10: eval_at(&sep3, 10.0),
        joint_0: eval_at(&joint3, 0.0),
        joint_10: eval_at(&joint3, 10.0),
        joint_inf: eval_at(&joint3, f64::INFINITY),
        joint_quarter_10: eval_at(&joint3q, 10.0),
        joint9_10: eval_at(&joint9, 10.0),
    }
}

#[test]
fn c7_trend_reproduction() {
    let t0 = Instant::now();
    let outcomes: Vec<SeedOutcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = TREND_SEEDS
            .iter()
            .map(|&seed| scope.spawn(move || run_trend_seed(seed)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let elapsed_min = t0.elapsed().as_secs_f64() / 60.0;

    let mean = |f: &dyn Fn(&SeedOutcome) -> f64| -> f64 {
        outcomes.iter().map(|o| f(o)).sum::<f64>() / outcomes.len() as f64
    };
    for o in &outcomes {
        println!(
            "  trend seed {}: separate@10 {:.2} | joint@0 {:.2} @10 {:.2} @inf {:.2} | jointR.25@10 {:.2} | joint9ms@10 {:.2}",
            o.seed, o.separate_10, o.joint_0, o.joint_10, o.joint_inf, o.joint_quarter_10, o.joint9_10
        );
    }

    // (a) joint >= separate at (R=1, 10 dB, 3 ms), every seed.
    let a = outcomes.iter().all(|o| o.joint_10 >= o.separate_10);
    // (b) mean SI-SDR non-decreasing in SNR_w across {0, 10, inf}.
    let (m0, m10, minf) = (
        mean(&|o| o.joint_0),
        mean(&|o| o.joint_10),
        mean(&|o| o.joint_inf),
    );
    let b = m0 <= m10 && m10 <= minf;
    // (c) R=1 >= R=0.25 at the same SNR_w, seed-averaged.
    let mq = mean(&|o| o.joint_quarter_10);
    let c = m10 >= mq;
    // (d) 9 ms >= 3 ms within a -0.3 dB allowance, seed-averaged.
    let m9 = mean(&|o| o.joint9_10);
    let d = m9 >= m10 - 0.3;
    let time_ok = elapsed_min < 45.0;

    criterion(
        7,
        "trend reproduction",
        a && b && c && d && time_ok,
        &format!(
            "a: joint>=separate every seed = {a}; b: {m0:.2} <= {m10:.2} <= {minf:.2} = {b}; \
             c: R1 {m10:.2} >= R.25 {mq:.2} = {c}; d: 9ms {m9:.2} >= 3ms {m10:.2} - 0.3 = {d}; \
             {elapsed_min:.1} min (< 45)"
        ),
    );
}

// ── Overfit capacity ────────────────────────────────────────────────

fn overfit_dataset() -> Dataset {
    let ds = build_dataset(&DatasetSpec {
        count: 4,
        duration_s: 0.4,
        snr_a_db: (2.0, 10.0),
        split: SplitFractions {
            train: 1.0,
            val: 0.0,
            test: 0.0,
        },
        master_seed: 0x0F17,
    })
    .unwrap();
    // Overfit runs validate on the training items themselves.
    Dataset {
        train: ds.train.clone(),
        val: ds.train.clone(),
        test: Vec::new(),
    }
}

fn overfit_cfg(base: TrainConfig, lr: f64) -> TrainConfig {
    let mut cfg = base;
    cfg.lr = lr;
    cfg.batch_size = 4; // one optimizer step per epoch
    cfg.max_epochs = 2000;
    cfg.patience = usize::MAX / 2;
    cfg.stop_at_si_sdr_db = Some(20.0);
    cfg.quiet = true;
    cfg.seed = 3;
    cfg
}

#[test]
fn c8_overfit_capacity() {
    let ds = overfit_dataset();
    let noiseless = ChannelConfig::noiseless(1);
    let enh_cfg = EnhancerConfig::desk_default(3).unwrap();
    let tn_cfg = TransNetConfig::desk_default(3, 8).unwrap();

    let (enh, enh_rep) = train_enhancer_separate(
        &ds,
        &enh_cfg,
        &overfit_cfg(TrainConfig::separate_enhancer(), 1e-3),
    )
    .unwrap();
    let enh_ok = enh_rep.reached_target && enh_rep.epochs_run <= 2000;

    let (tn, tn_rep) = train_transnet_separate(
        &ds,
        &tn_cfg,
        &noiseless,
        &overfit_cfg(TrainConfig::separate_transnet(), 1e-3),
    )
    .unwrap();
    let tn_ok = tn_rep.reached_target && tn_rep.epochs_run <= 2000;

    let (_, joint_rep) = train_joint(
        &ds,
        enh,
        Some(tn),
        &tn_cfg,
        Order::EnhanceTransmit,
        &noiseless,
        &overfit_cfg(TrainConfig::joint(), 3e-4),
    )
    .unwrap();
    let joint_ok = joint_rep.reached_target && joint_rep.epochs_run <= 2000;

    criterion(
        8,
        "overfit capacity",
        enh_ok && tn_ok && joint_ok,
        &format!(
            "SI-SDR >= 20 dB on 4 items: enhancer in {} steps, codec in {} steps, joint in {} steps (all <= 2000)",
            enh_rep.epochs_run, tn_rep.epochs_run, joint_rep.epochs_run
        ),
    );
}

// ── Reproducibility ─────────────────────────────────────────────────

fn jscc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jscc"))
}

fn tmp_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("jscc_acc_{}_{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn c9_cli_reproducibility() {
    let dir = tmp_dir("c9");
    let train = |out: &std::path::Path| {
        let st = jscc()
            .args([
                "train",
                "--method",
                "joint",
                "--latency-ms",
                "3",
                "--count",
                "10",
                "--duration-s",
                "0.4",
                "--max-epochs",
                "3",
                "--seed",
                "11",
                "--quiet",
                "--out",
            ])
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    };
    train(&dir.join("a"));
    train(&dir.join("b"));
    let ckpt_identical = std::fs::read(dir.join("a/enhancer.ckpt")).unwrap()
        == std::fs::read(dir.join("b/enhancer.ckpt")).unwrap()
        && std::fs::read(dir.join("a/transnet.ckpt")).unwrap()
            == std::fs::read(dir.join("b/transnet.ckpt")).unwrap();

    // sweep determinism including on-demand training (fresh dir each run)
    let spec = |out: &str| {
        format!(
            "[data]\ncount = 8\nduration_s = 0.4\nmaster_seed = 5\n[train]\nmax_epochs = 2\n\
             [grid]\nsnr_a_db = 0 8\nsnr_w_db = 10\nratio = 1\nlatency_ms = 3\n\
             order = enhance-transmit\nmethod = noisy-baseline transmit-only\nseeds = 1\n\
             [output]\ndir = {out}\n"
        )
    };
    let run_sweep = |tag: &str| -> Vec<u8> {
        let out = dir.join(format!("sweep_{tag}"));
        let spec_path = dir.join(format!("sweep_{tag}.spec"));
        std::fs::write(&spec_path, spec(out.to_str().unwrap())).unwrap();
        let st = jscc().args(["sweep", "--spec"]).arg(&spec_path).output().unwrap();
        assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
        std::fs::read(out.join("results.csv")).unwrap()
    };
    let sweep_identical = run_sweep("x") == run_sweep("y");

    // transmit determinism
    let wav: Vec<f64> = (0..8000)
        .map(|i| 0.3 * (2.0 * std::f64::consts::PI * 300.0 * i as f64 / 16000.0).sin())
        .collect();
    jscc_core::signal::write_wav(
        dir.join("in.wav"),
        &jscc_core::signal::Signal::new(wav, 16000, jscc_core::signal::SignalKind::Clean),
    )
    .unwrap();
    let transmit = |out_name: &str| -> Vec<u8> {
        let st = jscc()
            .args(["transmit", "--in"])
            .arg(dir.join("in.wav"))
            .args(["--out"])
            .arg(dir.join(out_name))
            .args(["--enhancer"])
            .arg(dir.join("a/enhancer.ckpt"))
            .args(["--transnet"])
            .arg(dir.join("a/transnet.ckpt"))
            .args(["--snr-w", "10", "--seed", "4"])
            .output()
            .unwrap();
        assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
        std::fs::read(dir.join(out_name)).unwrap()
    };
    let transmit_identical = transmit("t1.wav") == transmit("t2.wav");

    // verify exits 0 on a fresh build, within the stated runtime budget
    let t0 = Instant::now();
    let verify = jscc().args(["verify", "--seed", "2"]).output().unwrap();
    let verify_ok = verify.status.code() == Some(0);
    let verify_secs = t0.elapsed().as_secs_f64();

    criterion(
        9,
        "reproducibility",
        ckpt_identical && sweep_identical && transmit_identical && verify_ok && verify_secs < 300.0,
        &format!(
            "train checkpoints identical = {ckpt_identical}; sweep CSVs identical = {sweep_identical}; \
             transmit WAVs identical = {transmit_identical}; verify exit 0 in {verify_secs:.1} s (< 300)"
        ),
    );
}
