//! The `transmit` subcommand: WAV in, WAV out, through the streaming cascade.

use crate::{log, parse_snr, TransmitArgs};
use jscc_core::channel::ChannelConfig;
use jscc_core::error::Result;
use jscc_core::models::{Checkpoint, Enhancer, Order, System, TransNet};
use jscc_core::signal::{read_wav, write_wav, Signal, SignalKind};
use jscc_core::streaming::SystemStream;

pub fn run(args: &TransmitArgs) -> Result<i32> {
    let order = Order::parse(&args.order)?;
    let snr_w = parse_snr(&args.snr_w)?;
    let input = read_wav(&args.input)?;
    let enhancer = Enhancer::from_checkpoint(&Checkpoint::load(&args.enhancer)?)?;
    let transnet = TransNet::from_checkpoint(&Checkpoint::load(&args.transnet)?)?;
    let system = System::new(enhancer, transnet, order)?;
    let n = system.frame_len();

    // Zero-pad to whole frames, process frame-by-frame, trim to the input
    // length so the output duration is sample-exact.
    let len = input.samples.len();
    let padded_len = len.div_ceil(n) * n;
    let mut samples = input.samples.clone();
    samples.resize(padded_len, 0.0);

    let mut stream = SystemStream::new(&system, ChannelConfig::new(snr_w, args.seed));
    let mut out = Vec::with_capacity(padded_len);
    for frame in samples.chunks(n) {
        out.extend(stream.process_frame(frame)?);
    }
    out.truncate(len);
    log::debug(format!(
        "processed {} frames of {n} samples ({} buffered state values)",
        stream.frames_processed(),
        stream.state_len()
    ));
    write_wav(
        &args.output,
        &Signal::new(out.clone(), input.sample_rate, SignalKind::Reconstructed),
    )?;
    log::info(format!(
        "wrote {} ({} samples, {:.2} s)",
        args.output.display(),
        len,
        len as f64 / input.sample_rate as f64
    ));

    if let Some(ref_path) = &args.reference {
        let reference = read_wav(ref_path)?;
        if reference.samples.len() != len {
            log::error(format!(
                "reference length {} differs from input length {len}; skipping metrics",
                reference.samples.len()
            ));
        } else {
            let est = Signal::new(out, input.sample_rate, SignalKind::Reconstructed);
            let rep = jscc_core::metrics::report(&reference, &est);
            let field = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
            println!(
                "si_sdr_db={} estoi={} mse={} pesq=-",
                field(rep.si_sdr_db),
                field(rep.estoi),
                field(rep.mse)
            );
        }
    }
    Ok(0)
}
