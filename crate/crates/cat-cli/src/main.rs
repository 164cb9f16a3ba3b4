//! `cat-audio`: command-line front end for the tokenizer runtime.
//!
//! Exit codes: 0 success, 2 user/format error, 3 internal invariant failure
//! (non-finite numerics or a failed verification check).

use cat_core::bitstream::{self, BitstreamHeader};
use cat_core::codec::pad_to_frame;
use cat_core::lm::Sampling;
use cat_core::losses::{total_loss, LossTerms, LossWeights};
use cat_core::model::ModelBundle;
use cat_core::rvq::{
    mean_quantization_error, rvq_decode, rvq_encode, seed_entries_from_frames, train_codebooks,
    RVQStack, RvqConfig, TrainOptions,
};
use cat_core::selfcheck;
use cat_core::signal::{load_wav, multi_scale_mel_loss, save_wav, MelLossConfig};
use cat_core::Error;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const DEFAULT_SEED: u64 = 7;

#[derive(Parser)]
#[command(name = "cat-audio", version, about = "Streaming causal audio tokenizer runtime")]
struct Cli {
    /// Emit a single JSON object instead of human-readable lines.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a freshly seeded model file.
    Init(InitArgs),
    /// Compress a 24 kHz WAV into a token bitstream.
    Encode(EncodeArgs),
    /// Reconstruct a WAV from a token bitstream.
    Decode(DecodeArgs),
    /// Rewrite a bitstream at a shallower depth (no model needed).
    Transcode(TranscodeArgs),
    /// Print the header facts of a bitstream file.
    Info(InfoArgs),
    /// Print the exact bitrate for a layers/codebook/rate triple.
    Bitrate(BitrateArgs),
    /// Score a waveform pair with the weighted objective.
    Loss(LossArgs),
    /// Fit quantizer codebooks to a feature file.
    TrainCodebook(TrainCodebookArgs),
    /// Generate tokens from text + audio prompt, then close the loop:
    /// transcode, decode, and re-encode the result.
    Ttssim(TtssimArgs),
    /// Run the built-in verification suite (exit 3 on any failure).
    Selfcheck,
}

#[derive(Args)]
struct InitArgs {
    /// Destination model file.
    #[arg(long, value_name = "CATW")]
    out: PathBuf,
    /// Seed for all parameter draws (flag > CAT_SEED env > 7).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long, value_name = "CATW")]
    model: PathBuf,
    #[arg(long = "in", value_name = "WAV")]
    input: PathBuf,
    #[arg(long, value_name = "CAT1")]
    out: PathBuf,
    /// Quantizer depth K; defaults to the model's full depth.
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long, value_name = "CATW")]
    model: PathBuf,
    #[arg(long = "in", value_name = "CAT1")]
    input: PathBuf,
    #[arg(long, value_name = "WAV")]
    out: PathBuf,
}

#[derive(Args)]
struct TranscodeArgs {
    #[arg(long = "in", value_name = "CAT1")]
    input: PathBuf,
    #[arg(long)]
    depth: u8,
    #[arg(long, value_name = "CAT1")]
    out: PathBuf,
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long = "in", value_name = "CAT1")]
    input: PathBuf,
}

#[derive(Args)]
struct BitrateArgs {
    /// Number of quantizer layers.
    layers: usize,
    /// Codebook size (entries per layer).
    codebook: usize,
    /// Frame rate in Hz.
    rate: f64,
}

#[derive(Args)]
struct LossArgs {
    /// Reference waveform.
    #[arg(long, value_name = "WAV")]
    a: PathBuf,
    /// Waveform under test.
    #[arg(long, value_name = "WAV")]
    b: PathBuf,
    /// Pass-through term values (model-side terms default to 0 here).
    #[arg(long, default_value_t = 0.0)]
    sem: f64,
    #[arg(long, default_value_t = 0.0)]
    cmt: f64,
    #[arg(long, default_value_t = 0.0)]
    code: f64,
    #[arg(long, default_value_t = 0.0)]
    adv: f64,
    #[arg(long, default_value_t = 0.0)]
    feat: f64,
}

#[derive(Args)]
struct TrainCodebookArgs {
    /// JSON feature file: {"frames": [[f32; d_model]; T]}.
    #[arg(long, value_name = "JSON")]
    features: PathBuf,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 0.2)]
    lr: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Stack shape; d_model is inferred from the features.
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long, default_value_t = 64)]
    entries: usize,
    #[arg(long, default_value_t = 8)]
    code_dim: usize,
}

#[derive(Args)]
struct TtssimArgs {
    #[arg(long, value_name = "CATW")]
    model: PathBuf,
    /// Text to synthesize.
    #[arg(long)]
    text: String,
    /// Transcript of the audio prompt (may be empty).
    #[arg(long, default_value = "")]
    prompt_text: String,
    /// Audio prompt token bitstream.
    #[arg(long, value_name = "CAT1")]
    prompt: PathBuf,
    /// Inference depth K.
    #[arg(long)]
    depth: usize,
    #[arg(long, default_value_t = 32)]
    max_frames: usize,
    /// Sampling temperature; omitted = greedy.
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Optional places to keep the artifacts.
    #[arg(long, value_name = "WAV")]
    out_wav: Option<PathBuf>,
    #[arg(long, value_name = "CAT1")]
    out_tokens: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    match &cli.cmd {
        Cmd::Init(a) => cmd_init(a, cli.json),
        Cmd::Encode(a) => cmd_encode(a, cli.json),
        Cmd::Decode(a) => cmd_decode(a, cli.json),
        Cmd::Transcode(a) => cmd_transcode(a, cli.json),
        Cmd::Info(a) => cmd_info(a, cli.json),
        Cmd::Bitrate(a) => cmd_bitrate(a, cli.json),
        Cmd::Loss(a) => cmd_loss(a, cli.json),
        Cmd::TrainCodebook(a) => cmd_train_codebook(a, cli.json),
        Cmd::Ttssim(a) => cmd_ttssim(a, cli.json),
        Cmd::Selfcheck => cmd_selfcheck(cli.json),
    }
}

// ============================ shared helpers ===========================

/// Seed precedence: explicit flag, then CAT_SEED, then the default.
fn resolve_seed(flag: Option<u64>) -> Result<u64, Error> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("CAT_SEED") {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::Contract(format!("CAT_SEED is not an unsigned integer: {:?}", v))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, Error> {
    std::fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {}", path.display(), e))))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    std::fs::write(path, bytes)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {}", path.display(), e))))
}

fn load_model(path: &Path) -> Result<ModelBundle, Error> {
    ModelBundle::load(&read_file(path)?)
}

fn emit(json_mode: bool, value: serde_json::Value, human: &[String]) {
    if json_mode {
        println!("{}", serde_json::to_string_pretty(&value).expect("serializable value"));
    } else {
        for line in human {
            println!("{}", line);
        }
    }
}

/// Header for freshly produced token streams of a given model.
fn stream_header(bundle: &ModelBundle, depth: usize, n_frames: usize, original_len: u64) -> BitstreamHeader {
    BitstreamHeader {
        sample_rate: bundle.config.codec.sample_rate,
        samples_per_frame: bundle.config.codec.samples_per_frame() as u16,
        n_layers: depth as u8,
        bits_per_code: bundle.config.rvq.bits_per_code(),
        n_frames: n_frames as u32,
        original_len_samples: original_len,
    }
}

// =============================== commands ==============================

fn cmd_init(a: &InitArgs, json: bool) -> Result<ExitCode, Error> {
    let seed = resolve_seed(a.seed)?;
    let bundle = ModelBundle::desk(seed)?;
    let bytes = bundle.save()?;
    write_file(&a.out, &bytes)?;
    emit(
        json,
        json!({
            "path": a.out.display().to_string(),
            "seed": seed,
            "param_count": bundle.param_count(),
            "file_bytes": bytes.len(),
        }),
        &[
            format!("wrote {} ({} bytes)", a.out.display(), bytes.len()),
            format!("seed {} / {} parameters", seed, bundle.param_count()),
        ],
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_encode(a: &EncodeArgs, json: bool) -> Result<ExitCode, Error> {
    let bundle = load_model(&a.model)?;
    let wave = load_wav(&read_file(&a.input)?)?;
    let depth = a.depth.unwrap_or_else(|| bundle.rvq.n_layers());
    let spf = bundle.config.codec.samples_per_frame();
    let (padded, original_len) = pad_to_frame(&wave, spf);
    let latents = bundle.encoder.encode(&padded)?;
    let encoded = rvq_encode(&bundle.rvq, &latents, depth)?;
    let header = stream_header(&bundle, depth, encoded.tokens.n_frames, original_len);
    let bytes = bitstream::pack(&header, &encoded.tokens)?;
    write_file(&a.out, &bytes)?;
    let bps = bitstream::bitrate_bps(depth, bundle.config.rvq.n_entries, bundle.config.codec.frame_rate());
    emit(
        json,
        json!({
            "frames": encoded.tokens.n_frames,
            "depth": depth,
            "bits_per_second": bps,
            "original_len_samples": original_len,
            "file_bytes": bytes.len(),
        }),
        &[format!(
            "{} frames at depth {} ({} bps), {} bytes",
            encoded.tokens.n_frames, depth, bps, bytes.len()
        )],
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_decode(a: &DecodeArgs, json: bool) -> Result<ExitCode, Error> {
    let bundle = load_model(&a.model)?;
    let (header, tokens) = bitstream::unpack(&read_file(&a.input)?)?;
    if header.sample_rate != bundle.config.codec.sample_rate
        || header.samples_per_frame as usize != bundle.config.codec.samples_per_frame()
        || header.bits_per_code != bundle.config.rvq.bits_per_code()
    {
        return Err(Error::Contract(format!(
            "bitstream geometry ({} Hz, {} samples/frame, {} bits) does not match the model",
            header.sample_rate, header.samples_per_frame, header.bits_per_code
        )));
    }
    let latents = rvq_decode(&bundle.rvq, &tokens, bundle.config.codec.frame_rate())?;
    let mut wave = bundle.decoder.decode(&latents)?;
    wave.samples.truncate(header.original_len_samples as usize);
    let bytes = save_wav(&wave)?;
    write_file(&a.out, &bytes)?;
    emit(
        json,
        json!({
            "frames": tokens.n_frames,
            "depth": tokens.depth,
            "samples": wave.len(),
            "seconds": wave.duration_seconds(),
        }),
        &[format!(
            "{} frames at depth {} -> {} samples ({:.3} s)",
            tokens.n_frames,
            tokens.depth,
            wave.len(),
            wave.duration_seconds()
        )],
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_transcode(a: &TranscodeArgs, json: bool) -> Result<ExitCode, Error> {
    let bytes = read_file(&a.input)?;
    let out = bitstream::truncate_to_depth(&bytes, a.depth)?;
    write_file(&a.out, &out)?;
    emit(
        json,
        json!({
            "depth": a.depth,
            "file_bytes": out.len(),
        }),
        &[format!("depth {} stream, {} bytes", a.depth, out.len())],
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_info(a: &InfoArgs, json: bool) -> Result<ExitCode, Error> {
    let (h, tokens) = bitstream::unpack(&read_file(&a.input)?)?;
    let frame_rate = h.sample_rate as f64 / h.samples_per_frame as f64;
    let bps = h.n_layers as f64 * h.bits_per_code as f64 * frame_rate;
    emit(
        json,
        json!({
            "sample_rate": h.sample_rate,
            "samples_per_frame": h.samples_per_frame,
            "n_layers": h.n_layers,
            "bits_per_code": h.bits_per_code,
            "n_frames": h.n_frames,
            "original_len_samples": h.original_len_samples,
            "frame_rate_hz": frame_rate,
            "bits_per_second": bps,
        }),
        &[
            format!("{} Hz, {} samples/frame ({} Hz frames)", h.sample_rate, h.samples_per_frame, frame_rate),
            format!("{} frames x {} layers x {} bits = {} bps", h.n_frames, h.n_layers, h.bits_per_code, bps),
            format!("original length {} samples", h.original_len_samples),
            format!("tokens {} x {}", tokens.n_frames, tokens.depth),
        ],
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_bitrate(a: &BitrateArgs, json: bool) -> Result<ExitCode, Error> {
    if a.layers == 0 || a.codebook == 0 || !(a.rate.is_finite() && a.rate > 0.0) {
        return Err(Error::Contract(
            "bitrate needs layers >= 1, codebook >= 1, and a positive frame rate".into(),
        ));
    }
    let bps = bitstream::bitrate_bps(a.layers, a.codebook, a.rate);
    let human = if bps.fract() == 0.0 {
        format!("{}", bps as u64)
    } else {
        format!("{}", bps)
    };
    emit(
        json,
        json!({
            "layers": a.layers,
            "codebook": a.codebook,
            "frame_rate_hz": a.rate,
            "bits_per_second": bps,
        }),
        &[human],
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_loss(a: &LossArgs, json: bool) -> Result<ExitCode, Error> {
    let wa = load_wav(&read_file(&a.a)?)?;
    let wb = load_wav(&read_file(&a.b)?)?;
    let cfg = MelLossConfig::default_for(wa.sample_rate)?;
    let rec = multi_scale_mel_loss(&wa, &wb, &cfg)?;
    let terms = LossTerms { sem: a.sem, rec, cmt: a.cmt, code: a.code, adv: a.adv, feat: a.feat };
    let report = total_loss(&terms, &LossWeights::default())?;
    emit(
        json,
        serde_json::to_value(&report).expect("serializable report"),
        &[
            format!("rec  {:.6}", report.terms.rec),
            format!("sem  {:.6}  cmt {:.6}  code {:.6}", report.terms.sem, report.terms.cmt, report.terms.code),
            format!("adv  {:.6}  feat {:.6}", report.terms.adv, report.terms.feat),
            format!("total {:.6}", report.total),
        ],
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_features(bytes: &[u8]) -> Result<cat_core::codec::LatentSequence, Error> {
    let value: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| Error::Format(format!("feature file is not JSON: {}", e)))?;
    let frames = value
        .get("frames")
        .and_then(|f| f.as_array())
        .ok_or_else(|| Error::Format("feature file needs a top-level \"frames\" array".into()))?;
    let mut out: Vec<Vec<f32>> = Vec::with_capacity(frames.len());
    for (i, row) in frames.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Format(format!("frames[{}] is not an array", i)))?;
        let mut v = Vec::with_capacity(row.len());
        for (j, x) in row.iter().enumerate() {
            let x = x
                .as_f64()
                .ok_or_else(|| Error::Format(format!("frames[{}][{}] is not a number", i, j)))?;
            v.push(x as f32);
        }
        out.push(v);
    }
    if out.is_empty() || out.iter().any(|r| r.len() != out[0].len()) {
        return Err(Error::Contract("features must be a non-empty rectangular matrix".into()));
    }
    Ok(cat_core::codec::LatentSequence { frames: out, frame_rate: 12.5 })
}

fn cmd_train_codebook(a: &TrainCodebookArgs, json: bool) -> Result<ExitCode, Error> {
    let features = parse_features(&read_file(&a.features)?)?;
    let seed = resolve_seed(a.seed)?;
    let cfg = RvqConfig {
        n_layers: a.layers,
        d_model: features.frames[0].len(),
        code_dim: a.code_dim,
        n_entries: a.entries,
    };
    let mut stack = RVQStack::new_seeded(&cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for layer in 0..stack.n_layers() {
        seed_entries_from_frames(&mut stack, layer, &features, &mut rng)?;
    }
    let opts = TrainOptions::new(a.steps, a.lr, seed);
    let trace = train_codebooks(&mut stack, &[features.clone()], &opts)?;
    let err = mean_quantization_error(&stack, &features, stack.n_layers())?;
    let (first, last) = (
        trace.losses.first().copied().unwrap_or(0.0),
        trace.losses.last().copied().unwrap_or(0.0),
    );
    emit(
        json,
        json!({
            "steps": a.steps,
            "lr": a.lr,
            "seed": seed,
            "initial_loss": first,
            "final_loss": last,
            "mean_quantization_error": err,
        }),
        &[
            format!("{} steps at lr {} (seed {})", a.steps, a.lr, seed),
            format!("loss {:.6} -> {:.6}", first, last),
            format!("mean quantization error {:.6}", err),
        ],
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_ttssim(a: &TtssimArgs, json: bool) -> Result<ExitCode, Error> {
    let bundle = load_model(&a.model)?;
    let (_, prompt) = bitstream::unpack(&read_file(&a.prompt)?)?;
    let seed = resolve_seed(a.seed)?;
    let sampling = match a.temperature {
        Some(tau) => Sampling::Temperature { tau, seed },
        None => Sampling::Greedy,
    };
    let tokens = bundle.ar.generate(
        a.prompt_text.as_bytes(),
        a.text.as_bytes(),
        &prompt,
        a.depth,
        a.max_frames,
        sampling,
    )?;
    let spf = bundle.config.codec.samples_per_frame();

    // closure: container round trip, transcode, synthesis, re-analysis
    let header = stream_header(&bundle, a.depth, tokens.n_frames, (tokens.n_frames * spf) as u64);
    let bytes = bitstream::pack(&header, &tokens)?;
    let (_, reread) = bitstream::unpack(&bytes)?;
    if reread != tokens {
        return Err(Error::NonFinite("token container round trip altered codes".into()));
    }
    let shallow_depth = 1.max(a.depth / 2) as u8;
    let shallow = bitstream::truncate_to_depth(&bytes, shallow_depth)?;
    let (shallow_header, _) = bitstream::unpack(&shallow)?;

    let latents = rvq_decode(&bundle.rvq, &tokens, bundle.config.codec.frame_rate())?;
    let wave = bundle.decoder.decode(&latents)?;
    if wave.len() != tokens.n_frames * spf {
        return Err(Error::NonFinite(format!(
            "decoded {} samples for {} frames",
            wave.len(),
            tokens.n_frames
        )));
    }
    let re_latents = bundle.encoder.encode(&wave)?;
    let re_encoded = rvq_encode(&bundle.rvq, &re_latents, a.depth)?;
    if re_encoded.tokens.n_frames != tokens.n_frames {
        return Err(Error::NonFinite("re-encode changed the frame count".into()));
    }

    if let Some(p) = &a.out_tokens {
        write_file(p, &bytes)?;
    }
    if let Some(p) = &a.out_wav {
        write_file(p, &save_wav(&wave)?)?;
    }
    let bps = bitstream::bitrate_bps(a.depth, bundle.config.rvq.n_entries, bundle.config.codec.frame_rate());
    emit(
        json,
        json!({
            "frames": tokens.n_frames,
            "depth": a.depth,
            "samples": wave.len(),
            "bits_per_second": bps,
            "transcoded_depth": shallow_header.n_layers,
            "reencoded_frames": re_encoded.tokens.n_frames,
            "stopped_early": tokens.n_frames < a.max_frames,
        }),
        &[
            format!("generated {} frames at depth {} ({} bps)", tokens.n_frames, a.depth, bps),
            format!("decoded {} samples; transcode to depth {} ok", wave.len(), shallow_header.n_layers),
            format!("re-encode closure ok ({} frames)", re_encoded.tokens.n_frames),
        ],
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_selfcheck(json: bool) -> Result<ExitCode, Error> {
    let results = selfcheck::run_all();
    let passed = results.iter().filter(|r| r.passed).count();
    let failed = results.len() - passed;
    if json {
        let checks: Vec<serde_json::Value> = results
            .iter()
            .map(|r| {
                json!({
                    "id": r.id,
                    "name": r.name,
                    "passed": r.passed,
                    "detail": r.detail,
                    "millis": r.millis,
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "checks": checks,
                "passed": passed,
                "failed": failed,
            }))
            .expect("serializable checks")
        );
    } else {
        for r in &results {
            println!(
                "[{}] {:2} {:<28} {:>6} ms  {}",
                if r.passed { "PASS" } else { "FAIL" },
                r.id,
                r.name,
                r.millis,
                r.detail
            );
        }
        println!("{} passed, {} failed", passed, failed);
    }
    if failed > 0 {
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}
