//! End-to-end tests driving the compiled binary.

use cat_core::signal::{load_wav, save_wav, Waveform};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;
use std::time::Instant;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cat-audio")
}

fn work_dir() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let d = std::env::temp_dir().join(format!("cat-audio-cli-{}", std::process::id()));
        std::fs::create_dir_all(&d).expect("temp dir");
        d
    })
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn run_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(bin()).args(args).env(key, value).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn assert_code(out: &Output, want: i32) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "stdout: {}\nstderr: {}",
        stdout(out),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// One shared desk model; 18 MB is worth writing only once.
fn model_path() -> &'static Path {
    static MODEL: OnceLock<PathBuf> = OnceLock::new();
    MODEL.get_or_init(|| {
        let p = work_dir().join("desk.catw");
        let out = run(&["init", "--out", p.to_str().unwrap(), "--seed", "7"]);
        assert_code(&out, 0);
        p
    })
}

fn write_wav(name: &str, samples: Vec<f64>, rate: u32) -> PathBuf {
    let p = work_dir().join(name);
    let bytes = save_wav(&Waveform::new(samples, rate)).expect("encodable wav");
    std::fs::write(&p, bytes).expect("writable temp");
    p
}

fn sine(n: usize, rate: u32, hz: f64) -> Vec<f64> {
    (0..n)
        .map(|i| 0.4 * (2.0 * std::f64::consts::PI * hz * i as f64 / rate as f64).sin())
        .collect()
}

/// Encode `wav` to a fresh token stream, returning its path.
fn encode_to(name: &str, wav: &Path, depth: Option<usize>) -> PathBuf {
    let p = work_dir().join(name);
    let mut args = vec![
        "encode".to_string(),
        "--model".into(),
        model_path().to_str().unwrap().into(),
        "--in".into(),
        wav.to_str().unwrap().into(),
        "--out".into(),
        p.to_str().unwrap().into(),
    ];
    if let Some(k) = depth {
        args.push("--depth".into());
        args.push(k.to_string());
    }
    let args: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    let out = run(&args);
    assert_code(&out, 0);
    p
}

// ============================ basic commands ===========================

#[test]
fn encode_one_second_of_silence() {
    let wav = write_wav("zero1s.wav", vec![0.0; 24_000], 24_000);
    let cat = work_dir().join("zero1s.cat1");
    let out = run(&[
        "encode", "--model", model_path().to_str().unwrap(),
        "--in", wav.to_str().unwrap(), "--out", cat.to_str().unwrap(), "--json",
    ]);
    assert_code(&out, 0);
    let v: Value = serde_json::from_str(&stdout(&out)).expect("single JSON object");
    // 24000 samples pad to 13 frames; depth defaults to the full stack
    assert_eq!(v["frames"], 13);
    assert_eq!(v["depth"], 8);
    assert_eq!(v["bits_per_second"], 1000.0);
    assert_eq!(v["original_len_samples"], 24_000);
}

#[test]
fn bitrate_table_row() {
    let out = run(&["bitrate", "32", "1024", "12.5"]);
    assert_code(&out, 0);
    assert_eq!(stdout(&out).trim(), "4000");
}

#[test]
fn transcode_to_own_depth_is_byte_identical() {
    let wav = write_wav("own_depth.wav", sine(24_000, 24_000, 220.0), 24_000);
    let cat = encode_to("own_depth.cat1", &wav, None);
    let same = work_dir().join("own_depth_same.cat1");
    let out = run(&[
        "transcode", "--in", cat.to_str().unwrap(), "--depth", "8",
        "--out", same.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert_eq!(std::fs::read(&cat).unwrap(), std::fs::read(&same).unwrap());
}

#[test]
fn decode_trims_to_original_length() {
    let wav = write_wav("trim.wav", sine(24_000, 24_000, 330.0), 24_000);
    let cat = encode_to("trim.cat1", &wav, None);
    let back = work_dir().join("trim_rt.wav");
    let out = run(&[
        "decode", "--model", model_path().to_str().unwrap(),
        "--in", cat.to_str().unwrap(), "--out", back.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let w = load_wav(&std::fs::read(&back).unwrap()).unwrap();
    assert_eq!(w.len(), 24_000);
    assert_eq!(w.sample_rate, 24_000);
    // shape closure: the reconstruction re-encodes to the same frame count
    let cat2 = encode_to("trim_rt.cat1", &back, None);
    let info = run(&["info", "--in", cat2.to_str().unwrap(), "--json"]);
    let v: Value = serde_json::from_str(&stdout(&info)).unwrap();
    assert_eq!(v["n_frames"], 13);
}

#[test]
fn shallow_and_deep_decodes_differ() {
    let wav = write_wav("depths.wav", sine(24_000, 24_000, 440.0), 24_000);
    let full = encode_to("depths.cat1", &wav, None);
    let d1 = work_dir().join("depths_d1.cat1");
    assert_code(
        &run(&["transcode", "--in", full.to_str().unwrap(), "--depth", "1", "--out", d1.to_str().unwrap()]),
        0,
    );
    let out1 = work_dir().join("depths_d1.wav");
    let out8 = work_dir().join("depths_d8.wav");
    assert_code(
        &run(&["decode", "--model", model_path().to_str().unwrap(), "--in", d1.to_str().unwrap(), "--out", out1.to_str().unwrap()]),
        0,
    );
    assert_code(
        &run(&["decode", "--model", model_path().to_str().unwrap(), "--in", full.to_str().unwrap(), "--out", out8.to_str().unwrap()]),
        0,
    );
    let w1 = load_wav(&std::fs::read(&out1).unwrap()).unwrap();
    let w8 = load_wav(&std::fs::read(&out8).unwrap()).unwrap();
    assert_eq!(w1.len(), w8.len());
    assert!(w1.samples != w8.samples, "depth-1 and depth-8 reconstructions coincide");
}

#[test]
fn info_reports_header_fields() {
    let wav = write_wav("info.wav", vec![0.0; 1920 * 2], 24_000);
    let cat = encode_to("info.cat1", &wav, Some(3));
    let out = run(&["info", "--in", cat.to_str().unwrap(), "--json"]);
    assert_code(&out, 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["sample_rate"], 24_000);
    assert_eq!(v["samples_per_frame"], 1920);
    assert_eq!(v["n_layers"], 3);
    assert_eq!(v["bits_per_code"], 10);
    assert_eq!(v["n_frames"], 2);
    assert_eq!(v["frame_rate_hz"], 12.5);
    assert_eq!(v["bits_per_second"], 375.0);
}

#[test]
fn loss_is_zero_on_identical_input_and_positive_otherwise() {
    let a = write_wav("loss_a.wav", sine(12_000, 24_000, 220.0), 24_000);
    let b = write_wav("loss_b.wav", sine(12_000, 24_000, 450.0), 24_000);
    let same = run(&["loss", "--a", a.to_str().unwrap(), "--b", a.to_str().unwrap(), "--json"]);
    assert_code(&same, 0);
    let v: Value = serde_json::from_str(&stdout(&same)).unwrap();
    assert_eq!(v["terms"]["rec"], 0.0);
    assert_eq!(v["total"], 0.0);
    let diff = run(&["loss", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap(), "--json"]);
    assert_code(&diff, 0);
    let v: Value = serde_json::from_str(&stdout(&diff)).unwrap();
    assert!(v["terms"]["rec"].as_f64().unwrap() > 0.0);
    assert!(v["total"].as_f64().unwrap() > 0.0);
}

#[test]
fn train_codebook_is_deterministic() {
    let features = work_dir().join("features.json");
    let frames: Vec<Vec<f64>> = (0..64)
        .map(|i| {
            let c = i % 4;
            (0..4)
                .map(|j| if j == c { 3.0 } else { 0.0 } + ((i * 7 + j) % 13) as f64 * 0.01)
                .collect()
        })
        .collect();
    std::fs::write(&features, serde_json::json!({ "frames": frames }).to_string()).unwrap();
    let args = [
        "train-codebook", "--features", features.to_str().unwrap(),
        "--steps", "100", "--lr", "0.2", "--entries", "4", "--seed", "11", "--json",
    ];
    let one = run(&args);
    let two = run(&args);
    assert_code(&one, 0);
    let va: Value = serde_json::from_str(&stdout(&one)).unwrap();
    let vb: Value = serde_json::from_str(&stdout(&two)).unwrap();
    assert_eq!(va, vb);
    assert!(va["final_loss"].as_f64().unwrap() < va["initial_loss"].as_f64().unwrap());
}

// ============================ failure modes ============================

#[test]
fn wrong_sample_rate_is_a_user_error() {
    let wav = write_wav("rate16k.wav", vec![0.0; 16_000], 16_000);
    let out = run(&[
        "encode", "--model", model_path().to_str().unwrap(),
        "--in", wav.to_str().unwrap(), "--out", work_dir().join("x.cat1").to_str().unwrap(),
    ]);
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("24000"));
}

#[test]
fn depth_beyond_model_is_a_user_error() {
    let wav = write_wav("depth9.wav", vec![0.0; 1920], 24_000);
    let out = run(&[
        "encode", "--model", model_path().to_str().unwrap(),
        "--in", wav.to_str().unwrap(), "--out", work_dir().join("y.cat1").to_str().unwrap(),
        "--depth", "9",
    ]);
    assert_code(&out, 2);
}

#[test]
fn truncated_stream_is_a_format_error() {
    let wav = write_wav("trunc_src.wav", vec![0.0; 1920 * 3], 24_000);
    let cat = encode_to("trunc_src.cat1", &wav, None);
    let bytes = std::fs::read(&cat).unwrap();
    let cut = work_dir().join("cut.cat1");
    std::fs::write(&cut, &bytes[..bytes.len() - 3]).unwrap();
    let out = run(&[
        "decode", "--model", model_path().to_str().unwrap(),
        "--in", cut.to_str().unwrap(), "--out", work_dir().join("cut.wav").to_str().unwrap(),
    ]);
    assert_code(&out, 2);
}

// ========================= determinism and seeds =======================

#[test]
fn encode_is_deterministic() {
    let wav = write_wav("det.wav", sine(24_000, 24_000, 175.0), 24_000);
    let a = encode_to("det_a.cat1", &wav, None);
    let b = encode_to("det_b.cat1", &wav, None);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn seed_env_and_flag_agree_and_flag_wins() {
    let via_env = work_dir().join("seed_env.catw");
    let via_flag = work_dir().join("seed_flag.catw");
    let flag_beats_env = work_dir().join("seed_both.catw");
    assert_code(&run_env(&["init", "--out", via_env.to_str().unwrap()], "CAT_SEED", "9"), 0);
    assert_code(&run(&["init", "--out", via_flag.to_str().unwrap(), "--seed", "9"]), 0);
    assert_code(
        &run_env(&["init", "--out", flag_beats_env.to_str().unwrap(), "--seed", "7"], "CAT_SEED", "9"),
        0,
    );
    let env_bytes = std::fs::read(&via_env).unwrap();
    assert_eq!(env_bytes, std::fs::read(&via_flag).unwrap());
    assert_eq!(std::fs::read(&flag_beats_env).unwrap(), std::fs::read(model_path()).unwrap());
    assert_ne!(env_bytes, std::fs::read(model_path()).unwrap());
}

// ====================== acceptance: closure, checks ====================

#[test]
fn ttssim_closes_the_loop() {
    let wav = write_wav("prompt.wav", sine(24_000, 24_000, 261.6), 24_000);
    let prompt = encode_to("prompt.cat1", &wav, None);
    let tokens_out = work_dir().join("tts.cat1");
    let wav_out = work_dir().join("tts.wav");
    let start = Instant::now();
    let out = run(&[
        "ttssim", "--model", model_path().to_str().unwrap(),
        "--text", "a short test utterance", "--prompt", prompt.to_str().unwrap(),
        "--depth", "4", "--max-frames", "12",
        "--out-tokens", tokens_out.to_str().unwrap(), "--out-wav", wav_out.to_str().unwrap(),
        "--json",
    ]);
    assert_code(&out, 0);
    assert!(start.elapsed().as_secs() < 120, "closure run exceeded its budget");
    let v: Value = serde_json::from_str(&stdout(&out)).expect("single JSON object");
    let frames = v["frames"].as_u64().unwrap();
    assert!(frames >= 1);
    assert_eq!(v["depth"], 4);
    assert_eq!(v["samples"].as_u64().unwrap(), frames * 1920);
    assert_eq!(v["reencoded_frames"].as_u64().unwrap(), frames);
    // the kept artifacts agree with the report
    let info = run(&["info", "--in", tokens_out.to_str().unwrap(), "--json"]);
    let iv: Value = serde_json::from_str(&stdout(&info)).unwrap();
    assert_eq!(iv["n_frames"].as_u64().unwrap(), frames);
    assert_eq!(iv["n_layers"], 4);
    let w = load_wav(&std::fs::read(&wav_out).unwrap()).unwrap();
    assert_eq!(w.len() as u64, frames * 1920);

    // deterministic: a second identical run reports identical facts
    let again = run(&[
        "ttssim", "--model", model_path().to_str().unwrap(),
        "--text", "a short test utterance", "--prompt", prompt.to_str().unwrap(),
        "--depth", "4", "--max-frames", "12", "--json",
    ]);
    assert_code(&again, 0);
    let v2: Value = serde_json::from_str(&stdout(&again)).unwrap();
    assert_eq!(v["frames"], v2["frames"]);
    assert_eq!(v["samples"], v2["samples"]);
}

#[test]
fn selfcheck_exits_zero() {
    let out = run(&["selfcheck", "--json"]);
    assert_code(&out, 0);
    let v: Value = serde_json::from_str(&stdout(&out)).expect("single JSON object");
    assert_eq!(v["failed"], 0);
    assert_eq!(v["passed"], 12);
    assert_eq!(v["checks"].as_array().unwrap().len(), 12);
}
