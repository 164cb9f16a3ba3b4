//! Waveform I/O and multi-scale spectral analysis.
//!
//! Audio lives in [`Waveform`] as f64 samples. The spectral side provides a
//! left-aligned, causal STFT (no center padding, incomplete tail dropped),
//! mel filterbanks, and the multi-scale log-mel reconstruction loss used as
//! the codec's reconstruction metric.

use crate::error::{Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Mono audio at a fixed sample rate. Samples are dimensionless amplitudes,
/// nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Waveform { samples, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

// ============================== WAV I/O ==============================

fn read_u16(b: &[u8], at: usize) -> Result<u16> {
    b.get(at..at + 2)
        .map(|s| u16::from_le_bytes([s[0], s[1]]))
        .ok_or_else(|| Error::Format("WAV data ends inside a field".into()))
}

fn read_u32(b: &[u8], at: usize) -> Result<u32> {
    b.get(at..at + 4)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
        .ok_or_else(|| Error::Format("WAV data ends inside a field".into()))
}

/// Parse a RIFF/WAVE byte buffer into a mono waveform.
///
/// PCM16 and IEEE float32 encodings are accepted; multichannel input is
/// averaged down to mono. PCM16 samples map to [-1, 1) via division by 32768.
pub fn load_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("not a RIFF/WAVE file".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut at = 12usize;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = read_u32(bytes, at + 4)? as usize;
        let body_at = at + 8;
        if body_at + size > bytes.len() {
            return Err(Error::Format(format!(
                "chunk {:?} claims {} bytes but only {} remain",
                String::from_utf8_lossy(id),
                size,
                bytes.len() - body_at
            )));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::Format("fmt chunk shorter than 16 bytes".into()));
                }
                let format = read_u16(bytes, body_at)?;
                let channels = read_u16(bytes, body_at + 2)?;
                let rate = read_u32(bytes, body_at + 4)?;
                let bits = read_u16(bytes, body_at + 14)?;
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(&bytes[body_at..body_at + size]),
            _ => {}
        }
        // chunks are word-aligned; odd sizes carry a pad byte
        at = body_at + size + (size & 1);
    }

    let (format, channels, rate, bits) =
        fmt.ok_or_else(|| Error::Format("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Format("missing data chunk".into()))?;
    if channels == 0 {
        return Err(Error::Format("zero channels".into()));
    }

    let decode_frames = |bytes_per: usize| -> Result<usize> {
        let stride = bytes_per * channels as usize;
        if data.len() % stride != 0 {
            return Err(Error::Format(format!(
                "data size {} not a multiple of frame stride {}",
                data.len(),
                stride
            )));
        }
        Ok(data.len() / stride)
    };

    let samples = match (format, bits) {
        (1, 16) => {
            let n = decode_frames(2)?;
            let ch = channels as usize;
            (0..n)
                .map(|f| {
                    let mut acc = 0.0f64;
                    for c in 0..ch {
                        let at = (f * ch + c) * 2;
                        let v = i16::from_le_bytes([data[at], data[at + 1]]);
                        acc += v as f64 / 32768.0;
                    }
                    acc / ch as f64
                })
                .collect()
        }
        (3, 32) => {
            let n = decode_frames(4)?;
            let ch = channels as usize;
            (0..n)
                .map(|f| {
                    let mut acc = 0.0f64;
                    for c in 0..ch {
                        let at = (f * ch + c) * 4;
                        let v = f32::from_le_bytes([data[at], data[at + 1], data[at + 2], data[at + 3]]);
                        acc += v as f64;
                    }
                    acc / ch as f64
                })
                .collect()
        }
        (f, b) => {
            return Err(Error::Unsupported(format!(
                "WAV encoding (format {}, {} bits) — only PCM16 and float32 are read",
                f, b
            )))
        }
    };

    Ok(Waveform::new(samples, rate))
}

/// Serialize a waveform as PCM16 mono little-endian RIFF/WAVE.
///
/// Samples are rounded to the nearest 16-bit step and clamped, so over-range
/// values reload as ±(32767/32768 | 1.0) deterministically.
pub fn save_wav(w: &Waveform) -> Result<Vec<u8>> {
    for (i, &s) in w.samples.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFinite(format!("sample {} is {}", i, s)));
        }
    }
    let data_len = w.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&w.sample_rate.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &w.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

// ========================= spectral analysis =========================

/// One analysis resolution: window, hop = window/4, and a mel filterbank.
#[derive(Debug, Clone)]
pub struct SpectralScale {
    pub window_len: usize,
    pub hop_len: usize,
    pub n_mels: usize,
    /// n_mels rows of window_len/2 + 1 nonnegative weights.
    pub filterbank: Vec<Vec<f64>>,
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

impl SpectralScale {
    /// Build a scale with triangular peak-1 mel filters spanning 0..sr/2.
    pub fn new(window_len: usize, n_mels: usize, sample_rate: u32) -> Result<Self> {
        if !window_len.is_power_of_two() || !(32..=2048).contains(&window_len) {
            return Err(Error::Contract(format!(
                "window_len {} must be a power of two in [32, 2048]",
                window_len
            )));
        }
        if n_mels == 0 {
            return Err(Error::Contract("n_mels must be positive".into()));
        }
        let bins = window_len / 2 + 1;
        let nyquist = sample_rate as f64 / 2.0;
        let mel_max = hz_to_mel(nyquist);
        let pts: Vec<f64> = (0..n_mels + 2)
            .map(|j| mel_to_hz(mel_max * j as f64 / (n_mels + 1) as f64))
            .collect();
        let mut filterbank = Vec::with_capacity(n_mels);
        for m in 0..n_mels {
            let (lo, c, hi) = (pts[m], pts[m + 1], pts[m + 2]);
            let row: Vec<f64> = (0..bins)
                .map(|k| {
                    let f = k as f64 * sample_rate as f64 / window_len as f64;
                    let rising = (f - lo) / (c - lo);
                    let falling = (hi - f) / (hi - c);
                    rising.min(falling).max(0.0)
                })
                .collect();
            if row.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Contract(format!(
                    "mel band {} of {} covers no FFT bin at window {} / {} Hz",
                    m, n_mels, window_len, sample_rate
                )));
            }
            filterbank.push(row);
        }
        Ok(SpectralScale {
            window_len,
            hop_len: window_len / 4,
            n_mels,
            filterbank,
        })
    }
}

/// The seven analysis scales of the reconstruction loss plus the log floor.
#[derive(Debug, Clone)]
pub struct MelLossConfig {
    pub scales: Vec<SpectralScale>,
    pub log_floor: f64,
}

impl MelLossConfig {
    /// Windows 2^5..2^11 with mel band counts that keep bands <= bins at
    /// every scale.
    pub fn default_for(sample_rate: u32) -> Result<Self> {
        let n_mels = [5, 10, 20, 40, 80, 160, 320];
        let mut scales = Vec::with_capacity(7);
        for (j, i) in (5..=11).enumerate() {
            scales.push(SpectralScale::new(1usize << i, n_mels[j], sample_rate)?);
        }
        Ok(MelLossConfig { scales, log_floor: 1e-5 })
    }
}

fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Number of full analysis frames for a given signal length.
pub fn frame_count(len: usize, window: usize, hop: usize) -> usize {
    if len >= window {
        (len - window) / hop + 1
    } else {
        0
    }
}

/// Magnitude STFT: Hann-windowed, left-aligned frames, magnitudes divided by
/// the window's L2 norm so the scale of the output is window-length
/// invariant. Returns frames x (window/2 + 1).
pub fn stft_magnitude(w: &Waveform, scale: &SpectralScale) -> Vec<Vec<f64>> {
    let n = scale.window_len;
    let frames = frame_count(w.samples.len(), n, scale.hop_len);
    let bins = n / 2 + 1;
    if frames == 0 {
        return Vec::new();
    }
    let window = hann_periodic(n);
    let wnorm = window.iter().map(|v| v * v).sum::<f64>().sqrt();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut out = Vec::with_capacity(frames);
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); n];
    for f in 0..frames {
        let at = f * scale.hop_len;
        for i in 0..n {
            buf[i] = Complex::new(w.samples[at + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        out.push((0..bins).map(|k| buf[k].norm() / wnorm).collect());
    }
    out
}

/// Mel spectrogram: filterbank applied to the magnitude STFT.
/// Returns frames x n_mels.
pub fn mel_spectrogram(w: &Waveform, scale: &SpectralScale) -> Vec<Vec<f64>> {
    let mag = stft_magnitude(w, scale);
    mag.iter()
        .map(|row| {
            scale
                .filterbank
                .iter()
                .map(|filt| filt.iter().zip(row).map(|(a, b)| a * b).sum::<f64>())
                .collect()
        })
        .collect()
}

/// Multi-scale log-mel L1 distance between two equal-length waveforms.
///
/// Per scale: mean over all spectrogram elements of
/// |ln(mel_x + floor) - ln(mel_r + floor)|; scales are summed in ascending
/// window order. Symmetric, nonnegative, and exactly zero on identical input.
pub fn multi_scale_mel_loss(x: &Waveform, xr: &Waveform, cfg: &MelLossConfig) -> Result<f64> {
    if x.sample_rate != xr.sample_rate {
        return Err(Error::Contract(format!(
            "sample rates differ: {} vs {}",
            x.sample_rate, xr.sample_rate
        )));
    }
    if x.samples.len() != xr.samples.len() {
        return Err(Error::Contract(format!(
            "lengths differ: {} vs {}",
            x.samples.len(),
            xr.samples.len()
        )));
    }
    let mut total = 0.0f64;
    for scale in &cfg.scales {
        let mx = mel_spectrogram(x, scale);
        let mr = mel_spectrogram(xr, scale);
        let count = mx.len() * scale.n_mels;
        if count == 0 {
            continue;
        }
        let mut acc = 0.0f64;
        for (rx, rr) in mx.iter().zip(&mr) {
            for (a, b) in rx.iter().zip(rr) {
                acc += ((a + cfg.log_floor).ln() - (b + cfg.log_floor).ln()).abs();
            }
        }
        total += acc / count as f64;
    }
    Ok(total)
}

// =============================== tests ===============================
