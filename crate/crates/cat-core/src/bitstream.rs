//! Serialized token format.
//!
//! Layout: a fixed 25-byte header followed by a dense bit field of code
//! indices — frame-major, layer innermost, each code written MSB-first in
//! `bits_per_code` bits, with the final byte zero-padded. Truncating a
//! stream to a shallower depth only drops bits; it never changes the codes
//! that survive.

use crate::error::{Error, Result};
use crate::rvq::TokenMatrix;

pub const MAGIC: &[u8; 4] = b"CAT1";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 25;

/// Smallest b with 2^b >= n (0 for n <= 1).
pub fn ceil_log2(n: u64) -> u8 {
    if n <= 1 {
        0
    } else {
        (64 - (n - 1).leading_zeros()) as u8
    }
}

/// Nominal token rate in bits per second.
pub fn bitrate_bps(n_layers: usize, codebook_size: usize, frame_rate: f64) -> f64 {
    n_layers as f64 * ceil_log2(codebook_size as u64) as f64 * frame_rate
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitstreamHeader {
    pub sample_rate: u32,
    pub samples_per_frame: u16,
    pub n_layers: u8,
    pub bits_per_code: u8,
    pub n_frames: u32,
    pub original_len_samples: u64,
}

impl BitstreamHeader {
    fn payload_len(&self) -> usize {
        let bits = self.n_frames as usize * self.n_layers as usize * self.bits_per_code as usize;
        bits.div_ceil(8)
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        out.extend_from_slice(&self.samples_per_frame.to_le_bytes());
        out.push(self.n_layers);
        out.push(self.bits_per_code);
        out.extend_from_slice(&self.n_frames.to_le_bytes());
        out.extend_from_slice(&self.original_len_samples.to_le_bytes());
    }

    fn read(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "{} bytes is shorter than the {}-byte header",
                bytes.len(),
                HEADER_LEN
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {}", bytes[4])));
        }
        Ok(BitstreamHeader {
            sample_rate: u32::from_le_bytes(bytes[5..9].try_into().unwrap()),
            samples_per_frame: u16::from_le_bytes(bytes[9..11].try_into().unwrap()),
            n_layers: bytes[11],
            bits_per_code: bytes[12],
            n_frames: u32::from_le_bytes(bytes[13..17].try_into().unwrap()),
            original_len_samples: u64::from_le_bytes(bytes[17..25].try_into().unwrap()),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(Error::Format("layer count must be at least 1".into()));
        }
        if self.bits_per_code == 0 || self.bits_per_code > 16 {
            return Err(Error::Format(format!(
                "bits per code {} outside 1..=16",
                self.bits_per_code
            )));
        }
        Ok(())
    }
}

pub fn pack(header: &BitstreamHeader, tokens: &TokenMatrix) -> Result<Vec<u8>> {
    header.validate()?;
    if tokens.depth != header.n_layers as usize || tokens.n_frames != header.n_frames as usize {
        return Err(Error::Contract(format!(
            "token matrix {}x{} does not match header {}x{}",
            tokens.n_frames, tokens.depth, header.n_frames, header.n_layers
        )));
    }
    let bits = header.bits_per_code as u32;
    let limit = 1u32 << bits;
    let mut out = Vec::with_capacity(HEADER_LEN + header.payload_len());
    header.write(&mut out);
    let mut acc: u32 = 0;
    let mut nbits: u32 = 0;
    for &code in &tokens.codes {
        if (code as u32) >= limit {
            return Err(Error::Contract(format!(
                "code {} does not fit in {} bits",
                code, bits
            )));
        }
        acc = (acc << bits) | code as u32;
        nbits += bits;
        while nbits >= 8 {
            out.push((acc >> (nbits - 8)) as u8);
            nbits -= 8;
            acc &= (1 << nbits) - 1;
        }
    }
    if nbits > 0 {
        out.push((acc << (8 - nbits)) as u8);
    }
    Ok(out)
}

pub fn unpack(bytes: &[u8]) -> Result<(BitstreamHeader, TokenMatrix)> {
    let header = BitstreamHeader::read(bytes)?;
    header.validate()?;
    let want = HEADER_LEN + header.payload_len();
    if bytes.len() != want {
        return Err(Error::Format(format!(
            "stream is {} bytes, header implies {}",
            bytes.len(),
            want
        )));
    }
    let bits = header.bits_per_code as u32;
    let n_codes = header.n_frames as usize * header.n_layers as usize;
    let mut codes = Vec::with_capacity(n_codes);
    let mut acc: u32 = 0;
    let mut nbits: u32 = 0;
    let mut iter = bytes[HEADER_LEN..].iter();
    while codes.len() < n_codes {
        while nbits < bits {
            let byte = iter.next().expect("payload length checked above");
            acc = (acc << 8) | *byte as u32;
            nbits += 8;
        }
        codes.push((acc >> (nbits - bits)) as u16);
        nbits -= bits;
        acc &= (1 << nbits) - 1;
    }
    let tokens = TokenMatrix::new(codes, header.n_frames as usize, header.n_layers as usize)?;
    Ok((header, tokens))
}

/// Re-serialize keeping only the first `k` layers of every frame.
/// Truncating to the stream's own depth is a byte-for-byte identity.
pub fn truncate_to_depth(bytes: &[u8], k: u8) -> Result<Vec<u8>> {
    let (header, tokens) = unpack(bytes)?;
    if k == 0 || k > header.n_layers {
        return Err(Error::Contract(format!(
            "truncation depth {} outside 1..={}",
            k, header.n_layers
        )));
    }
    let shallow = BitstreamHeader { n_layers: k, ..header };
    pack(&shallow, &tokens.truncated(k as usize)?)
}

// =============================== tests ===============================

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn header(n_frames: u32, n_layers: u8, bits: u8) -> BitstreamHeader {
        BitstreamHeader {
            sample_rate: 24_000,
            samples_per_frame: 1920,
            n_layers,
            bits_per_code: bits,
            n_frames,
            original_len_samples: n_frames as u64 * 1920,
        }
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(0), 0);
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(64), 6);
        assert_eq!(ceil_log2(1023), 10);
        assert_eq!(ceil_log2(1024), 10);
        assert_eq!(ceil_log2(1025), 11);
        assert_eq!(ceil_log2(u64::MAX), 64);
    }

    #[test]
    fn bitrate_values() {
        assert_eq!(bitrate_bps(8, 1024, 12.5), 1000.0);
        assert_eq!(bitrate_bps(32, 1024, 12.5), 4000.0);
        assert_eq!(bitrate_bps(1, 64, 12.5), 75.0);
    }

    #[test]
    fn single_code_bit_layout() {
        let tokens = TokenMatrix::new(vec![0b1010101010], 1, 1).unwrap();
        let bytes = pack(&header(1, 1, 10), &tokens).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 2);
        assert_eq!(&bytes[HEADER_LEN..], &[0xAA, 0x80]);
    }

    #[test]
    fn header_byte_layout() {
        let tokens = TokenMatrix::new(vec![1], 1, 1).unwrap();
        let h = BitstreamHeader {
            sample_rate: 24_000,
            samples_per_frame: 1920,
            n_layers: 1,
            bits_per_code: 10,
            n_frames: 1,
            original_len_samples: 1900,
        };
        let bytes = pack(&h, &tokens).unwrap();
        assert_eq!(&bytes[0..4], b"CAT1");
        assert_eq!(bytes[4], 1);
        assert_eq!(&bytes[5..9], &24_000u32.to_le_bytes());
        assert_eq!(&bytes[9..11], &1920u16.to_le_bytes());
        assert_eq!(bytes[11], 1);
        assert_eq!(bytes[12], 10);
        assert_eq!(&bytes[13..17], &1u32.to_le_bytes());
        assert_eq!(&bytes[17..25], &1900u64.to_le_bytes());
    }

    #[test]
    fn empty_stream_round_trips() {
        let tokens = TokenMatrix::new(vec![], 0, 4).unwrap();
        let bytes = pack(&header(0, 4, 10), &tokens).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN);
        let (h, t) = unpack(&bytes).unwrap();
        assert_eq!(h, header(0, 4, 10));
        assert_eq!(t.n_frames, 0);
    }

    #[test]
    fn rejects_malformed_streams() {
        let tokens = TokenMatrix::new(vec![3, 1], 1, 2).unwrap();
        let good = pack(&header(1, 2, 4), &tokens).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(unpack(&bad_magic), Err(Error::Format(_))));

        let mut bad_version = good.clone();
        bad_version[4] = 9;
        assert!(matches!(unpack(&bad_version), Err(Error::Format(_))));

        assert!(matches!(unpack(&good[..good.len() - 1]), Err(Error::Format(_))));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(unpack(&long), Err(Error::Format(_))));
        assert!(matches!(unpack(&good[..10]), Err(Error::Format(_))));

        // code too wide for the declared bit width
        let wide = TokenMatrix::new(vec![16], 1, 1).unwrap();
        assert!(matches!(pack(&header(1, 1, 4), &wide), Err(Error::Contract(_))));
        // header/matrix shape mismatch
        assert!(matches!(pack(&header(2, 2, 4), &tokens), Err(Error::Contract(_))));
    }

    #[test]
    fn truncation_identity_and_nesting() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let codes: Vec<u16> = (0..40).map(|_| rng.random_range(0..1024)).collect();
        let tokens = TokenMatrix::new(codes, 5, 8).unwrap();
        let bytes = pack(&header(5, 8, 10), &tokens).unwrap();

        assert_eq!(truncate_to_depth(&bytes, 8).unwrap(), bytes);

        let three = truncate_to_depth(&bytes, 3).unwrap();
        let (h3, t3) = unpack(&three).unwrap();
        assert_eq!(h3.n_layers, 3);
        assert_eq!(t3, tokens.truncated(3).unwrap());
        // truncating further commutes with truncating once
        assert_eq!(
            truncate_to_depth(&three, 2).unwrap(),
            truncate_to_depth(&bytes, 2).unwrap()
        );

        assert!(matches!(truncate_to_depth(&bytes, 9), Err(Error::Contract(_))));
        assert!(matches!(truncate_to_depth(&bytes, 0), Err(Error::Contract(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn round_trip(
            n_frames in 0usize..40,
            n_layers in 1usize..33,
            bits in 1u8..13,
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let limit = 1u32 << bits;
            let codes: Vec<u16> = (0..n_frames * n_layers)
                .map(|_| rng.random_range(0..limit) as u16)
                .collect();
            let tokens = TokenMatrix::new(codes, n_frames, n_layers).unwrap();
            let h = header(n_frames as u32, n_layers as u8, bits);
            let bytes = pack(&h, &tokens).unwrap();
            prop_assert_eq!(bytes.len(), HEADER_LEN + (n_frames * n_layers * bits as usize).div_ceil(8));
            let (h2, t2) = unpack(&bytes).unwrap();
            prop_assert_eq!(h2, h);
            prop_assert_eq!(t2, tokens);
        }
    }
}
