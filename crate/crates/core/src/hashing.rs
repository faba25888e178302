//! The `b`-bit hash primitive shared by the tree code and the simulator.
//!
//! Two flavors exist. [`HashAlgorithm::Sha256Truncated`] keeps the most
//! significant `b` bits of SHA-256. [`HashAlgorithm::IdealOracle`] is a lazily
//! memoized random function: every distinct input gets an independent uniform
//! `b`-bit value derived from a seed, so two distinct inputs collide with
//! probability exactly `2^-b`.
//!
//! A digest of `b` bits is stored left-aligned in `ceil(b / 8)` bytes, with the
//! unused low bits of the final byte zeroed.

use std::collections::HashMap;
use std::fmt;

use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};

pub const SHA256_MAX_BITS: u32 = 256;
pub const ORACLE_MAX_BITS: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HashAlgorithm {
    Sha256Truncated,
    IdealOracle,
}

impl HashAlgorithm {
    pub fn max_bits(self) -> u32 {
        match self {
            HashAlgorithm::Sha256Truncated => SHA256_MAX_BITS,
            HashAlgorithm::IdealOracle => ORACLE_MAX_BITS,
        }
    }
}

impl fmt::Display for HashAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HashAlgorithm::Sha256Truncated => "sha256",
            HashAlgorithm::IdealOracle => "ideal",
        })
    }
}

/// Hash flavor plus output width in bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HashSpec {
    algorithm: HashAlgorithm,
    bits: u32,
}

impl HashSpec {
    pub fn new(algorithm: HashAlgorithm, bits: u32) -> Result<Self> {
        if bits == 0 || bits > algorithm.max_bits() {
            return Err(Error::Config(format!(
                "{algorithm} hash supports 1..={} bits, got {bits}",
                algorithm.max_bits()
            )));
        }
        Ok(Self { algorithm, bits })
    }

    pub fn sha256(bits: u32) -> Result<Self> {
        Self::new(HashAlgorithm::Sha256Truncated, bits)
    }

    pub fn ideal(bits: u32) -> Result<Self> {
        Self::new(HashAlgorithm::IdealOracle, bits)
    }

    pub fn algorithm(&self) -> HashAlgorithm {
        self.algorithm
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Number of bytes in a digest of this width.
    pub fn byte_len(&self) -> usize {
        byte_len(self.bits)
    }
}

fn byte_len(bits: u32) -> usize {
    bits.div_ceil(8) as usize
}

/// Mask selecting the meaningful bits of the final digest byte.
fn tail_mask(bits: u32) -> u8 {
    match bits % 8 {
        0 => 0xff,
        r => 0xffu8 << (8 - r),
    }
}

/// A `bit_length`-bit hash value, left-aligned with zeroed pad bits.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Digest {
    bytes: Vec<u8>,
    bit_length: u32,
}

impl Digest {
    /// Builds a digest from padded bytes, rejecting wrong lengths or set pad bits.
    pub fn from_bytes(bytes: Vec<u8>, bit_length: u32) -> Result<Self> {
        if bit_length == 0 {
            return Err(Error::Usage("digest bit length must be positive".into()));
        }
        if bytes.len() != byte_len(bit_length) {
            return Err(Error::Usage(format!(
                "a {bit_length}-bit digest needs {} bytes, got {}",
                byte_len(bit_length),
                bytes.len()
            )));
        }
        let last = *bytes.last().expect("non-empty");
        if last & !tail_mask(bit_length) != 0 {
            return Err(Error::Usage(format!(
                "pad bits below bit {bit_length} must be zero"
            )));
        }
        Ok(Self { bytes, bit_length })
    }

    /// Keeps the leading `bits` bits of `full`, zeroing whatever is left over.
    pub(crate) fn truncate(full: &[u8], bits: u32) -> Self {
        let mut bytes = full[..byte_len(bits)].to_vec();
        if let Some(last) = bytes.last_mut() {
            *last &= tail_mask(bits);
        }
        Self {
            bytes,
            bit_length: bits,
        }
    }

    /// Takes the low `bits` bits of `value` (`bits <= 64`) as a digest.
    pub(crate) fn from_low_bits(value: u64, bits: u32) -> Self {
        debug_assert!((1..=64).contains(&bits));
        let v = if bits == 64 {
            value
        } else {
            value & ((1u64 << bits) - 1)
        };
        let left_aligned = v << (64 - bits);
        Self::truncate(&left_aligned.to_be_bytes(), bits)
    }

    /// Random digest with uniform bits; pad bits are cleared.
    pub(crate) fn random<R: rand::RngCore + ?Sized>(rng: &mut R, bits: u32) -> Self {
        let mut bytes = vec![0u8; byte_len(bits)];
        rng.fill_bytes(&mut bytes);
        *bytes.last_mut().expect("non-empty") &= tail_mask(bits);
        Self {
            bytes,
            bit_length: bits,
        }
    }

    pub fn from_hex(s: &str, bit_length: u32) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Parse(format!("bad hex digest {s:?}: {e}")))?;
        Self::from_bytes(bytes, bit_length).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit_length(&self) -> u32 {
        self.bit_length
    }

    /// Lowercase hex of the padded byte representation.
    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}/{}b)", self.to_hex(), self.bit_length)
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Memoized random oracle state.
///
/// A fresh input `x` is assigned the low `b` bits of the last eight bytes
/// (big-endian) of `SHA-256(seed_le ‖ x)`. The table only caches that value,
/// so answers never depend on query order.
#[derive(Clone, Debug)]
pub struct OracleState {
    seed: u64,
    table: HashMap<Vec<u8>, Digest>,
}

impl OracleState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            table: HashMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of distinct inputs answered so far.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    fn query(&mut self, input: &[u8], bits: u32) -> Digest {
        if let Some(d) = self.table.get(input) {
            if d.bit_length == bits {
                return d.clone();
            }
        }
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(input);
        let full = hasher.finalize();
        let word = u64::from_be_bytes(full[24..32].try_into().expect("8 bytes"));
        let d = Digest::from_low_bits(word, bits);
        self.table.insert(input.to_vec(), d.clone());
        d
    }
}

/// Hashes `input` to a `spec.bits()`-bit digest.
///
/// `oracle` must be supplied exactly when the spec selects the ideal oracle.
pub fn hash_bytes(input: &[u8], spec: &HashSpec, oracle: Option<&mut OracleState>) -> Result<Digest> {
    match (spec.algorithm, oracle) {
        (HashAlgorithm::Sha256Truncated, None) => Ok(sha256_truncated(input, spec.bits)),
        (HashAlgorithm::IdealOracle, Some(state)) => Ok(state.query(input, spec.bits)),
        (HashAlgorithm::Sha256Truncated, Some(_)) => Err(Error::Usage(
            "sha256-truncated hashing does not take an oracle state".into(),
        )),
        (HashAlgorithm::IdealOracle, None) => Err(Error::Usage(
            "ideal-oracle hashing requires an oracle state".into(),
        )),
    }
}

/// `H(left ‖ right)` over the padded byte representations.
pub fn hash_concat(
    left: &Digest,
    right: &Digest,
    spec: &HashSpec,
    oracle: Option<&mut OracleState>,
) -> Result<Digest> {
    if left.bit_length != spec.bits || right.bit_length != spec.bits {
        return Err(Error::Usage(format!(
            "cannot combine {}-bit and {}-bit digests under a {}-bit hash",
            left.bit_length, right.bit_length, spec.bits
        )));
    }
    let mut buf = Vec::with_capacity(left.bytes.len() + right.bytes.len());
    buf.extend_from_slice(&left.bytes);
    buf.extend_from_slice(&right.bytes);
    hash_bytes(&buf, spec, oracle)
}

fn sha256_truncated(input: &[u8], bits: u32) -> Digest {
    Digest::truncate(&Sha256::digest(input), bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ABC: &str = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";

    #[test]
    fn abc_full_width() {
        let spec = HashSpec::sha256(256).unwrap();
        assert_eq!(hash_bytes(b"abc", &spec, None).unwrap().to_hex(), ABC);
    }

    #[test]
    fn abc_truncated() {
        let d8 = hash_bytes(b"abc", &HashSpec::sha256(8).unwrap(), None).unwrap();
        assert_eq!(d8.as_bytes(), &[0xba]);
        assert_eq!(d8.bit_length(), 8);

        let d4 = hash_bytes(b"abc", &HashSpec::sha256(4).unwrap(), None).unwrap();
        assert_eq!(d4.as_bytes(), &[0xb0]);
        assert_eq!(d4.bit_length(), 4);

        let d12 = hash_bytes(b"abc", &HashSpec::sha256(12).unwrap(), None).unwrap();
        assert_eq!(d12.as_bytes(), &[0xba, 0x70]);
    }

    #[test]
    fn bit_ranges() {
        assert!(matches!(HashSpec::sha256(0), Err(Error::Config(_))));
        assert!(matches!(HashSpec::sha256(257), Err(Error::Config(_))));
        assert!(HashSpec::sha256(256).is_ok());
        assert!(matches!(HashSpec::ideal(65), Err(Error::Config(_))));
        assert!(HashSpec::ideal(64).is_ok());
    }

    #[test]
    fn oracle_presence_must_match_algorithm() {
        let mut st = OracleState::new(1);
        let sha = HashSpec::sha256(8).unwrap();
        let ideal = HashSpec::ideal(8).unwrap();
        assert!(matches!(hash_bytes(b"x", &sha, Some(&mut st)), Err(Error::Usage(_))));
        assert!(matches!(hash_bytes(b"x", &ideal, None), Err(Error::Usage(_))));
    }

    #[test]
    fn concat_is_hash_of_joined_bytes() {
        let spec = HashSpec::sha256(256).unwrap();
        let d = hash_bytes(b"abc", &spec, None).unwrap();
        let mut joined = d.as_bytes().to_vec();
        joined.extend_from_slice(d.as_bytes());
        assert_eq!(
            hash_concat(&d, &d, &spec, None).unwrap(),
            hash_bytes(&joined, &spec, None).unwrap()
        );

        let spec8 = HashSpec::sha256(8).unwrap();
        let ba = Digest::from_bytes(vec![0xba], 8).unwrap();
        assert_eq!(
            hash_concat(&ba, &ba, &spec8, None).unwrap(),
            hash_bytes(&[0xba, 0xba], &spec8, None).unwrap()
        );
    }

    #[test]
    fn concat_rejects_width_mismatch() {
        let spec = HashSpec::sha256(8).unwrap();
        let a = Digest::from_bytes(vec![0xba], 8).unwrap();
        let b = Digest::from_bytes(vec![0xb0], 4).unwrap();
        assert!(matches!(hash_concat(&a, &b, &spec, None), Err(Error::Usage(_))));
    }

    #[test]
    fn oracle_memoizes_and_pads() {
        let spec = HashSpec::ideal(4).unwrap();
        let mut st = OracleState::new(99);
        let a = hash_bytes(b"payload", &spec, Some(&mut st)).unwrap();
        let b = hash_bytes(b"payload", &spec, Some(&mut st)).unwrap();
        assert_eq!(a, b);
        assert_eq!(st.len(), 1);
        assert_eq!(a.as_bytes()[0] & 0x0f, 0);

        let c = hash_concat(&a, &b, &spec, Some(&mut st)).unwrap();
        assert_eq!(c.bit_length(), 4);
        assert_eq!(c.as_bytes()[0] & 0x0f, 0);

        // A fresh state with the same seed answers identically.
        let mut other = OracleState::new(99);
        assert_eq!(hash_bytes(b"payload", &spec, Some(&mut other)).unwrap(), a);
    }

    #[test]
    fn oracle_marginal_uniformity() {
        let spec = HashSpec::ideal(4).unwrap();
        let mut st = OracleState::new(2024);
        let n = 100_000u64;
        let mut counts = [0u64; 16];
        for i in 0..n {
            let d = hash_bytes(&i.to_le_bytes(), &spec, Some(&mut st)).unwrap();
            counts[(d.as_bytes()[0] >> 4) as usize] += 1;
        }
        let mean = n as f64 / 16.0;
        let sd = (n as f64 * (1.0 / 16.0) * (15.0 / 16.0)).sqrt();
        for (v, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - mean).abs() <= 5.0 * sd,
                "value {v} occurred {c} times"
            );
        }
    }

    #[test]
    fn digest_from_bytes_checks() {
        assert!(Digest::from_bytes(vec![0xb1], 4).is_err());
        assert!(Digest::from_bytes(vec![0xb0, 0], 4).is_err());
        assert!(Digest::from_bytes(vec![], 0).is_err());
        assert!(Digest::from_hex("zz", 8).is_err());
        assert_eq!(Digest::from_hex("b0", 4).unwrap().as_bytes(), &[0xb0]);
    }

    proptest! {
        #[test]
        fn truncation_is_prefix(input in proptest::collection::vec(any::<u8>(), 0..64),
                                b1 in 1u32..=256, b2 in 1u32..=256) {
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            let short = hash_bytes(&input, &HashSpec::sha256(lo).unwrap(), None).unwrap();
            let long = hash_bytes(&input, &HashSpec::sha256(hi).unwrap(), None).unwrap();
            prop_assert_eq!(short, Digest::truncate(long.as_bytes(), lo));
        }

        #[test]
        fn pad_bits_always_zero(input in proptest::collection::vec(any::<u8>(), 0..32),
                                bits in 1u32..=64, seed in any::<u64>()) {
            let sha = hash_bytes(&input, &HashSpec::sha256(bits).unwrap(), None).unwrap();
            let mut st = OracleState::new(seed);
            let ideal = hash_bytes(&input, &HashSpec::ideal(bits).unwrap(), Some(&mut st)).unwrap();
            for d in [sha, ideal] {
                prop_assert_eq!(d.as_bytes().len(), bits.div_ceil(8) as usize);
                prop_assert_eq!(d.as_bytes().last().unwrap() & !tail_mask(bits), 0);
            }
        }
    }
}
