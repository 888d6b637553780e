//! Paillier cryptosystem with the `g = N + 1` generator: multiplying
//! ciphertexts adds plaintexts, and raising a ciphertext to a plaintext
//! power multiplies the underlying value. Real-valued similarity scores
//! enter the plaintext space through a fixed-point codec.
//!
//! Randomness is supplied by the caller so key generation and encryption
//! stay deterministic under seeded RNGs and safe under concurrent use
//! (every call owns its own generator).

use alloc::vec;
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::RngCore;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PaillierError {
    #[error("key size must be an even number of bits, at least 512 (got {0})")]
    BadKeySize(u64),
    #[error("prime generation failed after {0} candidates")]
    PrimeGeneration(usize),
    #[error("plaintext out of range [0, N)")]
    PlaintextOutOfRange,
    #[error("scalar out of range [0, N)")]
    ScalarOutOfRange,
    #[error("ciphertext bound to a different key")]
    KeyMismatch,
    #[error("malformed ciphertext")]
    MalformedCiphertext,
    #[error("fixed-point scale must be positive")]
    BadScale,
    #[error("value not encodable: {0}")]
    EncodingOverflow(&'static str),
}

/// FNV-1a over the modulus bytes; binds ciphertexts to their key.
fn fingerprint(n: &BigUint) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for byte in n.to_bytes_be() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    n_squared: BigUint,
    bits: u64,
    key_id: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keypair {
    public: PublicKey,
    lambda: BigUint,
    mu: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    value: BigUint,
    key_id: u64,
}

impl Ciphertext {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn key_id(&self) -> u64 {
        self.key_id
    }

    /// Rebind raw ciphertext bytes received over the wire to a public key.
    pub fn from_value(value: BigUint, pk: &PublicKey) -> Result<Self, PaillierError> {
        if value >= *pk.n_squared() {
            return Err(PaillierError::MalformedCiphertext);
        }
        Ok(Self {
            value,
            key_id: pk.key_id,
        })
    }
}

impl PublicKey {
    /// Reconstruct a public key from its wire representation.
    pub fn from_parts(bits: u64, n: BigUint) -> Self {
        let n_squared = &n * &n;
        let key_id = fingerprint(&n);
        Self {
            n,
            n_squared,
            bits,
            key_id,
        }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn key_id(&self) -> u64 {
        self.key_id
    }

    /// Probabilistic encryption: `c = (1 + mN) * rho^N mod N^2` with fresh
    /// `rho` coprime to N.
    pub fn encrypt(
        &self,
        m: &BigUint,
        rng: &mut dyn RngCore,
    ) -> Result<Ciphertext, PaillierError> {
        if m >= &self.n {
            return Err(PaillierError::PlaintextOutOfRange);
        }
        let rho = loop {
            let candidate = sample_below(&self.n, rng);
            if !candidate.is_zero() && candidate.gcd(&self.n).is_one() {
                break candidate;
            }
        };
        let g_m = (BigUint::one() + m * &self.n) % &self.n_squared;
        let value = (g_m * rho.modpow(&self.n, &self.n_squared)) % &self.n_squared;
        Ok(Ciphertext {
            value,
            key_id: self.key_id,
        })
    }

    pub fn encrypt_u64(
        &self,
        m: u64,
        rng: &mut dyn RngCore,
    ) -> Result<Ciphertext, PaillierError> {
        self.encrypt(&BigUint::from(m), rng)
    }
}

impl Keypair {
    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    /// Decryption parts for serialization: (lambda, mu).
    pub fn secret_parts(&self) -> (&BigUint, &BigUint) {
        (&self.lambda, &self.mu)
    }

    /// Rebuild a keypair from stored components.
    pub fn from_parts(bits: u64, n: BigUint, lambda: BigUint, mu: BigUint) -> Self {
        Self {
            public: PublicKey::from_parts(bits, n),
            lambda,
            mu,
        }
    }

    /// `m = L(c^lambda mod N^2) * mu mod N` with `L(x) = (x - 1) / N`.
    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint, PaillierError> {
        if c.key_id != self.public.key_id {
            return Err(PaillierError::KeyMismatch);
        }
        if c.value >= self.public.n_squared || c.value.is_zero() {
            return Err(PaillierError::MalformedCiphertext);
        }
        let u = c.value.modpow(&self.lambda, &self.public.n_squared);
        let l = (u - BigUint::one()) / &self.public.n;
        Ok((l * &self.mu) % &self.public.n)
    }
}

/// Uniform sample in `[0, bound)`.
fn sample_below(bound: &BigUint, rng: &mut dyn RngCore) -> BigUint {
    let bits = bound.bits();
    let n_bytes = bits.div_ceil(8) as usize;
    let top_mask: u8 = if bits % 8 == 0 {
        0xff
    } else {
        (1u8 << (bits % 8)) - 1
    };
    loop {
        let mut buf = vec![0u8; n_bytes];
        rng.fill_bytes(&mut buf);
        buf[0] &= top_mask;
        let candidate = BigUint::from_bytes_be(&buf);
        if &candidate < bound {
            return candidate;
        }
    }
}

const SMALL_PRIMES: &[u32] = &[
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
    73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149,
    151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227,
    229, 233, 239, 241, 251,
];

const MILLER_RABIN_ROUNDS: usize = 32;

fn is_probable_prime(n: &BigUint, rng: &mut dyn RngCore) -> bool {
    for &p in SMALL_PRIMES {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let two = BigUint::from(2u32);
    let n_minus_1 = n - &one;
    // n - 1 = d * 2^s with d odd.
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = sample_below(&(n - BigUint::from(3u32)), rng) + &two;
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Random prime with exactly `bits` bits and the top two bits set, so the
/// product of two such primes has exactly `2 * bits` bits.
fn gen_prime(bits: u64, rng: &mut dyn RngCore) -> Result<BigUint, PaillierError> {
    let n_bytes = bits.div_ceil(8) as usize;
    let max_candidates = 100_000;
    for _ in 0..max_candidates {
        let mut buf = vec![0u8; n_bytes];
        rng.fill_bytes(&mut buf);
        let mut candidate = BigUint::from_bytes_be(&buf);
        candidate &= (BigUint::one() << bits) - BigUint::one();
        candidate |= BigUint::one() << (bits - 1);
        candidate |= BigUint::one() << (bits - 2);
        candidate |= BigUint::one();
        if is_probable_prime(&candidate, rng) {
            return Ok(candidate);
        }
    }
    Err(PaillierError::PrimeGeneration(max_candidates))
}

fn mod_inverse(a: &BigUint, modulus: &BigUint) -> Option<BigUint> {
    let a = BigInt::from(a.clone());
    let m = BigInt::from(modulus.clone());
    let ext = a.extended_gcd(&m);
    if !ext.gcd.is_one() {
        return None;
    }
    let mut x = ext.x % &m;
    if x.is_negative() {
        x += &m;
    }
    x.to_biguint()
}

/// Generate a keypair whose modulus has exactly `bits` bits.
pub fn keygen(bits: u64, rng: &mut dyn RngCore) -> Result<Keypair, PaillierError> {
    if bits < 512 || bits % 2 != 0 {
        return Err(PaillierError::BadKeySize(bits));
    }
    let half = bits / 2;
    loop {
        let p = gen_prime(half, rng)?;
        let q = gen_prime(half, rng)?;
        if p == q {
            continue;
        }
        let n = &p * &q;
        debug_assert_eq!(n.bits(), bits);
        let lambda = (p - BigUint::one()).lcm(&(q - BigUint::one()));
        // g = N + 1 makes L(g^lambda mod N^2) = lambda mod N.
        let Some(mu) = mod_inverse(&(&lambda % &n), &n) else {
            continue;
        };
        return Ok(Keypair {
            public: PublicKey::from_parts(bits, n),
            lambda,
            mu,
        });
    }
}

/// Homomorphic addition: `E(a + b) = E(a) * E(b) mod N^2`.
pub fn hom_add(
    pk: &PublicKey,
    a: &Ciphertext,
    b: &Ciphertext,
) -> Result<Ciphertext, PaillierError> {
    if a.key_id != pk.key_id || b.key_id != pk.key_id {
        return Err(PaillierError::KeyMismatch);
    }
    Ok(Ciphertext {
        value: (&a.value * &b.value) % &pk.n_squared,
        key_id: pk.key_id,
    })
}

/// Plaintext multiplication: `E(a * b) = E(a)^b mod N^2`.
pub fn hom_scale(
    pk: &PublicKey,
    a: &Ciphertext,
    b: &BigUint,
) -> Result<Ciphertext, PaillierError> {
    if a.key_id != pk.key_id {
        return Err(PaillierError::KeyMismatch);
    }
    if b >= &pk.n {
        return Err(PaillierError::ScalarOutOfRange);
    }
    Ok(Ciphertext {
        value: a.value.modpow(b, &pk.n_squared),
        key_id: pk.key_id,
    })
}

pub fn hom_scale_u64(
    pk: &PublicKey,
    a: &Ciphertext,
    b: u64,
) -> Result<Ciphertext, PaillierError> {
    hom_scale(pk, a, &BigUint::from(b))
}

/// Fixed-point encoding of reals into the non-negative plaintext space.
///
/// `encode(x) = round(x * scale)`; `max_magnitude` caps the encoded integer
/// so encoded values stay exactly representable and far from wraparound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointCodec {
    scale: u64,
    max_magnitude: u64,
}

impl FixedPointCodec {
    pub const DEFAULT_SCALE: u64 = 1_000_000;

    pub fn new(scale: u64) -> Result<Self, PaillierError> {
        if scale == 0 {
            return Err(PaillierError::BadScale);
        }
        Ok(Self {
            scale,
            max_magnitude: 1 << 53,
        })
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn max_magnitude(&self) -> u64 {
        self.max_magnitude
    }

    pub fn encode(&self, x: f64) -> Result<u64, PaillierError> {
        if !x.is_finite() {
            return Err(PaillierError::EncodingOverflow("non-finite value"));
        }
        if x < 0.0 {
            return Err(PaillierError::EncodingOverflow("negative value"));
        }
        let scaled = (x * self.scale as f64).round();
        if scaled > self.max_magnitude as f64 {
            return Err(PaillierError::EncodingOverflow("magnitude too large"));
        }
        Ok(scaled as u64)
    }

    pub fn decode(&self, m: u64) -> f64 {
        m as f64 / self.scale as f64
    }
}

impl Default for FixedPointCodec {
    fn default() -> Self {
        Self::new(Self::DEFAULT_SCALE).unwrap()
    }
}
