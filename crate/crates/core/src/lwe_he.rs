//! Toy additive LWE encryption over Z_q with binary secrets and p = 2.
//!
//! A bit `m` is encoded as `m * floor(q/2)`. Decryption computes the phase
//! `d = (body - <mask, sk>) mod q` and returns `round(2d / q) mod 2`, halves
//! rounding up. Only XOR/NOT are homomorphic. Key switching and modulus
//! switching are provided for the scheme layer.
//!
//! Noise is tracked as a worst-case bound. `noise_budget` holds the headroom
//! left before the bound reaches [`LweParams::error_capacity`], the largest
//! error for which both bits still decode. For odd `q` every addition of two
//! encodings can also carry `-1` into the phase (`2 * floor(q/2) = q - 1`),
//! which the bound accounts for.

use crate::canon::{dec, dec_vec};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LweParams {
    #[serde(with = "dec")]
    pub n: usize,
    #[serde(with = "dec")]
    pub q: u64,
    #[serde(with = "dec")]
    pub p: u64,
    #[serde(with = "dec")]
    pub error_bound: u64,
    /// Number of key levels (L + 1).
    #[serde(with = "dec")]
    pub levels: usize,
    /// Declared maximum XOR chain length K.
    #[serde(with = "dec")]
    pub xor_budget: u64,
}

const MAX_Q: u64 = 1 << 62;

impl LweParams {
    /// The desk-scale instance: n = 4, q = 17, B = 1, two key levels.
    pub fn t1() -> Self {
        LweParams {
            n: 4,
            q: 17,
            p: 2,
            error_bound: 1,
            levels: 2,
            xor_budget: 1,
        }
    }

    /// Working parameters for pad ciphertexts: same dimension, q = 2^32.
    pub fn working(n: usize, levels: usize) -> Self {
        LweParams {
            n,
            q: 1 << 32,
            p: 2,
            error_bound: 1,
            levels,
            xor_budget: 1 << 20,
        }
    }

    /// Parameters with the largest XOR budget the exact rule allows.
    pub fn with_max_budget(n: usize, q: u64, error_bound: u64, levels: usize) -> Self {
        let mut p = LweParams {
            n,
            q,
            p: 2,
            error_bound,
            levels,
            xor_budget: 0,
        };
        p.xor_budget = p.max_xor_budget();
        p
    }

    pub fn delta(&self) -> u64 {
        self.q / 2
    }

    pub fn is_odd(&self) -> bool {
        self.q % 2 == 1
    }

    /// Carry added to the error bound by one homomorphic addition.
    pub fn carry(&self) -> u64 {
        u64::from(self.is_odd())
    }

    /// Largest `E` such that every error in `[-E, E]` decodes correctly for both bits.
    pub fn error_capacity(&self) -> u64 {
        error_capacity(self.q)
    }

    /// Largest K with `(K+1) * B + K * carry <= error_capacity`, capped at 2^40.
    pub fn max_xor_budget(&self) -> u64 {
        let cap = self.error_capacity();
        let step = self.error_bound + self.carry();
        if self.error_bound > cap {
            return 0;
        }
        if step == 0 {
            return 1 << 40;
        }
        ((cap - self.error_bound) / step).min(1 << 40)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Parameter("n must be at least 1".into()));
        }
        if self.p != 2 {
            return Err(Error::Parameter(format!("plaintext modulus must be 2, got {}", self.p)));
        }
        if self.levels == 0 {
            return Err(Error::Parameter("at least one key level is required".into()));
        }
        let k1 = u128::from(self.xor_budget) + 1;
        if u128::from(self.q) <= 4 * u128::from(self.error_bound) * k1 {
            return Err(Error::Parameter(format!(
                "q = {} must exceed 4 * error_bound * (budget + 1) = {}",
                self.q,
                4 * u128::from(self.error_bound) * k1
            )));
        }
        if self.q < 17 || self.q > MAX_Q {
            return Err(Error::Parameter(format!("q = {} outside [17, 2^62]", self.q)));
        }
        if self.is_odd() {
            if !is_prime(self.q)? {
                return Err(Error::Parameter(format!("odd q = {} is not prime", self.q)));
            }
        } else if !self.q.is_power_of_two() {
            return Err(Error::Parameter(format!("even q = {} is not a power of two", self.q)));
        }
        if self.xor_budget > self.max_xor_budget() {
            return Err(Error::Parameter(format!(
                "budget {} exceeds the exact worst-case limit {} for q = {}, B = {}",
                self.xor_budget,
                self.max_xor_budget(),
                self.q,
                self.error_bound
            )));
        }
        Ok(())
    }
}

fn is_prime(q: u64) -> Result<bool> {
    if q >= 1 << 40 {
        return Err(Error::Parameter("odd moduli above 2^40 are not supported".into()));
    }
    if q < 2 {
        return Ok(false);
    }
    let mut d = 2u64;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return Ok(false);
        }
        d += 1;
    }
    Ok(true)
}

/// `round(2d / q) mod 2` with halves rounding up, for `d` in `[0, q)`.
pub fn decode_phase(d: u64, q: u64) -> u8 {
    let d = u128::from(d % q);
    let q = u128::from(q);
    (((4 * d + q) / (2 * q)) % 2) as u8
}

pub fn error_capacity(q: u64) -> u64 {
    let delta = q / 2;
    let ok = |e: u64| {
        let e = e % q;
        decode_phase(e, q) == 0
            && decode_phase((q - e) % q, q) == 0
            && decode_phase((delta + e) % q, q) == 1
            && decode_phase((delta + q - e) % q, q) == 1
    };
    let (mut lo, mut hi) = (0u64, q / 2);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretKey {
    #[serde(with = "dec_vec")]
    pub bits: Vec<u8>,
    #[serde(with = "dec")]
    pub level: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LweCiphertext {
    pub params: LweParams,
    #[serde(with = "dec")]
    pub level: usize,
    #[serde(with = "dec_vec")]
    pub mask: Vec<u64>,
    #[serde(with = "dec")]
    pub body: u64,
    #[serde(with = "dec")]
    pub noise_budget: u64,
}

impl LweCiphertext {
    /// Worst-case |error| implied by the remaining budget.
    pub fn error_bound(&self) -> u64 {
        self.params.error_capacity() - self.noise_budget.min(self.params.error_capacity())
    }

    /// Fixed-width binary encoding: level, mask, body, budget as 8-byte words.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (self.mask.len() + 3));
        out.extend_from_slice(&(self.level as u64).to_le_bytes());
        for m in &self.mask {
            out.extend_from_slice(&m.to_le_bytes());
        }
        out.extend_from_slice(&self.body.to_le_bytes());
        out.extend_from_slice(&self.noise_budget.to_le_bytes());
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicKey {
    pub params: LweParams,
    #[serde(with = "dec")]
    pub level: usize,
    pub samples: Vec<LweCiphertext>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyChain {
    pub params: LweParams,
    pub pairs: Vec<(SecretKey, PublicKey)>,
}

impl KeyChain {
    pub fn secret(&self, level: usize) -> Result<&SecretKey> {
        self.pairs
            .get(level)
            .map(|p| &p.0)
            .ok_or(Error::KeyLevel { expected: level, found: self.pairs.len() })
    }

    pub fn public(&self, level: usize) -> Result<&PublicKey> {
        self.pairs
            .get(level)
            .map(|p| &p.1)
            .ok_or(Error::KeyLevel { expected: level, found: self.pairs.len() })
    }
}

fn pk_sample_count(n: usize) -> usize {
    2 * n + 8
}

pub fn he_keygen(params: &LweParams, rng_seed: u64) -> Result<KeyChain> {
    params.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let pairs = (0..params.levels)
        .map(|level| {
            let sk = SecretKey {
                bits: (0..params.n).map(|_| rng.gen_range(0..2u8)).collect(),
                level,
            };
            let pk = public_key_for(&sk, params, &mut rng);
            (sk, pk)
        })
        .collect();
    Ok(KeyChain { params: params.clone(), pairs })
}

/// Public key for an existing secret under (possibly different) parameters.
/// Samples are exact encryptions of 0; fresh noise is added per encryption.
pub fn public_key_for<R: Rng>(sk: &SecretKey, params: &LweParams, rng: &mut R) -> PublicKey {
    let samples = (0..pk_sample_count(params.n))
        .map(|_| {
            let mask: Vec<u64> = (0..params.n).map(|_| rng.gen_range(0..params.q)).collect();
            let body = inner(&mask, &sk.bits, params.q);
            LweCiphertext {
                params: params.clone(),
                level: sk.level,
                mask,
                body,
                noise_budget: params.error_capacity(),
            }
        })
        .collect();
    PublicKey { params: params.clone(), level: sk.level, samples }
}

pub(crate) fn inner(mask: &[u64], bits: &[u8], q: u64) -> u64 {
    mask.iter()
        .zip(bits)
        .filter(|(_, &s)| s == 1)
        .fold(0u64, |acc, (&m, _)| add_mod(acc, m, q))
}

fn add_mod(a: u64, b: u64, q: u64) -> u64 {
    ((u128::from(a) + u128::from(b)) % u128::from(q)) as u64
}

fn sub_mod(a: u64, b: u64, q: u64) -> u64 {
    add_mod(a, q - (b % q), q)
}

fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((u128::from(a) * u128::from(b)) % u128::from(q)) as u64
}

fn signed_mod(e: i64, q: u64) -> u64 {
    let r = i128::from(e).rem_euclid(i128::from(q));
    r as u64
}

pub fn he_encrypt(pk: &PublicKey, bit: u8, rng_seed: u64) -> Result<LweCiphertext> {
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    encrypt_with_rng(pk, bit, &mut rng)
}

pub fn encrypt_with_rng<R: Rng>(pk: &PublicKey, bit: u8, rng: &mut R) -> Result<LweCiphertext> {
    let b = pk.params.error_bound as i64;
    let e = rng.gen_range(-b..=b);
    let mut ct = encrypt_raw(pk, u64::from(check_bit(bit)?) * pk.params.delta(), e, rng);
    ct.noise_budget = pk.params.error_capacity().saturating_sub(pk.params.error_bound);
    Ok(ct)
}

/// Encryption of `bit` with a caller-chosen error (zero for exact key material).
pub fn encrypt_with_error<R: Rng>(pk: &PublicKey, bit: u8, e: i64, rng: &mut R) -> Result<LweCiphertext> {
    let mut ct = encrypt_raw(pk, u64::from(check_bit(bit)?) * pk.params.delta(), e, rng);
    ct.noise_budget = pk.params.error_capacity().saturating_sub(e.unsigned_abs());
    Ok(ct)
}

/// Subset-sum encryption of an unscaled message `m` in Z_q.
pub fn encrypt_raw<R: Rng>(pk: &PublicKey, m: u64, e: i64, rng: &mut R) -> LweCiphertext {
    let q = pk.params.q;
    let mut mask = vec![0u64; pk.params.n];
    let mut body = 0u64;
    for s in &pk.samples {
        if rng.gen::<bool>() {
            for (acc, &x) in mask.iter_mut().zip(&s.mask) {
                *acc = add_mod(*acc, x, q);
            }
            body = add_mod(body, s.body, q);
        }
    }
    body = add_mod(body, add_mod(m % q, signed_mod(e, q), q), q);
    LweCiphertext {
        params: pk.params.clone(),
        level: pk.level,
        mask,
        body,
        noise_budget: pk.params.error_capacity().saturating_sub(pk.params.error_bound),
    }
}

/// Secret-key encryption with an explicit mask and error.
pub fn encrypt_with_mask(
    sk: &SecretKey,
    params: &LweParams,
    mask: &[u64],
    e: i64,
    bit: u8,
) -> Result<LweCiphertext> {
    if mask.len() != params.n || sk.bits.len() != params.n {
        return Err(Error::Input(format!("mask and key must have length n = {}", params.n)));
    }
    let q = params.q;
    let mask: Vec<u64> = mask.iter().map(|m| m % q).collect();
    let body = add_mod(
        add_mod(inner(&mask, &sk.bits, q), signed_mod(e, q), q),
        u64::from(check_bit(bit)?) * params.delta(),
        q,
    );
    Ok(LweCiphertext {
        params: params.clone(),
        level: sk.level,
        mask,
        body,
        noise_budget: params.error_capacity().saturating_sub(e.unsigned_abs()),
    })
}

fn check_bit(bit: u8) -> Result<u8> {
    if bit > 1 {
        return Err(Error::Input(format!("plaintext must be a bit, got {bit}")));
    }
    Ok(bit)
}

/// Raw phase `(body - <mask, sk>) mod q`.
pub fn he_phase(sk: &SecretKey, ct: &LweCiphertext) -> Result<u64> {
    if ct.level != sk.level {
        return Err(Error::KeyLevel { expected: sk.level, found: ct.level });
    }
    if ct.mask.len() != sk.bits.len() {
        return Err(Error::Input(format!(
            "ciphertext dimension {} does not match key dimension {}",
            ct.mask.len(),
            sk.bits.len()
        )));
    }
    Ok(sub_mod(ct.body, inner(&ct.mask, &sk.bits, ct.params.q), ct.params.q))
}

pub fn he_decrypt(sk: &SecretKey, ct: &LweCiphertext) -> Result<u8> {
    Ok(decode_phase(he_phase(sk, ct)?, ct.params.q))
}

/// Exact NOT: `(-a, floor(q/2) - b)` negates the error and flips the bit.
pub fn he_not(ct: &LweCiphertext) -> LweCiphertext {
    let q = ct.params.q;
    LweCiphertext {
        mask: ct.mask.iter().map(|&m| (q - m) % q).collect(),
        body: sub_mod(ct.params.delta(), ct.body, q),
        ..ct.clone()
    }
}

/// XOR of all ciphertexts and plaintext bits.
pub fn he_eval_linear(cts: &[LweCiphertext], plain_bits: &[u8]) -> Result<LweCiphertext> {
    let first = cts
        .first()
        .ok_or_else(|| Error::Input("at least one ciphertext is required".into()))?;
    let params = &first.params;
    let q = params.q;
    let mut mask = vec![0u64; first.mask.len()];
    let mut body = 0u64;
    let mut err = 0u64;
    for ct in cts {
        if ct.level != first.level {
            return Err(Error::KeyLevel { expected: first.level, found: ct.level });
        }
        if ct.params != *params {
            return Err(Error::Parameter("ciphertexts use different parameters".into()));
        }
        for (acc, &x) in mask.iter_mut().zip(&ct.mask) {
            *acc = add_mod(*acc, x, q);
        }
        body = add_mod(body, ct.body, q);
        err = err.saturating_add(ct.error_bound());
    }
    err = err.saturating_add(params.carry() * (cts.len() as u64 - 1));
    let cap = params.error_capacity();
    if err > cap {
        return Err(Error::Noise(format!(
            "XOR of {} ciphertexts reaches error bound {err}, capacity is {cap}",
            cts.len()
        )));
    }
    let mut parity = 0u8;
    for &b in plain_bits {
        parity ^= check_bit(b)?;
    }
    let out = LweCiphertext {
        params: params.clone(),
        level: first.level,
        mask,
        body,
        noise_budget: cap - err,
    };
    Ok(if parity == 1 { he_not(&out) } else { out })
}

/// Affine combination `constant + sum coeff_i * ct_i` over Z_q, read back with
/// [`he_phase`]. Exact when every input is noise-free.
pub fn he_eval_affine(constant: u64, terms: &[(u64, &LweCiphertext)]) -> Result<LweCiphertext> {
    let (_, first) = terms
        .first()
        .ok_or_else(|| Error::Input("at least one term is required".into()))?;
    let params = &first.params;
    let q = params.q;
    let mut mask = vec![0u64; first.mask.len()];
    let mut body = constant % q;
    let mut err = 0u128;
    for (coeff, ct) in terms {
        if ct.level != first.level {
            return Err(Error::KeyLevel { expected: first.level, found: ct.level });
        }
        if ct.params != *params {
            return Err(Error::Parameter("ciphertexts use different parameters".into()));
        }
        let c = coeff % q;
        for (acc, &x) in mask.iter_mut().zip(&ct.mask) {
            *acc = add_mod(*acc, mul_mod(c, x, q), q);
        }
        body = add_mod(body, mul_mod(c, ct.body, q), q);
        let centered = c.min(q - c);
        err += u128::from(centered) * u128::from(ct.error_bound());
    }
    let cap = u128::from(params.error_capacity());
    Ok(LweCiphertext {
        params: params.clone(),
        level: first.level,
        mask,
        body,
        noise_budget: cap.saturating_sub(err) as u64,
    })
}

/// Key-switching key: `entries[j][k]` encrypts `s_from[j] * 2^k` raw under the target key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeySwitchKey {
    pub params: LweParams,
    #[serde(with = "dec")]
    pub from_level: usize,
    #[serde(with = "dec")]
    pub to_level: usize,
    pub entries: Vec<Vec<LweCiphertext>>,
}

pub fn ks_keygen<R: Rng>(from: &SecretKey, to_pk: &PublicKey, rng: &mut R) -> KeySwitchKey {
    let params = &to_pk.params;
    let digits = crate::ceil_log2(params.q);
    let b = params.error_bound as i64;
    let entries = from
        .bits
        .iter()
        .map(|&s| {
            (0..digits)
                .map(|k| {
                    let m = u64::from(s) * ((1u128 << k) % u128::from(params.q)) as u64;
                    let e = rng.gen_range(-b..=b);
                    encrypt_raw(to_pk, m, e, rng)
                })
                .collect()
        })
        .collect();
    KeySwitchKey {
        params: params.clone(),
        from_level: from.level,
        to_level: to_pk.level,
        entries,
    }
}

/// Re-encrypts `ct` under the key-switching target; adds at most `n * digits * B` error.
pub fn key_switch(ksk: &KeySwitchKey, ct: &LweCiphertext) -> Result<LweCiphertext> {
    if ct.level != ksk.from_level {
        return Err(Error::KeyLevel { expected: ksk.from_level, found: ct.level });
    }
    if ct.params != ksk.params {
        return Err(Error::Parameter("key-switching key uses different parameters".into()));
    }
    let q = ct.params.q;
    let mut mask = vec![0u64; ct.mask.len()];
    let mut body = ct.body;
    let mut added = 0u64;
    for (j, &a) in ct.mask.iter().enumerate() {
        for (k, entry) in ksk.entries[j].iter().enumerate() {
            if (a >> k) & 1 == 1 {
                for (acc, &x) in mask.iter_mut().zip(&entry.mask) {
                    *acc = sub_mod(*acc, x, q);
                }
                body = sub_mod(body, entry.body, q);
                added += ct.params.error_bound;
            }
        }
    }
    let err = ct.error_bound() + added;
    let cap = ct.params.error_capacity();
    if err > cap {
        return Err(Error::Noise(format!("key switching reaches error bound {err}, capacity is {cap}")));
    }
    Ok(LweCiphertext {
        params: ct.params.clone(),
        level: ksk.to_level,
        mask,
        body,
        noise_budget: cap - err,
    })
}

fn round_scale(x: u64, from_q: u64, to_q: u64) -> u64 {
    // round(x * to_q / from_q), halves up
    let num = 2 * u128::from(x) * u128::from(to_q) + u128::from(from_q);
    ((num / (2 * u128::from(from_q))) % u128::from(to_q)) as u64
}

/// Modulus switching to `target` (same dimension and level).
pub fn mod_switch(ct: &LweCiphertext, target: &LweParams) -> Result<LweCiphertext> {
    if target.n != ct.mask.len() {
        return Err(Error::Parameter("modulus switching needs equal dimensions".into()));
    }
    let (q, t) = (u128::from(ct.params.q), u128::from(target.q));
    // |dev| <= t*err/q + (n+1)/2 + |t*Delta_q - Delta_t*q| / q
    let mismatch = (t * u128::from(ct.params.delta())).abs_diff(u128::from(target.delta()) * q);
    let num = 2 * t * u128::from(ct.error_bound()) + (ct.mask.len() as u128 + 1) * q + 2 * mismatch;
    let err = (num / (2 * q)) as u64;
    let cap = target.error_capacity();
    if err > cap {
        return Err(Error::Noise(format!(
            "modulus switching to q = {} reaches error bound {err}, capacity is {cap}",
            target.q
        )));
    }
    Ok(LweCiphertext {
        params: target.clone(),
        level: ct.level,
        mask: ct.mask.iter().map(|&m| round_scale(m, ct.params.q, target.q)).collect(),
        body: round_scale(ct.body, ct.params.q, target.q),
        noise_budget: cap - err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1_key() -> SecretKey {
        SecretKey { bits: vec![1, 0, 1, 1], level: 0 }
    }

    #[test]
    fn worked_example_body_and_decryption() {
        let ct = encrypt_with_mask(&t1_key(), &LweParams::t1(), &[3, 5, 7, 11], 1, 1).unwrap();
        assert_eq!(ct.body, 13);
        assert_eq!(he_phase(&t1_key(), &ct).unwrap(), 9);
        assert_eq!(he_decrypt(&t1_key(), &ct).unwrap(), 1);
    }

    #[test]
    fn inner_product_kernel() {
        assert_eq!(inner(&[3, 5, 7, 11], &[1, 0, 1, 1], 17), 4);
    }

    #[test]
    fn zero_mask_zero_error_decrypts_zero() {
        let ct = encrypt_with_mask(&t1_key(), &LweParams::t1(), &[0; 4], 0, 0).unwrap();
        assert_eq!(ct.body, 0);
        assert_eq!(he_decrypt(&t1_key(), &ct).unwrap(), 0);
    }

    #[test]
    fn capacity_at_17_is_three() {
        assert_eq!(error_capacity(17), 3);
        assert_eq!(error_capacity(1 << 16), (1 << 14) - 1);
    }

    #[test]
    fn four_b_rule_rejects_small_q() {
        let p = LweParams { n: 4, q: 8, p: 2, error_bound: 2, levels: 2, xor_budget: 1 };
        assert!(matches!(p.validate(), Err(Error::Parameter(_))));
    }

    #[test]
    fn exact_rule_is_stricter_than_four_b_rule_at_17() {
        let mut p = LweParams::t1();
        p.xor_budget = 3;
        assert!(p.q > 4 * p.error_bound * (p.xor_budget + 1));
        assert!(p.validate().is_err());
        assert_eq!(LweParams::t1().max_xor_budget(), 1);
    }

    #[test]
    fn not_is_exact() {
        let sk = t1_key();
        for bit in 0..2 {
            for e in -3i64..=3 {
                let ct = encrypt_with_mask(&sk, &LweParams::t1(), &[3, 5, 7, 11], e, bit).unwrap();
                let n = he_not(&ct);
                assert_eq!(he_decrypt(&sk, &n).unwrap(), 1 - bit);
                assert_eq!(n.noise_budget, ct.noise_budget);
            }
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let chain = he_keygen(&LweParams::t1(), 7).unwrap();
        let ct = he_encrypt(chain.public(0).unwrap(), 1, 3).unwrap();
        let js = serde_json::to_string(&ct).unwrap();
        assert!(js.starts_with("{\"params\":"));
        assert!(js.contains("\"body\":\""));
        let back: LweCiphertext = serde_json::from_str(&js).unwrap();
        assert_eq!(back, ct);
        assert_eq!(serde_json::to_string(&back).unwrap(), js);
    }
}
