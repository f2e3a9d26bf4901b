use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::ntt::NttPolicy;
use crate::math::prime::{gen_ntt_prime, is_prime};

pub const MAX_MODULI: usize = 17;
pub const DEFAULT_PLAIN_MODULUS: u64 = 65537;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Ckks,
    Bfv,
    Bgv,
}

impl Scheme {
    pub fn code(self) -> u8 {
        match self {
            Scheme::Ckks => 0,
            Scheme::Bfv => 1,
            Scheme::Bgv => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Scheme::Ckks),
            1 => Ok(Scheme::Bfv),
            2 => Ok(Scheme::Bgv),
            _ => Err(Error::Format(format!("unknown scheme code {c}"))),
        }
    }
}

/// Shipped parameter sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// n = 4096, three small primes.
    Desk4k,
    /// n = 8192, six primes.
    Desk8k,
    /// n = 32768, sixteen primes.
    Paper32k,
    /// CKKS chain deep enough for the query engine.
    Pdq,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk4k" => Ok(Profile::Desk4k),
            "desk8k" => Ok(Profile::Desk8k),
            "paper32k" => Ok(Profile::Paper32k),
            "pdq" => Ok(Profile::Pdq),
            _ => Err(Error::Parameter(format!("unknown profile {s}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncryptionParams {
    pub scheme: Scheme,
    pub n: usize,
    pub coeff_moduli: Vec<u64>,
    /// Extra prime used only inside key switching.
    pub special_modulus: u64,
    pub plain_modulus: Option<u64>,
    pub default_scale: Option<f64>,
    pub ntt_policy: NttPolicy,
}

impl EncryptionParams {
    /// Picks NTT primes of the given sizes for degree `n`.
    pub fn with_prime_sizes(scheme: Scheme, n: usize, bits: &[u32], special_bits: u32) -> Result<Self> {
        let mut moduli: Vec<u64> = Vec::with_capacity(bits.len());
        for &b in bits {
            moduli.push(gen_ntt_prime(b, n, &moduli)?.value());
        }
        let special = gen_ntt_prime(special_bits, n, &moduli)?.value();
        let (plain_modulus, default_scale) = match scheme {
            Scheme::Ckks => (None, Some(2f64.powi(*bits.last().unwrap_or(&40) as i32))),
            _ => (Some(DEFAULT_PLAIN_MODULUS), None),
        };
        Ok(Self {
            scheme,
            n,
            coeff_moduli: moduli,
            special_modulus: special,
            plain_modulus,
            default_scale,
            ntt_policy: NttPolicy::Auto,
        })
    }

    pub fn for_profile(profile: Profile, scheme: Scheme) -> Result<Self> {
        let ckks = scheme == Scheme::Ckks;
        let (n, bits, special): (usize, Vec<u32>, u32) = match profile {
            Profile::Desk4k if ckks => (4096, vec![50, 36, 36], 61),
            Profile::Desk4k => (4096, vec![36; 3], 61),
            Profile::Desk8k if ckks => (8192, [60].into_iter().chain([40; 5]).collect(), 61),
            Profile::Desk8k => (8192, vec![45; 6], 61),
            Profile::Paper32k => (32768, [60].into_iter().chain([55; 15]).collect(), 60),
            Profile::Pdq if ckks => (4096, [60].into_iter().chain([40; 12]).collect(), 61),
            Profile::Pdq => return Err(Error::Parameter("query profile is CKKS only".into())),
        };
        let mut p = Self::with_prime_sizes(scheme, n, &bits, special)?;
        if ckks {
            p.default_scale = Some(2f64.powi(bits[1] as i32));
        }
        Ok(p)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.default_scale = Some(scale);
        self
    }

    pub fn with_plain_modulus(mut self, t: u64) -> Self {
        self.plain_modulus = Some(t);
        self
    }

    pub fn with_ntt_policy(mut self, policy: NttPolicy) -> Self {
        self.ntt_policy = policy;
        self
    }

    pub fn len(&self) -> usize {
        self.coeff_moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeff_moduli.is_empty()
    }

    pub fn log_q(&self) -> f64 {
        self.coeff_moduli.iter().map(|&q| (q as f64).log2()).sum()
    }

    /// Every violated invariant, in order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let n = self.n;
        if n < 2 || !n.is_power_of_two() {
            v.push(format!("n = {n} is not a power of two"));
        }
        if self.coeff_moduli.is_empty() {
            v.push("empty modulus chain".into());
        }
        if self.coeff_moduli.len() > MAX_MODULI {
            v.push(format!("{} moduli exceeds the limit {MAX_MODULI}", self.coeff_moduli.len()));
        }
        let two_n = 2 * n as u64;
        let mut all = self.coeff_moduli.clone();
        all.push(self.special_modulus);
        for (i, &q) in all.iter().enumerate() {
            let name = if i == self.coeff_moduli.len() { "special modulus".to_string() } else { format!("q_{i}") };
            if q <= 1 << 32 || q >= 1 << 62 {
                v.push(format!("{name} = {q} outside (2^32, 2^62)"));
                continue;
            }
            if !is_prime(q) {
                v.push(format!("{name} = {q} is not prime"));
            }
            if two_n > 0 && q % two_n != 1 {
                v.push(format!("{name} = {q} is not 1 mod 2n"));
            }
            if all[..i].contains(&q) {
                v.push(format!("{name} = {q} repeats an earlier modulus"));
            }
        }
        if self.ntt_policy == NttPolicy::ForceMm && n >= crate::math::ntt::MM_THRESHOLD {
            v.push(format!("matrix NTT requested for n = {n}, only available below {}", crate::math::ntt::MM_THRESHOLD));
        }
        match self.scheme {
            Scheme::Ckks => match self.default_scale {
                Some(s) if s > 1.0 && s.log2().fract() == 0.0 => {}
                Some(s) => v.push(format!("scale {s} is not a power of two > 1")),
                None => v.push("CKKS needs a default scale".into()),
            },
            Scheme::Bfv | Scheme::Bgv => match self.plain_modulus {
                Some(t) if t >= 2 && is_prime(t) && t < 1 << 60 => {
                    for (i, &q) in all.iter().enumerate() {
                        if q % t == 0 {
                            v.push(format!("plain modulus {t} divides modulus {i}"));
                        }
                    }
                }
                Some(t) => v.push(format!("plain modulus {t} is not a prime below 2^60")),
                None => v.push("BFV/BGV need a plain modulus".into()),
            },
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// True when `t` is a prime `≡ 1 (mod 2n)`, so slots exist.
    pub fn batching_enabled(&self) -> bool {
        self.plain_modulus.is_some_and(|t| t % (2 * self.n as u64) == 1 && is_prime(t))
    }
}
