use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::math::modulus::Modulus;

#[derive(Clone, Debug)]
pub struct RnsBase {
    moduli: Vec<Modulus>,
    big_q: BigUint,
    punctured: Vec<BigUint>,
    inv_punctured: Vec<u64>,
}

impl RnsBase {
    pub fn new(moduli: Vec<Modulus>) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::Parameter("empty RNS base".into()));
        }
        for (i, a) in moduli.iter().enumerate() {
            for b in &moduli[i + 1..] {
                if num_integer::gcd(a.value(), b.value()) != 1 {
                    return Err(Error::Parameter(format!(
                        "moduli {} and {} are not coprime",
                        a.value(),
                        b.value()
                    )));
                }
            }
        }
        let big_q = moduli.iter().fold(BigUint::one(), |acc, m| acc * m.value());
        let mut punctured = Vec::with_capacity(moduli.len());
        let mut inv_punctured = Vec::with_capacity(moduli.len());
        for m in &moduli {
            let p = &big_q / m.value();
            let r = (&p % m.value()).iter_u64_digits().next().unwrap_or(0);
            inv_punctured.push(crate::math::modulus::inv_mod_general(r, m.value())?);
            punctured.push(p);
        }
        Ok(Self { moduli, big_q, punctured, inv_punctured })
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    pub fn modulus(&self, i: usize) -> &Modulus {
        &self.moduli[i]
    }

    pub fn big_q(&self) -> &BigUint {
        &self.big_q
    }

    pub fn punctured(&self) -> &[BigUint] {
        &self.punctured
    }

    pub fn inv_punctured(&self) -> &[u64] {
        &self.inv_punctured
    }

    /// First `len` moduli as their own base.
    pub fn prefix(&self, len: usize) -> Result<RnsBase> {
        RnsBase::new(self.moduli[..len].to_vec())
    }

    pub fn decompose(&self, x: &BigUint) -> Vec<u64> {
        self.moduli
            .iter()
            .map(|m| (x % m.value()).iter_u64_digits().next().unwrap_or(0))
            .collect()
    }

    pub fn decompose_signed(&self, x: &BigInt) -> Vec<u64> {
        let mag = self.decompose(x.magnitude());
        if x.sign() == num_bigint::Sign::Minus {
            mag.iter().zip(&self.moduli).map(|(&r, m)| m.neg(r)).collect()
        } else {
            mag
        }
    }

    pub fn reconstruct(&self, residues: &[u64]) -> BigUint {
        debug_assert_eq!(residues.len(), self.moduli.len());
        let mut acc = BigUint::zero();
        for (i, m) in self.moduli.iter().enumerate() {
            let c = m.mul(residues[i], self.inv_punctured[i]);
            acc += &self.punctured[i] * c;
        }
        acc % &self.big_q
    }

    /// Lift into `(-Q/2, Q/2]`.
    pub fn reconstruct_centered(&self, residues: &[u64]) -> BigInt {
        let x = self.reconstruct(residues);
        let half = &self.big_q >> 1;
        if x > half {
            BigInt::from(x) - BigInt::from(self.big_q.clone())
        } else {
            BigInt::from(x)
        }
    }
}

pub fn crt_reconstruct(residues: &[u64], base: &RnsBase) -> BigUint {
    base.reconstruct(residues)
}
