//! Integers modulo `p^n` together with the exact integer helpers (factorials,
//! binomials, p-adic valuations) that the divided-power code leans on.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::valuation::Valuation;

/// The ring `Z/p^n`. Elements are plain `u64` residues in `[0, p^n)`.
///
/// The modulus is capped below `2^62` so sums never overflow and products go
/// through `u128`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Zmod {
    p: u64,
    n: u32,
    modulus: u64,
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl Zmod {
    pub fn new(p: u64, n: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if n == 0 {
            return Err(Error::Parse("precision exponent n must be at least 1".into()));
        }
        let mut m: u64 = 1;
        for _ in 0..n {
            m = m
                .checked_mul(p)
                .filter(|&m| m < (1u64 << 62))
                .ok_or(Error::ModulusTooLarge { p, n })?;
        }
        Ok(Zmod { p, n, modulus: m })
    }

    /// Shorthand for `F_p`.
    pub fn field(p: u64) -> Result<Self> {
        Zmod::new(p, 1)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn is_field(&self) -> bool {
        self.n == 1
    }

    /// Same prime, different precision.
    pub fn with_precision(&self, n: u32) -> Result<Self> {
        Zmod::new(self.p, n)
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.modulus {
            s - self.modulus
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.modulus - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.modulus - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.modulus as u128) as u64
    }

    pub fn pow(&self, mut a: u64, mut e: u64) -> u64 {
        let mut r = 1 % self.modulus;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        r
    }

    pub fn from_i64(&self, v: i64) -> u64 {
        v.rem_euclid(self.modulus as i64) as u64
    }

    pub fn from_u64(&self, v: u64) -> u64 {
        v % self.modulus
    }

    pub fn from_biguint(&self, v: &BigUint) -> u64 {
        (v % BigUint::from(self.modulus)).to_u64().unwrap()
    }

    pub fn from_bigint(&self, v: &BigInt) -> u64 {
        let m = BigInt::from(self.modulus);
        v.mod_floor(&m).to_u64().unwrap()
    }

    /// Symmetric representative in `(-p^n/2, p^n/2]`, handy for printing.
    pub fn signed(&self, a: u64) -> i64 {
        if a > self.modulus / 2 {
            a as i64 - self.modulus as i64
        } else {
            a as i64
        }
    }

    /// `p`-adic valuation of a residue, capped at `n` (zero has valuation `n`).
    pub fn val(&self, a: u64) -> u32 {
        if a == 0 {
            return self.n;
        }
        let mut v = 0;
        let mut a = a;
        while a % self.p == 0 {
            a /= self.p;
            v += 1;
        }
        v
    }

    pub fn is_unit(&self, a: u64) -> bool {
        a % self.p != 0
    }

    /// Inverse of a unit.
    pub fn inv(&self, a: u64) -> Option<u64> {
        if !self.is_unit(a) {
            return None;
        }
        let (g, x, _) = egcd(a as i128, self.modulus as i128);
        debug_assert_eq!(g, 1);
        Some(x.rem_euclid(self.modulus as i128) as u64)
    }

    /// Reduction to `Z/p^m` for `m <= n`.
    pub fn reduce_to(&self, a: u64, target: &Zmod) -> u64 {
        debug_assert_eq!(self.p, target.p);
        a % target.modulus
    }

    /// The rational number `num/den` viewed in `Z_(p)` and reduced mod `p^n`.
    /// Fails when `v_p(den) > v_p(num)`, i.e. the quotient is not p-integral.
    pub fn from_ratio(&self, num: &BigInt, den: &BigInt) -> Option<u64> {
        if den.is_zero() {
            return None;
        }
        if num.is_zero() {
            return Some(0);
        }
        let vn = vp_bigint(num, self.p);
        let vd = vp_bigint(den, self.p);
        if vd > vn {
            return None;
        }
        let pp = BigInt::from(self.p);
        let num_unit = num / pp.pow(vn);
        let den_unit = den / pp.pow(vd);
        let shift = vn - vd;
        if shift >= self.n {
            return Some(0);
        }
        let u = self.mul(self.from_bigint(&num_unit), self.inv(self.from_bigint(&den_unit))?);
        Some(self.mul(u, self.pow(self.p, shift as u64)))
    }

    pub fn valuation(&self, a: u64) -> Valuation {
        if a == 0 {
            Valuation::capped(self.n as i64)
        } else {
            Valuation::integer(self.val(a) as i64)
        }
    }
}

impl fmt::Display for Zmod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n == 1 {
            write!(f, "F_{}", self.p)
        } else {
            write!(f, "Z/{}^{}", self.p, self.n)
        }
    }
}

fn egcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = egcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

/// An element of `Z/p^n` that remembers its modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PadicScalar {
    value: u64,
    ring: Zmod,
}

impl PadicScalar {
    pub fn new(ring: Zmod, v: i64) -> Self {
        PadicScalar { value: ring.from_i64(v), ring }
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn ring(&self) -> Zmod {
        self.ring
    }

    pub fn valuation(&self) -> Valuation {
        self.ring.valuation(self.value)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.ring != other.ring {
            Err(Error::MixedRings)
        } else {
            Ok(())
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(PadicScalar { value: self.ring.add(self.value, other.value), ring: self.ring })
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(PadicScalar { value: self.ring.mul(self.value, other.value), ring: self.ring })
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}", self.value, self.ring.modulus)
    }
}

// Exact integer helpers. Everything here is arbitrary precision.

pub fn factorial(k: u64) -> BigUint {
    (1..=k).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut r = BigUint::one();
    for i in 0..k {
        r = r * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    r
}

/// `v_p(n!)` by Legendre's formula.
pub fn vp_factorial(k: u64, p: u64) -> u64 {
    let mut v = 0;
    let mut q = k / p;
    while q > 0 {
        v += q;
        q /= p;
    }
    v
}

pub fn vp_bigint(a: &BigInt, p: u64) -> u32 {
    assert!(!a.is_zero(), "valuation of zero");
    let pp = BigInt::from(p);
    let mut a = a.clone();
    let mut v = 0;
    loop {
        let (q, r) = a.div_rem(&pp);
        if !r.is_zero() {
            return v;
        }
        a = q;
        v += 1;
    }
}

pub fn vp_biguint(a: &BigUint, p: u64) -> u32 {
    vp_bigint(&BigInt::from_biguint(Sign::Plus, a.clone()), p)
}

/// Exact quotient `a / b`, panicking if `b` does not divide `a`. The callers use
/// this for coefficients whose integrality is a theorem, so a failure means a
/// bug upstream rather than bad input.
pub fn exact_div(a: &BigUint, b: &BigUint) -> BigUint {
    let (q, r) = a.div_rem(b);
    assert!(r.is_zero(), "expected exact division of {a} by {b}");
    q
}

/// `(kj)! / (k! (j!)^k)`: the coefficient in `gamma_k(gamma_j(x)) = c * gamma_{kj}(x)`.
pub fn gamma_composition_coeff(k: u64, j: u64) -> BigUint {
    let num = factorial(k * j);
    let den = factorial(k) * factorial(j).pow(k as u32);
    exact_div(&num, &den)
}

/// `(kp)! / (k! p^k)`, an integer that is a p-adic unit.
pub fn n_k(k: u64, p: u64) -> BigUint {
    let num = factorial(k * p);
    let den = factorial(k) * BigUint::from(p).pow(k as u32);
    exact_div(&num, &den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_composite() {
        assert_eq!(Zmod::new(4, 2), Err(Error::NotPrime(4)));
        assert!(Zmod::new(2, 70).is_err());
    }

    #[test]
    fn arithmetic_wraps() {
        let z = Zmod::new(3, 2).unwrap();
        assert_eq!(z.modulus(), 9);
        assert_eq!(z.add(5, 7), 3);
        assert_eq!(z.sub(2, 5), 6);
        assert_eq!(z.mul(4, 7), 1);
        assert_eq!(z.inv(4), Some(7));
        assert_eq!(z.inv(3), None);
        assert_eq!(z.val(0), 2);
        assert_eq!(z.val(6), 1);
    }

    #[test]
    fn ratio_reduction() {
        let z = Zmod::new(2, 4).unwrap();
        // 4!/2^? : 2^3 / 3! = 8/6 = 4/3
        let v = z.from_ratio(&BigInt::from(8), &BigInt::from(6)).unwrap();
        assert_eq!(z.mul(v, 3), 4);
        assert!(z.from_ratio(&BigInt::from(1), &BigInt::from(2)).is_none());
    }

    #[test]
    fn gamma_coefficients() {
        assert_eq!(gamma_composition_coeff(2, 2), BigUint::from(3u32));
        assert_eq!(binomial(4, 2), BigUint::from(6u32));
        for p in [2u64, 3, 5, 7] {
            for k in 0..6 {
                assert_eq!(vp_biguint(&n_k(k, p), p), 0, "n_k must be a unit");
            }
        }
        assert_eq!(vp_factorial(10, 2), 8);
    }
}
