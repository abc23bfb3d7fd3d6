use std::fmt::Debug;

use num_bigint::BigInt;

use crate::zmod::Zmod;

/// Commutative rings with explicitly represented elements. The ring value
/// carries whatever context the elements need (modulus, multiplication table).
pub trait Ring: Clone + Debug + PartialEq {
    type Elem: Clone + PartialEq + Debug;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn from_int(&self, v: &BigInt) -> Self::Elem;
    fn is_zero(&self, a: &Self::Elem) -> bool;

    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.add(a, &self.neg(b))
    }

    fn from_i64(&self, v: i64) -> Self::Elem {
        self.from_int(&BigInt::from(v))
    }

    fn pow(&self, a: &Self::Elem, mut e: u64) -> Self::Elem {
        let mut base = a.clone();
        let mut r = self.one();
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(&r, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base);
            }
        }
        r
    }
}

impl Ring for Zmod {
    type Elem = u64;

    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1 % self.modulus()
    }
    fn add(&self, a: &u64, b: &u64) -> u64 {
        Zmod::add(self, *a, *b)
    }
    fn neg(&self, a: &u64) -> u64 {
        Zmod::neg(self, *a)
    }
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        Zmod::mul(self, *a, *b)
    }
    fn from_int(&self, v: &BigInt) -> u64 {
        self.from_bigint(v)
    }
    fn is_zero(&self, a: &u64) -> bool {
        *a == 0
    }
    fn pow(&self, a: &u64, e: u64) -> u64 {
        Zmod::pow(self, *a, e)
    }
}

/// The integers, used to derive universal polynomials exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Integers;

impl Ring for Integers {
    type Elem = BigInt;

    fn zero(&self) -> BigInt {
        BigInt::from(0)
    }
    fn one(&self) -> BigInt {
        BigInt::from(1)
    }
    fn add(&self, a: &BigInt, b: &BigInt) -> BigInt {
        a + b
    }
    fn neg(&self, a: &BigInt) -> BigInt {
        -a
    }
    fn mul(&self, a: &BigInt, b: &BigInt) -> BigInt {
        a * b
    }
    fn from_int(&self, v: &BigInt) -> BigInt {
        v.clone()
    }
    fn is_zero(&self, a: &BigInt) -> bool {
        a == &BigInt::from(0)
    }
}
