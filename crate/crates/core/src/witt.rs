//! Truncated `p`-typical Witt vectors over any [`Ring`].
//!
//! Addition, multiplication, negation and Frobenius are evaluated through
//! universal integer polynomials, derived once per `(p, n)` from the ghost
//! components `w_i = sum_{j <= i} p^j X_j^{p^{i-j}}` by exact recursion and
//! cached for the life of the process.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::ring::Ring;

/// Sparse integer polynomial: exponent vector -> coefficient.
type IntPoly = BTreeMap<Vec<u32>, BigInt>;

fn ip_add(a: &IntPoly, b: &IntPoly, sign: i32) -> IntPoly {
    let mut out = a.clone();
    for (k, v) in b {
        let e = out.entry(k.clone()).or_insert_with(BigInt::zero);
        if sign >= 0 {
            *e += v;
        } else {
            *e -= v;
        }
        if e.is_zero() {
            out.remove(k);
        }
    }
    out
}

fn ip_mul(a: &IntPoly, b: &IntPoly) -> IntPoly {
    let mut out = IntPoly::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            let k: Vec<u32> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
            let e = out.entry(k).or_insert_with(BigInt::zero);
            *e += va * vb;
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn ip_pow(a: &IntPoly, mut e: u64, nvars: usize) -> IntPoly {
    let mut r = IntPoly::from([(vec![0; nvars], BigInt::one())]);
    let mut base = a.clone();
    while e > 0 {
        if e & 1 == 1 {
            r = ip_mul(&r, &base);
        }
        e >>= 1;
        if e > 0 {
            base = ip_mul(&base, &base);
        }
    }
    r
}

fn ip_var(i: usize, nvars: usize) -> IntPoly {
    let mut k = vec![0; nvars];
    k[i] = 1;
    IntPoly::from([(k, BigInt::one())])
}

fn ip_scale(a: &IntPoly, c: &BigInt) -> IntPoly {
    a.iter().map(|(k, v)| (k.clone(), v * c)).filter(|(_, v)| !v.is_zero()).collect()
}

/// Ghost component `w_i` in the variables `offset..offset + i + 1`.
fn ghost_poly(p: u64, i: usize, offset: usize, nvars: usize) -> IntPoly {
    let mut out = IntPoly::new();
    for j in 0..=i {
        let pj = BigInt::from(p).pow(j as u32);
        let term = ip_pow(&ip_var(offset + j, nvars), p.pow((i - j) as u32), nvars);
        out = ip_add(&out, &ip_scale(&term, &pj), 1);
    }
    out
}

/// Solve `w_i(S) = G_i` for `S_0, ..., S_{len-1}`.
fn from_ghosts(p: u64, targets: &[IntPoly], nvars: usize) -> Vec<IntPoly> {
    let mut s: Vec<IntPoly> = Vec::with_capacity(targets.len());
    for (i, g) in targets.iter().enumerate() {
        let mut rest = g.clone();
        for (j, sj) in s.iter().enumerate() {
            let pj = BigInt::from(p).pow(j as u32);
            rest = ip_add(&rest, &ip_scale(&ip_pow(sj, p.pow((i - j) as u32), nvars), &pj), -1);
        }
        let pi = BigInt::from(p).pow(i as u32);
        let si: IntPoly = rest
            .into_iter()
            .map(|(k, v)| {
                let (q, r) = v.div_rem(&pi);
                assert!(r.is_zero(), "ghost recursion is not integral");
                (k, q)
            })
            .collect();
        s.push(si);
    }
    s
}

/// The universal polynomials for `W_n` at the prime `p`.
#[derive(Debug)]
pub struct WittPolys {
    pub p: u64,
    pub n: usize,
    /// In `X_0..X_{n-1}, Y_0..Y_{n-1}`.
    pub sum: Vec<IntPoly>,
    pub prod: Vec<IntPoly>,
    /// In `X_0..X_{n-1}`.
    pub neg: Vec<IntPoly>,
    /// `F: W_n -> W_{n-1}`, in `X_0..X_{n-1}`.
    pub frob: Vec<IntPoly>,
}

impl WittPolys {
    fn derive(p: u64, n: usize) -> Self {
        let two = 2 * n;
        let sum_t: Vec<IntPoly> = (0..n).map(|i| ip_add(&ghost_poly(p, i, 0, two), &ghost_poly(p, i, n, two), 1)).collect();
        let prod_t: Vec<IntPoly> = (0..n).map(|i| ip_mul(&ghost_poly(p, i, 0, two), &ghost_poly(p, i, n, two))).collect();
        let neg_t: Vec<IntPoly> = (0..n).map(|i| ip_scale(&ghost_poly(p, i, 0, n), &BigInt::from(-1))).collect();
        let frob_t: Vec<IntPoly> = (0..n.saturating_sub(1)).map(|i| ghost_poly(p, i + 1, 0, n)).collect();
        WittPolys {
            p,
            n,
            sum: from_ghosts(p, &sum_t, two),
            prod: from_ghosts(p, &prod_t, two),
            neg: from_ghosts(p, &neg_t, n),
            frob: from_ghosts(p, &frob_t, n),
        }
    }

    /// Shared, lazily derived polynomials for `(p, n)`.
    pub fn get(p: u64, n: usize) -> Arc<WittPolys> {
        static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<WittPolys>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(w) = cache.lock().unwrap().get(&(p, n)) {
            return w.clone();
        }
        // derive outside the lock; a racing thread may derive the same thing
        let w = Arc::new(WittPolys::derive(p, n));
        cache.lock().unwrap().entry((p, n)).or_insert(w).clone()
    }
}

fn eval<R: Ring>(ring: &R, poly: &IntPoly, vals: &[R::Elem]) -> R::Elem {
    let nv = vals.len();
    let mut maxe = vec![0u32; nv];
    for k in poly.keys() {
        for (m, &e) in maxe.iter_mut().zip(k) {
            *m = (*m).max(e);
        }
    }
    let powers: Vec<Vec<R::Elem>> = (0..nv)
        .map(|i| {
            let mut v = vec![ring.one()];
            for _ in 0..maxe[i] {
                let next = ring.mul(v.last().unwrap(), &vals[i]);
                v.push(next);
            }
            v
        })
        .collect();
    let mut acc = ring.zero();
    for (k, c) in poly {
        let mut t = ring.from_int(c);
        if ring.is_zero(&t) {
            continue;
        }
        for (i, &e) in k.iter().enumerate() {
            if e > 0 {
                t = ring.mul(&t, &powers[i][e as usize]);
            }
        }
        acc = ring.add(&acc, &t);
    }
    acc
}

/// `W_n(R)`. Elements are component vectors `(a_0, ..., a_{n-1})`.
#[derive(Clone, Debug)]
pub struct WittRing<R: Ring> {
    base: R,
    n: usize,
    polys: Arc<WittPolys>,
}

impl<R: Ring> PartialEq for WittRing<R> {
    fn eq(&self, o: &Self) -> bool {
        self.base == o.base && self.n == o.n && self.polys.p == o.polys.p
    }
}

impl<R: Ring> WittRing<R> {
    pub fn new(base: R, p: u64, n: usize) -> Self {
        assert!(n >= 1, "Witt length must be positive");
        WittRing { base, n, polys: WittPolys::get(p, n) }
    }

    pub fn base(&self) -> &R {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn p(&self) -> u64 {
        self.polys.p
    }

    fn check(&self, a: &[R::Elem]) -> Result<()> {
        if a.len() == self.n {
            Ok(())
        } else {
            Err(Error::LengthMismatch(a.len(), self.n))
        }
    }

    pub fn try_add(&self, a: &[R::Elem], b: &[R::Elem]) -> Result<Vec<R::Elem>> {
        self.check(a)?;
        self.check(b)?;
        let vals: Vec<R::Elem> = a.iter().chain(b).cloned().collect();
        Ok(self.polys.sum.iter().map(|s| eval(&self.base, s, &vals)).collect())
    }

    pub fn try_mul(&self, a: &[R::Elem], b: &[R::Elem]) -> Result<Vec<R::Elem>> {
        self.check(a)?;
        self.check(b)?;
        let vals: Vec<R::Elem> = a.iter().chain(b).cloned().collect();
        Ok(self.polys.prod.iter().map(|s| eval(&self.base, s, &vals)).collect())
    }

    /// Teichmüller representative `[x] = (x, 0, ..., 0)`.
    pub fn teichmuller(&self, x: &R::Elem) -> Vec<R::Elem> {
        let mut v = vec![self.base.zero(); self.n];
        v[0] = x.clone();
        v
    }

    /// Ghost components `w_0, ..., w_{n-1}`.
    pub fn ghost(&self, a: &[R::Elem]) -> Vec<R::Elem> {
        let p = self.p();
        (0..self.n)
            .map(|i| {
                let mut acc = self.base.zero();
                for (j, aj) in a.iter().enumerate().take(i + 1) {
                    let t = self.base.pow(aj, p.pow((i - j) as u32));
                    let pj = self.base.from_int(&BigInt::from(p).pow(j as u32));
                    acc = self.base.add(&acc, &self.base.mul(&pj, &t));
                }
                acc
            })
            .collect()
    }

    /// Frobenius `W_n -> W_{n-1}`.
    pub fn frobenius(&self, a: &[R::Elem]) -> Result<Vec<R::Elem>> {
        self.check(a)?;
        Ok(self.polys.frob.iter().map(|s| eval(&self.base, s, a)).collect())
    }

    /// Verschiebung `W_{n-1} -> W_n`: `(a_0, ...) -> (0, a_0, ...)`.
    pub fn verschiebung(&self, a: &[R::Elem]) -> Result<Vec<R::Elem>> {
        if a.len() + 1 != self.n {
            return Err(Error::LengthMismatch(a.len() + 1, self.n));
        }
        let mut v = vec![self.base.zero()];
        v.extend(a.iter().cloned());
        Ok(v)
    }

    /// The same ring one component shorter.
    pub fn truncated(&self) -> WittRing<R> {
        WittRing::new(self.base.clone(), self.p(), self.n - 1)
    }
}

impl<R: Ring> Ring for WittRing<R> {
    type Elem = Vec<R::Elem>;

    fn zero(&self) -> Self::Elem {
        vec![self.base.zero(); self.n]
    }
    fn one(&self) -> Self::Elem {
        self.teichmuller(&self.base.one())
    }
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.try_add(a, b).expect("Witt length mismatch")
    }
    fn neg(&self, a: &Self::Elem) -> Self::Elem {
        self.polys.neg.iter().map(|s| eval(&self.base, s, a)).collect()
    }
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.try_mul(a, b).expect("Witt length mismatch")
    }
    fn from_int(&self, v: &BigInt) -> Self::Elem {
        // double-and-add from the top bit
        let mut acc = self.zero();
        let one = self.one();
        let mag = v.abs();
        for i in (0..mag.bits()).rev() {
            acc = self.add(&acc, &acc);
            if mag.bit(i) {
                acc = self.add(&acc, &one);
            }
        }
        if v.is_negative() {
            self.neg(&acc)
        } else {
            acc
        }
    }
    fn is_zero(&self, a: &Self::Elem) -> bool {
        a.iter().all(|x| self.base.is_zero(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zmod::Zmod;

    #[test]
    fn low_polynomials() {
        let w = WittPolys::get(2, 2);
        // S_1 = X_1 + Y_1 - X_0 Y_0 at p = 2
        let expect: IntPoly = [(vec![0, 1, 0, 0], 1), (vec![0, 0, 0, 1], 1), (vec![1, 0, 1, 0], -1)]
            .into_iter()
            .map(|(k, v)| (k, BigInt::from(v)))
            .collect();
        assert_eq!(w.sum[1], expect);
    }

    #[test]
    fn one_plus_one_in_w2_f2() {
        let r = WittRing::new(Zmod::field(2).unwrap(), 2, 2);
        assert_eq!(r.add(&vec![1, 0], &vec![1, 0]), vec![0, 1]);
    }

    #[test]
    fn integers_are_p_adic_digits() {
        let r = WittRing::new(Zmod::field(3).unwrap(), 3, 3);
        // in W(F_p) the integer p is (0, 1, 0)
        assert_eq!(r.from_i64(3), vec![0, 1, 0]);
        assert_eq!(r.add(&r.from_i64(-1), &r.one()), r.zero());
    }

    #[test]
    fn frobenius_after_verschiebung_is_p() {
        let z = Zmod::new(5, 6).unwrap();
        let r = WittRing::new(z, 5, 3);
        let short = r.truncated();
        let a = vec![7u64, 11];
        let fv = r.frobenius(&r.verschiebung(&a).unwrap()).unwrap();
        assert_eq!(fv, short.mul(&short.from_i64(5), &a));
    }

    #[test]
    fn length_mismatch() {
        let r = WittRing::new(Zmod::field(2).unwrap(), 2, 2);
        assert_eq!(r.try_add(&[1], &[1, 0]), Err(Error::LengthMismatch(1, 2)));
    }
}
