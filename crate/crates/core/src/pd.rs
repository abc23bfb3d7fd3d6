//! Truncated divided-power algebras and pd-envelopes.
//!
//! A [`PdAlgebra`] over `Z/p^n` has *anchored* variables `x_i`, each carrying a
//! monic `f_i(x_i)` whose divided powers `gamma_k(f_i)` are adjoined, and *free*
//! pd-variables `w_j`. Since `f_i` is monic, every `x_i^c` has a unique
//! `f_i`-adic expansion `sum r_j(x_i) f_i^j` with `deg r_j < deg f_i`, and
//! `f_i^j = j! gamma_j(f_i)`; so the monomials `x^a gamma_e(y)` with
//! `a_i < deg f_i` are a free basis. Terms of total pd-weight `sum e > m` are
//! dropped; their span is an ideal.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::poly::{Poly, PolyRing};
use crate::zmod::{binomial, factorial, gamma_composition_coeff, Zmod};

/// An ordinary variable together with the monic polynomial whose divided
/// powers are adjoined. `f` is low degree first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Anchor {
    pub var: String,
    pub pd_name: String,
    pub f: Vec<i64>,
}

impl Anchor {
    pub fn new(var: &str, pd_name: &str, f: &[i64]) -> Self {
        Anchor { var: var.into(), pd_name: pd_name.into(), f: f.to_vec() }
    }

    pub fn degree(&self) -> u32 {
        (self.f.len() - 1) as u32
    }
}

#[derive(Debug)]
struct Inner {
    z: Zmod,
    anchors: Vec<Anchor>,
    free: Vec<String>,
    cap: u32,
    /// `high[i][c - d]`: `x^c = r(x) + q(x) f(x)` as residue vectors `(r, q)`.
    high: Vec<Vec<(Vec<u64>, Vec<u64>)>>,
    /// `binom[a][b]` = `C(a, b) mod p^n` for `a <= cap`.
    binom: Vec<Vec<u64>>,
}

/// A truncated pd-algebra. Cheap to clone.
#[derive(Clone, Debug)]
pub struct PdAlgebra(Arc<Inner>);

impl PartialEq for PdAlgebra {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.z == other.0.z
                && self.0.anchors == other.0.anchors
                && self.0.free == other.0.free
                && self.0.cap == other.0.cap)
    }
}

/// `x^c mod f` and quotient, for `c` in `d..=max(d, 2d - 2)`.
fn high_powers(z: Zmod, f: &[i64]) -> Vec<(Vec<u64>, Vec<u64>)> {
    let d = f.len() - 1;
    let top = d.max(2 * d - 2);
    (d..=top)
        .map(|c| {
            // long division of x^c by f over Z
            let mut rem: Vec<BigInt> = vec![BigInt::zero(); c + 1];
            rem[c] = BigInt::one();
            let mut quo = vec![BigInt::zero(); c - d + 1];
            for k in (d..=c).rev() {
                let lead = rem[k].clone();
                if lead.is_zero() {
                    continue;
                }
                quo[k - d] = lead.clone();
                for (t, &fc) in f.iter().enumerate() {
                    rem[k - d + t] -= &lead * fc;
                }
            }
            let r: Vec<u64> = rem[..d].iter().map(|v| z.from_bigint(v)).collect();
            let mut q: Vec<u64> = quo.iter().map(|v| z.from_bigint(v)).collect();
            q.resize(d, 0);
            (r, q)
        })
        .collect()
}

impl PdAlgebra {
    pub fn new(z: Zmod, anchors: Vec<Anchor>, free: Vec<String>, cap: u32) -> Result<Self> {
        for a in &anchors {
            if a.f.len() < 2 || *a.f.last().unwrap() != 1 {
                return Err(Error::NonMonicRelation(a.var.clone()));
            }
        }
        let high = anchors.iter().map(|a| high_powers(z, &a.f)).collect();
        let binom = (0..=cap as u64)
            .map(|a| (0..=a).map(|b| z.from_biguint(&binomial(a, b))).collect())
            .collect();
        Ok(PdAlgebra(Arc::new(Inner { z, anchors, free, cap, high, binom })))
    }

    /// The free pd-polynomial algebra `Z/p^n<w_1, ..., w_r>`.
    pub fn free(z: Zmod, names: &[&str], cap: u32) -> Result<Self> {
        PdAlgebra::new(z, vec![], names.iter().map(|s| s.to_string()).collect(), cap)
    }

    /// `D_{Z/p^n[x]}((x))`, i.e. the pd-polynomial algebra on the variable `x`.
    pub fn envelope_of_variable(z: Zmod, name: &str, cap: u32) -> Result<Self> {
        PdAlgebra::new(z, vec![Anchor::new(name, name, &[0, 1])], vec![], cap)
    }

    /// The same presentation over another `Z/p^m` and/or weight cap.
    pub fn with_base(&self, z: Zmod, cap: u32) -> Result<Self> {
        PdAlgebra::new(z, self.0.anchors.clone(), self.0.free.clone(), cap)
    }

    pub fn base(&self) -> Zmod {
        self.0.z
    }

    pub fn cap(&self) -> u32 {
        self.0.cap
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.0.anchors
    }

    pub fn free_names(&self) -> &[String] {
        &self.0.free
    }

    pub fn n_anchors(&self) -> usize {
        self.0.anchors.len()
    }

    /// Number of pd-variables: anchored ones first, then the free ones.
    pub fn n_pd(&self) -> usize {
        self.0.anchors.len() + self.0.free.len()
    }

    pub fn pd_names(&self) -> Vec<String> {
        self.0.anchors.iter().map(|a| a.pd_name.clone()).chain(self.0.free.iter().cloned()).collect()
    }

    fn key_len(&self) -> usize {
        self.n_anchors() + self.n_pd()
    }

    pub fn zero(&self) -> PdElement {
        PdElement { alg: self.clone(), terms: BTreeMap::new() }
    }

    pub fn scalar_u(&self, c: u64) -> PdElement {
        self.basis_element(&vec![0; self.key_len()], c)
    }

    pub fn scalar(&self, c: i64) -> PdElement {
        self.scalar_u(self.0.z.from_i64(c))
    }

    pub fn one(&self) -> PdElement {
        self.scalar(1)
    }

    /// `c * x^a gamma_e(y)` from a raw key `[a..., e...]`; `a_i < deg f_i` required.
    pub fn basis_element(&self, key: &[u32], c: u64) -> PdElement {
        assert_eq!(key.len(), self.key_len());
        for (i, a) in self.0.anchors.iter().enumerate() {
            assert!(key[i] < a.degree(), "residue exponent out of range");
        }
        let mut out = self.zero();
        let c = self.0.z.from_u64(c);
        if c != 0 && self.weight_of(key) <= self.0.cap {
            out.terms.insert(key.to_vec(), c);
        }
        out
    }

    /// `gamma_k` of pd-variable `j` (anchored variables first).
    pub fn gamma_var(&self, j: usize, k: u32) -> PdElement {
        let mut key = vec![0; self.key_len()];
        key[self.n_anchors() + j] = k;
        self.basis_element(&key, 1)
    }

    /// The pd-variable named `name`.
    pub fn pd_var(&self, name: &str) -> Result<PdElement> {
        let j = self.pd_names().iter().position(|n| n == name).ok_or_else(|| Error::UnknownGenerator(name.into()))?;
        Ok(self.gamma_var(j, 1))
    }

    /// The ordinary variable `x_i`.
    pub fn x(&self, i: usize) -> PdElement {
        let d = self.0.anchors[i].degree();
        if d > 1 {
            let mut key = vec![0; self.key_len()];
            key[i] = 1;
            return self.basis_element(&key, 1);
        }
        // deg f = 1: x = r + q * f with constants r, q
        let (r, q) = &self.0.high[i][0];
        let mut ky = vec![0; self.key_len()];
        ky[self.n_anchors() + i] = 1;
        &self.scalar_u(r[0]) + &self.basis_element(&ky, q[0])
    }

    pub fn var(&self, name: &str) -> Result<PdElement> {
        let i = self.0.anchors.iter().position(|a| a.var == name).ok_or_else(|| Error::UnknownGenerator(name.into()))?;
        Ok(self.x(i))
    }

    fn weight_of(&self, key: &[u32]) -> u32 {
        key[self.n_anchors()..].iter().sum()
    }

    /// All basis keys of pd-weight at most the cap, in key order.
    pub fn basis(&self) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        for w in 0..=self.0.cap {
            out.extend(self.basis_of_weight(w));
        }
        out.sort();
        out
    }

    pub fn basis_of_weight(&self, w: u32) -> Vec<Vec<u32>> {
        let na = self.n_anchors();
        let mut res: Vec<Vec<u32>> = vec![vec![]];
        for a in &self.0.anchors {
            res = res.into_iter().flat_map(|v| (0..a.degree()).map(move |t| [v.clone(), vec![t]].concat())).collect();
        }
        let mut out = Vec::new();
        for prefix in res {
            for e in compositions(w, self.n_pd()) {
                let mut k = prefix.clone();
                k.extend(e);
                out.push(k);
            }
        }
        debug_assert!(out.iter().all(|k| k.len() == na + self.n_pd()));
        out
    }

    /// Number of basis elements in each pd-weight `0..=cap`.
    pub fn dims_by_weight(&self) -> Vec<usize> {
        (0..=self.0.cap).map(|w| self.basis_of_weight(w).len()).collect()
    }

    /// `f_i` evaluated at an element.
    pub fn eval_anchor_poly(&self, i: usize, at: &PdElement) -> PdElement {
        let tgt = at.parent();
        let mut acc = tgt.zero();
        for &c in self.0.anchors[i].f.iter().rev() {
            acc = &(&acc * at) + &tgt.scalar(c);
        }
        acc
    }

    /// `c * prod x_i^{c_i}` for arbitrary exponents, reduced.
    pub fn x_monomial(&self, exps: &[u32]) -> PdElement {
        let mut acc = self.one();
        for (i, &e) in exps.iter().enumerate() {
            if e > 0 {
                acc = &acc * &self.x(i).pow(e as u64);
            }
        }
        acc
    }
}

/// All `e in N^r` with `sum e = w`, lexicographically decreasing in `e_0`.
pub fn compositions(w: u32, r: usize) -> Vec<Vec<u32>> {
    if r == 0 {
        return if w == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=w).rev() {
        for rest in compositions(w - first, r - 1) {
            let mut v = vec![first];
            v.extend(rest);
            out.push(v);
        }
    }
    out
}

/// An element of a [`PdAlgebra`]: map from keys `[a..., e...]` to nonzero residues.
#[derive(Clone)]
pub struct PdElement {
    alg: PdAlgebra,
    terms: BTreeMap<Vec<u32>, u64>,
}

impl PartialEq for PdElement {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms && self.alg == other.alg
    }
}

impl fmt::Debug for PdElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for PdElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let z = self.alg.base();
        let na = self.alg.n_anchors();
        let names = self.alg.pd_names();
        for (i, (k, &c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", z.signed(c))?;
            for (j, a) in self.alg.anchors().iter().enumerate() {
                match k[j] {
                    0 => {}
                    1 => write!(f, "*{}", a.var)?,
                    e => write!(f, "*{}^{e}", a.var)?,
                }
            }
            for (j, name) in names.iter().enumerate() {
                if k[na + j] > 0 {
                    write!(f, "*g{}({name})", k[na + j])?;
                }
            }
        }
        Ok(())
    }
}

impl PdElement {
    pub fn parent(&self) -> &PdAlgebra {
        &self.alg
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &u64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, key: &[u32]) -> u64 {
        self.terms.get(key).copied().unwrap_or(0)
    }

    /// Coordinates on the given list of basis keys.
    pub fn coords(&self, basis: &[Vec<u32>]) -> Vec<u64> {
        basis.iter().map(|k| self.coeff(k)).collect()
    }

    pub fn weight_of_key(&self, key: &[u32]) -> u32 {
        self.alg.weight_of(key)
    }

    /// Minimal pd-weight of a term, `None` for zero.
    pub fn min_weight(&self) -> Option<u32> {
        self.terms.keys().map(|k| self.alg.weight_of(k)).min()
    }

    pub fn max_weight(&self) -> Option<u32> {
        self.terms.keys().map(|k| self.alg.weight_of(k)).max()
    }

    /// Only the terms of pd-weight exactly `w`.
    pub fn weight_component(&self, w: u32) -> PdElement {
        self.filter(|k| self.alg.weight_of(k) == w)
    }

    /// Drop terms of pd-weight `> w`.
    pub fn truncate(&self, w: u32) -> PdElement {
        self.filter(|k| self.alg.weight_of(k) <= w)
    }

    pub fn filter(&self, keep: impl Fn(&[u32]) -> bool) -> PdElement {
        PdElement { alg: self.alg.clone(), terms: self.terms.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), *v)).collect() }
    }

    fn check(&self, other: &PdElement) -> Result<()> {
        if self.alg == other.alg {
            Ok(())
        } else {
            Err(Error::MixedParents)
        }
    }

    fn accumulate(&mut self, key: Vec<u32>, c: u64) {
        if c == 0 {
            return;
        }
        let z = self.alg.base();
        match self.terms.get_mut(&key) {
            Some(v) => {
                *v = z.add(*v, c);
                if *v == 0 {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, c);
            }
        }
    }

    pub fn try_add(&self, other: &PdElement) -> Result<PdElement> {
        self.check(other)?;
        let mut out = self.clone();
        for (k, &c) in &other.terms {
            out.accumulate(k.clone(), c);
        }
        Ok(out)
    }

    pub fn scale(&self, c: u64) -> PdElement {
        let z = self.alg.base();
        let mut out = self.alg.zero();
        for (k, &v) in &self.terms {
            out.accumulate(k.clone(), z.mul(v, c));
        }
        out
    }

    pub fn try_mul(&self, other: &PdElement) -> Result<PdElement> {
        self.check(other)?;
        let mut out = self.alg.zero();
        for (k1, &c1) in &self.terms {
            for (k2, &c2) in &other.terms {
                mul_terms(&self.alg, k1, c1, k2, c2, &mut out);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, mut e: u64) -> PdElement {
        let mut base = self.clone();
        let mut acc = self.alg.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Whether the element lies in the pd-ideal `(p, gamma_{>=1})`: its weight-0
    /// part must be divisible by `p`.
    pub fn in_pd_ideal(&self) -> bool {
        let p = self.alg.base().p();
        self.terms.iter().all(|(k, &c)| self.alg.weight_of(k) > 0 || c % p == 0)
    }

    /// `gamma_k(self)`.
    pub fn gamma(&self, k: u32) -> Result<PdElement> {
        Ok(self.gammas(k)?.pop().unwrap())
    }

    /// `[gamma_0(self), ..., gamma_k(self)]`, computed by the addition formula
    /// over terms. Weight-0 parts must be divisible by `p` and use the standard
    /// divided powers `gamma_i(p c) = (p^i / i!) c^i`.
    pub fn gammas(&self, k: u32) -> Result<Vec<PdElement>> {
        if !self.in_pd_ideal() {
            return Err(Error::NonzeroConstantTerm);
        }
        let alg = &self.alg;
        let z = alg.base();
        let k = k as usize;
        let mut acc: Vec<PdElement> = (0..=k).map(|i| if i == 0 { alg.one() } else { alg.zero() }).collect();
        let constant = self.filter(|key| alg.weight_of(key) == 0);
        let mut pieces: Vec<Vec<PdElement>> = Vec::new();
        if !constant.is_zero() {
            let p = z.p();
            let c = PdElement {
                alg: alg.clone(),
                terms: constant.terms.iter().map(|(key, &v)| (key.clone(), v / p)).filter(|x| x.1 != 0).collect(),
            };
            let mut g = vec![alg.one()];
            let mut cpow = alg.one();
            for i in 1..=k {
                cpow = &cpow * &c;
                let num = BigInt::from(p).pow(i as u32);
                let den = BigInt::from(factorial(i as u64));
                let coef = z.from_ratio(&num, &den).expect("p^i / i! is p-integral");
                g.push(cpow.scale(coef));
            }
            pieces.push(g);
        }
        for (key, &c) in &self.terms {
            if alg.weight_of(key) == 0 {
                continue;
            }
            pieces.push(term_gammas(alg, key, c, k));
        }
        for g in pieces {
            let mut next = Vec::with_capacity(k + 1);
            for i in 0..=k {
                let mut s = alg.zero();
                for j in 0..=i {
                    if acc[j].is_zero() || g[i - j].is_zero() {
                        continue;
                    }
                    s = &s + &(&acc[j] * &g[i - j]);
                }
                next.push(s);
            }
            acc = next;
        }
        Ok(acc)
    }

    /// Derivative in the free pd-variable `j`: `gamma_k(w) -> gamma_{k-1}(w)`.
    pub fn free_derivative(&self, j: usize) -> PdElement {
        let idx = self.alg.n_anchors() * 2 + j;
        let mut out = self.alg.zero();
        for (k, &c) in &self.terms {
            if k[idx] > 0 {
                let mut k2 = k.clone();
                k2[idx] -= 1;
                out.accumulate(k2, c);
            }
        }
        out
    }

    /// Rewrite every key with `f` (terms landing on the same key are added,
    /// terms above the cap are dropped). `f` must produce valid basis keys.
    pub fn map_keys(&self, f: impl Fn(&[u32]) -> Vec<u32>) -> PdElement {
        let mut out = self.alg.zero();
        for (k, &c) in &self.terms {
            let k2 = f(k);
            if self.alg.weight_of(&k2) <= self.alg.cap() {
                out.accumulate(k2, c);
            }
        }
        out
    }

    /// Reduce coefficients into the same presentation over a smaller `Z/p^m`
    /// (or a lower cap).
    pub fn transfer(&self, target: &PdAlgebra) -> PdElement {
        assert_eq!(target.anchors(), self.alg.anchors());
        assert_eq!(target.free_names(), self.alg.free_names());
        let z = target.base();
        let mut out = target.zero();
        for (k, &c) in &self.terms {
            if target.weight_of(k) <= target.cap() {
                out.accumulate(k.clone(), z.from_u64(c));
            }
        }
        out
    }

    /// Evaluate at `x_i -> values[i]` (with `f_i(values[i]) = 0`) and every
    /// pd-variable to zero.
    pub fn evaluate(&self, values: &[u64]) -> Result<u64> {
        let z = self.alg.base();
        let na = self.alg.n_anchors();
        for (i, a) in self.alg.anchors().iter().enumerate() {
            let fv = a.f.iter().rev().fold(0, |acc, &c| z.add(z.mul(acc, values[i]), z.from_i64(c)));
            if fv != 0 {
                return Err(Error::NotInKernel);
            }
        }
        let mut acc = 0;
        for (k, &c) in &self.terms {
            if self.alg.weight_of(k) > 0 {
                continue;
            }
            let mut t = c;
            for i in 0..na {
                t = z.mul(t, z.pow(values[i], k[i] as u64));
            }
            acc = z.add(acc, t);
        }
        Ok(acc)
    }
}

/// `gamma_i(c x^a gamma_e(y))` for `i = 0..=k`, for a term of positive weight.
fn term_gammas(alg: &PdAlgebra, key: &[u32], c: u64, k: usize) -> Vec<PdElement> {
    let na = alg.n_anchors();
    let j0 = (na..key.len()).find(|&j| key[j] > 0).unwrap();
    let e0 = key[j0];
    // term = b * gamma_{e0}(y_{j0})
    let mut bkey = key.to_vec();
    bkey[j0] = 0;
    let b = alg.basis_element(&bkey, c);
    let z = alg.base();
    let mut out = vec![alg.one()];
    let mut bpow = alg.one();
    for i in 1..=k {
        let w = i as u64 * e0 as u64;
        if w > alg.cap() as u64 {
            out.push(alg.zero());
            continue;
        }
        bpow = &bpow * &b;
        let coef = z.from_biguint(&gamma_composition_coeff(i as u64, e0 as u64));
        let mut g = vec![0; key.len()];
        g[j0] = w as u32;
        let gk = alg.basis_element(&g, coef);
        out.push(&bpow * &gk);
    }
    out
}

fn mul_terms(alg: &PdAlgebra, k1: &[u32], c1: u64, k2: &[u32], c2: u64, out: &mut PdElement) {
    let inner = &alg.0;
    let z = inner.z;
    let na = inner.anchors.len();
    let len = k1.len();
    let mut key = vec![0u32; len];
    let mut weight = 0;
    let mut coeff = z.mul(c1, c2);
    for j in na..len {
        let e = k1[j] + k2[j];
        weight += e;
        if weight > inner.cap {
            return;
        }
        key[j] = e;
        coeff = z.mul(coeff, inner.binom[e as usize][k1[j] as usize]);
    }
    if coeff == 0 {
        return;
    }
    for i in 0..na {
        key[i] = k1[i] + k2[i];
    }
    let mut states = vec![(key, coeff, weight)];
    for i in 0..na {
        let d = inner.anchors[i].degree();
        if states.iter().all(|s| s.0[i] < d) {
            continue;
        }
        let mut next = Vec::new();
        for (key, c, w) in states {
            let a = key[i];
            if a < d {
                next.push((key, c, w));
                continue;
            }
            let (r, q) = &inner.high[i][(a - d) as usize];
            for (t, &rt) in r.iter().enumerate() {
                if rt != 0 {
                    let mut k = key.clone();
                    k[i] = t as u32;
                    next.push((k, z.mul(c, rt), w));
                }
            }
            if w + 1 > inner.cap {
                continue;
            }
            let ei = key[na + i];
            let factor = z.from_u64(ei as u64 + 1);
            for (t, &qt) in q.iter().enumerate() {
                if qt != 0 {
                    let mut k = key.clone();
                    k[i] = t as u32;
                    k[na + i] = ei + 1;
                    next.push((k, z.mul(z.mul(c, qt), factor), w + 1));
                }
            }
        }
        states = next;
    }
    for (k, c, _) in states {
        out.accumulate(k, c);
    }
}

impl std::ops::Add for &PdElement {
    type Output = PdElement;
    fn add(self, o: &PdElement) -> PdElement {
        self.try_add(o).expect("mixed pd parents")
    }
}

impl std::ops::Sub for &PdElement {
    type Output = PdElement;
    fn sub(self, o: &PdElement) -> PdElement {
        self.try_add(&-o).expect("mixed pd parents")
    }
}

impl std::ops::Neg for &PdElement {
    type Output = PdElement;
    fn neg(self) -> PdElement {
        let z = self.alg.base();
        PdElement { alg: self.alg.clone(), terms: self.terms.iter().map(|(k, &v)| (k.clone(), z.neg(v))).collect() }
    }
}

impl std::ops::Mul for &PdElement {
    type Output = PdElement;
    fn mul(self, o: &PdElement) -> PdElement {
        self.try_mul(o).expect("mixed pd parents")
    }
}

/// A pd-algebra map determined by the images of the ordinary variables and of
/// the free pd-variables. Anchored pd-variables go to `f_i(image of x_i)`, which
/// must lie in the target's pd-ideal.
#[derive(Clone, Debug)]
pub struct PdHom {
    src: PdAlgebra,
    tgt: PdAlgebra,
    x_images: Vec<PdElement>,
    /// Divided powers of the images of all pd-variables, up to the source cap.
    pd_gammas: Vec<Vec<PdElement>>,
}

impl PdHom {
    pub fn new(src: &PdAlgebra, tgt: &PdAlgebra, x_images: Vec<PdElement>, free_images: Vec<PdElement>) -> Result<Self> {
        if x_images.len() != src.n_anchors() || free_images.len() != src.free_names().len() {
            return Err(Error::LengthMismatch(x_images.len() + free_images.len(), src.n_pd()));
        }
        for im in x_images.iter().chain(&free_images) {
            if im.parent() != tgt {
                return Err(Error::MixedParents);
            }
        }
        let mut pd_images: Vec<PdElement> = (0..src.n_anchors()).map(|i| src.eval_anchor_poly(i, &x_images[i])).collect();
        pd_images.extend(free_images);
        let pd_gammas = pd_images.iter().map(|u| u.gammas(src.cap())).collect::<Result<Vec<_>>>()?;
        Ok(PdHom { src: src.clone(), tgt: tgt.clone(), x_images, pd_gammas })
    }

    pub fn source(&self) -> &PdAlgebra {
        &self.src
    }

    pub fn target(&self) -> &PdAlgebra {
        &self.tgt
    }

    /// The image of pd-variable `j`.
    pub fn pd_image(&self, j: usize) -> &PdElement {
        &self.pd_gammas[j][1.min(self.pd_gammas[j].len() - 1)]
    }

    pub fn apply(&self, el: &PdElement) -> Result<PdElement> {
        if el.parent() != &self.src {
            return Err(Error::MixedParents);
        }
        let na = self.src.n_anchors();
        let z = self.tgt.base();
        let mut out = self.tgt.zero();
        let mut xpow: Vec<Vec<PdElement>> = self.x_images.iter().map(|x| vec![self.tgt.one(), x.clone()]).collect();
        for (k, &c) in &el.terms {
            let mut t = self.tgt.scalar_u(z.from_u64(c));
            for i in 0..na {
                let a = k[i] as usize;
                while xpow[i].len() <= a {
                    let next = &xpow[i][xpow[i].len() - 1] * &self.x_images[i];
                    xpow[i].push(next);
                }
                if a > 0 {
                    t = &t * &xpow[i][a];
                }
            }
            for (j, g) in self.pd_gammas.iter().enumerate() {
                let e = k[na + j] as usize;
                if e > 0 {
                    t = &t * &g[e];
                }
            }
            out = &out + &t;
        }
        Ok(out)
    }

    pub fn compose(&self, after: &PdHom) -> Result<PdHom> {
        // after o self
        let xs = self.x_images.iter().map(|x| after.apply(x)).collect::<Result<Vec<_>>>()?;
        let na = self.src.n_anchors();
        let frees = (na..self.src.n_pd()).map(|j| after.apply(&self.pd_gammas[j][1])).collect::<Result<Vec<_>>>()?;
        PdHom::new(&self.src, &after.tgt, xs, frees)
    }
}

/// Truncated Koszul `H_1` of a sequence over `F_p`: the dimension of
/// `ker(K_1 -> K_0) / im(K_2 -> K_1)` in total degree `<= deg_cap`, where the
/// basis vector `e_i` has degree `deg f_i`.
pub fn koszul_h1_dim(seq: &[Poly<Zmod>], deg_cap: u32) -> usize {
    let ring = seq[0].parent().clone();
    let z = Zmod::field(ring.coeffs().p()).unwrap();
    let nv = ring.vars().len();
    let mons = |d: i64| -> Vec<Vec<u32>> {
        if d < 0 {
            return vec![];
        }
        (0..=d as u32).flat_map(|w| compositions(w, nv)).collect()
    };
    let degs: Vec<i64> = seq.iter().map(|f| f.terms().map(|(m, _)| m.degree()).max().unwrap_or(0) as i64).collect();
    let k0 = mons(deg_cap as i64);
    let k0_index: BTreeMap<Vec<u32>, usize> = k0.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
    let k1: Vec<(usize, Vec<u32>)> =
        (0..seq.len()).flat_map(|i| mons(deg_cap as i64 - degs[i]).into_iter().map(move |m| (i, m))).collect();
    let k1_index: BTreeMap<(usize, Vec<u32>), usize> = k1.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
    let mut k2 = Vec::new();
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            for m in mons(deg_cap as i64 - degs[i] - degs[j]) {
                k2.push((i, j, m));
            }
        }
    }
    let add = |a: &[u32], b: &[u32]| -> Vec<u32> { a.iter().zip(b).map(|(x, y)| x + y).collect() };
    // d1: rows = k0, cols = k1
    let mut d1 = Matrix::zeros(z, k0.len(), k1.len());
    for (col, (i, m)) in k1.iter().enumerate() {
        for (fm, &fc) in seq[*i].terms() {
            let target = add(m, &fm.0);
            if let Some(&row) = k0_index.get(&target) {
                let v = z.add(d1.get(row, col), z.from_u64(fc));
                d1.set(row, col, v);
            }
        }
    }
    let mut d2 = Matrix::zeros(z, k1.len(), k2.len());
    for (col, (i, j, m)) in k2.iter().enumerate() {
        // d(e_i ^ e_j) = f_i e_j - f_j e_i
        for (fm, &fc) in seq[*i].terms() {
            if let Some(&row) = k1_index.get(&(*j, add(m, &fm.0))) {
                let v = z.add(d2.get(row, col), z.from_u64(fc));
                d2.set(row, col, v);
            }
        }
        for (fm, &fc) in seq[*j].terms() {
            if let Some(&row) = k1_index.get(&(*i, add(m, &fm.0))) {
                let v = z.sub(d2.get(row, col), z.from_u64(fc));
                d2.set(row, col, v);
            }
        }
    }
    let ker = k1.len() - d1.rank();
    ker - d2.rank()
}

/// `D_A(f_1, ..., f_r)` for `A = Z/p^n[x_1..x_r]` and `f_i` monic in `x_i`
/// alone (one per variable, in any order).
pub fn pd_envelope(ring: &Arc<PolyRing<Zmod>>, seq: &[Poly<Zmod>], cap: u32) -> Result<PdAlgebra> {
    if seq.is_empty() {
        return Err(Error::UnsupportedPresentation("empty sequence".into()));
    }
    let z = *ring.coeffs();
    let reduce = |f: &Poly<Zmod>| -> Poly<Zmod> {
        let r = PolyRing::new(Zmod::field(z.p()).unwrap(), z.p(), &ring.vars().iter().map(|s| s.as_str()).collect::<Vec<_>>());
        f.terms().fold(r.zero(), |acc, (m, &c)| acc.try_add(&r.term(m.0.clone(), c % z.p())).unwrap())
    };
    let unsupported = |why: &str| -> Error {
        let mod_p: Vec<_> = seq.iter().map(reduce).collect();
        let deg: u32 = mod_p.iter().map(|f| f.terms().map(|(m, _)| m.degree()).max().unwrap_or(0)).sum::<u32>() + 2;
        if mod_p.iter().any(|f| f.is_zero()) || koszul_h1_dim(&mod_p, deg) > 0 {
            Error::NotRegularSequence(why.into())
        } else {
            Error::UnsupportedPresentation(why.into())
        }
    };
    if ring.root_depth() != 0 || ring.degree_cap().is_some() {
        return Err(Error::UnsupportedPresentation("ambient ring must be a plain polynomial ring".into()));
    }
    let nv = ring.vars().len();
    let mut slot: Vec<Option<Vec<i64>>> = vec![None; nv];
    for f in seq {
        let vars: Vec<usize> = (0..nv).filter(|&i| f.terms().any(|(m, _)| m.0[i] > 0)).collect();
        if vars.len() != 1 {
            return Err(unsupported("each generator must involve exactly one variable"));
        }
        let v = vars[0];
        if slot[v].is_some() {
            return Err(unsupported("two generators in the same variable"));
        }
        let deg = f.terms().map(|(m, _)| m.0[v]).max().unwrap() as usize;
        let mut coeffs = vec![0i64; deg + 1];
        for (m, &c) in f.terms() {
            coeffs[m.0[v] as usize] = z.signed(c);
        }
        if coeffs[deg] != 1 {
            return Err(unsupported("generators must be monic"));
        }
        slot[v] = Some(coeffs);
    }
    if slot.iter().any(|s| s.is_none()) {
        return Err(Error::UnsupportedPresentation("every variable needs a generator".into()));
    }
    let anchors = ring
        .vars()
        .iter()
        .zip(slot)
        .map(|(v, f)| {
            let f = f.unwrap();
            let pd_name = if f == [0, 1] { v.clone() } else { format!("y_{v}") };
            Anchor { var: v.clone(), pd_name, f }
        })
        .collect();
    PdAlgebra::new(z, anchors, vec![], cap)
}

/// One level of the conjugate filtration on a pd-envelope over `F_p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConjugateLevel {
    pub level: u32,
    pub fil_dim: usize,
    pub gr_dim: usize,
    /// `dim B^(1)` where `B^(1) = A / (f_1^p, ..., f_r^p)`.
    pub twist_dim: usize,
    pub gr_rank: usize,
    pub expected_rank: usize,
}

/// `F_p`-dimension of the span of the given elements.
pub fn span_dim(els: &[PdElement], basis: &[Vec<u32>]) -> usize {
    if els.is_empty() {
        return 0;
    }
    let z = els[0].parent().base();
    let rows: Vec<Vec<u64>> = els.iter().map(|e| e.coords(basis)).collect();
    Matrix::from_rows(z, basis.len(), &rows).rank()
}

/// `Fil_i` is spanned by `b * prod gamma_{k_j p}(f_j)` with `b` in the image of
/// `A` and `sum k_j <= i`; its graded pieces should be free over `B^(1)` of rank
/// `C(i + r - 1, r - 1)`.
pub fn conjugate_filtration_pd(env: &PdAlgebra, level: u32) -> Result<ConjugateLevel> {
    let z = env.base();
    if !z.is_field() {
        return Err(Error::NotModP);
    }
    if !env.free_names().is_empty() {
        return Err(Error::UnsupportedPresentation("conjugate filtration needs anchored variables only".into()));
    }
    let p = z.p() as u32;
    let r = env.n_anchors();
    let required = level * p + r as u32 * (p - 1);
    if env.cap() < required {
        return Err(Error::CapTooSmall { cap: env.cap(), required });
    }
    // B^(1): products x^a f^b with a < deg f, b < p
    let mut twist = vec![env.one()];
    for i in 0..r {
        let f = env.eval_anchor_poly(i, &env.x(i));
        let d = env.anchors()[i].degree();
        let mut next = Vec::new();
        for t in &twist {
            for a in 0..d {
                let xa = env.x(i).pow(a as u64);
                let mut fb = env.one();
                for _ in 0..p {
                    next.push(&(t * &xa) * &fb);
                    fb = &fb * &f;
                }
            }
        }
        twist = next;
    }
    let basis = env.basis();
    let twist_dim = span_dim(&twist, &basis);
    let fil = |i: u32| -> usize {
        let mut gens = Vec::new();
        for w in 0..=i {
            for ks in compositions(w, r) {
                let g = ks.iter().enumerate().fold(env.one(), |acc, (j, &k)| &acc * &env.gamma_var(j, k * p));
                for t in &twist {
                    gens.push(t * &g);
                }
            }
        }
        span_dim(&gens, &basis)
    };
    let fil_dim = fil(level);
    let prev = if level == 0 { 0 } else { fil(level - 1) };
    let gr_dim = fil_dim - prev;
    Ok(ConjugateLevel {
        level,
        fil_dim,
        gr_dim,
        twist_dim,
        gr_rank: if twist_dim == 0 { 0 } else { gr_dim / twist_dim },
        expected_rank: binomial(level as u64 + r as u64 - 1, r as u64 - 1).try_into().unwrap(),
    })
}

/// The map `F_p[x_0..x_r]/(x_i^p) -> F_p<x>`, `x_i -> gamma_p^{(i)}(x)`.
#[derive(Clone, Debug)]
pub struct IteratedGammaIso {
    pub p: u64,
    pub r: u32,
    pub algebra: PdAlgebra,
    /// `x_i -> (gamma_p o ... o gamma_p)(x)`, `i` applications.
    pub generator_images: Vec<PdElement>,
    pub rank: usize,
    pub target_dim: usize,
}

impl IteratedGammaIso {
    pub fn is_bijective(&self) -> bool {
        self.rank == self.target_dim && self.rank == (self.p as usize).pow(self.r + 1)
    }

    /// Image of the monomial `prod x_i^{a_i}`.
    pub fn image(&self, exps: &[u32]) -> PdElement {
        exps.iter().zip(&self.generator_images).fold(self.algebra.one(), |acc, (&a, g)| &acc * &g.pow(a as u64))
    }
}

pub fn iterated_gamma_iso(r: u32, p: u64, cap: u32) -> Result<IteratedGammaIso> {
    let required = (p as u32).pow(r + 1) - 1;
    if cap < required {
        return Err(Error::CapTooSmall { cap, required });
    }
    let z = Zmod::field(p)?;
    let alg = PdAlgebra::envelope_of_variable(z, "x", cap)?;
    let mut gens = vec![alg.pd_var("x")?];
    for _ in 0..r {
        let next = gens.last().unwrap().gamma(p as u32)?;
        gens.push(next);
    }
    let iso = IteratedGammaIso { p, r, algebra: alg.clone(), generator_images: gens, rank: 0, target_dim: 0 };
    let mut images = Vec::new();
    let total = (p as usize).pow(r + 1);
    for idx in 0..total {
        let mut exps = Vec::new();
        let mut t = idx;
        for _ in 0..=r {
            exps.push((t % p as usize) as u32);
            t /= p as usize;
        }
        images.push(iso.image(&exps));
    }
    let target: Vec<Vec<u32>> = alg.basis().into_iter().filter(|k| k[1] <= required).collect();
    // images must live in weight < p^{r+1}
    let outside = images.iter().any(|im| im.terms().any(|(k, _)| k[1] > required));
    let rank = if outside { 0 } else { span_dim(&images, &target) };
    Ok(IteratedGammaIso { rank, target_dim: target.len(), ..iso })
}

/// `W[x]<E(x)>`, the pd-envelope of an Eisenstein polynomial over `Z/p^n`.
pub fn faltings_breuil(p: u64, n: u32, e: &[i64], cap: u32) -> Result<PdAlgebra> {
    let coeffs: Vec<BigInt> = e.iter().map(|&c| BigInt::from(c)).collect();
    if !crate::algebra::is_eisenstein(&coeffs, p) {
        return Err(Error::NotEisenstein(format!("{e:?}")));
    }
    let z = Zmod::new(p, n)?;
    PdAlgebra::new(z, vec![Anchor::new("x", "E", e)], vec![], cap)
}

/// Elementary divisors of `O_K -> Fil^i / Fil^{i+1}`, `c -> c * gamma_i(E(x))`,
/// on a one-variable envelope. All zero (and `deg E` of them) means the graded
/// piece is free of rank one on the class of `gamma_i(E(x))`.
pub fn hodge_graded_divisors(env: &PdAlgebra, i: u32) -> Result<Vec<u32>> {
    if env.n_anchors() != 1 || env.n_pd() != 1 {
        return Err(Error::UnsupportedPresentation("expected a one-variable envelope".into()));
    }
    if i > env.cap() {
        return Err(Error::CapTooSmall { cap: env.cap(), required: i });
    }
    let x = env.x(0);
    let e = env.eval_anchor_poly(0, &x);
    let gi = e.gamma(i)?;
    let d = env.anchors()[0].degree();
    let graded = env.basis_of_weight(i);
    let rows: Vec<Vec<u64>> = (0..d).map(|a| (&x.pow(a as u64) * &gi).coords(&graded)).collect();
    Ok(Matrix::from_rows(env.base(), graded.len(), &rows).smith_valuations())
}

/// Dimension table of an envelope: `(weight, conjugate level) -> count` of
/// basis elements, for JSON reports.
pub fn dimension_table(env: &PdAlgebra) -> BTreeMap<String, usize> {
    let p = env.base().p() as u32;
    let na = env.n_anchors();
    let mut out = BTreeMap::new();
    for k in env.basis() {
        let w = env.weight_of(&k);
        let lvl: u32 = k[na..].iter().map(|e| e / p).sum();
        *out.entry(format!("{w},{lvl}")).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fx(p: u64, cap: u32) -> PdAlgebra {
        PdAlgebra::envelope_of_variable(Zmod::field(p).unwrap(), "x", cap).unwrap()
    }

    #[test]
    fn gamma_products() {
        let a = PdAlgebra::envelope_of_variable(Zmod::new(7, 1).unwrap(), "x", 10).unwrap();
        assert_eq!(&a.gamma_var(0, 1) * &a.gamma_var(0, 2), a.gamma_var(0, 3).scale(3));
        assert_eq!(&a.gamma_var(0, 2) * &a.gamma_var(0, 2), a.gamma_var(0, 4).scale(6));
        let f3 = fx(3, 10);
        assert!((&f3.gamma_var(0, 1) * &f3.gamma_var(0, 2)).is_zero());
        for p in [2u64, 3, 5] {
            let a = fx(p, 10);
            assert!(a.pd_var("x").unwrap().pow(p).is_zero());
        }
    }

    #[test]
    fn gamma_composition() {
        let a = PdAlgebra::envelope_of_variable(Zmod::new(5, 2).unwrap(), "x", 10).unwrap();
        let g2 = a.gamma_var(0, 2);
        assert_eq!(g2.gamma(2).unwrap(), a.gamma_var(0, 4).scale(3));
        let f2 = fx(2, 10);
        assert_eq!((-&f2.gamma_var(0, 2)).gamma(2).unwrap(), f2.gamma_var(0, 4));
    }

    #[test]
    fn gamma_of_sum() {
        let a = PdAlgebra::free(Zmod::new(7, 2).unwrap(), &["x", "y"], 6).unwrap();
        let s = &a.gamma_var(0, 1) + &a.gamma_var(1, 1);
        let expected = [(3, 0), (2, 1), (1, 2), (0, 3)]
            .iter()
            .fold(a.zero(), |acc, &(i, j)| &acc + &(&a.gamma_var(0, i) * &a.gamma_var(1, j)));
        assert_eq!(s.gamma(3).unwrap(), expected);
    }

    #[test]
    fn gamma_rejects_units() {
        let a = fx(3, 5);
        let u = &a.one() + &a.gamma_var(0, 1);
        assert_eq!(u.gamma(2).unwrap_err(), Error::NonzeroConstantTerm);
    }

    #[test]
    fn gamma_of_p() {
        // gamma_2(3) = 9/2 in Z/27
        let a = PdAlgebra::free(Zmod::new(3, 3).unwrap(), &["w"], 4).unwrap();
        let g = a.scalar(3).gamma(2).unwrap();
        let z = a.base();
        assert_eq!(z.mul(g.coeff(&[0]), 2), 9);
    }

    #[test]
    fn single_variable_envelope_basis() {
        // the direct sum of F_p[x]/(x^p) gamma_{ip}(x) spans the same space
        for p in [2u64, 3, 5] {
            let cap = 3 * p as u32 + p as u32 - 1;
            let a = fx(p, cap);
            let x = a.pd_var("x").unwrap();
            let mut els = Vec::new();
            for i in 0..=3 {
                for j in 0..p {
                    els.push(&x.pow(j) * &a.gamma_var(0, i * p as u32));
                }
            }
            let basis = a.basis();
            assert_eq!(span_dim(&els, &basis), basis.len());
        }
    }

    #[test]
    fn envelope_of_nonlinear_generator() {
        // D_{Z/9[x]}((x^2 - 3)): x^2 = 3 + gamma_1(E)
        let a = faltings_breuil(3, 2, &[-3, 0, 1], 4).unwrap();
        let x = a.x(0);
        let e = a.gamma_var(0, 1);
        assert_eq!(&x * &x, &a.scalar(3) + &e);
        // E^2 = 2 gamma_2(E)
        assert_eq!(&e * &e, a.gamma_var(0, 2).scale(2));
        assert_eq!(hodge_graded_divisors(&a, 1).unwrap(), vec![0, 0]);
        assert_eq!(faltings_breuil(3, 2, &[3, 0, 1], 4).map(|_| ()), Ok(()));
        assert!(matches!(faltings_breuil(3, 2, &[-9, 0, 1], 4), Err(Error::NotEisenstein(_))));
    }

    #[test]
    fn evaluation_kills_fil1() {
        let a = faltings_breuil(5, 4, &[-5, 1], 6).unwrap();
        let el = &a.x(0).pow(3) + &a.gamma_var(0, 2);
        // x -> 5 sends gamma_{>=1}(E) to zero
        assert_eq!(el.evaluate(&[5]).unwrap(), 125);
        assert_eq!(a.gamma_var(0, 1).evaluate(&[5]).unwrap(), 0);
        assert_eq!(a.x(0).evaluate(&[1]).unwrap_err(), Error::NotInKernel);
    }

    #[test]
    fn conjugate_levels() {
        let a = fx(3, 8);
        let l1 = conjugate_filtration_pd(&a, 1).unwrap();
        assert_eq!((l1.gr_dim, l1.gr_rank, l1.twist_dim), (3, 1, 3));
        let l0 = conjugate_filtration_pd(&a, 0).unwrap();
        assert_eq!(l0.gr_dim, 3);
        let z = Zmod::field(2).unwrap();
        let r = PolyRing::new(z, 2, &["u", "v"]);
        let env = pd_envelope(&r, &[r.var("u").unwrap(), r.var("v").unwrap()], 6).unwrap();
        let l2 = conjugate_filtration_pd(&env, 2).unwrap();
        assert_eq!(l2.gr_rank, 3);
        assert_eq!(l2.expected_rank, 3);
        assert!(matches!(conjugate_filtration_pd(&fx(3, 4), 2), Err(Error::CapTooSmall { .. })));
    }

    #[test]
    fn iterated_gamma() {
        let iso = iterated_gamma_iso(1, 2, 3).unwrap();
        assert!(iso.is_bijective());
        assert_eq!(iso.image(&[1, 1]), iso.algebra.gamma_var(0, 3));
        assert!(iterated_gamma_iso(2, 2, 7).unwrap().is_bijective());
        assert!(iterated_gamma_iso(0, 3, 2).unwrap().is_bijective());
        assert_eq!(iterated_gamma_iso(2, 2, 6).unwrap_err(), Error::CapTooSmall { cap: 6, required: 7 });
    }

    #[test]
    fn envelope_validation() {
        let z = Zmod::field(2).unwrap();
        let r = PolyRing::new(z, 2, &["x", "y"]);
        let x = r.var("x").unwrap();
        let y = r.var("y").unwrap();
        assert!(matches!(pd_envelope(&r, &[x.clone(), x.clone()], 4), Err(Error::NotRegularSequence(_))));
        let xy = x.try_mul(&y).unwrap();
        assert!(matches!(pd_envelope(&r, &[xy], 4), Err(Error::UnsupportedPresentation(_))));
        assert!(pd_envelope(&r, &[y, x], 4).is_ok());
    }

    #[test]
    fn homomorphism_substitutes() {
        // w -> x on F_3<w> -> F_3<x>: gamma_k(w) -> gamma_k(x)
        let z = Zmod::field(3).unwrap();
        let src = PdAlgebra::free(z, &["w"], 6).unwrap();
        let tgt = fx(3, 6);
        let h = PdHom::new(&src, &tgt, vec![], vec![tgt.pd_var("x").unwrap()]).unwrap();
        assert_eq!(h.apply(&src.gamma_var(0, 4)).unwrap(), tgt.gamma_var(0, 4));
        // w -> 2x: gamma_4(2x) = 16 gamma_4(x) = gamma_4(x) mod 3
        let h2 = PdHom::new(&src, &tgt, vec![], vec![tgt.gamma_var(0, 1).scale(2)]).unwrap();
        assert_eq!(h2.apply(&src.gamma_var(0, 4)).unwrap(), tgt.gamma_var(0, 4));
        assert_eq!(PdHom::new(&src, &tgt, vec![], vec![tgt.one()]).unwrap_err(), Error::NonzeroConstantTerm);
    }

    #[test]
    fn mixed_parents() {
        let a = fx(3, 4);
        let b = fx(3, 5);
        assert_eq!(a.one().try_mul(&b.one()).unwrap_err(), Error::MixedParents);
    }
}
