//! Multivariate polynomials with exponents in `(1/p^k) N`, optionally truncated
//! by total degree.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::Ring;
use crate::zmod::Zmod;

/// Exponent numerators over the ring's common denominator `p^k`.
/// Ordered graded-lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug)]
pub struct PolyRing<R: Ring> {
    coeffs: R,
    vars: Vec<String>,
    p: u64,
    /// Root depth: exponents live in `(1/p^k) N`.
    k: u32,
    /// Total-degree cap in whole units (numerator sums `<= cap * p^k`).
    degree_cap: Option<u32>,
    twist: bool,
}

impl<R: Ring> PolyRing<R> {
    pub fn new(coeffs: R, p: u64, vars: &[&str]) -> Arc<Self> {
        Self::build(coeffs, p, vars.iter().map(|s| s.to_string()).collect(), 0, None, false)
    }

    fn build(coeffs: R, p: u64, vars: Vec<String>, k: u32, degree_cap: Option<u32>, twist: bool) -> Arc<Self> {
        Arc::new(PolyRing { coeffs, vars, p, k, degree_cap, twist })
    }

    pub fn with_root_depth(self: &Arc<Self>, k: u32) -> Arc<Self> {
        Self::build(self.coeffs.clone(), self.p, self.vars.clone(), k, self.degree_cap, self.twist)
    }

    pub fn with_degree_cap(self: &Arc<Self>, cap: u32) -> Arc<Self> {
        Self::build(self.coeffs.clone(), self.p, self.vars.clone(), self.k, Some(cap), self.twist)
    }

    pub fn coeffs(&self) -> &R {
        &self.coeffs
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn denom(&self) -> u64 {
        self.p.pow(self.k)
    }

    pub fn root_depth(&self) -> u32 {
        self.k
    }

    pub fn degree_cap(&self) -> Option<u32> {
        self.degree_cap
    }

    pub fn is_twist(&self) -> bool {
        self.twist
    }

    fn fits(&self, m: &Monomial) -> bool {
        match self.degree_cap {
            Some(c) => (m.degree() as u64) <= c as u64 * self.denom(),
            None => true,
        }
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs && self.vars == other.vars && self.p == other.p && self.k == other.k && self.degree_cap == other.degree_cap && self.twist == other.twist
    }

    pub fn zero(self: &Arc<Self>) -> Poly<R> {
        Poly { ring: self.clone(), terms: BTreeMap::new() }
    }

    pub fn constant(self: &Arc<Self>, c: R::Elem) -> Poly<R> {
        self.term(vec![0; self.vars.len()], c)
    }

    pub fn one(self: &Arc<Self>) -> Poly<R> {
        self.constant(self.coeffs.one())
    }

    pub fn from_i64(self: &Arc<Self>, c: i64) -> Poly<R> {
        self.constant(self.coeffs.from_i64(c))
    }

    /// `c * prod x_i^{exps_i / p^k}`, dropped if it exceeds the degree cap.
    pub fn term(self: &Arc<Self>, exps: Vec<u32>, c: R::Elem) -> Poly<R> {
        assert_eq!(exps.len(), self.vars.len());
        let mut out = self.zero();
        let m = Monomial(exps);
        if !self.coeffs.is_zero(&c) && self.fits(&m) {
            out.terms.insert(m, c);
        }
        out
    }

    pub fn var(self: &Arc<Self>, name: &str) -> Result<Poly<R>> {
        let i = self.vars.iter().position(|v| v == name).ok_or_else(|| Error::UnknownGenerator(name.into()))?;
        let mut e = vec![0; self.vars.len()];
        e[i] = self.denom() as u32;
        Ok(self.term(e, self.coeffs.one()))
    }

    /// `x_i^{num / p^k}`.
    pub fn root(self: &Arc<Self>, i: usize, num: u32) -> Poly<R> {
        let mut e = vec![0; self.vars.len()];
        e[i] = num;
        self.term(e, self.coeffs.one())
    }
}

/// A polynomial. Zero coefficients are never stored.
#[derive(Clone)]
pub struct Poly<R: Ring> {
    ring: Arc<PolyRing<R>>,
    terms: BTreeMap<Monomial, R::Elem>,
}

impl<R: Ring> PartialEq for Poly<R> {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms && self.ring.same_shape(&other.ring)
    }
}

impl<R: Ring> fmt::Debug for Poly<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let d = self.ring.denom();
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c:?}")?;
            for (v, &e) in self.ring.vars.iter().zip(&m.0) {
                if e == 0 {
                    continue;
                }
                if e as u64 % d == 0 {
                    write!(f, "*{v}^{}", e as u64 / d)?;
                } else {
                    write!(f, "*{v}^({e}/{d})")?;
                }
            }
        }
        Ok(())
    }
}

impl<R: Ring> Poly<R> {
    pub fn parent(&self) -> &Arc<PolyRing<R>> {
        &self.ring
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &R::Elem)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, exps: &[u32]) -> R::Elem {
        self.terms.get(&Monomial(exps.to_vec())).cloned().unwrap_or_else(|| self.ring.coeffs.zero())
    }

    fn check(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.ring, &other.ring) || self.ring.same_shape(&other.ring) {
            Ok(())
        } else {
            Err(Error::MixedRings)
        }
    }

    fn accumulate(&mut self, m: Monomial, c: R::Elem) {
        let r = &self.ring.coeffs;
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v = r.add(v, &c);
                if r.is_zero(v) {
                    self.terms.remove(&m);
                }
            }
            None => {
                if !r.is_zero(&c) {
                    self.terms.insert(m, c);
                }
            }
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.accumulate(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        let r = &self.ring.coeffs;
        Poly { ring: self.ring.clone(), terms: self.terms.iter().map(|(m, c)| (m.clone(), r.neg(c))).collect() }
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.try_add(&other.neg())
    }

    pub fn scale(&self, c: &R::Elem) -> Self {
        let r = &self.ring.coeffs;
        let mut out = self.ring.zero();
        for (m, v) in &self.terms {
            out.accumulate(m.clone(), r.mul(v, c));
        }
        out
    }

    /// Product, truncated at the degree cap.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let r = &self.ring.coeffs;
        let mut out = self.ring.zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = Monomial(ma.0.iter().zip(&mb.0).map(|(a, b)| a + b).collect());
                if self.ring.fits(&m) {
                    out.accumulate(m, r.mul(ca, cb));
                }
            }
        }
        Ok(out)
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = self.ring.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.try_mul(&base).unwrap();
            }
            e >>= 1;
            if e > 0 {
                base = base.try_mul(&base).unwrap();
            }
        }
        acc
    }

    /// Ring homomorphism sending variable `i` to `images[i]`. Fractional
    /// exponents are only allowed when the image is a monomial with coefficient
    /// one whose scaled exponents stay in the target monoid.
    pub fn substitute(&self, images: &[Poly<R>]) -> Result<Poly<R>> {
        if images.len() != self.ring.vars.len() {
            return Err(Error::Parse(format!(
                "substitution needs {} images, got {}",
                self.ring.vars.len(),
                images.len()
            )));
        }
        let target = images.first().map(|p| p.ring.clone()).unwrap_or_else(|| self.ring.clone());
        for im in images {
            im.check(&target.zero())?;
        }
        let d = self.ring.denom() as u32;
        let mut out = target.zero();
        for (m, c) in &self.terms {
            let mut t = target.constant(c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let factor = if e % d == 0 {
                    images[i].pow((e / d) as u64)
                } else {
                    fractional_power(&images[i], e, d, &self.ring.vars[i])?
                };
                t = t.try_mul(&factor)?;
            }
            out = out.try_add(&t)?;
        }
        Ok(out)
    }
}

fn fractional_power<R: Ring>(img: &Poly<R>, num: u32, den: u32, name: &str) -> Result<Poly<R>> {
    let err = || Error::FractionalExponentOnNonMonoidVariable(name.to_string());
    let r = &img.ring.coeffs;
    if img.terms.len() != 1 {
        return Err(err());
    }
    let (m, c) = img.terms.iter().next().unwrap();
    if *c != r.one() {
        return Err(err());
    }
    let mut e = Vec::with_capacity(m.0.len());
    for &x in &m.0 {
        let prod = x as u64 * num as u64;
        if prod % den as u64 != 0 {
            return Err(err());
        }
        e.push((prod / den as u64) as u32);
    }
    Ok(img.ring.term(e, r.one()))
}

impl PolyRing<Zmod> {
    /// The Frobenius twist of an `F_p`-polynomial ring: same variables, read as
    /// `x^(1)`, tagged so that [`relative_frobenius`] accepts it. A degree cap
    /// `D` is the quotient by monomials of degree `> D`, which the twist keeps.
    pub fn frobenius_twist(self: &Arc<Self>) -> Result<Arc<Self>> {
        if !self.coeffs.is_field() {
            return Err(Error::NotCharP);
        }
        Ok(Self::build(self.coeffs, self.p, self.vars.clone(), self.k, self.degree_cap, true))
    }

    /// The untwisted ring a twist came from.
    pub fn untwisted(self: &Arc<Self>) -> Arc<Self> {
        Self::build(self.coeffs, self.p, self.vars.clone(), self.k, self.degree_cap, false)
    }

    pub fn from_json(self: &Arc<Self>, j: &PolyJson) -> Result<Poly<Zmod>> {
        if j.vars != self.vars || j.denom != self.denom() {
            return Err(Error::Parse("polynomial variables or denominator do not match the ring".into()));
        }
        let mut out = self.zero();
        for t in &j.terms {
            if t.exps.len() != self.vars.len() {
                return Err(Error::Parse("exponent vector has the wrong length".into()));
            }
            out = out.try_add(&self.term(t.exps.clone(), self.coeffs.from_i64(t.coeff)))?;
        }
        Ok(out)
    }
}

/// The relative Frobenius `B^(1) -> B`, `x^(1) -> x^p`, for a twisted ring over `F_p`.
pub fn relative_frobenius(f: &Poly<Zmod>) -> Result<Poly<Zmod>> {
    if !f.ring.coeffs.is_field() {
        return Err(Error::NotCharP);
    }
    if !f.ring.twist {
        return Err(Error::NotOnTwist);
    }
    let target = f.ring.untwisted();
    let p = f.ring.p as u32;
    let mut out = target.zero();
    for (m, c) in &f.terms {
        let e = m.0.iter().map(|x| x * p).collect();
        out = out.try_add(&target.term(e, *c))?;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PolyJson {
    pub vars: Vec<String>,
    pub denom: u64,
    pub terms: Vec<PolyTermJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PolyTermJson {
    pub exps: Vec<u32>,
    pub coeff: i64,
}

impl Poly<Zmod> {
    pub fn to_json(&self) -> PolyJson {
        PolyJson {
            vars: self.ring.vars.clone(),
            denom: self.ring.denom(),
            terms: self
                .terms
                .iter()
                .map(|(m, c)| PolyTermJson { exps: m.0.clone(), coeff: self.ring.coeffs.signed(*c) })
                .collect(),
        }
    }
}

/// Build `sum c * x^e` for a univariate integer polynomial (low degree first).
pub fn univariate<R: Ring>(ring: &Arc<PolyRing<R>>, coeffs: &[i64]) -> Poly<R> {
    assert_eq!(ring.vars.len(), 1);
    let d = ring.denom() as u32;
    let mut out = ring.zero();
    for (j, &c) in coeffs.iter().enumerate() {
        out = out.try_add(&ring.term(vec![j as u32 * d], ring.coeffs.from_int(&BigInt::from(c)))).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zx(p: u64, n: u32, vars: &[&str]) -> Arc<PolyRing<Zmod>> {
        PolyRing::new(Zmod::new(p, n).unwrap(), p, vars)
    }

    #[test]
    fn difference_of_squares() {
        let r = zx(3, 2, &["x"]);
        let x = r.var("x").unwrap();
        let a = x.try_add(&r.from_i64(1)).unwrap();
        let b = x.try_sub(&r.from_i64(1)).unwrap();
        let prod = a.try_mul(&b).unwrap();
        assert_eq!(prod, univariate(&r, &[8, 0, 1]));
    }

    #[test]
    fn fractional_exponents_add() {
        let r = zx(3, 1, &["x"]).with_root_depth(1);
        let a = r.root(0, 1);
        let b = r.root(0, 2);
        assert_eq!(a.try_mul(&b).unwrap(), r.var("x").unwrap());
    }

    #[test]
    fn substitution_examples() {
        let r = zx(3, 2, &["t"]);
        let f = univariate(&r, &[0, 1, 1]);
        let target = zx(3, 2, &["x"]);
        let x = target.var("x").unwrap();
        assert_eq!(f.substitute(&[x]).unwrap(), univariate(&target, &[0, 1, 1]));
        assert!(f.substitute(&[target.zero()]).unwrap().is_zero());

        // (t-1)^3 over Z/4, t -> t+1 gives t^3
        let r4 = zx(2, 2, &["t"]);
        let g = univariate(&r4, &[-1, 1]).pow(3);
        let shift = univariate(&r4, &[1, 1]);
        assert_eq!(g.substitute(&[shift]).unwrap(), univariate(&r4, &[0, 0, 0, 1]));
    }

    #[test]
    fn fractional_substitution() {
        let r = zx(2, 2, &["x"]).with_root_depth(1);
        let half = r.root(0, 1);
        // x^(1/2) with x -> x^2 gives x
        let sq = r.var("x").unwrap().pow(2);
        assert_eq!(half.substitute(&[sq.clone()]).unwrap(), r.var("x").unwrap());
        let bad = sq.try_add(&r.from_i64(1)).unwrap();
        assert_eq!(
            half.substitute(&[bad]).unwrap_err(),
            Error::FractionalExponentOnNonMonoidVariable("x".into())
        );
    }

    #[test]
    fn relative_frobenius_examples() {
        let r = zx(2, 1, &["x", "y"]);
        let tw = r.frobenius_twist().unwrap();
        let x1 = tw.var("x").unwrap();
        let y1 = tw.var("y").unwrap();
        assert_eq!(relative_frobenius(&x1).unwrap(), r.var("x").unwrap().pow(2));
        let s = x1.try_add(&y1).unwrap();
        let expected = r.var("x").unwrap().pow(2).try_add(&r.var("y").unwrap().pow(2)).unwrap();
        assert_eq!(relative_frobenius(&s).unwrap(), expected);
        assert_eq!(relative_frobenius(&r.var("x").unwrap()).unwrap_err(), Error::NotOnTwist);
        assert_eq!(zx(2, 2, &["x"]).frobenius_twist().unwrap_err(), Error::NotCharP);
    }

    #[test]
    fn twist_of_truncated_ring() {
        // F_3[x]/(x^3) as the degree-2 truncation; its twist is spanned by
        // 1, x^(1), (x^(1))^2 and Frobenius sends the last two into (x^3) = 0.
        let r = zx(3, 1, &["x"]).with_degree_cap(2);
        let tw = r.frobenius_twist().unwrap();
        let basis: Vec<_> = (0..3).map(|j| tw.term(vec![j], 1)).collect();
        assert!(basis.iter().all(|b| !b.is_zero()));
        assert_eq!(basis.len(), 3);
        assert_eq!(relative_frobenius(&basis[0]).unwrap(), r.one());
        for b in &basis[1..] {
            assert!(relative_frobenius(b).unwrap().is_zero());
        }
    }

    #[test]
    fn json_round_trip() {
        let r = zx(3, 2, &["x", "y"]).with_root_depth(1);
        let f = r.root(0, 1).try_add(&r.term(vec![3, 6], 5)).unwrap();
        let j = f.to_json();
        let text = serde_json::to_string(&j).unwrap();
        assert_eq!(text, r#"{"vars":["x","y"],"denom":3,"terms":[{"exps":[1,0],"coeff":1},{"exps":[3,6],"coeff":-4}]}"#);
        let back: PolyJson = serde_json::from_str(&text).unwrap();
        assert_eq!(r.from_json(&back).unwrap(), f);
    }

    #[test]
    fn degree_cap_truncates() {
        let r = zx(5, 1, &["x"]).with_degree_cap(3);
        let x = r.var("x").unwrap();
        assert!(x.pow(4).is_zero());
        assert_eq!(x.pow(3).len(), 1);
    }

    #[test]
    fn mixed_rings() {
        let a = zx(3, 2, &["x"]).var("x").unwrap();
        let b = zx(3, 1, &["x"]).var("x").unwrap();
        assert_eq!(a.try_mul(&b).unwrap_err(), Error::MixedRings);
    }
}
