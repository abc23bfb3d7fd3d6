//! Finite free `Z/p^n`-algebras presented by triangular monic relations.
//!
//! Generator `g_i` satisfies a monic relation of degree `d_i` whose lower
//! coefficients are integer polynomials in `g_0, ..., g_{i-1}`. The monomials
//! `prod g_i^{a_i}` with `a_i < d_i` form a basis; the structure constants are
//! computed once over the integers and then reduced.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::Ring;
use crate::valuation::Valuation;
use crate::zmod::Zmod;

/// One relation: integer terms `(exponents over g_0..g_i, coefficient)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub var: String,
    pub degree: u32,
    /// Lower-order terms, i.e. `g_i^{d_i} = -sum(terms)`. Exponent vectors have
    /// length `i + 1`.
    pub lower: Vec<(Vec<u32>, BigInt)>,
}

#[derive(Debug)]
struct Inner {
    base: Zmod,
    generators: Vec<String>,
    relations: Vec<Relation>,
    basis: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    /// Exact integer structure constants, `table[i][j]` for `i <= j`.
    int_table: Vec<Vec<Vec<(usize, BigInt)>>>,
    table: Vec<Vec<Vec<(usize, u64)>>>,
    ramification: u32,
}

/// A finite free algebra over `Z/p^n`. Cheap to clone.
#[derive(Clone)]
pub struct FiniteAlgebra(Arc<Inner>);

impl fmt::Debug for FiniteAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteAlgebra({} [{}], rank {})", self.0.base, self.0.generators.join(","), self.rank())
    }
}

impl PartialEq for FiniteAlgebra {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.base == other.0.base
                && self.0.generators == other.0.generators
                && self.0.relations == other.0.relations)
    }
}

/// JSON presentation: `{"p", "n", "generators", "relations": [{"var", "coeffs"}], "e"}`.
/// `coeffs[j]` is the coefficient of `var^j`, either an integer or a list of
/// terms over the earlier generators.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Presentation {
    pub p: u64,
    pub n: u32,
    pub generators: Vec<String>,
    pub relations: Vec<RelationJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RelationJson {
    pub var: String,
    pub coeffs: Vec<CoeffJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum CoeffJson {
    Int(i64),
    Poly(Vec<TermJson>),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TermJson {
    pub exps: Vec<u32>,
    pub coeff: i64,
}

impl Presentation {
    /// Relations with integer coefficients only, low degree first.
    pub fn simple(p: u64, n: u32, rels: &[(&str, &[i64])]) -> Self {
        Presentation {
            p,
            n,
            generators: rels.iter().map(|(v, _)| v.to_string()).collect(),
            relations: rels
                .iter()
                .map(|(v, c)| RelationJson {
                    var: v.to_string(),
                    coeffs: c.iter().map(|&x| CoeffJson::Int(x)).collect(),
                })
                .collect(),
            e: None,
        }
    }
}

/// Coefficients of the cyclotomic polynomial `Phi_{p^k}`, low degree first.
pub fn cyclotomic_prime_power(p: u64, k: u32) -> Vec<i64> {
    assert!(k >= 1);
    let step = p.pow(k - 1) as usize;
    let deg = (p as usize - 1) * step;
    let mut c = vec![0i64; deg + 1];
    for j in 0..p as usize {
        c[j * step] = 1;
    }
    c
}

pub fn make_finite_algebra(pres: &Presentation) -> Result<FiniteAlgebra> {
    let base = Zmod::new(pres.p, pres.n)?;
    let gens = &pres.generators;
    if pres.relations.len() != gens.len() {
        return Err(Error::Parse(format!(
            "{} generators but {} relations",
            gens.len(),
            pres.relations.len()
        )));
    }
    let mut relations = Vec::new();
    for (i, rj) in pres.relations.iter().enumerate() {
        let pos = gens.iter().position(|g| g == &rj.var).ok_or_else(|| Error::UnknownGenerator(rj.var.clone()))?;
        if pos > i {
            return Err(Error::NonTriangularPresentation(rj.var.clone()));
        }
        if pos < i {
            return Err(Error::Parse(format!("relation for `{}` given twice", rj.var)));
        }
        let degree = rj.coeffs.len().checked_sub(1).filter(|&d| d >= 1).ok_or_else(|| Error::NonMonicRelation(rj.var.clone()))?;
        match rj.coeffs[degree] {
            CoeffJson::Int(1) => {}
            _ => return Err(Error::NonMonicRelation(rj.var.clone())),
        }
        let mut lower = Vec::new();
        for (j, c) in rj.coeffs[..degree].iter().enumerate() {
            match c {
                CoeffJson::Int(0) => {}
                CoeffJson::Int(v) => {
                    let mut e = vec![0u32; i + 1];
                    e[i] = j as u32;
                    lower.push((e, BigInt::from(*v)));
                }
                CoeffJson::Poly(terms) => {
                    for t in terms {
                        if t.exps.len() > i || t.exps.iter().skip(i).any(|&x| x > 0) {
                            return Err(Error::NonTriangularPresentation(rj.var.clone()));
                        }
                        if t.coeff == 0 {
                            continue;
                        }
                        let mut e = vec![0u32; i + 1];
                        e[..t.exps.len()].copy_from_slice(&t.exps);
                        e[i] = j as u32;
                        lower.push((e, BigInt::from(t.coeff)));
                    }
                }
            }
        }
        relations.push(Relation { var: rj.var.clone(), degree: degree as u32, lower });
    }
    let degrees: Vec<u32> = relations.iter().map(|r| r.degree).collect();
    let ramification = pres.e.unwrap_or_else(|| degrees.iter().product());
    Ok(FiniteAlgebra::build(base, gens.clone(), relations, ramification))
}

/// All exponent vectors `a` with `a_i < bounds_i`, degree-lexicographic.
fn enumerate_basis(bounds: &[u32]) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = vec![vec![]];
    for &b in bounds {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..b).map(move |a| {
                    let mut w = v.clone();
                    w.push(a);
                    w
                })
            })
            .collect();
    }
    out.sort_by(|a, b| {
        let da: u32 = a.iter().sum();
        let db: u32 = b.iter().sum();
        da.cmp(&db).then_with(|| b.cmp(a))
    });
    out
}

/// Reduce an integer polynomial in the generators to basis form, exactly.
fn reduce_int(relations: &[Relation], mut terms: BTreeMap<Vec<u32>, BigInt>) -> BTreeMap<Vec<u32>, BigInt> {
    for i in (0..relations.len()).rev() {
        let rel = &relations[i];
        let d = rel.degree;
        loop {
            let key = terms.keys().find(|e| e[i] >= d).cloned();
            let Some(key) = key else { break };
            let c = terms.remove(&key).unwrap();
            let mut rest = key.clone();
            rest[i] -= d;
            for (e, rc) in &rel.lower {
                let mut m = rest.clone();
                for (k, x) in e.iter().enumerate() {
                    m[k] += x;
                }
                let v = terms.entry(m.clone()).or_insert_with(BigInt::zero);
                *v -= &c * rc;
                if v.is_zero() {
                    terms.remove(&m);
                }
            }
        }
    }
    terms
}

impl FiniteAlgebra {
    fn build(base: Zmod, generators: Vec<String>, relations: Vec<Relation>, ramification: u32) -> Self {
        let degrees: Vec<u32> = relations.iter().map(|r| r.degree).collect();
        let basis = enumerate_basis(&degrees);
        let index: HashMap<Vec<u32>, usize> = basis.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect();
        let r = basis.len();
        let mut int_table = vec![Vec::new(); r];
        let mut table = vec![Vec::new(); r];
        for i in 0..r {
            for j in i..r {
                let e: Vec<u32> = basis[i].iter().zip(&basis[j]).map(|(a, b)| a + b).collect();
                let red = reduce_int(&relations, BTreeMap::from([(e, BigInt::one())]));
                let mut row: Vec<(usize, BigInt)> = red.into_iter().map(|(k, v)| (index[&k], v)).collect();
                row.sort_by_key(|x| x.0);
                let small: Vec<(usize, u64)> = row
                    .iter()
                    .map(|(k, v)| (*k, base.from_bigint(v)))
                    .filter(|x| x.1 != 0)
                    .collect();
                int_table[i].push(row);
                table[i].push(small);
            }
        }
        FiniteAlgebra(Arc::new(Inner { base, generators, relations, basis, index, int_table, table, ramification }))
    }

    pub fn base(&self) -> Zmod {
        self.0.base
    }

    pub fn generators(&self) -> &[String] {
        &self.0.generators
    }

    pub fn relations(&self) -> &[Relation] {
        &self.0.relations
    }

    pub fn rank(&self) -> usize {
        self.0.basis.len()
    }

    pub fn basis(&self) -> &[Vec<u32>] {
        &self.0.basis
    }

    pub fn ramification_index(&self) -> u32 {
        self.0.ramification
    }

    /// The same presentation over `Z/p^m`.
    pub fn with_precision(&self, m: u32) -> Result<FiniteAlgebra> {
        let base = self.0.base.with_precision(m)?;
        Ok(FiniteAlgebra::build(base, self.0.generators.clone(), self.0.relations.clone(), self.0.ramification))
    }

    fn table_entry(&self, i: usize, j: usize) -> &[(usize, u64)] {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        &self.0.table[a][b - a]
    }

    fn int_table_entry(&self, i: usize, j: usize) -> &[(usize, BigInt)] {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        &self.0.int_table[a][b - a]
    }

    pub fn element(&self, coords: Vec<u64>) -> AlgebraElement {
        assert_eq!(coords.len(), self.rank());
        let z = self.base();
        AlgebraElement { alg: self.clone(), coords: coords.into_iter().map(|c| z.from_u64(c)).collect() }
    }

    pub fn zero_elem(&self) -> AlgebraElement {
        AlgebraElement { alg: self.clone(), coords: vec![0; self.rank()] }
    }

    pub fn scalar(&self, v: i64) -> AlgebraElement {
        let mut e = self.zero_elem();
        e.coords[0] = self.base().from_i64(v);
        e
    }

    pub fn gen(&self, name: &str) -> Result<AlgebraElement> {
        self.monomial(&[(name, 1)])
    }

    /// `prod name^exp`, reduced.
    pub fn monomial(&self, factors: &[(&str, u32)]) -> Result<AlgebraElement> {
        let mut e = vec![0u32; self.generators().len()];
        for (name, x) in factors {
            let i = self.generators().iter().position(|g| g == name).ok_or_else(|| Error::UnknownGenerator(name.to_string()))?;
            e[i] += x;
        }
        Ok(self.reduce_terms(&[(e, BigInt::one())]))
    }

    /// Normal form of an integer polynomial in the generators.
    pub fn reduce_terms(&self, terms: &[(Vec<u32>, BigInt)]) -> AlgebraElement {
        let mut m = BTreeMap::new();
        for (e, c) in terms {
            *m.entry(e.clone()).or_insert_with(BigInt::zero) += c;
        }
        m.retain(|_, v: &mut BigInt| !v.is_zero());
        let red = reduce_int(&self.0.relations, m);
        let mut out = self.zero_elem();
        let z = self.base();
        for (k, v) in red {
            let i = self.0.index[&k];
            out.coords[i] = z.add(out.coords[i], z.from_bigint(&v));
        }
        out
    }

    /// Schoolbook product `polynomial multiply then reduce`, used as an oracle
    /// for the table-driven multiplication.
    pub fn mul_by_long_division(&self, a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
        let mut terms = Vec::new();
        for (i, &x) in a.coords.iter().enumerate() {
            for (j, &y) in b.coords.iter().enumerate() {
                if x == 0 || y == 0 {
                    continue;
                }
                let e: Vec<u32> = self.0.basis[i].iter().zip(&self.0.basis[j]).map(|(s, t)| s + t).collect();
                terms.push((e, BigInt::from(x) * BigInt::from(y)));
            }
        }
        self.reduce_terms(&terms)
    }

    /// How each generator's relation looks after the shift `g -> g + s`.
    fn eisenstein_shift(&self, i: usize) -> Option<i64> {
        let rel = &self.0.relations[i];
        if rel.lower.iter().any(|(e, _)| e[..i].iter().any(|&x| x > 0)) {
            return None;
        }
        let d = rel.degree as usize;
        let mut coeffs = vec![BigInt::zero(); d + 1];
        coeffs[d] = BigInt::one();
        for (e, c) in &rel.lower {
            coeffs[e[i] as usize] += c;
        }
        [0i64, 1].into_iter().find(|&s| is_eisenstein(&taylor_shift(&coeffs, s), self.base().p()))
    }

    /// Whether every relation is Eisenstein, possibly after `g -> g + 1`
    /// (cyclotomic relations), so that the valuation is defined.
    pub fn is_field_model(&self) -> bool {
        (0..self.0.relations.len()).all(|i| self.eisenstein_shift(i).is_some())
    }

    /// Normalized valuation `val(p) = 1` computed from the norm: for the integer
    /// lift `x` of the element, `val(x) = v_p(det(mult_x)) / rank`. When the
    /// element vanishes mod `p^n` the result is the cap `>= n`.
    pub fn valuation(&self, x: &AlgebraElement) -> Result<Valuation> {
        if !self.is_field_model() {
            return Err(Error::ValuationUndefined(
                "relations must be Eisenstein or cyclotomic over Z_p".into(),
            ));
        }
        let n = self.base().n() as i64;
        if x.is_zero() {
            return Ok(Valuation::capped(n));
        }
        let r = self.rank();
        let p = BigInt::from(self.base().p());
        let cap = (n as u32) * r as u32 + 1;
        let modulus = p.pow(cap);
        // multiplication-by-x matrix on the integer lift
        let mut mat = vec![vec![BigInt::zero(); r]; r];
        for (i, &c) in x.coords.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = BigInt::from(c);
            for j in 0..r {
                for (k, v) in self.int_table_entry(i, j) {
                    mat[*k][j] += &c * v;
                }
            }
        }
        let v = det_valuation(mat, &p, &modulus, cap);
        let v = v.min(cap as i64);
        let val = Ratio::new(v, r as i64);
        if val >= Ratio::from_integer(n) {
            Ok(Valuation::capped(n))
        } else {
            Ok(Valuation::Exact(val))
        }
    }
}

/// `v_p(det M)` by local elimination modulo `p^cap`; returns at least `cap`
/// when the determinant vanishes at that precision.
fn det_valuation(mut m: Vec<Vec<BigInt>>, p: &BigInt, modulus: &BigInt, cap: u32) -> i64 {
    let r = m.len();
    for row in m.iter_mut() {
        for x in row.iter_mut() {
            *x = x.mod_floor(modulus);
        }
    }
    let vp = |x: &BigInt| -> u32 {
        if x.is_zero() {
            return cap;
        }
        let mut v = 0;
        let mut y = x.clone();
        while (&y % p).is_zero() {
            y /= p;
            v += 1;
        }
        v
    };
    let mut total: i64 = 0;
    for col in 0..r {
        let mut best: Option<(usize, u32)> = None;
        for (row, line) in m.iter().enumerate().skip(col) {
            let v = vp(&line[col]);
            if v < cap && best.is_none_or(|(_, bv)| v < bv) {
                best = Some((row, v));
                if v == 0 {
                    break;
                }
            }
        }
        let Some((piv, v)) = best else { return cap as i64 };
        total += v as i64;
        if total >= cap as i64 {
            return cap as i64;
        }
        m.swap(col, piv);
        let pv = p.pow(v);
        let unit = &m[col][col] / &pv;
        let inv = unit.modinv(modulus).expect("pivot unit part is invertible");
        for row in col + 1..r {
            if m[row][col].is_zero() {
                continue;
            }
            let factor = ((&m[row][col] / &pv) * &inv).mod_floor(modulus);
            for k in col..r {
                let t = (&m[row][k] - &factor * &m[col][k]).mod_floor(modulus);
                m[row][k] = t;
            }
        }
    }
    total
}

fn taylor_shift(coeffs: &[BigInt], s: i64) -> Vec<BigInt> {
    // coefficients of f(x + s)
    let d = coeffs.len();
    let mut out = vec![BigInt::zero(); d];
    let s = BigInt::from(s);
    for (k, c) in coeffs.iter().enumerate() {
        for j in 0..=k {
            let b = BigInt::from(crate::zmod::binomial(k as u64, j as u64));
            out[j] += c * b * s.pow((k - j) as u32);
        }
    }
    out
}

/// Monic, all lower coefficients divisible by `p`, constant term exactly by `p`.
pub fn is_eisenstein(coeffs: &[BigInt], p: u64) -> bool {
    let d = coeffs.len() - 1;
    if d == 0 || !coeffs[d].is_one() {
        return false;
    }
    let p = BigInt::from(p);
    coeffs[..d].iter().all(|c| (c % &p).is_zero()) && !(&coeffs[0] % (&p * &p)).is_zero()
}

/// An element of a [`FiniteAlgebra`] in basis coordinates.
#[derive(Clone, PartialEq)]
pub struct AlgebraElement {
    alg: FiniteAlgebra,
    coords: Vec<u64>,
}

impl fmt::Debug for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let z = self.alg.base();
        let mut first = true;
        for (i, &c) in self.coords.iter().enumerate() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", z.signed(c))?;
            for (g, &e) in self.alg.generators().iter().zip(&self.alg.0.basis[i]) {
                match e {
                    0 => {}
                    1 => write!(f, "*{g}")?,
                    _ => write!(f, "*{g}^{e}")?,
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl AlgebraElement {
    pub fn parent(&self) -> &FiniteAlgebra {
        &self.alg
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn valuation(&self) -> Result<Valuation> {
        self.alg.valuation(self)
    }

    pub fn scale(&self, c: u64) -> AlgebraElement {
        let z = self.alg.base();
        AlgebraElement { alg: self.alg.clone(), coords: self.coords.iter().map(|&x| z.mul(x, c)).collect() }
    }

    pub fn pow(&self, e: u64) -> AlgebraElement {
        self.alg.pow(self, e)
    }

    /// Coordinates reinterpreted in the same presentation at another precision
    /// (reduction, or canonical lift when `target` has higher precision).
    pub fn transfer(&self, target: &FiniteAlgebra) -> AlgebraElement {
        assert_eq!(self.alg.generators(), target.generators());
        target.element(self.coords.clone())
    }

    pub fn try_mul(&self, other: &AlgebraElement) -> Result<AlgebraElement> {
        if self.alg != other.alg {
            return Err(Error::MixedRings);
        }
        Ok(self * other)
    }
}

impl Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, o: &AlgebraElement) -> AlgebraElement {
        let z = self.alg.base();
        AlgebraElement {
            alg: self.alg.clone(),
            coords: self.coords.iter().zip(&o.coords).map(|(&a, &b)| z.add(a, b)).collect(),
        }
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, o: &AlgebraElement) -> AlgebraElement {
        let z = self.alg.base();
        AlgebraElement {
            alg: self.alg.clone(),
            coords: self.coords.iter().zip(&o.coords).map(|(&a, &b)| z.sub(a, b)).collect(),
        }
    }
}

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        let z = self.alg.base();
        AlgebraElement { alg: self.alg.clone(), coords: self.coords.iter().map(|&a| z.neg(a)).collect() }
    }
}

impl Mul for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, o: &AlgebraElement) -> AlgebraElement {
        let z = self.alg.base();
        let mut acc = vec![0u64; self.coords.len()];
        for (i, &a) in self.coords.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in o.coords.iter().enumerate() {
                if b == 0 {
                    continue;
                }
                let ab = z.mul(a, b);
                for &(k, c) in self.alg.table_entry(i, j) {
                    acc[k] = z.add(acc[k], z.mul(ab, c));
                }
            }
        }
        AlgebraElement { alg: self.alg.clone(), coords: acc }
    }
}

impl Ring for FiniteAlgebra {
    type Elem = AlgebraElement;

    fn zero(&self) -> AlgebraElement {
        self.zero_elem()
    }
    fn one(&self) -> AlgebraElement {
        self.scalar(1)
    }
    fn add(&self, a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
        a + b
    }
    fn neg(&self, a: &AlgebraElement) -> AlgebraElement {
        -a
    }
    fn mul(&self, a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
        a * b
    }
    fn from_int(&self, v: &BigInt) -> AlgebraElement {
        let mut e = self.zero_elem();
        e.coords[0] = self.base().from_bigint(v);
        e
    }
    fn is_zero(&self, a: &AlgebraElement) -> bool {
        a.is_zero()
    }
}

/// Derivative of an integer polynomial given low-degree-first.
pub fn derivative(coeffs: &[i64]) -> Vec<i64> {
    coeffs.iter().enumerate().skip(1).map(|(k, c)| c * k as i64).collect()
}

/// Evaluate an integer univariate polynomial at an algebra element.
pub fn eval_univariate(coeffs: &[i64], x: &AlgebraElement) -> AlgebraElement {
    let alg = x.parent();
    let mut acc = alg.zero_elem();
    for c in coeffs.iter().rev() {
        acc = &(&acc * x) + &alg.scalar(*c);
    }
    acc
}

/// Sign-aware helper for displaying integer relations.
pub fn signed_str(v: &BigInt) -> String {
    if v.is_negative() {
        format!("- {}", -v)
    } else {
        format!("+ {v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sqrt2() -> FiniteAlgebra {
        make_finite_algebra(&Presentation::simple(2, 3, &[("b", &[-2, 0, 1])])).unwrap()
    }

    fn zeta3() -> FiniteAlgebra {
        make_finite_algebra(&Presentation::simple(3, 2, &[("a", &[1, 1, 1])])).unwrap()
    }

    fn zeta3_cuberoot3() -> FiniteAlgebra {
        make_finite_algebra(&Presentation::simple(3, 2, &[("a", &[1, 1, 1]), ("b", &[-3, 0, 0, 1])])).unwrap()
    }

    #[test]
    fn ranks() {
        assert_eq!(sqrt2().rank(), 2);
        assert_eq!(zeta3().rank(), 2);
        assert_eq!(zeta3_cuberoot3().rank(), 6);
    }

    #[test]
    fn relations_reduce() {
        let a = sqrt2();
        let b = a.gen("b").unwrap();
        assert_eq!(&b * &b, a.scalar(2));
        let z = zeta3();
        let x = z.gen("a").unwrap();
        let expected = z.element(vec![8, 8]);
        assert_eq!(&x * &x, expected);
        assert_eq!(z.monomial(&[("a", 2)]).unwrap(), expected);
    }

    #[test]
    fn unknown_generator() {
        assert_eq!(zeta3().gen("q").unwrap_err(), Error::UnknownGenerator("q".into()));
    }

    #[test]
    fn presentation_errors() {
        let p = Presentation::simple(3, 2, &[("a", &[1, 1, 2])]);
        assert_eq!(make_finite_algebra(&p).unwrap_err(), Error::NonMonicRelation("a".into()));
        let p = Presentation::simple(6, 2, &[("a", &[1, 1])]);
        assert_eq!(make_finite_algebra(&p).unwrap_err(), Error::NotPrime(6));
        let mut p = Presentation::simple(3, 2, &[("a", &[1, 1, 1]), ("b", &[0, 0, 1])]);
        p.relations[0].coeffs[0] = CoeffJson::Poly(vec![TermJson { exps: vec![0, 1], coeff: 1 }]);
        assert_eq!(make_finite_algebra(&p).unwrap_err(), Error::NonTriangularPresentation("a".into()));
    }

    #[test]
    fn dependent_relation() {
        // b^2 = a over a^2 = 2 (a fourth root of 2), rank 4
        let mut p = Presentation::simple(2, 4, &[("a", &[-2, 0, 1]), ("b", &[0, 0, 1])]);
        p.relations[1].coeffs[0] = CoeffJson::Poly(vec![TermJson { exps: vec![1], coeff: -1 }]);
        let alg = make_finite_algebra(&p).unwrap();
        assert_eq!(alg.rank(), 4);
        let b = alg.gen("b").unwrap();
        assert_eq!(b.pow(4), alg.scalar(2));
    }

    #[test]
    fn expansion_matches_long_division() {
        let alg = zeta3_cuberoot3();
        let s = &alg.gen("a").unwrap() + &alg.gen("b").unwrap();
        assert_eq!(&s * &s, alg.mul_by_long_division(&s, &s));
        // (a+b)^2 = a^2 + 2ab + b^2 = -a - 1 + 2ab + b^2
        let expected = alg.reduce_terms(&[
            (vec![1, 0], BigInt::from(-1)),
            (vec![0, 0], BigInt::from(-1)),
            (vec![1, 1], BigInt::from(2)),
            (vec![0, 2], BigInt::from(1)),
        ]);
        assert_eq!(&s * &s, expected);
    }

    #[test]
    fn valuations() {
        let two = sqrt2().scalar(2);
        assert_eq!(two.valuation().unwrap(), Valuation::integer(1));
        let z = zeta3();
        let u = &z.gen("a").unwrap() - &z.scalar(1);
        assert_eq!(u.valuation().unwrap(), Valuation::ratio(1, 2));
        let k = make_finite_algebra(&Presentation::simple(3, 2, &[("b", &[-3, 0, 0, 1])])).unwrap();
        assert_eq!(k.gen("b").unwrap().valuation().unwrap(), Valuation::ratio(1, 3));
        assert_eq!(k.scalar(9).valuation().unwrap(), Valuation::capped(2));
        let z6 = zeta3_cuberoot3();
        assert_eq!(z6.gen("b").unwrap().valuation().unwrap(), Valuation::ratio(1, 3));
        assert_eq!(z6.scalar(3).valuation().unwrap(), Valuation::integer(1));
    }

    #[test]
    fn valuation_undefined_for_split_presentation() {
        let alg = make_finite_algebra(&Presentation::simple(3, 2, &[("a", &[-1, 0, 1])])).unwrap();
        assert!(matches!(alg.gen("a").unwrap().valuation(), Err(Error::ValuationUndefined(_))));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"p":3,"n":2,"generators":["a","b"],"relations":[{"var":"a","coeffs":[1,1,1]},{"var":"b","coeffs":[-3,0,0,1]}],"e":6}"#;
        let pres: Presentation = serde_json::from_str(text).unwrap();
        let alg = make_finite_algebra(&pres).unwrap();
        assert_eq!(alg.rank(), 6);
        assert_eq!(alg.ramification_index(), 6);
        assert_eq!(serde_json::to_string(&pres).unwrap(), text);
    }

    #[test]
    fn cyclotomic_coefficients() {
        assert_eq!(cyclotomic_prime_power(3, 1), vec![1, 1, 1]);
        assert_eq!(cyclotomic_prime_power(2, 2), vec![1, 0, 1]);
        assert_eq!(cyclotomic_prime_power(3, 2), vec![1, 0, 0, 1, 0, 0, 1]);
    }
}
