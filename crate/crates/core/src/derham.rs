//! De Rham complexes of free prelog algebras `Z/p^n[X, Y]` (monoid generators
//! `X` carry `dlog x`, polynomial generators `Y` carry `dy`) and the Cartier
//! isomorphism.
//!
//! Forms are graded by *weight*: total exponent plus the number of `dy`
//! factors (`dlog x` has weight zero). The differential preserves weight, so
//! truncating at weight `<= D` is a direct summand and introduces no boundary
//! artifacts. The inverse Cartier operator multiplies weight by `p`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{cohomology_basis, Matrix};
use crate::pd::compositions;
use crate::zmod::Zmod;

#[derive(Debug, PartialEq, Eq)]
pub struct FreePrelogAlgebra {
    z: Zmod,
    monoid: Vec<String>,
    poly: Vec<String>,
    degree_cap: u32,
    twist: bool,
}

/// A basis wedge (bit `i` = generator `i`, monoid generators first) times a monomial.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FormKey {
    pub mask: u32,
    pub exps: Vec<u32>,
}

impl FreePrelogAlgebra {
    pub fn new(z: Zmod, monoid: &[&str], poly: &[&str], degree_cap: u32) -> Arc<Self> {
        assert!(monoid.len() + poly.len() <= 31);
        Arc::new(FreePrelogAlgebra {
            z,
            monoid: monoid.iter().map(|s| s.to_string()).collect(),
            poly: poly.iter().map(|s| s.to_string()).collect(),
            degree_cap,
            twist: false,
        })
    }

    pub fn base(&self) -> Zmod {
        self.z
    }

    pub fn degree_cap(&self) -> u32 {
        self.degree_cap
    }

    pub fn is_twist(&self) -> bool {
        self.twist
    }

    pub fn n_vars(&self) -> usize {
        self.monoid.len() + self.poly.len()
    }

    pub fn is_monoid(&self, i: usize) -> bool {
        i < self.monoid.len()
    }

    pub fn name(&self, i: usize) -> &str {
        if self.is_monoid(i) {
            &self.monoid[i]
        } else {
            &self.poly[i - self.monoid.len()]
        }
    }

    fn index(&self, name: &str) -> Result<usize> {
        (0..self.n_vars()).find(|&i| self.name(i) == name).ok_or_else(|| Error::UnknownGenerator(name.into()))
    }

    /// Same generators and cap, read as the Frobenius twist.
    pub fn frobenius_twist(self: &Arc<Self>) -> Result<Arc<Self>> {
        if !self.z.is_field() {
            return Err(Error::NotCharP);
        }
        Ok(Arc::new(FreePrelogAlgebra { twist: true, ..(**self).clone_inner() }))
    }

    fn untwisted(&self) -> Arc<Self> {
        Arc::new(FreePrelogAlgebra { twist: false, ..self.clone_inner() })
    }

    pub fn with_cap(self: &Arc<Self>, degree_cap: u32) -> Arc<Self> {
        Arc::new(FreePrelogAlgebra { degree_cap, ..(**self).clone_inner() })
    }

    fn clone_inner(&self) -> FreePrelogAlgebra {
        FreePrelogAlgebra {
            z: self.z,
            monoid: self.monoid.clone(),
            poly: self.poly.clone(),
            degree_cap: self.degree_cap,
            twist: self.twist,
        }
    }

    pub fn weight(&self, key: &FormKey) -> u32 {
        let dy = (self.monoid.len()..self.n_vars()).filter(|&i| key.mask >> i & 1 == 1).count() as u32;
        key.exps.iter().sum::<u32>() + dy
    }

    pub fn zero(self: &Arc<Self>) -> DeRhamForm {
        DeRhamForm { alg: self.clone(), terms: BTreeMap::new() }
    }

    pub fn term(self: &Arc<Self>, mask: u32, exps: Vec<u32>, c: u64) -> DeRhamForm {
        let mut out = self.zero();
        out.accumulate(FormKey { mask, exps }, self.z.from_u64(c));
        out
    }

    pub fn constant(self: &Arc<Self>, c: i64) -> DeRhamForm {
        self.term(0, vec![0; self.n_vars()], self.z.from_i64(c))
    }

    /// The function given by a generator.
    pub fn var(self: &Arc<Self>, name: &str) -> Result<DeRhamForm> {
        let i = self.index(name)?;
        let mut e = vec![0; self.n_vars()];
        e[i] = 1;
        Ok(self.term(0, e, 1))
    }

    /// `dlog x` for a monoid generator, `dy` for a polynomial one.
    pub fn differential_of(self: &Arc<Self>, name: &str) -> Result<DeRhamForm> {
        let i = self.index(name)?;
        Ok(self.term(1 << i, vec![0; self.n_vars()], 1))
    }

    /// Basis of forms of degree `i` and weight exactly `w`.
    pub fn basis(&self, i: u32, w: u32) -> Vec<FormKey> {
        let nv = self.n_vars();
        let mut out = Vec::new();
        for mask in 0u32..(1 << nv) {
            if mask.count_ones() != i {
                continue;
            }
            let dy = (self.monoid.len()..nv).filter(|&k| mask >> k & 1 == 1).count() as u32;
            if dy > w {
                continue;
            }
            for exps in compositions(w - dy, nv) {
                out.push(FormKey { mask, exps });
            }
        }
        out.sort();
        out
    }

    /// The weight-`w` summand of the de Rham complex.
    pub fn complex_in_weight(self: &Arc<Self>, w: u32) -> CochainComplex {
        let nv = self.n_vars() as u32;
        let bases: Vec<Vec<FormKey>> = (0..=nv).map(|i| self.basis(i, w)).collect();
        let diffs = (0..nv as usize)
            .map(|i| {
                let index: BTreeMap<&FormKey, usize> = bases[i + 1].iter().enumerate().map(|(k, b)| (b, k)).collect();
                let mut m = Matrix::zeros(self.z, bases[i + 1].len(), bases[i].len());
                for (col, key) in bases[i].iter().enumerate() {
                    let img = self.term(key.mask, key.exps.clone(), 1).d();
                    for (k, &c) in &img.terms {
                        m.set(index[k], col, c);
                    }
                }
                m
            })
            .collect();
        CochainComplex { z: self.z, lo: 0, dims: bases.iter().map(|b| b.len()).collect(), diffs, bases: Some(bases) }
    }
}

/// A differential form.
#[derive(Clone, PartialEq)]
pub struct DeRhamForm {
    alg: Arc<FreePrelogAlgebra>,
    terms: BTreeMap<FormKey, u64>,
}

impl fmt::Debug for DeRhamForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for DeRhamForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let a = &self.alg;
        for (t, (k, &c)) in self.terms.iter().enumerate() {
            if t > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", a.z.signed(c))?;
            for (i, &e) in k.exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*{}", a.name(i))?,
                    _ => write!(f, "*{}^{e}", a.name(i))?,
                }
            }
            for i in 0..a.n_vars() {
                if k.mask >> i & 1 == 1 {
                    if a.is_monoid(i) {
                        write!(f, " dlog({})", a.name(i))?;
                    } else {
                        write!(f, " d{}", a.name(i))?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Sign of `g ^ (wedge of mask)` after sorting `g` into place.
fn insert_sign(g: usize, mask: u32) -> Option<bool> {
    if mask >> g & 1 == 1 {
        return None;
    }
    Some((mask & ((1u32 << g) - 1)).count_ones() % 2 == 1)
}

/// Sign of `(wedge a) ^ (wedge b)` after sorting, `None` if they overlap.
fn merge_sign(a: u32, b: u32) -> Option<bool> {
    if a & b != 0 {
        return None;
    }
    let mut inversions = 0;
    for i in 0..32 {
        if a >> i & 1 == 1 {
            inversions += (b & ((1u32 << i) - 1)).count_ones();
        }
    }
    Some(inversions % 2 == 1)
}

impl DeRhamForm {
    pub fn parent(&self) -> &Arc<FreePrelogAlgebra> {
        &self.alg
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FormKey, &u64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn accumulate(&mut self, key: FormKey, c: u64) {
        if c == 0 || self.alg.weight(&key) > self.alg.degree_cap {
            return;
        }
        let z = self.alg.z;
        let v = self.terms.entry(key.clone()).or_insert(0);
        *v = z.add(*v, c);
        if *v == 0 {
            self.terms.remove(&key);
        }
    }

    pub fn add(&self, o: &DeRhamForm) -> DeRhamForm {
        assert_eq!(self.alg, o.alg);
        let mut out = self.clone();
        for (k, &c) in &o.terms {
            out.accumulate(k.clone(), c);
        }
        out
    }

    pub fn scale(&self, c: u64) -> DeRhamForm {
        let z = self.alg.z;
        let mut out = self.alg.zero();
        for (k, &v) in &self.terms {
            out.accumulate(k.clone(), z.mul(v, c));
        }
        out
    }

    pub fn neg(&self) -> DeRhamForm {
        self.scale(self.alg.z.modulus() - 1)
    }

    pub fn sub(&self, o: &DeRhamForm) -> DeRhamForm {
        self.add(&o.neg())
    }

    pub fn wedge(&self, o: &DeRhamForm) -> DeRhamForm {
        assert_eq!(self.alg, o.alg);
        let z = self.alg.z;
        let mut out = self.alg.zero();
        for (k1, &c1) in &self.terms {
            for (k2, &c2) in &o.terms {
                let Some(neg) = merge_sign(k1.mask, k2.mask) else { continue };
                let c = z.mul(c1, c2);
                let exps = k1.exps.iter().zip(&k2.exps).map(|(a, b)| a + b).collect();
                out.accumulate(FormKey { mask: k1.mask | k2.mask, exps }, if neg { z.neg(c) } else { c });
            }
        }
        out
    }

    /// The de Rham differential.
    pub fn d(&self) -> DeRhamForm {
        let z = self.alg.z;
        let mut out = self.alg.zero();
        for (k, &c) in &self.terms {
            for (g, &e) in k.exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let Some(neg) = insert_sign(g, k.mask) else { continue };
                let mut exps = k.exps.clone();
                if !self.alg.is_monoid(g) {
                    exps[g] -= 1;
                }
                let v = z.mul(c, z.from_u64(e as u64));
                out.accumulate(FormKey { mask: k.mask | 1 << g, exps }, if neg { z.neg(v) } else { v });
            }
        }
        out
    }

    /// Coordinates on a basis list.
    pub fn coords(&self, basis: &[FormKey]) -> Vec<u64> {
        basis.iter().map(|k| self.terms.get(k).copied().unwrap_or(0)).collect()
    }
}

/// The inverse Cartier operator on representatives: `c x^a y^b -> c x^{pa} y^{pb}`,
/// `dy -> y^{p-1} dy`, `dlog x -> dlog x`, extended multiplicatively.
pub fn cartier_inverse(form: &DeRhamForm) -> Result<DeRhamForm> {
    let twist = &form.alg;
    if !twist.twist {
        return Err(Error::NotOnTwist);
    }
    let target = twist.untwisted().with_cap(twist.degree_cap * twist.z.p() as u32);
    let p = twist.z.p() as u32;
    let mut out = target.zero();
    for (k, &c) in &form.terms {
        let mut exps: Vec<u32> = k.exps.iter().map(|e| e * p).collect();
        for (i, e) in exps.iter_mut().enumerate() {
            if !twist.is_monoid(i) && k.mask >> i & 1 == 1 {
                *e += p - 1;
            }
        }
        out.accumulate(FormKey { mask: k.mask, exps }, c);
    }
    Ok(out)
}

/// A finite cochain complex `C^lo -> C^{lo+1} -> ...` over `Z/p^n`.
#[derive(Clone, Debug)]
pub struct CochainComplex {
    z: Zmod,
    lo: i32,
    dims: Vec<usize>,
    /// `diffs[i]: C^{lo+i} -> C^{lo+i+1}`, as a `dims[i+1] x dims[i]` matrix.
    diffs: Vec<Matrix>,
    bases: Option<Vec<Vec<FormKey>>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CohomologyReport {
    pub lo: i32,
    pub dims: Vec<usize>,
    /// Cocycle representatives, as coordinate vectors per degree.
    pub representatives: Vec<Vec<Vec<u64>>>,
}

#[derive(Serialize)]
struct DumpMatrix {
    from: i32,
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, u64)>,
}

#[derive(Serialize)]
struct Dump {
    p: u64,
    n: u32,
    lo: i32,
    dims: Vec<usize>,
    differentials: Vec<DumpMatrix>,
}

impl CochainComplex {
    pub fn new(z: Zmod, lo: i32, dims: Vec<usize>, diffs: Vec<Matrix>) -> Self {
        assert_eq!(diffs.len() + 1, dims.len().max(1));
        CochainComplex { z, lo, dims, diffs, bases: None }
    }

    pub fn zero(z: Zmod) -> Self {
        CochainComplex { z, lo: 0, dims: vec![0], diffs: vec![], bases: None }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn differential(&self, i: usize) -> &Matrix {
        &self.diffs[i]
    }

    pub fn basis(&self, i: usize) -> Option<&[FormKey]> {
        self.bases.as_ref().map(|b| b[i].as_slice())
    }

    /// Whether every composite `d d` vanishes.
    pub fn is_complex(&self) -> bool {
        self.diffs.windows(2).all(|w| {
            let m = w[1].mul(&w[0]);
            (0..m.rows()).all(|r| m.row(r).iter().all(|&x| x == 0))
        })
    }

    pub fn cohomology(&self) -> Result<CohomologyReport> {
        if !self.z.is_field() {
            return Err(Error::NotField);
        }
        let mut dims = Vec::new();
        let mut reps = Vec::new();
        for i in 0..self.dims.len() {
            let d_in = if i == 0 { None } else { Some(&self.diffs[i - 1]) };
            let d_out = self.diffs.get(i);
            let basis = cohomology_basis(d_in, d_out, self.z, self.dims[i]);
            dims.push(basis.len());
            reps.push(basis);
        }
        Ok(CohomologyReport { lo: self.lo, dims, representatives: reps })
    }

    /// Sparse JSON dump.
    pub fn to_json(&self) -> serde_json::Value {
        let differentials = self
            .diffs
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let mut entries = Vec::new();
                for r in 0..m.rows() {
                    for c in 0..m.cols() {
                        if m.get(r, c) != 0 {
                            entries.push((r, c, m.get(r, c)));
                        }
                    }
                }
                DumpMatrix { from: self.lo + i as i32, rows: m.rows(), cols: m.cols(), entries }
            })
            .collect();
        serde_json::to_value(Dump { p: self.z.p(), n: self.z.n(), lo: self.lo, dims: self.dims.clone(), differentials })
            .unwrap()
    }

    /// Whether `v` (in degree `i`) is a coboundary, over `F_p`.
    pub fn is_coboundary(&self, i: usize, v: &[u64]) -> bool {
        if v.iter().all(|&x| x == 0) {
            return true;
        }
        if i == 0 {
            return false;
        }
        let im = self.diffs[i - 1].transpose();
        let r = im.rank();
        let mut ext = im.clone();
        ext.push_row(v);
        ext.rank() == r
    }
}

/// One `(weight, degree)` cell of a Cartier verification.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CartierRow {
    pub weight: u32,
    pub degree: u32,
    pub dim_h: usize,
    /// `dim` of the twist forms of weight `weight / p` (zero if `p` does not divide it).
    pub dim_twist: usize,
    /// Rank of the images of the twist basis modulo coboundaries.
    pub image_rank: usize,
    pub bijective: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CartierReport {
    pub p: u64,
    pub degree_cap: u32,
    pub rows: Vec<CartierRow>,
    /// Dimensions recomputed at cap `D + p` agree on weights `<= D`.
    pub stable: bool,
    pub pass: bool,
}

impl CartierReport {
    /// `weight,degree,dim_h,dim_twist,image_rank,bijective` lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("weight,degree,dim_h,dim_twist,image_rank,bijective\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{},{}\n", r.weight, r.degree, r.dim_h, r.dim_twist, r.image_rank, r.bijective));
        }
        s
    }

    /// Total `dim H^i` over weights `<= D`.
    pub fn h_dims(&self) -> Vec<usize> {
        let top = self.rows.iter().map(|r| r.degree).max().unwrap_or(0);
        (0..=top).map(|i| self.rows.iter().filter(|r| r.degree == i).map(|r| r.dim_h).sum()).collect()
    }
}

fn cohomology_dims_by_weight(alg: &Arc<FreePrelogAlgebra>, cap: u32) -> Result<Vec<Vec<usize>>> {
    (0..=cap).map(|w| Ok(alg.complex_in_weight(w).cohomology()?.dims)).collect()
}

/// Check that the inverse Cartier operator maps the twist's forms of weight
/// `w` bijectively onto `H^i` in weight `p w`, and that cohomology vanishes in
/// weights prime to `p`, for all weights `<= D`.
pub fn verify_cartier(alg: &Arc<FreePrelogAlgebra>) -> Result<CartierReport> {
    let z = alg.z;
    if !z.is_field() {
        return Err(Error::NotField);
    }
    let p = z.p() as u32;
    let cap = alg.degree_cap;
    let twist = alg.frobenius_twist()?;
    let mut rows = Vec::new();
    for w in 0..=cap {
        let cx = alg.complex_in_weight(w);
        let h = cx.cohomology()?;
        for i in 0..=alg.n_vars() as u32 {
            let dim_h = h.dims[i as usize];
            let (dim_twist, image_rank) = if w % p == 0 {
                let tb = twist.basis(i, w / p);
                let basis = cx.basis(i as usize).unwrap();
                let images: Vec<Vec<u64>> = tb
                    .iter()
                    .map(|k| {
                        let f = twist.term(k.mask, k.exps.clone(), 1);
                        let img = cartier_inverse(&f).expect("twist form");
                        DeRhamForm { alg: alg.clone(), terms: img.terms }.coords(basis)
                    })
                    .collect();
                // images are cocycles; rank modulo coboundaries
                let cocycles = images.iter().all(|v| match cx.diffs.get(i as usize) {
                    Some(d) => d.apply(v).iter().all(|&x| x == 0),
                    None => true,
                });
                let mut span = if i == 0 { Matrix::zeros(z, 0, basis.len()) } else { cx.diffs[i as usize - 1].transpose() };
                let base_rank = span.rank();
                for v in &images {
                    span.push_row(v);
                }
                let r = if cocycles { span.rank() - base_rank } else { 0 };
                (tb.len(), r)
            } else {
                (0, 0)
            };
            let bijective = dim_h == dim_twist && image_rank == dim_twist;
            rows.push(CartierRow { weight: w, degree: i, dim_h, dim_twist, image_rank, bijective });
        }
    }
    let now = cohomology_dims_by_weight(alg, cap)?;
    let wider = cohomology_dims_by_weight(&alg.with_cap(cap + p), cap)?;
    let stable = now == wider;
    if !stable {
        return Err(Error::TruncationUnstable(format!("cap {cap} vs {}", cap + p)));
    }
    let pass = rows.iter().all(|r| r.bijective);
    Ok(CartierReport { p: z.p(), degree_cap: cap, rows, stable, pass })
}
