//! Derived de Rham cohomology of `B = A/(f)` over `A = Z/p^n[x]`, computed from
//! the simplicial bar resolution `P_s = A[w_1, ..., w_s]`.
//!
//! The resolution is the nerve of the monoid `N`, base-changed along
//! `Z[t] -> A, t -> 1 + f`, in the coordinates `w_j = t_j - 1`: the face `d_0`
//! sends `w_1 -> f`, `d_i` merges `w_i` and `w_{i+1}`, `d_s` sends `w_s -> 0`,
//! and the degeneracy `s_j` inserts a fresh variable at position `j + 1`.
//! Modulo degenerate elements, level `s` has the basis of monomial forms
//! `x^b w^a dw_M` that involve every index.
//!
//! For `f = c x^e`, giving `x` weight 1 and `w_j`, `dw_j` weight `e` makes all
//! structure maps homogeneous, and normalized level `s` vanishes below weight
//! `e s`. Each weight block is therefore a finite complex, computed exactly once
//! `e * s_max` reaches the weight.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::SparseEchelon;
use crate::pd::{Anchor, PdAlgebra, PdElement, PdHom};
use crate::zmod::{factorial, Zmod};

pub const DEFAULT_BASIS_LIMIT: usize = 200_000;

/// Sign rule for the total differential of the bicomplex with columns
/// `Omega_{P_s/A}` placed at horizontal degree `-s`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// `D = ∂ + (-1)^s d_v` on column `s`.
    #[default]
    ColumnParity,
    /// `D = d_v + (-1)^i ∂` on form degree `i`.
    FormDegree,
}

/// `x^x w^w dw_mask` at level `w.len()`; bit `j` of `mask` is `dw_{j+1}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BarKey {
    pub x: u32,
    pub w: Vec<u32>,
    pub mask: u32,
}

impl BarKey {
    pub fn new(x: u32, w: Vec<u32>, mask: u32) -> Self {
        BarKey { x, w, mask }
    }

    pub fn level(&self) -> usize {
        self.w.len()
    }

    pub fn degree(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn total_degree(&self) -> i32 {
        self.degree() as i32 - self.level() as i32
    }

    /// Involves every index, i.e. is not in the image of a degeneracy.
    pub fn is_normalized(&self) -> bool {
        (0..self.level()).all(|j| self.w[j] > 0 || self.mask >> j & 1 == 1)
    }
}

/// Sign of `dw_a ∧ dw_b` brought into sorted order, or `None` if they overlap.
fn wedge_sign(a: u32, b: u32) -> Option<bool> {
    if a & b != 0 {
        return None;
    }
    let mut inv = 0;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        inv += (a >> (j + 1)).count_ones();
        bb &= bb - 1;
    }
    Some(inv % 2 == 1)
}

/// A finite sum of bar monomial forms, possibly spread over several levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BarForm {
    z: Zmod,
    terms: BTreeMap<BarKey, u64>,
}

impl BarForm {
    pub fn zero(z: Zmod) -> Self {
        BarForm { z, terms: BTreeMap::new() }
    }

    pub fn term(z: Zmod, key: BarKey, c: i64) -> Self {
        let mut f = BarForm::zero(z);
        f.accumulate(key, z.from_i64(c));
        f
    }

    pub fn ring(&self) -> Zmod {
        self.z
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BarKey, &u64)> {
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

    pub fn coeff(&self, key: &BarKey) -> u64 {
        self.terms.get(key).copied().unwrap_or(0)
    }

    fn accumulate(&mut self, key: BarKey, c: u64) {
        if c == 0 {
            return;
        }
        let z = self.z;
        let v = self.terms.entry(key.clone()).or_insert(0);
        *v = z.add(*v, c);
        if *v == 0 {
            self.terms.remove(&key);
        }
    }

    pub fn add(&self, o: &BarForm) -> BarForm {
        let mut out = self.clone();
        for (k, &c) in &o.terms {
            out.accumulate(k.clone(), c);
        }
        out
    }

    pub fn scale(&self, c: u64) -> BarForm {
        let mut out = BarForm::zero(self.z);
        for (k, &v) in &self.terms {
            out.accumulate(k.clone(), self.z.mul(v, c));
        }
        out
    }

    pub fn neg(&self) -> BarForm {
        self.scale(self.z.neg(1))
    }

    pub fn sub(&self, o: &BarForm) -> BarForm {
        self.add(&o.neg())
    }

    /// Terms at one level.
    pub fn level_part(&self, s: usize) -> BarForm {
        BarForm { z: self.z, terms: self.terms.iter().filter(|(k, _)| k.level() == s).map(|(k, v)| (k.clone(), *v)).collect() }
    }

    pub fn levels(&self) -> Vec<usize> {
        let mut l: Vec<usize> = self.terms.keys().map(|k| k.level()).collect();
        l.dedup();
        l.sort();
        l.dedup();
        l
    }

    /// Drop the degenerate terms: the projection to the normalized complex.
    pub fn normalized(&self) -> BarForm {
        BarForm { z: self.z, terms: self.terms.iter().filter(|(k, _)| k.is_normalized()).map(|(k, v)| (k.clone(), *v)).collect() }
    }

    /// Product inside one level ring `Omega_{P_s/A}`.
    pub fn wedge(&self, o: &BarForm) -> BarForm {
        let mut out = BarForm::zero(self.z);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &o.terms {
                assert_eq!(a.level(), b.level(), "wedge of forms at different levels");
                let Some(neg) = wedge_sign(a.mask, b.mask) else { continue };
                let w = a.w.iter().zip(&b.w).map(|(u, v)| u + v).collect();
                let c = self.z.mul(ca, cb);
                out.accumulate(BarKey::new(a.x + b.x, w, a.mask | b.mask), if neg { self.z.neg(c) } else { c });
            }
        }
        out
    }

    /// Multiply by `x^b`.
    pub fn shift_x(&self, b: u32) -> BarForm {
        BarForm {
            z: self.z,
            terms: self.terms.iter().map(|(k, &v)| (BarKey::new(k.x + b, k.w.clone(), k.mask), v)).collect(),
        }
    }
}

/// The bar resolution of `A/(f)` over `A = Z/p^n[x]`, up to level `s_max`.
#[derive(Clone, Debug)]
pub struct BarResolution {
    z: Zmod,
    /// `f` reduced mod `p^n`, low degree first, no trailing zeros.
    f: Vec<u64>,
    s_max: usize,
    /// Weight of `w_j` and `dw_j`.
    e: u32,
}

impl BarResolution {
    pub fn new(z: Zmod, f: &[i64], s_max: usize) -> Result<Self> {
        let mut fr: Vec<u64> = f.iter().map(|&c| z.from_i64(c)).collect();
        while fr.last() == Some(&0) {
            fr.pop();
        }
        if fr.is_empty() {
            return Err(Error::NotRegularSequence("f = 0".into()));
        }
        let e = ((fr.len() - 1) as u32).max(1);
        Ok(BarResolution { z, f: fr, s_max, e })
    }

    pub fn base(&self) -> Zmod {
        self.z
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    pub fn f(&self) -> &[u64] {
        &self.f
    }

    pub fn with_levels(&self, s_max: usize) -> Self {
        BarResolution { s_max, ..self.clone() }
    }

    /// Weight of `w_j` (and `dw_j`).
    pub fn w_weight(&self) -> u32 {
        self.e
    }

    /// `f = c x^e` with `e >= 1` and `c` a unit: the weight grading is preserved.
    pub fn is_homogeneous(&self) -> bool {
        self.f.len() >= 2 && self.f[..self.f.len() - 1].iter().all(|&c| c == 0) && self.z.is_unit(*self.f.last().unwrap())
    }

    /// `f` is a unit of `A`, so `B = 0`.
    pub fn is_unit(&self) -> bool {
        self.f.len() == 1 && self.z.is_unit(self.f[0])
    }

    pub fn weight(&self, k: &BarKey) -> u32 {
        k.x + self.e * (k.w.iter().sum::<u32>() + k.degree() as u32)
    }

    pub fn form_weight(&self, f: &BarForm) -> u32 {
        f.terms.keys().map(|k| self.weight(k)).max().unwrap_or(0)
    }

    fn f_power(&self, a: u32) -> Vec<u64> {
        let z = self.z;
        let mut acc = vec![1u64 % z.modulus()];
        for _ in 0..a {
            let mut next = vec![0u64; acc.len() + self.f.len() - 1];
            for (i, &u) in acc.iter().enumerate() {
                for (j, &v) in self.f.iter().enumerate() {
                    next[i + j] = z.add(next[i + j], z.mul(u, v));
                }
            }
            acc = next;
        }
        acc
    }

    fn face_key(&self, j: usize, k: &BarKey, out: &mut BarForm, c: u64) {
        let s = k.level();
        assert!(s >= 1 && j <= s, "face index out of range");
        let z = self.z;
        if j == 0 {
            if k.mask & 1 == 1 {
                return;
            }
            let w = k.w[1..].to_vec();
            let mask = k.mask >> 1;
            for (m, fc) in self.f_power(k.w[0]).into_iter().enumerate() {
                if fc != 0 {
                    out.accumulate(BarKey::new(k.x + m as u32, w.clone(), mask), z.mul(c, fc));
                }
            }
        } else if j < s {
            let (lo, hi) = (j - 1, j);
            let (bl, bh) = (k.mask >> lo & 1, k.mask >> hi & 1);
            if bl == 1 && bh == 1 {
                return;
            }
            let mut w = k.w.clone();
            w[lo] += w[hi];
            w.remove(hi);
            let low = k.mask & ((1 << lo) - 1);
            let mask = low | (bl | bh) << lo | (k.mask >> (hi + 1)) << hi;
            out.accumulate(BarKey::new(k.x, w, mask), c);
        } else {
            if k.w[s - 1] > 0 || k.mask >> (s - 1) & 1 == 1 {
                return;
            }
            out.accumulate(BarKey::new(k.x, k.w[..s - 1].to_vec(), k.mask), c);
        }
    }

    /// The face map `d_j` applied termwise (terms at level 0 are an error).
    pub fn face(&self, j: usize, f: &BarForm) -> BarForm {
        let mut out = BarForm::zero(self.z);
        for (k, &c) in &f.terms {
            self.face_key(j, k, &mut out, c);
        }
        out
    }

    /// The degeneracy `s_j`: a fresh variable at position `j + 1`.
    pub fn degeneracy(&self, j: usize, f: &BarForm) -> BarForm {
        let mut out = BarForm::zero(self.z);
        for (k, &c) in &f.terms {
            assert!(j <= k.level(), "degeneracy index out of range");
            let mut w = k.w.clone();
            w.insert(j, 0);
            let mask = (k.mask & ((1 << j) - 1)) | (k.mask >> j) << (j + 1);
            out.accumulate(BarKey::new(k.x, w, mask), c);
        }
        out
    }

    /// De Rham differential of `P_s` relative to `A`.
    pub fn d_v(&self, f: &BarForm) -> BarForm {
        let z = self.z;
        let mut out = BarForm::zero(z);
        for (k, &c) in &f.terms {
            for j in 0..k.level() {
                if k.w[j] == 0 || k.mask >> j & 1 == 1 {
                    continue;
                }
                let mut w = k.w.clone();
                w[j] -= 1;
                let cc = z.mul(c, z.from_u64(k.w[j] as u64));
                let neg = (k.mask & ((1 << j) - 1)).count_ones() % 2 == 1;
                out.accumulate(BarKey::new(k.x, w, k.mask | 1 << j), if neg { z.neg(cc) } else { cc });
            }
        }
        out
    }

    /// `∂ = sum (-1)^j d_j`, projected to the normalized complex; level-0 terms map to 0.
    pub fn horizontal(&self, f: &BarForm) -> BarForm {
        let z = self.z;
        let mut out = BarForm::zero(z);
        for (k, &c) in &f.terms {
            let s = k.level();
            if s == 0 {
                continue;
            }
            for j in 0..=s {
                let cj = if j % 2 == 1 { z.neg(c) } else { c };
                self.face_key(j, k, &mut out, cj);
            }
        }
        out.normalized()
    }

    /// Total differential of the normalized bicomplex.
    pub fn total_d(&self, f: &BarForm, conv: SignConvention) -> BarForm {
        let z = self.z;
        let mut out = BarForm::zero(z);
        for (k, &c) in &f.terms {
            let single = BarForm { z, terms: BTreeMap::from([(k.clone(), c)]) };
            let (h, v) = (self.horizontal(&single), self.d_v(&single).normalized());
            let (sh, sv) = match conv {
                SignConvention::ColumnParity => (false, k.level() % 2 == 1),
                SignConvention::FormDegree => (k.degree() % 2 == 1, false),
            };
            out = out.add(&if sh { h.neg() } else { h }).add(&if sv { v.neg() } else { v });
        }
        out
    }

    /// Normalized basis keys at level `s`, form degree `i`, weight `w`.
    pub fn normalized_basis(&self, s: usize, i: usize, w: u32) -> Vec<BarKey> {
        let mut out = Vec::new();
        let mut cur: Vec<u32> = Vec::with_capacity(s);
        self.enum_keys(s, i, w, 0, 0, &mut cur, &mut out);
        out.sort();
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn enum_keys(&self, s: usize, i: usize, w: u32, used: u32, mask: u32, cur: &mut Vec<u32>, out: &mut Vec<BarKey>) {
        let j = cur.len();
        if j == s {
            if mask.count_ones() as usize == i {
                out.push(BarKey::new(w - used, cur.clone(), mask));
            }
            return;
        }
        let bits = mask.count_ones() as usize;
        // remaining indices must still be able to supply the missing dw's
        if bits > i || bits + (s - j) < i {
            return;
        }
        let e = self.e;
        // with dw_j: weight e (a + 1), a >= 0
        let mut a = 0;
        while used + e * (a + 1) <= w {
            cur.push(a);
            self.enum_keys(s, i, w, used + e * (a + 1), mask | 1 << j, cur, out);
            cur.pop();
            a += 1;
        }
        // without: weight e a, a >= 1
        let mut a = 1;
        while used + e * a <= w {
            cur.push(a);
            self.enum_keys(s, i, w, used + e * a, mask, cur, out);
            cur.pop();
            a += 1;
        }
    }

    /// Basis of total degree `k` in weight `w`, over levels `0..=s_max`.
    pub fn total_basis(&self, k: i32, w: u32) -> Vec<BarKey> {
        let mut out = Vec::new();
        for s in 0..=self.s_max {
            let i = s as i32 + k;
            if i < 0 || i as usize > s {
                continue;
            }
            out.extend(self.normalized_basis(s, i as usize, w));
        }
        out
    }

    /// Check the simplicial identities on a form at level `s >= 2`
    /// (faces) and `s >= 1` (degeneracies); returns the first violated one.
    pub fn check_simplicial_identities(&self, f: &BarForm) -> Option<String> {
        for s in f.levels() {
            let g = f.level_part(s);
            if s >= 2 {
                for j in 1..=s {
                    for i in 0..j {
                        let l = self.face(i, &self.face(j, &g));
                        let r = self.face(j - 1, &self.face(i, &g));
                        if l != r {
                            return Some(format!("d_{i} d_{j} = d_{} d_{i} at level {s}", j - 1));
                        }
                    }
                }
            }
            for j in 0..=s {
                let sj = self.degeneracy(j, &g);
                for i in 0..=s + 1 {
                    let lhs = self.face(i, &sj);
                    let rhs = if i < j {
                        if s == 0 {
                            continue;
                        }
                        self.degeneracy(j - 1, &self.face(i, &g))
                    } else if i == j || i == j + 1 {
                        g.clone()
                    } else {
                        if s == 0 {
                            continue;
                        }
                        self.degeneracy(j, &self.face(i - 1, &g))
                    };
                    if lhs != rhs {
                        return Some(format!("d_{i} s_{j} at level {s}"));
                    }
                }
                for i in 0..=j {
                    let l = self.degeneracy(i, &self.degeneracy(j, &g));
                    let r = self.degeneracy(j + 1, &self.degeneracy(i, &g));
                    if l != r {
                        return Some(format!("s_{i} s_{j} at level {s}"));
                    }
                }
            }
        }
        None
    }

    /// Homology of the normalized complex of the underlying simplicial
    /// module (functions only, no forms), per weight up to `max_weight`.
    /// Returns `dims[s]` summed over weights.
    pub fn normalized_homology(&self, max_weight: u32) -> Result<Vec<usize>> {
        if !self.z.is_field() {
            return Err(Error::NotField);
        }
        if !self.is_homogeneous() {
            return Err(Error::UnsupportedPresentation("weight blocks need f = c x^e".into()));
        }
        let mut dims = vec![0usize; self.s_max + 1];
        for w in 0..=max_weight {
            let bases: Vec<Vec<BarKey>> = (0..=self.s_max).map(|s| self.normalized_basis(s, 0, w)).collect();
            // rank of ∂: N_s -> N_{s-1}
            let mut ranks = vec![0usize; self.s_max + 2];
            for s in 1..=self.s_max {
                let index: BTreeMap<&BarKey, usize> = bases[s - 1].iter().enumerate().map(|(i, k)| (k, i)).collect();
                let mut ech = SparseEchelon::new(self.z);
                for k in &bases[s] {
                    let img = self.horizontal(&BarForm { z: self.z, terms: BTreeMap::from([(k.clone(), 1)]) });
                    ech.insert(img.terms.iter().map(|(k, &c)| (index[k], c)).collect());
                }
                ranks[s] = ech.rank();
            }
            for s in 0..=self.s_max {
                dims[s] += bases[s].len() - ranks[s] - ranks[s + 1];
            }
        }
        Ok(dims)
    }
}

/// One weight block of the total complex in a window of total degrees.
#[derive(Clone, Debug)]
pub struct TotalBlock {
    pub weight: u32,
    pub lo: i32,
    pub bases: Vec<Vec<BarKey>>,
}

/// The normalized total complex, truncated to weights `<= deg_cap`.
#[derive(Clone, Debug)]
pub struct TotalComplex {
    pub res: BarResolution,
    pub convention: SignConvention,
    pub blocks: Vec<TotalBlock>,
}

/// Build the weight blocks of total degrees `lo..=0` (degree `1` and up vanish:
/// form degree never exceeds the level).
pub fn totalize(res: &BarResolution, lo: i32, deg_cap: u32, conv: SignConvention, limit: usize) -> Result<TotalComplex> {
    if !res.is_homogeneous() {
        return Err(Error::UnsupportedPresentation("weight blocks need f = c x^e".into()));
    }
    let mut blocks = Vec::new();
    let mut size = 0usize;
    for w in 0..=deg_cap {
        let bases: Vec<Vec<BarKey>> = (lo..=0).map(|k| res.total_basis(k, w)).collect();
        size += bases.iter().map(Vec::len).sum::<usize>();
        if size > limit {
            return Err(Error::WindowTooWide { size, limit });
        }
        blocks.push(TotalBlock { weight: w, lo, bases });
    }
    Ok(TotalComplex { res: res.clone(), convention: conv, blocks })
}

impl TotalComplex {
    fn rank_into(&self, from: &[BarKey], to: &[BarKey]) -> (usize, SparseEchelon) {
        let index: BTreeMap<&BarKey, usize> = to.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let mut ech = SparseEchelon::new(self.res.z);
        for k in from {
            let img = self.res.total_d(&BarForm { z: self.res.z, terms: BTreeMap::from([(k.clone(), 1)]) }, self.convention);
            ech.insert(img.terms.iter().map(|(k, &c)| (index[k], c)).collect());
        }
        (ech.rank(), ech)
    }

    /// `dim H^k` summed over weights, for `k` in `lo+1..=0` (the lowest degree
    /// of the window has no incoming differential and is skipped).
    pub fn cohomology_dims(&self) -> Result<BTreeMap<i32, usize>> {
        if !self.res.z.is_field() {
            return Err(Error::NotField);
        }
        let mut out = BTreeMap::new();
        for b in &self.blocks {
            let n = b.bases.len();
            let ranks: Vec<usize> = (0..n).map(|t| if t + 1 < n { self.rank_into(&b.bases[t], &b.bases[t + 1]).0 } else { 0 }).collect();
            for t in 1..n {
                *out.entry(b.lo + t as i32).or_insert(0) += b.bases[t].len() - ranks[t] - ranks[t - 1];
            }
        }
        Ok(out)
    }

    /// `D` on an element, checked to stay inside the normalized complex.
    pub fn d(&self, f: &BarForm) -> BarForm {
        self.res.total_d(f, self.convention)
    }
}

/// `H^0` of one weight block with its conjugate filtration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WeightH0 {
    pub weight: u32,
    pub dim: usize,
    /// `gr[i]` for `i = 0..=s_max`.
    pub gr: Vec<usize>,
}

/// Boundary span in `T^0` of one weight, with columns ordered by level descending.
struct H0Block {
    t0: Vec<BarKey>,
    index: BTreeMap<BarKey, usize>,
    ech: SparseEchelon,
}

impl H0Block {
    fn new(res: &BarResolution, w: u32, conv: SignConvention) -> Self {
        let mut t0 = res.total_basis(0, w);
        t0.sort_by(|a, b| b.level().cmp(&a.level()).then(a.cmp(b)));
        let index: BTreeMap<BarKey, usize> = t0.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        let mut ech = SparseEchelon::new(res.z);
        for k in res.total_basis(-1, w) {
            let img = res.total_d(&BarForm { z: res.z, terms: BTreeMap::from([(k, 1)]) }, conv);
            ech.insert(img.terms.iter().map(|(k, &c)| (index[k], c)).collect());
        }
        H0Block { t0, index, ech }
    }

    fn summary(&self, res: &BarResolution, w: u32) -> WeightH0 {
        let rank = self.ech.rank();
        let dim = self.t0.len() - rank;
        // Fil_i = (level <= i part) + boundaries; the level > i columns are a
        // prefix, so the projection rank there is the number of pivots in it.
        let pivots: Vec<usize> = self.ech.pivot_columns().collect();
        let fil = |i: usize| -> usize {
            let low = self.t0.iter().filter(|k| k.level() <= i).count();
            let high_cols = self.t0.len() - low;
            low + pivots.iter().filter(|&&c| c < high_cols).count() - rank
        };
        let mut gr = Vec::with_capacity(res.s_max + 1);
        let mut prev = 0;
        for i in 0..=res.s_max {
            let f = fil(i);
            gr.push(f - prev);
            prev = f;
        }
        WeightH0 { weight: w, dim, gr }
    }

    fn row(&self, f: &BarForm) -> Result<Vec<(usize, u64)>> {
        f.terms.iter().map(|(k, &c)| self.index.get(k).map(|&i| (i, c)).ok_or(Error::NotACocycle)).collect()
    }

    /// Whether `f` lies in `Fil_i + boundaries`.
    fn in_fil(&self, f: &BarForm, i: Option<usize>) -> Result<bool> {
        let mut e = self.ech.clone();
        if let Some(i) = i {
            for (k, &c) in &self.index {
                if k.level() <= i {
                    e.insert(vec![(c, 1)]);
                }
            }
        }
        Ok(e.contains(&self.row(f)?))
    }
}

/// `H^0` of the derived de Rham complex with its conjugate filtration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DerivedH0 {
    pub p: u64,
    pub f: Vec<u64>,
    pub s_max: usize,
    pub deg_cap: u32,
    pub weights: Vec<WeightH0>,
    /// `gr_i` summed over weights `<= deg_cap`.
    pub gr: Vec<usize>,
    pub dim: usize,
    /// Weights `<= exact_through` are unaffected by the level cut.
    pub exact_through: u32,
    /// A rerun at `(s_max + 1, deg_cap + p)` agrees on all weights `<= deg_cap`.
    pub certified: bool,
}

fn h0_weights(res: &BarResolution, deg_cap: u32, limit: usize) -> Result<Vec<WeightH0>> {
    let mut size = 0;
    let mut out = Vec::new();
    for w in 0..=deg_cap {
        size += res.total_basis(0, w).len() + res.total_basis(-1, w).len();
        if size > limit {
            return Err(Error::WindowTooWide { size, limit });
        }
        out.push(H0Block::new(res, w, SignConvention::default()).summary(res, w));
    }
    Ok(out)
}

/// `H^0(dR_{B/A})` for `B = A/(f)` over `F_p[x]`, truncated to weights
/// `<= deg_cap` and levels `<= s_max`.
pub fn derived_dr_h0(res: &BarResolution, deg_cap: u32, limit: usize) -> Result<DerivedH0> {
    let z = res.z;
    if !z.is_field() {
        return Err(Error::NotField);
    }
    let p = z.p();
    if res.is_unit() {
        return Ok(DerivedH0 {
            p,
            f: res.f.clone(),
            s_max: res.s_max,
            deg_cap,
            weights: (0..=deg_cap).map(|w| WeightH0 { weight: w, dim: 0, gr: vec![0; res.s_max + 1] }).collect(),
            gr: vec![0; res.s_max + 1],
            dim: 0,
            exact_through: u32::MAX,
            certified: true,
        });
    }
    if !res.is_homogeneous() {
        return Err(Error::UnsupportedPresentation("derived de Rham needs f = c x^e or a unit".into()));
    }
    let weights = h0_weights(res, deg_cap, limit)?;
    let rerun = h0_weights(&res.with_levels(res.s_max + 1), deg_cap + p as u32, limit)?;
    let certified = weights.iter().zip(&rerun).all(|(a, b)| a.dim == b.dim && a.gr[..] == b.gr[..a.gr.len()] && b.gr[a.gr.len()] == 0);
    let mut gr = vec![0; res.s_max + 1];
    for w in &weights {
        for (g, v) in gr.iter_mut().zip(&w.gr) {
            *g += v;
        }
    }
    Ok(DerivedH0 {
        p,
        f: res.f.clone(),
        s_max: res.s_max,
        deg_cap,
        dim: weights.iter().map(|w| w.dim).sum(),
        weights,
        gr,
        exact_through: res.e * res.s_max as u32 + res.e - 1,
        certified,
    })
}

/// `E_1^{i,q}` of the conjugate spectral sequence, as predicted by the derived
/// Cartier isomorphism: `gr_i = Gamma^i` of the conormal line over
/// `B^{(1)} = A/(f^p)`, sitting in `q = -i`, in weights `[i e p, (i+1) e p)`.
pub fn conjugate_e1(res: &BarResolution, i: u32, q: i32, deg_cap: u32) -> Result<usize> {
    if res.is_unit() {
        return Ok(0);
    }
    if !res.is_homogeneous() {
        return Err(Error::UnsupportedPresentation("needs f = c x^e".into()));
    }
    let ep = res.e * res.z.p() as u32;
    let top = (i + 1) * ep - 1;
    if top > deg_cap {
        return Err(Error::OutOfStableRange(format!("gr_{i} reaches weight {top} > {deg_cap}")));
    }
    let exact = res.e * res.s_max as u32 + res.e - 1;
    if top > exact {
        return Err(Error::OutOfStableRange(format!("gr_{i} reaches weight {top}, levels exact through {exact}")));
    }
    Ok(if q == -(i as i32) { ep as usize } else { 0 })
}

/// The Frobenius-lift splitting of `gr_1`.
#[derive(Clone, Debug)]
pub struct CartierSplit {
    /// `(1/p) d(F(w_1))` reduced mod `p`: `w_1^{p-1} dw_1`.
    pub representative: BarForm,
    pub is_cocycle: bool,
    /// `x^b * representative` spans `gr_1` in each weight of its range.
    pub generates: bool,
}

/// Split `gr_1` of `dR_{B/A}` using the lift `x -> x^p, w -> w^p` over `Z/p^2`.
pub fn liftable_cartier_split(res: &BarResolution) -> Result<CartierSplit> {
    let z = res.z;
    if !z.is_field() || !res.is_homogeneous() {
        return Err(Error::UnsupportedPresentation("needs F_p and f = c x^e".into()));
    }
    let p = z.p();
    let z2 = Zmod::new(p, 2)?;
    let lift = BarResolution { z: z2, f: res.f.iter().map(|&c| z2.from_u64(c)).collect(), s_max: 1, e: res.e };
    // the lift must commute with the faces of level 1 over Z/p^2
    let fp = lift.f_power(p as u32);
    let mut f_at_xp = vec![0u64; (lift.f.len() - 1) * p as usize + 1];
    for (m, &c) in lift.f.iter().enumerate() {
        f_at_xp[m * p as usize] = c;
    }
    if fp != f_at_xp {
        return Err(Error::LiftNotFrobenius("F(f) != f^p over Z/p^2".into()));
    }
    // (1/p) d(w^p) over Z/p^2
    let dwp = lift.d_v(&BarForm::term(z2, BarKey::new(0, vec![p as u32], 0), 1));
    let mut rep = BarForm::zero(z);
    for (k, &c) in dwp.terms() {
        if c % p != 0 {
            return Err(Error::LiftNotFrobenius("d F(w) not divisible by p".into()));
        }
        rep.accumulate(k.clone(), z.from_u64(c / p));
    }
    // mod-p sanity: F reduces to the p-th power map on w
    if rep.is_zero() {
        return Err(Error::LiftNotFrobenius("(1/p) d F(w) vanishes mod p".into()));
    }
    let is_cocycle = res.total_d(&rep, SignConvention::default()).is_zero();
    let ep = res.e * p as u32;
    let mut generates = res.s_max >= 1;
    for b in 0..ep {
        let w = ep + b;
        if res.e * res.s_max as u32 + res.e - 1 < w {
            generates = false;
            break;
        }
        let blk = H0Block::new(res, w, SignConvention::default());
        let sum = blk.summary(res, w);
        let g = rep.shift_x(b);
        generates &= sum.gr.get(1) == Some(&1) && !blk.in_fil(&g, Some(0))? && blk.in_fil(&g, Some(1))?;
    }
    Ok(CartierSplit { representative: rep, is_cocycle, generates })
}

/// The gr_k generator `gamma_k(y)`: `y^k = k! gamma_k(y)` for the shuffle
/// product, where `y = w_1^{p-1} dw_1`. Explicitly
/// `(-1)^{k(k-1)/2} (w_1 ... w_k)^{p-1} dw_1 ∧ ... ∧ dw_k` at level `k`.
pub fn divided_power_class(res: &BarResolution, k: usize) -> BarForm {
    let p = res.z.p() as u32;
    let sign = if (k * k.saturating_sub(1) / 2) % 2 == 1 { -1 } else { 1 };
    BarForm::term(res.z, BarKey::new(0, vec![p - 1; k], (1u32 << k) - 1), sign)
}

/// The shuffle product of the normalized bicomplex (Eilenberg–Zilber on
/// levels, wedge on forms, Koszul sign for passing simplicial past form degree).
pub fn shuffle_product(res: &BarResolution, a: &BarForm, b: &BarForm) -> BarForm {
    let z = res.z;
    let mut out = BarForm::zero(z);
    for (ka, &ca) in a.terms() {
        for (kb, &cb) in b.terms() {
            let (p, q) = (ka.level(), kb.level());
            let n = p + q;
            let fa = BarForm { z, terms: BTreeMap::from([(ka.clone(), ca)]) };
            let fb = BarForm { z, terms: BTreeMap::from([(kb.clone(), cb)]) };
            let koszul = (ka.degree() * q) % 2 == 1;
            for sub in 0u32..(1 << n) {
                if sub.count_ones() as usize != p {
                    continue;
                }
                let mu: Vec<usize> = (0..n).filter(|&i| sub >> i & 1 == 1).collect();
                let nu: Vec<usize> = (0..n).filter(|&i| sub >> i & 1 == 0).collect();
                let inversions = mu.iter().map(|&m| nu.iter().filter(|&&v| v < m).count()).sum::<usize>();
                let mut sa = fa.clone();
                for &j in &nu {
                    sa = res.degeneracy(j, &sa);
                }
                let mut sb = fb.clone();
                for &j in &mu {
                    sb = res.degeneracy(j, &sb);
                }
                let t = sa.wedge(&sb);
                out = if (inversions % 2 == 1) ^ koszul { out.sub(&t) } else { out.add(&t) };
            }
        }
    }
    out.normalized()
}

/// The crystalline side: `D_s = D_A(f)<w_1, ..., w_s>` with forms in the `dw_j`.
struct Crystalline {
    levels: Vec<PdAlgebra>,
    /// `faces[s][j]: D_s -> D_{s-1}`.
    faces: Vec<Vec<PdHom>>,
}

type CrysForm = BTreeMap<u32, PdElement>;

impl Crystalline {
    fn new(res: &BarResolution, top: usize, cap: u32) -> Result<Self> {
        let z = res.z;
        let e = res.f.len() - 1;
        let mut monic = vec![0i64; e + 1];
        monic[e] = 1;
        // gamma_k(x) reads better than gamma_k(f) when f = x
        let pd_name = if e == 1 { "x" } else { "f" };
        let levels = (0..=top)
            .map(|s| PdAlgebra::new(z, vec![Anchor::new("x", pd_name, &monic)], (1..=s).map(|j| format!("w{j}")).collect(), cap))
            .collect::<Result<Vec<_>>>()?;
        let mut faces = vec![vec![]];
        for s in 1..=top {
            let (src, tgt) = (&levels[s], &levels[s - 1]);
            let x = tgt.x(0);
            let f_at_x = res.f.iter().enumerate().fold(tgt.zero(), |acc, (m, &c)| &acc + &x.pow(m as u64).scale(c));
            let w = |k: usize| tgt.gamma_var(1 + k, 1);
            let mut fs = Vec::new();
            for j in 0..=s {
                let imgs: Vec<PdElement> = (0..s)
                    .map(|k| {
                        if j == 0 {
                            if k == 0 {
                                f_at_x.clone()
                            } else {
                                w(k - 1)
                            }
                        } else if j < s {
                            if k < j {
                                w(k)
                            } else {
                                w(k - 1)
                            }
                        } else if k < s - 1 {
                            w(k)
                        } else {
                            tgt.zero()
                        }
                    })
                    .collect();
                fs.push(PdHom::new(src, tgt, vec![x.clone()], imgs)?);
            }
            faces.push(fs);
        }
        Ok(Crystalline { levels, faces })
    }

    fn add_to(form: &mut CrysForm, mask: u32, el: PdElement) {
        if el.is_zero() {
            return;
        }
        let sum = match form.get(&mask) {
            Some(v) => v + &el,
            None => el,
        };
        if sum.is_zero() {
            form.remove(&mask);
        } else {
            form.insert(mask, sum);
        }
    }

    /// Drop pd terms that do not involve every index.
    fn normalize(s: usize, mask: u32, el: &PdElement) -> PdElement {
        el.filter(|k| (0..s).all(|j| k[2 + j] > 0 || mask >> j & 1 == 1))
    }

    fn horizontal(&self, s: usize, form: &CrysForm) -> Result<CrysForm> {
        let mut out = CrysForm::new();
        for (&mask, el) in form {
            for j in 0..=s {
                let new_mask = if j == 0 {
                    if mask & 1 == 1 {
                        continue;
                    }
                    mask >> 1
                } else if j < s {
                    let (bl, bh) = (mask >> (j - 1) & 1, mask >> j & 1);
                    if bl == 1 && bh == 1 {
                        continue;
                    }
                    (mask & ((1 << (j - 1)) - 1)) | (bl | bh) << (j - 1) | (mask >> (j + 1)) << j
                } else {
                    if mask >> (s - 1) & 1 == 1 {
                        continue;
                    }
                    mask
                };
                let img = self.faces[s][j].apply(el)?;
                let img = if j % 2 == 1 { -&img } else { img };
                Self::add_to(&mut out, new_mask, img);
            }
        }
        Ok(out.into_iter().map(|(m, el)| (m, Self::normalize(s - 1, m, &el))).filter(|(_, el)| !el.is_zero()).collect())
    }

    fn d_v(&self, s: usize, form: &CrysForm) -> CrysForm {
        let z = self.levels[s].base();
        let mut out = CrysForm::new();
        for (&mask, el) in form {
            for j in 0..s {
                if mask >> j & 1 == 1 {
                    continue;
                }
                let dj = el.free_derivative(j);
                let neg = (mask & ((1 << j) - 1)).count_ones() % 2 == 1;
                Self::add_to(&mut out, mask | 1 << j, if neg { dj.scale(z.neg(1)) } else { dj });
            }
        }
        out
    }

    /// `x^b w^a dw_M -> x^b prod a_j! gamma_{a_j}(w_j) dw_M`.
    fn include(&self, key: &BarKey, c: u64) -> PdElement {
        let s = key.level();
        let alg = &self.levels[s];
        let z = alg.base();
        let mut pk = vec![0u32; 2 + s];
        let mut coeff = c;
        for (j, &a) in key.w.iter().enumerate() {
            pk[2 + j] = a;
            coeff = z.mul(coeff, z.from_biguint(&factorial(a as u64)));
        }
        &alg.x_monomial(&[key.x]) * &alg.basis_element(&pk, coeff)
    }
}

/// The comparison map `H^0(dR_{B/A}) -> H^0_crys(B/A) = D_A(f)`, evaluated on
/// a total-degree-0 element of the normalized bicomplex by descending the
/// zig-zag through the crystalline bicomplex.
pub fn comp_to_crystalline(res: &BarResolution, class: &BarForm, conv: SignConvention) -> Result<PdElement> {
    if !res.is_homogeneous() {
        return Err(Error::UnsupportedPresentation("comparison needs f = c x^e".into()));
    }
    if class.terms().any(|(k, _)| k.total_degree() != 0 || !k.is_normalized()) || !res.total_d(class, conv).is_zero() {
        return Err(Error::NotACocycle);
    }
    let top = class.levels().last().copied().unwrap_or(0);
    let cap = class.terms().map(|(k, _)| res.weight(k) / res.e).max().unwrap_or(0) + 1;
    let crys = Crystalline::new(res, top, cap)?;
    let z = res.z;
    let mut comps: Vec<CrysForm> = vec![CrysForm::new(); top + 1];
    for (k, &c) in class.terms() {
        let el = crys.include(k, c);
        Crystalline::add_to(&mut comps[k.level()], k.mask, el);
    }
    for s in (1..=top).rev() {
        let omega = std::mem::take(&mut comps[s]);
        let full = (1u32 << s) - 1;
        if omega.keys().any(|&m| m != full) {
            return Err(Error::NotACocycle);
        }
        // integrate in w_1: gamma_k(w_1) dw_1 ∧ rest -> gamma_{k+1}(w_1) rest
        let mut eta = CrysForm::new();
        if let Some(el) = omega.get(&full) {
            let int = el.map_keys(|k| {
                let mut k2 = k.to_vec();
                k2[2] += 1;
                k2
            });
            Crystalline::add_to(&mut eta, full & !1, int);
        }
        let sign_v_neg = matches!(conv, SignConvention::ColumnParity) && s % 2 == 1;
        if sign_v_neg {
            eta = eta.into_iter().map(|(m, el)| (m, el.scale(z.neg(1)))).collect();
        }
        // D(eta) = ±d_v(eta) + h(eta); its column-s part must reproduce omega
        let dv = crys.d_v(s, &eta);
        let dv = if sign_v_neg { dv.into_iter().map(|(m, el)| (m, el.scale(z.neg(1)))).collect() } else { dv };
        if dv != omega {
            return Err(Error::NotACocycle);
        }
        let h = crys.horizontal(s, &eta)?;
        let h_neg = matches!(conv, SignConvention::FormDegree) && (s - 1) % 2 == 1;
        for (m, el) in h {
            Crystalline::add_to(&mut comps[s - 1], m, if h_neg { el } else { -&el });
        }
    }
    let base = &crys.levels[0];
    Ok(comps[0].get(&0).cloned().unwrap_or_else(|| base.zero()))
}

/// `D_A(f)` for the resolution's `f`, with the given pd-weight cap.
pub fn crystalline_target(res: &BarResolution, cap: u32) -> Result<PdAlgebra> {
    Ok(Crystalline::new(res, 0, cap)?.levels.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn res(p: u64, f: &[i64], s: usize) -> BarResolution {
        BarResolution::new(Zmod::field(p).unwrap(), f, s).unwrap()
    }

    fn random_form(r: &BarResolution, rng: &mut impl Rng, s: usize, w: u32, terms: usize) -> BarForm {
        let mut f = BarForm::zero(r.base());
        for _ in 0..terms {
            let i = rng.gen_range(0..=s);
            let basis = r.normalized_basis(s, i, w);
            if basis.is_empty() {
                continue;
            }
            let k = basis[rng.gen_range(0..basis.len())].clone();
            f.accumulate(k, rng.gen_range(1..r.base().modulus()));
        }
        f
    }

    #[test]
    fn level_one_faces() {
        let r = res(2, &[0, 1], 2);
        let t = BarForm::term(r.base(), BarKey::new(0, vec![1], 0), 1);
        assert_eq!(r.face(0, &t), BarForm::term(r.base(), BarKey::new(1, vec![], 0), 1));
        assert!(r.face(1, &t).is_zero());
    }

    #[test]
    fn simplicial_identities() {
        let r = res(3, &[0, 1, 1], 4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for s in 0..=3 {
            for _ in 0..10 {
                let mut f = BarForm::zero(r.base());
                for _ in 0..3 {
                    let w: Vec<u32> = (0..s).map(|_| rng.gen_range(0..3)).collect();
                    f.accumulate(BarKey::new(rng.gen_range(0..3), w, rng.gen_range(0..1u32 << s)), 1);
                }
                assert_eq!(r.check_simplicial_identities(&f), None);
            }
        }
    }

    #[test]
    fn bar_is_a_resolution() {
        let r = res(2, &[0, 1], 4);
        assert_eq!(r.normalized_homology(4).unwrap(), vec![1, 0, 0, 0, 0]);
        let r = res(3, &[0, 0, 1], 3);
        assert_eq!(r.normalized_homology(6).unwrap(), vec![2, 0, 0, 0]);
    }

    #[test]
    fn total_differential_squares_to_zero() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for conv in [SignConvention::ColumnParity, SignConvention::FormDegree] {
            let r = res(3, &[0, 1], 4);
            for _ in 0..200 {
                let s = rng.gen_range(0..=4);
                let w = rng.gen_range(s as u32..=7);
                let f = random_form(&r, &mut rng, s, w, 3);
                assert!(r.total_d(&r.total_d(&f, conv), conv).is_zero());
            }
        }
    }

    #[test]
    fn level_zero_is_the_base() {
        let r = res(2, &[0, 1], 0);
        let t = totalize(&r, -1, 5, SignConvention::default(), DEFAULT_BASIS_LIMIT).unwrap();
        assert!(t.blocks.iter().all(|b| b.bases[1].len() == 1 && b.bases[0].is_empty()));
    }

    #[test]
    fn h0_and_gr() {
        for p in [2u64, 3] {
            let r = res(p, &[0, 1], 2 * p as usize);
            let h = derived_dr_h0(&r, 2 * p as u32 - 1, DEFAULT_BASIS_LIMIT).unwrap();
            assert_eq!(&h.gr[..3], &[p as usize, p as usize, 0]);
            assert!(h.weights.iter().all(|w| w.dim == 1));
            assert!(h.certified);
        }
        let r = res(3, &[1], 3);
        let h = derived_dr_h0(&r, 5, DEFAULT_BASIS_LIMIT).unwrap();
        assert_eq!(h.dim, 0);
    }

    #[test]
    fn level_cut_is_detected() {
        let r = res(3, &[0, 1], 3);
        let h = derived_dr_h0(&r, 5, DEFAULT_BASIS_LIMIT).unwrap();
        assert!(h.exact_through < 5);
    }

    #[test]
    fn lower_cohomology_vanishes() {
        let r = res(2, &[0, 1], 5);
        let t = totalize(&r, -3, 5, SignConvention::default(), DEFAULT_BASIS_LIMIT).unwrap();
        let dims = t.cohomology_dims().unwrap();
        assert_eq!(dims[&0], 6);
        assert_eq!(dims[&-1], 0);
        assert_eq!(dims[&-2], 0);
    }

    #[test]
    fn e1_prediction() {
        let r = res(2, &[0, 1], 5);
        assert_eq!(conjugate_e1(&r, 1, -1, 5).unwrap(), 2);
        assert_eq!(conjugate_e1(&r, 0, 0, 5).unwrap(), 2);
        assert_eq!(conjugate_e1(&r, 1, 0, 5).unwrap(), 0);
        assert!(matches!(conjugate_e1(&r, 3, -3, 5), Err(Error::OutOfStableRange(_))));
    }

    #[test]
    fn cartier_split() {
        for p in [2u64, 3] {
            let r = res(p, &[0, 1], 2 * p as usize);
            let s = liftable_cartier_split(&r).unwrap();
            assert_eq!(s.representative, divided_power_class(&r, 1));
            assert!(s.is_cocycle && s.generates);
        }
    }

    #[test]
    fn comparison_of_the_generator() {
        for p in [2u64, 3, 5] {
            let r = res(p, &[0, 1], 2);
            let d = crystalline_target(&r, 3 * p as u32).unwrap();
            let y = divided_power_class(&r, 1);
            let img = comp_to_crystalline(&r, &y, SignConvention::ColumnParity).unwrap().transfer(&d);
            assert_eq!(img, -&d.gamma_var(0, p as u32));
            let img = comp_to_crystalline(&r, &y, SignConvention::FormDegree).unwrap().transfer(&d);
            let expected = if p == 2 { d.gamma_var(0, 2) } else { d.gamma_var(0, p as u32) };
            assert_eq!(img, expected);
            let one = BarForm::term(r.base(), BarKey::new(0, vec![], 0), 1);
            assert_eq!(comp_to_crystalline(&r, &one, SignConvention::ColumnParity).unwrap().transfer(&d), d.one());
        }
    }

    #[test]
    fn non_cocycles_are_rejected() {
        let r = res(3, &[0, 1], 2);
        let t = BarForm::term(r.base(), BarKey::new(0, vec![1], 0), 1);
        assert_eq!(comp_to_crystalline(&r, &t, SignConvention::default()), Err(Error::NotACocycle));
    }

    #[test]
    fn leibniz_for_shuffle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let r = res(5, &[0, 1], 4);
        let conv = SignConvention::ColumnParity;
        for _ in 0..40 {
            let (sa, sb) = (rng.gen_range(0..=2), rng.gen_range(0..=2));
            let (wa, wb) = (rng.gen_range(sa as u32..=4), rng.gen_range(sb as u32..=4));
            let a = random_form(&r, &mut rng, sa, wa, 2);
            let b = random_form(&r, &mut rng, sb, wb, 2);
            let Some(ka) = a.terms().next().map(|(k, _)| k.clone()) else { continue };
            let a = a.level_part(ka.level());
            let a: BarForm = BarForm { z: a.z, terms: a.terms.into_iter().filter(|(k, _)| k.degree() == ka.degree()).collect() };
            let lhs = r.total_d(&shuffle_product(&r, &a, &b), conv);
            let da_b = shuffle_product(&r, &r.total_d(&a, conv), &b);
            let a_db = shuffle_product(&r, &a, &r.total_d(&b, conv));
            let rhs = if ka.total_degree().rem_euclid(2) == 1 { da_b.sub(&a_db) } else { da_b.add(&a_db) };
            assert_eq!(lhs, rhs);
        }
    }
}
