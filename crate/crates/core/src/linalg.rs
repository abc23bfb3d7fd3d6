//! Dense linear algebra over `Z/p^n`: row reduction over `F_p`, and Howell and
//! Smith forms over the chain ring `Z/p^n`.

use std::collections::BTreeMap;

use crate::zmod::Zmod;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    z: Zmod,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl Matrix {
    pub fn zeros(z: Zmod, rows: usize, cols: usize) -> Self {
        Matrix { z, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn from_rows(z: Zmod, cols: usize, rows: &[Vec<u64>]) -> Self {
        let mut m = Matrix::zeros(z, rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols);
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, z.from_u64(v));
            }
        }
        m
    }

    pub fn identity(z: Zmod, n: usize) -> Self {
        let mut m = Matrix::zeros(z, n, n);
        for i in 0..n {
            m.set(i, i, 1 % z.modulus());
        }
        m
    }

    pub fn ring(&self) -> Zmod {
        self.z
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<u64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn push_row(&mut self, row: &[u64]) {
        assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.z, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let z = self.z;
        let mut out = Matrix::zeros(z, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if b != 0 {
                        let v = z.add(out.get(i, j), z.mul(a, b));
                        out.set(i, j, v);
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[u64]) -> Vec<u64> {
        assert_eq!(v.len(), self.cols);
        let z = self.z;
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(0, |acc, (&a, &b)| z.add(acc, z.mul(a, b))))
            .collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// `row[target] -= c * row[src]`, from column `from` on.
    fn axpy_row(&mut self, target: usize, src: usize, c: u64, from: usize) {
        let z = self.z;
        for j in from..self.cols {
            let s = self.get(src, j);
            if s != 0 {
                let v = z.sub(self.get(target, j), z.mul(c, s));
                self.set(target, j, v);
            }
        }
    }

    fn scale_row(&mut self, i: usize, c: u64) {
        let z = self.z;
        for j in 0..self.cols {
            let v = z.mul(self.get(i, j), c);
            self.set(i, j, v);
        }
    }

    /// Reduced row echelon form over the field `F_p`; returns pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        assert!(self.z.is_field(), "rref needs a field");
        let z = self.z;
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(piv) = (r..self.rows).find(|&i| self.get(i, c) != 0) else { continue };
            self.swap_rows(r, piv);
            let inv = z.inv(self.get(r, c)).unwrap();
            self.scale_row(r, inv);
            for i in 0..self.rows {
                if i != r {
                    let f = self.get(i, c);
                    if f != 0 {
                        self.axpy_row(i, r, f, c);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        if self.z.is_field() {
            self.clone().rref().len()
        } else {
            self.smith_valuations().len()
        }
    }

    /// Basis of the right kernel `{v : M v = 0}` over `F_p`.
    pub fn kernel(&self) -> Vec<Vec<u64>> {
        let mut m = self.clone();
        let pivots = m.rref();
        let z = self.z;
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![0u64; self.cols];
                v[f] = 1;
                for (r, &pc) in pivots.iter().enumerate() {
                    v[pc] = z.neg(m.get(r, f));
                }
                v
            })
            .collect()
    }

    /// Howell normal form of the row space over `Z/p^n`. Rows are in echelon
    /// form with leading entries `p^v`, entries above each pivot reduced into
    /// `[0, p^v)`, and the span closed under multiplication by `p` in the sense
    /// that annihilating a leading entry lands in the span of the later rows.
    /// This form is canonical: equal row spaces give equal forms.
    pub fn howell_form(&self) -> Matrix {
        let z = self.z;
        let p = z.p();
        let mut pool: Vec<Vec<u64>> = self.row_vecs().into_iter().filter(|r| r.iter().any(|&x| x != 0)).collect();
        let mut out: Vec<(usize, u32, Vec<u64>)> = Vec::new();
        for c in 0..self.cols {
            // pivot: minimal valuation in column c among pool rows
            let best = pool
                .iter()
                .enumerate()
                .filter(|(_, r)| r[c] != 0)
                .min_by_key(|(_, r)| z.val(r[c]))
                .map(|(i, _)| i);
            let Some(bi) = best else { continue };
            let mut piv = pool.swap_remove(bi);
            let v = z.val(piv[c]);
            let unit = piv[c] / p.pow(v);
            let inv = z.inv(unit).unwrap();
            for x in piv.iter_mut() {
                *x = z.mul(*x, inv);
            }
            for r in pool.iter_mut() {
                if r[c] != 0 {
                    let f = r[c] / p.pow(v);
                    for j in c..self.cols {
                        r[j] = z.sub(r[j], z.mul(f, piv[j]));
                    }
                }
            }
            // p^{n-v} * piv has a zero in column c but may carry new information
            let ann = z.pow(p, (z.n() - v) as u64);
            let extra: Vec<u64> = piv.iter().map(|&x| z.mul(x, ann)).collect();
            pool.retain(|r| r.iter().any(|&x| x != 0));
            if extra.iter().any(|&x| x != 0) {
                pool.push(extra);
            }
            out.push((c, v, piv));
        }
        // reduce entries above pivots
        for k in (0..out.len()).rev() {
            let (c, v, ref piv) = out[k];
            let piv = piv.clone();
            let pv = p.pow(v);
            for row in out.iter_mut().take(k) {
                let q = row.2[c] / pv;
                if q != 0 {
                    for j in c..self.cols {
                        row.2[j] = z.sub(row.2[j], z.mul(q, piv[j]));
                    }
                }
            }
        }
        let mut m = Matrix::zeros(z, 0, self.cols);
        for (_, _, r) in out {
            m.push_row(&r);
        }
        m
    }

    /// Valuations of the nonzero elementary divisors (Smith form) over `Z/p^n`.
    pub fn smith_valuations(&self) -> Vec<u32> {
        let z = self.z;
        let p = z.p();
        let mut m = self.clone();
        let mut out = Vec::new();
        let mut r0 = 0;
        let mut c0 = 0;
        while r0 < m.rows && c0 < m.cols {
            let mut best: Option<(usize, usize, u32)> = None;
            for i in r0..m.rows {
                for j in c0..m.cols {
                    let x = m.get(i, j);
                    if x != 0 {
                        let v = z.val(x);
                        if best.is_none_or(|b| v < b.2) {
                            best = Some((i, j, v));
                        }
                    }
                }
            }
            let Some((bi, bj, v)) = best else { break };
            m.swap_rows(r0, bi);
            if bj != c0 {
                for i in 0..m.rows {
                    m.data.swap(i * m.cols + bj, i * m.cols + c0);
                }
            }
            let unit_inv = z.inv(m.get(r0, c0) / p.pow(v)).unwrap();
            m.scale_row(r0, unit_inv);
            let pv = p.pow(v);
            for i in r0 + 1..m.rows {
                let f = m.get(i, c0) / pv;
                if f != 0 {
                    m.axpy_row(i, r0, f, c0);
                }
            }
            for j in c0 + 1..m.cols {
                let f = m.get(r0, j) / pv;
                if f != 0 {
                    for i in r0..m.rows {
                        let v2 = z.sub(m.get(i, j), z.mul(f, m.get(i, c0)));
                        m.set(i, j, v2);
                    }
                }
            }
            out.push(v);
            r0 += 1;
            c0 += 1;
        }
        out
    }

    /// Whether `v` lies in the row space (over `Z/p^n`).
    pub fn row_space_contains(&self, v: &[u64]) -> bool {
        let h = self.howell_form();
        let z = self.z;
        let p = z.p();
        let mut w = v.to_vec();
        for i in 0..h.rows {
            let row = h.row(i);
            let c = row.iter().position(|&x| x != 0).unwrap();
            let pv = row[c];
            if w[c] % pv != 0 {
                return false;
            }
            let q = w[c] / pv;
            let _ = p;
            for j in c..h.cols {
                w[j] = z.sub(w[j], z.mul(q, row[j]));
            }
        }
        w.iter().all(|&x| x == 0)
    }
}

/// `F_p` dimension of `ker(d_out) / im(d_in)` where `d_in: A -> B`, `d_out: B -> C`
/// are given as matrices acting on column vectors.
pub fn cohomology_dim(d_in: Option<&Matrix>, d_out: Option<&Matrix>, dim: usize) -> usize {
    let ker = dim - d_out.map_or(0, |m| m.rank());
    let im = d_in.map_or(0, |m| m.rank());
    ker - im
}

/// Representatives of a basis of `ker(d_out) / im(d_in)` over `F_p`.
pub fn cohomology_basis(d_in: Option<&Matrix>, d_out: Option<&Matrix>, z: Zmod, dim: usize) -> Vec<Vec<u64>> {
    let kernel = match d_out {
        Some(m) => m.kernel(),
        None => (0..dim)
            .map(|i| {
                let mut v = vec![0; dim];
                v[i] = 1;
                v
            })
            .collect(),
    };
    let mut span = match d_in {
        Some(m) => m.transpose(),
        None => Matrix::zeros(z, 0, dim),
    };
    let mut rank = span.rank();
    let mut reps = Vec::new();
    for k in kernel {
        span.push_row(&k);
        let r = span.rank();
        if r > rank {
            rank = r;
            reps.push(k);
        }
    }
    reps
}

/// Incremental row echelon form over `F_p` for sparse rows (sorted
/// `(column, value)` lists). Rows are reduced on insertion; only the pivot rows
/// are stored.
#[derive(Clone, Debug)]
pub struct SparseEchelon {
    z: Zmod,
    pivots: BTreeMap<usize, Vec<(usize, u64)>>,
}

impl SparseEchelon {
    pub fn new(z: Zmod) -> Self {
        assert!(z.is_field(), "sparse elimination needs a field");
        SparseEchelon { z, pivots: BTreeMap::new() }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Pivot columns, ascending.
    pub fn pivot_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.pivots.keys().copied()
    }

    fn reduce(&self, mut row: Vec<(usize, u64)>) -> Vec<(usize, u64)> {
        let z = self.z;
        let mut start = 0;
        loop {
            let Some(pos) = row[start..].iter().position(|&(c, _)| self.pivots.contains_key(&c)) else { return row };
            let idx = start + pos;
            let (col, val) = row[idx];
            let piv = &self.pivots[&col];
            // row -= val * piv (piv is monic)
            let mut out = Vec::with_capacity(row.len() + piv.len());
            let (mut i, mut j) = (0, 0);
            while i < row.len() || j < piv.len() {
                let take_row = j == piv.len() || (i < row.len() && row[i].0 < piv[j].0);
                let take_piv = i == row.len() || (j < piv.len() && piv[j].0 < row[i].0);
                if take_row {
                    out.push(row[i]);
                    i += 1;
                } else if take_piv {
                    out.push((piv[j].0, z.neg(z.mul(val, piv[j].1))));
                    j += 1;
                } else {
                    let v = z.sub(row[i].1, z.mul(val, piv[j].1));
                    if v != 0 {
                        out.push((row[i].0, v));
                    }
                    i += 1;
                    j += 1;
                }
            }
            row = out;
            start = row.iter().position(|&(c, _)| c > col).unwrap_or(row.len());
            if row.is_empty() {
                return row;
            }
        }
    }

    /// Insert a row; returns whether it increased the rank.
    pub fn insert(&mut self, row: Vec<(usize, u64)>) -> bool {
        let mut row: Vec<(usize, u64)> = row.into_iter().filter(|x| x.1 != 0).collect();
        row.sort_by_key(|x| x.0);
        let row = self.reduce(row);
        let Some(&(col, lead)) = row.first() else { return false };
        let inv = self.z.inv(lead).unwrap();
        let row = row.into_iter().map(|(c, v)| (c, self.z.mul(v, inv))).collect();
        self.pivots.insert(col, row);
        true
    }

    /// Whether a row lies in the span.
    pub fn contains(&self, row: &[(usize, u64)]) -> bool {
        let mut row: Vec<(usize, u64)> = row.iter().copied().filter(|x| x.1 != 0).collect();
        row.sort_by_key(|x| x.0);
        self.reduce(row).is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_rank_and_kernel() {
        let z = Zmod::field(3).unwrap();
        let m = Matrix::from_rows(z, 3, &[vec![1, 2, 0], vec![2, 1, 0], vec![0, 0, 1]]);
        // row 2 = 2 * row 1 mod 3
        assert_eq!(m.rank(), 2);
        let k = m.kernel();
        assert_eq!(k.len(), 1);
        assert!(m.apply(&k[0]).iter().all(|&x| x == 0));
    }

    #[test]
    fn howell_is_canonical() {
        let z = Zmod::new(2, 3).unwrap();
        let a = Matrix::from_rows(z, 2, &[vec![2, 4], vec![0, 4]]);
        let b = Matrix::from_rows(z, 2, &[vec![2, 0], vec![6, 4]]);
        assert_eq!(a.howell_form(), b.howell_form());
        // the span of (4, 0) in (Z/8)^2 forces the extra row 2*(2,?)
        let c = Matrix::from_rows(z, 2, &[vec![4, 1]]);
        let h = c.howell_form();
        assert_eq!(h.rows(), 2);
        assert!(h.row_space_contains(&[0, 2]));
        assert!(!h.row_space_contains(&[0, 1]));
    }

    #[test]
    fn smith_valuations() {
        let z = Zmod::new(3, 3).unwrap();
        let m = Matrix::from_rows(z, 2, &[vec![3, 0], vec![0, 9]]);
        assert_eq!(m.smith_valuations(), vec![1, 2]);
        let m = Matrix::from_rows(z, 2, &[vec![3, 9], vec![6, 18]]);
        assert_eq!(m.smith_valuations(), vec![1]);
    }

    #[test]
    fn sparse_echelon_matches_dense() {
        let z = Zmod::field(5).unwrap();
        let rows = vec![vec![1, 2, 0, 4], vec![2, 4, 0, 3], vec![0, 0, 1, 1], vec![1, 2, 1, 0]];
        let dense = Matrix::from_rows(z, 4, &rows).rank();
        let mut e = SparseEchelon::new(z);
        for r in &rows {
            e.insert(r.iter().enumerate().map(|(c, &v)| (c, v)).collect());
        }
        assert_eq!(e.rank(), dense);
        assert!(e.contains(&[(0, 3), (1, 1), (3, 2)]));
    }

    #[test]
    fn cohomology_of_two_term_complex() {
        let z = Zmod::field(2).unwrap();
        // F_2 --(1,1)--> F_2^2 --[1 1]--> F_2
        let d0 = Matrix::from_rows(z, 1, &[vec![1], vec![1]]);
        let d1 = Matrix::from_rows(z, 2, &[vec![1, 1]]);
        assert_eq!(cohomology_dim(Some(&d0), Some(&d1), 2), 0);
        assert_eq!(cohomology_basis(None, Some(&d0), z, 1).len(), 0);
    }
}
