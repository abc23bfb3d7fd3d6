//! Finite-depth models of the period rings.
//!
//! * `O = Z_p[zeta_{p^k}, pi^{1/p^k}] / p^n` with generators `a = zeta_{p^k}`
//!   (optional) and `b = pi^{1/p^k}`, where `pi^e = p`.
//! * The tilt at depth `k`: compatible sequences `(x^(0), ..., x^(k))` in `O/p`
//!   with `(x^(i))^p = x^(i-1)`. Frobenius on `O/p` is additive, so the ring
//!   structure is componentwise.
//! * `A_inf / p^n`: `W_n` of the tilt, with `theta` evaluated on lifts of the
//!   `(n-1)`-st components; needs `n <= k + 1`.
//! * `A_crys`: the pd-envelope of `ker theta` restricted to `Z[u, v]`, where
//!   `u = [eps^{1/p^k}]` and `v = [pi^{1/p^k}]`, i.e. divided powers of
//!   `Phi_{p^k}(u)` and `xi = E(v^{p^k})`, weight-capped. `A_st` adds a free
//!   pd-variable `X`.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::algebra::{cyclotomic_prime_power, derivative, eval_univariate, make_finite_algebra, AlgebraElement, FiniteAlgebra, Presentation};
use crate::error::{Error, Result};
use crate::pd::{Anchor, PdAlgebra, PdElement, PdHom};
use crate::ring::Ring;
use crate::valuation::Valuation;
use crate::witt::WittRing;
use crate::zmod::{is_prime, Zmod};

/// Galois data on the model: `zeta -> zeta^chi`, `pi^{1/p^k} -> zeta^kummer pi^{1/p^k}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaloisElement {
    pub chi: i64,
    pub kummer: i64,
}

impl GaloisElement {
    pub fn identity() -> Self {
        GaloisElement { chi: 1, kummer: 0 }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &GaloisElement) -> Self {
        GaloisElement { chi: self.chi * other.chi, kummer: self.kummer + self.chi * other.kummer }
    }
}

#[derive(Debug)]
pub struct OModel {
    p: u64,
    n: u32,
    k: u32,
    e: u32,
    cyclotomic: bool,
    alg: FiniteAlgebra,
    alg_p: FiniteAlgebra,
}

impl PartialEq for OModel {
    fn eq(&self, o: &Self) -> bool {
        (self.p, self.n, self.k, self.e, self.cyclotomic) == (o.p, o.n, o.k, o.e, o.cyclotomic)
    }
}

impl OModel {
    /// `K = Q_p(p^{1/e})`, depth `k`, precision `p^n`.
    pub fn new(p: u64, n: u32, k: u32, e: u32, cyclotomic: bool) -> Result<Arc<Self>> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if e == 0 || (cyclotomic && k == 0) {
            return Err(Error::ModelUnavailable(format!("e = {e}, k = {k}")));
        }
        let deg = (e as u64 * p.pow(k)) as usize;
        let mut kummer = vec![0i64; deg + 1];
        kummer[0] = -(p as i64);
        kummer[deg] = 1;
        let cyc = if cyclotomic { cyclotomic_prime_power(p, k) } else { vec![] };
        let mut rels: Vec<(&str, &[i64])> = Vec::new();
        if cyclotomic {
            rels.push(("a", &cyc));
        }
        rels.push(("b", &kummer));
        let alg = make_finite_algebra(&Presentation::simple(p, n, &rels))?;
        let alg_p = alg.with_precision(1)?;
        Ok(Arc::new(OModel { p, n, k, e, cyclotomic, alg, alg_p }))
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.n
    }

    pub fn depth(&self) -> u32 {
        self.k
    }

    pub fn e(&self) -> u32 {
        self.e
    }

    pub fn has_roots_of_unity(&self) -> bool {
        self.cyclotomic
    }

    /// `O / p^n`.
    pub fn algebra(&self) -> &FiniteAlgebra {
        &self.alg
    }

    /// `O / p`.
    pub fn residue(&self) -> &FiniteAlgebra {
        &self.alg_p
    }

    fn b(&self, alg: &FiniteAlgebra) -> AlgebraElement {
        alg.gen("b").unwrap()
    }

    /// `zeta_{p^j}` in `alg` (`O/p^n` or `O/p`).
    pub fn zeta_in(&self, alg: &FiniteAlgebra, j: u32) -> Result<AlgebraElement> {
        if !self.cyclotomic || j > self.k {
            return Err(Error::ModelUnavailable(format!("zeta_(p^{j}) at depth {}", self.k)));
        }
        Ok(alg.gen("a")?.pow(self.p.pow(self.k - j)))
    }

    /// `pi^{1/p^j}`.
    pub fn pi_root_in(&self, alg: &FiniteAlgebra, j: u32) -> AlgebraElement {
        self.b(alg).pow(self.p.pow(self.k - j))
    }

    /// `p^{1/p^j} = pi^{e/p^j}`.
    pub fn p_root_in(&self, alg: &FiniteAlgebra, j: u32) -> AlgebraElement {
        self.b(alg).pow(self.e as u64 * self.p.pow(self.k - j))
    }

    /// Validate `sigma` as an automorphism of the model.
    pub fn check_galois(&self, s: &GaloisElement) -> Result<()> {
        if s.chi.rem_euclid(self.p as i64) == 0 {
            return Err(Error::NotAnAutomorphism(format!("chi = {} is not a unit", s.chi)));
        }
        if !self.cyclotomic {
            return if s.kummer.rem_euclid(self.p.pow(self.k) as i64) == 0 {
                Ok(())
            } else {
                Err(Error::ModelUnavailable("Kummer action needs roots of unity".into()))
            };
        }
        let (ia, ib) = self.galois_images(&self.alg, s);
        let cyc = cyclotomic_prime_power(self.p, self.k);
        if !eval_univariate(&cyc, &ia).is_zero() {
            return Err(Error::NotAnAutomorphism("zeta not sent to a root of Phi".into()));
        }
        let pk = self.p.pow(self.k);
        if ib.pow(self.e as u64 * pk) != self.alg.scalar(self.p as i64) {
            return Err(Error::NotAnAutomorphism("pi^{1/p^k} not sent to a root".into()));
        }
        Ok(())
    }

    fn galois_images(&self, alg: &FiniteAlgebra, s: &GaloisElement) -> (AlgebraElement, AlgebraElement) {
        let pk = self.p.pow(self.k) as i64;
        let a = alg.gen("a").unwrap();
        (a.pow(s.chi.rem_euclid(pk) as u64), &a.pow(s.kummer.rem_euclid(pk) as u64) * &self.b(alg))
    }

    /// `sigma(x)` for `x` in `O/p^n` or `O/p`.
    pub fn galois_act(&self, s: &GaloisElement, x: &AlgebraElement) -> Result<AlgebraElement> {
        self.check_galois(s)?;
        let alg = x.parent();
        let images: Vec<AlgebraElement> = if self.cyclotomic {
            let (ia, ib) = self.galois_images(alg, s);
            vec![ia, ib]
        } else {
            vec![self.b(alg)]
        };
        let mut out = alg.zero_elem();
        for (exps, &c) in alg.basis().iter().zip(x.coords()) {
            if c == 0 {
                continue;
            }
            let mut t = alg.scalar(1).scale(c);
            for (img, &e) in images.iter().zip(exps) {
                t = &t * &img.pow(e as u64);
            }
            out = &out + &t;
        }
        Ok(out)
    }
}

/// The tilt at finite depth; elements are `k + 1` components in `O/p`.
#[derive(Clone, Debug, PartialEq)]
pub struct TiltRing {
    model: Arc<OModel>,
}

impl TiltRing {
    pub fn new(model: Arc<OModel>) -> Self {
        TiltRing { model }
    }

    pub fn model(&self) -> &Arc<OModel> {
        &self.model
    }

    pub fn depth(&self) -> u32 {
        self.model.k
    }

    /// Check `(x^(i))^p = x^(i-1)` exactly in `O/p`.
    pub fn element(&self, comps: Vec<AlgebraElement>) -> Result<Vec<AlgebraElement>> {
        if comps.len() != self.model.k as usize + 1 {
            return Err(Error::NotARootSystem(format!("{} components at depth {}", comps.len(), self.model.k)));
        }
        for i in 1..comps.len() {
            if comps[i].pow(self.model.p) != comps[i - 1] {
                return Err(Error::NotARootSystem(format!("component {i} is not a p-th root of component {}", i - 1)));
            }
        }
        Ok(comps)
    }

    /// `p^flat = (p, p^{1/p}, ...)`.
    pub fn p_flat(&self) -> Vec<AlgebraElement> {
        (0..=self.model.k).map(|i| self.model.p_root_in(&self.model.alg_p, i)).collect()
    }

    /// `pi^flat = (pi, pi^{1/p}, ...)`.
    pub fn pi_flat(&self) -> Vec<AlgebraElement> {
        (0..=self.model.k).map(|i| self.model.pi_root_in(&self.model.alg_p, i)).collect()
    }

    /// `eps = (1, zeta_p, zeta_{p^2}, ...)`.
    pub fn eps_flat(&self) -> Result<Vec<AlgebraElement>> {
        (0..=self.model.k).map(|i| self.model.zeta_in(&self.model.alg_p, i)).collect()
    }

    /// `val(x^#)`: `p^i val(x^(i))` for the first component of valuation `< 1`.
    pub fn valuation(&self, x: &[AlgebraElement]) -> Result<Valuation> {
        for (i, c) in x.iter().enumerate() {
            if let Valuation::Exact(v) = c.valuation()? {
                return Ok(Valuation::Exact(v * self.model.p.pow(i as u32) as i64));
            }
        }
        Ok(Valuation::AtLeast(Ratio::from_integer(self.model.p.pow(self.model.k) as i64)))
    }

    pub fn galois_act(&self, s: &GaloisElement, x: &[AlgebraElement]) -> Result<Vec<AlgebraElement>> {
        x.iter().map(|c| self.model.galois_act(s, c)).collect()
    }
}

impl Ring for TiltRing {
    type Elem = Vec<AlgebraElement>;

    fn zero(&self) -> Self::Elem {
        vec![self.model.alg_p.zero_elem(); self.model.k as usize + 1]
    }
    fn one(&self) -> Self::Elem {
        vec![self.model.alg_p.scalar(1); self.model.k as usize + 1]
    }
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }
    fn neg(&self, a: &Self::Elem) -> Self::Elem {
        a.iter().map(|x| -x).collect()
    }
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        a.iter().zip(b).map(|(x, y)| x * y).collect()
    }
    fn from_int(&self, v: &BigInt) -> Self::Elem {
        let c = self.model.alg_p.base().from_bigint(v);
        vec![self.model.alg_p.scalar(1).scale(c); self.model.k as usize + 1]
    }
    fn is_zero(&self, a: &Self::Elem) -> bool {
        a.iter().all(|x| x.is_zero())
    }
}

pub type TiltElement = Vec<AlgebraElement>;
pub type AinfElement = Vec<TiltElement>;

/// `A_inf / p^n = W_n(tilt)` with `theta`.
#[derive(Clone, Debug)]
pub struct Ainf {
    tilt: TiltRing,
    witt: WittRing<TiltRing>,
}

impl Ainf {
    pub fn new(model: Arc<OModel>) -> Result<Self> {
        if model.n > model.k + 1 {
            return Err(Error::PrecisionExceedsDepth { n: model.n, limit: model.k + 1 });
        }
        let tilt = TiltRing::new(model.clone());
        let witt = WittRing::new(tilt.clone(), model.p, model.n as usize);
        Ok(Ainf { tilt, witt })
    }

    pub fn tilt(&self) -> &TiltRing {
        &self.tilt
    }

    pub fn witt(&self) -> &WittRing<TiltRing> {
        &self.witt
    }

    pub fn teichmuller(&self, x: &TiltElement) -> AinfElement {
        self.witt.teichmuller(x)
    }

    /// `theta(sum p^j [a_j^{1/p^j}]) = sum p^j (a_j^(n-1) lifted)^{p^{n-1-j}}` in `O/p^n`.
    pub fn theta(&self, w: &[TiltElement]) -> AlgebraElement {
        let m = &self.tilt.model;
        let n = m.n as usize;
        let mut acc = m.alg.zero_elem();
        for (j, aj) in w.iter().enumerate() {
            let lift = aj[n - 1].transfer(&m.alg);
            let t = lift.pow(m.p.pow((n - 1 - j) as u32)).scale(m.p.pow(j as u32) % m.alg.base().modulus());
            acc = &acc + &t;
        }
        acc
    }

    /// `E([pi^flat])` for an integer polynomial `E`, low degree first.
    pub fn eval_at_pi(&self, e_poly: &[i64]) -> AinfElement {
        let pi = self.teichmuller(&self.tilt.pi_flat());
        let mut acc = self.witt.zero();
        for &c in e_poly.iter().rev() {
            acc = self.witt.add(&self.witt.mul(&acc, &pi), &self.witt.from_i64(c));
        }
        acc
    }

    pub fn galois_act(&self, s: &GaloisElement, w: &[TiltElement]) -> Result<AinfElement> {
        w.iter().map(|c| self.tilt.galois_act(s, c)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KerThetaReport {
    pub theta_is_zero: bool,
    /// Valuation of `E([pi^flat]) mod p` in the tilt.
    pub valuation: Valuation,
}

/// Check that `E([pi^flat])` generates `ker theta`: `theta(E([pi])) = 0` and its
/// reduction mod `p` has tilt valuation 1.
pub fn ker_theta_check(ainf: &Ainf, e_poly: &[i64]) -> Result<KerThetaReport> {
    let xi = ainf.eval_at_pi(e_poly);
    if !ainf.theta(&xi).is_zero() {
        return Err(Error::NotInKernel);
    }
    let valuation = ainf.tilt.valuation(&xi[0])?;
    if valuation != Valuation::integer(1) {
        return Err(Error::WrongValuation { expected: "1".into(), found: valuation.as_fraction() });
    }
    Ok(KerThetaReport { theta_is_zero: true, valuation })
}

/// Truncated `A_crys` (and `A_st` when `with_x`), over `Z/p^n`, pd-weight `<= cap`.
#[derive(Clone, Debug)]
pub struct PeriodRing {
    model: Arc<OModel>,
    alg: PdAlgebra,
    with_x: bool,
}

impl PeriodRing {
    pub fn acrys(model: Arc<OModel>, cap: u32) -> Result<Self> {
        Self::build(model, cap, false)
    }

    pub fn ast(model: Arc<OModel>, cap: u32) -> Result<Self> {
        Self::build(model, cap, true)
    }

    fn build(model: Arc<OModel>, cap: u32, with_x: bool) -> Result<Self> {
        if !model.cyclotomic {
            return Err(Error::ModelUnavailable("A_crys needs roots of unity".into()));
        }
        let deg = (model.e as u64 * model.p.pow(model.k)) as usize;
        let mut kummer = vec![0i64; deg + 1];
        kummer[0] = -(model.p as i64);
        kummer[deg] = 1;
        let anchors = vec![Anchor::new("u", "y", &cyclotomic_prime_power(model.p, model.k)), Anchor::new("v", "xi", &kummer)];
        let free = if with_x { vec!["X".to_string()] } else { vec![] };
        let alg = PdAlgebra::new(model.alg.base(), anchors, free, cap)?;
        Ok(PeriodRing { model, alg, with_x })
    }

    pub fn algebra(&self) -> &PdAlgebra {
        &self.alg
    }

    pub fn model(&self) -> &Arc<OModel> {
        &self.model
    }

    pub fn is_st(&self) -> bool {
        self.with_x
    }

    pub fn u(&self) -> PdElement {
        self.alg.x(0)
    }

    pub fn v(&self) -> PdElement {
        self.alg.x(1)
    }

    pub fn x(&self) -> Result<PdElement> {
        self.alg.pd_var("X")
    }

    /// `xi = E([pi^flat]) = E(v^{p^k})`.
    pub fn xi(&self) -> PdElement {
        self.alg.gamma_var(1, 1)
    }

    /// `[eps] - 1 = u^{p^k} - 1`.
    pub fn eps_minus_one(&self) -> PdElement {
        &self.u().pow(self.model.p.pow(self.model.k)) - &self.alg.one()
    }

    /// `(1 + t)^m` for any integer `m`, `t` in the pd-ideal:
    /// `sum_j m (m-1) ... (m-j+1) gamma_j(t)`.
    pub fn one_plus_pow(&self, t: &PdElement, m: i64) -> Result<PdElement> {
        let z = self.alg.base();
        let gs = t.gammas(self.alg.cap())?;
        let mut acc = self.alg.zero();
        let mut falling = 1u64 % z.modulus();
        for (j, g) in gs.iter().enumerate() {
            acc = &acc + &g.scale(falling);
            falling = z.mul(falling, z.from_i64(m - j as i64));
        }
        Ok(acc)
    }

    /// `u^m = u^r (1 + ([eps] - 1))^q` for `m = q p^k + r`.
    pub fn u_pow(&self, m: i64) -> Result<PdElement> {
        let pk = self.model.p.pow(self.model.k) as i64;
        let (q, r) = (m.div_euclid(pk), m.rem_euclid(pk));
        Ok(&self.u().pow(r as u64) * &self.one_plus_pow(&self.eps_minus_one(), q)?)
    }

    /// `log(1 + t) = sum_{j >= 1} (-1)^{j+1} (j-1)! gamma_j(t)` for `t` in `Fil^1`.
    pub fn log1p(&self, t: &PdElement) -> Result<PdElement> {
        if t.min_weight() == Some(0) {
            return Err(Error::Fil1Failure);
        }
        let z = self.alg.base();
        let gs = t.gammas(self.alg.cap())?;
        let mut acc = self.alg.zero();
        let mut fact = 1u64 % z.modulus();
        for (j, g) in gs.iter().enumerate().skip(1) {
            let c = if j % 2 == 1 { fact } else { z.neg(fact) };
            acc = &acc + &g.scale(c);
            fact = z.mul(fact, j as u64 % z.modulus());
        }
        Ok(acc)
    }

    /// `beta = log [eps]`.
    pub fn beta(&self) -> Result<PdElement> {
        self.log1p(&self.eps_minus_one())
    }

    /// `theta`: `Fil^0 / Fil^1 -> O/p^n`, `u -> zeta_{p^k}`, `v -> pi^{1/p^k}`.
    pub fn theta(&self, el: &PdElement) -> AlgebraElement {
        let alg = &self.model.alg;
        let a = alg.gen("a").unwrap();
        let b = alg.gen("b").unwrap();
        let mut out = alg.zero_elem();
        for (k, &c) in el.terms() {
            if k[2..].iter().any(|&e| e > 0) {
                continue;
            }
            out = &out + &(&a.pow(k[0] as u64) * &b.pow(k[1] as u64)).scale(c);
        }
        out
    }

    /// The `Fil^1 / Fil^2` coefficients of `el` on `gamma_1` of each pd-variable,
    /// sent to `O/p^n` by `theta`.
    pub fn gr1_coefficients(&self, el: &PdElement) -> Vec<AlgebraElement> {
        let w1 = el.weight_component(1);
        (0..self.alg.n_pd())
            .map(|j| {
                let part = w1.filter(|k| k[2 + j] == 1);
                let stripped = part.map_keys(|k| {
                    let mut k2 = k.to_vec();
                    k2[2 + j] = 0;
                    k2
                });
                self.theta(&stripped)
            })
            .collect()
    }

    /// `sigma` as a pd-algebra endomorphism.
    pub fn galois(&self, s: &GaloisElement) -> Result<PdHom> {
        self.model.check_galois(s)?;
        let xu = self.u_pow(s.chi)?;
        let ku = self.u_pow(s.kummer)?;
        let xv = &ku * &self.v();
        let mut free = vec![];
        if self.with_x {
            // sigma(X + 1) = ([pi] / sigma[pi]) (X + 1) with sigma[pi] / [pi] = [eps]^kummer
            let inv = self.one_plus_pow(&self.eps_minus_one(), -s.kummer)?;
            free.push(&(&inv * &(&self.x()? + &self.alg.one())) - &self.alg.one());
        }
        PdHom::new(&self.alg, &self.alg, vec![xu, xv], free).map_err(|e| Error::NotAnAutomorphism(e.to_string()))
    }

    /// Frobenius: `u -> u^p`, `v -> v^p`, `X + 1 -> (X + 1)^p`.
    pub fn frobenius(&self) -> Result<PdHom> {
        let p = self.model.p;
        let mut free = vec![];
        if self.with_x {
            let x1 = &self.x()? + &self.alg.one();
            free.push(&x1.pow(p) - &self.alg.one());
        }
        PdHom::new(&self.alg, &self.alg, vec![self.u().pow(p), self.v().pow(p)], free)
    }

    /// Monodromy: the `A_crys`-linear pd-derivation with `N(X) = 1 + X`.
    pub fn monodromy(&self, el: &PdElement) -> Result<PdElement> {
        if !self.with_x {
            return Err(Error::ModelUnavailable("monodromy lives on A_st".into()));
        }
        Ok(&(&self.x()? + &self.alg.one()) * &el.free_derivative(0))
    }

    /// `st(sigma) = log(sigma[pi] / [pi])`, with `[pi] = v^{p^k}`.
    pub fn st_cocycle(&self, s: &GaloisElement) -> Result<PdElement> {
        let hom = self.galois(s)?;
        let ratio_root = self.u_pow(s.kummer)?;
        if hom.apply(&self.v())? != &ratio_root * &self.v() {
            return Err(Error::NotKummerCompatible("sigma(v) is not a root of unity times v".into()));
        }
        let ratio = ratio_root.pow(self.model.p.pow(self.model.k));
        self.log1p(&(&ratio - &self.alg.one())).map_err(|_| Error::NotKummerCompatible("ratio is not 1 mod Fil^1".into()))
    }

    /// Reduce coefficients mod `p^m`.
    pub fn reduce(&self, el: &PdElement, m: u32) -> Result<PdElement> {
        let z = self.alg.base().with_precision(m)?;
        Ok(el.transfer(&self.alg.with_base(z, self.alg.cap())?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FontaineReport {
    pub p: u64,
    pub k: u32,
    /// `val(Phi_{p^k}'(zeta_{p^k}))`, which is the length of `Omega^1` of the model.
    pub derivative_valuation: Valuation,
    /// `1 - 1/(p-1)` when `k = 1`.
    pub expected: Option<Valuation>,
    /// Kernel elements have valuation at least `-1/(p-1)`.
    pub kernel_bound: Valuation,
}

/// Valuations around the sequence `0 -> a -> ... -> Omega^1 -> 0` for the
/// cyclotomic model `Z_p[zeta_{p^k}]`.
pub fn fontaine_sequence_valuations(p: u64, k: u32) -> Result<FontaineReport> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if k == 0 || (p - 1) * p.pow(k - 1) > 64 {
        return Err(Error::ModelUnavailable(format!("cyclotomic model for p^k = {p}^{k}")));
    }
    let cyc = cyclotomic_prime_power(p, k);
    let alg = make_finite_algebra(&Presentation::simple(p, k + 2, &[("a", &cyc)]))?;
    let zeta = alg.gen("a")?;
    let d = eval_univariate(&derivative(&cyc), &zeta);
    let derivative_valuation = d.valuation()?;
    let expected = (k == 1).then(|| Valuation::Exact(Ratio::from_integer(1) - Ratio::new(1, p as i64 - 1)));
    Ok(FontaineReport { p, k, derivative_valuation, expected, kernel_bound: Valuation::Exact(Ratio::new(-1, p as i64 - 1)) })
}

/// `Zmod` for the common precision `p^{min(n, k)}`.
pub fn comparison_ring(model: &OModel) -> Result<Zmod> {
    Zmod::new(model.p, model.n.min(model.k).max(1))
}
