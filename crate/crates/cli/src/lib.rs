//! Report-producing front end for `padic-ddr`.
//!
//! Every command returns a [`Report`]; the binary prints it and maps the verdict
//! to an exit code (0 pass, 1 verified failure, 2 configuration error).

use clap::{Args, Parser, Subcommand, ValueEnum};
use padic_ddr::derham::{verify_cartier, FreePrelogAlgebra};
use padic_ddr::derived::{
    comp_to_crystalline, conjugate_e1, crystalline_target, derived_dr_h0, divided_power_class, shuffle_product, BarResolution,
    SignConvention, DEFAULT_BASIS_LIMIT,
};
use padic_ddr::pd::{conjugate_filtration_pd, pd_envelope, dimension_table, span_dim, PdElement};
use padic_ddr::period::{fontaine_sequence_valuations, ker_theta_check, Ainf, GaloisElement, OModel, PeriodRing};
use padic_ddr::poly::PolyRing;
use padic_ddr::ring::Ring;
use padic_ddr::witt::WittRing;
use padic_ddr::zmod::is_prime;
use padic_ddr::{Error, Zmod};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA: &str = "padic-ddr-report/v1";
pub const DEFAULT_SEED: u64 = 0x5eed_2024;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "ddr", version, about = "Exact p-adic derived de Rham / crystalline computations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalOpts,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct GlobalOpts {
    /// Output format. CSV prints the command's dimension table.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Seed for randomized suites.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Refuse truncated complexes with more basis elements than this.
    #[arg(long, global = true, env = "DDR_MEMORY_GUARD", default_value_t = DEFAULT_BASIS_LIMIT)]
    pub memory_guard: usize,
}

impl Default for GlobalOpts {
    fn default() -> Self {
        GlobalOpts { format: Format::Json, seed: DEFAULT_SEED, memory_guard: DEFAULT_BASIS_LIMIT }
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct BarOpts {
    #[arg(long)]
    pub p: u64,
    /// `f` in `F_p[x]`: `x`, `x^3`, `2x^2`, a unit, or low-first coefficients `0,0,1`.
    #[arg(long, default_value = "x")]
    pub f: String,
    /// Highest bar level kept.
    #[arg(long, default_value_t = 3)]
    pub smax: usize,
    /// Highest internal weight kept.
    #[arg(long, default_value_t = 6)]
    pub degcap: u32,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct PeriodOpts {
    #[arg(long)]
    pub p: u64,
    /// Coefficients are taken mod p^n; needs n <= k + 1.
    #[arg(long, default_value_t = 2)]
    pub n: u32,
    /// Depth of the root systems (p^k-th roots).
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    /// Divided-power weight cap of A_crys / A_st.
    #[arg(long, default_value_t = 3)]
    pub m: u32,
    /// Ramification: K = Q_p(p^{1/e}).
    #[arg(long, default_value_t = 1)]
    pub e: u32,
    /// Cyclotomic character of sigma.
    #[arg(long, default_value_t = 2)]
    pub chi: i64,
    /// Kummer exponent of sigma: sigma(pi^{1/p^k}) = zeta^kummer pi^{1/p^k}.
    #[arg(long, default_value_t = 1)]
    pub kummer: i64,
    /// Second Galois element for the cocycle identity.
    #[arg(long, default_value_t = 5)]
    pub chi2: i64,
    #[arg(long, default_value_t = 2)]
    pub kummer2: i64,
    /// Random elements for ast-check.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeriodOp {
    Theta,
    Beta,
    StCocycle,
    AstCheck,
    FontaineVal,
}

#[derive(Clone, Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Verify the inverse Cartier isomorphism on `F_p[monoid, vars]`.
    ///
    /// Truncation: forms of total weight <= degcap; the cohomology is recomputed
    /// at degcap + p and must agree (otherwise the run fails).
    CartierCheck {
        #[arg(long)]
        p: u64,
        /// Polynomial generators, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "y")]
        vars: Vec<String>,
        /// Log (monoid) generators, comma separated.
        #[arg(long, value_delimiter = ',')]
        monoid: Vec<String>,
        #[arg(long, default_value_t = 8)]
        degcap: u32,
    },
    /// The pd-envelope of `(x_1, ..., x_r)` in `Z/p^n[x_1..x_r]`.
    ///
    /// Truncation: pd-weight <= cap. Conjugate ranks are reported only for
    /// levels i with i p + r (p - 1) <= cap.
    PdEnvelope {
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, default_value_t = 8)]
        cap: u32,
    },
    /// `H^0` of derived de Rham of `F_p[x]/(f)` over `F_p[x]` with its conjugate filtration.
    ///
    /// Truncation: bar levels <= smax, weights <= degcap; a rerun at
    /// (smax + 1, degcap + p) certifies the numbers; `exact_through` is the
    /// weight below which the level cut cannot matter.
    DerivedDr(BarOpts),
    /// Conjugate spectral sequence: `E_1` entries against the computed `gr_i`.
    ///
    /// Truncation as for derived-dr; entries with i > smax are out of range.
    ConjugateSs(BarOpts),
    /// The comparison map on `gamma_k(y)` and its multiplicativity.
    ///
    /// Truncation as for derived-dr; images live in the pd-envelope capped at
    /// weight degcap.
    CompMap {
        #[command(flatten)]
        bar: BarOpts,
        /// Highest divided power of the generator to map.
        #[arg(long, default_value_t = 2)]
        kmax: usize,
    },
    /// Ghost-homomorphism suite for `W_n(Z/p^6)`, with `FV = p` and Teichmuller checks.
    ///
    /// Truncation: Witt length <= n; coefficients mod p^6.
    WittTest {
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        cases: usize,
    },
    /// Period-ring identities at finite precision.
    ///
    /// Truncation: coefficients mod p^n, roots of depth k, pd-weight <= m.
    /// Galois identities are compared mod p^{min(n,k)}; Frobenius identities
    /// below weight m.
    Period {
        #[command(flatten)]
        opts: PeriodOpts,
        #[arg(long, value_enum)]
        op: PeriodOp,
    },
    /// `val(Phi_{p^k}'(zeta_{p^k}))` and the kernel bound `-1/(p-1)`.
    ///
    /// Truncation: computed in Z_p[zeta] mod p^{k+2}, which is exact here.
    FontaineVal {
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        k: u32,
    },
    /// `N phi = p phi N` on A_st.
    ///
    /// Truncation as for `period`; compared below weight m.
    AstCheck(PeriodOpts),
    /// A fixed battery of small runs of every command.
    ///
    /// Uses the global seed; output is byte-identical for identical seeds.
    Selftest,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub config: Value,
    pub results: Value,
    /// Truncation and certification flags.
    pub flags: Value,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pass: bool,
    #[serde(skip)]
    pub table: Option<Table>,
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    fn new(command: &str, config: Value) -> Self {
        Report {
            schema: SCHEMA,
            command: command.into(),
            config,
            results: json!({}),
            flags: json!({}),
            checks: vec![],
            error: None,
            pass: true,
            table: None,
        }
    }

    fn check(&mut self, name: &str, pass: bool) {
        self.checks.push(Check { name: name.into(), pass });
        self.pass &= pass;
    }

    fn fail(mut self, e: Error) -> Self {
        self.error = Some(e.to_string());
        self.pass = false;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        match &self.table {
            Some(t) => {
                s.push_str(&t.header.join(","));
                s.push('\n');
                for r in &t.rows {
                    s.push_str(&r.join(","));
                    s.push('\n');
                }
            }
            None => {
                s.push_str("check,pass\n");
                for c in &self.checks {
                    s.push_str(&format!("{},{}\n", c.name, c.pass));
                }
            }
        }
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Errors caused by the request itself rather than by a failed verification.
pub fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::NotPrime(_)
            | Error::ModulusTooLarge { .. }
            | Error::CapTooSmall { .. }
            | Error::WindowTooWide { .. }
            | Error::PrecisionExceedsDepth { .. }
            | Error::ModelUnavailable(_)
            | Error::UnsupportedPresentation(_)
            | Error::NotRegularSequence(_)
            | Error::OutOfStableRange(_)
            | Error::NotField
            | Error::NotAnAutomorphism(_)
            | Error::Parse(_)
    )
}

/// Run `body`; configuration errors propagate, other library errors become a
/// failing report.
fn guarded(report: Report, body: impl FnOnce(&mut Report) -> padic_ddr::Result<()>) -> Result<Report, CliError> {
    let mut r = report;
    match body(&mut r) {
        Ok(()) => Ok(r),
        Err(e) if is_config_error(&e) => Err(config_err(e.to_string())),
        Err(e) => Ok(r.fail(e)),
    }
}

fn check_prime(p: u64) -> Result<(), CliError> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(config_err(format!("p = {p} is not prime")))
    }
}

/// Parse `f` as `c*x^e`-style monomials summed with `+`, or a coefficient list.
pub fn parse_f(s: &str) -> Result<Vec<i64>, CliError> {
    let s = s.replace(' ', "");
    if s.contains(',') {
        return s.split(',').map(|t| t.parse::<i64>().map_err(|_| config_err(format!("bad coefficient `{t}`")))).collect();
    }
    let mut coeffs: Vec<i64> = vec![0];
    for term in s.split('+') {
        let (c, e) = match term.find('x') {
            None => (term.parse::<i64>().map_err(|_| config_err(format!("bad term `{term}`")))?, 0usize),
            Some(i) => {
                let c = term[..i].trim_end_matches('*');
                let c = match c {
                    "" => 1,
                    "-" => -1,
                    _ => c.parse::<i64>().map_err(|_| config_err(format!("bad coefficient in `{term}`")))?,
                };
                let rest = &term[i + 1..];
                let e = if rest.is_empty() {
                    1
                } else {
                    rest.strip_prefix('^').and_then(|t| t.parse::<usize>().ok()).ok_or_else(|| config_err(format!("bad exponent in `{term}`")))?
                };
                (c, e)
            }
        };
        if coeffs.len() <= e {
            coeffs.resize(e + 1, 0);
        }
        coeffs[e] += c;
    }
    Ok(coeffs)
}

pub fn run(command: &Command, global: &GlobalOpts) -> Result<Report, CliError> {
    match command {
        Command::CartierCheck { p, vars, monoid, degcap } => cartier_check(*p, vars, monoid, *degcap),
        Command::PdEnvelope { p, n, r, cap } => pd_envelope_report(*p, *n, *r, *cap),
        Command::DerivedDr(o) => derived_dr(o, global),
        Command::ConjugateSs(o) => conjugate_ss(o, global),
        Command::CompMap { bar, kmax } => comp_map(bar, *kmax),
        Command::WittTest { p, n, cases } => witt_test(*p, *n, *cases, global.seed),
        Command::Period { opts, op } => period(opts, *op, global.seed),
        Command::FontaineVal { p, k } => fontaine_val(*p, *k),
        Command::AstCheck(o) => period(o, PeriodOp::AstCheck, global.seed),
        Command::Selftest => selftest(global),
    }
}

fn cartier_check(p: u64, vars: &[String], monoid: &[String], degcap: u32) -> Result<Report, CliError> {
    check_prime(p)?;
    if degcap == 0 || vars.len() + monoid.len() == 0 {
        return Err(config_err("need at least one generator and a positive degcap"));
    }
    let cfg = json!({"p": p, "vars": vars, "monoid": monoid, "degcap": degcap});
    guarded(Report::new("cartier-check", cfg), |r| {
        let poly: Vec<&str> = vars.iter().map(String::as_str).collect();
        let mon: Vec<&str> = monoid.iter().map(String::as_str).collect();
        let alg = FreePrelogAlgebra::new(Zmod::field(p)?, &mon, &poly, degcap);
        let rep = verify_cartier(&alg)?;
        r.results = json!({"h_dims": rep.h_dims(), "rows": rep.rows});
        r.flags = json!({"degree_cap": degcap, "stable": rep.stable});
        r.check("cartier_bijective", rep.pass);
        r.check("stable_under_cap_increase", rep.stable);
        let mut t = Table { header: "weight,degree,dim_h,dim_twist,image_rank,bijective".split(',').map(String::from).collect(), rows: vec![] };
        for row in &rep.rows {
            t.rows.push(vec![row.weight, row.degree, row.dim_h as u32, row.dim_twist as u32, row.image_rank as u32].iter().map(|v| v.to_string()).chain([row.bijective.to_string()]).collect());
        }
        r.table = Some(t);
        Ok(())
    })
}

fn pd_envelope_report(p: u64, n: u32, r: usize, cap: u32) -> Result<Report, CliError> {
    check_prime(p)?;
    if n == 0 || cap == 0 || r == 0 || r > 4 {
        return Err(config_err("need n >= 1, cap >= 1 and 1 <= r <= 4"));
    }
    let cfg = json!({"p": p, "n": n, "r": r, "cap": cap});
    guarded(Report::new("pd-envelope", cfg), |rep| {
        let z = Zmod::new(p, n)?;
        let names: Vec<String> = (1..=r).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let ring = PolyRing::new(z, p, &refs);
        let seq: Vec<_> = refs.iter().map(|v| ring.var(v)).collect::<padic_ddr::Result<_>>()?;
        let env = pd_envelope(&ring, &seq, cap)?;
        let dims = env.dims_by_weight();
        // Kunneth: convolve the one-variable table (one gamma_k per weight) r times
        let one = vec![1usize; cap as usize + 1];
        let mut expected = one.clone();
        for _ in 1..r {
            expected = (0..one.len()).map(|w| (0..=w).map(|i| expected[i] * one[w - i]).sum()).collect();
        }
        rep.check("kunneth_dimensions", dims == expected);
        let mut conj = Vec::new();
        if n == 1 {
            if r == 1 {
                let x = env.pd_var("x1")?;
                let mut els = Vec::new();
                for i in 0..=cap / p as u32 {
                    for j in 0..p {
                        if i * p as u32 + j as u32 <= cap {
                            els.push(&x.pow(j) * &env.gamma_var(0, i * p as u32));
                        }
                    }
                }
                let basis = env.basis();
                rep.check("direct_sum_basis", els.len() == basis.len() && span_dim(&els, &basis) == basis.len());
            }
            let mut i = 0;
            while i * p as u32 + r as u32 * (p as u32 - 1) <= cap {
                let lvl = conjugate_filtration_pd(&env, i)?;
                rep.check(&format!("conjugate_rank_{i}"), lvl.gr_rank == lvl.expected_rank);
                conj.push(lvl);
                i += 1;
            }
        }
        rep.results = json!({"dims_by_weight": dims, "dimension_table": dimension_table(&env), "conjugate": conj});
        rep.flags = json!({"pd_weight_cap": cap, "precision": n});
        rep.table = Some(Table {
            header: vec!["weight".into(), "dim".into()],
            rows: dims.iter().enumerate().map(|(w, d)| vec![w.to_string(), d.to_string()]).collect(),
        });
        Ok(())
    })
}


fn bar_resolution(o: &BarOpts) -> Result<(BarResolution, Value), CliError> {
    check_prime(o.p)?;
    if o.smax == 0 || o.degcap == 0 {
        return Err(config_err("smax and degcap must be positive"));
    }
    let f = parse_f(&o.f)?;
    let res = BarResolution::new(Zmod::field(o.p).map_err(|e| config_err(e.to_string()))?, &f, o.smax).map_err(|e| config_err(e.to_string()))?;
    let cfg = json!({"p": o.p, "f": o.f, "f_coeffs": f, "smax": o.smax, "degcap": o.degcap});
    Ok((res, cfg))
}

fn comp_image(res: &BarResolution, k: usize, cap: u32) -> padic_ddr::Result<PdElement> {
    let d = crystalline_target(res, cap)?;
    Ok(comp_to_crystalline(res, &divided_power_class(res, k), SignConvention::default())?.transfer(&d))
}

fn derived_dr(o: &BarOpts, g: &GlobalOpts) -> Result<Report, CliError> {
    let (res, cfg) = bar_resolution(o)?;
    guarded(Report::new("derived-dr", cfg), |r| {
        let h = derived_dr_h0(&res, o.degcap, g.memory_guard)?;
        let e1: Vec<Value> = (0..=o.smax as u32)
            .filter_map(|i| conjugate_e1(&res, i, -(i as i32), o.degcap).ok().map(|d| json!({"i": i, "q": -(i as i32), "dim": d})))
            .collect();
        let comp = if res.is_unit() { None } else { Some(comp_image(&res, 1, o.degcap)?.to_string()) };
        r.results = json!({"gr": h.gr, "dim": h.dim, "weights": h.weights, "e1": e1, "comp_generator": comp});
        r.flags = json!({"s_max": o.smax, "deg_cap": o.degcap, "exact_through": h.exact_through, "certified": h.certified});
        r.table = Some(Table {
            header: std::iter::once("weight".to_string()).chain(std::iter::once("dim".into())).chain((0..=o.smax).map(|i| format!("gr{i}"))).collect(),
            rows: h.weights.iter().map(|w| [w.weight as usize, w.dim].into_iter().chain(w.gr.iter().copied()).map(|v| v.to_string()).collect()).collect(),
        });
        Ok(())
    })
}

fn conjugate_ss(o: &BarOpts, g: &GlobalOpts) -> Result<Report, CliError> {
    let (res, cfg) = bar_resolution(o)?;
    guarded(Report::new("conjugate-ss", cfg), |r| {
        let h = derived_dr_h0(&res, o.degcap, g.memory_guard)?;
        let mut rows = Vec::new();
        let mut t = Table { header: vec!["i".into(), "q".into(), "e1".into(), "gr".into()], rows: vec![] };
        for i in 0..=o.smax as u32 {
            let Ok(e1) = conjugate_e1(&res, i, -(i as i32), o.degcap) else { break };
            let gr = h.gr[i as usize];
            rows.push(json!({"i": i, "q": -(i as i32), "e1": e1, "gr": gr}));
            t.rows.push(vec![i.to_string(), (-(i as i32)).to_string(), e1.to_string(), gr.to_string()]);
            if h.certified && i as u32 <= h.exact_through {
                r.check(&format!("degenerates_at_{i}"), e1 == gr);
            }
        }
        r.results = json!({"entries": rows});
        r.flags = json!({"s_max": o.smax, "deg_cap": o.degcap, "exact_through": h.exact_through, "certified": h.certified});
        r.table = Some(t);
        Ok(())
    })
}

fn comp_map(o: &BarOpts, kmax: usize) -> Result<Report, CliError> {
    let (res, cfg) = bar_resolution(o)?;
    if kmax == 0 || kmax > o.smax {
        return Err(config_err("need 1 <= kmax <= smax"));
    }
    if res.is_unit() {
        return Err(config_err("f is a unit: the quotient is zero"));
    }
    let mut cfg = cfg;
    cfg["kmax"] = json!(kmax);
    guarded(Report::new("comp-map", cfg), |r| {
        let d = crystalline_target(&res, o.degcap)?;
        let y = divided_power_class(&res, 1);
        let cy = comp_image(&res, 1, o.degcap)?;
        let mut images = Vec::new();
        let mut power = y.clone();
        for k in 1..=kmax {
            let img = comp_image(&res, k, o.degcap)?;
            images.push(json!({"k": k, "image": img.to_string()}));
            r.check(&format!("divided_power_{k}"), img == cy.gamma(k as u32)?);
            if k > 1 {
                power = shuffle_product(&res, &power, &y);
                let lhs = comp_to_crystalline(&res, &power, SignConvention::default())?.transfer(&d);
                r.check(&format!("multiplicative_{k}"), lhs == cy.pow(k as u64));
            }
        }
        r.results = json!({"images": images});
        r.flags = json!({"s_max": o.smax, "pd_weight_cap": o.degcap, "sign_convention": "column-parity"});
        Ok(())
    })
}

/// `w_i = sum_{j <= i} p^j a_j^{p^{i-j}}`, straight from the definition.
fn ghost(z: &Zmod, a: &[u64]) -> Vec<u64> {
    let p = z.p();
    (0..a.len()).map(|i| (0..=i).fold(0, |acc, j| z.add(acc, z.mul(z.pow(p, j as u64), z.pow(a[j], p.pow((i - j) as u32)))))).collect()
}

fn witt_test(p: u64, n: usize, cases: usize, seed: u64) -> Result<Report, CliError> {
    check_prime(p)?;
    if n == 0 || n > 3 {
        return Err(config_err("Witt length must be 1..=3"));
    }
    let z = Zmod::new(p, 6).map_err(|e| config_err(e.to_string()))?;
    let cfg = json!({"p": p, "n": n, "cases": cases, "seed": seed, "coefficients": format!("Z/{p}^6")});
    guarded(Report::new("witt-test", cfg), |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut sum, mut prod, mut neg, mut fv, mut teich) = (0usize, 0usize, 0usize, 0usize, 0usize);
        for _ in 0..cases {
            let len = rng.gen_range(1..=n);
            let w = WittRing::new(z, p, len);
            let a: Vec<u64> = (0..len).map(|_| rng.gen_range(0..z.modulus())).collect();
            let b: Vec<u64> = (0..len).map(|_| rng.gen_range(0..z.modulus())).collect();
            let (ga, gb) = (ghost(&z, &a), ghost(&z, &b));
            let gs: Vec<u64> = ga.iter().zip(&gb).map(|(x, y)| z.add(*x, *y)).collect();
            let gp: Vec<u64> = ga.iter().zip(&gb).map(|(x, y)| z.mul(*x, *y)).collect();
            sum += (ghost(&z, &w.add(&a, &b)) != gs) as usize;
            prod += (ghost(&z, &w.mul(&a, &b)) != gp) as usize;
            neg += (ghost(&z, &w.neg(&a)) != ga.iter().map(|x| z.neg(*x)).collect::<Vec<_>>()) as usize;
            let long = WittRing::new(z, p, len + 1);
            let fva = long.frobenius(&long.verschiebung(&a)?)?;
            fv += (fva != w.mul(&w.from_i64(p as i64), &a)) as usize;
            let (x, y) = (a[0], b[0]);
            teich += (w.mul(&w.teichmuller(&x), &w.teichmuller(&y)) != w.teichmuller(&z.mul(x, y))) as usize;
        }
        r.results = json!({"failures": {"ghost_sum": sum, "ghost_product": prod, "ghost_negation": neg, "frobenius_verschiebung": fv, "teichmuller": teich}});
        r.flags = json!({"max_length": n, "precision": 6});
        r.check("ghost_homomorphism", sum + prod + neg == 0);
        r.check("frobenius_after_verschiebung_is_p", fv == 0);
        r.check("teichmuller_multiplicative", teich == 0);
        Ok(())
    })
}

fn period(o: &PeriodOpts, op: PeriodOp, seed: u64) -> Result<Report, CliError> {
    check_prime(o.p)?;
    if op == PeriodOp::FontaineVal {
        return fontaine_val(o.p, o.k);
    }
    if o.n == 0 || o.k == 0 || o.m == 0 || o.e == 0 {
        return Err(config_err("n, k, m, e must be positive"));
    }
    if o.n > o.k + 1 {
        return Err(config_err(Error::PrecisionExceedsDepth { n: o.n, limit: o.k + 1 }.to_string()));
    }
    let name = match op {
        PeriodOp::Theta => "period/theta",
        PeriodOp::Beta => "period/beta",
        PeriodOp::StCocycle => "period/st-cocycle",
        PeriodOp::AstCheck => "ast-check",
        PeriodOp::FontaineVal => unreachable!(),
    };
    let cfg = serde_json::to_value(o).expect("config serializes");
    let p = o.p;
    let lvl = o.n.min(o.k);
    guarded(Report::new(name, cfg), |r| {
        r.flags = json!({"precision": o.n, "depth": o.k, "pd_weight_cap": o.m, "galois_precision": lvl});
        match op {
            PeriodOp::Theta => {
                let model = OModel::new(p, o.n, o.k, o.e, false)?;
                let a = Ainf::new(model.clone())?;
                let tp = a.theta(&a.teichmuller(&a.tilt().p_flat()));
                r.check("theta_of_p_flat_is_p", tp == model.algebra().scalar(p as i64));
                let mut eis = vec![0i64; o.e as usize + 1];
                eis[0] = -(p as i64);
                eis[o.e as usize] = 1;
                let kr = ker_theta_check(&a, &eis);
                r.check("E_of_pi_flat_generates_kernel", kr.is_ok());
                r.results = json!({
                    "theta_p_flat": {"value": tp.to_string(), "coords": tp.coords()},
                    "eisenstein": eis,
                    "ker_theta": kr.as_ref().ok(),
                    "ker_theta_error": kr.as_ref().err().map(|e| e.to_string()),
                });
            }
            PeriodOp::Beta => {
                let model = OModel::new(p, o.n, o.k, o.e, true)?;
                let ring = PeriodRing::acrys(model, o.m)?;
                let y = ring.eps_minus_one();
                let beta = ring.beta()?;
                let v = ring.gr1_coefficients(&y)[0].valuation()?;
                let s = GaloisElement { chi: o.chi, kummer: o.kummer };
                let lhs = ring.galois(&s)?.apply(&beta)?;
                let rhs = beta.scale(ring.algebra().base().from_i64(o.chi));
                let eq = ring.reduce(&lhs, lvl)? == ring.reduce(&rhs, lvl)?;
                r.check("eps_minus_one_in_fil1", y.min_weight().map_or(true, |w| w >= 1));
                r.check("val_eps1_minus_one", v == padic_ddr::Valuation::ratio(1, p as i64 - 1));
                r.check("sigma_beta_is_chi_beta", eq);
                r.results = json!({"beta": beta.to_string(), "val_eps1_minus_one": v, "sigma": s});
            }
            PeriodOp::StCocycle => {
                let model = OModel::new(p, o.n, o.k, o.e, true)?;
                let ring = PeriodRing::acrys(model, o.m)?;
                let s = GaloisElement { chi: o.chi, kummer: o.kummer };
                let t = GaloisElement { chi: o.chi2, kummer: o.kummer2 };
                let (ss, st) = (ring.st_cocycle(&s)?, ring.st_cocycle(&t)?);
                let comp = ring.st_cocycle(&s.compose(&t))?;
                let rhs = &ss + &ring.galois(&s)?.apply(&st)?;
                r.check("cocycle_identity", ring.reduce(&comp, lvl)? == ring.reduce(&rhs, lvl)?);
                let fixing = ring.st_cocycle(&GaloisElement { chi: o.chi, kummer: 0 })?;
                r.check("root_fixing_is_zero", fixing.is_zero());
                r.results = json!({"st_sigma": ss.to_string(), "st_tau": st.to_string(), "st_sigma_tau": comp.to_string(), "sigma": s, "tau": t});
            }
            PeriodOp::AstCheck => {
                let model = OModel::new(p, o.n, o.k, o.e, true)?;
                let ring = PeriodRing::ast(model, o.m)?;
                let phi = ring.frobenius()?;
                let cut = o.m - 1;
                let holds = |a: &PdElement| -> padic_ddr::Result<bool> {
                    let lhs = ring.monodromy(&phi.apply(a)?)?;
                    let rhs = phi.apply(&ring.monodromy(a)?)?.scale(p);
                    Ok(lhs.truncate(cut) == rhs.truncate(cut))
                };
                let x1 = &ring.x()? + &ring.algebra().one();
                r.check("n_phi_on_x_plus_one", holds(&x1)?);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let basis = ring.algebra().basis();
                let modulus = ring.algebra().base().modulus();
                let mut bad = 0;
                for _ in 0..o.samples {
                    let el = (0..4).fold(ring.algebra().zero(), |acc, _| {
                        &acc + &ring.algebra().basis_element(&basis[rng.gen_range(0..basis.len())], rng.gen_range(1..modulus))
                    });
                    bad += (!holds(&el)?) as usize;
                }
                r.check("n_phi_on_random_elements", bad == 0);
                r.results = json!({"samples": o.samples, "failures": bad, "compared_below_weight": o.m});
            }
            PeriodOp::FontaineVal => unreachable!(),
        }
        Ok(())
    })
}

fn fontaine_val(p: u64, k: u32) -> Result<Report, CliError> {
    check_prime(p)?;
    guarded(Report::new("fontaine-val", json!({"p": p, "k": k})), |r| {
        let f = fontaine_sequence_valuations(p, k)?;
        if let Some(exp) = &f.expected {
            r.check("matches_1_minus_1_over_p_minus_1", &f.derivative_valuation == exp);
        }
        r.flags = json!({"precision": k + 2, "exact": f.derivative_valuation.is_exact()});
        r.results = serde_json::to_value(&f).expect("serializes");
        Ok(())
    })
}

/// The fixed battery run by `selftest`.
pub fn selftest_commands() -> Vec<Command> {
    let bar = |p, f: &str, smax, degcap| BarOpts { p, f: f.into(), smax, degcap };
    let per = |p, n, k, m, e| PeriodOpts { p, n, k, m, e, chi: 2, kummer: 1, chi2: 5, kummer2: 2, samples: 10 };
    vec![
        Command::CartierCheck { p: 2, vars: vec!["y".into()], monoid: vec![], degcap: 8 },
        Command::CartierCheck { p: 3, vars: vec!["y".into()], monoid: vec!["x".into()], degcap: 6 },
        Command::PdEnvelope { p: 3, n: 1, r: 2, cap: 8 },
        Command::DerivedDr(bar(2, "x", 3, 6)),
        Command::ConjugateSs(bar(3, "x", 5, 5)),
        Command::CompMap { bar: bar(3, "x", 3, 9), kmax: 3 },
        Command::WittTest { p: 3, n: 3, cases: 100 },
        Command::Period { opts: per(3, 2, 2, 3, 2), op: PeriodOp::Theta },
        Command::Period { opts: per(3, 2, 2, 3, 1), op: PeriodOp::Beta },
        Command::Period { opts: per(3, 2, 2, 3, 1), op: PeriodOp::StCocycle },
        Command::AstCheck(per(3, 2, 1, 3, 1)),
        Command::FontaineVal { p: 3, k: 1 },
    ]
}

fn selftest(g: &GlobalOpts) -> Result<Report, CliError> {
    let mut r = Report::new("selftest", json!({"seed": g.seed}));
    let mut reports = Vec::new();
    for c in selftest_commands() {
        let rep = run(&c, g)?;
        r.check(&rep.command, rep.pass);
        reports.push(rep);
    }
    r.results = json!({"reports": reports});
    Ok(r)
}
