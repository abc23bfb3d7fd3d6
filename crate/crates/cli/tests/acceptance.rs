//! One line per acceptance criterion, with pinned time limits. Exits non-zero
//! if any criterion fails.

use std::process::Command as Proc;
use std::time::{Duration, Instant};

use padic_ddr::derham::{verify_cartier, FreePrelogAlgebra};
use padic_ddr::derived::{comp_to_crystalline, crystalline_target, derived_dr_h0, divided_power_class, BarResolution, SignConvention, DEFAULT_BASIS_LIMIT};
use padic_ddr::pd::{conjugate_filtration_pd, iterated_gamma_iso, pd_envelope, span_dim, PdAlgebra};
use padic_ddr::poly::PolyRing;
use padic_ddr::Zmod;
use padic_ddr_cli::{run, Command, GlobalOpts, PeriodOp, PeriodOpts};

type Outcome = Result<(), String>;

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn cli(cmd: Command) -> Outcome {
    let name = format!("{cmd:?}");
    let r = run(&cmd, &GlobalOpts::default()).map_err(|e| format!("{name}: {e}"))?;
    let failed: Vec<_> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    ensure(r.pass, || format!("{} failed {failed:?} {:?}", r.command, r.error))
}

fn binom(n: u64, k: u64) -> usize {
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1)) as usize
}

fn criterion_1() -> Outcome {
    let shapes: [(&[&str], &[&str]); 5] = [(&[], &["y"]), (&[], &["y", "z"]), (&["x"], &[]), (&["x"], &["y"]), (&["x"], &["y", "z"])];
    for p in [2u64, 3, 5] {
        for (mon, poly) in shapes {
            let a = FreePrelogAlgebra::new(Zmod::field(p).unwrap(), mon, poly, 12);
            let rep = verify_cartier(&a).map_err(|e| format!("p={p} {mon:?}{poly:?}: {e}"))?;
            ensure(rep.stable && rep.pass, || format!("p={p} {mon:?}{poly:?} not bijective"))?;
            ensure(rep.rows.iter().all(|r| r.dim_h == r.dim_twist && r.image_rank == r.dim_twist), || format!("p={p} dimension mismatch"))?;
        }
    }
    Ok(())
}

fn criterion_2() -> Outcome {
    for p in [2u64, 3] {
        let smax = (2 * p as usize - 1).max(3);
        let res = BarResolution::new(Zmod::field(p).unwrap(), &[0, 1], smax).unwrap();
        let h = derived_dr_h0(&res, 2 * p as u32 - 1, DEFAULT_BASIS_LIMIT).map_err(|e| e.to_string())?;
        ensure(h.certified, || format!("p={p}: not certified"))?;
        ensure(h.gr[0] == p as usize && h.gr[1] == p as usize, || format!("p={p}: gr = {:?}", h.gr))?;
        let d = crystalline_target(&res, 3 * p as u32).unwrap();
        let img = comp_to_crystalline(&res, &divided_power_class(&res, 1), SignConvention::default()).map_err(|e| e.to_string())?.transfer(&d);
        ensure(img == -&d.gamma_var(0, p as u32), || format!("p={p}: Comp(y) = {img}"))?;
    }
    Ok(())
}

fn criterion_3() -> Outcome {
    for p in [2u64, 3, 5] {
        let z = Zmod::field(p).unwrap();
        let cap = 3 * p as u32 + p as u32 - 1;
        let a = PdAlgebra::envelope_of_variable(z, "x", cap).unwrap();
        let x = a.pd_var("x").unwrap();
        let els: Vec<_> = (0..=3).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| &x.pow(j) * &a.gamma_var(0, i * p as u32)).collect();
        let basis = a.basis();
        ensure(els.len() == basis.len() && span_dim(&els, &basis) == basis.len(), || format!("p={p}: direct sum mismatch"))?;
        for r in [1usize, 2, 3] {
            let names: Vec<String> = (0..r).map(|i| format!("t{i}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let ring = PolyRing::new(z, p, &refs);
            let seq: Vec<_> = refs.iter().map(|v| ring.var(v).unwrap()).collect();
            let cap = 2 * p as u32 + r as u32 * (p as u32 - 1);
            let env = pd_envelope(&ring, &seq, cap).map_err(|e| e.to_string())?;
            let expected: Vec<usize> = (0..=cap as u64).map(|w| binom(w + r as u64 - 1, r as u64 - 1)).collect();
            ensure(env.dims_by_weight() == expected, || format!("p={p} r={r}: Kunneth"))?;
            for i in 0..=2u32 {
                let lvl = conjugate_filtration_pd(&env, i).map_err(|e| e.to_string())?;
                let want = binom(i as u64 + r as u64 - 1, r as u64 - 1);
                ensure(lvl.gr_rank == want, || format!("p={p} r={r} i={i}: rank {} != {want}", lvl.gr_rank))?;
            }
        }
    }
    Ok(())
}

fn criterion_4() -> Outcome {
    for (p, r) in [(2u64, 2u32), (3, 1)] {
        let iso = iterated_gamma_iso(r, p, (p as u32).pow(r + 1) - 1).map_err(|e| e.to_string())?;
        ensure(iso.is_bijective(), || format!("(p,r)=({p},{r}): rank {} of {}", iso.rank, iso.target_dim))?;
    }
    Ok(())
}

fn criterion_5() -> Outcome {
    for p in [2u64, 3, 5] {
        cli(Command::WittTest { p, n: 3, cases: 500 })?;
    }
    Ok(())
}

fn per(p: u64, n: u32, k: u32, m: u32, e: u32) -> PeriodOpts {
    PeriodOpts { p, n, k, m, e, chi: 2, kummer: 1, chi2: 5, kummer2: 2, samples: 50 }
}

fn criterion_6() -> Outcome {
    for p in [2u64, 3, 5] {
        cli(Command::Period { opts: per(p, 2, 2, 2, 1), op: PeriodOp::Theta })?;
    }
    for p in [3u64, 5] {
        cli(Command::Period { opts: per(p, 2, 2, 2, 2), op: PeriodOp::Theta })?;
    }
    Ok(())
}

fn criterion_7() -> Outcome {
    for p in [2u64, 3] {
        for (chi, kummer) in [(1, 1), (5, 0), (7, 3), (-1, 2)] {
            cli(Command::Period { opts: PeriodOpts { chi, kummer, ..per(p, 2, 2, 3, 1) }, op: PeriodOp::Beta })?;
        }
    }
    Ok(())
}

fn criterion_8() -> Outcome {
    for p in [3u64, 5] {
        cli(Command::FontaineVal { p, k: 1 })?;
    }
    Ok(())
}

fn criterion_9() -> Outcome {
    for p in [2u64, 3] {
        cli(Command::AstCheck(per(p, 2, 1, 3, 1)))?;
        cli(Command::Period { opts: PeriodOpts { chi: 5, kummer: 1, chi2: 7, kummer2: 3, ..per(p, 2, 2, 3, 1) }, op: PeriodOp::StCocycle })?;
    }
    Ok(())
}

fn criterion_10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_ddr");
    let once = || Proc::new(bin).args(["selftest", "--seed", "12345"]).output().map_err(|e| e.to_string());
    let (a, b) = (once()?, once()?);
    ensure(a.status.success() && b.status.success(), || "selftest did not pass".into())?;
    ensure(!a.stdout.is_empty() && a.stdout == b.stdout, || "reports differ".into())?;
    let other = Proc::new(bin).args(["selftest", "--seed", "54321"]).output().map_err(|e| e.to_string())?;
    ensure(other.stdout != a.stdout, || "seed is ignored".into())
}

fn main() {
    let criteria: [(u32, &str, u64, fn() -> Outcome); 10] = [
        (1, "Cartier isomorphism, p in {2,3,5}, cap 12", 30, criterion_1),
        (2, "derived dR = crystalline base case, Comp(y) = -gamma_p(x)", 60, criterion_2),
        (3, "pd-envelope basis, Kunneth, conjugate ranks", 10, criterion_3),
        (4, "iterated gamma isomorphism", 5, criterion_4),
        (5, "Witt ghost suite, FV = p, Teichmuller", 10, criterion_5),
        (6, "theta and ker theta", 10, criterion_6),
        (7, "beta: Fil^1, val(eps_1 - 1), Galois equivariance", 10, criterion_7),
        (8, "Fontaine derivative valuation", 5, criterion_8),
        (9, "A_st monodromy and st cocycle", 20, criterion_9),
        (10, "selftest determinism", 60, criterion_10),
    ];
    let mut failures = 0;
    for (id, what, limit, f) in criteria {
        let t = Instant::now();
        let out = f();
        let dt = t.elapsed();
        let within = dt <= Duration::from_secs(limit);
        let ok = out.is_ok() && within;
        failures += !ok as u32;
        let detail = match (&out, within) {
            (Err(e), _) => format!(" -- {e}"),
            (Ok(()), false) => " -- over time limit".to_string(),
            _ => String::new(),
        };
        println!("criterion {id:>2}: {} [{:.2}s / {limit}s] {what}{detail}", if ok { "PASS" } else { "FAIL" }, dt.as_secs_f64());
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
