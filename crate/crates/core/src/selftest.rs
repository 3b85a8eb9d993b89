//! Invariant suite run by `ergolab selftest`.

use rand::{Rng, RngExt};

use crate::circle::uniform_grid;
use crate::config::RunConfig;
use crate::dadic::DadicInt;
use crate::error::Result;
use crate::hfamily::{default_words, Cohomology, Outcome};
use crate::linearization::{ks_critical, ks_uniform, mu_samples, xi, Conjugacy, Linearization};
use crate::optimizer::{beta_periodic, iterate_equivalence, lax_oleinik};
use crate::rng::stream;

const KS_SAMPLES: usize = 20_000;
const IDENTITY_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value < threshold`.
    fn below(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            threshold,
            passed: value < threshold,
        }
    }
}

fn all_elements(base: u32, depth: usize) -> Vec<DadicInt> {
    let count = (base as u64).pow(depth as u32);
    (0..count).map(|m| DadicInt::iota(m, base, depth)).collect()
}

/// Counts failures of the abelian group axioms on `Σ_d` truncated at `depth`:
/// commutativity, identity, inverses and `ι(m)+ι(n) = ι(m+n)` over all pairs,
/// associativity over `n_triples` random triples.
pub fn group_axiom_violations<R: Rng + ?Sized>(base: u32, depth: usize, n_triples: usize, rng: &mut R) -> Result<usize> {
    let elems = all_elements(base, depth);
    let zero = DadicInt::zero(base, depth);
    let modulus = elems.len() as u64;
    let mut bad = 0;
    for (m, a) in elems.iter().enumerate() {
        if a.add(&zero)? != *a || !a.add(&a.neg())?.is_zero() {
            bad += 1;
        }
        for (n, b) in elems.iter().enumerate() {
            let ab = a.add(b)?;
            if ab != b.add(a)? || ab != elems[((m + n) as u64 % modulus) as usize] {
                bad += 1;
            }
        }
    }
    let random = |rng: &mut R| DadicInt::new(base, (0..depth).map(|_| rng.random_range(0..base)).collect());
    for _ in 0..n_triples {
        let (a, b, c) = (random(rng)?, random(rng)?, random(rng)?);
        if a.add(&b)?.add(&c)? != a.add(&b.add(&c)?)? {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Runs every check on the configured instance.
pub fn run(cfg: &RunConfig) -> Result<Vec<Check>> {
    let map = cfg.map()?;
    let f = cfg.potential(&map)?;
    let d = map.degree();
    let k = cfg.depth.k;
    let tol = cfg.tol.series;
    let grid = uniform_grid(cfg.depth.h_grid);
    let mut out = Vec::new();

    let group_depth = if d <= 3 { 6 } else { 4 };
    let bad = group_axiom_violations(d, group_depth, 10_000, &mut stream(cfg.seed, "group", 0))?;
    out.push(Check::below("dadic_group_axioms", bad as f64, 0.5));

    let mut branch = 0.0f64;
    for &x in &grid {
        for i in 0..d {
            let y = map.inverse_branch(i, x)?;
            branch = branch.max((map.lift(y) - x - i as f64).abs());
        }
    }
    out.push(Check::below("branch_residual", branch, cfg.tol.branch));

    let mut rng = stream(cfg.seed, "contraction", 0);
    let mut ratio = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=12usize);
        let word: Vec<u32> = (0..n).map(|_| rng.random_range(0..d)).collect();
        let x: f64 = rng.random();
        let (_, dy) = map.tau_word_with_deriv(&word, x)?;
        ratio = ratio.max(dy.abs() / map.contraction_bound(n));
    }
    out.push(Check::below("contraction_bound", ratio, 1.0 + 1e-12));

    let hf = cfg.hfamily()?;
    out.push(Check::below(
        "functional_equation",
        hf.functional_equation_check(&grid, tol, k)?,
        1e-8,
    ));
    let short = uniform_grid(16);
    let mut shift = 0.0f64;
    for m in 0..2 * d as u64 {
        let word = DadicInt::iota(m, d, k);
        for s in 1..=3 {
            shift = shift.max(hf.shift_identity_check(&word, s, &short, tol)?);
        }
    }
    out.push(Check::below("shift_identity", shift, 2.0 * tol));

    let lin = Linearization::new(hf.clone(), cfg.tol.conj, tol)?;
    let samples = mu_samples(d, k, IDENTITY_SAMPLES, cfg.seed);
    out.push(Check::below("calhd_identity", lin.check_calhd(1, &samples)?, 1e-8));

    let conj = Conjugacy::new(&map, cfg.tol.conj)?;
    let truncation = map.perturbation().sup_bound() / (d as f64).powi(conj.depth() as i32);
    out.push(Check::below("conjugacy_residual", conj.residual(&grid), truncation + 1e-12));
    let mut round_trip = 0.0f64;
    for &y in &grid {
        round_trip = round_trip.max((conj.theta(conj.theta_inverse(y)?) - y).abs());
    }
    out.push(Check::below("theta_round_trip", round_trip, cfg.tol.conj));

    let mu = mu_samples(d, k, KS_SAMPLES, cfg.seed.wrapping_add(1));
    let mut ks = 0.0f64;
    for m in [1, 2, 4, 8] {
        let vals = mu.iter().map(|w| xi(&w.digits, m, w.x)).collect::<Result<Vec<_>>>()?;
        ks = ks.max(ks_uniform(&vals));
    }
    out.push(Check::below("xi_uniformity_ks", ks, ks_critical(KS_SAMPLES)));

    let beta = beta_periodic(&map, &f, cfg.depth.p_max)?;
    let sub = lax_oleinik(&map, &f, &cfg.lo_options())?;
    out.push(Check::below("subaction_defect", sub.defect, 1e-6));
    out.push(Check::below("beta_enumeration_vs_lax_oleinik", (sub.beta - beta.beta).abs(), 1e-4));
    let iter = iterate_equivalence(&map, &f, 2, cfg.depth.p_max.min(8))?;
    out.push(Check::below("iterate_equivalence", iter.residual, 1e-6));

    let words = default_words(
        d,
        k,
        cfg.depth.n_words.saturating_sub(2 * d as usize),
        &mut stream(cfg.seed, "words", 0),
    );
    let verdict = hf.transversality_scan(&words, &grid, &cfg.scan_options())?;
    let coh = hf.cohomology_solve(&grid, cfg.tol.agree, tol, k)?;
    let consistent = matches!(
        (verdict.outcome, &coh),
        (Outcome::Degenerate, Cohomology::Cohomologous { .. }) | (Outcome::Transversal, Cohomology::NotCohomologous { .. })
    );
    out.push(Check {
        name: "dichotomy_consistency",
        value: verdict.margin,
        threshold: cfg.tol.sep_margin,
        passed: consistent,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_axioms_hold_exhaustively() {
        for d in [2, 3] {
            assert_eq!(group_axiom_violations(d, 4, 2000, &mut stream(1, "t", 0)).unwrap(), 0);
        }
    }

    #[test]
    fn doubling_suite_passes() {
        let checks = run(&RunConfig::doubling()).unwrap();
        for c in &checks {
            assert!(c.passed, "{c:?}");
        }
        assert_eq!(checks.len(), 13);
    }
}
