//! Command-line front end.
//!
//! Every command reads a [`RunConfig`], applies flag overrides, writes its
//! tables under `--out` and finishes with `summary.csv` and `manifest.txt`.
//! All CSV files have a header row and use `.` as the decimal separator.
//!
//! | command         | tables (columns)                                              |
//! |-----------------|---------------------------------------------------------------|
//! | `beta`          | `orbits.csv` (word, period, point, average)                   |
//! | `subaction`     | `subaction.csv` (x, g, defect)                                |
//! | `levelset`      | `levelset.csv` (left, right)                                  |
//! | `entropy`       | `entropy.csv` (n, count, bound)                               |
//! | `hfam`          | `hfam.csv` (word, x, re, im)                                  |
//! | `transversality`| `pairs.csv` (word_i, word_j, max_dev, argmax_x), `verdict.txt`|
//! | `cohomology`    | `cohomology.csv` (x, phi_re, phi_im), `verdict.txt`           |
//! | `linearize`     | `theta.csv` (x, theta, theta_inverse)                         |
//! | `fourier`       | `coefficients.csv` (s, m, q, re, im, stderr), `recursion.csv` (s, m, q, shifted_re, shifted_im, discrepancy, threshold, pass) |
//! | `lyapunov`      | `lyapunov.csv` (quantity, value)                              |
//! | `iterate-check` | `iterate.csv` (k, beta_iterate, k_beta, residual)             |
//! | `selftest`      | `selftest.csv` (check, status, value, threshold)              |
//!
//! `summary.csv` has columns (key, value). `defect` in `subaction.csv` is
//! `f(x) − g(Tx) + g(x) − β`, which is `≤ 0` up to the reported defect.
//! Orbit words are written as digit strings; d-adic words use `d:K:i1,…,iK`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::Rng;

use crate::circle::{uniform_grid, ExpandingMap};
use crate::config::RunConfig;
use crate::dadic::DadicInt;
use crate::error::{Error, Result};
use crate::hfamily::{default_words, Cohomology};
use crate::linearization::{mu_samples, Conjugacy, Linearization, PairedSamples};
use crate::optimizer::{
    alpha_value, beta_periodic, entropy_upper_bound, iterate_equivalence, lax_oleinik, level_set,
    lyapunov_potential, SubActionGrid,
};
use crate::rng::stream;
use crate::selftest;

const CALHD_SAMPLES: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "ergolab", version, about = "Ergodic optimization on expanding circle maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML); defaults to the doubling map with f = cos 2πx.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub p_max: Option<usize>,
    /// Lax–Oleinik grid size, or the evaluation grid for h-family commands.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// `re` or `re,im`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Maximal periodic average over orbits of period ≤ p_max.
    Beta,
    /// Lax–Oleinik sub-action on the grid.
    Subaction,
    /// Intervals where the sub-action gap is ≤ epsilon.
    Levelset,
    /// Cylinder-count entropy bounds of the level set.
    Entropy,
    /// Tables of h_i for i = ι(0), …, ι(2d−1).
    Hfam,
    /// Pairwise h-family deviations and the dichotomy verdict.
    Transversality,
    /// Solves f = λ^{-1}·φ∘T − φ + c when possible.
    Cohomology,
    /// Linearizing conjugacy Θ and its inverse.
    Linearize,
    /// Monte Carlo Fourier coefficients and their recursion.
    Fourier,
    /// Lyapunov minimum exponent against the expansion constant λ0.
    Lyapunov,
    /// β(T^k, S_k f) against k·β(T, f) for k = 2, 3.
    IterateCheck,
    /// Full invariant suite; exits nonzero when a check fails.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Beta => "beta",
            Command::Subaction => "subaction",
            Command::Levelset => "levelset",
            Command::Entropy => "entropy",
            Command::Hfam => "hfam",
            Command::Transversality => "transversality",
            Command::Cohomology => "cohomology",
            Command::Linearize => "linearize",
            Command::Fourier => "fourier",
            Command::Lyapunov => "lyapunov",
            Command::IterateCheck => "iterate-check",
            Command::Selftest => "selftest",
        }
    }

    fn uses_h_grid(self) -> bool {
        matches!(
            self,
            Command::Hfam | Command::Transversality | Command::Cohomology | Command::Linearize
        )
    }
}

fn parse_lambda(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::InvalidArgument(format!("--lambda expects `re` or `re,im`, got {s:?}"));
    let mut parts = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad()));
    let re = parts.next().ok_or_else(bad)??;
    let im = parts.next().transpose()?.unwrap_or(0.0);
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((re, im))
}

/// The configuration after flag overrides, revalidated.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::doubling(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(p) = cli.p_max {
        cfg.depth.p_max = p;
    }
    if let Some(g) = cli.grid {
        if cli.command.uses_h_grid() {
            cfg.depth.h_grid = g;
        } else {
            cfg.depth.n_grid = g;
        }
    }
    if let Some(e) = cli.epsilon {
        cfg.tol.epsilon = e;
    }
    if let Some(l) = &cli.lambda {
        let (re, im) = parse_lambda(l)?;
        cfg.lambda.re = re;
        cfg.lambda.im = im;
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Output {
    dir: PathBuf,
    summary: Vec<(String, String)>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            summary: Vec::new(),
        })
    }

    fn table<I>(&self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_path(self.dir.join(name)).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    fn text(&self, name: &str, body: &str) -> Result<()> {
        fs::write(self.dir.join(name), body)?;
        Ok(())
    }

    fn put(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    fn finish(self, command: Command, cfg: &RunConfig) -> Result<()> {
        self.table(
            "summary.csv",
            &["key", "value"],
            self.summary.iter().map(|(k, v)| vec![k.clone(), v.clone()]),
        )?;
        let manifest = format!(
            "command = {}\nconfig_sha256 = {}\nseed = {}\nergolab = {}\n\n{}",
            command.name(),
            cfg.hash(),
            cfg.seed,
            env!("CARGO_PKG_VERSION"),
            cfg.to_toml()
        );
        self.text("manifest.txt", &manifest)?;
        for (k, v) in &self.summary {
            println!("{k} = {v}");
        }
        Ok(())
    }
}

fn word_string(map: &ExpandingMap, word: &[u32]) -> String {
    let sep = if map.degree() <= 10 { "" } else { "-" };
    word.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(sep)
}

fn subaction(cfg: &RunConfig, map: &ExpandingMap) -> Result<SubActionGrid> {
    let f = cfg.potential(map)?;
    lax_oleinik(map, &f, &cfg.lo_options())
}

fn words(cfg: &RunConfig) -> Vec<DadicInt> {
    let d = cfg.map.degree;
    let mut w = default_words(
        d,
        cfg.depth.k,
        cfg.depth.n_words.saturating_sub(2 * d as usize),
        &mut stream(cfg.seed, "words", 0),
    );
    w.truncate(cfg.depth.n_words);
    w
}

/// Runs one command; `Ok(false)` means a selftest check failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let cfg = effective_config(cli)?;
    let map = cfg.map()?;
    let mut out = Output::new(&cli.out)?;
    let mut ok = true;
    match cli.command {
        Command::Beta => {
            let f = cfg.potential(&map)?;
            let r = beta_periodic(&map, &f, cfg.depth.p_max)?;
            let mut orbits = r.orbits.clone();
            orbits.sort_by(|a, b| {
                b.average
                    .total_cmp(&a.average)
                    .then(a.period().cmp(&b.period()))
                    .then(a.word.cmp(&b.word))
            });
            out.table(
                "orbits.csv",
                &["word", "period", "point", "average"],
                orbits.iter().map(|o| {
                    vec![
                        word_string(&map, &o.word),
                        o.period().to_string(),
                        o.point.to_string(),
                        o.average.to_string(),
                    ]
                }),
            )?;
            out.put("beta", r.beta);
            out.put("argmax_word", word_string(&map, &r.argmax.word));
            out.put("argmax_point", r.argmax.point);
            out.put("min_average", r.min_average);
            out.put("orbits_examined", r.orbits_examined);
        }
        Command::Subaction => {
            let sub = subaction(&cfg, &map)?;
            out.table(
                "subaction.csv",
                &["x", "g", "defect"],
                sub.grid
                    .iter()
                    .zip(&sub.g_values)
                    .zip(&sub.gap)
                    .map(|((x, g), gap)| vec![x.to_string(), g.to_string(), (0.0 - gap).to_string()]),
            )?;
            out.put("beta", sub.beta);
            out.put("iterations", sub.iteration_count);
            out.put("converged", sub.converged);
            out.put("defect", sub.defect);
        }
        Command::Levelset => {
            let sub = subaction(&cfg, &map)?;
            let lset = level_set(&sub, cfg.tol.epsilon)?;
            out.table(
                "levelset.csv",
                &["left", "right"],
                lset.intervals.iter().map(|(a, b)| vec![a.to_string(), b.to_string()]),
            )?;
            out.put("epsilon", cfg.tol.epsilon);
            out.put("intervals", lset.intervals.len());
            out.put("measure", lset.measure());
            out.put("defect", sub.defect);
            out.put("beta", sub.beta);
        }
        Command::Entropy => {
            let sub = subaction(&cfg, &map)?;
            let lset = level_set(&sub, cfg.tol.epsilon)?;
            let rows = cfg
                .depth
                .entropy
                .iter()
                .map(|&n| entropy_upper_bound(&map, &lset, n))
                .collect::<Result<Vec<_>>>()?;
            out.table(
                "entropy.csv",
                &["n", "count", "bound"],
                rows.iter()
                    .map(|e| vec![e.depth.to_string(), e.cylinder_count.to_string(), e.bound.to_string()]),
            )?;
            out.put("epsilon", cfg.tol.epsilon);
            if let Some(last) = rows.last() {
                out.put("bound", last.bound);
            }
        }
        Command::Hfam => {
            let hf = cfg.hfamily()?;
            let grid = uniform_grid(cfg.depth.h_grid);
            let d = map.degree();
            let mut rows = Vec::new();
            for m in 0..2 * d as u64 {
                let w = DadicInt::iota(m, d, cfg.depth.k);
                let vals = hf.table(&w, &grid, cfg.tol.series)?;
                for (x, v) in grid.iter().zip(vals) {
                    rows.push(vec![w.to_string(), x.to_string(), v.re.to_string(), v.im.to_string()]);
                }
            }
            out.table("hfam.csv", &["word", "x", "re", "im"], rows)?;
            out.put(
                "functional_equation_residual",
                hf.functional_equation_check(&grid, cfg.tol.series, cfg.depth.k)?,
            );
        }
        Command::Transversality => {
            let hf = cfg.hfamily()?;
            let grid = uniform_grid(cfg.depth.h_grid);
            let v = hf.transversality_scan(&words(&cfg), &grid, &cfg.scan_options())?;
            out.table(
                "pairs.csv",
                &["word_i", "word_j", "max_dev", "argmax_x"],
                v.witness_pairs.iter().map(|p| {
                    vec![
                        p.word_i.to_string(),
                        p.word_j.to_string(),
                        p.max_dev.to_string(),
                        p.argmax_x.to_string(),
                    ]
                }),
            )?;
            out.text("verdict.txt", &format!("{}\n", v.outcome.as_str()))?;
            out.put("outcome", v.outcome.as_str());
            out.put("margin", v.margin);
            out.put("pairs", v.witness_pairs.len());
        }
        Command::Cohomology => {
            let hf = cfg.hfamily()?;
            let grid = uniform_grid(cfg.depth.h_grid);
            match hf.cohomology_solve(&grid, cfg.tol.agree, cfg.tol.series, cfg.depth.k)? {
                Cohomology::Cohomologous { grid, phi, c, residual } => {
                    out.table(
                        "cohomology.csv",
                        &["x", "phi_re", "phi_im"],
                        grid.iter()
                            .zip(&phi)
                            .map(|(x, p)| vec![x.to_string(), p.re.to_string(), p.im.to_string()]),
                    )?;
                    out.text("verdict.txt", "cohomologous\n")?;
                    out.put("verdict", "cohomologous");
                    out.put("c", c);
                    out.put("residual", residual);
                }
                Cohomology::NotCohomologous { certificate } => {
                    out.table("cohomology.csv", &["x", "phi_re", "phi_im"], Vec::new())?;
                    out.text("verdict.txt", "not-cohomologous\n")?;
                    out.put("verdict", "not-cohomologous");
                    out.put("max_deviation", certificate.max_deviation);
                    out.put("deviation_constant", certificate.constant);
                }
            }
        }
        Command::Linearize => {
            let conj = Conjugacy::new(&map, cfg.tol.conj)?;
            let grid = uniform_grid(cfg.depth.h_grid);
            let rows = grid
                .iter()
                .map(|&x| Ok(vec![x.to_string(), conj.theta(x).to_string(), conj.theta_inverse(x)?.to_string()]))
                .collect::<Result<Vec<_>>>()?;
            out.table("theta.csv", &["x", "theta", "theta_inverse"], rows)?;
            out.put("depth", conj.depth());
            out.put("conjugacy_residual", conj.residual(&grid));
        }
        Command::Fourier => {
            let lin = Linearization::new(cfg.hfamily()?, cfg.tol.conj, cfg.tol.series)?;
            let (mut coeffs, mut recs) = (Vec::new(), Vec::new());
            for (j, &s) in cfg.fourier.s.iter().enumerate() {
                let seed = stream(cfg.seed, "fourier", j as u64).next_u64();
                let paired = PairedSamples::draw(&lin, s, cfg.depth.n_samples, seed)?;
                for &m in &cfg.fourier.m {
                    for &q in &cfg.fourier.q {
                        let r = paired.check(m, q)?;
                        let (b, sh) = (&r.base, &r.shifted);
                        coeffs.push(vec![
                            s.to_string(),
                            m.to_string(),
                            q.to_string(),
                            b.estimate.re.to_string(),
                            b.estimate.im.to_string(),
                            b.std_error.to_string(),
                        ]);
                        recs.push(vec![
                            s.to_string(),
                            m.to_string(),
                            q.to_string(),
                            sh.estimate.re.to_string(),
                            sh.estimate.im.to_string(),
                            r.discrepancy.to_string(),
                            r.threshold.to_string(),
                            r.pass().to_string(),
                        ]);
                    }
                }
            }
            let all_pass = recs.iter().all(|r| r[7] == "true");
            out.table("coefficients.csv", &["s", "m", "q", "re", "im", "stderr"], coeffs)?;
            out.table(
                "recursion.csv",
                &["s", "m", "q", "shifted_re", "shifted_im", "discrepancy", "threshold", "pass"],
                recs,
            )?;
            let samples = mu_samples(map.degree(), cfg.depth.k, CALHD_SAMPLES, cfg.seed);
            out.put("calhd_residual", lin.check_calhd(1, &samples)?);
            out.put("recursion_pass", all_pass);
        }
        Command::Lyapunov => {
            let alpha = alpha_value(&map, &lyapunov_potential(&map, 1.0), cfg.depth.p_max)?;
            let beta = beta_periodic(&map, &lyapunov_potential(&map, 1.0), cfg.depth.p_max)?.beta;
            let c = map.constants();
            let rows = [
                ("alpha_log_derivative", alpha),
                ("exp_alpha", alpha.exp()),
                ("lambda0", c.lambda0),
                ("ratio", alpha.exp() / c.lambda0),
                ("beta_log_derivative", beta),
                ("lambda_min", map.lambda_min()),
            ];
            out.table(
                "lyapunov.csv",
                &["quantity", "value"],
                rows.iter().map(|(k, v)| vec![k.to_string(), v.to_string()]),
            )?;
            for (k, v) in rows {
                out.put(k, v);
            }
        }
        Command::IterateCheck => {
            let f = cfg.potential(&map)?;
            let rows = [2, 3]
                .iter()
                .map(|&k| iterate_equivalence(&map, &f, k, cfg.depth.p_max))
                .collect::<Result<Vec<_>>>()?;
            out.table(
                "iterate.csv",
                &["k", "beta_iterate", "k_beta", "residual"],
                rows.iter().map(|r| {
                    vec![
                        r.k.to_string(),
                        r.beta_iterate.to_string(),
                        r.k_beta.to_string(),
                        r.residual.to_string(),
                    ]
                }),
            )?;
            out.put("max_residual", rows.iter().map(|r| r.residual).fold(0.0, f64::max));
        }
        Command::Selftest => {
            let checks = selftest::run(&cfg)?;
            out.table(
                "selftest.csv",
                &["check", "status", "value", "threshold"],
                checks.iter().map(|c| {
                    vec![
                        c.name.to_string(),
                        if c.passed { "pass" } else { "fail" }.to_string(),
                        c.value.to_string(),
                        c.threshold.to_string(),
                    ]
                }),
            )?;
            for c in checks.iter().filter(|c| !c.passed) {
                eprintln!("check failed: {} (value {:e}, threshold {:e})", c.name, c.value, c.threshold);
            }
            ok = checks.iter().all(|c| c.passed);
            out.put("checks", checks.len());
            out.put("failed", checks.iter().filter(|c| !c.passed).count());
        }
    }
    out.finish(cli.command, &cfg)?;
    Ok(ok)
}
