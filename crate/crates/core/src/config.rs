//! Run configuration: a TOML file with dotted sections.
//!
//! ```toml
//! seed = 42
//!
//! [map]              # T̂(x) = degree·x + constant + Σ cos[k]·cos 2π(k+1)x + sin[k]·sin 2π(k+1)x
//! degree = 2
//! sin = [0.05]
//! safety = 0.95      # λ1 = safety·λ0
//!
//! [potential]        # kind = "trig" | "coboundary" | "log_derivative"
//! kind = "trig"
//! cos = [1.0]
//!
//! [lambda]
//! re = 1.0
//! im = 0.0
//!
//! [tol]              # branch, series, agree, sep_margin, lo, orbit, conj, epsilon
//! [depth]            # k, p_max, n_max, n_grid, lo_max_iter, h_grid, n_words, n_samples, entropy
//! [fourier]          # s, m, q
//! ```
//!
//! A coboundary potential `λ^{-1}·φ∘T − φ + c` takes `phi_cos`, `phi_sin`,
//! `c` and an optional real `lambda` (default `lambda.re`); a log-derivative
//! potential takes `sign`. Every section and key is optional except
//! `map.degree`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circle::{ExpandingMap, MapOptions, Potential, DEFAULT_BRANCH_TOL, DEFAULT_N_MAX, DEFAULT_SAFETY};
use crate::dadic::DEFAULT_DEPTH;
use crate::error::{Error, Result};
use crate::hfamily::{HFamily, ScanOptions, DEFAULT_AGREE_TOL, DEFAULT_SEP_MARGIN, DEFAULT_TOL};
use crate::linearization::DEFAULT_CONJ_TOL;
use crate::optimizer::{LoOptions, DEFAULT_ORBIT_TOL};
use crate::trig::TrigPoly;

/// `d^p_max` may not exceed this many words per period.
pub const P_MAX_CEILING: u64 = 1 << 16;
const K_CEILING: usize = 4096;
const ENTROPY_DEPTH_CEILING: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub map: MapSection,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub lambda: LambdaSection,
    #[serde(default)]
    pub tol: Tolerances,
    #[serde(default)]
    pub depth: Depths,
    #[serde(default)]
    pub fourier: FourierSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    pub degree: u32,
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
    #[serde(default = "default_safety")]
    pub safety: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSection {
    Trig {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    Coboundary {
        #[serde(default)]
        phi_cos: Vec<f64>,
        #[serde(default)]
        phi_sin: Vec<f64>,
        #[serde(default)]
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
    },
    LogDerivative {
        #[serde(default = "one")]
        sign: f64,
    },
}

impl Default for PotentialSection {
    fn default() -> Self {
        PotentialSection::Trig {
            constant: 0.0,
            cos: vec![1.0],
            sin: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSection {
    #[serde(default = "one")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl Default for LambdaSection {
    fn default() -> Self {
        Self { re: 1.0, im: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub branch: f64,
    pub series: f64,
    pub agree: f64,
    pub sep_margin: f64,
    pub lo: f64,
    pub orbit: f64,
    pub conj: f64,
    pub epsilon: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            branch: DEFAULT_BRANCH_TOL,
            series: DEFAULT_TOL,
            agree: DEFAULT_AGREE_TOL,
            sep_margin: DEFAULT_SEP_MARGIN,
            lo: LoOptions::default().lo_tol,
            orbit: DEFAULT_ORBIT_TOL,
            conj: DEFAULT_CONJ_TOL,
            epsilon: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Depths {
    pub k: usize,
    pub p_max: usize,
    pub n_max: usize,
    pub n_grid: usize,
    pub lo_max_iter: usize,
    pub h_grid: usize,
    pub n_words: usize,
    pub n_samples: usize,
    pub entropy: Vec<usize>,
}

impl Default for Depths {
    fn default() -> Self {
        let lo = LoOptions::default();
        Self {
            k: DEFAULT_DEPTH,
            p_max: 10,
            n_max: DEFAULT_N_MAX,
            n_grid: lo.n_grid,
            lo_max_iter: lo.max_iter,
            h_grid: 128,
            n_words: 12,
            n_samples: 100_000,
            entropy: vec![8, 10, 12, 14],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FourierSection {
    pub s: Vec<i64>,
    pub m: Vec<usize>,
    pub q: Vec<i64>,
}

impl Default for FourierSection {
    fn default() -> Self {
        Self {
            s: vec![1],
            m: vec![0, 1, 2],
            q: vec![1, 2],
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_safety() -> f64 {
    DEFAULT_SAFETY
}

fn harmonics(cos: &[f64], sin: &[f64]) -> Vec<(f64, f64)> {
    (0..cos.len().max(sin.len()))
        .map(|k| (cos.get(k).copied().unwrap_or(0.0), sin.get(k).copied().unwrap_or(0.0)))
        .collect()
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    /// The default doubling-map configuration with `f = cos 2πx`.
    pub fn doubling() -> Self {
        Self {
            seed: 0,
            map: MapSection {
                degree: 2,
                constant: 0.0,
                cos: Vec::new(),
                sin: Vec::new(),
                safety: DEFAULT_SAFETY,
            },
            potential: PotentialSection::default(),
            lambda: LambdaSection::default(),
            tol: Tolerances::default(),
            depth: Depths::default(),
            fourier: FourierSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Normalized text: every key present, fixed order.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the normalized text, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tol;
        for (name, v) in [
            ("tol.branch", t.branch),
            ("tol.series", t.series),
            ("tol.agree", t.agree),
            ("tol.sep_margin", t.sep_margin),
            ("tol.lo", t.lo),
            ("tol.orbit", t.orbit),
            ("tol.conj", t.conj),
            ("tol.epsilon", t.epsilon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let d = &self.depth;
        if d.k == 0 || d.k > K_CEILING {
            return Err(Error::Config(format!("depth.k must lie in 1..={K_CEILING}, got {}", d.k)));
        }
        let words = (self.map.degree.max(2) as u64).checked_pow(d.p_max as u32);
        if d.p_max == 0 || words.is_none_or(|w| w > P_MAX_CEILING) {
            return Err(Error::Config(format!(
                "depth.p_max = {} exceeds the ceiling degree^p_max <= {P_MAX_CEILING}",
                d.p_max
            )));
        }
        if d.n_max == 0 {
            return Err(Error::Config("depth.n_max must be at least 1".into()));
        }
        if d.n_grid < 256 {
            return Err(Error::Config(format!("depth.n_grid must be at least 256, got {}", d.n_grid)));
        }
        if d.h_grid < 2 || d.n_words < 2 || d.n_samples < 2 {
            return Err(Error::Config("depth.h_grid, depth.n_words and depth.n_samples must be at least 2".into()));
        }
        if let Some(&n) = d.entropy.iter().find(|&&n| n == 0 || n > ENTROPY_DEPTH_CEILING) {
            return Err(Error::Config(format!(
                "depth.entropy entries must lie in 1..={ENTROPY_DEPTH_CEILING}, got {n}"
            )));
        }
        let map = self.map()?;
        let lambda = self.lambda();
        let lambda1 = map.constants().lambda1;
        if !(lambda.norm() > 0.0 && lambda.norm() < lambda1) {
            return Err(Error::LambdaTooLarge {
                modulus: lambda.norm(),
                lambda1,
            });
        }
        self.potential(&map)?;
        Ok(())
    }

    pub fn map(&self) -> Result<ExpandingMap> {
        let p = TrigPoly::new(self.map.constant, harmonics(&self.map.cos, &self.map.sin));
        ExpandingMap::with_options(
            self.map.degree,
            p,
            MapOptions {
                n_max: self.depth.n_max,
                safety: self.map.safety,
                branch_tol: self.tol.branch,
            },
        )
    }

    pub fn potential(&self, map: &ExpandingMap) -> Result<Potential> {
        match &self.potential {
            PotentialSection::Trig { constant, cos, sin } => {
                Ok(Potential::trig(TrigPoly::new(*constant, harmonics(cos, sin))))
            }
            PotentialSection::Coboundary {
                phi_cos,
                phi_sin,
                c,
                lambda,
            } => Potential::coboundary(
                TrigPoly::new(0.0, harmonics(phi_cos, phi_sin)),
                lambda.unwrap_or(self.lambda.re),
                *c,
                map,
            ),
            PotentialSection::LogDerivative { sign } => Ok(Potential::log_derivative(*sign, map)),
        }
    }

    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.lambda.re, self.lambda.im)
    }

    pub fn hfamily(&self) -> Result<HFamily> {
        let map = self.map()?;
        HFamily::new(&map, &self.potential(&map)?, self.lambda())
    }

    pub fn lo_options(&self) -> LoOptions {
        LoOptions {
            n_grid: self.depth.n_grid,
            max_iter: self.depth.lo_max_iter,
            lo_tol: self.tol.lo,
        }
    }

    pub fn scan_options(&self) -> ScanOptions {
        ScanOptions {
            agree_tol: self.tol.agree,
            sep_margin: self.tol.sep_margin,
            tol: self.tol.series,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STURMIAN: &str = r#"
seed = 7

[map]
degree = 2
sin = [0.05]

[potential]
kind = "trig"
cos = [-0.30901699437494734]
sin = [0.9510565162951535]

[tol]
epsilon = 1e-3

[depth]
p_max = 12
entropy = [8, 10, 12, 14]
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::parse("[map]\ndegree = 2\n").unwrap();
        assert_eq!(cfg, RunConfig::doubling());
        assert_eq!(cfg.depth.k, DEFAULT_DEPTH);
        assert_eq!(cfg.tol.branch, DEFAULT_BRANCH_TOL);
    }

    #[test]
    fn non_expanding_map_names_lambda_min() {
        let err = RunConfig::parse("[map]\ndegree = 2\nsin = [0.2]\n").unwrap_err();
        assert!(err.to_string().contains("lambda_min"), "{err}");
    }

    #[test]
    fn normalized_form_round_trips() {
        let cfg = RunConfig::parse(STURMIAN).unwrap();
        let text = cfg.to_toml();
        let again = RunConfig::parse(&text).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml(), text);
        assert_eq!(again.hash(), cfg.hash());
        for kind in [
            "kind = \"coboundary\"\nphi_cos = [1.0]\nc = 0.3\nlambda = 0.5\n",
            "kind = \"log_derivative\"\nsign = -1.0\n",
        ] {
            let cfg = RunConfig::parse(&format!("[map]\ndegree = 3\n[potential]\n{kind}")).unwrap();
            assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
        }
    }

    #[test]
    fn parse_errors_carry_lines() {
        match RunConfig::parse("[map]\ndegree = 2\nbogus = 1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::parse("[map]\ndegree = \n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn validation_names_the_key() {
        let err = RunConfig::parse("[map]\ndegree = 2\n[tol]\nseries = 0.0\n").unwrap_err();
        assert!(err.to_string().contains("tol.series"));
        let err = RunConfig::parse("[map]\ndegree = 2\n[depth]\np_max = 17\n").unwrap_err();
        assert!(err.to_string().contains("p_max"));
        let err = RunConfig::parse("[map]\ndegree = 2\n[lambda]\nre = 2.5\n").unwrap_err();
        assert!(matches!(err, Error::LambdaTooLarge { .. }));
        let err = RunConfig::parse("[map]\ndegree = 2\nconstant = 0.1\n").unwrap_err();
        assert!(matches!(err, Error::PerturbationNotPinned(_)));
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = RunConfig::parse("[map]\ndegree = 2\n").unwrap();
        let b = RunConfig::parse("# doubling\n[map]\n  degree=2\n[lambda]\nre = 1.0\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
