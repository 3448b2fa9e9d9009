//! TOML run configuration shared by the command-line subcommands.
//!
//! Precedence, lowest first: built-in defaults, the config file, command-line
//! flags. A top-level `seed` replaces the solver and linear-solve seeds.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::corrector::{LinSolveConfig, Scheme};
use crate::model::{PotentialSpec, ProblemSpec};
use crate::solver::{Method, SolverConfig};
use crate::spectral::make_basis;
use crate::study::StudyConfig;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    pub cutoff: usize,
    #[serde(default = "default_fine_factor")]
    pub fine_factor: usize,
}

fn default_fine_factor() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    pub selected: Vec<Scheme>,
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self {
            selected: vec![Scheme::Newton],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub certificate: bool,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self { certificate: true }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub cutoffs: Vec<usize>,
    pub reference_cutoff: usize,
    /// Defaults to every scheme.
    pub schemes: Option<Vec<Scheme>>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub problem: Option<ProblemSpec>,
    pub basis: Option<BasisSection>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub linear: LinSolveConfig,
    #[serde(default)]
    pub schemes: SchemeSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    pub study: Option<StudySection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Which sections a subcommand needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Postprocess,
    Estimate,
    Study,
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Postprocess => "postprocess",
            Command::Estimate => "estimate",
            Command::Study => "study",
            Command::Oracle => "oracle",
        }
    }
}

/// Configuration problem with the line it refers to, when known.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub file: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.file, line, self.message),
            None => write!(f, "{}: {}", self.file, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub cutoff: Option<usize>,
    pub fine_factor: Option<usize>,
    pub schemes: Vec<Scheme>,
    pub method: Option<Method>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub certificate: Option<bool>,
    pub cutoffs: Option<Vec<usize>>,
    pub reference_cutoff: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Parsed file plus what is needed to anchor later diagnostics.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub source: String,
    pub file: String,
}

/// 1-based line of `key` inside `[section]` (or at top level when `section` is empty).
pub fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header_line = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if current == section {
                header_line = Some(i + 1);
            }
            continue;
        }
        if current == section {
            let name = line.split('=').next().unwrap_or("").trim();
            if !key.is_empty() && name == key {
                return Some(i + 1);
            }
        }
    }
    header_line
}

impl LoadedConfig {
    pub fn parse(source: &str, file: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(source).map_err(|e| {
            let line = e.span().map(|s| source[..s.start.min(source.len())].matches('\n').count() + 1);
            ConfigError {
                file: file.to_string(),
                line,
                message: e.message().to_string(),
            }
        })?;
        Ok(Self {
            config,
            source: source.to_string(),
            file: file.to_string(),
        })
    }

    /// Reads `path`; relative potential files are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let file = path.display().to_string();
        let source = std::fs::read_to_string(path).map_err(|e| ConfigError {
            file: file.clone(),
            line: None,
            message: e.to_string(),
        })?;
        let mut loaded = Self::parse(&source, &file)?;
        if let Some(ProblemSpec {
            potential: PotentialSpec::File { path: pot },
            ..
        }) = &mut loaded.config.problem
        {
            if pot.is_relative() {
                if let Some(dir) = path.parent() {
                    *pot = dir.join(&*pot);
                }
            }
        }
        Ok(loaded)
    }

    fn err(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            file: self.file.clone(),
            line: locate(&self.source, section, key),
            message: message.into(),
        }
    }

    /// Applies flags, then checks everything `cmd` will use.
    pub fn resolve(mut self, cmd: Command, o: &Overrides) -> Result<RunConfig, ConfigError> {
        let c = &mut self.config;
        if let Some(seed) = o.seed.or(c.seed) {
            c.seed = Some(seed);
            c.solver.seed = seed;
            c.linear.seed = seed;
        }
        if let Some(m) = o.method {
            c.solver.method = m;
        }
        if let Some(t) = o.tol {
            c.solver.tol_residual = t;
        }
        if let Some(cert) = o.certificate {
            c.estimator.certificate = cert;
        }
        if !o.schemes.is_empty() {
            c.schemes.selected = o.schemes.clone();
            if let Some(s) = &mut c.study {
                s.schemes = Some(o.schemes.clone());
            }
        }
        if let Some(dir) = &o.out {
            c.output.dir = dir.clone();
        }
        if o.cutoff.is_some() || o.fine_factor.is_some() {
            let basis = c.basis.get_or_insert(BasisSection {
                cutoff: 0,
                fine_factor: default_fine_factor(),
            });
            if let Some(m) = o.cutoff {
                basis.cutoff = m;
            } else if c.basis.as_ref().is_some_and(|b| b.cutoff == 0) && cmd != Command::Study {
                return Err(self.err("basis", "", "--fine-factor given without a cutoff"));
            }
            if let Some(f) = o.fine_factor {
                c.basis.as_mut().expect("inserted above").fine_factor = f;
            }
        }
        if o.cutoffs.is_some() || o.reference_cutoff.is_some() {
            match &mut c.study {
                Some(s) => {
                    if let Some(cs) = &o.cutoffs {
                        s.cutoffs = cs.clone();
                    }
                    if let Some(r) = o.reference_cutoff {
                        s.reference_cutoff = r;
                    }
                }
                None => {
                    let defaults = StudyConfig::default();
                    c.study = Some(StudySection {
                        cutoffs: o.cutoffs.clone().unwrap_or(defaults.cutoffs),
                        reference_cutoff: o.reference_cutoff.unwrap_or(defaults.reference_cutoff),
                        schemes: None,
                    });
                }
            }
        }
        self.validate(cmd)?;
        Ok(self.config)
    }

    fn validate(&self, cmd: Command) -> Result<(), ConfigError> {
        let c = &self.config;
        let problem = c
            .problem
            .as_ref()
            .ok_or_else(|| self.err("", "", format!("`{}` needs a [problem] section", cmd.name())))?;
        problem.build().map_err(|e| self.err("problem", "", e.to_string()))?;
        c.solver.validate().map_err(|e| self.err("solver", "", e.to_string()))?;
        if !(c.linear.tol > 0.0) || c.linear.max_iter == 0 {
            return Err(self.err("linear", "tol", "linear tolerance must be positive and max_iter nonzero"));
        }
        if c.linear.min_fine_ratio < 2 {
            return Err(self.err("linear", "min_fine_ratio", "min_fine_ratio must be at least 2"));
        }
        let fine_factor = c.basis.as_ref().map_or(default_fine_factor(), |b| b.fine_factor);
        if fine_factor < 2 {
            return Err(self.err("basis", "fine_factor", format!("fine_factor must be at least 2, got {fine_factor}")));
        }
        if cmd == Command::Study {
            let study = c
                .study
                .as_ref()
                .ok_or_else(|| self.err("", "", "`study` needs a [study] section"))?;
            self.study_config()
                .validate()
                .map_err(|e| self.err("study", "reference_cutoff", e.to_string()))?;
            if study.cutoffs.contains(&0) {
                return Err(self.err("study", "cutoffs", "study cutoffs must be positive"));
            }
        } else {
            let basis = c
                .basis
                .as_ref()
                .ok_or_else(|| self.err("", "", format!("`{}` needs a [basis] section", cmd.name())))?;
            make_basis(problem.d, basis.cutoff * basis.fine_factor)
                .map_err(|e| self.err("basis", "cutoff", e.to_string()))?;
            if matches!(cmd, Command::Postprocess) && c.schemes.selected.is_empty() {
                return Err(self.err("schemes", "selected", "no scheme selected"));
            }
            if basis.fine_factor < c.linear.min_fine_ratio {
                return Err(self.err(
                    "basis",
                    "fine_factor",
                    format!("fine_factor {} is below min_fine_ratio {}", basis.fine_factor, c.linear.min_fine_ratio),
                ));
            }
        }
        Ok(())
    }

    fn study_config(&self) -> StudyConfig {
        study_config(&self.config)
    }
}

/// Study settings implied by a resolved configuration.
pub fn study_config(c: &RunConfig) -> StudyConfig {
    let defaults = StudyConfig::default();
    let study = c.study.clone();
    StudyConfig {
        cutoffs: study.as_ref().map_or(defaults.cutoffs, |s| s.cutoffs.clone()),
        reference_cutoff: study.as_ref().map_or(defaults.reference_cutoff, |s| s.reference_cutoff),
        fine_factor: c.basis.as_ref().map_or(defaults.fine_factor, |b| b.fine_factor),
        schemes: study.and_then(|s| s.schemes).unwrap_or(defaults.schemes),
        certificate: c.estimator.certificate,
        solver: SolverConfig {
            tol_residual: c.solver.tol_residual.min(defaults.solver.tol_residual),
            ..c.solver.clone()
        },
        lin: c.linear.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
seed = 7

[problem]
d = 1
mu = 1.0

[problem.potential]
kind = "cosine"
terms = [{ amplitude = 1.0, k = [1] }]

[basis]
cutoff = 8
fine_factor = 4

[solver]
method = "scf"
tol_residual = 1e-11

[schemes]
selected = ["newton", "pert"]
"#;

    #[test]
    fn parses_and_applies_seed() {
        let c = LoadedConfig::parse(GOOD, "run.toml")
            .unwrap()
            .resolve(Command::Solve, &Overrides::default())
            .unwrap();
        assert_eq!(c.solver.seed, 7);
        assert_eq!(c.linear.seed, 7);
        assert_eq!(c.schemes.selected, vec![Scheme::Newton, Scheme::Pert]);
        assert_eq!(c.basis.unwrap().cutoff, 8);
    }

    #[test]
    fn flags_override_file() {
        let o = Overrides {
            cutoff: Some(12),
            method: Some(Method::GradientFlow),
            seed: Some(3),
            schemes: vec![Scheme::Tg1],
            ..Default::default()
        };
        let c = LoadedConfig::parse(GOOD, "run.toml").unwrap().resolve(Command::Postprocess, &o).unwrap();
        assert_eq!(c.basis.unwrap().cutoff, 12);
        assert_eq!(c.solver.method, Method::GradientFlow);
        assert_eq!(c.solver.seed, 3);
        assert_eq!(c.schemes.selected, vec![Scheme::Tg1]);
    }

    #[test]
    fn bad_fine_factor_points_at_its_line() {
        let text = GOOD.replace("fine_factor = 4", "fine_factor = 1");
        let e = LoadedConfig::parse(&text, "run.toml")
            .unwrap()
            .resolve(Command::Solve, &Overrides::default())
            .unwrap_err();
        let line = text.lines().position(|l| l.starts_with("fine_factor")).unwrap() + 1;
        assert_eq!(e.line, Some(line));
        assert!(e.to_string().starts_with(&format!("run.toml:{line}:")));
    }

    #[test]
    fn syntax_and_unknown_keys_are_anchored() {
        let text = GOOD.replace("mu = 1.0", "mu = 1.0\nmuu = 2.0");
        let e = LoadedConfig::parse(&text, "run.toml").unwrap_err();
        assert_eq!(e.line, Some(text.lines().position(|l| l.starts_with("muu")).unwrap() + 1));
        let e = LoadedConfig::parse("[basis\ncutoff = 3", "x.toml").unwrap_err();
        assert_eq!(e.line, Some(1));
    }

    #[test]
    fn missing_sections_are_reported() {
        let text = "[problem]\nd = 1\n[problem.potential]\nkind = \"zero\"\n";
        let loaded = LoadedConfig::parse(text, "run.toml").unwrap();
        let e = loaded.clone().resolve(Command::Solve, &Overrides::default()).unwrap_err();
        assert!(e.message.contains("[basis]"));
        let e = loaded.resolve(Command::Study, &Overrides::default()).unwrap_err();
        assert!(e.message.contains("[study]"));
    }

    #[test]
    fn invalid_problem_is_rejected() {
        let text = GOOD.replace("d = 1", "d = 4");
        let e = LoadedConfig::parse(&text, "run.toml")
            .unwrap()
            .resolve(Command::Solve, &Overrides::default())
            .unwrap_err();
        assert_eq!(e.line, Some(text.lines().position(|l| l == "[problem]").unwrap() + 1));
    }

    #[test]
    fn study_reference_must_be_large_enough() {
        let text = format!("{GOOD}\n[study]\ncutoffs = [8, 16]\nreference_cutoff = 32\n");
        let e = LoadedConfig::parse(&text, "run.toml")
            .unwrap()
            .resolve(Command::Study, &Overrides::default())
            .unwrap_err();
        assert_eq!(e.line, Some(text.lines().position(|l| l.starts_with("reference_cutoff")).unwrap() + 1));
    }
}
