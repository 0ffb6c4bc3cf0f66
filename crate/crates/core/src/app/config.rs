use std::fmt;
use std::path::PathBuf;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use toml::Spanned;

use crate::dynamics::{ValidationConfig, DEFAULT_EXIT_HORIZON};
use crate::error::{Error, Result};
use crate::hierarchy::{HierarchyOptions, Mode, OdeSystem};
use crate::moments::DEFAULT_MC_SAMPLES;
use crate::poly::{parse_polynomial, Polynomial};
use crate::sdp::SolverOptions;
use crate::semialgebraic::SemialgebraicSet;

/// Which tightenings a run solves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    #[default]
    #[serde(alias = "slack-u")]
    Slack,
    #[serde(alias = "forced-u-zero")]
    Forced,
    /// Slack first, then forced at every order whose `u` is near zero.
    Both,
}

/// A positive number, or `"auto"` for twice the estimated average exit time.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum TimeBound {
    Fixed(f64),
    #[default]
    Auto,
}

impl std::str::FromStr for TimeBound {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.trim() == "auto" {
            return Ok(TimeBound::Auto);
        }
        s.trim()
            .parse::<f64>()
            .map(TimeBound::Fixed)
            .map_err(|_| format!("expected a number or \"auto\", found `{s}`"))
    }
}

impl Serialize for TimeBound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TimeBound::Fixed(t) => s.serialize_f64(*t),
            TimeBound::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for TimeBound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = TimeBound;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"auto\"")
            }

            fn visit_f64<E: de::Error>(self, t: f64) -> std::result::Result<TimeBound, E> {
                Ok(TimeBound::Fixed(t))
            }

            fn visit_i64<E: de::Error>(self, t: i64) -> std::result::Result<TimeBound, E> {
                Ok(TimeBound::Fixed(t as f64))
            }

            fn visit_u64<E: de::Error>(self, t: u64) -> std::result::Result<TimeBound, E> {
                Ok(TimeBound::Fixed(t as f64))
            }

            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<TimeBound, E> {
                s.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// Sampling used when `time_bound = "auto"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoTimeConfig {
    pub samples: usize,
    pub horizon: f64,
}

impl Default for AutoTimeConfig {
    fn default() -> Self {
        AutoTimeConfig {
            samples: 2_000,
            horizon: DEFAULT_EXIT_HORIZON,
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_grid() -> usize {
    101
}

fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

/// One run, as read from a TOML file. Polynomials are strings in the
/// grammar of [`parse_polynomial`] over `x1 .. xn`.
///
/// `seed` is the only source of randomness: it overrides `validation.seed`
/// and seeds moments, exit-time sampling and validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    /// `f_1 .. f_n`.
    pub dynamics: Vec<Spanned<String>>,
    /// `g_i`, with `X = {g_i >= 0}`.
    pub constraints: Vec<Spanned<String>>,
    /// Appended as `R^2 - |x|^2` when no constraint is a ball.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball_radius: Option<f64>,
    /// Defaults to the minimal order of the set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_min: Option<u32>,
    pub k_max: u32,
    #[serde(default)]
    pub time_bound: TimeBound,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default = "default_true")]
    pub validate: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Level-set grid points per axis.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Fixed coordinates of the level-set slices when `n > 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<f64>>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub auto_time: AutoTimeConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
}

/// The parsed mathematical problem of a config.
#[derive(Clone, Debug)]
pub struct Problem {
    pub system: OdeSystem,
    pub set: SemialgebraicSet,
    pub orders: Vec<u32>,
}

/// 1-based line and column of byte `offset` in `text`.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn located(text: &str, offset: usize, message: impl fmt::Display) -> Error {
    let (line, col) = line_col(text, offset);
    Error::Config(format!("line {line}, column {col}: {message}"))
}

impl RunConfig {
    /// Builds a config from plain strings, with every other option at its
    /// default.
    pub fn new(n: usize, dynamics: &[&str], constraints: &[&str], k_max: u32) -> RunConfig {
        let spanned = |v: &[&str]| v.iter().map(|s| Spanned::new(0..0, s.to_string())).collect();
        RunConfig {
            n,
            dynamics: spanned(dynamics),
            constraints: spanned(constraints),
            ball_radius: None,
            k_min: None,
            k_max,
            time_bound: TimeBound::default(),
            mode: RunMode::default(),
            validate: true,
            seed: 0,
            out: default_out(),
            grid: default_grid(),
            anchor: None,
            mc_samples: default_mc_samples(),
            solver: SolverOptions::default(),
            auto_time: AutoTimeConfig::default(),
            validation: ValidationConfig::default(),
        }
    }

    /// Parses and checks a config. Errors carry the line and column of the
    /// offending token.
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let config: RunConfig = toml::from_str(text).map_err(|e| match e.span() {
            Some(span) => located(text, span.start, e.message()),
            None => Error::Config(e.message().to_string()),
        })?;
        config.check_located(Some(text))?;
        Ok(config)
    }

    pub fn from_file(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Parses the problem and checks every invariant that can be checked
    /// without solving.
    pub fn problem(&self) -> Result<Problem> {
        self.check_located(None)
    }

    fn check_located(&self, source: Option<&str>) -> Result<Problem> {
        let at = |item: &Spanned<String>, column: usize, message: String| -> Error {
            match source {
                Some(text) if item.span().end > item.span().start => {
                    let start = item.span().start;
                    let quote = if text[start..].starts_with("\"\"\"") || text[start..].starts_with("'''") {
                        3
                    } else {
                        1
                    };
                    located(text, start + quote + column.saturating_sub(1), message)
                }
                _ => Error::Config(message),
            }
        };
        let parse_all = |key: &str, items: &[Spanned<String>]| -> Result<Vec<Polynomial>> {
            items
                .iter()
                .enumerate()
                .map(|(i, item)| {
                    parse_polynomial(item.get_ref(), self.n).map_err(|e| match e {
                        Error::Parse { column, message } => at(item, column, format!("{key}[{i}]: {message}")),
                        other => at(item, 1, format!("{key}[{i}]: {other}")),
                    })
                })
                .collect()
        };

        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.dynamics.len() != self.n {
            return Err(Error::Config(format!(
                "dynamics has {} components but n = {}",
                self.dynamics.len(),
                self.n
            )));
        }
        let field = parse_all("dynamics", &self.dynamics)?;
        let constraints = parse_all("constraints", &self.constraints)?;
        if constraints.is_empty() && self.ball_radius.is_none() {
            return Err(Error::Config("constraints is empty and no ball_radius is given".into()));
        }
        let system = OdeSystem::new(field)?;
        let mut set = if constraints.is_empty() {
            SemialgebraicSet::ball(self.n, self.ball_radius.unwrap_or(1.0))?
        } else {
            SemialgebraicSet::new(self.n, constraints)?
        };
        if let Some(r) = self.ball_radius {
            set = set.ensure_ball_constraint(r)?;
        }
        if set.ball_radius().is_none() {
            return Err(Error::Config(
                "no constraint has the form R^2 - |x|^2; add one or set ball_radius".into(),
            ));
        }

        let set_k_min = set.k_min();
        let k_min = self.k_min.unwrap_or(set_k_min);
        if self.k_max < set_k_min {
            return Err(Error::Config(format!(
                "k_max = {} is below the minimal order {set_k_min} of the constraint set",
                self.k_max
            )));
        }
        if k_min < set_k_min {
            return Err(Error::Config(format!(
                "k_min = {k_min} is below the minimal order {set_k_min} of the constraint set"
            )));
        }
        if self.k_max < k_min {
            return Err(Error::Config(format!("k_max = {} is below k_min = {k_min}", self.k_max)));
        }
        if let TimeBound::Fixed(t) = self.time_bound {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("time_bound must be positive, got {t}")));
            }
        }
        if self.grid < 2 {
            return Err(Error::Config(format!("grid must be at least 2, got {}", self.grid)));
        }
        if let Some(a) = &self.anchor {
            if a.len() != self.n {
                return Err(Error::Config(format!("anchor has {} coordinates but n = {}", a.len(), self.n)));
            }
        }
        if self.auto_time.samples == 0 || !(self.auto_time.horizon > 0.0) {
            return Err(Error::Config("auto_time needs samples >= 1 and a positive horizon".into()));
        }
        Ok(Problem {
            system,
            set,
            orders: (k_min..=self.k_max).collect(),
        })
    }

    pub fn hierarchy_options(&self) -> HierarchyOptions {
        HierarchyOptions {
            solver: self.solver.clone(),
            mc_samples: self.mc_samples,
            seed: self.seed,
        }
    }

    /// Validation settings with the run seed applied.
    pub fn validation_config(&self) -> ValidationConfig {
        ValidationConfig {
            seed: self.seed,
            ..self.validation.clone()
        }
    }

    /// Modes solved first; `Both` adds forced solves afterwards.
    pub fn primary_mode(&self) -> Mode {
        match self.mode {
            RunMode::Forced => Mode::ForcedUZero,
            RunMode::Slack | RunMode::Both => Mode::SlackU,
        }
    }
}
