use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use super::generators::Family;
use crate::decomposition::BuildParams;
use crate::shuffler::ShufflerParams;
use crate::sorting::EngineParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("unknown profile '{0}'")]
    UnknownProfile(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Task1,
    Task1General,
    Sort,
    SortViaRoute,
    RouteViaSort,
    RouteViaSortBlackBox,
}

impl Task {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "task1" => Task::Task1,
            "task1-general" => Task::Task1General,
            "sort" => Task::Sort,
            "sort-via-route" => Task::SortViaRoute,
            "route-via-sort" => Task::RouteViaSort,
            "route-via-sort-blackbox" => Task::RouteViaSortBlackBox,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Task1 => "task1",
            Task::Task1General => "task1-general",
            Task::Sort => "sort",
            Task::SortViaRoute => "sort-via-route",
            Task::RouteViaSort => "route-via-sort",
            Task::RouteViaSortBlackBox => "route-via-sort-blackbox",
        }
    }
}

/// How routing destinations are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pattern {
    Permutation,
    ManyToOne,
    Random,
    /// Sorting keys from a small range.
    Duplicates,
    Distinct,
}

impl Pattern {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "permutation" => Pattern::Permutation,
            "many-to-one" => Pattern::ManyToOne,
            "random" => Pattern::Random,
            "duplicates" => Pattern::Duplicates,
            "distinct" => Pattern::Distinct,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Permutation => "permutation",
            Pattern::ManyToOne => "many-to-one",
            Pattern::Random => "random",
            Pattern::Duplicates => "duplicates",
            Pattern::Distinct => "distinct",
        }
    }
}

/// Which assertions a run enables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tier {
    Always,
    PaperRegime,
}

/// A complete description of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    pub eps: (u64, u64),
    pub k: Option<u64>,
    pub psi: BigRational,
    pub leaf_threshold: Option<usize>,
    pub holdout: usize,
    pub l: usize,
    pub task: Task,
    pub pattern: Pattern,
    pub queries: usize,
    pub tier: Tier,
    pub round_cap: Option<u64>,
    /// Report oracle rounds in the phase table.
    pub oracle_column: bool,
    pub out: Option<String>,
    pub trace: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            family: Family::RandomRegular(4),
            n: 64,
            seed: 1,
            eps: (1, 2),
            k: None,
            psi: BigRational::new(BigInt::from(1), BigInt::from(8)),
            leaf_threshold: Some(4),
            holdout: 0,
            l: 1,
            task: Task::Task1,
            pattern: Pattern::Permutation,
            queries: 1,
            tier: Tier::Always,
            round_cap: None,
            oracle_column: true,
            out: None,
            trace: false,
        }
    }
}

fn parse_ratio(s: &str) -> Option<BigRational> {
    let (a, b) = s.split_once('/').unwrap_or((s, "1"));
    let (a, b): (i64, i64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
    (b != 0).then(|| BigRational::new(a.into(), b.into()))
}

impl ExperimentConfig {
    /// Flat `key = value` text; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1, msg: "expected key = value".into() })?;
            c.set(k.trim(), v.trim())?;
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue { key: key.into(), value: value.into() };
        let opt = |v: &str| -> Result<Option<u64>, ConfigError> {
            if v == "none" {
                Ok(None)
            } else {
                v.parse().map(Some).map_err(|_| bad())
            }
        };
        match key {
            "name" => self.name = value.into(),
            "family" => self.family = Family::parse(value).map_err(|_| bad())?,
            "n" => self.n = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "eps" => {
                let r = parse_ratio(value).ok_or_else(bad)?;
                let (a, b) = (r.numer().try_into().map_err(|_| bad())?, r.denom().try_into().map_err(|_| bad())?);
                self.eps = (a, b);
            }
            "k" => self.k = opt(value)?,
            "psi" => self.psi = parse_ratio(value).ok_or_else(bad)?,
            "leaf_threshold" => self.leaf_threshold = opt(value)?.map(|v| v as usize),
            "holdout" => self.holdout = value.parse().map_err(|_| bad())?,
            "L" | "l" => self.l = value.parse().map_err(|_| bad())?,
            "task" => self.task = Task::parse(value).ok_or_else(bad)?,
            "pattern" => self.pattern = Pattern::parse(value).ok_or_else(bad)?,
            "queries" => self.queries = value.parse().map_err(|_| bad())?,
            "tier" => {
                self.tier = match value {
                    "always" => Tier::Always,
                    "paper-regime" => Tier::PaperRegime,
                    _ => return Err(bad()),
                }
            }
            "round_cap" => self.round_cap = opt(value)?,
            "oracle_column" => self.oracle_column = value.parse().map_err(|_| bad())?,
            "out" => self.out = (value != "none").then(|| value.to_string()),
            "trace" => self.trace = value.parse().map_err(|_| bad())?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Canonical text; `parse(render())` round-trips.
    pub fn render(&self) -> String {
        let o = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_else(|| "none".into());
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "family = {}", self.family.name());
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "eps = {}/{}", self.eps.0, self.eps.1);
        let _ = writeln!(s, "k = {}", o(self.k));
        let _ = writeln!(s, "psi = {}", self.psi);
        let _ = writeln!(s, "leaf_threshold = {}", o(self.leaf_threshold.map(|v| v as u64)));
        let _ = writeln!(s, "holdout = {}", self.holdout);
        let _ = writeln!(s, "L = {}", self.l);
        let _ = writeln!(s, "task = {}", self.task.name());
        let _ = writeln!(s, "pattern = {}", self.pattern.name());
        let _ = writeln!(s, "queries = {}", self.queries);
        let _ = writeln!(s, "tier = {}", if self.tier == Tier::Always { "always" } else { "paper-regime" });
        let _ = writeln!(s, "round_cap = {}", o(self.round_cap));
        let _ = writeln!(s, "oracle_column = {}", self.oracle_column);
        let _ = writeln!(s, "out = {}", self.out.as_deref().unwrap_or("none"));
        let _ = writeln!(s, "trace = {}", self.trace);
        s
    }

    pub fn build_params(&self) -> BuildParams {
        BuildParams { eps: self.eps, k: self.k, psi: self.psi.clone(), leaf_threshold: self.leaf_threshold, seed: self.seed, holdout: self.holdout, ..Default::default() }
    }

    pub fn shuffler_params(&self) -> ShufflerParams {
        ShufflerParams { seed: self.seed.wrapping_add(7), ..Default::default() }
    }

    pub fn engine_params(&self) -> EngineParams {
        EngineParams { round_cap: self.round_cap, ..Default::default() }
    }
}

/// The runs behind `bench --profile NAME`.
pub fn profile(name: &str) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let base = ExperimentConfig::default();
    let mk = |name: &str, f: &dyn Fn(&mut ExperimentConfig)| {
        let mut c = ExperimentConfig { name: name.into(), ..base.clone() };
        f(&mut c);
        c
    };
    Ok(match name {
        "smoke" => vec![
            mk("smoke-task1", &|c| c.queries = 3),
            mk("smoke-sort", &|c| {
                c.task = Task::Sort;
                c.l = 2;
                c.pattern = Pattern::Duplicates;
                c.queries = 3;
            }),
            mk("smoke-route-via-sort", &|c| c.task = Task::RouteViaSort),
        ],
        "desk" => {
            let mut v = Vec::new();
            for n in [64, 128, 256] {
                for (p, l) in [(Pattern::Permutation, 1), (Pattern::ManyToOne, 4), (Pattern::Random, 2)] {
                    v.push(mk(&format!("desk-task1-{n}-{}", p.name()), &|c| {
                        c.n = n;
                        c.pattern = p;
                        c.l = l;
                        c.queries = 4;
                    }));
                }
            }
            v.push(mk("desk-task1-holdout", &|c| {
                c.holdout = 4;
                c.queries = 4;
            }));
            v.push(mk("desk-task1-depth2", &|c| {
                c.n = 128;
                c.k = Some(4);
                c.leaf_threshold = Some(8);
                c.queries = 2;
            }));
            v.push(mk("desk-general", &|c| {
                c.family = Family::Wheel;
                c.n = 33;
                c.task = Task::Task1General;
                c.pattern = Pattern::Random;
                c.l = 2;
                c.queries = 2;
            }));
            v.push(mk("desk-sort", &|c| {
                c.n = 256;
                c.task = Task::Sort;
                c.l = 4;
                c.pattern = Pattern::Duplicates;
                c.queries = 4;
            }));
            v.push(mk("desk-sort-via-route", &|c| {
                c.task = Task::SortViaRoute;
                c.pattern = Pattern::Distinct;
            }));
            v.push(mk("desk-route-via-sort", &|c| {
                c.task = Task::RouteViaSort;
                c.l = 3;
                c.pattern = Pattern::Random;
            }));
            v.push(mk("desk-route-via-sort-blackbox", &|c| {
                c.task = Task::RouteViaSortBlackBox;
                c.l = 3;
                c.pattern = Pattern::Random;
            }));
            v
        }
        "paper-regime" => vec![mk("paper-regime-task1", &|c| {
            c.family = Family::RandomRegular(8);
            c.n = 2048;
            c.k = Some(2);
            c.leaf_threshold = Some(1024);
            c.tier = Tier::PaperRegime;
            c.pattern = Pattern::Permutation;
        })],
        _ => return Err(ConfigError::UnknownProfile(name.into())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_round_trips() {
        let mut c = ExperimentConfig { family: Family::Gnp(15), k: Some(3), round_cap: Some(99), out: Some("x".into()), ..Default::default() };
        c.set("psi", "3/16").unwrap();
        c.set("eps", "2/4").unwrap();
        assert_eq!(c.eps, (1, 2));
        assert_eq!(ExperimentConfig::parse(&c.render()).unwrap(), c);
    }

    #[test]
    fn comments_and_errors() {
        let c = ExperimentConfig::parse("# header\nn = 32 # trailing\n\nL=3\nleaf_threshold = none\n").unwrap();
        assert_eq!((c.n, c.l, c.leaf_threshold), (32, 3, None));
        assert!(matches!(ExperimentConfig::parse("n 32"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("colour = red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(ExperimentConfig::parse("psi = 1/0"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(ExperimentConfig::parse("task = task9"), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn profiles() {
        assert!(matches!(profile("nope"), Err(ConfigError::UnknownProfile(_))));
        for p in ["smoke", "desk", "paper-regime"] {
            let v = profile(p).unwrap();
            let names: std::collections::BTreeSet<_> = v.iter().map(|c| c.name.clone()).collect();
            assert_eq!(names.len(), v.len(), "{p}: duplicate experiment names");
        }
        assert!(profile("paper-regime").unwrap().iter().all(|c| c.tier == Tier::PaperRegime));
    }

    #[test]
    fn task_and_pattern_names() {
        for t in [Task::Task1, Task::Task1General, Task::Sort, Task::SortViaRoute, Task::RouteViaSort, Task::RouteViaSortBlackBox] {
            assert_eq!(Task::parse(t.name()), Some(t));
        }
        for p in [Pattern::Permutation, Pattern::ManyToOne, Pattern::Random, Pattern::Duplicates, Pattern::Distinct] {
            assert_eq!(Pattern::parse(p.name()), Some(p));
        }
    }
}
