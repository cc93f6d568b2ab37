//! Experiment configuration: one TOML file plus dot-path overrides.

use std::path::{Path, PathBuf};

use realign_core::env::MomdpSpec;
use realign_core::interpreter::InterpreterConfig;
use realign_core::learner::LearnerConfig;
use realign_core::preference::UtilityFunction;
use realign_core::selector::SelectorKind;
use realign_core::user::UserSpec;
use serde::{Deserialize, Serialize};

use crate::envs;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Environment id, e.g. `treasure-grid` or `chore-grid-3`.
    pub env: String,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default = "default_interpreters")]
    pub interpreters: Vec<InterpreterConfig>,
    #[serde(default = "default_selectors")]
    pub selectors: Vec<SelectorKind>,
    #[serde(default = "default_review_every")]
    pub review_every: usize,
    pub users: Vec<UserSpec>,
    #[serde(default)]
    pub schedule: SwitchSchedule,
    pub interactions: usize,
    pub seeds: Seeds,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_interpreters() -> Vec<InterpreterConfig> {
    vec![InterpreterConfig::default()]
}

fn default_selectors() -> Vec<SelectorKind> {
    vec![SelectorKind::Argmax]
}

fn default_review_every() -> usize {
    1
}

/// Which simulated user reacts on each interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SwitchSchedule {
    /// The first listed user throughout.
    #[default]
    Single,
    /// Cycle through the users, switching every `every` interactions.
    RoundRobin { every: usize },
}

impl SwitchSchedule {
    pub fn user_at(&self, interaction: usize, num_users: usize) -> usize {
        match *self {
            Self::Single => 0,
            Self::RoundRobin { every } => (interaction / every.max(1)) % num_users.max(1),
        }
    }
}

/// Either a seed count (`0..n`) or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Self::Count(n) => (0..*n).collect(),
            Self::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Write one audit JSON-lines file per run.
    pub audit: bool,
    /// Where trained policy sets are cached.
    pub cache_dir: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            audit: true,
            cache_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::config("<file>", e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let value = toml::Value::Table(table);
        let cfg: Self = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.to_vec()
    }

    pub fn spec(&self) -> Result<MomdpSpec> {
        envs::resolve_or_config_error(&self.env, "env")
    }

    /// Checks every cross-reference before anything runs.
    pub fn validate(&self) -> Result<()> {
        let spec = self.spec()?;
        let m = spec.num_objectives;
        if self.seeds().is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.interpreters.is_empty() {
            return Err(Error::config("interpreters", "at least one interpreter is required"));
        }
        if self.selectors.is_empty() {
            return Err(Error::config("selectors", "at least one selector is required"));
        }
        if self.users.is_empty() {
            return Err(Error::config("users", "at least one simulated user is required"));
        }
        if self.review_every == 0 {
            return Err(Error::config("review_every", "must be at least 1"));
        }
        if let SwitchSchedule::RoundRobin { every: 0 } = self.schedule {
            return Err(Error::config("schedule.every", "must be at least 1"));
        }
        self.learner.validate().map_err(|e| Error::config("learner", e.to_string()))?;
        for (i, interp) in self.interpreters.iter().enumerate() {
            interp
                .validate(m)
                .map_err(|e| Error::config(format!("interpreters[{i}]"), e.to_string()))?;
        }
        for (i, user) in self.users.iter().enumerate() {
            let path = format!("users[{i}]");
            user.validate().map_err(|e| Error::config(&path, e.to_string()))?;
            if user.true_utility.num_objectives() != m {
                return Err(Error::config(
                    path,
                    format!("utility has {} objectives, environment has {m}", user.true_utility.num_objectives()),
                ));
            }
            if user.drift_rate > 0.0 && !matches!(user.true_utility, UtilityFunction::Linear { .. }) {
                return Err(Error::config(format!("{path}.drift_rate"), "drift needs a linear utility"));
            }
            if self.users[..i].iter().any(|u| u.user_id == user.user_id) {
                return Err(Error::config(format!("{path}.user_id"), format!("duplicate user id `{}`", user.user_id)));
            }
        }
        Ok(())
    }

    /// Distinct label per interpreter entry: the kind name, suffixed with
    /// its position when a kind appears more than once.
    pub fn interpreter_labels(&self) -> Vec<String> {
        self.interpreters
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let name = c.kind.name();
                if self.interpreters.iter().filter(|o| o.kind == c.kind).count() > 1 {
                    format!("{name}#{i}")
                } else {
                    name.to_string()
                }
            })
            .collect()
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `a.b.0.c=value`: tables are created on demand, numeric segments
/// index existing arrays. Values use TOML syntax; anything that does not
/// parse is taken as a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec, "override must look like key.path=value"))?;
    let path = path.trim();
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::config(path, "empty path segment"));
    }
    let value = parse_override_value(raw.trim());
    let (last, parents) = segments.split_last().expect("non-empty path");
    let mut cursor = TomlSlot::Table(table);
    for seg in parents {
        cursor = cursor.child(seg, path)?;
    }
    cursor.set(last, value, path)
}

enum TomlSlot<'a> {
    Table(&'a mut toml::Table),
    Array(&'a mut Vec<toml::Value>),
}

impl<'a> TomlSlot<'a> {
    fn child(self, seg: &str, path: &str) -> Result<TomlSlot<'a>> {
        let next = match self {
            TomlSlot::Table(t) => t
                .entry(seg.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new())),
            TomlSlot::Array(a) => {
                let i: usize = seg
                    .parse()
                    .map_err(|_| Error::config(path, format!("`{seg}` is not an array index")))?;
                let len = a.len();
                a.get_mut(i)
                    .ok_or_else(|| Error::config(path, format!("index {i} out of range (length {len})")))?
            }
        };
        match next {
            toml::Value::Table(t) => Ok(TomlSlot::Table(t)),
            toml::Value::Array(a) => Ok(TomlSlot::Array(a)),
            _ => Err(Error::config(path, format!("`{seg}` is not a table or array"))),
        }
    }

    fn set(self, seg: &str, value: toml::Value, path: &str) -> Result<()> {
        match self {
            TomlSlot::Table(t) => {
                t.insert(seg.to_string(), value);
            }
            TomlSlot::Array(a) => {
                let i: usize = seg
                    .parse()
                    .map_err(|_| Error::config(path, format!("`{seg}` is not an array index")))?;
                let len = a.len();
                *a.get_mut(i).ok_or_else(|| Error::config(path, format!("index {i} out of range (length {len})")))? = value;
            }
        }
        Ok(())
    }
}
