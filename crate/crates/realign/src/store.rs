//! On-disk formats: cached policy sets, user profiles, the population prior
//! and audit logs.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use realign_core::alignment::{InteractionRecord, PopulationPrior, UserProfile};
use realign_core::env::MomdpSpec;
use realign_core::learner::{build_policy_set, LearnerConfig, PolicySet};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::format(path, e))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    let tmp = path.with_extension("json.tmp");
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::format(path, e))?;
    bytes.push(b'\n');
    fs::write(&tmp, bytes).map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming to {}", path.display()), e))
}

fn check_schema(path: &Path, found: u32) -> Result<()> {
    if found == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::format(path, format!("schema version {found}, expected {SCHEMA_VERSION}")))
    }
}

/// Hex SHA-256 over the environment definition and learner settings.
pub fn learner_config_hash(spec: &MomdpSpec, cfg: &LearnerConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(spec).expect("spec serializes"));
    hasher.update([0u8]);
    hasher.update(serde_json::to_vec(cfg).expect("learner config serializes"));
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySetFile {
    pub schema_version: u32,
    pub env_id: String,
    pub learner_config_hash: String,
    pub learner: LearnerConfig,
    pub policy_set: PolicySet,
}

impl PolicySetFile {
    pub fn new(spec: &MomdpSpec, learner: &LearnerConfig, policy_set: PolicySet) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            env_id: spec.id.clone(),
            learner_config_hash: learner_config_hash(spec, learner),
            learner: learner.clone(),
            policy_set,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file: Self = read_json(path)?;
        check_schema(path, file.schema_version)?;
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// Trained policy sets keyed by environment id and learner-config hash.
#[derive(Debug, Clone)]
pub struct PolicyCache {
    dir: PathBuf,
}

impl PolicyCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, spec: &MomdpSpec, cfg: &LearnerConfig) -> PathBuf {
        let hash = learner_config_hash(spec, cfg);
        self.dir.join(format!("{}-{}.json", spec.id, &hash[..16]))
    }

    /// Loads the cached set when its hash matches, otherwise trains and
    /// stores it. Returns the set and whether it came from the cache.
    pub fn load_or_train(&self, spec: &MomdpSpec, cfg: &LearnerConfig) -> Result<(PolicySet, bool)> {
        let path = self.path_for(spec, cfg);
        let hash = learner_config_hash(spec, cfg);
        if path.exists() {
            let file = PolicySetFile::read(&path)?;
            if file.learner_config_hash == hash {
                file.policy_set.validate(spec)?;
                return Ok((file.policy_set, true));
            }
        }
        let set = build_policy_set(spec, cfg)?;
        PolicySetFile::new(spec, cfg, set.clone()).write(&path)?;
        Ok((set, false))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    schema_version: u32,
    profile: UserProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PopulationFile {
    schema_version: u32,
    population: PopulationPrior,
}

/// User ids become file names, so they are restricted to a safe alphabet.
pub fn validate_user_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b'.')
        && !id.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(Error::config(
            "user_id",
            format!("`{id}` must be 1-64 characters of [A-Za-z0-9._-] and not start with '.'"),
        ))
    }
}

/// One JSON file per user plus a population file, per environment.
#[derive(Debug, Clone)]
pub struct ProfileStore {
    dir: PathBuf,
}

impl ProfileStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn env_dir(&self, env_id: &str) -> PathBuf {
        self.dir.join(env_id)
    }

    fn profile_path(&self, env_id: &str, user_id: &str) -> Result<PathBuf> {
        validate_user_id(user_id)?;
        Ok(self.env_dir(env_id).join("profiles").join(format!("{user_id}.json")))
    }

    pub fn load_profile(&self, env_id: &str, user_id: &str) -> Result<Option<UserProfile>> {
        let path = self.profile_path(env_id, user_id)?;
        if !path.exists() {
            return Ok(None);
        }
        let file: ProfileFile = read_json(&path)?;
        check_schema(&path, file.schema_version)?;
        Ok(Some(file.profile))
    }

    pub fn save_profile(&self, env_id: &str, profile: &UserProfile) -> Result<()> {
        let path = self.profile_path(env_id, &profile.user_id)?;
        write_json(
            &path,
            &ProfileFile {
                schema_version: SCHEMA_VERSION,
                profile: profile.clone(),
            },
        )
    }

    pub fn load_population(&self, env_id: &str, num_objectives: usize) -> Result<PopulationPrior> {
        let path = self.env_dir(env_id).join("population.json");
        if !path.exists() {
            return Ok(PopulationPrior::new(num_objectives));
        }
        let file: PopulationFile = read_json(&path)?;
        check_schema(&path, file.schema_version)?;
        file.population.validate()?;
        Ok(file.population)
    }

    pub fn save_population(&self, env_id: &str, population: &PopulationPrior) -> Result<()> {
        write_json(
            &self.env_dir(env_id).join("population.json"),
            &PopulationFile {
                schema_version: SCHEMA_VERSION,
                population: population.clone(),
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditLine {
    pub schema_version: u32,
    pub record: InteractionRecord,
}

/// Serializes records as JSON lines, one record per line.
pub fn audit_jsonl(records: &[InteractionRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for record in records {
        serde_json::to_writer(
            &mut out,
            &AuditLine {
                schema_version: SCHEMA_VERSION,
                record: record.clone(),
            },
        )
        .expect("records serialize");
        out.push(b'\n');
    }
    out
}

pub fn write_audit(path: &Path, records: &[InteractionRecord]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&audit_jsonl(records))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_audit(path: &Path) -> Result<Vec<InteractionRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: AuditLine =
            serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        check_schema(path, parsed.schema_version)?;
        records.push(parsed.record);
    }
    Ok(records)
}
