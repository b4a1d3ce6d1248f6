//! On-disk layout of a deployment directory.
//!
//! ```text
//! deployment.json          engine, validator ids and vote secret
//! params.json              public system parameters
//! pkg.key                  master secret, hex
//! chain.jsonl              the ledger
//! keys/<event>/<id>.key    issued event keys, hex
//! mail/<event>/<id>.log    received frames, one base64 line each
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use emcoord_core::bilinear::{EngineSpec, FromSpec};
use emcoord_core::ibsc::{setup_with_secret, EventKeys, MasterKey, SystemParams};
use emcoord_core::ledger::{
    parse_jsonl, Clock, Ledger, StaffRecord, StepClock, SystemClock, ValidatorSet,
};

use crate::exit::{CliError, CliResult, Exit};

/// Genesis time of seeded deployments.
pub const SEEDED_EPOCH: u64 = 1_700_000_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deployment {
    pub engine: EngineSpec,
    pub validators: Vec<String>,
    /// Hex; keys the placeholder validator votes.
    pub validator_secret: String,
}

impl Deployment {
    pub fn validator_set(&self) -> CliResult<ValidatorSet> {
        let secret = hex::decode(&self.validator_secret)
            .map_err(|e| CliError::failure(format!("deployment.json: validator_secret: {e}")))?;
        let ids: Vec<&str> = self.validators.iter().map(String::as_str).collect();
        Ok(ValidatorSet::derived(&ids, &secret))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublicParams {
    pub engine: String,
    pub insecure: bool,
    pub fingerprint: String,
    pub generator: String,
    pub mpk: String,
}

pub struct Store {
    pub dir: PathBuf,
    /// Deterministic randomness for demos and tests.
    pub seed: Option<u64>,
}

pub fn default_staff() -> BTreeMap<String, StaffRecord> {
    [
        ("medic-1", "red-cross"),
        ("medic-2", "red-cross"),
        ("medic-3", "red-cross"),
        ("fire-1", "fire-dept"),
        ("fire-2", "fire-dept"),
        ("police-1", "police"),
    ]
    .into_iter()
    .map(|(id, entity)| {
        (
            id.to_string(),
            StaffRecord {
                entity: entity.into(),
                identity: format!("{id}@{entity}"),
            },
        )
    })
    .collect()
}

impl Store {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn chain_path(&self) -> PathBuf {
        self.path("chain.jsonl")
    }

    pub fn initialized(&self) -> bool {
        self.path("deployment.json").exists()
    }

    /// Fresh generator for one purpose. Seeded stores mix the purpose and
    /// the chain tip in, so repeated invocations never replay randomness.
    pub fn rng(&self, purpose: &str) -> ChaCha20Rng {
        match self.seed {
            None => ChaCha20Rng::from_entropy(),
            Some(seed) => {
                let tip = fs::read_to_string(self.chain_path()).unwrap_or_default();
                let mut h = Sha256::new();
                h.update(b"emcoord-cli-rng");
                h.update(seed.to_be_bytes());
                h.update((purpose.len() as u32).to_be_bytes());
                h.update(purpose.as_bytes());
                h.update(Sha256::digest(tip.as_bytes()));
                ChaCha20Rng::from_seed(h.finalize().into())
            }
        }
    }

    pub fn clock(&self, after: u64) -> Box<dyn Clock> {
        match self.seed {
            None => Box::new(SystemClock),
            Some(_) => Box::new(StepClock {
                next: after + 1,
                step: 1,
            }),
        }
    }

    pub fn deployment(&self) -> CliResult<Deployment> {
        if !self.initialized() {
            return Err(CliError::usage(format!(
                "{} holds no deployment; run `pkg init` first",
                self.dir.display()
            )));
        }
        read_json(&self.path("deployment.json"))
    }

    pub fn write_atomic(&self, path: &Path, data: &[u8]) -> CliResult {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, data)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Same as [`Store::write_atomic`], readable by the owner only.
    pub fn write_secret(&self, path: &Path, data: &[u8]) -> CliResult {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("tmp");
        let mut opts = fs::OpenOptions::new();
        opts.write(true).create(true).truncate(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            opts.mode(0o600);
        }
        opts.open(&tmp)?.write_all(data)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn pkg<E: FromSpec>(&self, engine: E) -> CliResult<(SystemParams<E>, MasterKey)> {
        let text = fs::read_to_string(self.path("pkg.key"))?;
        let bytes = hex::decode(text.trim())
            .map_err(|e| CliError::failure(format!("pkg.key: {e}")))?;
        let msk = MasterKey::from_bytes(&engine, &bytes)
            .map_err(|e| CliError::failure(format!("pkg.key: {e}")))?;
        let scalar = msk.scalar().clone();
        Ok(setup_with_secret(engine, scalar))
    }

    /// What a device holds: parameters without the master key.
    pub fn public_params<E: FromSpec>(&self, engine: E) -> CliResult<SystemParams<E>> {
        let p: PublicParams = read_json(&self.path("params.json"))?;
        let point = |hex_str: &str, what: &str| {
            hex::decode(hex_str)
                .ok()
                .and_then(|b| engine.decode_g(&b).ok())
                .ok_or_else(|| CliError::failure(format!("params.json: bad {what}")))
        };
        let generator = point(&p.generator, "generator")?;
        let mpk = point(&p.mpk, "mpk")?;
        let params = SystemParams {
            engine,
            generator,
            mpk,
        };
        if params.fingerprint() != p.fingerprint {
            return Err(CliError::new(Exit::Reject, "params.json fingerprint mismatch"));
        }
        Ok(params)
    }

    pub fn ledger(&self, deployment: &Deployment, purpose: &str) -> CliResult<Ledger> {
        let text = fs::read_to_string(self.chain_path())?;
        let blocks = parse_jsonl(&text).map_err(|line| {
            CliError::new(
                Exit::Reject,
                format!("chain.jsonl line {} is not a canonical block", line + 1),
            )
        })?;
        let after = blocks.last().map_or(SEEDED_EPOCH, |b| b.timestamp);
        let rng = self.rng(purpose);
        Ok(Ledger::load(
            blocks,
            deployment.validator_set()?,
            self.clock(after),
            Box::new(rng),
        )?)
    }

    pub fn save_chain(&self, ledger: &Ledger) -> CliResult {
        self.write_atomic(&self.chain_path(), ledger.chain().to_jsonl().as_bytes())
    }

    fn key_path(&self, event_id: &str, identity: &str) -> PathBuf {
        self.dir
            .join("keys")
            .join(safe(event_id))
            .join(format!("{}.key", safe(identity)))
    }

    pub fn save_keys<E: FromSpec>(&self, engine: &E, keys: &EventKeys<E>) -> CliResult {
        let identity = String::from_utf8_lossy(&keys.id).into_owned();
        let path = self.key_path(&keys.ctx.event_id, &identity);
        self.write_secret(&path, hex::encode(keys.to_bytes(engine)).as_bytes())
    }

    pub fn load_keys<E: FromSpec>(
        &self,
        engine: &E,
        event_id: &str,
        identity: &str,
    ) -> CliResult<Option<EventKeys<E>>> {
        let path = self.key_path(event_id, identity);
        let Ok(text) = fs::read_to_string(&path) else {
            return Ok(None);
        };
        let bytes = hex::decode(text.trim())
            .map_err(|e| CliError::failure(format!("{}: {e}", path.display())))?;
        EventKeys::from_bytes(engine, &bytes)
            .map(Some)
            .map_err(|e| CliError::failure(format!("{}: {e}", path.display())))
    }

    pub fn mailbox(&self, event_id: &str, identity: &str) -> PathBuf {
        self.dir
            .join("mail")
            .join(safe(event_id))
            .join(format!("{}.log", safe(identity)))
    }
}

/// File-name-safe rendering of an id.
fn safe(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.@".contains(c) { c } else { '_' })
        .collect()
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::failure(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::failure(format!("{}: {e}", path.display())))
}

pub fn random_secret(rng: &mut impl RngCore) -> String {
    let mut s = [0u8; 32];
    rng.fill_bytes(&mut s);
    hex::encode(s)
}
