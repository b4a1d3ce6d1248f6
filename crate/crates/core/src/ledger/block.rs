use std::collections::{BTreeMap, BTreeSet};

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::contract::ContractTransaction;
use super::{LedgerConfig, LedgerError, StaffRecord};

/// Digest width of block hashes.
pub const DIGEST_LEN: usize = 32;

/// `prev_hash` of the genesis block: ASCII "0000" left-padded with zero bytes.
pub fn genesis_prev_hash() -> [u8; DIGEST_LEN] {
    let mut out = [0u8; DIGEST_LEN];
    out[DIGEST_LEN - 4..].copy_from_slice(b"0000");
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenesisRecord {
    pub marker: String,
    pub validators: Vec<String>,
    pub staff: BTreeMap<String, StaffRecord>,
    pub config: LedgerConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BlockPayload {
    Genesis(GenesisRecord),
    Transaction(ContractTransaction),
}

impl BlockPayload {
    /// Canonical bytes: compact JSON in declaration order.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("payload serialization is infallible")
    }

    pub fn event_id(&self) -> Option<&str> {
        match self {
            BlockPayload::Genesis(_) => None,
            BlockPayload::Transaction(tx) => Some(tx.event_id()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vote {
    pub validator: String,
    /// HMAC-SHA256 of the block hash under the validator's registration key.
    #[serde(with = "hex_vec")]
    pub signature: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub index: u64,
    #[serde(with = "hex_digest")]
    pub prev_hash: [u8; DIGEST_LEN],
    pub payload: BlockPayload,
    pub timestamp: u64,
    pub votes: Vec<Vote>,
    #[serde(with = "hex_digest")]
    pub hash: [u8; DIGEST_LEN],
}

pub fn block_digest(
    index: u64,
    prev_hash: &[u8; DIGEST_LEN],
    payload: &BlockPayload,
    timestamp: u64,
) -> [u8; DIGEST_LEN] {
    let mut h = Sha256::new();
    h.update(index.to_be_bytes());
    h.update(prev_hash);
    h.update(payload.canonical_bytes());
    h.update(timestamp.to_be_bytes());
    h.finalize().into()
}

impl Block {
    pub fn recompute_hash(&self) -> [u8; DIGEST_LEN] {
        block_digest(self.index, &self.prev_hash, &self.payload, self.timestamp)
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash)
    }

    /// One canonical JSON line, without the trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("block serialization is infallible")
    }
}

/// A block waiting for votes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Proposal {
    pub index: u64,
    pub prev_hash: [u8; DIGEST_LEN],
    pub payload: BlockPayload,
    pub timestamp: u64,
    pub hash: [u8; DIGEST_LEN],
}

/// Registered validators and their vote keys.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ValidatorSet {
    keys: BTreeMap<String, [u8; 32]>,
}

type HmacSha256 = Hmac<Sha256>;

impl ValidatorSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, id: impl Into<String>, key: [u8; 32]) {
        self.keys.insert(id.into(), key);
    }

    /// Deterministic keys derived from a deployment secret; convenient for
    /// simulations where every validator runs in one process.
    pub fn derived(ids: &[&str], deployment_secret: &[u8]) -> Self {
        let mut set = ValidatorSet::new();
        for id in ids {
            let mut h = Sha256::new();
            h.update(b"validator-key");
            h.update((id.len() as u32).to_be_bytes());
            h.update(id.as_bytes());
            h.update(deployment_secret);
            set.register(*id, h.finalize().into());
        }
        set
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.keys.keys().map(String::as_str)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.keys.contains_key(id)
    }

    /// At least half of the registered validators, rounded up.
    pub fn quorum(&self) -> usize {
        self.keys.len().div_ceil(2)
    }

    pub fn sign(&self, id: &str, hash: &[u8; DIGEST_LEN]) -> Option<Vote> {
        let key = self.keys.get(id)?;
        let mut mac = HmacSha256::new_from_slice(key).expect("any key length");
        mac.update(hash);
        Some(Vote {
            validator: id.to_string(),
            signature: mac.finalize().into_bytes().to_vec(),
        })
    }

    fn verify(&self, vote: &Vote, hash: &[u8; DIGEST_LEN]) -> bool {
        let Some(key) = self.keys.get(&vote.validator) else {
            return false;
        };
        let mut mac = HmacSha256::new_from_slice(key).expect("any key length");
        mac.update(hash);
        mac.verify_slice(&vote.signature).is_ok()
    }

    /// Checks votes are distinct, known, correctly signed, and reach quorum.
    pub fn check_votes(&self, votes: &[Vote], hash: &[u8; DIGEST_LEN]) -> Result<(), LedgerError> {
        let mut seen = BTreeSet::new();
        for vote in votes {
            if !seen.insert(vote.validator.as_str()) {
                return Err(LedgerError::DuplicateVote(vote.validator.clone()));
            }
            if !self.contains(&vote.validator) {
                return Err(LedgerError::UnknownValidator(vote.validator.clone()));
            }
            if !self.verify(vote, hash) {
                return Err(LedgerError::BadVote(vote.validator.clone()));
            }
        }
        if votes.len() < self.quorum() {
            return Err(LedgerError::QuorumNotReached {
                votes: votes.len(),
                required: self.quorum(),
                validators: self.len(),
            });
        }
        Ok(())
    }
}

/// Hash-linked list of blocks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Chain {
    blocks: Vec<Block>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Validity {
    Valid,
    /// Index of the first block that fails a check.
    Invalid(u64),
}

impl Chain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_blocks(blocks: Vec<Block>) -> Self {
        Chain { blocks }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    pub fn propose(&self, payload: BlockPayload, timestamp: u64) -> Proposal {
        let index = self.blocks.len() as u64;
        let prev_hash = self.tip().map_or_else(genesis_prev_hash, |b| b.hash);
        let hash = block_digest(index, &prev_hash, &payload, timestamp);
        Proposal {
            index,
            prev_hash,
            payload,
            timestamp,
            hash,
        }
    }

    /// Appends a voted proposal. Fails if the proposal no longer extends the tip
    /// or the votes do not reach quorum.
    pub fn append(
        &mut self,
        proposal: Proposal,
        votes: Vec<Vote>,
        validators: &ValidatorSet,
    ) -> Result<&Block, LedgerError> {
        let expected_prev = self.tip().map_or_else(genesis_prev_hash, |b| b.hash);
        if proposal.index != self.blocks.len() as u64 || proposal.prev_hash != expected_prev {
            return Err(LedgerError::StaleProposal);
        }
        validators.check_votes(&votes, &proposal.hash)?;
        self.blocks.push(Block {
            index: proposal.index,
            prev_hash: proposal.prev_hash,
            payload: proposal.payload,
            timestamp: proposal.timestamp,
            votes,
            hash: proposal.hash,
        });
        Ok(self.blocks.last().expect("just pushed"))
    }

    pub fn validate(&self, validators: &ValidatorSet) -> Validity {
        validate_blocks(&self.blocks, validators)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            out.push_str(&b.to_json_line());
            out.push('\n');
        }
        out
    }
}

/// Recomputes every hash, linkage and vote set.
pub fn validate_blocks(blocks: &[Block], validators: &ValidatorSet) -> Validity {
    let mut prev = genesis_prev_hash();
    for (i, b) in blocks.iter().enumerate() {
        let ok = b.index == i as u64
            && b.prev_hash == prev
            && b.recompute_hash() == b.hash
            && validators.check_votes(&b.votes, &b.hash).is_ok()
            && matches!(b.payload, BlockPayload::Genesis(_)) == (i == 0);
        if !ok {
            return Validity::Invalid(i as u64);
        }
        prev = b.hash;
    }
    Validity::Valid
}

/// Parses a JSON-lines chain. Each line must be exactly the canonical
/// rendering of the block it decodes to; a line that fails to parse or is
/// not canonical reports its own index.
pub fn parse_jsonl(text: &str) -> Result<Vec<Block>, u64> {
    let mut blocks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let block: Block = serde_json::from_str(line).map_err(|_| i as u64)?;
        if block.to_json_line() != line {
            return Err(i as u64);
        }
        blocks.push(block);
    }
    Ok(blocks)
}

/// [`parse_jsonl`] followed by [`validate_blocks`].
pub fn validate_jsonl(text: &str, validators: &ValidatorSet) -> Validity {
    match parse_jsonl(text) {
        Ok(blocks) => validate_blocks(&blocks, validators),
        Err(line) => {
            // a structurally valid prefix may still fail earlier
            let prefix: Vec<Block> = text
                .lines()
                .take(line as usize)
                .filter_map(|l| serde_json::from_str(l).ok())
                .collect();
            match validate_blocks(&prefix, validators) {
                Validity::Invalid(i) => Validity::Invalid(i),
                Validity::Valid => Validity::Invalid(line),
            }
        }
    }
}

mod hex_digest {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let v = hex::decode(&s).map_err(D::Error::custom)?;
        v.try_into().map_err(|_| D::Error::custom("expected 32 bytes"))
    }
}

mod hex_vec {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn validators(n: usize) -> ValidatorSet {
        let ids: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        ValidatorSet::derived(&refs, b"test")
    }

    fn genesis() -> BlockPayload {
        BlockPayload::Genesis(GenesisRecord {
            marker: "genesis".into(),
            validators: vec![],
            staff: BTreeMap::new(),
            config: LedgerConfig::default(),
        })
    }

    fn votes(set: &ValidatorSet, hash: &[u8; 32], n: usize) -> Vec<Vote> {
        set.ids().take(n).map(|id| set.sign(id, hash).unwrap()).collect()
    }

    #[test]
    fn genesis_marker() {
        let g = genesis_prev_hash();
        assert_eq!(
            hex::encode(g),
            "0000000000000000000000000000000000000000000000000000000030303030"
        );
    }

    #[test]
    fn quorum_table() {
        for (v, n, ok) in [(5, 3, true), (5, 2, false), (4, 2, true), (1, 1, true), (3, 1, false)] {
            let set = validators(v);
            let chain = Chain::new();
            let p = chain.propose(genesis(), 0);
            let vs = votes(&set, &p.hash, n);
            let mut chain = chain;
            assert_eq!(chain.append(p, vs, &set).is_ok(), ok, "V={v} votes={n}");
        }
    }

    #[test]
    fn duplicate_and_foreign_votes_are_refused() {
        let set = validators(3);
        let mut chain = Chain::new();
        let p = chain.propose(genesis(), 0);
        let v0 = set.sign("v0", &p.hash).unwrap();
        assert_eq!(
            chain.append(p.clone(), vec![v0.clone(), v0.clone()], &set),
            Err(LedgerError::DuplicateVote("v0".into()))
        );
        let stranger = validators(5).sign("v4", &p.hash).unwrap();
        assert_eq!(
            chain.append(p.clone(), vec![v0.clone(), stranger], &set),
            Err(LedgerError::UnknownValidator("v4".into()))
        );
        let mut forged = set.sign("v1", &p.hash).unwrap();
        forged.signature[0] ^= 1;
        assert_eq!(
            chain.append(p, vec![v0, forged], &set),
            Err(LedgerError::BadVote("v1".into()))
        );
    }

    #[test]
    fn stale_proposals_are_refused() {
        let set = validators(1);
        let mut chain = Chain::new();
        let p = chain.propose(genesis(), 0);
        let stale = p.clone();
        let v = votes(&set, &p.hash, 1);
        chain.append(p, v.clone(), &set).unwrap();
        assert_eq!(chain.append(stale, v, &set), Err(LedgerError::StaleProposal));
    }

    #[test]
    fn jsonl_roundtrip_and_canonical_check() {
        let set = validators(1);
        let mut chain = Chain::new();
        let p = chain.propose(genesis(), 42);
        let v = votes(&set, &p.hash, 1);
        chain.append(p, v, &set).unwrap();
        let text = chain.to_jsonl();
        assert_eq!(parse_jsonl(&text).unwrap(), chain.blocks());
        let spaced = text.replacen("{\"index\"", "{ \"index\"", 1);
        assert_eq!(parse_jsonl(&spaced), Err(0));
        assert_eq!(validate_jsonl(&text, &set), Validity::Valid);
    }
}
