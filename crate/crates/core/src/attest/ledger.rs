//! Append-only, hash-chained ledger persisted as one JSON object per line.

use std::collections::BTreeMap;

use ed25519_dalek::VerifyingKey;
use serde::{Deserialize, Serialize};

use super::backend::{encode_params, Circuit, ProofBackend, SetupArtifact, Statement};
use super::wire::{Digest, Encoder};
use super::{hexbytes, public_input, AttestError, EconomicSeriesRecord, PolicyCommitment, RejectReason};
use crate::rules::RuleCoefficients;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryBody {
    Init {
        circuit: Circuit,
        params: RuleCoefficients,
        backend: String,
        setup: SetupArtifact,
    },
    Provider {
        id: String,
        #[serde(with = "hexbytes")]
        key: [u8; 32],
    },
    Record(EconomicSeriesRecord),
    Commitment(PolicyCommitment),
}

impl EntryBody {
    fn encode(&self, e: &mut Encoder) {
        match self {
            EntryBody::Init {
                circuit,
                params,
                backend,
                setup,
            } => {
                e.str("init").str(circuit.name());
                encode_params(e, params);
                e.str(backend).bytes(&setup.proving).bytes(&setup.verifying);
            }
            EntryBody::Provider { id, key } => {
                e.str("provider").str(id).raw(key);
            }
            EntryBody::Record(r) => {
                e.str("record");
                r.encode(e);
            }
            EntryBody::Commitment(c) => {
                e.str("commitment");
                c.encode(e);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub index: u64,
    #[serde(with = "hexbytes")]
    pub prev: Digest,
    #[serde(with = "hexbytes")]
    pub hash: Digest,
    pub body: EntryBody,
}

fn entry_hash(index: u64, prev: &Digest, body: &EntryBody) -> Digest {
    let mut e = Encoder::tagged("sdpolicy/entry/v1");
    e.u64(index).raw(prev);
    body.encode(&mut e);
    e.digest()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Accepted { index: u64 },
    Rejected { reason: RejectReason },
}

/// Circuit, parameters and setup fixed at initialisation.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerConfig {
    pub circuit: Circuit,
    pub params: RuleCoefficients,
    pub backend: String,
    pub setup: SetupArtifact,
}

/// Single-writer ledger; every mutation goes through `&mut self`.
#[derive(Debug, Clone, Default)]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
    config: Option<LedgerConfig>,
    providers: BTreeMap<String, VerifyingKey>,
    records: BTreeMap<Digest, usize>,
    nonces: BTreeMap<[u8; 32], u64>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records the circuit, its public parameters and the backend setup.
    pub fn init(&mut self, circuit: Circuit, params: RuleCoefficients, backend: &dyn ProofBackend) -> Result<(), AttestError> {
        if self.config.is_some() {
            return Err(AttestError::AlreadyInitialized);
        }
        if params.family != circuit.family() {
            return Err(AttestError::WrongParams {
                expected: circuit.family().name(),
            });
        }
        let setup = backend.setup(circuit, &params);
        self.append(EntryBody::Init {
            circuit,
            params,
            backend: backend.name().to_string(),
            setup,
        });
        Ok(())
    }

    pub fn register_provider(&mut self, id: &str, key: &VerifyingKey) -> Result<(), AttestError> {
        self.config.as_ref().ok_or(AttestError::NotInitialized)?;
        if self.providers.contains_key(id) {
            return Err(AttestError::DuplicateProvider(id.to_string()));
        }
        self.append(EntryBody::Provider {
            id: id.to_string(),
            key: key.to_bytes(),
        });
        Ok(())
    }

    pub(crate) fn append_record(&mut self, record: EconomicSeriesRecord) -> Result<(), AttestError> {
        self.config.as_ref().ok_or(AttestError::NotInitialized)?;
        let key = self
            .provider_key(&record.provider)
            .ok_or_else(|| AttestError::UnknownProvider(record.provider.clone()))?;
        record.data.validate()?;
        if !record.verify(&key) {
            return Err(AttestError::KeyMismatch(record.provider.clone()));
        }
        self.append(EntryBody::Record(record));
        Ok(())
    }

    /// Validation checks, in order: record known, provider signature,
    /// miner signature, nonce fresh, public input matches the record,
    /// proof verifies.
    pub(crate) fn submit(&mut self, backend: &dyn ProofBackend, tx: &PolicyCommitment) -> Result<Verdict, AttestError> {
        let config = self.config.as_ref().ok_or(AttestError::NotInitialized)?;
        let reject = |reason| Ok(Verdict::Rejected { reason });
        let Some(record) = self.record(&tx.h) else {
            return reject(RejectReason::UnknownRecord);
        };
        let provider_ok = self
            .provider_key(&record.provider)
            .is_some_and(|k| record.verify_with(&k, &tx.econ_signature));
        if !provider_ok {
            return reject(RejectReason::ProviderSignature);
        }
        if !tx.miner_signature_valid() {
            return reject(RejectReason::MinerSignature);
        }
        if self.nonces.get(&tx.miner).is_some_and(|&last| tx.nonce <= last) {
            return reject(RejectReason::ReplayedNonce);
        }
        let expected = public_input(config.circuit, &record.data, tx.input_public.period);
        if expected.map_or(true, |e| !same_bits(&e, &tx.input_public)) {
            return reject(RejectReason::InputMismatch);
        }
        let statement = Statement {
            circuit: config.circuit,
            params: &config.params,
            input: &tx.input_public,
            output: tx.output,
            h: &tx.h,
        };
        if !backend.verify(&config.setup.verifying, &statement, &tx.proof) {
            return reject(RejectReason::ProofInvalid);
        }
        let index = self.append(EntryBody::Commitment(tx.clone()));
        Ok(Verdict::Accepted { index })
    }

    fn append(&mut self, body: EntryBody) -> u64 {
        let index = self.entries.len() as u64;
        let prev = self.head();
        match &body {
            EntryBody::Init {
                circuit,
                params,
                backend,
                setup,
            } => {
                self.config = Some(LedgerConfig {
                    circuit: *circuit,
                    params: params.clone(),
                    backend: backend.clone(),
                    setup: setup.clone(),
                })
            }
            EntryBody::Provider { id, key } => {
                let key = VerifyingKey::from_bytes(key).expect("registered keys are valid");
                self.providers.insert(id.clone(), key);
            }
            EntryBody::Record(r) => {
                self.records.entry(r.hash).or_insert(index as usize);
            }
            EntryBody::Commitment(c) => {
                self.nonces.insert(c.miner, c.nonce);
            }
        }
        let hash = entry_hash(index, &prev, &body);
        self.entries.push(LedgerEntry {
            index,
            prev,
            hash,
            body,
        });
        index
    }

    /// Hash of the last entry; all zeros when empty.
    pub fn head(&self) -> Digest {
        self.entries.last().map_or([0; 32], |e| e.hash)
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn config(&self) -> Option<&LedgerConfig> {
        self.config.as_ref()
    }

    pub fn provider_key(&self, id: &str) -> Option<VerifyingKey> {
        self.providers.get(id).copied()
    }

    pub fn record(&self, h: &Digest) -> Option<&EconomicSeriesRecord> {
        match &self.entries[*self.records.get(h)?].body {
            EntryBody::Record(r) => Some(r),
            _ => None,
        }
    }

    /// Nonce a miner's next commitment should carry.
    pub fn next_nonce(&self, miner: &[u8; 32]) -> u64 {
        self.nonces.get(miner).map_or(1, |n| n + 1)
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entries serialize"));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a ledger by replaying every line through the same checks
    /// as live appends. Lines must be exactly the canonical serialization
    /// of their entry, so any edited byte is caught either here or by the
    /// hash chain.
    pub fn from_ndjson(text: &str, backend: &dyn ProofBackend) -> Result<Self, AttestError> {
        let mut ledger = Ledger::new();
        let lines: Vec<&str> = match text.strip_suffix('\n') {
            Some(body) => body.split('\n').collect(),
            None if text.is_empty() => Vec::new(),
            None => return Err(corrupt(0, "missing final newline")),
        };
        for (i, line) in lines.into_iter().enumerate() {
            let n = i + 1;
            let entry: LedgerEntry = serde_json::from_str(line).map_err(|e| corrupt(n, &e.to_string()))?;
            if serde_json::to_string(&entry).expect("entries serialize") != line {
                return Err(corrupt(n, "not in canonical form"));
            }
            if entry.index != i as u64 || entry.prev != ledger.head() {
                return Err(corrupt(n, "broken chain"));
            }
            if entry_hash(entry.index, &entry.prev, &entry.body) != entry.hash {
                return Err(corrupt(n, "hash mismatch"));
            }
            ledger.replay(entry.body, backend).map_err(|e| corrupt(n, &e))?;
        }
        Ok(ledger)
    }

    fn replay(&mut self, body: EntryBody, backend: &dyn ProofBackend) -> Result<(), String> {
        match body {
            EntryBody::Init {
                circuit,
                params,
                backend: name,
                setup,
            } => {
                if name != backend.name() {
                    return Err(format!("written by backend `{name}`, loading with `{}`", backend.name()));
                }
                self.init(circuit, params, backend).map_err(|e| e.to_string())?;
                if self.config.as_ref().map(|c| &c.setup) != Some(&setup) {
                    return Err("setup artifact does not match".into());
                }
            }
            EntryBody::Provider { id, key } => {
                let key = VerifyingKey::from_bytes(&key).map_err(|e| e.to_string())?;
                self.register_provider(&id, &key).map_err(|e| e.to_string())?;
            }
            EntryBody::Record(r) => self.append_record(r).map_err(|e| e.to_string())?,
            EntryBody::Commitment(c) => match self.submit(backend, &c).map_err(|e| e.to_string())? {
                Verdict::Accepted { .. } => {}
                Verdict::Rejected { reason } => return Err(format!("stored commitment fails validation: {reason}")),
            },
        }
        Ok(())
    }

    pub fn write(&self, path: &std::path::Path) -> Result<(), AttestError> {
        std::fs::write(path, self.to_ndjson()).map_err(|e| AttestError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &std::path::Path, backend: &dyn ProofBackend) -> Result<Self, AttestError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| AttestError::Io(format!("{}: {e}", path.display())))?;
        Self::from_ndjson(&text, backend)
    }
}

fn corrupt(line: usize, reason: &str) -> AttestError {
    AttestError::Corrupt {
        line,
        reason: reason.to_string(),
    }
}

fn same_bits(a: &super::PublicInput, b: &super::PublicInput) -> bool {
    a.period == b.period && a.pi.to_bits() == b.pi.to_bits() && a.x.to_bits() == b.x.to_bits()
}
