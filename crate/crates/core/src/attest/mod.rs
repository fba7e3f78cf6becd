//! Authenticated economic data and verifiable rule commitments.
//!
//! Providers sign economic series. Miners evaluate a registered circuit on
//! a signed period plus a private input, prove it with a [`ProofBackend`]
//! and sign the resulting transaction. A validator checks it against an
//! append-only, hash-chained [`Ledger`] and appends it on acceptance.
//!
//! Signatures are Ed25519 (deterministic), hashes SHA-256 over the
//! canonical encoding in [`wire`].

pub mod backend;
mod ledger;
pub mod wire;

use std::io::Read;

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    derive_blinding, Circuit, MockBackend, PrivateInput, Proof, ProofBackend, PublicInput, SetupArtifact, Statement,
};
pub use ledger::{EntryBody, Ledger, LedgerConfig, LedgerEntry, Verdict};
pub use wire::Digest;

use crate::rng;
use crate::rules::RuleError;
use wire::Encoder;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttestError {
    #[error("ledger is already initialized")]
    AlreadyInitialized,
    #[error("ledger is not initialized")]
    NotInitialized,
    #[error("unknown circuit `{0}`")]
    UnknownCircuit(String),
    #[error("circuit parameters must be {expected} coefficients")]
    WrongParams { expected: &'static str },
    #[error("provider `{0}` is not registered")]
    UnknownProvider(String),
    #[error("provider `{0}` is already registered")]
    DuplicateProvider(String),
    #[error("signing key does not match the registered key of `{0}`")]
    KeyMismatch(String),
    #[error("no record with hash {0} on the ledger")]
    MissingRecord(String),
    #[error("economic data: {0}")]
    BadData(String),
    #[error("record has no column `{0}`")]
    MissingColumn(&'static str),
    #[error("period {0} is outside the record")]
    PeriodOutOfRange(u32),
    #[error(transparent)]
    Circuit(#[from] RuleError),
    #[error("claimed output {claimed} but the circuit gives {computed}")]
    OutputMismatch { claimed: f64, computed: f64 },
    #[error("ledger line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("io: {0}")]
    Io(String),
}

/// Why a validator refused a commitment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    /// The referenced hash is not a record on the ledger.
    UnknownRecord,
    /// The carried provider signature does not verify.
    ProviderSignature,
    /// The miner's transaction signature does not verify.
    MinerSignature,
    /// The nonce is not above the miner's last accepted nonce.
    ReplayedNonce,
    /// The public input disagrees with the signed record.
    InputMismatch,
    /// The proof does not verify.
    ProofInvalid,
}

impl RejectReason {
    pub const ALL: [RejectReason; 6] = [
        RejectReason::UnknownRecord,
        RejectReason::ProviderSignature,
        RejectReason::MinerSignature,
        RejectReason::ReplayedNonce,
        RejectReason::InputMismatch,
        RejectReason::ProofInvalid,
    ];

    pub fn code(self) -> &'static str {
        match self {
            RejectReason::UnknownRecord => "unknown-record",
            RejectReason::ProviderSignature => "provider-signature",
            RejectReason::MinerSignature => "miner-signature",
            RejectReason::ReplayedNonce => "replayed-nonce",
            RejectReason::InputMismatch => "input-mismatch",
            RejectReason::ProofInvalid => "proof-invalid",
        }
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// Lowercase hex serde for byte strings and fixed arrays.
pub(crate) mod hexbytes {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer, T: AsRef<[u8]>>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D, T>(d: D) -> Result<T, D::Error>
    where
        D: Deserializer<'de>,
        T: TryFrom<Vec<u8>>,
    {
        let text = String::deserialize(d)?;
        let bytes = hex::decode(&text).map_err(D::Error::custom)?;
        T::try_from(bytes).map_err(|_| D::Error::custom("wrong byte length"))
    }
}

/// Deterministic Ed25519 key for role `index` under `seed`.
pub fn signing_key_from_seed(seed: u64, index: u64) -> SigningKey {
    let mut rng = rng::substream(seed, index);
    let mut secret = [0u8; 32];
    rng.fill_bytes(&mut secret);
    SigningKey::from_bytes(&secret)
}

/// Published series: one row per period, one value per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomicData {
    pub series_id: String,
    pub first_period: u32,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl EconomicData {
    pub fn new(series_id: String, first_period: u32, columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, AttestError> {
        let d = Self {
            series_id,
            first_period,
            columns,
            rows,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), AttestError> {
        if self.columns.is_empty() || self.rows.is_empty() {
            return Err(AttestError::BadData("need at least one column and one row".into()));
        }
        if self.rows.iter().any(|r| r.len() != self.columns.len()) {
            return Err(AttestError::BadData("row length differs from column count".into()));
        }
        if self.rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(AttestError::BadData("values must be finite".into()));
        }
        if u32::try_from(self.rows.len()).map_or(true, |n| self.first_period.checked_add(n).is_none()) {
            return Err(AttestError::BadData("period range overflows".into()));
        }
        Ok(())
    }

    /// CSV with an integer `period` column (consecutive) and value columns.
    pub fn from_csv<R: Read>(series_id: &str, reader: R) -> Result<Self, AttestError> {
        let bad = |m: String| AttestError::BadData(m);
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.get(0) != Some("period") {
            return Err(bad("first column must be `period`".into()));
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut first = None;
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let period: u32 = rec[0].parse().map_err(|_| bad(format!("row {}: bad period", i + 1)))?;
            let start = *first.get_or_insert(period);
            if u64::from(period) != u64::from(start) + i as u64 {
                return Err(bad(format!("row {}: periods must be consecutive", i + 1)));
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|f| f.parse::<f64>().map_err(|_| bad(format!("row {}: `{f}` is not a number", i + 1))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::new(series_id.to_string(), first.unwrap_or(0), columns, rows)
    }

    pub fn encode(&self, e: &mut Encoder) {
        e.str(&self.series_id).u32(self.first_period).len(self.columns.len());
        for c in &self.columns {
            e.str(c);
        }
        e.len(self.rows.len());
        for r in &self.rows {
            e.len(r.len());
            for v in r {
                e.f64(*v);
            }
        }
    }

    pub fn hash(&self) -> Digest {
        let mut e = Encoder::tagged("sdpolicy/econ-data/v1");
        self.encode(&mut e);
        e.digest()
    }

    pub fn value(&self, period: u32, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|n| n == column)?;
        let r = period.checked_sub(self.first_period)? as usize;
        self.rows.get(r).map(|row| row[c])
    }

    pub fn periods(&self) -> std::ops::Range<u32> {
        self.first_period..self.first_period + self.rows.len() as u32
    }
}

fn econ_message(h: &Digest, data: &EconomicData) -> Vec<u8> {
    let mut e = Encoder::tagged("sdpolicy/econ-sig/v1");
    e.raw(h);
    data.encode(&mut e);
    e.finish()
}

/// A provider-signed series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomicSeriesRecord {
    pub provider: String,
    pub data: EconomicData,
    #[serde(with = "hexbytes")]
    pub hash: Digest,
    #[serde(with = "hexbytes")]
    pub signature: [u8; 64],
}

impl EconomicSeriesRecord {
    pub fn sign(provider: &str, key: &SigningKey, data: EconomicData) -> Result<Self, AttestError> {
        data.validate()?;
        let hash = data.hash();
        let signature = key.sign(&econ_message(&hash, &data)).to_bytes();
        Ok(Self {
            provider: provider.to_string(),
            data,
            hash,
            signature,
        })
    }

    /// Hash matches the data and `signature` verifies under `key`.
    pub fn verify_with(&self, key: &VerifyingKey, signature: &[u8; 64]) -> bool {
        self.data.hash() == self.hash
            && key
                .verify(&econ_message(&self.hash, &self.data), &Signature::from_bytes(signature))
                .is_ok()
    }

    pub fn verify(&self, key: &VerifyingKey) -> bool {
        self.verify_with(key, &self.signature)
    }

    pub(crate) fn encode(&self, e: &mut Encoder) {
        e.str(&self.provider);
        self.data.encode(e);
        e.raw(&self.hash).raw(&self.signature);
    }
}

/// A miner's signed transaction committing a circuit output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyCommitment {
    #[serde(with = "hexbytes")]
    pub miner: [u8; 32],
    pub nonce: u64,
    #[serde(with = "hexbytes")]
    pub h: Digest,
    /// The provider's signature on the referenced record.
    #[serde(with = "hexbytes")]
    pub econ_signature: [u8; 64],
    pub input_public: PublicInput,
    pub output: f64,
    pub proof: Proof,
    #[serde(with = "hexbytes")]
    pub signature: [u8; 64],
}

impl PolicyCommitment {
    /// The bytes the miner signs: every field but the signature.
    pub fn body(&self) -> Vec<u8> {
        let mut e = Encoder::tagged("sdpolicy/commit/v1");
        e.raw(&self.miner).u64(self.nonce).raw(&self.h).raw(&self.econ_signature);
        self.input_public.encode(&mut e);
        e.f64(self.output).bytes(&self.proof.0);
        e.finish()
    }

    /// Re-signs after edits; also updates the miner key.
    pub fn sign(&mut self, key: &SigningKey) {
        self.miner = key.verifying_key().to_bytes();
        self.signature = key.sign(&self.body()).to_bytes();
    }

    pub fn miner_signature_valid(&self) -> bool {
        VerifyingKey::from_bytes(&self.miner)
            .is_ok_and(|k| k.verify(&self.body(), &Signature::from_bytes(&self.signature)).is_ok())
    }

    pub(crate) fn encode(&self, e: &mut Encoder) {
        e.raw(&self.body()).raw(&self.signature);
    }
}

/// Signs `data` as `provider` and appends the record to the ledger.
pub fn authenticate_data(
    ledger: &mut Ledger,
    provider: &str,
    key: &SigningKey,
    data: EconomicData,
) -> Result<EconomicSeriesRecord, AttestError> {
    let registered = ledger
        .provider_key(provider)
        .ok_or_else(|| AttestError::UnknownProvider(provider.to_string()))?;
    if registered != key.verifying_key() {
        return Err(AttestError::KeyMismatch(provider.to_string()));
    }
    let record = EconomicSeriesRecord::sign(provider, key, data)?;
    ledger.append_record(record.clone())?;
    Ok(record)
}

/// Evaluates the ledger's circuit on a signed period and the miner's
/// private input, proves it and signs the transaction.
///
/// The public input is read from the record at `period`.
pub fn commit_policy(
    miner: &SigningKey,
    ledger: &Ledger,
    backend: &dyn ProofBackend,
    period: u32,
    private: PrivateInput,
    h: &Digest,
) -> Result<PolicyCommitment, AttestError> {
    let config = ledger.config().ok_or(AttestError::NotInitialized)?;
    let record = ledger
        .record(h)
        .ok_or_else(|| AttestError::MissingRecord(hex::encode(h)))?;
    let input_public = public_input(config.circuit, &record.data, period)?;
    let output = config.circuit.evaluate(&config.params, &input_public, &private)?;
    let nonce = ledger.next_nonce(&miner.verifying_key().to_bytes());
    let statement = Statement {
        circuit: config.circuit,
        params: &config.params,
        input: &input_public,
        output,
        h,
    };
    let proof = backend.prove(
        &config.setup.proving,
        &statement,
        &private,
        &derive_blinding(miner.as_bytes(), nonce),
    )?;
    let mut tx = PolicyCommitment {
        miner: [0; 32],
        nonce,
        h: *h,
        econ_signature: record.signature,
        input_public,
        output,
        proof,
        signature: [0; 64],
    };
    tx.sign(miner);
    Ok(tx)
}

/// The circuit's public input for `period` of a record.
pub fn public_input(circuit: Circuit, data: &EconomicData, period: u32) -> Result<PublicInput, AttestError> {
    let [pi_col, x_col] = circuit.columns();
    for col in [pi_col, x_col] {
        if !data.columns.iter().any(|c| c == col) {
            return Err(AttestError::MissingColumn(col));
        }
    }
    let pi = data.value(period, pi_col).ok_or(AttestError::PeriodOutOfRange(period))?;
    let x = data.value(period, x_col).ok_or(AttestError::PeriodOutOfRange(period))?;
    Ok(PublicInput { period, pi, x })
}

/// Checks a commitment and appends it on acceptance.
pub fn validate(ledger: &mut Ledger, backend: &dyn ProofBackend, tx: &PolicyCommitment) -> Result<Verdict, AttestError> {
    ledger.submit(backend, tx)
}
