//! Circuits and the proof-backend interface.

use serde::{Deserialize, Serialize};

use super::wire::{sha256, Digest, Encoder};
use super::{hexbytes, AttestError};
use crate::rules::{evaluators::money_growth_step, RuleCoefficients, RuleFamily};

/// A registered computation a miner can prove.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Circuit {
    /// `mu_t` from authenticated inflation `pi` and output gap `x` (gross
    /// rates) and the miner's private `mu_prev`, under the augmented
    /// money-growth rule.
    AugmentedMoneyGrowth,
}

impl Circuit {
    pub fn name(self) -> &'static str {
        match self {
            Circuit::AugmentedMoneyGrowth => "augmented-money-growth",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, AttestError> {
        match name {
            "augmented-money-growth" => Ok(Circuit::AugmentedMoneyGrowth),
            other => Err(AttestError::UnknownCircuit(other.to_string())),
        }
    }

    /// Family the public parameters `p` must belong to.
    pub fn family(self) -> RuleFamily {
        match self {
            Circuit::AugmentedMoneyGrowth => RuleFamily::AugmentedMoneyGrowth,
        }
    }

    /// Authenticated columns the circuit reads, in `PublicInput` order.
    pub fn columns(self) -> [&'static str; 2] {
        match self {
            Circuit::AugmentedMoneyGrowth => ["pi", "x"],
        }
    }

    pub fn evaluate(
        self,
        params: &RuleCoefficients,
        input: &PublicInput,
        private: &PrivateInput,
    ) -> Result<f64, AttestError> {
        match self {
            Circuit::AugmentedMoneyGrowth => Ok(money_growth_step(private.mu_prev, input.pi, input.x, params)?),
        }
    }
}

/// Authenticated values for one period of a signed series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublicInput {
    pub period: u32,
    pub pi: f64,
    pub x: f64,
}

impl PublicInput {
    pub(crate) fn encode(&self, e: &mut Encoder) {
        e.u32(self.period).f64(self.pi).f64(self.x);
    }
}

/// The miner's private input; never serialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivateInput {
    pub mu_prev: f64,
}

/// Everything a proof speaks about except the private input.
#[derive(Debug, Clone, Copy)]
pub struct Statement<'a> {
    pub circuit: Circuit,
    pub params: &'a RuleCoefficients,
    pub input: &'a PublicInput,
    pub output: f64,
    pub h: &'a Digest,
}

pub(crate) fn encode_params(e: &mut Encoder, params: &RuleCoefficients) {
    e.str(params.family.name());
    let values: Vec<(&str, f64)> = params.iter().collect();
    e.len(values.len());
    for (name, v) in values {
        e.str(name).f64(v);
    }
}

impl Statement<'_> {
    fn encode(&self, e: &mut Encoder) {
        e.str(self.circuit.name());
        encode_params(e, self.params);
        self.input.encode(e);
        e.f64(self.output).raw(self.h);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupArtifact {
    #[serde(with = "hexbytes")]
    pub proving: Vec<u8>,
    #[serde(with = "hexbytes")]
    pub verifying: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Proof(#[serde(with = "hexbytes")] pub Vec<u8>);

/// Setup, proving and verification for circuits.
pub trait ProofBackend {
    fn name(&self) -> &'static str;

    fn setup(&self, circuit: Circuit, params: &RuleCoefficients) -> SetupArtifact;

    /// Fails if `statement.output` is not the circuit's value on the inputs.
    fn prove(
        &self,
        proving: &[u8],
        statement: &Statement<'_>,
        private: &PrivateInput,
        blinding: &[u8; 32],
    ) -> Result<Proof, AttestError>;

    fn verify(&self, verifying: &[u8], statement: &Statement<'_>, proof: &Proof) -> bool;
}

/// Transparent stand-in for a succinct proof system.
///
/// A proof is a salted hash commitment to the private input followed by a
/// digest binding the setup, the statement and that commitment. Verifying
/// recomputes the digest. This gives binding and integrity: changing the
/// output, hash, public input or the committed private input after proving
/// is detected. It is not zero-knowledge beyond the commitment, not
/// succinct, and a prover who ignores the circuit can still produce a
/// verifying proof; only `prove` itself checks the circuit.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

const COMMIT_TAG: &str = "sdpolicy/mock/commit/v1";
const DIGEST_TAG: &str = "sdpolicy/mock/transcript/v1";

impl MockBackend {
    pub fn commitment(private: &PrivateInput, blinding: &[u8; 32]) -> Digest {
        let mut e = Encoder::tagged(COMMIT_TAG);
        e.raw(blinding).f64(private.mu_prev);
        e.digest()
    }

    fn transcript(verifying: &[u8], statement: &Statement<'_>, commitment: &Digest) -> Digest {
        let mut e = Encoder::tagged(DIGEST_TAG);
        e.bytes(verifying);
        statement.encode(&mut e);
        e.raw(commitment);
        e.digest()
    }
}

impl ProofBackend for MockBackend {
    fn name(&self) -> &'static str {
        "mock-transparent-v1"
    }

    fn setup(&self, circuit: Circuit, params: &RuleCoefficients) -> SetupArtifact {
        let mut e = Encoder::tagged("sdpolicy/mock/setup/v1");
        e.str(circuit.name());
        encode_params(&mut e, params);
        let crs = e.digest().to_vec();
        SetupArtifact {
            proving: crs.clone(),
            verifying: crs,
        }
    }

    fn prove(
        &self,
        proving: &[u8],
        statement: &Statement<'_>,
        private: &PrivateInput,
        blinding: &[u8; 32],
    ) -> Result<Proof, AttestError> {
        let expected = statement.circuit.evaluate(statement.params, statement.input, private)?;
        if expected.to_bits() != statement.output.to_bits() {
            return Err(AttestError::OutputMismatch {
                claimed: statement.output,
                computed: expected,
            });
        }
        let commitment = Self::commitment(private, blinding);
        // proving and verifying artifacts coincide for this backend
        let digest = Self::transcript(proving, statement, &commitment);
        let mut bytes = commitment.to_vec();
        bytes.extend_from_slice(&digest);
        Ok(Proof(bytes))
    }

    fn verify(&self, verifying: &[u8], statement: &Statement<'_>, proof: &Proof) -> bool {
        let Ok(parts) = <&[u8; 64]>::try_from(proof.0.as_slice()) else {
            return false;
        };
        let commitment: Digest = parts[..32].try_into().expect("32 bytes");
        Self::transcript(verifying, statement, &commitment)[..] == parts[32..]
    }
}

/// Commitment blinding derived from the miner's secret and nonce, so
/// identical runs produce identical ledgers.
pub fn derive_blinding(secret: &[u8; 32], nonce: u64) -> [u8; 32] {
    let mut e = Encoder::tagged("sdpolicy/blinding/v1");
    e.raw(secret).u64(nonce);
    sha256(e.as_bytes())
}
