use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdpolicy_core::attest::{
    authenticate_data, commit_policy, public_input, signing_key_from_seed, validate, AttestError, Circuit,
    EconomicData, EconomicSeriesRecord, Ledger, MockBackend, PolicyCommitment, PrivateInput, ProofBackend,
    RejectReason, Statement, Verdict,
};
use sdpolicy_core::{RuleCoefficients, RuleFamily};

fn params(rho_mm: f64, rho_mpi: f64, rho_mx: f64) -> RuleCoefficients {
    RuleCoefficients::defaults(RuleFamily::AugmentedMoneyGrowth)
        .with("rho_mm", rho_mm)
        .unwrap()
        .with("rho_mpi", rho_mpi)
        .unwrap()
        .with("rho_mx", rho_mx)
        .unwrap()
}

struct Fixture {
    ledger: Ledger,
    record: EconomicSeriesRecord,
    tx: PolicyCommitment,
    miner: ed25519_dalek::SigningKey,
}

fn fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let backend = MockBackend;
    let mut ledger = Ledger::new();
    let p = params(rng.random_range(0.0..0.97), rng.random_range(-2.0..0.0), rng.random_range(-2.0..0.0));
    ledger.init(Circuit::AugmentedMoneyGrowth, p, &backend).unwrap();
    let provider = signing_key_from_seed(seed, 0);
    ledger.register_provider("fred", &provider.verifying_key()).unwrap();
    let rows: Vec<Vec<f64>> = (0..4)
        .map(|_| vec![1.005 * rng.random_range(0.98..1.02), rng.random_range(0.97..1.03)])
        .collect();
    let data = EconomicData::new("cpi-gap".into(), 10, vec!["pi".into(), "x".into()], rows).unwrap();
    let record = authenticate_data(&mut ledger, "fred", &provider, data).unwrap();
    let miner = signing_key_from_seed(seed, 1);
    let private = PrivateInput {
        mu_prev: rng.random_range(0.99..1.02),
    };
    let tx = commit_policy(&miner, &ledger, &MockBackend, 11, private, &record.hash).unwrap();
    Fixture {
        ledger,
        record,
        tx,
        miner,
    }
}

fn rejected(reason: RejectReason) -> Verdict {
    Verdict::Rejected { reason }
}

#[test]
fn happy_path_on_random_fixtures() {
    for seed in 0..100 {
        let mut f = fixture(seed);
        assert_eq!(
            validate(&mut f.ledger, &MockBackend, &f.tx).unwrap(),
            Verdict::Accepted { index: 3 },
            "seed {seed}"
        );
    }
}

#[test]
fn each_targeted_mutation_has_its_reason() {
    let base = fixture(5);

    let mut f = fixture(5);
    let mut tx = base.tx.clone();
    tx.h[0] ^= 1;
    tx.sign(&f.miner);
    assert_eq!(validate(&mut f.ledger, &MockBackend, &tx).unwrap(), rejected(RejectReason::UnknownRecord));

    let mut tx = base.tx.clone();
    tx.econ_signature[10] ^= 1;
    tx.sign(&f.miner);
    assert_eq!(
        validate(&mut f.ledger, &MockBackend, &tx).unwrap(),
        rejected(RejectReason::ProviderSignature)
    );

    let mut tx = base.tx.clone();
    tx.signature[3] ^= 1;
    assert_eq!(validate(&mut f.ledger, &MockBackend, &tx).unwrap(), rejected(RejectReason::MinerSignature));
    let mut tx = base.tx.clone();
    tx.output += 0.01;
    assert_eq!(validate(&mut f.ledger, &MockBackend, &tx).unwrap(), rejected(RejectReason::MinerSignature));

    let mut tx = base.tx.clone();
    tx.output += 0.01;
    tx.sign(&f.miner);
    assert_eq!(validate(&mut f.ledger, &MockBackend, &tx).unwrap(), rejected(RejectReason::ProofInvalid));

    let mut tx = base.tx.clone();
    tx.input_public.pi *= 1.001;
    tx.sign(&f.miner);
    assert_eq!(validate(&mut f.ledger, &MockBackend, &tx).unwrap(), rejected(RejectReason::InputMismatch));

    assert!(matches!(validate(&mut f.ledger, &MockBackend, &base.tx).unwrap(), Verdict::Accepted { .. }));
    assert_eq!(
        validate(&mut f.ledger, &MockBackend, &base.tx).unwrap(),
        rejected(RejectReason::ReplayedNonce)
    );
    // rejected submissions leave no trace
    assert_eq!(f.ledger.entries().len(), 4);
}

#[test]
fn nonces_advance_per_miner() {
    let mut f = fixture(9);
    validate(&mut f.ledger, &MockBackend, &f.tx).unwrap();
    let mu = f.tx.output;
    let next = commit_policy(&f.miner, &f.ledger, &MockBackend, 12, PrivateInput { mu_prev: mu }, &f.record.hash).unwrap();
    assert_eq!(next.nonce, f.tx.nonce + 1);
    assert!(matches!(validate(&mut f.ledger, &MockBackend, &next).unwrap(), Verdict::Accepted { .. }));
    let other = signing_key_from_seed(9, 2);
    let tx = commit_policy(&other, &f.ledger, &MockBackend, 12, PrivateInput { mu_prev: mu }, &f.record.hash).unwrap();
    assert_eq!(tx.nonce, 1);
}

#[test]
fn circuit_examples() {
    let backend = MockBackend;
    let mut ledger = Ledger::new();
    ledger.init(Circuit::AugmentedMoneyGrowth, params(0.0, -0.5, 0.0), &backend).unwrap();
    let key = signing_key_from_seed(1, 0);
    ledger.register_provider("p", &key.verifying_key()).unwrap();
    let rows = vec![vec![1.005, 1.0], vec![1.005 * 0.02_f64.exp(), 1.0]];
    let data = EconomicData::new("s".into(), 0, vec!["pi".into(), "x".into()], rows).unwrap();
    let rec = authenticate_data(&mut ledger, "p", &key, data).unwrap();
    let miner = signing_key_from_seed(1, 1);
    let steady = commit_policy(&miner, &ledger, &backend, 0, PrivateInput { mu_prev: 1.005 }, &rec.hash).unwrap();
    assert!((steady.output - 1.005).abs() < 1e-15);
    let hot = commit_policy(&miner, &ledger, &backend, 1, PrivateInput { mu_prev: 1.005 }, &rec.hash).unwrap();
    assert!(((hot.output / 1.005).ln() + 0.01).abs() < 1e-14);
    assert_eq!(
        commit_policy(&miner, &ledger, &backend, 1, PrivateInput { mu_prev: -1.0 }, &rec.hash).map(|_| ()),
        Err(AttestError::Circuit(sdpolicy_core::rules::RuleError::NonPositive("mu_prev")))
    );
    assert!(matches!(
        commit_policy(&miner, &ledger, &backend, 7, PrivateInput { mu_prev: 1.0 }, &rec.hash),
        Err(AttestError::PeriodOutOfRange(7))
    ));
    assert!(matches!(
        commit_policy(&miner, &ledger, &backend, 0, PrivateInput { mu_prev: 1.0 }, &[0; 32]),
        Err(AttestError::MissingRecord(_))
    ));
}

#[test]
fn init_and_registration_rules() {
    let mut ledger = Ledger::new();
    let key = signing_key_from_seed(2, 0);
    assert_eq!(ledger.register_provider("p", &key.verifying_key()), Err(AttestError::NotInitialized));
    ledger.init(Circuit::AugmentedMoneyGrowth, params(0.5, -0.5, -0.5), &MockBackend).unwrap();
    assert_eq!(ledger.entries().len(), 1);
    assert_eq!(
        ledger.init(Circuit::AugmentedMoneyGrowth, params(0.5, -0.5, -0.5), &MockBackend),
        Err(AttestError::AlreadyInitialized)
    );
    assert!(Circuit::from_name("nope").is_err());
    ledger.register_provider("p", &key.verifying_key()).unwrap();
    assert!(ledger.register_provider("p", &key.verifying_key()).is_err());
    let reloaded = Ledger::from_ndjson(&ledger.to_ndjson(), &MockBackend).unwrap();
    assert_eq!(reloaded.provider_key("p"), Some(key.verifying_key()));
    assert_eq!(reloaded.to_ndjson(), ledger.to_ndjson());

    let data = EconomicData::new("s".into(), 0, vec!["pi".into()], vec![vec![1.0]]).unwrap();
    let stranger = signing_key_from_seed(2, 5);
    assert!(matches!(
        authenticate_data(&mut ledger, "q", &stranger, data.clone()),
        Err(AttestError::UnknownProvider(_))
    ));
    assert!(matches!(
        authenticate_data(&mut ledger, "p", &stranger, data),
        Err(AttestError::KeyMismatch(_))
    ));
}

#[test]
fn records_sign_and_detect_edits() {
    let a = signing_key_from_seed(3, 0);
    let b = signing_key_from_seed(3, 1);
    let data = EconomicData::new("s".into(), 0, vec!["pi".into()], vec![vec![1.0], vec![1.01]]).unwrap();
    let ra = EconomicSeriesRecord::sign("a", &a, data.clone()).unwrap();
    let rb = EconomicSeriesRecord::sign("b", &b, data).unwrap();
    assert!(ra.verify(&a.verifying_key()) && rb.verify(&b.verifying_key()));
    assert_ne!(ra, rb);
    assert!(!ra.verify(&b.verifying_key()));
    let mut edited = ra.clone();
    edited.data.rows[1][0] = f64::from_bits(edited.data.rows[1][0].to_bits() ^ 1);
    assert!(!edited.verify(&a.verifying_key()));
}

#[test]
fn ledger_reloads_byte_exact_and_catches_flips() {
    let mut f = fixture(21);
    validate(&mut f.ledger, &MockBackend, &f.tx).unwrap();
    let text = f.ledger.to_ndjson();
    let back = Ledger::from_ndjson(&text, &MockBackend).unwrap();
    assert_eq!(back.to_ndjson(), text);
    assert_eq!(back.head(), f.ledger.head());
    let bytes = text.as_bytes();
    // every byte position of every entry, one flipped bit each
    for pos in 0..bytes.len() {
        if bytes[pos] == b'\n' {
            continue;
        }
        let mut flipped = bytes.to_vec();
        flipped[pos] ^= 0x01;
        let detected = match String::from_utf8(flipped) {
            Ok(s) => Ledger::from_ndjson(&s, &MockBackend).is_err(),
            Err(_) => true,
        };
        assert!(detected, "flip at byte {pos} went unnoticed");
    }
}

#[test]
fn identical_inputs_give_identical_ledgers() {
    let run = || {
        let mut f = fixture(33);
        validate(&mut f.ledger, &MockBackend, &f.tx).unwrap();
        f.ledger.to_ndjson()
    };
    assert_eq!(run(), run());
}

#[test]
fn mock_backend_contract() {
    let backend = MockBackend;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut commitments = std::collections::HashSet::new();
    for i in 0..100u64 {
        let p = params(rng.random_range(0.0..0.97), rng.random_range(-2.0..0.0), rng.random_range(-2.0..0.0));
        let setup = backend.setup(Circuit::AugmentedMoneyGrowth, &p);
        let input = sdpolicy_core::attest::PublicInput {
            period: i as u32,
            pi: rng.random_range(0.9..1.1),
            x: rng.random_range(0.9..1.1),
        };
        let private = PrivateInput {
            mu_prev: rng.random_range(0.9..1.1),
        };
        let h = [i as u8; 32];
        let output = Circuit::AugmentedMoneyGrowth.evaluate(&p, &input, &private).unwrap();
        let st = Statement {
            circuit: Circuit::AugmentedMoneyGrowth,
            params: &p,
            input: &input,
            output,
            h: &h,
        };
        let blinding = [7u8; 32];
        let proof = backend.prove(&setup.proving, &st, &private, &blinding).unwrap();
        assert!(backend.verify(&setup.verifying, &st, &proof));

        let bumped = output + 1e-9;
        assert!(!backend.verify(&setup.verifying, &Statement { output: bumped, ..st }, &proof));
        let other_h = [i as u8 ^ 0xff; 32];
        assert!(!backend.verify(&setup.verifying, &Statement { h: &other_h, ..st }, &proof));
        let moved = sdpolicy_core::attest::PublicInput { x: input.x * 1.01, ..input };
        assert!(!backend.verify(&setup.verifying, &Statement { input: &moved, ..st }, &proof));
        assert!(backend.prove(&setup.proving, &Statement { output: bumped, ..st }, &private, &blinding).is_err());

        // swapping in a commitment to a different private input breaks the proof
        let other = PrivateInput {
            mu_prev: private.mu_prev * 1.01,
        };
        let mut forged = proof.clone();
        forged.0[..32].copy_from_slice(&MockBackend::commitment(&other, &blinding));
        assert!(!backend.verify(&setup.verifying, &st, &forged));

        assert!(commitments.insert(MockBackend::commitment(&private, &blinding)));
        assert!(commitments.insert(MockBackend::commitment(&other, &blinding)));
    }
}

#[test]
fn economic_data_csv() {
    let d = EconomicData::from_csv("s", "period,pi,x\n3,1.01,0.99\n4,1.02,1.0\n".as_bytes()).unwrap();
    assert_eq!(d.first_period, 3);
    assert_eq!(d.value(4, "pi"), Some(1.02));
    assert_eq!(d.value(5, "pi"), None);
    assert!(EconomicData::from_csv("s", "period,pi\n3,1\n5,1\n".as_bytes()).is_err());
    assert!(EconomicData::from_csv("s", "t,pi\n3,1\n".as_bytes()).is_err());
    let p = public_input(Circuit::AugmentedMoneyGrowth, &d, 3).unwrap();
    assert_eq!((p.pi, p.x), (1.01, 0.99));
}
