use std::fs::File;
use std::path::PathBuf;

use anyhow::{Context as _, Result};
use rand::RngExt;
use serde_json::{json, Value};

use sdpolicy_core::attest::{
    authenticate_data, commit_policy, signing_key_from_seed, validate, Circuit, EconomicData, Ledger, MockBackend,
    PolicyCommitment, PrivateInput, RejectReason, Verdict,
};
use sdpolicy_core::rng::substream;
use sdpolicy_core::RuleFamily;

use super::coefficients;
use crate::context::Context;
use crate::error::Halt;

const PROVIDER: &str = "provider";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Tamper {
    UnknownRecord,
    ProviderSignature,
    MinerSignature,
    ReplayedNonce,
    TamperedOutput,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// CSV `period,pi,x` with consecutive periods; generated when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Periods to generate when no data file is given.
    #[arg(long, default_value_t = 8)]
    periods: usize,
    /// Augmented money-growth coefficient override, `name=value`.
    #[arg(long = "set")]
    set: Vec<String>,
    /// Submit one manipulated commitment after the honest run.
    #[arg(long, value_enum)]
    tamper: Option<Tamper>,
}

fn generated_data(seed: u64, periods: usize) -> Result<EconomicData> {
    let mut rng = substream(seed, 2);
    let rows = (0..periods)
        .map(|_| vec![1.005 * rng.random_range(0.98..1.02), rng.random_range(0.97..1.03)])
        .collect();
    Ok(EconomicData::new(
        "demo".into(),
        1,
        vec!["pi".into(), "x".into()],
        rows,
    )?)
}

/// Mutates a fresh commitment the way `kind` describes, re-signing with the
/// miner key where the mutation should get past the signature check.
fn tampered(kind: Tamper, fresh: &PolicyCommitment, last: &PolicyCommitment, miner: &ed25519_dalek::SigningKey) -> PolicyCommitment {
    let mut tx = fresh.clone();
    match kind {
        Tamper::UnknownRecord => {
            tx.h[0] ^= 1;
            tx.sign(miner);
        }
        Tamper::ProviderSignature => {
            tx.econ_signature[0] ^= 1;
            tx.sign(miner);
        }
        Tamper::MinerSignature => tx.signature[0] ^= 1,
        Tamper::ReplayedNonce => tx = last.clone(),
        Tamper::TamperedOutput => {
            tx.output *= 1.01;
            tx.sign(miner);
        }
    }
    tx
}

pub fn run(ctx: &Context, args: Args) -> Result<Value> {
    let backend = MockBackend;
    let params = coefficients(RuleFamily::AugmentedMoneyGrowth, &args.set)?;
    let data = match &args.data {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            EconomicData::from_csv("demo", file)?
        }
        None => generated_data(ctx.seed, args.periods)?,
    };
    let mut ledger = Ledger::new();
    ledger.init(Circuit::AugmentedMoneyGrowth, params.clone(), &backend)?;
    let provider = signing_key_from_seed(ctx.seed, 0);
    ledger.register_provider(PROVIDER, &provider.verifying_key())?;
    let record = authenticate_data(&mut ledger, PROVIDER, &provider, data.clone())?;
    let miner = signing_key_from_seed(ctx.seed, 1);

    let mut rows = Vec::new();
    let mut push_row = |tx: &PolicyCommitment, mu_prev: f64, verdict: &Verdict| {
        let (status, reason) = match verdict {
            Verdict::Accepted { .. } => ("accepted", String::new()),
            Verdict::Rejected { reason } => ("rejected", reason.code().to_string()),
        };
        rows.push(vec![
            tx.input_public.period.to_string(),
            tx.nonce.to_string(),
            mu_prev.to_string(),
            tx.input_public.pi.to_string(),
            tx.input_public.x.to_string(),
            tx.output.to_string(),
            status.to_string(),
            reason,
        ]);
    };
    let mut mu_prev = params.get("mu_ss").unwrap_or(1.0);
    let mut last = None;
    for period in data.periods() {
        let tx = commit_policy(&miner, &ledger, &backend, period, PrivateInput { mu_prev }, &record.hash)?;
        let verdict = validate(&mut ledger, &backend, &tx)?;
        push_row(&tx, mu_prev, &verdict);
        if let Verdict::Rejected { reason } = verdict {
            return Err(Halt::Rejected(format!("honest commitment for period {period}: {}", reason.code())).into());
        }
        mu_prev = tx.output;
        last = Some(tx);
    }
    let mut rejection: Option<RejectReason> = None;
    if let (Some(kind), Some(last)) = (args.tamper, &last) {
        let period = data.periods().start;
        let fresh = commit_policy(&miner, &ledger, &backend, period, PrivateInput { mu_prev }, &record.hash)?;
        let tx = tampered(kind, &fresh, last, &miner);
        let verdict = validate(&mut ledger, &backend, &tx)?;
        push_row(&tx, mu_prev, &verdict);
        if let Verdict::Rejected { reason } = verdict {
            rejection = Some(reason);
        }
    }

    let ledger_path = ctx.path("ledger.ndjson")?;
    ledger.write(&ledger_path)?;
    let reloaded = Ledger::read(&ledger_path, &backend)?;
    let reload_verified = reloaded.to_ndjson() == ledger.to_ndjson();
    let csv_path = ctx.write_csv(
        "protocol.csv",
        &["period", "nonce", "mu_prev", "pi", "x", "output", "verdict", "reason"],
        &rows,
    )?;
    let mut summary = json!({
        "command": "protocol-demo",
        "backend": "mock-transparent-v1",
        "entries": ledger.entries().len(),
        "head": hex::encode(ledger.head()),
        "record": hex::encode(record.hash),
        "commitments": rows.len(),
        "rejection": rejection.map(RejectReason::code),
        "reload_verified": reload_verified,
    });
    ctx.write_json("protocol.json", &summary)?;
    summary["outputs"] = json!([ledger_path, csv_path, ctx.out.join("protocol.json")]);
    anyhow::ensure!(reload_verified, "reloaded ledger differs from the written one");
    if let Some(reason) = rejection {
        crate::print_summary(&summary)?;
        return Err(Halt::Rejected(reason.code().to_string()).into());
    }
    Ok(summary)
}
