#![allow(dead_code)]

use rand::Rng;
use timebucket::{AccountId, LedgerOp, ResourceConfig, ResourceId, Timestamp};

pub fn acct(s: &str) -> AccountId {
    AccountId::new(s).unwrap()
}

pub fn res(s: &str) -> ResourceId {
    ResourceId::new(s).unwrap()
}

pub fn accounts(n: usize) -> Vec<AccountId> {
    (0..n).map(|i| acct(&format!("acct{i}"))).collect()
}

/// Random ledger trace over one resource: a define followed by `len` ops.
/// Amounts are small so burns and transfers regularly run short; a few ops
/// are deliberately invalid (zero amount, self-transfer).
pub fn random_trace<R: Rng>(
    rng: &mut R,
    config: &ResourceConfig,
    accounts: &[AccountId],
    len: usize,
) -> Vec<LedgerOp<u128>> {
    let resource = res("r");
    let w = config.bucket_width();
    let mut clock = 0u64;
    let mut ops = Vec::with_capacity(len + 1);
    ops.push(LedgerOp::DefineResource {
        resource: resource.clone(),
        ttl: config.ttl(),
        bucket_count: config.bucket_count(),
    });
    let pick = |rng: &mut R| accounts[rng.gen_range(0..accounts.len())].clone();
    for _ in 0..len {
        let roll = rng.gen_range(0..100);
        let amount: u128 = if rng.gen_ratio(1, 100) { 0 } else { rng.gen_range(1..=20) };
        let op = match roll {
            0..=34 => LedgerOp::Mint { account: pick(rng), resource: resource.clone(), amount },
            35..=54 => LedgerOp::Burn { account: pick(rng), resource: resource.clone(), amount: amount * 2 },
            55..=74 => {
                let from = pick(rng);
                let to = if rng.gen_ratio(1, 50) { from.clone() } else { pick(rng) };
                LedgerOp::Transfer { from, to, resource: resource.clone(), amount: amount * 2 }
            }
            75..=94 => {
                let dt = if rng.gen_ratio(1, 20) {
                    rng.gen_range(0..=2 * config.ttl())
                } else {
                    rng.gen_range(0..=2 * w)
                };
                clock = clock.saturating_add(dt);
                LedgerOp::Advance(Timestamp(clock))
            }
            _ => LedgerOp::Prune { account: pick(rng), resource: resource.clone() },
        };
        ops.push(op);
    }
    ops
}
