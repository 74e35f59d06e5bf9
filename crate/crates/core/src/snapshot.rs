//! JSON snapshot of a ledger.
//!
//! Output is canonical: resources sorted by id, books by (account, resource),
//! records in book order, so identical ledgers serialize to identical bytes.
//! Amounts above 2^53 - 1 are written as decimal strings.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::book::BalanceRecord;
use crate::bucket::{ResourceConfig, Timestamp};
use crate::ledger::{AccountId, Ledger, ResourceId};
use crate::num::TokenAmount;

pub const FORMAT_VERSION: u64 = 1;

/// Largest integer every IEEE-double JSON reader keeps exact.
const MAX_SAFE_INTEGER: u128 = (1 << 53) - 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("cannot read snapshot {path}: {source}")]
    Read { path: String, source: io::Error },
    #[error("cannot write snapshot {path}: {source}")]
    Write { path: String, source: io::Error },
    #[error("corrupt snapshot: {0}")]
    Parse(String),
    #[error("unsupported snapshot format version {0}")]
    UnsupportedVersion(u64),
    #[error("corrupt snapshot: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct JsonAmount(u128);

impl Serialize for JsonAmount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 <= MAX_SAFE_INTEGER {
            s.serialize_u64(self.0 as u64)
        } else {
            s.serialize_str(&self.0.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for JsonAmount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(u64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(n) => Ok(JsonAmount(u128::from(n))),
            Repr::Text(s) if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) => {
                s.parse().map(JsonAmount).map_err(serde::de::Error::custom)
            }
            Repr::Text(s) => Err(serde::de::Error::custom(format!("invalid amount {s:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct SnapshotFile {
    format_version: u64,
    clock: u64,
    resources: Vec<ResourceEntry>,
    books: Vec<BookEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ResourceEntry {
    resource_id: String,
    ttl: u64,
    bucket_count: u64,
    bucket_width: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct BookEntry {
    account_id: String,
    resource_id: String,
    records: Vec<RecordEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RecordEntry {
    amount: JsonAmount,
    expires_at: u64,
}

/// Canonical JSON text, newline-terminated.
pub fn to_json<A: TokenAmount>(ledger: &Ledger<A>) -> String {
    let file = SnapshotFile {
        format_version: FORMAT_VERSION,
        clock: ledger.clock().secs(),
        resources: ledger
            .resources()
            .map(|(id, c)| ResourceEntry {
                resource_id: id.to_string(),
                ttl: c.ttl(),
                bucket_count: c.bucket_count(),
                bucket_width: c.bucket_width(),
            })
            .collect(),
        books: ledger
            .books()
            .map(|(account, resource, book)| BookEntry {
                account_id: account.to_string(),
                resource_id: resource.to_string(),
                records: book
                    .records()
                    .iter()
                    .map(|r| RecordEntry { amount: JsonAmount(r.amount.widen()), expires_at: r.expires_at.secs() })
                    .collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("snapshot serializes");
    text.push('\n');
    text
}

/// Parses and fully validates a snapshot. Nothing is returned unless every
/// book passes its invariants.
pub fn from_json<A: TokenAmount>(text: &str) -> Result<Ledger<A>, SnapshotError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| SnapshotError::Parse(e.to_string()))?;
    let version = value
        .get("formatVersion")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| SnapshotError::Parse("missing formatVersion".into()))?;
    if version != FORMAT_VERSION {
        return Err(SnapshotError::UnsupportedVersion(version));
    }
    let file: SnapshotFile = serde_json::from_value(value).map_err(|e| SnapshotError::Parse(e.to_string()))?;
    let invalid = |e: &dyn std::fmt::Display| SnapshotError::Invalid(e.to_string());

    let mut ledger = Ledger::<A>::starting_at(Timestamp(file.clock));
    for r in &file.resources {
        let id = ResourceId::new(r.resource_id.as_str()).map_err(|e| invalid(&e))?;
        let expected = ResourceConfig::new(r.ttl, r.bucket_count).map_err(|e| invalid(&e))?;
        if expected.bucket_width() != r.bucket_width {
            return Err(SnapshotError::Invalid(format!(
                "resource {id}: bucketWidth {} does not match ceil({} / {}) = {}",
                r.bucket_width,
                r.ttl,
                r.bucket_count,
                expected.bucket_width()
            )));
        }
        ledger.define_resource(&id, r.ttl, r.bucket_count).map_err(|e| invalid(&e))?;
    }
    for b in &file.books {
        let account = AccountId::new(b.account_id.as_str()).map_err(|e| invalid(&e))?;
        let resource = ResourceId::new(b.resource_id.as_str()).map_err(|e| invalid(&e))?;
        let records = b
            .records
            .iter()
            .map(|r| {
                A::narrow(r.amount.0)
                    .map(|a| BalanceRecord::new(a, Timestamp(r.expires_at)))
                    .ok_or_else(|| SnapshotError::Invalid(format!("amount {} out of range", r.amount.0)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        ledger
            .restore_book(&account, &resource, records)
            .map_err(|e| SnapshotError::Invalid(format!("book {account}/{resource}: {e}")))?;
    }
    Ok(ledger)
}

pub fn load<A: TokenAmount>(path: &Path) -> Result<Ledger<A>, SnapshotError> {
    let text = fs::read_to_string(path)
        .map_err(|source| SnapshotError::Read { path: path.display().to_string(), source })?;
    from_json(&text)
}

/// Writes a sibling temp file, syncs it, then renames over `path`. A crash
/// before the rename leaves the previous snapshot intact.
pub fn save<A: TokenAmount>(ledger: &Ledger<A>, path: &Path) -> Result<(), SnapshotError> {
    let err = |source| SnapshotError::Write { path: path.display().to_string(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or_else(|| Path::new("."));
    let name = path.file_name().ok_or_else(|| err(io::Error::other("path has no file name")))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let write = || -> io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(to_json(ledger).as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        err(e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::Ledger;

    fn sample() -> Ledger {
        let mut l = Ledger::new();
        let r = ResourceId::new("credits").unwrap();
        l.define_resource(&r, 1000, 4).unwrap();
        l.mint(&AccountId::new("alice").unwrap(), &r, 10).unwrap();
        l.advance_clock(Timestamp(300)).unwrap();
        l.mint(&AccountId::new("bob").unwrap(), &r, u128::from(u64::MAX) * 4).unwrap();
        l
    }

    #[test]
    fn empty_ledger_round_trips() {
        let l: Ledger = Ledger::new();
        let text = to_json(&l);
        assert!(text.contains("\"resources\": []"));
        assert_eq!(from_json::<u128>(&text).unwrap(), l);
    }

    #[test]
    fn round_trip_and_canonical() {
        let l = sample();
        let text = to_json(&l);
        assert_eq!(to_json(&l), text);
        let back: Ledger = from_json(&text).unwrap();
        assert_eq!(back, l);
        assert!(text.contains("\"amount\": \"73786976294838206460\""), "{text}");
        assert!(text.contains("\"amount\": 10"));
    }

    #[test]
    fn rejects_misaligned_expiry() {
        let text = to_json(&sample()).replace("\"expiresAt\": 1000", "\"expiresAt\": 1001");
        assert!(matches!(from_json::<u128>(&text), Err(SnapshotError::Invalid(_))));
    }

    #[test]
    fn rejects_unknown_version() {
        let text = to_json(&sample()).replace("\"formatVersion\": 1", "\"formatVersion\": 999");
        assert!(matches!(from_json::<u128>(&text), Err(SnapshotError::UnsupportedVersion(999))));
    }

    #[test]
    fn rejects_wrong_width_and_garbage() {
        let text = to_json(&sample()).replace("\"bucketWidth\": 250", "\"bucketWidth\": 251");
        assert!(matches!(from_json::<u128>(&text), Err(SnapshotError::Invalid(_))));
        assert!(matches!(from_json::<u128>("{not json"), Err(SnapshotError::Parse(_))));
        let text = to_json(&sample()).replace("\"clock\"", "\"extra\": 1, \"clock\"");
        assert!(matches!(from_json::<u128>(&text), Err(SnapshotError::Parse(_))));
    }

    #[test]
    fn narrow_amount_type_rejects_large_amount() {
        let text = to_json(&sample());
        assert!(matches!(from_json::<u64>(&text), Err(SnapshotError::Invalid(_))));
    }

    #[test]
    fn save_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        let l = sample();
        save(&l, &p).unwrap();
        let a = fs::read(&p).unwrap();
        save(&l, &p).unwrap();
        assert_eq!(fs::read(&p).unwrap(), a);
        assert_eq!(load::<u128>(&p).unwrap(), l);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn missing_file() {
        assert!(matches!(load::<u128>(Path::new("/nonexistent/s.json")), Err(SnapshotError::Read { .. })));
    }
}
