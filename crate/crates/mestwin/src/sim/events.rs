use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CdcOp {
    Insert,
    Update,
}

/// One change-data-capture record. Payload keys are sorted (BTreeMap-backed)
/// so serialization is byte-stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdcRecord {
    pub table: String,
    pub op: CdcOp,
    pub ts: String,
    pub payload: serde_json::Map<String, serde_json::Value>,
}

impl CdcRecord {
    pub fn new(table: &str, op: CdcOp, ts: String, payload: serde_json::Value) -> Self {
        let payload = match payload {
            serde_json::Value::Object(map) => map,
            other => panic!("CDC payload must be an object, got {other}"),
        };
        CdcRecord { table: table.to_string(), op, ts, payload }
    }
}

/// Ordered CDC stream of one simulation run. Identical inputs produce a
/// byte-identical stream; `content_hash` is the determinism check.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    pub records: Vec<CdcRecord>,
}

impl EventLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Newline-delimited JSON, one record per line.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<EventLog, serde_json::Error> {
        let mut records = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            records.push(serde_json::from_str(line)?);
        }
        Ok(EventLog { records })
    }

    /// SHA-256 of the NDJSON serialization, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_ndjson().as_bytes()))
    }

    pub fn inserts_for<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a CdcRecord> {
        self.records
            .iter()
            .filter(move |r| r.table == table && r.op == CdcOp::Insert)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndjson_round_trip() {
        let mut log = EventLog::default();
        log.records.push(CdcRecord::new(
            "work_order",
            CdcOp::Insert,
            "2025-01-06T10:15:00".into(),
            serde_json::json!({"order_id": "WO-1", "quantity": 3}),
        ));
        log.records.push(CdcRecord::new(
            "work_order",
            CdcOp::Update,
            "2025-01-06T11:00:00".into(),
            serde_json::json!({"order_id": "WO-1", "status": "InProgress"}),
        ));
        let parsed = EventLog::from_ndjson(&log.to_ndjson()).unwrap();
        assert_eq!(parsed.records, log.records);
        assert_eq!(parsed.content_hash(), log.content_hash());
    }

    #[test]
    fn envelope_field_shape() {
        let record = CdcRecord::new(
            "ncr",
            CdcOp::Insert,
            "2025-01-06T10:15:00".into(),
            serde_json::json!({"ncr_id": "NCR-1"}),
        );
        let line = serde_json::to_string(&record).unwrap();
        assert!(line.starts_with(r#"{"table":"ncr","op":"insert","ts":"2025-01-06T10:15:00","payload":"#), "{line}");
    }
}
