//! Append-only JSONL log of every protocol message, precise enough to
//! re-check a finished run message by message.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::error::Result;

/// Writes one JSON object per line: round, tick, message type, payload.
pub struct ReplayWriter {
    out: BufWriter<File>,
}

impl ReplayWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(ReplayWriter {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn record<T: Serialize>(&mut self, round: u64, tick: u64, kind: &str, payload: &T) -> Result<()> {
        let line = json!({
            "round": round,
            "tick": tick,
            "type": kind,
            "payload": payload,
        });
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::{RerouteTask, Score};

    #[test]
    fn lines_carry_the_envelope_and_the_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("replay.jsonl");
        let mut w = ReplayWriter::create(&path).unwrap();
        let task = RerouteTask {
            task_id: 0,
            shortage_segment: 7,
            veh_id: 42,
            tick: 100,
        };
        w.record(3, 100, "task", &task).unwrap();
        w.record(3, 100, "response", &json!({"task_id": 0, "veh_id": 42, "score": Score::Infinite}))
            .unwrap();
        w.finish().unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<serde_json::Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0]["round"], 3);
        assert_eq!(lines[0]["tick"], 100);
        assert_eq!(lines[0]["type"], "task");
        assert_eq!(lines[0]["payload"]["shortage_segment"], 7);
        assert_eq!(lines[1]["type"], "response");
        assert_eq!(lines[1]["payload"]["score"], "infinite");
    }
}
