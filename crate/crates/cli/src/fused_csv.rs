//! `fused_outcomes.csv`: one row per (case, reader) with the fused decision.

use std::path::Path;

use tandem_core::FusedOutcome;

use crate::CliError;

pub const FUSED_OUTCOMES_FILE: &str = "fused_outcomes.csv";
const HEADER: [&str; 6] = ["case_id", "reader_id", "p_fused", "decision", "confidence_10", "human_consulted"];

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_fused(path: &Path, outcomes: &[FusedOutcome]) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::io(path, e);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(err)?;
    w.write_record(HEADER).map_err(err)?;
    for o in outcomes {
        w.write_record([
            o.case_id.as_str(),
            o.reader_id.as_str(),
            &o.p_fused.to_string(),
            flag(o.decision),
            &o.confidence_10.to_string(),
            flag(o.human_consulted),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_fused(path: &Path) -> Result<Vec<FusedOutcome>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header = r.headers().map_err(|e| CliError::io(path, e))?.clone();
    if header.iter().ne(HEADER) {
        return Err(CliError::Data(format!("{}: expected header {}", path.display(), HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::Data(format!("{}:{line}: {e}", path.display())))?;
        let bad = |col: &str| CliError::Data(format!("{}:{line}: malformed `{col}`", path.display()));
        let num = |k: usize| rec[k].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(HEADER[k]));
        let bit = |k: usize| match &rec[k] {
            "1" => Ok(true),
            "0" => Ok(false),
            _ => Err(bad(HEADER[k])),
        };
        let p_fused = num(2)?;
        if !(0.0..=1.0).contains(&p_fused) {
            return Err(bad("p_fused"));
        }
        out.push(FusedOutcome {
            case_id: rec[0].to_string(),
            reader_id: rec[1].to_string(),
            p_fused,
            decision: bit(3)?,
            confidence_10: num(4)?,
            human_consulted: bit(5)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(FUSED_OUTCOMES_FILE);
        let rows = vec![
            FusedOutcome {
                case_id: "C1".into(),
                reader_id: "R1".into(),
                p_fused: 0.1 + 0.2,
                decision: false,
                confidence_10: 4.0,
                human_consulted: true,
            },
            FusedOutcome {
                case_id: "C2".into(),
                reader_id: "R1".into(),
                p_fused: 0.5,
                decision: true,
                confidence_10: 0.0,
                human_consulted: false,
            },
        ];
        write_fused(&path, &rows).unwrap();
        assert_eq!(read_fused(&path).unwrap(), rows);
    }

    #[test]
    fn rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, "case_id,reader_id,p_fused,decision,confidence_10,human_consulted\nC1,R1,1.5,1,2,0\n").unwrap();
        assert!(matches!(read_fused(&path), Err(CliError::Data(_))));
    }
}
