use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::record::{ReviewRecord, APPRAISAL_COUNT, EMOTION_COUNT, EMOTION_NAMES};
use crate::error::{Error, Result, RowError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Jsonl,
    Csv,
}

impl DataFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Ok(DataFormat::Jsonl),
            Some("csv") => Ok(DataFormat::Csv),
            _ => Err(Error::Config(format!(
                "cannot infer dataset format of {}; use .jsonl or .csv",
                path.display()
            ))),
        }
    }
}

/// Loosely typed row so that arity and range problems become row errors
/// rather than parse failures.
#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    text: Option<String>,
    appraisals: Option<Vec<i64>>,
    emotions: Option<Vec<i64>>,
    pcb_repurchase: Option<i64>,
    pcb_promote: Option<i64>,
}

fn rating(field: &str, v: i64) -> std::result::Result<u8, String> {
    if (1..=7).contains(&v) {
        Ok(v as u8)
    } else {
        Err(format!("{field} value {v} outside [1, 7]"))
    }
}

fn ratings<const N: usize>(field: &str, values: Option<Vec<i64>>) -> std::result::Result<[u8; N], String> {
    let values = values.ok_or_else(|| format!("missing field `{field}`"))?;
    if values.len() != N {
        return Err(format!("`{field}` needs {N} values, got {}", values.len()));
    }
    let mut out = [0u8; N];
    for (i, (o, v)) in out.iter_mut().zip(values).enumerate() {
        *o = rating(&format!("{field}[{i}]"), v)?;
    }
    Ok(out)
}

fn convert(raw: RawRecord) -> std::result::Result<ReviewRecord, String> {
    let id = raw.id.ok_or("missing field `id`")?;
    if id.is_empty() {
        return Err("empty `id`".into());
    }
    Ok(ReviewRecord {
        id,
        text: raw.text.ok_or("missing field `text`")?,
        appraisals: ratings::<APPRAISAL_COUNT>("appraisals", raw.appraisals)?,
        emotions: ratings::<EMOTION_COUNT>("emotions", raw.emotions)?,
        pcb_repurchase: rating(
            "pcb_repurchase",
            raw.pcb_repurchase.ok_or("missing field `pcb_repurchase`")?,
        )?,
        pcb_promote: rating("pcb_promote", raw.pcb_promote.ok_or("missing field `pcb_promote`")?)?,
    })
}

fn csv_header() -> Vec<String> {
    let mut h = vec!["id".to_string(), "text".to_string()];
    h.extend((1..=APPRAISAL_COUNT).map(|i| format!("appraisal_{i}")));
    h.extend(EMOTION_NAMES.iter().map(|s| s.to_string()));
    h.push("pcb_repurchase".into());
    h.push("pcb_promote".into());
    h
}

/// Parses dataset text, collecting every bad row before rejecting the batch.
pub fn parse(content: &str, format: DataFormat) -> Result<Vec<ReviewRecord>> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let push = |records: &mut Vec<(usize, ReviewRecord)>,
                errors: &mut Vec<RowError>,
                line: usize,
                r: std::result::Result<ReviewRecord, String>| match r {
        Ok(rec) => records.push((line, rec)),
        Err(message) => errors.push(RowError { line, message }),
    };
    match format {
        DataFormat::Jsonl => {
            for (i, line) in content.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let parsed = serde_json::from_str::<RawRecord>(line)
                    .map_err(|e| format!("malformed JSON: {e}"))
                    .and_then(convert);
                push(&mut records, &mut errors, i + 1, parsed);
            }
        }
        DataFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_reader(content.as_bytes());
            let header: Vec<String> = reader
                .headers()
                .map_err(|e| Error::Validation(format!("unreadable CSV header: {e}")))?
                .iter()
                .map(str::to_string)
                .collect();
            if header != csv_header() {
                return Err(Error::Validation(format!(
                    "CSV header must be `{}`",
                    csv_header().join(",")
                )));
            }
            for row in reader.records() {
                let row = match row {
                    Ok(r) => r,
                    Err(e) => {
                        let line = e.position().map_or(0, |p| p.line() as usize);
                        errors.push(RowError {
                            line,
                            message: format!("malformed CSV row: {e}"),
                        });
                        continue;
                    }
                };
                let line = row.position().map_or(0, |p| p.line() as usize);
                push(&mut records, &mut errors, line, csv_row(&row));
            }
        }
    }
    let mut seen = HashSet::new();
    for (line, r) in &records {
        if !seen.insert(r.id.as_str()) {
            errors.push(RowError {
                line: *line,
                message: format!("duplicate id `{}`", r.id),
            });
        }
    }
    if !errors.is_empty() {
        errors.sort_by_key(|e| e.line);
        return Err(Error::Rows(errors));
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

fn csv_row(row: &csv::StringRecord) -> std::result::Result<ReviewRecord, String> {
    let expected = 2 + APPRAISAL_COUNT + EMOTION_COUNT + 2;
    if row.len() != expected {
        return Err(format!("expected {expected} columns, got {}", row.len()));
    }
    let num = |i: usize| -> std::result::Result<i64, String> {
        row[i]
            .trim()
            .parse::<i64>()
            .map_err(|_| format!("column {} is not an integer: `{}`", i + 1, &row[i]))
    };
    let collect = |range: std::ops::Range<usize>| range.map(num).collect::<std::result::Result<Vec<_>, _>>();
    let a0 = 2;
    let e0 = a0 + APPRAISAL_COUNT;
    let p0 = e0 + EMOTION_COUNT;
    convert(RawRecord {
        id: Some(row[0].to_string()),
        text: Some(row[1].to_string()),
        appraisals: Some(collect(a0..e0)?),
        emotions: Some(collect(e0..p0)?),
        pcb_repurchase: Some(num(p0)?),
        pcb_promote: Some(num(p0 + 1)?),
    })
}

pub fn ingest(path: &Path, format: Option<DataFormat>) -> Result<Vec<ReviewRecord>> {
    let format = match format {
        Some(f) => f,
        None => DataFormat::from_path(path)?,
    };
    parse(&crate::io::read_to_string(path)?, format)
}

pub fn export(records: &[ReviewRecord], format: DataFormat) -> Result<String> {
    match format {
        DataFormat::Jsonl => {
            let mut s = String::new();
            for r in records {
                s.push_str(&serde_json::to_string(r)?);
                s.push('\n');
            }
            Ok(s)
        }
        DataFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::Serde(e.to_string());
            w.write_record(csv_header()).map_err(csv_err)?;
            for r in records {
                let mut row = vec![r.id.clone(), r.text.clone()];
                row.extend(r.appraisals.iter().map(u8::to_string));
                row.extend(r.emotions.iter().map(u8::to_string));
                row.push(r.pcb_repurchase.to_string());
                row.push(r.pcb_promote.to_string());
                w.write_record(&row).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(id: &str) -> ReviewRecord {
        ReviewRecord {
            id: id.to_string(),
            text: "Great stay, \"really\".\nWould return!".to_string(),
            appraisals: [4; APPRAISAL_COUNT],
            emotions: [2, 3, 1, 6, 7, 5, 1, 4],
            pcb_repurchase: 6,
            pcb_promote: 2,
        }
    }

    #[test]
    fn three_rows() {
        let recs = vec![record("a"), record("b"), record("c")];
        for fmt in [DataFormat::Jsonl, DataFormat::Csv] {
            let text = export(&recs, fmt).unwrap();
            assert_eq!(parse(&text, fmt).unwrap(), recs);
        }
    }

    #[test]
    fn out_of_range_appraisal_cites_row() {
        let good = serde_json::to_string(&record("a")).unwrap();
        let bad = good.replace("\"appraisals\":[4,", "\"appraisals\":[9,").replace("\"a\"", "\"b\"");
        let err = parse(&format!("{good}\n{bad}\n"), DataFormat::Jsonl).unwrap_err();
        match err {
            Error::Rows(rows) => {
                assert_eq!(rows.len(), 1);
                assert_eq!(rows[0].line, 2);
                assert!(rows[0].message.contains("appraisals[0] value 9"), "{}", rows[0].message);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_are_collected() {
        let lines = [
            r#"{"id":"x","text":"t","appraisals":[1,2],"emotions":[1,1,1,1,1,1,1,1],"pcb_repurchase":1,"pcb_promote":1}"#,
            "not json",
            r#"{"id":"y","text":"t","appraisals":[1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1],"emotions":[1,1,1,1,1,1,1,1],"pcb_promote":1}"#,
        ];
        match parse(&lines.join("\n"), DataFormat::Jsonl).unwrap_err() {
            Error::Rows(rows) => {
                assert_eq!(rows.iter().map(|r| r.line).collect::<Vec<_>>(), vec![1, 2, 3]);
                assert!(rows[0].message.contains("needs 20 values"));
                assert!(rows[2].message.contains("pcb_repurchase"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_rejects_wrong_header_and_duplicates() {
        assert!(parse("id,text\n", DataFormat::Csv).is_err());
        let dup = export(&[record("a"), record("a")], DataFormat::Csv).unwrap();
        assert!(matches!(parse(&dup, DataFormat::Csv), Err(Error::Rows(_))));
    }

    fn arb_record() -> impl Strategy<Value = ReviewRecord> {
        (
            "[a-z0-9]{1,8}",
            "\\PC{0,60}",
            prop::array::uniform20(1u8..=7),
            prop::array::uniform8(1u8..=7),
            1u8..=7,
            1u8..=7,
        )
            .prop_map(|(id, text, appraisals, emotions, r, p)| ReviewRecord {
                id,
                text,
                appraisals,
                emotions,
                pcb_repurchase: r,
                pcb_promote: p,
            })
    }

    proptest! {
        #[test]
        fn export_ingest_round_trip(recs in prop::collection::vec(arb_record(), 1..6), csv in any::<bool>()) {
            let mut seen = HashSet::new();
            let recs: Vec<_> = recs.into_iter().filter(|r| seen.insert(r.id.clone())).collect();
            let fmt = if csv { DataFormat::Csv } else { DataFormat::Jsonl };
            let back = parse(&export(&recs, fmt).unwrap(), fmt).unwrap();
            prop_assert_eq!(back, recs);
        }
    }
}
