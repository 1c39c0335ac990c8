use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::{Annotation, TranslationTriple, ANNOTATION_SCHEMA_VERSION};
use super::CorpusError;

/// Triples in file order, indexed by segment id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripleSet {
    triples: Vec<TranslationTriple>,
    index: HashMap<String, usize>,
    dropped_duplicates: usize,
}

impl TripleSet {
    /// Builds a set from already-validated triples, applying the same
    /// duplicate rules as [`load_triples`].
    pub fn from_triples(triples: Vec<TranslationTriple>) -> Result<Self, CorpusError> {
        let mut set = TripleSet::default();
        let mut seen = HashSet::new();
        for (i, triple) in triples.into_iter().enumerate() {
            triple.validate().map_err(|e| CorpusError::Malformed {
                line: i + 1,
                reason: e.to_string(),
            })?;
            set.push_dedup(triple, i + 1, &mut seen)?;
        }
        Ok(set)
    }

    fn push_dedup(
        &mut self,
        triple: TranslationTriple,
        line: usize,
        seen: &mut HashSet<(String, String, Option<String>)>,
    ) -> Result<(), CorpusError> {
        if self.index.contains_key(&triple.segment_id) {
            return Err(CorpusError::DuplicateSegmentId {
                line,
                segment_id: triple.segment_id,
            });
        }
        let key = (triple.src.clone(), triple.mt.clone(), triple.reference.clone());
        if !seen.insert(key) {
            self.dropped_duplicates += 1;
            return Ok(());
        }
        self.index.insert(triple.segment_id.clone(), self.triples.len());
        self.triples.push(triple);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn get(&self, segment_id: &str) -> Option<&TranslationTriple> {
        self.index.get(segment_id).map(|&i| &self.triples[i])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TranslationTriple> {
        self.triples.iter()
    }

    pub fn as_slice(&self) -> &[TranslationTriple] {
        &self.triples
    }

    pub fn into_vec(self) -> Vec<TranslationTriple> {
        self.triples
    }

    /// Number of records skipped because their (src, mt, ref) repeated an
    /// earlier record.
    pub fn dropped_duplicates(&self) -> usize {
        self.dropped_duplicates
    }
}

impl<'a> IntoIterator for &'a TripleSet {
    type Item = &'a TranslationTriple;
    type IntoIter = std::slice::Iter<'a, TranslationTriple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.iter()
    }
}

#[derive(Deserialize)]
struct TripleLine {
    #[serde(default)]
    schema_version: Option<u32>,
    #[serde(flatten)]
    triple: TranslationTriple,
}

pub fn load_triples(path: impl AsRef<Path>) -> Result<TripleSet, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let set = read_triples_from(BufReader::new(file)).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::io(path, source),
        other => other,
    })?;
    if set.dropped_duplicates > 0 {
        log::info!(
            "{}: dropped {} duplicate (src, mt, ref) records",
            path.display(),
            set.dropped_duplicates
        );
    }
    Ok(set)
}

/// Parses triple JSONL from any reader. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn read_triples_from(reader: impl BufRead) -> Result<TripleSet, CorpusError> {
    let mut set = TripleSet::default();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| CorpusError::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TripleLine = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: lineno,
            reason: e.to_string(),
        })?;
        if let Some(found) = record.schema_version {
            if found != ANNOTATION_SCHEMA_VERSION {
                return Err(CorpusError::SchemaVersion {
                    line: lineno,
                    found,
                    expected: ANNOTATION_SCHEMA_VERSION,
                });
            }
        }
        record.triple.validate().map_err(|e| CorpusError::Malformed {
            line: lineno,
            reason: e.to_string(),
        })?;
        set.push_dedup(record.triple, lineno, &mut seen)?;
    }
    Ok(set)
}

pub fn write_triples(path: impl AsRef<Path>, triples: &TripleSet) -> Result<(), CorpusError> {
    write_jsonl(path.as_ref(), triples.iter())
}

#[derive(Serialize)]
struct AnnotationLineOut<'a> {
    schema_version: u32,
    #[serde(flatten)]
    annotation: &'a Annotation,
}

#[derive(Deserialize)]
struct AnnotationLineIn {
    schema_version: u32,
    #[serde(flatten)]
    annotation: Annotation,
}

pub fn write_annotations(path: impl AsRef<Path>, annotations: &[Annotation]) -> Result<(), CorpusError> {
    write_jsonl(
        path.as_ref(),
        annotations.iter().map(|a| AnnotationLineOut {
            schema_version: ANNOTATION_SCHEMA_VERSION,
            annotation: a,
        }),
    )
}

/// Annotation JSONL as a string, in the same format as [`write_annotations`].
pub fn annotations_to_jsonl(annotations: &[Annotation]) -> String {
    let mut out = String::new();
    for a in annotations {
        let line = AnnotationLineOut {
            schema_version: ANNOTATION_SCHEMA_VERSION,
            annotation: a,
        };
        out.push_str(&serde_json::to_string(&line).expect("annotation serialises"));
        out.push('\n');
    }
    out
}

/// Reads annotation JSONL. With `triples`, every annotation must refer to a
/// known segment and its spans must fit the segment's texts.
pub fn read_annotations(
    path: impl AsRef<Path>,
    triples: Option<&TripleSet>,
) -> Result<Vec<Annotation>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_annotations_from(BufReader::new(file), triples).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::io(path, source),
        other => other,
    })
}

/// [`read_annotations`] over any buffered reader.
pub fn read_annotations_from(
    reader: impl BufRead,
    triples: Option<&TripleSet>,
) -> Result<Vec<Annotation>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| CorpusError::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AnnotationLineIn =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: lineno,
                reason: e.to_string(),
            })?;
        if record.schema_version != ANNOTATION_SCHEMA_VERSION {
            return Err(CorpusError::SchemaVersion {
                line: lineno,
                found: record.schema_version,
                expected: ANNOTATION_SCHEMA_VERSION,
            });
        }
        let triple = match triples {
            Some(set) => Some(set.get(&record.annotation.segment_id).ok_or_else(|| {
                CorpusError::invariant(format!(
                    "line {lineno}: unknown segment_id {:?}",
                    record.annotation.segment_id
                ))
            })?),
            None => None,
        };
        record
            .annotation
            .validate(triple)
            .map_err(|e| CorpusError::invariant(format!("line {lineno}: {e}")))?;
        out.push(record.annotation);
    }
    Ok(out)
}

/// Exports `annotations` to `path` and reads them back.
pub fn round_trip(
    annotations: &[Annotation],
    path: impl AsRef<Path>,
    triples: Option<&TripleSet>,
) -> Result<Vec<Annotation>, CorpusError> {
    write_annotations(path.as_ref(), annotations)?;
    read_annotations(path, triples)
}

// Write-temp-then-rename so readers never observe a half-written file.
fn write_jsonl<T: Serialize>(path: &Path, records: impl Iterator<Item = T>) -> Result<(), CorpusError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CorpusError::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        for record in records {
            serde_json::to_writer(&mut w, &record)
                .map_err(|e| CorpusError::io(path, std::io::Error::other(e)))?;
            w.write_all(b"\n").map_err(|e| CorpusError::io(path, e))?;
        }
        w.flush().map_err(|e| CorpusError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| CorpusError::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Dimension, ErrorCategory, ErrorSpan, LanguagePair, SpanTarget};
    use chrono::{TimeZone, Utc};
    use std::io::Cursor;

    fn line(id: &str, src: &str, mt: &str, r: Option<&str>) -> String {
        let mut v = serde_json::json!({
            "segment_id": id,
            "lp": {"src_lang": "eng", "tgt_lang": "yor"},
            "src": src,
            "mt": mt,
        });
        if let Some(r) = r {
            v["ref"] = serde_json::json!(r);
        }
        v.to_string()
    }

    #[test]
    fn loads_distinct_records() {
        let text = [
            line("1", "a", "b", Some("c")),
            line("2", "d", "e", None),
            line("3", "f", "g", Some("h")),
        ]
        .join("\n");
        let set = read_triples_from(Cursor::new(text)).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.get("2").unwrap().reference, None);
    }

    #[test]
    fn drops_content_duplicates_keeping_first() {
        let text = [line("1", "a", "b", Some("c")), line("2", "a", "b", Some("c"))].join("\n");
        let set = read_triples_from(Cursor::new(text)).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.dropped_duplicates(), 1);
        assert!(set.get("1").is_some());
    }

    #[test]
    fn empty_mt_reports_line() {
        let text = [line("1", "a", "b", None), line("2", "a", "", None)].join("\n");
        match read_triples_from(Cursor::new(text)) {
            Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_segment_id_rejected() {
        let text = [line("1", "a", "b", None), line("1", "x", "y", None)].join("\n");
        assert!(matches!(
            read_triples_from(Cursor::new(text)),
            Err(CorpusError::DuplicateSegmentId { line: 2, .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_triples("/nonexistent/triples.jsonl"),
            Err(CorpusError::Io { .. })
        ));
    }

    fn annotation(spans: Vec<ErrorSpan>) -> Annotation {
        Annotation {
            segment_id: "1".into(),
            evaluator_id: "e1".into(),
            dimension: Dimension::Adequacy,
            spans,
            da_score: 67,
            submitted_at: Utc.with_ymd_and_hms(2024, 3, 1, 12, 0, 0).unwrap(),
        }
    }

    #[test]
    fn annotation_round_trip_and_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        let spans = vec![
            ErrorSpan {
                start: 0,
                end: 1,
                target: SpanTarget::SourceSide,
                category: ErrorCategory::Omission,
            },
            ErrorSpan {
                start: 1,
                end: 3,
                target: SpanTarget::TranslationSide,
                category: ErrorCategory::Mistranslation,
            },
        ];
        let set = vec![annotation(spans)];
        assert_eq!(round_trip(&set, &path, None).unwrap(), set);
        assert!(round_trip(&[], &path, None).unwrap().is_empty());

        let triples = TripleSet::from_triples(vec![TranslationTriple {
            segment_id: "1".into(),
            lp: LanguagePair::new("eng", "yor").unwrap(),
            src: "ab".into(),
            mt: "xy".into(),
            reference: None,
            split: Default::default(),
        }])
        .unwrap();
        let too_long = vec![annotation(vec![ErrorSpan {
            start: 0,
            end: 5,
            target: SpanTarget::TranslationSide,
            category: ErrorCategory::Addition,
        }])];
        assert!(matches!(
            round_trip(&too_long, &path, Some(&triples)),
            Err(CorpusError::Invariant(_))
        ));
    }

    #[test]
    fn schema_version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        let mut v = serde_json::to_value(annotation(vec![])).unwrap();
        v["schema_version"] = serde_json::json!(99);
        std::fs::write(&path, format!("{v}\n")).unwrap();
        assert!(matches!(
            read_annotations(&path, None),
            Err(CorpusError::SchemaVersion { found: 99, .. })
        ));
    }
}
