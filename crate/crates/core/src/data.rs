//! LETOR / SVMLight ranking data.
//!
//! Each nonempty line is `<rel> qid:<q> <fid>:<val> ... [# comment]`. Feature
//! ids are 1-based and may be sparse; they are densified with `0.0`. Lines
//! sharing a qid are grouped even when they are not contiguous, keeping file
//! order inside each group.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    #[serde(alias = "vali")]
    Validation,
    Test,
}

impl Split {
    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.txt",
            Split::Validation => "vali.txt",
            Split::Test => "test.txt",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "vali" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    /// Dense feature vector; index 0 holds feature id 1.
    pub features: Vec<f64>,
    pub relevance: u32,
    pub doc_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub query_id: String,
    pub documents: Vec<Document>,
}

impl QueryGroup {
    pub fn grades(&self) -> Vec<u32> {
        self.documents.iter().map(|d| d.relevance).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingDataset {
    pub n_features: usize,
    pub groups: Vec<QueryGroup>,
    pub split: Split,
}

impl RankingDataset {
    pub fn num_documents(&self) -> usize {
        self.groups.iter().map(|g| g.documents.len()).sum()
    }

    pub fn max_relevance(&self) -> u32 {
        self.groups
            .iter()
            .flat_map(|g| g.documents.iter().map(|d| d.relevance))
            .max()
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Serializes back to dense LETOR text. `parse_letor` of the output
    /// reproduces `self`.
    pub fn write_letor<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for group in &self.groups {
            for doc in &group.documents {
                write!(out, "{} qid:{}", doc.relevance, group.query_id)?;
                for (i, v) in doc.features.iter().enumerate() {
                    write!(out, " {}:{}", i + 1, v)?;
                }
                writeln!(out, " # {}", doc.doc_id)?;
            }
        }
        Ok(())
    }

    pub fn to_letor_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_letor(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("LETOR output is UTF-8")
    }
}

/// The three splits of one LETOR fold.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub train: RankingDataset,
    pub validation: RankingDataset,
    pub test: RankingDataset,
}

impl SplitData {
    pub fn n_features(&self) -> usize {
        self.train.n_features
    }

    pub fn get(&self, split: Split) -> &RankingDataset {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }
}

struct ParsedLine {
    relevance: u32,
    qid: String,
    pairs: Vec<(usize, f64)>,
    comment: Option<String>,
}

fn parse_line(line: &str, lineno: usize) -> Result<ParsedLine> {
    let err = |message: String| Error::Parse {
        line: lineno,
        message,
    };
    let (body, comment) = match line.find('#') {
        Some(pos) => {
            let c = line[pos + 1..].trim();
            (&line[..pos], (!c.is_empty()).then(|| c.to_string()))
        }
        None => (line, None),
    };
    let mut tokens = body.split_whitespace();
    let rel_tok = tokens
        .next()
        .ok_or_else(|| err("missing relevance label".into()))?;
    let relevance: u32 = rel_tok.parse().map_err(|_| {
        err(format!(
            "relevance {rel_tok:?} is not a non-negative integer"
        ))
    })?;
    let qid_tok = tokens.next().ok_or_else(|| err("missing qid".into()))?;
    let qid = qid_tok
        .strip_prefix("qid:")
        .filter(|q| !q.is_empty())
        .ok_or_else(|| err(format!("expected qid:<id>, found {qid_tok:?}")))?
        .to_string();

    let mut pairs = Vec::new();
    for tok in tokens {
        let (fid, val) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("expected <fid>:<value>, found {tok:?}")))?;
        let fid: usize = fid
            .parse()
            .map_err(|_| err(format!("bad feature id {fid:?}")))?;
        if fid == 0 {
            return Err(err("feature ids start at 1".into()));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| err(format!("bad feature value {val:?}")))?;
        pairs.push((fid, val));
    }
    if pairs.is_empty() {
        return Err(err("line has no features".into()));
    }
    Ok(ParsedLine {
        relevance,
        qid,
        pairs,
        comment,
    })
}

/// Parses LETOR text. Without `declared_n` the dimensionality is the largest
/// feature id observed, so an empty stream is an error in that case.
pub fn parse_letor<R: BufRead>(
    reader: R,
    declared_n: Option<usize>,
    split: Split,
) -> Result<RankingDataset> {
    let mut order: Vec<String> = Vec::new();
    let mut by_qid: HashMap<String, Vec<(usize, ParsedLine)>> = HashMap::new();
    let mut max_fid = 0;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parsed = parse_line(line, lineno)?;
        for &(fid, _) in &parsed.pairs {
            if let Some(declared) = declared_n {
                if fid > declared {
                    return Err(Error::FeatureOutOfRange {
                        line: lineno,
                        fid,
                        declared,
                    });
                }
            }
            max_fid = max_fid.max(fid);
        }
        if !by_qid.contains_key(&parsed.qid) {
            order.push(parsed.qid.clone());
        }
        by_qid
            .entry(parsed.qid.clone())
            .or_default()
            .push((lineno, parsed));
    }

    let n_features = match declared_n {
        Some(n) => n,
        None if max_fid == 0 => {
            return Err(Error::EmptyData(format!(
                "{split} stream has no documents and no declared dimensionality"
            )))
        }
        None => max_fid,
    };

    let groups = order
        .into_iter()
        .map(|qid| {
            let lines = by_qid.remove(&qid).expect("qid recorded in order");
            let documents = lines
                .into_iter()
                .enumerate()
                .map(|(ordinal, (_, parsed))| {
                    let mut features = vec![0.0; n_features];
                    for (fid, val) in parsed.pairs {
                        features[fid - 1] = val;
                    }
                    Document {
                        features,
                        relevance: parsed.relevance,
                        doc_id: parsed
                            .comment
                            .unwrap_or_else(|| format!("{}-{}", qid, ordinal + 1)),
                    }
                })
                .collect();
            QueryGroup {
                query_id: qid,
                documents,
            }
        })
        .collect();

    Ok(RankingDataset {
        n_features,
        groups,
        split,
    })
}

pub fn parse_letor_str(
    text: &str,
    declared_n: Option<usize>,
    split: Split,
) -> Result<RankingDataset> {
    parse_letor(text.as_bytes(), declared_n, split)
}

pub fn load_letor_file(
    path: &Path,
    declared_n: Option<usize>,
    split: Split,
) -> Result<RankingDataset> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    parse_letor(BufReader::new(file), declared_n, split)
}

/// Loads `train.txt`, `vali.txt` and `test.txt` from a fold directory.
pub fn load_split_dir(dir: &Path) -> Result<SplitData> {
    let splits = [Split::Train, Split::Validation, Split::Test];
    for split in splits {
        let path = dir.join(split.file_name());
        if !path.is_file() {
            return Err(Error::MissingFile(path));
        }
    }
    let [train, validation, test] =
        splits.map(|split| load_letor_file(&dir.join(split.file_name()), None, split));
    let (train, validation, test) = (train?, validation?, test?);
    for other in [&validation, &test] {
        if other.n_features != train.n_features {
            return Err(Error::DimensionMismatch {
                expected: train.n_features,
                found: other.n_features,
            });
        }
    }
    Ok(SplitData {
        train,
        validation,
        test,
    })
}

/// Writes the three splits in the fold layout `load_split_dir` expects.
pub fn write_split_dir(data: &SplitData, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for split in [Split::Train, Split::Validation, Split::Test] {
        let path = dir.join(split.file_name());
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = std::io::BufWriter::new(file);
        data.get(split)
            .write_letor(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line_densified() {
        let ds = parse_letor_str("2 qid:1 1:0.5 3:1.0", Some(3), Split::Train).unwrap();
        assert_eq!(ds.n_features, 3);
        assert_eq!(ds.groups.len(), 1);
        let doc = &ds.groups[0].documents[0];
        assert_eq!(ds.groups[0].query_id, "1");
        assert_eq!(doc.features, vec![0.5, 0.0, 1.0]);
        assert_eq!(doc.relevance, 2);
        assert_eq!(doc.doc_id, "1-1");
    }

    #[test]
    fn empty_stream() {
        let ds = parse_letor_str("", Some(46), Split::Test).unwrap();
        assert!(ds.groups.is_empty());
        assert_eq!(ds.n_features, 46);
        assert!(matches!(
            parse_letor_str("", None, Split::Test),
            Err(Error::EmptyData(_))
        ));
    }

    #[test]
    fn non_contiguous_qids_grouped_in_file_order() {
        let text = "0 qid:1 1:0.1 2:0.2 # a\n\
                    1 qid:2 1:0.3 2:0.4 # b\n\
                    \n\
                    2 qid:1 1:0.5 2:0.6 # c\r\n\
                    \n";
        let ds = parse_letor_str(text, None, Split::Train).unwrap();
        assert_eq!(ds.groups.len(), 2);
        assert_eq!(ds.num_documents(), 3);
        let ids: Vec<_> = ds.groups[0]
            .documents
            .iter()
            .map(|d| d.doc_id.as_str())
            .collect();
        assert_eq!(ids, ["a", "c"]);
        assert_eq!(ds.groups[1].query_id, "2");
    }

    #[test]
    fn letor4_comment_kept_verbatim() {
        let line =
            "0 qid:10002 1:0.007477 2:0.000000 # docid = GX008-86-4444840 inc = 1 prob = 0.086622";
        let ds = parse_letor_str(line, None, Split::Train).unwrap();
        assert_eq!(
            ds.groups[0].documents[0].doc_id,
            "docid = GX008-86-4444840 inc = 1 prob = 0.086622"
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_rel = parse_letor_str("1 qid:1 1:0.1\nx qid:1 1:0.2", None, Split::Train);
        assert!(matches!(bad_rel, Err(Error::Parse { line: 2, .. })));
        let neg_rel = parse_letor_str("-1 qid:1 1:0.1", None, Split::Train);
        assert!(matches!(neg_rel, Err(Error::Parse { line: 1, .. })));
        let frac_rel = parse_letor_str("1.5 qid:1 1:0.1", None, Split::Train);
        assert!(matches!(frac_rel, Err(Error::Parse { line: 1, .. })));
        let no_qid = parse_letor_str("1 1:0.1", None, Split::Train);
        assert!(matches!(no_qid, Err(Error::Parse { line: 1, .. })));
        let zero_fid = parse_letor_str("1 qid:3 0:0.1", None, Split::Train);
        assert!(matches!(zero_fid, Err(Error::Parse { .. })));
        let too_big = parse_letor_str("1 qid:3 1:0.1\n0 qid:3 4:0.1", Some(3), Split::Train);
        assert!(matches!(
            too_big,
            Err(Error::FeatureOutOfRange {
                line: 2,
                fid: 4,
                declared: 3
            })
        ));
    }

    #[test]
    fn round_trip_through_text() {
        let text = "2 qid:7 1:0.25 2:-1e-3 4:3 # d1\n0 qid:8 3:0.1\n1 qid:7 2:1 # d2\n";
        let ds = parse_letor_str(text, None, Split::Validation).unwrap();
        let again = parse_letor_str(&ds.to_letor_string(), None, Split::Validation).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn split_dir_missing_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("train.txt"), "1 qid:1 1:1 2:1\n").unwrap();
        std::fs::write(dir.path().join("test.txt"), "1 qid:1 1:1 2:1\n").unwrap();
        let err = load_split_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("vali.txt"), "{err}");
    }

    #[test]
    fn split_dir_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("train.txt"), "1 qid:1 1:1 2:1 3:0\n").unwrap();
        std::fs::write(dir.path().join("vali.txt"), "1 qid:2 1:1 2:1\n").unwrap();
        std::fs::write(dir.path().join("test.txt"), "1 qid:3 1:1 2:1 3:1\n").unwrap();
        assert!(matches!(
            load_split_dir(dir.path()),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 2
            })
        ));
    }
}
