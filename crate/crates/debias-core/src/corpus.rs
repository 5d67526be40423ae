//! Review corpus ingestion, canonical serialization and train/test splitting.
//!
//! Two input schemas are supported: the Kaggle "Fine Food" CSV layout
//! (`Id, ProductId, UserId, ..., Score, Time, Summary, Text`) and SNAP-style
//! JSON lines (`reviewerID, asin, overall, summary, reviewText`). Both are
//! mapped onto [`ReviewRecord`] and can be re-emitted in the canonical
//! JSON-lines form used by the rest of the toolkit.

use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of rows that may be skipped before parsing fails outright.
pub const SKIP_LIMIT_PERCENT: f64 = 1.0;

/// One review: identifiers, integer score in 1..=5 and the review text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub review_id: String,
    pub user_id: String,
    pub product_id: String,
    pub score: u8,
    pub summary: String,
    pub body: String,
    #[serde(skip_serializing, default)]
    pub timestamp: Option<i64>,
}

impl ReviewRecord {
    /// Checks the record-level invariants: score in 1..=5, non-empty ids.
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.score) {
            return Err(Error::Data(format!("score {} outside 1..=5", self.score)));
        }
        if self.user_id.is_empty() || self.product_id.is_empty() {
            return Err(Error::Data("empty user or product id".into()));
        }
        Ok(())
    }
}

/// An ordered, immutable collection of reviews.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub records: Vec<ReviewRecord>,
    pub source_tag: String,
}

impl Dataset {
    pub fn new(records: Vec<ReviewRecord>, source_tag: impl Into<String>) -> Self {
        Self {
            records,
            source_tag: source_tag.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// A single skipped input row.
#[derive(Debug, Clone)]
pub struct RecordError {
    pub line: u64,
    pub reason: String,
}

/// Outcome of a parse: how many rows made it, how many were skipped and why.
#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub parsed: usize,
    pub skipped: usize,
    /// First errors encountered, capped at [`ParseReport::MAX_STORED_ERRORS`].
    pub errors: Vec<RecordError>,
}

impl ParseReport {
    pub const MAX_STORED_ERRORS: usize = 100;

    fn record_skip(&mut self, line: u64, reason: impl Into<String>) {
        self.skipped += 1;
        if self.errors.len() < Self::MAX_STORED_ERRORS {
            self.errors.push(RecordError {
                line,
                reason: reason.into(),
            });
        }
    }

    fn check_threshold(&self) -> Result<()> {
        let total = self.parsed + self.skipped;
        if total > 0 && (self.skipped as f64) > total as f64 * SKIP_LIMIT_PERCENT / 100.0 {
            return Err(Error::TooManyBadRecords {
                skipped: self.skipped,
                total,
                limit_percent: SKIP_LIMIT_PERCENT,
            });
        }
        Ok(())
    }
}

fn parse_score_str(s: &str) -> Option<u8> {
    let score: i64 = s.trim().parse().ok()?;
    if (1..=5).contains(&score) {
        Some(score as u8)
    } else {
        None
    }
}

/// Parses a Fine Food style CSV stream (RFC 4180 quoting, header row
/// required). Malformed rows are skipped and counted; parsing fails if more
/// than [`SKIP_LIMIT_PERCENT`] of the rows were skipped.
pub fn parse_csv<R: Read>(reader: R, source_tag: &str) -> Result<(Dataset, ParseReport)> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let headers = csv_reader
        .headers()
        .map_err(|e| Error::Data(format!("cannot read CSV header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| {
        col(name).ok_or_else(|| Error::Data(format!("missing required CSV column {name}")))
    };

    let idx_product = required("ProductId")?;
    let idx_user = required("UserId")?;
    let idx_score = required("Score")?;
    let idx_summary = required("Summary")?;
    let idx_text = required("Text")?;
    let idx_id = col("Id");
    let idx_time = col("Time");

    let mut report = ParseReport::default();
    let mut records = Vec::new();
    let mut raw = csv::ByteRecord::new();
    loop {
        let line = csv_reader.position().line();
        match csv_reader.read_byte_record(&mut raw) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                if e.is_io_error() {
                    return Err(Error::Data(format!("io error while reading CSV: {e}")));
                }
                report.record_skip(line, format!("unreadable row: {e}"));
                continue;
            }
        }

        let field = |idx: usize| -> Option<&[u8]> { raw.get(idx) };
        let utf8 = |idx: usize, name: &str| -> std::result::Result<String, String> {
            match field(idx) {
                Some(bytes) => std::str::from_utf8(bytes)
                    .map(|s| s.to_owned())
                    .map_err(|_| format!("column {name} is not valid UTF-8")),
                None => Err(format!("row is missing column {name}")),
            }
        };

        let parsed = (|| -> std::result::Result<ReviewRecord, String> {
            let user_id = utf8(idx_user, "UserId")?;
            let product_id = utf8(idx_product, "ProductId")?;
            let score_raw = utf8(idx_score, "Score")?;
            let score = parse_score_str(&score_raw)
                .ok_or_else(|| format!("score {score_raw:?} is not an integer in 1..=5"))?;
            let summary = utf8(idx_summary, "Summary")?;
            let body = utf8(idx_text, "Text")?;
            let review_id = match idx_id {
                Some(i) => utf8(i, "Id")?,
                None => format!("L{line}"),
            };
            let timestamp = match idx_time {
                Some(i) => utf8(i, "Time").ok().and_then(|t| t.trim().parse().ok()),
                None => None,
            };
            let record = ReviewRecord {
                review_id,
                user_id,
                product_id,
                score,
                summary,
                body,
                timestamp,
            };
            record.validate().map_err(|e| e.to_string())?;
            Ok(record)
        })();

        match parsed {
            Ok(record) => {
                report.parsed += 1;
                records.push(record);
            }
            Err(reason) => report.record_skip(line, reason),
        }
    }

    report.check_threshold()?;
    Ok((Dataset::new(records, source_tag), report))
}

fn json_record(value: &serde_json::Value, line: u64) -> std::result::Result<ReviewRecord, String> {
    let obj = value.as_object().ok_or("line is not a JSON object")?;
    let text = |key: &str| obj.get(key).and_then(|v| v.as_str()).map(str::to_owned);

    // Canonical keys take precedence; otherwise fall back to the SNAP schema.
    let (user_id, product_id) = if obj.contains_key("user_id") {
        (
            text("user_id").ok_or("user_id is not a string")?,
            text("product_id").ok_or("product_id is not a string")?,
        )
    } else {
        (
            text("reviewerID").ok_or("missing reviewerID/user_id")?,
            text("asin").ok_or("missing asin/product_id")?,
        )
    };

    let score = if let Some(v) = obj.get("score") {
        let raw = v.as_i64().ok_or("score is not an integer")?;
        if (1..=5).contains(&raw) {
            raw as u8
        } else {
            return Err(format!("score {raw} outside 1..=5"));
        }
    } else {
        let overall = obj
            .get("overall")
            .and_then(|v| v.as_f64())
            .ok_or("missing overall/score")?;
        if overall.fract() != 0.0 {
            return Err(format!("non-integral overall {overall}"));
        }
        if !(1.0..=5.0).contains(&overall) {
            return Err(format!("overall {overall} outside 1..=5"));
        }
        overall as u8
    };

    let summary = text("summary").unwrap_or_default();
    let body = text("body").or_else(|| text("reviewText")).unwrap_or_default();
    let review_id = text("review_id").unwrap_or_else(|| format!("L{line}"));
    let timestamp = obj
        .get("unixReviewTime")
        .or_else(|| obj.get("timestamp"))
        .and_then(|v| v.as_i64());

    let record = ReviewRecord {
        review_id,
        user_id,
        product_id,
        score,
        summary,
        body,
        timestamp,
    };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

/// Parses JSON-lines input. Accepts both SNAP review keys
/// (`reviewerID`, `asin`, `overall`, `reviewText`) and the canonical keys
/// produced by [`write_canonical`]. Blank lines are ignored silently.
pub fn parse_jsonl<R: Read>(reader: R, source_tag: &str) -> Result<(Dataset, ParseReport)> {
    let buf = BufReader::new(reader);
    let mut report = ParseReport::default();
    let mut records = Vec::new();

    for (idx, line) in buf.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<serde_json::Value>(&line)
            .map_err(|e| format!("invalid JSON: {e}"))
            .and_then(|v| json_record(&v, line_no));
        match parsed {
            Ok(record) => {
                report.parsed += 1;
                records.push(record);
            }
            Err(reason) => report.record_skip(line_no, reason),
        }
    }

    report.check_threshold()?;
    Ok((Dataset::new(records, source_tag), report))
}

/// Writes the canonical JSON-lines form: one object per record with keys
/// `{review_id, user_id, product_id, score, summary, body}`, LF terminated.
pub fn write_canonical<W: Write>(dataset: &Dataset, writer: &mut W) -> Result<()> {
    for record in &dataset.records {
        serde_json::to_writer(&mut *writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a canonical (or SNAP) JSON-lines corpus from a file path.
pub fn read_corpus_file(path: &std::path::Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let (dataset, report) = parse_jsonl(file, &path.display().to_string())?;
    if report.skipped > 0 {
        return Err(Error::Data(format!(
            "{} malformed lines in {}",
            report.skipped,
            path.display()
        )));
    }
    Ok(dataset)
}

/// Train fraction expressed exactly as a rational, plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_num: u64,
    pub train_den: u64,
    pub seed: u64,
}

impl SplitSpec {
    /// `train_num / train_den` must lie strictly between 0 and 1.
    pub fn new(train_num: u64, train_den: u64, seed: u64) -> Result<Self> {
        if train_den == 0 || train_num == 0 || train_num >= train_den {
            return Err(Error::Config(format!(
                "train fraction {train_num}/{train_den} must satisfy 0 < f < 1"
            )));
        }
        Ok(Self {
            train_num,
            train_den,
            seed,
        })
    }

    /// Parses "0.8" or "4/5" into an exact rational.
    pub fn parse_ratio(text: &str, seed: u64) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse train ratio {text:?}"));
        if let Some((num, den)) = text.split_once('/') {
            let num: u64 = num.trim().parse().map_err(|_| bad())?;
            let den: u64 = den.trim().parse().map_err(|_| bad())?;
            return Self::new(num, den, seed);
        }
        if let Some((int_part, frac_part)) = text.split_once('.') {
            if frac_part.is_empty() || frac_part.len() > 9 || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let int_part: u64 = if int_part.is_empty() {
                0
            } else {
                int_part.trim().parse().map_err(|_| bad())?
            };
            let den = 10u64.pow(frac_part.len() as u32);
            let num = int_part * den + frac_part.parse::<u64>().map_err(|_| bad())?;
            return Self::new(num, den, seed);
        }
        let num: u64 = text.trim().parse().map_err(|_| bad())?;
        Self::new(num, 1, seed)
    }

    /// Number of training records for a dataset of `n`: ceil(num * n / den).
    pub fn train_count(&self, n: usize) -> usize {
        let n = n as u128;
        let num = self.train_num as u128;
        let den = self.train_den as u128;
        (num * n).div_ceil(den) as usize
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_num: 4,
            train_den: 5,
            seed: 42,
        }
    }
}

/// Seeded uniform shuffle, then the first ceil(fraction * n) records become
/// the training set and the remainder the test set. The same seed always
/// produces the same split.
pub fn train_test_split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if data.is_empty() {
        return Err(Error::EmptyInput("cannot split an empty dataset".into()));
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }

    let n_train = spec.train_count(n);
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for (rank, &idx) in order.iter().enumerate() {
        if rank < n_train {
            train.push(data.records[idx].clone());
        } else {
            test.push(data.records[idx].clone());
        }
    }
    Ok((
        Dataset::new(train, format!("{}:train", data.source_tag)),
        Dataset::new(test, format!("{}:test", data.source_tag)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(user: &str, product: &str, score: u8) -> ReviewRecord {
        ReviewRecord {
            review_id: format!("{user}-{product}"),
            user_id: user.into(),
            product_id: product.into(),
            score,
            summary: String::new(),
            body: String::new(),
            timestamp: None,
        }
    }

    const CSV_HEADER: &str =
        "Id,ProductId,UserId,ProfileName,HelpfulnessNumerator,HelpfulnessDenominator,Score,Time,Summary,Text\n";

    #[test]
    fn csv_row_maps_fields() {
        let data = format!("{CSV_HEADER}1,B001,A1,alice,0,0,5,1303862400,Good,Tasty\n");
        let (ds, report) = parse_csv(data.as_bytes(), "test").unwrap();
        assert_eq!(report.parsed, 1);
        assert_eq!(report.skipped, 0);
        let r = &ds.records[0];
        assert_eq!(r.score, 5);
        assert_eq!(r.summary, "Good");
        assert_eq!(r.body, "Tasty");
        assert_eq!(r.user_id, "A1");
        assert_eq!(r.product_id, "B001");
        assert_eq!(r.review_id, "1");
        assert_eq!(r.timestamp, Some(1303862400));
    }

    #[test]
    fn csv_out_of_range_score_skipped() {
        let data = format!("{CSV_HEADER}1,B001,A1,alice,0,0,6,0,meh,text\n");
        let err = parse_csv(data.as_bytes(), "test").unwrap_err();
        // single bad row out of one exceeds the 1% threshold
        assert!(matches!(err, Error::TooManyBadRecords { skipped: 1, .. }));
    }

    #[test]
    fn csv_skip_under_threshold_is_tolerated() {
        let mut data = String::from(CSV_HEADER);
        for i in 0..200 {
            data.push_str(&format!("{i},B001,A{i},x,0,0,4,0,s,t\n"));
        }
        data.push_str("bad,B001,A9,x,0,0,9,0,s,t\n");
        let (ds, report) = parse_csv(data.as_bytes(), "test").unwrap();
        assert_eq!(ds.len(), 200);
        assert_eq!(report.skipped, 1);
        assert_eq!(report.errors.len(), 1);
    }

    #[test]
    fn csv_quoted_fields_and_embedded_commas() {
        let data = format!("{CSV_HEADER}1,B001,A1,alice,0,0,3,0,\"hi, there\",\"line\nbreak\"\n");
        let (ds, _) = parse_csv(data.as_bytes(), "test").unwrap();
        assert_eq!(ds.records[0].summary, "hi, there");
        assert_eq!(ds.records[0].body, "line\nbreak");
    }

    #[test]
    fn csv_missing_column_is_fatal() {
        let err = parse_csv("Id,UserId,Score\n1,A1,5\n".as_bytes(), "test").unwrap_err();
        assert!(err.to_string().contains("ProductId"));
    }

    #[test]
    fn jsonl_snap_mapping() {
        let data = r#"{"reviewerID":"A1","asin":"B0","overall":4.0,"summary":"ok","reviewText":"fine"}"#;
        let (ds, report) = parse_jsonl(data.as_bytes(), "test").unwrap();
        assert_eq!(report.parsed, 1);
        let r = &ds.records[0];
        assert_eq!(r.user_id, "A1");
        assert_eq!(r.product_id, "B0");
        assert_eq!(r.score, 4);
        assert_eq!(r.body, "fine");
    }

    #[test]
    fn jsonl_non_integral_overall_skipped() {
        let mut data = String::new();
        for i in 0..100 {
            data.push_str(&format!(
                "{{\"reviewerID\":\"A{i}\",\"asin\":\"B0\",\"overall\":3.0,\"reviewText\":\"x\"}}\n"
            ));
        }
        data.push_str(r#"{"reviewerID":"A1","asin":"B0","overall":3.5,"reviewText":"x"}"#);
        let (ds, report) = parse_jsonl(data.as_bytes(), "test").unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!(report.skipped, 1);
    }

    #[test]
    fn jsonl_blank_lines_ignored() {
        let data = "\n\n{\"reviewerID\":\"A1\",\"asin\":\"B0\",\"overall\":2.0}\n\n";
        let (ds, report) = parse_jsonl(data.as_bytes(), "test").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(report.skipped, 0);
        assert_eq!(ds.records[0].score, 2);
    }

    #[test]
    fn canonical_round_trip_is_idempotent() {
        let ds = Dataset::new(
            vec![record("A1", "B1", 5), record("A2", "B1", 1)],
            "test",
        );
        let mut buf = Vec::new();
        write_canonical(&ds, &mut buf).unwrap();
        let (back, _) = parse_jsonl(buf.as_slice(), "test").unwrap();
        assert_eq!(back.records, ds.records);

        let mut buf2 = Vec::new();
        write_canonical(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn split_sizes_follow_ceiling_rule() {
        let records: Vec<_> = (0..10).map(|i| record(&format!("u{i}"), "p", 3)).collect();
        let ds = Dataset::new(records, "test");
        let spec = SplitSpec::new(4, 5, 7).unwrap();
        let (train, test) = train_test_split(&ds, &spec).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
    }

    #[test]
    fn split_count_matches_independent_ceiling_arithmetic() {
        // ceil(4 * 568454 / 5) computed by integer arithmetic
        let spec = SplitSpec::new(4, 5, 0).unwrap();
        assert_eq!(spec.train_count(568_454), 454_764);
        assert_eq!(568_454 - spec.train_count(568_454), 113_690);
        // awkward float case: 0.8 * 10 rounds above 8.0 in f64
        assert_eq!(spec.train_count(10), 8);
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let records: Vec<_> = (0..200)
            .map(|i| record(&format!("u{i}"), &format!("p{}", i % 7), (i % 5 + 1) as u8))
            .collect();
        let ds = Dataset::new(records, "test");
        let spec = SplitSpec::new(4, 5, 11).unwrap();
        let (tr1, te1) = train_test_split(&ds, &spec).unwrap();
        let (tr2, te2) = train_test_split(&ds, &spec).unwrap();
        assert_eq!(tr1.records, tr2.records);
        assert_eq!(te1.records, te2.records);

        let other = SplitSpec::new(4, 5, 12).unwrap();
        let (tr3, _) = train_test_split(&ds, &other).unwrap();
        assert_ne!(tr1.records, tr3.records);
    }

    #[test]
    fn split_rejects_empty_dataset_and_bad_ratio() {
        assert!(train_test_split(&Dataset::default(), &SplitSpec::default()).is_err());
        assert!(SplitSpec::new(1, 1, 0).is_err());
        assert!(SplitSpec::new(0, 5, 0).is_err());
        assert!(SplitSpec::parse_ratio("1.0", 0).is_err());
        assert_eq!(
            SplitSpec::parse_ratio("0.8", 3).unwrap(),
            SplitSpec::new(8, 10, 3).unwrap()
        );
        assert_eq!(
            SplitSpec::parse_ratio("4/5", 3).unwrap(),
            SplitSpec::new(4, 5, 3).unwrap()
        );
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 1usize..300, seed in any::<u64>(), num in 1u64..10, den in 2u64..11) {
            prop_assume!(num < den);
            let records: Vec<_> = (0..n)
                .map(|i| record(&format!("u{}", i % 13), &format!("p{}", i % 5), (i % 5 + 1) as u8))
                .collect();
            let ds = Dataset::new(records.clone(), "prop");
            let spec = SplitSpec::new(num, den, seed).unwrap();
            let (train, test) = train_test_split(&ds, &spec).unwrap();
            prop_assert_eq!(train.len() + test.len(), n);
            // multiset equality via sorted review ids
            let mut all: Vec<_> = train.records.iter().chain(test.records.iter())
                .map(|r| r.review_id.clone()).collect();
            all.sort();
            let mut expected: Vec<_> = records.iter().map(|r| r.review_id.clone()).collect();
            expected.sort();
            prop_assert_eq!(all, expected);
        }
    }
}
