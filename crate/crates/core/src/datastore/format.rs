use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::PathBuf;

use super::{DatastoreError, ReadOptions, RecordError, SequenceManifest, FORMAT_VERSION};
use crate::detection::{ClassDistribution, Detection, FrameAnnotations, FrameIndex, GroundTruthSign, Source};
use crate::geometry::BoundingBox;
use crate::refinement::LevelThresholds;
use crate::taxonomy::ClassCode;
use crate::tracking::{Track, TrackEntry, TrackState};

// Data lines of a record file, after the header. Yields (line number, text).
struct Lines<R> {
    inner: R,
    path: String,
    header: String,
    keep_comments: bool,
    line: usize,
    header_seen: bool,
    buf: String,
}

impl<R: BufRead> Lines<R> {
    fn new(inner: R, path: String, kind: &str, keep_comments: bool) -> Self {
        Lines { inner, path, header: format!("{FORMAT_VERSION} {kind}"), keep_comments, line: 0, header_seen: false, buf: String::new() }
    }

    fn err(&self, line: usize, source: RecordError) -> DatastoreError {
        DatastoreError::Record { path: self.path.clone(), line, source }
    }
}

impl<R: BufRead> Iterator for Lines<R> {
    type Item = Result<(usize, String), DatastoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(source) => return Some(Err(DatastoreError::Io { path: self.path.clone(), source })),
            }
            self.line += 1;
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            if !self.header_seen {
                self.header_seen = true;
                if text != self.header {
                    let source = if text.starts_with(FORMAT_VERSION) {
                        RecordError::WrongHeader { expected: self.header.clone(), found: text.to_string() }
                    } else {
                        RecordError::MissingHeader { expected: self.header.clone() }
                    };
                    return Some(Err(self.err(self.line, source)));
                }
                continue;
            }
            if text.starts_with('#') && !self.keep_comments {
                continue;
            }
            return Some(Ok((self.line, text.to_string())));
        }
    }
}

fn malformed(msg: impl Into<String>) -> RecordError {
    RecordError::MalformedRecord(msg.into())
}

fn num<T: std::str::FromStr>(tok: &str, what: &str) -> Result<T, RecordError> {
    tok.parse().map_err(|_| malformed(format!("bad {what} {tok:?}")))
}

fn parse_box(f: &[&str]) -> Result<BoundingBox, RecordError> {
    let v: Vec<f64> = f.iter().map(|t| num::<f64>(t, "coordinate")).collect::<Result<_, _>>()?;
    Ok(BoundingBox::new(v[0], v[1], v[2], v[3])?)
}

fn parse_data(tok: &str) -> Option<String> {
    (tok != "-").then(|| tok.to_string())
}

fn parse_bool(tok: &str) -> Result<bool, RecordError> {
    match tok {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(malformed(format!("expected true or false, got {tok:?}"))),
    }
}

fn parse_opt_bool(tok: &str) -> Result<Option<bool>, RecordError> {
    if tok == "-" {
        Ok(None)
    } else {
        parse_bool(tok).map(Some)
    }
}

// Ok(None) means skip the record (permissive mode).
fn code(tok: &str, opts: &ReadOptions) -> Result<Option<ClassCode>, RecordError> {
    let c = match tok.parse::<ClassCode>() {
        Ok(c) => c,
        Err(_) if opts.permissive => return Ok(None),
        Err(source) => return Err(RecordError::InvalidCode { text: tok.to_string(), source }),
    };
    match &opts.taxonomy {
        Some(t) if !t.contains(&c) => {
            if opts.permissive {
                Ok(None)
            } else {
                Err(RecordError::UnknownCode(c))
            }
        }
        _ => Ok(Some(c)),
    }
}

fn parse_distribution(tok: &str, opts: &ReadOptions) -> Result<Option<ClassDistribution>, RecordError> {
    let mut pairs = Vec::new();
    for part in tok.split(',') {
        let (c, p) = match part.split_once(':') {
            Some((c, p)) => (c, num::<f64>(p, "probability")?),
            None if !tok.contains(',') => (part, 1.0),
            None => return Err(malformed(format!("expected code:prob, got {part:?}"))),
        };
        match code(c, opts)? {
            Some(c) => pairs.push((c, p)),
            None => return Ok(None),
        }
    }
    Ok(Some(ClassDistribution::from_pairs(pairs)?))
}

/// One line of an annotation file.
#[derive(Debug, Clone, PartialEq)]
pub enum AnnotationRecord {
    /// Annotated frame, possibly without signs.
    Frame(FrameIndex),
    Sign(GroundTruthSign),
}

/// Streaming annotation reader.
pub struct AnnotationRecords<R> {
    lines: Lines<R>,
    opts: ReadOptions,
}

impl<R: BufRead> AnnotationRecords<R> {
    pub fn new(inner: R, path: String, opts: ReadOptions) -> Self {
        AnnotationRecords { lines: Lines::new(inner, path, "annotations", false), opts }
    }

    fn parse(&self, text: &str) -> Result<Option<AnnotationRecord>, RecordError> {
        let f: Vec<&str> = text.split_whitespace().collect();
        let frame: FrameIndex = num(f[0], "frame index")?;
        match f.len() {
            1 => Ok(Some(AnnotationRecord::Frame(frame))),
            8 => {
                let Some(code) = code(f[1], &self.opts)? else {
                    return Ok(Some(AnnotationRecord::Frame(frame)));
                };
                Ok(Some(AnnotationRecord::Sign(GroundTruthSign {
                    frame_index: frame,
                    bbox: parse_box(&f[2..6])?,
                    code,
                    associated_data: parse_data(f[6]),
                    temporary: parse_bool(f[7])?,
                })))
            }
            n => Err(malformed(format!("expected 1 or 8 fields, found {n}"))),
        }
    }
}

impl<R: BufRead> Iterator for AnnotationRecords<R> {
    type Item = Result<(usize, AnnotationRecord), DatastoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let (line, text) = match self.lines.next()? {
                Ok(x) => x,
                Err(e) => return Some(Err(e)),
            };
            match self.parse(&text) {
                Ok(Some(r)) => return Some(Ok((line, r))),
                Ok(None) => continue,
                Err(e) => return Some(Err(self.lines.err(line, e))),
            }
        }
    }
}

pub(super) fn collect_annotations<R: BufRead>(records: AnnotationRecords<R>) -> Result<Vec<FrameAnnotations>, DatastoreError> {
    let path = records.lines.path.clone();
    let mut frames: BTreeMap<FrameIndex, Vec<GroundTruthSign>> = BTreeMap::new();
    let mut seen: HashSet<(FrameIndex, [u64; 4], ClassCode)> = HashSet::new();
    for r in records {
        match r? {
            (_, AnnotationRecord::Frame(f)) => {
                frames.entry(f).or_default();
            }
            (line, AnnotationRecord::Sign(s)) => {
                let b = s.bbox;
                let key = (s.frame_index, [b.x_min, b.y_min, b.x_max, b.y_max].map(f64::to_bits), s.code);
                if !seen.insert(key) {
                    return Err(DatastoreError::Record { path, line, source: RecordError::DuplicateRecord(s.frame_index) });
                }
                frames.entry(s.frame_index).or_default().push(s);
            }
        }
    }
    Ok(frames.into_iter().map(|(f, signs)| FrameAnnotations::annotated(f, signs)).collect())
}

/// Parse annotation text; `path` only labels errors.
pub fn parse_annotations(text: &str, path: &str, opts: &ReadOptions) -> Result<Vec<FrameAnnotations>, DatastoreError> {
    collect_annotations(AnnotationRecords::new(text.as_bytes(), path.to_string(), opts.clone()))
}

/// Streaming detection reader.
pub struct DetectionRecords<R> {
    lines: Lines<R>,
    opts: ReadOptions,
}

impl<R: BufRead> DetectionRecords<R> {
    pub fn new(inner: R, path: String, opts: ReadOptions) -> Self {
        DetectionRecords { lines: Lines::new(inner, path, "detections", false), opts }
    }

    fn parse(&self, text: &str) -> Result<Option<Detection>, RecordError> {
        let f: Vec<&str> = text.split_whitespace().collect();
        if !(6..=8).contains(&f.len()) {
            return Err(malformed(format!("expected 6 to 8 fields, found {}", f.len())));
        }
        let frame: FrameIndex = num(f[0], "frame index")?;
        let bbox = parse_box(&f[2..6])?;
        let Some(dist) = parse_distribution(f[1], &self.opts)? else {
            return Ok(None);
        };
        let data = f.get(6).and_then(|t| parse_data(t));
        let temporary = f.get(7).map(|t| parse_opt_bool(t)).transpose()?.flatten();
        Ok(Some(Detection::new(frame, bbox, dist).with_data(data).with_temporary(temporary)))
    }
}

impl<R: BufRead> Iterator for DetectionRecords<R> {
    type Item = Result<(usize, Detection), DatastoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let (line, text) = match self.lines.next()? {
                Ok(x) => x,
                Err(e) => return Some(Err(e)),
            };
            match self.parse(&text) {
                Ok(Some(d)) => return Some(Ok((line, d))),
                Ok(None) => continue,
                Err(e) => return Some(Err(self.lines.err(line, e))),
            }
        }
    }
}

pub(super) fn collect_detections<R: BufRead>(records: DetectionRecords<R>) -> Result<BTreeMap<FrameIndex, Vec<Detection>>, DatastoreError> {
    let mut m: BTreeMap<FrameIndex, Vec<Detection>> = BTreeMap::new();
    for r in records {
        let (_, d) = r?;
        m.entry(d.frame_index).or_default().push(d);
    }
    Ok(m)
}

pub fn parse_detections(text: &str, path: &str, opts: &ReadOptions) -> Result<BTreeMap<FrameIndex, Vec<Detection>>, DatastoreError> {
    collect_detections(DetectionRecords::new(text.as_bytes(), path.to_string(), opts.clone()))
}

fn source_token(e: &TrackEntry) -> &'static str {
    match (e.detection.source, e.flagged) {
        (Source::Detected, _) => "detected",
        (Source::Interpolated, false) => "interpolated",
        (Source::Interpolated, true) => "flagged",
    }
}

/// Track records: `track_id frame source x_min y_min x_max y_max dist data
/// temporary`, where source is `detected`, `interpolated` or `flagged`.
pub fn parse_tracks(text: &str, path: &str, opts: &ReadOptions) -> Result<Vec<Track>, DatastoreError> {
    let mut lines = Lines::new(text.as_bytes(), path.to_string(), "tracks", false);
    let mut tracks: BTreeMap<u64, Vec<TrackEntry>> = BTreeMap::new();
    while let Some(r) = lines.next() {
        let (line, text) = r?;
        let parsed = (|| -> Result<Option<(u64, TrackEntry)>, RecordError> {
            let f: Vec<&str> = text.split_whitespace().collect();
            if f.len() != 10 {
                return Err(malformed(format!("expected 10 fields, found {}", f.len())));
            }
            let id: u64 = num(f[0], "track id")?;
            let frame: FrameIndex = num(f[1], "frame index")?;
            let (source, flagged) = match f[2] {
                "detected" => (Source::Detected, false),
                "interpolated" => (Source::Interpolated, false),
                "flagged" => (Source::Interpolated, true),
                s => return Err(malformed(format!("unknown source {s:?}"))),
            };
            let bbox = parse_box(&f[3..7])?;
            let Some(dist) = parse_distribution(f[7], opts)? else {
                return Ok(None);
            };
            let det =
                Detection::new(frame, bbox, dist).with_data(parse_data(f[8])).with_temporary(parse_opt_bool(f[9])?).with_source(source);
            Ok(Some((id, TrackEntry { detection: det, flagged })))
        })();
        match parsed {
            Ok(Some((id, entry))) => {
                let entries = tracks.entry(id).or_default();
                if let Some(prev) = entries.last() {
                    if entry.frame_index() <= prev.frame_index() {
                        return Err(lines.err(line, RecordError::FrameOrder { frame: entry.frame_index(), previous: prev.frame_index() }));
                    }
                }
                entries.push(entry);
            }
            Ok(None) => {}
            Err(e) => return Err(lines.err(line, e)),
        }
    }
    Ok(tracks.into_iter().map(|(id, entries)| Track { id, entries, state: TrackState::Finished }).collect())
}

pub fn parse_thresholds(text: &str, path: &str) -> Result<LevelThresholds, DatastoreError> {
    let mut lines = Lines::new(text.as_bytes(), path.to_string(), "thresholds", false);
    let Some(first) = lines.next() else {
        return Err(lines.err(lines.line.max(1), malformed("no threshold record")));
    };
    let (line, text) = first?;
    let f: Vec<&str> = text.split_whitespace().collect();
    let parsed = (|| {
        if f.len() != 3 {
            return Err(malformed(format!("expected 3 fields, found {}", f.len())));
        }
        let v: Vec<f64> = f.iter().map(|t| num::<f64>(t, "threshold")).collect::<Result<_, _>>()?;
        LevelThresholds::new(v[0], v[1], v[2]).map_err(|e| RecordError::Invalid(e.to_string()))
    })();
    let thr = parsed.map_err(|e| lines.err(line, e))?;
    if let Some(extra) = lines.next() {
        let (line, _) = extra?;
        return Err(lines.err(line, malformed("more than one threshold record")));
    }
    Ok(thr)
}

/// Manifest lines: `frame<TAB>path`, plus `# sequence: <id>` and
/// `# annotation: <path>` directives. Other comments are ignored.
pub fn parse_manifest(text: &str, path: &str) -> Result<SequenceManifest, DatastoreError> {
    let mut lines = Lines::new(text.as_bytes(), path.to_string(), "manifest", true);
    let mut m = SequenceManifest::default();
    while let Some(r) = lines.next() {
        let (line, text) = r?;
        if let Some(comment) = text.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(id) = comment.strip_prefix("sequence:") {
                m.sequence_id = id.trim().to_string();
            } else if let Some(p) = comment.strip_prefix("annotation:") {
                let p = p.trim();
                if p.is_empty() {
                    return Err(lines.err(line, malformed("empty annotation path")));
                }
                m.annotations.push(PathBuf::from(p));
            }
            continue;
        }
        let parsed = (|| {
            let (frame, p) = text.split_once('\t').ok_or_else(|| malformed("expected frame<TAB>path"))?;
            let frame: FrameIndex = num(frame.trim(), "frame index")?;
            let p = p.trim();
            if p.is_empty() {
                return Err(malformed("empty frame path"));
            }
            if let Some(&(previous, _)) = m.frames.last() {
                if frame <= previous {
                    return Err(RecordError::FrameOrder { frame, previous });
                }
            }
            Ok((frame, PathBuf::from(p)))
        })();
        m.frames.push(parsed.map_err(|e| lines.err(line, e))?);
    }
    Ok(m)
}

fn check_data(d: &Option<String>) -> Result<&str, DatastoreError> {
    match d.as_deref() {
        None => Ok("-"),
        Some(s) if s.is_empty() || s == "-" || s.contains(char::is_whitespace) => {
            Err(DatastoreError::Unwritable { what: "associated data", reason: format!("{s:?} is not a single token") })
        }
        Some(s) => Ok(s),
    }
}

fn write_box(out: &mut String, b: &BoundingBox) {
    let _ = write!(out, "{:.6} {:.6} {:.6} {:.6}", b.x_min, b.y_min, b.x_max, b.y_max);
}

fn write_dist(out: &mut String, d: &ClassDistribution) {
    for (i, (c, p)) in d.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{c}:{p:.6}");
    }
}

fn opt_bool(b: Option<bool>) -> &'static str {
    match b {
        None => "-",
        Some(true) => "true",
        Some(false) => "false",
    }
}

/// Annotated frames in frame order; frames without signs become bare
/// frame lines. Unannotated frames are not written.
pub fn format_annotations(annotations: &[FrameAnnotations]) -> Result<String, DatastoreError> {
    let mut frames: Vec<&FrameAnnotations> = annotations.iter().filter(|a| a.annotated).collect();
    frames.sort_by_key(|a| a.frame_index);
    let mut out = format!("{FORMAT_VERSION} annotations\n");
    for fa in frames {
        if fa.signs.is_empty() {
            let _ = writeln!(out, "{}", fa.frame_index);
        }
        for s in &fa.signs {
            let data = check_data(&s.associated_data)?;
            let _ = write!(out, "{} {} ", fa.frame_index, s.code);
            write_box(&mut out, &s.bbox);
            let _ = writeln!(out, " {data} {}", s.temporary);
        }
    }
    Ok(out)
}

/// Detections sorted by frame, stable within a frame.
pub fn format_detections<'a>(detections: impl IntoIterator<Item = &'a Detection>) -> Result<String, DatastoreError> {
    let mut dets: Vec<&Detection> = detections.into_iter().collect();
    dets.sort_by_key(|d| d.frame_index);
    let mut out = format!("{FORMAT_VERSION} detections\n");
    for d in dets {
        let data = check_data(&d.associated_data)?;
        let _ = write!(out, "{} ", d.frame_index);
        write_dist(&mut out, &d.distribution);
        out.push(' ');
        write_box(&mut out, &d.bbox);
        let _ = writeln!(out, " {data} {}", opt_bool(d.temporary));
    }
    Ok(out)
}

/// Track entries sorted by frame, then track order.
pub fn format_tracks(tracks: &[Track]) -> Result<String, DatastoreError> {
    let mut rows: Vec<(&Track, &TrackEntry)> = tracks.iter().flat_map(|t| t.entries.iter().map(move |e| (t, e))).collect();
    rows.sort_by_key(|(_, e)| e.frame_index());
    let mut out = format!("{FORMAT_VERSION} tracks\n");
    for (t, e) in rows {
        let d = &e.detection;
        let data = check_data(&d.associated_data)?;
        let _ = write!(out, "{} {} {} ", t.id, d.frame_index, source_token(e));
        write_box(&mut out, &d.bbox);
        out.push(' ');
        write_dist(&mut out, &d.distribution);
        let _ = writeln!(out, " {data} {}", opt_bool(d.temporary));
    }
    Ok(out)
}

pub fn format_thresholds(thr: &LevelThresholds) -> String {
    format!("{FORMAT_VERSION} thresholds\n{thr}\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::Taxonomy;
    use proptest::prelude::*;

    fn c(s: &str) -> ClassCode {
        s.parse().unwrap()
    }

    const ANN: &str = "icevision-kit/v1 annotations\n";
    const DET: &str = "icevision-kit/v1 detections\n";

    fn record_err(r: Result<impl std::fmt::Debug, DatastoreError>) -> (usize, RecordError) {
        match r.unwrap_err() {
            DatastoreError::Record { line, source, .. } => (line, source),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn annotation_examples() {
        let a = parse_annotations(&format!("{ANN}12 3.24 100 100 150 150 40 false\n"), "a", &ReadOptions::default()).unwrap();
        assert_eq!(a.len(), 1);
        assert!(a[0].annotated);
        let s = &a[0].signs[0];
        assert_eq!((a[0].frame_index, s.code, s.associated_data.as_deref(), s.temporary), (12, c("3.24"), Some("40"), false));
        assert_eq!(s.bbox, BoundingBox::new(100.0, 100.0, 150.0, 150.0).unwrap());

        assert!(parse_annotations(ANN, "a", &ReadOptions::default()).unwrap().is_empty());
        assert!(parse_annotations("", "a", &ReadOptions::default()).unwrap().is_empty());

        let (line, e) =
            record_err(parse_annotations(&format!("{ANN}\n1 2.1 0 0 10 10 - true\n12 3.24 100 100 150\n"), "a", &ReadOptions::default()));
        assert_eq!(line, 4);
        assert!(matches!(e, RecordError::MalformedRecord(_)));
    }

    #[test]
    fn empty_frame_lines_and_duplicates() {
        let a = parse_annotations(&format!("{ANN}7\n3 1.1 0 0 20 20 - true\n"), "a", &ReadOptions::default()).unwrap();
        assert_eq!(a.iter().map(|f| (f.frame_index, f.signs.len())).collect::<Vec<_>>(), vec![(3, 1), (7, 0)]);
        let dup = format!("{ANN}3 1.1 0 0 20 20 - true\n3 1.1 0 0 20 20 5 false\n");
        assert!(matches!(record_err(parse_annotations(&dup, "a", &ReadOptions::default())), (3, RecordError::DuplicateRecord(3))));
    }

    #[test]
    fn headers_are_checked() {
        let e = record_err(parse_annotations("1 1.1 0 0 1 1 - true\n", "a", &ReadOptions::default()));
        assert!(matches!(e, (1, RecordError::MissingHeader { .. })));
        let e = record_err(parse_annotations(DET, "a", &ReadOptions::default()));
        assert!(matches!(e, (1, RecordError::WrongHeader { .. })));
    }

    #[test]
    fn code_handling() {
        let text = format!("{ANN}1 3.x 0 0 10 10 - false\n2 9.99 0 0 10 10 - false\n");
        assert!(matches!(record_err(parse_annotations(&text, "a", &ReadOptions::default())).1, RecordError::InvalidCode { .. }));
        let strict = ReadOptions { taxonomy: Some(Taxonomy::russian()), permissive: false };
        let text2 = format!("{ANN}2 9.99 0 0 10 10 - false\n");
        assert!(matches!(record_err(parse_annotations(&text2, "a", &strict)).1, RecordError::UnknownCode(_)));
        let permissive = ReadOptions { taxonomy: Some(Taxonomy::russian()), permissive: true };
        let a = parse_annotations(&text, "a", &permissive).unwrap();
        // skipped records still mark their frame as annotated
        assert_eq!(a.iter().map(|f| (f.frame_index, f.signs.len())).collect::<Vec<_>>(), vec![(1, 0), (2, 0)]);
    }

    #[test]
    fn detection_examples() {
        let d = parse_detections(&format!("{DET}12 3.24:0.7,3.25:0.2 100 100 150 150\n"), "d", &ReadOptions::default()).unwrap();
        let det = &d[&12][0];
        assert_eq!(det.distribution.len(), 2);
        assert_eq!(det.best_class(), c("3.24"));
        assert_eq!(det.confidence, 0.7);

        let e = record_err(parse_detections(&format!("{DET}1 3.24:0.7,3.25:0.5 0 0 10 10\n"), "d", &ReadOptions::default()));
        assert!(matches!(e, (2, RecordError::InvalidDistribution(_))));
        assert!(parse_detections("", "d", &ReadOptions::default()).unwrap().is_empty());

        let d = parse_detections(&format!("{DET}4 5.19.1 0 0 10 10 60 true\n"), "d", &ReadOptions::default()).unwrap();
        let det = &d[&4][0];
        assert_eq!((det.confidence, det.associated_data.as_deref(), det.temporary), (1.0, Some("60"), Some(true)));
        assert!(parse_detections(&format!("{DET}4 5.19.1,2.1 0 0 10 10\n"), "d", &ReadOptions::default()).is_err());
        assert!(parse_detections(&format!("{DET}4 2.1 0 0 10\n"), "d", &ReadOptions::default()).is_err());
        assert!(matches!(
            record_err(parse_detections(&format!("{DET}4 2.1 10 0 0 10\n"), "d", &ReadOptions::default())).1,
            RecordError::InvalidBox(_)
        ));
    }

    #[test]
    fn writer_rejects_unrepresentable_data() {
        let d = Detection::new(0, BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap(), ClassDistribution::certain(c("1.1")))
            .with_data(Some("a b".into()));
        assert!(format_detections([&d]).is_err());
        assert_eq!(format_detections(std::iter::empty()).unwrap(), DET);
    }

    #[test]
    fn thresholds_and_manifest() {
        let thr = LevelThresholds::new(0.25, 0.5, 0.75).unwrap();
        assert_eq!(parse_thresholds(&format_thresholds(&thr), "t").unwrap(), thr);
        assert!(parse_thresholds("icevision-kit/v1 thresholds\n0.1 0.2\n", "t").is_err());
        assert!(parse_thresholds("icevision-kit/v1 thresholds\n0.1 0.2 1.2\n", "t").is_err());
        assert!(parse_thresholds("", "t").is_err());

        let m = parse_manifest("icevision-kit/v1 manifest\n0\ta.pnm\n# note\n3\tb.pnm\n", "m").unwrap();
        assert_eq!(m.frames.len(), 2);
        let e = record_err(parse_manifest("icevision-kit/v1 manifest\n3\ta.pnm\n3\tb.pnm\n", "m"));
        assert!(matches!(e, (3, RecordError::FrameOrder { frame: 3, previous: 3 })));
        assert!(parse_manifest("icevision-kit/v1 manifest\n3 a.pnm\n", "m").is_err());
    }

    fn micro(k: i64) -> f64 {
        k as f64 / 1e6
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (-5_000_000_000i64..5_000_000_000, -5_000_000_000i64..5_000_000_000, 0i64..500_000_000, 0i64..500_000_000)
            .prop_map(|(x, y, w, h)| BoundingBox::new(micro(x), micro(y), micro(x + w), micro(y + h)).unwrap())
    }

    fn arb_code() -> impl Strategy<Value = ClassCode> {
        prop::collection::vec(1u32..30, 1..=3).prop_map(|s| ClassCode::from_segments(&s).unwrap())
    }

    fn arb_data() -> impl Strategy<Value = Option<String>> {
        prop::option::of("[0-9A-Za-z]{1,4}")
    }

    fn arb_dist() -> impl Strategy<Value = ClassDistribution> {
        prop::collection::btree_map(arb_code(), 0i64..300_000, 1..4)
            .prop_map(|m| ClassDistribution::from_pairs(m.into_iter().map(|(c, p)| (c, micro(p)))).unwrap())
    }

    fn arb_detection() -> impl Strategy<Value = Detection> {
        (0u32..50, arb_box(), arb_dist(), arb_data(), prop::option::of(any::<bool>()))
            .prop_map(|(f, b, d, data, t)| Detection::new(f, b, d).with_data(data).with_temporary(t))
    }

    proptest! {
        #[test]
        fn detections_round_trip(dets in prop::collection::vec(arb_detection(), 0..30)) {
            let text = format_detections(&dets).unwrap();
            let back = parse_detections(&text, "d", &ReadOptions::default()).unwrap();
            let mut sorted = dets.clone();
            sorted.sort_by_key(|d| d.frame_index);
            prop_assert_eq!(back.into_values().flatten().collect::<Vec<_>>(), sorted);
            prop_assert_eq!(format_detections(&dets).unwrap(), text);
        }

        #[test]
        fn annotations_round_trip(frames in prop::collection::btree_map(0u32..200, prop::collection::vec((arb_box(), arb_code(), arb_data(), any::<bool>()), 0..4), 0..12)) {
            let ann: Vec<FrameAnnotations> = frames
                .into_iter()
                .map(|(f, signs)| {
                    let mut seen = HashSet::new();
                    let signs = signs
                        .into_iter()
                        .filter(|(b, c, _, _)| seen.insert((b.x_min.to_bits(), b.y_min.to_bits(), b.x_max.to_bits(), b.y_max.to_bits(), *c)))
                        .map(|(bbox, code, associated_data, temporary)| GroundTruthSign { frame_index: f, bbox, code, associated_data, temporary })
                        .collect();
                    FrameAnnotations::annotated(f, signs)
                })
                .collect();
            let text = format_annotations(&ann).unwrap();
            prop_assert_eq!(parse_annotations(&text, "a", &ReadOptions::default()).unwrap(), ann);
        }

        #[test]
        fn tracks_round_trip(spec in prop::collection::vec((0u32..20, prop::collection::vec((1u32..4, arb_box(), arb_dist(), arb_data(), 0u8..3), 1..6)), 0..5)) {
            let tracks: Vec<Track> = spec
                .into_iter()
                .enumerate()
                .map(|(id, (start, entries))| {
                    let mut f = start;
                    let entries = entries
                        .into_iter()
                        .map(|(gap, b, d, data, kind)| {
                            f += gap;
                            let source = if kind == 0 { Source::Detected } else { Source::Interpolated };
                            let det = Detection::new(f, b, d).with_data(data).with_source(source);
                            TrackEntry { detection: det, flagged: kind == 2 }
                        })
                        .collect();
                    Track { id: id as u64 * 3, entries, state: TrackState::Finished }
                })
                .collect();
            let text = format_tracks(&tracks).unwrap();
            prop_assert_eq!(parse_tracks(&text, "t", &ReadOptions::default()).unwrap(), tracks);
        }

        #[test]
        fn readers_never_panic(text in "(icevision-kit/v1 (annotations|detections|tracks|thresholds|manifest)\n)?[ -~\t\n]{0,200}") {
            let _ = parse_annotations(&text, "x", &ReadOptions::default());
            let _ = parse_detections(&text, "x", &ReadOptions::default());
            let _ = parse_tracks(&text, "x", &ReadOptions::default());
            let _ = parse_thresholds(&text, "x");
            let _ = parse_manifest(&text, "x");
        }
    }
}
