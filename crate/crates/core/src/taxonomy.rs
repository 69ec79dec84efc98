//! Hierarchical sign codes and the code registry.
//!
//! A code is one to three positive integers joined by dots: `3` is a
//! top-level category, `3.24` a second-level category and `5.19.1` a fully
//! specific sign. A prediction whose code is a strict prefix of the ground
//! truth code is a *superclass* prediction.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const MAX_LEVELS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("empty class code")]
    Empty,
    #[error("malformed class code {0:?}")]
    Malformed(String),
    #[error("class code {0:?} has more than 3 segments")]
    TooDeep(String),
    #[error("class code {0:?} contains a zero segment")]
    ZeroSegment(String),
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("line {line}: {source}")]
    Code {
        line: usize,
        #[source]
        source: CodeError,
    },
    #[error("line {line}: duplicate code {code}")]
    Duplicate { line: usize, code: ClassCode },
    #[error("failed to read registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A parsed sign code. Ordering is segment-wise numeric, so `3.9 < 3.24` and
/// a parent sorts before its children.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassCode {
    // Unused trailing segments are zero; real segments are >= 1, so the
    // derived ordering matches lexicographic ordering of the segment lists.
    segments: [u32; MAX_LEVELS],
    len: u8,
}

impl ClassCode {
    pub fn from_segments(segments: &[u32]) -> Result<Self, CodeError> {
        let text = || segments.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(".");
        if segments.is_empty() {
            return Err(CodeError::Empty);
        }
        if segments.len() > MAX_LEVELS {
            return Err(CodeError::TooDeep(text()));
        }
        if segments.contains(&0) {
            return Err(CodeError::ZeroSegment(text()));
        }
        let mut s = [0; MAX_LEVELS];
        s[..segments.len()].copy_from_slice(segments);
        Ok(ClassCode { segments: s, len: segments.len() as u8 })
    }

    pub fn segments(&self) -> &[u32] {
        &self.segments[..self.len as usize]
    }

    /// Number of segments, 1 to 3.
    pub fn level(&self) -> usize {
        self.len as usize
    }

    pub fn parent(&self) -> Option<ClassCode> {
        if self.len <= 1 {
            return None;
        }
        let mut p = *self;
        p.len -= 1;
        p.segments[p.len as usize] = 0;
        Some(p)
    }

    /// The ancestor-or-self at `level`, or `None` when this code is shallower.
    pub fn truncate(&self, level: usize) -> Option<ClassCode> {
        if level == 0 || level > self.level() {
            return None;
        }
        let mut c = *self;
        for s in &mut c.segments[level..] {
            *s = 0;
        }
        c.len = level as u8;
        Some(c)
    }

    /// True iff `self` is a strict prefix of `other`.
    pub fn is_superclass_of(&self, other: &ClassCode) -> bool {
        self.len < other.len && other.segments()[..self.level()] == *self.segments()
    }

    pub fn is_same_or_superclass_of(&self, other: &ClassCode) -> bool {
        self == other || self.is_superclass_of(other)
    }
}

pub fn parse_code(text: &str) -> Result<ClassCode, CodeError> {
    text.parse()
}

pub fn is_superclass_of(pred: &ClassCode, gt: &ClassCode) -> bool {
    pred.is_superclass_of(gt)
}

impl FromStr for ClassCode {
    type Err = CodeError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        if text.is_empty() {
            return Err(CodeError::Empty);
        }
        let mut segs = [0u32; MAX_LEVELS];
        let mut n = 0;
        for part in text.split('.') {
            if n == MAX_LEVELS {
                return Err(CodeError::TooDeep(text.to_string()));
            }
            if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(CodeError::Malformed(text.to_string()));
            }
            let v: u32 = part.parse().map_err(|_| CodeError::Malformed(text.to_string()))?;
            if v == 0 {
                return Err(CodeError::ZeroSegment(text.to_string()));
            }
            segs[n] = v;
            n += 1;
        }
        Ok(ClassCode { segments: segs, len: n as u8 })
    }
}

impl fmt::Display for ClassCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.segments().iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for ClassCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClassCode({self})")
    }
}

/// Registry of valid codes. Every listed code's ancestors are implicitly
/// valid as superclass codes.
#[derive(Debug, Clone, Default)]
pub struct Taxonomy {
    listed: BTreeSet<ClassCode>,
    known: BTreeSet<ClassCode>,
}

const RUSSIAN_REGISTRY: &str = include_str!("../data/russian_signs.txt");

impl Taxonomy {
    /// Parse a registry: one canonical code per line, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut tax = Taxonomy::default();
        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let code: ClassCode = line.parse().map_err(|source| TaxonomyError::Code { line: i + 1, source })?;
            if !tax.listed.insert(code) {
                return Err(TaxonomyError::Duplicate { line: i + 1, code });
            }
            let mut c = Some(code);
            while let Some(k) = c {
                tax.known.insert(k);
                c = k.parent();
            }
        }
        Ok(tax)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// The bundled Russian road-sign registry (best-effort transcription).
    pub fn russian() -> Self {
        Self::parse(RUSSIAN_REGISTRY).expect("bundled registry is valid")
    }

    pub fn from_codes<I: IntoIterator<Item = ClassCode>>(codes: I) -> Self {
        let mut tax = Taxonomy::default();
        for code in codes {
            tax.listed.insert(code);
            let mut c = Some(code);
            while let Some(k) = c {
                tax.known.insert(k);
                c = k.parent();
            }
        }
        tax
    }

    /// Listed code or an ancestor of one.
    pub fn contains(&self, code: &ClassCode) -> bool {
        self.known.contains(code)
    }

    pub fn is_listed(&self, code: &ClassCode) -> bool {
        self.listed.contains(code)
    }

    pub fn listed(&self) -> impl Iterator<Item = &ClassCode> {
        self.listed.iter()
    }

    pub fn len(&self) -> usize {
        self.listed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.listed.is_empty()
    }

    pub fn children<'a>(&'a self, code: &'a ClassCode) -> impl Iterator<Item = &'a ClassCode> + 'a {
        self.known.iter().filter(move |c| c.parent().as_ref() == Some(code))
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(s: &str) -> ClassCode {
        s.parse().unwrap()
    }

    #[test]
    fn parse_examples() {
        assert_eq!(c("3.24").segments(), &[3, 24]);
        assert_eq!(c("5.19.1").segments(), &[5, 19, 1]);
        assert!(matches!(parse_code("3..24"), Err(CodeError::Malformed(_))));
        assert!(matches!(parse_code(""), Err(CodeError::Empty)));
        assert!(matches!(parse_code("3.x"), Err(CodeError::Malformed(_))));
        assert!(matches!(parse_code("1.2.3.4"), Err(CodeError::TooDeep(_))));
        assert!(matches!(parse_code("3.0"), Err(CodeError::ZeroSegment(_))));
        assert!(matches!(parse_code("+3"), Err(CodeError::Malformed(_))));
        assert!(matches!(parse_code("3."), Err(CodeError::Malformed(_))));
        assert!(matches!(parse_code("99999999999"), Err(CodeError::Malformed(_))));
    }

    #[test]
    fn parent_and_level() {
        assert_eq!(c("5.19.1").parent(), Some(c("5.19")));
        assert_eq!(c("5.19").parent(), Some(c("5")));
        assert_eq!(c("5").parent(), None);
        assert_eq!(c("3").level(), 1);
        assert_eq!(c("3.24").level(), 2);
        assert_eq!(c("5.19.1").level(), 3);
    }

    #[test]
    fn superclass_examples() {
        assert!(is_superclass_of(&c("3.24"), &c("3.24.1")));
        assert!(!is_superclass_of(&c("3.24"), &c("3.24")));
        assert!(!is_superclass_of(&c("3.25"), &c("3.24.1")));
        assert!(is_superclass_of(&c("3"), &c("3.24.1")));
        assert!(!is_superclass_of(&c("3.24.1"), &c("3.24")));
    }

    #[test]
    fn ordering_is_numeric() {
        assert!(c("3.9") < c("3.24"));
        assert!(c("3.24") < c("3.24.1"));
        assert!(c("3.24.2") < c("3.25"));
    }

    #[test]
    fn registry_parsing() {
        let t = Taxonomy::parse("# header\n3.24\n5.19.1 # crossing\n\n").unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.contains(&c("5.19")));
        assert!(t.contains(&c("5")));
        assert!(!t.is_listed(&c("5.19")));
        assert!(!t.contains(&c("5.20")));
        assert!(matches!(Taxonomy::parse("3.24\n3.24\n"), Err(TaxonomyError::Duplicate { line: 2, .. })));
        assert!(matches!(Taxonomy::parse("3.24\nfoo\n"), Err(TaxonomyError::Code { line: 2, .. })));
    }

    #[test]
    fn bundled_registry_loads() {
        let t = Taxonomy::russian();
        assert!(t.len() > 250);
        assert!(t.contains(&c("3.24")));
        assert!(t.contains(&c("5.19.1")));
        let kids: Vec<_> = t.children(&c("5.19")).copied().collect();
        assert_eq!(kids, vec![c("5.19.1"), c("5.19.2")]);
    }

    fn arb_code() -> impl Strategy<Value = ClassCode> {
        prop::collection::vec(1u32..40, 1..=3).prop_map(|s| ClassCode::from_segments(&s).unwrap())
    }

    proptest! {
        #[test]
        fn text_round_trip(code in arb_code()) {
            prop_assert_eq!(parse_code(&code.to_string()).unwrap(), code);
        }

        #[test]
        fn ancestors_are_superclasses(code in arb_code()) {
            let mut p = code.parent();
            while let Some(a) = p {
                prop_assert!(a.is_superclass_of(&code));
                p = a.parent();
            }
            prop_assert!(!code.is_superclass_of(&code));
        }

        #[test]
        fn superclass_transitive(a in arb_code(), b in arb_code(), d in arb_code()) {
            if a.is_superclass_of(&b) && b.is_superclass_of(&d) {
                prop_assert!(a.is_superclass_of(&d));
            }
        }
    }
}
