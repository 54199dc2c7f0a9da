use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{KwsError, Result};

/// Number of per-syllable ranges in an alignment.
pub const SYLLABLES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// Class index used by the attention models: 0 non-keyword, 1 keyword.
    pub fn class(self) -> usize {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "positive" | "pos" | "1" => Some(Label::Positive),
            "negative" | "neg" | "0" => Some(Label::Negative),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        })
    }
}

/// One manifest record. Times are in seconds from the start of the clip.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Label,
    pub span: Option<(f64, f64)>,
    pub alignment: Option<[(f64, f64); SYLLABLES]>,
}

impl ManifestEntry {
    pub fn new(path: impl Into<PathBuf>, label: Label) -> Self {
        Self {
            path: path.into(),
            label,
            span: None,
            alignment: None,
        }
    }

    pub fn with_span(mut self, start: f64, end: f64) -> Self {
        self.span = Some((start, end));
        self
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.label == Label::Negative && (self.span.is_some() || self.alignment.is_some()) {
            return Err("negative entries cannot carry a keyword span or alignment".into());
        }
        if let Some((s, e)) = self.span {
            if !(s.is_finite() && e.is_finite() && 0.0 <= s && s < e) {
                return Err(format!("invalid span [{s}, {e})"));
            }
        }
        if let Some(al) = &self.alignment {
            let (s, e) = self.span.ok_or("alignment given without a span")?;
            let mut prev = s;
            for (i, &(a, b)) in al.iter().enumerate() {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(format!("syllable {} has an empty or invalid range [{a}, {b})", i + 1));
                }
                if a < prev || b > e {
                    return Err(format!(
                        "syllable {} range [{a}, {b}) is out of order or outside the span [{s}, {e})",
                        i + 1
                    ));
                }
                prev = b;
            }
        }
        Ok(())
    }

    /// The record as one manifest line (paths written verbatim).
    pub fn to_line(&self) -> String {
        let mut cols = vec![self.path.display().to_string(), self.label.to_string()];
        if let Some((s, e)) = self.span {
            cols.push(s.to_string());
            cols.push(e.to_string());
        }
        if let Some(al) = &self.alignment {
            for (a, b) in al {
                cols.push(a.to_string());
                cols.push(b.to_string());
            }
        }
        cols.join("\t")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Non-fatal findings such as duplicate paths.
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(positives, negatives)`.
    pub fn counts(&self) -> (usize, usize) {
        let pos = self.entries.iter().filter(|e| e.label == Label::Positive).count();
        (pos, self.entries.len() - pos)
    }

    /// Tab-separated lines: `path label [start end [8 alignment times]]`.
    /// Blank lines and lines starting with `#` are ignored. Relative paths
    /// are resolved against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut out = Manifest::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |msg: String| KwsError::Manifest { line: line_no, msg };
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if !matches!(cols.len(), 2 | 4 | 12) {
                return Err(bad(format!(
                    "expected 2, 4 or 12 tab-separated columns, found {}",
                    cols.len()
                )));
            }
            if cols[0].is_empty() {
                return Err(bad("empty audio path".into()));
            }
            let label = Label::parse(cols[1]).ok_or_else(|| bad(format!("unknown label {:?}", cols[1])))?;
            let nums = cols[2..]
                .iter()
                .map(|c| c.parse::<f64>().map_err(|_| bad(format!("not a number: {c:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            let mut path = PathBuf::from(cols[0]);
            if let Some(b) = base {
                if path.is_relative() {
                    path = b.join(path);
                }
            }
            let entry = ManifestEntry {
                path,
                label,
                span: (nums.len() >= 2).then(|| (nums[0], nums[1])),
                alignment: (nums.len() == 2 + 2 * SYLLABLES).then(|| {
                    let mut al = [(0.0, 0.0); SYLLABLES];
                    for (k, a) in al.iter_mut().enumerate() {
                        *a = (nums[2 + 2 * k], nums[3 + 2 * k]);
                    }
                    al
                }),
            };
            entry.validate().map_err(bad)?;
            if !seen.insert(entry.path.clone()) {
                let w = format!("line {line_no}: duplicate path {}", entry.path.display());
                log::warn!("{w}");
                out.warnings.push(w);
            }
            out.entries.push(entry);
        }
        Ok(out)
    }

    /// Reads and parses a manifest file, then checks that every audio file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| KwsError::io(path, e))?;
        let m = Self::parse(&text, path.parent())?;
        for e in &m.entries {
            if !e.path.is_file() {
                return Err(KwsError::io(
                    &e.path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "audio file listed in manifest not found"),
                ));
            }
        }
        let (p, n) = m.counts();
        log::info!("{}: {p} positive, {n} negative", path.display());
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut s: String = self.entries.iter().map(|e| e.to_line() + "\n").collect();
        if s.is_empty() {
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| KwsError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_lines() {
        let m = Manifest::parse("a.wav\tpositive\t0.5\t1.5\nb.wav\tnegative\n", None).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.counts(), (1, 1));
        assert_eq!(m.entries[0].span, Some((0.5, 1.5)));
        assert!(m.warnings.is_empty());
    }

    #[test]
    fn negative_with_span_rejected() {
        let err = Manifest::parse("# header\nb.wav\tnegative\t0.1\t0.2\n", None).unwrap_err();
        assert!(matches!(err, KwsError::Manifest { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicates_warn() {
        let m = Manifest::parse("a.wav\tneg\na.wav\tneg\n", None).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.warnings.len(), 1);
    }

    #[test]
    fn malformed_lines_report_line_number() {
        for (text, line) in [
            ("a.wav\n", 1),
            ("a.wav\tpos\n\nb.wav\tmaybe\n", 3),
            ("a.wav\tpos\t1\n", 1),
            ("a.wav\tpos\t2\t1\n", 1),
            ("a.wav\tpos\tx\t1\n", 1),
            ("a.wav\tpos\t0\t1\t0\t.2\t.2\t.4\t.4\t.6\t.6\t1.2\n", 1),
        ] {
            match Manifest::parse(text, None) {
                Err(KwsError::Manifest { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn alignment_round_trip() {
        let line = "k.wav\tpositive\t0.5\t1.3\t0.5\t0.7\t0.7\t0.9\t0.9\t1.1\t1.1\t1.3";
        let m = Manifest::parse(line, None).unwrap();
        assert_eq!(m.entries[0].alignment.unwrap()[2], (0.9, 1.1));
        assert_eq!(m.entries[0].to_line(), line);
        assert_eq!(Manifest::parse(&m.to_text(), None).unwrap(), m);
    }

    #[test]
    fn relative_paths_resolved() {
        let m = Manifest::parse("x/a.wav\tneg\n/abs.wav\tneg\n", Some(Path::new("/data"))).unwrap();
        assert_eq!(m.entries[0].path, PathBuf::from("/data/x/a.wav"));
        assert_eq!(m.entries[1].path, PathBuf::from("/abs.wav"));
    }

    #[test]
    fn load_requires_audio() {
        let dir = tempfile::tempdir().unwrap();
        let man = dir.path().join("m.tsv");
        std::fs::write(&man, "missing.wav\tneg\n").unwrap();
        assert!(matches!(Manifest::load(&man), Err(KwsError::Io { .. })));
    }
}
