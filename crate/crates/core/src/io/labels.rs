use std::collections::BTreeSet;
use std::path::Path;

use super::bytes::read_file;
use crate::error::{Result, ZshError};

/// Per-item class assignment, aligned with the columns of a feature matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelList {
    /// Exactly one class per item. The only mode accepted for training.
    Single(Vec<String>),
    /// A tag set per item, for multi-label evaluation.
    Multi(Vec<Vec<String>>),
}

/// How a label file should be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    #[default]
    Single,
    /// Comma-separated tags on each line.
    Multi,
}

impl LabelList {
    pub fn len(&self) -> usize {
        match self {
            LabelList::Single(v) => v.len(),
            LabelList::Multi(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn single(&self) -> Result<&[String]> {
        match self {
            LabelList::Single(v) => Ok(v),
            LabelList::Multi(_) => Err(ZshError::param(
                "labels",
                "multi-label lists are only accepted for evaluation",
            )),
        }
    }

    /// Tags of item `j`; a single label is a one-element tag set.
    pub fn tags(&self, j: usize) -> &[String] {
        match self {
            LabelList::Single(v) => std::slice::from_ref(&v[j]),
            LabelList::Multi(v) => &v[j],
        }
    }

    pub fn select(&self, indices: &[usize]) -> LabelList {
        match self {
            LabelList::Single(v) => LabelList::Single(indices.iter().map(|&j| v[j].clone()).collect()),
            LabelList::Multi(v) => LabelList::Multi(indices.iter().map(|&j| v[j].clone()).collect()),
        }
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(ZshError::Dimension(format!(
                "{} labels for {} items",
                self.len(),
                n
            )));
        }
        Ok(())
    }
}

pub fn parse_labels(text: &str, mode: LabelMode) -> Result<LabelList> {
    let lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
    if lines.is_empty() {
        return Err(ZshError::Empty {
            context: "label file".into(),
        });
    }
    match mode {
        LabelMode::Single => {
            let mut out = Vec::with_capacity(lines.len());
            for (idx, line) in lines.iter().enumerate() {
                if line.is_empty() {
                    return Err(ZshError::Parse {
                        context: "label file".into(),
                        row: idx + 1,
                        message: "empty label".into(),
                    });
                }
                out.push(line.to_string());
            }
            Ok(LabelList::Single(out))
        }
        LabelMode::Multi => Ok(LabelList::Multi(
            lines
                .iter()
                .map(|line| {
                    line.split(',')
                        .filter(|t| !t.is_empty())
                        .map(str::to_string)
                        .collect()
                })
                .collect(),
        )),
    }
}

pub fn load_labels(path: &Path, mode: LabelMode) -> Result<LabelList> {
    parse_labels(&read_text(path)?, mode)
}

pub fn format_labels(labels: &LabelList) -> String {
    let mut out = String::new();
    for j in 0..labels.len() {
        out.push_str(&labels.tags(j).join(","));
        out.push('\n');
    }
    out
}

/// Disjoint seen and unseen label sets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitSpec {
    seen: BTreeSet<String>,
    unseen: BTreeSet<String>,
}

impl SplitSpec {
    pub fn new(
        seen: impl IntoIterator<Item = String>,
        unseen: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let seen: BTreeSet<String> = seen.into_iter().collect();
        let unseen: BTreeSet<String> = unseen.into_iter().collect();
        if let Some(both) = seen.intersection(&unseen).next() {
            return Err(ZshError::Protocol(format!(
                "label {both:?} is both seen and unseen"
            )));
        }
        Ok(SplitSpec { seen, unseen })
    }

    pub fn seen(&self) -> &BTreeSet<String> {
        &self.seen
    }

    pub fn unseen(&self) -> &BTreeSet<String> {
        &self.unseen
    }

    pub fn is_seen(&self, label: &str) -> bool {
        self.seen.contains(label)
    }

    pub fn is_unseen(&self, label: &str) -> bool {
        self.unseen.contains(label)
    }

    /// Every training label must belong to the seen set.
    pub fn check_training_labels(&self, labels: &[String]) -> Result<()> {
        if let Some(bad) = labels.iter().find(|l| self.unseen.contains(l.as_str())) {
            return Err(ZshError::Protocol(format!(
                "training item labelled {bad:?}, which is an unseen category"
            )));
        }
        if let Some(bad) = labels.iter().find(|l| !self.seen.contains(l.as_str())) {
            return Err(ZshError::Protocol(format!(
                "training item labelled {bad:?}, which is not in the seen set"
            )));
        }
        Ok(())
    }
}

pub fn parse_split(text: &str) -> Result<SplitSpec> {
    enum Section {
        None,
        Seen,
        Unseen,
    }
    let mut section = Section::None;
    let mut seen = Vec::new();
    let mut unseen = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "[seen]" => section = Section::Seen,
            "[unseen]" => section = Section::Unseen,
            _ => match section {
                Section::Seen => seen.push(line.to_string()),
                Section::Unseen => unseen.push(line.to_string()),
                Section::None => {
                    return Err(ZshError::Parse {
                        context: "split file".into(),
                        row: idx + 1,
                        message: "label outside of a [seen]/[unseen] section".into(),
                    })
                }
            },
        }
    }
    SplitSpec::new(seen, unseen)
}

pub fn load_split(path: &Path) -> Result<SplitSpec> {
    parse_split(&read_text(path)?)
}

pub fn format_split(split: &SplitSpec) -> String {
    let mut out = String::from("[seen]\n");
    for l in &split.seen {
        out.push_str(l);
        out.push('\n');
    }
    out.push_str("[unseen]\n");
    for l in &split.unseen {
        out.push_str(l);
        out.push('\n');
    }
    out
}

/// Unordered pairs of distinct labels declared semantically related.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelatedPairs {
    pairs: BTreeSet<(String, String)>,
    labels: BTreeSet<String>,
}

impl RelatedPairs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, a: &str, b: &str) -> Result<()> {
        if a == b {
            return Err(ZshError::param(
                "related pairs",
                format!("label {a:?} cannot be related to itself"),
            ));
        }
        let key = if a < b { (a, b) } else { (b, a) };
        self.labels.insert(a.to_string());
        self.labels.insert(b.to_string());
        self.pairs.insert((key.0.to_string(), key.1.to_string()));
        Ok(())
    }

    pub fn is_related(&self, a: &str, b: &str) -> bool {
        if a == b {
            return false;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        self.pairs.contains(&(key.0.to_string(), key.1.to_string()))
    }

    /// Whether `label` takes part in any pair.
    pub fn mentions(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn parse_related(text: &str) -> Result<RelatedPairs> {
    let mut pairs = RelatedPairs::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(ZshError::Parse {
                context: "related-pairs file".into(),
                row: idx + 1,
                message: "expected exactly two tab-separated labels".into(),
            });
        };
        pairs.insert(a, b).map_err(|e| ZshError::Parse {
            context: "related-pairs file".into(),
            row: idx + 1,
            message: e.to_string(),
        })?;
    }
    Ok(pairs)
}

pub fn load_related(path: &Path) -> Result<RelatedPairs> {
    parse_related(&read_text(path)?)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_file(path)?)
        .map_err(|e| ZshError::Format(format!("{} is not UTF-8: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sections() {
        let s = parse_split("[seen]\ncat\ndog\n\n[unseen]\ntruck\n").unwrap();
        assert!(s.is_seen("cat") && s.is_seen("dog"));
        assert!(s.is_unseen("truck"));
        assert!(!s.is_seen("Cat"), "matching is case-sensitive");
        assert!(s.check_training_labels(&["cat".into(), "dog".into()]).is_ok());
        assert!(matches!(
            s.check_training_labels(&["truck".into()]),
            Err(ZshError::Protocol(_))
        ));
    }

    #[test]
    fn split_overlap_is_protocol_error() {
        assert!(matches!(
            parse_split("[seen]\ncat\n[unseen]\ncat\n"),
            Err(ZshError::Protocol(_))
        ));
        assert!(matches!(parse_split("cat\n"), Err(ZshError::Parse { row: 1, .. })));
    }

    #[test]
    fn related_pairs_are_unordered() {
        let r = parse_related("cat\tdog\ncar\ttruck\n").unwrap();
        assert!(r.is_related("dog", "cat"));
        assert!(r.is_related("truck", "car"));
        assert!(!r.is_related("cat", "car"));
        assert!(!r.is_related("cat", "cat"));
        assert!(r.mentions("car"));
        assert!(matches!(parse_related("cat\tcat\n"), Err(ZshError::Parse { .. })));
        assert!(matches!(parse_related("cat dog\n"), Err(ZshError::Parse { .. })));
    }

    #[test]
    fn multi_label_lines() {
        let l = parse_labels("sky,river\n\nsky\n", LabelMode::Multi).unwrap();
        assert_eq!(l.len(), 3);
        assert!(l.tags(1).is_empty());
        assert!(l.single().is_err());
        let s = parse_labels("a\nb\n", LabelMode::Single).unwrap();
        assert_eq!(s.single().unwrap(), &["a".to_string(), "b".to_string()]);
        assert!(parse_labels("a\n\nb\n", LabelMode::Single).is_err());
    }
}
