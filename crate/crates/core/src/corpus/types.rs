use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Source/target language pair, optionally tagged with a domain such as
/// `"it"` or `"ted"`. Two pairs with the same languages but different tags
/// are reported as separate rows.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LanguagePair {
    pub src_lang: String,
    pub tgt_lang: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_tag: Option<String>,
}

impl LanguagePair {
    pub fn new(src_lang: &str, tgt_lang: &str) -> Result<Self, CorpusError> {
        let lp = LanguagePair {
            src_lang: src_lang.to_string(),
            tgt_lang: tgt_lang.to_string(),
            domain_tag: None,
        };
        lp.validate()?;
        Ok(lp)
    }

    pub fn with_domain(mut self, tag: &str) -> Self {
        self.domain_tag = Some(tag.to_string());
        self
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        for code in [&self.src_lang, &self.tgt_lang] {
            if code.len() != 3 || !code.bytes().all(|b| b.is_ascii_lowercase()) {
                return Err(CorpusError::invariant(format!(
                    "language code {code:?} is not three lowercase ASCII letters"
                )));
            }
        }
        if self.src_lang == self.tgt_lang && self.domain_tag.is_none() {
            return Err(CorpusError::invariant(format!(
                "source and target language are both {:?} and no domain tag distinguishes them",
                self.src_lang
            )));
        }
        Ok(())
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src_lang, self.tgt_lang)?;
        if let Some(tag) = &self.domain_tag {
            write!(f, " ({tag})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Dev,
    Devtest,
    #[default]
    Unsplit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationTriple {
    pub segment_id: String,
    pub lp: LanguagePair,
    pub src: String,
    pub mt: String,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default)]
    pub split: Split,
}

impl TranslationTriple {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.segment_id.is_empty() {
            return Err(CorpusError::invariant("segment_id is empty"));
        }
        if self.src.is_empty() {
            return Err(CorpusError::invariant("src is empty"));
        }
        if self.mt.is_empty() {
            return Err(CorpusError::invariant("mt is empty"));
        }
        self.lp.validate()
    }

    /// Text an error span on `target` indexes into.
    pub fn text_for(&self, target: SpanTarget) -> &str {
        match target {
            SpanTarget::SourceSide => &self.src,
            SpanTarget::TranslationSide => &self.mt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Adequacy,
    Fluency,
}

impl Dimension {
    pub fn categories(self) -> [ErrorCategory; 4] {
        match self {
            Dimension::Adequacy => [
                ErrorCategory::Addition,
                ErrorCategory::Omission,
                ErrorCategory::Mistranslation,
                ErrorCategory::Untranslated,
            ],
            Dimension::Fluency => [
                ErrorCategory::Grammar,
                ErrorCategory::Spelling,
                ErrorCategory::Typography,
                ErrorCategory::Unintelligible,
            ],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Adequacy => "adequacy",
            Dimension::Fluency => "fluency",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    Addition,
    Omission,
    Mistranslation,
    Untranslated,
    Grammar,
    Spelling,
    Typography,
    Unintelligible,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 8] = [
        ErrorCategory::Addition,
        ErrorCategory::Omission,
        ErrorCategory::Mistranslation,
        ErrorCategory::Untranslated,
        ErrorCategory::Grammar,
        ErrorCategory::Spelling,
        ErrorCategory::Typography,
        ErrorCategory::Unintelligible,
    ];

    pub fn dimension(self) -> Dimension {
        match self {
            ErrorCategory::Addition
            | ErrorCategory::Omission
            | ErrorCategory::Mistranslation
            | ErrorCategory::Untranslated => Dimension::Adequacy,
            _ => Dimension::Fluency,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Addition => "Addition",
            ErrorCategory::Omission => "Omission",
            ErrorCategory::Mistranslation => "Mistranslation",
            ErrorCategory::Untranslated => "Untranslated",
            ErrorCategory::Grammar => "Grammar",
            ErrorCategory::Spelling => "Spelling",
            ErrorCategory::Typography => "Typography",
            ErrorCategory::Unintelligible => "Unintelligible",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanTarget {
    SourceSide,
    TranslationSide,
}

/// A highlighted error. Offsets count Unicode scalar values, not bytes;
/// `end` is exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErrorSpan {
    pub start: usize,
    pub end: usize,
    pub target: SpanTarget,
    pub category: ErrorCategory,
}

impl ErrorSpan {
    /// Checks the span against the annotation dimension and, when given, the
    /// character length of the text it targets.
    pub fn validate(&self, dimension: Dimension, text_len: Option<usize>) -> Result<(), CorpusError> {
        if self.start >= self.end {
            return Err(CorpusError::invariant(format!(
                "span [{}, {}) is empty or inverted",
                self.start, self.end
            )));
        }
        if self.category.dimension() != dimension {
            return Err(CorpusError::invariant(format!(
                "category {} does not belong to the {} dimension",
                self.category, dimension
            )));
        }
        if dimension == Dimension::Fluency && self.target == SpanTarget::SourceSide {
            return Err(CorpusError::invariant("fluency spans must target the translation"));
        }
        if let Some(len) = text_len {
            if self.end > len {
                return Err(CorpusError::invariant(format!(
                    "span end {} exceeds text length {}",
                    self.end, len
                )));
            }
        }
        Ok(())
    }
}

pub const ANNOTATION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub segment_id: String,
    pub evaluator_id: String,
    pub dimension: Dimension,
    pub spans: Vec<ErrorSpan>,
    pub da_score: u8,
    pub submitted_at: DateTime<Utc>,
}

impl Annotation {
    /// Validates score range and every span. Span bounds are only checked
    /// when the annotated triple is supplied.
    pub fn validate(&self, triple: Option<&TranslationTriple>) -> Result<(), CorpusError> {
        if self.da_score > 100 {
            return Err(CorpusError::invariant(format!(
                "da_score {} outside [0, 100]",
                self.da_score
            )));
        }
        if self.evaluator_id.is_empty() {
            return Err(CorpusError::invariant("evaluator_id is empty"));
        }
        for span in &self.spans {
            let len = triple.map(|t| char_len(t.text_for(span.target)));
            span.validate(self.dimension, len)?;
        }
        Ok(())
    }
}

/// Per-segment output of the QA pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub segment_id: String,
    pub z_mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaled: Option<f64>,
    pub n_annotators: usize,
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Substring by scalar-value offsets. Returns `None` when out of bounds.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let byte_start = indices.nth(start)?;
    let byte_end = if end == start {
        byte_start
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[byte_start..byte_end])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn language_pair_rules() {
        assert!(LanguagePair::new("eng", "yor").is_ok());
        assert!(LanguagePair::new("en", "yor").is_err());
        assert!(LanguagePair::new("ENG", "yor").is_err());
        assert!(LanguagePair::new("eng", "eng").is_err());
        let tagged = LanguagePair {
            src_lang: "eng".into(),
            tgt_lang: "eng".into(),
            domain_tag: Some("it".into()),
        };
        assert!(tagged.validate().is_ok());
        assert_eq!(
            LanguagePair::new("eng", "yor").unwrap().with_domain("ted").to_string(),
            "eng-yor (ted)"
        );
    }

    #[test]
    fn char_slice_handles_multibyte() {
        let s = "e\u{301}😀b";
        assert_eq!(char_len(s), 4);
        assert_eq!(char_slice(s, 0, 2), Some("e\u{301}"));
        assert_eq!(char_slice(s, 2, 3), Some("😀"));
        assert_eq!(char_slice(s, 3, 4), Some("b"));
        assert_eq!(char_slice(s, 4, 4), Some(""));
        assert_eq!(char_slice(s, 3, 5), None);
    }

    #[test]
    fn span_category_must_match_dimension() {
        let span = ErrorSpan {
            start: 0,
            end: 2,
            target: SpanTarget::TranslationSide,
            category: ErrorCategory::Omission,
        };
        assert!(span.validate(Dimension::Adequacy, Some(5)).is_ok());
        assert!(span.validate(Dimension::Fluency, Some(5)).is_err());
        assert!(span.validate(Dimension::Adequacy, Some(1)).is_err());
        let src_fluency = ErrorSpan {
            target: SpanTarget::SourceSide,
            category: ErrorCategory::Grammar,
            ..span
        };
        assert!(src_fluency.validate(Dimension::Fluency, None).is_err());
    }
}
