use serde::{Deserialize, Serialize};

use crate::corpus::{Dimension, ErrorCategory};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketLabel {
    pub score: u8,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guidelines {
    pub dimension: Dimension,
    pub categories: Vec<ErrorCategory>,
    pub buckets: Vec<BucketLabel>,
    pub text: String,
}

pub const DA_BUCKETS: [u8; 4] = [0, 34, 67, 100];

pub fn bucket_labels(dimension: Dimension) -> Vec<BucketLabel> {
    let (bottom, top) = match dimension {
        Dimension::Adequacy => ("Nonsense/No meaning preserved", "Perfect meaning"),
        Dimension::Fluency => ("Incomprehensible", "Fluent and natural"),
    };
    let labels = [bottom, "Intermediate level", "Intermediate level", top];
    DA_BUCKETS
        .iter()
        .zip(labels)
        .map(|(&score, label)| BucketLabel {
            score,
            label: label.to_string(),
        })
        .collect()
}

pub fn guidelines(dimension: Dimension) -> Guidelines {
    let categories = dimension.categories().to_vec();
    let names: Vec<&str> = categories.iter().map(|c| c.as_str()).collect();
    let (scope, sides) = match dimension {
        Dimension::Adequacy => (
            "how much of the source meaning the translation preserves",
            "Spans may be marked in the source (e.g. omitted content) or in the translation.",
        ),
        Dimension::Fluency => (
            "how well-formed and natural the translation reads on its own",
            "Spans are marked in the translation only; the source is not shown.",
        ),
    };
    let buckets = bucket_labels(dimension);
    let mut text = format!(
        "Rate {scope}.\n\n1. Highlight every error span and give it one category: {}.\n   {sides}\n2. Then give a score from 0 to 100. Reference points:\n",
        names.join(", ")
    );
    for b in &buckets {
        text.push_str(&format!("   {:>3}: {}\n", b.score, b.label));
    }
    text.push_str("   Scores between the reference points are allowed.\n");
    Guidelines {
        dimension,
        categories,
        buckets,
        text,
    }
}
