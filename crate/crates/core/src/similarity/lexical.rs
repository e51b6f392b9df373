use super::{ScoreError, Scorer, ScorerKind, SimilarityMatrix, SimilarityScore};
use crate::exec::Exec;

/// Jaccard overlap of normalised token sets.
///
/// Normalisation: lowercase, every non-alphanumeric character becomes a
/// space, split on whitespace, deduplicate. Two empty sets score 1.0; one
/// empty set scores 0.0.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

/// Sorted, deduplicated normalised tokens of `text`.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text.to_lowercase().chars().map(|c| if c.is_alphanumeric() { c } else { ' ' }).collect();
    let mut tokens: Vec<String> = cleaned.split_whitespace().map(str::to_string).collect();
    tokens.sort_unstable();
    tokens.dedup();
    tokens
}

/// Jaccard index of two sorted, deduplicated token lists.
pub fn jaccard(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (mut i, mut j, mut shared) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - shared;
    shared as f64 / union as f64
}

fn to_score(v: f64) -> SimilarityScore {
    SimilarityScore::new(v).expect("jaccard is in [0, 1]")
}

impl Scorer for LexicalScorer {
    fn kind(&self) -> ScorerKind {
        ScorerKind::Lexical
    }

    fn score(&self, a: &str, b: &str) -> Result<SimilarityScore, ScoreError> {
        Ok(to_score(jaccard(&tokenize(a), &tokenize(b))))
    }

    fn score_many(&self, query: &str, candidates: &[&str], exec: Exec) -> Result<Vec<SimilarityScore>, ScoreError> {
        let q = tokenize(query);
        Ok(exec.map(candidates.len(), |i| to_score(jaccard(&q, &tokenize(candidates[i])))))
    }

    fn score_matrix(&self, sentences: &[&str], exec: Exec) -> Result<SimilarityMatrix, ScoreError> {
        let tokens: Vec<Vec<String>> = exec.map(sentences.len(), |i| tokenize(sentences[i]));
        let n = sentences.len();
        let rows = exec.map(n, |i| Ok((i + 1..n).map(|j| to_score(jaccard(&tokens[i], &tokens[j]))).collect()));
        SimilarityMatrix::from_upper_rows(n, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(a: &str, b: &str) -> f64 {
        LexicalScorer.score(a, b).unwrap().value()
    }

    #[test]
    fn identity_disjoint_and_overlap() {
        assert_eq!(s("The death penalty is wrong.", "The death penalty is wrong."), 1.0);
        assert_eq!(s("guns kill", "marriage equality"), 0.0);
        // {the, death, penalty, is, wrong} vs {the, death, penalty, is, immoral}: 4 / 6
        assert_eq!(s("the death penalty is wrong", "the death penalty is immoral"), 4.0 / 6.0);
    }

    #[test]
    fn normalisation() {
        assert_eq!(tokenize("Guns, GUNS and guns!"), vec!["and", "guns"]);
        assert_eq!(tokenize("don't-stop"), vec!["don", "stop", "t"]);
        assert!(tokenize("  ...  ").is_empty());
        assert_eq!(s("", ""), 1.0);
        assert_eq!(s("!!", "?"), 1.0);
        assert_eq!(s("", "word"), 0.0);
    }

    #[test]
    fn batch_paths_match_single_calls() {
        let texts = ["a b c", "b c d", "", "Ünïcode straße", "a"];
        let many = LexicalScorer.score_many("b c straße", &texts, Exec::Sequential).unwrap();
        for (t, m) in texts.iter().zip(&many) {
            assert_eq!(m.value(), s("b c straße", t));
        }
        let m = LexicalScorer.score_matrix(&texts, Exec::Sequential).unwrap();
        for i in 0..texts.len() {
            for j in 0..texts.len() {
                if i != j {
                    assert_eq!(m.get(i, j), s(texts[i], texts[j]));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in "\\PC{0,40}", b in "\\PC{0,40}") {
            let ab = s(&a, &b);
            prop_assert_eq!(ab, s(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn one_iff_equal_token_sets(a in "[a-c ,.!]{0,12}", b in "[a-c ,.!]{0,12}") {
            prop_assert_eq!(s(&a, &b) == 1.0, tokenize(&a) == tokenize(&b));
        }
    }
}
