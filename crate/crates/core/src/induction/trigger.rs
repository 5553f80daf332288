use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::InductionError;
use crate::corpus::{Corpus, Span};
use crate::grammar::Symbol;
use crate::parser::{match_pattern, MatchLimits};

/// Default number of random terms drawn per estimate.
pub const DEFAULT_TP_SAMPLES: usize = 10_000;

fn terms_in(len: usize) -> u64 {
    let n = len as u64;
    n * (n + 1) / 2
}

/// Number of distinct terms in the corpus.
pub fn term_count(corpus: &Corpus) -> u64 {
    corpus.sentences().iter().map(|s| terms_in(s.len())).sum()
}

/// Maps `k` in `[0, n(n+1)/2)` to a span of an `n`-word sentence, start-major.
fn kth_span(len: usize, mut k: u64) -> Span {
    for start in 0..len {
        let here = (len - start) as u64;
        if k < here {
            return Span::new(start, start + 1 + k as usize);
        }
        k -= here;
    }
    unreachable!("term index out of range")
}

/// Estimates the probability that `rhs` matches a uniformly random term of
/// the corpus. Every term is tested when there are at most `samples` of
/// them; otherwise `samples` terms are drawn with replacement.
pub fn estimate_trigger_probability(
    rhs: &[Symbol],
    corpus: &Corpus,
    samples: usize,
    seed: u64,
    limits: &MatchLimits,
) -> Result<f64, InductionError> {
    if samples == 0 {
        return Err(InductionError::ZeroSamples);
    }
    let total = term_count(corpus);
    if total == 0 {
        return Err(InductionError::EmptyCorpus);
    }
    let hit =
        |s: usize, span: Span| !match_pattern(rhs, span, &corpus.sentences()[s], limits).is_empty();
    if total <= samples as u64 {
        let mut matched = 0u64;
        for (i, s) in corpus.sentences().iter().enumerate() {
            for start in 0..s.len() {
                for end in start + 1..=s.len() {
                    matched += u64::from(hit(i, Span::new(start, end)));
                }
            }
        }
        return Ok(matched as f64 / total as f64);
    }
    let offsets: Vec<u64> = corpus
        .sentences()
        .iter()
        .scan(0u64, |acc, s| {
            let here = *acc;
            *acc += terms_in(s.len());
            Some(here)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matched = 0usize;
    for _ in 0..samples {
        let k = rng.gen_range(0..total);
        let s = offsets.partition_point(|&o| o <= k) - 1;
        let span = kth_span(corpus.sentences()[s].len(), k - offsets[s]);
        matched += usize::from(hit(s, span));
    }
    Ok(matched as f64 / samples as f64)
}
