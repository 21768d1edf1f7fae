//! Iterates random instances of the scalar recursion behind the sensitivity
//! bounds and reports violations of both closed-form bounds.

use truthful_agg::harness::{check_lemma2_bounds, lemma2_digest};

fn main() {
    let summary = check_lemma2_bounds(50, 2_000, 11);
    print!("{}", lemma2_digest(&summary));
}
