use crate::error::{CoreError, Result};
use crate::rng::rng_for;
use rand::seq::SliceRandom;
use std::collections::BTreeMap;

/// Concatenate per-language corpora (in sorted language order) and
/// apply a seeded uniform shuffle. Same seed, same order.
pub fn mix_languages<T: Clone>(
    corpora: &BTreeMap<String, Vec<T>>,
    seed: u64,
) -> Result<Vec<T>> {
    let mut mixed: Vec<T> = corpora.values().flat_map(|v| v.iter().cloned()).collect();
    if mixed.is_empty() {
        return Err(CoreError::EmptyInput(
            "mix_languages: union of corpora is empty".to_string(),
        ));
    }
    let mut rng = rng_for(seed, "mix");
    mixed.shuffle(&mut rng);
    Ok(mixed)
}
