//! Shared helpers for the benchmark targets.

/// Deterministic element corpus: `count` distinct strings as byte vectors.
pub fn elements(count: usize) -> Vec<Vec<u8>> {
    (0..count)
        .map(|i| format!("element-{i:08}").into_bytes())
        .collect()
}
