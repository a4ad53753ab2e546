//! Accuracy as a function of memory.

use super::{Algo, SketchError};

/// Bits one register occupies on the wire, and the constant in front of
/// `1/sqrt(registers)` in the estimator's relative standard error.
fn profile(algo: Algo) -> (u64, f64) {
    match algo {
        Algo::Kmv => (32, 1.0),
        Algo::Pcsa => (32, 0.78),
        Algo::LogLog => (5, 1.30),
        Algo::Hll => (6, 1.04),
    }
}

/// Predicted relative standard error of `algo` given `memory_bits` of state.
///
/// The memory must divide evenly into registers; anything else is an
/// [`SketchError::InvalidMemory`]. KMV registers are counted at 32 bits
/// apiece, matching how the other algorithms are sized in the literature
/// this library follows, even though this implementation stores 64-bit
/// hashes internally.
pub fn theoretical_rse(algo: Algo, memory_bits: u64) -> Result<f64, SketchError> {
    let (width, coeff) = profile(algo);
    if memory_bits == 0 || memory_bits % width != 0 {
        return Err(SketchError::InvalidMemory(format!(
            "{} needs a multiple of {width} bits, got {memory_bits}",
            algo.name()
        )));
    }
    let registers = (memory_bits / width) as f64;
    Ok(coeff / registers.sqrt())
}
