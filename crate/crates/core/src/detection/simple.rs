//! Quadrant-change demodulator for the binary quarter-turn FTN waveform.

use crate::error::{Error, Result};
use crate::frontend::{OneBit, QuantizedFrame};

/// Decision for one pair of consecutive samples.
///
/// On the `1+j`/`-1-j` diagonal a quarter turn flips the real part, elsewhere the
/// imaginary part, so only that component is inspected.
pub fn quadrant_change(prev: OneBit, cur: OneBit) -> u32 {
    let on_diagonal = prev.0 == 0 || prev.0 == 3;
    let flipped = if on_diagonal { prev.re() != cur.re() } else { prev.im() != cur.im() };
    u32::from(flipped)
}

/// Decision `j` compares sample `j` with sample `j - 1`; decision 0 uses `initial`.
pub fn simple_demodulate(y: &QuantizedFrame, initial: OneBit) -> Result<Vec<u32>> {
    if y.oversampling != 1 {
        return Err(Error::InvalidConfig(format!(
            "the quadrant-change demodulator needs one sample per symbol, got {}",
            y.oversampling
        )));
    }
    Ok(std::iter::once(initial)
        .chain(y.samples.iter().copied())
        .zip(y.samples.iter().copied())
        .map(|(p, c)| quadrant_change(p, c))
        .collect())
}
