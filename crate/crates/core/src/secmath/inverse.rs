/// Settings for the encrypted matrix inverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InverseParams {
    /// Number of third-order iterations; there is no early exit.
    pub iterations: usize,
    /// Use upper-triangle products. Valid only for symmetric input, and only
    /// well conditioned input: mirroring discards the part of each product
    /// that rounding pushes off the symmetric subspace, which lets the
    /// iteration diverge once the condition number reaches about `10⁴`.
    pub symmetric: bool,
}

impl Default for InverseParams {
    fn default() -> Self {
        Self {
            iterations: 32,
            symmetric: false,
        }
    }
}

impl InverseParams {
    pub fn symmetric(iterations: usize) -> Self {
        Self {
            iterations,
            symmetric: true,
        }
    }

    /// Scale at which the iterate `V` is carried: `f + f/2` bits, so entries
    /// of the inverse that are much smaller than one keep their precision.
    pub fn inverse_scale(&self, fraction_bits: u32) -> u32 {
        fraction_bits + fraction_bits / 2
    }
}
