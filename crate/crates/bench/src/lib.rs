//! Shared inputs for the right-hand-side benchmarks.

use nlburgers_core::{make_grid, Field};

/// Grid sizes spanning the regime where the `O(n^2)` quadrature overtakes
/// the `O(n log n)` spectral path.
pub const SIZES: [usize; 3] = [64, 256, 1024];

/// Smooth positive data with a few active modes.
pub fn smooth_field(n: usize) -> Field {
    Field::from_fn(make_grid(n).expect("valid size"), |x| {
        2.0 + x.sin() + 0.3 * (5.0 * x).cos()
    })
    .expect("finite data")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fields_match_sizes() {
        for n in SIZES {
            let f = smooth_field(n);
            assert_eq!(f.len(), n);
            assert!(f.values().iter().all(|v| *v > 0.0));
        }
    }
}
