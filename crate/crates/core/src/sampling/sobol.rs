//! Base-2 Sobol sequence with optional linear-matrix scramble and digital
//! shift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sobol_table::DIRECTION_NUMBERS;

const BITS: usize = 32;

/// Number of dimensions with tabulated direction numbers.
pub const MAX_DIM: usize = DIRECTION_NUMBERS.len();

/// The 32 direction numbers of one dimension, left-aligned in a `u32`.
fn direction_numbers(dim: usize) -> [u32; BITS] {
    let (poly, init) = DIRECTION_NUMBERS[dim];
    let degree = (32 - poly.leading_zeros() - 1) as usize;
    let mut m = [0u64; BITS];
    for k in 0..BITS {
        m[k] = if degree == 0 {
            1
        } else if k < degree {
            u64::from(init[k])
        } else {
            let mut next = m[k - degree] ^ (m[k - degree] << degree);
            for j in 1..degree {
                if (poly >> (degree - j)) & 1 == 1 {
                    next ^= m[k - j] << j;
                }
            }
            next
        };
    }
    let mut v = [0u32; BITS];
    for k in 0..BITS {
        v[k] = (m[k] << (BITS - 1 - k)) as u32;
    }
    v
}

/// Streaming Sobol generator in Gray-code order, starting at index 0.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    shift: Vec<u32>,
    index: u64,
}

impl Sobol {
    /// `None` when `dim` is 0 or exceeds [`MAX_DIM`].
    pub fn new(dim: usize, scramble: Option<u64>) -> Option<Self> {
        if dim == 0 || dim > MAX_DIM {
            return None;
        }
        let mut directions: Vec<_> = (0..dim).map(direction_numbers).collect();
        let mut shift = vec![0u32; dim];
        if let Some(seed) = scramble {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (v, s) in directions.iter_mut().zip(&mut shift) {
                // random lower-triangular matrix with unit diagonal, acting on
                // bit rows where row 0 is the most significant bit
                let rows: [u32; BITS] = std::array::from_fn(|r| {
                    let diag = 1u32 << (BITS - 1 - r);
                    let below_mask = if r == 0 { 0 } else { !0u32 << (BITS - r) };
                    (rng.random::<u32>() & below_mask) | diag
                });
                for vk in v.iter_mut() {
                    let mut out = 0u32;
                    for (r, row) in rows.iter().enumerate() {
                        if (row & *vk).count_ones() % 2 == 1 {
                            out |= 1 << (BITS - 1 - r);
                        }
                    }
                    *vk = out;
                }
                *s = rng.random();
            }
        }
        Some(Self {
            state: vec![0; dim],
            directions,
            shift,
            index: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Next point in `[0, 1)^dim`.
    pub fn next_point(&mut self) -> Vec<f64> {
        if self.index > 0 {
            let c = self.index.trailing_zeros() as usize;
            for (x, v) in self.state.iter_mut().zip(&self.directions) {
                *x ^= v[c.min(BITS - 1)];
            }
        }
        self.index += 1;
        self.state
            .iter()
            .zip(&self.shift)
            .map(|(&x, &s)| f64::from(x ^ s) / 4294967296.0)
            .collect()
    }
}
