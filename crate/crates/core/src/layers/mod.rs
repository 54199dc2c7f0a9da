//! Differentiable building blocks with explicit forward and backward passes.

mod conv;
mod dense;
mod gru;
mod loss;
mod lstm;
pub mod probes;

pub use conv::{Conv2d, ConvSpec};
pub use dense::{relu_backward_in_place, relu_in_place, Dense};
pub use gru::{GruCell, GruTrace};
pub use loss::softmax_xent;
pub use lstm::{LstmCell, LstmTrace};

use crate::error::Result;
use crate::numerics::{normalized_init, Real, Rng, Tensor};

/// `rows × (blocks · width)` matrix whose column blocks are initialized
/// independently as `rows × width` normalized matrices.
pub(crate) fn init_gate_blocks<F: Real>(rows: usize, width: usize, blocks: usize, rng: &mut Rng) -> Result<Tensor<F>> {
    let cols = width * blocks;
    let mut out = Tensor::zeros(&[rows, cols]);
    for b in 0..blocks {
        let block: Tensor<F> = normalized_init(rows, width, rng)?;
        for r in 0..rows {
            out.row_mut(r)[b * width..(b + 1) * width].copy_from_slice(block.row(r));
        }
    }
    Ok(out)
}
