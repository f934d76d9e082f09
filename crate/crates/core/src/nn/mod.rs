//! Small reverse-mode autodiff engine over `(N, C, H, W)` tensors: the
//! convolution, resampling, activation and loss ops a conditional GAN needs,
//! plus spectral normalization, Adam and a binary checkpoint format.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod graph;
mod layer;
mod spectral;
mod tensor;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, Record, FORMAT_VERSION, MAGIC};
pub use graph::{sigmoid, Activation, Graph, Var};
pub use layer::{conv_layer, BoundLayer, LayerParam};
pub use spectral::{power_iteration, spectral_normalize, SpectralNormState, SPECTRAL_EPS};
pub use tensor::Tensor4;
