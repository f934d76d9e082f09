//! Conditional adversarial training for speckle reduction: an encoder-decoder
//! generator, a patch discriminator on (input, candidate) pairs, an image
//! history pool, the learning-rate schedule and the epoch loop.

mod infer;
mod network;
mod pool;
mod schedule;
mod train;

pub use infer::{infer, tensor_images};
pub use network::{Discriminator, DiscriminatorSpec, Generator, GeneratorSpec};
pub use pool::{ImagePool, PoolChoice};
pub use schedule::{lr_at_epoch, GanMode, TrainConfig};
pub use train::{
    checkpoint_of, discriminator_step, gan_loss, generator_objective, generator_objective_value, generator_step, mean_psnr, train, EpochLog,
    StepLosses, TrainOutcome, TrainOutput, LOG_HEADER, PSNR_CAP_DB,
};
