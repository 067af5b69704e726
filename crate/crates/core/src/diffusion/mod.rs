//! Continuous diffusion over embedded layout tokens.

mod checkpoint;
mod model;
pub mod nn;
mod objective;
mod sample;
mod schedule;
mod train;

pub use checkpoint::{CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use model::{Block, DenoiserConfig, DenoiserParams, Tape};
pub use objective::{loss, loss_and_grad, loss_and_grad_on, loss_terms, noise_batch, LossTerms, NoisedBatch};
pub use sample::{sequence_rng, LayoutModel, SampleOptions, SampleOutput};
pub use schedule::{NoiseSchedule, ScheduleKind};
pub use train::{train, train_with, write_loss_log, AdamW, LossRow, TrainConfig, TrainOutput, LOSS_LOG_HEADER};
