//! Decoder from spectral encodings to vertex coordinates.

mod loss;
mod mlp;
mod model;
mod train;

pub use loss::{chamfer_with_grad, loss_chamfer, loss_frobenius, LossKind};
pub use mlp::{Adam, BatchNorm, Cache, Dense, Grads, Mlp, Mode, Real, BN_EPS, BN_MOMENTUM};
pub use model::{init_decoder, DecoderModel, EpochLoss, ModelMeta, TrainingMeta, CHECKPOINT_VERSION};
pub use train::{evaluate_loss, loss_history_csv, train, write_loss_csv, Samples, TrainConfig};
