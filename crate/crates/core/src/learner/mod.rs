//! Soft actor-critic on small tanh MLPs with hand-written reverse-mode
//! gradients, running observation normalization and polyak target updates.

mod adam;
mod checkpoint;
mod mlp;
mod normalizer;
mod sac;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_SCHEMA};
pub use mlp::{tanh, Linear, Matrix, Mlp, MlpCache, MlpGrads};
pub use normalizer::{Normalizer, CLIP_OBS, NORM_CLIP, NORM_EPS};
pub use sac::{
    actor_loss_grad, critic_loss_grad, log1m_tanh_sq, polyak, squash, ActionBox, BcTerm, SacAgent,
    SacBatch, SacConfig, SquashedSample, LOG_STD_MAX, LOG_STD_MIN,
};
