//! Neural atom estimators: the Lipschitz-regular LipNet, a plain residual
//! baseline, Adam, the training loop and post-training diagnostics.

mod adam;
mod checkpoint;
mod diagnostics;
mod lipnet;
mod net;
mod power;
mod stdnet;
mod train;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Network, CHECKPOINT_FORMAT_VERSION};
pub use diagnostics::{atom_table, avg_abs_derivative, empirical_lipschitz, gradient_check};
pub use lipnet::{LipNet, LipNetCache, LipNetConfig, WARMUP_POWER_ITERS};
pub use net::{AtomMap, AtomNet, Dense};
pub use power::{power_iter_update, PowerIterState, RowNormState, DEFAULT_TAU};
pub use stdnet::{StdNet, StdNetCache, StdNetConfig};
pub use train::{batch_objective, epoch_batch, fit, train, Schedule, SearchBackend, TrainConfig, REFERENCE_EPOCHS};
