//! Hand-derived backpropagation through time, AdamW and the imitation
//! training loop.

mod backprop;
mod checkpoint;
mod data;
mod gradcheck;
mod loss;
mod model;
mod optim;
mod policy;
mod train;

pub use backprop::{
    batch_loss, bptt_gradients, bptt_loss_and_gradients, central_difference, compare_gradients,
    extended_finite_difference_gradients, finite_difference_gradients, GradientComparison,
};
pub use checkpoint::{Checkpoint, HeadDocument, OptimizerDocument};
pub use data::DatasetSplit;
pub use gradcheck::{
    gradient_check, ArrayError, GradcheckReport, GRADCHECK_FLOOR, GRADCHECK_M, GRADCHECK_N, GRADCHECK_REL_TOL, GRADCHECK_T,
};
pub use loss::{mse_loss, turn_weights, weighted_loss, Loss};
pub use model::{is_weight_matrix, GradientSet, PolicyModel, Sequence};
pub use optim::{adamw_step, clip_global_norm, AdamState, AdamWConfig};
pub use policy::ModelPolicy;
pub use train::{
    evaluate, history_csv, parse_history_csv, train, EpochRecord, SequenceSet, TrainOutcome, TrainingConfig,
    HISTORY_HEADER,
};
