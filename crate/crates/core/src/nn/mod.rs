//! From-scratch neural network core: tensors, layer math with hand-derived
//! backward passes, the speaker CNN, SGD training, and weight persistence.

pub mod layers;
pub mod model;
pub mod serialize;
pub mod tensor;
pub mod train;

pub use model::{snippet_tensor, Architecture, CnnModel, ForwardCache, Gradients};
pub use serialize::{load_model, load_tensor, save_model, save_tensor};
pub use tensor::{Real, Tensor};
pub use train::{sgd_train, snippet_dataset, EpochStats, TrainConfig, TrainSample};
