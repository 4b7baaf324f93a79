//! Dense tensors, a reverse-mode autodiff tape, initialisers and the Adam
//! optimizer.

pub mod init;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use optim::{clip_global_norm, global_norm, step_decay, Adam};
pub use params::Params;
pub use tape::{Grads, Tape, Var};
pub use tensor::Tensor;
