//! Differentiable planners on grid worlds: value iteration networks, a
//! softmax-weighted summarizer baseline and a gated convolutional-LSTM
//! summarizer, plus the data, training and evaluation machinery around them.

pub mod checks;
pub mod codec;
pub mod evaluation;
pub mod gridworld;
pub mod models;
pub mod tensor;
pub mod training;
