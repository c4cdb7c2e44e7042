//! Numeric substrate: tensors, a dynamic reverse-mode graph, LSTM layers and
//! the Adam optimizer. Everything is `f64` and single-threaded per graph.

pub mod adam;
pub mod graph;
pub mod init;
pub mod lstm;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use graph::{softmax_cross_entropy, Graph, NodeId};
pub use lstm::{bilstm_final, bilstm_layer, lstm_cell_step, LstmNodes, LstmParams};
pub use tensor::{ParamId, ParamStore, Tensor};
