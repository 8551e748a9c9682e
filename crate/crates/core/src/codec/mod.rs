//! Constellation design, encoding onto directions, the per-receiver
//! structured model and joint-antenna hard decoding.

mod encode;
mod model;
mod params;
mod scheme;
mod weight;

pub use encode::{encode, SymbolVector};
pub use model::{build_receive_model, hypothesis_count, DecodeResult, ReceiveModel, StructuredModel, HYPOTHESIS_CAP};
pub use params::{db_to_linear, design_params, q_exponent, ModulationParams, QMode};
pub use scheme::SchemeDirections;
pub use weight::{sample_w, WeightMatrix};
