//! Frame and flow containers, preprocessing, the synthetic sprite dataset and
//! batch ordering.

mod batch;
mod frame;
mod synth;

pub use batch::BatchPlan;
pub use frame::{preprocess_frame, resize_bilinear, FlowField, FrameTensor, RawImage};
pub use synth::{generate_synthetic, SplitSpec, SpriteKind, DEFAULT_TEST_ANOMALY_RATE, SynthDataset, SynthSpec, SynthVideo};
