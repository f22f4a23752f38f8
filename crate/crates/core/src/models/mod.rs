//! U-Net and Qu-Net assembly, parameter accounting and checkpoints.

mod accounting;
mod checkpoint;
mod config;
mod layers;
mod unet;

pub use accounting::{reconcile, table_targets, LayerCount, Reconciliation, TableTarget};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest};
pub use config::{ArchOptions, ModelConfig, Scale, Variant};
pub use layers::ParamKind;
pub use unet::{build_model, Bottleneck, Model, ParamCount, Tape};
