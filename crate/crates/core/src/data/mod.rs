//! Image/mask datasets: ingestion, resizing, partitions and a synthetic set.

mod load;
mod partition;
mod resize;
mod synth;

pub use load::{load_dataset, resize_sample, Sample};
pub use partition::{make_partitions, Lcg, Partition};
pub use resize::{bilinear_resize, binarize};
pub use synth::synth_dataset;
