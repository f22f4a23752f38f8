//! QuFeX: a quantum feature-extraction layer.
//!
//! Channel groups of the input are flattened into value streams, cut into
//! windows of `n_qubits` values, angle-encoded into a translationally shared
//! circuit and read out as per-qubit <Z>. The readouts are written back to
//! the positions they were read from, so the layer maps `C x H x W` onto
//! itself, and a residual bypass adds the input on top.

mod grouping;
mod layer;
mod template;

pub use grouping::{group_maps, group_positions, FeatureGroup};
pub use layer::{qufex_backward, qufex_forward, QuFeXCache, QuFeXGrads, QuFeXLayer, QuFeXSet};
pub use template::{build_template, build_template_with, EncodingBasis, THETA_LEN};
