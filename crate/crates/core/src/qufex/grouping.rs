use crate::error::{shape_err, Result};
use crate::nn::Tensor;

/// One circuit's worth of input values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGroup {
    pub values: Vec<f64>,
    /// Flat `C x H x W` index each value was read from; qubit `q` reads
    /// `values[q]` and its <Z> is written back to `positions[q]`.
    pub positions: Vec<usize>,
}

impl FeatureGroup {
    /// `(channel, row, col)` of each value.
    pub fn sources(&self, height: usize, width: usize) -> Vec<(usize, usize, usize)> {
        self.positions.iter().map(|&p| (p / (height * width), (p / width) % height, p % width)).collect()
    }
}

/// Flat positions of each window, without reading values.
///
/// Channels `[g*group_size, (g+1)*group_size)` form stream `g`, flattened
/// channel-major then row-major; each stream is cut into consecutive windows
/// of `n_qubits`.
pub fn group_positions(
    channels: usize,
    height: usize,
    width: usize,
    n_qubits: usize,
    group_size: usize,
) -> Result<Vec<Vec<usize>>> {
    if group_size == 0 || !channels.is_multiple_of(group_size) {
        return Err(shape_err!("{channels} channels cannot be split into groups of {group_size}"));
    }
    let stream = group_size * height * width;
    if n_qubits == 0 || !stream.is_multiple_of(n_qubits) {
        return Err(shape_err!(
            "a {group_size}x{height}x{width} channel group ({stream} values) does not split into {n_qubits}-qubit windows"
        ));
    }
    // Grouped channels are contiguous in memory, so every window is a
    // contiguous run of the flattened tensor.
    let total = channels * height * width;
    Ok((0..total).step_by(n_qubits).map(|start| (start..start + n_qubits).collect()).collect())
}

/// Splits one sample (`[C, H, W]` or `[1, C, H, W]`) into feature groups.
pub fn group_maps(input: &Tensor, n_qubits: usize, group_size: usize) -> Result<Vec<FeatureGroup>> {
    let (c, h, w) = match input.shape()[..] {
        [c, h, w] | [1, c, h, w] => (c, h, w),
        _ => return Err(shape_err!("group_maps expects one C x H x W sample, got {:?}", input.shape())),
    };
    let data = input.data();
    Ok(group_positions(c, h, w, n_qubits, group_size)?
        .into_iter()
        .map(|positions| FeatureGroup { values: positions.iter().map(|&p| data[p]).collect(), positions })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(c: usize, h: usize, w: usize) -> Tensor {
        Tensor::new(vec![c, h, w], (0..c * h * w).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn pairwise_grouping_for_eight_qubits() {
        let groups = group_maps(&ramp(8, 2, 2), 8, 2).unwrap();
        assert_eq!(groups.len(), 4);
        assert!(groups.iter().all(|g| g.values.len() == 8));
        // Group 1 holds channels 2 and 3.
        assert_eq!(groups[1].values, (8..16).map(|v| v as f64).collect::<Vec<_>>());
        assert_eq!(groups[1].sources(2, 2)[5], (3, 0, 1));
    }

    #[test]
    fn full_stream_for_four_qubits() {
        let groups = group_maps(&ramp(8, 2, 2), 4, 8).unwrap();
        assert_eq!(groups.len(), 8);
        assert_eq!(groups[3].positions, vec![12, 13, 14, 15]);
    }

    #[test]
    fn divisibility_errors() {
        assert!(group_maps(&ramp(3, 2, 2), 8, 2).is_err());
        assert!(group_maps(&ramp(8, 1, 1), 8, 2).is_err());
    }
}
