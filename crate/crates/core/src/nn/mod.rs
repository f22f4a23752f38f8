//! Classical kernels for the U-Net: each op has a forward and an explicit
//! backward. Image tensors are `batch x channels x height x width`.

mod activation;
mod adam;
mod conv;
mod init;
mod loss;
mod pool;
mod tensor;

pub use activation::{concat_channels, relu, relu_backward, sigmoid, sigmoid_backward, split_channels};
pub use adam::{adam_step, AdamState};
pub use conv::{
    conv2_stride2, conv2d, conv2d_backward, transposed_conv2, transposed_conv2_backward, ConvGrads, Padding,
};
pub use init::glorot_uniform;
pub use loss::{bce_loss, bce_loss_backward, BCE_CLAMP};
pub use pool::{maxpool2, maxpool2_backward, Pooled};
pub use tensor::Tensor;
