use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Unet,
    /// One 8-qubit QuFeX filter fed pairs of feature maps.
    #[serde(rename = "qunet-8-1")]
    Qunet8x1,
    /// Two 4-qubit QuFeX filters fed the whole bottleneck tensor.
    #[serde(rename = "qunet-4-2")]
    Qunet4x2,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Unet, Variant::Qunet8x1, Variant::Qunet4x2];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Unet => "unet",
            Variant::Qunet8x1 => "qunet-8-1",
            Variant::Qunet4x2 => "qunet-4-2",
        }
    }

    pub fn is_quantum(self) -> bool {
        self != Variant::Unet
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Tiny,
    Small,
    Medium,
}

impl Scale {
    pub const ALL: [Scale; 3] = [Scale::Tiny, Scale::Small, Scale::Medium];

    pub fn tag(self) -> &'static str {
        match self {
            Scale::Tiny => "tiny",
            Scale::Small => "small",
            Scale::Medium => "medium",
        }
    }

    pub fn encoder_filters(self) -> [usize; 5] {
        match self {
            Scale::Tiny => [4, 4, 8, 8, 8],
            Scale::Small => [4, 8, 8, 8, 16],
            Scale::Medium => [8, 8, 8, 16, 16],
        }
    }

    pub fn bottleneck_filters(self) -> usize {
        match self {
            Scale::Tiny => 4,
            Scale::Small => 8,
            Scale::Medium => 16,
        }
    }
}

macro_rules! display_and_parse {
    ($ty:ty) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.tag())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                Self::ALL
                    .into_iter()
                    .find(|v| v.tag() == s)
                    .ok_or_else(|| Error::Config(format!("unknown {}: {s}", stringify!($ty).to_lowercase())))
            }
        }
    };
}

display_and_parse!(Variant);
display_and_parse!(Scale);

/// Choices the architecture description leaves open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchOptions {
    /// 3x3 conv + ReLU layers in the classical bottleneck (1 or 2).
    pub bottleneck_convs: usize,
    /// Side of the stride-2 transposed-conv kernel (2 or 3).
    pub upsample_kernel: usize,
    pub upsample_bias: bool,
    /// Close the X-basis encoding of the second QuFeX filter with an H.
    pub x_basis_closing_h: bool,
}

impl Default for ArchOptions {
    fn default() -> Self {
        Self { bottleneck_convs: 2, upsample_kernel: 2, upsample_bias: true, x_basis_closing_h: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub scale: Scale,
    pub encoder_filters: Vec<usize>,
    pub bottleneck_filters: usize,
    pub input_size: usize,
    pub input_channels: usize,
    #[serde(default)]
    pub arch: ArchOptions,
}

impl ModelConfig {
    pub const DEFAULT_INPUT_SIZE: usize = 64;

    pub fn new(variant: Variant, scale: Scale) -> Self {
        Self {
            variant,
            scale,
            encoder_filters: scale.encoder_filters().to_vec(),
            bottleneck_filters: scale.bottleneck_filters(),
            input_size: Self::DEFAULT_INPUT_SIZE,
            input_channels: 3,
            arch: ArchOptions::default(),
        }
    }

    pub fn with_input_size(mut self, size: usize) -> Self {
        self.input_size = size;
        self
    }

    pub fn with_arch(mut self, arch: ArchOptions) -> Self {
        self.arch = arch;
        self
    }

    pub fn tag(&self) -> String {
        format!("{}-{}", self.variant, self.scale)
    }

    /// Side length of the maps entering the bottleneck.
    pub fn bottleneck_size(&self) -> usize {
        self.input_size >> self.encoder_filters.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_filters.as_slice() != self.scale.encoder_filters()
            || self.bottleneck_filters != self.scale.bottleneck_filters()
        {
            return Err(Error::Config(format!(
                "{} scale uses encoder filters {:?} and bottleneck {}",
                self.scale,
                self.scale.encoder_filters(),
                self.scale.bottleneck_filters()
            )));
        }
        if self.variant == Variant::Qunet8x1 && self.scale == Scale::Medium {
            return Err(Error::Unsupported("qunet-8-1 has no medium configuration".into()));
        }
        let depth = self.encoder_filters.len() as u32;
        if self.input_size == 0 || !self.input_size.is_multiple_of(2usize.pow(depth)) {
            return Err(Error::Config(format!(
                "input size {} must be a positive multiple of {} ({depth} pooling stages)",
                self.input_size,
                2usize.pow(depth)
            )));
        }
        if self.input_channels == 0 {
            return Err(Error::Config("input needs at least one channel".into()));
        }
        if !(1..=2).contains(&self.arch.bottleneck_convs) {
            return Err(Error::Config("bottleneck_convs must be 1 or 2".into()));
        }
        if !(2..=3).contains(&self.arch.upsample_kernel) {
            return Err(Error::Config("upsample_kernel must be 2 or 3".into()));
        }
        Ok(())
    }
}
