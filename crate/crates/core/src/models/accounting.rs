use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::config::{ArchOptions, ModelConfig, Scale, Variant};
use super::layers::ParamKind;
use super::unet::{build_model, Model, ParamCount};
use crate::error::Result;

/// Published `classical + quantum` parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TableTarget {
    pub variant: Variant,
    pub scale: Scale,
    pub classical: usize,
    pub quantum: usize,
}

pub fn table_targets() -> Vec<TableTarget> {
    use Scale::*;
    use Variant::*;
    [
        (Unet, Tiny, 12085, 0),
        (Unet, Small, 24533, 0),
        (Unet, Medium, 39689, 0),
        (Qunet8x1, Tiny, 12081, 4),
        (Qunet8x1, Small, 24525, 4),
        (Qunet4x2, Tiny, 12657, 8),
        (Qunet4x2, Small, 26829, 8),
        (Qunet4x2, Medium, 39673, 8),
    ]
    .into_iter()
    .map(|(variant, scale, classical, quantum)| TableTarget { variant, scale, classical, quantum })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerCount {
    pub layer: String,
    pub kind: ParamKind,
    pub params: usize,
}

fn layer_counts(model: &Model) -> Vec<LayerCount> {
    let mut out: Vec<LayerCount> = Vec::new();
    for (name, kind, t) in model.params() {
        let layer = name.rsplit_once('.').map_or(name.as_str(), |(l, _)| l).to_string();
        match out.last_mut() {
            Some(last) if last.layer == layer => last.params += t.len(),
            _ => out.push(LayerCount { layer, kind, params: t.len() }),
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ArchCount {
    pub arch: ArchOptions,
    pub count: ParamCount,
    /// Built minus published classical count.
    pub residual: i64,
    pub layers: Vec<LayerCount>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerDelta {
    pub layer: String,
    pub default: usize,
    pub closest: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Reconciliation {
    pub target: TableTarget,
    pub default: ArchCount,
    pub closest: ArchCount,
    /// Layers whose count differs between the default and closest builds.
    pub deltas: Vec<LayerDelta>,
}

impl serde::Serialize for ParamCount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ParamCount", 2)?;
        st.serialize_field("classical", &self.classical)?;
        st.serialize_field("quantum", &self.quantum)?;
        st.end()
    }
}

fn count_arch(target: &TableTarget, arch: ArchOptions) -> Result<ArchCount> {
    let config = ModelConfig::new(target.variant, target.scale).with_arch(arch);
    let model = build_model(&config, 0)?;
    let count = model.count_params();
    Ok(ArchCount {
        arch,
        count,
        residual: count.classical as i64 - target.classical as i64,
        layers: layer_counts(&model),
    })
}

/// Compares the default build with the published count and searches the
/// open architecture choices for the closest match.
pub fn reconcile(target: &TableTarget) -> Result<Reconciliation> {
    let default = count_arch(target, ArchOptions::default())?;
    let mut closest: Option<ArchCount> = None;
    for bottleneck_convs in [2, 1] {
        for upsample_kernel in [2, 3] {
            for upsample_bias in [true, false] {
                let arch = ArchOptions { bottleneck_convs, upsample_kernel, upsample_bias, ..ArchOptions::default() };
                let candidate = count_arch(target, arch)?;
                if closest.as_ref().is_none_or(|c| candidate.residual.abs() < c.residual.abs()) {
                    closest = Some(candidate);
                }
            }
        }
    }
    let closest = closest.expect("search space is non-empty");

    let index: BTreeMap<&str, usize> = closest.layers.iter().map(|l| (l.layer.as_str(), l.params)).collect();
    let mut deltas: Vec<LayerDelta> = default
        .layers
        .iter()
        .filter_map(|l| {
            let other = index.get(l.layer.as_str()).copied().unwrap_or(0);
            (other != l.params).then(|| LayerDelta { layer: l.layer.clone(), default: l.params, closest: other })
        })
        .collect();
    for l in &closest.layers {
        if !default.layers.iter().any(|d| d.layer == l.layer) {
            deltas.push(LayerDelta { layer: l.layer.clone(), default: 0, closest: l.params });
        }
    }
    Ok(Reconciliation { target: *target, default, closest, deltas })
}

impl Reconciliation {
    pub fn render(&self) -> String {
        let t = &self.target;
        let mut s = String::new();
        let arch = |a: &ArchOptions| {
            format!(
                "bottleneck_convs={} upsample_kernel={} upsample_bias={}",
                a.bottleneck_convs, a.upsample_kernel, a.upsample_bias
            )
        };
        let _ = writeln!(s, "{}-{}: published {} + {}", t.variant, t.scale, t.classical, t.quantum);
        let _ = writeln!(
            s,
            "  default  [{}]: {} + {} (residual {:+})",
            arch(&self.default.arch),
            self.default.count.classical,
            self.default.count.quantum,
            self.default.residual
        );
        let _ = writeln!(
            s,
            "  closest  [{}]: {} + {} (residual {:+})",
            arch(&self.closest.arch),
            self.closest.count.classical,
            self.closest.count.quantum,
            self.closest.residual
        );
        for d in &self.deltas {
            let _ = writeln!(
                s,
                "    {:<20} default {:>6}  closest {:>6}  ({:+})",
                d.layer,
                d.default,
                d.closest,
                d.closest as i64 - d.default as i64
            );
        }
        s
    }
}
