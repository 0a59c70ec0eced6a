use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::OptimError;
use crate::model::{LayerKind, NetworkSpec};

/// Weights and bias of a convolution or fully connected layer. Weights are
/// channel-major: output channel `c` owns `weights[c*k..(c+1)*k]` where
/// `k = weights.len() / bias.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnormParams {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Parameters keyed by layer id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FoldableParams {
    #[serde(default)]
    pub linear: BTreeMap<String, LinearParams>,
    #[serde(default)]
    pub bnorm: BTreeMap<String, BnormParams>,
    #[serde(default)]
    pub scale: BTreeMap<String, ScaleParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionResult {
    pub network: NetworkSpec,
    pub params: FoldableParams,
    /// (removed layer, layer it was folded into)
    pub fused: Vec<(String, String)>,
}

fn is_linear(kind: LayerKind) -> bool {
    matches!(
        kind,
        LayerKind::Convolution | LayerKind::DepthwiseConvolution | LayerKind::FullyConnected
    )
}

fn check_len(layer: &str, what: &str, got: usize, channels: usize) -> Result<(), OptimError> {
    if got == channels {
        Ok(())
    } else {
        Err(OptimError::ShapeMismatch {
            layer: layer.to_string(),
            detail: format!("{what} has {got} entries for {channels} channels"),
        })
    }
}

/// Folds every bnorm and scale layer into the linear layer feeding it,
/// removes the folded layers, rewires their consumers and renumbers depths.
pub fn fuse_static(net: &NetworkSpec, params: &FoldableParams) -> Result<FusionResult, OptimError> {
    let violations = net.validate();
    if !violations.is_empty() {
        return Err(OptimError::InvalidNetwork(violations));
    }
    let consumers = net.consumers();
    let mut out = params.clone();
    let mut host_of: BTreeMap<String, String> = BTreeMap::new();
    let mut fused = Vec::new();

    for l in net.sorted() {
        if !matches!(l.kind, LayerKind::Bnorm | LayerKind::Scale) {
            continue;
        }
        let non_foldable = || OptimError::NonFoldablePlacement {
            layer: l.id.clone(),
            predecessor: l.predecessors.join(","),
        };
        let [pred] = l.predecessors.as_slice() else {
            return Err(non_foldable());
        };
        let host = host_of.get(pred).unwrap_or(pred).clone();
        let host_kind = net.layer(&host).map(|h| h.kind);
        if !host_kind.is_some_and(is_linear) || consumers[pred].len() != 1 {
            return Err(non_foldable());
        }
        let lin = out.linear.get_mut(&host).ok_or_else(|| OptimError::MissingParams(host.clone()))?;
        let channels = lin.bias.len();
        if channels == 0 || lin.weights.len() % channels != 0 {
            return Err(OptimError::ShapeMismatch {
                layer: host.clone(),
                detail: format!("{} weights for {channels} channels", lin.weights.len()),
            });
        }
        let k = lin.weights.len() / channels;
        if l.kind == LayerKind::Bnorm {
            let bn = out.bnorm.remove(&l.id).ok_or_else(|| OptimError::MissingParams(l.id.clone()))?;
            check_len(&l.id, "mean", bn.mean.len(), channels)?;
            check_len(&l.id, "variance", bn.variance.len(), channels)?;
            for c in 0..channels {
                let denom = bn.variance[c] + bn.epsilon;
                if !(denom > 0.0) {
                    return Err(OptimError::InvalidVariance { layer: l.id.clone(), channel: c });
                }
                let inv = 1.0 / denom.sqrt();
                lin.weights[c * k..(c + 1) * k].iter_mut().for_each(|w| *w *= inv);
                lin.bias[c] = (lin.bias[c] - bn.mean[c]) * inv;
            }
        } else {
            let sc = out.scale.remove(&l.id).ok_or_else(|| OptimError::MissingParams(l.id.clone()))?;
            check_len(&l.id, "gamma", sc.gamma.len(), channels)?;
            check_len(&l.id, "beta", sc.beta.len(), channels)?;
            for c in 0..channels {
                lin.weights[c * k..(c + 1) * k].iter_mut().for_each(|w| *w *= sc.gamma[c]);
                lin.bias[c] = lin.bias[c] * sc.gamma[c] + sc.beta[c];
            }
        }
        host_of.insert(l.id.clone(), host.clone());
        fused.push((l.id.clone(), host));
    }

    let mut layers = Vec::with_capacity(net.depth() - fused.len());
    for l in net.sorted() {
        if host_of.contains_key(&l.id) {
            continue;
        }
        let mut spec = l.clone();
        spec.depth = layers.len();
        let mut preds: Vec<String> = Vec::with_capacity(l.predecessors.len());
        for p in &l.predecessors {
            let p = host_of.get(p).unwrap_or(p);
            if !preds.contains(p) {
                preds.push(p.clone());
            }
        }
        spec.predecessors = preds;
        layers.push(spec);
    }
    Ok(FusionResult { network: NetworkSpec::new(net.name.clone(), layers), params: out, fused })
}
