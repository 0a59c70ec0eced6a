use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Preset, SynthError};
use crate::model::{
    AttrMatch, ConversionRule, Core, CostTable, DataType, EdgeCost, ImplDescriptor, LayerKind, LayerSpec,
    Layout, NetworkSpec,
};

/// Closed interval of speedups over the reference implementation; a variant
/// with uplift `u` has latency `reference / u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpliftRange {
    pub lo: f64,
    pub hi: f64,
}

impl UpliftRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        UpliftRange { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }
}

/// Distributions the synthetic cost generator draws from. Penalty and
/// memory-overhead values are placeholders, not measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostProfile {
    pub seed: u64,
    pub reference_library: String,
    /// Reference latency per 1e5 work units, by layer kind.
    pub kind_scale_ms: BTreeMap<LayerKind, f64>,
    /// Multiplicative noise on the reference latency.
    pub jitter: UpliftRange,
    pub fast_fp32_uplift: UpliftRange,
    /// INT8 uplift on convolution and fully connected layers.
    pub int8_uplift: UpliftRange,
    /// INT8 uplift on every other layer, where requantisation eats the gain.
    pub int8_other_uplift: UpliftRange,
    pub nhwc_uplift: UpliftRange,
    pub depthwise_uplift: UpliftRange,
    /// Fused convolution+activation kernels run slightly slower than the
    /// plain convolution but make the activation free.
    pub fused_uplift: UpliftRange,
    pub dtype_penalty_ms: f64,
    pub layout_penalty_ms: f64,
    pub conversion_memory_bytes: u64,
    pub int8_accuracy_delta_pp: UpliftRange,
    pub int8_depthwise_accuracy_delta_pp: UpliftRange,
}

impl Default for CostProfile {
    fn default() -> Self {
        use LayerKind::*;
        let kind_scale_ms = [
            (Convolution, 1.0),
            (DepthwiseConvolution, 0.6),
            (FullyConnected, 1.0),
            (Pooling, 0.15),
            (Activation, 0.08),
            (Bnorm, 0.1),
            (Scale, 0.1),
            (Elementwise, 0.1),
            (Concat, 0.05),
            (Reshape, 0.02),
            (Flatten, 0.02),
            (Softmax, 0.1),
            (Input, 0.05),
            (Output, 0.02),
        ]
        .into_iter()
        .collect();
        CostProfile {
            seed: 0,
            reference_library: "reference".into(),
            kind_scale_ms,
            jitter: UpliftRange::new(0.8, 1.2),
            fast_fp32_uplift: UpliftRange::new(1.0, 3.9),
            int8_uplift: UpliftRange::new(1.0, 1.7),
            int8_other_uplift: UpliftRange::new(0.7, 1.0),
            nhwc_uplift: UpliftRange::new(1.0, 1.16),
            depthwise_uplift: UpliftRange::new(1.5, 3.0),
            fused_uplift: UpliftRange::new(0.95, 1.0),
            dtype_penalty_ms: 0.3,
            layout_penalty_ms: 0.2,
            conversion_memory_bytes: 0,
            int8_accuracy_delta_pp: UpliftRange::new(0.0, 0.2),
            int8_depthwise_accuracy_delta_pp: UpliftRange::new(1.0, 4.0),
        }
    }
}

impl CostProfile {
    pub fn for_preset(preset: Preset) -> Self {
        let mut p = CostProfile::default();
        if preset == Preset::SqueezenetLike {
            p.fast_fp32_uplift = UpliftRange::new(1.0, 2.5);
        }
        p
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidProfile(m));
        for (name, r) in [
            ("jitter", self.jitter),
            ("fast_fp32_uplift", self.fast_fp32_uplift),
            ("int8_uplift", self.int8_uplift),
            ("int8_other_uplift", self.int8_other_uplift),
            ("nhwc_uplift", self.nhwc_uplift),
            ("depthwise_uplift", self.depthwise_uplift),
            ("fused_uplift", self.fused_uplift),
        ] {
            if !(r.lo > 0.0 && r.lo <= r.hi && r.hi.is_finite()) {
                return bad(format!("{name} must satisfy 0 < lo <= hi"));
            }
        }
        for (name, r) in [
            ("int8_accuracy_delta_pp", self.int8_accuracy_delta_pp),
            ("int8_depthwise_accuracy_delta_pp", self.int8_depthwise_accuracy_delta_pp),
        ] {
            if !(r.lo >= 0.0 && r.lo <= r.hi && r.hi.is_finite()) {
                return bad(format!("{name} must satisfy 0 <= lo <= hi"));
            }
        }
        if !(self.dtype_penalty_ms >= 0.0 && self.layout_penalty_ms >= 0.0) {
            return bad("penalties must be non-negative".into());
        }
        if let Some((k, _)) = self.kind_scale_ms.iter().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return bad(format!("kind scale for {k} must be finite and non-negative"));
        }
        if self.reference_library.is_empty() {
            return bad("reference_library must not be empty".into());
        }
        Ok(())
    }

    /// Conversion rules for every (dtype, layout) mismatch among FP32/INT8
    /// and NCHW/NHWC: the dtype and layout penalties add up.
    pub fn conversion_rules(&self) -> Vec<ConversionRule> {
        let combos: Vec<(DataType, Layout)> = [DataType::Fp32, DataType::Int8]
            .into_iter()
            .flat_map(|d| [Layout::Nchw, Layout::Nhwc].map(|l| (d, l)))
            .collect();
        let mut rules = Vec::new();
        for &(fd, fl) in &combos {
            for &(td, tl) in &combos {
                if (fd, fl) == (td, tl) {
                    continue;
                }
                let mut penalty = 0.0;
                let mut memory = 0;
                if fd != td {
                    penalty += self.dtype_penalty_ms;
                    memory = self.conversion_memory_bytes;
                }
                if fl != tl {
                    penalty += self.layout_penalty_ms;
                }
                let m = |d, l| AttrMatch { data_type: Some(d), layout: Some(l), core: None };
                let mut rule = ConversionRule::new(m(fd, fl), m(td, tl), EdgeCost::Penalty(penalty));
                rule.memory_bytes = memory;
                rules.push(rule);
            }
        }
        rules
    }
}

/// Implementation id built from its attributes, e.g.
/// `reference_gemm_fp32_nchw`. The core is only included when not CPU.
pub fn impl_id(library: &str, algorithm: &str, config: &str, dt: DataType, layout: Layout, core: Core) -> String {
    let mut parts = vec![library.to_string(), algorithm.to_string()];
    if !config.is_empty() {
        parts.push(config.to_string());
    }
    parts.push(dt.to_string());
    parts.push(layout.to_string());
    if core != Core::Cpu {
        parts.push(core.to_string());
    }
    parts.join("_").to_lowercase()
}

fn is_linear(kind: LayerKind) -> bool {
    matches!(
        kind,
        LayerKind::Convolution | LayerKind::DepthwiseConvolution | LayerKind::FullyConnected
    )
}

fn bytes(dt: DataType) -> u64 {
    match dt {
        DataType::Fp32 => 4,
        DataType::Fp16 => 2,
        DataType::Int8 => 1,
    }
}

struct Variant<'a> {
    library: &'a str,
    algorithm: &'a str,
    config: &'a str,
    dt: DataType,
    layout: Layout,
    latency: f64,
    extra_memory: u64,
    accuracy_delta: f64,
    fuses_next: Option<LayerKind>,
}

fn descriptor(layer: &LayerSpec, v: Variant<'_>) -> ImplDescriptor {
    let mut id = impl_id(v.library, v.algorithm, v.config, v.dt, v.layout, Core::Cpu);
    if v.fuses_next.is_some() {
        id.push_str("_fused");
    }
    ImplDescriptor {
        id,
        library: v.library.into(),
        algorithm: v.algorithm.into(),
        algorithm_config: v.config.into(),
        data_type: v.dt,
        layout: v.layout,
        core: Core::Cpu,
        latency_ms: v.latency,
        memory_bytes: (layer.params_size + layer.output_size) * bytes(v.dt) + v.extra_memory,
        accuracy_delta_pp: v.accuracy_delta,
        fuses_next: v.fuses_next,
    }
}

/// Seeded synthetic cost table. Every layer gets the reference FP32/NCHW
/// implementation plus NHWC and INT8 variants; 3x3 convolutions get a fast
/// FP32 variant, depthwise layers a depthwise-optimised one, and
/// convolutions feeding a single activation a fused FP32 variant.
pub fn gen_cost_table(net: &NetworkSpec, profile: &CostProfile) -> Result<CostTable, SynthError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let consumers = net.consumers();
    let reflib = profile.reference_library.as_str();
    let mut table = CostTable::new(net.name.clone());
    table.reference_library = Some(reflib.to_string());
    table.conversions = profile.conversion_rules();

    for layer in net.sorted() {
        let (out, params) = (layer.output_size as f64, layer.params_size as f64);
        let work = if is_linear(layer.kind) { (out * params).sqrt() + out } else { out };
        let scale = profile.kind_scale_ms.get(&layer.kind).copied().unwrap_or(0.1);
        let reference = scale * work / 1e5 * profile.jitter.sample(&mut rng);
        let alg = if is_linear(layer.kind) { "gemm" } else { "direct" };
        let base = |dt, layout, latency| Variant {
            library: reflib,
            algorithm: alg,
            config: "",
            dt,
            layout,
            latency,
            extra_memory: 0,
            accuracy_delta: 0.0,
            fuses_next: None,
        };
        let mut impls = vec![descriptor(layer, base(DataType::Fp32, Layout::Nchw, reference))];

        let nhwc = reference / profile.nhwc_uplift.sample(&mut rng);
        impls.push(descriptor(layer, base(DataType::Fp32, Layout::Nhwc, nhwc)));

        let int8_range = if is_linear(layer.kind) { profile.int8_uplift } else { profile.int8_other_uplift };
        let int8_latency = reference / int8_range.sample(&mut rng);
        let delta_range = if layer.kind == LayerKind::DepthwiseConvolution {
            profile.int8_depthwise_accuracy_delta_pp
        } else {
            profile.int8_accuracy_delta_pp
        };
        let accuracy_delta = if is_linear(layer.kind) { delta_range.sample(&mut rng) } else { 0.0 };
        impls.push(descriptor(
            layer,
            Variant {
                library: "quant",
                accuracy_delta,
                ..base(DataType::Int8, Layout::Nchw, int8_latency)
            },
        ));

        if layer.kind == LayerKind::Convolution && layer.kernel_size == Some(3) {
            let latency = reference / profile.fast_fp32_uplift.sample(&mut rng);
            impls.push(descriptor(
                layer,
                Variant {
                    library: "fastconv",
                    algorithm: "winograd",
                    config: "f2x2_3x3",
                    // transformed weights and tile buffers
                    extra_memory: layer.params_size * 4 + layer.output_size * 2,
                    ..base(DataType::Fp32, Layout::Nchw, latency)
                },
            ));
        }
        if layer.kind == LayerKind::DepthwiseConvolution {
            let latency = reference / profile.depthwise_uplift.sample(&mut rng);
            impls.push(descriptor(
                layer,
                Variant { library: "dwopt", algorithm: "depthwise", ..base(DataType::Fp32, Layout::Nchw, latency) },
            ));
        }
        let feeds_activation = match consumers[&layer.id].as_slice() {
            [one] => net.layer(one).is_some_and(|l| l.kind == LayerKind::Activation),
            _ => false,
        };
        if is_linear(layer.kind) && feeds_activation {
            let latency = reference / profile.fused_uplift.sample(&mut rng);
            impls.push(descriptor(
                layer,
                Variant {
                    algorithm: "gemm_act",
                    fuses_next: Some(LayerKind::Activation),
                    ..base(DataType::Fp32, Layout::Nchw, latency)
                },
            ));
        }
        for imp in impls {
            table.add_impl(&layer.id, imp);
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DesignSpace;
    use crate::synth::gen_network;

    #[test]
    fn deterministic_per_seed() {
        let net = gen_network(Preset::Chain(3));
        let p = CostProfile { seed: 11, ..Default::default() };
        let a = serde_json::to_string(&gen_cost_table(&net, &p).unwrap()).unwrap();
        let b = serde_json::to_string(&gen_cost_table(&net, &p).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&gen_cost_table(&net, &CostProfile { seed: 12, ..p }).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn resnet_fast_variants_within_bounds() {
        let net = gen_network(Preset::ResnetLike);
        let p = CostProfile::for_preset(Preset::ResnetLike);
        let t = gen_cost_table(&net, &p).unwrap();
        for l in net.layers.iter().filter(|l| l.kind == LayerKind::Convolution && l.kernel_size == Some(3)) {
            let impls = t.impls(&l.id);
            let reference = impls.iter().find(|i| i.id == "reference_gemm_fp32_nchw").unwrap();
            let fast = impls.iter().find(|i| i.algorithm == "winograd").expect("3x3 conv has a fast variant");
            let uplift = reference.latency_ms / fast.latency_ms;
            let r = p.fast_fp32_uplift;
            assert!(uplift >= r.lo - 1e-9 && uplift <= r.hi + 1e-9, "{uplift}");
        }
        assert!(DesignSpace::build(&net, &t).is_ok());
    }

    #[test]
    fn mobilenet_has_no_fast_fp32_on_depthwise() {
        let net = gen_network(Preset::MobilenetLike);
        let t = gen_cost_table(&net, &CostProfile::default()).unwrap();
        for l in net.layers.iter().filter(|l| l.kind == LayerKind::DepthwiseConvolution) {
            assert!(t.impls(&l.id).iter().all(|i| i.algorithm != "winograd"));
            let int8 = t.impls(&l.id).iter().find(|i| i.data_type == DataType::Int8).unwrap();
            assert!(int8.accuracy_delta_pp >= 1.0);
        }
    }

    #[test]
    fn every_layer_has_reference_and_smallest_int8() {
        let net = gen_network(Preset::SqueezenetLike);
        let t = gen_cost_table(&net, &CostProfile::default()).unwrap();
        for l in &net.layers {
            let impls = t.impls(&l.id);
            assert!(impls.iter().any(|i| i.library == "reference"
                && i.data_type == DataType::Fp32
                && i.layout == Layout::Nchw
                && i.fuses_next.is_none()));
            let int8 = impls.iter().filter(|i| i.data_type == DataType::Int8).map(|i| i.memory_bytes).min().unwrap();
            assert!(impls.iter().filter(|i| i.data_type != DataType::Int8).all(|i| i.memory_bytes > int8));
        }
    }

    #[test]
    fn invalid_profile_rejected() {
        let p = CostProfile { int8_uplift: UpliftRange::new(0.0, 1.0), ..Default::default() };
        assert!(matches!(p.validate(), Err(SynthError::InvalidProfile(_))));
        let p = CostProfile { int8_accuracy_delta_pp: UpliftRange::new(-1.0, 1.0), ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn conversion_rules_cover_mismatches() {
        let rules = CostProfile::default().conversion_rules();
        assert_eq!(rules.len(), 12);
        assert!(rules.iter().all(|r| r.penalty_ms.penalty().unwrap() > 0.0));
    }
}
