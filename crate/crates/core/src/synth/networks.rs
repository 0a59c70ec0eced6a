use std::fmt;

use super::SynthError;
use crate::model::{LayerKind, LayerSpec, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    SqueezenetLike,
    ResnetLike,
    MobilenetLike,
    /// Input layer followed by this many 3x3 convolutions.
    Chain(usize),
}

impl Preset {
    /// `depth` is only used by `chain`.
    pub fn from_name(name: &str, depth: usize) -> Result<Preset, SynthError> {
        match name {
            "squeezenet_like" => Ok(Preset::SqueezenetLike),
            "resnet_like" => Ok(Preset::ResnetLike),
            "mobilenet_like" => Ok(Preset::MobilenetLike),
            "chain" => Ok(Preset::Chain(depth)),
            other => Err(SynthError::UnknownPreset(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::SqueezenetLike => "squeezenet_like",
            Preset::ResnetLike => "resnet_like",
            Preset::MobilenetLike => "mobilenet_like",
            Preset::Chain(_) => "chain",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Chain(d) => write!(f, "chain{d}"),
            p => f.write_str(p.name()),
        }
    }
}

#[derive(Default)]
struct Builder {
    layers: Vec<LayerSpec>,
}

impl Builder {
    fn add(&mut self, id: &str, kind: LayerKind, preds: &[&str], out: u64, params: u64) -> String {
        let spec = LayerSpec::new(id, kind, self.layers.len()).after(preds).sizes(out, params);
        self.layers.push(spec);
        id.to_string()
    }

    fn conv(&mut self, id: &str, pred: &str, cin: u64, cout: u64, k: u32, hw: u64) -> String {
        let params = cout * cin * u64::from(k * k) + cout;
        let id = self.add(id, LayerKind::Convolution, &[pred], cout * hw * hw, params);
        self.layers.last_mut().expect("just added").kernel_size = Some(k);
        id
    }

    fn depthwise(&mut self, id: &str, pred: &str, c: u64, hw: u64) -> String {
        let id = self.add(id, LayerKind::DepthwiseConvolution, &[pred], c * hw * hw, c * 9 + c);
        self.layers.last_mut().expect("just added").kernel_size = Some(3);
        id
    }

    fn unary(&mut self, id: &str, kind: LayerKind, pred: &str) -> String {
        let out = self.out_of(pred);
        self.add(id, kind, &[pred], out, 0)
    }

    /// Per-channel bnorm or scale layer with two parameters per channel.
    fn affine(&mut self, id: &str, kind: LayerKind, pred: &str, channels: u64) -> String {
        let out = self.out_of(pred);
        self.add(id, kind, &[pred], out, 2 * channels)
    }

    fn out_of(&self, id: &str) -> u64 {
        self.layers.iter().find(|l| l.id == id).map_or(0, |l| l.output_size)
    }

    fn build(self, name: &str) -> NetworkSpec {
        NetworkSpec::new(name, self.layers)
    }
}

fn squeezenet_like() -> NetworkSpec {
    let mut b = Builder::default();
    let x = b.add("data", LayerKind::Input, &[], 3 * 224 * 224, 0);
    let x = b.conv("conv1", &x, 3, 64, 3, 112);
    let x = b.unary("relu_conv1", LayerKind::Activation, &x);
    let mut x = b.add("pool1", LayerKind::Pooling, &[&x], 64 * 56 * 56, 0);
    let mut cin = 64;
    let mut hw = 56;
    let fires: [(u32, u64, u64); 8] =
        [(2, 16, 64), (3, 16, 64), (4, 32, 128), (5, 32, 128), (6, 48, 192), (7, 48, 192), (8, 64, 256), (9, 64, 256)];
    for (n, squeeze, expand) in fires {
        let s = b.conv(&format!("fire{n}_squeeze1x1"), &x, cin, squeeze, 1, hw);
        let s = b.unary(&format!("fire{n}_relu_squeeze1x1"), LayerKind::Activation, &s);
        let e1 = b.conv(&format!("fire{n}_expand1x1"), &s, squeeze, expand, 1, hw);
        let e1 = b.unary(&format!("fire{n}_relu_expand1x1"), LayerKind::Activation, &e1);
        let e3 = b.conv(&format!("fire{n}_expand3x3"), &s, squeeze, expand, 3, hw);
        let e3 = b.unary(&format!("fire{n}_relu_expand3x3"), LayerKind::Activation, &e3);
        x = b.add(&format!("fire{n}_concat"), LayerKind::Concat, &[&e1, &e3], 2 * expand * hw * hw, 0);
        cin = 2 * expand;
        if n == 3 || n == 5 {
            hw /= 2;
            x = b.add(&format!("pool{n}"), LayerKind::Pooling, &[&x], cin * hw * hw, 0);
        }
    }
    let x = b.conv("conv10", &x, cin, 1000, 1, hw);
    let x = b.unary("relu_conv10", LayerKind::Activation, &x);
    let x = b.add("pool10", LayerKind::Pooling, &[&x], 1000, 0);
    b.add("prob", LayerKind::Softmax, &[&x], 1000, 0);
    b.build("squeezenet_like")
}

fn resnet_like() -> NetworkSpec {
    let mut b = Builder::default();
    let x = b.add("data", LayerKind::Input, &[], 3 * 224 * 224, 0);
    let x = b.conv("conv1", &x, 3, 64, 7, 112);
    let x = b.affine("bn_conv1", LayerKind::Bnorm, &x, 64);
    let x = b.affine("scale_conv1", LayerKind::Scale, &x, 64);
    let x = b.unary("conv1_relu", LayerKind::Activation, &x);
    let mut x = b.add("pool1", LayerKind::Pooling, &[&x], 64 * 56 * 56, 0);
    let mut cin = 64;
    let stages: [(u64, u64, u64); 4] = [(64, 256, 56), (128, 512, 28), (256, 1024, 14), (512, 2048, 7)];
    for (s, (mid, out, hw)) in stages.into_iter().enumerate() {
        for blk in ["a", "b"] {
            let name = format!("res{}{blk}", s + 2);
            let shortcut = if blk == "a" {
                let p = b.conv(&format!("{name}_branch1"), &x, cin, out, 1, hw);
                let p = b.affine(&format!("bn{name}_branch1"), LayerKind::Bnorm, &p, out);
                b.affine(&format!("scale{name}_branch1"), LayerKind::Scale, &p, out)
            } else {
                x.clone()
            };
            let mut y = x.clone();
            let mut c = cin;
            for (part, (k, co)) in [("2a", (1, mid)), ("2b", (3, mid)), ("2c", (1, out))] {
                y = b.conv(&format!("{name}_branch{part}"), &y, c, co, k, hw);
                y = b.affine(&format!("bn{name}_branch{part}"), LayerKind::Bnorm, &y, co);
                y = b.affine(&format!("scale{name}_branch{part}"), LayerKind::Scale, &y, co);
                if part != "2c" {
                    y = b.unary(&format!("{name}_branch{part}_relu"), LayerKind::Activation, &y);
                }
                c = co;
            }
            let sum = b.add(&name, LayerKind::Elementwise, &[&shortcut, &y], out * hw * hw, 0);
            x = b.unary(&format!("{name}_relu"), LayerKind::Activation, &sum);
            cin = out;
        }
    }
    let x = b.add("pool5", LayerKind::Pooling, &[&x], cin, 0);
    let x = b.add("fc1000", LayerKind::FullyConnected, &[&x], 1000, cin * 1000 + 1000);
    b.add("prob", LayerKind::Softmax, &[&x], 1000, 0);
    b.build("resnet_like")
}

fn mobilenet_like() -> NetworkSpec {
    let mut b = Builder::default();
    let x = b.add("data", LayerKind::Input, &[], 3 * 224 * 224, 0);
    let x = b.conv("conv1", &x, 3, 32, 3, 112);
    let mut x = b.unary("relu1", LayerKind::Activation, &x);
    let blocks: [(u64, u64, u64); 13] = [
        (32, 64, 112),
        (64, 128, 56),
        (128, 128, 56),
        (128, 256, 28),
        (256, 256, 28),
        (256, 512, 14),
        (512, 512, 14),
        (512, 512, 14),
        (512, 512, 14),
        (512, 512, 14),
        (512, 512, 14),
        (512, 1024, 7),
        (1024, 1024, 7),
    ];
    for (i, (cin, cout, hw)) in blocks.into_iter().enumerate() {
        let n = i + 2;
        let d = b.depthwise(&format!("conv{n}_dw"), &x, cin, hw);
        let d = b.unary(&format!("relu{n}_dw"), LayerKind::Activation, &d);
        let p = b.conv(&format!("conv{n}_sep"), &d, cin, cout, 1, hw);
        x = b.unary(&format!("relu{n}_sep"), LayerKind::Activation, &p);
    }
    let x = b.add("pool6", LayerKind::Pooling, &[&x], 1024, 0);
    let x = b.add("fc7", LayerKind::FullyConnected, &[&x], 1000, 1024 * 1000 + 1000);
    b.add("prob", LayerKind::Softmax, &[&x], 1000, 0);
    b.build("mobilenet_like")
}

fn chain(depth: usize) -> NetworkSpec {
    let mut b = Builder::default();
    let mut x = b.add("data", LayerKind::Input, &[], 64 * 56 * 56, 0);
    for d in 1..=depth {
        x = b.conv(&format!("conv{d}"), &x, 64, 64, 3, 56);
    }
    b.build(&format!("chain{depth}"))
}

/// Fixed topology for each preset.
pub fn gen_network(preset: Preset) -> NetworkSpec {
    match preset {
        Preset::SqueezenetLike => squeezenet_like(),
        Preset::ResnetLike => resnet_like(),
        Preset::MobilenetLike => mobilenet_like(),
        Preset::Chain(d) => chain(d),
    }
}
