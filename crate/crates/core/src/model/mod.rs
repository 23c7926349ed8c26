//! The two-stream convolutional decalibration regressor.
//!
//! RGB and depth inputs are processed by separate NiN-block streams (the
//! depth stream thinner), fused by channel concatenation into a NiN-block
//! stack, pooled globally, and regressed through two fully connected
//! layers onto the encoded decalibration vector.

mod train;

pub use train::{
    compare_representations, fixed_val_set, sample_stream, train, validate_model, RepComparison,
    StreamConfig, TrainOptions, TrainReport, ValRecord,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{encode_decalib, DecalibRange, Representation, RigidTransform};
use crate::projection::ImageTensor;
use crate::rng::DetRng;
use crate::tensor::ops::{
    concat_channels, concat_channels_backward, conv2d_backward, conv2d_forward,
    fully_connected_backward, fully_connected_forward, global_maxpool_backward,
    global_maxpool_forward, relu_backward, relu_forward, ConvSpec,
};
use crate::tensor::{adam_step, xavier_init, AdamParams, Parameter, Tensor};

/// One NiN block: a `k x k` convolution followed by 1x1 convolutions, each
/// with a ReLU. `channels[0]` is the leading conv width; the remaining
/// entries configure the 1x1 convs (at least one is required). The leading
/// conv uses `k/2` zero padding, the 1x1 convs none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NinBlockSpec {
    pub kernel: usize,
    pub stride: usize,
    pub channels: Vec<usize>,
}

impl NinBlockSpec {
    pub fn new(kernel: usize, stride: usize, channels: &[usize]) -> Self {
        NinBlockSpec {
            kernel,
            stride,
            channels: channels.to_vec(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.channels.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "{name}: a NiN block needs at least one 1x1 conv after the leading k x k conv"
            )));
        }
        if self.kernel == 0 || self.stride == 0 || self.channels.iter().any(|&c| c == 0) {
            return Err(Error::InvalidConfig(format!(
                "{name}: kernel, stride and channel counts must be positive"
            )));
        }
        Ok(())
    }

    fn out_spatial(&self, (h, w): (usize, usize)) -> (usize, usize) {
        let p = self.kernel / 2;
        let f = |d: usize| (d + 2 * p - self.kernel) / self.stride + 1;
        (f(h), f(w))
    }
}

/// Full architecture description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input_height: usize,
    pub input_width: usize,
    pub rgb_stream: Vec<NinBlockSpec>,
    pub depth_stream: Vec<NinBlockSpec>,
    pub fusion: Vec<NinBlockSpec>,
    /// Hidden width of the first fully connected layer and the output
    /// width; the latter must match the representation.
    pub fc_widths: [usize; 2],
    pub representation: Representation,
    pub balance_factor: f64,
    /// Start the output layer at the encoding of the identity
    /// decalibration instead of zero. Without this, the constant offset on
    /// the quaternion scalar slot (the balance factor) would dominate early
    /// training at small step budgets.
    pub identity_output_bias: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_height: 96,
            input_width: 256,
            rgb_stream: vec![
                NinBlockSpec::new(7, 2, &[24, 24]),
                NinBlockSpec::new(5, 2, &[48, 48]),
                NinBlockSpec::new(3, 2, &[96, 96]),
            ],
            depth_stream: vec![
                NinBlockSpec::new(7, 2, &[12, 12]),
                NinBlockSpec::new(5, 2, &[24, 24]),
                NinBlockSpec::new(3, 2, &[48, 48]),
            ],
            fusion: vec![
                NinBlockSpec::new(3, 2, &[96, 96]),
                NinBlockSpec::new(3, 1, &[64, 64]),
            ],
            fc_widths: [256, 8],
            representation: Representation::DualQuaternion,
            balance_factor: 100.0,
            identity_output_bias: true,
        }
    }
}

impl ModelConfig {
    /// Half-width variant of the default; same structure, about a quarter
    /// of the arithmetic. Used where training time is budgeted.
    pub fn slim() -> Self {
        ModelConfig {
            rgb_stream: vec![
                NinBlockSpec::new(7, 2, &[12, 12]),
                NinBlockSpec::new(5, 2, &[24, 24]),
                NinBlockSpec::new(3, 2, &[48, 48]),
            ],
            depth_stream: vec![
                NinBlockSpec::new(7, 2, &[6, 6]),
                NinBlockSpec::new(5, 2, &[12, 12]),
                NinBlockSpec::new(3, 2, &[24, 24]),
            ],
            fusion: vec![
                NinBlockSpec::new(3, 2, &[48, 48]),
                NinBlockSpec::new(3, 1, &[32, 32]),
            ],
            fc_widths: [128, 8],
            ..ModelConfig::default()
        }
    }

    /// Minimal configuration for gradient checks and fast unit tests.
    pub fn tiny(input_height: usize, input_width: usize) -> Self {
        ModelConfig {
            input_height,
            input_width,
            rgb_stream: vec![NinBlockSpec::new(3, 2, &[4, 4])],
            depth_stream: vec![NinBlockSpec::new(3, 2, &[2, 2])],
            fusion: vec![NinBlockSpec::new(3, 2, &[6, 6])],
            fc_widths: [8, 8],
            ..ModelConfig::default()
        }
    }

    pub fn with_representation(mut self, rep: Representation) -> Self {
        self.representation = rep;
        self.fc_widths[1] = rep.width();
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (i, b) in self.rgb_stream.iter().enumerate() {
            b.validate(&format!("rgb block {i}"))?;
        }
        for (i, b) in self.depth_stream.iter().enumerate() {
            b.validate(&format!("depth block {i}"))?;
        }
        for (i, b) in self.fusion.iter().enumerate() {
            b.validate(&format!("fusion block {i}"))?;
        }
        if self.rgb_stream.is_empty() || self.depth_stream.is_empty() || self.fusion.is_empty() {
            return Err(Error::InvalidConfig(
                "rgb, depth, and fusion stacks must each have at least one block".to_string(),
            ));
        }
        if self.depth_stream.len() != self.rgb_stream.len() {
            return Err(Error::InvalidConfig(format!(
                "depth stream has {} blocks, rgb stream {}; the streams must mirror each other",
                self.depth_stream.len(),
                self.rgb_stream.len()
            )));
        }
        for (i, (d, r)) in self.depth_stream.iter().zip(&self.rgb_stream).enumerate() {
            if d.channels.iter().max() > r.channels.iter().max() {
                return Err(Error::InvalidConfig(format!(
                    "depth block {i} is wider than the rgb block at the same depth"
                )));
            }
        }
        let rgb_dims = stream_out_spatial(
            &self.rgb_stream,
            (self.input_height, self.input_width),
        );
        let depth_dims = stream_out_spatial(
            &self.depth_stream,
            (self.input_height, self.input_width),
        );
        if rgb_dims != depth_dims {
            return Err(Error::InvalidConfig(format!(
                "streams disagree at the concatenation point: rgb {}x{}, depth {}x{}",
                rgb_dims.0, rgb_dims.1, depth_dims.0, depth_dims.1
            )));
        }
        if rgb_dims.0 == 0 || rgb_dims.1 == 0 {
            return Err(Error::InvalidConfig(
                "stream output has a zero spatial dimension".to_string(),
            ));
        }
        if self.fc_widths[0] == 0 {
            return Err(Error::InvalidConfig("fc hidden width must be positive".to_string()));
        }
        if self.fc_widths[1] != self.representation.width() {
            return Err(Error::InvalidConfig(format!(
                "output width {} does not match the {} representation ({} values)",
                self.fc_widths[1],
                self.representation.name(),
                self.representation.width()
            )));
        }
        Ok(())
    }

    /// Layer-by-layer output dimensions, for documentation and stability
    /// tests.
    pub fn shape_trace(&self) -> Result<Vec<(String, Vec<usize>)>> {
        self.validate()?;
        let mut trace = Vec::new();
        let mut push_stream = |name: &str, blocks: &[NinBlockSpec], c_in: usize| {
            let mut dims = (self.input_height, self.input_width);
            let mut c = c_in;
            trace.push((format!("{name}.input"), vec![c, dims.0, dims.1]));
            for (i, b) in blocks.iter().enumerate() {
                dims = b.out_spatial(dims);
                for (j, &ch) in b.channels.iter().enumerate() {
                    c = ch;
                    trace.push((format!("{name}.block{i}.conv{j}"), vec![c, dims.0, dims.1]));
                }
            }
            (c, dims)
        };
        let (rgb_c, dims) = push_stream("rgb", &self.rgb_stream, 3);
        let (depth_c, _) = push_stream("depth", &self.depth_stream, 1);
        let mut c = rgb_c + depth_c;
        let mut dims = dims;
        trace.push(("concat".to_string(), vec![c, dims.0, dims.1]));
        for (i, b) in self.fusion.iter().enumerate() {
            dims = b.out_spatial(dims);
            for (j, &ch) in b.channels.iter().enumerate() {
                c = ch;
                trace.push((format!("fusion.block{i}.conv{j}"), vec![c, dims.0, dims.1]));
            }
        }
        trace.push(("global_maxpool".to_string(), vec![c]));
        trace.push(("fc1".to_string(), vec![self.fc_widths[0]]));
        trace.push(("fc2".to_string(), vec![self.fc_widths[1]]));
        Ok(trace)
    }
}

fn stream_out_spatial(blocks: &[NinBlockSpec], mut dims: (usize, usize)) -> (usize, usize) {
    for b in blocks {
        dims = b.out_spatial(dims);
    }
    dims
}

struct ConvLayer {
    weights: Parameter,
    bias: Parameter,
    spec: ConvSpec,
}

struct FcLayer {
    weights: Parameter,
    bias: Parameter,
}

/// A built regressor: parameters plus the configuration that shaped them.
pub struct Model {
    config: ModelConfig,
    rgb: Vec<ConvLayer>,
    depth: Vec<ConvLayer>,
    fusion: Vec<ConvLayer>,
    fc1: FcLayer,
    fc2: FcLayer,
}

/// Activations cached by a forward pass for the matching backward pass.
pub struct ForwardTrace {
    rgb: Vec<(Tensor, Tensor)>,
    depth: Vec<(Tensor, Tensor)>,
    fusion: Vec<(Tensor, Tensor)>,
    rgb_channels_out: usize,
    fusion_out_shape: Vec<usize>,
    pool_argmax: Vec<usize>,
    pooled: Tensor,
    fc1_preact: Tensor,
    fc2_input: Tensor,
    pub output: Tensor,
}

fn build_stream(
    name: &str,
    blocks: &[NinBlockSpec],
    mut c_in: usize,
    rng: &mut DetRng,
) -> Result<Vec<ConvLayer>> {
    let mut layers = Vec::new();
    for (i, b) in blocks.iter().enumerate() {
        for (j, &c_out) in b.channels.iter().enumerate() {
            let (k, s, p) = if j == 0 {
                (b.kernel, b.stride, b.kernel / 2)
            } else {
                (1, 1, 0)
            };
            let weights = xavier_init(&[c_out, c_in, k, k], rng)?;
            layers.push(ConvLayer {
                weights: Parameter::new(format!("{name}.block{i}.conv{j}.weight"), weights),
                bias: Parameter::new(
                    format!("{name}.block{i}.conv{j}.bias"),
                    Tensor::zeros(&[c_out]),
                ),
                spec: ConvSpec::new(k, s, p),
            });
            c_in = c_out;
        }
    }
    Ok(layers)
}

/// Allocates and initializes a model. Weights are Xavier-initialized from
/// the seed in a pinned order; biases start at zero except, optionally, the
/// output bias (see [`ModelConfig::identity_output_bias`]).
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<Model> {
    config.validate()?;
    let mut rng = DetRng::seed_from_u64(seed);
    let rgb = build_stream("rgb", &config.rgb_stream, 3, &mut rng)?;
    let depth = build_stream("depth", &config.depth_stream, 1, &mut rng)?;
    let fused_channels = config.rgb_stream.last().map(|b| *b.channels.last().expect("validated"))
        .expect("validated")
        + config.depth_stream.last().map(|b| *b.channels.last().expect("validated")).expect("validated");
    let fusion = build_stream("fusion", &config.fusion, fused_channels, &mut rng)?;
    let fusion_out = *config
        .fusion
        .last()
        .and_then(|b| b.channels.last())
        .expect("validated");

    let fc1 = FcLayer {
        weights: Parameter::new("fc1.weight", xavier_init(&[config.fc_widths[0], fusion_out], &mut rng)?),
        bias: Parameter::new("fc1.bias", Tensor::zeros(&[config.fc_widths[0]])),
    };
    let mut fc2_bias = Tensor::zeros(&[config.fc_widths[1]]);
    if config.identity_output_bias {
        let identity = encode_decalib(
            &RigidTransform::identity(),
            config.representation,
            // Any nonzero range encodes the identity to the same slots.
            &DecalibRange::new(1.0, 10.0).expect("static range"),
            config.balance_factor,
        )?;
        fc2_bias.data_mut().copy_from_slice(identity.values());
    }
    let fc2 = FcLayer {
        weights: Parameter::new(
            "fc2.weight",
            xavier_init(&[config.fc_widths[1], config.fc_widths[0]], &mut rng)?,
        ),
        bias: Parameter::new("fc2.bias", fc2_bias),
    };
    Ok(Model {
        config: config.clone(),
        rgb,
        depth,
        fusion,
        fc1,
        fc2,
    })
}

fn stream_forward(layers: &[ConvLayer], input: &Tensor) -> Result<(Tensor, Vec<(Tensor, Tensor)>)> {
    let mut trace = Vec::with_capacity(layers.len());
    let mut x = input.clone();
    for layer in layers {
        let preact = conv2d_forward(&x, &layer.weights.value, &layer.bias.value, &layer.spec)?;
        let out = relu_forward(&preact);
        trace.push((x, preact));
        x = out;
    }
    Ok((x, trace))
}

fn stream_backward(
    layers: &mut [ConvLayer],
    trace: &[(Tensor, Tensor)],
    mut grad: Tensor,
) -> Result<Tensor> {
    for (layer, (input, preact)) in layers.iter_mut().zip(trace.iter()).rev() {
        let grad_pre = relu_backward(preact, &grad);
        let grads = conv2d_backward(input, &layer.weights.value, &layer.spec, &grad_pre)?;
        accumulate(&mut layer.weights.grad, &grads.weights);
        accumulate(&mut layer.bias.grad, &grads.bias);
        grad = grads.input;
    }
    Ok(grad)
}

fn accumulate(acc: &mut Tensor, delta: &Tensor) {
    for (a, d) in acc.data_mut().iter_mut().zip(delta.data()) {
        *a += d;
    }
}

impl Model {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn check_input(&self, name: &'static str, t: &Tensor, channels: usize) -> Result<()> {
        let want = [channels, self.config.input_height, self.config.input_width];
        if t.shape() != want {
            return Err(Error::ShapeMismatch {
                op: name,
                detail: format!("expected {want:?}, got {:?}", t.shape()),
            });
        }
        Ok(())
    }

    /// Runs the network; the returned trace feeds [`Model::backward`].
    pub fn forward(&self, rgb: &Tensor, depth: &Tensor) -> Result<ForwardTrace> {
        self.check_input("forward(rgb)", rgb, 3)?;
        self.check_input("forward(depth)", depth, 1)?;
        let (rgb_out, rgb_trace) = stream_forward(&self.rgb, rgb)?;
        let (depth_out, depth_trace) = stream_forward(&self.depth, depth)?;
        let rgb_channels_out = rgb_out.shape()[0];
        let fused = concat_channels(&rgb_out, &depth_out)?;
        let (fusion_out, fusion_trace) = stream_forward(&self.fusion, &fused)?;
        let (pooled, pool_argmax) = global_maxpool_forward(&fusion_out)?;
        let fc1_preact =
            fully_connected_forward(&pooled, &self.fc1.weights.value, &self.fc1.bias.value)?;
        let fc2_input = relu_forward(&fc1_preact);
        let output =
            fully_connected_forward(&fc2_input, &self.fc2.weights.value, &self.fc2.bias.value)?;
        Ok(ForwardTrace {
            rgb: rgb_trace,
            depth: depth_trace,
            fusion: fusion_trace,
            rgb_channels_out,
            fusion_out_shape: fusion_out.shape().to_vec(),
            pool_argmax,
            pooled,
            fc1_preact,
            fc2_input,
            output,
        })
    }

    /// Accumulates parameter gradients for one forward trace.
    pub fn backward(&mut self, trace: &ForwardTrace, grad_output: &Tensor) -> Result<()> {
        let fc2_grads =
            fully_connected_backward(&trace.fc2_input, &self.fc2.weights.value, grad_output)?;
        accumulate(&mut self.fc2.weights.grad, &fc2_grads.weights);
        accumulate(&mut self.fc2.bias.grad, &fc2_grads.bias);
        let grad_fc1_pre = relu_backward(&trace.fc1_preact, &fc2_grads.input);
        let fc1_grads =
            fully_connected_backward(&trace.pooled, &self.fc1.weights.value, &grad_fc1_pre)?;
        accumulate(&mut self.fc1.weights.grad, &fc1_grads.weights);
        accumulate(&mut self.fc1.bias.grad, &fc1_grads.bias);
        let grad_fusion_out =
            global_maxpool_backward(&trace.fusion_out_shape, &trace.pool_argmax, &fc1_grads.input);
        let grad_fused = stream_backward(&mut self.fusion, &trace.fusion, grad_fusion_out)?;
        let (grad_rgb_out, grad_depth_out) =
            concat_channels_backward(&grad_fused, trace.rgb_channels_out)?;
        stream_backward(&mut self.rgb, &trace.rgb, grad_rgb_out)?;
        stream_backward(&mut self.depth, &trace.depth, grad_depth_out)?;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.visit_params_mut(|p| p.zero_grad());
    }

    pub fn adam_step(&mut self, hp: &AdamParams) {
        self.visit_params_mut(|p| adam_step(p, hp));
    }

    pub fn visit_params(&self, mut f: impl FnMut(&Parameter)) {
        for layer in self.rgb.iter().chain(&self.depth).chain(&self.fusion) {
            f(&layer.weights);
            f(&layer.bias);
        }
        f(&self.fc1.weights);
        f(&self.fc1.bias);
        f(&self.fc2.weights);
        f(&self.fc2.bias);
    }

    pub fn visit_params_mut(&mut self, mut f: impl FnMut(&mut Parameter)) {
        for layer in self
            .rgb
            .iter_mut()
            .chain(self.depth.iter_mut())
            .chain(self.fusion.iter_mut())
        {
            f(&mut layer.weights);
            f(&mut layer.bias);
        }
        f(&mut self.fc1.weights);
        f(&mut self.fc1.bias);
        f(&mut self.fc2.weights);
        f(&mut self.fc2.bias);
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit_params(|p| n += p.value.len());
        n
    }

    /// Network inputs from preprocessed images.
    pub fn to_input(img: &ImageTensor) -> Result<Tensor> {
        Tensor::from_vec(&[img.channels, img.height, img.width], img.data.clone())
    }
}
