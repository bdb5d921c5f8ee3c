use spai_autograd::{nn, Bound, Scalar, Var};

use super::model::{Init, ParamSpec};
use super::{ArchDescriptor, GanError, GeneratorArch, NoiseSource};

const SLOPE: f64 = 0.2;
const DEMOD_EPS: f64 = 1e-8;

fn style_parts(arch: &ArchDescriptor) -> (&[super::DenseSpec], f64, usize, &[usize], &[usize]) {
    match &arch.generator {
        GeneratorArch::Style { mapping, mapping_lr_mul, style_dim, resolutions, channels } => {
            (mapping, *mapping_lr_mul, *style_dim, resolutions, channels)
        }
        GeneratorArch::Dcgan { .. } => unreachable!("style op on a dcgan descriptor"),
    }
}

/// Conv layers of the synthesis network: `(name, in, out, kernel, upsample)`.
fn synthesis_layers(resolutions: &[usize], channels: &[usize]) -> Vec<(String, usize, usize, usize, bool)> {
    let mut layers = vec![(format!("syn.b{}.conv", resolutions[0]), channels[0], channels[0], 3, false)];
    for i in 1..resolutions.len() {
        let r = resolutions[i];
        layers.push((format!("syn.b{r}.conv0"), channels[i - 1], channels[i], 3, true));
        layers.push((format!("syn.b{r}.conv1"), channels[i], channels[i], 3, false));
    }
    layers
}

pub(super) fn generator_layout(arch: &ArchDescriptor) -> Vec<ParamSpec> {
    let (mapping, lr_mul, style_dim, resolutions, channels) = style_parts(arch);
    let mut specs = Vec::new();
    for (i, l) in mapping.iter().enumerate() {
        specs.push(ParamSpec::new(format!("map.fc{i}.weight"), [l.out_features, l.in_features], Init::Normal(1.0 / lr_mul)));
        specs.push(ParamSpec::new(format!("map.fc{i}.bias"), [l.out_features], Init::Zeros));
    }
    specs.push(ParamSpec::new("syn.const", [1, channels[0], 4, 4], Init::Normal(1.0)));
    let mut modulated = |name: &str, cin: usize, cout: usize, k: usize, noise: bool| {
        specs.push(ParamSpec::new(format!("{name}.affine.weight"), [cin, style_dim], Init::Normal(1.0)));
        specs.push(ParamSpec::new(format!("{name}.affine.bias"), [cin], Init::Ones));
        specs.push(ParamSpec::new(format!("{name}.weight"), [cout, cin, k, k], Init::Normal(1.0)));
        specs.push(ParamSpec::new(format!("{name}.bias"), [cout], Init::Zeros));
        if noise {
            specs.push(ParamSpec::new(format!("{name}.noise_strength"), [1], Init::Zeros));
        }
    };
    for (name, cin, cout, k, _) in synthesis_layers(resolutions, channels) {
        modulated(&name, cin, cout, k, true);
    }
    for (i, &r) in resolutions.iter().enumerate() {
        modulated(&format!("syn.b{r}.torgb"), channels[i], 1, 1, false);
    }
    specs
}

/// Equalized-learning-rate linear layer: weights are stored at unit scale
/// and multiplied by `lr_mul / sqrt(fan_in)` at run time.
fn eq_linear<T: Scalar>(x: &Var<T>, w: &Var<T>, b: &Var<T>, lr_mul: f64) -> Var<T> {
    let fan_in = w.shape()[1] as f64;
    let ws = w.mul_scalar(T::of(lr_mul / fan_in.sqrt()));
    let bs = if lr_mul == 1.0 { b.clone() } else { b.mul_scalar(T::of(lr_mul)) };
    nn::linear(x, &ws, Some(&bs))
}

fn lrelu_gain<T: Scalar>(x: &Var<T>) -> Var<T> {
    x.leaky_relu(T::of(SLOPE)).mul_scalar(T::of(std::f64::consts::SQRT_2))
}

pub(super) fn mapping_forward<T: Scalar>(arch: &ArchDescriptor, g: &Bound<T>, z: &Var<T>) -> Result<Var<T>, GanError> {
    let (mapping, lr_mul, ..) = style_parts(arch);
    let mut h = nn::pixel_norm(z, 1e-8);
    for i in 0..mapping.len() {
        h = lrelu_gain(&eq_linear(&h, g.get(&format!("map.fc{i}.weight")), g.get(&format!("map.fc{i}.bias")), lr_mul));
    }
    Ok(h)
}

/// Modulated convolution, expressed as input scaling, a shared convolution
/// and per-output demodulation.
fn modulated_conv<T: Scalar>(g: &Bound<T>, name: &str, x: &Var<T>, w: &Var<T>, demodulate: bool) -> Var<T> {
    let b = x.shape()[0];
    let weight = g.get(&format!("{name}.weight"));
    let ws = weight.shape().to_vec();
    let (cout, cin, k) = (ws[0], ws[1], ws[2]);
    let style = eq_linear(w, g.get(&format!("{name}.affine.weight")), g.get(&format!("{name}.affine.bias")), 1.0);
    let weight = weight.mul_scalar(T::of(1.0 / ((cin * k * k) as f64).sqrt()));
    let pad = k / 2;
    let y = nn::conv2d(&x.mul(&style.reshape([b, cin, 1, 1])), &weight, None, (1, 1), (pad, pad));
    if !demodulate {
        return y;
    }
    let wsq = weight.square().sum_to(&[cout, cin, 1, 1]).reshape([cout, cin]);
    let demod = style.square().matmul_t(&wsq, false, true).add_scalar(T::of(DEMOD_EPS)).powf(T::of(-0.5));
    y.mul(&demod.reshape([b, cout, 1, 1]))
}

fn style_layer<T: Scalar>(
    g: &Bound<T>,
    name: &str,
    x: &Var<T>,
    w: &Var<T>,
    noise: &mut dyn NoiseSource<T>,
) -> Var<T> {
    let y = modulated_conv(g, name, x, w, true);
    let s = y.shape().to_vec();
    let n = Var::constant(noise.noise(s[0], s[2], s[3]));
    let strength = g.get(&format!("{name}.noise_strength")).reshape([1, 1, 1, 1]);
    let bias = g.get(&format!("{name}.bias"));
    lrelu_gain(&y.add(&n.mul(&strength)).add(&bias.reshape([1, s[1], 1, 1])))
}

fn to_rgb<T: Scalar>(g: &Bound<T>, name: &str, x: &Var<T>, w: &Var<T>) -> Var<T> {
    let y = modulated_conv(g, name, x, w, false);
    y.add(&g.get(&format!("{name}.bias")).reshape([1, 1, 1, 1]))
}

pub(super) fn generator_forward<T: Scalar>(
    arch: &ArchDescriptor,
    g: &Bound<T>,
    z: &Var<T>,
    noise: &mut dyn NoiseSource<T>,
) -> Result<Var<T>, GanError> {
    let (.., resolutions, channels) = style_parts(arch);
    let b = z.shape()[0];
    let w = mapping_forward(arch, g, z)?;
    let mut x = g.get("syn.const").expand(&[b, channels[0], 4, 4]);
    let r0 = resolutions[0];
    x = style_layer(g, &format!("syn.b{r0}.conv"), &x, &w, noise);
    let mut rgb = to_rgb(g, &format!("syn.b{r0}.torgb"), &x, &w);
    for &r in &resolutions[1..] {
        x = nn::upsample_nearest2x(&x);
        x = style_layer(g, &format!("syn.b{r}.conv0"), &x, &w, noise);
        x = style_layer(g, &format!("syn.b{r}.conv1"), &x, &w, noise);
        rgb = nn::upsample_nearest2x(&rgb).add(&to_rgb(g, &format!("syn.b{r}.torgb"), &x, &w));
    }
    Ok(rgb.tanh())
}
