use spai_autograd::{nn, Bound, Scalar, Var};

use super::model::{Init, ParamSpec};
use super::{ArchDescriptor, CriticArch, GanError, GeneratorArch};

const SLOPE: f64 = 0.2;
const PIXEL_NORM_EPS: f64 = 1e-8;
const DCGAN_STD: f64 = 0.02;

pub(super) fn generator_layout(arch: &ArchDescriptor) -> Vec<ParamSpec> {
    let GeneratorArch::Dcgan { base_h, base_w, channels, .. } = &arch.generator else {
        unreachable!("dcgan layout on a style descriptor")
    };
    let init = Init::Normal(DCGAN_STD);
    let mut specs = vec![
        ParamSpec::new("g.fc.weight", [channels[0] * base_h * base_w, arch.latent_dim + arch.n_classes], init),
        ParamSpec::new("g.fc.bias", [channels[0] * base_h * base_w], Init::Zeros),
    ];
    for (i, pair) in channels.windows(2).enumerate() {
        specs.push(ParamSpec::new(format!("g.up{i}.weight"), [pair[0], pair[1], 4, 4], init));
        specs.push(ParamSpec::new(format!("g.up{i}.bias"), [pair[1]], Init::Zeros));
    }
    specs
}

pub(super) fn generator_forward<T: Scalar>(
    arch: &ArchDescriptor,
    g: &Bound<T>,
    z: &Var<T>,
    y: Option<&Var<T>>,
) -> Result<Var<T>, GanError> {
    let GeneratorArch::Dcgan { base_h, base_w, channels, .. } = &arch.generator else {
        unreachable!("dcgan forward on a style descriptor")
    };
    let b = z.shape()[0];
    let input = match y {
        Some(y) => Var::concat(&[z.clone(), y.clone()], 1),
        None => z.clone(),
    };
    let mut h = nn::linear(&input, g.get("g.fc.weight"), Some(g.get("g.fc.bias"))).reshape([
        b,
        channels[0],
        *base_h,
        *base_w,
    ]);
    h = nn::pixel_norm(&h, PIXEL_NORM_EPS).leaky_relu(T::of(SLOPE));
    let last = channels.len() - 2;
    for i in 0..=last {
        h = nn::conv_transpose2d(
            &h,
            g.get(&format!("g.up{i}.weight")),
            Some(g.get(&format!("g.up{i}.bias"))),
            (2, 2),
            (1, 1),
            (0, 0),
        );
        h = if i < last { nn::pixel_norm(&h, PIXEL_NORM_EPS).leaky_relu(T::of(SLOPE)) } else { h.tanh() };
    }
    let size = arch.image_size;
    Ok(if h.shape()[2..] == [size.height, size.width] { h } else { nn::center_crop(&h, size.height, size.width) })
}

pub(super) fn critic_layout(arch: &ArchDescriptor) -> Vec<ParamSpec> {
    let c = &arch.critic;
    let init = if c.equalized_lr { Init::Normal(1.0) } else { Init::Normal(DCGAN_STD) };
    let mut specs = Vec::new();
    if c.label_plane {
        let hw = arch.image_size.height * arch.image_size.width;
        // unit scale, like an embedding table, so the plane is as visible
        // to the critic as the pixels are
        specs.push(ParamSpec::new("d.label.weight", [hw, arch.n_classes], Init::Normal(1.0)));
        specs.push(ParamSpec::new("d.label.bias", [hw], Init::Zeros));
    }
    let mut prev = c.in_channels;
    for (i, &ch) in c.channels.iter().enumerate() {
        specs.push(ParamSpec::new(format!("d.conv{i}.weight"), [ch, prev, 4, 4], init));
        specs.push(ParamSpec::new(format!("d.conv{i}.bias"), [ch], Init::Zeros));
        prev = ch;
    }
    specs.push(ParamSpec::new("d.fc.weight", [1, prev * c.final_h * c.final_w], init));
    specs.push(ParamSpec::new("d.fc.bias", [1], Init::Zeros));
    specs
}

fn scaled<T: Scalar>(w: &Var<T>, c: &CriticArch) -> Var<T> {
    if c.equalized_lr {
        let fan_in: usize = w.shape()[1..].iter().product();
        w.mul_scalar(T::of(1.0 / (fan_in as f64).sqrt()))
    } else {
        w.clone()
    }
}

pub(super) fn critic_forward<T: Scalar>(
    arch: &ArchDescriptor,
    d: &Bound<T>,
    x: &Var<T>,
    y: Option<&Var<T>>,
) -> Result<Var<T>, GanError> {
    let c = &arch.critic;
    let b = x.shape()[0];
    let (h, w) = (arch.image_size.height, arch.image_size.width);
    let mut act = x.clone();
    if let Some(y) = y {
        let plane = nn::linear(y, &scaled(d.get("d.label.weight"), c), Some(d.get("d.label.bias")));
        act = Var::concat(&[act, plane.reshape([b, 1, h, w])], 1);
    }
    for i in 0..c.channels.len() {
        let wt = scaled(d.get(&format!("d.conv{i}.weight")), c);
        act = nn::conv2d(&act, &wt, Some(d.get(&format!("d.conv{i}.bias"))), (2, 2), (1, 1)).leaky_relu(T::of(SLOPE));
    }
    let flat = act.reshape([b, act.numel() / b]);
    Ok(nn::linear(&flat, &scaled(d.get("d.fc.weight"), c), Some(d.get("d.fc.bias"))).reshape([b]))
}
