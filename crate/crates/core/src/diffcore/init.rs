use alloc::vec::Vec;

use rand::Rng;

use super::{Scalar, Tensor};

/// Uniform samples in `[-sqrt(6/fan_in), sqrt(6/fan_in)]`.
pub fn fan_in_uniform<T: Scalar, R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor<T> {
    let bound = num_traits::Float::sqrt(6.0 / fan_in.max(1) as f64);
    let numel: usize = shape.iter().product();
    let data: Vec<T> = (0..numel)
        .map(|_| T::lit(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches numel")
}

/// Kernel `out×in×k×k` with fan-in initialization and a zero bias.
pub fn init_conv<T: Scalar, R: Rng>(rng: &mut R, c_out: usize, c_in: usize, k: usize) -> (Tensor<T>, Tensor<T>) {
    let kernel = fan_in_uniform(rng, &[c_out, c_in, k, k], c_in * k * k);
    (kernel, Tensor::zeros(&[c_out]))
}

