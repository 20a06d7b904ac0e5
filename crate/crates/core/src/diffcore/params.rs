use alloc::string::String;
use alloc::vec::Vec;

use super::{Graph, Scalar, Tensor, Var};

/// A named trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
}

/// Ordered collection of parameters belonging to one network.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<T> {
    pub params: Vec<Param<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor<T>) {
        self.params.push(Param {
            name: name.into(),
            value,
        });
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Records every parameter as a leaf of `graph`. Frozen bindings
    /// (`trainable == false`) never receive gradients.
    pub fn bind(&self, graph: &mut Graph<T>, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| graph.leaf(p.value.clone(), trainable))
            .collect()
    }

    /// Gradients of bound parameters, zero-filled when absent.
    pub fn grads(&self, graph: &Graph<T>, vars: &[Var]) -> Vec<Vec<T>> {
        vars.iter().map(|&v| graph.grad_or_zeros(v)).collect()
    }

    /// All parameter values flattened in order.
    pub fn flatten(&self) -> Vec<T> {
        self.params
            .iter()
            .flat_map(|p| p.value.data().iter().copied())
            .collect()
    }

    /// FNV-1a hash over names, shapes and the exact bit patterns of every
    /// value. Used to check which parameter groups an update touched.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for p in &self.params {
            eat(p.name.as_bytes());
            for &d in p.value.shape() {
                eat(&(d as u64).to_le_bytes());
            }
            for &v in p.value.data() {
                eat(&v.as_f64().to_bits().to_le_bytes());
            }
        }
        h
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    value: p.value.cast(),
                })
                .collect(),
        }
    }
}
