//! Training objectives.
//!
//! All reductions are per-pixel means so magnitudes do not depend on the
//! image resolution.

use alloc::format;
use alloc::vec;

use crate::diffcore::{Graph, Scalar, Tensor, Var};
use crate::{Error, Result};

/// Clamp applied inside every logarithm.
pub const LOG_EPS: f64 = 1e-7;

/// Domain label of a batch fed to the discriminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainLabel {
    /// Label 1.
    Source,
    /// Label 0.
    Target,
}

impl DomainLabel {
    pub fn from_int(label: i64) -> Result<Self> {
        match label {
            1 => Ok(Self::Source),
            0 => Ok(Self::Target),
            _ => Err(Error::Usage(format!("domain label must be 0 or 1, got {label}"))),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Self::Source => Self::Target,
            Self::Target => Self::Source,
        }
    }
}

/// Loss values observed in one training iteration. Terms that did not run
/// in that iteration are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub iter: u64,
    pub l_seg: Option<f64>,
    pub wr: Option<f64>,
    pub ce_s: Option<f64>,
    pub ce_t: Option<f64>,
    pub v2: Option<f64>,
}

impl LossBreakdown {
    /// `V1 = -(CE_S + CE_T)` when both terms are present.
    pub fn v1(&self) -> Option<f64> {
        Some(-(self.ce_s? + self.ce_t?))
    }
}

/// One-hot `1×K×H×W` encoding of a class map. Labels `>= classes` are a
/// validation error.
pub fn one_hot<T: Scalar>(labels: &[u8], classes: usize, h: usize, w: usize) -> Result<Tensor<T>> {
    if labels.len() != h * w {
        return Err(Error::Dimension { op: "one_hot", axis: "pixels", expected: h * w, got: labels.len() });
    }
    let mut data = vec![T::zero(); classes * h * w];
    for (px, &l) in labels.iter().enumerate() {
        let l = l as usize;
        if l >= classes {
            return Err(Error::Validation(format!("label {l} at pixel {px} is >= class count {classes}")));
        }
        data[l * h * w + px] = T::one();
    }
    Tensor::from_vec(&[1, classes, h, w], data)
}

fn check_one_hot<T: Scalar>(y: &Tensor<T>) -> Result<()> {
    let s = y.shape();
    if s.len() != 4 {
        return Err(Error::Dimension { op: "seg_loss", axis: "rank", expected: 4, got: s.len() });
    }
    let (n, k, hw) = (s[0], s[1], s[2] * s[3]);
    for b in 0..n {
        for px in 0..hw {
            let mut ones = 0;
            for c in 0..k {
                let v = y.data()[(b * k + c) * hw + px];
                if v == T::one() {
                    ones += 1;
                } else if v != T::zero() {
                    return Err(Error::Validation(format!("label map is not one-hot at pixel {px}")));
                }
            }
            if ones != 1 {
                return Err(Error::Validation(format!("label map has {ones} hot classes at pixel {px}")));
            }
        }
    }
    Ok(())
}

/// `-(1/2) * mean_pixels[ y · log(P1 ⊙ P2) ]`, the average of the two
/// heads' cross-entropies.
pub fn seg_loss<T: Scalar>(g: &mut Graph<T>, p1: Var, p2: Var, y: Var) -> Result<Var> {
    check_one_hot(g.value(y))?;
    let s = g.shape(p1).to_vec();
    let pixels = s[0] * s[2] * s[3];
    let prod = g.mul(p1, p2)?;
    let logp = g.log_clamped(prod, LOG_EPS)?;
    let picked = g.mul(y, logp)?;
    let total = g.sum(picked);
    Ok(g.scale(total, -0.5 / pixels as f64))
}

/// Binary cross-entropy of a discriminator map against a constant domain
/// label: `mean(-log d)` for source, `mean(-log(1 - d))` for target.
pub fn domain_ce<T: Scalar>(g: &mut Graph<T>, d: Var, label: DomainLabel) -> Result<Var> {
    let p = match label {
        DomainLabel::Source => d,
        DomainLabel::Target => g.affine(d, -1.0, 1.0),
    };
    let logp = g.log_clamped(p, LOG_EPS)?;
    let m = g.mean(logp);
    Ok(g.scale(m, -1.0))
}

/// `(1/K) * |p - q|_1` averaged over pixels.
pub fn discrepancy<T: Scalar>(g: &mut Graph<T>, p: Var, q: Var) -> Result<Var> {
    let (sp, sq) = (g.shape(p), g.shape(q));
    if sp.get(1) != sq.get(1) {
        return Err(Error::Dimension {
            op: "discrepancy",
            axis: "classes",
            expected: sp.get(1).copied().unwrap_or(0),
            got: sq.get(1).copied().unwrap_or(0),
        });
    }
    let diff = g.sub(p, q)?;
    let a = g.abs(diff);
    // mean over K*pixels == (1/K) * sum_c averaged over pixels
    Ok(g.mean(a))
}

/// Cosine similarity between the flattened parameters of the two heads.
/// A zero-norm head gives a constant 0.
pub fn weight_reg<T: Scalar>(g: &mut Graph<T>, w1: &[Var], w2: &[Var]) -> Result<Var> {
    let a = g.concat(w1)?;
    let b = g.concat(w2)?;
    let (na, nb) = (g.value(a).numel(), g.value(b).numel());
    if na != nb {
        return Err(Error::Dimension { op: "weight_reg", axis: "numel", expected: na, got: nb });
    }
    let ab = g.dot(a, b)?;
    let aa = g.dot(a, a)?;
    let bb = g.dot(b, b)?;
    if g.value(aa).data()[0] == T::zero() || g.value(bb).data()[0] == T::zero() {
        log::warn!("weight regularizer on a zero-norm head; defined as 0");
        return Ok(g.constant(Tensor::scalar(T::zero())));
    }
    let norm = g.mul(aa, bb)?;
    let norm = g.sqrt(norm);
    g.div(ab, norm)
}

/// Plain (non-recorded) discrepancy between two `K×H×W`-layout buffers.
pub fn discrepancy_value(p: &[f32], q: &[f32]) -> f64 {
    let s: f64 = p.iter().zip(q).map(|(a, b)| (*a as f64 - *b as f64).abs()).sum();
    s / p.len().max(1) as f64
}

/// Cosine similarity of two plain vectors; 0 when either is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / num_traits::Float::sqrt(na * nb)
}

/// Scalar value of a one-element var.
pub fn scalar<T: Scalar>(g: &Graph<T>, v: Var) -> f64 {
    g.value(v).data()[0].as_f64()
}
