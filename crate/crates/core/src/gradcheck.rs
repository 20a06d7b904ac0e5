//! Central finite-difference checks of recorded gradients, and a suite of
//! cases covering every operator and training loss.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::diffcore::{Graph, Tensor, Var};
use crate::losses::{self, DomainLabel};
use crate::models::{Bound, CaliModel, ClassifierCfg, DiscriminatorCfg, ExtractorCfg, ModelCfg, Stage};
use crate::rng;
use crate::{Error, Result};

/// Perturbation used for the central differences.
pub const STEP: f64 = 1e-6;

/// Gradients smaller than this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-3;

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let den = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
    (analytic - numeric).abs() / den
}

type Loss = dyn Fn(&mut Graph<f64>, &[Var]) -> Result<Var>;

/// Inputs and a scalar function of them.
pub struct Case {
    pub name: &'static str,
    pub inputs: Vec<Tensor<f64>>,
    /// Coordinates checked per input; `None` checks all of them.
    pub max_coords: Option<usize>,
    pub f: Box<Loss>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckResult {
    pub max_rel_err: f64,
    pub coords: usize,
}

fn evaluate(f: &Loss, inputs: &[Tensor<f64>]) -> Result<f64> {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), false)).collect();
    let out = f(&mut g, &vars)?;
    Ok(g.value(out).data()[0])
}

/// Compares backward-pass gradients of `case` with central differences.
pub fn check(case: &Case, r: &mut rng::Rng) -> Result<CheckResult> {
    let mut g = Graph::new();
    let vars: Vec<Var> = case.inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let out = (case.f)(&mut g, &vars)?;
    if g.value(out).numel() != 1 {
        return Err(Error::Usage("gradient check needs a scalar output".into()));
    }
    g.backward(out)?;
    let mut res = CheckResult { max_rel_err: 0.0, coords: 0 };
    let mut inputs = case.inputs.clone();
    for (i, &v) in vars.iter().enumerate() {
        let analytic = g.grad_or_zeros(v);
        let n = inputs[i].numel();
        let coords: Vec<usize> = match case.max_coords {
            Some(k) if k < n => {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.partial_shuffle(r, k);
                idx.truncate(k);
                idx
            }
            _ => (0..n).collect(),
        };
        for j in coords {
            let x = inputs[i].data()[j];
            inputs[i].data_mut()[j] = x + STEP;
            let up = evaluate(&*case.f, &inputs)?;
            inputs[i].data_mut()[j] = x - STEP;
            let down = evaluate(&*case.f, &inputs)?;
            inputs[i].data_mut()[j] = x;
            let numeric = (up - down) / (2.0 * STEP);
            res.max_rel_err = res.max_rel_err.max(rel_err(analytic[j], numeric));
            res.coords += 1;
        }
    }
    Ok(res)
}

fn uniform(r: &mut rng::Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| r.gen_range(lo..hi)).collect()).expect("shape matches")
}

/// Values in `±[0.1, 1]`, away from the kinks at 0.
fn signed(r: &mut rng::Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = r.gen_range(0.1..1.0);
            if r.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches")
}

/// Reduces `v` to a scalar through a fixed random projection so every
/// output element gets a distinct upstream gradient.
fn project(g: &mut Graph<f64>, v: Var, weights: &Tensor<f64>) -> Result<Var> {
    let w = g.constant(weights.clone());
    g.dot(v, w)
}

fn case(name: &'static str, inputs: Vec<Tensor<f64>>, f: impl Fn(&mut Graph<f64>, &[Var]) -> Result<Var> + 'static) -> Case {
    Case { name, inputs, max_coords: None, f: Box::new(f) }
}

fn projected(
    name: &'static str,
    r: &mut rng::Rng,
    inputs: impl FnOnce(&mut rng::Rng) -> Vec<Tensor<f64>>,
    out_numel: usize,
    f: impl Fn(&mut Graph<f64>, &[Var]) -> Result<Var> + 'static,
) -> Case {
    let inputs = inputs(r);
    let w = uniform(r, &[out_numel], -1.0, 1.0);
    case(name, inputs, move |g, v| {
        let out = f(g, v)?;
        project(g, out, &w)
    })
}

/// A model small enough to check every parameter.
pub fn tiny_model_cfg(classes: usize) -> ModelCfg {
    ModelCfg {
        extractor: ExtractorCfg {
            in_channels: 3,
            stages: vec![Stage { channels: 4, stride: 2 }],
            kernel: 3,
            slope: 0.2,
        },
        classifier: ClassifierCfg { in_channels: 4, hidden: 0, classes, upsample: 2, slope: 0.2 },
        discriminator: DiscriminatorCfg {
            in_channels: 4,
            channels: vec![4, 1],
            kernel: 3,
            stride: 2,
            pad: 1,
            slope: 0.2,
        },
    }
}

fn model_inputs(model: &CaliModel<f64>) -> (Vec<Tensor<f64>>, [usize; 4]) {
    let sets = [&model.g, &model.c1, &model.c2, &model.d];
    let lens = sets.map(|s| s.len());
    let inputs = sets.iter().flat_map(|s| s.params.iter().map(|p| p.value.clone())).collect();
    (inputs, lens)
}

fn split_bound(vars: &[Var], lens: [usize; 4]) -> [Bound; 4] {
    let mut at = 0;
    lens.map(|n| {
        let b = Bound(vars[at..at + n].to_vec());
        at += n;
        b
    })
}

/// Every operator, every loss and the losses through a small model, with
/// inputs drawn from `seed`.
pub fn suite(seed: u64) -> Result<Vec<Case>> {
    let mut r = rng::stream(seed, 0xC4EC);
    let r = &mut r;
    let mut cases = Vec::new();

    let x = uniform(r, &[2, 3, 5, 5], -1.0, 1.0);
    let k = uniform(r, &[4, 3, 3, 3], -0.5, 0.5);
    let b = uniform(r, &[4], -0.5, 0.5);
    cases.push(projected("conv2d k3 s1 p1", r, |_| vec![x, k, b], 2 * 4 * 5 * 5, |g, v| g.conv2d(v[0], v[1], v[2], 1, 1)));
    let x = uniform(r, &[1, 2, 6, 6], -1.0, 1.0);
    let k = uniform(r, &[3, 2, 4, 4], -0.5, 0.5);
    let b = uniform(r, &[3], -0.5, 0.5);
    cases.push(projected("conv2d k4 s2 p2", r, |_| vec![x, k, b], 3 * 4 * 4, |g, v| g.conv2d(v[0], v[1], v[2], 2, 2)));

    let shape = [2, 3, 2, 2];
    let n = 24;
    cases.push(projected("leaky_relu", r, |r| vec![signed(r, &shape)], n, |g, v| Ok(g.leaky_relu(v[0], 0.2))));
    cases.push(projected("sigmoid", r, |r| vec![uniform(r, &shape, -4.0, 4.0)], n, |g, v| Ok(g.sigmoid(v[0]))));
    cases.push(projected("softmax", r, |r| vec![uniform(r, &shape, -3.0, 3.0)], n, |g, v| g.softmax(v[0], 1)));
    cases.push(projected("log_clamped", r, |r| vec![uniform(r, &shape, 0.05, 2.0)], n, |g, v| g.log_clamped(v[0], 1e-7)));
    let (a, bb) = (uniform(r, &shape, -1.0, 1.0), uniform(r, &shape, -1.0, 1.0));
    cases.push(projected("add", r, |_| vec![a.clone(), bb.clone()], n, |g, v| g.add(v[0], v[1])));
    cases.push(projected("sub", r, |_| vec![a.clone(), bb.clone()], n, |g, v| g.sub(v[0], v[1])));
    cases.push(projected("mul", r, |_| vec![a.clone(), bb], n, |g, v| g.mul(v[0], v[1])));
    cases.push(projected("div", r, |r| vec![a, uniform(r, &shape, 0.5, 2.0)], n, |g, v| g.div(v[0], v[1])));
    cases.push(projected("affine", r, |r| vec![uniform(r, &shape, -1.0, 1.0)], n, |g, v| Ok(g.affine(v[0], -1.7, 0.3))));
    cases.push(projected("scale", r, |r| vec![uniform(r, &shape, -1.0, 1.0)], n, |g, v| Ok(g.scale(v[0], 2.5))));
    cases.push(projected("abs", r, |r| vec![signed(r, &shape)], n, |g, v| Ok(g.abs(v[0]))));
    cases.push(projected("sqrt", r, |r| vec![uniform(r, &shape, 0.2, 3.0)], n, |g, v| Ok(g.sqrt(v[0]))));
    cases.push(projected("upsample_nearest", r, |r| vec![uniform(r, &shape, -1.0, 1.0)], n * 9, |g, v| g.upsample_nearest(v[0], 3)));
    let w = uniform(r, &shape, -1.0, 1.0);
    cases.push(case("sum", vec![uniform(r, &shape, -1.0, 1.0)], move |g, v| {
        let c = g.constant(w.clone());
        let m = g.mul(v[0], c)?;
        Ok(g.sum(m))
    }));
    let w = uniform(r, &shape, -1.0, 1.0);
    cases.push(case("mean", vec![uniform(r, &shape, -1.0, 1.0)], move |g, v| {
        let c = g.constant(w.clone());
        let m = g.mul(v[0], c)?;
        Ok(g.mean(m))
    }));
    cases.push(case("dot", vec![uniform(r, &[7], -1.0, 1.0), uniform(r, &[7], -1.0, 1.0)], |g, v| g.dot(v[0], v[1])));
    cases.push(projected("concat", r, |r| vec![uniform(r, &[2, 2], -1.0, 1.0), uniform(r, &[3], -1.0, 1.0)], 7, |g, v| g.concat(v)));

    // losses, fed through the activations that produce their inputs
    let (kc, h, wd) = (3, 4, 4);
    let labels: Vec<u8> = (0..h * wd).map(|_| r.gen_range(0..kc as u8)).collect();
    let y = losses::one_hot::<f64>(&labels, kc, h, wd)?;
    let z1 = uniform(r, &[1, kc, h, wd], -2.0, 2.0);
    let z2 = uniform(r, &[1, kc, h, wd], -2.0, 2.0);
    cases.push(case("seg_loss", vec![z1.clone(), z2.clone()], move |g, v| {
        let p1 = g.softmax(v[0], 1)?;
        let p2 = g.softmax(v[1], 1)?;
        let yv = g.constant(y.clone());
        losses::seg_loss(g, p1, p2, yv)
    }));
    cases.push(case("discrepancy", vec![z1, z2], |g, v| {
        let p1 = g.softmax(v[0], 1)?;
        let p2 = g.softmax(v[1], 1)?;
        losses::discrepancy(g, p1, p2)
    }));
    for (name, label) in [("domain_ce source", DomainLabel::Source), ("domain_ce target", DomainLabel::Target)] {
        cases.push(case(name, vec![uniform(r, &[2, 1, 3, 3], -3.0, 3.0)], move |g, v| {
            let d = g.sigmoid(v[0]);
            losses::domain_ce(g, d, label)
        }));
    }
    cases.push(case("v1", vec![uniform(r, &[1, 1, 3, 3], -3.0, 3.0), uniform(r, &[1, 1, 3, 3], -3.0, 3.0)], |g, v| {
        let ds = g.sigmoid(v[0]);
        let dt = g.sigmoid(v[1]);
        let ce_s = losses::domain_ce(g, ds, DomainLabel::Source)?;
        let ce_t = losses::domain_ce(g, dt, DomainLabel::Target)?;
        let s = g.add(ce_s, ce_t)?;
        Ok(g.scale(s, -1.0))
    }));
    let wr_inputs = vec![
        uniform(r, &[3, 2, 1, 1], -1.0, 1.0),
        uniform(r, &[3], -1.0, 1.0),
        uniform(r, &[3, 2, 1, 1], -1.0, 1.0),
        uniform(r, &[3], -1.0, 1.0),
    ];
    cases.push(case("weight_reg", wr_inputs, |g, v| losses::weight_reg(g, &v[..2], &v[2..])));

    // the same losses through G, C1, C2 and D
    let cfg = tiny_model_cfg(kc);
    let model = CaliModel::<f64>::build(cfg, seed)?;
    let (params, lens) = model_inputs(&model);
    let img = Tensor::from_vec(&[1, 3, 8, 8], (0..192).map(|_| r.gen_range(0.0..1.0)).collect())?;
    let img_t = Tensor::from_vec(&[1, 3, 8, 8], (0..192).map(|_| r.gen_range(0.0..1.0)).collect())?;
    let labels: Vec<u8> = (0..64).map(|_| r.gen_range(0..kc as u8)).collect();
    let y = losses::one_hot::<f64>(&labels, kc, 8, 8)?;
    let m = model.clone();
    let (xi, yi) = (img.clone(), y);
    cases.push(Case {
        name: "model seg_loss + weight_reg",
        inputs: params.clone(),
        max_coords: None,
        f: Box::new(move |g, v| {
            let [bg, b1, b2, _] = split_bound(v, lens);
            let x = g.constant(xi.clone());
            let f = m.features(g, &bg, x)?;
            let p1 = m.classify(g, &b1, f)?;
            let p2 = m.classify(g, &b2, f)?;
            let yv = g.constant(yi.clone());
            let seg = losses::seg_loss(g, p1, p2, yv)?;
            let wr = losses::weight_reg(g, &b1.0, &b2.0)?;
            g.add(seg, wr)
        }),
    });
    let m = model.clone();
    let xt = img_t.clone();
    cases.push(Case {
        name: "model v2",
        inputs: params.clone(),
        max_coords: None,
        f: Box::new(move |g, v| {
            let [bg, b1, b2, _] = split_bound(v, lens);
            let x = g.constant(xt.clone());
            let f = m.features(g, &bg, x)?;
            let p1 = m.classify(g, &b1, f)?;
            let p2 = m.classify(g, &b2, f)?;
            losses::discrepancy(g, p1, p2)
        }),
    });
    let m = model;
    cases.push(Case {
        name: "model v1",
        inputs: params,
        max_coords: None,
        f: Box::new(move |g, v| {
            let [bg, _, _, bd] = split_bound(v, lens);
            let xs = g.constant(img.clone());
            let xt = g.constant(img_t.clone());
            let fs = m.features(g, &bg, xs)?;
            let ft = m.features(g, &bg, xt)?;
            let ds = m.discriminate(g, &bd, fs)?;
            let dt = m.discriminate(g, &bd, ft)?;
            let ce_s = losses::domain_ce(g, ds, DomainLabel::Source)?;
            let ce_t = losses::domain_ce(g, dt, DomainLabel::Target)?;
            let s = g.add(ce_s, ce_t)?;
            Ok(g.scale(s, -1.0))
        }),
    });
    Ok(cases)
}
