//! Empirical domain divergences.
//!
//! The H-divergence estimate of a hypothesis class `H` from samples `S`
//! and `T` is
//!
//! ```text
//! d̂_H = 2 (1 - min_η [ #{x∈S: η(x)=0}/m_s + #{x∈T: η(x)=1}/m_t ])
//! ```
//!
//! and the disagreement distance over pairs is
//! `2 sup_{h,h'} | P_S[h≠h'] - P_T[h≠h'] |`. Over finite classes both are
//! computed exactly with integer numerators over `m_s · m_t`.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::diffcore::{Graph, Optimizer, OptimizerKind, ParamSet, Scalar, Tensor};
use crate::losses::{self, DomainLabel};
use crate::rng::{self, streams};
use crate::{Error, Result};

/// A binary hypothesis over feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Hypothesis {
    Constant(bool),
    /// `x[dim] >= threshold` when `above`, else `x[dim] < threshold`.
    Stump { dim: usize, threshold: f64, above: bool },
    Not(Box<Hypothesis>),
    /// Disagreement of two hypotheses.
    Xor(Box<Hypothesis>, Box<Hypothesis>),
}

impl Hypothesis {
    pub fn eval(&self, x: &[f64]) -> bool {
        match self {
            Self::Constant(c) => *c,
            Self::Stump { dim, threshold, above } => (x[*dim] >= *threshold) == *above,
            Self::Not(h) => !h.eval(x),
            Self::Xor(a, b) => a.eval(x) != b.eval(x),
        }
    }

    pub fn complement(&self) -> Self {
        match self {
            Self::Constant(c) => Self::Constant(!c),
            Self::Stump { dim, threshold, above } => Self::Stump {
                dim: *dim,
                threshold: *threshold,
                above: !above,
            },
            Self::Not(h) => (**h).clone(),
            other => Self::Not(Box::new(other.clone())),
        }
    }

    fn max_dim(&self) -> Option<usize> {
        match self {
            Self::Constant(_) => None,
            Self::Stump { dim, .. } => Some(*dim),
            Self::Not(h) => h.max_dim(),
            Self::Xor(a, b) => a.max_dim().max(b.max_dim()),
        }
    }
}

/// An enumerable set of binary hypotheses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FiniteHypothesisClass {
    pub hypotheses: Vec<Hypothesis>,
}

impl FiniteHypothesisClass {
    pub fn new(hypotheses: Vec<Hypothesis>) -> Self {
        Self { hypotheses }
    }

    /// `{constant 0, constant 1}`.
    pub fn constants() -> Self {
        Self::new(vec![Hypothesis::Constant(false), Hypothesis::Constant(true)])
    }

    /// Axis-aligned stumps on every dimension and grid threshold, both
    /// polarities. Closed under complement.
    pub fn stumps(dims: usize, grid: &[f64]) -> Self {
        let mut hs = Vec::new();
        for dim in 0..dims {
            for &threshold in grid {
                for above in [true, false] {
                    hs.push(Hypothesis::Stump { dim, threshold, above });
                }
            }
        }
        Self::new(hs)
    }

    /// `{h Δ h' : h, h' ∈ self}`.
    pub fn xor_class(&self) -> Self {
        let mut hs = Vec::new();
        for a in &self.hypotheses {
            for b in &self.hypotheses {
                hs.push(Hypothesis::Xor(Box::new(a.clone()), Box::new(b.clone())));
            }
        }
        Self::new(hs)
    }

    /// Union with the complement of every member.
    pub fn symmetric_closure(&self) -> Self {
        let mut hs = self.hypotheses.clone();
        for h in &self.hypotheses {
            let c = h.complement();
            if !hs.contains(&c) {
                hs.push(c);
            }
        }
        Self::new(hs)
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut hs = self.hypotheses.clone();
        hs.extend(other.hypotheses.iter().cloned());
        Self::new(hs)
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    fn labelings(&self, points: &[&[f64]]) -> Vec<Vec<bool>> {
        self.hypotheses
            .iter()
            .map(|h| points.iter().map(|x| h.eval(x)).collect())
            .collect()
    }

    /// Whether every labeling `self` induces on `points` has its complement
    /// in the class too.
    pub fn is_symmetric_on(&self, points: &[&[f64]]) -> bool {
        let labs = self.labelings(points);
        labs.iter().all(|l| {
            let c: Vec<bool> = l.iter().map(|b| !b).collect();
            labs.contains(&c)
        })
    }

    /// Whether every labeling `other` induces on `points` is also induced
    /// by some member of `self`.
    pub fn contains_on(&self, other: &Self, points: &[&[f64]]) -> bool {
        let mine = self.labelings(points);
        other.labelings(points).iter().all(|l| mine.contains(l))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Oracle,
    Neural,
}

/// A divergence value in `[0, 2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceEstimate {
    pub value: f64,
    /// Value before clamping to `[0, 2]`.
    pub raw: f64,
    pub mode: Mode,
    pub m_s: usize,
    pub m_t: usize,
    /// Lemma bracket (held out in neural mode).
    pub bracket: Option<f64>,
    /// Exact `value = 2 * num / (m_s * m_t)` in oracle mode.
    pub exact_num: Option<i128>,
}

impl DivergenceEstimate {
    fn exact(num: i128, m_s: usize, m_t: usize, bracket: Option<f64>) -> Self {
        let den = (m_s * m_t) as f64;
        let raw = 2.0 * num as f64 / den;
        let value = raw.clamp(0.0, 2.0);
        if value != raw {
            log::debug!("divergence clamped from {raw}");
        }
        Self {
            value,
            raw,
            mode: Mode::Oracle,
            m_s,
            m_t,
            bracket,
            exact_num: Some(num.max(0)),
        }
    }
}

fn check_samples(source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<()> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::Usage("divergence needs non-empty samples from both domains".into()));
    }
    let d = source[0].len();
    if let Some(x) = source.iter().chain(target).find(|x| x.len() != d) {
        return Err(Error::Dimension { op: "divergence", axis: "features", expected: d, got: x.len() });
    }
    Ok(())
}

fn check_dims(class: &FiniteHypothesisClass, dims: usize) -> Result<()> {
    match class.hypotheses.iter().filter_map(|h| h.max_dim()).max() {
        Some(d) if d >= dims => Err(Error::Dimension {
            op: "hypothesis",
            axis: "features",
            expected: dims,
            got: d + 1,
        }),
        _ => Ok(()),
    }
}

fn count(sample: &[Vec<f64>], h: &Hypothesis) -> i128 {
    sample.iter().filter(|x| h.eval(x)).count() as i128
}

/// Exact lemma estimate by enumerating `class`.
pub fn h_divergence_oracle(source: &[Vec<f64>], target: &[Vec<f64>], class: &FiniteHypothesisClass) -> Result<DivergenceEstimate> {
    check_samples(source, target)?;
    check_dims(class, source[0].len())?;
    if class.is_empty() {
        return Err(Error::Usage("empty hypothesis class".into()));
    }
    let (ms, mt) = (source.len() as i128, target.len() as i128);
    // 1 - bracket = (s1 * mt - t1 * ms) / (ms * mt)
    let best = class
        .hypotheses
        .iter()
        .map(|h| count(source, h) * mt - count(target, h) * ms)
        .max()
        .expect("non-empty");
    let bracket = 1.0 - best as f64 / (ms * mt) as f64;
    Ok(DivergenceEstimate::exact(best, source.len(), target.len(), Some(bracket)))
}

/// Exact disagreement distance `2 sup |P_S[h≠h'] - P_T[h≠h']|` over all
/// ordered pairs of `class`.
pub fn hdh_divergence_oracle(source: &[Vec<f64>], target: &[Vec<f64>], class: &FiniteHypothesisClass) -> Result<DivergenceEstimate> {
    check_samples(source, target)?;
    check_dims(class, source[0].len())?;
    let (ms, mt) = (source.len() as i128, target.len() as i128);
    let mut best = 0i128;
    let hs = &class.hypotheses;
    for a in hs {
        for b in hs {
            let ds = source.iter().filter(|x| a.eval(x) != b.eval(x)).count() as i128;
            let dt = target.iter().filter(|x| a.eval(x) != b.eval(x)).count() as i128;
            best = best.max((ds * mt - dt * ms).abs());
        }
    }
    Ok(DivergenceEstimate::exact(best, source.len(), target.len(), None))
}

/// Disagreement distance of one fixed pair from its per-sample
/// predictions, e.g. two segmentation heads' per-pixel argmax. A lower
/// bound on the supremum over pairs.
pub fn hdh_divergence_pair(source: (&[u8], &[u8]), target: (&[u8], &[u8]), classes: (usize, usize)) -> Result<DivergenceEstimate> {
    if classes.0 != classes.1 {
        return Err(Error::Usage(format!("hypotheses disagree on class count: {} vs {}", classes.0, classes.1)));
    }
    if source.0.len() != source.1.len() || target.0.len() != target.1.len() {
        return Err(Error::Usage("prediction lengths differ".into()));
    }
    if source.0.is_empty() || target.0.is_empty() {
        return Err(Error::Usage("divergence needs non-empty samples from both domains".into()));
    }
    let dis = |a: &[u8], b: &[u8]| a.iter().zip(b).filter(|(x, y)| x != y).count() as i128;
    let (ms, mt) = (source.0.len(), target.0.len());
    let num = (dis(source.0, source.1) * mt as i128 - dis(target.0, target.1) * ms as i128).abs();
    let mut e = DivergenceEstimate::exact(num, ms, mt, None);
    e.mode = Mode::Neural;
    Ok(e)
}

/// Settings of the trained domain classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralCfg {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for NeuralCfg {
    fn default() -> Self {
        Self {
            hidden: 32,
            epochs: 300,
            lr: 1e-2,
            seed: 0,
        }
    }
}

struct Mlp {
    params: ParamSet<f64>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Mlp {
    fn forward(&self, g: &mut Graph<f64>, vars: &[crate::diffcore::Var], x: &[&Vec<f64>]) -> Result<crate::diffcore::Var> {
        let d = self.mean.len();
        let mut data = Vec::with_capacity(x.len() * d);
        for v in x {
            data.extend(v.iter().zip(&self.mean).zip(&self.std).map(|((a, m), s)| (a - m) / s));
        }
        let input = g.constant(Tensor::from_vec(&[x.len(), d, 1, 1], data)?);
        let h = g.conv2d(input, vars[0], vars[1], 1, 0)?;
        let h = g.leaky_relu(h, 0.2);
        let o = g.conv2d(h, vars[2], vars[3], 1, 0)?;
        Ok(g.sigmoid(o))
    }
}

fn bce(g: &mut Graph<f64>, p: crate::diffcore::Var, label: DomainLabel) -> Result<crate::diffcore::Var> {
    losses::domain_ce(g, p, label)
}

/// Lemma estimate with a trained two-layer domain classifier on a 50/50
/// split; the bracket is measured on the held-out half and the result
/// clamped to `[0, 2]`.
pub fn h_divergence_neural(source: &[Vec<f64>], target: &[Vec<f64>], cfg: &NeuralCfg) -> Result<DivergenceEstimate> {
    check_samples(source, target)?;
    if source.len() < 2 || target.len() < 2 {
        return Err(Error::Usage("neural estimate needs at least 2 samples per domain".into()));
    }
    let d = source[0].len();
    let mut r = rng::stream(cfg.seed, streams::NEURAL_DIV);
    fn split<'a>(data: &'a [Vec<f64>], r: &mut rng::Rng) -> (Vec<&'a Vec<f64>>, Vec<&'a Vec<f64>>) {
        let mut idx: Vec<usize> = (0..data.len()).collect();
        idx.shuffle(r);
        let half = data.len() / 2;
        let train: Vec<&Vec<f64>> = idx[..half].iter().map(|&i| &data[i]).collect();
        let test: Vec<&Vec<f64>> = idx[half..].iter().map(|&i| &data[i]).collect();
        (train, test)
    }
    let (s_train, s_test) = split(source, &mut r);
    let (t_train, t_test) = split(target, &mut r);

    let n = (s_train.len() + t_train.len()) as f64;
    let mut mean = vec![0.0; d];
    for x in s_train.iter().chain(&t_train) {
        for (m, v) in mean.iter_mut().zip(x.iter()) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; d];
    for x in s_train.iter().chain(&t_train) {
        for ((s, v), m) in std.iter_mut().zip(x.iter()).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut std {
        *s = num_traits::Float::sqrt(*s).max(1e-6);
    }

    let mut params = ParamSet::new();
    let scale1 = num_traits::Float::sqrt(6.0 / d as f64);
    let scale2 = num_traits::Float::sqrt(6.0 / cfg.hidden as f64);
    let mut init = |shape: &[usize], scale: f64| -> Result<Tensor<f64>> {
        let numel = shape.iter().product();
        Tensor::from_vec(shape, (0..numel).map(|_| r.gen_range(-scale..scale)).collect())
    };
    params.push("w1", init(&[cfg.hidden, d, 1, 1], scale1)?);
    params.push("b1", Tensor::zeros(&[cfg.hidden]));
    params.push("w2", init(&[1, cfg.hidden, 1, 1], scale2)?);
    params.push("b2", Tensor::zeros(&[1]));
    let mut mlp = Mlp { params, mean, std };
    let mut opt = Optimizer::new(OptimizerKind::adam(0.9, 0.999));
    for epoch in 0..cfg.epochs {
        let mut g = Graph::new();
        let vars = mlp.params.bind(&mut g, true);
        let ps = mlp.forward(&mut g, &vars, &s_train)?;
        let pt = mlp.forward(&mut g, &vars, &t_train)?;
        let ls = bce(&mut g, ps, DomainLabel::Source)?;
        let lt = bce(&mut g, pt, DomainLabel::Target)?;
        let loss = g.add(ls, lt)?;
        let lv = losses::scalar(&g, loss);
        if !lv.is_finite() {
            return Err(Error::NonFinite(format!("domain classifier loss at epoch {epoch}")));
        }
        g.backward(loss)?;
        let grads = mlp.params.grads(&g, &vars);
        opt.step(&mut mlp.params, &grads, cfg.lr)?;
    }

    let mut g = Graph::new();
    let vars = mlp.params.bind(&mut g, false);
    let ps = mlp.forward(&mut g, &vars, &s_test)?;
    let pt = mlp.forward(&mut g, &vars, &t_test)?;
    // η = 1 predicts source
    let s0 = g.value(ps).data().iter().filter(|&&p| p <= 0.5).count() as f64;
    let t1 = g.value(pt).data().iter().filter(|&&p| p > 0.5).count() as f64;
    let bracket = s0 / s_test.len() as f64 + t1 / t_test.len() as f64;
    let raw = 2.0 * (1.0 - bracket);
    Ok(DivergenceEstimate {
        value: raw.clamp(0.0, 2.0),
        raw,
        mode: Mode::Neural,
        m_s: s_test.len(),
        m_t: t_test.len(),
        bracket: Some(bracket),
        exact_num: None,
    })
}

/// Estimable halves of the two target-error bounds for one hypothesis.
/// The joint-hypothesis error term is common to both bounds and is not
/// estimable without target labels, so it is left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub eps_s: f64,
    pub half_d_hd: f64,
    pub half_d_hdh: f64,
    pub ub1_part: f64,
    pub ub2_part: f64,
    /// `d̂_HΔH <= d̂_{H_D}`, decided on exact integers in oracle mode.
    pub holds: bool,
    pub d_hd: DivergenceEstimate,
    pub d_hdh: DivergenceEstimate,
}

/// Builds the report from the source error and both divergences.
pub fn bound_report(eps_s: f64, d_hd: DivergenceEstimate, d_hdh: DivergenceEstimate) -> BoundReport {
    let holds = match (d_hd.exact_num, d_hdh.exact_num) {
        (Some(a), Some(b)) if d_hd.m_s == d_hdh.m_s && d_hd.m_t == d_hdh.m_t => b <= a,
        _ => d_hdh.value <= d_hd.value,
    };
    BoundReport {
        eps_s,
        half_d_hd: d_hd.value / 2.0,
        half_d_hdh: d_hdh.value / 2.0,
        ub1_part: eps_s + d_hd.value / 2.0,
        ub2_part: eps_s + d_hdh.value / 2.0,
        holds,
        d_hd,
        d_hdh,
    }
}

/// Oracle-mode probe. `h` is chosen from `class` by minimum source error on
/// the binary labels; `h_d` must be symmetric and contain the disagreement
/// class of `class` on the sample points.
pub fn bound_probe_oracle(
    source: &[Vec<f64>],
    source_labels: &[bool],
    target: &[Vec<f64>],
    class: &FiniteHypothesisClass,
    h_d: &FiniteHypothesisClass,
) -> Result<BoundReport> {
    check_samples(source, target)?;
    if source_labels.len() != source.len() {
        return Err(Error::Dimension { op: "bound_probe", axis: "labels", expected: source.len(), got: source_labels.len() });
    }
    if class.is_empty() {
        return Err(Error::Usage("empty hypothesis class".into()));
    }
    let points: Vec<&[f64]> = source.iter().chain(target).map(|x| x.as_slice()).collect();
    let xor = class.xor_class();
    if !h_d.is_symmetric_on(&points) {
        return Err(Error::Config("domain classifier class is not symmetric".into()));
    }
    if !h_d.contains_on(&xor, &points) {
        return Err(Error::Config("disagreement class is not contained in the domain classifier class".into()));
    }
    let errors = |h: &Hypothesis| source.iter().zip(source_labels).filter(|(x, &y)| h.eval(x) != y).count();
    let best = class.hypotheses.iter().map(errors).min().expect("non-empty");
    let eps_s = best as f64 / source.len() as f64;
    let d_hd = h_divergence_oracle(source, target, h_d)?;
    let d_hdh = hdh_divergence_oracle(source, target, class)?;
    Ok(bound_report(eps_s, d_hd, d_hdh))
}

/// A random oracle instance: points, labels, a stump class `H` and a
/// domain-classifier class built as the symmetric closure of `HΔH` plus
/// random extra stumps.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub source: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub target: Vec<Vec<f64>>,
    pub class: FiniteHypothesisClass,
    pub h_d: FiniteHypothesisClass,
}

pub fn random_instance(seed: u64, index: u64) -> OracleInstance {
    let mut r = rng::item(seed, streams::NEURAL_DIV, index);
    let dims = r.gen_range(1..=3);
    let shift: f64 = r.gen_range(0.0..0.6);
    let ms = r.gen_range(5..=20);
    let mt = r.gen_range(5..=20);
    let point = |offset: f64, r: &mut rng::Rng| -> Vec<f64> { (0..dims).map(|_| r.gen_range(0.0..1.0) + offset).collect() };
    let source: Vec<Vec<f64>> = (0..ms).map(|_| point(0.0, &mut r)).collect();
    let target: Vec<Vec<f64>> = (0..mt).map(|_| point(shift, &mut r)).collect();
    let labels = source.iter().map(|x| x[0] > 0.5).collect();
    let grid: Vec<f64> = (0..r.gen_range(2..=4)).map(|_| r.gen_range(0.0..1.5)).collect();
    let all = FiniteHypothesisClass::stumps(dims, &grid);
    let mut hs = all.hypotheses.clone();
    hs.shuffle(&mut r);
    hs.truncate(r.gen_range(2..=5));
    let class = FiniteHypothesisClass::new(hs);
    let extras = FiniteHypothesisClass::new(all.hypotheses.into_iter().filter(|_| r.gen_bool(0.3)).collect());
    let h_d = class.xor_class().union(&extras).symmetric_closure();
    OracleInstance { source, labels, target, class, h_d }
}

/// Mean-pooled extractor features of each image, as estimator inputs.
pub fn pooled_features<T: Scalar>(model: &crate::models::CaliModel<T>, images: &[Tensor<f32>]) -> Result<Vec<Vec<f64>>> {
    images
        .iter()
        .map(|img| {
            let f = model.infer_features(&img.cast())?;
            let s = f.shape();
            let (c, hw) = (s[1], s[2] * s[3]);
            Ok((0..c)
                .map(|ch| f.data()[ch * hw..(ch + 1) * hw].iter().map(|v| v.as_f64()).sum::<f64>() / hw as f64)
                .collect())
        })
        .collect()
}

/// Network-scale probe for a trained model. `h` is head C1, `d̂_{H_D}` is
/// the neural estimate on pooled extractor features and `d̂_HΔH` is the
/// disagreement of the two heads' per-pixel predictions.
pub fn bound_probe_neural<T: Scalar>(
    model: &crate::models::CaliModel<T>,
    source: &crate::data::Dataset,
    target: &[Tensor<f32>],
    cfg: &NeuralCfg,
) -> Result<BoundReport> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::Usage("bound probe needs samples from both domains".into()));
    }
    let mut wrong = 0usize;
    let mut pixels = 0usize;
    let (mut s1, mut s2) = (Vec::new(), Vec::new());
    for s in &source.samples {
        let truth = s
            .label
            .as_ref()
            .ok_or_else(|| Error::Usage("bound probe needs a labeled source".into()))?;
        let (p1, p2) = model.infer_probs(&s.image.cast())?;
        let a1 = crate::models::argmax_map(&p1);
        wrong += a1.iter().zip(truth).filter(|(a, b)| a != b).count();
        pixels += truth.len();
        s1.extend(a1);
        s2.extend(crate::models::argmax_map(&p2));
    }
    let (mut t1, mut t2) = (Vec::new(), Vec::new());
    for img in target {
        let (p1, p2) = model.infer_probs(&img.cast())?;
        t1.extend(crate::models::argmax_map(&p1));
        t2.extend(crate::models::argmax_map(&p2));
    }
    let images: Vec<Tensor<f32>> = source.samples.iter().map(|s| s.image.clone()).collect();
    let fs = pooled_features(model, &images)?;
    let ft = pooled_features(model, target)?;
    let d_hd = h_divergence_neural(&fs, &ft, cfg)?;
    let k = model.classes();
    let d_hdh = hdh_divergence_pair((&s1, &s2), (&t1, &t2), (k, k))?;
    Ok(bound_report(wrong as f64 / pixels as f64, d_hd, d_hdh))
}
