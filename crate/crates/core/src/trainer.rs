//! The alternating training loop and its baselines.
//!
//! Every iteration runs a supervised step on source data followed by a
//! weight-regularizer step on the two heads. On top of that, depending on
//! the baseline, a domain-alignment step (feature extractor against the
//! discriminator) or a class-alignment step (feature extractor against the
//! head pair) runs. `Cali` alternates the two every `interval` iterations,
//! starting with domain alignment.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::diffcore::{Graph, Optimizer, OptimizerKind, ParamSet, PolySchedule, Scalar, Tensor};
use crate::losses::{self, DomainLabel, LossBreakdown};
use crate::metrics::{self, ConfusionMatrix};
use crate::models::{CaliModel, ModelCfg};
use crate::rng::{self, streams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Source only.
    So,
    /// Domain alignment every iteration.
    Da,
    /// Class alignment every iteration.
    Ca,
    /// Alternating domain and class alignment.
    Cali,
}

impl core::str::FromStr for Baseline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "so" => Ok(Self::So),
            "da" => Ok(Self::Da),
            "ca" => Ok(Self::Ca),
            "cali" => Ok(Self::Cali),
            _ => Err(Error::Usage(format!("unknown baseline {s:?} (expected so, da, ca or cali)"))),
        }
    }
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Self::So => "so",
            Self::Da => "da",
            Self::Ca => "ca",
            Self::Cali => "cali",
        }
    }
}

/// Order of the two domain-alignment sub-steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversarialOrder {
    /// Extractor update, then discriminator update.
    GeneratorFirst,
    /// Discriminator update, then extractor update.
    DiscriminatorFirst,
}

impl core::str::FromStr for AdversarialOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g-first" | "generator-first" => Ok(Self::GeneratorFirst),
            "d-first" | "discriminator-first" => Ok(Self::DiscriminatorFirst),
            _ => Err(Error::Usage(format!("unknown order {s:?} (expected g-first or d-first)"))),
        }
    }
}

/// Adversarial family active in an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Supervised,
    Domain,
    Class,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Self::Supervised => "sup",
            Self::Domain => "domain",
            Self::Class => "class",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_iters: u64,
    pub interval: u64,
    pub baseline: Baseline,
    pub order: AdversarialOrder,
    /// SGD rate of every extractor update and of the heads' supervised
    /// and regularizer steps.
    pub lr: f64,
    /// SGD rate of the heads' class-alignment ascent.
    pub lr_class: f64,
    /// Adam rate of the discriminator.
    pub lr_d: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub poly_power: f64,
    /// Weight of the adversarial term on the extractor.
    pub lambda_adv: f64,
    /// Weight of the discrepancy term on the extractor; the heads' ascent
    /// is scaled by `lr_class` alone.
    pub lambda_v2: f64,
    /// Weight of the cosine regularizer.
    pub lambda_wr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub eval_every: u64,
    /// Trailing samples of each dataset kept out of training for
    /// evaluation.
    pub holdout: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            interval: 100,
            baseline: Baseline::Cali,
            order: AdversarialOrder::GeneratorFirst,
            lr: 2.5e-4,
            lr_class: 1e-3,
            lr_d: 1e-4,
            momentum: 0.9,
            weight_decay: 5e-4,
            beta1: 0.9,
            beta2: 0.99,
            poly_power: 0.9,
            lambda_adv: 1.0,
            lambda_v2: 1.0,
            lambda_wr: 1.0,
            batch_size: 1,
            seed: 0,
            eval_every: 100,
            holdout: 8,
        }
    }
}

impl TrainConfig {
    /// Rates scaled for the small from-scratch networks used on synthetic
    /// data; the defaults assume a pretrained backbone.
    pub fn toy() -> Self {
        Self {
            lr: 1e-2,
            lr_class: 5e-3,
            lr_d: 1e-3,
            lambda_adv: 0.1,
            lambda_v2: 4.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if self.interval == 0 || self.interval > self.max_iters {
            return Err(Error::Config(format!(
                "interval must be in 1..={}, got {}",
                self.max_iters, self.interval
            )));
        }
        for (name, v) in [("lr", self.lr), ("lr_class", self.lr_class), ("lr_d", self.lr_d)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        Ok(())
    }
}

/// `(is_domain, is_class)` at iteration `m` (1-based): domain alignment
/// first, flipping at every `m` divisible by `interval`.
pub fn phase_flags(m: u64, interval: u64) -> (bool, bool) {
    let flips = if interval == 0 { 0 } else { m / interval };
    let domain = flips % 2 == 0;
    (domain, !domain)
}

/// Evaluation snapshot taken every `eval_every` iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub iter: u64,
    pub src_miou: f64,
    pub target_discrepancy: f64,
    pub source_discrepancy: f64,
    /// Held-out accuracy of the discriminator on both domains.
    pub disc_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub iter: u64,
    pub phase: Phase,
    pub losses: LossBreakdown,
    pub eval: Option<EvalPoint>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Curves {
    pub rows: Vec<CurveRow>,
}

impl Curves {
    pub fn evals(&self) -> impl Iterator<Item = &EvalPoint> {
        self.rows.iter().filter_map(|r| r.eval.as_ref())
    }
}

struct Opts<T> {
    g_sup: Optimizer<T>,
    c1_sup: Optimizer<T>,
    c2_sup: Optimizer<T>,
    c1_wr: Optimizer<T>,
    c2_wr: Optimizer<T>,
    g_adv: Optimizer<T>,
    d: Optimizer<T>,
    g_cls: Optimizer<T>,
    c1_cls: Optimizer<T>,
    c2_cls: Optimizer<T>,
}

impl<T: Scalar> Opts<T> {
    fn new(cfg: &TrainConfig) -> Self {
        let sgd = || Optimizer::new(OptimizerKind::sgd(cfg.momentum, cfg.weight_decay));
        Self {
            g_sup: sgd(),
            c1_sup: sgd(),
            c2_sup: sgd(),
            c1_wr: sgd(),
            c2_wr: sgd(),
            g_adv: sgd(),
            d: Optimizer::new(OptimizerKind::adam(cfg.beta1, cfg.beta2)),
            g_cls: sgd(),
            c1_cls: sgd(),
            c2_cls: sgd(),
        }
    }
}

/// A labeled (or unlabeled) mini-batch.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub images: Tensor<T>,
    /// One-hot `N×K×H×W` labels.
    pub labels: Option<Tensor<T>>,
}

/// Stacks samples of `data` into a batch. Labels are attached only when
/// `with_labels` is set and every sample carries one.
pub fn make_batch<T: Scalar>(data: &Dataset, indices: &[usize], with_labels: bool) -> Result<Batch<T>> {
    let (h, w, k) = (data.height, data.width, data.classes);
    let mut img = Vec::with_capacity(indices.len() * 3 * h * w);
    let mut lab = Vec::new();
    let mut labeled = with_labels;
    for &i in indices {
        let s = data
            .samples
            .get(i)
            .ok_or_else(|| Error::Usage(format!("sample {i} out of range")))?;
        img.extend(s.image.data().iter().map(|&v| T::lit(v as f64)));
        match (&s.label, labeled) {
            (Some(l), true) => lab.extend_from_slice(losses::one_hot::<T>(l, k, h, w)?.data()),
            _ => labeled = false,
        }
    }
    let n = indices.len();
    Ok(Batch {
        images: Tensor::from_vec(&[n, 3, h, w], img)?,
        labels: if labeled { Some(Tensor::from_vec(&[n, k, h, w], lab)?) } else { None },
    })
}

/// Cycles over a subset of indices, reshuffling at each epoch.
#[derive(Debug, Clone)]
struct Cycler {
    pool: Vec<usize>,
    order: Vec<usize>,
    pos: usize,
    epoch: u64,
    seed: u64,
    stream: u64,
}

impl Cycler {
    fn new(pool: Vec<usize>, seed: u64, stream: u64) -> Self {
        let mut c = Self {
            order: pool.clone(),
            pool,
            pos: 0,
            epoch: 0,
            seed,
            stream,
        };
        c.shuffle();
        c
    }

    fn shuffle(&mut self) {
        self.order.clone_from(&self.pool);
        let mut r = rng::item(self.seed, self.stream, self.epoch);
        self.order.shuffle(&mut r);
    }

    fn take(&mut self, n: usize) -> Vec<usize> {
        (0..n)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.epoch += 1;
                    self.pos = 0;
                    self.shuffle();
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

fn apply<T: Scalar>(opt: &mut Optimizer<T>, set: &mut ParamSet<T>, graph: &Graph<T>, vars: &[crate::diffcore::Var], lr: f64) -> Result<()> {
    let grads = set.grads(graph, vars);
    opt.step(set, &grads, lr)
}

/// Owns the model, optimizer state and data cursors of one run.
pub struct Trainer<T> {
    pub cfg: TrainConfig,
    pub model: CaliModel<T>,
    source: Dataset,
    target: Dataset,
    opts: Opts<T>,
    src_cycle: Cycler,
    tgt_cycle: Cycler,
    src_eval: Vec<usize>,
    tgt_eval: Vec<usize>,
    schedule: PolySchedule,
    iter: u64,
    pub curves: Curves,
}

impl<T: Scalar> Trainer<T> {
    /// Prepares a run. The target dataset is used without its labels.
    pub fn new(cfg: TrainConfig, model_cfg: ModelCfg, source: &Dataset, target: &Dataset) -> Result<Self> {
        cfg.validate()?;
        let model = CaliModel::build(model_cfg, cfg.seed)?;
        Self::with_model(cfg, model, source, target)
    }

    pub fn with_model(cfg: TrainConfig, model: CaliModel<T>, source: &Dataset, target: &Dataset) -> Result<Self> {
        cfg.validate()?;
        if source.is_empty() || target.is_empty() {
            return Err(Error::Config("source and target datasets must be non-empty".into()));
        }
        if !source.labeled || source.samples.iter().any(|s| s.label.is_none()) {
            return Err(Error::Usage("source dataset must be labeled".into()));
        }
        if source.classes != model.classes() {
            return Err(Error::Config(format!(
                "dataset has {} classes, model has {}",
                source.classes,
                model.classes()
            )));
        }
        let split = |n: usize| -> (Vec<usize>, Vec<usize>) {
            let hold = cfg.holdout.min(n.saturating_sub(1));
            ((0..n - hold).collect(), (n - hold..n).collect())
        };
        let (s_train, s_eval) = split(source.len());
        let (t_train, t_eval) = split(target.len());
        let schedule = PolySchedule::with_power(1.0, cfg.max_iters, cfg.poly_power)?;
        Ok(Self {
            opts: Opts::new(&cfg),
            src_cycle: Cycler::new(s_train, cfg.seed, streams::SHUFFLE_S),
            tgt_cycle: Cycler::new(t_train, cfg.seed, streams::SHUFFLE_T),
            src_eval: s_eval,
            tgt_eval: t_eval,
            schedule,
            iter: 0,
            curves: Curves::default(),
            source: source.clone(),
            target: target.without_labels(),
            model,
            cfg,
        })
    }

    pub fn iteration(&self) -> u64 {
        self.iter
    }

    fn scale(&self) -> f64 {
        self.schedule.lr(self.iter.saturating_sub(1))
    }

    pub fn next_source(&mut self) -> Result<Batch<T>> {
        let idx = self.src_cycle.take(self.cfg.batch_size);
        make_batch(&self.source, &idx, true)
    }

    pub fn next_target(&mut self) -> Result<Batch<T>> {
        let idx = self.tgt_cycle.take(self.cfg.batch_size);
        make_batch(&self.target, &idx, false)
    }

    /// One segmentation descent step on the extractor and both heads,
    /// followed by one regularizer step on the heads only.
    pub fn step_supervised(&mut self, batch: &Batch<T>) -> Result<LossBreakdown> {
        let y = batch
            .labels
            .as_ref()
            .ok_or_else(|| Error::Usage("supervised step needs a labeled batch".into()))?;
        let lr = self.cfg.lr * self.scale();
        let m = &mut self.model;
        let mut g = Graph::new();
        let [bg, b1, b2, _] = m.bind_all(&mut g, [true, true, true, false]);
        let x = g.constant(batch.images.clone());
        let yv = g.constant(y.clone());
        let f = m.features(&mut g, &bg, x)?;
        let p1 = m.classify(&mut g, &b1, f)?;
        let p2 = m.classify(&mut g, &b2, f)?;
        let loss = losses::seg_loss(&mut g, p1, p2, yv)?;
        let l_seg = losses::scalar(&g, loss);
        g.backward(loss)?;
        apply(&mut self.opts.g_sup, &mut m.g, &g, &bg.0, lr)?;
        apply(&mut self.opts.c1_sup, &mut m.c1, &g, &b1.0, lr)?;
        apply(&mut self.opts.c2_sup, &mut m.c2, &g, &b2.0, lr)?;

        let mut g = Graph::new();
        let b1 = m.c1.bind(&mut g, true);
        let b2 = m.c2.bind(&mut g, true);
        let wr = losses::weight_reg(&mut g, &b1, &b2)?;
        let wr_value = losses::scalar(&g, wr);
        let weighted = g.scale(wr, self.cfg.lambda_wr);
        g.backward(weighted)?;
        apply(&mut self.opts.c1_wr, &mut m.c1, &g, &b1, lr)?;
        apply(&mut self.opts.c2_wr, &mut m.c2, &g, &b2, lr)?;
        Ok(LossBreakdown {
            l_seg: Some(l_seg),
            wr: Some(wr_value),
            ..LossBreakdown::default()
        })
    }

    /// Extractor update against a frozen discriminator: target features are
    /// pushed towards the source label.
    fn domain_generator(&mut self, tgt: &Batch<T>) -> Result<()> {
        let lr = self.cfg.lr * self.scale();
        let m = &mut self.model;
        let mut g = Graph::new();
        let [bg, _, _, bd] = m.bind_all(&mut g, [true, false, false, false]);
        let x = g.constant(tgt.images.clone());
        let f = m.features(&mut g, &bg, x)?;
        let d = m.discriminate(&mut g, &bd, f)?;
        let ce = losses::domain_ce(&mut g, d, DomainLabel::Target.flipped())?;
        let loss = g.scale(ce, self.cfg.lambda_adv);
        g.backward(loss)?;
        apply(&mut self.opts.g_adv, &mut m.g, &g, &bg.0, lr)
    }

    /// Discriminator update on `CE_S + CE_T` with the extractor frozen.
    fn domain_discriminator(&mut self, src: &Batch<T>, tgt: &Batch<T>) -> Result<(f64, f64)> {
        let lr = self.cfg.lr_d * self.scale();
        let m = &mut self.model;
        let mut g = Graph::new();
        let [bg, _, _, bd] = m.bind_all(&mut g, [false, false, false, true]);
        let xs = g.constant(src.images.clone());
        let xt = g.constant(tgt.images.clone());
        let fs = m.features(&mut g, &bg, xs)?;
        let ft = m.features(&mut g, &bg, xt)?;
        let ds = m.discriminate(&mut g, &bd, fs)?;
        let dt = m.discriminate(&mut g, &bd, ft)?;
        let ce_s = losses::domain_ce(&mut g, ds, DomainLabel::Source)?;
        let ce_t = losses::domain_ce(&mut g, dt, DomainLabel::Target)?;
        let (vs, vt) = (losses::scalar(&g, ce_s), losses::scalar(&g, ce_t));
        let loss = g.add(ce_s, ce_t)?;
        g.backward(loss)?;
        apply(&mut self.opts.d, &mut m.d, &g, &bd.0, lr)?;
        Ok((vs, vt))
    }

    /// Coarse alignment: extractor against discriminator, in the configured
    /// order.
    pub fn step_domain_alignment(&mut self, src: &Batch<T>, tgt: &Batch<T>) -> Result<LossBreakdown> {
        let (ce_s, ce_t) = match self.cfg.order {
            AdversarialOrder::GeneratorFirst => {
                self.domain_generator(tgt)?;
                self.domain_discriminator(src, tgt)?
            }
            AdversarialOrder::DiscriminatorFirst => {
                let r = self.domain_discriminator(src, tgt)?;
                self.domain_generator(tgt)?;
                r
            }
        };
        Ok(LossBreakdown {
            ce_s: Some(ce_s),
            ce_t: Some(ce_t),
            ..LossBreakdown::default()
        })
    }

    /// Fine alignment: the extractor descends the target head discrepancy,
    /// then the heads ascend it.
    pub fn step_class_alignment(&mut self, _src: &Batch<T>, tgt: &Batch<T>) -> Result<LossBreakdown> {
        let lr_g = self.cfg.lr * self.scale();
        let lr = self.cfg.lr_class * self.scale();
        let lam = self.cfg.lambda_v2;
        let m = &mut self.model;

        let mut g = Graph::new();
        let [bg, b1, b2, _] = m.bind_all(&mut g, [true, false, false, false]);
        let x = g.constant(tgt.images.clone());
        let f = m.features(&mut g, &bg, x)?;
        let p1 = m.classify(&mut g, &b1, f)?;
        let p2 = m.classify(&mut g, &b2, f)?;
        let v2 = losses::discrepancy(&mut g, p1, p2)?;
        let v2_value = losses::scalar(&g, v2);
        let loss = g.scale(v2, lam);
        g.backward(loss)?;
        apply(&mut self.opts.g_cls, &mut m.g, &g, &bg.0, lr_g)?;

        let mut g = Graph::new();
        let [bg, b1, b2, _] = m.bind_all(&mut g, [false, true, true, false]);
        let x = g.constant(tgt.images.clone());
        let f = m.features(&mut g, &bg, x)?;
        let p1 = m.classify(&mut g, &b1, f)?;
        let p2 = m.classify(&mut g, &b2, f)?;
        let v2 = losses::discrepancy(&mut g, p1, p2)?;
        let loss = g.scale(v2, -1.0);
        g.backward(loss)?;
        apply(&mut self.opts.c1_cls, &mut m.c1, &g, &b1.0, lr)?;
        apply(&mut self.opts.c2_cls, &mut m.c2, &g, &b2.0, lr)?;
        Ok(LossBreakdown {
            v2: Some(v2_value),
            ..LossBreakdown::default()
        })
    }

    /// Adversarial family of the next iteration under the configured
    /// baseline.
    pub fn phase_of(&self, m: u64) -> Phase {
        match self.cfg.baseline {
            Baseline::So => Phase::Supervised,
            Baseline::Da => Phase::Domain,
            Baseline::Ca => Phase::Class,
            Baseline::Cali => match phase_flags(m, self.cfg.interval) {
                (true, _) => Phase::Domain,
                _ => Phase::Class,
            },
        }
    }

    /// Runs one full iteration and logs it.
    pub fn step(&mut self) -> Result<&CurveRow> {
        self.iter += 1;
        let m = self.iter;
        let phase = self.phase_of(m);
        let src = self.next_source()?;
        let mut out = self.step_supervised(&src)?;
        if phase != Phase::Supervised {
            let tgt = self.next_target()?;
            let adv = match phase {
                Phase::Domain => self.step_domain_alignment(&src, &tgt)?,
                _ => self.step_class_alignment(&src, &tgt)?,
            };
            out.ce_s = adv.ce_s;
            out.ce_t = adv.ce_t;
            out.v2 = adv.v2;
        }
        out.iter = m;
        for v in [out.l_seg, out.wr, out.ce_s, out.ce_t, out.v2].into_iter().flatten() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("loss at iteration {m}")));
            }
        }
        let eval = if m % self.cfg.eval_every == 0 || m == self.cfg.max_iters {
            Some(self.evaluate()?)
        } else {
            None
        };
        self.curves.rows.push(CurveRow {
            iter: m,
            phase,
            losses: out,
            eval,
        });
        Ok(self.curves.rows.last().expect("just pushed"))
    }

    /// Runs the remaining iterations.
    pub fn run(&mut self) -> Result<()> {
        while self.iter < self.cfg.max_iters {
            self.step()?;
            if self.iter % 500 == 0 {
                log::info!("iteration {}/{}", self.iter, self.cfg.max_iters);
            }
        }
        Ok(())
    }

    pub fn eval_images(&self, domain_target: bool) -> Vec<Tensor<f32>> {
        let (data, idx) = if domain_target {
            (&self.target, &self.tgt_eval)
        } else {
            (&self.source, &self.src_eval)
        };
        idx.iter().map(|&i| data.samples[i].image.clone()).collect()
    }

    /// Source mIoU, both domains' head discrepancy and discriminator
    /// accuracy on the held-out samples.
    pub fn evaluate(&self) -> Result<EvalPoint> {
        let mut cm = ConfusionMatrix::new(self.model.classes());
        for &i in &self.src_eval {
            let s = &self.source.samples[i];
            let pred = self.model.segment(&s.image.cast())?;
            cm.accumulate(&pred, s.label.as_ref().expect("source is labeled"))?;
        }
        let src_imgs = self.eval_images(false);
        let tgt_imgs = self.eval_images(true);
        Ok(EvalPoint {
            iter: self.iter,
            src_miou: cm.miou().unwrap_or(0.0),
            target_discrepancy: metrics::mean_target_discrepancy(&self.model, &tgt_imgs)?,
            source_discrepancy: metrics::mean_target_discrepancy(&self.model, &src_imgs)?,
            disc_accuracy: discriminator_accuracy(&self.model, &src_imgs, &tgt_imgs)?,
        })
    }
}

/// Fraction of images whose mean discriminator output lands on the correct
/// side of 0.5 (source above, target below).
pub fn discriminator_accuracy<T: Scalar>(model: &CaliModel<T>, source: &[Tensor<f32>], target: &[Tensor<f32>]) -> Result<f64> {
    if source.is_empty() && target.is_empty() {
        return Err(Error::Usage("no images to score".into()));
    }
    let mean_d = |img: &Tensor<f32>| -> Result<f64> {
        let d = model.infer_domain(&img.cast())?;
        Ok(d.data().iter().map(|v| v.as_f64()).sum::<f64>() / d.numel() as f64)
    };
    let mut correct = 0usize;
    for img in source {
        if mean_d(img)? > 0.5 {
            correct += 1;
        }
    }
    for img in target {
        if mean_d(img)? < 0.5 {
            correct += 1;
        }
    }
    Ok(correct as f64 / (source.len() + target.len()) as f64)
}

/// Trains a fresh model and returns it with its curves.
pub fn train<T: Scalar>(cfg: &TrainConfig, model_cfg: ModelCfg, source: &Dataset, target: &Dataset) -> Result<(CaliModel<T>, Curves)> {
    let mut t = Trainer::new(cfg.clone(), model_cfg, source, target)?;
    t.run()?;
    Ok((t.model, t.curves))
}

/// Header of the curves CSV.
pub const CURVES_HEADER: &str = "iter,phase,l_seg,wr,ce_s,ce_t,v2_target,src_miou";

/// Formats with six significant digits; `None` is an empty field.
pub fn fmt_sig(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(v) if v == 0.0 => "0".into(),
        Some(v) if !v.is_finite() => format!("{v}"),
        Some(v) => {
            let mag = num_traits::Float::floor(num_traits::Float::log10(num_traits::Float::abs(v))) as i32;
            let decimals = (5 - mag).max(0) as usize;
            if !(-5..=15).contains(&mag) {
                format!("{v:.5e}")
            } else {
                let s = format!("{v:.decimals$}");
                if s.contains('.') {
                    s.trim_end_matches('0').trim_end_matches('.').into()
                } else {
                    s
                }
            }
        }
    }
}

/// One CSV line per iteration. `v2_target` holds the evaluated target
/// discrepancy on evaluation iterations and the training-step value
/// otherwise.
pub fn curves_csv(curves: &Curves) -> String {
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    for r in &curves.rows {
        let l = &r.losses;
        let v2 = r.eval.map(|e| e.target_discrepancy).or(l.v2);
        let line = [
            format!("{}", r.iter),
            r.phase.name().into(),
            fmt_sig(l.l_seg),
            fmt_sig(l.wr),
            fmt_sig(l.ce_s),
            fmt_sig(l.ce_t),
            fmt_sig(v2),
            fmt_sig(r.eval.map(|e| e.src_miou)),
        ]
        .join(",");
        out.push_str(&line);
        out.push('\n');
    }
    out
}
