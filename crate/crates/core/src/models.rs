//! The four networks of the pseudo-trilateral structure: a shared feature
//! extractor `G`, two classifier heads `C1`/`C2` of identical architecture
//! and a domain discriminator `D` that reads the extractor features.

use alloc::format;
use alloc::vec::Vec;

use crate::diffcore::{conv_out_len, init_conv, Graph, ParamSet, Scalar, Tensor, Var};
use crate::rng::{self, streams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage {
    pub channels: usize,
    pub stride: usize,
}

/// Feature extractor: a stack of `kernel×kernel` convolutions with
/// "same" padding, each followed by a leaky ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorCfg {
    pub in_channels: usize,
    pub stages: Vec<Stage>,
    pub kernel: usize,
    pub slope: f64,
}

impl ExtractorCfg {
    /// Two stride-2 stages with 8 and 16 channels.
    pub fn toy() -> Self {
        Self {
            in_channels: 3,
            stages: alloc::vec![Stage { channels: 8, stride: 2 }, Stage { channels: 16, stride: 2 }],
            kernel: 3,
            slope: 0.2,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.stages.last().map_or(self.in_channels, |s| s.channels)
    }

    /// Total spatial downsampling factor.
    pub fn downsample(&self) -> usize {
        self.stages.iter().map(|s| s.stride).product()
    }

    /// Feature-map extent for an `h×w` input.
    pub fn out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let pad = self.kernel / 2;
        let (mut h, mut w) = (h, w);
        for (i, s) in self.stages.iter().enumerate() {
            h = conv_out_len(h, self.kernel, s.stride, pad)
                .ok_or_else(|| Error::Config(format!("extractor stage {i} produces empty height")))?;
            w = conv_out_len(w, self.kernel, s.stride, pad)
                .ok_or_else(|| Error::Config(format!("extractor stage {i} produces empty width")))?;
        }
        Ok((h, w))
    }
}

/// Classifier head: an optional 3×3 hidden convolution, a 1×1 convolution
/// to `classes` logits, nearest-neighbour upsampling and a channel softmax.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierCfg {
    pub in_channels: usize,
    /// Hidden width; 0 means a single 1×1 layer.
    pub hidden: usize,
    pub classes: usize,
    pub upsample: usize,
    pub slope: f64,
}

impl ClassifierCfg {
    pub fn toy(classes: usize) -> Self {
        Self {
            in_channels: 16,
            hidden: 32,
            classes,
            upsample: 4,
            slope: 0.2,
        }
    }
}

/// Discriminator: `kernel×kernel` stride-`stride` convolutions, leaky ReLU
/// after every layer but the last, sigmoid on the last.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorCfg {
    pub in_channels: usize,
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub slope: f64,
}

impl DiscriminatorCfg {
    /// Channel widths `{16, 32, 64, 128, 1}`.
    pub fn toy() -> Self {
        Self {
            in_channels: 16,
            channels: alloc::vec![16, 32, 64, 128, 1],
            kernel: 4,
            stride: 2,
            pad: 2,
            slope: 0.2,
        }
    }

    /// Channel widths `{64, 128, 256, 512, 1}`.
    pub fn full_width(in_channels: usize) -> Self {
        Self {
            in_channels,
            channels: alloc::vec![64, 128, 256, 512, 1],
            ..Self::toy()
        }
    }

    /// Output map extent for an `h×w` feature map.
    pub fn out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (mut h, mut w) = (h, w);
        for i in 0..self.channels.len() {
            h = conv_out_len(h, self.kernel, self.stride, self.pad)
                .ok_or_else(|| Error::Config(format!("discriminator layer {i} produces empty height")))?;
            w = conv_out_len(w, self.kernel, self.stride, self.pad)
                .ok_or_else(|| Error::Config(format!("discriminator layer {i} produces empty width")))?;
        }
        Ok((h, w))
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        let mut prev = self.in_channels;
        let mut total = 0;
        for &c in &self.channels {
            total += c * prev * self.kernel * self.kernel + c;
            prev = c;
        }
        total
    }
}

/// Configuration of all four networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCfg {
    pub extractor: ExtractorCfg,
    pub classifier: ClassifierCfg,
    pub discriminator: DiscriminatorCfg,
}

impl ModelCfg {
    pub fn toy(classes: usize) -> Self {
        Self {
            extractor: ExtractorCfg::toy(),
            classifier: ClassifierCfg::toy(classes),
            discriminator: DiscriminatorCfg::toy(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ext = &self.extractor;
        if ext.stages.is_empty() || ext.kernel == 0 || ext.stages.iter().any(|s| s.channels == 0 || s.stride == 0) {
            return Err(Error::Config("extractor needs at least one stage with positive channels and stride".into()));
        }
        let f = ext.out_channels();
        if self.classifier.in_channels != f {
            return Err(Error::Config(format!(
                "classifier expects {} input channels, extractor produces {f}",
                self.classifier.in_channels
            )));
        }
        if self.classifier.classes < 2 {
            return Err(Error::Config("classifier needs at least 2 classes".into()));
        }
        if self.classifier.upsample == 0 {
            return Err(Error::Config("classifier upsample factor must be >= 1".into()));
        }
        let d = &self.discriminator;
        if d.in_channels != f {
            return Err(Error::Config(format!(
                "discriminator expects {} input channels, extractor produces {f}",
                d.in_channels
            )));
        }
        if d.channels.last() != Some(&1) {
            return Err(Error::Config("discriminator must end in a single channel".into()));
        }
        if d.kernel == 0 || d.stride == 0 {
            return Err(Error::Config("discriminator kernel and stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which classifier head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    C1,
    C2,
}

impl core::str::FromStr for Head {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C1" | "c1" => Ok(Head::C1),
            "C2" | "c2" => Ok(Head::C2),
            _ => Err(Error::Usage(format!("unknown classifier head {s:?}"))),
        }
    }
}

/// Parameters of `G`, `C1`, `C2` and `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct CaliModel<T> {
    pub cfg: ModelCfg,
    pub g: ParamSet<T>,
    pub c1: ParamSet<T>,
    pub c2: ParamSet<T>,
    pub d: ParamSet<T>,
}

/// Parameters of one network recorded into a graph, in `ParamSet` order.
#[derive(Debug, Clone)]
pub struct Bound(pub Vec<Var>);

fn conv_params<T: Scalar>(set: &mut ParamSet<T>, prefix: &str, idx: usize, rng: &mut rng::Rng, c_out: usize, c_in: usize, k: usize) {
    let (w, b) = init_conv(rng, c_out, c_in, k);
    set.push(format!("{prefix}.{idx}.weight"), w);
    set.push(format!("{prefix}.{idx}.bias"), b);
}

fn build_classifier<T: Scalar>(cfg: &ClassifierCfg, prefix: &str, rng: &mut rng::Rng) -> ParamSet<T> {
    let mut set = ParamSet::new();
    if cfg.hidden > 0 {
        conv_params(&mut set, prefix, 0, rng, cfg.hidden, cfg.in_channels, 3);
        conv_params(&mut set, prefix, 1, rng, cfg.classes, cfg.hidden, 1);
    } else {
        conv_params(&mut set, prefix, 0, rng, cfg.classes, cfg.in_channels, 1);
    }
    set
}

impl<T: Scalar> CaliModel<T> {
    /// Builds all four networks with parameters drawn from `seed`. The two
    /// heads use different sub-streams, so they start apart.
    pub fn build(cfg: ModelCfg, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut g = ParamSet::new();
        let mut rg = rng::stream(seed, streams::INIT_G);
        let mut prev = cfg.extractor.in_channels;
        for (i, s) in cfg.extractor.stages.iter().enumerate() {
            conv_params(&mut g, "g", i, &mut rg, s.channels, prev, cfg.extractor.kernel);
            prev = s.channels;
        }
        let c1 = build_classifier(&cfg.classifier, "c1", &mut rng::stream(seed, streams::INIT_C1));
        let c2 = build_classifier(&cfg.classifier, "c2", &mut rng::stream(seed, streams::INIT_C2));
        let mut d = ParamSet::new();
        let mut rd = rng::stream(seed, streams::INIT_D);
        let mut prev = cfg.discriminator.in_channels;
        for (i, &c) in cfg.discriminator.channels.iter().enumerate() {
            conv_params(&mut d, "d", i, &mut rd, c, prev, cfg.discriminator.kernel);
            prev = c;
        }
        Ok(Self { cfg, g, c1, c2, d })
    }

    pub fn head(&self, head: Head) -> &ParamSet<T> {
        match head {
            Head::C1 => &self.c1,
            Head::C2 => &self.c2,
        }
    }

    pub fn classes(&self) -> usize {
        self.cfg.classifier.classes
    }

    pub fn cast<U: Scalar>(&self) -> CaliModel<U> {
        CaliModel {
            cfg: self.cfg.clone(),
            g: self.g.cast(),
            c1: self.c1.cast(),
            c2: self.c2.cast(),
            d: self.d.cast(),
        }
    }

    /// Shared features `f = G(x)` for an `N×3×H×W` image batch.
    pub fn features(&self, graph: &mut Graph<T>, g: &Bound, x: Var) -> Result<Var> {
        let s = graph.shape(x);
        let ext = &self.cfg.extractor;
        if s.len() != 4 {
            return Err(Error::Dimension { op: "features", axis: "rank", expected: 4, got: s.len() });
        }
        if s[1] != ext.in_channels {
            return Err(Error::Dimension { op: "features", axis: "channel", expected: ext.in_channels, got: s[1] });
        }
        let pad = ext.kernel / 2;
        let mut h = x;
        for (i, st) in ext.stages.iter().enumerate() {
            h = graph.conv2d(h, g.0[2 * i], g.0[2 * i + 1], st.stride, pad)?;
            h = graph.leaky_relu(h, ext.slope);
        }
        Ok(h)
    }

    /// Per-pixel class probabilities `P = C(f)`, shape `N×K×H×W`.
    pub fn classify(&self, graph: &mut Graph<T>, head: &Bound, f: Var) -> Result<Var> {
        let cfg = &self.cfg.classifier;
        let s = graph.shape(f);
        if s.len() != 4 || s[1] != cfg.in_channels {
            return Err(Error::Dimension {
                op: "classify",
                axis: "channel",
                expected: cfg.in_channels,
                got: s.get(1).copied().unwrap_or(0),
            });
        }
        let mut h = f;
        if cfg.hidden > 0 {
            h = graph.conv2d(h, head.0[0], head.0[1], 1, 1)?;
            h = graph.leaky_relu(h, cfg.slope);
            h = graph.conv2d(h, head.0[2], head.0[3], 1, 0)?;
        } else {
            h = graph.conv2d(h, head.0[0], head.0[1], 1, 0)?;
        }
        let h = graph.upsample_nearest(h, cfg.upsample)?;
        graph.softmax(h, 1)
    }

    /// Domain probability map `D(f)` with values in `(0, 1)`.
    pub fn discriminate(&self, graph: &mut Graph<T>, d: &Bound, f: Var) -> Result<Var> {
        let cfg = &self.cfg.discriminator;
        let s = graph.shape(f);
        if s.len() != 4 || s[1] != cfg.in_channels {
            return Err(Error::Dimension {
                op: "discriminate",
                axis: "channel",
                expected: cfg.in_channels,
                got: s.get(1).copied().unwrap_or(0),
            });
        }
        let mut h = f;
        let last = cfg.channels.len() - 1;
        for i in 0..cfg.channels.len() {
            h = graph.conv2d(h, d.0[2 * i], d.0[2 * i + 1], cfg.stride, cfg.pad)?;
            h = if i < last {
                graph.leaky_relu(h, cfg.slope)
            } else {
                graph.sigmoid(h)
            };
        }
        Ok(h)
    }

    /// Binds all four networks, trainable or frozen per flag.
    pub fn bind_all(&self, graph: &mut Graph<T>, train: [bool; 4]) -> [Bound; 4] {
        [
            Bound(self.g.bind(graph, train[0])),
            Bound(self.c1.bind(graph, train[1])),
            Bound(self.c2.bind(graph, train[2])),
            Bound(self.d.bind(graph, train[3])),
        ]
    }

    /// Inference: features of one `3×H×W` image (or `N×3×H×W` batch).
    pub fn infer_features(&self, image: &Tensor<T>) -> Result<Tensor<T>> {
        let mut graph = Graph::new();
        let g = Bound(self.g.bind(&mut graph, false));
        let x = graph.constant(as_batch(image)?);
        let f = self.features(&mut graph, &g, x)?;
        Ok(graph.value(f).clone())
    }

    /// Inference: both heads' probability maps for an image.
    pub fn infer_probs(&self, image: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let mut graph = Graph::new();
        let [g, c1, c2, _] = self.bind_all(&mut graph, [false; 4]);
        let x = graph.constant(as_batch(image)?);
        let f = self.features(&mut graph, &g, x)?;
        let p1 = self.classify(&mut graph, &c1, f)?;
        let p2 = self.classify(&mut graph, &c2, f)?;
        Ok((graph.value(p1).clone(), graph.value(p2).clone()))
    }

    /// Inference: discriminator map for an image.
    pub fn infer_domain(&self, image: &Tensor<T>) -> Result<Tensor<T>> {
        let mut graph = Graph::new();
        let [g, _, _, d] = self.bind_all(&mut graph, [false; 4]);
        let x = graph.constant(as_batch(image)?);
        let f = self.features(&mut graph, &g, x)?;
        let dm = self.discriminate(&mut graph, &d, f)?;
        Ok(graph.value(dm).clone())
    }

    /// Class map from the averaged probabilities of both heads.
    pub fn segment(&self, image: &Tensor<T>) -> Result<Vec<u8>> {
        let (p1, p2) = self.infer_probs(image)?;
        let s = p1.shape();
        let (k, hw) = (s[1], s[2] * s[3]);
        let mut out = alloc::vec![0u8; hw];
        for (px, o) in out.iter_mut().enumerate() {
            let mut best = 0;
            let mut best_v = T::neg_infinity();
            for c in 0..k {
                let v = p1.data()[c * hw + px] + p2.data()[c * hw + px];
                if v > best_v {
                    best_v = v;
                    best = c;
                }
            }
            *o = best as u8;
        }
        Ok(out)
    }
}

/// Adds a leading batch axis to a rank-3 image.
pub fn as_batch<T: Scalar>(image: &Tensor<T>) -> Result<Tensor<T>> {
    match image.shape().len() {
        4 => Ok(image.clone()),
        3 => {
            let s = image.shape();
            image.clone().reshape(&[1, s[0], s[1], s[2]])
        }
        r => Err(Error::Dimension { op: "image", axis: "rank", expected: 3, got: r }),
    }
}

/// Per-pixel argmax over the channel axis of an `N×K×H×W` map (first
/// image of the batch).
pub fn argmax_map<T: Scalar>(p: &Tensor<T>) -> Vec<u8> {
    let s = p.shape();
    let (k, hw) = (s[1], s[2] * s[3]);
    (0..hw)
        .map(|px| {
            let mut best = 0;
            for c in 1..k {
                if p.data()[c * hw + px] > p.data()[best * hw + px] {
                    best = c;
                }
            }
            best as u8
        })
        .collect()
}
