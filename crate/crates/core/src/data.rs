//! Synthetic two-domain segmentation data and label remapping.
//!
//! Layouts are random filled ellipses and convex polygons over a background
//! class. Each class has a base colour, a brightness offset and a texture
//! amplitude; boundaries are softened by a 3×3 box blur. A [`ShiftSpec`]
//! turns the source appearance into a target appearance without touching
//! the layout or the labels.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use crate::diffcore::Tensor;
use crate::rng::{self, streams};
use crate::{Error, Result};

/// Base colours of the source domain, one per class.
pub const PALETTE: [[f32; 3]; 8] = [
    [0.30, 0.62, 0.28],
    [0.92, 0.72, 0.50],
    [0.10, 0.12, 0.40],
    [0.75, 0.70, 0.25],
    [0.62, 0.25, 0.55],
    [0.25, 0.65, 0.68],
    [0.80, 0.30, 0.28],
    [0.45, 0.45, 0.20],
];

/// Per-class texture amplitude; the class identity is partly carried by
/// texture so that it survives colour shifts.
pub const TEXTURE: [f32; 8] = [0.03, 0.10, 0.18, 0.06, 0.14, 0.04, 0.12, 0.08];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Source,
    Target,
}

/// One image with its class map.
#[derive(Debug, Clone, PartialEq)]
pub struct SegSample {
    /// `3×H×W`, values in `[0, 1]`.
    pub image: Tensor<f32>,
    /// `H×W` class indices; `None` when labels are withheld.
    pub label: Option<Vec<u8>>,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<SegSample>,
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    /// Whether labels may be used for training.
    pub labeled: bool,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Copy with labels removed, as seen by an unsupervised consumer.
    pub fn without_labels(&self) -> Dataset {
        Dataset {
            samples: self
                .samples
                .iter()
                .map(|s| SegSample {
                    label: None,
                    ..s.clone()
                })
                .collect(),
            labeled: false,
            ..self.clone()
        }
    }

    /// Pixel histogram over all labels.
    pub fn class_histogram(&self) -> Vec<u64> {
        let mut h = vec![0u64; self.classes];
        for s in &self.samples {
            if let Some(l) = &s.label {
                for &c in l {
                    if let Some(slot) = h.get_mut(c as usize) {
                        *slot += 1;
                    }
                }
            }
        }
        h
    }
}

/// Appearance change applied on top of the source rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpec {
    /// Per-channel gain, applied after the hue rotation.
    pub gain: [f32; 3],
    /// Per-channel bias, applied after the gain.
    pub bias: [f32; 3],
    /// Rotation angle (radians) about the grey axis of RGB space.
    pub hue: f32,
    /// Amplitude of extra uniform per-pixel noise.
    pub noise: f32,
    /// `(class, palette index)` overrides of the base colour.
    pub palette_swap: Vec<(u8, u8)>,
    pub seed: u64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        Self {
            gain: [1.0; 3],
            bias: [0.0; 3],
            hue: 0.0,
            noise: 0.0,
            palette_swap: Vec::new(),
            seed: 0,
        }
    }
}

impl ShiftSpec {
    pub fn hue(angle: f32) -> Self {
        Self {
            hue: angle,
            ..Self::default()
        }
    }

    /// The shift used by the standard synthetic adaptation task:
    /// `magnitude` scales a hue rotation plus extra texture noise.
    pub fn standard(magnitude: f32) -> Self {
        Self {
            hue: 1.4 * magnitude,
            noise: 0.06 * magnitude,
            gain: [1.0, 1.0, 1.0],
            ..Self::default()
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self { seed: self.seed, ..Self::default() }
    }

    /// Parses `key:value` items separated by commas, e.g.
    /// `hue:0.5,noise:0.05,gain:1/0.9/0.8,bias:0/0/0.1,swap:1-2,seed:3`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        let text = text.trim();
        if text.is_empty() || text == "none" {
            return Ok(spec);
        }
        let bad = |item: &str| Error::Validation(format!("bad shift item {item:?}"));
        for item in text.split(',') {
            let (key, val) = item.split_once(':').ok_or_else(|| bad(item))?;
            let num = |v: &str| v.trim().parse::<f32>().map_err(|_| bad(item));
            let triple = |v: &str| -> Result<[f32; 3]> {
                let parts: Vec<&str> = v.split('/').collect();
                if parts.len() != 3 {
                    return Err(bad(item));
                }
                Ok([num(parts[0])?, num(parts[1])?, num(parts[2])?])
            };
            match key.trim() {
                "hue" => spec.hue = num(val)?,
                "noise" => spec.noise = num(val)?,
                "gain" => spec.gain = triple(val)?,
                "bias" => spec.bias = triple(val)?,
                "seed" => spec.seed = val.trim().parse().map_err(|_| bad(item))?,
                "swap" => {
                    for pair in val.split('/') {
                        let (a, b) = pair.split_once('-').ok_or_else(|| bad(item))?;
                        let a = a.trim().parse::<u8>().map_err(|_| bad(item))?;
                        let b = b.trim().parse::<u8>().map_err(|_| bad(item))?;
                        spec.palette_swap.push((a, b));
                    }
                }
                "std" | "standard" => {
                    let seed = spec.seed;
                    spec = Self::standard(num(val)?);
                    spec.seed = seed;
                }
                _ => return Err(bad(item)),
            }
        }
        Ok(spec)
    }

    /// Canonical text form accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "hue:{},noise:{},gain:{}/{}/{},bias:{}/{}/{},seed:{}",
            self.hue, self.noise, self.gain[0], self.gain[1], self.gain[2], self.bias[0], self.bias[1], self.bias[2], self.seed
        );
        if !self.palette_swap.is_empty() {
            s.push_str(",swap:");
            let pairs: Vec<String> = self.palette_swap.iter().map(|(a, b)| format!("{a}-{b}")).collect();
            s.push_str(&pairs.join("/"));
        }
        s
    }

    fn base_colour(&self, class: u8) -> [f32; 3] {
        let idx = self
            .palette_swap
            .iter()
            .find(|(c, _)| *c == class)
            .map_or(class, |(_, p)| *p);
        PALETTE[idx as usize % PALETTE.len()]
    }

    /// Rotation of an RGB triple about `(1,1,1)/sqrt(3)` by `hue` radians.
    pub fn rotate_hue(&self, rgb: [f32; 3]) -> [f32; 3] {
        if self.hue == 0.0 {
            return rgb;
        }
        let (s, c) = Float::sin_cos(self.hue);
        let k = 1.0 / 3.0f32;
        let t = (1.0 - c) * k;
        let r = s * Float::sqrt(k);
        let m = [
            [c + t, t - r, t + r],
            [t + r, c + t, t - r],
            [t - r, t + r, c + t],
        ];
        let mut out = [0.0; 3];
        for (i, row) in m.iter().enumerate() {
            out[i] = row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2];
        }
        out
    }

    /// Pixel colour after the shift, before extra noise and clamping.
    pub fn transform(&self, rgb: [f32; 3]) -> [f32; 3] {
        let h = self.rotate_hue(rgb);
        [
            h[0] * self.gain[0] + self.bias[0],
            h[1] * self.gain[1] + self.bias[1],
            h[2] * self.gain[2] + self.bias[2],
        ]
    }
}

/// Whether each of `classes` is navigable: class 0 and odd classes are,
/// even classes from 2 up are obstacles.
pub fn traversability(classes: usize) -> Vec<bool> {
    (0..classes).map(|c| c == 0 || c % 2 == 1).collect()
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Ellipse { cx: f32, cy: f32, rx: f32, ry: f32, cos: f32, sin: f32 },
    Polygon { n: usize, pts: [[f32; 2]; 6] },
}

impl Shape {
    fn contains(&self, x: f32, y: f32) -> bool {
        match *self {
            Shape::Ellipse { cx, cy, rx, ry, cos, sin } => {
                let (dx, dy) = (x - cx, y - cy);
                let u = dx * cos + dy * sin;
                let v = -dx * sin + dy * cos;
                (u / rx) * (u / rx) + (v / ry) * (v / ry) <= 1.0
            }
            Shape::Polygon { n, pts } => {
                // convex, counter-clockwise in angle order
                (0..n).all(|i| {
                    let a = pts[i];
                    let b = pts[(i + 1) % n];
                    (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]) >= 0.0
                })
            }
        }
    }

    fn random(rng: &mut rng::Rng, h: f32, w: f32) -> Shape {
        let size = h.min(w);
        let cx = rng.gen_range(0.0..w);
        let cy = rng.gen_range(0.0..h);
        if rng.gen_bool(0.5) {
            let rx = rng.gen_range(0.12..0.35) * size;
            let ry = rng.gen_range(0.12..0.35) * size;
            let a: f32 = rng.gen_range(0.0..core::f32::consts::PI);
            let (sin, cos) = Float::sin_cos(a);
            Shape::Ellipse { cx, cy, rx, ry, cos, sin }
        } else {
            let n = rng.gen_range(3..=6);
            let mut angles = [0.0f32; 6];
            for a in angles.iter_mut().take(n) {
                *a = rng.gen_range(0.0..core::f32::consts::TAU);
            }
            angles[..n].sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
            let mut pts = [[0.0f32; 2]; 6];
            for i in 0..n {
                let r = rng.gen_range(0.18..0.4) * size;
                pts[i] = [cx + r * Float::cos(angles[i]), cy + r * Float::sin(angles[i])];
            }
            Shape::Polygon { n, pts }
        }
    }
}

/// Random class layout of sample `index`.
pub fn layout(seed: u64, index: u64, h: usize, w: usize, classes: usize) -> Vec<u8> {
    let mut rng = rng::item(seed, streams::LAYOUT, index);
    let mut label = vec![0u8; h * w];
    let count = rng.gen_range(3..=6);
    for _ in 0..count {
        let class = rng.gen_range(1..classes) as u8;
        let shape = Shape::random(&mut rng, h as f32, w as f32);
        for y in 0..h {
            for x in 0..w {
                if shape.contains(x as f32 + 0.5, y as f32 + 0.5) {
                    label[y * w + x] = class;
                }
            }
        }
    }
    label
}

/// Renders a class map into a `3×H×W` image. Texture noise comes from the
/// layout stream so source and shifted renderings of one layout share it.
pub fn render(label: &[u8], h: usize, w: usize, shift: &ShiftSpec, texture_rng: &mut rng::Rng, noise_rng: &mut rng::Rng) -> Tensor<f32> {
    let hw = h * w;
    let mut img = vec![0.0f32; 3 * hw];
    for (px, &c) in label.iter().enumerate() {
        let base = shift.base_colour(c);
        let amp = TEXTURE[c as usize % TEXTURE.len()];
        let t = texture_rng.gen_range(-1.0f32..1.0) * amp;
        for ch in 0..3 {
            img[ch * hw + px] = base[ch] + t;
        }
    }
    // boundary softening
    let mut blurred = vec![0.0f32; 3 * hw];
    for ch in 0..3 {
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                let mut n = 0.0;
                for dy in -1i32..=1 {
                    for dx in -1i32..=1 {
                        let (yy, xx) = (y as i32 + dy, x as i32 + dx);
                        if yy >= 0 && yy < h as i32 && xx >= 0 && xx < w as i32 {
                            acc += img[ch * hw + yy as usize * w + xx as usize];
                            n += 1.0;
                        }
                    }
                }
                // keep the centre dominant so textures survive
                let centre = img[ch * hw + y * w + x];
                blurred[ch * hw + y * w + x] = 0.5 * centre + 0.5 * acc / n;
            }
        }
    }
    for px in 0..hw {
        let rgb = shift.transform([blurred[px], blurred[hw + px], blurred[2 * hw + px]]);
        for ch in 0..3 {
            let extra = if shift.noise > 0.0 {
                noise_rng.gen_range(-1.0f32..1.0) * shift.noise
            } else {
                0.0
            };
            blurred[ch * hw + px] = (rgb[ch] + extra).clamp(0.0, 1.0);
        }
    }
    Tensor::from_vec(&[3, h, w], blurred).expect("3*h*w values")
}

/// Parameters of [`generate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub n: usize,
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub seed: u64,
    pub domain: Domain,
    pub shift: Option<ShiftSpec>,
}

/// Generates `n` samples. Sample `i` depends only on `(seed, i)` and the
/// shift, never on `n`. Target datasets keep their labels for evaluation
/// but are flagged unlabeled.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    if spec.classes < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {}", spec.classes)));
    }
    if spec.classes > PALETTE.len() {
        return Err(Error::Config(format!(
            "{} classes exceed the palette size {}",
            spec.classes,
            PALETTE.len()
        )));
    }
    if spec.height < 16 || spec.width < 16 {
        return Err(Error::Config(format!(
            "image must be at least 16x16, got {}x{}",
            spec.height, spec.width
        )));
    }
    let identity = ShiftSpec::default();
    let shift = spec.shift.as_ref().unwrap_or(&identity);
    let samples = (0..spec.n)
        .map(|i| {
            let label = layout(spec.seed, i as u64, spec.height, spec.width, spec.classes);
            let mut tex = rng::item(spec.seed, streams::LAYOUT, (1 << 32) | i as u64);
            let mut noise = rng::item(shift.seed, streams::SHIFT, i as u64);
            let image = render(&label, spec.height, spec.width, shift, &mut tex, &mut noise);
            SegSample {
                image,
                label: Some(label),
                domain: spec.domain,
            }
        })
        .collect();
    Ok(Dataset {
        samples,
        height: spec.height,
        width: spec.width,
        classes: spec.classes,
        labeled: spec.domain == Domain::Source,
    })
}

/// Map from original class ids to contiguous group ids.
#[derive(Debug, Clone, PartialEq)]
pub struct RemapTable {
    /// `map[original] = group`.
    pub map: Vec<u8>,
    pub names: Vec<String>,
}

impl RemapTable {
    pub fn new(map: Vec<u8>, names: Vec<String>) -> Result<Self> {
        let groups = names.len();
        let mut used = vec![false; groups];
        for (orig, &g) in map.iter().enumerate() {
            let g = g as usize;
            if g >= groups {
                return Err(Error::Validation(format!(
                    "class {orig} maps to group {g}, but only {groups} groups are named"
                )));
            }
            used[g] = true;
        }
        if let Some(g) = used.iter().position(|u| !u) {
            return Err(Error::Validation(format!("group {g} has no member classes")));
        }
        Ok(Self { map, names })
    }

    pub fn identity(classes: usize) -> Self {
        Self {
            map: (0..classes as u8).collect(),
            names: (0..classes).map(|c| format!("class{c}")).collect(),
        }
    }

    pub fn groups(&self) -> usize {
        self.names.len()
    }
}

/// Rewrites every label through `table`.
pub fn remap_labels(dataset: &Dataset, table: &RemapTable) -> Result<Dataset> {
    let mut unmapped: Vec<u8> = Vec::new();
    let mut out = dataset.clone();
    for s in &mut out.samples {
        if let Some(label) = &mut s.label {
            for l in label.iter_mut() {
                match table.map.get(*l as usize) {
                    Some(&g) => *l = g,
                    None => {
                        if !unmapped.contains(l) {
                            unmapped.push(*l);
                        }
                    }
                }
            }
        }
    }
    if !unmapped.is_empty() {
        unmapped.sort_unstable();
        return Err(Error::Validation(format!("unmapped class ids {unmapped:?}")));
    }
    out.classes = table.groups();
    Ok(out)
}

/// Per-image channel means and standard deviations.
pub fn colour_stats(images: &[Tensor<f32>]) -> Vec<Vec<f64>> {
    images
        .iter()
        .map(|img| {
            let hw = img.shape()[1] * img.shape()[2];
            let mut f = Vec::with_capacity(6);
            for ch in 0..3 {
                let px = &img.data()[ch * hw..(ch + 1) * hw];
                let mean = px.iter().map(|&v| v as f64).sum::<f64>() / hw as f64;
                let var = px.iter().map(|&v| Float::powi(v as f64 - mean, 2)).sum::<f64>() / hw as f64;
                f.push(mean);
                f.push(Float::sqrt(var));
            }
            f
        })
        .collect()
}
