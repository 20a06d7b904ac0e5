//! Sub-command implementations. Each takes a resolved [`RunConfig`],
//! writes its outputs plus `resolved.cfg` to the output directory and
//! returns a short human-readable summary.

use std::path::{Path, PathBuf};

use cali_core::data::{self, generate_dataset, DatasetSpec, Domain, ShiftSpec};
use cali_core::divergence::{self, FiniteHypothesisClass, NeuralCfg};
use cali_core::metrics;
use cali_core::models::ModelCfg;
use cali_core::planner::{self, CameraModel, PlannerWeights, Pose2};
use cali_core::sim::{self, EpisodeCfg, SegSource, World};
use cali_core::trainer::{self, fmt_sig, AdversarialOrder, Baseline, TrainConfig};

use crate::config::{key, KeySpec, RunConfig};
use crate::{checkpoint, dataset_io, image, io_err, tensorpack, Error, Result};

pub const COMMANDS: &[(&str, &str)] = &[
    ("gen-data", "generate a synthetic segmentation dataset"),
    ("train", "train SO, DA, CA or CALI on a source and a target dataset"),
    ("eval", "per-class IoU of a checkpoint on a labeled dataset"),
    ("divergence", "domain divergence estimates and the bound probe"),
    ("plan", "score a motion-primitive library against one segmentation"),
    ("navigate", "closed-loop episode in a grid world"),
];

const OUT: KeySpec = key("out", None, "output directory");
const SEED: KeySpec = key("seed", Some("0"), "random seed");

const GEN_DATA: &[KeySpec] = &[
    OUT,
    key("n", Some("200"), "number of samples"),
    key("hw", Some("32"), "image height and width"),
    key("k", Some("3"), "number of classes"),
    key("shift", Some("none"), "appearance shift, e.g. hue:0.5,noise:0.05 or std:1"),
    key("domain", Some("source"), "source (labeled) or target (labels kept for evaluation only)"),
    SEED,
];

const TRAIN: &[KeySpec] = &[
    key("src", None, "source dataset directory"),
    key("tgt", None, "target dataset directory"),
    OUT,
    key("baseline", Some("CALI"), "SO, DA, CA or CALI"),
    key("m", Some("2000"), "iterations"),
    key("interval", Some("100"), "phase switching interval"),
    key("order", Some("g-first"), "adversarial update order: g-first or d-first"),
    key("preset", Some("toy"), "rate preset: toy or full"),
    key("lr", None, "extractor and supervised head learning rate"),
    key("lr_class", None, "head learning rate during discrepancy ascent"),
    key("lr_d", None, "discriminator learning rate"),
    key("momentum", None, "SGD momentum"),
    key("weight_decay", None, "SGD weight decay"),
    key("poly_power", None, "poly schedule power"),
    key("lambda_adv", None, "adversarial loss weight"),
    key("lambda_v2", None, "discrepancy weight for the extractor"),
    key("lambda_wr", None, "weight regularizer weight"),
    key("batch", Some("1"), "batch size"),
    key("eval_every", Some("100"), "evaluation period in iterations"),
    key("holdout", Some("8"), "held-out samples per domain for evaluation"),
    SEED,
];

const EVAL: &[KeySpec] = &[
    key("ckpt", None, "checkpoint file"),
    key("data", None, "labeled dataset directory"),
    OUT,
    key("classes", Some("all"), "evaluated classes, e.g. 0,2"),
];

const DIVERGENCE: &[KeySpec] = &[
    key("src", None, "source dataset directory"),
    key("tgt", None, "target dataset directory"),
    OUT,
    key("mode", Some("neural"), "neural or oracle"),
    key("ckpt", None, "checkpoint; features are pooled extractor outputs and the bound probe runs"),
    key("hidden", Some("32"), "domain classifier width"),
    key("epochs", Some("300"), "domain classifier epochs"),
    key("lr", Some("0.01"), "domain classifier learning rate"),
    key("grid", Some("17"), "thresholds per feature for oracle stumps"),
    SEED,
];

const PLAN: &[KeySpec] = &[
    key("seg", None, "TensorPack with a u8 `seg` (or `label`) entry of shape H×W"),
    OUT,
    key("k", Some("3"), "number of classes"),
    key("fx", Some("24"), ""),
    key("fy", Some("24"), ""),
    key("cx", Some("16"), ""),
    key("cy", Some("16"), ""),
    key("cam_height", Some("0.5"), "camera height in metres"),
    key("pitch", Some("0.5"), "downward camera pitch in radians"),
    key("goal_x", Some("3"), "goal in the robot frame"),
    key("goal_y", Some("0"), ""),
    key("v", Some("0.3"), "primitive speed"),
    key("n", Some("7"), "number of primitives"),
    key("max_omega", Some("0.8"), "largest turn rate"),
    key("duration", Some("2"), "primitive duration"),
    key("poses", Some("9"), "poses per primitive"),
    key("alpha", Some("0.55"), "SEDF scale"),
    key("w1", Some("1"), "collision weight"),
    key("w2", Some("1"), "target weight"),
    key("a", Some("0.25"), "yaw term scale"),
    key("b", Some("1"), "translation term scale"),
    key("p", Some("2"), "target-cost exponent"),
];

const NAVIGATE: &[KeySpec] = &[
    OUT,
    key("world", Some("corridor"), "corridor or open"),
    key("mode", Some("oracle"), "oracle or learned"),
    key("ckpt", None, "checkpoint for learned mode"),
    key("shift", Some("none"), "appearance shift of rendered views"),
    key("max_steps", Some("200"), ""),
    key("alpha", Some("0.55"), "SEDF scale"),
    SEED,
];

pub fn specs(command: &str) -> Option<&'static [KeySpec]> {
    Some(match command {
        "gen-data" => GEN_DATA,
        "train" => TRAIN,
        "eval" => EVAL,
        "divergence" => DIVERGENCE,
        "plan" => PLAN,
        "navigate" => NAVIGATE,
        _ => return None,
    })
}

pub fn run(cfg: &mut RunConfig) -> Result<String> {
    let out = PathBuf::from(cfg.get("out")?);
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;
    let summary = match cfg.command.as_str() {
        "gen-data" => gen_data(cfg, &out)?,
        "train" => train(cfg, &out)?,
        "eval" => eval(cfg, &out)?,
        "divergence" => divergence(cfg, &out)?,
        "plan" => plan(cfg, &out)?,
        "navigate" => navigate(cfg, &out)?,
        other => return Err(Error::Usage(format!("unknown command {other:?}"))),
    };
    write(&out.join("resolved.cfg"), cfg.to_text().as_bytes())?;
    Ok(summary)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn shift_for(cfg: &RunConfig, seed: u64) -> Result<ShiftSpec> {
    let text = cfg.get_opt("shift").unwrap_or("none");
    let mut shift = ShiftSpec::parse(text)?;
    if !text.contains("seed:") {
        shift.seed = seed;
    }
    Ok(shift)
}

fn gen_data(cfg: &RunConfig, out: &Path) -> Result<String> {
    let seed: u64 = cfg.parse("seed")?;
    let hw: usize = cfg.parse("hw")?;
    let domain = match cfg.get("domain")? {
        "source" => Domain::Source,
        "target" => Domain::Target,
        d => return Err(Error::Usage(format!("domain must be source or target, got {d:?}"))),
    };
    let shift = shift_for(cfg, seed)?;
    let spec = DatasetSpec {
        n: cfg.parse("n")?,
        height: hw,
        width: hw,
        classes: cfg.parse("k")?,
        seed,
        domain,
        shift: (!shift.is_identity()).then(|| shift.clone()),
    };
    let data = generate_dataset(&spec)?;
    dataset_io::write_dataset(out, &data, &[("shift", shift.to_text()), ("seed", seed.to_string())])?;
    Ok(format!("wrote {} samples to {}", data.len(), out.display()))
}

fn train_config(cfg: &mut RunConfig) -> Result<TrainConfig> {
    let mut t = match cfg.get("preset")? {
        "toy" => TrainConfig::toy(),
        "full" => TrainConfig::default(),
        p => return Err(Error::Usage(format!("preset must be toy or full, got {p:?}"))),
    };
    t.baseline = cfg.parse::<Baseline>("baseline")?;
    t.order = cfg.parse::<AdversarialOrder>("order")?;
    t.max_iters = cfg.parse("m")?;
    t.interval = cfg.parse("interval")?;
    t.batch_size = cfg.parse("batch")?;
    t.eval_every = cfg.parse("eval_every")?;
    t.holdout = cfg.parse("holdout")?;
    t.seed = cfg.parse("seed")?;
    let rates: [(&str, &mut f64); 9] = [
        ("lr", &mut t.lr),
        ("lr_class", &mut t.lr_class),
        ("lr_d", &mut t.lr_d),
        ("momentum", &mut t.momentum),
        ("weight_decay", &mut t.weight_decay),
        ("poly_power", &mut t.poly_power),
        ("lambda_adv", &mut t.lambda_adv),
        ("lambda_v2", &mut t.lambda_v2),
        ("lambda_wr", &mut t.lambda_wr),
    ];
    for (k, slot) in rates {
        match cfg.parse_opt::<f64>(k)? {
            Some(v) => *slot = v,
            None => cfg.set(k, *slot),
        }
    }
    t.validate()?;
    Ok(t)
}

fn train(cfg: &mut RunConfig, out: &Path) -> Result<String> {
    let t = train_config(cfg)?;
    let src = dataset_io::read_dataset(Path::new(cfg.get("src")?))?;
    let tgt = dataset_io::read_dataset(Path::new(cfg.get("tgt")?))?;
    if src.classes != tgt.classes || src.height != tgt.height || src.width != tgt.width {
        return Err(Error::Usage("source and target datasets differ in K or image size".into()));
    }
    let (model, curves) = trainer::train::<f32>(&t, ModelCfg::toy(src.classes), &src, &tgt)?;
    checkpoint::save(&out.join("checkpoint.ctp"), &model)?;
    write(&out.join("curves.csv"), trainer::curves_csv(&curves).as_bytes())?;
    let last = curves.evals().last().map(|e| e.src_miou);
    Ok(format!(
        "trained {} for {} iterations; held-out source mIoU {}",
        t.baseline.name(),
        t.max_iters,
        fmt_sig(last)
    ))
}

fn eval(cfg: &RunConfig, out: &Path) -> Result<String> {
    let model = checkpoint::load(Path::new(cfg.get("ckpt")?))?;
    let data = dataset_io::read_dataset(Path::new(cfg.get("data")?))?;
    if data.samples.iter().any(|s| s.label.is_none()) {
        return Err(Error::Usage("evaluation needs labels in every sample".into()));
    }
    if data.classes != model.classes() {
        return Err(Error::Usage(format!("dataset has K={}, model {}", data.classes, model.classes())));
    }
    let cm = metrics::evaluate(&model, &data)?;
    let evaluated: Vec<usize> = match cfg.get("classes")? {
        "all" => (0..data.classes).collect(),
        list => list
            .split(',')
            .map(|c| c.trim().parse::<usize>().map_err(|_| Error::Usage(format!("bad class id {c:?}"))))
            .collect::<Result<_>>()?,
    };
    let mut csv = String::from("class,iou,present\n");
    for c in 0..data.classes {
        let present = (0..data.classes).any(|p| cm.get(c, p) > 0);
        csv.push_str(&format!("{c},{},{}\n", fmt_sig(cm.iou(c)), u8::from(present)));
    }
    write(&out.join("eval.csv"), csv.as_bytes())?;
    let miou = cm.miou_star(&evaluated)?;
    Ok(format!("mIoU* {}", fmt_sig(Some(miou))))
}

fn standardize(source: &mut [Vec<f64>], target: &mut [Vec<f64>]) {
    let d = source[0].len();
    let n = (source.len() + target.len()) as f64;
    for j in 0..d {
        let mean = source.iter().chain(target.iter()).map(|x| x[j]).sum::<f64>() / n;
        let var = source.iter().chain(target.iter()).map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt().max(1e-9);
        for x in source.iter_mut().chain(target.iter_mut()) {
            x[j] = (x[j] - mean) / sd;
        }
    }
}

fn divergence(cfg: &RunConfig, out: &Path) -> Result<String> {
    let src = dataset_io::read_dataset(Path::new(cfg.get("src")?))?;
    let tgt = dataset_io::read_dataset(Path::new(cfg.get("tgt")?))?;
    let src_imgs: Vec<_> = src.samples.iter().map(|s| s.image.clone()).collect();
    let tgt_imgs: Vec<_> = tgt.samples.iter().map(|s| s.image.clone()).collect();
    let model = cfg.get_opt("ckpt").map(|p| checkpoint::load(Path::new(p))).transpose()?;
    let (mut fs, mut ft, features) = match &model {
        Some(m) => (divergence::pooled_features(m, &src_imgs)?, divergence::pooled_features(m, &tgt_imgs)?, "pooled"),
        None => (data::colour_stats(&src_imgs), data::colour_stats(&tgt_imgs), "colour"),
    };
    let seed: u64 = cfg.parse("seed")?;
    let neural = NeuralCfg {
        hidden: cfg.parse("hidden")?,
        epochs: cfg.parse("epochs")?,
        lr: cfg.parse("lr")?,
        seed,
    };
    let mode = cfg.get("mode")?;
    let est = match mode {
        "neural" => divergence::h_divergence_neural(&fs, &ft, &neural)?,
        "oracle" => {
            standardize(&mut fs, &mut ft);
            let n: usize = cfg.parse("grid")?;
            if n < 2 {
                return Err(Error::Usage("grid needs at least 2 thresholds".into()));
            }
            let grid: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64).collect();
            let class = FiniteHypothesisClass::stumps(fs[0].len(), &grid).symmetric_closure();
            divergence::h_divergence_oracle(&fs, &ft, &class)?
        }
        m => return Err(Error::Usage(format!("mode must be neural or oracle, got {m:?}"))),
    };
    let mut report = vec![
        ("mode", mode.to_string()),
        ("features", features.to_string()),
        ("m_s", est.m_s.to_string()),
        ("m_t", est.m_t.to_string()),
        ("d_h", fmt_sig(Some(est.value))),
        ("bracket", fmt_sig(est.bracket)),
    ];
    if let Some(m) = &model {
        let probe = divergence::bound_probe_neural(m, &src, &tgt_imgs, &neural)?;
        report.extend([
            ("eps_s", fmt_sig(Some(probe.eps_s))),
            ("d_hdh_pair", fmt_sig(Some(probe.d_hdh.value))),
            ("ub1_part", fmt_sig(Some(probe.ub1_part))),
            ("ub2_part", fmt_sig(Some(probe.ub2_part))),
            ("holds", u8::from(probe.holds).to_string()),
        ]);
    }
    let text: String = report.iter().map(|(k, v)| format!("{k}: {v}\n")).collect();
    let header: Vec<&str> = report.iter().map(|(k, _)| *k).collect();
    let row: Vec<&str> = report.iter().map(|(_, v)| v.as_str()).collect();
    write(&out.join("divergence.txt"), text.as_bytes())?;
    write(&out.join("divergence.csv"), format!("{}\n{}\n", header.join(","), row.join(",")).as_bytes())?;
    Ok(text.trim_end().to_string())
}

fn camera(cfg: &RunConfig, rows: usize, cols: usize) -> Result<CameraModel> {
    let cam = CameraModel {
        fx: cfg.parse("fx")?,
        fy: cfg.parse("fy")?,
        cx: cfg.parse("cx")?,
        cy: cfg.parse("cy")?,
        height: cfg.parse("cam_height")?,
        pitch: cfg.parse("pitch")?,
        rows,
        cols,
    };
    cam.validate()?;
    Ok(cam)
}

fn plan(cfg: &RunConfig, out: &Path) -> Result<String> {
    let entries = tensorpack::read_file(Path::new(cfg.get("seg")?))?;
    let e = tensorpack::find(&entries, "seg").or_else(|_| tensorpack::find(&entries, "label"))?;
    if e.dims.len() != 2 {
        return Err(Error::Usage(format!("segmentation must be H×W, got shape {:?}", e.dims)));
    }
    let (rows, cols) = (e.dims[0], e.dims[1]);
    let seg = e.as_u8()?;
    let cam = camera(cfg, rows, cols)?;
    let k: usize = cfg.parse("k")?;
    let weights = PlannerWeights {
        w1: cfg.parse("w1")?,
        w2: cfg.parse("w2")?,
        a: cfg.parse("a")?,
        b: cfg.parse("b")?,
        p: cfg.parse("p")?,
        ..PlannerWeights::default()
    };
    weights.validate()?;
    let lib = planner::generate_primitives(
        cfg.parse("v")?,
        &planner::fan(cfg.parse("n")?, cfg.parse("max_omega")?),
        cfg.parse("duration")?,
        cfg.parse("poses")?,
    )?;
    let mask = planner::navigability_mask(seg, rows, cols, &data::traversability(k))?;
    let field = planner::sedf(&planner::obstacle_boundary(&mask), cfg.parse("alpha")?, rows, cols)?;
    let (gx, gy): (f64, f64) = (cfg.parse("goal_x")?, cfg.parse("goal_y")?);
    let robot = Pose2::default();
    let goal = Pose2::new(gx, gy, robot.bearing_to(gx, gy));
    let result = planner::select_primitive(&lib, &field, &cam, &robot, &goal, &weights)?;
    let mut csv = String::from("index,v,omega,collision,target,total,selected\n");
    for (i, (prim, c)) in lib.iter().zip(&result.costs).enumerate() {
        csv.push_str(&format!(
            "{i},{},{},{},{},{},{}\n",
            fmt_sig(Some(prim.v)),
            fmt_sig(Some(prim.omega)),
            fmt_sig(Some(c.collision)),
            fmt_sig(Some(c.target)),
            fmt_sig(Some(c.total)),
            u8::from(i == result.index)
        ));
    }
    write(&out.join("plan.csv"), csv.as_bytes())?;
    image::sedf_image(&field).write(&out.join("sedf.ppm"))?;
    Ok(format!("selected primitive {} of {}", result.index, lib.len()))
}

fn navigate(cfg: &RunConfig, out: &Path) -> Result<String> {
    let seed: u64 = cfg.parse("seed")?;
    let world = match cfg.get("world")? {
        "corridor" => World::corridor(seed),
        "open" => World::open(seed),
        w => return Err(Error::Usage(format!("world must be corridor or open, got {w:?}"))),
    };
    let model = match cfg.get("mode")? {
        "oracle" => None,
        "learned" => Some(checkpoint::load(Path::new(cfg.get("ckpt")?))?),
        m => return Err(Error::Usage(format!("mode must be oracle or learned, got {m:?}"))),
    };
    if let Some(m) = &model {
        if m.classes() + 1 != world.navigable.len() {
            return Err(Error::Usage(format!("model has K={}, world needs {}", m.classes(), world.navigable.len() - 1)));
        }
    }
    let source = match &model {
        Some(m) => SegSource::Learned(m),
        None => SegSource::Oracle,
    };
    let ep = EpisodeCfg {
        max_steps: cfg.parse("max_steps")?,
        alpha: cfg.parse("alpha")?,
        seed,
        shift: shift_for(cfg, seed)?,
        ..EpisodeCfg::default()
    };
    let cam = CameraModel::default();
    let log = sim::run_episode(&world, &cam, &source, &sim::default_library(), &PlannerWeights::default(), &ep)?;
    write(&out.join("episode.csv"), episode_csv(&log).as_bytes())?;
    let path: Vec<Pose2> = std::iter::once(log.start).chain(log.steps.iter().map(|s| s.pose)).collect();
    image::trajectory_image(&world, &path).write(&out.join("trajectory.ppm"))?;
    let (img, truth) = sim::render_camera(&world, &world.start, &cam, &ep.shift, seed, 0);
    let seg = sim::segment_view(&source, &img, &truth, &cam, world.sky_class())?;
    image::class_image(&seg, cam.rows, cam.cols).write(&out.join("first_view.ppm"))?;
    Ok(format!(
        "{} after {} steps, path length {}, violation {}",
        if log.reached { "reached goal" } else { "did not reach goal" },
        log.steps.len(),
        fmt_sig(Some(log.path_length)),
        log.violation
    ))
}

pub fn episode_csv(log: &sim::EpisodeLog) -> String {
    let mut csv = String::from("step,x,y,psi,prim_index,coll_cost,targ_cost,violation,done\n");
    for s in &log.steps {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.step,
            fmt_sig(Some(s.pose.x)),
            fmt_sig(Some(s.pose.y)),
            fmt_sig(Some(s.pose.psi)),
            s.prim_index,
            fmt_sig(Some(s.coll_cost)),
            fmt_sig(Some(s.targ_cost)),
            u8::from(s.violation),
            u8::from(s.done)
        ));
    }
    csv
}
