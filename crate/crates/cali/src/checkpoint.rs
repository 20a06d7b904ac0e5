//! Model checkpoints: every parameter as an f32 entry plus a
//! `__manifest__` u8 entry holding the model configuration as
//! `key=value` text.

use std::path::Path;

use cali_core::diffcore::{ParamSet, Tensor};
use cali_core::models::{CaliModel, ClassifierCfg, DiscriminatorCfg, ExtractorCfg, ModelCfg, Stage};

use crate::config::parse_text;
use crate::tensorpack::{self, Entry};
use crate::{Error, Result};

pub const MANIFEST_ENTRY: &str = "__manifest__";

fn list<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn model_cfg_text(cfg: &ModelCfg) -> String {
    let e = &cfg.extractor;
    let c = &cfg.classifier;
    let d = &cfg.discriminator;
    let stages: Vec<String> = e.stages.iter().map(|s| format!("{}/{}", s.channels, s.stride)).collect();
    format!(
        "extractor.in={}\nextractor.stages={}\nextractor.kernel={}\nextractor.slope={}\n\
         classifier.in={}\nclassifier.hidden={}\nclassifier.classes={}\nclassifier.upsample={}\nclassifier.slope={}\n\
         discriminator.in={}\ndiscriminator.channels={}\ndiscriminator.kernel={}\ndiscriminator.stride={}\n\
         discriminator.pad={}\ndiscriminator.slope={}\n",
        e.in_channels,
        stages.join(","),
        e.kernel,
        e.slope,
        c.in_channels,
        c.hidden,
        c.classes,
        c.upsample,
        c.slope,
        d.in_channels,
        list(&d.channels),
        d.kernel,
        d.stride,
        d.pad,
        d.slope
    )
}

pub fn parse_model_cfg(text: &str) -> Result<ModelCfg> {
    let kv = parse_text(text)?;
    let get = |k: &str| -> Result<&str> {
        kv.iter()
            .find(|(key, _, _)| key == k)
            .map(|(_, v, _)| v.as_str())
            .ok_or_else(|| Error::Format { offset: 0, msg: format!("checkpoint manifest lacks {k}") })
    };
    fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
        v.trim()
            .parse()
            .map_err(|_| Error::Format { offset: 0, msg: format!("checkpoint manifest: bad {k}={v}") })
    }
    let n = |k: &str| -> Result<usize> { num(k, get(k)?) };
    let f = |k: &str| -> Result<f64> { num(k, get(k)?) };
    let stages = get("extractor.stages")?
        .split(',')
        .map(|s| {
            let (c, st) = s
                .split_once('/')
                .ok_or_else(|| Error::Format { offset: 0, msg: format!("bad stage {s:?}") })?;
            Ok(Stage { channels: num("stage", c)?, stride: num("stage", st)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let channels = get("discriminator.channels")?
        .split(',')
        .map(|c| num("discriminator.channels", c))
        .collect::<Result<Vec<usize>>>()?;
    let cfg = ModelCfg {
        extractor: ExtractorCfg {
            in_channels: n("extractor.in")?,
            stages,
            kernel: n("extractor.kernel")?,
            slope: f("extractor.slope")?,
        },
        classifier: ClassifierCfg {
            in_channels: n("classifier.in")?,
            hidden: n("classifier.hidden")?,
            classes: n("classifier.classes")?,
            upsample: n("classifier.upsample")?,
            slope: f("classifier.slope")?,
        },
        discriminator: DiscriminatorCfg {
            in_channels: n("discriminator.in")?,
            channels,
            kernel: n("discriminator.kernel")?,
            stride: n("discriminator.stride")?,
            pad: n("discriminator.pad")?,
            slope: f("discriminator.slope")?,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn to_entries(model: &CaliModel<f32>) -> Vec<Entry> {
    let mut entries = vec![Entry::u8(MANIFEST_ENTRY, &[model_cfg_text(&model.cfg).len()], model_cfg_text(&model.cfg).into_bytes())];
    for set in [&model.g, &model.c1, &model.c2, &model.d] {
        for p in &set.params {
            entries.push(Entry::f32(p.name.clone(), p.value.shape(), p.value.data().to_vec()));
        }
    }
    entries
}

fn fill(set: &mut ParamSet<f32>, entries: &[Entry]) -> Result<()> {
    for p in &mut set.params {
        let e = tensorpack::find(entries, &p.name)?;
        if e.dims != p.value.shape() {
            return Err(Error::Format {
                offset: 0,
                msg: format!("parameter {} has shape {:?}, expected {:?}", p.name, e.dims, p.value.shape()),
            });
        }
        p.value = Tensor::from_vec(&e.dims, e.as_f32()?.to_vec())?;
    }
    Ok(())
}

pub fn from_entries(entries: &[Entry]) -> Result<CaliModel<f32>> {
    let manifest = tensorpack::find(entries, MANIFEST_ENTRY)?.as_u8()?;
    let text = std::str::from_utf8(manifest)
        .map_err(|_| Error::Format { offset: 0, msg: "checkpoint manifest is not UTF-8".into() })?;
    let cfg = parse_model_cfg(text)?;
    let mut model = CaliModel::build(cfg, 0)?;
    fill(&mut model.g, entries)?;
    fill(&mut model.c1, entries)?;
    fill(&mut model.c2, entries)?;
    fill(&mut model.d, entries)?;
    let expected = 1 + model.g.len() + model.c1.len() + model.c2.len() + model.d.len();
    if entries.len() != expected {
        return Err(Error::Format {
            offset: 0,
            msg: format!("checkpoint has {} entries, model needs {expected}", entries.len()),
        });
    }
    Ok(model)
}

pub fn save(path: &Path, model: &CaliModel<f32>) -> Result<()> {
    tensorpack::write_file(path, &to_entries(model))
}

pub fn load(path: &Path) -> Result<CaliModel<f32>> {
    from_entries(&tensorpack::read_file(path)?)
}
