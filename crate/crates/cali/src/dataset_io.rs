//! Dataset directories: a `manifest.txt` of `key=value` lines plus one
//! TensorPack per sample holding `image` (f32 `3×H×W`) and `label`
//! (u8 `H×W`).

use std::path::Path;

use cali_core::data::{Dataset, Domain, SegSample};
use cali_core::diffcore::Tensor;

use crate::config::parse_text;
use crate::tensorpack::{self, Entry};
use crate::{io_err, Error, Result};

pub const MANIFEST: &str = "manifest.txt";

pub fn sample_name(i: usize) -> String {
    format!("sample_{i:05}.ctp")
}

/// Writes `data` into `dir`, which must not already hold a manifest.
/// `extra` lines (e.g. the shift used) are appended to the manifest.
pub fn write_dataset(dir: &Path, data: &Dataset, extra: &[(&str, String)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = dir.join(MANIFEST);
    if manifest.exists() {
        return Err(Error::Usage(format!("{} already exists", manifest.display())));
    }
    let domain = match data.samples.first().map(|s| s.domain) {
        Some(Domain::Target) => "target",
        _ => "source",
    };
    let mut text = format!(
        "n={}\nH={}\nW={}\nK={}\nlabeled={}\ndomain={domain}\n",
        data.len(),
        data.height,
        data.width,
        data.classes,
        u8::from(data.labeled)
    );
    for (k, v) in extra {
        text.push_str(&format!("{k}={v}\n"));
    }
    for (i, s) in data.samples.iter().enumerate() {
        let name = sample_name(i);
        let mut entries = vec![Entry::f32("image", s.image.shape(), s.image.data().to_vec())];
        if let Some(label) = &s.label {
            entries.push(Entry::u8("label", &[data.height, data.width], label.clone()));
        }
        tensorpack::write_file(&dir.join(&name), &entries)?;
        text.push_str(&format!("file.{i}={name}\n"));
    }
    std::fs::write(&manifest, text).map_err(io_err(&manifest))
}

/// Reads a dataset directory. Labels present in the sample files are kept
/// even when the manifest marks the set unlabeled.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let kv = parse_text(&text)?;
    let find = |k: &str| -> Result<&str> {
        kv.iter()
            .find(|(key, _, _)| key == k)
            .map(|(_, v, _)| v.as_str())
            .ok_or_else(|| Error::Usage(format!("{}: missing key {k}", path.display())))
    };
    let num = |k: &str| -> Result<usize> {
        find(k)?
            .parse()
            .map_err(|_| Error::Usage(format!("{}: bad value for {k}", path.display())))
    };
    let (n, h, w, k) = (num("n")?, num("H")?, num("W")?, num("K")?);
    let labeled = num("labeled")? == 1;
    let domain = match find("domain").unwrap_or("source") {
        "target" => Domain::Target,
        _ => Domain::Source,
    };
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let name = find(&format!("file.{i}"))?;
        let file = dir.join(name);
        let entries = tensorpack::read_file(&file)?;
        let image = tensorpack::find(&entries, "image")?;
        if image.dims != [3, h, w] {
            return Err(Error::Usage(format!("{}: image shape {:?}, expected [3, {h}, {w}]", file.display(), image.dims)));
        }
        let label = match tensorpack::find(&entries, "label") {
            Ok(e) => {
                let l = e.as_u8()?;
                if e.dims != [h, w] {
                    return Err(Error::Usage(format!("{}: label shape {:?}", file.display(), e.dims)));
                }
                if let Some(bad) = l.iter().find(|&&c| c as usize >= k) {
                    return Err(Error::Core(cali_core::Error::Validation(format!(
                        "{}: label {bad} >= K={k}",
                        file.display()
                    ))));
                }
                Some(l.to_vec())
            }
            Err(_) if !labeled => None,
            Err(e) => return Err(e),
        };
        samples.push(SegSample {
            image: Tensor::from_vec(&[3, h, w], image.as_f32()?.to_vec())?,
            label,
            domain,
        });
    }
    Ok(Dataset {
        samples,
        height: h,
        width: w,
        classes: k,
        labeled,
    })
}
