//! Dataset manifests (`path,label` CSV) and dataset directories.
//!
//! A dataset directory holds `train.csv` and `test.csv`; image paths in a
//! manifest are relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use relbench_core::{synth, Image};

use crate::tnsr::{load_tensor, save_tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub path: PathBuf,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<Entry>,
}

impl DatasetManifest {
    pub fn class_count(&self) -> usize {
        self.entries.iter().map(|e| e.label + 1).max().unwrap_or(0)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn per_class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.class_count()];
        for e in &self.entries {
            c[e.label] += 1;
        }
        c
    }

    pub fn resolve(&self, e: &Entry) -> PathBuf {
        self.root.join(&e.path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let manifest_err = |msg: String| Error::Manifest {
            path: path.to_path_buf(),
            msg,
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| manifest_err(e.to_string()))?;
            if line == 0 && rec.get(0) == Some("path") && rec.get(1) == Some("label") {
                continue;
            }
            if rec.len() != 2 {
                return Err(manifest_err(format!("line {}: expected `path,label`", line + 1)));
            }
            let label = rec[1]
                .parse()
                .map_err(|_| manifest_err(format!("line {}: bad label `{}`", line + 1, &rec[1])))?;
            entries.push(Entry {
                path: PathBuf::from(&rec[0]),
                label,
            });
        }
        Ok(Self {
            root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            entries,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Manifest {
            path: path.to_path_buf(),
            msg: e.to_string(),
        };
        w.write_record(["path", "label"]).map_err(err)?;
        for e in &self.entries {
            w.write_record([e.path.to_string_lossy().as_ref(), &e.label.to_string()])
                .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Loads every image; errors name the offending file.
    pub fn load_images(&self) -> Result<Vec<(Image, usize)>> {
        self.entries
            .iter()
            .map(|e| {
                let p = self.resolve(e);
                let img = Image::from_tensor(&load_tensor(&p)?).map_err(|err| Error::Manifest {
                    path: p.clone(),
                    msg: err.to_string(),
                })?;
                Ok((img, e.label))
            })
            .collect()
    }
}

/// Loads `<dir>/<split>.csv` and its images, checking the directory first
/// so a wrong path gives a clear message.
pub fn load_split(dir: &Path, split: &str) -> Result<(DatasetManifest, Vec<(Image, usize)>)> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("dataset directory {} does not exist", dir.display())));
    }
    let m = DatasetManifest::load(dir.join(format!("{split}.csv")))?;
    let images = m.load_images()?;
    Ok((m, images))
}

/// Writes a synthetic dataset: `n` images split into `train.csv` and
/// `test.csv` at `train_fraction`.
pub fn write_synthetic(
    dir: &Path,
    n: usize,
    classes: usize,
    size: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<()> {
    let images_dir = dir.join("images");
    fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
    let data = synth::generate(n, classes, size, size, seed)?;
    let n_train = (n as f64 * train_fraction).round() as usize;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, (img, label)) in data.iter().enumerate() {
        let rel = PathBuf::from("images").join(format!("{i:06}.tnsr"));
        save_tensor(&img.to_tensor(), dir.join(&rel))?;
        let e = Entry { path: rel, label: *label };
        if i < n_train {
            train.push(e);
        } else {
            test.push(e);
        }
    }
    for (name, entries) in [("train", train), ("test", test)] {
        DatasetManifest {
            root: dir.to_path_buf(),
            entries,
        }
        .save(dir.join(format!("{name}.csv")))?;
    }
    Ok(())
}
