//! Folder-per-class dataset discovery.

use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use super::image::{preprocess, ImageSample, ValueRange};
use super::pnm::decode_image;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: PathBuf,
    pub class_name: String,
    pub class_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
    /// Index is the class id.
    pub class_names: Vec<String>,
    /// Files that could not be decoded.
    pub skipped: usize,
}

impl DatasetManifest {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|n| n == name)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for r in &self.records {
            counts[r.class_id] += 1;
        }
        counts
    }

    /// Writes `path,class_name,class_id` with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| csv_io(path, e))?;
        w.write_record(["path", "class_name", "class_id"])
            .map_err(|e| csv_io(path, e))?;
        for r in &self.records {
            w.write_record([
                r.path.to_string_lossy().as_ref(),
                r.class_name.as_str(),
                r.class_id.to_string().as_str(),
            ])
            .map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_io(path, e))?;
        let mut records = Vec::new();
        let mut class_names: Vec<Option<String>> = Vec::new();
        for (i, row) in rdr.deserialize::<ManifestRecord>().enumerate() {
            let row = row.map_err(|e| Error::Csv {
                row: i + 2,
                msg: e.to_string(),
            })?;
            if row.class_id >= class_names.len() {
                class_names.resize(row.class_id + 1, None);
            }
            match &class_names[row.class_id] {
                Some(name) if *name != row.class_name => {
                    return Err(Error::Csv {
                        row: i + 2,
                        msg: format!("class id {} used for both {name} and {}", row.class_id, row.class_name),
                    })
                }
                _ => class_names[row.class_id] = Some(row.class_name.clone()),
            }
            records.push(row);
        }
        let class_names = class_names
            .into_iter()
            .enumerate()
            .map(|(id, n)| n.ok_or_else(|| Error::invalid(format!("class id {id} missing from manifest"))))
            .collect::<Result<Vec<_>>>()?;
        if class_names.is_empty() {
            return Err(Error::NoClasses(path.to_path_buf()));
        }
        Ok(Self {
            records,
            class_names,
            skipped: 0,
        })
    }

    /// Decodes and preprocesses every record whose class is in `classes`
    /// (all records when `None`). Labels keep the manifest's class ids.
    pub fn load_samples(&self, classes: Option<&[usize]>, range: ValueRange) -> Result<Vec<ImageSample>> {
        self.records
            .iter()
            .filter(|r| classes.is_none_or(|c| c.contains(&r.class_id)))
            .map(|r| preprocess(&decode_image(&r.path)?, r.class_id, range))
            .collect()
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        row: e.position().map_or(0, |p| p.line() as usize),
        msg: format!("{}: {e}", path.display()),
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Scans `root/<class>/<image>`; classes and files are taken in lexicographic
/// order and classes are numbered from 0 in that order. Classes without any
/// decodable image are left out.
pub fn load_manifest(root: &Path) -> Result<DatasetManifest> {
    let mut records = Vec::new();
    let mut class_names = Vec::new();
    let mut skipped = 0;
    for class_dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let class_name = class_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut any = false;
        for file in sorted_entries(&class_dir)?.into_iter().filter(|p| p.is_file()) {
            if let Err(e) = decode_image(&file) {
                warn!("skipping {}: {e}", file.display());
                skipped += 1;
                continue;
            }
            any = true;
            records.push(ManifestRecord {
                path: file,
                class_name: class_name.clone(),
                class_id: class_names.len(),
            });
        }
        if any {
            class_names.push(class_name);
        }
    }
    if class_names.is_empty() {
        return Err(Error::NoClasses(root.to_path_buf()));
    }
    Ok(DatasetManifest {
        records,
        class_names,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::pnm::{encode_binary, Raster};

    fn write_img(path: &Path, v: u8) {
        let r = Raster::gray(2, 2, vec![v; 4]).unwrap();
        std::fs::write(path, encode_binary(&r)).unwrap();
    }

    fn toy_tree() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (class, n) in [("b", 1), ("a", 2)] {
            std::fs::create_dir(dir.path().join(class)).unwrap();
            for i in 0..n {
                write_img(&dir.path().join(class).join(format!("{i}.pgm")), 10 * i as u8);
            }
        }
        dir
    }

    #[test]
    fn toy_manifest() {
        let dir = toy_tree();
        std::fs::write(dir.path().join("a").join("broken.pgm"), b"P5 9 9 255\n").unwrap();
        let m = load_manifest(dir.path()).unwrap();
        assert_eq!(m.records.len(), 3);
        assert_eq!(m.class_names, vec!["a", "b"]);
        assert_eq!(m.class_id("b"), Some(1));
        assert_eq!(m.class_counts(), vec![2, 1]);
        assert_eq!(m.skipped, 1);
        assert_eq!(load_manifest(dir.path()).unwrap(), m);
    }

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_manifest(dir.path()), Err(Error::NoClasses(_))));
    }

    #[test]
    fn csv_round_trip() {
        let dir = toy_tree();
        let m = load_manifest(dir.path()).unwrap();
        let out = dir.path().join("manifest.csv");
        m.write_csv(&out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("path,class_name,class_id\n"));
        let back = DatasetManifest::read_csv(&out).unwrap();
        assert_eq!(back.records, m.records);
        assert_eq!(back.class_names, m.class_names);
        let samples = back.load_samples(Some(&[1]), ValueRange::Unit).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].pixels.len(), 64 * 64);
    }
}
