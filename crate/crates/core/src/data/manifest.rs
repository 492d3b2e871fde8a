//! Dataset manifests: one CSV line per cell image.
//!
//! ```text
//! path,label,specimen_id,provenance
//! cells/s01/000000_original.png,Centromere,s01,original
//! ```
//!
//! Paths are relative to the manifest's directory. Count summaries are
//! recomputed from the entries rather than stored.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use crate::data::image::GrayImage;
use crate::data::record::{class_name, parse_class, CellRecord, Provenance};
use crate::error::{Error, Result};

pub const HEADER: [&str; 4] = ["path", "label", "specimen_id", "provenance"];

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    /// Image path relative to the manifest directory.
    pub path: PathBuf,
    pub label: usize,
    pub specimen_id: String,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    /// Directory that entry paths are relative to.
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn class_counts(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            *counts.entry(e.label).or_insert(0) += 1;
        }
        counts
    }

    /// Cells per specimen in order of first appearance.
    pub fn specimen_counts(&self) -> Vec<(String, usize)> {
        let mut counts: Vec<(String, usize)> = Vec::new();
        let mut slot: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &self.entries {
            match slot.get(e.specimen_id.as_str()) {
                Some(&i) => counts[i].1 += 1,
                None => {
                    slot.insert(&e.specimen_id, counts.len());
                    counts.push((e.specimen_id.clone(), 1));
                }
            }
        }
        counts
    }

    /// Parse a manifest file without touching the images.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(file, root)
    }

    pub fn parse<R: std::io::Read>(input: R, root: PathBuf) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header_err = |message: String| Error::Parse { line: 1, message };
        let headers = reader.headers().map_err(|e| header_err(e.to_string()))?;
        if headers.iter().map(str::trim).ne(HEADER) {
            return Err(header_err(format!("expected header `{}`", HEADER.join(","))));
        }
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for row in reader.records() {
            let row = row.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let err = |message: String| Error::Parse { line, message };
            if row.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", row.len())));
            }
            let rel = row[0].trim();
            if rel.is_empty() {
                return Err(err("empty image path".into()));
            }
            let specimen_id = row[2].trim().to_string();
            if specimen_id.is_empty() {
                return Err(err("empty specimen id".into()));
            }
            let entry = ManifestEntry {
                path: PathBuf::from(rel),
                label: parse_class(&row[1]).map_err(|e| err(e.to_string()))?,
                specimen_id,
                provenance: row[3].trim().parse().map_err(|e: Error| err(e.to_string()))?,
            };
            if !seen.insert(entry.path.clone()) {
                return Err(err(format!("duplicate path `{rel}`")));
            }
            entries.push(entry);
        }
        Ok(DatasetManifest { root, entries })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path.as_ref()).map_err(|e| Error::File {
            path: path.as_ref().to_path_buf(),
            message: e.to_string(),
        })?;
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        writer.write_record(HEADER).map_err(csv_err)?;
        for e in &self.entries {
            let rel = e.path.to_string_lossy().replace('\\', "/");
            writer
                .write_record([
                    rel.as_str(),
                    &class_name(e.label),
                    &e.specimen_id,
                    &e.provenance.to_string(),
                ])
                .map_err(csv_err)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Decode every referenced image into a [`CellRecord`].
    pub fn load_records(&self, unit_range: bool) -> Result<Vec<CellRecord>> {
        self.entries
            .iter()
            .map(|e| {
                let full = self.root.join(&e.path);
                if !full.is_file() {
                    return Err(Error::File {
                        path: full,
                        message: "image file not found".into(),
                    });
                }
                let pixels = GrayImage::load(&full, unit_range)?;
                let mut record = CellRecord::new(pixels, e.label, e.specimen_id.clone())?;
                record.provenance = e.provenance;
                Ok(record)
            })
            .collect()
    }
}

fn path_component(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Write every record as an 8-bit PNG under `cells/` next to `path`, then the manifest.
pub fn write_manifest(records: &[CellRecord], path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut entries = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let rel = PathBuf::from("cells")
            .join(path_component(&r.specimen_id))
            .join(format!("{i:06}_{}.png", r.provenance));
        let full = root.join(&rel);
        if let Some(dir) = full.parent() {
            std::fs::create_dir_all(dir)?;
        }
        r.pixels.save_png(&full)?;
        entries.push(ManifestEntry {
            path: rel,
            label: r.label,
            specimen_id: r.specimen_id.clone(),
            provenance: r.provenance,
        });
    }
    let manifest = DatasetManifest { root, entries };
    manifest.write(path)?;
    Ok(manifest)
}

/// Read a manifest and decode its images with intensities scaled to `[0, 1]`.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<CellRecord>> {
    DatasetManifest::read(path)?.load_records(true)
}
