//! Specimen images to labelled, augmented cell datasets.

pub mod augment;
pub mod extract;
pub mod image;
pub mod manifest;
pub mod record;
pub mod transform;

pub use augment::{augment_task2_policy, augment_x8, build_set3, set3_indices, AugmentPolicy};
pub use extract::{connected_components, extract_cells, CELL_BOX};
pub use image::GrayImage;
pub use manifest::{load_manifest, write_manifest, DatasetManifest, ManifestEntry};
pub use record::{class_name, parse_class, CellRecord, PatternClass, Provenance, SegmentationMask, SpecimenImage};
pub use transform::{mirror, resize_bilinear, rotate, INPUT_SIDE};
