//! Labelled toy corpus: generation, manifests, and watermarking of an
//! attribute-defined subset.

mod manifest;
mod mark;
mod synth;

use std::io;
use std::path::Path;

use thiserror::Error;

use crate::codec::{CodecConfig, CodecError};
use crate::image::ImageError;
use crate::kvfile::ParseError;

pub use manifest::{load_manifest, save_manifest, Manifest, ManifestRecord, MANIFEST_MAGIC, MANIFEST_VERSION};
pub use mark::{mark_subset, payload_id};
pub use synth::{render, OverlayKind, RenderedImage};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("IoError: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("ValidationError: manifest references missing image files: {}", .0.join(", "))]
    MissingFiles(Vec<String>),
    #[error("ValidationError: {0}")]
    Invalid(String),
    #[error("UnknownAttribute: `{0}` is not declared by the dataset")]
    UnknownAttribute(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        DatasetError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSpec {
    pub name: String,
    pub prevalence: f64,
}

impl AttributeSpec {
    pub fn new(name: impl Into<String>, prevalence: f64) -> Result<Self, DatasetError> {
        let name = name.into();
        if name.is_empty() || name.contains([',', ':', '=', ' ']) || name == "-" || name == "*" {
            return Err(DatasetError::Invalid(format!("invalid attribute name `{name}`")));
        }
        if !(prevalence > 0.0 && prevalence < 1.0) {
            return Err(DatasetError::Invalid(format!(
                "prevalence of `{name}` must lie in (0, 1), got {prevalence}"
            )));
        }
        Ok(AttributeSpec { name, prevalence })
    }
}

/// Default attribute prevalences: 45.5%, 20.5% and 4.7% of the corpus.
pub fn default_attributes() -> Vec<AttributeSpec> {
    [("disc", 0.455), ("stripes", 0.205), ("checker", 0.047)]
        .into_iter()
        .map(|(n, p)| AttributeSpec::new(n, p).expect("valid defaults"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub n_images: usize,
    pub width: usize,
    pub height: usize,
    pub attributes: Vec<AttributeSpec>,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            n_images: 10_000,
            width: 64,
            height: 64,
            attributes: default_attributes(),
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.n_images == 0 {
            return Err(DatasetError::Invalid("n_images must be at least 1".into()));
        }
        CodecConfig::default().block_grid(self.width, self.height)?;
        let mut names: Vec<&str> = self.attributes.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if let Some(dup) = names.windows(2).find(|p| p[0] == p[1]) {
            return Err(DatasetError::Invalid(format!("attribute `{}` declared twice", dup[0])));
        }
        for a in &self.attributes {
            AttributeSpec::new(a.name.clone(), a.prevalence)?;
        }
        Ok(())
    }

    pub fn has_attribute(&self, name: &str) -> bool {
        self.attributes.iter().any(|a| a.name == name)
    }
}

/// Renders every record of `spec` into `out_dir/images/` and writes
/// `out_dir/manifest.txt`.
pub fn synth_dataset(spec: &DatasetSpec, out_dir: &Path) -> Result<Manifest, DatasetError> {
    use rayon::prelude::*;

    spec.validate()?;
    let images = out_dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| DatasetError::io(&images, e))?;
    let records = (0..spec.n_images)
        .into_par_iter()
        .map(|i| {
            let rendered = render(spec, i as u64);
            let rel = format!("images/img_{i:06}.pgm");
            rendered.image.write_pnm(&out_dir.join(&rel))?;
            Ok(ManifestRecord {
                path: rel,
                attributes: rendered.attributes,
                watermarked: false,
                payload_id: None,
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    let manifest = Manifest {
        spec: spec.clone(),
        codec_fingerprint: None,
        revision: 0,
        records,
        root: out_dir.to_path_buf(),
    };
    save_manifest(&manifest, &out_dir.join("manifest.txt"))?;
    Ok(manifest)
}
