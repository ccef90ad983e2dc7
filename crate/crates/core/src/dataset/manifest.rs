use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::{AttributeSpec, DatasetError, DatasetSpec};
use crate::kvfile::{self, KvGroup, KvWriter, ParseError};

pub const MANIFEST_MAGIC: &str = "WMCTL-MANIFEST";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    /// Image path relative to the manifest directory.
    pub path: String,
    pub attributes: Vec<String>,
    pub watermarked: bool,
    pub payload_id: Option<String>,
}

impl ManifestRecord {
    pub fn has(&self, attribute: &str) -> bool {
        self.attributes.iter().any(|a| a == attribute)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub spec: DatasetSpec,
    pub codec_fingerprint: Option<String>,
    /// Bumped by every marking pass.
    pub revision: u64,
    pub records: Vec<ManifestRecord>,
    /// Directory that record paths are relative to; not serialized.
    pub root: PathBuf,
}

impl Manifest {
    pub fn image_path(&self, record: &ManifestRecord) -> PathBuf {
        self.root.join(&record.path)
    }

    pub fn count_with(&self, attribute: &str) -> usize {
        self.records.iter().filter(|r| r.has(attribute)).count()
    }

    pub fn watermarked_count(&self) -> usize {
        self.records.iter().filter(|r| r.watermarked).count()
    }

    pub fn to_text(&self) -> String {
        let mut w = KvWriter::new(MANIFEST_MAGIC, MANIFEST_VERSION);
        let attrs: Vec<String> = self
            .spec
            .attributes
            .iter()
            .map(|a| format!("{}:{}", a.name, a.prevalence))
            .collect();
        w.field("n_images", self.spec.n_images)
            .field("width", self.spec.width)
            .field("height", self.spec.height)
            .field("seed", self.spec.seed)
            .field("attributes", or_dash(&attrs.join(",")))
            .field("codec", self.codec_fingerprint.as_deref().unwrap_or("-"))
            .field("revision", self.revision)
            .end_group();
        for r in &self.records {
            w.field("path", &r.path)
                .field("attributes", or_dash(&r.attributes.join(",")))
                .field("watermarked", u8::from(r.watermarked))
                .field("payload_id", r.payload_id.as_deref().unwrap_or("-"))
                .end_group();
        }
        w.finish()
    }

    /// Parses manifest text; record paths resolve against `root`.
    ///
    /// Structure is checked here; file existence is checked by
    /// [`Manifest::validate_files`].
    pub fn parse(text: &str, root: &Path) -> Result<Manifest, DatasetError> {
        let doc = kvfile::parse(text, MANIFEST_MAGIC, MANIFEST_VERSION)?;
        let mut groups = doc.groups.iter();
        let head = groups
            .next()
            .ok_or_else(|| ParseError::field(doc.lines, "n_images", "missing dataset header group"))?;

        let attr_line = head.entry("attributes").map_or(head.line, |e| e.line);
        let attributes = match head.require("attributes")? {
            "-" => Vec::new(),
            v => kvfile::parse_pairs::<f64>(v, attr_line, "attributes")?
                .into_iter()
                .map(|(n, p)| AttributeSpec::new(n, p))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let spec = DatasetSpec {
            n_images: head.parse_required("n_images")?,
            width: head.parse_required("width")?,
            height: head.parse_required("height")?,
            seed: head.parse_required("seed")?,
            attributes,
        };
        spec.validate()?;
        let codec_fingerprint = dash_none(head.require("codec")?);
        let revision = head.parse_required("revision")?;

        let records = groups
            .map(|g| parse_record(g, &spec))
            .collect::<Result<Vec<_>, _>>()?;
        if records.len() != spec.n_images {
            return Err(ParseError::new(
                doc.lines,
                format!("header declares {} images but {} records follow", spec.n_images, records.len()),
            )
            .into());
        }
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.path.as_str()) {
                return Err(DatasetError::Invalid(format!("duplicate record path `{}`", r.path)));
            }
        }
        Ok(Manifest {
            spec,
            codec_fingerprint,
            revision,
            records,
            root: root.to_path_buf(),
        })
    }

    /// Lists every record whose image file is missing.
    pub fn validate_files(&self) -> Result<(), DatasetError> {
        let missing: Vec<String> = self
            .records
            .iter()
            .filter(|r| !self.image_path(r).is_file())
            .map(|r| r.path.clone())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::MissingFiles(missing))
        }
    }
}

fn parse_record(g: &KvGroup, spec: &DatasetSpec) -> Result<ManifestRecord, DatasetError> {
    let path = g.require("path")?.to_string();
    let attributes: Vec<String> = match g.require("attributes")? {
        "-" => Vec::new(),
        v => kvfile::split_list(v).map(str::to_string).collect(),
    };
    let attr_line = g.entry("attributes").map_or(g.line, |e| e.line);
    if let Some(unknown) = attributes.iter().find(|a| !spec.has_attribute(a)) {
        return Err(ParseError::field(attr_line, "attributes", format!("undeclared attribute `{unknown}`")).into());
    }
    let wm_line = g.entry("watermarked").map_or(g.line, |e| e.line);
    let watermarked = match g.require("watermarked")? {
        "0" => false,
        "1" => true,
        other => {
            return Err(ParseError::field(wm_line, "watermarked", format!("expected 0 or 1, found `{other}`")).into())
        }
    };
    let payload_id = dash_none(g.require("payload_id")?);
    if watermarked != payload_id.is_some() {
        return Err(ParseError::field(
            wm_line,
            "payload_id",
            format!("record `{path}`: watermarked records need a payload_id and others must not have one"),
        )
        .into());
    }
    Ok(ManifestRecord {
        path,
        attributes,
        watermarked,
        payload_id,
    })
}

fn or_dash(s: &str) -> &str {
    if s.is_empty() {
        "-"
    } else {
        s
    }
}

fn dash_none(s: &str) -> Option<String> {
    (s != "-" && !s.is_empty()).then(|| s.to_string())
}

/// Reads a manifest and checks that every referenced image exists.
pub fn load_manifest(path: &Path) -> Result<Manifest, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = Manifest::parse(&text, &root)?;
    manifest.validate_files()?;
    Ok(manifest)
}

pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<(), DatasetError> {
    fs::write(path, manifest.to_text()).map_err(|e| DatasetError::io(path, e))
}
