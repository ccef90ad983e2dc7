use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{DatasetError, Manifest};
use crate::codec::{embed, BitPayload, CodecConfig, WatermarkKey};
use crate::image::ImageBuffer;

/// Short identifier of a `(payload, key, codec)` triple as stored in a
/// manifest record.
pub fn payload_id(payload: &BitPayload, key: WatermarkKey, config: &CodecConfig) -> String {
    let mut h = Sha256::new();
    h.update(payload.to_string().as_bytes());
    h.update(key.seed().to_le_bytes());
    h.update(config.fingerprint().as_bytes());
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Embeds `payload` into every record carrying `attribute`, overwriting the
/// image files in place, and returns the updated manifest.
///
/// Records that already carry the same payload id are left untouched, so a
/// repeated call is a no-op apart from the revision counter. A record marked
/// with a different payload, or a manifest stamped with a different codec, is
/// an error.
pub fn mark_subset(
    manifest: &Manifest,
    attribute: &str,
    payload: &BitPayload,
    key: WatermarkKey,
    config: &CodecConfig,
) -> Result<Manifest, DatasetError> {
    if !manifest.spec.has_attribute(attribute) {
        return Err(DatasetError::UnknownAttribute(attribute.to_string()));
    }
    config.validate()?;
    let fingerprint = config.fingerprint();
    if let Some(existing) = &manifest.codec_fingerprint {
        if *existing != fingerprint {
            return Err(DatasetError::Invalid(format!(
                "manifest was marked with codec {existing}, current configuration is {fingerprint}"
            )));
        }
    }
    let id = payload_id(payload, key, config);
    let targets: Vec<usize> = manifest
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.has(attribute))
        .map(|(i, _)| i)
        .collect();
    for &i in &targets {
        let r = &manifest.records[i];
        if let Some(other) = r.payload_id.as_deref().filter(|p| *p != id) {
            return Err(DatasetError::Invalid(format!(
                "record `{}` already carries payload {other}",
                r.path
            )));
        }
    }

    let fresh: Vec<usize> = targets
        .into_iter()
        .filter(|&i| !manifest.records[i].watermarked)
        .collect();
    fresh.par_iter().try_for_each(|&i| -> Result<(), DatasetError> {
        let path = manifest.image_path(&manifest.records[i]);
        let image = ImageBuffer::read_pnm(&path)?;
        let marked = embed(&image, payload, key, config)?;
        marked.write_pnm(&path)?;
        Ok(())
    })?;

    let mut out = manifest.clone();
    for i in fresh {
        out.records[i].watermarked = true;
        out.records[i].payload_id = Some(id.clone());
    }
    out.codec_fingerprint = Some(fingerprint);
    out.revision += 1;
    Ok(out)
}
