//! Architecture manifests shipped with the crate.

use crate::error::{Error, Result};
use crate::tensor::ModelManifest;

pub const BUILTIN_ARCHS: [&str; 4] = ["resnet56", "resnet110", "resnet50", "googlenet"];

fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "resnet56" => include_str!("../data/arch/resnet56.json"),
        "resnet110" => include_str!("../data/arch/resnet110.json"),
        "resnet50" => include_str!("../data/arch/resnet50.json"),
        "googlenet" => include_str!("../data/arch/googlenet.json"),
        _ => return None,
    })
}

/// Parsed and validated built-in manifest.
pub fn builtin(name: &str) -> Result<ModelManifest> {
    let text = source(name).ok_or_else(|| {
        Error::InvalidManifest(format!("unknown architecture `{name}` (expected one of {})", BUILTIN_ARCHS.join(", ")))
    })?;
    let manifest = ModelManifest::from_json(text).map_err(|e| Error::InvalidManifest(format!("{name}: {e}")))?;
    manifest.validate()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::LayerKind;

    #[test]
    fn all_builtins_validate() {
        for name in BUILTIN_ARCHS {
            builtin(name).unwrap();
        }
        assert!(builtin("vgg16").is_err());
    }

    #[test]
    fn resnet56_has_55_convs_and_one_fc() {
        let m = builtin("resnet56").unwrap();
        let count = |k| m.layers.iter().filter(|l| l.kind == k).count();
        assert_eq!(count(LayerKind::Conv), 55);
        assert_eq!(count(LayerKind::Fc), 1);
    }
}
