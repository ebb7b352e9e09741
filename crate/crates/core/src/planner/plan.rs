use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sketch::sketch_size;
use crate::tensor::{LayerKind, LayerSpec, ModelManifest};

/// Rates and target widths for every conv/fc layer of one manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunePlan {
    pub global_rate: f64,
    /// Effective rate per conv/fc layer (1.0 for layers left intact).
    pub rates: BTreeMap<String, f64>,
    pub sketch_sizes: BTreeMap<String, usize>,
    pub group_rates: BTreeMap<String, f64>,
}

fn check_rate(rate: f64) -> Result<f64> {
    if rate > 0.0 && rate <= 1.0 {
        Ok(rate)
    } else {
        Err(Error::InvalidRate(rate))
    }
}

/// Rate `alpha` for prunable convs, 1.0 elsewhere, overrides on top; each
/// prune group then takes the minimum rate of its members.
pub fn build_plan(manifest: &ModelManifest, alpha: f64, overrides: &BTreeMap<String, f64>) -> Result<PrunePlan> {
    check_rate(alpha)?;
    manifest.validate()?;
    for (name, &rate) in overrides {
        let layer = manifest.layer(name).ok_or_else(|| Error::UnknownLayer(name.clone()))?;
        if layer.kind != LayerKind::Conv {
            return Err(Error::NotPrunable(name.clone()));
        }
        check_rate(rate)?;
    }
    let mut rates: BTreeMap<String, f64> = manifest
        .layers
        .iter()
        .filter(|l| l.kind.is_weighted())
        .map(|l| {
            let rate = match overrides.get(&l.name) {
                Some(&r) => r,
                None if l.prunable => alpha,
                None => 1.0,
            };
            (l.name.clone(), rate)
        })
        .collect();
    let mut group_rates = BTreeMap::new();
    for (group, members) in manifest.prune_groups() {
        let rate = members.iter().map(|&m| rates[&manifest.layers[m].name]).fold(1.0, f64::min);
        for &m in &members {
            rates.insert(manifest.layers[m].name.clone(), rate);
        }
        group_rates.insert(group, rate);
    }
    let mut sketch_sizes = BTreeMap::new();
    for l in manifest.layers.iter().filter(|l| l.kind.is_weighted()) {
        sketch_sizes.insert(l.name.clone(), sketch_size(rates[&l.name], l.out_channels)?);
    }
    let plan = PrunePlan { global_rate: alpha, rates, sketch_sizes, group_rates };
    plan.pruned_manifest(manifest)?;
    Ok(plan)
}

/// Channel-padding pools (parameter-free shortcuts) adapt to whatever width
/// their residual partner ends up with.
pub(crate) fn is_padding_pool(layer: &LayerSpec) -> bool {
    layer.kind == LayerKind::Pool && layer.out_channels > layer.in_channels
}

impl PrunePlan {
    /// Whether every layer keeps its full width.
    pub fn is_identity(&self, manifest: &ModelManifest) -> bool {
        manifest
            .layers
            .iter()
            .filter(|l| l.kind.is_weighted())
            .all(|l| self.sketch_sizes.get(&l.name) == Some(&l.out_channels))
    }

    fn target_width(&self, layer: &LayerSpec) -> Result<usize> {
        self.sketch_sizes
            .get(&layer.name)
            .copied()
            .ok_or_else(|| Error::ShapeReconciliation(format!("plan has no width for `{}`", layer.name)))
    }

    /// `manifest` with channel counts propagated from the planned widths.
    pub fn pruned_manifest(&self, manifest: &ModelManifest) -> Result<ModelManifest> {
        let recon = |e: Error| match e {
            Error::InvalidManifest(msg) => Error::ShapeReconciliation(msg),
            other => other,
        };
        let producers = manifest.producers();
        let order = manifest.topological_order()?;
        let mut out = manifest.clone();
        let mut widths = vec![0usize; manifest.layers.len()];
        for &i in &order {
            let layer = &manifest.layers[i];
            let incoming = if layer.kind == LayerKind::Add {
                let fixed: Vec<usize> = producers[i].iter().copied().filter(|&p| !is_padding_pool(&manifest.layers[p])).collect();
                if let Some(&first) = fixed.first() {
                    let w = widths[first];
                    if let Some(&p) = fixed.iter().find(|&&p| widths[p] != w) {
                        return Err(Error::ShapeReconciliation(format!(
                            "`{}` joins {} channels from `{}` with {} from `{}`",
                            layer.name, w, manifest.layers[first].name, widths[p], manifest.layers[p].name
                        )));
                    }
                    for &p in producers[i].iter().filter(|&&p| is_padding_pool(&manifest.layers[p])) {
                        if out.layers[p].in_channels > w {
                            return Err(Error::ShapeReconciliation(format!(
                                "padding shortcut `{}` carries {} channels into a {}-wide join",
                                manifest.layers[p].name, out.layers[p].in_channels, w
                            )));
                        }
                        out.layers[p].out_channels = w;
                        widths[p] = w;
                    }
                }
                manifest.incoming_width(i, &producers, &widths).map_err(recon)?
            } else {
                manifest.incoming_width(i, &producers, &widths).map_err(recon)?
            };
            let in_channels = incoming.unwrap_or(layer.in_channels);
            let out_channels = match layer.kind {
                LayerKind::Conv | LayerKind::Fc => self.target_width(layer)?,
                LayerKind::Pool => in_channels + (layer.out_channels - layer.in_channels),
                LayerKind::Bn | LayerKind::Add | LayerKind::Concat => in_channels,
            };
            out.layers[i].in_channels = in_channels;
            out.layers[i].out_channels = out_channels;
            widths[i] = out_channels;
        }
        out.validate().map_err(recon)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch;

    fn toy() -> ModelManifest {
        let mut m = ModelManifest::new("toy", [8, 8], 4);
        m.layers.push(LayerSpec::conv("conv1", 3, 8, 3));
        m.layers.push(LayerSpec::conv("conv2", 8, 4, 3));
        m.layers[1].prunable = false;
        m.edges.push(("conv1".into(), "conv2".into()));
        m
    }

    #[test]
    fn identity_plan() {
        let m = arch::builtin("resnet56").unwrap();
        let plan = build_plan(&m, 1.0, &BTreeMap::new()).unwrap();
        assert!(plan.rates.values().all(|&r| r == 1.0));
        assert!(plan.is_identity(&m));
        assert_eq!(plan.pruned_manifest(&m).unwrap(), m);
    }

    #[test]
    fn resnet56_groups_share_width() {
        let m = arch::builtin("resnet56").unwrap();
        let plan = build_plan(&m, 0.6, &BTreeMap::new()).unwrap();
        for l in m.layers.iter().filter(|l| l.prunable) {
            assert_eq!(plan.rates[&l.name], 0.6);
        }
        let pruned = plan.pruned_manifest(&m).unwrap();
        for members in m.prune_groups().values() {
            let w = pruned.layers[members[0]].out_channels;
            assert!(members.iter().all(|&i| pruned.layers[i].out_channels == w));
        }
        assert_eq!(pruned.layer("layer1.0.conv1").unwrap().out_channels, 10);
        assert_eq!(pruned.layer("layer1.0.conv2").unwrap().in_channels, 10);
        // residual stages stay intact unless a member is overridden
        assert_eq!(pruned.layer("fc").unwrap().in_channels, 64);
    }

    #[test]
    fn single_override() {
        let m = toy();
        let overrides = BTreeMap::from([("conv1".to_string(), 0.5)]);
        let plan = build_plan(&m, 1.0, &overrides).unwrap();
        assert_eq!(plan.sketch_sizes["conv1"], 4);
        assert_eq!(plan.sketch_sizes["conv2"], 4);
        let pruned = plan.pruned_manifest(&m).unwrap();
        assert_eq!(pruned.layers[1].in_channels, 4);
    }

    #[test]
    fn bad_inputs() {
        let m = toy();
        assert!(matches!(build_plan(&m, 1.5, &BTreeMap::new()), Err(Error::InvalidRate(_))));
        assert!(matches!(build_plan(&m, 0.0, &BTreeMap::new()), Err(Error::InvalidRate(_))));
        let unknown = BTreeMap::from([("conv9".to_string(), 0.5)]);
        assert!(matches!(build_plan(&m, 1.0, &unknown), Err(Error::UnknownLayer(_))));
        let bad_rate = BTreeMap::from([("conv1".to_string(), -0.1)]);
        assert!(matches!(build_plan(&m, 1.0, &bad_rate), Err(Error::InvalidRate(_))));
    }

    #[test]
    fn group_takes_minimum_rate() {
        let m = arch::builtin("resnet56").unwrap();
        let overrides = BTreeMap::from([("layer1.0.conv2".to_string(), 0.25)]);
        let plan = build_plan(&m, 0.6, &overrides).unwrap();
        assert_eq!(plan.group_rates["stage1"], 0.25);
        assert_eq!(plan.sketch_sizes["conv1"], 4);
        assert_eq!(plan.sketch_sizes["layer1.5.conv2"], 4);
    }
}
