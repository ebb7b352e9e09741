use serde::{Deserialize, Serialize};

use crate::tensor::{LayerKind, TensorArchive, WeightTensor};

pub const HISTOGRAM_BINS: usize = 64;

/// Mean/spread summary of one layer's weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub layer: String,
    pub count: usize,
    /// Scalar mean over every entry.
    pub mean: f64,
    /// Population standard deviation over every entry.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Mean of each output filter.
    pub filter_means: Vec<f64>,
    /// Uniform bins over `[min, max]`; the last bin is closed.
    pub histogram: Vec<u64>,
    /// `|mean| > 0.1·std`: the zero-mean simplification is strained.
    pub mean_flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightStats {
    pub layers: Vec<LayerStats>,
}

impl WeightStats {
    pub fn flagged(&self) -> impl Iterator<Item = &LayerStats> {
        self.layers.iter().filter(|l| l.mean_flagged)
    }

    /// Whitespace-separated `layer bin lo hi count` rows for external plotting.
    pub fn histogram_table(&self) -> String {
        let mut out = String::from("layer\tbin\tlo\thi\tcount\n");
        for l in &self.layers {
            let width = (l.max - l.min) / HISTOGRAM_BINS as f64;
            for (b, count) in l.histogram.iter().enumerate() {
                let lo = l.min + width * b as f64;
                out.push_str(&format!("{}\t{}\t{:e}\t{:e}\t{}\n", l.layer, b, lo, lo + width, count));
            }
        }
        out
    }
}

/// Statistics for every conv layer, in manifest order.
pub fn weight_stats(archive: &TensorArchive) -> WeightStats {
    let layers = archive
        .manifest
        .layers
        .iter()
        .filter(|l| l.kind == LayerKind::Conv)
        .filter_map(|l| archive.weight(&l.name).map(|t| tensor_stats(&l.name, t)))
        .collect();
    WeightStats { layers }
}

pub fn tensor_stats(layer: &str, t: &WeightTensor) -> LayerStats {
    let n = t.data.len();
    let values = || t.data.iter().map(|&x| x as f64);
    let mean = values().sum::<f64>() / n.max(1) as f64;
    let var = values().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n.max(1) as f64;
    let std = var.sqrt();
    let (min, max) = values().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let (min, max) = if n == 0 { (0.0, 0.0) } else { (min, max) };

    let filters = t.shape.first().copied().unwrap_or(1).max(1);
    let per_filter = n / filters;
    let filter_means = t
        .data
        .chunks(per_filter.max(1))
        .map(|c| c.iter().map(|&x| x as f64).sum::<f64>() / c.len() as f64)
        .collect();

    let mut histogram = vec![0u64; HISTOGRAM_BINS];
    let span = max - min;
    for x in values() {
        let bin = if span > 0.0 { (((x - min) / span) * HISTOGRAM_BINS as f64) as usize } else { 0 };
        histogram[bin.min(HISTOGRAM_BINS - 1)] += 1;
    }

    LayerStats {
        layer: layer.to_string(),
        count: n,
        mean,
        std,
        min,
        max,
        filter_means,
        histogram,
        mean_flagged: mean.abs() > 0.1 * std,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::CounterRng;

    #[test]
    fn zeros() {
        let s = tensor_stats("z", &WeightTensor::filled("z.weight", vec![4, 2, 3, 3], 0.0));
        assert_eq!((s.mean, s.std), (0.0, 0.0));
        assert_eq!(s.histogram.iter().sum::<u64>(), 72);
        assert!(!s.mean_flagged);
    }

    #[test]
    fn constant_is_flagged() {
        let s = tensor_stats("c", &WeightTensor::filled("c.weight", vec![3, 1, 1, 1], 5.0));
        assert_eq!((s.mean, s.std), (5.0, 0.0));
        assert!(s.mean_flagged);
        assert_eq!(s.filter_means, vec![5.0; 3]);
    }

    #[test]
    fn standard_normal_mean_is_small() {
        let n = 10_000;
        let mut rng = CounterRng::new(11);
        let data: Vec<f32> = (0..n).map(|_| rng.standard_normal() as f32).collect();
        let t = WeightTensor::new("g.weight", vec![100, 100, 1, 1], data).unwrap();
        let s = tensor_stats("g", &t);
        assert!(s.mean.abs() < 3.0 / (n as f64).sqrt());
        assert!((s.std - 1.0).abs() < 0.05);
        assert_eq!(s.histogram.iter().sum::<u64>(), n as u64);
        assert_eq!(s.histogram.len(), HISTOGRAM_BINS);
        assert!(s.histogram[HISTOGRAM_BINS - 1] >= 1);
    }
}
