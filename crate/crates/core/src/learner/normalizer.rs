/// Running mean / variance normalizer with input and output clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub(crate) count: f64,
    pub(crate) mean: Vec<f64>,
    /// Sum of squared deviations (Welford).
    pub(crate) m2: Vec<f64>,
    pub eps: f64,
    pub clip: f64,
    pub clip_raw: f64,
}

pub const NORM_EPS: f64 = 0.01;
pub const NORM_CLIP: f64 = 5.0;
pub const CLIP_OBS: f64 = 200.0;

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Normalizer {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            eps: NORM_EPS,
            clip: NORM_CLIP,
            clip_raw: CLIP_OBS,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count as u64
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population standard deviation per component.
    pub fn std(&self) -> Vec<f64> {
        self.m2
            .iter()
            .map(|m| {
                if self.count > 0.0 {
                    (m / self.count).sqrt()
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Folds one raw (clipped) sample into the statistics.
    pub fn update(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim(), "normalizer input width");
        self.count += 1.0;
        for i in 0..x.len() {
            let v = x[i].clamp(-self.clip_raw, self.clip_raw);
            let delta = v - self.mean[i];
            self.mean[i] += delta / self.count;
            self.m2[i] += delta * (v - self.mean[i]);
        }
    }

    /// Writes `clip((clip(x, raw) - mean) / max(std, eps), clip)` into `out`.
    pub fn normalize_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            let std = if self.count > 0.0 {
                (self.m2[i] / self.count).sqrt()
            } else {
                0.0
            };
            let v = x[i].clamp(-self.clip_raw, self.clip_raw);
            out[i] = ((v - self.mean[i]) / std.max(self.eps)).clamp(-self.clip, self.clip);
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.normalize_into(x, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mean_maps_to_zero() {
        let mut n = Normalizer::new(2);
        for x in [[1.0, 10.0], [3.0, 30.0], [5.0, 50.0]] {
            n.update(&x);
        }
        assert_eq!(n.normalize(&[3.0, 30.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn output_and_raw_clipping() {
        let mut n = Normalizer::new(1);
        for x in [-1.0, 1.0] {
            n.update(&[x]);
        }
        // std = 1, mean = 0: mean + 100 std is clipped to 5.
        assert_eq!(n.normalize(&[100.0]), vec![5.0]);

        let mut n = Normalizer::new(1);
        n.update(&[1e6]);
        assert_eq!(n.mean(), &[200.0]);
    }

    proptest! {
        #[test]
        fn matches_two_pass(xs in prop::collection::vec(-150.0f64..150.0, 1..200)) {
            let mut n = Normalizer::new(1);
            for x in &xs {
                n.update(&[*x]);
            }
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
            prop_assert!((n.mean()[0] - mean).abs() <= 1e-10);
            prop_assert!((n.std()[0] - var.sqrt()).abs() <= 1e-10);
        }
    }
}
