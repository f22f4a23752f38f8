use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::load::Sample;
use crate::error::{Error, Result};
use crate::nn::Tensor;

const MIN_FOREGROUND: f64 = 0.05;
const MAX_FOREGROUND: f64 = 0.6;

#[derive(Debug, Clone, Copy)]
enum Shape {
    Ellipse { cy: f64, cx: f64, ry: f64, rx: f64 },
    Rect { cy: f64, cx: f64, hy: f64, hx: f64 },
}

impl Shape {
    fn contains(&self, y: f64, x: f64) -> bool {
        match *self {
            Shape::Ellipse { cy, cx, ry, rx } => ((y - cy) / ry).powi(2) + ((x - cx) / rx).powi(2) <= 1.0,
            Shape::Rect { cy, cx, hy, hx } => (y - cy).abs() <= hy && (x - cx).abs() <= hx,
        }
    }
}

fn draw_mask(rng: &mut ChaCha8Rng, size: usize) -> Vec<f64> {
    let s = size as f64;
    loop {
        let (cy, cx) = (rng.gen_range(0.25..0.75) * s, rng.gen_range(0.25..0.75) * s);
        let (a, b) = (rng.gen_range(0.3..0.45) * s, rng.gen_range(0.3..0.45) * s);
        let shape = if rng.gen_bool(0.5) {
            Shape::Ellipse { cy, cx, ry: a, rx: b }
        } else {
            Shape::Rect { cy, cx, hy: a * 0.85, hx: b * 0.85 }
        };
        let mask: Vec<f64> = (0..size * size)
            .map(|i| {
                let (y, x) = ((i / size) as f64 + 0.5, (i % size) as f64 + 0.5);
                f64::from(u8::from(shape.contains(y, x)))
            })
            .collect();
        let frac = mask.iter().sum::<f64>() / mask.len() as f64;
        if frac > MIN_FOREGROUND && frac < MAX_FOREGROUND {
            return mask;
        }
    }
}

fn one_sample(rng: &mut ChaCha8Rng, size: usize, id: String) -> Sample {
    let mask = draw_mask(rng, size);
    // Dark background with a diagonal ripple, light random tint for the
    // shape, and pixel noise on both: high contrast keeps the task learnable
    // within a few dozen optimizer steps.
    let base = rng.gen_range(0.0..0.1);
    let colour: [f64; 3] = [rng.gen_range(0.8..1.0), rng.gen_range(0.8..1.0), rng.gen_range(0.8..1.0)];
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);

    let plane = size * size;
    let mut image = vec![0.0; 3 * plane];
    for i in 0..plane {
        let (y, x) = ((i / size) as f64, (i % size) as f64);
        let texture = 0.04 * (0.4 * y + 0.3 * x + phase).sin();
        for c in 0..3 {
            let noise = rng.gen_range(-0.04..0.04);
            let v = if mask[i] == 1.0 { colour[c] + noise } else { base + texture + noise };
            image[c * plane + i] = v.clamp(0.0, 1.0);
        }
    }
    Sample {
        id,
        image: Tensor::new(vec![3, size, size], image).expect("3 x size x size"),
        mask: Tensor::new(vec![1, size, size], mask).expect("1 x size x size"),
    }
}

/// `n` images of one ellipse or rectangle in a random light colour over a
/// dark textured background; the mask is exactly the shape and covers between 5%
/// and 60% of the image.
pub fn synth_dataset(n: usize, size: usize, seed: u64) -> Result<Vec<Sample>> {
    if !matches!(size, 16 | 32 | 64) {
        return Err(Error::Argument(format!("synthetic image size must be 16, 32 or 64, got {size}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|i| one_sample(&mut rng, size, format!("synth-{i:05}"))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_binary_samples() {
        let data = synth_dataset(100, 64, 3).unwrap();
        assert_eq!(data.len(), 100);
        for s in &data {
            assert!(s.mask.data().iter().all(|&v| v == 0.0 || v == 1.0));
            assert!(s.image.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
            let frac = s.mask.data().iter().sum::<f64>() / s.mask.len() as f64;
            assert!(frac > 0.05 && frac < 0.6, "{frac}");
        }
    }

    #[test]
    fn seeded() {
        assert_eq!(synth_dataset(5, 16, 9).unwrap(), synth_dataset(5, 16, 9).unwrap());
        assert_ne!(synth_dataset(5, 16, 9).unwrap(), synth_dataset(5, 16, 10).unwrap());
    }

    #[test]
    fn unsupported_size() {
        assert!(synth_dataset(1, 20, 0).is_err());
    }
}
