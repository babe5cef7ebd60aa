//! Seeded synthetic datasets for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Dataset, Example, SparseVector};

/// Two isotropic unit-variance Gaussians centred at `±shift·(1, …, 1)`,
/// alternating labels `+1, -1, …`.
pub fn gaussian_blobs(n: usize, dim: usize, shift: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1 } else { -1 };
        let centre = shift * label as f64;
        rows.push(
            (0..dim)
                .map(|_| centre + rng.sample::<f64, _>(StandardNormal))
                .collect::<Vec<f64>>(),
        );
        labels.push(label);
    }
    Dataset::from_dense(&rows, &labels).expect("consistent rows")
}

/// Random linear-threshold data: each feature is present with probability
/// `density` and uniform in `[-1, 1]`; the label is the sign of a fixed
/// random direction plus Gaussian noise.
pub fn random_linear(n: usize, dim: usize, density: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let direction: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let noise = rand_distr::Normal::new(0.0, 0.5).expect("valid normal");
    let examples = (0..n)
        .map(|_| {
            let mut indices = Vec::new();
            let mut values = Vec::new();
            for j in 0..dim {
                if density >= 1.0 || rng.random::<f64>() < density {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    if v != 0.0 {
                        indices.push(j as u32);
                        values.push(v);
                    }
                }
            }
            let features = SparseVector::new(indices, values, dim).expect("sorted indices");
            let margin = features.dot(&direction) + noise.sample(&mut rng);
            Example {
                features,
                label: if margin >= 0.0 { 1 } else { -1 },
            }
        })
        .collect();
    Dataset::new(examples, dim).expect("consistent dims")
}
