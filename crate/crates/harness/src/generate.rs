//! Seeded random instances for fixtures, demos and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{
    AssignmentSpec, HyperplaneFamilySpec, Instance, LevelSpec, LineFamilySpec, LineSpec, MovingFamilySpec,
    MovingPointSpec, PlaneSpec, Problem, RunConfig, INSTANCE_VERSION,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in `[-1, 1]`, rounded to four decimals so fixtures stay readable.
fn coord(rng: &mut ChaCha8Rng) -> f64 {
    (rng.random_range(-1.0..1.0) * 1e4f64).round() / 1e4
}

fn coords(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| coord(rng)).collect()
}

/// `n` points around a random center in `[-1, 1]^d`.
pub fn random_cloud(rng: &mut ChaCha8Rng, d: usize, dim: usize, n: usize, sigma: Option<f64>) -> AssignmentSpec {
    let c = coords(rng, d);
    let points = (0..n)
        .map(|_| c.iter().zip(coords(rng, d)).map(|(a, b)| ((0.5 * a + b) * 1e4f64).round() / 1e4).collect())
        .collect();
    AssignmentSpec::Cloud { dim, points, weights: None, sigma }
}

fn instance(name: String, seed: u64, problem: Problem) -> Instance {
    Instance { version: INSTANCE_VERSION, name: Some(name), problem, config: RunConfig { seed, ..RunConfig::default() } }
}

/// Fairy instance with random clouds: level `d-1-s` cuts a `(d-s)`-flat.
pub fn fairy(seed: u64, d: usize, k: usize, pi: Vec<usize>, points: usize, sigma: Option<f64>) -> Instance {
    let mut r = rng(seed);
    let levels = pi
        .iter()
        .enumerate()
        .map(|(s, &p)| LevelSpec {
            pivot: random_cloud(&mut r, d, d - s, points, sigma),
            functionals: (0..p).map(|_| random_cloud(&mut r, d, d - s, points, sigma)).collect(),
        })
        .collect();
    let problem = Problem::Fairy { d, k, pi, levels, overdetermined: false };
    instance(format!("random fairy d={d} k={k} seed={seed}"), seed, problem)
}

/// Rotation instance: `mu` and `d - 1` functionals on k-flats.
pub fn rotation(seed: u64, d: usize, k: usize, points: usize, sigma: Option<f64>) -> Instance {
    let mut r = rng(seed);
    let mu = random_cloud(&mut r, d, k, points, sigma);
    let functionals = (0..d - 1).map(|_| random_cloud(&mut r, d, k, points, sigma)).collect();
    instance(format!("random rotation d={d} k={k} seed={seed}"), seed, Problem::Rotation { d, k, mu, functionals })
}

/// `d - k + lambda + 1` random clouds on k-flats.
pub fn transversal(seed: u64, d: usize, k: usize, lambda: usize, points: usize, sigma: Option<f64>) -> Instance {
    let mut r = rng(seed);
    let assignments = (0..d - k + lambda + 1).map(|_| random_cloud(&mut r, d, k, points, sigma)).collect();
    instance(
        format!("random transversal d={d} k={k} lambda={lambda} seed={seed}"),
        seed,
        Problem::Transversal { d, k, lambda, assignments },
    )
}

/// `d` families of `n` random lines.
pub fn horizontal(seed: u64, d: usize, n: usize, sigma: Option<f64>) -> Instance {
    let mut r = rng(seed);
    let families = (0..d)
        .map(|_| LineFamilySpec {
            lines: (0..n).map(|_| LineSpec { point: coords(&mut r, d), direction: coords(&mut r, d), weight: 1.0 }).collect(),
            sigma,
        })
        .collect();
    instance(format!("random line families d={d} seed={seed}"), seed, Problem::Horizontal { families })
}

/// `d + 1` families of `n` random moving points.
pub fn dynamic(seed: u64, d: usize, n: usize, sigma: Option<f64>) -> Instance {
    let mut r = rng(seed);
    let families = (0..=d)
        .map(|_| MovingFamilySpec {
            points: (0..n)
                .map(|_| MovingPointSpec { position: coords(&mut r, d), velocity: coords(&mut r, d), weight: 1.0 })
                .collect(),
            sigma,
        })
        .collect();
    instance(format!("random moving families d={d} seed={seed}"), seed, Problem::Dynamic { families })
}

/// `d` families of `n` random hyperplanes.
pub fn translated_line(seed: u64, d: usize, n: usize, sigma: Option<f64>) -> Instance {
    let mut r = rng(seed);
    let families = (0..d)
        .map(|_| HyperplaneFamilySpec {
            planes: (0..n)
                .map(|_| PlaneSpec { normal: coords(&mut r, d), offset: coord(&mut r), weight: 1.0 })
                .collect(),
            sigma,
        })
        .collect();
    instance(format!("random hyperplane families d={d} seed={seed}"), seed, Problem::TranslatedLine { families })
}
