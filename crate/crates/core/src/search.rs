//! Multistart zero search over manifolds with a local chart.
//!
//! Each start runs a compass search (coordinate moves in the chart with step
//! halving) and then a damped Gauss-Newton polish with a finite-difference
//! Jacobian. Starts run in fixed-size batches; the search stops after the
//! first batch whose best residual meets the target. The winner is the
//! smallest residual, ties going to the lowest start index.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::geom::{complement_basis, orthonormalize, Frame, Vector};

/// Search parameters shared by every solver.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub seed: u64,
    pub starts: usize,
    /// Compass sweeps per start.
    pub max_iters: usize,
    /// Residual norm counted as a zero.
    pub target: f64,
    /// Mollify raw discrete inputs before searching.
    pub requires_continuity: bool,
    /// Starts evaluated between convergence checks.
    pub batch: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            seed: 0,
            starts: 64,
            max_iters: 200,
            target: 1e-6,
            requires_continuity: false,
            batch: 8,
        }
    }
}

/// A manifold with random sampling and a local chart.
pub trait SearchSpace: Sync {
    type Point: Clone + Send + Sync;

    fn dim(&self) -> usize;

    fn sample(&self, rng: &mut ChaCha8Rng) -> Self::Point;

    /// Moves `p` by `step` in the chart centered at `p`.
    fn retract(&self, p: &Self::Point, step: &[f64]) -> Self::Point;

    /// Admissible displacement along `axis` in the positive and negative direction.
    fn room(&self, _p: &Self::Point, _axis: usize) -> (f64, f64) {
        (f64::INFINITY, f64::INFINITY)
    }

    /// Orbit representative; applied to start points and results.
    fn canonical(&self, p: Self::Point) -> Self::Point {
        p
    }
}

#[derive(Clone, Debug)]
pub struct Candidate<P> {
    pub point: P,
    pub residual: Vec<f64>,
    pub norm: f64,
    pub start: usize,
    pub evaluations: usize,
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Generator for start `index`, derived from the seed by stream selection.
pub fn start_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

struct Local<'a, S: SearchSpace, F> {
    space: &'a S,
    eval: &'a F,
    evaluations: usize,
}

impl<S, F> Local<'_, S, F>
where
    S: SearchSpace,
    F: Fn(&S::Point) -> Option<Vec<f64>> + Sync,
{
    fn value(&mut self, p: &S::Point) -> (Vec<f64>, f64) {
        self.evaluations += 1;
        match (self.eval)(p) {
            Some(r) => {
                let n = norm(&r);
                if n.is_finite() {
                    (r, n)
                } else {
                    (r, f64::INFINITY)
                }
            }
            None => (Vec::new(), f64::INFINITY),
        }
    }

    fn compass(&mut self, p: &mut S::Point, r: &mut Vec<f64>, n: &mut f64, cfg: &SolverConfig) {
        let dim = self.space.dim();
        let mut step = 0.3;
        let mut sweeps = 0;
        while sweeps < cfg.max_iters && *n > cfg.target * 1e-2 && step > 2e-3 {
            let mut improved = false;
            for axis in 0..dim {
                for sgn in [1.0, -1.0] {
                    let mut s = vec![0.0; dim];
                    s[axis] = sgn * step;
                    let q = self.space.retract(p, &s);
                    let (rq, nq) = self.value(&q);
                    if nq < *n {
                        *p = q;
                        *r = rq;
                        *n = nq;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
            sweeps += 1;
        }
    }

    fn jacobian(&mut self, p: &S::Point, m: usize) -> Option<DMatrix<f64>> {
        let dim = self.space.dim();
        let mut jac = DMatrix::zeros(m, dim);
        let h: f64 = 1e-6;
        for j in 0..dim {
            let (up, down) = self.space.room(p, j);
            let hp = h.min(up);
            let hm = h.min(down);
            if hp + hm <= 0.0 {
                continue;
            }
            let mut s = vec![0.0; dim];
            s[j] = hp;
            let (rp, np) = self.value(&self.space.retract(p, &s));
            s[j] = -hm;
            let (rm, nm) = self.value(&self.space.retract(p, &s));
            if !np.is_finite() || !nm.is_finite() || rp.len() != m || rm.len() != m {
                return None;
            }
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / (hp + hm);
            }
        }
        Some(jac)
    }

    fn polish(&mut self, p: &mut S::Point, r: &mut Vec<f64>, n: &mut f64) {
        let dim = self.space.dim();
        let mut mu = 1e-3;
        let mut slow = 0;
        for _ in 0..80 {
            if !n.is_finite() || *n < 1e-15 {
                break;
            }
            let m = r.len();
            let Some(jac) = self.jacobian(p, m) else { break };
            let a = jac.transpose() * &jac;
            let g = jac.transpose() * DVector::from_column_slice(r);
            let scale = (0..dim).map(|i| a[(i, i)]).fold(0.0, f64::max).max(1e-300);
            let mut accepted = false;
            for _ in 0..16 {
                let mut lhs = a.clone();
                for i in 0..dim {
                    lhs[(i, i)] += mu * (a[(i, i)] + 1e-9 * scale);
                }
                let Some(delta) = lhs.lu().solve(&(-&g)) else {
                    mu *= 10.0;
                    continue;
                };
                let q = self.space.retract(p, delta.as_slice());
                let (rq, nq) = self.value(&q);
                if nq < *n {
                    slow = if nq > 0.9 * *n { slow + 1 } else { 0 };
                    *p = q;
                    *r = rq;
                    *n = nq;
                    mu = (mu * 0.3).max(1e-12);
                    accepted = true;
                    break;
                }
                mu *= 10.0;
            }
            if !accepted || slow >= 4 {
                break;
            }
        }
    }
}

/// Runs the local search from one start point.
pub fn local_search<S, F>(space: &S, eval: &F, start: S::Point, index: usize, cfg: &SolverConfig) -> Candidate<S::Point>
where
    S: SearchSpace,
    F: Fn(&S::Point) -> Option<Vec<f64>> + Sync,
{
    let mut local = Local { space, eval, evaluations: 0 };
    let mut p = space.canonical(start);
    let (mut r, mut n) = local.value(&p);
    local.compass(&mut p, &mut r, &mut n, cfg);
    local.polish(&mut p, &mut r, &mut n);
    let p = space.canonical(p);
    let (r, n) = local.value(&p);
    Candidate { point: p, residual: r, norm: n, start: index, evaluations: local.evaluations }
}

/// Multistart search for a zero of `eval` on `space`.
///
/// Returns the best candidate, or `None` when no start produced a finite residual.
pub fn search_zero<S, F>(space: &S, eval: &F, cfg: &SolverConfig) -> Option<Candidate<S::Point>>
where
    S: SearchSpace,
    F: Fn(&S::Point) -> Option<Vec<f64>> + Sync,
{
    search_zero_from(space, eval, cfg, &[])
}

/// Like [`search_zero`], with explicit start points tried before the random ones.
pub fn search_zero_from<S, F>(
    space: &S,
    eval: &F,
    cfg: &SolverConfig,
    seeds: &[S::Point],
) -> Option<Candidate<S::Point>>
where
    S: SearchSpace,
    F: Fn(&S::Point) -> Option<Vec<f64>> + Sync,
{
    let total = cfg.starts.max(1) + seeds.len();
    let batch = cfg.batch.max(1);
    let mut best: Option<Candidate<S::Point>> = None;
    let mut evaluations = 0;
    let mut next = 0;
    while next < total {
        let end = (next + batch).min(total);
        let results: Vec<Candidate<S::Point>> = (next..end)
            .into_par_iter()
            .map(|i| {
                let start = if i < seeds.len() {
                    seeds[i].clone()
                } else {
                    space.sample(&mut start_rng(cfg.seed, i))
                };
                local_search(space, eval, start, i, cfg)
            })
            .collect();
        for c in results {
            evaluations += c.evaluations;
            let better = match &best {
                None => c.norm.is_finite(),
                Some(b) => c.norm < b.norm,
            };
            if better {
                best = Some(c);
            }
        }
        next = end;
        if best.as_ref().is_some_and(|b| b.norm <= cfg.target) {
            break;
        }
    }
    best.map(|mut b| {
        b.evaluations = evaluations;
        b
    })
}

/// Givens planes `(a, b)` with `a < m`, `a < b < d`, ordered by `a` then `b`.
pub fn generators(d: usize, m: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..m {
        for b in a + 1..d {
            out.push((a, b));
        }
    }
    out
}

fn gaussian_vector(d: usize, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)))
}

/// Haar-random frame.
pub fn random_frame(d: usize, m: usize, rng: &mut ChaCha8Rng) -> Frame {
    loop {
        let vs: Vec<Vector> = (0..m).map(|_| gaussian_vector(d, rng)).collect();
        if let Ok(f) = orthonormalize(&vs) {
            return f;
        }
    }
}

/// Frame given by global Givens angles: `G_1(t_1) ... G_N(t_N)` applied to the
/// first m standard basis vectors. Angles in `[-pi/2, pi/2]` reach every frame
/// up to sign.
pub fn frame_from_angles(d: usize, m: usize, angles: &[f64]) -> Frame {
    let gens = generators(d, m);
    assert_eq!(gens.len(), angles.len(), "one angle per Givens plane");
    let mut cols: Vec<Vector> = (0..m).map(|i| crate::geom::unit(d, i)).collect();
    for (&(a, b), &t) in gens.iter().zip(angles).rev() {
        let (s, c) = t.sin_cos();
        for col in cols.iter_mut() {
            let (xa, xb) = (col[a], col[b]);
            col[a] = c * xa - s * xb;
            col[b] = s * xa + c * xb;
        }
    }
    orthonormalize(&cols).expect("rotations preserve rank")
}

/// Stiefel manifold V_m(R^d), searched modulo the sign orbit.
#[derive(Clone, Debug)]
pub struct StiefelSpace {
    pub d: usize,
    pub m: usize,
}

impl SearchSpace for StiefelSpace {
    type Point = Frame;

    fn dim(&self) -> usize {
        generators(self.d, self.m).len()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Frame {
        random_frame(self.d, self.m, rng)
    }

    fn retract(&self, p: &Frame, step: &[f64]) -> Frame {
        let mut q: Vec<Vector> = p.vectors().to_vec();
        q.extend(p.complement());
        for (&(a, b), &t) in generators(self.d, self.m).iter().zip(step) {
            if t == 0.0 {
                continue;
            }
            let (s, c) = t.sin_cos();
            let qa = &q[a] * c + &q[b] * s;
            let qb = &q[b] * c - &q[a] * s;
            q[a] = qa;
            q[b] = qb;
        }
        q.truncate(self.m);
        orthonormalize(&q).unwrap_or_else(|_| p.clone())
    }

    fn canonical(&self, p: Frame) -> Frame {
        p.sign_canonical()
    }
}

/// A direction on a sphere together with a compactified parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceParam {
    pub v: Vector,
    pub tau: f64,
}

/// `S^{n-1} x [tau_lo, tau_hi]`; the last chart axis moves `tau`.
#[derive(Clone, Debug)]
pub struct SliceSpace {
    pub n: usize,
    pub tau_lo: f64,
    pub tau_hi: f64,
}

impl SearchSpace for SliceSpace {
    type Point = SliceParam;

    fn dim(&self) -> usize {
        self.n
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> SliceParam {
        let v = if self.n == 1 {
            Vector::from_element(1, if rng.random::<bool>() { 1.0 } else { -1.0 })
        } else {
            loop {
                let g = gaussian_vector(self.n, rng);
                let len = g.norm();
                if len > 1e-6 {
                    break g / len;
                }
            }
        };
        let tau = rng.random_range(self.tau_lo..=self.tau_hi);
        SliceParam { v, tau }
    }

    fn retract(&self, p: &SliceParam, step: &[f64]) -> SliceParam {
        let mut v = p.v.clone();
        if self.n > 1 {
            let w = complement_basis(std::slice::from_ref(&p.v), self.n);
            for (wb, &t) in w.iter().zip(step) {
                if t != 0.0 {
                    let (s, c) = t.sin_cos();
                    v = &v * c + wb * s;
                }
            }
            v /= v.norm();
        }
        let tau = (p.tau + step[self.n - 1]).clamp(self.tau_lo, self.tau_hi);
        SliceParam { v, tau }
    }

    fn room(&self, p: &SliceParam, axis: usize) -> (f64, f64) {
        if axis + 1 == self.n {
            (self.tau_hi - p.tau, p.tau - self.tau_lo)
        } else {
            (f64::INFINITY, f64::INFINITY)
        }
    }
}

/// Direction on `S^{n-1}` from hyperspherical Givens angles: the first angle
/// ranges over `[-pi, pi)`, the rest over `[-pi/2, pi/2]`. Needs `n >= 2`.
pub fn direction_from_angles(n: usize, angles: &[f64]) -> Vector {
    assert!(n >= 2 && angles.len() == n - 1);
    let mut v = crate::geom::unit(n, 0);
    for (b, &t) in (1..n).zip(angles).rev() {
        let (s, c) = t.sin_cos();
        let (x0, xb) = (v[0], v[b]);
        v[0] = c * x0 - s * xb;
        v[b] = s * x0 + c * xb;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn stiefel_chart_dimension() {
        assert_eq!(StiefelSpace { d: 3, m: 3 }.dim(), 3);
        assert_eq!(StiefelSpace { d: 4, m: 2 }.dim(), 5);
        assert_eq!(StiefelSpace { d: 2, m: 2 }.dim(), 1);
    }

    #[test]
    fn angle_chart_reaches_random_frames_up_to_sign() {
        // invert the chart by Givens elimination and compare
        let mut rng = start_rng(3, 0);
        for _ in 0..20 {
            let f = random_frame(4, 2, &mut rng);
            let mut cols: Vec<Vector> = f.vectors().to_vec();
            let mut angles = Vec::new();
            for &(a, b) in &generators(4, 2) {
                let t = (cols[a][b] / cols[a][a]).atan();
                let (s, c) = t.sin_cos();
                for col in cols.iter_mut() {
                    let (xa, xb) = (col[a], col[b]);
                    col[a] = c * xa + s * xb;
                    col[b] = -s * xa + c * xb;
                }
                angles.push(t);
            }
            let g = frame_from_angles(4, 2, &angles);
            for (x, y) in g.vectors().iter().zip(f.vectors()) {
                assert_abs_diff_eq!(x.dot(y).abs(), 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn retract_stays_orthonormal() {
        let s = StiefelSpace { d: 4, m: 3 };
        let mut rng = start_rng(1, 0);
        let f = s.sample(&mut rng);
        let step: Vec<f64> = (0..s.dim()).map(|i| 0.1 * i as f64).collect();
        assert!(Frame::new(s.retract(&f, &step).vectors().to_vec()).is_ok());
    }

    #[test]
    fn finds_zero_of_smooth_map() {
        // zero of (v_x - 0.6, ...) on the circle
        let space = SliceSpace { n: 2, tau_lo: 0.0, tau_hi: 1.0 };
        let eval = |p: &SliceParam| Some(vec![p.v[0] - 0.6, p.tau - 0.25]);
        let best = search_zero(&space, &eval, &SolverConfig::default()).unwrap();
        assert!(best.norm < 1e-12);
        assert_abs_diff_eq!(best.point.v[1].abs(), 0.8, epsilon = 1e-10);
    }

    #[test]
    fn boundary_zero_is_reachable() {
        let space = SliceSpace { n: 2, tau_lo: 0.0, tau_hi: 1.0 };
        let eval = |p: &SliceParam| Some(vec![p.v[0] - 0.6, (1.0 - p.tau) * p.v[1]]);
        let best = search_zero(&space, &eval, &SolverConfig::default()).unwrap();
        assert!(best.norm < 1e-10);
    }

    #[test]
    fn direction_chart_covers_sphere() {
        let v = direction_from_angles(3, &[3.0, -1.2]);
        assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-15);
        assert!(v[0] < 0.0);
    }
}
