//! Distribution shift between corpora, measured on sentence embeddings
//! produced elsewhere.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_PROJECTIONS: usize = 128;
pub const DEFAULT_SEED: u64 = 0;

/// Named N x d matrix of finite embedding vectors, N >= 2.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    name: String,
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(name: impl Into<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let name = name.into();
        if vectors.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "embedding set {name:?} needs at least 2 vectors, got {}",
                vectors.len()
            )));
        }
        let dim = vectors[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput(format!("embedding set {name:?} has zero dimension")));
        }
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "embedding set {name:?}: row {i} has dimension {}, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("embedding set {name:?}: row {i} is not finite")));
            }
        }
        Ok(Self { name, dim, vectors })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    fn project(&self, direction: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|v| dot(v, direction)).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn w1_sorted(xs: &[f64], ys: &[f64]) -> f64 {
    let (n, m) = (xs.len() as u64, ys.len() as u64);
    let total = n * m;
    // quantile breakpoints i/n and j/m on the common grid of n*m steps
    let (mut i, mut j, mut at) = (0usize, 0usize, 0u64);
    let mut cost = 0.0;
    while at < total {
        let next_x = (i as u64 + 1) * m;
        let next_y = (j as u64 + 1) * n;
        let next = next_x.min(next_y);
        cost += (next - at) as f64 * (xs[i] - ys[j]).abs();
        if next == next_x {
            i += 1;
        }
        if next == next_y {
            j += 1;
        }
        at = next;
    }
    cost / total as f64
}

/// Exact 1-Wasserstein distance between two empirical distributions, as the
/// integral of the absolute difference of their quantile functions.
pub fn w1_1d(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidInput("W1 needs two non-empty samples".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("W1 inputs must be finite".into()));
    }
    Ok(w1_sorted(&sorted(xs), &sorted(ys)))
}

fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
    // (0, 1], never zero so the logarithm stays finite
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `count` directions drawn uniformly from the unit sphere in `dim`
/// dimensions.
pub fn random_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut v = Vec::with_capacity(dim);
        while v.len() < dim {
            let r = libm::sqrt(-2.0 * libm::log(unit_open(&mut rng)));
            let theta = 2.0 * core::f64::consts::PI * unit_open(&mut rng);
            v.push(r * libm::cos(theta));
            if v.len() < dim {
                v.push(r * libm::sin(theta));
            }
        }
        let norm = libm::sqrt(dot(&v, &v));
        if norm > 1e-12 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

fn check_projections(n_projections: usize) -> Result<()> {
    if n_projections == 0 {
        return Err(Error::InvalidInput("need at least one projection".into()));
    }
    Ok(())
}

/// Sliced 1-Wasserstein distance: the mean of [`w1_1d`] over random 1-D
/// projections, deterministic for a given seed.
pub fn sliced_w1(x: &EmbeddingSet, y: &EmbeddingSet, n_projections: usize, seed: u64) -> Result<f64> {
    check_projections(n_projections)?;
    if x.dim != y.dim {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {:?} has {}, {:?} has {}",
            x.name, x.dim, y.name, y.dim
        )));
    }
    let dirs = random_directions(x.dim, n_projections, seed);
    let total: f64 = dirs
        .iter()
        .map(|d| w1_sorted(&sorted(&x.project(d)), &sorted(&y.project(d))))
        .sum();
    Ok(total / n_projections as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftMatrix {
    pub names: Vec<String>,
    pub distances: Vec<Vec<f64>>,
    pub n_projections: usize,
    pub seed: u64,
}

impl ShiftMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.distances[i][j])
    }
}

/// Pairwise sliced W1 with one shared set of directions.
pub fn shift_matrix(sets: &[EmbeddingSet], n_projections: usize, seed: u64) -> Result<ShiftMatrix> {
    check_projections(n_projections)?;
    if sets.len() < 2 {
        return Err(Error::InvalidInput("a shift matrix needs at least 2 embedding sets".into()));
    }
    let dim = sets[0].dim;
    if let Some(bad) = sets.iter().find(|s| s.dim != dim) {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {:?} has {}, {:?} has {dim}",
            bad.name, bad.dim, sets[0].name
        )));
    }
    let dirs = random_directions(dim, n_projections, seed);
    let projected: Vec<Vec<Vec<f64>>> = sets
        .iter()
        .map(|s| dirs.iter().map(|d| sorted(&s.project(d))).collect())
        .collect();
    let k = sets.len();
    let mut distances = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in a + 1..k {
            let total: f64 = (0..n_projections)
                .map(|p| w1_sorted(&projected[a][p], &projected[b][p]))
                .sum();
            let d = total / n_projections as f64;
            distances[a][b] = d;
            distances[b][a] = d;
        }
    }
    Ok(ShiftMatrix {
        names: sets.iter().map(|s| s.name.clone()).collect(),
        distances,
        n_projections,
        seed,
    })
}

const POWER_ITERATIONS: usize = 10_000;
const POWER_TOLERANCE: f64 = 1e-13;

/// Applies the centred scatter operator `Xc^T Xc` to `v`.
fn scatter_apply(centred: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for row in centred {
        let s = dot(row, v);
        for (o, r) in out.iter_mut().zip(row) {
            *o += s * r;
        }
    }
    out
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = libm::sqrt(dot(v, v));
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    for u in against {
        let p = dot(v, u);
        v.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
    }
}

fn leading_component(centred: &[Vec<f64>], found: &[Vec<f64>], dim: usize, scale: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + libm::sin(i as f64 + 1.0) / 2.0).collect();
    orthogonalize(&mut v, found);
    if normalize(&mut v) == 0.0 {
        v = basis_complement(found, dim);
    }
    for _ in 0..POWER_ITERATIONS {
        let mut next = scatter_apply(centred, &v);
        orthogonalize(&mut next, found);
        if normalize(&mut next) <= scale * 1e-12 {
            // no variance left outside the components already found
            return basis_complement(found, dim);
        }
        let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < POWER_TOLERANCE {
            break;
        }
    }
    v
}

fn basis_complement(found: &[Vec<f64>], dim: usize) -> Vec<f64> {
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        orthogonalize(&mut e, found);
        if normalize(&mut e) > 1e-6 {
            return e;
        }
    }
    vec![0.0; dim]
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Coordinates of every vector on the top two principal components. Each
/// component is signed so its largest-magnitude loading is positive.
pub fn export_projection(x: &EmbeddingSet) -> Result<Vec<[f64; 2]>> {
    if x.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "projection of {:?} needs at least 3 vectors",
            x.name
        )));
    }
    let n = x.len() as f64;
    let mut mean = vec![0.0; x.dim];
    for v in &x.vectors {
        mean.iter_mut().zip(v).for_each(|(m, a)| *m += a / n);
    }
    let centred: Vec<Vec<f64>> = x
        .vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    let total_variance: f64 = centred.iter().map(|r| dot(r, r)).sum();
    if total_variance <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "projection of {:?} is degenerate: all vectors are identical",
            x.name
        )));
    }
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut c = leading_component(&centred, &components, x.dim, total_variance);
        fix_sign(&mut c);
        components.push(c);
    }
    Ok(centred
        .iter()
        .map(|r| [dot(r, &components[0]), dot(r, &components[1])])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(name: &str, rows: &[&[f64]]) -> EmbeddingSet {
        EmbeddingSet::new(name, rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn w1_examples() {
        assert_eq!(w1_1d(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(w1_1d(&[0.0], &[3.0]).unwrap(), 3.0);
        assert_eq!(w1_1d(&[0.0, 2.0], &[1.0, 3.0]).unwrap(), 1.0);
        // {0,1} vs {0,0,1}: quantiles differ on (1/2, 2/3) by 1
        assert!((w1_1d(&[0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!(w1_1d(&[], &[1.0]).is_err());
    }

    #[test]
    fn embedding_set_validation() {
        assert!(EmbeddingSet::new("a", vec![vec![1.0]]).is_err());
        assert!(EmbeddingSet::new("a", vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(EmbeddingSet::new("a", vec![vec![1.0], vec![f64::NAN]]).is_err());
    }

    #[test]
    fn directions_are_unit_and_seeded() {
        let a = random_directions(5, 10, 3);
        assert_eq!(a, random_directions(5, 10, 3));
        assert_ne!(a, random_directions(5, 10, 4));
        for d in &a {
            assert!((dot(d, d) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sliced_one_dimensional_translation_is_exact() {
        let x = set("x", &[&[0.0], &[1.5], &[4.0]]);
        let y = set("y", &[&[2.5], &[4.0], &[6.5]]);
        assert!((sliced_w1(&x, &y, 16, 1).unwrap() - 2.5).abs() < 1e-12);
        assert!(sliced_w1(&x, &x, 64, 9).unwrap() < 1e-9);
        let z = set("z", &[&[0.0, 0.0], &[1.0, 1.0]]);
        assert!(sliced_w1(&x, &z, 4, 0).is_err());
        assert!(sliced_w1(&x, &y, 0, 0).is_err());
    }

    #[test]
    fn matrix_shape_and_planted_order() {
        let base: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1, (i % 3) as f64]).collect();
        let shifted = |t: f64| -> EmbeddingSet {
            EmbeddingSet::new(
                format!("s{t}"),
                base.iter().map(|v| vec![v[0] + t, v[1]]).collect(),
            )
            .unwrap()
        };
        let sets = [shifted(0.0), shifted(1.0), shifted(5.0)];
        let m = shift_matrix(&sets, DEFAULT_PROJECTIONS, DEFAULT_SEED).unwrap();
        for i in 0..3 {
            assert_eq!(m.distances[i][i], 0.0);
            for j in 0..3 {
                assert_eq!(m.distances[i][j], m.distances[j][i]);
            }
        }
        assert!(m.distances[0][1] < m.distances[1][2]);
        assert!(m.distances[1][2] < m.distances[0][2]);
        assert!(shift_matrix(&sets[..1], 8, 0).is_err());
        assert_eq!(m.get("s0", "s1"), Some(m.distances[0][1]));
    }

    #[test]
    fn projection_of_line_is_one_dimensional() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64, -(i as f64)]).collect();
        let pts = export_projection(&EmbeddingSet::new("line", rows).unwrap()).unwrap();
        for p in &pts {
            assert!(p[1].abs() < 1e-9);
        }
        assert!(pts[5][0] - pts[0][0] > 0.0 || pts[0][0] - pts[5][0] > 0.0);
    }

    #[test]
    fn projection_rejects_degenerate_input() {
        let same = EmbeddingSet::new("s", vec![vec![1.0, 2.0]; 4]).unwrap();
        assert!(export_projection(&same).is_err());
        let two = set("t", &[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(export_projection(&two).is_err());
    }

    #[test]
    fn projection_is_rotation_equivariant() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = i as f64;
                vec![3.0 * libm::cos(t), libm::sin(t), 0.3 * libm::sin(2.0 * t)]
            })
            .collect();
        let (c, s) = (libm::cos(0.7), libm::sin(0.7));
        let rotated: Vec<Vec<f64>> = rows
            .iter()
            .map(|v| vec![c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]])
            .collect();
        let a = export_projection(&EmbeddingSet::new("a", rows).unwrap()).unwrap();
        let b = export_projection(&EmbeddingSet::new("b", rotated).unwrap()).unwrap();
        for k in 0..2 {
            let same: f64 = a.iter().zip(&b).map(|(p, q)| (p[k] - q[k]).abs()).fold(0.0, f64::max);
            let flip: f64 = a.iter().zip(&b).map(|(p, q)| (p[k] + q[k]).abs()).fold(0.0, f64::max);
            assert!(same.min(flip) < 1e-6, "component {k}: {same} {flip}");
        }
    }

    #[test]
    fn projection_separates_planted_clusters() {
        let mut rows = Vec::new();
        for i in 0..10 {
            let j = (i as f64) * 0.05;
            rows.push(vec![5.0 + j, -5.0 + j, 5.0 - j, j]);
            rows.push(vec![-5.0 - j, 5.0 + j, -5.0 + j, -j]);
        }
        let pts = export_projection(&EmbeddingSet::new("c", rows).unwrap()).unwrap();
        let first: Vec<f64> = pts.iter().step_by(2).map(|p| p[0]).collect();
        let second: Vec<f64> = pts.iter().skip(1).step_by(2).map(|p| p[0]).collect();
        let (lo, hi) = if first[0] < second[0] { (first, second) } else { (second, first) };
        let max_lo = lo.iter().copied().fold(f64::MIN, f64::max);
        let min_hi = hi.iter().copied().fold(f64::MAX, f64::min);
        assert!(max_lo < min_hi);
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-100.0f64..100.0, 1..30)
    }

    proptest! {
        #[test]
        fn w1_is_a_metric(a in sample(), b in sample(), c in sample()) {
            let ab = w1_1d(&a, &b).unwrap();
            prop_assert_eq!(w1_1d(&a, &a).unwrap(), 0.0);
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - w1_1d(&b, &a).unwrap()).abs() <= 1e-9);
            prop_assert!(w1_1d(&a, &c).unwrap() <= ab + w1_1d(&b, &c).unwrap() + 1e-9);
        }

        #[test]
        fn w1_of_translation_is_shift(a in sample(), shift in -50.0f64..50.0) {
            let moved: Vec<f64> = a.iter().map(|x| x + shift).collect();
            prop_assert!((w1_1d(&a, &moved).unwrap() - shift.abs()).abs() <= 1e-9);
        }

        #[test]
        fn sliced_is_symmetric(seed in any::<u64>(), shift in -3.0f64..3.0) {
            let x = set("x", &[&[0.0, 1.0], &[2.0, -1.0], &[0.5, 0.5]]);
            let y = set("y", &[&[shift, 0.0], &[1.0, shift]]);
            let xy = sliced_w1(&x, &y, 8, seed).unwrap();
            prop_assert!(xy >= 0.0);
            prop_assert!((xy - sliced_w1(&y, &x, 8, seed).unwrap()).abs() < 1e-12);
        }
    }
}
