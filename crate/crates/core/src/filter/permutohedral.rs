//! Permutohedral lattice for approximate high-dimensional Gaussian filtering.
//!
//! Whitened points are lifted onto the hyperplane `x · 1 = 0` in d+1
//! dimensions, which the lattice tiles with congruent simplices. Each point
//! is represented by the d+1 vertices of its enclosing simplex together with
//! barycentric weights. Filtering is then splat (scatter to vertices), blur
//! (a `[1, 2, 1] / 4` pass along each of the d+1 lattice axes) and slice
//! (gather back with the same weights).

use std::f64::consts::PI;

use crate::error::Result;
use crate::filter::features::FeatureMatrix;
use crate::filter::{check_values, normalize_rows, FilterScratch, GaussianFilter};
use crate::matrix::Matrix;

const NONE: usize = usize::MAX;

/// Open-addressing table from lattice keys to vertex slots.
///
/// Keys hold the first d coordinates; the last one is implied by the
/// zero-sum constraint. Lookups compare keys exactly.
#[derive(Debug, Clone)]
struct VertexTable {
    dim: usize,
    keys: Vec<i32>,
    slots: Vec<usize>,
}

impl VertexTable {
    fn with_capacity(dim: usize, expected: usize) -> Self {
        let cap = (expected * 2).next_power_of_two().max(16);
        VertexTable {
            dim,
            keys: Vec::with_capacity(expected * dim),
            slots: vec![NONE; cap],
        }
    }

    fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.keys.len() / self.dim
        }
    }

    #[inline]
    fn hash(key: &[i32]) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &k in key {
            h ^= k as u32 as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^ (h >> 29)
    }

    #[inline]
    fn key(&self, v: usize) -> &[i32] {
        &self.keys[v * self.dim..(v + 1) * self.dim]
    }

    fn find(&self, key: &[i32]) -> Option<usize> {
        let mask = self.slots.len() - 1;
        let mut h = Self::hash(key) as usize & mask;
        loop {
            let v = self.slots[h];
            if v == NONE {
                return None;
            }
            if self.key(v) == key {
                return Some(v);
            }
            h = (h + 1) & mask;
        }
    }

    fn find_or_insert(&mut self, key: &[i32]) -> usize {
        if 2 * (self.len() + 1) > self.slots.len() {
            self.grow();
        }
        let mask = self.slots.len() - 1;
        let mut h = Self::hash(key) as usize & mask;
        loop {
            let v = self.slots[h];
            if v == NONE {
                let id = self.len();
                self.keys.extend_from_slice(key);
                self.slots[h] = id;
                return id;
            }
            if self.key(v) == key {
                return v;
            }
            h = (h + 1) & mask;
        }
    }

    fn grow(&mut self) {
        let cap = self.slots.len() * 2;
        let mask = cap - 1;
        let mut slots = vec![NONE; cap];
        for v in 0..self.len() {
            let mut h = Self::hash(self.key(v)) as usize & mask;
            while slots[h] != NONE {
                h = (h + 1) & mask;
            }
            slots[h] = v;
        }
        self.slots = slots;
    }
}

/// A permutohedral lattice built over a fixed set of whitened points.
///
/// Immutable after [`PermutohedralLattice::build`]; every filtering call
/// owns its scratch buffers, so a lattice can be shared across threads.
#[derive(Debug, Clone)]
pub struct PermutohedralLattice {
    dim: usize,
    n_points: usize,
    table: VertexTable,
    /// `n_points * (d + 1)` vertex slots, one simplex per point.
    offsets: Vec<usize>,
    /// Barycentric weights matching `offsets`.
    weights: Vec<f64>,
    /// Per axis, per vertex: `[vertex - u_axis, vertex + u_axis]`.
    neighbors: Vec<[usize; 2]>,
    /// Scale from lattice response to kernel strength.
    gain: f64,
    norm: Vec<f64>,
    self_weight: Vec<f64>,
}

impl PermutohedralLattice {
    /// Build a lattice with sample spacing of one standard deviation of the
    /// unit-variance kernel.
    pub fn build(whitened: &FeatureMatrix) -> Self {
        let d = whitened.dim();
        let n = whitened.n_points();
        let d1 = d + 1;

        // Lattice scale giving a unit-variance Gaussian after splat, the
        // d+1 axis blurs and slice.
        let inv_std = d1 as f64 * (2.0f64 / 3.0).sqrt();
        let scale: Vec<f64> = (0..d)
            .map(|i| inv_std / (((i + 1) * (i + 2)) as f64).sqrt())
            .collect();

        let mut table = VertexTable::with_capacity(d, n * d1 / 4 + 16);
        let mut offsets = Vec::with_capacity(n * d1);
        let mut weights = Vec::with_capacity(n * d1);
        let mut ranks = Vec::with_capacity(n * d1);

        let mut elevated = vec![0.0f64; d1];
        let mut greedy = vec![0i64; d1];
        let mut rank = vec![0i64; d1];
        let mut bary = vec![0.0f64; d1 + 1];
        let mut key = vec![0i32; d];
        let down = 1.0 / d1 as f64;
        let d1i = d1 as i64;
        let di = d as i64;

        for i in 0..n {
            let f = whitened.point(i);

            // Elevate onto the hyperplane.
            let mut sm = 0.0;
            for j in (1..=d).rev() {
                let cf = f[j - 1] * scale[j - 1];
                elevated[j] = sm - j as f64 * cf;
                sm += cf;
            }
            elevated[0] = sm;

            // Nearest remainder-0 lattice point, coordinate-wise.
            let mut sum = 0i64;
            for j in 0..d1 {
                let v = elevated[j] * down;
                let up = v.ceil() as i64 * d1i;
                let lo = v.floor() as i64 * d1i;
                greedy[j] = if up as f64 - elevated[j] < elevated[j] - lo as f64 {
                    up
                } else {
                    lo
                };
                sum += greedy[j];
            }
            sum /= d1i;

            // Rank the residuals to find the enclosing simplex.
            rank.iter_mut().for_each(|r| *r = 0);
            for a in 0..d {
                for b in a + 1..d1 {
                    if elevated[a] - (greedy[a] as f64) < elevated[b] - (greedy[b] as f64) {
                        rank[a] += 1;
                    } else {
                        rank[b] += 1;
                    }
                }
            }

            // Project the rounded point back onto the hyperplane.
            if sum > 0 {
                for j in 0..d1 {
                    if rank[j] >= d1i - sum {
                        greedy[j] -= d1i;
                        rank[j] += sum - d1i;
                    } else {
                        rank[j] += sum;
                    }
                }
            } else if sum < 0 {
                for j in 0..d1 {
                    if rank[j] < -sum {
                        greedy[j] += d1i;
                        rank[j] += d1i + sum;
                    } else {
                        rank[j] += sum;
                    }
                }
            }

            // Barycentric coordinates from sorted residuals.
            bary.iter_mut().for_each(|b| *b = 0.0);
            for j in 0..d1 {
                let r = rank[j] as usize;
                let delta = (elevated[j] - greedy[j] as f64) * down;
                bary[d - r] += delta;
                bary[d1 - r] -= delta;
            }
            bary[0] += 1.0 + bary[d1];

            for remainder in 0..d1i {
                for j in 0..d {
                    let mut k = greedy[j] + remainder;
                    if rank[j] > di - remainder {
                        k -= d1i;
                    }
                    key[j] = k as i32;
                }
                offsets.push(table.find_or_insert(&key));
                weights.push(bary[remainder as usize].max(0.0));
            }
            ranks.extend(rank.iter().map(|&r| r as usize));
        }

        let neighbors = Self::link_neighbors(&table, d);

        let gain = (4.0 * PI / 3.0).powf(d as f64 / 2.0) * (d1 as f64).sqrt();

        let mut lattice = PermutohedralLattice {
            dim: d,
            n_points: n,
            table,
            offsets,
            weights,
            neighbors,
            gain,
            norm: Vec::new(),
            self_weight: Vec::new(),
        };
        lattice.self_weight = (0..n)
            .map(|i| lattice.point_self_weight(i, &ranks[i * d1..(i + 1) * d1]))
            .collect();
        let mut norm = Matrix::zeros(0, 0);
        lattice.apply(
            &Matrix::filled(n, 1, 1.0),
            &mut norm,
            &mut FilterScratch::default(),
        );
        lattice.norm = norm.into_vec();
        lattice
    }

    fn link_neighbors(table: &VertexTable, d: usize) -> Vec<[usize; 2]> {
        let nv = table.len();
        let mut neighbors = vec![[NONE; 2]; (d + 1) * nv];
        let mut minus = vec![0i32; d];
        let mut plus = vec![0i32; d];
        for axis in 0..=d {
            for v in 0..nv {
                let key = table.key(v);
                for k in 0..d {
                    minus[k] = key[k] - 1;
                    plus[k] = key[k] + 1;
                }
                if axis < d {
                    minus[axis] = key[axis] + d as i32;
                    plus[axis] = key[axis] - d as i32;
                }
                neighbors[axis * nv + v] = [
                    table.find(&minus).unwrap_or(NONE),
                    table.find(&plus).unwrap_or(NONE),
                ];
            }
        }
        neighbors
    }

    /// Response of point `i` to its own unit impulse, following every blur
    /// path between its simplex vertices that survives lattice truncation.
    fn point_self_weight(&self, i: usize, rank: &[usize]) -> f64 {
        let d = self.dim;
        let d1 = d + 1;
        let off = &self.offsets[i * d1..(i + 1) * d1];
        let w = &self.weights[i * d1..(i + 1) * d1];
        let mut total = 0.0;
        for a in 0..d1 {
            if w[a] == 0.0 {
                continue;
            }
            for b in 0..d1 {
                if w[b] == 0.0 {
                    continue;
                }
                let paths = if a == b {
                    self.walk(off[a], |_| 0) + self.walk(off[a], |_| 1) + self.walk(off[a], |_| -1)
                } else {
                    // Vertex k+1 of the simplex is vertex k moved +1 along the
                    // axis of rank d-k.
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    let sign = if a < b { 1 } else { -1 };
                    let in_span = |axis: usize| rank[axis] + hi > d && rank[axis] + lo <= d;
                    self.walk(off[a], |ax| if in_span(ax) { sign } else { 0 })
                        + self.walk(off[a], |ax| if in_span(ax) { 0 } else { -sign })
                };
                total += w[a] * w[b] * paths;
            }
        }
        total * self.gain
    }

    /// Weight of one blur path from `start`; zero if it leaves the lattice.
    fn walk(&self, start: usize, step: impl Fn(usize) -> i32) -> f64 {
        let nv = self.n_vertices();
        let mut cur = start;
        let mut weight = 1.0;
        for axis in 0..=self.dim {
            match step(axis) {
                0 => weight *= 0.5,
                s => {
                    let nb = self.neighbors[axis * nv + cur];
                    cur = if s < 0 { nb[0] } else { nb[1] };
                    if cur == NONE {
                        return 0.0;
                    }
                    weight *= 0.25;
                }
            }
        }
        weight
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.table.len()
    }

    /// The d+1 `(vertex, barycentric weight)` pairs of point `i`.
    pub fn simplex(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let d1 = self.dim + 1;
        self.offsets[i * d1..(i + 1) * d1]
            .iter()
            .copied()
            .zip(self.weights[i * d1..(i + 1) * d1].iter().copied())
    }

    /// Full d+1 coordinate key of vertex `v`.
    pub fn vertex_key(&self, v: usize) -> Vec<i64> {
        let mut key: Vec<i64> = self.table.key(v).iter().map(|&k| k as i64).collect();
        let last = -key.iter().sum::<i64>();
        key.push(last);
        key
    }

    /// Scatter point values onto lattice vertices.
    pub fn splat(&self, values: &Matrix) -> Matrix {
        let mut buf = Vec::new();
        self.splat_into(values, &mut buf);
        Matrix::from_vec(self.n_vertices(), values.cols(), buf).expect("splat shape")
    }

    /// Apply the `[1, 2, 1] / 4` kernel along lattice axes 0..=d in order.
    /// Mass sent to vertices absent from the lattice is dropped.
    pub fn blur(&self, lattice_values: &mut Matrix) {
        let l = lattice_values.cols();
        let mut buf = std::mem::replace(lattice_values, Matrix::zeros(0, 0)).into_vec();
        self.blur_in_place(&mut buf, &mut Vec::new(), l);
        *lattice_values = Matrix::from_vec(self.n_vertices(), l, buf).expect("blur shape");
    }

    /// Gather vertex values back to the points, scaled to kernel strength.
    pub fn slice(&self, lattice_values: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(0, 0);
        self.slice_into(lattice_values.as_slice(), lattice_values.cols(), &mut out);
        out
    }

    fn splat_into(&self, values: &Matrix, lat: &mut Vec<f64>) {
        let l = values.cols();
        let d1 = self.dim + 1;
        lat.clear();
        lat.resize(self.n_vertices() * l, 0.0);
        for (i, row) in values.iter_rows().enumerate().take(self.n_points) {
            let offs = &self.offsets[i * d1..(i + 1) * d1];
            let ws = &self.weights[i * d1..(i + 1) * d1];
            for (&o, &w) in offs.iter().zip(ws) {
                let dst = &mut lat[o * l..(o + 1) * l];
                for (x, v) in dst.iter_mut().zip(row) {
                    *x += w * v;
                }
            }
        }
    }

    fn blur_in_place(&self, lat: &mut Vec<f64>, scratch: &mut Vec<f64>, l: usize) {
        let nv = self.n_vertices();
        scratch.clear();
        scratch.resize(nv * l, 0.0);
        for axis in 0..=self.dim {
            {
                let old = &lat[..];
                let nbs = &self.neighbors[axis * nv..(axis + 1) * nv];
                for ((dst, center), &[m, p]) in
                    scratch.chunks_exact_mut(l).zip(old.chunks_exact(l)).zip(nbs)
                {
                    match (m != NONE, p != NONE) {
                        (true, true) => {
                            let a = &old[m * l..(m + 1) * l];
                            let b = &old[p * l..(p + 1) * l];
                            for k in 0..l {
                                dst[k] = 0.5 * center[k] + 0.25 * (a[k] + b[k]);
                            }
                        }
                        (true, false) | (false, true) => {
                            let nb = if m != NONE { m } else { p };
                            let a = &old[nb * l..(nb + 1) * l];
                            for k in 0..l {
                                dst[k] = 0.5 * center[k] + 0.25 * a[k];
                            }
                        }
                        (false, false) => {
                            for k in 0..l {
                                dst[k] = 0.5 * center[k];
                            }
                        }
                    }
                }
            }
            std::mem::swap(lat, scratch);
        }
    }

    fn slice_into(&self, lat: &[f64], l: usize, out: &mut Matrix) {
        let d1 = self.dim + 1;
        out.reset(self.n_points, l);
        for i in 0..self.n_points {
            let row = out.row_mut(i);
            let offs = &self.offsets[i * d1..(i + 1) * d1];
            let ws = &self.weights[i * d1..(i + 1) * d1];
            for (&o, &w) in offs.iter().zip(ws) {
                let w = w * self.gain;
                for (dst, v) in row.iter_mut().zip(&lat[o * l..(o + 1) * l]) {
                    *dst += w * v;
                }
            }
        }
    }

    fn apply(&self, values: &Matrix, out: &mut Matrix, scratch: &mut FilterScratch) {
        self.splat_into(values, &mut scratch.front);
        self.blur_in_place(&mut scratch.front, &mut scratch.back, values.cols());
        self.slice_into(&scratch.front, values.cols(), out);
    }
}

impl GaussianFilter for PermutohedralLattice {
    fn n_points(&self) -> usize {
        self.n_points
    }

    fn filter_into(
        &self,
        values: &Matrix,
        normalize: bool,
        out: &mut Matrix,
        scratch: &mut FilterScratch,
    ) -> Result<()> {
        check_values(values, self.n_points)?;
        self.apply(values, out, scratch);
        if normalize {
            normalize_rows(out, &self.norm);
        }
        Ok(())
    }

    fn normalizer(&self) -> &[f64] {
        &self.norm
    }

    fn self_weight(&self) -> &[f64] {
        &self.self_weight
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;

    use super::*;
    use crate::bench::random_instance;
    use crate::filter::{brute_force_filter, KernelSpec};
    use crate::matrix::column_relative_l2;

    fn points(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn single_point() {
        for d in 1..8 {
            let lat = PermutohedralLattice::build(&points(&[vec![0.3; d]]));
            assert_eq!(lat.n_vertices(), d + 1);
            let total: f64 = lat.simplex(0).map(|(_, w)| w).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let v = Matrix::from_rows(&[[2.5, -1.0]]).unwrap();
            let out = lat.filter(&v, true).unwrap();
            assert!((out[(0, 0)] - 2.5).abs() < 1e-12 && (out[(0, 1)] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_points_share_a_simplex() {
        let lat = PermutohedralLattice::build(&points(&[vec![1.7, -0.2, 3.1], vec![1.7, -0.2, 3.1]]));
        assert_eq!(lat.simplex(0).collect::<Vec<_>>(), lat.simplex(1).collect::<Vec<_>>());
        assert_eq!(lat.n_vertices(), 4);
    }

    #[test]
    fn coincident_points_average() {
        let lat = PermutohedralLattice::build(&points(&[vec![0.0, 0.0], vec![0.0, 0.0]]));
        let v = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let out = lat.filter(&v, true).unwrap();
        for x in out.as_slice() {
            assert!((x - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn vertex_count_matches_key_dedup() {
        let (feats, _) = random_instance(1000, 5, 1, 3).unwrap();
        let lat = PermutohedralLattice::build(&feats);
        let mut keys = HashSet::new();
        let mut slots = HashSet::new();
        for i in 0..1000 {
            for (v, _) in lat.simplex(i) {
                keys.insert(lat.vertex_key(v));
                slots.insert(v);
            }
        }
        assert_eq!(keys.len(), lat.n_vertices());
        assert_eq!(slots.len(), lat.n_vertices());
        assert!(lat.n_vertices() <= 1000 * 6);
    }

    #[test]
    fn oracle_error_within_five_percent() {
        for (n, d, seed) in [(1000, 5, 11), (2000, 5, 12), (2000, 2, 13), (100, 2, 14)] {
            let (feats, values) = random_instance(n, d, 3, seed).unwrap();
            let lat = PermutohedralLattice::build(&feats);
            let approx = lat.filter(&values, true).unwrap();
            let exact = brute_force_filter(&feats, &KernelSpec::unit(d, 1.0).unwrap(), &values, true).unwrap();
            for c in 0..3 {
                let err = column_relative_l2(&approx, &exact, c);
                assert!(err <= 0.05, "n={n} d={d} column {c}: {err}");
            }
        }
    }

    #[test]
    fn splat_blur_slice_matches_filter() {
        let (feats, values) = random_instance(100, 3, 2, 5).unwrap();
        let lat = PermutohedralLattice::build(&feats);
        let mut lv = lat.splat(&values);
        lat.blur(&mut lv);
        let staged = lat.slice(&lv);
        assert_eq!(staged, lat.filter(&values, false).unwrap());
    }

    #[test]
    fn shape_and_finiteness_checked() {
        let lat = PermutohedralLattice::build(&points(&[vec![0.0], vec![1.0]]));
        assert!(lat.filter(&Matrix::zeros(3, 1), false).is_err());
        assert!(lat.filter(&Matrix::filled(2, 1, f64::NAN), false).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn barycentric_partition_of_unity(seed in any::<u64>(), n in 1usize..150, d in 1usize..8) {
            let (feats, _) = random_instance(n, d, 1, seed).unwrap();
            let lat = PermutohedralLattice::build(&feats);
            for i in 0..n {
                let ws: Vec<f64> = lat.simplex(i).map(|(_, w)| w).collect();
                prop_assert_eq!(ws.len(), d + 1);
                prop_assert!(ws.iter().all(|&w| w >= -1e-12));
                prop_assert!((ws.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn keys_sum_to_zero_and_share_a_remainder(seed in any::<u64>(), n in 1usize..100, d in 1usize..8) {
            let (feats, _) = random_instance(n, d, 1, seed).unwrap();
            let lat = PermutohedralLattice::build(&feats);
            let m = d as i64 + 1;
            for v in 0..lat.n_vertices() {
                let key = lat.vertex_key(v);
                prop_assert_eq!(key.len(), d + 1);
                prop_assert_eq!(key.iter().sum::<i64>(), 0);
                let r = key[0].rem_euclid(m);
                prop_assert!(key.iter().all(|k| k.rem_euclid(m) == r));
            }
        }

        #[test]
        fn linearity(seed in any::<u64>(), n in 1usize..150, d in 1usize..6, a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let (feats, v1) = random_instance(n, d, 2, seed).unwrap();
            let (_, v2) = random_instance(n, d, 2, seed ^ 0x5555).unwrap();
            let lat = PermutohedralLattice::build(&feats);
            let mut mix = v1.clone();
            mix.scale(a);
            mix.add_scaled(&v2, b);
            let lhs = lat.filter(&mix, false).unwrap();
            let mut rhs = lat.filter(&v1, false).unwrap();
            rhs.scale(a);
            rhs.add_scaled(&lat.filter(&v2, false).unwrap(), b);
            let scale = rhs.as_slice().iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for (x, y) in lhs.as_slice().iter().zip(rhs.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn blur_preserves_mass_on_dense_input(seed in any::<u64>()) {
            // 8000 points over a 40×40 square: few vertices lie on the rim
            let (feats, values) = random_instance(8000, 2, 1, seed).unwrap();
            let mut m = feats.as_matrix().clone();
            m.scale(8.0);
            let lat = PermutohedralLattice::build(&FeatureMatrix::new(m).unwrap());
            let mut lv = lat.splat(&values);
            let before: f64 = lv.as_slice().iter().sum();
            let input: f64 = values.as_slice().iter().sum();
            prop_assert!((before - input).abs() < 1e-9 * input);
            lat.blur(&mut lv);
            let after: f64 = lv.as_slice().iter().sum();
            prop_assert!(after <= before * (1.0 + 1e-12));
            prop_assert!((before - after) / before < 0.02, "lost {}", (before - after) / before);
        }

        #[test]
        fn permutation_equivariance(seed in any::<u64>(), n in 2usize..120, d in 1usize..6) {
            let (feats, values) = random_instance(n, d, 2, seed).unwrap();
            let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
            prop_assume!({
                let mut s = perm.clone();
                s.sort_unstable();
                s.dedup();
                s.len() == n
            });
            let out = PermutohedralLattice::build(&feats).filter(&values, true).unwrap();
            let permuted = PermutohedralLattice::build(&feats.permuted(&perm))
                .filter(&values.select_rows(&perm), true)
                .unwrap();
            for (k, &src) in perm.iter().enumerate() {
                for c in 0..2 {
                    prop_assert!((permuted[(k, c)] - out[(src, c)]).abs() < 1e-9);
                }
            }
        }
    }
}
