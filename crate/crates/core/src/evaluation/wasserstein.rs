//! Empirical 1-Wasserstein distance between uniform point clouds.
//!
//! Small problems are solved exactly as a transportation problem with
//! successive shortest augmenting paths; large ones fall back to a seeded
//! sliced approximation.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n_a * n_b` solved exactly.
pub const EXACT_LIMIT: usize = 1_000_000;
pub const SLICED_PROJECTIONS: usize = 256;
const SLICED_SEED: u64 = 0x005e_ed0f_d15c;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WassersteinMethod {
    Exact,
    Sliced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wasserstein {
    pub distance: f64,
    pub method: WassersteinMethod,
}

fn check(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            what: "point dimension",
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    if a.ncols() == 0 || a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::InvalidInput(
            "Wasserstein distance needs non-empty point clouds".into(),
        ));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("point cloud"));
    }
    Ok(())
}

/// W1 distance with Euclidean ground cost between the rows of `a` and `b`,
/// each row carrying equal mass.
pub fn wasserstein_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Wasserstein> {
    check(a, b)?;
    if a.nrows() * b.nrows() <= EXACT_LIMIT {
        Ok(Wasserstein {
            distance: exact_w1(a, b),
            method: WassersteinMethod::Exact,
        })
    } else {
        Ok(Wasserstein {
            distance: sliced_w1(a, b, SLICED_PROJECTIONS, SLICED_SEED),
            method: WassersteinMethod::Sliced,
        })
    }
}

/// Exact W1 via min-cost flow. Masses are scaled to integers (`n_b` per
/// source point, `n_a` per sink point) so the flow is exact.
pub fn exact_w1(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let (na, nb) = (a.nrows(), b.nrows());
    let cost = DMatrix::from_fn(na, nb, |i, j| (a.row(i) - b.row(j)).norm());

    let mut supply = vec![nb as u64; na];
    let mut demand = vec![na as u64; nb];
    let mut flow = DMatrix::<u64>::zeros(na, nb);
    // potentials for the A side, B side and the sink
    let mut pot_a = vec![0.0; na];
    let mut pot_b = vec![0.0; nb];
    let mut remaining = (na * nb) as u64;

    let mut dist_a = vec![0.0; na];
    let mut dist_b = vec![0.0; nb];
    let mut done_a = vec![false; na];
    let mut done_b = vec![false; nb];
    // predecessor of a B node is an A node; of an A node, a B node (None: source)
    let mut prev_b = vec![usize::MAX; nb];
    let mut prev_a = vec![usize::MAX; na];

    while remaining > 0 {
        // Dijkstra on reduced costs from a virtual source attached to every
        // A node with supply left. Dense O(V^2).
        for i in 0..na {
            dist_a[i] = if supply[i] > 0 { 0.0 } else { f64::INFINITY };
            done_a[i] = false;
            prev_a[i] = usize::MAX;
        }
        for j in 0..nb {
            dist_b[j] = f64::INFINITY;
            done_b[j] = false;
            prev_b[j] = usize::MAX;
        }
        let mut sink: Option<(usize, f64)> = None;
        loop {
            // pick the closest unsettled node
            let mut best = f64::INFINITY;
            let mut pick: Option<(bool, usize)> = None;
            for i in 0..na {
                if !done_a[i] && dist_a[i] < best {
                    best = dist_a[i];
                    pick = Some((true, i));
                }
            }
            for j in 0..nb {
                if !done_b[j] && dist_b[j] < best {
                    best = dist_b[j];
                    pick = Some((false, j));
                }
            }
            let Some((is_a, u)) = pick else { break };
            if is_a {
                done_a[u] = true;
                for j in 0..nb {
                    if done_b[j] {
                        continue;
                    }
                    let rc = (cost[(u, j)] + pot_a[u] - pot_b[j]).max(0.0);
                    let d = dist_a[u] + rc;
                    if d < dist_b[j] {
                        dist_b[j] = d;
                        prev_b[j] = u;
                    }
                }
            } else {
                done_b[u] = true;
                if demand[u] > 0 && sink.is_none_or(|(_, d)| dist_b[u] < d) {
                    sink = Some((u, dist_b[u]));
                    // every remaining node is at least this far away
                    break;
                }
                for i in 0..na {
                    if done_a[i] || flow[(i, u)] == 0 {
                        continue;
                    }
                    let rc = (-cost[(i, u)] + pot_b[u] - pot_a[i]).max(0.0);
                    let d = dist_b[u] + rc;
                    if d < dist_a[i] {
                        dist_a[i] = d;
                        prev_a[i] = u;
                    }
                }
            }
        }
        let (end, dmax) = sink.expect("transportation problem is always feasible");

        // potential update keeps reduced costs non-negative
        for i in 0..na {
            pot_a[i] += dist_a[i].min(dmax);
        }
        for j in 0..nb {
            pot_b[j] += dist_b[j].min(dmax);
        }

        // bottleneck along the path end <- a <- b <- a ... <- source
        let mut bottleneck = demand[end];
        let mut j = end;
        loop {
            let i = prev_b[j];
            match prev_a[i] {
                usize::MAX => {
                    bottleneck = bottleneck.min(supply[i]);
                    break;
                }
                jb => {
                    bottleneck = bottleneck.min(flow[(i, jb)]);
                    j = jb;
                }
            }
        }
        let mut j = end;
        demand[end] -= bottleneck;
        loop {
            let i = prev_b[j];
            flow[(i, j)] += bottleneck;
            match prev_a[i] {
                usize::MAX => {
                    supply[i] -= bottleneck;
                    break;
                }
                jb => {
                    flow[(i, jb)] -= bottleneck;
                    j = jb;
                }
            }
        }
        remaining -= bottleneck;
    }

    let total: f64 = flow
        .iter()
        .zip(cost.iter())
        .map(|(&f, &c)| f as f64 * c)
        .sum();
    total / (na * nb) as f64
}

/// 1-D W1 between two samples: integral of |F_a - F_b|.
pub fn w1_1d(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut all: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    all.sort_by(f64::total_cmp);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut total = 0.0;
    for w in all.windows(2) {
        while ia < a.len() && a[ia] <= w[0] {
            ia += 1;
        }
        while ib < b.len() && b[ib] <= w[0] {
            ib += 1;
        }
        total += (ia as f64 / na - ib as f64 / nb).abs() * (w[1] - w[0]);
    }
    total
}

/// Average of 1-D W1 distances over random unit directions.
pub fn sliced_w1(a: &DMatrix<f64>, b: &DMatrix<f64>, projections: usize, seed: u64) -> f64 {
    let d = a.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..projections {
        let mut dir = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let norm = dir.norm();
        if norm == 0.0 {
            dir[0] = 1.0;
        } else {
            dir /= norm;
        }
        let pa: Vec<f64> = (a * &dir).iter().copied().collect();
        let pb: Vec<f64> = (b * &dir).iter().copied().collect();
        total += w1_1d(&pa, &pb);
    }
    total / projections as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cloud(rng: &mut ChaCha8Rng, n: usize, d: usize, shift: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0) + shift)
    }

    #[test]
    fn identical_clouds_are_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = cloud(&mut rng, 7, 2, 0.0);
        assert!(wasserstein_distance(&a, &a).unwrap().distance.abs() < 1e-12);
    }

    #[test]
    fn point_masses() {
        let a = DMatrix::from_element(1, 1, 0.0);
        let b = DMatrix::from_element(1, 1, 5.0);
        let w = wasserstein_distance(&a, &b).unwrap();
        assert_eq!(w.distance, 5.0);
        assert_eq!(w.method, WassersteinMethod::Exact);
    }

    #[test]
    fn unequal_sizes_match_1d_cdf_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let na = rng.random_range(1..9);
            let nb = rng.random_range(1..9);
            let a = cloud(&mut rng, na, 1, 0.0);
            let b = cloud(&mut rng, nb, 1, 0.3);
            let exact = exact_w1(&a, &b);
            let cdf = w1_1d(a.as_slice(), b.as_slice());
            assert!((exact - cdf).abs() < 1e-12, "{exact} vs {cdf}");
        }
    }

    #[test]
    fn two_to_one_split() {
        // A = {0, 2}, B = {1}: each half-mass travels 1.
        let a = DMatrix::from_column_slice(2, 1, &[0.0, 2.0]);
        let b = DMatrix::from_column_slice(1, 1, &[1.0]);
        assert!((exact_w1(&a, &b) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = cloud(&mut rng, 9, 2, 0.0);
        let b = cloud(&mut rng, 5, 2, 0.5);
        assert!((exact_w1(&a, &b) - exact_w1(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let a = DMatrix::zeros(3, 2);
        let b = DMatrix::zeros(3, 3);
        assert!(wasserstein_distance(&a, &b).is_err());
    }

    #[test]
    fn sliced_is_seeded_and_close_in_1d() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = cloud(&mut rng, 50, 1, 0.0);
        let b = cloud(&mut rng, 40, 1, 1.0);
        let s1 = sliced_w1(&a, &b, 16, 9);
        assert_eq!(s1, sliced_w1(&a, &b, 16, 9));
        // in 1-D every direction is +-1, so slicing is exact
        assert!((s1 - exact_w1(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn moderate_problem_is_fast_enough() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = cloud(&mut rng, 400, 2, 0.0);
        let b = cloud(&mut rng, 80, 2, 0.7);
        let w = exact_w1(&a, &b);
        let lower = {
            // distance between means is a lower bound for W1
            let ma = a.row_mean();
            let mb = b.row_mean();
            (ma - mb).norm()
        };
        assert!(w >= lower - 1e-9);
    }
}
