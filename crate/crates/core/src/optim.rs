//! Downhill-simplex minimization over a box, plus Latin-hypercube start
//! generation for multi-start searches.

use rand::Rng;

/// Stopping rules for one simplex descent.
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Convergence when the spread of simplex values falls below this.
    pub value_tolerance: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_iterations: 400, value_tolerance: 1e-10 }
    }
}

/// Outcome of a single start.
#[derive(Debug, Clone)]
pub struct SimplexRun {
    pub best: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Best point and value after each iteration.
    pub trace: Vec<(Vec<f64>, f64)>,
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
}

/// Nelder-Mead with reflection/expansion/contraction/shrink and projection
/// of every candidate onto the box. Works in one dimension too, where the
/// simplex degenerates to a moving pair.
pub fn nelder_mead<F>(
    mut f: F,
    start: &[f64],
    bounds: &[(f64, f64)],
    options: SimplexOptions,
) -> SimplexRun
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(start.len(), bounds.len());
    let dim = start.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut eval = |x: &mut Vec<f64>| {
        project(x, bounds);
        f(x)
    };

    // start plus one vertex per dimension, stepped by 10% of the box width
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let mut first = start.to_vec();
    let v = eval(&mut first);
    simplex.push((first, v));
    for d in 0..dim {
        let (lo, hi) = bounds[d];
        let step = 0.1 * (hi - lo);
        let mut vertex = start.to_vec();
        vertex[d] = if vertex[d] + step <= hi { vertex[d] + step } else { vertex[d] - step };
        let v = eval(&mut vertex);
        simplex.push((vertex, v));
    }

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..options.max_iterations {
        iterations = iter + 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        trace.push((simplex[0].0.clone(), simplex[0].1));
        let spread = simplex[dim].1 - simplex[0].1;
        if spread.abs() <= options.value_tolerance {
            converged = true;
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; dim];
        for (vertex, _) in simplex.iter().take(dim) {
            for (c, &x) in centroid.iter_mut().zip(vertex) {
                *c += x / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let blend = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(&c, &w)| c + t * (c - w))
                .collect()
        };

        let mut reflected = blend(alpha);
        let fr = eval(&mut reflected);
        if fr < simplex[0].1 {
            let mut expanded = blend(gamma);
            let fe = eval(&mut expanded);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
            continue;
        }
        let mut contracted = blend(-rho);
        let fc = eval(&mut contracted);
        if fc < worst.1 {
            simplex[dim] = (contracted, fc);
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let mut shrunk: Vec<f64> = best
                .iter()
                .zip(&entry.0)
                .map(|(&b, &x)| b + sigma * (x - b))
                .collect();
            let fv = eval(&mut shrunk);
            *entry = (shrunk, fv);
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    trace.push((simplex[0].0.clone(), simplex[0].1));
    SimplexRun {
        best: simplex[0].0.clone(),
        value: simplex[0].1,
        converged,
        iterations,
        trace,
    }
}

/// Latin-hypercube sample of `n` start points over the box: each
/// dimension is stratified into `n` slabs visited in a random permutation.
pub fn latin_hypercube<R: Rng>(bounds: &[(f64, f64)], n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let dim = bounds.len();
    let mut strata: Vec<Vec<usize>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut order: Vec<usize> = (0..n).collect();
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        strata.push(order);
    }
    (0..n)
        .map(|i| {
            bounds
                .iter()
                .enumerate()
                .map(|(d, &(lo, hi))| {
                    let u: f64 = rng.gen();
                    lo + (hi - lo) * (strata[d][i] as f64 + u) / n as f64
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn minimizes_a_shifted_bowl() {
        let run = nelder_mead(
            |x| (x[0] - 0.3).powi(2) + (x[1] + 0.7).powi(2),
            &[2.0, 2.0],
            &[(-4.0, 4.0), (-4.0, 4.0)],
            SimplexOptions::default(),
        );
        assert!(run.converged);
        assert!((run.best[0] - 0.3).abs() < 1e-4, "{:?}", run.best);
        assert!((run.best[1] + 0.7).abs() < 1e-4, "{:?}", run.best);
    }

    #[test]
    fn handles_one_dimension_and_boundary_minima() {
        let run = nelder_mead(
            |x| (x[0] - 1.0).abs(),
            &[2.5],
            &[(1.0, 3.0)],
            SimplexOptions::default(),
        );
        assert!((run.best[0] - 1.0).abs() < 1e-6, "{:?}", run.best);
        assert!(run.value < 1e-6);
    }

    #[test]
    fn latin_hypercube_stratifies_each_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 16;
        let starts = latin_hypercube(&[(0.0, 1.0), (10.0, 20.0)], n, &mut rng);
        assert_eq!(starts.len(), n);
        for d in 0..2 {
            let (lo, hi) = [(0.0, 1.0), (10.0, 20.0)][d];
            let mut seen = vec![false; n];
            for s in &starts {
                let stratum = (((s[d] - lo) / (hi - lo)) * n as f64) as usize;
                seen[stratum.min(n - 1)] = true;
            }
            assert!(seen.iter().all(|&b| b), "dimension {d} not stratified");
        }
    }
}
