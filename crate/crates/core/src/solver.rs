//! Least-squares isotonic estimation by alternating cone projections.
//!
//! The monotone cone of a lattice is the intersection of the per-axis chain
//! cones, and the exact projection onto each chain cone is a weighted
//! pool-adjacent-violators sweep. Plain cyclic sweeps converge to a point of
//! the intersection but not to the projection; Dykstra's correction memory
//! makes the iteration converge to the exact Euclidean projection, which is
//! what the certificate checks assume.

use crate::error::{IsoError, Result};
use crate::graph::Dag;
use crate::lattice::{Field, LatticeShape};
use crate::rng::Rng;

/// Stopping controls for the alternating-projection solvers.
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Max-norm change over one full cycle at which to stop.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Run the certificate after solving (diagnostics only).
    pub certificate_check: bool,
}

impl SolveOptions {
    pub fn new(tol: f64, max_sweeps: usize) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(IsoError::domain("tol must be positive"));
        }
        if max_sweeps == 0 {
            return Err(IsoError::domain("max_sweeps must be at least 1"));
        }
        Ok(SolveOptions {
            tol,
            max_sweeps,
            certificate_check: false,
        })
    }

    /// Defaults scaled to a lattice: tol 1e-10, sweeps 100 (d+1) max_j n_j.
    pub fn for_shape(shape: &LatticeShape) -> Self {
        let max_side = shape.dims().iter().copied().max().unwrap_or(1);
        SolveOptions {
            tol: 1e-10,
            max_sweeps: 100 * (shape.ndim() + 1) * max_side,
            certificate_check: false,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_sweeps: 50_000,
            certificate_check: false,
        }
    }
}

/// Weighted pool-adjacent-violators: the unique weighted least-squares
/// non-decreasing fit. Pooled runs take their weighted mean.
pub fn pava_1d(y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if y.len() != w.len() {
        return Err(IsoError::domain("pava: value/weight length mismatch"));
    }
    if w.iter().any(|&wi| !(wi > 0.0)) {
        return Err(IsoError::domain("pava: weights must be positive"));
    }
    let mut out = y.to_vec();
    let mut wbuf = w.to_vec();
    let mut lens = vec![0usize; y.len()];
    pava_inplace(&mut out, &mut wbuf, &mut lens);
    Ok(out)
}

/// In-place PAVA over parallel value/weight slices. `lens` is scratch of the
/// same length. On return `vals` holds the fitted values expanded per site.
fn pava_inplace(vals: &mut [f64], wts: &mut [f64], lens: &mut [usize]) {
    let n = vals.len();
    if n == 0 {
        return;
    }
    // Stack of blocks kept at the front of the slices.
    let mut top = 0usize; // number of blocks - 1 after first push
    lens[0] = 1;
    for i in 1..n {
        top += 1;
        vals[top] = vals[i];
        wts[top] = wts[i];
        lens[top] = 1;
        while top > 0 && vals[top - 1] > vals[top] {
            let wsum = wts[top - 1] + wts[top];
            vals[top - 1] = (wts[top - 1] * vals[top - 1] + wts[top] * vals[top]) / wsum;
            wts[top - 1] = wsum;
            lens[top - 1] += lens[top];
            top -= 1;
        }
    }
    // Expand block values back over the sites, back to front.
    let mut pos = n;
    for b in (0..=top).rev() {
        let v = vals[b];
        for _ in 0..lens[b] {
            pos -= 1;
            vals[pos] = v;
        }
    }
}

/// Result of a lattice solve.
#[derive(Clone, Debug)]
pub struct LatticeFit {
    pub fit: Field,
    pub converged: bool,
    pub sweeps: usize,
    /// Max-norm change over the final cycle.
    pub last_change: f64,
}

/// Euclidean projection of `y` onto the cone of coordinatewise
/// non-decreasing fields, by Dykstra's algorithm over the per-axis chain
/// cones with PAVA as the chain projection.
pub fn lse_lattice(y: &Field, opts: &SolveOptions) -> LatticeFit {
    let shape = y.shape().clone();
    let d = shape.ndim();
    let n = shape.len();
    let mut x: Vec<f64> = y.values().to_vec();
    let mut corrections = vec![vec![0.0f64; n]; d];
    let mut prev = vec![0.0f64; n];
    let mut line_vals: Vec<f64> = Vec::new();
    let mut line_wts: Vec<f64> = Vec::new();
    let mut line_lens: Vec<usize> = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    let mut last_change = f64::INFINITY;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        prev.copy_from_slice(&x);
        for (axis, corr) in corrections.iter_mut().enumerate() {
            // z = x + correction; x = P_axis(z); correction = z - x.
            for i in 0..n {
                x[i] += corr[i];
            }
            project_axis(
                &shape,
                axis,
                &mut x,
                &mut line_vals,
                &mut line_wts,
                &mut line_lens,
                Some(corr),
            );
        }
        let mut change = 0.0f64;
        for i in 0..n {
            let dlt = (x[i] - prev[i]).abs();
            if dlt > change {
                change = dlt;
            }
        }
        last_change = change;
        if change <= opts.tol {
            converged = true;
            break;
        }
    }
    let fit = Field::new(shape, x).expect("projection output is finite");
    LatticeFit {
        fit,
        converged,
        sweeps,
        last_change,
    }
}

/// Project onto the axis-monotone cone: PAVA along every line of `axis`.
/// When `corr` is given it receives `z - P(z)` per entry (Dykstra memory).
fn project_axis(
    shape: &LatticeShape,
    axis: usize,
    x: &mut [f64],
    line_vals: &mut Vec<f64>,
    line_wts: &mut Vec<f64>,
    line_lens: &mut Vec<usize>,
    mut corr: Option<&mut Vec<f64>>,
) {
    let d = shape.ndim();
    let stride = shape.strides()[axis];
    let len = shape.dims()[axis];
    line_vals.resize(len, 0.0);
    line_wts.resize(len, 0.0);
    line_lens.resize(len, 0);
    // Iterate over line starts: multi-indices with coordinate 0 on `axis`.
    let lo = vec![0usize; d];
    let hi: Vec<usize> = shape
        .dims()
        .iter()
        .enumerate()
        .map(|(j, &nj)| if j == axis { 0 } else { nj - 1 })
        .collect();
    let mut multi = lo.clone();
    loop {
        let base = shape.flat(&multi);
        for k in 0..len {
            line_vals[k] = x[base + k * stride];
            line_wts[k] = 1.0;
        }
        pava_inplace(line_vals, line_wts, line_lens);
        for k in 0..len {
            let idx = base + k * stride;
            if let Some(c) = corr.as_deref_mut() {
                c[idx] = x[idx] - line_vals[k];
            }
            x[idx] = line_vals[k];
        }
        if !shape.step_in_box(&mut multi, &lo, &hi) {
            break;
        }
    }
}

/// Result of a DAG solve: fitted values at observed vertices, `None` at
/// unobserved ones (any monotone extension is equally optimal there).
#[derive(Clone, Debug)]
pub struct DagFit {
    pub values: Vec<Option<f64>>,
    pub converged: bool,
    pub sweeps: usize,
    pub last_change: f64,
}

/// Weighted LSE on a DAG.
///
/// Repeated observations reduce exactly to a weighted problem (weight =
/// multiplicity, target = vertex mean). Unobserved vertices only transmit
/// order, so the solve runs on the observed vertices under the induced
/// partial order, with Dykstra over the covering pairs; each pair constraint
/// is an exact two-point weighted PAVA.
pub fn lse_dag(dag: &Dag, opts: &SolveOptions) -> Result<DagFit> {
    let design = dag.design_vertices();
    if design.is_empty() {
        return Err(IsoError::domain("graph has no observations"));
    }
    let reach = dag.reachability();
    let m = design.len();
    let targets: Vec<f64> = design
        .iter()
        .map(|&v| {
            let row = &dag.observations()[v];
            row.iter().sum::<f64>() / row.len() as f64
        })
        .collect();
    let weights: Vec<f64> = design
        .iter()
        .map(|&v| dag.observations()[v].len() as f64)
        .collect();
    // Covering pairs of the induced order on design vertices.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if i == j || !reach.leq(design[i], design[j]) {
                continue;
            }
            let covered = (0..m).any(|k| {
                k != i
                    && k != j
                    && reach.leq(design[i], design[k])
                    && reach.leq(design[k], design[j])
            });
            if !covered {
                pairs.push((i, j));
            }
        }
    }
    let mut x = targets.clone();
    let mut corrections = vec![(0.0f64, 0.0f64); pairs.len()];
    let mut prev = vec![0.0f64; m];
    let mut converged = false;
    let mut sweeps = 0;
    let mut last_change = f64::INFINITY;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        prev.copy_from_slice(&x);
        for (p, &(a, b)) in pairs.iter().enumerate() {
            let (ca, cb) = corrections[p];
            let za = x[a] + ca;
            let zb = x[b] + cb;
            let (na, nb) = if za <= zb {
                (za, zb)
            } else {
                let mean = (weights[a] * za + weights[b] * zb) / (weights[a] + weights[b]);
                (mean, mean)
            };
            corrections[p] = (za - na, zb - nb);
            x[a] = na;
            x[b] = nb;
        }
        let mut change = 0.0f64;
        for i in 0..m {
            change = change.max((x[i] - prev[i]).abs());
        }
        last_change = change;
        if change <= opts.tol {
            converged = true;
            break;
        }
    }
    let mut values = vec![None; dag.n_vertices()];
    for (i, &v) in design.iter().enumerate() {
        values[v] = Some(x[i]);
    }
    Ok(DagFit {
        values,
        converged,
        sweeps,
        last_change,
    })
}

/// Optimality certificate for a cone projection.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct Certificate {
    /// No monotonicity constraint violated beyond `violation_tol`.
    pub monotone: bool,
    pub max_violation: f64,
    /// |sum(y - fit)|; the cone contains both signs of the constant vector.
    pub mean_gap: f64,
    /// |<y - fit, fit>|; orthogonality at the projection.
    pub orth_gap: f64,
    /// max over monotone probes g of <y - fit, g - fit>; nonpositive at the
    /// exact projection up to numerical slack.
    pub variational_gap: f64,
}

/// Certificate for a lattice fit, probing with `probes` random monotone
/// fields (plus constants) drawn from `seed`.
pub fn certificate_lattice(
    y: &Field,
    fit: &Field,
    probes: usize,
    seed: u64,
    violation_tol: f64,
) -> Certificate {
    let resid: Vec<f64> = y
        .values()
        .iter()
        .zip(fit.values())
        .map(|(a, b)| a - b)
        .collect();
    let max_violation = fit.max_monotonicity_violation();
    let mean_gap = resid.iter().sum::<f64>().abs();
    let orth_gap = resid
        .iter()
        .zip(fit.values())
        .map(|(r, f)| r * f)
        .sum::<f64>()
        .abs();
    let y_norm = y.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut rng = Rng::stream(seed, 0x9B0B);
    let mut variational: f64 = 0.0;
    for p in 0..probes {
        let g = random_monotone_probe(y.shape(), p, &mut rng, y_norm.max(1.0));
        let ip: f64 = resid
            .iter()
            .zip(g.iter().zip(fit.values()))
            .map(|(r, (gv, fv))| r * (gv - fv))
            .sum();
        variational = variational.max(ip);
    }
    // Constant probes: fit +- 1 (both in the cone).
    for shift in [1.0, -1.0] {
        let ip: f64 = resid.iter().map(|r| r * shift).sum();
        variational = variational.max(ip);
    }
    Certificate {
        monotone: max_violation <= violation_tol,
        max_violation,
        mean_gap,
        orth_gap,
        variational_gap: variational,
    }
}

/// Certificate for a DAG fit: residuals are taken in the weighted norm of
/// the reduced problem (vertex weight = observation count, target = vertex
/// mean), probes are random monotone vertex functions built along the
/// topological order.
pub fn certificate_dag(
    dag: &Dag,
    fit: &[Option<f64>],
    probes: usize,
    seed: u64,
    violation_tol: f64,
) -> Result<Certificate> {
    if fit.len() != dag.n_vertices() {
        return Err(IsoError::domain("fit length does not match the graph"));
    }
    let design = dag.design_vertices();
    if design.iter().any(|&v| fit[v].is_none()) {
        return Err(IsoError::domain("fit is missing a design-vertex value"));
    }
    let reach = dag.reachability();
    let mut max_violation = 0.0f64;
    for &a in &design {
        for &b in &design {
            if a != b && reach.leq(a, b) {
                max_violation = max_violation.max(fit[a].unwrap() - fit[b].unwrap());
            }
        }
    }
    let weights: Vec<f64> = design
        .iter()
        .map(|&v| dag.observations()[v].len() as f64)
        .collect();
    let targets: Vec<f64> = design
        .iter()
        .map(|&v| {
            let row = &dag.observations()[v];
            row.iter().sum::<f64>() / row.len() as f64
        })
        .collect();
    let values: Vec<f64> = design.iter().map(|&v| fit[v].unwrap()).collect();
    let resid: Vec<f64> = targets.iter().zip(&values).map(|(t, f)| t - f).collect();
    let mean_gap: f64 = resid
        .iter()
        .zip(&weights)
        .map(|(r, w)| r * w)
        .sum::<f64>()
        .abs();
    let orth_gap: f64 = resid
        .iter()
        .zip(values.iter().zip(&weights))
        .map(|(r, (f, w))| r * f * w)
        .sum::<f64>()
        .abs();
    let scale = targets
        .iter()
        .zip(&weights)
        .map(|(t, w)| t * t * w)
        .sum::<f64>()
        .sqrt()
        .max(1.0);
    // Random monotone probes: accumulate nonnegative increments along the
    // topological order, so every induced predecessor is already assigned.
    let mut design_index = vec![usize::MAX; dag.n_vertices()];
    for (i, &v) in design.iter().enumerate() {
        design_index[v] = i;
    }
    let topo_design: Vec<usize> = dag
        .topo_order()
        .iter()
        .copied()
        .filter(|&v| design_index[v] != usize::MAX)
        .collect();
    let mut rng = Rng::stream(seed, 0x9B0C);
    let mut variational: f64 = 0.0;
    let m = design.len();
    for _ in 0..probes {
        let mut g = vec![0.0f64; m];
        for &v in &topo_design {
            let i = design_index[v];
            let mut base = 0.0f64;
            for j in 0..m {
                if j != i && reach.leq(design[j], design[i]) {
                    base = base.max(g[j]);
                }
            }
            g[i] = base + rng.normal().abs();
        }
        let gmean = g.iter().sum::<f64>() / m as f64;
        let gnorm = g
            .iter()
            .map(|v| (v - gmean) * (v - gmean))
            .sum::<f64>()
            .sqrt()
            .max(1e-12);
        let factor = scale / gnorm;
        let ip: f64 = resid
            .iter()
            .zip(g.iter().zip(&values))
            .zip(&weights)
            .map(|((r, (gv, fv)), w)| w * r * ((gv - gmean) * factor - fv))
            .sum();
        variational = variational.max(ip);
    }
    for shift in [1.0, -1.0] {
        let ip: f64 = resid.iter().zip(&weights).map(|(r, w)| w * r * shift).sum();
        variational = variational.max(ip);
    }
    Ok(Certificate {
        monotone: max_violation <= violation_tol,
        max_violation,
        mean_gap,
        orth_gap,
        variational_gap: variational,
    })
}

/// Random monotone field: alternates between separable sums of per-axis
/// increasing staircases and indicators of random upper blocks, scaled to
/// the norm of the data.
fn random_monotone_probe(shape: &LatticeShape, idx: usize, rng: &mut Rng, scale: f64) -> Vec<f64> {
    let n = shape.len();
    let d = shape.ndim();
    let mut g = vec![0.0f64; n];
    if idx % 2 == 0 {
        let stairs: Vec<Vec<f64>> = shape
            .dims()
            .iter()
            .map(|&nj| {
                let mut acc = 0.0;
                (0..nj)
                    .map(|_| {
                        acc += rng.normal().abs();
                        acc
                    })
                    .collect()
            })
            .collect();
        for flat in 0..n {
            let multi = shape.multi(flat);
            g[flat] = (0..d).map(|j| stairs[j][multi[j]]).sum();
        }
    } else {
        let corner: Vec<usize> = shape
            .dims()
            .iter()
            .map(|&nj| rng.uniform_int(0, nj as i64 - 1) as usize)
            .collect();
        for flat in 0..n {
            let multi = shape.multi(flat);
            g[flat] = if multi.iter().zip(&corner).all(|(&c, &k)| c >= k) {
                1.0
            } else {
                0.0
            };
        }
    }
    // Center and scale; positive scaling and constants keep monotonicity.
    let mean = g.iter().sum::<f64>() / n as f64;
    let norm = g
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        .sqrt()
        .max(1e-12);
    let factor = scale / norm;
    for v in g.iter_mut() {
        *v = (*v - mean) * factor;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::lse_minimax_bruteforce;
    use crate::lattice::LatticeShape;

    #[test]
    fn pava_monotone_input_unchanged() {
        let y = [1.0, 2.0, 2.0, 5.0];
        let w = [1.0; 4];
        assert_eq!(pava_1d(&y, &w).unwrap(), y.to_vec());
    }

    #[test]
    fn pava_decreasing_pair() {
        assert_eq!(pava_1d(&[2.0, 1.0], &[1.0, 1.0]).unwrap(), vec![1.5, 1.5]);
    }

    #[test]
    fn pava_empty_and_errors() {
        assert_eq!(pava_1d(&[], &[]).unwrap(), Vec::<f64>::new());
        assert!(pava_1d(&[1.0], &[]).is_err());
        assert!(pava_1d(&[1.0], &[0.0]).is_err());
    }

    /// Partition-enumeration oracle: minimize weighted SSE over consecutive
    /// level-set partitions whose block means are non-decreasing.
    fn pava_oracle(y: &[f64], w: &[f64]) -> f64 {
        let n = y.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << (n - 1)) {
            let mut cuts = vec![0usize];
            for b in 0..n - 1 {
                if mask & (1 << b) != 0 {
                    cuts.push(b + 1);
                }
            }
            cuts.push(n);
            let mut means = Vec::new();
            let mut feasible = true;
            for win in cuts.windows(2) {
                let (a, b) = (win[0], win[1]);
                let ws: f64 = w[a..b].iter().sum();
                let m: f64 = y[a..b].iter().zip(&w[a..b]).map(|(v, wi)| v * wi).sum::<f64>() / ws;
                if let Some(&last) = means.last() {
                    if m < last - 1e-12 {
                        feasible = false;
                        break;
                    }
                }
                means.push(m);
            }
            if !feasible {
                continue;
            }
            let mut sse = 0.0;
            for (k, win) in cuts.windows(2).enumerate() {
                for i in win[0]..win[1] {
                    sse += w[i] * (y[i] - means[k]) * (y[i] - means[k]);
                }
            }
            best = best.min(sse);
        }
        best
    }

    #[test]
    fn pava_attains_partition_oracle_minimum() {
        let mut rng = Rng::seeded(2024);
        for _ in 0..20 {
            let n = 8;
            let y: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let w: Vec<f64> = (0..n).map(|_| 0.5 + rng.uniform()).collect();
            let fit = pava_1d(&y, &w).unwrap();
            // Feasible...
            for k in 1..n {
                assert!(fit[k] + 1e-12 >= fit[k - 1]);
            }
            let sse: f64 = y
                .iter()
                .zip(&fit)
                .zip(&w)
                .map(|((yi, fi), wi)| wi * (yi - fi) * (yi - fi))
                .sum();
            let best = pava_oracle(&y, &w);
            assert!(
                (sse - best).abs() <= 1e-9 * best.max(1.0),
                "sse {sse} vs oracle {best}"
            );
        }
    }

    #[test]
    fn lse_lattice_monotone_input_is_fixed() {
        let s = LatticeShape::new(vec![4, 3]).unwrap();
        let y = Field::from_fn(s.clone(), |m| (m[0] * 2 + m[1]) as f64).unwrap();
        let r = lse_lattice(&y, &SolveOptions::for_shape(&s));
        assert!(r.converged);
        for (a, b) in r.fit.values().iter().zip(y.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn lse_lattice_1d_equals_pava() {
        let s = LatticeShape::new(vec![9]).unwrap();
        let mut rng = Rng::seeded(3);
        let y = Field::from_fn(s.clone(), |_| rng.normal()).unwrap();
        let r = lse_lattice(&y, &SolveOptions::for_shape(&s));
        let direct = pava_1d(y.values(), &vec![1.0; 9]).unwrap();
        for (a, b) in r.fit.values().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn lse_lattice_matches_minimax_bruteforce_on_3x3() {
        let s = LatticeShape::new(vec![3, 3]).unwrap();
        for seed in 0..5u64 {
            let mut rng = Rng::seeded(seed + 100);
            let y = Field::from_fn(s.clone(), |_| rng.normal()).unwrap();
            let r = lse_lattice(&y, &SolveOptions::for_shape(&s).with_tol(1e-12));
            // Lattice as DAG.
            let mut edges = Vec::new();
            for flat in 0..s.len() {
                let m = s.multi(flat);
                for j in 0..2 {
                    if m[j] + 1 < s.dims()[j] {
                        edges.push((flat, flat + s.strides()[j]));
                    }
                }
            }
            let dag = Dag::new(
                s.len(),
                edges,
                y.values().iter().map(|&v| vec![v]).collect(),
            )
            .unwrap();
            let brute = lse_minimax_bruteforce(&dag).unwrap();
            for flat in 0..s.len() {
                assert!(
                    (r.fit.values()[flat] - brute[flat].unwrap()).abs() < 1e-6,
                    "site {flat}: dykstra {} vs minimax {}",
                    r.fit.values()[flat],
                    brute[flat].unwrap()
                );
            }
        }
    }

    #[test]
    fn lse_dag_edgeless_gives_vertex_means() {
        let dag = Dag::new(
            3,
            vec![],
            vec![vec![1.0, 3.0], vec![5.0], vec![-1.0, -2.0, -3.0]],
        )
        .unwrap();
        let r = lse_dag(&dag, &SolveOptions::default()).unwrap();
        assert!((r.values[0].unwrap() - 2.0).abs() < 1e-12);
        assert!((r.values[1].unwrap() - 5.0).abs() < 1e-12);
        assert!((r.values[2].unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn lse_dag_chain_equals_pava() {
        let ys = [3.0, 1.0, 2.0, 0.5, 4.0];
        let edges: Vec<(usize, usize)> = (0..4).map(|i| (i, i + 1)).collect();
        let dag = Dag::new(5, edges, ys.iter().map(|&y| vec![y]).collect()).unwrap();
        let r = lse_dag(&dag, &SolveOptions::default()).unwrap();
        let direct = pava_1d(&ys, &[1.0; 5]).unwrap();
        for (v, want) in r.values.iter().zip(&direct) {
            assert!((v.unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn lse_dag_matches_minimax_on_random_dags() {
        let mut rng = Rng::seeded(404);
        for _ in 0..20 {
            let n = 7;
            let edges = crate::graph::tests::random_dag(n, 0.3, &mut rng);
            let obs: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let k = rng.uniform_int(1, 2);
                    (0..k).map(|_| rng.normal()).collect()
                })
                .collect();
            let dag = Dag::new(n, edges, obs).unwrap();
            let fit = lse_dag(&dag, &SolveOptions::default().with_tol(1e-12)).unwrap();
            let brute = lse_minimax_bruteforce(&dag).unwrap();
            for v in 0..n {
                assert!(
                    (fit.values[v].unwrap() - brute[v].unwrap()).abs() < 1e-6,
                    "vertex {v}"
                );
            }
        }
    }

    #[test]
    fn lse_dag_with_unobserved_bridge_vertices() {
        // 0 -> 1 -> 2 with the middle vertex unobserved: the order constraint
        // f(0) <= f(2) must still bind through the bridge.
        let dag = Dag::new(3, vec![(0, 1), (1, 2)], vec![vec![2.0], vec![], vec![1.0]]).unwrap();
        let r = lse_dag(&dag, &SolveOptions::default()).unwrap();
        assert!((r.values[0].unwrap() - 1.5).abs() < 1e-9);
        assert!(r.values[1].is_none());
        assert!((r.values[2].unwrap() - 1.5).abs() < 1e-9);
    }

    #[test]
    fn certificate_trivial_cases() {
        let s = LatticeShape::new(vec![3]).unwrap();
        let y = Field::new(s.clone(), vec![1.0, 2.0, 3.0]).unwrap();
        let c = certificate_lattice(&y, &y, 10, 1, 1e-10);
        assert!(c.monotone);
        assert_eq!(c.mean_gap, 0.0);
        assert_eq!(c.orth_gap, 0.0);
        assert!(c.variational_gap <= 1e-12);

        let s2 = LatticeShape::new(vec![2]).unwrap();
        let y2 = Field::new(s2.clone(), vec![2.0, 1.0]).unwrap();
        let fit2 = Field::new(s2, vec![1.5, 1.5]).unwrap();
        let c2 = certificate_lattice(&y2, &fit2, 10, 1, 1e-10);
        assert!(c2.monotone);
        assert!(c2.mean_gap < 1e-12);
        assert!(c2.orth_gap < 1e-12);
    }

    #[test]
    fn certificate_random_instance() {
        let s = LatticeShape::new(vec![4, 4]).unwrap();
        let mut rng = Rng::seeded(777);
        let y = Field::from_fn(s.clone(), |_| rng.normal()).unwrap();
        let r = lse_lattice(&y, &SolveOptions::for_shape(&s));
        assert!(r.converged);
        let c = certificate_lattice(&y, &r.fit, 50, 9, 1e-8);
        assert!(c.monotone);
        assert!(c.mean_gap <= 1e-6);
        assert!(c.orth_gap <= 1e-6);
        assert!(c.variational_gap <= 1e-6, "gap {}", c.variational_gap);
    }

    #[test]
    fn certificate_dag_on_random_instances() {
        let mut rng = Rng::seeded(808);
        for case in 0..20 {
            let n = 7;
            let edges = crate::graph::tests::random_dag(n, 0.3, &mut rng);
            let obs: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let k = rng.uniform_int(0, 2);
                    (0..k).map(|_| rng.normal()).collect()
                })
                .collect();
            if obs.iter().all(|r| r.is_empty()) {
                continue;
            }
            let dag = Dag::new(n, edges, obs).unwrap();
            let fit = lse_dag(&dag, &SolveOptions::default().with_tol(1e-12)).unwrap();
            assert!(fit.converged);
            let cert = certificate_dag(&dag, &fit.values, 50, 9 + case, 1e-8).unwrap();
            assert!(cert.monotone, "case {case}");
            assert!(cert.mean_gap <= 1e-7, "case {case}: mean {}", cert.mean_gap);
            assert!(cert.orth_gap <= 1e-7, "case {case}: orth {}", cert.orth_gap);
            assert!(
                cert.variational_gap <= 1e-6,
                "case {case}: variational {}",
                cert.variational_gap
            );
        }
        // Length mismatch is rejected.
        let dag = Dag::new(2, vec![(0, 1)], vec![vec![1.0], vec![2.0]]).unwrap();
        assert!(certificate_dag(&dag, &[Some(1.0)], 5, 0, 1e-8).is_err());
    }

    #[test]
    fn lse_idempotent_and_contractive() {
        let s = LatticeShape::new(vec![5, 3]).unwrap();
        let opts = SolveOptions::for_shape(&s);
        let mut rng = Rng::seeded(55);
        let y1 = Field::from_fn(s.clone(), |_| rng.normal()).unwrap();
        let y2 = Field::from_fn(s.clone(), |_| rng.normal()).unwrap();
        let f1 = lse_lattice(&y1, &opts).fit;
        let f2 = lse_lattice(&y2, &opts).fit;
        // Idempotence.
        let f11 = lse_lattice(&f1, &opts).fit;
        for (a, b) in f11.values().iter().zip(f1.values()) {
            assert!((a - b).abs() <= 2.0 * opts.tol.max(1e-9));
        }
        // Contraction.
        let dy: f64 = y1
            .values()
            .iter()
            .zip(y2.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let df: f64 = f1
            .values()
            .iter()
            .zip(f2.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(df <= dy + 1e-8);
        // Mean preservation.
        let my: f64 = y1.values().iter().sum();
        let mf: f64 = f1.values().iter().sum();
        assert!((my - mf).abs() <= 1e-8 * (1.0 + my.abs()));
    }
}
