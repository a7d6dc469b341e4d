//! Perron pairs and spectra of reversible kernels.
//!
//! A kernel `K` reversible with respect to `m` is similar to the symmetric
//! matrix `A = D^{1/2} K D^{-1/2}`, `D = diag(m)`. Small problems use a dense
//! symmetric eigensolver; larger ones use restarted Lanczos with full
//! reorthogonalization on the sparse operator.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Problems with at most this many states are solved densely.
    pub dense_threshold: usize,
    /// Target relative residual for the iterative path.
    pub tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dense_threshold: crate::defaults::DENSE_THRESHOLD,
            tol: crate::defaults::EIGEN_TOL,
            krylov_dim: 160,
            max_restarts: 400,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Dense,
    Lanczos,
}

/// Perron data of a reversible sub-Markov kernel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralPair {
    pub beta0: f64,
    /// Right eigenfunction, positive, normalized by `sum m phi0^2 = 1`.
    pub phi0: Vec<f64>,
    /// Left eigenfunction `phi0 * m`, so that `sum phi0_star phi0 = 1`.
    pub phi0_star: Vec<f64>,
    /// Second largest eigenvalue; absent for a single state.
    pub beta1: Option<f64>,
    pub beta_min: f64,
    /// `phi0^2 m`, a probability vector.
    pub pi_phi0: Vec<f64>,
    /// The normalized reversing measure `m` the pair refers to.
    pub measure: Vec<f64>,
    /// `||K phi0 - beta0 phi0||_inf / ||phi0||_inf`.
    pub residual: f64,
    pub method: SolveMethod,
    pub period: usize,
}

impl SpectralPair {
    /// `max(beta1, |beta_min|) / beta0`, the ratio governing convergence of
    /// the Doob chain.
    pub fn second_ratio(&self) -> f64 {
        let b1 = self.beta1.unwrap_or(0.0);
        b1.max(self.beta_min.abs()) / self.beta0
    }

    /// Residual of `phi0_star K = beta0 phi0_star`, relative to the sup norm.
    pub fn left_residual(&self, k: &KernelMatrix) -> f64 {
        let left = k.apply_left(&self.phi0_star);
        let scale = self.phi0_star.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        left.iter()
            .zip(&self.phi0_star)
            .map(|(l, p)| (l - self.beta0 * p).abs())
            .fold(0.0, f64::max)
            / scale
    }
}

fn normalized(m: &[f64]) -> Vec<f64> {
    let s: f64 = m.iter().sum();
    m.iter().map(|x| x / s).collect()
}

fn symmetric_dense(k: &KernelMatrix, sq: &[f64]) -> DMatrix<f64> {
    let n = k.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let (c, v) = k.row(i);
        for (&j, &x) in c.iter().zip(v) {
            let val = sq[i] * x / sq[j];
            a[(i, j)] += 0.5 * val;
            a[(j, i)] += 0.5 * val;
        }
    }
    a
}

fn check_reversible(k: &KernelMatrix) -> Result<()> {
    let defect = k.reversibility_defect();
    if defect > 1e-10 {
        return Err(Error::Solver(format!(
            "kernel is not reversible with respect to its measure (defect {defect:.3e})"
        )));
    }
    Ok(())
}

/// Solve for the Perron pair of an irreducible reversible kernel.
pub fn perron_pair(k: &KernelMatrix, opts: &SolverOptions) -> Result<SpectralPair> {
    let n = k.len();
    if n == 0 || !k.is_irreducible() {
        return Err(Error::Solver("kernel is reducible".into()));
    }
    check_reversible(k)?;
    let m = normalized(k.measure());
    let sq: Vec<f64> = m.iter().map(|x| x.sqrt()).collect();
    let (beta0, v0, beta1, beta_min, method) = if n <= opts.dense_threshold {
        let eig = SymmetricEigen::new(symmetric_dense(k, &sq));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = order[0];
        let v: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
        let b1 = (n > 1).then(|| eig.eigenvalues[order[1]]);
        (eig.eigenvalues[top], v, b1, eig.eigenvalues[order[n - 1]], SolveMethod::Dense)
    } else {
        let op = |x: &[f64]| sym_apply(k, &sq, x);
        let (b0, v) = lanczos_largest(&op, n, sq.clone(), &[], opts)?;
        let (b1, _) = lanczos_largest(&op, n, random_start(n, 1), std::slice::from_ref(&v), opts)?;
        let neg = |x: &[f64]| sym_apply(k, &sq, x).into_iter().map(|y| -y).collect::<Vec<_>>();
        let (bm, _) = lanczos_largest(&neg, n, random_start(n, 2), &[], opts)?;
        (b0, v, Some(b1), -bm, SolveMethod::Lanczos)
    };
    let norm = v0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sign = if v0.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let phi0: Vec<f64> = v0.iter().zip(&sq).map(|(v, s)| sign * v / norm / s).collect();
    if let Some(i) = phi0.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::Solver(format!(
            "Perron eigenfunction is not positive at state {i} (value {:e})",
            phi0[i]
        )));
    }
    let kphi = k.apply(&phi0);
    let sup = phi0.iter().fold(0.0f64, |a, &b| a.max(b));
    let residual = kphi
        .iter()
        .zip(&phi0)
        .map(|(a, b)| (a - beta0 * b).abs())
        .fold(0.0, f64::max)
        / sup;
    if method == SolveMethod::Lanczos && residual > 100.0 * opts.tol {
        return Err(Error::Solver(format!("eigen residual {residual:.3e} above tolerance")));
    }
    let phi0_star: Vec<f64> = phi0.iter().zip(&m).map(|(p, w)| p * w).collect();
    let pi_phi0: Vec<f64> = phi0.iter().zip(&phi0_star).map(|(p, s)| p * s).collect();
    Ok(SpectralPair {
        beta0,
        phi0,
        phi0_star,
        beta1,
        beta_min,
        pi_phi0,
        measure: m,
        residual,
        method,
        period: k.period(),
    })
}

/// Ordered spectrum and the gaps that matter for killed chains.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumSummary {
    /// Eigenvalues in decreasing order. Complete on the dense path; on the
    /// iterative path only `[beta0, beta1, beta_min]`.
    pub eigenvalues: Vec<f64>,
    pub complete: bool,
    pub one_minus_beta0: f64,
    pub beta0_minus_beta1: f64,
    pub one_plus_beta_min: f64,
    /// The three gaps multiplied by `R^theta`, when a scale is supplied.
    pub scaled: Option<[f64; 3]>,
}

pub fn spectrum_summary(
    k: &KernelMatrix,
    opts: &SolverOptions,
    scale: Option<(f64, f64)>,
) -> Result<SpectrumSummary> {
    check_reversible(k)?;
    let n = k.len();
    let m = normalized(k.measure());
    let sq: Vec<f64> = m.iter().map(|x| x.sqrt()).collect();
    let (eigenvalues, complete) = if n <= opts.dense_threshold {
        let eig = SymmetricEigen::new(symmetric_dense(k, &sq));
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        (ev, true)
    } else {
        let sp = perron_pair(k, opts)?;
        (vec![sp.beta0, sp.beta1.unwrap_or(sp.beta0), sp.beta_min], false)
    };
    let b0 = eigenvalues[0];
    let b1 = *eigenvalues.get(1).unwrap_or(&b0);
    let bmin = *eigenvalues.last().unwrap();
    let gaps = [1.0 - b0, b0 - b1, 1.0 + bmin];
    Ok(SpectrumSummary {
        scaled: scale.map(|(r, theta)| {
            let f = r.powf(theta);
            [gaps[0] * f, gaps[1] * f, gaps[2] * f]
        }),
        eigenvalues,
        complete,
        one_minus_beta0: gaps[0],
        beta0_minus_beta1: gaps[1],
        one_plus_beta_min: gaps[2],
    })
}

/// Full eigen-decomposition of the symmetrized kernel: eigenvalues in
/// decreasing order and right eigenfunctions `psi_j` normalized in `L^2(m)`.
pub fn eigen_decomposition(k: &KernelMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    check_reversible(k)?;
    let n = k.len();
    let m = normalized(k.measure());
    let sq: Vec<f64> = m.iter().map(|x| x.sqrt()).collect();
    let eig = SymmetricEigen::new(symmetric_dense(k, &sq));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = order
        .iter()
        .map(|&j| (0..n).map(|i| eig.eigenvectors[(i, j)] / sq[i]).collect())
        .collect();
    Ok((values, vectors))
}

fn sym_apply(k: &KernelMatrix, sq: &[f64], x: &[f64]) -> Vec<f64> {
    let y: Vec<f64> = x.iter().zip(sq).map(|(a, s)| a / s).collect();
    k.apply(&y).into_iter().zip(sq).map(|(a, s)| a * s).collect()
}

pub(crate) fn random_start(n: usize, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    rng.set_stream(stream);
    (0..n).map(|_| rng.gen::<f64>() - 0.5).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            axpy(v, -c, b);
        }
    }
}

/// Largest eigenpair of a symmetric operator on the orthogonal complement of
/// `deflate` (whose vectors must be orthonormal).
pub fn lanczos_largest<F>(
    op: &F,
    n: usize,
    start: Vec<f64>,
    deflate: &[Vec<f64>],
    opts: &SolverOptions,
) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = start;
    let dim = opts.krylov_dim.min(n - deflate.len()).max(1);
    let mut best = (f64::NAN, f64::INFINITY);
    for _ in 0..opts.max_restarts {
        orthogonalize(&mut x, deflate);
        let nx = dot(&x, &x).sqrt();
        if nx == 0.0 {
            return Err(Error::Solver("Lanczos start vector vanished after deflation".into()));
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let mut basis: Vec<Vec<f64>> = vec![x.clone()];
        let mut images: Vec<Vec<f64>> = Vec::with_capacity(dim);
        for j in 0..dim {
            let aq = op(&basis[j]);
            let mut w = aq.clone();
            images.push(aq);
            orthogonalize(&mut w, deflate);
            orthogonalize(&mut w, &basis);
            let b = dot(&w, &w).sqrt();
            if j + 1 == dim || b < 1e-9 {
                break;
            }
            w.iter_mut().for_each(|v| *v /= b);
            orthogonalize(&mut w, deflate);
            orthogonalize(&mut w, &basis);
            let b2 = dot(&w, &w).sqrt();
            w.iter_mut().for_each(|v| *v /= b2);
            basis.push(w);
        }
        let k = images.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let h = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                t[(i, j)] = h;
                t[(j, i)] = h;
            }
        }
        let eig = SymmetricEigen::new(t);
        let top = (0..k).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
        let theta = eig.eigenvalues[top];
        let mut ritz = vec![0.0; n];
        for (i, q) in basis.iter().enumerate() {
            axpy(&mut ritz, eig.eigenvectors[(i, top)], q);
        }
        let nr = dot(&ritz, &ritz).sqrt();
        ritz.iter_mut().for_each(|v| *v /= nr);
        let ar = op(&ritz);
        let res = ar
            .iter()
            .zip(&ritz)
            .map(|(a, r)| (a - theta * r).powi(2))
            .sum::<f64>()
            .sqrt();
        if res < best.1 {
            best = (theta, res);
        }
        if res <= opts.tol * theta.abs().max(1.0) || k < dim {
            return Ok((theta, ritz));
        }
        x = ritz;
    }
    Err(Error::Solver(format!(
        "Lanczos did not converge: best residual {:.3e} at eigenvalue {}",
        best.1, best.0
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Domain, WeightedGraph};
    use crate::kernels::dirichlet_kernel;
    use std::sync::Arc;

    fn five_path_kernel() -> KernelMatrix {
        let edges: Vec<_> = (0..4).map(|i| (i, i + 1, 0.5)).collect();
        let g = Arc::new(WeightedGraph::new(vec![1.0; 5], &edges).unwrap());
        dirichlet_kernel(&Domain::new(g, &[1, 2, 3], None).unwrap()).unwrap()
    }

    #[test]
    fn five_path_pair() {
        let k = five_path_kernel();
        let sp = perron_pair(&k, &SolverOptions::default()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((sp.beta0 - r).abs() < 1e-14);
        // pi_U = 1/3, so sum phi^2 / 3 = 1 forces the scale sqrt(3) on (1/2, r, 1/2).
        let scale = 3f64.sqrt();
        for (a, b) in sp.phi0.iter().zip([0.5, r, 0.5]) {
            assert!((a - scale * b).abs() < 1e-13);
        }
        assert_eq!(sp.period, 2);
        assert!((sp.beta_min + r).abs() < 1e-14);
        assert!(sp.beta1.unwrap().abs() < 1e-14);
        let total: f64 = sp.pi_phi0.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(sp.left_residual(&k) < 1e-13);
    }

    #[test]
    fn five_path_spectrum() {
        let s = spectrum_summary(&five_path_kernel(), &SolverOptions::default(), None).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expect = [r, 0.0, -r];
        for (a, b) in s.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_spectrum() {
        let rows = (0..4).map(|i| vec![(i, 1.0)]).collect();
        let k = KernelMatrix::from_rows(crate::kernels::KernelKind::Global, (0..4).collect(), rows, vec![1.0; 4]).unwrap();
        let s = spectrum_summary(&k, &SolverOptions::default(), None).unwrap();
        assert!(s.eigenvalues.iter().all(|&e| e == 1.0));
    }

    #[test]
    fn lanczos_matches_dense() {
        let g = Arc::new(WeightedGraph::box_grid(&[14, 14], 0.125, 1.0).unwrap());
        let members: Vec<_> = (0..g.len())
            .filter(|&v| {
                let c = g.coord(v).unwrap();
                c.iter().all(|&x| x > 0 && x < 14) && !(c[0] == 7 && c[1] < 9)
            })
            .collect();
        let dom = Domain::new(g, &members, None).unwrap();
        let k = dirichlet_kernel(&dom).unwrap();
        let dense = perron_pair(&k, &SolverOptions::default()).unwrap();
        let opts = SolverOptions { dense_threshold: 10, ..Default::default() };
        let iter = perron_pair(&k, &opts).unwrap();
        assert_eq!(iter.method, SolveMethod::Lanczos);
        assert!((dense.beta0 - iter.beta0).abs() < 1e-12);
        assert!((dense.beta1.unwrap() - iter.beta1.unwrap()).abs() < 1e-10);
        assert!((dense.beta_min - iter.beta_min).abs() < 1e-10);
        let err = dense.phi0.iter().zip(&iter.phi0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "phi0 mismatch {err}");
    }

    #[test]
    fn adjoint_gives_same_beta0() {
        let k = five_path_kernel().lazy(0.3).unwrap();
        let a = perron_pair(&k, &SolverOptions::default()).unwrap();
        let b = perron_pair(&k.adjoint(), &SolverOptions::default()).unwrap();
        assert!((a.beta0 - b.beta0).abs() < 1e-12);
    }
}
