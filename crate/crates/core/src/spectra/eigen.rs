use crate::ensembles::SymmetricMatrix;
use crate::error::{Error, Result};
use faer::Mat;

/// Full spectrum in ascending order.
pub fn eigenvalues(m: &SymmetricMatrix) -> Result<Vec<f64>> {
    eigenvalues_seeded(m, None)
}

/// As [`eigenvalues`], tagging a failure with the realization seed.
pub fn eigenvalues_seeded(m: &SymmetricMatrix, seed: Option<u64>) -> Result<Vec<f64>> {
    let n = m.order();
    if n == 0 {
        return Ok(Vec::new());
    }
    let data = m.as_slice();
    let a = Mat::<f64>::from_fn(n, n, |i, j| data[j * n + i]);
    let mut ev = a
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|_| Error::Eigen { seed })?;
    if ev.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen { seed });
    }
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{sample_cloud, CloudConfig};
    use crate::cloud::AtomCloud;
    use crate::ensembles::{build_rydberg, sample_decorrelated};
    use crate::rng::from_seed;
    use faer::Side;

    #[test]
    fn two_by_two() {
        let m = SymmetricMatrix::from_upper(2, |_, _| 0.7);
        let ev = eigenvalues(&m).unwrap();
        assert!((ev[0] + 0.7).abs() < 1e-15 && (ev[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn trace_and_frobenius() {
        let mut rng = from_seed(12);
        let m = sample_decorrelated(300, 0.3, &mut rng).unwrap();
        let ev = eigenvalues(&m).unwrap();
        let n = ev.len() as f64;
        let sum: f64 = ev.iter().sum();
        assert!(sum.abs() <= 1e-8 * n * m.max_abs());
        let sq: f64 = ev.iter().map(|x| x * x).sum();
        assert!((sq / m.frobenius_sq() - 1.0).abs() < 1e-10);
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn residuals_are_backward_stable() {
        let mut rng = from_seed(13);
        let cloud = sample_cloud(&CloudConfig::new(200, 0.3, 0), &mut rng).unwrap();
        let m = build_rydberg(&cloud);
        let n = m.order();
        let a = Mat::<f64>::from_fn(n, n, |i, j| m.get(i, j));
        let eig = a.self_adjoint_eigen(Side::Lower).unwrap();
        let norm = a.norm_l2();
        for k in [0, n / 2, n - 1] {
            let v = eig.U().col(k);
            let lam = eig.S()[k];
            let r = &a * v - v * lam;
            assert!(r.norm_l2() <= 1e-10 * norm);
        }
    }

    #[test]
    fn isolated_pair_gives_plus_minus_coupling() {
        // separation ten times below the typical spacing of one
        let mut rng = from_seed(14);
        let mut cloud: AtomCloud = sample_cloud(&CloudConfig::new(200, 0.5, 0), &mut rng).unwrap();
        let c = [0.0, 0.0, 0.0];
        cloud.positions.retain(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() > 0.6);
        let n = cloud.positions.len();
        cloud.positions.push(c);
        cloud.positions.push([0.04, 0.05, 0.06]);
        let m = build_rydberg(&cloud);
        let h = m.get(n, n + 1);
        let ev = eigenvalues(&m).unwrap();
        let closest = |x: f64| ev.iter().map(|e| (e - x).abs()).fold(f64::INFINITY, f64::min);
        assert!(closest(h) < 1e-3 * h.abs(), "{h} {}", closest(h));
        assert!(closest(-h) < 1e-3 * h.abs());
    }
}
