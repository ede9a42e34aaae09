use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::MetricsError;

const JITTER: f64 = 1e-8;
const NEGATIVE_SLACK: f64 = 1e-6;

/// Gaussian fit of a feature set.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDistribution {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub count: usize,
}

impl FeatureDistribution {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased (`N − 1`) covariance.
pub fn feature_distribution(features: &[Vec<f64>]) -> Result<FeatureDistribution, MetricsError> {
    let n = features.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples { need: 2, got: n });
    }
    let d = features[0].len();
    if let Some(i) = features.iter().position(|f| f.len() != d) {
        return Err(MetricsError::Shape(format!("feature {i} has {} values, expected {d}", features[i].len())));
    }
    let x = DMatrix::from_fn(n, d, |i, j| features[i][j]);
    let mean = DVector::from_fn(d, |j, _| x.column(j).sum() / n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let mut cov = centered.transpose() * &centered / (n - 1) as f64;
    // exact symmetry regardless of summation order
    cov = (&cov + cov.transpose()) * 0.5;
    Ok(FeatureDistribution { mean, cov, count: n })
}

fn eigen(m: &DMatrix<f64>) -> Option<SymmetricEigen<f64, nalgebra::Dyn>> {
    let sym = (m + m.transpose()) * 0.5;
    let e = sym.try_symmetric_eigen(1e-14, 10_000)?;
    e.eigenvalues.iter().all(|v| v.is_finite()).then_some(e)
}

fn psd_sqrt(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut e = eigen(m)?;
    e.eigenvalues.iter_mut().for_each(|v| *v = v.max(0.0).sqrt());
    Some(e.recompose())
}

fn trace_sqrt_product(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<f64> {
    let sp = psd_sqrt(p)?;
    let e = eigen(&(&sp * q * &sp))?;
    Some(e.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum())
}

/// `‖μ_p − μ_q‖² + Tr(Σ_p + Σ_q − 2(Σ_p Σ_q)^{1/2})`.
///
/// The trace of the product root is taken from the symmetric form
/// `√Σ_p Σ_q √Σ_p`, which has the same eigenvalues.
pub fn frechet_distance(p: &FeatureDistribution, q: &FeatureDistribution) -> Result<f64, MetricsError> {
    if p.dim() != q.dim() || p.cov.shape() != (p.dim(), p.dim()) || q.cov.shape() != (q.dim(), q.dim()) {
        return Err(MetricsError::Shape(format!("dimensions {} and {}", p.dim(), q.dim())));
    }
    let d = p.dim();
    let tr = match trace_sqrt_product(&p.cov, &q.cov) {
        Some(t) => t,
        None => {
            log::warn!("covariance square root failed, retrying with {JITTER} jitter");
            let j = DMatrix::identity(d, d) * JITTER;
            trace_sqrt_product(&(&p.cov + &j), &(&q.cov + &j))
                .ok_or_else(|| MetricsError::SquareRoot("eigendecomposition did not converge".into()))?
        }
    };
    let mean_term = (&p.mean - &q.mean).norm_squared();
    let fd = mean_term + p.cov.trace() + q.cov.trace() - 2.0 * tr;
    if fd < -NEGATIVE_SLACK {
        return Err(MetricsError::SquareRoot(format!("negative distance {fd}")));
    }
    Ok(fd.max(0.0))
}
