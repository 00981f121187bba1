//! Weighted-least-squares DC state estimation, residual-based bad data
//! detection, and construction/verification of undetectable injection
//! attacks a = Hc.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::jacobian::JacobianMatrix;
use crate::linalg::{Mat, Qr};
use crate::model::BusId;
use crate::scalar::{sc, Scalar};

/// Measurement values aligned with the canonical meter order.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector<T> {
    pub values: Vec<T>,
}

/// Bus voltage phase angles (radians) in canonical column order; the
/// reference angle is implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    pub values: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct EstimatorConfig<T> {
    /// Diagonal of W, one positive weight per meter.
    pub weights: Vec<T>,
    /// Noise level used by simulation and the chi-square threshold rule.
    pub noise_sigma: T,
    /// Report the W-weighted residual norm instead of the raw l2 norm.
    /// Off by default; the plain norm is the documented behavior.
    pub weighted_residual: bool,
}

impl<T: Scalar> EstimatorConfig<T> {
    /// Identity weights.
    pub fn uniform(m: usize, noise_sigma: T) -> Self {
        Self {
            weights: vec![T::one(); m],
            noise_sigma,
            weighted_residual: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BddConfig<T> {
    /// Positive residual threshold tau.
    pub tau: T,
}

impl<T: Scalar> BddConfig<T> {
    /// Chi-square rule: tau^2 = quantile(chi^2, dof = m - n, p) * sigma^2,
    /// floored at 1e-9 so tau stays positive when sigma = 0 or m = n.
    pub fn chi_square(m: usize, n: usize, p: f64, sigma: T) -> Self {
        let floor = sc::<T>(1e-9);
        let tau = if m > n {
            let q = ChiSquared::new((m - n) as f64)
                .expect("dof > 0")
                .inverse_cdf(p);
            sigma * sc::<T>(q.sqrt())
        } else {
            T::zero()
        };
        Self {
            tau: tau.max(floor),
        }
    }
}

/// WLS estimate with its residual norm; bad-data detection is a separate
/// check against a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<T> {
    pub theta_hat: StateVector<T>,
    pub residual_norm: T,
}

/// Injected measurement perturbation, structured (a = Hc) or raw.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackVector<T> {
    pub a: Vec<T>,
    /// Meter ids with |a_i| above the 1e-12 zero tolerance.
    pub support: Vec<String>,
    /// The state bias c when the vector was forged as a = Hc.
    pub bias: Option<StateVector<T>>,
}

const SUPPORT_TOL: f64 = 1e-12;

/// theta_hat = argmin (z - H theta)' W (z - H theta), solved by QR on the
/// row-scaled system sqrt(W) H. Rank-deficient H yields an unobservable
/// error carrying a nonzero certificate c with Hc = 0.
pub fn wls_estimate<T: Scalar>(
    h: &JacobianMatrix<T>,
    z: &MeasurementVector<T>,
    cfg: &EstimatorConfig<T>,
) -> Result<Estimate<T>> {
    let (m, n) = (h.rows(), h.cols());
    if z.values.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: z.values.len(),
        });
    }
    if cfg.weights.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: cfg.weights.len(),
        });
    }
    if cfg.weights.iter().any(|w| !(*w > T::zero())) {
        return Err(Error::InvalidCase("estimator weights must be positive".into()));
    }

    let mut scaled = Mat::zeros(m, n);
    let mut rhs = vec![T::zero(); m];
    for r in 0..m {
        let s = cfg.weights[r].sqrt();
        for c in 0..n {
            scaled.set(r, c, h.get(r, c) * s);
        }
        rhs[r] = z.values[r] * s;
    }
    let qr = Qr::factor(&scaled);
    if qr.rank() < n {
        let c = qr
            .null_vector()
            .ok_or_else(|| Error::Internal("rank-deficient factor without null vector".into()))?;
        let buses = certificate_buses(h.col_buses(), &c);
        return Err(Error::Unobservable {
            certificate: c.iter().map(|v| v.to_f64_lossy()).collect(),
            buses,
        });
    }
    let theta = qr.solve_least_squares(&rhs);
    let residual_norm = residual_norm(h, z, &theta, cfg);
    Ok(Estimate {
        theta_hat: StateVector { values: theta },
        residual_norm,
    })
}

fn residual_norm<T: Scalar>(
    h: &JacobianMatrix<T>,
    z: &MeasurementVector<T>,
    theta: &[T],
    cfg: &EstimatorConfig<T>,
) -> T {
    let pred = h.mul_state(theta);
    z.values
        .iter()
        .zip(&pred)
        .enumerate()
        .map(|(i, (&zi, &pi))| {
            let r = zi - pi;
            let w = if cfg.weighted_residual {
                cfg.weights[i]
            } else {
                T::one()
            };
            w * r * r
        })
        .sum::<T>()
        .sqrt()
}

pub fn certificate_buses<T: Scalar>(col_buses: &[BusId], c: &[T]) -> Vec<BusId> {
    let tol = sc::<T>(1e-7);
    col_buses
        .iter()
        .zip(c)
        .filter(|(_, v)| v.abs() > tol)
        .map(|(b, _)| *b)
        .collect()
}

/// Residual test: true when the residual norm exceeds tau.
pub fn bdd_check<T: Scalar>(estimate: &Estimate<T>, cfg: &BddConfig<T>) -> bool {
    estimate.residual_norm > cfg.tau
}

/// Builds the undetectable vector a = Hc for a chosen bias c.
pub fn forge_attack<T: Scalar>(h: &JacobianMatrix<T>, c: &StateVector<T>) -> Result<AttackVector<T>> {
    if c.values.len() != h.cols() {
        return Err(Error::Dimension {
            expected: h.cols(),
            got: c.values.len(),
        });
    }
    let a = h.mul_state(&c.values);
    let tol = sc::<T>(SUPPORT_TOL);
    let support = h
        .meter_ids()
        .iter()
        .zip(&a)
        .filter(|(_, v)| v.abs() > tol)
        .map(|(id, _)| id.clone())
        .collect();
    Ok(AttackVector {
        a,
        support,
        bias: Some(c.clone()),
    })
}

/// True when a lies in the column space of H within tol (projection
/// residual), i.e. the injected vector survives the residual test.
pub fn verify_undetectable<T: Scalar>(h: &JacobianMatrix<T>, a: &AttackVector<T>, tol: T) -> bool {
    if a.a.len() != h.rows() {
        return false;
    }
    let mat = Mat::from_rows(&h.to_dense());
    Qr::factor(&mat).projection_residual(&a.a) <= tol
}

/// z = H theta + N(0, sigma^2) noise, reproducible from the seed
/// (Box-Muller over a counter-based stream).
pub fn simulate_measurements<T: Scalar>(
    h: &JacobianMatrix<T>,
    theta: &StateVector<T>,
    sigma: T,
    seed: u64,
) -> MeasurementVector<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clean = h.mul_state(&theta.values);
    let values = clean
        .into_iter()
        .map(|z| z + sigma * sc::<T>(standard_normal(&mut rng)))
        .collect();
    MeasurementVector { values }
}

/// Uniform random state in [-0.5, 0.5] rad, reproducible from the seed.
pub fn random_state<T: Scalar>(n: usize, seed: u64) -> StateVector<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StateVector {
        values: (0..n).map(|_| sc::<T>(rng.gen_range(-0.5..0.5))).collect(),
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
