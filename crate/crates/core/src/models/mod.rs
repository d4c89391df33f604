//! Covariance models, Gaussian sampling and covariance products.

mod binary;
mod operator;
mod sampling;

pub use binary::{read_dataset, write_dataset, DATASET_MAGIC};
pub use operator::{batch_covariances, CenteredSparseData, CovOperator};
pub use sampling::{sample_covariance, sample_gaussian, CovarianceAccumulator, GaussianSampler};

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SpcaError};
use crate::linalg::{dot, norm, SymMatrix};

/// `n × d` samples, row-major, with the seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    rows: Vec<f64>,
    seed: u64,
}

impl Dataset {
    pub fn new(n: usize, d: usize, rows: Vec<f64>, seed: u64) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(SpcaError::param(format!("dataset shape {n}x{d} must be positive")));
        }
        if rows.len() != n * d {
            return Err(SpcaError::param(format!(
                "dataset of shape {n}x{d} needs {} values, got {}",
                n * d,
                rows.len()
            )));
        }
        if let Some(pos) = rows.iter().position(|x| !x.is_finite()) {
            return Err(SpcaError::param(format!(
                "non-finite value in row {} of the dataset",
                pos / d
            )));
        }
        Ok(Self { n, d, rows, seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    /// Rows `start..end` as a row-major slice.
    pub fn slice(&self, start: usize, end: usize) -> &[f64] {
        &self.rows[start * self.d..end * self.d]
    }
}

/// A population covariance with its planted sparse component(s).
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub sigma: SymMatrix,
    /// Orthonormal planted columns; the first is the target `v`.
    pub components: Vec<Vec<f64>>,
    pub s: usize,
    pub gamma: f64,
    pub label: String,
}

impl PlantedInstance {
    pub fn v(&self) -> &[f64] {
        &self.components[0]
    }

    pub fn d(&self) -> usize {
        self.sigma.dim()
    }

    /// Union of the supports of the planted columns.
    pub fn support(&self) -> Vec<usize> {
        (0..self.d())
            .filter(|&i| self.components.iter().any(|c| c[i] != 0.0))
            .collect()
    }

    /// `max_j |Σ v_j - (v_j^T Σ v_j) v_j|`.
    pub fn eigen_residual(&self) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let sc = self.sigma.matvec(c);
                let lam = dot(c, &sc);
                let r: Vec<f64> = sc.iter().zip(c).map(|(a, b)| a - lam * b).collect();
                norm(&r)
            })
            .fold(0.0, f64::max)
    }
}

/// Where the spike lives.
#[derive(Debug, Clone, PartialEq)]
pub enum SpikeSupport {
    /// Coordinates `0..s`, all entries `+1/sqrt(s)`.
    Leading,
    /// Given coordinates, all entries `+1/sqrt(s)`.
    Indices(Vec<usize>),
    /// A seeded uniformly random `s`-subset with seeded random signs.
    Random { seed: u64 },
}

fn spike_vector(d: usize, s: usize, support: &SpikeSupport) -> Result<Vec<f64>> {
    if s == 0 || s > d {
        return Err(SpcaError::param(format!("sparsity s = {s} must lie in [1, {d}]")));
    }
    let amp = 1.0 / (s as f64).sqrt();
    let mut v = vec![0.0; d];
    match support {
        SpikeSupport::Leading => v[..s].iter_mut().for_each(|x| *x = amp),
        SpikeSupport::Indices(idx) => {
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != s || sorted.last().is_some_and(|&i| i >= d) {
                return Err(SpcaError::param(format!(
                    "support must list {s} distinct indices below {d}"
                )));
            }
            sorted.into_iter().for_each(|i| v[i] = amp);
        }
        SpikeSupport::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for i in sample_indices(&mut rng, d, s) {
                v[i] = if rng.random::<bool>() { amp } else { -amp };
            }
        }
    }
    Ok(v)
}

/// Spiked identity: `Σ = 0.9 (I - v v^T) + v v^T`.
pub fn build_spiked_identity(d: usize, s: usize, support: &SpikeSupport) -> Result<PlantedInstance> {
    let mut inst = build_spiked_general(d, s, 0.1, support)?;
    inst.label = "spiked-identity".into();
    Ok(inst)
}

/// `Σ = (1 - γ)(I - v v^T) + v v^T`: top eigenvalue 1, the rest `1 - γ`.
pub fn build_spiked_general(
    d: usize,
    s: usize,
    gamma: f64,
    support: &SpikeSupport,
) -> Result<PlantedInstance> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(SpcaError::param(format!("gap gamma = {gamma} must lie in (0, 1)")));
    }
    let v = spike_vector(d, s, support)?;
    let bulk = 1.0 - gamma;
    let sigma = SymMatrix::from_fn(d, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        bulk * (delta - v[i] * v[j]) + v[i] * v[j]
    })?;
    Ok(PlantedInstance {
        sigma,
        components: vec![v],
        s,
        gamma,
        label: "spiked".into(),
    })
}

/// General builder: `Σ = Σ_j λ_j c_j c_j^T + bulk (I - C C^T)` for orthonormal
/// columns `c_j` listed with decreasing eigenvalues.
///
/// The reported `gamma` is the gap `1 - bulk / λ_k` below the planted block.
pub fn build_from_spectrum(
    components: Vec<Vec<f64>>,
    eigenvalues: &[f64],
    bulk: f64,
    label: &str,
) -> Result<PlantedInstance> {
    let k = components.len();
    if k == 0 || eigenvalues.len() != k {
        return Err(SpcaError::param("need one eigenvalue per planted column"));
    }
    let d = components[0].len();
    if components.iter().any(|c| c.len() != d) {
        return Err(SpcaError::param("planted columns must share a dimension"));
    }
    for a in 0..k {
        for b in 0..k {
            let target = if a == b { 1.0 } else { 0.0 };
            if (dot(&components[a], &components[b]) - target).abs() > 1e-10 {
                return Err(SpcaError::param("planted columns are not orthonormal"));
            }
        }
    }
    if eigenvalues.windows(2).any(|w| w[0] < w[1]) || bulk < 0.0 {
        return Err(SpcaError::param("eigenvalues must be decreasing and the bulk nonnegative"));
    }
    if bulk >= eigenvalues[k - 1] {
        return Err(SpcaError::param("bulk level must sit below the planted eigenvalues"));
    }
    let sigma = SymMatrix::from_fn(d, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        let mut x = bulk * delta;
        for (c, &lam) in components.iter().zip(eigenvalues) {
            x += (lam - bulk) * c[i] * c[j];
        }
        x
    })?;
    let s = (0..d)
        .filter(|&i| components.iter().any(|c| c[i] != 0.0))
        .count();
    Ok(PlantedInstance {
        sigma,
        components,
        s,
        gamma: 1.0 - bulk / eigenvalues[k - 1],
        label: label.to_string(),
    })
}
