use super::{params, psd_certificate, Certificate, CounterexampleInstance, Family, Relation};
use crate::error::{Result, SpcaError};
use crate::linalg::{dot, norm, symmetric_eigenvalues, top_eig, SymMatrix};
use crate::models::PlantedInstance;

/// A deflation-barrier instance with its deflation direction and 2×2 compression.
#[derive(Debug, Clone)]
pub struct BarrierInstance {
    pub instance: CounterexampleInstance,
    /// The 3-sparse unit vector being projected out.
    pub u: Vec<f64>,
    pub compression: SymMatrix,
}

/// `Σ = (1/Δ) v_1 v_1^T + v_2 v_2^T + (1-γ) w w^T` with `v_{1,2} = (e_1 ± e_2)/√2`,
/// `w = (e_3 + q)/√2`, `q` uniform on coordinates `4..d`, and the direction
/// `u = √(1-Δ) v_1 + √Δ e_3`.
pub fn build_deflation_barrier(d: usize, delta: f64, gamma: f64) -> Result<BarrierInstance> {
    if d < 4 {
        return Err(SpcaError::param(format!("barrier: d = {d} must be at least 4")));
    }
    for (name, x) in [("delta", delta), ("gamma", gamma)] {
        if !(x > 0.0 && x < 1.0) {
            return Err(SpcaError::param(format!("barrier: {name} = {x} must lie in (0, 1)")));
        }
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut v1 = vec![0.0; d];
    let mut v2 = vec![0.0; d];
    v1[0] = h;
    v1[1] = h;
    v2[0] = h;
    v2[1] = -h;
    let qv = 1.0 / ((d - 3) as f64).sqrt();
    let mut w = vec![h * qv; d];
    w[0] = 0.0;
    w[1] = 0.0;
    w[2] = h;
    let sigma = SymMatrix::from_fn(d, |i, j| {
        v1[i] * v1[j] / delta + v2[i] * v2[j] + (1.0 - gamma) * w[i] * w[j]
    })?;
    let mut u: Vec<f64> = v1.iter().map(|x| (1.0 - delta).sqrt() * x).collect();
    u[2] = delta.sqrt();

    let g = 1.0 - gamma;
    let off = -g * (1.0 - delta).sqrt() / 2.0;
    let compression = SymMatrix::from_rows(&[
        vec![1.0 + g * (1.0 - delta) / 2.0, off],
        vec![off, g / 2.0],
    ])?;

    let eigs = symmetric_eigenvalues(&sigma);
    let mut expected = vec![1.0 / delta, 1.0, g];
    expected.extend(std::iter::repeat(0.0).take(d - 3));
    expected.sort_by(|a, b| b.total_cmp(a));
    let spec_err = eigs.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let corr = dot(&u, &v1).powi(2);
    let certs = vec![
        Certificate::new("spectrum_deviation", spec_err, Relation::AtMost, 1e-10),
        Certificate::new("u_unit_error", (norm(&u) - 1.0).abs(), Relation::AtMost, 1e-14),
        Certificate::new("u_v1_corr_error", (corr - (1.0 - delta)).abs(), Relation::AtMost, 1e-14),
        Certificate::new("gap_lam3_over_lam2", g / 1.0, Relation::AtMost, 1.0 - gamma),
        psd_certificate(&sigma),
    ];
    let instance = CounterexampleInstance {
        instance: PlantedInstance {
            sigma,
            components: vec![v1, v2],
            s: 2,
            gamma,
            label: Family::Barrier.tag().into(),
        },
        family: Family::Barrier,
        params: params(&[("d", d as f64), ("delta", delta), ("gamma", gamma)]),
        certificates: certs,
        flags: Vec::new(),
    }
    .gate()?;
    Ok(BarrierInstance {
        instance,
        u,
        compression,
    })
}

/// Outcome of deflating the barrier instance once.
#[derive(Debug, Clone)]
pub struct BarrierReport {
    pub d: usize,
    /// Nonzeros (magnitude > 1e-8) of the top eigenvector of `PΣP`.
    pub nnz: usize,
    pub min_abs_entry: f64,
    pub eigenvalue: f64,
    pub compression_top: f64,
    pub v2_residual: f64,
    pub tied: bool,
    pub certificates: Vec<Certificate>,
}

impl BarrierReport {
    pub fn passed(&self) -> bool {
        self.certificates.iter().all(Certificate::passed)
    }

    pub fn into_result(self) -> Result<Self> {
        match self.certificates.iter().find(|c| !c.passed()) {
            Some(c) => Err(c.to_error()),
            None => Ok(self),
        }
    }
}

/// Deflates by `u` and checks that the new top eigenvector is fully dense.
pub fn verify_barrier(b: &BarrierInstance) -> Result<BarrierReport> {
    let sigma = &b.instance.instance.sigma;
    let d = sigma.dim();
    let deflated = sigma.project_both_sides(std::slice::from_ref(&b.u))?;
    let top = top_eig(&deflated)?;
    let vec = &top.pair.vector;
    let min_abs = vec.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    let nnz = vec.iter().filter(|x| x.abs() > 1e-8).count();
    let c_top = top_eig(&b.compression)?.pair.value;
    let v2 = &b.instance.instance.components[1];
    let pv2 = deflated.matvec(v2);
    let v2_res = pv2.iter().zip(v2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let certificates = vec![
        Certificate::new("min_abs_entry", min_abs, Relation::Above, 1e-8),
        Certificate::new("top_eigenvalue", top.pair.value, Relation::Above, 1.0),
        Certificate::new("compression_match", (top.pair.value - c_top).abs(), Relation::AtMost, 1e-10),
        Certificate::new("v2_fixed_point", v2_res, Relation::AtMost, 1e-10),
    ];
    Ok(BarrierReport {
        d,
        nnz,
        min_abs_entry: min_abs,
        eigenvalue: top.pair.value,
        compression_top: c_top,
        v2_residual: v2_res,
        tied: top.tied,
        certificates,
    })
}
