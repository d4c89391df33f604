use std::fmt;

use super::Config;
use crate::counterexamples::{
    build_covthresh_instance_with, build_deflation_barrier, build_diagthresh_instance,
    build_greedycorr_instance_with, diagthresh_levels, verify_barrier, Certificate, CovthreshRegime,
    GreedyCorrParams,
};
use crate::error::{Result, SpcaError};

/// Certificates for one family at one parameter point.
#[derive(Debug)]
pub struct VerifySection {
    pub family: String,
    pub params: Vec<(String, f64)>,
    pub certificates: Vec<Certificate>,
    /// Set when a gating certificate stopped the construction.
    pub failure: Option<SpcaError>,
    /// Barrier only: nonzeros of the deflated top eigenvector.
    pub nnz: Option<usize>,
}

impl VerifySection {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.certificates.iter().all(|c| !c.gating || c.passed())
    }

    /// Name of the first failing certificate.
    pub fn failed_certificate(&self) -> Option<String> {
        if let Some(SpcaError::Certificate { name, .. }) = &self.failure {
            return Some(name.clone());
        }
        self.certificates.iter().find(|c| c.gating && !c.passed()).map(|c| c.name.clone())
    }
}

impl fmt::Display for VerifySection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(f, "[{}] {}", self.family, params.join(" "))?;
        for c in &self.certificates {
            writeln!(f, "  {c}")?;
        }
        if let Some(nnz) = self.nnz {
            writeln!(f, "  nnz = {nnz}")?;
        }
        if let Some(e) = &self.failure {
            writeln!(f, "  FAIL {e}")?;
        }
        writeln!(f, "  {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

#[derive(Debug, Default)]
pub struct VerifyReport {
    pub sections: Vec<VerifySection>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.sections.iter().all(VerifySection::passed)
    }

    /// The first failure as an error naming the certificate.
    pub fn into_result(self) -> Result<Self> {
        for s in &self.sections {
            if let Some(e) = &s.failure {
                return Err(clone_error(e).context(&format!("verify {}", s.family)));
            }
            if let Some(c) = s.certificates.iter().find(|c| c.gating && !c.passed()) {
                return Err(c.to_error().context(&format!("verify {}", s.family)));
            }
        }
        Ok(self)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.sections {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

fn clone_error(e: &SpcaError) -> SpcaError {
    match e {
        SpcaError::Certificate { name, measured, required } => SpcaError::Certificate {
            name: name.clone(),
            measured: *measured,
            required: required.clone(),
        },
        other => SpcaError::Construction(other.to_string()),
    }
}

/// Builds one family and collects its certificates.
///
/// A failed gating certificate is captured in the section; any other error
/// (a violated precondition in particular) is returned.
pub fn verify_family(cfg: &Config, family: &str) -> Result<VerifySection> {
    let built = match family {
        "covthresh" => {
            // population regime: the only one whose preconditions admit a desk-sized u
            let s = cfg.usize_or("s", 4)?;
            let u = cfg.usize_or("u", 489)?;
            let tau = cfg.f64_or("tau", 0.0037)?;
            let p = vec![("s".into(), s as f64), ("u".into(), u as f64), ("tau".into(), tau)];
            let seed = cfg.u64_or("seed", 0)?;
            (p, build_covthresh_instance_with(s, u, tau, seed, CovthreshRegime::Population).map(|i| i.certificates), None)
        }
        "greedycorr" => {
            let s = cfg.usize_or("s", 16)?;
            let mut g = GreedyCorrParams::lemma(s);
            g.lam1 = cfg.f64_or("lam1", g.lam1)?;
            g.lam2 = cfg.f64_or("lam2", g.lam2)?;
            (vec![("s".into(), s as f64)], build_greedycorr_instance_with(g).map(|i| i.certificates), None)
        }
        "diagthresh" => {
            let d = cfg.usize_or("d", 1000)?;
            let s = cfg.usize_or("s", 8)?;
            let (l1, l2, l3, l4) = diagthresh_levels(1.0, 0.5, 2.1, 2.2);
            let p = vec![("d".into(), d as f64), ("s".into(), s as f64)];
            (p, build_diagthresh_instance(d, s, l1, l2, l3, l4).map(|i| i.certificates), None)
        }
        "barrier" => {
            let d = cfg.usize_or("d", 50)?;
            let delta = cfg.f64_or("delta", 0.1)?;
            let gamma = cfg.f64_or("gamma", 0.2)?;
            let p = vec![("d".into(), d as f64), ("delta".into(), delta), ("gamma".into(), gamma)];
            match build_deflation_barrier(d, delta, gamma) {
                Ok(b) => {
                    let report = verify_barrier(&b)?;
                    let mut certs = b.instance.certificates.clone();
                    certs.extend(report.certificates.iter().cloned());
                    (p, Ok(certs), Some(report.nnz))
                }
                Err(e) => (p, Err(e), None),
            }
        }
        other => {
            return Err(SpcaError::param(format!(
                "verify takes covthresh, greedycorr, diagthresh or barrier, not `{other}`"
            )))
        }
    };
    let (params, certs, nnz) = built;
    let (certificates, failure) = match certs {
        Ok(c) => (c, None),
        Err(e @ SpcaError::Certificate { .. }) => (Vec::new(), Some(e)),
        Err(e) => return Err(e.context(&format!("verify {family}"))),
    };
    Ok(VerifySection {
        family: family.to_string(),
        params,
        certificates,
        failure,
        nnz,
    })
}

/// Every family's population-level certificates at its default parameters.
///
/// Only `tau`, `u` and `seed` are read from `cfg` (for the covthresh
/// section), so a bad injected `tau` surfaces as a named precondition error.
pub fn verify_all(cfg: &Config) -> Result<VerifyReport> {
    let mut cov = Config::default();
    for key in ["tau", "u", "seed"] {
        if let Some(v) = cfg.raw(key) {
            cov.set(key, v)?;
        }
    }
    let empty = Config::default();
    let sections = vec![
        verify_family(&cov, "covthresh")?,
        verify_family(&empty, "greedycorr")?,
        verify_family(&empty, "diagthresh")?,
        verify_family(&empty, "barrier")?,
    ];
    Ok(VerifyReport { sections })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn defaults_pass_and_barrier_is_dense() {
        let report = verify_all(&Config::default()).unwrap();
        assert_eq!(report.sections.len(), 4);
        for s in &report.sections {
            assert!(s.passed(), "{s}");
        }
        assert_eq!(report.sections[3].nnz, Some(50));
        assert!(report.to_string().contains("nnz = 50"));
    }

    #[test]
    fn injected_tau_names_the_precondition() {
        let cfg = Config::parse("tau=0.02\nu=1000\n", Path::new("t")).unwrap();
        let err = verify_all(&cfg).unwrap_err();
        assert!(matches!(err, SpcaError::Parameter(_)));
        assert!(err.to_string().contains("u <= 1/(144 tau^2)"), "{err}");
    }

    #[test]
    fn failing_certificate_is_named() {
        let cfg = Config::parse("s=2\n", Path::new("t")).unwrap();
        let sec = verify_family(&cfg, "greedycorr").unwrap();
        assert!(!sec.passed());
        assert_eq!(sec.failed_certificate().as_deref(), Some("decoy_minus_true_corr"));
        let report = VerifyReport { sections: vec![sec] };
        let err = report.into_result().unwrap_err();
        assert!(err.to_string().contains("decoy_minus_true_corr"));
    }
}
