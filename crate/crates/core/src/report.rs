//! Certificate files, JSON reports and CSV exports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::QuadraticCertificate;
use crate::candidate::Candidate;
use crate::cegis::{AuditTrail, Certificate};
use crate::linalg::Matrix;
use crate::net::{NetParams, ShiftedNet};
use crate::region::{CriticalPoint, MultistartStats, SecurityRegion};

pub const CERTIFICATE_FORMAT: &str = "gridlyap-certificate";
pub const CERTIFICATE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported certificate: {0}")]
    Format(String),
}

/// On-disk form of a learned certificate. Matrices are row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub format: String,
    pub version: u32,
    pub m: usize,
    pub p: usize,
    /// `p × m`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    /// `V_θ(0)`, subtracted so that the certificate vanishes at the origin.
    pub shift: f64,
    pub u: f64,
    pub scenario_hash: String,
    pub state_names: Vec<String>,
}

impl CertificateFile {
    pub fn new(cert: &Certificate<f64>, scenario_hash: &str, state_names: Vec<String>) -> Self {
        let net = &cert.v.net;
        Self {
            format: CERTIFICATE_FORMAT.into(),
            version: CERTIFICATE_VERSION,
            m: net.m(),
            p: net.p(),
            w1: net.w1.as_slice().to_vec(),
            b1: net.b1.clone(),
            w2: net.w2.clone(),
            b2: net.b2,
            shift: cert.v.shift,
            u: cert.u,
            scenario_hash: scenario_hash.into(),
            state_names,
        }
    }

    pub fn certificate(&self) -> Result<Certificate<f64>, ReportError> {
        if self.format != CERTIFICATE_FORMAT || self.version != CERTIFICATE_VERSION {
            return Err(ReportError::Format(format!(
                "{} v{}",
                self.format, self.version
            )));
        }
        if self.w1.len() != self.m * self.p || self.b1.len() != self.p || self.w2.len() != self.p {
            return Err(ReportError::Format(
                "parameter shapes do not match m and p".into(),
            ));
        }
        let net = NetParams {
            w1: Matrix::from_row_major(self.p, self.m, self.w1.clone()),
            b1: self.b1.clone(),
            w2: self.w2.clone(),
            b2: self.b2,
        };
        Ok(Certificate {
            v: ShiftedNet {
                net,
                shift: self.shift,
            },
            u: self.u,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ReportError> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ReportError::Json {
            path: path.display().to_string(),
            source,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    write_text(path, &(text + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| ReportError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub scenario: String,
    pub scenario_hash: String,
    pub stable: bool,
    pub spectral_abscissa: f64,
    /// `[re, im]` pairs.
    pub eigenvalues: Vec<[f64; 2]>,
    pub jacobian: Vec<Vec<f64>>,
    pub state_names: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedAttempt {
    pub seed: u64,
    pub certified: bool,
    pub updates: usize,
    pub final_samples: usize,
    pub message: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LearnReport {
    pub scenario: String,
    pub scenario_hash: String,
    pub hyper: crate::scenario::Hyper,
    pub seed: Option<u64>,
    pub attempts: Vec<SeedAttempt>,
    pub wall_time_s: f64,
    pub audit: Option<AuditTrail>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Membership {
    pub name: String,
    pub x0: Vec<f64>,
    pub norm: f64,
    pub value: f64,
    pub contains: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionReport {
    /// `neural` or `conventional`.
    pub method: String,
    pub scenario_hash: String,
    pub u: f64,
    pub d_star: f64,
    pub touch_points: Vec<CriticalPoint>,
    pub critical_set: Vec<CriticalPoint>,
    pub stats: Option<MultistartStats>,
    pub memberships: Vec<Membership>,
    pub state_names: Vec<String>,
}

impl RegionReport {
    pub fn neural<C: Candidate>(
        region: &SecurityRegion<C>,
        scenario_hash: &str,
        memberships: Vec<Membership>,
        state_names: Vec<String>,
    ) -> Self {
        Self {
            method: "neural".into(),
            scenario_hash: scenario_hash.into(),
            u: region.u,
            d_star: region.d_star,
            touch_points: region.touch_points.clone(),
            critical_set: region.critical_set.clone(),
            stats: Some(region.stats.clone()),
            memberships,
            state_names,
        }
    }

    pub fn conventional(
        cert: &QuadraticCertificate,
        scenario_hash: &str,
        memberships: Vec<Membership>,
        state_names: Vec<String>,
    ) -> Self {
        Self {
            method: "conventional".into(),
            scenario_hash: scenario_hash.into(),
            u: cert.u_q,
            d_star: cert.d_q,
            touch_points: Vec::new(),
            critical_set: Vec::new(),
            stats: None,
            memberships,
            state_names,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionVolume {
    pub u: f64,
    pub level: f64,
    pub volume: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareReport {
    pub scenario_hash: String,
    pub neural: RegionVolume,
    pub conventional: RegionVolume,
    pub conventional_global_up_to_cap: bool,
    pub p_matrix: Vec<Vec<f64>>,
    /// Neural over conventional volume.
    pub ratio: f64,
    pub mc_samples: usize,
    pub half_width: f64,
    pub memberships: Vec<(String, bool, bool)>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub scenario_hash: String,
    pub mc_samples: usize,
    pub mc_inside: usize,
    /// Samples reported inside whose re-evaluation disagrees.
    pub mc_inconsistent: usize,
    pub trajectories: usize,
    pub left_region: usize,
    pub not_converged: usize,
    pub failed_integrations: usize,
    pub t_end: f64,
    pub dt: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.mc_inconsistent == 0
            && self.left_region == 0
            && self.not_converged == 0
            && self.failed_integrations == 0
    }
}

/// `V` on an `n × n` grid over the `(i, j)` coordinate plane through `base`,
/// spanning `[−half, half]²`.
pub fn level_set_csv<C: Candidate>(
    v: &C,
    names: &[String],
    i: usize,
    j: usize,
    base: &[f64],
    half: f64,
    n: usize,
    inside: impl Fn(&[f64]) -> bool,
) -> String {
    let mut out = format!("{},{},V,inside\n", names[i], names[j]);
    let mut x = base.to_vec();
    for a in 0..n {
        for b in 0..n {
            x[i] = -half + 2.0 * half * a as f64 / (n - 1) as f64;
            x[j] = -half + 2.0 * half * b as f64 / (n - 1) as f64;
            let val: f64 = v.value(&x);
            out.push_str(&format!("{},{},{},{}\n", x[i], x[j], val, inside(&x) as u8));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certificate_round_trips_bit_exactly() {
        let th = NetParams::<f64>::init(3, 6, 9);
        let cert = Certificate {
            v: ShiftedNet::new(th),
            u: 0.7,
        };
        let file = CertificateFile::new(&cert, "abc", vec!["a".into(), "b".into(), "c".into()]);
        let text = serde_json::to_string(&file).unwrap();
        let back: CertificateFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
        let c2 = back.certificate().unwrap();
        assert_eq!(c2, cert);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let th = NetParams::<f64>::init(2, 4, 0);
        let mut file = CertificateFile::new(
            &Certificate {
                v: ShiftedNet::new(th),
                u: 1.0,
            },
            "",
            vec![],
        );
        file.w2.pop();
        assert!(matches!(file.certificate(), Err(ReportError::Format(_))));
    }

    #[test]
    fn level_csv_has_header_and_rows() {
        let q = crate::candidate::QuadraticForm::<f64>::identity(2);
        let csv = level_set_csv(
            &q,
            &["a".into(), "b".into()],
            0,
            1,
            &[0.0, 0.0],
            1.0,
            3,
            |_| true,
        );
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "a,b,V,inside");
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[1], "-1,-1,2,1");
    }
}
