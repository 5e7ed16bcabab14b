//! JSON certificates written by `synth` and read by `verify` and `simulate`.

use std::fs;
use std::path::Path;

use hypiss_core::control::{LabelledMargin, Plant, SynthesisCertificate};
use hypiss_core::{DiagMatrix, Matrix, SymMatrix};
use serde::{Deserialize, Serialize};

use crate::config::{matrix, ConfigError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub label: String,
    pub value: f64,
}

impl From<&LabelledMargin> for Margin {
    fn from(m: &LabelledMargin) -> Self {
        Margin { label: m.label.clone(), value: m.value }
    }
}

pub fn margins_with_prefix(prefix: &str, margins: &[LabelledMargin]) -> Vec<Margin> {
    margins.iter().map(|m| Margin { label: format!("{prefix}.{}", m.label), value: m.value }).collect()
}

/// Diagonal matrices are stored as their diagonal. Only `q`, `gamma_hat`
/// and one of `k`, `w` are required on input; when both gains are given,
/// `k` is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<Vec<f64>>>,
    pub gamma_hat: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub margins: Vec<Margin>,
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

impl From<&SynthesisCertificate> for CertificateFile {
    fn from(c: &SynthesisCertificate) -> Self {
        CertificateFile {
            mu: Some(c.mu),
            alpha: Some(c.alpha),
            q: c.q.entries().to_vec(),
            s: Some(c.s.entries().to_vec()),
            w: Some(rows(&c.w)),
            k: Some(rows(&c.k)),
            gamma_hat: rows(&c.gamma_hat.to_matrix()),
            c: Some(c.c),
            gamma: Some(c.gamma),
            omega: Some(c.omega),
            kappa: Some(c.kappa),
            margins: c.margins.iter().map(Margin::from).collect(),
        }
    }
}

/// The values a certificate pins down, checked against a plant.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedCertificate {
    pub mu: f64,
    pub alpha: f64,
    pub q: DiagMatrix,
    pub s: Option<DiagMatrix>,
    pub k: Matrix,
    pub gamma_hat: SymMatrix,
}

impl ResolvedCertificate {
    /// `W = KQ`
    pub fn w(&self) -> Matrix {
        self.k.mul_diag(&self.q)
    }

    pub fn p(&self) -> DiagMatrix {
        hypiss_core::linalg::invert_diag(&self.q).expect("Q validated positive")
    }
}

fn positive_diag(path: &str, v: &[f64], n: usize) -> Result<DiagMatrix, ConfigError> {
    if v.len() != n {
        return Err(ConfigError::at(path, format!("expected {n} entries, found {}", v.len())));
    }
    if let Some(i) = v.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(ConfigError::at(format!("{path}[{i}]"), "must be positive"));
    }
    DiagMatrix::new(v.to_vec()).map_err(|e| ConfigError::at(path, e.to_string()))
}

impl CertificateFile {
    pub fn parse(text: &str) -> Result<CertificateFile, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::at(format!("certificate.{path}").trim_end_matches('.').to_string(), e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<CertificateFile, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        CertificateFile::parse(&text)
    }

    /// `mu`/`alpha` fall back to the given design values when absent.
    /// `Γ̂` is replaced by its symmetric part.
    pub fn resolve(&self, plant: &Plant, design: Option<(f64, f64)>) -> Result<ResolvedCertificate, ConfigError> {
        let (n, m) = (plant.states(), plant.inputs());
        let pick = |name: &str, v: Option<f64>, fallback: Option<f64>| {
            let x = v.or(fallback).ok_or_else(|| ConfigError::at(format!("certificate.{name}"), "missing and not set in design"))?;
            if x > 0.0 && x.is_finite() {
                Ok(x)
            } else {
                Err(ConfigError::at(format!("certificate.{name}"), "must be positive"))
            }
        };
        let mu = pick("mu", self.mu, design.map(|d| d.0))?;
        let alpha = pick("alpha", self.alpha, design.map(|d| d.1))?;
        let q = positive_diag("certificate.q", &self.q, n)?;
        let s = self.s.as_ref().map(|s| positive_diag("certificate.s", s, m)).transpose()?;
        let gamma_hat = SymMatrix::from_matrix(&matrix("certificate.gamma_hat", &self.gamma_hat, (Some(n), Some(n)))?);
        let k = match (&self.k, &self.w) {
            (Some(k), _) => matrix("certificate.k", k, (Some(m), Some(n)))?,
            (None, Some(w)) => {
                let w = matrix("certificate.w", w, (Some(m), Some(n)))?;
                w.mul_diag(&hypiss_core::linalg::invert_diag(&q).map_err(|e| ConfigError::at("certificate.q", e.to_string()))?)
            }
            (None, None) => return Err(ConfigError::at("certificate", "needs a gain `k` or `w`")),
        };
        Ok(ResolvedCertificate { mu, alpha, q, s, k, gamma_hat })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hypiss_core::control;

    #[test]
    fn gain_from_w() {
        let f = CertificateFile::parse(r#"{"q": [2.0, 4.0], "w": [[1.0, 1.0], [0.0, 2.0]], "gamma_hat": [[1.0, 0.2], [0.0, 1.0]]}"#).unwrap();
        let r = f.resolve(&control::reference_plant(), Some((1.0, 0.5))).unwrap();
        assert_eq!(r.k.row(0), &[0.5, 0.25]);
        assert_eq!(r.k.row(1), &[0.0, 0.5]);
        assert_eq!(r.gamma_hat.get(0, 1), 0.1);
        assert_eq!((r.mu, r.alpha), (1.0, 0.5));
    }

    #[test]
    fn missing_pieces_are_reported() {
        let f = CertificateFile::parse(r#"{"q": [2.0, 4.0], "gamma_hat": [[1.0, 0.0], [0.0, 1.0]]}"#).unwrap();
        assert!(f.resolve(&control::reference_plant(), Some((1.0, 0.5))).is_err());
        let g = CertificateFile::parse(r#"{"q": [2.0], "k": [[0.0]], "gamma_hat": [[1.0]]}"#).unwrap();
        match g.resolve(&control::reference_plant(), Some((1.0, 0.5))).unwrap_err() {
            ConfigError::Schema { path, .. } => assert_eq!(path, "certificate.q"),
            e => panic!("{e}"),
        }
        let h = CertificateFile::parse(r#"{"q": [2.0, 1.0], "k": [[0.0, 0.0], [0.0, 0.0]], "gamma_hat": [[1.0, 0.0], [0.0, 1.0]]}"#).unwrap();
        assert!(h.resolve(&control::reference_plant(), None).is_err());
        assert!(CertificateFile::parse(r#"{"q": [1.0], "gamma_hat": [[1.0]], "extra": 1}"#).is_err());
    }

    #[test]
    fn round_trip_is_lossless() {
        let plant = control::reference_plant();
        let cert = control::synthesize(&plant, 1.0, 0.5, &control::SynthesisOptions::default()).unwrap();
        let file = CertificateFile::from(&cert);
        let text = serde_json::to_string_pretty(&file).unwrap();
        let back = CertificateFile::parse(&text).unwrap();
        assert_eq!(back, file);
        let r = back.resolve(&plant, None).unwrap();
        assert_eq!(r.k, cert.k);
        assert_eq!(r.q, cert.q);
    }
}
