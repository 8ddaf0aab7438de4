//! Writers for the plot-ready export formats: eigenvalue CSV, Koopman mode
//! matrices, and the JSON fit summary.

use std::fs;
use std::path::Path;

use kedmd::data;
use kedmd::error::{Error, Result};
use kedmd::KoopmanDecomposition;
use serde::Serialize;

pub const EIGENVALUES_FILE: &str = "eigenvalues.csv";
pub const MODES_FILE: &str = "modes.kmx";
pub const KOOPMAN_FILE: &str = "koopman_a.kmx";
pub const SUMMARY_FILE: &str = "summary.json";
pub const GRAM_G_FILE: &str = "gram_g.kmx";
pub const GRAM_H_FILE: &str = "gram_h.kmx";
pub const GRAM_GINV_FILE: &str = "gram_ginv.kmx";

/// `re,im,abs,cont_re,cont_im`, one row per retained eigenvalue.
pub fn write_eigenvalue_csv(dec: &KoopmanDecomposition, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("re,im,abs,cont_re,cont_im\n");
    for i in 0..dec.len() {
        let mu = dec.mu[i];
        let cont = dec.cont_eigs[i];
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            mu.re,
            mu.im,
            mu.norm(),
            cont.re,
            cont.im
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parse a CSV produced by [`write_eigenvalue_csv`].
pub fn read_eigenvalue_csv(path: impl AsRef<Path>) -> Result<Vec<[f64; 5]>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| Error::Format {
                    offset: 0,
                    message: format!("bad eigenvalue row {lineno}: {line:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if fields.len() != 5 {
            return Err(Error::Format {
                offset: 0,
                message: format!("eigenvalue row {lineno} has {} fields", fields.len()),
            });
        }
        rows.push([fields[0], fields[1], fields[2], fields[3], fields[4]]);
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct FitSummary {
    pub method: String,
    pub k_requested: usize,
    pub k_features: usize,
    pub m: usize,
    pub m_effective: usize,
    pub d: usize,
    pub seed: u64,
    pub dt: f64,
    pub rcond: f64,
    pub kernel_family: Option<String>,
    pub sigma: Option<f64>,
    pub sigma_auto: bool,
    pub n_modes: usize,
    pub defective: bool,
    pub eig_residuals: Vec<f64>,
    pub eigenfunction_residuals: Vec<f64>,
}

pub fn write_summary(summary: &FitSummary, dir: impl AsRef<Path>) -> Result<()> {
    let json =
        serde_json::to_string_pretty(summary).map_err(|e| Error::Numeric(e.to_string()))?;
    fs::write(dir.as_ref().join(SUMMARY_FILE), json + "\n")?;
    Ok(())
}

/// Write the decomposition artifacts shared by `fit` and `extend`.
pub fn write_decomposition(dec: &KoopmanDecomposition, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    write_eigenvalue_csv(dec, dir.join(EIGENVALUES_FILE))?;
    data::save_complex_matrix(dec.modes.view(), dir.join(MODES_FILE))?;
    data::save_complex_matrix(dec.a.view(), dir.join(KOOPMAN_FILE))?;
    Ok(())
}
