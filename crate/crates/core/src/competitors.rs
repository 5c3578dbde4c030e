//! Principal-components estimators of the common component used as
//! benchmarks: PCs of the levels, PCs of the differences cumulated back to
//! levels, and the cumulated variant with re-attached intercept and trend.
//!
//! None of them use the index sets of the model; all need a complete panel.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::init::line_fit;
use crate::linalg::sym_eigen_desc;
use crate::model::Panel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    PcLevels,
    PcDiffCumulate,
    PcDiffCorrected,
}

impl Method {
    pub const ALL: [Method; 3] = [
        Method::PcLevels,
        Method::PcDiffCumulate,
        Method::PcDiffCorrected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::PcLevels => "pc_levels",
            Method::PcDiffCumulate => "pc_diff_cumulate",
            Method::PcDiffCorrected => "pc_diff_corrected",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompetitorEstimate {
    pub method: Method,
    /// Number of principal components.
    pub r: usize,
    /// Estimated common component, n x T.
    pub chi: DMatrix<f64>,
}

fn require_complete(panel: &Panel, method: Method) -> Result<()> {
    if panel.is_complete() {
        Ok(())
    } else {
        Err(Error::MissingData(method.name().into()))
    }
}

/// Leading `r` eigenvectors of the symmetric `m`, optionally requiring the
/// `r`-th eigenvalue to be non-negligible.
fn leading_space(m: &DMatrix<f64>, r: usize, check_rank: bool) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if r == 0 || r > n {
        return Err(Error::Dimension(format!(
            "cannot extract {r} components from {n} series"
        )));
    }
    let (vals, vecs) = sym_eigen_desc(m);
    if check_rank && vals[r - 1] <= 1e-12 * vals[0].abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Singular(format!(
            "second-moment matrix has rank below {r}"
        )));
    }
    Ok(vecs.columns(0, r).into_owned())
}

/// Projection of the levels on their `r` leading principal components.
/// The second-moment matrix is not demeaned unless `demean` is set, in
/// which case series means are removed before projecting and added back.
pub fn pc_levels(panel: &Panel, r: usize, demean: bool) -> Result<CompetitorEstimate> {
    require_complete(panel, Method::PcLevels)?;
    let x = &panel.data;
    let t_len = x.ncols();
    let mean = if demean {
        x.column_mean()
    } else {
        nalgebra::DVector::zeros(x.nrows())
    };
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let v = leading_space(&(&centered * centered.transpose() / t_len as f64), r, true)?;
    let mut chi = &v * (v.transpose() * &centered);
    for mut col in chi.column_iter_mut() {
        col += &mean;
    }
    Ok(CompetitorEstimate {
        method: Method::PcLevels,
        r,
        chi,
    })
}

/// Projected demeaned differences; column `k` holds `Δchi_{k+2}`.
pub fn differenced_common(panel: &Panel, r: usize) -> Result<DMatrix<f64>> {
    let x = &panel.data;
    let (n, t_len) = x.shape();
    if t_len < 3 {
        return Err(Error::Dimension(
            "differenced estimators need T >= 3".into(),
        ));
    }
    let mut dx = DMatrix::from_fn(n, t_len - 1, |i, c| x[(i, c + 1)] - x[(i, c)]);
    let mean = dx.column_mean();
    for mut col in dx.column_iter_mut() {
        col -= &mean;
    }
    let v = leading_space(&(&dx * dx.transpose() / (t_len - 1) as f64), r, false)?;
    Ok(&v * (v.transpose() * &dx))
}

fn cumulate(dchi: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = dchi.shape();
    let mut out = DMatrix::zeros(n, m + 1);
    for c in 0..m {
        let next = out.column(c) + dchi.column(c);
        out.set_column(c + 1, &next);
    }
    out
}

/// Differences demeaned series by series, projected on their `r` leading
/// principal components, and cumulated from zero.
pub fn pc_diff_cumulate(panel: &Panel, r: usize) -> Result<CompetitorEstimate> {
    require_complete(panel, Method::PcDiffCumulate)?;
    let chi = cumulate(&differenced_common(panel, r)?);
    Ok(CompetitorEstimate {
        method: Method::PcDiffCumulate,
        r,
        chi,
    })
}

/// As [`pc_diff_cumulate`], then adds back the OLS fit of `x_i - chi_i` on
/// `(1, t)` to every series, restoring its location and linear trend.
pub fn pc_diff_corrected(panel: &Panel, r: usize) -> Result<CompetitorEstimate> {
    require_complete(panel, Method::PcDiffCorrected)?;
    let mut chi = cumulate(&differenced_common(panel, r)?);
    let x = &panel.data;
    for i in 0..x.nrows() {
        let pts: Vec<(f64, f64)> = (0..x.ncols())
            .map(|c| ((c + 1) as f64, x[(i, c)] - chi[(i, c)]))
            .collect();
        let (a, b) = line_fit(&pts)?;
        for c in 0..x.ncols() {
            chi[(i, c)] += a + b * (c + 1) as f64;
        }
    }
    Ok(CompetitorEstimate {
        method: Method::PcDiffCorrected,
        r,
        chi,
    })
}

pub fn estimate(method: Method, panel: &Panel, r: usize) -> Result<CompetitorEstimate> {
    match method {
        Method::PcLevels => pc_levels(panel, r, false),
        Method::PcDiffCumulate => pc_diff_cumulate(panel, r),
        Method::PcDiffCorrected => pc_diff_corrected(panel, r),
    }
}
