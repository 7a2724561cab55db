//! Spillover indices from a row-normalized decomposition matrix, and the
//! spillover asymmetry measures built from paired RS+/RS- index sets.
//!
//! Row `i` of the matrix is the receiver: `w[i][j]` is the share of `i`'s
//! forecast error variance due to shocks in `j`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpilloverError {
    #[error("pairwise spillover needs two distinct assets, got ({0}, {0})")]
    SameAsset(usize),
    #[error("asset index {index} out of range for {n} assets")]
    OutOfRange { index: usize, n: usize },
    #[error("decomposition matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("spillover sets have different dimensions")]
    Mismatch,
}

pub type Result<T> = std::result::Result<T, SpilloverError>;

/// Scaling of directional, net and pairwise indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportingConvention {
    /// Off-diagonal sums times 100, the layout of a spillover table.
    #[default]
    Table,
    /// The same sums averaged over the N assets.
    EqN,
}

impl fmt::Display for ReportingConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportingConvention::Table => "table",
            ReportingConvention::EqN => "eqN",
        })
    }
}

impl FromStr for ReportingConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table" => Ok(ReportingConvention::Table),
            "eqn" => Ok(ReportingConvention::EqN),
            other => Err(format!("unknown convention `{other}` (expected table or eqN)")),
        }
    }
}

impl ReportingConvention {
    fn apply(&self, pct: f64, n: usize) -> f64 {
        match self {
            ReportingConvention::Table => pct,
            ReportingConvention::EqN => pct / n as f64,
        }
    }
}

fn check_index(norm: &DMatrix<f64>, i: usize) -> Result<()> {
    if i >= norm.nrows() {
        Err(SpilloverError::OutOfRange { index: i, n: norm.nrows() })
    } else {
        Ok(())
    }
}

/// `100 / N * sum_{i != j} w_ij`. Independent of the reporting convention.
pub fn total_spillover(norm: &DMatrix<f64>) -> f64 {
    let n = norm.nrows();
    let mut off = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off += norm[(i, j)];
            }
        }
    }
    100.0 * off / n as f64
}

/// Spillover received by `i` from all others (row `i` off-diagonal mass).
pub fn directional_received(norm: &DMatrix<f64>, i: usize, conv: ReportingConvention) -> Result<f64> {
    check_index(norm, i)?;
    let s: f64 = (0..norm.ncols()).filter(|&j| j != i).map(|j| norm[(i, j)]).sum();
    Ok(conv.apply(100.0 * s, norm.nrows()))
}

/// Spillover transmitted by `i` to all others (column `i` off-diagonal mass).
pub fn directional_transmitted(norm: &DMatrix<f64>, i: usize, conv: ReportingConvention) -> Result<f64> {
    check_index(norm, i)?;
    let s: f64 = (0..norm.nrows()).filter(|&j| j != i).map(|j| norm[(j, i)]).sum();
    Ok(conv.apply(100.0 * s, norm.nrows()))
}

pub fn net_spillover(norm: &DMatrix<f64>, i: usize, conv: ReportingConvention) -> Result<f64> {
    Ok(directional_transmitted(norm, i, conv)? - directional_received(norm, i, conv)?)
}

/// Net pairwise spillover from `i` to `j`: `100 (w_ji - w_ij)`, divided by
/// N under [`ReportingConvention::EqN`].
pub fn net_pairwise(norm: &DMatrix<f64>, i: usize, j: usize, conv: ReportingConvention) -> Result<f64> {
    check_index(norm, i)?;
    check_index(norm, j)?;
    if i == j {
        return Err(SpilloverError::SameAsset(i));
    }
    Ok(conv.apply(100.0 * (norm[(j, i)] - norm[(i, j)]), norm.nrows()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpilloverSet {
    pub total: f64,
    pub from_others: Vec<f64>,
    pub to_others: Vec<f64>,
    pub net: Vec<f64>,
    /// `pairwise[(i, j)]` is the net pairwise spillover from `i` to `j`.
    pub pairwise: DMatrix<f64>,
    pub convention: ReportingConvention,
}

impl SpilloverSet {
    pub fn from_normalized(norm: &DMatrix<f64>, conv: ReportingConvention) -> Result<Self> {
        let (r, c) = norm.shape();
        if r != c {
            return Err(SpilloverError::NotSquare(r, c));
        }
        let n = r;
        let from_others: Vec<f64> = (0..n).map(|i| directional_received(norm, i, conv)).collect::<Result<_>>()?;
        let to_others: Vec<f64> = (0..n).map(|i| directional_transmitted(norm, i, conv)).collect::<Result<_>>()?;
        let net = to_others.iter().zip(&from_others).map(|(t, f)| t - f).collect();
        let mut pairwise = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = net_pairwise(norm, i, j, conv)?;
                pairwise[(i, j)] = v;
                pairwise[(j, i)] = -v;
            }
        }
        Ok(Self {
            total: total_spillover(norm),
            from_others,
            to_others,
            net,
            pairwise,
            convention: conv,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.net.len()
    }
}

/// Spillover asymmetry measure `100 (S+ - S-) / ((S+ + S-) / 2)`.
/// `None` when both spillovers are zero, which is distinct from a perfectly
/// symmetric zero.
pub fn sam(s_plus: f64, s_minus: f64) -> Option<f64> {
    let mid = 0.5 * (s_plus + s_minus);
    if !(mid > 0.0) || !s_plus.is_finite() || !s_minus.is_finite() {
        return None;
    }
    Some(100.0 * (s_plus - s_minus) / mid)
}

pub fn directional_sam_received(i: usize, plus: &SpilloverSet, minus: &SpilloverSet) -> Option<f64> {
    sam(*plus.from_others.get(i)?, *minus.from_others.get(i)?)
}

pub fn directional_sam_transmitted(i: usize, plus: &SpilloverSet, minus: &SpilloverSet) -> Option<f64> {
    sam(*plus.to_others.get(i)?, *minus.to_others.get(i)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamPoint {
    pub sam: Option<f64>,
    pub sam_from: Vec<Option<f64>>,
    pub sam_to: Vec<Option<f64>>,
}

impl SamPoint {
    pub fn from_sets(plus: &SpilloverSet, minus: &SpilloverSet) -> Result<Self> {
        if plus.n_assets() != minus.n_assets() || plus.convention != minus.convention {
            return Err(SpilloverError::Mismatch);
        }
        let n = plus.n_assets();
        Ok(Self {
            sam: sam(plus.total, minus.total),
            sam_from: (0..n).map(|i| directional_sam_received(i, plus, minus)).collect(),
            sam_to: (0..n).map(|i| directional_sam_transmitted(i, plus, minus)).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform2() -> DMatrix<f64> {
        DMatrix::from_element(2, 2, 0.5)
    }

    #[test]
    fn identity_has_no_spillover() {
        let id = DMatrix::identity(3, 3);
        assert_eq!(total_spillover(&id), 0.0);
        let set = SpilloverSet::from_normalized(&id, ReportingConvention::Table).unwrap();
        assert!(set.from_others.iter().chain(&set.to_others).chain(&set.net).all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_two_asset_case() {
        assert_eq!(total_spillover(&uniform2()), 50.0);
        assert_eq!(directional_received(&uniform2(), 0, ReportingConvention::EqN).unwrap(), 25.0);
        assert_eq!(directional_received(&uniform2(), 0, ReportingConvention::Table).unwrap(), 50.0);
    }

    #[test]
    fn pairwise_rules() {
        let m = DMatrix::from_row_slice(3, 3, &[0.6, 0.3, 0.1, 0.2, 0.7, 0.1, 0.0, 0.4, 0.6]);
        assert_eq!(net_pairwise(&m, 1, 1, ReportingConvention::EqN), Err(SpilloverError::SameAsset(1)));
        assert!(net_pairwise(&m, 0, 3, ReportingConvention::EqN).is_err());
        let a = net_pairwise(&m, 0, 2, ReportingConvention::EqN).unwrap();
        let b = net_pairwise(&m, 2, 0, ReportingConvention::EqN).unwrap();
        assert_eq!(a, -b);
        let sym = DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.3, 0.7]);
        assert_eq!(net_pairwise(&sym, 0, 1, ReportingConvention::Table).unwrap(), 0.0);
    }

    #[test]
    fn sam_examples() {
        assert_eq!(sam(30.0, 30.0), Some(0.0));
        assert_eq!(sam(60.0, 40.0), Some(40.0));
        assert_eq!(sam(0.0, 50.0), Some(-200.0));
        assert_eq!(sam(50.0, 0.0), Some(200.0));
        assert_eq!(sam(10.0, 30.0), Some(-100.0));
        assert_eq!(sam(0.0, 0.0), None);
    }

    #[test]
    fn directional_sam_all_negative_system() {
        let m = DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.3, 0.7]);
        let minus = SpilloverSet::from_normalized(&m, ReportingConvention::Table).unwrap();
        let plus = SpilloverSet::from_normalized(&DMatrix::identity(2, 2), ReportingConvention::Table).unwrap();
        let p = SamPoint::from_sets(&plus, &minus).unwrap();
        assert_eq!(p.sam, Some(-200.0));
        assert_eq!(p.sam_from, vec![Some(-200.0); 2]);
        assert_eq!(p.sam_to, vec![Some(-200.0); 2]);
        let same = SamPoint::from_sets(&minus, &minus).unwrap();
        assert_eq!(same.sam, Some(0.0));
        // identity against identity has nothing to compare
        let none = SamPoint::from_sets(&plus, &plus).unwrap();
        assert_eq!(none.sam, None);
        assert_eq!(none.sam_to, vec![None, None]);
    }

    #[test]
    fn parse_conventions() {
        assert_eq!("eqN".parse::<ReportingConvention>().unwrap(), ReportingConvention::EqN);
        assert_eq!("table".parse::<ReportingConvention>().unwrap(), ReportingConvention::Table);
        assert!("x".parse::<ReportingConvention>().is_err());
    }
}
