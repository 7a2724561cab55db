//! Asymmetric volatility spillovers from high-frequency prices.
//!
//! Daily realized variance and signed semivariances are computed per asset
//! from last-tick sampled intraday returns; a VAR fitted on rolling windows
//! of each measure yields a generalized forecast-error variance
//! decomposition, which is reduced to total, directional, net and pairwise
//! spillover indices. Pairing the RS+ and RS- results gives the spillover
//! asymmetry measures.
//!
//! Modules follow the pipeline order:
//!
//! * [`ingestion`] parses trades and builds per-day intraday return grids.
//! * [`realized`] computes RV / RS- / RS+ and aligns the cross-asset panel.
//! * [`var`] fits VAR(p) models and derives MA coefficients.
//! * [`gfevd`] computes the generalized variance decomposition.
//! * [`spillover`] reduces a decomposition to the index family and SAM.
//! * [`rolling`] sweeps windows over the panel and summarizes the series.
//! * [`synth`] simulates known processes and provides independent oracles.
//! * [`output`] holds the shared text formats.

pub mod gfevd;
pub mod ingestion;
pub mod output;
pub mod realized;
pub mod rolling;
pub mod spillover;
pub mod synth;
pub mod var;

pub use gfevd::{FevdMatrix, SigmaConvention};
pub use realized::{DailyMeasure, MeasureKind, MeasurePanel};
pub use rolling::{LagChoice, RollingConfig, SpilloverSeries};
pub use spillover::{ReportingConvention, SamPoint, SpilloverSet};
pub use var::{MaCoefficients, VarModel};
