//! Mapper graphs and subpopulation analysis for multidimensional tabular data.
//!
//! The crate is organised around the exploration loop: load a [`DataTable`],
//! build a [`MapperGraph`] from a filter cover and per-element DBSCAN, lay it
//! out, select subpopulations from the graph, and run analysis modules
//! (regression, feature ranking, PCA, t-SNE) on the selected rows.

pub mod analysis;
pub mod data;
pub mod document;
pub mod layout;
pub mod mapper;
pub mod matrix;
pub mod selection;

pub use data::{Column, ColumnKind, DataError, DataTable, LoadOptions, MissingPolicy, Normalization};
pub use document::{DocumentError, SubpopulationDocument};
pub use layout::{LayoutError, LayoutMethod, LayoutResult};
pub use mapper::{ClusterParams, FilterSpec, MapperError, MapperGraph, MapperParams};
pub use matrix::Matrix;
pub use selection::{Selection, SelectionError, SelectionMode};
