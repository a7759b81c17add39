//! Partially synthetic microdata with exact point geocodes.
//!
//! The crate covers the full desk-scale pipeline for releasing microdata in
//! which the geocode (and optionally further variables) is replaced by model
//! draws: MDAV clustering into fixed-size spatial clusters, CART and DPMPM
//! synthesizers run independently per cluster, and evaluation of the result
//! on both the analytical-validity axis (regional shares, interaction-table
//! differences, multitype K/L functions) and the disclosure-risk axis
//! (identification probabilities and their three summary measures).

pub mod aggregation;
pub mod cart;
pub mod data;
pub mod dpmpm;
pub mod error;
pub mod grid;
pub mod mdav;
pub mod risk;
pub mod seed;
pub mod simulate;
pub mod utility;

pub use data::{
    concat_geocode_as_categorical, csv_header, decode_geocode_column, Column, Dataset,
    GeoCodebook, GeoPoint, Schema, SyntheticRelease, VarKind, Variable,
};
pub use error::{Error, Result};
pub use mdav::{mdav_partition, reassemble, split_dataset, ClusterPartition};
