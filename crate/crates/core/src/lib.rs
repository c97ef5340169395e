//! Building blocks for reference-based image insertion: in-context canvas
//! assembly, hybrid masks, adaptive crop-and-zoom, a reference attention
//! kernel, dataset-construction filters, quality metrics, and a client and
//! mock server for the insertion backend protocol.

pub mod adaptivecrop;
pub mod attention;
pub mod backend;
pub mod canvas;
pub mod imagecore;
pub mod maskgen;
pub mod promptkit;
pub mod rng;
pub mod datasetforge;
pub mod metrics;
