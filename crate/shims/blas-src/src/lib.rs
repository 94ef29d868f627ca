//! Stand-in for the `blas-src` crate. The BLAS and LAPACK symbols are
//! provided by the system OpenBLAS that `openblas-src` (feature `system`)
//! links into the final artifact.
