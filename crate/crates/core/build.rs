//! Chooses the LAPACK/BLAS behind the dense PSD-cone kernels.
//!
//! The solver links the system OpenBLAS. OpenBLAS 0.3.20 on Cooperlake
//! cores returns spurious `dpotrf` failures above dimension 32, which stalls
//! every PSD block of that size at the first iteration. When the netlib
//! reference archives are present they are linked in whole; definitions in
//! the executable take precedence over the shared library.
//!
//! `MPI_INNER_BLAS=openblas` keeps plain OpenBLAS; `MPI_INNER_LAPACK_DIR`
//! and `MPI_INNER_BLAS_DIR` override the archive locations.

use std::env;
use std::path::PathBuf;

fn main() {
    println!("cargo:rerun-if-changed=build.rs");
    println!("cargo:rerun-if-env-changed=MPI_INNER_BLAS");
    println!("cargo:rerun-if-env-changed=MPI_INNER_LAPACK_DIR");
    println!("cargo:rerun-if-env-changed=MPI_INNER_BLAS_DIR");

    if env::var("MPI_INNER_BLAS").is_ok_and(|v| v == "openblas") {
        return;
    }
    let dir = |var: &str, default: &str| PathBuf::from(env::var(var).unwrap_or_else(|_| default.into()));
    let lapack = dir("MPI_INNER_LAPACK_DIR", "/usr/lib/x86_64-linux-gnu/lapack");
    let blas = dir("MPI_INNER_BLAS_DIR", "/usr/lib/x86_64-linux-gnu/blas");
    if !(lapack.join("liblapack.a").exists() && blas.join("libblas.a").exists()) {
        println!("cargo:warning=reference LAPACK/BLAS archives not found; using system OpenBLAS as is");
        return;
    }
    println!("cargo:rustc-link-search=native={}", lapack.display());
    println!("cargo:rustc-link-search=native={}", blas.display());
    println!("cargo:rustc-link-lib=static:+whole-archive,-bundle=lapack");
    println!("cargo:rustc-link-lib=static:-bundle=blas");
    println!("cargo:rustc-link-lib=dylib=gfortran");
}
