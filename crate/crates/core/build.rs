fn main() {
    // LAPACK/BLAS symbols for ndarray-linalg and the cblas_*gemm kernels come
    // from the system OpenBLAS; the *-src crates are not usable offline.
    println!("cargo:rustc-link-search=native=/usr/lib/x86_64-linux-gnu");
    println!("cargo:rustc-link-lib=dylib=openblas");
}
