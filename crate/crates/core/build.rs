fn main() {
    // system reference BLAS/LAPACK (or whatever the alternatives system points at)
    println!("cargo:rustc-link-lib=dylib=lapack");
    println!("cargo:rustc-link-lib=dylib=blas");
}
