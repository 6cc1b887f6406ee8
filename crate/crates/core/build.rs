// Links reference LAPACK and BLAS statically. Some OpenBLAS builds pick a
// kernel at load time that breaks `dpotrf` above 32x32, which the PSD cone
// relies on. Set NASH_SDP_BLAS_LIBS (comma separated, e.g. "openblas") to
// link other libraries dynamically instead, and NASH_SDP_BLAS_DIR to add a
// search path.
use std::env;
use std::path::Path;

fn main() {
    println!("cargo:rerun-if-env-changed=NASH_SDP_BLAS_LIBS");
    println!("cargo:rerun-if-env-changed=NASH_SDP_BLAS_DIR");
    if let Ok(dir) = env::var("NASH_SDP_BLAS_DIR") {
        println!("cargo:rustc-link-search=native={dir}");
    }
    if let Ok(libs) = env::var("NASH_SDP_BLAS_LIBS") {
        for lib in libs.split(',').map(str::trim).filter(|l| !l.is_empty()) {
            println!("cargo:rustc-link-lib=dylib={lib}");
        }
        return;
    }
    for dir in ["/usr/lib/x86_64-linux-gnu/lapack", "/usr/lib/x86_64-linux-gnu/blas", "/usr/lib64", "/usr/lib"] {
        if Path::new(dir).is_dir() {
            println!("cargo:rustc-link-search=native={dir}");
        }
    }
    println!("cargo:rustc-link-lib=static=lapack");
    println!("cargo:rustc-link-lib=static=blas");
    println!("cargo:rustc-link-lib=dylib=gfortran");
}
