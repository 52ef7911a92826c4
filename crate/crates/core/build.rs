use std::process::Command;

fn main() {
    // BLAS/LAPACK provider for ndarray's blas feature and ndarray-linalg.
    println!("cargo:rustc-link-lib=dylib=openblas");

    let hash = Command::new("git")
        .args(["rev-parse", "--short", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".to_string());
    println!("cargo:rustc-env=BUILD_GIT_HASH={}", hash);
}
