// LAPACK comes from the system. OpenBLAS bundles it; set DWELLSWITCH_LAPACK
// to link another library name (for example `lapack`).
fn main() {
    println!("cargo:rerun-if-env-changed=DWELLSWITCH_LAPACK");
    let lib = std::env::var("DWELLSWITCH_LAPACK").unwrap_or_else(|_| "openblas".to_string());
    println!("cargo:rustc-link-lib={lib}");
}
