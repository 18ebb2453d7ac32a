fn main() {
    // zgeev comes from the system LAPACK
    println!("cargo:rustc-link-lib=lapack");
}
