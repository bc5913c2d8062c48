use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = env::var("CARGO_MANIFEST_DIR").unwrap();
    let out = PathBuf::from(env::var("OUT_DIR").unwrap()).join("dynkin.h");
    match cbindgen::generate(&crate_dir) {
        Ok(bindings) => {
            bindings.write_to_file(&out);
            // Keep a copy at a stable path for non-cargo consumers.
            let _ = std::fs::create_dir_all(PathBuf::from(&crate_dir).join("include"));
            let _ = std::fs::copy(&out, PathBuf::from(&crate_dir).join("include/dynkin.h"));
        }
        Err(err) => {
            println!("cargo:warning=header generation failed: {err}");
        }
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
