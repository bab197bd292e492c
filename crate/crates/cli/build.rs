//! Generate the bundled example files from their Pauli-coefficient
//! definitions at build time; they are embedded into the binary and can be
//! written out with `--emit-fixtures`.

use std::env;
use std::fs;
use std::path::PathBuf;

use procmat::catalog;
use procmat::json::{operator_to_json, scenario_to_json};
use procmat::GameSpec;

fn main() {
    let out = PathBuf::from(env::var("OUT_DIR").expect("OUT_DIR set by cargo")).join("fixtures");
    fs::create_dir_all(&out).expect("create fixture dir");
    let write = |name: &str, content: String| {
        fs::write(out.join(name), content).expect("write fixture");
    };
    write(
        "activatable.json",
        operator_to_json(&catalog::activatable_process()),
    );
    write(
        "activated.json",
        operator_to_json(&catalog::activated_process()),
    );
    write("ocb.json", operator_to_json(&catalog::ocb_process()));
    write(
        "activatable_scenario.json",
        scenario_to_json(&catalog::activatable_scenario()),
    );
    write(
        "activated_scenario.json",
        scenario_to_json(&catalog::activated_scenario()),
    );
    write(
        "ocb_scenario.json",
        scenario_to_json(&catalog::ocb_scenario()),
    );
    write(
        "lazy_guess_game.json",
        serde_json::to_string(&GameSpec::lazy_guess()).expect("serialize game"),
    );
    println!("cargo:rerun-if-changed=build.rs");
}
