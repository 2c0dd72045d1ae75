//! Binary entry point: delegates to the scenario-runner CLI.

fn main() {
    std::process::exit(cartanlab::harness::cli::main_entry());
}
