fn main() {
    std::process::exit(popsynth::cli::main());
}
