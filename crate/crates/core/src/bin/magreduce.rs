fn main() {
    std::process::exit(magreduce::cli::main_from_env());
}
