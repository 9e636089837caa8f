fn main() {
    std::process::exit(lattice_gravimetry::cli::main_with_args(std::env::args_os()));
}
