fn main() {
    std::process::exit(spectral_reg::cli::main_with_args(std::env::args_os()));
}
