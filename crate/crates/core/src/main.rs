fn main() {
    std::process::exit(deep_energy::cli::run(std::env::args_os()));
}
