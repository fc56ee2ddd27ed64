fn main() {
    std::process::exit(sectorcast::cli::main_with_args(std::env::args_os()));
}
