fn main() {
    std::process::exit(slopetrack::cli::main_from_args(std::env::args_os()));
}
