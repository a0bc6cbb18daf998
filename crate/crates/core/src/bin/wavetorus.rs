fn main() {
    std::process::exit(wavetorus::cli::main_with_args(std::env::args_os()));
}
