fn main() {
    std::process::exit(weighted_blowup::cli::main_with_args(std::env::args_os()));
}
