fn main() {
    std::process::exit(snomial::cli::run_from_args(std::env::args_os()));
}
