fn main() {
    std::process::exit(halfflow::cli::dispatch(std::env::args_os()));
}
