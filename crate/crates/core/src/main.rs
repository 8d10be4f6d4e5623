fn main() {
    std::process::exit(intersim::cli::parse_and_dispatch(std::env::args_os()));
}
