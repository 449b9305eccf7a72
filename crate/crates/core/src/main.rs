fn main() {
    std::process::exit(sbpp::cli::run(std::env::args_os()));
}
