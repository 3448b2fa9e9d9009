fn main() {
    std::process::exit(gpwave::cli::run(std::env::args_os()));
}
