fn main() {
    std::process::exit(ecgl::cli::run(std::env::args_os()));
}
