fn main() {
    std::process::exit(deo_core::cli::run(std::env::args_os()));
}
