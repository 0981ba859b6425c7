fn main() {
    std::process::exit(dsnn_core::cli::run(std::env::args_os()));
}
