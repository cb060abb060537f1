fn main() {
    std::process::exit(cbs_core::cli::run(std::env::args_os()));
}
