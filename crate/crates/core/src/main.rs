fn main() {
    std::process::exit(fdbw_core::cli::run(std::env::args_os()));
}
