fn main() {
    std::process::exit(protocoling::cli::run(std::env::args_os()));
}
