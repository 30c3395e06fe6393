fn main() {
    std::process::exit(signeq::cli::run(std::env::args_os()));
}
