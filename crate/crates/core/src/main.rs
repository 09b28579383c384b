fn main() {
    std::process::exit(wavehier::cli::run(std::env::args_os()));
}
